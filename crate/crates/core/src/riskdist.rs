//! Per-item rating ("risk") distributions.
//!
//! Items whose observed ratings cover all five levels use their raw
//! frequencies. Items with an empty level are smoothed by fitting a Weibull
//! density `f(z) = μη z^(μ-1) exp(-η z^μ)` and integrating it over the unit
//! interval around each rating.

use serde::{Deserialize, Serialize};

use crate::error::{RareError, Result};

pub const RATING_LEVELS: usize = 5;

const SUM_TOLERANCE: f64 = 1e-9;

/// Probabilities of ratings 1..=5.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 5]", into = "[f64; 5]")]
pub struct RatingDistribution([f64; RATING_LEVELS]);

impl RatingDistribution {
    pub fn new(p: [f64; RATING_LEVELS]) -> Result<Self> {
        if let Some(bad) = p.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(RareError::InvalidDistribution(format!(
                "probability {bad} outside [0, 1]"
            )));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(RareError::InvalidDistribution(format!(
                "probabilities sum to {total}"
            )));
        }
        Ok(RatingDistribution(p))
    }

    pub fn uniform() -> Self {
        RatingDistribution([0.2; RATING_LEVELS])
    }

    pub fn probs(&self) -> &[f64; RATING_LEVELS] {
        &self.0
    }

    /// Probability of rating `level` (1-based).
    pub fn p(&self, level: usize) -> f64 {
        self.0[level - 1]
    }

    pub fn sse(&self, other: &RatingDistribution) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).powi(2)).sum()
    }
}

impl TryFrom<[f64; RATING_LEVELS]> for RatingDistribution {
    type Error = RareError;

    fn try_from(p: [f64; RATING_LEVELS]) -> Result<Self> {
        RatingDistribution::new(p)
    }
}

impl From<RatingDistribution> for [f64; RATING_LEVELS] {
    fn from(d: RatingDistribution) -> Self {
        d.0
    }
}

/// Weibull shape `μ` and rate-like scale `η`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeibullParams {
    shape: f64,
    rate: f64,
}

impl WeibullParams {
    pub fn new(shape: f64, rate: f64) -> Result<Self> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        if !ok(shape) || !ok(rate) {
            return Err(RareError::InvalidWeibull { shape, rate });
        }
        Ok(WeibullParams { shape, rate })
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn pdf(&self, z: f64) -> f64 {
        if z <= 0.0 {
            return 0.0;
        }
        self.shape * self.rate * z.powf(self.shape - 1.0) * (-self.rate * z.powf(self.shape)).exp()
    }

    pub fn cdf(&self, z: f64) -> f64 {
        if z <= 0.0 {
            return 0.0;
        }
        -(-self.rate * z.powf(self.shape)).exp_m1()
    }

    fn survival(&self, z: f64) -> f64 {
        (-self.rate * z.powf(self.shape)).exp()
    }
}

/// Where a resolved distribution came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistributionSource {
    Empirical,
    Weibull,
}

impl DistributionSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            DistributionSource::Empirical => "empirical",
            DistributionSource::Weibull => "weibull",
        }
    }
}

/// Raw relative frequencies of the five rating levels.
pub fn empirical_distribution(counts: &[u64; RATING_LEVELS]) -> Result<RatingDistribution> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(RareError::EmptyCounts);
    }
    let t = total as f64;
    Ok(RatingDistribution(counts.map(|c| c as f64 / t)))
}

/// Integrates the Weibull density over `[i-0.5, i+0.5]` for each rating,
/// with the outer intervals extended to the ends of the support.
pub fn weibull_interval_probs(params: &WeibullParams) -> RatingDistribution {
    // Survival differences telescope to exactly 1 - S(4.5) + S(4.5).
    let s: [f64; 4] = [1.5, 2.5, 3.5, 4.5].map(|z| params.survival(z));
    RatingDistribution([
        params.cdf(1.5),
        s[0] - s[1],
        s[1] - s[2],
        s[2] - s[3],
        s[3],
    ])
}

const GRID_POINTS: usize = 64;
const SHAPE_BOUNDS: (f64, f64) = (0.1, 10.0);
const RATE_BOUNDS: (f64, f64) = (1e-4, 10.0);
// Halving 36 times takes the step from one grid cell to ~1e-12 in log space.
const REFINE_ROUNDS: usize = 36;
const MAX_MOVES_PER_ROUND: usize = 10_000;
const MAX_STARTS: usize = 16;
const SCREEN_ROUNDS: usize = 8;

fn log_grid(bounds: (f64, f64)) -> Vec<f64> {
    let (lo, hi) = (bounds.0.ln(), bounds.1.ln());
    let step = (hi - lo) / (GRID_POINTS - 1) as f64;
    (0..GRID_POINTS).map(|i| (lo + step * i as f64).exp()).collect()
}

const PATTERN: [(f64, f64); 8] = [
    (1.0, 0.0),
    (-1.0, 0.0),
    (0.0, 1.0),
    (0.0, -1.0),
    (1.0, 1.0),
    (-1.0, -1.0),
    (1.0, -1.0),
    (-1.0, 1.0),
];

/// Least-squares Weibull fit to a five-level target distribution.
///
/// A 64×64 log-spaced grid over `μ ∈ [0.1, 10]`, `η ∈ [1e-4, 10]` locates
/// the basins: every grid point no worse than its eight neighbours starts a
/// short pattern search in log space (step halved per round), and the best
/// of those is refined to a step of ~1e-12. Moves are accepted only on
/// strict improvement, so the result is never worse than the best grid
/// point.
pub fn fit_weibull(target: &RatingDistribution) -> WeibullParams {
    let shapes = log_grid(SHAPE_BOUNDS);
    let rates = log_grid(RATE_BOUNDS);
    let sse: Vec<Vec<f64>> = shapes
        .iter()
        .map(|&shape| {
            rates
                .iter()
                .map(|&rate| weibull_interval_probs(&WeibullParams { shape, rate }).sse(target))
                .collect()
        })
        .collect();
    let mut starts = Vec::new();
    for i in 0..GRID_POINTS {
        for j in 0..GRID_POINTS {
            let neighbours = (i.saturating_sub(1)..=(i + 1).min(GRID_POINTS - 1))
                .flat_map(|a| (j.saturating_sub(1)..=(j + 1).min(GRID_POINTS - 1)).map(move |b| (a, b)));
            if neighbours.into_iter().all(|(a, b)| sse[i][j] <= sse[a][b]) {
                starts.push((sse[i][j], i, j));
            }
        }
    }
    starts.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    starts.truncate(MAX_STARTS);
    let cell = |bounds: (f64, f64)| (bounds.1.ln() - bounds.0.ln()) / (GRID_POINTS - 1) as f64;
    // a few rounds per start pick the basin, the rest polish the winner
    let screened = starts
        .into_iter()
        .map(|(sse, i, j)| {
            let start = Search {
                sse,
                x: shapes[i].ln(),
                y: rates[j].ln(),
                step_x: cell(SHAPE_BOUNDS),
                step_y: cell(RATE_BOUNDS),
            };
            start.refine(target, SCREEN_ROUNDS)
        })
        .min_by(|a, b| a.sse.total_cmp(&b.sse))
        .expect("the global grid minimum is always a start");
    let best = screened.refine(target, REFINE_ROUNDS - SCREEN_ROUNDS);
    WeibullParams {
        shape: best.x.exp(),
        rate: best.y.exp(),
    }
}

/// Pattern-search state in log space.
#[derive(Clone, Copy)]
struct Search {
    sse: f64,
    x: f64,
    y: f64,
    step_x: f64,
    step_y: f64,
}

impl Search {
    fn refine(mut self, target: &RatingDistribution, rounds: usize) -> Search {
        let bounds_x = (SHAPE_BOUNDS.0.ln(), SHAPE_BOUNDS.1.ln());
        let bounds_y = (RATE_BOUNDS.0.ln(), RATE_BOUNDS.1.ln());
        for _ in 0..rounds {
            self.step_x /= 2.0;
            self.step_y /= 2.0;
            for _ in 0..MAX_MOVES_PER_ROUND {
                let mut moved = false;
                for (dx, dy) in PATTERN {
                    let nx = (self.x + dx * self.step_x).clamp(bounds_x.0, bounds_x.1);
                    let ny = (self.y + dy * self.step_y).clamp(bounds_y.0, bounds_y.1);
                    let cand = WeibullParams {
                        shape: nx.exp(),
                        rate: ny.exp(),
                    };
                    let cand_sse = weibull_interval_probs(&cand).sse(target);
                    if cand_sse < self.sse {
                        (self.sse, self.x, self.y) = (cand_sse, nx, ny);
                        moved = true;
                    }
                }
                if !moved {
                    break;
                }
            }
        }
        self
    }
}

/// Empirical frequencies when every level was observed, otherwise the
/// Weibull-smoothed fit to them.
pub fn resolve_distribution(
    counts: &[u64; RATING_LEVELS],
) -> Result<(RatingDistribution, DistributionSource)> {
    let empirical = empirical_distribution(counts)?;
    if counts.iter().all(|&c| c > 0) {
        return Ok((empirical, DistributionSource::Empirical));
    }
    let fitted = weibull_interval_probs(&fit_weibull(&empirical));
    // Extreme fits underflow far tails to exactly 0.0 in f64; keep them at the
    // smallest normal value so the smoothed support stays strictly positive.
    let p = fitted.0.map(|x| x.max(f64::MIN_POSITIVE));
    Ok((RatingDistribution(p), DistributionSource::Weibull))
}
