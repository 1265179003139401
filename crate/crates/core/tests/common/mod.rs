//! Shared helpers for the integration tests.
#![allow(dead_code)]

use rand::Rng;
use rare::data::{chrono_split, Interaction, InteractionSet, SplitDataset};
use rare::model::ItemCatalog;
use rare::riskdist::RatingDistribution;

/// Adaptive Simpson integration of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn step<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Weibull density `μη z^(μ−1) exp(−η z^μ)`, written out independently of the library.
pub fn weibull_pdf(z: f64, mu: f64, eta: f64) -> f64 {
    if z <= 0.0 {
        return 0.0;
    }
    mu * eta * z.powf(mu - 1.0) * (-eta * z.powf(mu)).exp()
}

/// Interval probabilities of the five rating levels by quadrature.
///
/// Integrates in `t = ln z`, where the integrand `z f(z)` is smooth and
/// decays at both ends; the range is cut where the neglected mass drops
/// below 1e-18.
pub fn quadrature_interval_probs(mu: f64, eta: f64) -> [f64; 5] {
    let g = |t: f64| {
        let z = t.exp();
        z * weibull_pdf(z, mu, eta)
    };
    // η z^μ = c  ⇔  t = ln(c/η)/μ
    let lo = (1e-18 / eta).ln() / mu;
    let hi = (60.0 / eta).ln() / mu;
    let cuts = [lo.min(1.5f64.ln() - 1.0), 1.5f64.ln(), 2.5f64.ln(), 3.5f64.ln(), 4.5f64.ln(), hi.max(4.5f64.ln() + 1.0)];
    let mut out = [0.0; 5];
    for i in 0..5 {
        // split long ranges so the adaptive rule sees the peak
        let (a, b) = (cuts[i], cuts[i + 1]);
        let pieces = ((b - a) / 0.5).ceil().max(1.0) as usize;
        let h = (b - a) / pieces as f64;
        out[i] = (0..pieces).map(|j| simpson(&g, a + h * j as f64, a + h * (j + 1) as f64, 1e-14)).sum();
    }
    out
}

/// Log-uniform draw from `[lo, hi]`.
pub fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo.ln()..hi.ln()).exp()
}

/// Random five-level distribution with every level positive.
pub fn random_distribution<R: Rng>(rng: &mut R) -> RatingDistribution {
    let raw: [f64; 5] = std::array::from_fn(|_| rng.random_range(0.05..1.0));
    let total: f64 = raw.iter().sum();
    RatingDistribution::new(raw.map(|x| x / total)).unwrap()
}

pub fn random_catalog<R: Rng>(rng: &mut R, m: usize) -> ItemCatalog {
    let dists = (0..m).map(|_| random_distribution(rng)).collect();
    let prices = (0..m).map(|_| rng.random_range(1.0..20.0)).collect();
    ItemCatalog::new(dists, prices).unwrap()
}

/// `n` users who each buy `per_user` items from a catalog of `m`, with
/// item choices spread by a fixed stride.
pub fn strided_split(n: usize, m: usize, per_user: usize) -> SplitDataset {
    let mut records = Vec::new();
    for u in 0..n {
        for t in 0..per_user {
            records.push(Interaction {
                user_id: format!("u{u:05}"),
                item_id: format!("i{:05}", (u * 7 + t * 13) % m),
                rating: 4,
                timestamp: t as i64,
                price: 1.0,
            });
        }
    }
    let users = (0..n).map(|u| format!("u{u:05}")).collect();
    let items = (0..m).map(|v| format!("i{v:05}")).collect();
    chrono_split(&InteractionSet::with_universe(users, items, records).unwrap()).unwrap()
}
