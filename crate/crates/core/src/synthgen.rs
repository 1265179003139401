//! Synthetic prospect-theoretic consumers with known parameters.
//!
//! The ground truth is itself a full-mode [`RareModel`]: every user gets
//! per-parameter biases drawn in constrained space, items get small biases
//! and latent factors. Each interaction offers three unseen items, drawn
//! without replacement with logit weights of their true prospect values,
//! and the user picks one of them by the same logit rule.

use std::io::Write;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Gumbel, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::data::{Interaction, InteractionSet, SplitDataset};
use crate::error::{RareError, Result};
use crate::model::{mnl_probability, ItemCatalog, ParamKind, ParameterTables, RareModel};
use crate::prospect::AblationMode;
use crate::riskdist::{RatingDistribution, RATING_LEVELS};

/// Alternatives offered per choice round.
pub const CHOICE_SET_SIZE: usize = 3;

/// Per-user draw ranges of α, β, λ, γ, δ in constrained space.
const PARAM_RANGES: [(f64, f64); 5] = [(0.5, 0.95), (0.5, 0.95), (0.4, 0.9), (0.4, 0.9), (0.4, 0.9)];
const REFERENCE_RANGE: (f64, f64) = (2.0, 4.0);
const ITEM_BIAS_STD: f64 = 0.3;
const FACTOR_STD: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_users: usize,
    pub n_items: usize,
    pub k_true: usize,
    pub price_range: (f64, f64),
    /// Larger values give more peaked rating distributions.
    pub dist_concentration: f64,
    pub interactions_per_user: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_users: 200,
            n_items: 300,
            k_true: 2,
            price_range: (1.0, 50.0),
            dist_concentration: 1.0,
            interactions_per_user: 30,
            seed: 7,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(RareError::InvalidSpec(m));
        if self.n_users == 0 || self.n_items == 0 || self.k_true == 0 {
            return bad("n_users, n_items and k_true must be positive".into());
        }
        if self.interactions_per_user < 3 {
            return bad(format!("{} interactions per user cannot be split", self.interactions_per_user));
        }
        if self.n_items < self.interactions_per_user + CHOICE_SET_SIZE - 1 {
            return bad(format!(
                "{} items cannot offer {CHOICE_SET_SIZE} unseen alternatives for {} rounds",
                self.n_items, self.interactions_per_user
            ));
        }
        let (lo, hi) = self.price_range;
        if !(lo.is_finite() && hi.is_finite() && 0.0 < lo && lo <= hi) {
            return bad(format!("invalid price range ({lo}, {hi})"));
        }
        if !(self.dist_concentration.is_finite() && self.dist_concentration > 0.0) {
            return bad(format!("invalid concentration {}", self.dist_concentration));
        }
        Ok(())
    }
}

/// True parameters, item rating distributions and prices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub params: ParameterTables,
    pub catalog: ItemCatalog,
}

impl GroundTruth {
    pub fn model(&self) -> RareModel {
        RareModel {
            params: self.params.clone(),
            mode: AblationMode::Full,
        }
    }

    pub fn n_users(&self) -> usize {
        self.params.reference.len()
    }

    pub fn n_items(&self) -> usize {
        self.catalog.len()
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer(out, self)?;
        Ok(())
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Symmetric Dirichlet draw with parameter `1/concentration`.
///
/// Works in log space: for small shapes the gamma variates underflow, so
/// `Gamma(a) = Gamma(a+1)·U^(1/a)` is used on the log scale.
fn dirichlet<R: Rng + ?Sized>(concentration: f64, rng: &mut R) -> RatingDistribution {
    let a = 1.0 / concentration;
    let gamma = Gamma::new(a + 1.0, 1.0).expect("positive shape");
    let logs: [f64; RATING_LEVELS] = std::array::from_fn(|_| {
        let g: f64 = gamma.sample(rng);
        let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
        g.ln() + u.ln() / a
    });
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w = logs.map(|l| (l - max).exp());
    let total: f64 = w.iter().sum();
    let mut p = w.map(|x| x / total);
    // push rounding residue onto the largest entry
    let residue = 1.0 - p.iter().sum::<f64>();
    let top = (0..RATING_LEVELS).max_by(|&i, &j| p[i].total_cmp(&p[j])).expect("non-empty");
    p[top] = (p[top] + residue).clamp(0.0, 1.0);
    RatingDistribution::new(p).expect("normalized draw")
}

fn draw_rating<R: Rng + ?Sized>(dist: &RatingDistribution, rng: &mut R) -> u8 {
    let x: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in dist.probs().iter().enumerate() {
        acc += p;
        if x < acc {
            return i as u8 + 1;
        }
    }
    // x landed in the rounding gap; take the last level with mass
    (0..RATING_LEVELS).rev().find(|&i| dist.probs()[i] > 0.0).unwrap_or(RATING_LEVELS - 1) as u8 + 1
}

/// Samples the true model, distributions and prices.
pub fn sample_truth<R: Rng + ?Sized>(spec: &SynthSpec, rng: &mut R) -> Result<GroundTruth> {
    spec.validate()?;
    let (n, m, k) = (spec.n_users, spec.n_items, spec.k_true);
    let mut params = ParameterTables::zeros(n, m, k);
    let item_bias = Normal::new(0.0, ITEM_BIAS_STD).expect("finite std");
    let factor = Normal::new(0.0, FACTOR_STD).expect("finite std");
    for (kind, (lo, hi)) in ParamKind::ALL.into_iter().zip(PARAM_RANGES) {
        let theta = params.param_mut(kind);
        theta.global_bias = logit(0.5 * (lo + hi));
        let user = Uniform::new(lo, hi).expect("ordered range");
        for b in theta.user_bias.iter_mut() {
            *b = logit(user.sample(rng)) - theta.global_bias;
        }
        for l in theta.item_bias.iter_mut() {
            *l = item_bias.sample(rng);
        }
        for x in theta.user_factors.iter_mut().chain(theta.item_factors.iter_mut()) {
            *x = factor.sample(rng);
        }
    }
    let reference = Uniform::new(REFERENCE_RANGE.0, REFERENCE_RANGE.1).expect("ordered range");
    for r in params.reference.iter_mut() {
        *r = reference.sample(rng);
    }
    let dists = (0..m).map(|_| dirichlet(spec.dist_concentration, rng)).collect();
    let (lo, hi) = spec.price_range;
    let prices = (0..m).map(|_| if lo == hi { lo } else { rng.random_range(lo..hi) }).collect();
    Ok(GroundTruth {
        params,
        catalog: ItemCatalog::new(dists, prices)?,
    })
}

/// Picks one of `candidates` with logit probabilities of the true values.
pub fn choose<R: Rng + ?Sized>(truth: &RareModel, catalog: &ItemCatalog, u: usize, candidates: &[usize], rng: &mut R) -> usize {
    let values: Vec<f64> = candidates.iter().map(|&v| truth.score(u, v, catalog)).collect();
    candidates[choose_index(&values, rng)]
}

fn choose_index<R: Rng + ?Sized>(values: &[f64], rng: &mut R) -> usize {
    let probs = mnl_probability(values);
    let x: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if x < acc {
            return i;
        }
    }
    values.len() - 1
}

/// Positions of `count` entries drawn without replacement with
/// probabilities proportional to `exp(values)` (Gumbel top-k).
fn logit_sample_without_replacement<R: Rng + ?Sized>(values: &[f64], count: usize, rng: &mut R) -> Vec<usize> {
    let gumbel = Gumbel::new(0.0, 1.0).expect("unit scale");
    let mut keyed: Vec<(f64, usize)> = values
        .iter()
        .enumerate()
        .map(|(i, v)| (v + gumbel.sample(rng), i))
        .collect();
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    keyed.into_iter().take(count).map(|(_, i)| i).collect()
}

pub struct SynthData {
    pub interactions: InteractionSet,
    pub truth: GroundTruth,
}

pub fn user_id(u: usize) -> String {
    format!("u{u:06}")
}

pub fn item_id(v: usize) -> String {
    format!("i{v:06}")
}

/// Generates a full synthetic population. Deterministic under `spec.seed`.
pub fn generate(spec: &SynthSpec) -> Result<SynthData> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let truth = sample_truth(spec, &mut rng)?;
    let model = truth.model();
    let mut records = Vec::with_capacity(spec.n_users * spec.interactions_per_user);
    let mut timestamp = 0i64;
    for u in 0..spec.n_users {
        let all_values: Vec<f64> = (0..spec.n_items).map(|v| model.score(u, v, &truth.catalog)).collect();
        let mut unseen: Vec<usize> = (0..spec.n_items).collect();
        for _ in 0..spec.interactions_per_user {
            let values: Vec<f64> = unseen.iter().map(|&v| all_values[v]).collect();
            let picks = logit_sample_without_replacement(&values, CHOICE_SET_SIZE, &mut rng);
            let offered: Vec<f64> = picks.iter().map(|&i| values[i]).collect();
            let at = picks[choose_index(&offered, &mut rng)];
            let chosen = unseen.swap_remove(at);
            records.push(Interaction {
                user_id: user_id(u),
                item_id: item_id(chosen),
                rating: draw_rating(&truth.catalog.dists[chosen], &mut rng),
                timestamp,
                price: truth.catalog.prices[chosen],
            });
            timestamp += 1;
        }
    }
    let users = (0..spec.n_users).map(user_id).collect();
    let items = (0..spec.n_items).map(item_id).collect();
    Ok(SynthData {
        interactions: InteractionSet::with_universe(users, items, records)?,
        truth,
    })
}

/// Writes interactions in the ingest CSV layout.
pub fn write_interactions_csv<W: Write>(set: &InteractionSet, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["user_id", "item_id", "rating", "timestamp", "price"])?;
    for r in set.interactions() {
        w.write_record([
            r.user_id.clone(),
            r.item_id.clone(),
            r.rating.to_string(),
            r.timestamp.to_string(),
            r.price.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `count` distinct `(user, item)` pairs the user never interacted with.
pub fn sample_probe_pairs<R: Rng + ?Sized>(split: &SplitDataset, count: usize, rng: &mut R) -> Vec<(usize, usize)> {
    let total: usize = split.candidate_pool.iter().map(Vec::len).sum();
    let count = count.min(total);
    let mut offsets: Vec<usize> = sample(rng, total, count).into_vec();
    offsets.sort_unstable();
    let mut out = Vec::with_capacity(count);
    let mut base = 0;
    let mut it = offsets.into_iter().peekable();
    for (u, pool) in split.candidate_pool.iter().enumerate() {
        while let Some(&o) = it.peek() {
            if o >= base + pool.len() {
                break;
            }
            out.push((u, pool[o - base]));
            it.next();
        }
        base += pool.len();
    }
    out
}

/// Average ranks, ties sharing the mean of their positions (1-based).
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&i, &j| x[i].total_cmp(&x[j]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let mean = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = mean;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman correlation with tie-averaged ranks. Zero variance on either
/// side gives `(0.0, true)`.
pub fn spearman(a: &[f64], b: &[f64]) -> (f64, bool) {
    assert_eq!(a.len(), b.len());
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return (0.0, true);
    }
    ((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0), false)
}

pub const MIN_PROBES: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub value_correlation: f64,
    pub value_degenerate: bool,
    pub reference_correlation: f64,
    pub reference_degenerate: bool,
    pub probes: usize,
}

/// Rank agreement between learned and true prospect values on `probes`,
/// and between learned and true reference points over all users.
///
/// `catalog` holds the distributions and prices the trained model scores
/// with, which need not equal the generator's.
pub fn recovery_report(
    trained: &RareModel,
    catalog: &ItemCatalog,
    truth: &GroundTruth,
    probes: &[(usize, usize)],
) -> Result<RecoveryReport> {
    if probes.len() < MIN_PROBES {
        return Err(RareError::TooFewProbes(probes.len()));
    }
    let truth_model = truth.model();
    let (n, m) = (truth.n_users().min(trained.n_users()), truth.n_items().min(trained.n_items()).min(catalog.len()));
    if let Some(&(u, v)) = probes.iter().find(|&&(u, v)| u >= n || v >= m) {
        return Err(RareError::IndexOutOfRange(format!("probe ({u}, {v})")));
    }
    let learned: Vec<f64> = probes.iter().map(|&(u, v)| trained.score(u, v, catalog)).collect();
    let actual: Vec<f64> = probes.iter().map(|&(u, v)| truth_model.score(u, v, &truth.catalog)).collect();
    let (value_correlation, value_degenerate) = spearman(&learned, &actual);
    let (reference_correlation, reference_degenerate) =
        spearman(&trained.params.reference[..n], &truth.params.reference[..n]);
    Ok(RecoveryReport {
        value_correlation,
        value_degenerate,
        reference_correlation,
        reference_degenerate,
        probes: probes.len(),
    })
}
