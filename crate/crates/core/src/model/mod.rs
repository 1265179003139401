//! The trainable risk-aware model.
//!
//! Each of the five prospect parameters is factorized per user-item pair as
//! `sigmoid(g + b_u + l_v + p_u·q_v)`; the sigmoid keeps every parameter in
//! `(0, 1)` while SGD works on unconstrained raw scalars. Reference points
//! are free per-user reals.

pub(crate) mod checkpoint;
pub(crate) mod train;

pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use train::{train, write_training_log, EpochLog, TrainConfig, TrainOutcome};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{RareError, Result};
use crate::prospect::{prospect_value, prospect_value_and_grad, AblationMode, ProspectParams};
use crate::riskdist::RatingDistribution;

/// Logistic function, kept strictly inside `(0, 1)` even where it would
/// round to an endpoint.
pub fn sigmoid(x: f64) -> f64 {
    (1.0 / (1.0 + (-x).exp())).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Rating distribution and price of every item, indexed densely.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItemCatalog {
    pub dists: Vec<RatingDistribution>,
    pub prices: Vec<f64>,
}

impl ItemCatalog {
    pub fn new(dists: Vec<RatingDistribution>, prices: Vec<f64>) -> Result<Self> {
        if dists.len() != prices.len() {
            return Err(RareError::Config(format!(
                "{} distributions but {} prices",
                dists.len(),
                prices.len()
            )));
        }
        if let Some(p) = prices.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(RareError::Config(format!("invalid price {p}")));
        }
        Ok(ItemCatalog { dists, prices })
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }
}

/// The five factorized prospect parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ParamKind {
    Alpha = 0,
    Beta = 1,
    Lambda = 2,
    Gamma = 3,
    Delta = 4,
}

impl ParamKind {
    pub const ALL: [ParamKind; 5] = [
        ParamKind::Alpha,
        ParamKind::Beta,
        ParamKind::Lambda,
        ParamKind::Gamma,
        ParamKind::Delta,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ParamKind::Alpha => "alpha",
            ParamKind::Beta => "beta",
            ParamKind::Lambda => "lambda",
            ParamKind::Gamma => "gamma",
            ParamKind::Delta => "delta",
        }
    }
}

/// Global bias, user/item biases, and user/item latent factors of one
/// parameter. Factor matrices are row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorizedParameter {
    pub global_bias: f64,
    pub user_bias: Vec<f64>,
    pub item_bias: Vec<f64>,
    pub user_factors: Vec<f64>,
    pub item_factors: Vec<f64>,
    k: usize,
}

impl FactorizedParameter {
    pub fn zeros(n_users: usize, n_items: usize, k: usize) -> Self {
        FactorizedParameter {
            global_bias: 0.0,
            user_bias: vec![0.0; n_users],
            item_bias: vec![0.0; n_items],
            user_factors: vec![0.0; n_users * k],
            item_factors: vec![0.0; n_items * k],
            k,
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_users(&self) -> usize {
        self.user_bias.len()
    }

    pub fn n_items(&self) -> usize {
        self.item_bias.len()
    }

    pub fn user_row(&self, u: usize) -> &[f64] {
        &self.user_factors[u * self.k..(u + 1) * self.k]
    }

    pub fn item_row(&self, v: usize) -> &[f64] {
        &self.item_factors[v * self.k..(v + 1) * self.k]
    }

    pub fn raw(&self, u: usize, v: usize) -> f64 {
        let dot: f64 = self.user_row(u).iter().zip(self.item_row(v)).map(|(a, b)| a * b).sum();
        self.global_bias + self.user_bias[u] + self.item_bias[v] + dot
    }

    pub fn scalar_count(&self) -> usize {
        1 + self.user_bias.len() + self.item_bias.len() + self.user_factors.len() + self.item_factors.len()
    }

    /// Everything except the global bias.
    fn local_scalars_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.user_bias
            .iter_mut()
            .chain(self.item_bias.iter_mut())
            .chain(self.user_factors.iter_mut())
            .chain(self.item_factors.iter_mut())
    }

    fn local_scalars(&self) -> impl Iterator<Item = &f64> {
        self.user_bias
            .iter()
            .chain(&self.item_bias)
            .chain(&self.user_factors)
            .chain(&self.item_factors)
    }

    fn same_shape(&self, other: &Self) -> bool {
        self.k == other.k
            && self.user_bias.len() == other.user_bias.len()
            && self.item_bias.len() == other.item_bias.len()
            && self.user_factors.len() == other.user_factors.len()
            && self.item_factors.len() == other.item_factors.len()
    }
}

/// `sigmoid(g + b_u + l_v + p_u·q_v)`.
pub fn param_at(theta: &FactorizedParameter, u: usize, v: usize) -> f64 {
    sigmoid(theta.raw(u, v))
}

/// All raw trainable scalars: five factorized parameters plus reference points.
///
/// Gradients share this layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterTables {
    pub theta: [FactorizedParameter; 5],
    pub reference: Vec<f64>,
}

impl ParameterTables {
    pub fn zeros(n_users: usize, n_items: usize, k: usize) -> Self {
        ParameterTables {
            theta: std::array::from_fn(|_| FactorizedParameter::zeros(n_users, n_items, k)),
            reference: vec![0.0; n_users],
        }
    }

    pub fn zeros_like(other: &Self) -> Self {
        let t = &other.theta[0];
        Self::zeros(t.n_users(), t.n_items(), t.k())
    }

    pub fn param(&self, kind: ParamKind) -> &FactorizedParameter {
        &self.theta[kind as usize]
    }

    pub fn param_mut(&mut self, kind: ParamKind) -> &mut FactorizedParameter {
        &mut self.theta[kind as usize]
    }

    pub fn scalar_count(&self) -> usize {
        self.theta.iter().map(FactorizedParameter::scalar_count).sum::<usize>() + self.reference.len()
    }

    /// Flat view over every scalar in a fixed order.
    pub fn scalars(&self) -> impl Iterator<Item = &f64> {
        self.theta
            .iter()
            .flat_map(|t| std::iter::once(&t.global_bias).chain(t.local_scalars()))
            .chain(&self.reference)
    }

    pub fn scalars_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.theta
            .iter_mut()
            .flat_map(|t| {
                // split the borrow: global first, then the vectors
                let FactorizedParameter {
                    global_bias,
                    user_bias,
                    item_bias,
                    user_factors,
                    item_factors,
                    ..
                } = t;
                std::iter::once(global_bias)
                    .chain(user_bias.iter_mut())
                    .chain(item_bias.iter_mut())
                    .chain(user_factors.iter_mut())
                    .chain(item_factors.iter_mut())
            })
            .chain(self.reference.iter_mut())
    }

    pub fn fill(&mut self, value: f64) {
        self.scalars_mut().for_each(|x| *x = value);
    }

    /// `self += scale · other`.
    pub fn add_scaled(&mut self, scale: f64, other: &ParameterTables) {
        for (a, b) in self.scalars_mut().zip(other.scalars()) {
            *a += scale * b;
        }
    }

    fn same_shape(&self, other: &Self) -> bool {
        self.reference.len() == other.reference.len()
            && self.theta.iter().zip(&other.theta).all(|(a, b)| a.same_shape(b))
    }
}

/// Which raw scalars feed the prospect value under a mode; inactive ones
/// receive neither data gradient nor regularization.
fn is_active(mode: AblationMode, kind: ParamKind, global: bool) -> bool {
    use AblationMode::*;
    use ParamKind::*;
    match (mode, kind) {
        (NoValuePersonalization, Alpha | Beta | Lambda) => global,
        (NoWeighting, Gamma | Delta) => false,
        (NoReference, Beta | Lambda | Delta) => false,
        _ => true,
    }
}

fn reference_active(mode: AblationMode) -> bool {
    mode != AblationMode::NoReference
}

/// Factorized prospect parameters, per-user reference points, and the
/// ablation mode they are evaluated under.
#[derive(Clone, Debug, PartialEq)]
pub struct RareModel {
    pub params: ParameterTables,
    pub mode: AblationMode,
}

/// Starting values of `sigmoid(g)` for α, β, λ, γ, δ.
const INITIAL_CONSTRAINED: [f64; 5] = [0.7, 0.7, 0.5, 0.5, 0.5];
const INITIAL_REFERENCE: f64 = 3.0;
const INITIAL_FACTOR_STD: f64 = 0.01;

impl RareModel {
    pub fn zeros(n_users: usize, n_items: usize, k: usize, mode: AblationMode) -> Self {
        RareModel {
            params: ParameterTables::zeros(n_users, n_items, k),
            mode,
        }
    }

    /// Biases at mild prospect shapes, references at the rating midpoint,
    /// and small Gaussian latent factors.
    pub fn initialize<R: Rng + ?Sized>(
        n_users: usize,
        n_items: usize,
        k: usize,
        mode: AblationMode,
        rng: &mut R,
    ) -> Self {
        Self::initialize_with_std(n_users, n_items, k, mode, INITIAL_FACTOR_STD, rng)
    }

    pub fn initialize_with_std<R: Rng + ?Sized>(
        n_users: usize,
        n_items: usize,
        k: usize,
        mode: AblationMode,
        factor_std: f64,
        rng: &mut R,
    ) -> Self {
        let mut model = Self::zeros(n_users, n_items, k, mode);
        let normal = Normal::new(0.0, factor_std).expect("finite std");
        for (theta, target) in model.params.theta.iter_mut().zip(INITIAL_CONSTRAINED) {
            theta.global_bias = logit(target);
            for x in theta.user_factors.iter_mut().chain(theta.item_factors.iter_mut()) {
                *x = normal.sample(rng);
            }
        }
        model.params.reference.fill(INITIAL_REFERENCE);
        model
    }

    pub fn n_users(&self) -> usize {
        self.params.reference.len()
    }

    pub fn n_items(&self) -> usize {
        self.params.theta[0].n_items()
    }

    pub fn k(&self) -> usize {
        self.params.theta[0].k()
    }

    pub fn parameter_count(&self) -> usize {
        self.params.scalar_count()
    }

    pub fn reference(&self, u: usize) -> f64 {
        self.params.reference[u]
    }

    fn constrained(&self, kind: ParamKind, u: usize, v: usize) -> f64 {
        let theta = self.params.param(kind);
        if is_active(self.mode, kind, false) {
            param_at(theta, u, v)
        } else {
            sigmoid(theta.global_bias)
        }
    }

    /// Constrained parameters for `(u, v)` as used under the model's mode.
    pub fn prospect_params(&self, u: usize, v: usize) -> ProspectParams {
        ProspectParams {
            alpha: self.constrained(ParamKind::Alpha, u, v),
            beta: self.constrained(ParamKind::Beta, u, v),
            lambda: self.constrained(ParamKind::Lambda, u, v),
            gamma: self.constrained(ParamKind::Gamma, u, v),
            delta: self.constrained(ParamKind::Delta, u, v),
        }
    }

    /// Prospect value of item `v` for user `u`. Indices must be in range.
    pub fn score(&self, u: usize, v: usize, catalog: &ItemCatalog) -> f64 {
        let params = self.prospect_params(u, v);
        prospect_value(&catalog.dists[v], self.params.reference[u], catalog.prices[v], &params, self.mode)
    }

    fn check_indices(&self, u: usize, items: &[usize], catalog: &ItemCatalog) -> Result<()> {
        if u >= self.n_users() {
            return Err(RareError::IndexOutOfRange(format!("user {u} of {}", self.n_users())));
        }
        if let Some(v) = items.iter().find(|&&v| v >= self.n_items() || v >= catalog.len()) {
            return Err(RareError::IndexOutOfRange(format!("item {v} of {}", self.n_items())));
        }
        Ok(())
    }

    /// Prospect values of `items` for user `u`.
    pub fn forward(&self, u: usize, items: &[usize], catalog: &ItemCatalog) -> Result<Vec<f64>> {
        self.check_indices(u, items, catalog)?;
        Ok(items.iter().map(|&v| self.score(u, v, catalog)).collect())
    }

    /// Adds this example's data-loss gradient into `grads` and returns its loss.
    fn accumulate_example(&self, ex: &Example, catalog: &ItemCatalog, grads: &mut ParameterTables) -> f64 {
        let u = ex.user;
        let items: Vec<usize> = std::iter::once(ex.positive).chain(ex.negatives.iter().copied()).collect();
        let mut values = Vec::with_capacity(items.len());
        let mut partials = Vec::with_capacity(items.len());
        for &v in &items {
            let params = self.prospect_params(u, v);
            let (value, g) = prospect_value_and_grad(
                &catalog.dists[v],
                self.params.reference[u],
                catalog.prices[v],
                &params,
                self.mode,
            );
            values.push(value);
            partials.push((params, g));
        }
        let probs = mnl_probability(&values);
        let loss = -log_softmax_first(&values);
        for (j, (&v, (params, g))) in items.iter().zip(&partials).enumerate() {
            let coef = probs[j] - if j == 0 { 1.0 } else { 0.0 };
            if coef == 0.0 {
                continue;
            }
            let by_kind = [
                (ParamKind::Alpha, params.alpha, g.alpha),
                (ParamKind::Beta, params.beta, g.beta),
                (ParamKind::Lambda, params.lambda, g.lambda),
                (ParamKind::Gamma, params.gamma, g.gamma),
                (ParamKind::Delta, params.delta, g.delta),
            ];
            for (kind, theta_value, partial) in by_kind {
                if partial == 0.0 || !is_active(self.mode, kind, true) {
                    continue;
                }
                let d_raw = coef * partial * theta_value * (1.0 - theta_value);
                let local = is_active(self.mode, kind, false);
                let model_theta = self.params.param(kind);
                let grad = grads.param_mut(kind);
                grad.global_bias += d_raw;
                if !local {
                    continue;
                }
                grad.user_bias[u] += d_raw;
                grad.item_bias[v] += d_raw;
                let k = model_theta.k();
                let (pu, qv) = (model_theta.user_row(u), model_theta.item_row(v));
                for f in 0..k {
                    grad.user_factors[u * k + f] += d_raw * qv[f];
                    grad.item_factors[v * k + f] += d_raw * pu[f];
                }
            }
            if reference_active(self.mode) {
                grads.reference[u] += coef * g.reference;
            }
        }
        loss
    }

    /// Squared norm of the raw scalars active under the model's mode.
    pub fn regularizer(&self) -> f64 {
        let mut total = 0.0;
        for kind in ParamKind::ALL {
            let theta = self.params.param(kind);
            if is_active(self.mode, kind, true) {
                total += theta.global_bias * theta.global_bias;
            }
            if is_active(self.mode, kind, false) {
                total += theta.local_scalars().map(|x| x * x).sum::<f64>();
            }
        }
        if reference_active(self.mode) {
            total += self.params.reference.iter().map(|x| x * x).sum::<f64>();
        }
        total
    }

    /// Adds `2·reg_weight·θ` for every active raw scalar.
    fn accumulate_regularizer(&self, reg_weight: f64, grads: &mut ParameterTables) {
        if reg_weight == 0.0 {
            return;
        }
        let c = 2.0 * reg_weight;
        for kind in ParamKind::ALL {
            let theta = self.params.param(kind);
            let grad = grads.param_mut(kind);
            if is_active(self.mode, kind, true) {
                grad.global_bias += c * theta.global_bias;
            }
            if is_active(self.mode, kind, false) {
                for (g, x) in grad.local_scalars_mut().zip(theta.local_scalars()) {
                    *g += c * x;
                }
            }
        }
        if reference_active(self.mode) {
            for (g, x) in grads.reference.iter_mut().zip(&self.params.reference) {
                *g += c * x;
            }
        }
    }

    fn check_example(&self, ex: &Example, catalog: &ItemCatalog) -> Result<()> {
        let mut items = ex.negatives.clone();
        items.push(ex.positive);
        self.check_indices(ex.user, &items, catalog)
    }
}

/// One observed choice: the purchased item against sampled alternatives.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Example {
    pub user: usize,
    pub positive: usize,
    pub negatives: Vec<usize>,
}

/// Softmax with max-subtraction.
pub fn mnl_probability(values: &[f64]) -> Vec<f64> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = values.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

fn log_softmax_first(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    values[0] - lse
}

/// `−Σ log P(positive) + reg_weight·‖Φ‖²` over a batch.
pub fn loss(model: &RareModel, batch: &[Example], catalog: &ItemCatalog, reg_weight: f64) -> Result<f64> {
    if batch.is_empty() {
        return Err(RareError::EmptyBatch);
    }
    let mut total = 0.0;
    for ex in batch {
        model.check_example(ex, catalog)?;
        let items: Vec<usize> = std::iter::once(ex.positive).chain(ex.negatives.iter().copied()).collect();
        let values: Vec<f64> = items.iter().map(|&v| model.score(ex.user, v, catalog)).collect();
        total -= log_softmax_first(&values);
    }
    Ok(total + reg_weight * model.regularizer())
}

/// Analytic gradient of [`loss`] with respect to every raw scalar.
pub fn gradients(
    model: &RareModel,
    batch: &[Example],
    catalog: &ItemCatalog,
    reg_weight: f64,
) -> Result<ParameterTables> {
    let mut grads = ParameterTables::zeros_like(&model.params);
    batch_gradients(model, batch, catalog, reg_weight, &mut grads)?;
    Ok(grads)
}

/// Writes the gradient into `grads` (overwriting it) and returns the data loss.
pub(crate) fn batch_gradients(
    model: &RareModel,
    batch: &[Example],
    catalog: &ItemCatalog,
    reg_weight: f64,
    grads: &mut ParameterTables,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(RareError::EmptyBatch);
    }
    debug_assert!(grads.same_shape(&model.params));
    grads.fill(0.0);
    let mut data_loss = 0.0;
    for ex in batch {
        model.check_example(ex, catalog)?;
        data_loss += model.accumulate_example(ex, catalog, grads);
    }
    model.accumulate_regularizer(reg_weight, grads);
    Ok(data_loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn catalog(m: usize, price: f64) -> ItemCatalog {
        let d = RatingDistribution::new([0.1, 0.15, 0.2, 0.25, 0.3]).unwrap();
        ItemCatalog::new(vec![d; m], vec![price; m]).unwrap()
    }

    #[test]
    fn zero_parameter_is_one_half() {
        let theta = FactorizedParameter::zeros(2, 3, 4);
        assert_eq!(param_at(&theta, 1, 2), 0.5);
    }

    #[test]
    fn global_only_parameter_is_user_item_independent() {
        let mut theta = FactorizedParameter::zeros(2, 3, 1);
        theta.global_bias = -0.8;
        for u in 0..2 {
            for v in 0..3 {
                assert_eq!(param_at(&theta, u, v), sigmoid(-0.8));
            }
        }
    }

    #[test]
    fn param_at_combines_all_terms() {
        let mut theta = FactorizedParameter::zeros(1, 1, 2);
        theta.global_bias = 0.2;
        theta.user_bias[0] = 0.1;
        theta.item_bias[0] = -0.3;
        theta.user_factors.copy_from_slice(&[1.0, 0.5]);
        theta.item_factors.copy_from_slice(&[0.3, 0.4]);
        assert_abs_diff_eq!(param_at(&theta, 0, 0), 0.622459, epsilon = 1e-6);
    }

    #[test]
    fn parameter_count_formula() {
        for (n, m, k) in [(1, 1, 1), (3, 4, 2), (10, 7, 5)] {
            let model = RareModel::zeros(n, m, k, AblationMode::Full);
            assert_eq!(model.parameter_count(), 5 + 5 * (n + m) * (k + 1) + n);
            assert_eq!(model.params.scalars().count(), model.parameter_count());
        }
    }

    #[test]
    fn mnl_examples() {
        for p in mnl_probability(&[0.4, 0.4, 0.4]) {
            assert_abs_diff_eq!(p, 1.0 / 3.0, epsilon = 1e-15);
        }
        let p = mnl_probability(&[5.0, 5.0 - 1000.0]);
        assert_eq!(p[0], 1.0);
        assert_eq!(p[1], 0.0);
        let p = mnl_probability(&[1.0, 0.0, 0.0]);
        assert_abs_diff_eq!(p[0], 0.576117, epsilon = 1e-6);
        assert_abs_diff_eq!(p[1], 0.211942, epsilon = 1e-6);
        assert_abs_diff_eq!(p[2], 0.211942, epsilon = 1e-6);
    }

    #[test]
    fn forward_identical_items_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut model = RareModel::initialize(2, 3, 2, AblationMode::Full, &mut rng);
        // item 1 and 2 share every parameter
        for theta in model.params.theta.iter_mut() {
            let row: Vec<f64> = theta.item_row(1).to_vec();
            theta.item_factors[4..6].copy_from_slice(&row);
            theta.item_bias[2] = theta.item_bias[1];
        }
        let values = model.forward(0, &[1, 2], &catalog(3, 2.0)).unwrap();
        assert_eq!(values[0], values[1]);
    }

    #[test]
    fn forward_rejects_bad_indices() {
        let model = RareModel::zeros(2, 3, 1, AblationMode::Full);
        assert!(model.forward(2, &[0], &catalog(3, 1.0)).is_err());
        assert!(model.forward(0, &[3], &catalog(3, 1.0)).is_err());
    }

    #[test]
    fn no_reference_ignores_reference_vector() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut model = RareModel::initialize(2, 3, 2, AblationMode::NoReference, &mut rng);
        let cat = catalog(3, 4.0);
        let before = model.forward(1, &[0, 1, 2], &cat).unwrap();
        model.params.reference[1] = -7.5;
        assert_eq!(before, model.forward(1, &[0, 1, 2], &cat).unwrap());
    }

    #[test]
    fn fresh_model_value_is_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let model = RareModel::initialize(4, 4, 3, AblationMode::Full, &mut rng);
        let d = RatingDistribution::uniform();
        let cat = ItemCatalog::new(vec![d; 4], vec![1.0; 4]).unwrap();
        for v in model.forward(2, &[0, 1, 2, 3], &cat).unwrap() {
            assert!(v.is_finite() && v.abs() <= 5.0);
        }
    }

    #[test]
    fn uniform_choice_loss() {
        let model = RareModel::zeros(1, 3, 1, AblationMode::Full);
        let cat = catalog(3, 1.0);
        let batch = [Example {
            user: 0,
            positive: 0,
            negatives: vec![1, 2],
        }];
        assert_abs_diff_eq!(loss(&model, &batch, &cat, 0.0).unwrap(), 3f64.ln(), epsilon = 1e-12);
        // the zero model also has a zero regularizer
        assert_abs_diff_eq!(loss(&model, &batch, &cat, 5.0).unwrap(), 3f64.ln(), epsilon = 1e-12);
        assert!(matches!(loss(&model, &[], &cat, 0.0), Err(RareError::EmptyBatch)));
    }

    #[test]
    fn tiny_model_loss_matches_pipeline_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let model = RareModel::initialize_with_std(1, 1, 1, AblationMode::Full, 0.5, &mut rng);
        let d = RatingDistribution::new([0.05, 0.1, 0.2, 0.3, 0.35]).unwrap();
        let cat = ItemCatalog::new(vec![d], vec![2.5]).unwrap();
        let batch = [Example {
            user: 0,
            positive: 0,
            negatives: vec![0, 0],
        }];
        let reg = 0.01;
        let sq = |x: f64| x * x;
        let mut expected_reg = sq(model.params.reference[0]);
        let mut constrained = [0.0; 5];
        for (i, t) in model.params.theta.iter().enumerate() {
            let raw = t.global_bias + t.user_bias[0] + t.item_bias[0] + t.user_factors[0] * t.item_factors[0];
            constrained[i] = 1.0 / (1.0 + (-raw).exp());
            expected_reg += sq(t.global_bias) + sq(t.user_bias[0]) + sq(t.item_bias[0]) + sq(t.user_factors[0]) + sq(t.item_factors[0]);
        }
        let [a, b, l, g, dl] = constrained;
        let params = ProspectParams::new(a, b, l, g, dl).unwrap();
        let value = crate::prospect::prospect_value(&d, model.params.reference[0], 2.5, &params, AblationMode::Full);
        let p0 = mnl_probability(&[value, value, value])[0];
        let expected = -p0.ln() + reg * expected_reg;
        assert_abs_diff_eq!(loss(&model, &batch, &cat, reg).unwrap(), expected, epsilon = 1e-10);
    }

    #[test]
    fn regularizer_only_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let model = RareModel::initialize_with_std(3, 4, 2, AblationMode::Full, 0.3, &mut rng);
        let cat = catalog(4, 0.0);
        let batch = [Example {
            user: 1,
            positive: 2,
            negatives: vec![0, 3],
        }];
        let reg = 0.25;
        let grads = gradients(&model, &batch, &cat, reg).unwrap();
        for (g, x) in grads.scalars().zip(model.params.scalars()) {
            assert_abs_diff_eq!(*g, 2.0 * reg * x, epsilon = 1e-15);
        }
    }

    #[test]
    fn no_weighting_leaves_gamma_delta_untouched() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let model = RareModel::initialize_with_std(3, 4, 2, AblationMode::NoWeighting, 0.3, &mut rng);
        let cat = catalog(4, 3.0);
        let batch = [Example {
            user: 0,
            positive: 1,
            negatives: vec![2, 3],
        }];
        let grads = gradients(&model, &batch, &cat, 0.1).unwrap();
        for kind in [ParamKind::Gamma, ParamKind::Delta] {
            let t = grads.param(kind);
            assert_eq!(t.global_bias, 0.0);
            assert!(t.local_scalars().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn tables_flat_view_round_trips() {
        let mut t = ParameterTables::zeros(2, 3, 2);
        for (i, x) in t.scalars_mut().enumerate() {
            *x = i as f64;
        }
        let flat: Vec<f64> = t.scalars().copied().collect();
        assert_eq!(flat, (0..t.scalar_count()).map(|i| i as f64).collect::<Vec<_>>());
        assert_eq!(t.param(ParamKind::Alpha).global_bias, 0.0);
        assert_eq!(t.param(ParamKind::Beta).global_bias, t.theta[0].scalar_count() as f64);
    }

    proptest! {
        #[test]
        fn mnl_shift_invariant_and_normalized(values in proptest::collection::vec(-50.0f64..50.0, 1..8), shift in -100.0f64..100.0) {
            let p = mnl_probability(&values);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let shifted: Vec<f64> = values.iter().map(|v| v + shift).collect();
            for (a, b) in p.iter().zip(mnl_probability(&shifted)) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            let mut reversed = values.clone();
            reversed.reverse();
            let pr = mnl_probability(&reversed);
            for (i, a) in p.iter().enumerate() {
                prop_assert!((a - pr[values.len() - 1 - i]).abs() < 1e-15);
            }
        }

        #[test]
        fn constrained_parameters_inside_unit_interval(seed in 0u64..1000, u in 0usize..4, v in 0usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let model = RareModel::initialize_with_std(4, 5, 3, AblationMode::Full, 1.0, &mut rng);
            let p = model.prospect_params(u, v);
            for x in [p.alpha, p.beta, p.lambda, p.gamma, p.delta] {
                prop_assert!(x > 0.0 && x < 1.0);
            }
        }

        #[test]
        fn sigmoid_never_reaches_endpoints(x in -1e6f64..1e6) {
            let s = sigmoid(x);
            prop_assert!(s > 0.0 && s < 1.0);
        }
    }
}
