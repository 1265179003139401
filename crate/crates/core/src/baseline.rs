//! BPR matrix factorization, the pairwise ranking baseline.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::{sample_negatives, SplitDataset};
use crate::error::Result;
use crate::model::checkpoint::{write_row, LineReader};
use crate::model::train::run_epochs;
use crate::model::{TrainConfig, TrainOutcome};

const MAGIC: &str = "bpr-checkpoint v1";
const INITIAL_FACTOR_STD: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct BprModel {
    pub user_factors: Vec<f64>,
    pub item_factors: Vec<f64>,
    pub item_bias: Vec<f64>,
    k: usize,
}

impl BprModel {
    pub fn zeros(n_users: usize, n_items: usize, k: usize) -> Self {
        BprModel {
            user_factors: vec![0.0; n_users * k],
            item_factors: vec![0.0; n_items * k],
            item_bias: vec![0.0; n_items],
            k,
        }
    }

    pub fn initialize<R: Rng + ?Sized>(n_users: usize, n_items: usize, k: usize, rng: &mut R) -> Self {
        let mut model = Self::zeros(n_users, n_items, k);
        let normal = Normal::new(0.0, INITIAL_FACTOR_STD).expect("finite std");
        for x in model.user_factors.iter_mut().chain(model.item_factors.iter_mut()) {
            *x = normal.sample(rng);
        }
        model
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_users(&self) -> usize {
        self.user_factors.len() / self.k
    }

    pub fn n_items(&self) -> usize {
        self.item_bias.len()
    }

    fn user_row(&self, u: usize) -> &[f64] {
        &self.user_factors[u * self.k..(u + 1) * self.k]
    }

    fn item_row(&self, v: usize) -> &[f64] {
        &self.item_factors[v * self.k..(v + 1) * self.k]
    }

    fn scalars(&self) -> impl Iterator<Item = &f64> {
        self.user_factors.iter().chain(&self.item_factors).chain(&self.item_bias)
    }

    fn scalars_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.user_factors
            .iter_mut()
            .chain(self.item_factors.iter_mut())
            .chain(self.item_bias.iter_mut())
    }

    pub fn squared_norm(&self) -> f64 {
        self.scalars().map(|x| x * x).sum()
    }
}

/// `P_u·Q_v + l_v`.
pub fn bpr_score(model: &BprModel, u: usize, v: usize) -> f64 {
    let dot: f64 = model.user_row(u).iter().zip(model.item_row(v)).map(|(a, b)| a * b).sum();
    dot + model.item_bias[v]
}

/// `−log σ(d)` computed without overflow.
pub fn pairwise_loss(diff: f64) -> f64 {
    if diff > 0.0 {
        (-diff).exp().ln_1p()
    } else {
        -diff + diff.exp().ln_1p()
    }
}

/// Adds the gradient of `−log σ(score(u,pos) − score(u,neg))` into `grad`
/// and returns the loss.
fn accumulate_pair(model: &BprModel, u: usize, pos: usize, neg: usize, grad: &mut BprModel) -> f64 {
    let diff = bpr_score(model, u, pos) - bpr_score(model, u, neg);
    // d/d(diff) of −log σ(diff) = −σ(−diff)
    let c = -1.0 / (1.0 + diff.exp());
    let k = model.k;
    let (pu, qp, qn) = (model.user_row(u), model.item_row(pos), model.item_row(neg));
    for f in 0..k {
        grad.user_factors[u * k + f] += c * (qp[f] - qn[f]);
        grad.item_factors[pos * k + f] += c * pu[f];
        grad.item_factors[neg * k + f] -= c * pu[f];
    }
    grad.item_bias[pos] += c;
    grad.item_bias[neg] -= c;
    pairwise_loss(diff)
}

/// SGD on the pairwise loss plus `reg_weight·‖Φ‖²`, one fresh negative per
/// positive, early-stopped on validation NDCG@10 like the main model.
pub fn bpr_train(config: &TrainConfig, split: &SplitDataset) -> Result<TrainOutcome<BprModel>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let model = BprModel::initialize(split.n_users(), split.n_items(), config.k, &mut rng);
    let mut grad = BprModel::zeros(split.n_users(), split.n_items(), config.k);
    run_epochs(
        config,
        split,
        model,
        &mut rng,
        |model, positives, rng| {
            grad.scalars_mut().for_each(|g| *g = 0.0);
            let mut total = 0.0;
            for &(u, pos) in positives {
                let neg = sample_negatives(split, u, 1, rng)?[0];
                total += accumulate_pair(model, u, pos, neg, &mut grad);
            }
            let c = 2.0 * config.reg_weight;
            for (x, g) in model.scalars_mut().zip(grad.scalars()) {
                *x -= config.learning_rate * (g + c * *x);
            }
            Ok(total)
        },
        bpr_score,
    )
}

pub fn write_bpr_checkpoint<W: Write>(model: &BprModel, mut out: W) -> Result<()> {
    writeln!(out, "{MAGIC}")?;
    writeln!(out, "n {}", model.n_users())?;
    writeln!(out, "m {}", model.n_items())?;
    writeln!(out, "k {}", model.k)?;
    write_row(&mut out, "user_factors", &model.user_factors)?;
    write_row(&mut out, "item_factors", &model.item_factors)?;
    write_row(&mut out, "item_bias", &model.item_bias)?;
    out.flush()?;
    Ok(())
}

pub fn read_bpr_checkpoint<R: BufRead>(reader: R) -> Result<BprModel> {
    let mut r = LineReader::new(reader);
    r.expect_exact(MAGIC)?;
    let n = r.usize_value("n")?;
    let m = r.usize_value("m")?;
    let k = r.usize_value("k")?;
    if k == 0 {
        return Err(r.error("k must be positive"));
    }
    let model = BprModel {
        user_factors: r.floats("user_factors", n * k)?,
        item_factors: r.floats("item_factors", m * k)?,
        item_bias: r.floats("item_bias", m)?,
        k,
    };
    r.expect_eof()?;
    Ok(model)
}
