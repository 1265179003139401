use std::io::Write;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{batch_gradients, Example, ItemCatalog, ParameterTables, RareModel};
use crate::data::{sample_negatives, HeldOut, SplitDataset};
use crate::error::{RareError, Result};
use crate::eval::{evaluate_held_out, EvalNegatives};
use crate::prospect::AblationMode;

/// Hyperparameters shared by the risk-aware model and the BPR baseline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub k: usize,
    pub learning_rate: f64,
    pub reg_weight: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub negatives_per_positive: usize,
    pub seed: u64,
    pub patience_epochs: usize,
    pub mode: AblationMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            k: 8,
            learning_rate: 1e-2,
            reg_weight: 1e-4,
            epochs: 100,
            batch_size: 64,
            negatives_per_positive: 2,
            seed: 42,
            patience_epochs: 20,
            mode: AblationMode::Full,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(RareError::Config(what.to_string()));
        if self.k == 0 {
            return bad("k must be positive");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return bad("learning rate must be finite and non-negative");
        }
        if !(self.reg_weight.is_finite() && self.reg_weight >= 0.0) {
            return bad("reg weight must be finite and non-negative");
        }
        if self.epochs == 0 || self.batch_size == 0 || self.negatives_per_positive == 0 {
            return bad("epochs, batch size and negatives must be positive");
        }
        if self.patience_epochs == 0 {
            return bad("patience must be positive");
        }
        Ok(())
    }
}

/// One row of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean data loss per training positive.
    pub train_loss: f64,
    /// `None` when no user had a large enough candidate pool.
    pub val_ndcg10: Option<f64>,
    pub elapsed_ms: u64,
}

pub fn write_training_log<W: Write>(log: &[EpochLog], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["epoch", "train_loss", "val_ndcg10", "elapsed_ms"])?;
    for row in log {
        let val = row.val_ndcg10.map(|x| x.to_string()).unwrap_or_default();
        w.write_record([row.epoch.to_string(), row.train_loss.to_string(), val, row.elapsed_ms.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Result of a training run: the best-validation snapshot and the full log.
#[derive(Clone, Debug)]
pub struct TrainOutcome<M> {
    pub model: M,
    pub log: Vec<EpochLog>,
    pub best_epoch: usize,
}

/// Epoch loop with shuffled mini-batches and early stopping on validation
/// NDCG@10.
///
/// `step` applies one update for a batch of positives and returns the
/// summed data loss of that batch.
pub(crate) fn run_epochs<M, S, F>(
    config: &TrainConfig,
    split: &SplitDataset,
    mut model: M,
    rng: &mut ChaCha8Rng,
    mut step: S,
    score: F,
) -> Result<TrainOutcome<M>>
where
    M: Clone + Sync,
    S: FnMut(&mut M, &[(usize, usize)], &mut ChaCha8Rng) -> Result<f64>,
    F: Fn(&M, usize, usize) -> f64 + Sync,
{
    let positives = split.train.dense_pairs();
    if positives.is_empty() {
        return Err(RareError::EmptyDataset { min_count: 1 });
    }
    let val_negatives = EvalNegatives::sample(split, config.seed);
    let start = Instant::now();
    let mut order: Vec<usize> = (0..positives.len()).collect();
    let mut batch = Vec::with_capacity(config.batch_size);
    let mut log = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, M, usize)> = None;
    let mut stale = 0;

    for epoch in 1..=config.epochs {
        order.shuffle(rng);
        let mut total = 0.0;
        for chunk in order.chunks(config.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| positives[i]));
            let batch_loss = step(&mut model, &batch, rng)?;
            if !batch_loss.is_finite() {
                return Err(RareError::Diverged { epoch, loss: batch_loss });
            }
            total += batch_loss;
        }
        let train_loss = total / positives.len() as f64;

        let report = evaluate_held_out(|u, v| score(&model, u, v), split, HeldOut::Validation, &val_negatives, &[10])?;
        let val = (report.users_evaluated > 0).then(|| report.ndcg(10).unwrap_or(0.0));
        log.push(EpochLog {
            epoch,
            train_loss,
            val_ndcg10: val,
            elapsed_ms: start.elapsed().as_millis() as u64,
        });
        log::debug!("epoch {epoch}: loss {train_loss:.6} val ndcg@10 {val:?}");

        match val {
            Some(v) if best.as_ref().is_none_or(|(b, _, _)| v > *b) => {
                best = Some((v, model.clone(), epoch));
                stale = 0;
            }
            Some(_) => {
                stale += 1;
                if stale >= config.patience_epochs {
                    log::info!("early stop at epoch {epoch}");
                    break;
                }
            }
            // nothing to validate on: keep the latest parameters
            None => best = Some((f64::NEG_INFINITY, model.clone(), epoch)),
        }
    }
    let (_, model, best_epoch) = best.expect("at least one epoch ran");
    Ok(TrainOutcome { model, log, best_epoch })
}

/// Draws the negatives for a batch of positives from each user's pool.
pub(crate) fn make_examples(
    split: &SplitDataset,
    positives: &[(usize, usize)],
    negatives_per_positive: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Example>> {
    positives
        .iter()
        .map(|&(user, positive)| {
            Ok(Example {
                user,
                positive,
                negatives: sample_negatives(split, user, negatives_per_positive, rng)?,
            })
        })
        .collect()
}

/// Fits a [`RareModel`] by mini-batch SGD on the regularized MNL loss.
pub fn train(config: &TrainConfig, split: &SplitDataset, catalog: &ItemCatalog) -> Result<TrainOutcome<RareModel>> {
    config.validate()?;
    if catalog.len() != split.n_items() {
        return Err(RareError::Config(format!(
            "catalog has {} items, split has {}",
            catalog.len(),
            split.n_items()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let model = RareModel::initialize(split.n_users(), split.n_items(), config.k, config.mode, &mut rng);
    let mut grads = ParameterTables::zeros_like(&model.params);
    run_epochs(
        config,
        split,
        model,
        &mut rng,
        |model, positives, rng| {
            let batch = make_examples(split, positives, config.negatives_per_positive, rng)?;
            let data_loss = batch_gradients(model, &batch, catalog, config.reg_weight, &mut grads)?;
            model.params.add_scaled(-config.learning_rate, &grads);
            Ok(data_loss)
        },
        |model, u, v| model.score(u, v, catalog),
    )
}
