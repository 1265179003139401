//! Leave-one-out ranking evaluation: each user's held-out item is ranked
//! against 100 sampled negatives.

use std::collections::BTreeMap;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{sample_negatives, HeldOut, SplitDataset};
use crate::error::{RareError, Result};
use crate::model::{ItemCatalog, RareModel};

pub const NEGATIVES_PER_USER: usize = 100;

pub const DEFAULT_CUTOFFS: [usize; 4] = [5, 10, 20, 50];

/// NDCG with one relevant item: `1/log2(rank+1)` inside the cutoff.
pub fn ndcg_at_k(rank: usize, k: usize) -> f64 {
    debug_assert!(rank >= 1 && k >= 1);
    if rank <= k {
        1.0 / ((rank + 1) as f64).log2()
    } else {
        0.0
    }
}

/// F1 with one relevant item: precision `1/k`, recall 1 on a hit.
pub fn f1_at_k(rank: usize, k: usize) -> f64 {
    debug_assert!(rank >= 1 && k >= 1);
    if rank <= k {
        2.0 / (k as f64 + 1.0)
    } else {
        0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutoffMetrics {
    pub f1: f64,
    pub ndcg: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_k: BTreeMap<usize, CutoffMetrics>,
    pub users_evaluated: usize,
    /// Users whose candidate pool held fewer than 100 items.
    pub users_skipped: usize,
    pub seed: u64,
}

impl EvalReport {
    pub fn ndcg(&self, k: usize) -> Option<f64> {
        self.per_k.get(&k).map(|m| m.ndcg)
    }

    pub fn f1(&self, k: usize) -> Option<f64> {
        self.per_k.get(&k).map(|m| m.f1)
    }

    /// CSV with header `metric,k,value`; F1 rows first, then NDCG.
    pub fn write_metrics_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["metric", "k", "value"])?;
        for (name, pick) in [("f1", 0), ("ndcg", 1)] {
            for (k, m) in &self.per_k {
                let value = if pick == 0 { m.f1 } else { m.ndcg };
                w.write_record([name.to_string(), k.to_string(), value.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// The 100 protocol negatives of every user, drawn once and reused.
///
/// Each user has an independent ChaCha stream, so the draw for one user
/// does not depend on any other user's pool.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalNegatives {
    pub seed: u64,
    /// `None` for users whose pool is too small.
    pub per_user: Vec<Option<Vec<usize>>>,
}

impl EvalNegatives {
    pub fn sample(split: &SplitDataset, seed: u64) -> Self {
        let per_user = (0..split.n_users())
            .map(|u| {
                if split.candidate_pool[u].len() < NEGATIVES_PER_USER {
                    return None;
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(u as u64);
                Some(sample_negatives(split, u, NEGATIVES_PER_USER, &mut rng).expect("pool size checked"))
            })
            .collect();
        EvalNegatives { seed, per_user }
    }
}

/// 1-based rank of `positive` among `positive ∪ negatives`, scores
/// descending, ties broken by item index ascending. NaN ranks last.
pub fn rank_of_positive<F: Fn(usize) -> f64>(positive: usize, negatives: &[usize], score: F) -> usize {
    let key = |v: usize| {
        let s = score(v);
        if s.is_nan() {
            f64::NEG_INFINITY
        } else {
            s
        }
    };
    let target = key(positive);
    1 + negatives
        .iter()
        .filter(|&&v| {
            let s = key(v);
            s > target || (s == target && v < positive)
        })
        .count()
}

/// Rank of each user's held-out item, `None` for skipped users.
pub fn user_ranks<F>(scorer: F, split: &SplitDataset, which: HeldOut, negatives: &EvalNegatives) -> Vec<Option<usize>>
where
    F: Fn(usize, usize) -> f64 + Sync,
{
    (0..split.n_users())
        .into_par_iter()
        .map(|u| {
            let negs = negatives.per_user.get(u)?.as_ref()?;
            let positive = split.held_out_item(u, which);
            Some(rank_of_positive(positive, negs, |v| scorer(u, v)))
        })
        .collect()
}

fn check_cutoffs(cutoffs: &[usize]) -> Result<()> {
    if cutoffs.is_empty() || cutoffs.contains(&0) {
        return Err(RareError::Config("cutoffs must be a non-empty list of positive integers".into()));
    }
    Ok(())
}

/// Averages per-user metrics over the evaluated users.
pub fn report_from_ranks(ranks: &[Option<usize>], cutoffs: &[usize], seed: u64) -> Result<EvalReport> {
    check_cutoffs(cutoffs)?;
    let hits: Vec<usize> = ranks.iter().flatten().copied().collect();
    let n = hits.len();
    let per_k = cutoffs
        .iter()
        .map(|&k| {
            let mean = |f: fn(usize, usize) -> f64| {
                if n == 0 {
                    0.0
                } else {
                    hits.iter().map(|&r| f(r, k)).sum::<f64>() / n as f64
                }
            };
            (k, CutoffMetrics { f1: mean(f1_at_k), ndcg: mean(ndcg_at_k) })
        })
        .collect();
    Ok(EvalReport {
        per_k,
        users_evaluated: n,
        users_skipped: ranks.len() - n,
        seed,
    })
}

/// Evaluates against already drawn negatives on the chosen held-out item.
pub fn evaluate_held_out<F>(
    scorer: F,
    split: &SplitDataset,
    which: HeldOut,
    negatives: &EvalNegatives,
    cutoffs: &[usize],
) -> Result<EvalReport>
where
    F: Fn(usize, usize) -> f64 + Sync,
{
    check_cutoffs(cutoffs)?;
    let ranks = user_ranks(scorer, split, which, negatives);
    report_from_ranks(&ranks, cutoffs, negatives.seed)
}

/// Test-set evaluation with negatives drawn from `seed`.
pub fn evaluate<F>(scorer: F, split: &SplitDataset, cutoffs: &[usize], seed: u64) -> Result<EvalReport>
where
    F: Fn(usize, usize) -> f64 + Sync,
{
    let negatives = EvalNegatives::sample(split, seed);
    evaluate_held_out(scorer, split, HeldOut::Test, &negatives, cutoffs)
}

/// Top `k` candidates by prospect value, ties by item index ascending.
pub fn recommend_topk(
    model: &RareModel,
    u: usize,
    candidates: &[usize],
    catalog: &ItemCatalog,
    k: usize,
) -> Result<Vec<(usize, f64)>> {
    let values = model.forward(u, candidates, catalog)?;
    let mut scored: Vec<(usize, f64)> = candidates.iter().copied().zip(values).collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(k);
    Ok(scored)
}
