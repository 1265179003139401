//! Risk-aware recommendation driven by personalized prospect theory.
//!
//! Every user-item pair gets its own value-curvature, loss, and
//! probability-weighting parameters plus a per-user reference point. Items
//! are scored by their prospect value over the five rating states and users
//! are trained with a multinomial-logit choice objective.
//!
//! Module map:
//!
//! * [`data`] – CSV ingestion, activity filtering, chronological splits, negative sampling.
//! * [`riskdist`] – per-item rating distributions with Weibull smoothing.
//! * [`prospect`] – value function, weighting function, prospect value.
//! * [`model`] – factorized parameters, MNL loss, analytic gradients, SGD training.
//! * [`baseline`] – BPR matrix factorization.
//! * [`eval`] – 1-vs-100 ranking protocol, F1@K and NDCG@K.
//! * [`synthgen`] – synthetic prospect-theoretic consumers and recovery statistics.
//! * [`cli`] – reproducible pipelines behind the `rare` binary.

pub mod baseline;
pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod model;
pub mod prospect;
pub mod riskdist;
pub mod synthgen;

pub use error::{RareError, Result};
