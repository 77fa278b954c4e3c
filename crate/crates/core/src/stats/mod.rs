//! Estimators over run artifacts.

pub mod best_at_k;
pub mod bradley_terry;
pub mod report;

use thiserror::Error;

pub use best_at_k::{best_at_k, scaling_curve, selection_order, SamplePoint};
pub use bradley_terry::{bradley_terry_fit, consensus_filter, BtFit, Comparison, Response};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StatsError {
    #[error("best@{k} needs at least {k} feasible samples, have {n}")]
    InsufficientSamples { k: usize, n: usize },
    #[error("comparison graph is disconnected")]
    DisconnectedGraph,
    #[error("some item never wins or never loses within its component; strengths diverge")]
    NoFiniteMaximum,
    #[error("reference item '{0}' does not appear in any comparison")]
    UnknownReference(String),
}
