//! Grouping units into fixed-size clusters by the embeddings of their
//! summaries, and measuring how coherent the clusters are.

pub mod coherence;
pub mod ward;

use rayon::prelude::*;
use thiserror::Error;

use crate::code::Grammar;
use crate::gateway::{Gateway, GatewayError};
use crate::model::SourceUnit;
use crate::pipeline::prompt::summary_prompt;

pub use coherence::{coherence_rows, coherence_table, hhi, tag_entropy, CoherenceRow, TagProfile};
pub use ward::{cluster_fixed_size, ward_linkage, ClusterPlan, Merge};

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("cluster size must be at least 1")]
    ZeroSize,
    #[error("{units} units cannot fill a cluster of size {size}")]
    TooFewUnits { units: usize, size: usize },
    #[error("unit {unit}: embedding has dimension {found}, expected {expected}")]
    DimensionMismatch { unit: String, expected: usize, found: usize },
    #[error("unit {0} appears twice")]
    DuplicateUnit(String),
    #[error("empty cluster")]
    EmptyCluster,
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

/// The unit's description, asking the sampler for one when absent.
pub fn summarize(unit: &SourceUnit, gateway: &Gateway) -> Result<String, GatewayError> {
    if let Some(d) = &unit.description {
        return Ok(d.clone());
    }
    let mut out = gateway.sample(&summary_prompt(unit), 1)?;
    Ok(out.remove(0).text)
}

/// Fills in missing descriptions, fetching them concurrently.
pub fn summarize_all(units: &mut [SourceUnit], gateway: &Gateway) -> Result<(), GatewayError> {
    let summaries: Vec<String> = units.par_iter().map(|u| summarize(u, gateway)).collect::<Result<_, _>>()?;
    for (u, s) in units.iter_mut().zip(summaries) {
        u.description = Some(s);
    }
    Ok(())
}

/// Splits units into those with at least `min_sloc` source lines and the
/// rest. Units that fail to parse are kept.
pub fn prefilter<'a>(grammar: &dyn Grammar, units: &'a [SourceUnit], min_sloc: usize) -> (Vec<&'a SourceUnit>, Vec<&'a SourceUnit>) {
    units
        .iter()
        .partition(|u| grammar.analyze(&u.code).map_or(true, |s| s.sloc >= min_sloc))
}

/// Embeds the descriptions (or code, when undescribed) and clusters them.
pub fn plan_clusters(units: &[&SourceUnit], gateway: &Gateway, size: usize) -> Result<ClusterPlan, ClusterError> {
    if units.len() < size {
        return Err(ClusterError::TooFewUnits { units: units.len(), size });
    }
    let texts: Vec<String> = units
        .iter()
        .map(|u| u.description.clone().unwrap_or_else(|| u.code.clone()))
        .collect();
    let vectors = gateway.embed(&texts)?;
    let labelled: Vec<(String, Vec<f64>)> = units.iter().map(|u| u.id.clone()).zip(vectors).collect();
    cluster_fixed_size(&labelled, size)
}
