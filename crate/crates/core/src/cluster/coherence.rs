//! Thematic coherence of a cluster from ground-truth conceptual tags.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::ClusterError;
use crate::model::Task;

/// Tags of one cluster: instance counts per tag and the tag set of every
/// problem in the cluster.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagProfile {
    pub instances: BTreeMap<String, u64>,
    pub problems: Vec<BTreeSet<String>>,
}

impl TagProfile {
    /// Profile built from problem tag sets; each problem contributes one
    /// instance of each of its tags.
    pub fn from_problems(problems: Vec<BTreeSet<String>>) -> Self {
        let mut instances = BTreeMap::new();
        for tags in &problems {
            for t in tags {
                *instances.entry(t.clone()).or_insert(0) += 1;
            }
        }
        Self { instances, problems }
    }

    pub fn for_cluster(task: &Task, cluster: &[String]) -> Self {
        Self::from_problems(cluster.iter().map(|id| task.tags.get(id).cloned().unwrap_or_default()).collect())
    }
}

/// Normalized tag-instance entropy `H_N`: the base-2 entropy of the tag
/// proportions divided by `log2 D`, where `D` is the number of distinct
/// tags; 0 when `D ≤ 1`.
pub fn tag_entropy(profile: &TagProfile) -> f64 {
    let counts: Vec<f64> = profile.instances.values().filter(|&&c| c > 0).map(|&c| c as f64).collect();
    let d = counts.len();
    if d <= 1 {
        return 0.0;
    }
    let total: f64 = counts.iter().sum();
    let h: f64 = counts
        .iter()
        .map(|c| {
            let p = c / total;
            -p * p.log2()
        })
        .sum();
    (h / (d as f64).log2()).clamp(0.0, 1.0)
}

/// Herfindahl–Hirschman index over problem presence: `Σ_t s_t²` where `s_t`
/// is the fraction of problems carrying tag `t`. Ranges over `(0, D]`.
pub fn hhi(profile: &TagProfile) -> Result<f64, ClusterError> {
    let n = profile.problems.len();
    if n == 0 {
        return Err(ClusterError::EmptyCluster);
    }
    let mut presence: BTreeMap<&str, usize> = BTreeMap::new();
    for tags in &profile.problems {
        for t in tags {
            *presence.entry(t.as_str()).or_insert(0) += 1;
        }
    }
    Ok(presence.values().map(|&c| (c as f64 / n as f64).powi(2)).sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceRow {
    pub cluster: usize,
    pub units: Vec<String>,
    pub tag_entropy: f64,
    pub hhi: f64,
}

/// `H_N` and HHI for every cluster of a plan.
pub fn coherence_table(task: &Task, clusters: &[Vec<String>]) -> Result<Vec<CoherenceRow>, ClusterError> {
    coherence_rows(&task.tags, clusters)
}

/// `H_N` and HHI for every cluster, given the tags of each unit.
pub fn coherence_rows(
    tags: &BTreeMap<String, BTreeSet<String>>,
    clusters: &[Vec<String>],
) -> Result<Vec<CoherenceRow>, ClusterError> {
    clusters
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let profile = TagProfile::from_problems(c.iter().map(|id| tags.get(id).cloned().unwrap_or_default()).collect());
            Ok(CoherenceRow {
                cluster: i,
                units: c.clone(),
                tag_entropy: tag_entropy(&profile),
                hhi: hhi(&profile)?,
            })
        })
        .collect()
}
