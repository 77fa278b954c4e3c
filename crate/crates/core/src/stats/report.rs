//! Task-level summary of a finished run.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::best_at_k::{best_at_k, SamplePoint};
use crate::cluster::{coherence_rows, CoherenceRow};
use crate::code::{usage_stats, Grammar, UsageStats};
use crate::model::{MetricId, ScoreCard, TestOutcome};
use crate::pipeline::rundir::{missing_files, read_manifest, read_run, write_json};
use crate::pipeline::{Mode, PipelineError, RunOutput, SampleStatus};
use crate::scoring::{ratio, Metrics, Selection};

pub const REPORT_FILE: &str = "report.json";
pub const SCALING_FILE: &str = "scaling.csv";
pub const COHERENCE_FILE: &str = "coherence.json";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("run directory is incomplete; missing {}", .0.join(", "))]
    IncompleteRun(Vec<String>),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("library or programs do not parse: {0}")]
    Parse(String),
}

/// The headline row. Percentages are in `[0, 100]`; ratios are final over
/// original.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryTable {
    #[serde(rename = "Pass Rate")]
    pub pass_rate: f64,
    /// Percentage points gained over the original programs.
    #[serde(rename = "Pass Rate Improvement")]
    pub pass_rate_improvement: f64,
    #[serde(rename = "MDL Ratio")]
    pub mdl_ratio: f64,
    #[serde(rename = "Token Ratio")]
    pub token_ratio: f64,
    #[serde(rename = "Library Functions")]
    pub library_functions: usize,
    #[serde(rename = "Avg Calls per Function")]
    pub avg_calls_per_function: f64,
    #[serde(rename = "% Single Use Functions")]
    pub single_use_functions: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub index: usize,
    pub units: Vec<String>,
    pub selection: Selection,
    pub samples: usize,
    pub feasible: usize,
    pub protocol_errors: usize,
    pub parse_errors: usize,
    pub redefinitions: usize,
    pub harness_errors: usize,
    pub unscorable: usize,
    pub merge_renames: usize,
    pub baseline: Metrics,
    pub scorecards: Vec<Option<ScoreCard>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub metric: MetricId,
    pub k: usize,
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub task: String,
    pub mode: Mode,
    pub metric: MetricId,
    pub table: SummaryTable,
    pub original_pass_rate: f64,
    pub baseline: Metrics,
    pub final_metrics: Metrics,
    /// Final over original value of every metric.
    pub ratios: BTreeMap<String, f64>,
    pub usage: UsageStats,
    pub collisions: usize,
    pub filtered: Vec<String>,
    pub clusters: Vec<ClusterSummary>,
    pub scaling: Vec<ScalingRow>,
}

/// Percentage of all tests passed, pooled over units.
pub fn pass_rate(outcomes: &BTreeMap<String, TestOutcome>) -> f64 {
    let total: usize = outcomes.values().map(TestOutcome::total).sum();
    if total == 0 {
        return 100.0;
    }
    let passed: usize = outcomes.values().map(|o| o.passed.len()).sum();
    100.0 * passed as f64 / total as f64
}

/// `θ̂_k` of the cluster-relative ratio of each metric when reranking by
/// that metric, averaged over the clusters with at least one feasible
/// sample. `k` runs up to the smallest such feasible count.
pub fn scaling_rows(out: &RunOutput) -> Vec<ScalingRow> {
    let mut rows = Vec::new();
    for metric in MetricId::ALL {
        let per_cluster: Vec<Vec<SamplePoint>> = out
            .clusters
            .iter()
            .map(|c| {
                let base = c.baseline.metrics.get(metric);
                c.samples
                    .iter()
                    .filter_map(|s| {
                        let card = s.scorecard.as_ref()?;
                        let v = card.metric(metric);
                        Some(SamplePoint {
                            score: v,
                            value: ratio(v, base),
                            feasible: card.loss.is_feasible(),
                            digest: s.candidate.as_ref().map(|c| c.digest.clone()).unwrap_or_default(),
                        })
                    })
                    .collect::<Vec<_>>()
            })
            .filter(|pts| pts.iter().any(|p| p.feasible))
            .collect();
        let Some(n_min) = per_cluster.iter().map(|p| p.iter().filter(|x| x.feasible).count()).min() else {
            continue;
        };
        for k in 1..=n_min {
            let sum: f64 = per_cluster
                .iter()
                .map(|pts| best_at_k(pts, k).expect("k within every cluster's feasible count"))
                .sum();
            rows.push(ScalingRow {
                metric,
                k,
                theta: sum / per_cluster.len() as f64,
            });
        }
    }
    rows
}

pub fn build_report(grammar: &dyn Grammar, out: &RunOutput, metric: MetricId) -> Result<MetricReport, ReportError> {
    let library = out.library.text();
    let programs: Vec<&String> = out.rewritten.values().collect();
    let usage = usage_stats(grammar, &library, &programs).map_err(|e| ReportError::Parse(e.to_string()))?;
    let original_pass_rate = pass_rate(&out.original_outcomes);
    let final_pass_rate = pass_rate(&out.final_outcomes);
    let ratios: BTreeMap<String, f64> = MetricId::ALL
        .iter()
        .map(|&m| (m.to_string(), ratio(out.final_metrics.get(m), out.baseline_metrics.get(m))))
        .collect();
    let table = SummaryTable {
        pass_rate: final_pass_rate,
        pass_rate_improvement: final_pass_rate - original_pass_rate,
        mdl_ratio: ratios["mdl"],
        token_ratio: ratios["tokens"],
        library_functions: usage.num_definitions,
        avg_calls_per_function: usage.avg_calls,
        single_use_functions: 100.0 * usage.single_use_fraction,
    };
    let clusters = out
        .clusters
        .iter()
        .map(|c| ClusterSummary {
            index: c.index,
            units: c.units.clone(),
            selection: c.selection,
            samples: c.samples.len(),
            feasible: c.samples.iter().filter(|s| s.loss().is_feasible()).count(),
            protocol_errors: c.count(|s| matches!(s, SampleStatus::Protocol(_))),
            parse_errors: c.count(|s| matches!(s, SampleStatus::Parse(_))),
            redefinitions: c.count(|s| matches!(s, SampleStatus::Redefines(_))),
            harness_errors: c.count(|s| matches!(s, SampleStatus::Harness(_))),
            unscorable: c.count(|s| matches!(s, SampleStatus::Unscorable(_))),
            merge_renames: c.merge_renames.len(),
            baseline: c.baseline.metrics,
            scorecards: c.samples.iter().map(|s| s.scorecard.clone()).collect(),
        })
        .collect();
    Ok(MetricReport {
        task: out.task.clone(),
        mode: out.mode,
        metric,
        table,
        original_pass_rate,
        baseline: out.baseline_metrics,
        final_metrics: out.final_metrics,
        ratios,
        usage,
        collisions: out.clusters.iter().map(|c| c.merge_renames.len()).sum(),
        filtered: out.filtered.clone(),
        clusters,
        scaling: scaling_rows(out),
    })
}

pub fn scaling_csv(rows: &[ScalingRow]) -> String {
    let mut s = String::from("metric,k,theta\n");
    for r in rows {
        writeln!(s, "{},{},{}", r.metric, r.k, r.theta).expect("write to string");
    }
    s
}

pub fn coherence(out: &RunOutput) -> Result<Vec<CoherenceRow>, ReportError> {
    let clusters = out.plan.as_ref().map(|p| p.clusters.clone()).unwrap_or_default();
    coherence_rows(&out.tags, &clusters).map_err(|e| ReportError::Parse(e.to_string()))
}

/// Reads a run directory and writes `report.json`, `scaling.csv` and,
/// when the task carries tags, `coherence.json` into it.
pub fn analyze_run(grammar: &dyn Grammar, dir: &Path) -> Result<MetricReport, ReportError> {
    let missing = missing_files(dir);
    if !missing.is_empty() {
        return Err(ReportError::IncompleteRun(missing));
    }
    let manifest = read_manifest(dir)?;
    let out = read_run(dir)?;
    let report = write_report(grammar, dir, &out, manifest.config.metric)?;
    Ok(report)
}

pub fn write_report(grammar: &dyn Grammar, dir: &Path, out: &RunOutput, metric: MetricId) -> Result<MetricReport, ReportError> {
    let report = build_report(grammar, out, metric)?;
    write_json(&dir.join(REPORT_FILE), &report)?;
    std::fs::write(dir.join(SCALING_FILE), scaling_csv(&report.scaling)).map_err(|source| PipelineError::Io {
        path: dir.join(SCALING_FILE),
        source,
    })?;
    if !out.tags.is_empty() {
        write_json(&dir.join(COHERENCE_FILE), &coherence(out)?)?;
    }
    Ok(report)
}
