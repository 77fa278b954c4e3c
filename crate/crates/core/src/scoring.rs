//! Candidate metrics, the test-gated loss and argmin selection.
//!
//! Every metric is minimized: maintainability enters negated. An empty
//! library contributes nothing to any metric.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::code::{Grammar, ParseError};
use crate::gateway::{Gateway, GatewayError};
use crate::harness::pass_gate;
use crate::model::{Loss, MetricId, ScoreCard, SourceUnit, TestOutcome};

/// Separator between the library and the header of a scored program.
pub const LIBRARY_SEPARATOR: &str = "\n\n";

pub fn file_header(unit_id: &str) -> String {
    format!("# file: {unit_id}\n")
}

/// Conditioning text for scoring one program after the library.
pub fn conditioning_prefix(library: &str, unit_id: &str) -> String {
    if library.is_empty() {
        file_header(unit_id)
    } else {
        format!("{library}{LIBRARY_SEPARATOR}{}", file_header(unit_id))
    }
}

#[derive(Debug, Error)]
pub enum ScoringError {
    /// The candidate cannot be scored; it is treated as infeasible.
    #[error("unscorable: {0}")]
    Unscorable(String),
    #[error(transparent)]
    Gateway(GatewayError),
}

impl From<ParseError> for ScoringError {
    fn from(e: ParseError) -> Self {
        ScoringError::Unscorable(e.to_string())
    }
}

impl From<GatewayError> for ScoringError {
    fn from(e: GatewayError) -> Self {
        match e {
            GatewayError::ContextOverflow { .. } => ScoringError::Unscorable(e.to_string()),
            other => ScoringError::Gateway(other),
        }
    }
}

/// The four metric values of a library plus programs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub tokens: u64,
    pub mdl_nats: f64,
    pub cc: u64,
    pub mi_neg: f64,
}

impl Metrics {
    pub fn get(&self, metric: MetricId) -> f64 {
        match metric {
            MetricId::Tokens => self.tokens as f64,
            MetricId::Mdl => self.mdl_nats,
            MetricId::Cc => self.cc as f64,
            MetricId::Mi => self.mi_neg,
        }
    }

    pub fn card(&self, loss: Loss) -> ScoreCard {
        ScoreCard {
            tokens: self.tokens,
            mdl_nats: self.mdl_nats,
            cc: self.cc,
            mi_neg: self.mi_neg,
            loss,
        }
    }
}

pub struct Scorer<'g> {
    gateway: &'g Gateway,
    grammar: Arc<dyn Grammar>,
}

fn present(library: &str) -> bool {
    !library.trim().is_empty()
}

impl<'g> Scorer<'g> {
    pub fn new(gateway: &'g Gateway, grammar: Arc<dyn Grammar>) -> Self {
        Self { gateway, grammar }
    }

    pub fn grammar(&self) -> &Arc<dyn Grammar> {
        &self.grammar
    }

    /// Tokens of the library plus every program, in the scoring model's
    /// tokenizer.
    pub fn score_tokens(&self, library: &str, programs: &BTreeMap<String, String>) -> u64 {
        let t = self.gateway.tokenizer();
        (t.count(library) + programs.values().map(|p| t.count(p)).sum::<usize>()) as u64
    }

    /// `−log p(L) + Σ −log p(ρ | L)` in nats.
    pub fn score_mdl(&self, library: &str, programs: &BTreeMap<String, String>) -> Result<f64, ScoringError> {
        let mut nats = 0.0;
        if present(library) {
            nats -= self.gateway.score_suffix("", library)?.suffix_logprob();
        }
        for (id, code) in programs {
            nats -= self.gateway.score_suffix(&conditioning_prefix(library, id), code)?.suffix_logprob();
        }
        Ok(nats)
    }

    pub fn score_cc(&self, library: &str, programs: &BTreeMap<String, String>) -> Result<u64, ScoringError> {
        let mut cc = 0;
        if present(library) {
            cc += self.grammar.analyze(library)?.cyclomatic_complexity();
        }
        for code in programs.values() {
            cc += self.grammar.analyze(code)?.cyclomatic_complexity();
        }
        Ok(cc)
    }

    pub fn score_mi(&self, library: &str, programs: &BTreeMap<String, String>) -> Result<f64, ScoringError> {
        let mut mi = 0.0;
        if present(library) {
            mi -= self.grammar.analyze(library)?.maintainability_index();
        }
        for code in programs.values() {
            mi -= self.grammar.analyze(code)?.maintainability_index();
        }
        Ok(mi)
    }

    pub fn metrics(&self, library: &str, programs: &BTreeMap<String, String>) -> Result<Metrics, ScoringError> {
        Ok(Metrics {
            cc: self.score_cc(library, programs)?,
            mi_neg: self.score_mi(library, programs)?,
            tokens: self.score_tokens(library, programs),
            mdl_nats: self.score_mdl(library, programs)?,
        })
    }
}

/// Reference point of a group of units: their original outcomes and the
/// metrics of the originals with an empty library.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub outcomes: BTreeMap<String, TestOutcome>,
    pub metrics: Metrics,
}

impl Baseline {
    pub fn compute<'a>(
        scorer: &Scorer,
        units: impl IntoIterator<Item = &'a SourceUnit>,
        outcomes: BTreeMap<String, TestOutcome>,
    ) -> Result<Self, ScoringError> {
        let programs = units.into_iter().map(|u| (u.id.clone(), u.code.clone())).collect();
        Ok(Self {
            metrics: scorer.metrics("", &programs)?,
            outcomes,
        })
    }
}

/// Whether every rewritten unit keeps all the tests its original passed.
/// Units without a recorded outcome fail the gate.
pub fn passes_gate<'a>(
    original: &BTreeMap<String, TestOutcome>,
    candidate: &BTreeMap<String, TestOutcome>,
    units: impl IntoIterator<Item = &'a String>,
) -> bool {
    units.into_iter().all(|id| match (original.get(id), candidate.get(id)) {
        (Some(o), Some(c)) => pass_gate(o, c).unwrap_or(false),
        _ => false,
    })
}

/// The metric value when the gate holds and the candidate was scorable,
/// otherwise infeasible.
pub fn gated_loss<'a>(
    metrics: Option<&Metrics>,
    metric: MetricId,
    original: &BTreeMap<String, TestOutcome>,
    candidate: &BTreeMap<String, TestOutcome>,
    units: impl IntoIterator<Item = &'a String>,
) -> Loss {
    match metrics {
        Some(m) if passes_gate(original, candidate, units) && m.get(metric).is_finite() => Loss::Finite(m.get(metric)),
        _ => Loss::Infeasible,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    /// Index of the chosen candidate in the input list.
    Chosen(usize),
    KeepOriginals,
}

/// Feasible argmin of the loss; ties go to the smallest digest.
pub fn select_best(cands: &[(&str, Loss)]) -> Selection {
    cands
        .iter()
        .enumerate()
        .filter_map(|(i, (digest, loss))| loss.finite().map(|v| (i, *digest, v)))
        .min_by(|a, b| a.2.total_cmp(&b.2).then_with(|| a.1.cmp(b.1)))
        .map_or(Selection::KeepOriginals, |(i, _, _)| Selection::Chosen(i))
}

/// Candidate value over baseline value.
pub fn ratio(candidate: f64, baseline: f64) -> f64 {
    if baseline == 0.0 {
        if candidate == 0.0 {
            1.0
        } else {
            f64::NAN
        }
    } else {
        candidate / baseline
    }
}
