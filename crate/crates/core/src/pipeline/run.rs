use std::collections::{BTreeMap, BTreeSet};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::library::{compose, defined_names, resolve_collisions, LibraryEntry, LibraryState, Rename};
use super::prompt::build_prompt;
use super::protocol::{parse_candidate, CandidateError};
use super::{Engine, Mode, PipelineError};
use crate::cluster::{plan_clusters, prefilter, summarize_all, ClusterPlan};
use crate::code::Grammar;
use crate::gateway::Gateway;
use crate::model::{validate_task, Candidate, Loss, Provenance, ScoreCard, SourceUnit, Task, TestOutcome};
use crate::scoring::{gated_loss, select_best, Baseline, Metrics, Scorer, ScoringError, Selection};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "detail", rename_all = "snake_case")]
pub enum SampleStatus {
    Scored,
    /// The completion does not follow the output format.
    Protocol(String),
    /// A section of the completion is not valid source.
    Parse(String),
    /// The helpers redefine a library entry the prompt showed.
    Redefines(Vec<String>),
    /// Tests could not be run on the candidate.
    Harness(String),
    /// The candidate parsed but could not be scored.
    Unscorable(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub index: usize,
    pub completion: String,
    pub provenance: Provenance,
    pub status: SampleStatus,
    pub candidate: Option<Candidate>,
    pub renames: Vec<Rename>,
    pub outcomes: BTreeMap<String, TestOutcome>,
    pub scorecard: Option<ScoreCard>,
}

impl SampleRecord {
    pub fn loss(&self) -> Loss {
        self.scorecard.as_ref().map_or(Loss::Infeasible, |c| c.loss)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterResult {
    pub index: usize,
    pub units: Vec<String>,
    pub retrieved: Vec<String>,
    /// Library revision the cluster was refactored against.
    pub library_revision: usize,
    pub baseline: Baseline,
    pub samples: Vec<SampleRecord>,
    /// Index into `samples` of the kept candidate.
    pub selection: Selection,
    /// Helpers contributed to the final library, after renames.
    pub delta: String,
    /// Final text of each unit of the cluster.
    pub rewritten: BTreeMap<String, String>,
    /// Renames applied when merging into the final library.
    pub merge_renames: Vec<Rename>,
}

impl ClusterResult {
    pub fn selected(&self) -> Option<&SampleRecord> {
        match self.selection {
            Selection::Chosen(i) => self.samples.get(i),
            Selection::KeepOriginals => None,
        }
    }

    pub fn count(&self, pred: impl Fn(&SampleStatus) -> bool) -> usize {
        self.samples.iter().filter(|s| pred(&s.status)).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    pub task: String,
    pub mode: Mode,
    pub plan: Option<ClusterPlan>,
    /// Units left out of clustering by the size filter.
    pub filtered: Vec<String>,
    pub descriptions: BTreeMap<String, String>,
    /// Conceptual tags of the task's units, when the task provides them.
    #[serde(default)]
    pub tags: BTreeMap<String, BTreeSet<String>>,
    pub clusters: Vec<ClusterResult>,
    pub library: LibraryState,
    /// Entry names of the library after each cluster, starting with the
    /// initial library.
    pub revisions: Vec<Vec<String>>,
    pub rewritten: BTreeMap<String, String>,
    pub original_outcomes: BTreeMap<String, TestOutcome>,
    /// Outcomes of the final programs against the final library.
    pub final_outcomes: BTreeMap<String, TestOutcome>,
    pub baseline_metrics: Metrics,
    pub final_metrics: Metrics,
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// The `m` library definitions closest to any of the units, by cosine
/// similarity between the entry source and the unit description (or code).
/// Ties go to the smaller name.
pub fn retrieve_relevant<'l>(
    gateway: &Gateway,
    library: &'l LibraryState,
    units: &[&SourceUnit],
    m: usize,
) -> Result<Vec<&'l LibraryEntry>, PipelineError> {
    let defs: Vec<&LibraryEntry> = library.definitions().collect();
    if defs.is_empty() || m == 0 || units.is_empty() {
        return Ok(Vec::new());
    }
    let mut texts: Vec<String> = units
        .iter()
        .map(|u| u.description.clone().unwrap_or_else(|| u.code.clone()))
        .collect();
    texts.extend(defs.iter().map(|d| d.source.clone()));
    let vectors = gateway.embed(&texts)?;
    let (unit_vecs, def_vecs) = vectors.split_at(units.len());
    let mut scored: Vec<(f64, &LibraryEntry)> = defs
        .iter()
        .zip(def_vecs)
        .map(|(d, v)| {
            let best = unit_vecs.iter().map(|u| cosine(u, v)).fold(f64::NEG_INFINITY, f64::max);
            (best, *d)
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.name.cmp(&b.1.name)));
    Ok(scored.into_iter().take(m).map(|(_, d)| d).collect())
}

fn run_tests(
    engine: &Engine,
    task: &Task,
    programs: &BTreeMap<String, String>,
    library: &str,
) -> Result<BTreeMap<String, TestOutcome>, PipelineError> {
    programs
        .par_iter()
        .map(|(id, code)| {
            let unit = task.unit(id).ok_or_else(|| PipelineError::Parse(format!("unknown unit {id}")))?;
            let suite = task
                .suite(unit)
                .ok_or_else(|| PipelineError::InvalidTask(vec![format!("unit {id}: no suite {}", unit.test_ref)]))?;
            Ok((id.clone(), engine.harness.run_suite(id, code, library, suite)?))
        })
        .collect()
}

/// Outcomes of every unit's original source, tested without a library.
pub fn original_outcomes(engine: &Engine, task: &Task) -> Result<BTreeMap<String, TestOutcome>, PipelineError> {
    let programs = task.units.iter().map(|u| (u.id.clone(), u.code.clone())).collect();
    engine.install(|| run_tests(engine, task, &programs, ""))
}

fn scoring_failure(e: ScoringError) -> Result<Option<String>, PipelineError> {
    match e {
        ScoringError::Unscorable(msg) => Ok(Some(msg)),
        ScoringError::Gateway(g) => Err(g.into()),
    }
}

struct Context<'a> {
    engine: &'a Engine,
    index: usize,
    task: &'a Task,
    units: Vec<String>,
    prior: &'a LibraryState,
    retrieved: BTreeSet<String>,
    original: &'a BTreeMap<String, TestOutcome>,
}

impl Context<'_> {
    fn evaluate(&self, index: usize, completion: String, provenance: Provenance) -> Result<SampleRecord, PipelineError> {
        let engine = self.engine;
        let grammar: &dyn Grammar = engine.grammar.as_ref();
        let mut record = SampleRecord {
            index,
            completion,
            provenance: provenance.clone(),
            status: SampleStatus::Scored,
            candidate: None,
            renames: Vec::new(),
            outcomes: BTreeMap::new(),
            scorecard: None,
        };
        let ids: Vec<&str> = self.units.iter().map(String::as_str).collect();
        let parsed = match parse_candidate(grammar, &record.completion, &ids, provenance.clone()) {
            Ok(c) => c,
            Err(CandidateError::Protocol(m)) => {
                record.status = SampleStatus::Protocol(m);
                return Ok(record);
            }
            Err(e @ CandidateError::Parse { .. }) => {
                record.status = SampleStatus::Parse(e.to_string());
                return Ok(record);
            }
        };
        let names = defined_names(grammar, &parsed.library).map_err(|e| PipelineError::Parse(e.to_string()))?;
        let redefined: Vec<String> = names.into_iter().filter(|n| self.retrieved.contains(n)).collect();
        if !redefined.is_empty() {
            record.status = SampleStatus::Redefines(redefined);
            record.candidate = Some(parsed);
            return Ok(record);
        }
        let mut rewritten = parsed.rewritten.clone();
        let (delta, renames) = resolve_collisions(grammar, &self.prior.names(), &parsed.library, &mut rewritten, self.index)
            .map_err(|e| PipelineError::Parse(e.to_string()))?;
        let candidate = if renames.is_empty() {
            parsed
        } else {
            Candidate::new(delta, rewritten, provenance).map_err(|e| PipelineError::Parse(e.to_string()))?
        };
        record.renames = renames;

        let full_library = compose(&self.prior.text(), &candidate.library);
        let outcomes = match run_tests(engine, self.task, &candidate.rewritten, &full_library) {
            Ok(o) => o,
            Err(PipelineError::Harness(e)) => {
                record.status = SampleStatus::Harness(e.to_string());
                record.candidate = Some(candidate);
                return Ok(record);
            }
            Err(e) => return Err(e),
        };
        let scorer = Scorer::new(&engine.gateway, engine.grammar.clone());
        match scorer.metrics(&full_library, &candidate.rewritten) {
            Ok(m) => {
                let loss = gated_loss(Some(&m), engine.config.metric, self.original, &outcomes, &self.units);
                record.scorecard = Some(m.card(loss));
            }
            Err(e) => {
                if let Some(msg) = scoring_failure(e)? {
                    record.status = SampleStatus::Unscorable(msg);
                }
            }
        }
        record.outcomes = outcomes;
        record.candidate = Some(candidate);
        Ok(record)
    }
}

/// Samples `k` refactorings of one cluster against the `prior` library,
/// tests and scores each, and keeps the feasible argmin of the configured
/// metric. The helpers of a candidate are evaluated together with the
/// whole prior library; helpers whose names are already taken are renamed.
pub fn refactor_cluster(
    engine: &Engine,
    task: &Task,
    index: usize,
    units: &[&SourceUnit],
    prior: &LibraryState,
    original: &BTreeMap<String, TestOutcome>,
) -> Result<ClusterResult, PipelineError> {
    let cfg = &engine.config;
    let retrieved = retrieve_relevant(&engine.gateway, prior, units, cfg.retrieval_top_m)?;
    let prompt = build_prompt(units, &retrieved);
    let completions = engine.gateway.sample(&prompt, cfg.k)?;
    let ctx = Context {
        engine,
        index,
        task,
        units: units.iter().map(|u| u.id.clone()).collect(),
        prior,
        retrieved: retrieved.iter().map(|e| e.name.clone()).collect(),
        original,
    };
    let samples: Vec<SampleRecord> = engine.install(|| {
        completions
            .into_par_iter()
            .enumerate()
            .map(|(i, c)| ctx.evaluate(i, c.text, c.provenance))
            .collect::<Result<_, _>>()
    })?;

    let keys: Vec<(&str, Loss)> = samples
        .iter()
        .map(|s| (s.candidate.as_ref().map_or("", |c| c.digest.as_str()), s.loss()))
        .collect();
    let selection = select_best(&keys);
    let scorer = Scorer::new(&engine.gateway, engine.grammar.clone());
    let cluster_original: BTreeMap<String, TestOutcome> =
        ctx.units.iter().map(|id| (id.clone(), original[id].clone())).collect();
    let baseline = Baseline::compute(&scorer, units.iter().copied(), cluster_original).map_err(|e| match e {
        ScoringError::Gateway(g) => PipelineError::Gateway(g),
        ScoringError::Unscorable(m) => PipelineError::Parse(m),
    })?;

    let (delta, rewritten) = match selection {
        Selection::Chosen(i) => {
            let c = samples[i].candidate.as_ref().expect("scored samples carry a candidate");
            (c.library.clone(), c.rewritten.clone())
        }
        Selection::KeepOriginals => (String::new(), units.iter().map(|u| (u.id.clone(), u.code.clone())).collect()),
    };
    info!(
        "cluster {index}: {} of {} samples feasible, {:?}",
        samples.iter().filter(|s| s.loss().is_feasible()).count(),
        samples.len(),
        selection
    );
    Ok(ClusterResult {
        index,
        units: ctx.units.clone(),
        retrieved: retrieved.iter().map(|e| e.name.clone()).collect(),
        library_revision: prior.revision(),
        baseline,
        samples,
        selection,
        delta,
        rewritten,
        merge_renames: Vec::new(),
    })
}

struct Prepared {
    plan: Option<ClusterPlan>,
    filtered: Vec<String>,
    described: Vec<SourceUnit>,
    original: BTreeMap<String, TestOutcome>,
    initial: LibraryState,
}

fn prepare(engine: &Engine, task: &Task) -> Result<Prepared, PipelineError> {
    let problems = validate_task(task);
    if !problems.is_empty() {
        return Err(PipelineError::InvalidTask(problems));
    }
    let grammar = engine.grammar.as_ref();
    let initial = match &engine.config.seed_library {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| PipelineError::Io {
                path: path.clone(),
                source,
            })?;
            LibraryState::seeded(grammar, &text).map_err(|e| PipelineError::Parse(format!("{}: {e}", path.display())))?
        }
        None => LibraryState::new(),
    };
    let original = original_outcomes(engine, task)?;
    let (kept, dropped) = prefilter(grammar, &task.units, engine.config.min_sloc);
    let filtered: Vec<String> = dropped.iter().map(|u| u.id.clone()).collect();
    let mut described: Vec<SourceUnit> = kept.into_iter().cloned().collect();
    engine.install(|| summarize_all(&mut described, &engine.gateway))?;
    let plan = if described.is_empty() {
        None
    } else {
        let refs: Vec<&SourceUnit> = described.iter().collect();
        let size = engine.config.cluster_size.min(refs.len());
        Some(plan_clusters(&refs, &engine.gateway, size)?)
    };
    Ok(Prepared {
        plan,
        filtered,
        described,
        original,
        initial,
    })
}

fn cluster_units<'a>(described: &'a [SourceUnit], ids: &[String]) -> Vec<&'a SourceUnit> {
    ids.iter()
        .map(|id| described.iter().find(|u| &u.id == id).expect("planned unit"))
        .collect()
}

fn finish(
    engine: &Engine,
    task: &Task,
    prepared: Prepared,
    clusters: Vec<ClusterResult>,
    library: LibraryState,
    revisions: Vec<Vec<String>>,
) -> Result<RunOutput, PipelineError> {
    let mut rewritten: BTreeMap<String, String> = task.units.iter().map(|u| (u.id.clone(), u.code.clone())).collect();
    for c in &clusters {
        rewritten.extend(c.rewritten.iter().map(|(k, v)| (k.clone(), v.clone())));
    }
    let text = library.text();
    let final_outcomes = engine.install(|| run_tests(engine, task, &rewritten, &text))?;
    for (id, o) in &prepared.original {
        if !crate::harness::pass_gate(o, &final_outcomes[id]).unwrap_or(false) {
            warn!("unit {id} loses tests against the merged library");
        }
    }
    let scorer = Scorer::new(&engine.gateway, engine.grammar.clone());
    let to_pipeline = |e: ScoringError| match e {
        ScoringError::Gateway(g) => PipelineError::Gateway(g),
        ScoringError::Unscorable(m) => PipelineError::Parse(m),
    };
    let originals: BTreeMap<String, String> = task.units.iter().map(|u| (u.id.clone(), u.code.clone())).collect();
    let baseline_metrics = scorer.metrics("", &originals).map_err(to_pipeline)?;
    let final_metrics = scorer.metrics(&text, &rewritten).map_err(to_pipeline)?;
    Ok(RunOutput {
        task: task.name.clone(),
        mode: engine.config.mode,
        plan: prepared.plan,
        filtered: prepared.filtered,
        descriptions: prepared
            .described
            .iter()
            .filter_map(|u| u.description.clone().map(|d| (u.id.clone(), d)))
            .collect(),
        tags: task.tags.clone(),
        clusters,
        library,
        revisions,
        rewritten,
        original_outcomes: prepared.original,
        final_outcomes,
        baseline_metrics,
        final_metrics,
    })
}

fn entry_names(lib: &LibraryState) -> Vec<String> {
    lib.entries().iter().map(|e| e.name.clone()).collect()
}

/// Refactors every cluster independently against the initial library and
/// merges the helpers in cluster order, renaming collisions.
pub fn run_parallel(engine: &Engine, task: &Task) -> Result<RunOutput, PipelineError> {
    let prepared = prepare(engine, task)?;
    let grammar = engine.grammar.as_ref();
    let planned: Vec<Vec<String>> = prepared.plan.as_ref().map(|p| p.clusters.clone()).unwrap_or_default();
    let mut clusters: Vec<ClusterResult> = engine.install(|| {
        planned
            .par_iter()
            .enumerate()
            .map(|(i, ids)| {
                let units = cluster_units(&prepared.described, ids);
                refactor_cluster(engine, task, i, &units, &prepared.initial, &prepared.original)
            })
            .collect::<Result<_, _>>()
    })?;
    let mut library = prepared.initial.clone();
    let mut revisions = vec![entry_names(&library)];
    for c in &mut clusters {
        let (delta, renames) = resolve_collisions(grammar, &library.names(), &c.delta, &mut c.rewritten, c.index)
            .map_err(|e| PipelineError::Parse(e.to_string()))?;
        library
            .absorb(grammar, &delta, c.index)
            .map_err(|e| PipelineError::Parse(e.to_string()))?;
        c.delta = delta;
        c.merge_renames = renames;
        revisions.push(entry_names(&library));
    }
    finish(engine, task, prepared, clusters, library, revisions)
}

/// Refactors the clusters in order, each against the library grown by the
/// clusters before it. The library only ever gains entries.
pub fn run_incremental(engine: &Engine, task: &Task) -> Result<RunOutput, PipelineError> {
    let prepared = prepare(engine, task)?;
    let grammar = engine.grammar.as_ref();
    let planned: Vec<Vec<String>> = prepared.plan.as_ref().map(|p| p.clusters.clone()).unwrap_or_default();
    let mut library = prepared.initial.clone();
    let mut revisions = vec![entry_names(&library)];
    let mut clusters = Vec::with_capacity(planned.len());
    for (i, ids) in planned.iter().enumerate() {
        let units = cluster_units(&prepared.described, ids);
        let mut c = refactor_cluster(engine, task, i, &units, &library, &prepared.original)?;
        library
            .absorb(grammar, &c.delta, i)
            .map_err(|e| PipelineError::Parse(e.to_string()))?;
        c.merge_renames = Vec::new();
        revisions.push(entry_names(&library));
        clusters.push(c);
    }
    finish(engine, task, prepared, clusters, library, revisions)
}

pub fn run(engine: &Engine, task: &Task) -> Result<RunOutput, PipelineError> {
    match engine.config.mode {
        Mode::Parallel => run_parallel(engine, task),
        Mode::Incremental => run_incremental(engine, task),
    }
}
