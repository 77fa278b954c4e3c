//! On-disk layout of a finished run.
//!
//! ```text
//! run.json                  configuration and seed
//! clusters/plan.json        cluster plan, filtered units, descriptions, tags
//! clusters/<i>/cluster.json per-cluster result without samples
//! clusters/<i>/samples/<j>/completion.txt
//! clusters/<i>/samples/<j>/sample.json
//! library/codebank.py       final library
//! library/state.json        library entries
//! library/revisions.json    entry names after each cluster
//! rewritten/<unit path>     final program text
//! rewritten/index.json      unit id → path
//! outcomes.json             original and final test outcomes
//! final.json                baseline and final metrics
//! ```
//!
//! Every file is a pure function of the run's inputs, so two runs with the
//! same inputs produce identical directories.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::run::{ClusterResult, RunOutput};
use super::{LibraryState, Mode, PipelineError, RunConfig};
use crate::cluster::ClusterPlan;
use crate::model::TestOutcome;
use crate::scoring::Metrics;

pub const RUN_FILE: &str = "run.json";
pub const LIBRARY_FILE: &str = "library/codebank.py";
pub const REWRITTEN_DIR: &str = "rewritten";
pub const INDEX_FILE: &str = "rewritten/index.json";
pub const FINAL_FILE: &str = "final.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub task: String,
    pub config: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct PlanFile {
    mode: Mode,
    plan: Option<ClusterPlan>,
    filtered: Vec<String>,
    descriptions: BTreeMap<String, String>,
    tags: BTreeMap<String, BTreeSet<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct OutcomesFile {
    original: BTreeMap<String, TestOutcome>,
    r#final: BTreeMap<String, TestOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct FinalFile {
    baseline: Metrics,
    r#final: Metrics,
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), PipelineError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io(parent))?;
    }
    fs::write(path, text).map_err(io(path))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| PipelineError::Parse(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, PipelineError> {
    let text = fs::read_to_string(path).map_err(io(path))?;
    serde_json::from_str(&text).map_err(|e| PipelineError::Parse(format!("{}: {e}", path.display())))
}

/// Relative file path for a unit id: path segments are kept, characters
/// outside `[A-Za-z0-9._-]` become `_`, and `.`/`..`/empty segments become
/// `_`.
pub fn unit_path(id: &str) -> PathBuf {
    id.split('/')
        .map(|seg| {
            if seg.is_empty() || seg == "." || seg == ".." {
                "_".to_string()
            } else {
                seg.chars()
                    .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') { c } else { '_' })
                    .collect()
            }
        })
        .collect()
}

/// Maps every unit id to its file under `rewritten/`, rejecting ids that
/// map to the same file.
pub fn unit_index<'a>(ids: impl IntoIterator<Item = &'a String>) -> Result<BTreeMap<String, String>, PipelineError> {
    let mut index = BTreeMap::new();
    let mut seen = BTreeSet::new();
    for id in ids {
        let p = unit_path(id).to_string_lossy().replace('\\', "/");
        if p == "index.json" || !seen.insert(p.clone()) {
            return Err(PipelineError::InvalidTask(vec![format!("unit id {id} maps to an ambiguous file {p}")]));
        }
        index.insert(id.clone(), p);
    }
    Ok(index)
}

fn cluster_dir(dir: &Path, i: usize) -> PathBuf {
    dir.join("clusters").join(i.to_string())
}

pub fn write_run(dir: &Path, config: &RunConfig, out: &RunOutput) -> Result<(), PipelineError> {
    fs::create_dir_all(dir).map_err(io(dir))?;
    write_json(
        &dir.join(RUN_FILE),
        &RunManifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            task: out.task.clone(),
            config: config.clone(),
        },
    )?;
    write_json(
        &dir.join("clusters/plan.json"),
        &PlanFile {
            mode: out.mode,
            plan: out.plan.clone(),
            filtered: out.filtered.clone(),
            descriptions: out.descriptions.clone(),
            tags: out.tags.clone(),
        },
    )?;
    for c in &out.clusters {
        let cdir = cluster_dir(dir, c.index);
        let mut value = serde_json::to_value(c).map_err(|e| PipelineError::Parse(e.to_string()))?;
        value.as_object_mut().expect("struct").insert("samples".into(), Value::from(c.samples.len()));
        write_json(&cdir.join("cluster.json"), &value)?;
        for s in &c.samples {
            let sdir = cdir.join("samples").join(s.index.to_string());
            write_text(&sdir.join("completion.txt"), &s.completion)?;
            let mut value = serde_json::to_value(s).map_err(|e| PipelineError::Parse(e.to_string()))?;
            value.as_object_mut().expect("struct").remove("completion");
            write_json(&sdir.join("sample.json"), &value)?;
        }
    }
    write_text(&dir.join(LIBRARY_FILE), &out.library.text())?;
    write_json(&dir.join("library/state.json"), &out.library)?;
    write_json(&dir.join("library/revisions.json"), &out.revisions)?;
    let index = unit_index(out.rewritten.keys())?;
    for (id, code) in &out.rewritten {
        write_text(&dir.join(REWRITTEN_DIR).join(&index[id]), code)?;
    }
    write_json(&dir.join(INDEX_FILE), &index)?;
    write_json(
        &dir.join("outcomes.json"),
        &OutcomesFile {
            original: out.original_outcomes.clone(),
            r#final: out.final_outcomes.clone(),
        },
    )?;
    write_json(
        &dir.join(FINAL_FILE),
        &FinalFile {
            baseline: out.baseline_metrics,
            r#final: out.final_metrics,
        },
    )
}

/// Files a complete run directory must contain.
pub fn missing_files(dir: &Path) -> Vec<String> {
    [RUN_FILE, "clusters/plan.json", LIBRARY_FILE, "library/state.json", "library/revisions.json", INDEX_FILE, "outcomes.json", FINAL_FILE]
        .iter()
        .filter(|f| !dir.join(f).is_file())
        .map(|f| f.to_string())
        .collect()
}

pub fn read_manifest(dir: &Path) -> Result<RunManifest, PipelineError> {
    read_json(&dir.join(RUN_FILE))
}

/// Reads a run directory back. Fails when files are missing or malformed.
pub fn read_run(dir: &Path) -> Result<RunOutput, PipelineError> {
    let missing = missing_files(dir);
    if !missing.is_empty() {
        return Err(PipelineError::Io {
            path: dir.join(&missing[0]),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "incomplete run directory"),
        });
    }
    let manifest = read_manifest(dir)?;
    let plan: PlanFile = read_json(&dir.join("clusters/plan.json"))?;
    let n_clusters = plan.plan.as_ref().map_or(0, |p| p.clusters.len());
    let mut clusters = Vec::with_capacity(n_clusters);
    for i in 0..n_clusters {
        let cdir = cluster_dir(dir, i);
        let mut value: Value = read_json(&cdir.join("cluster.json"))?;
        let n = value.get("samples").and_then(Value::as_u64).unwrap_or(0) as usize;
        let mut samples = Vec::with_capacity(n);
        for j in 0..n {
            let sdir = cdir.join("samples").join(j.to_string());
            let completion = fs::read_to_string(sdir.join("completion.txt")).map_err(io(&sdir))?;
            let mut s: Value = read_json(&sdir.join("sample.json"))?;
            s.as_object_mut()
                .ok_or_else(|| PipelineError::Parse(format!("{}: not an object", sdir.display())))?
                .insert("completion".into(), Value::from(completion));
            samples.push(s);
        }
        value
            .as_object_mut()
            .ok_or_else(|| PipelineError::Parse(format!("{}: not an object", cdir.display())))?
            .insert("samples".into(), Value::from(samples));
        let c: ClusterResult = serde_json::from_value(value).map_err(|e| PipelineError::Parse(format!("{}: {e}", cdir.display())))?;
        clusters.push(c);
    }
    let library: LibraryState = read_json(&dir.join("library/state.json"))?;
    let revisions: Vec<Vec<String>> = read_json(&dir.join("library/revisions.json"))?;
    let index: BTreeMap<String, String> = read_json(&dir.join(INDEX_FILE))?;
    let mut rewritten = BTreeMap::new();
    for (id, rel) in &index {
        let p = dir.join(REWRITTEN_DIR).join(rel);
        rewritten.insert(id.clone(), fs::read_to_string(&p).map_err(io(&p))?);
    }
    let outcomes: OutcomesFile = read_json(&dir.join("outcomes.json"))?;
    let fin: FinalFile = read_json(&dir.join(FINAL_FILE))?;
    Ok(RunOutput {
        task: manifest.task,
        mode: plan.mode,
        plan: plan.plan,
        filtered: plan.filtered,
        descriptions: plan.descriptions,
        tags: plan.tags,
        clusters,
        library,
        revisions,
        rewritten,
        original_outcomes: outcomes.original,
        final_outcomes: outcomes.r#final,
        baseline_metrics: fin.baseline,
        final_metrics: fin.r#final,
    })
}

/// Library text and rewritten programs of a candidate directory laid out
/// like a run directory (`library/codebank.py`, `rewritten/<unit path>`).
/// The library file is optional.
pub fn read_candidate_dir(dir: &Path, unit_ids: &[String]) -> Result<(String, BTreeMap<String, String>), PipelineError> {
    let lib_path = dir.join(LIBRARY_FILE);
    let library = if lib_path.is_file() {
        fs::read_to_string(&lib_path).map_err(io(&lib_path))?
    } else {
        String::new()
    };
    let index = unit_index(unit_ids)?;
    let mut programs = BTreeMap::new();
    for (id, rel) in index {
        let p = dir.join(REWRITTEN_DIR).join(&rel);
        let code = fs::read_to_string(&p).map_err(io(&p))?;
        programs.insert(id, crate::model::normalize_source(&code));
    }
    Ok((library, programs))
}
