//! Domain types shared by every stage: tasks, candidates, test outcomes and
//! score cards, plus the on-disk task manifest.
//!
//! A task directory looks like:
//!
//! ```text
//! task.json
//! files/<unit sources>
//! tests/<external suites, optional>
//! ```
//!
//! `task.json` carries `name`, `units` (`id`, `code` as a path relative to the
//! task directory, `test_ref`, optional `description`), `test_registry`
//! (`test_ref` → suite descriptor) and optional `tags` (unit id → tag list).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid candidate: {0}")]
    InvalidCandidate(String),
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed manifest {path}: {source}")]
    Manifest {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("unknown metric '{0}' (expected tokens, mdl, cc or mi)")]
    UnknownMetric(String),
}

/// One original file of a task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceUnit {
    pub id: String,
    pub code: String,
    pub test_ref: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

/// Outcome the mock backend assigns to a test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MockVerdict {
    #[default]
    Pass,
    Fail,
    Crash,
    Timeout,
}

/// A test evaluated by the mock backend against the library and program text.
///
/// The verdict is `outcome` when every `require` substring occurs and no
/// `forbid` substring occurs, otherwise `on_violation`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockTest {
    pub id: String,
    #[serde(default)]
    pub outcome: MockVerdict,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub require: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub forbid: Vec<String>,
    #[serde(default = "default_violation")]
    pub on_violation: MockVerdict,
}

fn default_violation() -> MockVerdict {
    MockVerdict::Fail
}

/// How a unit's tests are executed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SuiteDescriptor {
    /// Outcomes come solely from the manifest rules.
    Mock { tests: Vec<MockTest> },
    /// Test files copied into a workspace and run by the external shim.
    /// `tests` optionally lists the ids the suite is expected to report.
    External {
        path: PathBuf,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        tests: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub name: String,
    pub units: Vec<SourceUnit>,
    pub test_registry: BTreeMap<String, SuiteDescriptor>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub tags: BTreeMap<String, BTreeSet<String>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ManifestUnit {
    id: String,
    code: PathBuf,
    test_ref: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    description: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Manifest {
    name: String,
    units: Vec<ManifestUnit>,
    test_registry: BTreeMap<String, SuiteDescriptor>,
    #[serde(default)]
    tags: BTreeMap<String, BTreeSet<String>>,
}

impl Task {
    /// Loads `task.json` from `dir`, reading unit sources and resolving
    /// external suite paths against the task directory. Sources are
    /// normalized with [`normalize_source`].
    pub fn load(dir: &Path) -> Result<Task, ModelError> {
        let manifest_path = dir.join("task.json");
        let raw = read_to_string(&manifest_path)?;
        let manifest: Manifest =
            serde_json::from_str(&raw).map_err(|source| ModelError::Manifest {
                path: manifest_path.clone(),
                source,
            })?;
        let mut units = Vec::with_capacity(manifest.units.len());
        for unit in manifest.units {
            let code = read_to_string(&dir.join(&unit.code))?;
            units.push(SourceUnit {
                id: unit.id,
                code: normalize_source(&code),
                test_ref: unit.test_ref,
                description: unit.description,
            });
        }
        let test_registry = manifest
            .test_registry
            .into_iter()
            .map(|(name, suite)| {
                let suite = match suite {
                    SuiteDescriptor::External { path, tests } if path.is_relative() => {
                        SuiteDescriptor::External {
                            path: dir.join(path),
                            tests,
                        }
                    }
                    other => other,
                };
                (name, suite)
            })
            .collect();
        Ok(Task {
            name: manifest.name,
            units,
            test_registry,
            tags: manifest.tags,
        })
    }

    pub fn unit(&self, id: &str) -> Option<&SourceUnit> {
        self.units.iter().find(|u| u.id == id)
    }

    pub fn suite(&self, unit: &SourceUnit) -> Option<&SuiteDescriptor> {
        self.test_registry.get(&unit.test_ref)
    }
}

/// Source text as stored in a task: trailing newlines collapsed to exactly
/// one, so sources compare equal to their copies in model completions.
pub fn normalize_source(code: &str) -> String {
    let trimmed = code.trim_end_matches(['\n', '\r']);
    if trimmed.is_empty() {
        String::new()
    } else {
        format!("{trimmed}\n")
    }
}

fn read_to_string(path: &Path) -> Result<String, ModelError> {
    std::fs::read_to_string(path).map_err(|source| ModelError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Checks every task invariant. An empty list means the task is well formed.
pub fn validate_task(task: &Task) -> Vec<String> {
    let mut violations = Vec::new();
    if task.units.is_empty() {
        violations.push("task has no units".to_string());
    }
    let mut seen = BTreeSet::new();
    let mut reported = BTreeSet::new();
    for unit in &task.units {
        if !seen.insert(unit.id.as_str()) && reported.insert(unit.id.as_str()) {
            violations.push(format!("duplicate id: {}", unit.id));
        }
        if unit.id.trim().is_empty() {
            violations.push("unit with empty id".to_string());
        }
        if unit.code.trim().is_empty() {
            violations.push(format!("unit {}: empty code", unit.id));
        }
        if !task.test_registry.contains_key(&unit.test_ref) {
            violations.push(format!(
                "unit {}: unknown test_ref '{}'",
                unit.id, unit.test_ref
            ));
        }
    }
    for id in task.tags.keys() {
        if !seen.contains(id.as_str()) {
            violations.push(format!("tags: unknown unit '{id}'"));
        }
    }
    violations
}

/// Record of the sampling call that produced a candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Provenance {
    pub model: String,
    pub temperature: f64,
    pub sample_index: usize,
    pub prompt_hash: String,
}

/// A proposed refactoring of one cluster: new library text plus rewritten
/// sources keyed by unit id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub digest: String,
    pub library: String,
    pub rewritten: BTreeMap<String, String>,
    pub provenance: Provenance,
}

impl Candidate {
    pub fn new(
        library: String,
        rewritten: BTreeMap<String, String>,
        provenance: Provenance,
    ) -> Result<Candidate, ModelError> {
        let digest = candidate_digest(&library, &rewritten)?;
        Ok(Candidate {
            digest,
            library,
            rewritten,
            provenance,
        })
    }

    /// The no-op refactoring: empty library, sources unchanged.
    pub fn identity(units: &[SourceUnit]) -> Result<Candidate, ModelError> {
        let rewritten = units
            .iter()
            .map(|u| (u.id.clone(), u.code.clone()))
            .collect();
        Candidate::new(String::new(), rewritten, Provenance::default())
    }
}

/// SHA-256 over the library and the rewritten sources sorted by unit id,
/// each field length-prefixed. Hex encoded.
pub fn candidate_digest<'a, I, K, V>(library: &str, rewritten: I) -> Result<String, ModelError>
where
    I: IntoIterator<Item = (&'a K, &'a V)>,
    K: AsRef<str> + ?Sized + 'a,
    V: AsRef<str> + ?Sized + 'a,
{
    let mut entries: Vec<(&str, &str)> = rewritten
        .into_iter()
        .map(|(k, v)| (k.as_ref(), v.as_ref()))
        .collect();
    if entries.is_empty() {
        return Err(ModelError::InvalidCandidate(
            "rewritten map is empty".to_string(),
        ));
    }
    entries.sort_unstable();
    let mut hasher = Sha256::new();
    hasher.update(b"libsmith-candidate-v1\0");
    let mut field = |bytes: &[u8]| {
        hasher.update((bytes.len() as u64).to_le_bytes());
        hasher.update(bytes);
    };
    field(library.as_bytes());
    for (id, source) in entries {
        field(id.as_bytes());
        field(source.as_bytes());
    }
    Ok(hex::encode(hasher.finalize()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Assertion,
    Crash,
    Timeout,
}

/// The tests a unit passed, failed, or errored on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub unit_id: String,
    pub passed: BTreeSet<String>,
    pub failed: BTreeSet<String>,
    pub errored: BTreeMap<String, ErrorKind>,
}

impl TestOutcome {
    pub fn empty(unit_id: impl Into<String>) -> TestOutcome {
        TestOutcome {
            unit_id: unit_id.into(),
            passed: BTreeSet::new(),
            failed: BTreeSet::new(),
            errored: BTreeMap::new(),
        }
    }

    pub fn total(&self) -> usize {
        self.passed.len() + self.failed.len() + self.errored.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricId {
    Tokens,
    Mdl,
    Cc,
    Mi,
}

impl MetricId {
    pub const ALL: [MetricId; 4] = [MetricId::Tokens, MetricId::Mdl, MetricId::Cc, MetricId::Mi];

    pub fn as_str(self) -> &'static str {
        match self {
            MetricId::Tokens => "tokens",
            MetricId::Mdl => "mdl",
            MetricId::Cc => "cc",
            MetricId::Mi => "mi",
        }
    }
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricId {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "tokens" => Ok(MetricId::Tokens),
            "mdl" => Ok(MetricId::Mdl),
            "cc" => Ok(MetricId::Cc),
            "mi" => Ok(MetricId::Mi),
            _ => Err(ModelError::UnknownMetric(s.to_string())),
        }
    }
}

/// Gated loss: the metric value when the candidate keeps every originally
/// passing test, otherwise infeasible. Never an IEEE infinity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    Finite(f64),
    Infeasible,
}

impl Loss {
    pub fn finite(self) -> Option<f64> {
        match self {
            Loss::Finite(v) => Some(v),
            Loss::Infeasible => None,
        }
    }

    pub fn is_feasible(self) -> bool {
        matches!(self, Loss::Finite(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreCard {
    pub tokens: u64,
    pub mdl_nats: f64,
    pub cc: u64,
    /// Negated maintainability index; lower is better.
    pub mi_neg: f64,
    pub loss: Loss,
}

impl ScoreCard {
    pub fn metric(&self, metric: MetricId) -> f64 {
        match metric {
            MetricId::Tokens => self.tokens as f64,
            MetricId::Mdl => self.mdl_nats,
            MetricId::Cc => self.cc as f64,
            MetricId::Mi => self.mi_neg,
        }
    }
}
