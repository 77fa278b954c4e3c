//! Test execution. Mock suites are evaluated from their manifest rules;
//! external suites run through the shim in a throwaway workspace.

mod mock;
pub mod subprocess;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::limit::Semaphore;
use crate::model::{SuiteDescriptor, TestOutcome};

pub use mock::run_mock;
pub use subprocess::{ErroredTest, OutcomeFile, OUTCOME_FILE, PROGRAM_FILE};

/// JSON Schema of `outcome.json`, shared with the shim.
pub const OUTCOME_SCHEMA: &str = include_str!("../../data/outcome.schema.json");

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HarnessError {
    #[error("workspace error: {0}")]
    Workspace(String),
    #[error("malformed shim output: {0}")]
    BackendProtocol(String),
    #[error("outcomes belong to different units: {0} vs {1}")]
    UnitMismatch(String, String),
    #[error("suite kind not supported by the {0} backend")]
    UnsupportedSuite(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Mock,
    Subprocess,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunnerBackend {
    pub kind: BackendKind,
    /// Per-test timeout in seconds, passed to the shim.
    pub timeout_secs: f64,
    /// Extra wall time granted to the shim beyond `timeout × tests`.
    pub grace_secs: f64,
    pub cpu_secs: Option<u64>,
    pub memory_bytes: Option<u64>,
    /// Shim command; the workspace path and `--timeout <s>` are appended.
    pub shim: Vec<String>,
    /// Directory under which workspaces are created; the system temp dir
    /// when unset.
    pub work_root: Option<std::path::PathBuf>,
    pub max_processes: usize,
}

impl Default for RunnerBackend {
    fn default() -> Self {
        Self {
            kind: BackendKind::Mock,
            timeout_secs: 10.0,
            grace_secs: 5.0,
            cpu_secs: None,
            memory_bytes: None,
            shim: vec!["pyrunner-shim".into()],
            work_root: None,
            max_processes: 4,
        }
    }
}

pub struct Harness {
    backend: RunnerBackend,
    processes: Semaphore,
}

impl Harness {
    pub fn new(backend: RunnerBackend) -> Self {
        Self {
            processes: Semaphore::new(backend.max_processes),
            backend,
        }
    }

    pub fn mock() -> Self {
        Self::new(RunnerBackend::default())
    }

    pub fn backend(&self) -> &RunnerBackend {
        &self.backend
    }

    pub fn run_suite(&self, unit_id: &str, code: &str, library: &str, suite: &SuiteDescriptor) -> Result<TestOutcome, HarnessError> {
        match suite {
            SuiteDescriptor::Mock { tests } => Ok(run_mock(unit_id, code, library, tests)),
            SuiteDescriptor::External { path, tests } => {
                if self.backend.kind != BackendKind::Subprocess {
                    return Err(HarnessError::UnsupportedSuite("mock"));
                }
                let _permit = self.processes.acquire();
                subprocess::run(&self.backend, unit_id, code, library, path, tests)
            }
        }
    }
}

/// Whether the candidate passes every test the original passed.
pub fn pass_gate(original: &TestOutcome, candidate: &TestOutcome) -> Result<bool, HarnessError> {
    if original.unit_id != candidate.unit_id {
        return Err(HarnessError::UnitMismatch(original.unit_id.clone(), candidate.unit_id.clone()));
    }
    Ok(original.passed.is_subset(&candidate.passed))
}
