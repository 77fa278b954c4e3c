//! End-to-end refactoring: cluster the units, sample candidate
//! refactorings per cluster, keep the feasible argmin, and merge the
//! per-cluster libraries.

pub mod library;
pub mod prompt;
pub mod protocol;
pub mod rundir;
mod run;

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::ClusterError;
use crate::code::{default_grammar, Grammar, TokenizerError, TokenizerId, TokenizerRegistry};
use crate::gateway::{Gateway, GatewayConfig, GatewayError};
use crate::harness::{Harness, HarnessError, RunnerBackend};
use crate::model::MetricId;

pub use library::{LibraryEntry, LibraryState, Rename};
pub use run::{
    original_outcomes, refactor_cluster, retrieve_relevant, run, run_incremental, run_parallel, ClusterResult, RunOutput,
    SampleRecord,
    SampleStatus,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Parallel,
    Incremental,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "parallel" => Ok(Mode::Parallel),
            "incremental" => Ok(Mode::Incremental),
            _ => Err(format!("unknown mode '{s}' (expected parallel or incremental)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Samples drawn per cluster.
    pub k: usize,
    pub cluster_size: usize,
    pub metric: MetricId,
    pub mode: Mode,
    /// Library entries placed in each prompt.
    pub retrieval_top_m: usize,
    pub seed: u64,
    /// Units with fewer source lines are left out of clustering and pass
    /// through unchanged.
    pub min_sloc: usize,
    /// Worker threads; 0 uses one per logical core.
    pub jobs: usize,
    /// tokenizer.json of the scoring model. Without it token counts use the
    /// offline fallback tokenizer.
    pub tokenizer_file: Option<PathBuf>,
    /// Library module to start from instead of an empty one.
    pub seed_library: Option<PathBuf>,
    pub gateway: GatewayConfig,
    pub harness: RunnerBackend,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            k: 8,
            cluster_size: 3,
            metric: MetricId::Mdl,
            mode: Mode::Parallel,
            retrieval_top_m: 5,
            seed: 0,
            min_sloc: 10,
            jobs: 0,
            tokenizer_file: None,
            seed_library: None,
            gateway: GatewayConfig::default(),
            harness: RunnerBackend::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid task:\n  {}", .0.join("\n  "))]
    InvalidTask(Vec<String>),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Cluster(ClusterError),
    #[error(transparent)]
    Tokenizer(#[from] TokenizerError),
    #[error("{0}")]
    Parse(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl From<ClusterError> for PipelineError {
    fn from(e: ClusterError) -> Self {
        match e {
            ClusterError::Gateway(g) => PipelineError::Gateway(g),
            other => PipelineError::Cluster(other),
        }
    }
}

/// Everything a run needs: configuration, the model gateway, the test
/// harness and the subject grammar.
pub struct Engine {
    pub config: RunConfig,
    pub gateway: Gateway,
    pub harness: Harness,
    pub grammar: Arc<dyn Grammar>,
    pool: rayon::ThreadPool,
}

impl Engine {
    pub fn new(mut config: RunConfig) -> Result<Self, PipelineError> {
        if config.k == 0 || config.cluster_size == 0 {
            return Err(PipelineError::Config("k and cluster_size must be at least 1".into()));
        }
        config.gateway.seed = config.seed;
        let registry = TokenizerRegistry::with_ref_model(config.tokenizer_file.as_deref())?;
        let tokenizer = registry.get(&TokenizerId::ref_model())?;
        let gateway = Gateway::new(config.gateway.clone(), tokenizer)?;
        let harness = Harness::new(config.harness.clone());
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs)
            .build()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        Ok(Self {
            config,
            gateway,
            harness,
            grammar: default_grammar(),
            pool,
        })
    }

    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        self.pool.install(f)
    }
}
