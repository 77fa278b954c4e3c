//! Effective run configuration: defaults, then config files, then
//! environment variables, then command-line flags.

use std::path::{Path, PathBuf};

use clap::Args;
use toml::Value;

use crate::harness::BackendKind;
use crate::model::MetricId;
use crate::pipeline::{Mode, RunConfig};

pub const CONFIG_FILE: &str = "libsmith.toml";
pub const ENV_PREFIX: &str = "LIBSMITH_";

/// Flags shared by the subcommands that build a [`RunConfig`].
#[derive(Debug, Clone, Default, Args)]
pub struct RunFlags {
    /// Samples per cluster.
    #[arg(short = 'k', long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub cluster_size: Option<usize>,
    /// tokens, mdl, cc or mi.
    #[arg(long)]
    pub metric: Option<MetricId>,
    /// parallel or incremental.
    #[arg(long)]
    pub mode: Option<Mode>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to the number of logical cores.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub min_sloc: Option<usize>,
    #[arg(long)]
    pub retrieval_top_m: Option<usize>,
    /// Library module to start from.
    #[arg(long)]
    pub seed_library: Option<PathBuf>,
    /// tokenizer.json of the scoring model.
    #[arg(long)]
    pub tokenizer: Option<PathBuf>,
    /// Sampler endpoint URL or `stub:<profile>`.
    #[arg(long)]
    pub sampler: Option<String>,
    /// Scorer endpoint URL or `stub:<profile>`.
    #[arg(long)]
    pub scorer: Option<String>,
    /// Embedding endpoint URL or `stub:<profile>`.
    #[arg(long)]
    pub embedder: Option<String>,
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    /// mock or subprocess.
    #[arg(long, value_parser = parse_backend)]
    pub backend: Option<BackendKind>,
    /// Command that runs a test workspace, split on whitespace.
    #[arg(long)]
    pub shim: Option<String>,
}

fn parse_backend(s: &str) -> Result<BackendKind, String> {
    match s {
        "mock" => Ok(BackendKind::Mock),
        "subprocess" => Ok(BackendKind::Subprocess),
        _ => Err(format!("unknown backend '{s}' (expected mock or subprocess)")),
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    File { path: PathBuf, message: String },
    #[error("environment variable {name}: {message}")]
    Env { name: String, message: String },
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Table(b), Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(existing) => merge(existing, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

fn read_layer(path: &Path) -> Result<Value, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::File {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    text.parse::<Value>().map_err(|e| ConfigError::File {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Config files that apply: the explicit one (or `libsmith.toml` in the
/// working directory) and then `libsmith.toml` in the task directory.
pub fn config_layers(explicit: Option<&Path>, task_dir: Option<&Path>) -> Vec<PathBuf> {
    let mut layers = Vec::new();
    match explicit {
        Some(p) => layers.push(p.to_path_buf()),
        None if Path::new(CONFIG_FILE).is_file() => layers.push(PathBuf::from(CONFIG_FILE)),
        None => {}
    }
    if let Some(dir) = task_dir {
        let p = dir.join(CONFIG_FILE);
        if p.is_file() && !layers.contains(&p) {
            layers.push(p);
        }
    }
    layers
}

fn env_parse<T: std::str::FromStr>(env: &dyn Fn(&str) -> Option<String>, key: &str) -> Result<Option<T>, ConfigError>
where
    T::Err: std::fmt::Display,
{
    let name = format!("{ENV_PREFIX}{key}");
    match env(&name) {
        None => Ok(None),
        Some(v) => v.parse().map(Some).map_err(|e: T::Err| ConfigError::Env {
            name,
            message: e.to_string(),
        }),
    }
}

fn apply_env(cfg: &mut RunConfig, env: &dyn Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
    macro_rules! set {
        ($key:literal, $field:expr) => {
            if let Some(v) = env_parse(env, $key)? {
                $field = v;
            }
        };
        ($key:literal, some $field:expr) => {
            if let Some(v) = env_parse(env, $key)? {
                $field = Some(v);
            }
        };
    }
    set!("K", cfg.k);
    set!("CLUSTER_SIZE", cfg.cluster_size);
    set!("METRIC", cfg.metric);
    set!("MODE", cfg.mode);
    set!("SEED", cfg.seed);
    set!("JOBS", cfg.jobs);
    set!("SAMPLER_ENDPOINT", cfg.gateway.sampler_endpoint);
    set!("SCORER_ENDPOINT", cfg.gateway.scorer_endpoint);
    set!("EMBEDDER_ENDPOINT", cfg.gateway.embedder_endpoint);
    set!("SAMPLER_MODEL", cfg.gateway.sampler_model);
    set!("SCORER_MODEL", cfg.gateway.scorer_model);
    set!("EMBEDDER_MODEL", cfg.gateway.embedder_model);
    set!("CACHE_DIR", some cfg.gateway.cache_dir);
    set!("TOKENIZER", some cfg.tokenizer_file);
    set!("API_KEY", some cfg.gateway.api_key);
    Ok(())
}

fn apply_flags(cfg: &mut RunConfig, f: &RunFlags) {
    macro_rules! set {
        ($flag:expr, $field:expr) => {
            if let Some(v) = $flag.clone() {
                $field = v;
            }
        };
    }
    set!(f.k, cfg.k);
    set!(f.cluster_size, cfg.cluster_size);
    set!(f.metric, cfg.metric);
    set!(f.mode, cfg.mode);
    set!(f.seed, cfg.seed);
    set!(f.jobs, cfg.jobs);
    set!(f.min_sloc, cfg.min_sloc);
    set!(f.retrieval_top_m, cfg.retrieval_top_m);
    set!(f.sampler, cfg.gateway.sampler_endpoint);
    set!(f.scorer, cfg.gateway.scorer_endpoint);
    set!(f.embedder, cfg.gateway.embedder_endpoint);
    set!(f.backend, cfg.harness.kind);
    if f.seed_library.is_some() {
        cfg.seed_library = f.seed_library.clone();
    }
    if f.tokenizer.is_some() {
        cfg.tokenizer_file = f.tokenizer.clone();
    }
    if f.cache_dir.is_some() {
        cfg.gateway.cache_dir = f.cache_dir.clone();
    }
    if let Some(shim) = &f.shim {
        cfg.harness.shim = shim.split_whitespace().map(String::from).collect();
    }
}

/// Merges the layers in increasing precedence.
pub fn resolve(
    files: &[PathBuf],
    env: &dyn Fn(&str) -> Option<String>,
    flags: &RunFlags,
) -> Result<RunConfig, ConfigError> {
    let mut merged = Value::Table(Default::default());
    for path in files {
        merge(&mut merged, read_layer(path)?);
    }
    let mut cfg: RunConfig = merged.try_into().map_err(|e: toml::de::Error| ConfigError::File {
        path: files.last().cloned().unwrap_or_default(),
        message: e.to_string(),
    })?;
    apply_env(&mut cfg, env)?;
    apply_flags(&mut cfg, flags);
    Ok(cfg)
}
