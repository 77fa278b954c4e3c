//! Command-line front end. `run_cli` is the whole program; the binary only
//! sets up logging and forwards the process arguments.

pub mod config;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::cluster::{coherence_table, plan_clusters, prefilter, summarize_all};
use crate::code::default_grammar;
use crate::model::{validate_task, SourceUnit, Task};
use crate::pipeline::rundir::{missing_files, read_candidate_dir, read_manifest, read_run, write_json, write_run};
use crate::pipeline::{original_outcomes, run, Engine, PipelineError, RunConfig};
use crate::scoring::{gated_loss, ratio, Scorer, ScoringError};
use crate::stats::report::{build_report, coherence, scaling_csv, ReportError, COHERENCE_FILE, REPORT_FILE, SCALING_FILE};
use config::{config_layers, resolve, RunFlags};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INVALID_TASK: i32 = 2;
pub const EXIT_GATEWAY: i32 = 3;
pub const EXIT_PARSE: i32 = 4;
pub const EXIT_INCOMPLETE_RUN: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "libsmith", version, about = "Refactor related source files into a shared library")]
pub struct Cli {
    /// Config file; defaults to ./libsmith.toml when present.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Print the resolved plan and exit without side effects.
    #[arg(long, global = true)]
    pub dry_run: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AnalyzeTarget {
    All,
    Report,
    Scaling,
    Coherence,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Cluster, sample, rerank and write a run directory.
    Refactor {
        task: PathBuf,
        /// Run directory; defaults to runs/<task name>.
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Score a candidate directory (library/codebank.py, rewritten/<unit>).
    Score {
        candidate: PathBuf,
        task: PathBuf,
        /// Also print ratios against the original programs.
        #[arg(long)]
        baseline: bool,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Recompute report.json, scaling.csv and the coherence table of a run.
    Analyze {
        run: PathBuf,
        #[arg(value_enum, default_value = "all")]
        what: AnalyzeTarget,
    },
    /// Print the cluster plan of a task.
    Cluster {
        task: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Check a task manifest.
    Validate { task: PathBuf },
}

struct Io<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

impl Io<'_> {
    fn json<T: Serialize>(&mut self, value: &T) {
        let text = serde_json::to_string_pretty(value).expect("serializable");
        let _ = writeln!(self.out, "{text}");
    }

    fn fail(&mut self, code: i32, message: impl std::fmt::Display) -> i32 {
        let _ = writeln!(self.err, "error: {message}");
        code
    }
}

fn pipeline_code(e: &PipelineError) -> i32 {
    match e {
        PipelineError::InvalidTask(_) => EXIT_INVALID_TASK,
        PipelineError::Gateway(_) => EXIT_GATEWAY,
        PipelineError::Parse(_) => EXIT_PARSE,
        _ => EXIT_FAILURE,
    }
}

fn load_task(dir: &Path, io: &mut Io) -> Result<Task, i32> {
    let task = Task::load(dir).map_err(|e| io.fail(EXIT_INVALID_TASK, e))?;
    let problems = validate_task(&task);
    if !problems.is_empty() {
        for p in &problems {
            let _ = writeln!(io.err, "{p}");
        }
        return Err(io.fail(EXIT_INVALID_TASK, format!("{} problem(s) in {}", problems.len(), dir.display())));
    }
    Ok(task)
}

fn effective_config(cli_config: Option<&Path>, task: Option<&Path>, flags: &RunFlags, io: &mut Io) -> Result<RunConfig, i32> {
    let env = |k: &str| std::env::var(k).ok();
    resolve(&config_layers(cli_config, task), &env, flags).map_err(|e| io.fail(EXIT_FAILURE, e))
}

fn engine(cfg: RunConfig, io: &mut Io) -> Result<Engine, i32> {
    Engine::new(cfg).map_err(|e| io.fail(pipeline_code(&e), e))
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_FAILURE } else { EXIT_OK };
            let _ = if e.use_stderr() { write!(err, "{e}") } else { write!(out, "{e}") };
            return code;
        }
    };
    let mut io = Io { out, err };
    let result = match &cli.command {
        Command::Refactor { task, out, flags } => cmd_refactor(&cli, task, out.as_deref(), flags, &mut io),
        Command::Score {
            candidate,
            task,
            baseline,
            flags,
        } => cmd_score(&cli, candidate, task, *baseline, flags, &mut io),
        Command::Analyze { run, what } => cmd_analyze(&cli, run, *what, &mut io),
        Command::Cluster { task, out, flags } => cmd_cluster(&cli, task, out.as_deref(), flags, &mut io),
        Command::Validate { task } => cmd_validate(&cli, task, &mut io),
    };
    result.unwrap_or_else(|code| code)
}

fn cmd_refactor(cli: &Cli, task_dir: &Path, out: Option<&Path>, flags: &RunFlags, io: &mut Io) -> Result<i32, i32> {
    let task = load_task(task_dir, io)?;
    let cfg = effective_config(cli.config.as_deref(), Some(task_dir), flags, io)?;
    let out_dir = out.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("runs").join(&task.name));
    if cli.dry_run {
        io.json(&json!({
            "command": "refactor",
            "task": task.name,
            "units": task.units.iter().map(|u| &u.id).collect::<Vec<_>>(),
            "run_dir": out_dir,
            "config": cfg,
        }));
        return Ok(EXIT_OK);
    }
    let engine = engine(cfg.clone(), io)?;
    let output = run(&engine, &task).map_err(|e| io.fail(pipeline_code(&e), e))?;
    write_run(&out_dir, &cfg, &output).map_err(|e| io.fail(pipeline_code(&e), e))?;
    let report = crate::stats::report::write_report(engine.grammar.as_ref(), &out_dir, &output, cfg.metric)
        .map_err(|e| io.fail(report_code(&e), e))?;
    io.json(&json!({ "run_dir": out_dir, "table": report.table }));
    Ok(EXIT_OK)
}

fn cmd_score(cli: &Cli, candidate: &Path, task_dir: &Path, baseline: bool, flags: &RunFlags, io: &mut Io) -> Result<i32, i32> {
    let task = load_task(task_dir, io)?;
    let cfg = effective_config(cli.config.as_deref(), Some(task_dir), flags, io)?;
    if cli.dry_run {
        io.json(&json!({
            "command": "score",
            "candidate": candidate,
            "task": task.name,
            "metric": cfg.metric,
            "baseline": baseline,
            "config": cfg,
        }));
        return Ok(EXIT_OK);
    }
    let ids: Vec<String> = task.units.iter().map(|u| u.id.clone()).collect();
    let (library, programs) = read_candidate_dir(candidate, &ids).map_err(|e| io.fail(EXIT_PARSE, e))?;
    let grammar = default_grammar();
    for (name, text) in std::iter::once(("library", &library)).chain(programs.iter().map(|(k, v)| (k.as_str(), v))) {
        if let Err(e) = grammar.analyze(text) {
            return Err(io.fail(EXIT_PARSE, format!("{name}: {e}")));
        }
    }
    let metric = cfg.metric;
    let engine = engine(cfg, io)?;
    let original = original_outcomes(&engine, &task).map_err(|e| io.fail(pipeline_code(&e), e))?;
    let outcomes: BTreeMap<_, _> = programs
        .iter()
        .map(|(id, code)| {
            let unit = task.unit(id).expect("indexed from the task");
            let suite = task.suite(unit).expect("validated");
            engine.harness.run_suite(id, code, &library, suite).map(|o| (id.clone(), o))
        })
        .collect::<Result<_, _>>()
        .map_err(|e| io.fail(EXIT_FAILURE, e))?;
    let scorer = Scorer::new(&engine.gateway, engine.grammar.clone());
    let score_failure = |e: ScoringError| match e {
        ScoringError::Gateway(g) => (EXIT_GATEWAY, g.to_string()),
        ScoringError::Unscorable(m) => (EXIT_PARSE, m),
    };
    let metrics = scorer.metrics(&library, &programs).map_err(|e| {
        let (code, msg) = score_failure(e);
        io.fail(code, msg)
    })?;
    let loss = gated_loss(Some(&metrics), metric, &original, &outcomes, &ids);
    let mut report = json!({ "metric": metric, "scorecard": metrics.card(loss) });
    if baseline {
        let originals: BTreeMap<String, String> = task.units.iter().map(|u| (u.id.clone(), u.code.clone())).collect();
        let base = scorer.metrics("", &originals).map_err(|e| {
            let (code, msg) = score_failure(e);
            io.fail(code, msg)
        })?;
        let ratios: BTreeMap<String, f64> = crate::model::MetricId::ALL
            .iter()
            .map(|&m| (m.to_string(), ratio(metrics.get(m), base.get(m))))
            .collect();
        report["baseline"] = serde_json::to_value(base).expect("serializable");
        report["ratios"] = serde_json::to_value(ratios).expect("serializable");
    }
    io.json(&report);
    Ok(EXIT_OK)
}

fn report_code(e: &ReportError) -> i32 {
    match e {
        ReportError::IncompleteRun(_) => EXIT_INCOMPLETE_RUN,
        ReportError::Pipeline(p) => pipeline_code(p),
        ReportError::Parse(_) => EXIT_PARSE,
    }
}

fn cmd_analyze(cli: &Cli, dir: &Path, what: AnalyzeTarget, io: &mut Io) -> Result<i32, i32> {
    let missing = missing_files(dir);
    if !missing.is_empty() {
        let e = ReportError::IncompleteRun(missing);
        return Err(io.fail(report_code(&e), e));
    }
    let manifest = read_manifest(dir).map_err(|e| io.fail(EXIT_INCOMPLETE_RUN, e))?;
    let output = read_run(dir).map_err(|e| io.fail(EXIT_INCOMPLETE_RUN, e))?;
    let grammar = default_grammar();
    let report = build_report(grammar.as_ref(), &output, manifest.config.metric).map_err(|e| io.fail(report_code(&e), e))?;
    let rows = coherence(&output).map_err(|e| io.fail(report_code(&e), e))?;
    let wants = |t: AnalyzeTarget| what == AnalyzeTarget::All || what == t;
    let mut files = Vec::new();
    if wants(AnalyzeTarget::Report) {
        files.push(REPORT_FILE);
    }
    if wants(AnalyzeTarget::Scaling) {
        files.push(SCALING_FILE);
    }
    if wants(AnalyzeTarget::Coherence) {
        files.push(COHERENCE_FILE);
    }
    if cli.dry_run {
        io.json(&json!({ "command": "analyze", "run_dir": dir, "would_write": files }));
        return Ok(EXIT_OK);
    }
    let fail = |e: PipelineError| (pipeline_code(&e), e.to_string());
    let written: Result<(), (i32, String)> = (|| {
        if wants(AnalyzeTarget::Report) {
            write_json(&dir.join(REPORT_FILE), &report).map_err(fail)?;
        }
        if wants(AnalyzeTarget::Scaling) {
            std::fs::write(dir.join(SCALING_FILE), scaling_csv(&report.scaling)).map_err(|e| (EXIT_FAILURE, e.to_string()))?;
        }
        if wants(AnalyzeTarget::Coherence) {
            write_json(&dir.join(COHERENCE_FILE), &rows).map_err(fail)?;
        }
        Ok(())
    })();
    written.map_err(|(code, msg)| io.fail(code, msg))?;
    io.json(&json!({ "table": report.table, "coherence": rows, "written": files }));
    Ok(EXIT_OK)
}

fn cmd_cluster(cli: &Cli, task_dir: &Path, out: Option<&Path>, flags: &RunFlags, io: &mut Io) -> Result<i32, i32> {
    let task = load_task(task_dir, io)?;
    let cfg = effective_config(cli.config.as_deref(), Some(task_dir), flags, io)?;
    let grammar = default_grammar();
    let (kept, dropped) = prefilter(grammar.as_ref(), &task.units, cfg.min_sloc);
    if cli.dry_run {
        io.json(&json!({
            "command": "cluster",
            "task": task.name,
            "cluster_size": cfg.cluster_size,
            "clustered": kept.iter().map(|u| &u.id).collect::<Vec<_>>(),
            "filtered": dropped.iter().map(|u| &u.id).collect::<Vec<_>>(),
        }));
        return Ok(EXIT_OK);
    }
    let size = cfg.cluster_size;
    let engine = engine(cfg, io)?;
    let mut described: Vec<SourceUnit> = kept.into_iter().cloned().collect();
    engine
        .install(|| summarize_all(&mut described, &engine.gateway))
        .map_err(|e| io.fail(EXIT_GATEWAY, e))?;
    let refs: Vec<&SourceUnit> = described.iter().collect();
    let plan = if refs.is_empty() {
        None
    } else {
        Some(plan_clusters(&refs, &engine.gateway, size.min(refs.len())).map_err(|e| {
            let e = PipelineError::from(e);
            io.fail(pipeline_code(&e), e)
        })?)
    };
    let clusters = plan.as_ref().map(|p| p.clusters.clone()).unwrap_or_default();
    let rows = if task.tags.is_empty() {
        Vec::new()
    } else {
        coherence_table(&task, &clusters).map_err(|e| io.fail(EXIT_FAILURE, e))?
    };
    let value = json!({
        "plan": plan,
        "filtered": dropped.iter().map(|u| &u.id).collect::<Vec<_>>(),
        "coherence": rows,
    });
    if let Some(path) = out {
        write_json(path, &value).map_err(|e| io.fail(pipeline_code(&e), e))?;
    }
    io.json(&value);
    Ok(EXIT_OK)
}

fn cmd_validate(cli: &Cli, task_dir: &Path, io: &mut Io) -> Result<i32, i32> {
    let task = load_task(task_dir, io)?;
    if cli.dry_run {
        io.json(&json!({ "command": "validate", "task": task_dir }));
        return Ok(EXIT_OK);
    }
    io.json(&json!({ "task": task.name, "units": task.units.len(), "suites": task.test_registry.len(), "valid": true }));
    Ok(EXIT_OK)
}
