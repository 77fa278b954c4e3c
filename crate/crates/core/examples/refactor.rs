//! Refactors the six-program fixture task with planted completions and
//! prints what each cluster selected plus the headline table.
//!
//! cargo run --example refactor

use std::path::PathBuf;

use libsmith::model::{MetricId, Task};
use libsmith::pipeline::{run, Engine, RunConfig};
use libsmith::stats::report::build_report;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/tasks/six_unit");
    let task = Task::load(&fixtures)?;

    let mut config = RunConfig::default();
    config.k = 4;
    config.seed = 7;
    config.gateway.sampler_endpoint = format!("stub:fixture:{}", fixtures.join("planted").display());
    config.gateway.scorer_endpoint = "stub:vocab-aware".into();
    config.gateway.embedder_endpoint = "stub:hash".into();
    let engine = Engine::new(config)?;

    let out = run(&engine, &task)?;
    for c in &out.clusters {
        println!("cluster {} {:?}: {:?}", c.index, c.units, c.selection);
        for s in &c.samples {
            println!("  sample {}: {:?}", s.index, s.loss());
        }
    }
    println!("\nlibrary:\n{}", out.library.text());

    let report = build_report(engine.grammar.as_ref(), &out, MetricId::Mdl)?;
    println!("{}", serde_json::to_string_pretty(&report.table)?);
    Ok(())
}
