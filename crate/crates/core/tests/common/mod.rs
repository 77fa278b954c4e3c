#![allow(dead_code)]

pub mod cfg;

use std::path::PathBuf;

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel)
}

pub fn read_fixture(rel: &str) -> String {
    std::fs::read_to_string(fixture(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

pub fn stub_config(task: &str, sampler: &str, k: usize) -> libsmith::pipeline::RunConfig {
    let mut cfg = libsmith::pipeline::RunConfig::default();
    cfg.k = k;
    cfg.seed = 7;
    cfg.jobs = 2;
    cfg.gateway.sampler_endpoint = match sampler {
        "fixture" => format!("stub:fixture:{}", fixture(&format!("tasks/{task}/planted")).display()),
        other => format!("stub:{other}"),
    };
    cfg.gateway.scorer_endpoint = "stub:vocab-aware".into();
    cfg.gateway.embedder_endpoint = "stub:hash".into();
    cfg
}

pub fn load_task(task: &str) -> libsmith::model::Task {
    libsmith::model::Task::load(&fixture(&format!("tasks/{task}"))).unwrap()
}

/// Every file under `root` keyed by its relative path.
pub fn dir_snapshot(root: &std::path::Path) -> std::collections::BTreeMap<String, Vec<u8>> {
    fn walk(root: &std::path::Path, dir: &std::path::Path, out: &mut std::collections::BTreeMap<String, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    let mut out = std::collections::BTreeMap::new();
    walk(root, root, &mut out);
    out
}
