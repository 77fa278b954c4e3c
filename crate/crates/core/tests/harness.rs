mod common;

use std::os::unix::fs::PermissionsExt;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use libsmith::harness::{BackendKind, Harness, HarnessError, OutcomeFile, RunnerBackend, OUTCOME_SCHEMA};
use libsmith::model::{ErrorKind, Loss, MetricId, SuiteDescriptor};
use libsmith::pipeline::{original_outcomes, refactor_cluster, Engine, LibraryState};
use libsmith::scoring::Selection;

const KNOWN_OUTCOME: &str = r#"{"passed": ["tests/test_a.py::one", "tests/test_a.py::two", "tests/test_a.py::three"],
 "failed": ["tests/test_a.py::four"],
 "errored": [{"id": "tests/test_a.py::five", "kind": "timeout"}]}"#;

fn script(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, format!("#!/bin/sh\n{body}\n")).unwrap();
    std::fs::set_permissions(&path, std::fs::Permissions::from_mode(0o755)).unwrap();
    path
}

fn suite(dir: &Path, tests: &[&str]) -> SuiteDescriptor {
    let path = dir.join("suite");
    std::fs::create_dir_all(&path).unwrap();
    std::fs::write(path.join("test_a.py"), "def test_one():\n    assert True\n").unwrap();
    SuiteDescriptor::External {
        path,
        tests: tests.iter().map(|s| s.to_string()).collect(),
    }
}

fn backend(dir: &Path, shim: &Path, timeout: f64) -> RunnerBackend {
    RunnerBackend {
        kind: BackendKind::Subprocess,
        timeout_secs: timeout,
        grace_secs: 0.5,
        shim: vec![shim.display().to_string()],
        work_root: Some(dir.join("work")),
        ..RunnerBackend::default()
    }
}

#[test]
fn known_outcome_validates_against_the_schema() {
    let schema: serde_json::Value = serde_json::from_str(OUTCOME_SCHEMA).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let doc: serde_json::Value = serde_json::from_str(KNOWN_OUTCOME).unwrap();
    assert!(validator.is_valid(&doc));
    let parsed = OutcomeFile::parse(KNOWN_OUTCOME).unwrap();
    assert_eq!(serde_json::to_value(&parsed).unwrap(), doc);

    // The schema and the parser reject the same malformed documents.
    for bad in [
        r#"{"passed": [], "failed": []}"#,
        r#"{"passed": [""], "failed": [], "errored": []}"#,
        r#"{"passed": [], "failed": [], "errored": [{"id": "x", "kind": "hang"}]}"#,
        r#"{"passed": [], "failed": [], "errored": [], "skipped": []}"#,
        r#"{"passed": ["a", "a"], "failed": [], "errored": []}"#,
    ] {
        let doc: serde_json::Value = serde_json::from_str(bad).unwrap();
        assert!(!validator.is_valid(&doc), "{bad}");
        assert!(OutcomeFile::parse(bad).is_err(), "{bad}");
    }
}

#[test]
fn shim_sees_the_workspace_and_its_outcome_is_read() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("args.txt");
    let shim = script(
        dir.path(),
        "shim",
        &format!(
            "echo \"$@\" > {log}\npwd >> {log}\n\
             test -f \"$1/codebank.py\" && test -f \"$1/program.py\" && test -f \"$1/tests/test_a.py\" || exit 9\n\
             grep -q 'def helper' \"$1/codebank.py\" || exit 8\n\
             cat > \"$1/outcome.json\" <<'EOF'\n{KNOWN_OUTCOME}\nEOF",
            log = log.display()
        ),
    );
    let harness = Harness::new(backend(dir.path(), &shim, 2.5));
    let o = harness
        .run_suite("u.py", "print(helper())\n", "def helper():\n    return 1\n", &suite(dir.path(), &[]))
        .unwrap();
    assert_eq!(o.unit_id, "u.py");
    assert_eq!(o.passed.len(), 3);
    assert_eq!(o.failed.len(), 1);
    assert_eq!(o.errored.get("tests/test_a.py::five"), Some(&ErrorKind::Timeout));

    let args = std::fs::read_to_string(&log).unwrap();
    let mut lines = args.lines();
    let argv: Vec<&str> = lines.next().unwrap().split(' ').collect();
    assert_eq!(&argv[1..], ["--timeout", "2.5"]);
    assert_eq!(lines.next().unwrap(), argv[0], "shim runs inside its workspace");
    assert!(Path::new(argv[0]).starts_with(dir.path().join("work")));
    // The workspace is discarded afterwards.
    assert!(!Path::new(argv[0]).exists());
    assert_eq!(std::fs::read_dir(dir.path().join("work")).unwrap().count(), 0);
}

#[test]
fn hanging_shim_times_out_every_expected_test() {
    let dir = tempfile::tempdir().unwrap();
    let pidfile = dir.path().join("pid");
    let shim = script(dir.path(), "shim", &format!("sleep 300 &\necho $! > {}\nwait", pidfile.display()));
    let harness = Harness::new(backend(dir.path(), &shim, 1.0));
    let started = Instant::now();
    let o = harness
        .run_suite("u.py", "while True:\n    pass\n", "", &suite(dir.path(), &["t::loop"]))
        .unwrap();
    let elapsed = started.elapsed();
    assert!(elapsed >= Duration::from_secs(1) && elapsed < Duration::from_secs(5), "{elapsed:?}");
    assert_eq!(o.errored.get("t::loop"), Some(&ErrorKind::Timeout));
    assert!(o.passed.is_empty());

    // The background child was killed with the shim's process group.
    let pid = std::fs::read_to_string(&pidfile).unwrap().trim().to_string();
    std::thread::sleep(Duration::from_millis(100));
    let stat = std::fs::read_to_string(format!("/proc/{pid}/stat")).unwrap_or_default();
    assert!(stat.is_empty() || stat.contains(") Z "), "{stat}");
}

#[test]
fn shim_failures_are_protocol_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("exits", "echo boom >&2\nexit 3"),
        ("silent", "exit 0"),
        ("garbled", "echo '{\"passed\": 1}' > \"$1/outcome.json\""),
    ];
    for (name, body) in cases {
        let shim = script(dir.path(), name, body);
        let harness = Harness::new(backend(dir.path(), &shim, 1.0));
        let r = harness.run_suite("u.py", "", "", &suite(dir.path(), &[]));
        assert!(matches!(r, Err(HarnessError::BackendProtocol(_))), "{name}: {r:?}");
    }
    let harness = Harness::new(backend(dir.path(), &dir.path().join("missing"), 1.0));
    let r = harness.run_suite("u.py", "", "", &suite(dir.path(), &[]));
    assert!(matches!(r, Err(HarnessError::Workspace(_))), "{r:?}");
}

#[test]
fn subprocess_backend_gates_like_the_mock_backend() {
    let dir = tempfile::tempdir().unwrap();
    let shim = script(
        dir.path(),
        "shim",
        "cd \"$1\"\n\
         if grep -q 'print(' program.py; then p=prints; f=''; else p=''; f=prints; fi\n\
         if cat codebank.py program.py | grep -q BROKEN; then f=\"$f intact\"; else p=\"$p intact\"; fi\n\
         list() { out=''; for t in $1; do out=\"$out${out:+,}\\\"t::$t\\\"\"; done; echo \"[$out]\"; }\n\
         echo \"{\\\"passed\\\": $(list \"$p\"), \\\"failed\\\": $(list \"$f\"), \\\"errored\\\": []}\" > outcome.json",
    );
    let mut task = common::load_task("cc_losses");
    let external = suite(dir.path(), &["t::prints", "t::intact"]);
    for s in task.test_registry.values_mut() {
        *s = external.clone();
    }
    let mut cfg = common::stub_config("cc_losses", "fixture", 4);
    cfg.metric = MetricId::Cc;
    cfg.harness = backend(dir.path(), &shim, 2.0);
    let engine = Engine::new(cfg).unwrap();
    let original = original_outcomes(&engine, &task).unwrap();
    assert!(original.values().all(|o| o.passed.len() == 2), "{original:?}");
    let units: Vec<_> = task.units.iter().collect();
    let c = refactor_cluster(&engine, &task, 0, &units, &LibraryState::new(), &original).unwrap();
    let losses: Vec<Loss> = c.samples.iter().map(|s| s.loss()).collect();
    assert_eq!(losses, vec![Loss::Infeasible, Loss::Finite(9.0), Loss::Finite(4.0), Loss::Finite(7.0)]);
    assert_eq!(c.selection, Selection::Chosen(2));
}
