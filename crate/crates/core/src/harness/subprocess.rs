//! Runs an external suite through the shim.
//!
//! Workspace layout handed to the shim:
//!
//! ```text
//! codebank.py      library module (possibly empty)
//! program.py       the original or rewritten unit
//! tests/           copy of the suite directory (or single file)
//! ```
//!
//! The shim is invoked as `<command...> <workspace> --timeout <seconds>`
//! with the workspace as working directory and must write
//! `<workspace>/outcome.json`:
//!
//! ```json
//! {"passed": ["..."], "failed": ["..."], "errored": [{"id": "...", "kind": "timeout"}]}
//! ```

use std::collections::BTreeSet;
use std::fs;
use std::io::Read;
use std::os::unix::process::CommandExt;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{HarnessError, RunnerBackend};
use crate::code::LIBRARY_MODULE;
use crate::model::{ErrorKind, TestOutcome};

pub const PROGRAM_FILE: &str = "program.py";
pub const OUTCOME_FILE: &str = "outcome.json";

/// The `outcome.json` document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeFile {
    pub passed: Vec<String>,
    pub failed: Vec<String>,
    pub errored: Vec<ErroredTest>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErroredTest {
    pub id: String,
    pub kind: ErrorKind,
}

impl OutcomeFile {
    pub fn parse(text: &str) -> Result<Self, String> {
        let file: OutcomeFile = serde_json::from_str(text).map_err(|e| e.to_string())?;
        let mut seen = BTreeSet::new();
        let ids = file
            .passed
            .iter()
            .chain(&file.failed)
            .chain(file.errored.iter().map(|e| &e.id));
        for id in ids {
            if id.is_empty() {
                return Err("empty test id".into());
            }
            if !seen.insert(id) {
                return Err(format!("test '{id}' reported twice"));
            }
        }
        Ok(file)
    }

    pub fn into_outcome(self, unit_id: &str) -> TestOutcome {
        let mut o = TestOutcome::empty(unit_id);
        o.passed.extend(self.passed);
        o.failed.extend(self.failed);
        o.errored.extend(self.errored.into_iter().map(|e| (e.id, e.kind)));
        o
    }
}

fn copy_tree(from: &Path, to: &Path) -> std::io::Result<()> {
    if from.is_file() {
        fs::create_dir_all(to)?;
        let name = from.file_name().ok_or_else(|| std::io::Error::other("suite file without a name"))?;
        fs::copy(from, to.join(name))?;
        return Ok(());
    }
    fs::create_dir_all(to)?;
    for entry in fs::read_dir(from)? {
        let entry = entry?;
        let target = to.join(entry.file_name());
        if entry.file_type()?.is_dir() {
            copy_tree(&entry.path(), &target)?;
        } else {
            fs::copy(entry.path(), target)?;
        }
    }
    Ok(())
}

pub(super) fn materialize(root: &Path, code: &str, library: &str, suite: &Path) -> Result<tempfile::TempDir, HarnessError> {
    let workspace_error = |e: std::io::Error| HarnessError::Workspace(e.to_string());
    fs::create_dir_all(root).map_err(workspace_error)?;
    let ws = tempfile::Builder::new().prefix("ws-").tempdir_in(root).map_err(workspace_error)?;
    fs::write(ws.path().join(format!("{LIBRARY_MODULE}.py")), library).map_err(workspace_error)?;
    fs::write(ws.path().join(PROGRAM_FILE), code).map_err(workspace_error)?;
    copy_tree(suite, &ws.path().join("tests"))
        .map_err(|e| HarnessError::Workspace(format!("copying suite {}: {e}", suite.display())))?;
    Ok(ws)
}

fn limit(resource: libc::__rlimit_resource_t, value: u64) -> std::io::Result<()> {
    let rl = libc::rlimit {
        rlim_cur: value as libc::rlim_t,
        rlim_max: value as libc::rlim_t,
    };
    // SAFETY: plain syscall on a stack value; async-signal-safe.
    if unsafe { libc::setrlimit(resource, &rl) } != 0 {
        return Err(std::io::Error::last_os_error());
    }
    Ok(())
}

fn kill_group(pid: u32) {
    // SAFETY: signals the process group created for the child.
    unsafe {
        libc::kill(-(pid as libc::pid_t), libc::SIGKILL);
    }
}

/// Runs the shim in a fresh workspace. When the shim outlives its wall
/// budget its process group is killed and every expected test is reported
/// as timed out.
pub(super) fn run(
    backend: &RunnerBackend,
    unit_id: &str,
    code: &str,
    library: &str,
    suite: &Path,
    expected: &[String],
) -> Result<TestOutcome, HarnessError> {
    let (program, args) = backend
        .shim
        .split_first()
        .ok_or_else(|| HarnessError::Workspace("no shim command configured".into()))?;
    let root: PathBuf = backend.work_root.clone().unwrap_or_else(std::env::temp_dir);
    let ws = materialize(&root, code, library, suite)?;
    let mut cmd = Command::new(program);
    cmd.args(args)
        .arg(ws.path())
        .arg("--timeout")
        .arg(format!("{}", backend.timeout_secs))
        .current_dir(ws.path())
        .env_clear()
        .env("PATH", std::env::var_os("PATH").unwrap_or_default())
        .env("HOME", ws.path())
        .env("LANG", "C.UTF-8")
        .env("PYTHONDONTWRITEBYTECODE", "1")
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(Stdio::piped());
    let cpu = backend.cpu_secs;
    let memory = backend.memory_bytes;
    // SAFETY: the closure only issues async-signal-safe syscalls.
    unsafe {
        cmd.pre_exec(move || {
            if libc::setpgid(0, 0) != 0 {
                return Err(std::io::Error::last_os_error());
            }
            if let Some(s) = cpu {
                limit(libc::RLIMIT_CPU, s)?;
            }
            if let Some(b) = memory {
                limit(libc::RLIMIT_AS, b)?;
            }
            Ok(())
        });
    }
    let mut child = cmd
        .spawn()
        .map_err(|e| HarnessError::Workspace(format!("spawning shim {program}: {e}")))?;
    let budget = Duration::from_secs_f64(backend.timeout_secs * expected.len().max(1) as f64 + backend.grace_secs);
    let started = Instant::now();
    let status = loop {
        match child.try_wait() {
            Ok(Some(status)) => break Some(status),
            Ok(None) if started.elapsed() >= budget => {
                kill_group(child.id());
                let _ = child.wait();
                break None;
            }
            Ok(None) => std::thread::sleep(Duration::from_millis(10)),
            Err(e) => return Err(HarnessError::Workspace(format!("waiting for shim: {e}"))),
        }
    };
    // Reap anything the shim left running in its group.
    kill_group(child.id());
    let mut stderr = String::new();
    if let Some(mut pipe) = child.stderr.take() {
        let _ = pipe.read_to_string(&mut stderr);
    }
    let Some(status) = status else {
        if expected.is_empty() {
            return Err(HarnessError::BackendProtocol(format!(
                "shim exceeded {budget:?} and the suite lists no test ids"
            )));
        }
        let mut o = TestOutcome::empty(unit_id);
        o.errored.extend(expected.iter().map(|id| (id.clone(), ErrorKind::Timeout)));
        return Ok(o);
    };
    if !status.success() {
        return Err(HarnessError::BackendProtocol(format!(
            "shim exited with {status}: {}",
            stderr.trim()
        )));
    }
    let text = fs::read_to_string(ws.path().join(OUTCOME_FILE))
        .map_err(|e| HarnessError::BackendProtocol(format!("reading {OUTCOME_FILE}: {e}")))?;
    let file = OutcomeFile::parse(&text).map_err(HarnessError::BackendProtocol)?;
    Ok(file.into_outcome(unit_id))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn outcome_file_round_trip_and_rejections() {
        let text = r#"{"passed":["t.py::a"],"failed":["t.py::b"],"errored":[{"id":"t.py::c","kind":"timeout"}]}"#;
        let f = OutcomeFile::parse(text).unwrap();
        assert_eq!(serde_json::to_string(&f).unwrap(), text);
        let o = f.into_outcome("u");
        assert_eq!(o.errored.get("t.py::c"), Some(&ErrorKind::Timeout));
        assert!(OutcomeFile::parse(r#"{"passed":["a"],"failed":["a"],"errored":[]}"#).is_err());
        assert!(OutcomeFile::parse(r#"{"passed":[],"failed":[],"errored":[],"extra":1}"#).is_err());
        assert!(OutcomeFile::parse(r#"{"passed":[],"failed":[]}"#).is_err());
        assert!(OutcomeFile::parse(r#"{"passed":[],"failed":[],"errored":[{"id":"x","kind":"hang"}]}"#).is_err());
    }
}
