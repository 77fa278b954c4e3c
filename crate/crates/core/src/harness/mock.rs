use crate::model::{ErrorKind, MockTest, MockVerdict, TestOutcome};

/// Evaluates manifest rules against the library and program text.
pub fn run_mock(unit_id: &str, code: &str, library: &str, tests: &[MockTest]) -> TestOutcome {
    let mut outcome = TestOutcome::empty(unit_id);
    for test in tests {
        let found = |s: &String| code.contains(s.as_str()) || library.contains(s.as_str());
        let ok = test.require.iter().all(found) && !test.forbid.iter().any(found);
        let verdict = if ok { test.outcome } else { test.on_violation };
        let id = test.id.clone();
        match verdict {
            MockVerdict::Pass => {
                outcome.passed.insert(id);
            }
            MockVerdict::Fail => {
                outcome.failed.insert(id);
            }
            MockVerdict::Crash => {
                outcome.errored.insert(id, ErrorKind::Crash);
            }
            MockVerdict::Timeout => {
                outcome.errored.insert(id, ErrorKind::Timeout);
            }
        }
    }
    outcome
}
