//! Runs a manifest test suite against an original program and a
//! rewrite, then applies the pass gate.
//!
//! cargo run --example harness

use libsmith::harness::{pass_gate, Harness};
use libsmith::model::SuiteDescriptor;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let suite: SuiteDescriptor = serde_json::from_str(
        r#"{"kind": "mock", "tests": [
            {"id": "prints", "require": ["print("]},
            {"id": "no_eval", "forbid": ["eval("], "on_violation": "crash"},
            {"id": "known_bug", "outcome": "fail"}
        ]}"#,
    )?;
    let harness = Harness::mock();
    let original = harness.run_suite("p.py", "print(sum([1, 2]))\n", "", &suite)?;

    for (name, code, library) in [
        ("reuses helper", "from codebank import *\nprint(total([1, 2]))\n", "def total(xs):\n    return sum(xs)\n"),
        ("uses eval", "print(eval('1 + 2'))\n", ""),
    ] {
        let rewritten = harness.run_suite("p.py", code, library, &suite)?;
        println!(
            "{name}: passed={:?} failed={:?} errored={:?} gate={}",
            rewritten.passed,
            rewritten.failed,
            rewritten.errored,
            pass_gate(&original, &rewritten)?
        );
    }

    Ok(())
}
