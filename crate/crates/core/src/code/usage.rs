use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Grammar, ParseError};

/// Module name under which rewritten programs import the library.
pub const LIBRARY_MODULE: &str = "codebank";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UsageStats {
    pub num_definitions: usize,
    pub calls_per_definition: BTreeMap<String, u64>,
    pub avg_calls: f64,
    pub single_use_fraction: f64,
    pub unused_count: usize,
}

/// Counts direct invocations (`f(..)`, `codebank.f(..)`) and instantiations
/// of the library's top-level functions and classes inside the rewritten
/// programs. Calls made from within the library itself are not counted.
pub fn usage_stats<S: AsRef<str>>(
    grammar: &dyn Grammar,
    library: &str,
    rewritten: &[S],
) -> Result<UsageStats, ParseError> {
    let lib = grammar.analyze(library)?;
    let mut calls: BTreeMap<String, u64> =
        lib.definitions.iter().map(|d| (d.name.clone(), 0)).collect();
    for source in rewritten {
        let summary = grammar.analyze(source.as_ref())?;
        for (callee, n) in &summary.call_sites {
            let name = callee
                .strip_prefix(LIBRARY_MODULE)
                .and_then(|rest| rest.strip_prefix('.'))
                .unwrap_or(callee);
            if let Some(count) = calls.get_mut(name) {
                *count += u64::from(*n);
            }
        }
    }
    let num = calls.len();
    let total: u64 = calls.values().sum();
    let single = calls.values().filter(|&&c| c == 1).count();
    let unused = calls.values().filter(|&&c| c == 0).count();
    let (avg_calls, single_use_fraction) = if num == 0 {
        (0.0, 0.0)
    } else {
        (total as f64 / num as f64, single as f64 / num as f64)
    };
    Ok(UsageStats {
        num_definitions: num,
        calls_per_definition: calls,
        avg_calls,
        single_use_fraction,
        unused_count: unused,
    })
}
