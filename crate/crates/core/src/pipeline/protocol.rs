//! Parsing model completions back into candidates.
//!
//! A completion holds a helper section introduced by the helpers marker,
//! followed by one section per unit introduced by its program marker.
//! Text before the helpers marker is ignored. Nothing is repaired: a
//! missing, duplicated or unknown section rejects the whole completion.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::code::{Grammar, ParseError};
use crate::model::{Candidate, Provenance};

use super::prompt::{normalize_section, parse_program_marker, HELPERS_MARKER};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CandidateError {
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("{section}: {error}")]
    Parse { section: String, error: ParseError },
}

/// Splits a completion into its helper text and rewritten programs, checking
/// that every section parses.
pub fn parse_sections(
    grammar: &dyn Grammar,
    completion: &str,
    units: &[&str],
) -> Result<(String, BTreeMap<String, String>), CandidateError> {
    let expected: BTreeSet<&str> = units.iter().copied().collect();
    let mut lines = completion.split_inclusive('\n');
    if !lines.by_ref().any(|l| l.trim_end() == HELPERS_MARKER) {
        return Err(CandidateError::Protocol("missing helper section marker".into()));
    }
    let mut helpers = String::new();
    let mut programs: BTreeMap<String, String> = BTreeMap::new();
    let mut current: Option<String> = None;
    for line in lines {
        let bare = line.trim_end_matches(['\n', '\r']);
        if bare.trim_end() == HELPERS_MARKER {
            return Err(CandidateError::Protocol("repeated helper section marker".into()));
        }
        if let Some(id) = parse_program_marker(bare) {
            if !expected.contains(id) {
                return Err(CandidateError::Protocol(format!("unknown unit id '{id}'")));
            }
            if programs.contains_key(id) {
                return Err(CandidateError::Protocol(format!("repeated section for '{id}'")));
            }
            programs.insert(id.to_string(), String::new());
            current = Some(id.to_string());
            continue;
        }
        match &current {
            Some(id) => programs.get_mut(id).expect("section opened").push_str(line),
            None => helpers.push_str(line),
        }
    }
    let missing: Vec<&str> = expected.iter().copied().filter(|id| !programs.contains_key(*id)).collect();
    if !missing.is_empty() {
        return Err(CandidateError::Protocol(format!("missing program sections: {}", missing.join(", "))));
    }
    let helpers = normalize_section(&helpers);
    check_parses(grammar, "helpers", &helpers)?;
    for (id, code) in programs.iter_mut() {
        *code = normalize_section(code);
        if code.is_empty() {
            return Err(CandidateError::Protocol(format!("empty program section for '{id}'")));
        }
        check_parses(grammar, id, code)?;
    }
    Ok((helpers, programs))
}

fn check_parses(grammar: &dyn Grammar, section: &str, code: &str) -> Result<(), CandidateError> {
    grammar.analyze(code).map(|_| ()).map_err(|error| CandidateError::Parse {
        section: section.to_string(),
        error,
    })
}

pub fn parse_candidate(
    grammar: &dyn Grammar,
    completion: &str,
    units: &[&str],
    provenance: Provenance,
) -> Result<Candidate, CandidateError> {
    let (library, rewritten) = parse_sections(grammar, completion, units)?;
    Candidate::new(library, rewritten, provenance).map_err(|e| CandidateError::Protocol(e.to_string()))
}
