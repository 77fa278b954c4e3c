//! Prompt construction and the section markers shared by prompts and
//! model completions.

use crate::model::{normalize_source, SourceUnit};

use super::library::LibraryEntry;

pub const HELPERS_MARKER: &str = "# ==== NEW HELPER FUNCTIONS ====";
pub const RETRIEVED_MARKER: &str = "# ==== RETRIEVED HELPER FUNCTIONS ====";
pub const INPUT_BEGIN: &str = "# ==== INPUT PROGRAMS ====";
pub const INPUT_END: &str = "# ==== END OF INPUT ====";
pub const CODE_MARKER: &str = "# ==== CODE ====";

const PROGRAM_OPEN: &str = "# ########## PROGRAM: ";
const PROGRAM_CLOSE: &str = " ##########";

const SUMMARY_INSTRUCTION: &str = "Summarize what the program below does in two or three sentences.";

pub fn program_marker(id: &str) -> String {
    format!("{PROGRAM_OPEN}{id}{PROGRAM_CLOSE}")
}

/// The unit id of a program marker line.
pub fn parse_program_marker(line: &str) -> Option<&str> {
    line.trim_end()
        .strip_prefix(PROGRAM_OPEN)?
        .strip_suffix(PROGRAM_CLOSE)
        .map(str::trim)
        .filter(|id| !id.is_empty())
}

/// Section bodies end with exactly one newline.
pub fn normalize_section(text: &str) -> String {
    normalize_source(text)
}

pub fn build_prompt(units: &[&SourceUnit], retrieved: &[&LibraryEntry]) -> String {
    let mut p = String::new();
    p.push_str(
        "You are refactoring a group of related Python programs. Move code that the programs \
         share, or that would be reusable in other programs, into a library module named \
         `codebank`, and rewrite every program to import it with `from codebank import *`. \
         Each rewritten program must still pass all of its tests. Prefer general helpers over \
         helpers that only make sense for one of these programs.\n\n",
    );
    if !retrieved.is_empty() {
        p.push_str(
            "The library already defines the helpers below. Call them where they fit. Do not \
             redefine them or define new helpers with the same names.\n\n",
        );
        p.push_str(RETRIEVED_MARKER);
        p.push('\n');
        for entry in retrieved {
            p.push_str(&normalize_section(&entry.source));
            p.push('\n');
        }
    }
    let described: Vec<_> = units.iter().filter_map(|u| u.description.as_deref().map(|d| (&u.id, d))).collect();
    if !described.is_empty() {
        p.push_str("Program descriptions:\n");
        for (id, d) in described {
            p.push_str(&format!("- {id}: {}\n", d.trim()));
        }
        p.push('\n');
    }
    p.push_str(INPUT_BEGIN);
    p.push('\n');
    for u in units {
        p.push_str(&program_marker(&u.id));
        p.push('\n');
        p.push_str(&normalize_section(&u.code));
        p.push('\n');
    }
    p.push_str(INPUT_END);
    p.push_str("\n\n");
    p.push_str(
        "Reply with the new helper definitions first, then every rewritten program in full, \
         using exactly these section markers and nothing else around them. The helper section \
         may be empty.\n\n",
    );
    p.push_str(HELPERS_MARKER);
    p.push_str("\n<new helper definitions>\n\n");
    for u in units {
        p.push_str(&program_marker(&u.id));
        p.push_str("\n<rewritten program>\n\n");
    }
    p
}

/// The programs embedded between the input markers of a prompt.
pub fn input_programs(prompt: &str) -> Vec<(String, String)> {
    let mut out = Vec::new();
    let mut inside = false;
    let mut current: Option<(String, String)> = None;
    for line in prompt.split_inclusive('\n') {
        let bare = line.trim_end_matches(['\n', '\r']);
        if !inside {
            inside = bare == INPUT_BEGIN;
            continue;
        }
        if bare == INPUT_END {
            break;
        }
        if let Some(id) = parse_program_marker(bare) {
            if let Some((id, code)) = current.take() {
                out.push((id, normalize_section(&code)));
            }
            current = Some((id.to_string(), String::new()));
        } else if let Some((_, code)) = current.as_mut() {
            code.push_str(line);
        }
    }
    if let Some((id, code)) = current {
        out.push((id, normalize_section(&code)));
    }
    out
}

pub fn summary_prompt(unit: &SourceUnit) -> String {
    format!(
        "{SUMMARY_INSTRUCTION} Focus on the reusable components it is built from, such as \
         algorithms, data structures, and input or output handling, rather than on details \
         specific to this one problem.\n\n{CODE_MARKER}\n{}",
        normalize_section(&unit.code)
    )
}

/// The code of a summary prompt, or `None` for any other prompt.
pub fn summary_code(prompt: &str) -> Option<&str> {
    if !prompt.starts_with(SUMMARY_INSTRUCTION) {
        return None;
    }
    let at = prompt.find(&format!("\n{CODE_MARKER}\n"))?;
    Some(&prompt[at + CODE_MARKER.len() + 2..])
}
