//! Static analysis of subject-language sources: parsing, cyclomatic
//! complexity, Halstead volume, maintainability index, token counts and
//! library usage statistics.

mod halstead;
mod python;
mod tokenize;
mod usage;

use std::collections::BTreeMap;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use halstead::{HalsteadClass, HalsteadTable, HalsteadTableError};
pub use python::PythonGrammar;
pub use tokenize::{
    BpeTokenizer, FallbackTokenizer, Tokenizer, TokenizerError, TokenizerId,
    TokenizerRegistry,
};
pub use usage::{usage_stats, UsageStats, LIBRARY_MODULE};

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("syntax error at line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineSpan {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionSummary {
    /// Dotted qualified name, e.g. `Graph.add_edge` or `outer.inner`.
    pub name: String,
    pub span: LineSpan,
    pub decision_points: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefinitionKind {
    Function,
    Class,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Definition {
    pub name: String,
    pub kind: DefinitionKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct HalsteadCounts {
    pub total: u64,
    pub distinct: u64,
}

/// Everything the metrics need from one source file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AstSummary {
    pub functions: Vec<FunctionSummary>,
    /// Whether executable statements exist outside function bodies.
    pub has_module_code: bool,
    /// Decision points in module-level and class-body code.
    pub module_decision_points: u32,
    /// Callee names with multiplicity: `f` for `f(..)`, `obj.m` for
    /// `obj.m(..)` when `obj` is a plain name, `.m` otherwise.
    pub call_sites: BTreeMap<String, u32>,
    pub definitions: Vec<Definition>,
    pub operators: HalsteadCounts,
    pub operands: HalsteadCounts,
    pub sloc: usize,
    pub physical_lines: usize,
}

impl AstSummary {
    /// Sum over functions of `1 + decisions`, plus the module component
    /// when module-level code exists.
    pub fn cyclomatic_complexity(&self) -> u64 {
        let functions: u64 = self
            .functions
            .iter()
            .map(|f| 1 + u64::from(f.decision_points))
            .sum();
        let module = if self.has_module_code || self.module_decision_points > 0 {
            1 + u64::from(self.module_decision_points)
        } else {
            0
        };
        functions + module
    }

    /// `N · log2(η)` over operator and operand counts.
    pub fn halstead_volume(&self) -> f64 {
        let length = self.operators.total + self.operands.total;
        let vocabulary = self.operators.distinct + self.operands.distinct;
        if length == 0 || vocabulary == 0 {
            return 0.0;
        }
        length as f64 * (vocabulary as f64).log2()
    }

    pub fn maintainability_index(&self) -> f64 {
        maintainability_from_parts(
            self.halstead_volume(),
            self.cyclomatic_complexity(),
            self.sloc,
        )
    }
}

/// `max(0, 100 · (171 − 5.2 ln V − 0.23 CC − 16.2 ln SLOC) / 171)` with both
/// logarithm arguments clamped to at least 1.
pub fn maintainability_from_parts(volume: f64, cc: u64, sloc: usize) -> f64 {
    let raw = 171.0 - 5.2 * volume.max(1.0).ln() - 0.23 * cc as f64 - 16.2 * (sloc.max(1) as f64).ln();
    (100.0 * raw / 171.0).max(0.0)
}

/// A top-level statement of a library file, with its source segment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopLevelItem {
    pub kind: ItemKind,
    /// The bound name for definitions and simple assignments.
    pub name: Option<String>,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemKind {
    Function,
    Class,
    Assignment,
    Import,
    Other,
}

/// A subject language the engine can analyze. One implementation ships.
pub trait Grammar: Send + Sync {
    fn name(&self) -> &str;
    fn analyze(&self, source: &str) -> Result<AstSummary, ParseError>;
    fn top_level_items(&self, source: &str) -> Result<Vec<TopLevelItem>, ParseError>;
    /// Renames references to a free identifier. Attribute accesses and
    /// keyword-argument names are left alone.
    fn rename_identifier(&self, source: &str, old: &str, new: &str) -> Result<String, ParseError>;
}

/// The shipped grammar with the default Halstead table.
pub fn default_grammar() -> Arc<dyn Grammar> {
    static GRAMMAR: OnceLock<Arc<dyn Grammar>> = OnceLock::new();
    GRAMMAR
        .get_or_init(|| Arc::new(PythonGrammar::new(Arc::new(HalsteadTable::builtin()))))
        .clone()
}

pub fn parse(source: &str) -> Result<AstSummary, ParseError> {
    default_grammar().analyze(source)
}

pub fn cyclomatic_complexity(source: &str) -> Result<u64, ParseError> {
    Ok(parse(source)?.cyclomatic_complexity())
}

pub fn halstead_volume(source: &str) -> Result<f64, ParseError> {
    Ok(parse(source)?.halstead_volume())
}

pub fn maintainability_index(source: &str) -> Result<f64, ParseError> {
    Ok(parse(source)?.maintainability_index())
}

pub fn count_tokens(
    text: &str,
    tokenizer: &TokenizerId,
    registry: &TokenizerRegistry,
) -> Result<usize, TokenizerError> {
    Ok(registry.get(tokenizer)?.count(text))
}
