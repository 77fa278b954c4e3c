//! The accumulated library: an append-only list of top-level items, each
//! tagged with the cluster that contributed it.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::code::{Grammar, ItemKind, ParseError};

use super::prompt::normalize_section;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LibraryEntry {
    /// Bound name for definitions and assignments; the statement text for
    /// imports; `#<cluster>.<i>` for any other statement.
    pub name: String,
    pub kind: ItemKind,
    pub source: String,
    pub origin_cluster: usize,
}

impl LibraryEntry {
    pub fn is_definition(&self) -> bool {
        matches!(self.kind, ItemKind::Function | ItemKind::Class)
    }
}

/// Splits library text into entries. Comments between top-level items are
/// not kept.
pub fn split_entries(grammar: &dyn Grammar, text: &str, cluster: usize) -> Result<Vec<LibraryEntry>, ParseError> {
    Ok(grammar
        .top_level_items(text)?
        .into_iter()
        .enumerate()
        .map(|(i, item)| {
            let name = match (&item.name, item.kind) {
                (Some(n), _) => n.clone(),
                (None, ItemKind::Import) => item.text.trim().to_string(),
                (None, _) => format!("#{cluster}.{i}"),
            };
            LibraryEntry {
                name,
                kind: item.kind,
                source: normalize_section(&item.text),
                origin_cluster: cluster,
            }
        })
        .collect())
}

/// Names bound by definitions and assignments in `text`.
pub fn defined_names(grammar: &dyn Grammar, text: &str) -> Result<Vec<String>, ParseError> {
    Ok(grammar
        .top_level_items(text)?
        .into_iter()
        .filter(|i| matches!(i.kind, ItemKind::Function | ItemKind::Class | ItemKind::Assignment))
        .filter_map(|i| i.name)
        .collect())
}

/// Joins two library texts with one blank line between them.
pub fn compose(first: &str, second: &str) -> String {
    match (first.is_empty(), second.is_empty()) {
        (true, _) => second.to_string(),
        (_, true) => first.to_string(),
        _ => format!("{}\n{}", normalize_section(first), normalize_section(second)),
    }
}

/// A rename applied to resolve a name collision.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rename {
    pub from: String,
    pub to: String,
    pub cluster: usize,
}

/// Renames every name of `delta` that is already in `taken` to the first
/// free `<name>_vN` (N ≥ 2), in the helper text and in `rewrites`.
pub fn resolve_collisions(
    grammar: &dyn Grammar,
    taken: &BTreeSet<String>,
    delta: &str,
    rewrites: &mut BTreeMap<String, String>,
    cluster: usize,
) -> Result<(String, Vec<Rename>), ParseError> {
    let names = defined_names(grammar, delta)?;
    let mut used: BTreeSet<String> = taken.iter().cloned().chain(names.iter().cloned()).collect();
    let mut text = delta.to_string();
    let mut renames = Vec::new();
    let mut done = BTreeSet::new();
    for name in names {
        if !taken.contains(&name) || !done.insert(name.clone()) {
            continue;
        }
        let to = (2..)
            .map(|n| format!("{name}_v{n}"))
            .find(|c| !used.contains(c))
            .expect("unbounded suffix search");
        used.insert(to.clone());
        text = grammar.rename_identifier(&text, &name, &to)?;
        for code in rewrites.values_mut() {
            *code = grammar.rename_identifier(code, &name, &to)?;
        }
        renames.push(Rename { from: name, to, cluster });
    }
    Ok((text, renames))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LibraryState {
    entries: Vec<LibraryEntry>,
    revision: usize,
}

impl LibraryState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[LibraryEntry] {
        &self.entries
    }

    pub fn revision(&self) -> usize {
        self.revision
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn names(&self) -> BTreeSet<String> {
        self.entries
            .iter()
            .filter(|e| !matches!(e.kind, ItemKind::Import | ItemKind::Other))
            .map(|e| e.name.clone())
            .collect()
    }

    pub fn definitions(&self) -> impl Iterator<Item = &LibraryEntry> {
        self.entries.iter().filter(|e| e.is_definition())
    }

    /// The library module source.
    pub fn text(&self) -> String {
        self.entries.iter().map(|e| e.source.as_str()).collect::<Vec<_>>().join("\n")
    }

    /// Appends the entries of `delta`, which must already be free of name
    /// collisions. Imports already present are skipped. Starts a new
    /// revision even when nothing is added.
    pub fn absorb(&mut self, grammar: &dyn Grammar, delta: &str, cluster: usize) -> Result<usize, ParseError> {
        let mut imports: BTreeSet<String> = self
            .entries
            .iter()
            .filter(|e| e.kind == ItemKind::Import)
            .map(|e| e.name.clone())
            .collect();
        let names = self.names();
        let mut added = 0;
        for entry in split_entries(grammar, delta, cluster)? {
            match entry.kind {
                ItemKind::Import if !imports.insert(entry.name.clone()) => continue,
                ItemKind::Function | ItemKind::Class | ItemKind::Assignment => {
                    debug_assert!(!names.contains(&entry.name), "unresolved collision on {}", entry.name);
                }
                _ => {}
            }
            self.entries.push(entry);
            added += 1;
        }
        self.revision += 1;
        Ok(added)
    }

    /// Library seeded from an existing module, e.g. the output of an earlier
    /// run. Seeded entries carry `usize::MAX` as their origin cluster.
    pub fn seeded(grammar: &dyn Grammar, text: &str) -> Result<Self, ParseError> {
        Ok(Self {
            entries: split_entries(grammar, text, usize::MAX)?,
            revision: 0,
        })
    }
}
