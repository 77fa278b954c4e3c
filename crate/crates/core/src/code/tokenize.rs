use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use fancy_regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TokenizerError {
    #[error("unknown tokenizer '{0}'")]
    UnknownTokenizer(String),
    #[error("cannot read tokenizer file {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid tokenizer file {path}: {message}")]
    Invalid { path: PathBuf, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenizerId(pub String);

impl TokenizerId {
    pub const REF_MODEL: &'static str = "ref-model";
    pub const FALLBACK: &'static str = "fallback";

    pub fn ref_model() -> Self {
        Self(Self::REF_MODEL.into())
    }

    pub fn fallback() -> Self {
        Self(Self::FALLBACK.into())
    }
}

impl Default for TokenizerId {
    fn default() -> Self {
        Self::ref_model()
    }
}

impl fmt::Display for TokenizerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for TokenizerId {
    fn from(s: &str) -> Self {
        Self(s.to_string())
    }
}

pub trait Tokenizer: Send + Sync {
    fn tokens(&self, text: &str) -> Vec<String>;

    fn count(&self, text: &str) -> usize {
        self.tokens(text).len()
    }
}

/// Maximal alphanumeric runs; every other non-whitespace character is a
/// token of its own.
#[derive(Debug, Default, Clone, Copy)]
pub struct FallbackTokenizer;

impl Tokenizer for FallbackTokenizer {
    fn tokens(&self, text: &str) -> Vec<String> {
        let mut out = Vec::new();
        let mut word = String::new();
        for c in text.chars() {
            if c.is_alphanumeric() {
                word.push(c);
                continue;
            }
            if !word.is_empty() {
                out.push(std::mem::take(&mut word));
            }
            if !c.is_whitespace() {
                out.push(c.to_string());
            }
        }
        if !word.is_empty() {
            out.push(word);
        }
        out
    }

    fn count(&self, text: &str) -> usize {
        let mut n = 0;
        let mut in_word = false;
        for c in text.chars() {
            if c.is_alphanumeric() {
                if !in_word {
                    n += 1;
                    in_word = true;
                }
            } else {
                in_word = false;
                if !c.is_whitespace() {
                    n += 1;
                }
            }
        }
        n
    }
}

const GPT2_PATTERN: &str =
    r"'s|'t|'re|'ve|'m|'ll|'d| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+(?!\S)|\s+";

/// Byte-level BPE read from a `tokenizer.json` file: added tokens, a
/// regex split pre-tokenizer, byte-to-unicode mapping and ranked merges.
pub struct BpeTokenizer {
    vocab: HashMap<String, u32>,
    ranks: HashMap<(String, String), usize>,
    splits: Vec<Regex>,
    added: Vec<String>,
    ignore_merges: bool,
    byte_map: [char; 256],
}

impl BpeTokenizer {
    pub fn from_file(path: &Path) -> Result<Self, TokenizerError> {
        let text = std::fs::read_to_string(path).map_err(|source| TokenizerError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text).map_err(|message| TokenizerError::Invalid {
            path: path.to_path_buf(),
            message,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let root: Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
        let model = root.get("model").ok_or("missing model")?;
        if let Some(kind) = model.get("type").and_then(Value::as_str) {
            if kind != "BPE" {
                return Err(format!("unsupported model type {kind}"));
            }
        }
        let vocab: HashMap<String, u32> = serde_json::from_value(
            model.get("vocab").cloned().ok_or("missing model.vocab")?,
        )
        .map_err(|e| format!("model.vocab: {e}"))?;

        let mut ranks = HashMap::new();
        let merges = model.get("merges").and_then(Value::as_array).ok_or("missing model.merges")?;
        for (rank, merge) in merges.iter().enumerate() {
            let pair = match merge {
                Value::String(s) => {
                    let (a, b) = s.split_once(' ').ok_or_else(|| format!("bad merge {s:?}"))?;
                    (a.to_string(), b.to_string())
                }
                Value::Array(items) if items.len() == 2 => {
                    let get = |v: &Value| v.as_str().map(str::to_string).ok_or("bad merge pair");
                    (get(&items[0])?, get(&items[1])?)
                }
                other => return Err(format!("bad merge {other}")),
            };
            ranks.entry(pair).or_insert(rank);
        }

        let mut added: Vec<String> = root
            .get("added_tokens")
            .and_then(Value::as_array)
            .map(|a| {
                a.iter()
                    .filter_map(|t| t.get("content").and_then(Value::as_str).map(str::to_string))
                    .filter(|s| !s.is_empty())
                    .collect()
            })
            .unwrap_or_default();
        added.sort_by(|a, b| b.len().cmp(&a.len()).then(a.cmp(b)));

        let mut splits = Vec::new();
        collect_splits(root.get("pre_tokenizer").unwrap_or(&Value::Null), &mut splits)?;

        Ok(Self {
            vocab,
            ranks,
            splits,
            added,
            ignore_merges: model.get("ignore_merges").and_then(Value::as_bool).unwrap_or(false),
            byte_map: bytes_to_unicode(),
        })
    }

    /// The pieces BPE merges operate within; merges never cross them.
    pub fn pre_tokens<'t>(&self, text: &'t str) -> Vec<&'t str> {
        self.pre_tokenize(text)
    }

    fn pre_tokenize<'t>(&self, text: &'t str) -> Vec<&'t str> {
        let mut pieces = vec![text];
        for re in &self.splits {
            let mut next = Vec::new();
            for piece in pieces {
                let mut last = 0;
                for m in re.find_iter(piece).flatten() {
                    if m.start() > last {
                        next.push(&piece[last..m.start()]);
                    }
                    if m.end() > m.start() {
                        next.push(m.as_str());
                    }
                    last = m.end();
                }
                if last < piece.len() {
                    next.push(&piece[last..]);
                }
            }
            pieces = next;
        }
        pieces
    }

    fn encode_word(&self, word: &str, out: &mut Vec<String>) {
        let mapped: String = word.bytes().map(|b| self.byte_map[b as usize]).collect();
        if self.ignore_merges && self.vocab.contains_key(&mapped) {
            out.push(mapped);
            return;
        }
        let mut symbols: Vec<String> = mapped.chars().map(|c| c.to_string()).collect();
        while symbols.len() > 1 {
            let best = symbols
                .windows(2)
                .enumerate()
                .filter_map(|(i, w)| {
                    self.ranks.get(&(w[0].clone(), w[1].clone())).map(|&r| (r, i))
                })
                .min();
            let Some((rank, _)) = best else { break };
            let mut merged = Vec::with_capacity(symbols.len());
            let mut i = 0;
            while i < symbols.len() {
                if i + 1 < symbols.len()
                    && self.ranks.get(&(symbols[i].clone(), symbols[i + 1].clone())) == Some(&rank)
                {
                    merged.push(format!("{}{}", symbols[i], symbols[i + 1]));
                    i += 2;
                } else {
                    merged.push(std::mem::take(&mut symbols[i]));
                    i += 1;
                }
            }
            symbols = merged;
        }
        out.extend(symbols);
    }

    fn encode_plain(&self, text: &str, out: &mut Vec<String>) {
        for piece in self.pre_tokenize(text) {
            self.encode_word(piece, out);
        }
    }
}

impl Tokenizer for BpeTokenizer {
    fn tokens(&self, text: &str) -> Vec<String> {
        let mut out = Vec::new();
        let mut rest = text;
        'outer: while !rest.is_empty() {
            let mut earliest: Option<(usize, &str)> = None;
            for token in &self.added {
                if let Some(pos) = rest.find(token.as_str()) {
                    if earliest.is_none_or(|(p, _)| pos < p) {
                        earliest = Some((pos, token));
                    }
                }
            }
            match earliest {
                Some((pos, token)) => {
                    self.encode_plain(&rest[..pos], &mut out);
                    out.push(token.to_string());
                    rest = &rest[pos + token.len()..];
                }
                None => {
                    self.encode_plain(rest, &mut out);
                    break 'outer;
                }
            }
        }
        out
    }
}

fn collect_splits(pre: &Value, out: &mut Vec<Regex>) -> Result<(), String> {
    match pre.get("type").and_then(Value::as_str) {
        None => Ok(()),
        Some("Sequence") => {
            for p in pre.get("pretokenizers").and_then(Value::as_array).into_iter().flatten() {
                collect_splits(p, out)?;
            }
            Ok(())
        }
        Some("Split") => {
            let pattern = pre
                .get("pattern")
                .and_then(|p| p.get("Regex").or_else(|| p.get("String")))
                .and_then(Value::as_str)
                .ok_or("Split without pattern")?;
            let is_regex = pre.get("pattern").and_then(|p| p.get("Regex")).is_some();
            let source = if is_regex {
                pattern.to_string()
            } else {
                fancy_regex::escape(pattern).into_owned()
            };
            out.push(Regex::new(&source).map_err(|e| e.to_string())?);
            Ok(())
        }
        Some("ByteLevel") => {
            if pre.get("use_regex").and_then(Value::as_bool).unwrap_or(true) {
                out.push(Regex::new(GPT2_PATTERN).map_err(|e| e.to_string())?);
            }
            Ok(())
        }
        Some(other) => Err(format!("unsupported pre-tokenizer {other}")),
    }
}

/// The reversible byte-to-printable-character table of byte-level BPE.
fn bytes_to_unicode() -> [char; 256] {
    let mut map = ['\0'; 256];
    let mut n = 0u32;
    for b in 0..=255u32 {
        let printable = (33..=126).contains(&b) || (161..=172).contains(&b) || (174..=255).contains(&b);
        map[b as usize] = if printable {
            char::from_u32(b).unwrap()
        } else {
            n += 1;
            char::from_u32(255 + n).unwrap()
        };
    }
    map
}

/// Named tokenizers. `fallback` is always present; `ref-model` is the BPE
/// vocabulary of the scoring model when a file is configured and otherwise
/// aliases `fallback`.
#[derive(Clone)]
pub struct TokenizerRegistry {
    tokenizers: HashMap<TokenizerId, Arc<dyn Tokenizer>>,
}

impl TokenizerRegistry {
    pub fn offline() -> Self {
        let fallback: Arc<dyn Tokenizer> = Arc::new(FallbackTokenizer);
        let mut tokenizers = HashMap::new();
        tokenizers.insert(TokenizerId::fallback(), fallback.clone());
        tokenizers.insert(TokenizerId::ref_model(), fallback);
        Self { tokenizers }
    }

    pub fn with_ref_model(path: Option<&Path>) -> Result<Self, TokenizerError> {
        let mut registry = Self::offline();
        if let Some(path) = path {
            registry.register(TokenizerId::ref_model(), Arc::new(BpeTokenizer::from_file(path)?));
        }
        Ok(registry)
    }

    pub fn register(&mut self, id: TokenizerId, tokenizer: Arc<dyn Tokenizer>) {
        self.tokenizers.insert(id, tokenizer);
    }

    pub fn get(&self, id: &TokenizerId) -> Result<Arc<dyn Tokenizer>, TokenizerError> {
        self.tokenizers
            .get(id)
            .cloned()
            .ok_or_else(|| TokenizerError::UnknownTokenizer(id.0.clone()))
    }
}

impl Default for TokenizerRegistry {
    fn default() -> Self {
        Self::offline()
    }
}
