//! Offline stand-ins for the model endpoints. Every profile is a pure
//! function of its inputs, so runs against stubs replay bit-exactly.
//!
//! Sampling profiles:
//! - `echo`: copies the input programs unchanged and adds a helper section
//!   holding a comment derived from the prompt hash, seed and sample index,
//!   so the `k` samples are distinct.
//! - `identity`: copies the input programs with an empty helper section.
//! - `fixture:<dir>`: planted completions from `<dir>/fixture.json`, chosen
//!   by the set of unit ids in the prompt.
//!
//! Scoring profiles:
//! - `uniform`: every token costs ln 2 nats.
//! - `vocab-aware[:<path>]`: ln 2 for tokens on a common-vocabulary list,
//!   5 ln 2 for all others.
//!
//! Embedding profile `hash`: bag-of-words feature hashing into Gaussian
//! vectors, so texts sharing words lie close together.
//!
//! Summary prompts are answered by every profile with the distinct words
//! of the program's code.

use std::collections::{BTreeSet, HashSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Deserialize;
use sha2::{Digest, Sha256};

use super::{prompt_hash, GatewayError, ScoredText};
use crate::code::Tokenizer;
use crate::pipeline::prompt::{input_programs, program_marker, summary_code, HELPERS_MARKER};

pub const EMBEDDING_DIM: usize = 128;

const BUILTIN_VOCABULARY: &str = include_str!("../../data/common_vocabulary.txt");

#[derive(Debug, Clone)]
pub struct CommonVocabulary {
    words: HashSet<String>,
}

impl CommonVocabulary {
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_VOCABULARY)
    }

    /// One token per line; blank lines are skipped.
    pub fn parse(text: &str) -> Self {
        Self {
            words: text.lines().map(str::trim).filter(|l| !l.is_empty()).map(str::to_string).collect(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        std::fs::read_to_string(path)
            .map(|t| Self::parse(&t))
            .map_err(|e| GatewayError::Fixture(format!("{}: {e}", path.display())))
    }

    pub fn contains(&self, token: &str) -> bool {
        // Byte-level BPE marks a leading space or newline with these glyphs.
        let bare = token.trim_start_matches(['Ġ', 'Ċ', 'ĉ']).trim();
        self.words.contains(bare)
    }
}

pub(super) enum Profile {
    Echo,
    Identity,
    Fixture(PathBuf),
    Uniform,
    VocabAware(Arc<CommonVocabulary>),
    Hash,
}

impl Profile {
    pub(super) fn parse(spec: &str) -> Result<Self, GatewayError> {
        let (name, arg) = match spec.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (spec, None),
        };
        match (name, arg) {
            ("echo", None) => Ok(Profile::Echo),
            ("identity", None) => Ok(Profile::Identity),
            ("fixture", Some(dir)) if !dir.is_empty() => Ok(Profile::Fixture(PathBuf::from(dir))),
            ("uniform", None) => Ok(Profile::Uniform),
            ("vocab-aware", None) => Ok(Profile::VocabAware(Arc::new(CommonVocabulary::builtin()))),
            ("vocab-aware", Some(path)) => Ok(Profile::VocabAware(Arc::new(CommonVocabulary::load(Path::new(path))?))),
            ("hash", None) => Ok(Profile::Hash),
            _ => Err(GatewayError::UnknownProfile(spec.to_string())),
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Profile::Echo => "echo",
            Profile::Identity => "identity",
            Profile::Fixture(_) => "fixture",
            Profile::Uniform => "uniform",
            Profile::VocabAware(_) => "vocab-aware",
            Profile::Hash => "hash",
        }
    }

    pub(super) fn sample(&self, prompt: &str, k: usize, seed: u64) -> Result<Vec<String>, GatewayError> {
        if let Some(code) = summary_code(prompt) {
            return Ok(vec![stub_summary(code); k]);
        }
        let programs = input_programs(prompt);
        match self {
            Profile::Echo => {
                let hash = prompt_hash(prompt);
                Ok((0..k)
                    .map(|i| {
                        let helpers = format!("# echo {hash} seed {seed} sample {i}\n");
                        if programs.is_empty() {
                            helpers
                        } else {
                            render(&helpers, &programs)
                        }
                    })
                    .collect())
            }
            Profile::Identity => Ok(vec![render("", &programs); k]),
            Profile::Fixture(dir) => fixture_completions(dir, &programs, k),
            _ => Err(GatewayError::UnknownProfile(format!("{} cannot sample", self.name()))),
        }
    }

    pub(super) fn score(&self, tokenizer: &dyn Tokenizer, prefix: &str, suffix: &str) -> Result<ScoredText, GatewayError> {
        let ln2 = std::f64::consts::LN_2;
        let cost: Box<dyn Fn(&str) -> f64> = match self {
            Profile::Uniform => Box::new(|_| -ln2),
            Profile::VocabAware(vocab) => {
                let vocab = vocab.clone();
                Box::new(move |t| if vocab.contains(t) { -ln2 } else { -5.0 * ln2 })
            }
            _ => return Err(GatewayError::UnknownProfile(format!("{} cannot score", self.name()))),
        };
        let mut tokens = tokenizer.tokens(prefix);
        let prompt_boundary = tokens.len();
        tokens.extend(tokenizer.tokens(suffix));
        let token_logprobs = tokens.iter().map(|t| cost(t)).collect();
        Ok(ScoredText {
            tokens,
            token_logprobs,
            prompt_boundary,
        })
    }
}

fn render(helpers: &str, programs: &[(String, String)]) -> String {
    let mut out = format!("{HELPERS_MARKER}\n{helpers}\n");
    for (id, code) in programs {
        out.push_str(&program_marker(id));
        out.push('\n');
        out.push_str(code);
        out.push('\n');
    }
    out
}

fn stub_summary(code: &str) -> String {
    let mut seen = BTreeSet::new();
    let mut words = Vec::new();
    for word in code.split(|c: char| !c.is_alphanumeric()) {
        let w = word.to_lowercase();
        if w.len() >= 3 && !w.chars().all(|c| c.is_ascii_digit()) && seen.insert(w.clone()) {
            words.push(w);
        }
    }
    format!("Reusable components: {}.", words.join(" "))
}

#[derive(Deserialize)]
struct FixtureManifest {
    clusters: Vec<FixtureCluster>,
}

#[derive(Deserialize)]
struct FixtureCluster {
    units: Vec<String>,
    completions: Vec<String>,
}

fn fixture_completions(dir: &Path, programs: &[(String, String)], k: usize) -> Result<Vec<String>, GatewayError> {
    let manifest_path = dir.join("fixture.json");
    let text = std::fs::read_to_string(&manifest_path)
        .map_err(|e| GatewayError::Fixture(format!("{}: {e}", manifest_path.display())))?;
    let manifest: FixtureManifest = serde_json::from_str(&text)
        .map_err(|e| GatewayError::Fixture(format!("{}: {e}", manifest_path.display())))?;
    let wanted: BTreeSet<&str> = programs.iter().map(|(id, _)| id.as_str()).collect();
    let entry = manifest
        .clusters
        .iter()
        .find(|c| c.units.iter().map(String::as_str).collect::<BTreeSet<_>>() == wanted)
        .ok_or_else(|| GatewayError::Fixture(format!("no planted completions for units {wanted:?}")))?;
    if entry.completions.is_empty() {
        return Err(GatewayError::Fixture(format!("empty completion list for {wanted:?}")));
    }
    (0..k)
        .map(|i| {
            let path = dir.join(&entry.completions[i % entry.completions.len()]);
            std::fs::read_to_string(&path).map_err(|e| GatewayError::Fixture(format!("{}: {e}", path.display())))
        })
        .collect()
}

fn word_vector(word: &str) -> Vec<f64> {
    let seed: [u8; 32] = Sha256::digest(word.as_bytes()).into();
    let mut rng = ChaCha8Rng::from_seed(seed);
    (0..EMBEDDING_DIM).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Unit-norm bag-of-words embedding. Texts without any word fall back to
/// a vector keyed by the whole text.
pub fn stub_embedding(text: &str) -> Vec<f64> {
    let words: Vec<String> = text
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect();
    let mut v = vec![0.0; EMBEDDING_DIM];
    if words.is_empty() {
        v = word_vector(&format!("\u{0}{text}"));
    }
    for w in &words {
        for (acc, x) in v.iter_mut().zip(word_vector(w)) {
            *acc += x;
        }
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}
