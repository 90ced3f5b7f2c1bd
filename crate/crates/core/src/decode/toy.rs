//! Table-driven stand-in for a neural decoder.
//!
//! Model files are TOML:
//!
//! ```toml
//! vocab = ["a", "b", "</s>"]
//! eos = "</s>"
//!
//! [[row]]
//! context = ["<s>"]          # start of sequence
//! probs = [0.6, 0.4, 0.0]
//!
//! [[row]]
//! context = []               # fallback for any history
//! probs = [0.3, 0.3, 0.4]
//! ```
//!
//! `probs` is aligned with `vocab`. A context lists up to two preceding
//! symbols; `<s>` may only appear first. The distribution for a history is the
//! row whose context is its longest matching suffix, so the empty row is
//! required.

use std::collections::HashMap;
use std::path::Path;

use rand::Rng;
use serde::Deserialize;

use super::{SequenceScorer, TokenId};
use crate::error::{Error, Result};

/// Beginning-of-sequence marker usable in row contexts.
pub const BOS: &str = "<s>";

const MAX_CONTEXT: usize = 2;
const ROW_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    vocab: Vec<String>,
    eos: String,
    #[serde(default)]
    row: Vec<RowFile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RowFile {
    context: Vec<String>,
    probs: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ToyModel {
    vocab: Vec<String>,
    eos: TokenId,
    /// Context symbols (vocab ids, or `vocab.len()` for BOS) -> log-probs.
    rows: HashMap<Vec<usize>, Vec<f64>>,
}

impl ToyModel {
    /// Builds and validates a model from `(context, probabilities)` rows.
    pub fn new(vocab: Vec<String>, eos: &str, rows: Vec<(Vec<String>, Vec<f64>)>) -> Result<Self> {
        let invalid = |msg: String| Error::Validation(format!("toy model: {msg}"));
        if vocab.is_empty() {
            return Err(invalid("empty vocabulary".into()));
        }
        let mut index: HashMap<&str, usize> = HashMap::new();
        for (i, tok) in vocab.iter().enumerate() {
            if tok == BOS || tok.is_empty() || tok.chars().any(char::is_whitespace) {
                return Err(invalid(format!("invalid vocabulary token {tok:?}")));
            }
            if index.insert(tok.as_str(), i).is_some() {
                return Err(invalid(format!("duplicate vocabulary token {tok:?}")));
            }
        }
        let eos_id = *index
            .get(eos)
            .ok_or_else(|| invalid(format!("eos {eos:?} not in vocabulary")))?;
        let bos_id = vocab.len();

        let mut table = HashMap::new();
        for (n, (context, probs)) in rows.into_iter().enumerate() {
            let row = n + 1;
            if context.len() > MAX_CONTEXT {
                return Err(invalid(format!("row {row}: context longer than {MAX_CONTEXT}")));
            }
            let mut ids = Vec::with_capacity(context.len());
            for (pos, sym) in context.iter().enumerate() {
                if sym == BOS {
                    if pos != 0 {
                        return Err(invalid(format!("row {row}: {BOS} must come first")));
                    }
                    ids.push(bos_id);
                } else {
                    let id = *index
                        .get(sym.as_str())
                        .ok_or_else(|| invalid(format!("row {row}: unknown context token {sym:?}")))?;
                    if id == eos_id {
                        return Err(invalid(format!("row {row}: eos cannot appear in a context")));
                    }
                    ids.push(id);
                }
            }
            if probs.len() != vocab.len() {
                return Err(invalid(format!(
                    "row {row}: {} probabilities for {} vocabulary entries",
                    probs.len(),
                    vocab.len()
                )));
            }
            if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(invalid(format!("row {row}: probabilities must be finite and >= 0")));
            }
            let sum: f64 = probs.iter().sum();
            if (sum - 1.0).abs() > ROW_TOLERANCE {
                return Err(invalid(format!("row {row}: probabilities sum to {sum}, not 1")));
            }
            let lp = probs.iter().map(|p| p.ln()).collect();
            if table.insert(ids, lp).is_some() {
                return Err(invalid(format!("row {row}: duplicate context {context:?}")));
            }
        }
        if !table.contains_key(&Vec::new()) {
            return Err(invalid("missing row with empty context".into()));
        }
        Ok(Self {
            vocab,
            eos: eos_id,
            rows: table,
        })
    }

    pub fn from_toml_str(text: &str, source_name: &str) -> Result<Self> {
        let file: ModelFile = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
                .unwrap_or(0);
            Error::parse(source_name, line, e.message().to_string())
        })?;
        let rows = file.row.into_iter().map(|r| (r.context, r.probs)).collect();
        Self::new(file.vocab, &file.eos, rows)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, &path.display().to_string())
    }

    /// Looks up a vocabulary token.
    pub fn token_id(&self, token: &str) -> Option<TokenId> {
        self.vocab.iter().position(|t| t == token)
    }

    /// A random model with `vocab_size` tokens (the last one EOS) and full
    /// tables for every context of up to `order` symbols.
    pub fn random(rng: &mut impl Rng, vocab_size: usize, order: usize) -> Self {
        assert!(vocab_size >= 2 && order <= MAX_CONTEXT);
        let mut vocab: Vec<String> = (0..vocab_size - 1).map(|i| format!("t{i}")).collect();
        vocab.push("</s>".into());
        let symbols: Vec<String> = vocab[..vocab_size - 1].to_vec();
        let mut contexts: Vec<Vec<String>> = vec![vec![]];
        let mut prev: Vec<Vec<String>> = vec![vec![]];
        for _ in 0..order {
            let mut next = Vec::new();
            for ctx in &prev {
                // extend to the left: BOS only as the leftmost symbol
                for s in symbols.iter().chain([&BOS.to_string()]) {
                    if ctx.first().is_some_and(|f| f == BOS) {
                        continue;
                    }
                    let mut c = vec![s.clone()];
                    c.extend(ctx.iter().cloned());
                    next.push(c);
                }
            }
            contexts.extend(next.iter().cloned());
            prev = next;
        }
        let rows = contexts
            .into_iter()
            .map(|ctx| {
                let w: Vec<f64> = (0..vocab_size).map(|_| rng.gen_range(0.01..1.0)).collect();
                let total: f64 = w.iter().sum();
                let mut probs: Vec<f64> = w.iter().map(|x| x / total).collect();
                // absorb rounding so the row sums to 1 as closely as possible
                let drift: f64 = 1.0 - probs.iter().sum::<f64>();
                probs[0] += drift;
                (ctx, probs)
            })
            .collect();
        Self::new(vocab, "</s>", rows).expect("generated rows are valid")
    }

    fn lookup(&self, history: &[usize]) -> &[f64] {
        let longest = history.len().min(MAX_CONTEXT);
        for k in (0..=longest).rev() {
            if let Some(row) = self.rows.get(&history[history.len() - k..]) {
                return row;
            }
        }
        unreachable!("empty-context row is checked at construction")
    }
}

impl SequenceScorer for ToyModel {
    /// The last (up to two) history symbols, BOS included.
    type State = Vec<usize>;

    fn vocabulary(&self) -> &[String] {
        &self.vocab
    }

    fn eos(&self) -> TokenId {
        self.eos
    }

    fn initial_state(&self, context: &[TokenId]) -> Self::State {
        let mut history = vec![self.vocab.len()];
        history.extend_from_slice(context);
        let keep = history.len().saturating_sub(MAX_CONTEXT);
        history.split_off(keep)
    }

    fn log_probs(&self, state: &Self::State) -> Vec<f64> {
        self.lookup(state).to_vec()
    }

    fn advance(&self, state: &Self::State, token: TokenId) -> Self::State {
        let mut next = state.clone();
        next.push(token);
        if next.len() > MAX_CONTEXT {
            next.remove(0);
        }
        next
    }
}
