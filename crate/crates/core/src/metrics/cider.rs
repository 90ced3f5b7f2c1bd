//! CIDEr-D consensus scoring.
//!
//! Scoring is two-phase: [`CiderIdf::build`] freezes document frequencies over
//! the reference sides of an item set, after which [`CiderIdf::score`] can be
//! called concurrently for any hypothesis.

use std::collections::HashMap;

use super::MetricConfig;
use crate::corpus::{EvalItem, PhonemeSeq};
use crate::error::{Error, Result};
use crate::ngram::ngram_counts;

/// Frozen IDF statistics for CIDEr-D.
#[derive(Debug, Clone)]
pub struct CiderIdf {
    /// ln(number of documents)
    log_docs: f64,
    /// n-gram -> number of items whose references contain it
    doc_freq: HashMap<Vec<String>, usize>,
    max_n: usize,
    sigma: f64,
}

/// One TF-IDF vector of a single order, with its norm.
struct Weighted<'a> {
    weights: Vec<(&'a [String], f64)>,
    norm: f64,
}

impl<'a> Weighted<'a> {
    fn get(&self, gram: &[String]) -> f64 {
        // vectors are built from BTreeMap iteration, hence sorted
        self.weights
            .binary_search_by(|(g, _)| (*g).cmp(gram))
            .map(|i| self.weights[i].1)
            .unwrap_or(0.0)
    }
}

impl CiderIdf {
    /// Each element of `reference_sets` is one document (the references of one item).
    pub fn build<'r>(
        reference_sets: impl IntoIterator<Item = &'r [PhonemeSeq]>,
        cfg: &MetricConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        let mut doc_freq: HashMap<Vec<String>, usize> = HashMap::new();
        let mut docs = 0usize;
        for refs in reference_sets {
            docs += 1;
            let mut seen: std::collections::HashSet<&[String]> = Default::default();
            for r in refs {
                for n in 1..=cfg.cider_max_n {
                    for (gram, _) in ngram_counts(r.tokens(), n)?.iter() {
                        seen.insert(gram);
                    }
                }
            }
            for gram in seen {
                *doc_freq.entry(gram.to_vec()).or_insert(0) += 1;
            }
        }
        if docs == 0 {
            return Err(Error::Argument("CIDEr-D needs at least one item".into()));
        }
        Ok(Self {
            log_docs: (docs as f64).ln(),
            doc_freq,
            max_n: cfg.cider_max_n,
            sigma: cfg.cider_sigma,
        })
    }

    pub fn from_items(items: &[EvalItem], cfg: &MetricConfig) -> Result<Self> {
        Self::build(items.iter().map(EvalItem::references), cfg)
    }

    /// ln(N / df), with df floored at 1 for n-grams no reference contains.
    pub fn idf(&self, gram: &[String]) -> f64 {
        let df = self.doc_freq.get(gram).copied().unwrap_or(0).max(1);
        self.log_docs - (df as f64).ln()
    }

    fn vector<'a>(&self, tokens: &'a [String], n: usize) -> Weighted<'a> {
        let counts = ngram_counts(tokens, n).expect("order >= 1");
        let total = counts.total() as f64;
        let weights: Vec<(&[String], f64)> = counts
            .iter()
            .map(|(g, c)| (g, c as f64 / total * self.idf(g)))
            .collect();
        let norm = weights.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
        Weighted { weights, norm }
    }

    fn similarity(&self, hyp: &Weighted<'_>, reference: &Weighted<'_>) -> f64 {
        if hyp.norm == 0.0 || reference.norm == 0.0 {
            return 0.0;
        }
        let dot: f64 = hyp
            .weights
            .iter()
            .map(|(g, h)| {
                let r = reference.get(g);
                h.min(r) * r
            })
            .sum();
        dot / (hyp.norm * reference.norm)
    }

    /// CIDEr-D of one hypothesis against its references, in `[0, 10]`.
    pub fn score(&self, hyp: &[String], references: &[PhonemeSeq]) -> f64 {
        if references.is_empty() {
            return 0.0;
        }
        let hyp_vecs: Vec<Weighted<'_>> = (1..=self.max_n).map(|n| self.vector(hyp, n)).collect();
        let two_sigma_sq = 2.0 * self.sigma * self.sigma;
        let mut total = 0.0;
        for r in references {
            let delta = hyp.len() as f64 - r.len() as f64;
            let penalty = (-(delta * delta) / two_sigma_sq).exp();
            let sims: f64 = (1..=self.max_n)
                .map(|n| self.similarity(&hyp_vecs[n - 1], &self.vector(r.tokens(), n)))
                .sum();
            total += penalty * sims / self.max_n as f64;
        }
        10.0 * total / references.len() as f64
    }
}

/// Per-item CIDEr-D with IDF taken from the items themselves, plus the mean.
pub fn cider_d(items: &[EvalItem], cfg: &MetricConfig) -> Result<(Vec<f64>, f64)> {
    let idf = CiderIdf::from_items(items, cfg)?;
    let scores: Vec<f64> = items
        .iter()
        .map(|it| idf.score(it.hypothesis().tokens(), it.references()))
        .collect();
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    Ok((scores, mean))
}
