use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Multiset of contiguous n-grams of one order, borrowed from the source tokens.
///
/// Ordered map so that iteration (and any floating-point sum over it) is
/// reproducible across runs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NGramCounts<'a> {
    n: usize,
    counts: BTreeMap<&'a [String], usize>,
}

impl<'a> NGramCounts<'a> {
    pub fn order(&self) -> usize {
        self.n
    }

    pub fn get(&self, gram: &[String]) -> usize {
        self.counts.get(gram).copied().unwrap_or(0)
    }

    /// Total number of n-gram occurrences.
    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    /// Number of distinct n-grams.
    pub fn distinct(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'a [String], usize)> + '_ {
        self.counts.iter().map(|(g, c)| (*g, *c))
    }

    /// Keeps, per n-gram, the larger of the two counts.
    pub fn max_merge(&mut self, other: &NGramCounts<'a>) {
        for (gram, count) in other.iter() {
            let slot = self.counts.entry(gram).or_insert(0);
            *slot = (*slot).max(count);
        }
    }

    /// Sum over n-grams of `min(self, ceiling)` — the clipped match count.
    pub fn clipped_matches(&self, ceiling: &NGramCounts<'_>) -> usize {
        self.iter()
            .map(|(gram, count)| count.min(ceiling.get(gram)))
            .sum()
    }

    pub(crate) fn empty(n: usize) -> Self {
        Self {
            n,
            counts: BTreeMap::new(),
        }
    }
}

/// Counts every contiguous window of `n` tokens.
pub fn ngram_counts(tokens: &[String], n: usize) -> Result<NGramCounts<'_>> {
    if n == 0 {
        return Err(Error::Argument("n-gram order must be at least 1".into()));
    }
    let mut counts = BTreeMap::new();
    for window in tokens.windows(n) {
        *counts.entry(window).or_insert(0) += 1;
    }
    Ok(NGramCounts { n, counts })
}

/// Per-n-gram maximum count over several sequences (BLEU clipping ceiling).
pub fn max_ref_counts<'a>(refs: impl IntoIterator<Item = &'a [String]>, n: usize) -> Result<NGramCounts<'a>> {
    let mut acc = NGramCounts::empty(n);
    for r in refs {
        acc.max_merge(&ngram_counts(r, n)?);
    }
    Ok(acc)
}
