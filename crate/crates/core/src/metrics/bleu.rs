use std::ops::AddAssign;

use super::{MetricConfig, Smoothing, MAX_BLEU_ORDER};
use crate::corpus::EvalItem;
use crate::error::{Error, Result};
use crate::ngram::{max_ref_counts, ngram_counts};

/// Sufficient statistics for BLEU; additive across items.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BleuStats {
    /// Clipped n-gram matches, index 0 = unigrams.
    pub matches: [usize; MAX_BLEU_ORDER],
    /// Hypothesis n-gram totals, index 0 = unigrams.
    pub candidates: [usize; MAX_BLEU_ORDER],
    pub hyp_len: usize,
    /// Effective reference length (closest to hypothesis length, ties to shorter).
    pub ref_len: usize,
}

impl AddAssign for BleuStats {
    fn add_assign(&mut self, rhs: Self) {
        for k in 0..MAX_BLEU_ORDER {
            self.matches[k] += rhs.matches[k];
            self.candidates[k] += rhs.candidates[k];
        }
        self.hyp_len += rhs.hyp_len;
        self.ref_len += rhs.ref_len;
    }
}

/// Reference length closest to `hyp_len`; on a tie the shorter one wins.
pub fn closest_ref_len(hyp_len: usize, ref_lens: impl IntoIterator<Item = usize>) -> usize {
    ref_lens
        .into_iter()
        .min_by_key(|&r| (r.abs_diff(hyp_len), r))
        .unwrap_or(0)
}

/// Collects clipped matches and candidate counts for orders `1..=max_n`.
pub fn bleu_stats(item: &EvalItem, max_n: usize) -> BleuStats {
    let hyp = item.hypothesis().tokens();
    let mut stats = BleuStats {
        hyp_len: hyp.len(),
        ref_len: closest_ref_len(hyp.len(), item.references().iter().map(|r| r.len())),
        ..Default::default()
    };
    for n in 1..=max_n.min(MAX_BLEU_ORDER) {
        let counts = ngram_counts(hyp, n).expect("order >= 1");
        let ceiling = max_ref_counts(item.references().iter().map(|r| r.tokens()), n)
            .expect("order >= 1");
        stats.matches[n - 1] = counts.clipped_matches(&ceiling);
        stats.candidates[n - 1] = counts.total();
    }
    stats
}

/// BLEU-n in percent from accumulated statistics.
///
/// Add-one smoothing applies to orders two and up only; any zero precision
/// makes the score zero, as does an empty hypothesis side.
pub fn bleu_from_stats(stats: &BleuStats, n: usize, smoothing: Smoothing) -> f64 {
    debug_assert!((1..=MAX_BLEU_ORDER).contains(&n));
    if stats.hyp_len == 0 {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for k in 0..n {
        let (m, c) = (stats.matches[k], stats.candidates[k]);
        let p = match smoothing {
            Smoothing::AddOne if k >= 1 => (m as f64 + 1.0) / (c as f64 + 1.0),
            _ => {
                if m == 0 {
                    return 0.0;
                }
                m as f64 / c as f64
            }
        };
        log_sum += p.ln();
    }
    let (c, r) = (stats.hyp_len as f64, stats.ref_len as f64);
    let bp = if c >= r { 1.0 } else { (1.0 - r / c).exp() };
    100.0 * bp * (log_sum / n as f64).exp()
}

fn check_order(n: usize) -> Result<()> {
    if !(1..=MAX_BLEU_ORDER).contains(&n) {
        return Err(Error::Argument(format!(
            "BLEU order must be in 1..={MAX_BLEU_ORDER}, got {n}"
        )));
    }
    Ok(())
}

/// Sentence-level BLEU-n using `cfg.sentence_smoothing`.
pub fn bleu_sentence(item: &EvalItem, n: usize, cfg: &MetricConfig) -> Result<f64> {
    check_order(n)?;
    Ok(bleu_from_stats(&bleu_stats(item, n), n, cfg.sentence_smoothing))
}

/// Corpus BLEU-1..`cfg.max_bleu_order` from pooled statistics.
pub fn bleu_corpus(items: &[EvalItem], cfg: &MetricConfig) -> Result<Vec<f64>> {
    if items.is_empty() {
        return Err(Error::Argument("corpus BLEU needs at least one item".into()));
    }
    cfg.validate()?;
    let max_n = cfg.max_bleu_order;
    let mut pooled = BleuStats::default();
    for item in items {
        pooled += bleu_stats(item, max_n);
    }
    Ok((1..=max_n)
        .map(|n| bleu_from_stats(&pooled, n, cfg.corpus_smoothing))
        .collect())
}
