//! Exact-match METEOR.
//!
//! Phonemes have no stems or synonyms, so only identical tokens align. The
//! alignment is a single left-to-right scan: each hypothesis token takes the
//! leftmost unused identical reference token. This is deterministic but does
//! not search for the minimum-chunk alignment the official scorer uses.

use super::MetricConfig;
use crate::corpus::EvalItem;

/// Result of aligning a hypothesis to one reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Alignment {
    pub matches: usize,
    pub chunks: usize,
}

pub fn align<T: PartialEq>(hyp: &[T], reference: &[T]) -> Alignment {
    let mut used = vec![false; reference.len()];
    let mut matches = 0;
    let mut chunks = 0;
    let mut prev: Option<usize> = None;
    for tok in hyp {
        let hit = (0..reference.len()).find(|&j| !used[j] && reference[j] == *tok);
        match hit {
            Some(j) => {
                used[j] = true;
                matches += 1;
                // continues a chunk only if the previous hypothesis token sat
                // directly before this one in the reference
                if prev.is_none_or(|p| p + 1 != j) {
                    chunks += 1;
                }
                prev = Some(j);
            }
            None => prev = None,
        }
    }
    Alignment { matches, chunks }
}

fn score_alignment(a: Alignment, hyp_len: usize, ref_len: usize, cfg: &MetricConfig) -> f64 {
    if a.matches == 0 {
        return 0.0;
    }
    let m = a.matches as f64;
    let p = m / hyp_len as f64;
    let r = m / ref_len as f64;
    let fmean = p * r / (cfg.meteor_alpha * p + (1.0 - cfg.meteor_alpha) * r);
    let penalty = cfg.meteor_gamma * (a.chunks as f64 / m).powf(cfg.meteor_beta);
    fmean * (1.0 - penalty)
}

/// METEOR in percent, best over references.
pub fn meteor(item: &EvalItem, cfg: &MetricConfig) -> f64 {
    let hyp = item.hypothesis().tokens();
    if hyp.is_empty() {
        return 0.0;
    }
    let best = item
        .references()
        .iter()
        .map(|r| score_alignment(align(hyp, r.tokens()), hyp.len(), r.len(), cfg))
        .fold(0.0, f64::max);
    100.0 * best
}
