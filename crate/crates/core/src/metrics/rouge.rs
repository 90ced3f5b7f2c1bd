use super::MetricConfig;
use crate::corpus::EvalItem;

/// Length of the longest common subsequence, O(|a|·|b|) time, O(|b|) space.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// F-measure from LCS precision and recall with recall weight `beta`.
fn lcs_f(lcs: usize, hyp_len: usize, ref_len: usize, beta: f64) -> f64 {
    if lcs == 0 {
        return 0.0;
    }
    let p = lcs as f64 / hyp_len as f64;
    let r = lcs as f64 / ref_len as f64;
    let b2 = beta * beta;
    (1.0 + b2) * p * r / (r + b2 * p)
}

/// ROUGE-L in percent, best over references.
pub fn rouge_l(item: &EvalItem, cfg: &MetricConfig) -> f64 {
    let hyp = item.hypothesis().tokens();
    if hyp.is_empty() {
        return 0.0;
    }
    let best = item
        .references()
        .iter()
        .map(|r| lcs_f(lcs_len(hyp, r.tokens()), hyp.len(), r.len(), cfg.rouge_beta))
        .fold(0.0, f64::max);
    100.0 * best
}
