//! Independent oracles and corpus generators shared by the integration tests.
#![allow(dead_code)]

use phoneval::decode::{SequenceScorer, TokenId};
use phoneval::EvalItem;
use rand::seq::SliceRandom;
use rand::Rng;

/// Naive recursive edit distance.
pub fn edit_distance_recursive<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    match (a.split_first(), b.split_first()) {
        (None, _) => b.len(),
        (_, None) => a.len(),
        (Some((x, ra)), Some((y, rb))) => {
            let sub = edit_distance_recursive(ra, rb) + usize::from(x != y);
            let del = edit_distance_recursive(ra, b) + 1;
            let ins = edit_distance_recursive(a, rb) + 1;
            sub.min(del).min(ins)
        }
    }
}

/// LCS by enumerating every subsequence of `a` (as a bitmask) and testing it against `b`.
pub fn lcs_brute_force<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let is_subseq = |sub: &[&T]| {
        let mut it = b.iter();
        sub.iter().all(|s| it.any(|x| x == *s))
    };
    let mut best = 0;
    for mask in 0u32..(1u32 << a.len()) {
        let sub: Vec<&T> = (0..a.len()).filter(|i| mask & (1 << i) != 0).map(|i| &a[i]).collect();
        if sub.len() > best && is_subseq(&sub) {
            best = sub.len();
        }
    }
    best
}

/// Every sequence over `alphabet` whose length is at most `max_len`.
pub fn all_sequences(alphabet: &[u8], max_len: usize) -> Vec<Vec<u8>> {
    let mut out = vec![vec![]];
    let mut frontier = vec![vec![]];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for s in &frontier {
            for &a in alphabet {
                let mut t: Vec<u8> = s.clone();
                t.push(a);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// Clipped n-gram matches by listing every window and counting occurrences by scan.
pub fn clipped_matches_brute_force(hyp: &[String], refs: &[Vec<String>], n: usize) -> (usize, usize) {
    let windows = |s: &[String]| -> Vec<Vec<String>> {
        if s.len() < n {
            return vec![];
        }
        (0..=s.len() - n).map(|i| s[i..i + n].to_vec()).collect()
    };
    let hyp_grams = windows(hyp);
    let mut distinct: Vec<Vec<String>> = hyp_grams.clone();
    distinct.sort();
    distinct.dedup();
    let mut matches = 0;
    for g in &distinct {
        let in_hyp = hyp_grams.iter().filter(|x| *x == g).count();
        let max_ref = refs
            .iter()
            .map(|r| windows(r).iter().filter(|x| *x == g).count())
            .max()
            .unwrap_or(0);
        matches += in_hyp.min(max_ref);
    }
    (matches, hyp_grams.len())
}

/// A completed sequence from exhaustive enumeration.
#[derive(Debug, Clone)]
pub struct Enumerated {
    pub tokens: Vec<TokenId>,
    pub logprob: f64,
}

/// Every terminal sequence of the model: EOS-terminated ones shorter than
/// `max_len` plus all truncated ones of exactly `max_len` tokens.
pub fn enumerate_sequences<M: SequenceScorer>(model: &M, context: &[TokenId], max_len: usize) -> Vec<Enumerated> {
    let eos = model.eos();
    let mut out = Vec::new();
    let mut stack = vec![(Vec::new(), model.initial_state(context), 0.0f64)];
    while let Some((tokens, state, lp)) = stack.pop() {
        if tokens.len() == max_len {
            out.push(Enumerated { tokens, logprob: lp });
            continue;
        }
        let dist = model.log_probs(&state);
        out.push(Enumerated {
            tokens: tokens.clone(),
            logprob: lp + dist[eos],
        });
        for (t, &l) in dist.iter().enumerate() {
            if t == eos || l == f64::NEG_INFINITY {
                continue;
            }
            let mut next = tokens.clone();
            next.push(t);
            stack.push((next, model.advance(&state, t), lp + l));
        }
    }
    out
}

/// The best enumerated sequence: highest logprob, then shorter, then lexicographic.
pub fn exhaustive_best<M: SequenceScorer>(model: &M, context: &[TokenId], max_len: usize) -> Enumerated {
    let mut all = enumerate_sequences(model, context, max_len);
    all.sort_by(|a, b| {
        b.logprob
            .total_cmp(&a.logprob)
            .then(a.tokens.len().cmp(&b.tokens.len()))
            .then_with(|| a.tokens.cmp(&b.tokens))
    });
    all.swap_remove(0)
}

pub fn phoneme_pool(size: usize) -> Vec<String> {
    (0..size).map(|i| format!("P{i}")).collect()
}

pub fn random_tokens(rng: &mut impl Rng, pool: &[String], len: usize) -> Vec<String> {
    (0..len).map(|_| pool[rng.gen_range(0..pool.len())].clone()).collect()
}

/// Items whose hypothesis is a copy of the first of `1..=max_refs` references.
pub fn identity_corpus(
    rng: &mut impl Rng,
    n_items: usize,
    min_len: usize,
    max_len: usize,
    max_refs: usize,
) -> Vec<EvalItem> {
    let pool = phoneme_pool(40);
    (0..n_items)
        .map(|i| {
            let n_refs = rng.gen_range(1..=max_refs);
            let refs: Vec<Vec<String>> = (0..n_refs)
                .map(|_| {
                    let len = rng.gen_range(min_len..=max_len);
                    random_tokens(rng, &pool, len)
                })
                .collect();
            EvalItem::new(format!("item{i:03}"), refs[0].clone(), refs).unwrap()
        })
        .collect()
}

/// Hypotheses formed by deleting a `rate` fraction of the first reference's
/// tokens. Deletion positions come from a fixed per-item permutation so higher
/// rates delete supersets of lower ones.
pub fn corrupted_corpus(base: &[EvalItem], perms: &[Vec<usize>], rate: f64) -> Vec<EvalItem> {
    base.iter()
        .zip(perms)
        .map(|(item, perm)| {
            let src = item.references()[0].tokens();
            let k = (rate * src.len() as f64).round() as usize;
            let dropped: std::collections::HashSet<usize> = perm[..k].iter().copied().collect();
            let hyp: Vec<String> = src
                .iter()
                .enumerate()
                .filter(|(i, _)| !dropped.contains(i))
                .map(|(_, t)| t.clone())
                .collect();
            item.with_hypothesis(hyp).unwrap()
        })
        .collect()
}

pub fn deletion_orders(rng: &mut impl Rng, base: &[EvalItem]) -> Vec<Vec<usize>> {
    base.iter()
        .map(|it| {
            let mut p: Vec<usize> = (0..it.references()[0].len()).collect();
            p.shuffle(rng);
            p
        })
        .collect()
}
