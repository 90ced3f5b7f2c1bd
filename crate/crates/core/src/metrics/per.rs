use crate::corpus::EvalItem;
use crate::error::{Error, Result};

/// Unit-cost Levenshtein distance.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Edit distance and length of the reference with the lowest error ratio.
///
/// Ties go to the earliest reference.
pub fn per_counts(item: &EvalItem) -> Result<(usize, usize)> {
    let hyp = item.hypothesis().tokens();
    let mut best: Option<(usize, usize)> = None;
    for r in item.references() {
        if r.is_empty() {
            return Err(Error::Validation(format!("item {}: empty reference", item.id())));
        }
        let d = edit_distance(hyp, r.tokens());
        let better = match best {
            // d / len < bd / blen without division
            Some((bd, blen)) => d * blen < bd * r.len(),
            None => true,
        };
        if better {
            best = Some((d, r.len()));
        }
    }
    best.ok_or_else(|| Error::Validation(format!("item {}: no references", item.id())))
}

/// Phoneme error rate as a ratio; may exceed 1.
pub fn per(item: &EvalItem) -> Result<f64> {
    let (d, len) = per_counts(item)?;
    Ok(d as f64 / len as f64)
}

/// Total minimum edit distance over total chosen-reference length.
pub fn per_corpus(items: &[EvalItem]) -> Result<f64> {
    if items.is_empty() {
        return Err(Error::Argument("corpus PER needs at least one item".into()));
    }
    let (mut dist, mut len) = (0usize, 0usize);
    for it in items {
        let (d, l) = per_counts(it)?;
        dist += d;
        len += l;
    }
    Ok(dist as f64 / len as f64)
}
