//! Greedy, beam-search and sampling decoders over an abstract scorer.

mod toy;

use std::cmp::Ordering;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use toy::{ToyModel, BOS};

use crate::error::{Error, Result};

/// Index into a scorer's vocabulary.
pub type TokenId = usize;

/// An autoregressive model exposing next-token log-probabilities.
///
/// `log_probs` must return one natural-log probability per vocabulary entry,
/// and must be a pure function of the state.
pub trait SequenceScorer: Sync {
    type State: Clone + Send + Sync;

    fn vocabulary(&self) -> &[String];

    /// Index of the end-of-sequence token.
    fn eos(&self) -> TokenId;

    fn initial_state(&self, context: &[TokenId]) -> Self::State;

    fn log_probs(&self, state: &Self::State) -> Vec<f64>;

    fn advance(&self, state: &Self::State, token: TokenId) -> Self::State;

    /// Consumes `token` and returns the next state with its distribution.
    fn step(&self, state: &Self::State, token: TokenId) -> (Self::State, Vec<f64>) {
        let next = self.advance(state, token);
        let lp = self.log_probs(&next);
        (next, lp)
    }

    /// Maps token ids to vocabulary strings.
    fn render(&self, tokens: &[TokenId]) -> Vec<String> {
        let vocab = self.vocabulary();
        tokens.iter().map(|&t| vocab[t].clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamConfig {
    pub width: usize,
    pub max_len: usize,
    /// Final scores are `logprob / steps^alpha`; 0 disables the penalty.
    pub length_penalty_alpha: f64,
    pub seed: u64,
}

/// Seed used when none is supplied.
pub const DEFAULT_SEED: u64 = 20_240_229;

impl Default for BeamConfig {
    fn default() -> Self {
        Self {
            width: 5,
            max_len: 50,
            length_penalty_alpha: 0.0,
            seed: DEFAULT_SEED,
        }
    }
}

impl BeamConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 {
            return Err(Error::Argument("beam width must be at least 1".into()));
        }
        if self.max_len == 0 {
            return Err(Error::Argument("max_len must be at least 1".into()));
        }
        if !(self.length_penalty_alpha.is_finite() && self.length_penalty_alpha >= 0.0) {
            return Err(Error::Argument("length penalty alpha must be >= 0".into()));
        }
        Ok(())
    }
}

/// A decoded (partial or complete) sequence. `tokens` never contains EOS.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamHypothesis {
    pub tokens: Vec<TokenId>,
    pub logprob: f64,
    pub finished: bool,
    /// Whether EOS was emitted (as opposed to stopping at `max_len`).
    pub ended_with_eos: bool,
}

impl BeamHypothesis {
    fn start() -> Self {
        Self {
            tokens: Vec::new(),
            logprob: 0.0,
            finished: false,
            ended_with_eos: false,
        }
    }

    /// Number of model steps taken, counting an emitted EOS.
    pub fn steps(&self) -> usize {
        self.tokens.len() + usize::from(self.ended_with_eos)
    }

    /// Ranking score, length-normalized when `alpha > 0`.
    pub fn score(&self, alpha: f64) -> f64 {
        if alpha == 0.0 {
            self.logprob
        } else {
            self.logprob / (self.steps().max(1) as f64).powf(alpha)
        }
    }
}

/// Final N-best order: score descending, then shorter, then lexicographic ids.
fn final_order(a: &BeamHypothesis, b: &BeamHypothesis, alpha: f64) -> Ordering {
    b.score(alpha)
        .total_cmp(&a.score(alpha))
        .then(a.tokens.len().cmp(&b.tokens.len()))
        .then_with(|| a.tokens.cmp(&b.tokens))
}

/// Index of the largest finite value; the lowest index wins ties.
fn argmax(lp: &[f64]) -> Option<TokenId> {
    let mut best: Option<(TokenId, f64)> = None;
    for (i, &v) in lp.iter().enumerate() {
        if v.is_nan() || v == f64::NEG_INFINITY {
            continue;
        }
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

/// Picks the most probable token at every step.
pub fn greedy_decode<M: SequenceScorer>(model: &M, context: &[TokenId], cfg: &BeamConfig) -> Result<BeamHypothesis> {
    cfg.validate()?;
    let eos = model.eos();
    let mut state = model.initial_state(context);
    let mut hyp = BeamHypothesis::start();
    while hyp.tokens.len() < cfg.max_len {
        let lp = model.log_probs(&state);
        let Some(tok) = argmax(&lp) else { break };
        hyp.logprob += lp[tok];
        if tok == eos {
            hyp.ended_with_eos = true;
            break;
        }
        hyp.tokens.push(tok);
        state = model.advance(&state, tok);
    }
    hyp.finished = true;
    Ok(hyp)
}

struct Live<S> {
    hyp: BeamHypothesis,
    state: S,
}

struct Candidate {
    parent: usize,
    token: TokenId,
    logprob: f64,
}

/// Beam search returning up to `cfg.width` completed hypotheses, best first.
///
/// Every live hypothesis is expanded by the whole vocabulary and candidates
/// are ranked by score. A candidate that ends (EOS, or reaching `max_len`)
/// joins the completed pool if it ranks within the top `width` of its step;
/// the live beam is refilled with the best `width` unfinished candidates.
/// Search stops when nothing is live, or when the pool holds `width`
/// hypotheses and no live hypothesis can still outscore the worst of them.
pub fn beam_search<M: SequenceScorer>(model: &M, context: &[TokenId], cfg: &BeamConfig) -> Result<Vec<BeamHypothesis>> {
    cfg.validate()?;
    let eos = model.eos();
    let alpha = cfg.length_penalty_alpha;
    let mut live = vec![Live {
        hyp: BeamHypothesis::start(),
        state: model.initial_state(context),
    }];
    let mut completed: Vec<BeamHypothesis> = Vec::new();

    while !live.is_empty() && !pool_is_final(&completed, &live, cfg) {
        let mut candidates = Vec::new();
        for (parent, node) in live.iter().enumerate() {
            let lp = model.log_probs(&node.state);
            for (token, &l) in lp.iter().enumerate() {
                if l.is_nan() || l == f64::NEG_INFINITY {
                    continue;
                }
                candidates.push(Candidate {
                    parent,
                    token,
                    logprob: node.hyp.logprob + l,
                });
            }
        }
        let make = |c: &Candidate| {
            let parent = &live[c.parent].hyp;
            let mut hyp = parent.clone();
            hyp.logprob = c.logprob;
            if c.token == eos {
                hyp.ended_with_eos = true;
                hyp.finished = true;
            } else {
                hyp.tokens.push(c.token);
                hyp.finished = hyp.tokens.len() >= cfg.max_len;
            }
            hyp
        };
        // All candidates of a step share the step count, so the penalty
        // divisor is common; ties fall back to the full id path.
        let steps = live[0].hyp.steps() + 1;
        let rank_score = |c: &Candidate| {
            if alpha == 0.0 {
                c.logprob
            } else {
                c.logprob / (steps as f64).powf(alpha)
            }
        };
        candidates.sort_by(|a, b| {
            rank_score(b).total_cmp(&rank_score(a)).then_with(|| {
                let pa = &live[a.parent].hyp.tokens;
                let pb = &live[b.parent].hyp.tokens;
                pa.iter()
                    .chain([&a.token])
                    .cmp(pb.iter().chain([&b.token]))
            })
        });

        let mut next_live = Vec::with_capacity(cfg.width);
        for (rank, c) in candidates.iter().enumerate() {
            if next_live.len() >= cfg.width && rank >= cfg.width {
                break;
            }
            let hyp = make(c);
            if hyp.finished {
                if rank < cfg.width {
                    completed.push(hyp);
                }
            } else if next_live.len() < cfg.width {
                let state = model.advance(&live[c.parent].state, c.token);
                next_live.push(Live { hyp, state });
            }
        }
        live = next_live;
    }

    completed.sort_by(|a, b| final_order(a, b, alpha));
    completed.truncate(cfg.width);
    Ok(completed)
}

/// True once extending any live hypothesis cannot change the N-best.
///
/// Log-probabilities only decrease with length; under a length penalty the
/// best a live hypothesis can reach is its current log-probability spread
/// over `max_len` steps.
fn pool_is_final<S>(completed: &[BeamHypothesis], live: &[Live<S>], cfg: &BeamConfig) -> bool {
    if completed.len() < cfg.width {
        return false;
    }
    let alpha = cfg.length_penalty_alpha;
    let mut scores: Vec<f64> = completed.iter().map(|h| h.score(alpha)).collect();
    scores.sort_by(|a, b| b.total_cmp(a));
    let nth_best = scores[cfg.width - 1];
    let bound = |h: &BeamHypothesis| {
        if alpha == 0.0 {
            h.logprob
        } else {
            h.logprob / (cfg.max_len as f64).powf(alpha)
        }
    };
    live.iter().all(|l| bound(&l.hyp) <= nth_best)
}

/// Draws one token from a log-probability vector.
pub fn sample_token(lp: &[f64], rng: &mut impl Rng) -> Option<TokenId> {
    let weights: Vec<f64> = lp.iter().map(|l| if l.is_nan() { 0.0 } else { l.exp() }).collect();
    WeightedIndex::new(&weights).ok().map(|d| d.sample(rng))
}

/// Ancestral sampling with an explicit generator.
pub fn sample_decode_with<M: SequenceScorer>(
    model: &M,
    context: &[TokenId],
    cfg: &BeamConfig,
    rng: &mut impl Rng,
) -> Result<BeamHypothesis> {
    cfg.validate()?;
    let eos = model.eos();
    let mut state = model.initial_state(context);
    let mut hyp = BeamHypothesis::start();
    while hyp.tokens.len() < cfg.max_len {
        let lp = model.log_probs(&state);
        let Some(tok) = sample_token(&lp, rng) else { break };
        hyp.logprob += lp[tok];
        if tok == eos {
            hyp.ended_with_eos = true;
            break;
        }
        hyp.tokens.push(tok);
        state = model.advance(&state, tok);
    }
    hyp.finished = true;
    Ok(hyp)
}

/// Ancestral sampling seeded from `cfg.seed`; identical seeds give identical output.
pub fn sample_decode<M: SequenceScorer>(model: &M, context: &[TokenId], cfg: &BeamConfig) -> Result<BeamHypothesis> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    sample_decode_with(model, context, cfg, &mut rng)
}

/// Recomputes a hypothesis' log-probability by stepping through the model.
pub fn replay_logprob<M: SequenceScorer>(model: &M, context: &[TokenId], hyp: &BeamHypothesis) -> f64 {
    let mut state = model.initial_state(context);
    let mut total = 0.0;
    for &t in &hyp.tokens {
        total += model.log_probs(&state)[t];
        state = model.advance(&state, t);
    }
    if hyp.ended_with_eos {
        total += model.log_probs(&state)[model.eos()];
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(text: &str) -> ToyModel {
        ToyModel::from_toml_str(text, "test").unwrap()
    }

    fn cfg(width: usize, max_len: usize) -> BeamConfig {
        BeamConfig {
            width,
            max_len,
            ..Default::default()
        }
    }

    const EARLY_EOS: &str = r#"
vocab = ["a", "b", "</s>"]
eos = "</s>"
[[row]]
context = []
probs = [0.05, 0.05, 0.9]
"#;

    const CHAIN: &str = r#"
vocab = ["a", "b", "</s>"]
eos = "</s>"
[[row]]
context = []
probs = [0.0, 0.0, 1.0]
[[row]]
context = ["<s>"]
probs = [1.0, 0.0, 0.0]
[[row]]
context = ["a"]
probs = [0.0, 1.0, 0.0]
"#;

    const UNIFORM: &str = r#"
vocab = ["a", "b", "c", "</s>"]
eos = "</s>"
[[row]]
context = []
probs = [0.25, 0.25, 0.25, 0.25]
"#;

    // greedy takes "a" (0.6) but [b] completes with 0.4 * 0.9 = 0.36
    const TRAP: &str = r#"
vocab = ["a", "b", "</s>"]
eos = "</s>"
[[row]]
context = []
probs = [0.3, 0.3, 0.4]
[[row]]
context = ["<s>"]
probs = [0.6, 0.4, 0.0]
[[row]]
context = ["a"]
probs = [0.45, 0.45, 0.1]
[[row]]
context = ["b"]
probs = [0.05, 0.05, 0.9]
"#;

    #[test]
    fn greedy_immediate_eos() {
        let m = model(EARLY_EOS);
        let h = greedy_decode(&m, &[], &cfg(1, 10)).unwrap();
        assert!(h.tokens.is_empty());
        assert!(h.ended_with_eos && h.finished);
        assert!((h.logprob - 0.9f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn greedy_forced_chain() {
        let m = model(CHAIN);
        let h = greedy_decode(&m, &[], &cfg(1, 10)).unwrap();
        assert_eq!(m.render(&h.tokens), vec!["a", "b"]);
        assert_eq!(h.logprob, 0.0);
    }

    #[test]
    fn greedy_tie_takes_lowest_index() {
        let m = model(UNIFORM);
        let h = greedy_decode(&m, &[], &cfg(1, 1)).unwrap();
        assert_eq!(h.tokens, vec![0]);
        assert!(!h.ended_with_eos);
    }

    #[test]
    fn greedy_respects_max_len() {
        let m = model(UNIFORM);
        let h = greedy_decode(&m, &[], &cfg(1, 3)).unwrap();
        assert_eq!(h.tokens, vec![0, 0, 0]);
        assert!((h.logprob - 3.0 * 0.25f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn beam_escapes_greedy_trap() {
        let m = model(TRAP);
        let g = greedy_decode(&m, &[], &cfg(1, 3)).unwrap();
        assert_eq!(g.tokens[0], 0);
        let beams = beam_search(&m, &[], &cfg(2, 3)).unwrap();
        assert_eq!(beams[0].tokens, vec![1]);
        assert!((beams[0].logprob - 0.36f64.ln()).abs() < 1e-12);
        assert!(beams[0].score(0.0) > g.logprob);
    }

    #[test]
    fn width_one_is_greedy() {
        for text in [EARLY_EOS, CHAIN, UNIFORM, TRAP] {
            let m = model(text);
            let g = greedy_decode(&m, &[], &cfg(1, 4)).unwrap();
            let b = beam_search(&m, &[], &cfg(1, 4)).unwrap();
            assert_eq!(b.len(), 1);
            assert_eq!(b[0], g);
        }
    }

    #[test]
    fn nbest_is_sorted_and_replays() {
        let m = model(TRAP);
        let beams = beam_search(&m, &[], &cfg(4, 3)).unwrap();
        assert_eq!(beams.len(), 4);
        for w in beams.windows(2) {
            assert!(w[0].logprob >= w[1].logprob);
        }
        for h in &beams {
            assert!((replay_logprob(&m, &[], h) - h.logprob).abs() < 1e-9);
            assert!(h.finished);
        }
    }

    #[test]
    fn full_pool_waits_for_better_live_hypotheses() {
        // after two steps the pool holds [] 0.25 and [a] 0.1875, but the live
        // [a a] 0.5625 still finishes as [a a a] 0.421875
        let m = model(
            r#"
vocab = ["a", "</s>"]
eos = "</s>"
[[row]]
context = []
probs = [0.75, 0.25]
"#,
        );
        let b = beam_search(&m, &[], &cfg(2, 3)).unwrap();
        assert_eq!(b[0].tokens, vec![0, 0, 0]);
        assert!((b[0].logprob - 0.421875f64.ln()).abs() < 1e-12);
        assert_eq!(b[1].tokens, Vec::<usize>::new());
    }

    #[test]
    fn length_penalty_changes_ranking() {
        // [] has 0.5; [a] has 0.5 * 0.9 = 0.45 over two steps
        let m = model(
            r#"
vocab = ["a", "</s>"]
eos = "</s>"
[[row]]
context = []
probs = [0.1, 0.9]
[[row]]
context = ["<s>"]
probs = [0.5, 0.5]
"#,
        );
        let plain = BeamConfig { width: 2, max_len: 3, ..Default::default() };
        let b = beam_search(&m, &[], &plain).unwrap();
        assert!(b[0].tokens.is_empty());
        let penalized = BeamConfig { length_penalty_alpha: 1.0, ..plain };
        let b = beam_search(&m, &[], &penalized).unwrap();
        assert_eq!(b[0].tokens, vec![0]);
        for w in b.windows(2) {
            assert!(w[0].score(1.0) >= w[1].score(1.0));
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let m = model(UNIFORM);
        let c = BeamConfig { seed: 7, max_len: 20, ..Default::default() };
        let a = sample_decode(&m, &[], &c).unwrap();
        let b = sample_decode(&m, &[], &c).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sampling_certain_token() {
        let m = model(CHAIN);
        for seed in 0..50 {
            let c = BeamConfig { seed, max_len: 10, ..Default::default() };
            let h = sample_decode(&m, &[], &c).unwrap();
            assert_eq!(h.tokens, vec![0, 1]);
        }
    }

    #[test]
    fn sampling_frequency_matches_distribution() {
        let m = model(UNIFORM);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let state = m.initial_state(&[]);
        let lp = m.log_probs(&state);
        let n = 100_000;
        let hits = (0..n)
            .filter(|_| sample_token(&lp, &mut rng) == Some(0))
            .count();
        let freq = hits as f64 / n as f64;
        assert!((freq - 0.25).abs() < 0.01, "{freq}");
    }

    #[test]
    fn invalid_config_rejected() {
        let m = model(UNIFORM);
        assert!(beam_search(&m, &[], &cfg(0, 3)).is_err());
        assert!(greedy_decode(&m, &[], &cfg(1, 0)).is_err());
    }
}
