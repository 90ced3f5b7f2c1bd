mod common;

use common::{enumerate_sequences, exhaustive_best};
use phoneval::decode::{beam_search, greedy_decode, replay_logprob, sample_decode, BeamConfig, ToyModel};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn cfg(width: usize, max_len: usize) -> BeamConfig {
    BeamConfig {
        width,
        max_len,
        ..Default::default()
    }
}

#[test]
fn enumeration_is_a_distribution() {
    // terminal sequences partition the probability mass
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let m = ToyModel::random(&mut rng, 3, 2);
    let total: f64 = enumerate_sequences(&m, &[], 4).iter().map(|e| e.logprob.exp()).sum();
    assert!((total - 1.0).abs() < 1e-9, "{total}");
}

#[test]
fn full_width_beam_matches_exhaustive_argmax() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..150 {
        let vocab = 2 + case % 3;
        let max_len = 1 + case % 5;
        let m = ToyModel::random(&mut rng, vocab, case % 3);
        let width = vocab.pow(max_len as u32);
        let beams = beam_search(&m, &[], &cfg(width, max_len)).unwrap();
        let best = exhaustive_best(&m, &[], max_len);
        assert_eq!(beams[0].tokens, best.tokens, "case {case}");
        assert!((beams[0].logprob - best.logprob).abs() < 1e-9);
    }
}

#[test]
fn nbest_scores_replay_through_model() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..50 {
        let m = ToyModel::random(&mut rng, 4, 2);
        let beams = beam_search(&m, &[0], &cfg(4, 5)).unwrap();
        for w in beams.windows(2) {
            assert!(w[0].logprob >= w[1].logprob);
        }
        for h in &beams {
            assert!(h.logprob <= 0.0);
            assert!((replay_logprob(&m, &[0], h) - h.logprob).abs() < 1e-9);
        }
        let g = greedy_decode(&m, &[0], &cfg(1, 5)).unwrap();
        assert!((replay_logprob(&m, &[0], &g) - g.logprob).abs() < 1e-9);
        let s = sample_decode(&m, &[0], &cfg(1, 5)).unwrap();
        assert!((replay_logprob(&m, &[0], &s) - s.logprob).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(3000))]

    #[test]
    fn width_one_equals_greedy(seed in any::<u64>(), vocab in 2usize..6, order in 0usize..3, max_len in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = ToyModel::random(&mut rng, vocab, order);
        let g = greedy_decode(&m, &[], &cfg(1, max_len)).unwrap();
        let b = beam_search(&m, &[], &cfg(1, max_len)).unwrap();
        prop_assert_eq!(b.len(), 1);
        prop_assert_eq!(&b[0], &g);
    }

    // Fails on rare models: a wider beam can prune the greedy path when a
    // second live hypothesis has two children that both outscore its
    // continuation (minimal case in the regressions file). Run with --ignored.
    #[test]
    #[ignore = "beam search is not width-monotone on every model"]
    fn top1_score_non_decreasing_in_width(seed in any::<u64>(), vocab in 2usize..5, order in 0usize..3, max_len in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = ToyModel::random(&mut rng, vocab, order);
        let mut prev = f64::NEG_INFINITY;
        for width in 1..=6 {
            let top = beam_search(&m, &[], &cfg(width, max_len)).unwrap()[0].logprob;
            prop_assert!(top >= prev - 1e-12, "width {} top {} < {}", width, top, prev);
            prev = top;
        }
    }

    #[test]
    fn sampling_repeats_under_seed(seed in any::<u64>(), model_seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(model_seed);
        let m = ToyModel::random(&mut rng, 4, 2);
        let c = BeamConfig { seed, max_len: 12, ..Default::default() };
        prop_assert_eq!(sample_decode(&m, &[], &c).unwrap(), sample_decode(&m, &[], &c).unwrap());
    }
}
