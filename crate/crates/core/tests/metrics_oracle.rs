mod common;

use common::*;
use phoneval::corpus::{parse_corpus, write_corpus, LoadOptions};
use phoneval::metrics::{
    bleu_corpus, bleu_sentence, cider_d, edit_distance, lcs_len, per, per_corpus, rouge_l, score_all, Level, Metric,
    MetricConfig,
};
use phoneval::ngram::max_ref_counts;
use phoneval::{ngram_counts, tokenize, EvalItem};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn words(s: &[u8]) -> Vec<String> {
    s.iter().map(|b| (*b as char).to_string()).collect()
}

#[test]
fn edit_distance_matches_recursion_exhaustively() {
    // length 6 runs in the acceptance suite
    let seqs = all_sequences(b"abc", 5);
    for a in &seqs {
        for b in &seqs {
            assert_eq!(edit_distance(a, b), edit_distance_recursive(a, b), "{a:?} {b:?}");
        }
    }
}

#[test]
fn lcs_matches_subsequence_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let short = all_sequences(b"abc", 4);
    for a in &short {
        for b in &short {
            assert_eq!(lcs_len(a, b), lcs_brute_force(a, b));
        }
    }
    use rand::Rng;
    for _ in 0..20_000 {
        let la = rng.gen_range(0..=8);
        let lb = rng.gen_range(0..=8);
        let a: Vec<u8> = (0..la).map(|_| b"abc"[rng.gen_range(0..3)]).collect();
        let b: Vec<u8> = (0..lb).map(|_| b"abc"[rng.gen_range(0..3)]).collect();
        assert_eq!(lcs_len(&a, &b), lcs_brute_force(&a, &b), "{a:?} {b:?}");
    }
}

#[test]
fn clipping_matches_brute_force_exhaustively() {
    let seqs: Vec<Vec<String>> = all_sequences(b"ab", 6).iter().map(|s| words(s)).collect();
    let check = |hyp: &Vec<String>, refs: &[Vec<String>]| {
        for n in 1..=4 {
            let h = ngram_counts(hyp, n).unwrap();
            let ceiling = max_ref_counts(refs.iter().map(|r| r.as_slice()), n).unwrap();
            let (m, total) = clipped_matches_brute_force(hyp, refs, n);
            assert_eq!(h.clipped_matches(&ceiling), m, "{hyp:?} {refs:?} n={n}");
            assert_eq!(h.total(), total);
        }
    };
    for hyp in &seqs {
        for r in &seqs {
            check(hyp, std::slice::from_ref(r));
        }
        // two references: the ceiling is a per-gram max, not a sum
        for (i, r) in seqs.iter().enumerate().step_by(5) {
            check(hyp, &[r.clone(), seqs[(i * 31 + hyp.len()) % seqs.len()].clone()]);
        }
    }
}

#[test]
fn hand_derived_values() {
    let cfg = MetricConfig::default();
    let item = EvalItem::from_strs("x", "a b c d", &["a b c d e"]).unwrap();
    assert!((bleu_sentence(&item, 4, &cfg).unwrap() - 77.880).abs() < 0.01);
    let item = EvalItem::from_strs("x", "a b c", &["a c b"]).unwrap();
    assert!((rouge_l(&item, &cfg) - 66.667).abs() < 0.01);
    let item = EvalItem::from_strs("x", "AH B", &["AH B IY"]).unwrap();
    assert!((per(&item).unwrap() - 1.0 / 3.0).abs() < 1e-4);
}

#[test]
fn identity_corpus_hits_maxima() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let items = identity_corpus(&mut rng, 100, 8, 20, 1);
    let scores = score_all(&items, &MetricConfig::default(), Level::Corpus, &Metric::all()).unwrap();
    let c = &scores.corpus;
    for n in 1..=8u8 {
        assert_eq!(c.get(Metric::Bleu(n)), Some(100.0));
    }
    assert_eq!(c.rouge_l, Some(100.0));
    assert_eq!(c.per, Some(0.0));
    let m = c.meteor.unwrap();
    assert!(m < 100.0 && m > 99.0, "{m}");
    assert!((c.cider_d.unwrap() - 10.0).abs() < 1e-6);
}

#[test]
fn single_item_scores_match_corpus_run() {
    let cfg = MetricConfig::default();
    let items = vec![
        EvalItem::from_strs("1", "a b c d", &["a b c d e", "a c"]).unwrap(),
        EvalItem::from_strs("2", "x y z", &["x z y w"]).unwrap(),
    ];
    let s = score_all(&items, &cfg, Level::Corpus, &Metric::all()).unwrap();
    for (item, got) in items.iter().zip(&s.items) {
        assert_eq!(got.scores.get(Metric::Bleu(4)), Some(bleu_sentence(item, 4, &cfg).unwrap()));
        assert_eq!(got.scores.rouge_l, Some(rouge_l(item, &cfg)));
        assert_eq!(got.scores.per, Some(per(item).unwrap()));
    }
    let (_, mean) = cider_d(&items, &cfg).unwrap();
    assert_eq!(s.corpus.cider_d, Some(mean));
    assert_eq!(s.corpus.per, Some(per_corpus(&items).unwrap()));
    assert_eq!(s.corpus.get(Metric::Bleu(4)), Some(bleu_corpus(&items, &cfg).unwrap()[3]));
}

#[test]
fn corruption_is_monotone() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let base = identity_corpus(&mut rng, 200, 10, 20, 3);
    let perms = deletion_orders(&mut rng, &base);
    let cfg = MetricConfig::default();
    let mut prev: Option<(f64, f64, f64)> = None;
    for rate in [0.0, 0.1, 0.2, 0.3, 0.4, 0.5] {
        let items = corrupted_corpus(&base, &perms, rate);
        let s = score_all(&items, &cfg, Level::Corpus, &[Metric::Bleu(4), Metric::CiderD, Metric::Per]).unwrap();
        let per_mean = s.items.iter().map(|i| i.scores.per.unwrap()).sum::<f64>() / items.len() as f64;
        let cur = (per_mean, s.corpus.get(Metric::Bleu(4)).unwrap(), s.corpus.cider_d.unwrap());
        if let Some(p) = prev {
            assert!(cur.0 > p.0 && cur.1 < p.1 && cur.2 < p.2, "rate {rate}: {p:?} -> {cur:?}");
        }
        prev = Some(cur);
    }
}

fn arb_item() -> impl Strategy<Value = EvalItem> {
    let seq = |min| prop::collection::vec(prop::sample::select(vec!["A", "B", "C", "D", "E"]), min..12);
    (seq(0), prop::collection::vec(seq(1), 1..4)).prop_map(|(h, refs)| {
        let s = |v: Vec<&str>| v.into_iter().map(String::from).collect::<Vec<_>>();
        EvalItem::new("p", s(h), refs.into_iter().map(s).collect()).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn scores_stay_in_bounds(items in prop::collection::vec(arb_item(), 1..6)) {
        let items: Vec<EvalItem> = items
            .iter()
            .enumerate()
            .map(|(i, it)| EvalItem::new(i.to_string(), it.hypothesis().tokens().to_vec(),
                it.references().iter().map(|r| r.tokens().to_vec()).collect()).unwrap())
            .collect();
        for level in [Level::Sentence, Level::Corpus] {
            let s = score_all(&items, &MetricConfig::default(), level, &Metric::all()).unwrap();
            for it in &s.items {
                prop_assert!(it.scores.check_bounds().is_ok(), "{:?}", it.scores);
            }
            prop_assert!(s.corpus.check_bounds().is_ok(), "{:?}", s.corpus);
        }
    }

    #[test]
    fn bleu1_ignores_token_order(item in arb_item(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut toks = item.hypothesis().tokens().to_vec();
        toks.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let shuffled = item.with_hypothesis(toks).unwrap();
        let cfg = MetricConfig::default();
        prop_assert_eq!(bleu_sentence(&item, 1, &cfg).unwrap(), bleu_sentence(&shuffled, 1, &cfg).unwrap());
    }

    #[test]
    fn hyp_equal_to_a_reference_is_perfect(item in arb_item(), pick in 0usize..3) {
        let r = item.references()[pick % item.references().len()].tokens().to_vec();
        let it = item.with_hypothesis(r.clone()).unwrap();
        let cfg = MetricConfig::default();
        prop_assert_eq!(per(&it).unwrap(), 0.0);
        prop_assert_eq!(rouge_l(&it, &cfg), 100.0);
        for n in 1..=r.len().min(8) {
            prop_assert_eq!(bleu_sentence(&it, n, &cfg).unwrap(), 100.0);
        }
    }

    #[test]
    fn corpus_round_trips(items in prop::collection::vec(arb_item(), 1..5)) {
        let items: Vec<EvalItem> = items
            .iter()
            .enumerate()
            .map(|(i, it)| EvalItem::new(format!("i{i}"), it.hypothesis().tokens().to_vec(),
                it.references().iter().map(|r| r.tokens().to_vec()).collect()).unwrap())
            .collect();
        let mut buf = Vec::new();
        write_corpus(&mut buf, &items).unwrap();
        let back = parse_corpus(&buf[..], "mem", LoadOptions { strip_stress: false }).unwrap();
        prop_assert_eq!(back, items);
    }

    #[test]
    fn tokenize_is_idempotent(line in "[A-Z]{1,3}[0-2]?( {1,2}[A-Z]{1,3}[0-2]?){0,8}", strip in any::<bool>()) {
        let once = tokenize(&line, strip);
        let twice = tokenize(&once.join(" "), strip);
        prop_assert_eq!(once, twice);
    }
}
