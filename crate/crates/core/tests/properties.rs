use std::collections::BTreeSet;

use proptest::prelude::*;

use phonexl_core::corpus::{pool_subtokens, AlignedExample, Vocabulary, Word};
use phonexl_core::dictionary::{code_switch, BilingualDictionary, Translation};
use phonexl_core::metrics::ner_score;
use phonexl_core::objectives::{alignment_loss, crf_nll, CrfParams};
use phonexl_core::rng::{stream, Stream};
use phonexl_core::transcription::{decompose_hangul, latin_to_ipa, HangulJamo, PhonemeString, Stage, TableSet};
use phonexl_core::{Lang, Matrix};

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-3.0..3.0f64, rows * cols).prop_map(move |v| Matrix::from_vec(rows, cols, v))
}

fn sized_matrix(rows: std::ops::RangeInclusive<usize>, cols: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Matrix> {
    (rows, cols).prop_flat_map(|(r, c)| matrix(r, c))
}

proptest! {
    #[test]
    fn hangul_syllables_round_trip(c in 0xAC00u32..=0xD7A3) {
        let c = char::from_u32(c).unwrap();
        prop_assert_eq!(decompose_hangul(c).unwrap().compose(), c);
    }

    #[test]
    fn jamo_compose_then_decompose(lead in 0u8..19, vowel in 0u8..21, tail in 0u8..28) {
        let j = HangulJamo::new(lead, vowel, tail).unwrap();
        prop_assert_eq!(decompose_hangul(j.compose()).unwrap(), j);
    }

    #[test]
    fn latin_to_ipa_is_total_on_lowercase(word in "[a-z]{1,12}") {
        let tables = TableSet::bundled();
        for lang in [Lang::ja(), Lang::ko()] {
            let table = tables.get(&lang, Stage::LatinToIpa).unwrap();
            let ipa = latin_to_ipa(&word, table).unwrap();
            prop_assert!(!ipa.is_empty());
            prop_assert!(ipa.is_valid_ipa());
        }
    }

    #[test]
    fn hangul_words_transcribe(word in prop::collection::vec(0xAC00u32..=0xD7A3, 1..5)) {
        let word: String = word.into_iter().filter_map(char::from_u32).collect();
        let ipa = TableSet::bundled().to_ipa(&word, &Lang::ko()).unwrap();
        prop_assert!(!ipa.is_empty());
    }

    #[test]
    fn vocabulary_extension_keeps_ids(
        base in prop::collection::btree_set("[a-z]{1,3}", 1..20),
        extra in prop::collection::vec("[a-zɕŋəɯ]{1,2}", 0..20),
    ) {
        let v = Vocabulary::from_entries(base.iter().map(String::as_str));
        let e = v.extend(extra.iter().map(String::as_str));
        for (i, s) in v.entries().iter().enumerate() {
            prop_assert_eq!(e.id(s), Some(i as u32));
        }
        for s in &extra {
            prop_assert!(e.contains(s));
        }
        let fresh: BTreeSet<&str> = extra.iter().map(String::as_str).filter(|s| !v.contains(s)).collect();
        prop_assert_eq!(e.len(), v.len() + fresh.len());
        prop_assert_eq!(&e.extend(extra.iter().map(String::as_str)), &e);
        prop_assert_eq!(Vocabulary::parse(&e.to_text()).unwrap(), e);
    }

    #[test]
    fn surface_encoding_is_total(surface in "\\PC{1,12}") {
        let v = Vocabulary::from_entries(["a", "ab", "电", "子", "ng"]);
        let ids = v.encode_surface(&surface);
        prop_assert!(!ids.is_empty());
        prop_assert!(ids.len() <= surface.chars().count());
        prop_assert!(ids.iter().all(|&i| (i as usize) < v.len()));
    }

    #[test]
    fn pooling_is_linear(
        counts in prop::collection::vec(1usize..4, 1..5),
        a in -2.0..2.0f64,
        b in -2.0..2.0f64,
        seed in any::<u64>(),
    ) {
        let map: Vec<usize> = counts.iter().enumerate().flat_map(|(m, &n)| std::iter::repeat_n(m, n)).collect();
        let mut r = stream(seed, Stream::Synthetic, &[]);
        let mut random = || {
            use rand::Rng as _;
            Matrix::from_vec(map.len(), 3, (0..map.len() * 3).map(|_| r.random_range(-1.0..1.0)).collect())
        };
        let (x, y) = (random(), random());
        let mut mix = x.scaled(a);
        mix.add_scaled(&y, b);
        let lhs = pool_subtokens(&mix, &map).unwrap();
        let mut rhs = pool_subtokens(&x, &map).unwrap().scaled(a);
        rhs.add_scaled(&pool_subtokens(&y, &map).unwrap(), b);
        prop_assert_eq!(lhs.shape(), (counts.len(), 3));
        for (l, r) in lhs.data().iter().zip(rhs.data()) {
            prop_assert!((l - r).abs() <= 1e-12);
        }
    }

    #[test]
    fn code_switch_keeps_labels_and_length(
        words in prop::collection::vec(("[a-d]{1,2}", 0usize..3), 1..10),
        r in 0.0..=1.0f64,
        seed in any::<u64>(),
    ) {
        let src = Lang::zh();
        let labels = ["O", "B-PER", "I-PER"];
        let ex = AlignedExample::new(
            src.clone(),
            words
                .iter()
                .map(|(s, l)| Word::new(s.as_str(), PhonemeString::from_segments(["a"]), Some(labels[*l].into()), src.clone()))
                .collect(),
        );
        let mut dict = BilingualDictionary::new();
        for s in ["a", "b", "ab", "cd"] {
            for t in ["x", "yy"] {
                dict.insert(s, Translation {
                    surface: format!("{s}{t}"),
                    ipa: PhonemeString::from_segments(["t"]),
                    lang: Lang::vi(),
                });
            }
        }
        let (out, plan) = code_switch(&ex, &dict, r, &mut stream(seed, Stream::CodeSwitch, &[]));
        prop_assert_eq!(out.len(), ex.len());
        for (i, (a, b)) in ex.words().iter().zip(out.words()).enumerate() {
            prop_assert_eq!(&a.label, &b.label);
            if plan.positions.contains(&i) {
                prop_assert_eq!(&b.lang, &Lang::vi());
                prop_assert!(dict.get(&a.surface).unwrap().iter().any(|t| t.surface == b.surface));
            } else {
                prop_assert_eq!(a, b);
            }
        }
        prop_assert_eq!(plan.covered, ex.words().iter().filter(|w| dict.contains(&w.surface)).count());
        prop_assert!(plan.positions.len() <= plan.covered);
    }

    #[test]
    fn alignment_ignores_scale_and_joint_order(
        (o, p) in (2usize..6, 2usize..6).prop_flat_map(|(m, d)| (matrix(m, d), matrix(m, d))),
        scale in 0.1..10.0f64,
        tau in 0.5..30.0f64,
        rot in 0usize..6,
    ) {
        prop_assume!((0..o.rows()).all(|r| o.row(r).iter().any(|x| x.abs() > 1e-3)));
        prop_assume!((0..p.rows()).all(|r| p.row(r).iter().any(|x| x.abs() > 1e-3)));
        let base = alignment_loss(&o, &p, tau).unwrap();
        prop_assert!(base >= 0.0);
        let scaled = alignment_loss(&o.scaled(scale), &p, tau).unwrap();
        prop_assert!((scaled - base).abs() <= 1e-9 * base.max(1.0));
        let m = o.rows();
        let rotate = |x: &Matrix| {
            let mut y = Matrix::zeros(m, x.cols());
            for i in 0..m {
                y.row_mut(i).copy_from_slice(x.row((i + rot) % m));
            }
            y
        };
        let rotated = alignment_loss(&rotate(&o), &rotate(&p), tau).unwrap();
        prop_assert!((rotated - base).abs() <= 1e-9 * base.max(1.0));
    }

    #[test]
    fn crf_probabilities_sum_to_one(
        em in sized_matrix(1..=4, 1..=3),
        seed in any::<u64>(),
    ) {
        use rand::Rng as _;
        let (m, k) = em.shape();
        let mut r = stream(seed, Stream::GradCheck, &[]);
        let crf = CrfParams {
            transitions: Matrix::from_vec(k, k, (0..k * k).map(|_| r.random_range(-2.0..2.0)).collect()),
            start: (0..k).map(|_| r.random_range(-2.0..2.0)).collect(),
            stop: (0..k).map(|_| r.random_range(-2.0..2.0)).collect(),
        };
        let mut total = 0.0;
        for code in 0..k.pow(m as u32) {
            let path: Vec<usize> = (0..m).map(|i| code / k.pow(i as u32) % k).collect();
            let nll = crf_nll(&em, &path, &crf);
            prop_assert!(nll >= -1e-12);
            total += (-nll).exp();
        }
        prop_assert!((total - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn ner_score_matches_span_oracle(
        pairs in prop::collection::vec(
            (1usize..8).prop_flat_map(|n| (prop::collection::vec(0usize..5, n), prop::collection::vec(0usize..5, n))),
            1..6,
        ),
    ) {
        const TAGS: [&str; 5] = ["O", "B-PER", "I-PER", "B-LOC", "I-LOC"];
        let gold: Vec<Vec<&str>> = pairs.iter().map(|(g, _)| g.iter().map(|&i| TAGS[i]).collect()).collect();
        let pred: Vec<Vec<&str>> = pairs.iter().map(|(_, p)| p.iter().map(|&i| TAGS[i]).collect()).collect();
        let (mut tp, mut np, mut ng) = (0usize, 0usize, 0usize);
        for (g, p) in gold.iter().zip(&pred) {
            let gs = oracle_spans(g);
            let ps = oracle_spans(p);
            tp += ps.intersection(&gs).count();
            np += ps.len();
            ng += gs.len();
        }
        let want = if np == 0 && ng == 0 {
            100.0
        } else {
            let prec = if np == 0 { 0.0 } else { tp as f64 / np as f64 };
            let rec = if ng == 0 { 0.0 } else { tp as f64 / ng as f64 };
            if prec + rec == 0.0 { 0.0 } else { 200.0 * prec * rec / (prec + rec) }
        };
        let got = ner_score(&gold, &pred).f1;
        prop_assert!((got - want).abs() <= 1e-9, "got {} want {}", got, want);
    }
}

/// Spans as (start, end, type): a span starts at `B-X`, or at an `I-X`
/// whose predecessor is not of type X, and runs over the following `I-X`.
fn oracle_spans(tags: &[&str]) -> BTreeSet<(usize, usize, String)> {
    let kind = |t: &str| t.get(2..).filter(|_| t.starts_with("B-") || t.starts_with("I-")).map(str::to_string);
    let mut out = BTreeSet::new();
    for i in 0..tags.len() {
        let Some(k) = kind(tags[i]) else { continue };
        let starts = tags[i].starts_with("B-") || i == 0 || kind(tags[i - 1]).as_deref() != Some(k.as_str());
        if !starts {
            continue;
        }
        let mut end = i + 1;
        while end < tags.len() && tags[end] == format!("I-{k}") {
            end += 1;
        }
        out.insert((i, end, k));
    }
    out
}
