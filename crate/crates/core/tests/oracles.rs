use phonexl_core::corpus::{parse_dataset, write_dataset, AlignedExample, Role, TagSet, Vocabulary, Word};
use phonexl_core::dictionary::build_pivot_dictionary;
use phonexl_core::nnet::{EmbedFlags, EncoderConfig, Model};
use phonexl_core::objectives::{
    alignment_loss, crf_decode, crf_nll, mlm_loss, total_loss, Components, CrfParams, LossContext, LossWeights,
    MaskPlan,
};
use phonexl_core::rng::{stream, Stream};
use phonexl_core::transcription::{Mode, PhonemeString, TableSet};
use phonexl_core::{Lang, Matrix};

const PHRASES_RAW: &str = include_str!("data/phrases.tsv");
const PHRASES_IPA: &str = include_str!("data/phrases.ipa.tsv");

fn uniform(seed: u64, rows: usize, cols: usize) -> Matrix {
    use rand::Rng as _;
    let mut r = stream(seed, Stream::Synthetic, &[rows as u64, cols as u64]);
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| r.random_range(-2.0..2.0)).collect())
}

fn transcribe_by_lang(tables: &TableSet, d: &phonexl_core::corpus::Dataset) -> phonexl_core::corpus::Dataset {
    let mut out = d.clone();
    for ex in out.examples_mut() {
        for w in ex.words_mut() {
            w.ipa = tables.to_ipa(&w.surface, &w.lang.clone()).unwrap();
        }
    }
    out
}

#[test]
fn demonstration_phrases_golden_file() {
    let tags = TagSet::new(["O"]);
    let raw = parse_dataset(PHRASES_RAW, &tags, Role::Test).unwrap();
    assert_eq!(raw.len(), 8);
    assert_eq!(raw.word_count(), 16);
    let tables = TableSet::bundled();
    assert_eq!(write_dataset(&transcribe_by_lang(&tables, &raw)), PHRASES_IPA);
    let golden = parse_dataset(PHRASES_IPA, &tags, Role::Test).unwrap();
    let toneless: Vec<String> = golden
        .examples()
        .iter()
        .flat_map(|e| e.words().iter().map(|w| w.ipa.without_tones().render()))
        .collect();
    assert_eq!(toneless[..4], ["tjɛn tsɯ", "xɑŋ jɛ", "koŋ ŋiəp", "diən tɯ"]);
    assert_eq!(toneless[14..], ["bɛtunæm", "tɔŋsɪnsə"]);
}

#[test]
fn transcription_preserves_counts() {
    let text = "# lang = zh\n电子\t_\tB-ORG\n行业\t_\tI-ORG\n\n# lang = zh\n越南\t_\tB-LOC\n";
    let d = parse_dataset(text, &TagSet::ner(), Role::Train).unwrap();
    let t = TableSet::bundled().transcribe_dataset(&d, &Lang::zh(), Mode::Ipa).unwrap();
    assert_eq!((t.len(), t.word_count()), (2, 3));
    assert!(t.examples().iter().flat_map(AlignedExample::words).all(|w| !w.ipa.is_empty()));
    let labels: Vec<_> = t.examples().iter().flat_map(|e| e.words().iter().map(|w| w.label.clone())).collect();
    let before: Vec<_> = d.examples().iter().flat_map(|e| e.words().iter().map(|w| w.label.clone())).collect();
    assert_eq!(labels, before);
}

#[test]
fn pivot_chain_carries_vietnamese_ipa() {
    let src_en = vec![("电子".to_string(), "electronic".to_string())];
    let en_vi = vec![("electronic".to_string(), "điện tử".to_string())];
    let built = build_pivot_dictionary(&src_en, &en_vi, &Lang::vi(), &TableSet::bundled(), Mode::Ipa);
    let entry = &built.dictionary.get("电子").unwrap()[0];
    assert_eq!(entry.ipa.without_tones().render(), "diən tɯ");
    assert_eq!(entry.lang, Lang::vi());
}

#[test]
fn extension_with_phonemes_outside_latin() {
    let v = Vocabulary::from_entries(["a", "b", "ab"]);
    let e = v.extend(["ŋ", "ɕ", "ʑ", "a"]);
    assert_eq!(e.len(), v.len() + 3);
    assert!(v.entries().iter().enumerate().all(|(i, s)| e.id(s) == Some(i as u32)));
}

fn enumerate_paths(m: usize, k: usize) -> Vec<Vec<usize>> {
    (0..k.pow(m as u32))
        .map(|code| (0..m).map(|i| code / k.pow((m - 1 - i) as u32) % k).collect())
        .collect()
}

fn brute_score(em: &Matrix, crf: &CrfParams, path: &[usize]) -> f64 {
    let mut s = crf.start[path[0]] + crf.stop[path[path.len() - 1]];
    for (i, &t) in path.iter().enumerate() {
        s += em.get(i, t) + if i > 0 { crf.transitions.get(path[i - 1], t) } else { 0.0 };
    }
    s
}

fn random_crf(seed: u64, k: usize) -> CrfParams {
    CrfParams {
        transitions: uniform(seed, k, k),
        start: uniform(seed + 1, 1, k).into_vec(),
        stop: uniform(seed + 2, 1, k).into_vec(),
    }
}

#[test]
fn crf_nll_matches_27_path_enumeration() {
    let em = uniform(10, 3, 3);
    let crf = random_crf(11, 3);
    let paths = enumerate_paths(3, 3);
    assert_eq!(paths.len(), 27);
    let log_z = paths.iter().map(|p| brute_score(&em, &crf, p).exp()).sum::<f64>().ln();
    for p in &paths {
        let want = log_z - brute_score(&em, &crf, p);
        assert!((crf_nll(&em, p, &crf) - want).abs() < 1e-10);
    }
}

#[test]
fn crf_decode_matches_enumeration_argmax() {
    for seed in 0..20 {
        let em = uniform(100 + seed, 4, 3);
        let crf = random_crf(200 + seed, 3);
        let best = enumerate_paths(4, 3)
            .into_iter()
            .max_by(|a, b| brute_score(&em, &crf, a).total_cmp(&brute_score(&em, &crf, b)))
            .unwrap();
        assert_eq!(crf_decode(&em, &crf), best);
    }
}

#[test]
fn alignment_matches_independent_softmax() {
    let (o, p) = (uniform(1, 4, 5), uniform(2, 4, 5));
    let tau = 3.7;
    let unit = |m: &Matrix, r: usize| {
        let n = m.row(r).iter().map(|x| x * x).sum::<f64>().sqrt();
        m.row(r).iter().map(|x| x / n).collect::<Vec<_>>()
    };
    let sim = |i: usize, j: usize| tau * unit(&o, i).iter().zip(unit(&p, j)).map(|(a, b)| a * b).sum::<f64>();
    let ce = |logits: Vec<f64>, target: usize| {
        let z: f64 = logits.iter().map(|x| x.exp()).sum();
        -(logits[target].exp() / z).ln()
    };
    let rows: f64 = (0..4).map(|i| ce((0..4).map(|j| sim(i, j)).collect(), i)).sum::<f64>() / 4.0;
    let cols: f64 = (0..4).map(|j| ce((0..4).map(|i| sim(i, j)).collect(), j)).sum::<f64>() / 4.0;
    let got = alignment_loss(&o, &p, tau).unwrap();
    assert!((got - (rows + cols) / 2.0).abs() < 1e-12, "{got} vs {}", (rows + cols) / 2.0);
}

#[test]
fn mlm_two_positions_match_hand_cross_entropy() {
    let hidden = uniform(3, 5, 4);
    let w_tok = uniform(4, 7, 4);
    let bias = uniform(5, 1, 7).into_vec();
    let plan = MaskPlan {
        words: vec![1, 3],
        positions: vec![1, 3],
        originals: vec![6, 2],
    };
    let ce = |pos: usize, target: usize| {
        let logits: Vec<f64> = (0..7)
            .map(|v| hidden.row(pos).iter().zip(w_tok.row(v)).map(|(a, b)| a * b).sum::<f64>() + bias[v])
            .collect();
        let z: f64 = logits.iter().map(|x| x.exp()).sum();
        z.ln() - logits[target]
    };
    let want = (ce(1, 6) + ce(3, 2)) / 2.0;
    assert!((mlm_loss(&hidden, &plan, &w_tok, &bias) - want).abs() < 1e-12);
}

#[test]
fn alignment_only_weight_on_single_word_leaves_task_loss() {
    let zh = Lang::zh();
    let ex = AlignedExample::new(zh.clone(), vec![Word::new(
        "ab",
        PhonemeString::from_segments(["p", "a"]),
        Some("B-PER".into()),
        zh.clone(),
    )]);
    let vocab = Vocabulary::from_entries(["a", "b", "ab"]).extend(["p"]);
    let tags = TagSet::ner();
    let config = EncoderConfig {
        layers: 1,
        heads: 2,
        hidden: 8,
        ff: 16,
        max_positions: 8,
        segments: 1,
        languages: 1,
        ortho_vocab: vocab.len(),
        phone_vocab: vocab.len(),
    };
    let model = Model::new(config, EmbedFlags::default(), tags.len(), 0.3, &mut stream(0, Stream::Init, &[])).unwrap();
    let langs = [zh];
    let ctx = LossContext {
        vocab: &vocab,
        langs: &langs,
        tags: &tags,
        dictionary: None,
    };
    let w = LossWeights {
        lambda_align: 1.0,
        ..LossWeights::TASK_ONLY
    };
    let (b, _) = total_loss(&model, &[&ex], &[0], &w, &ctx, Components::Weighted).unwrap();
    assert_eq!(b.align, 0.0);
    assert_eq!(b.total, b.task);
}

#[test]
fn bundled_weight_presets() {
    let w = LossWeights::PANX_ZH_VI;
    assert_eq!((w.lambda_align, w.beta_mlm, w.gamma_xmlm, w.mu, w.r), (0.01, 0.01, 0.01, 0.20, 0.40));
    let w = LossWeights::UDPOS_JA_KO;
    assert_eq!((w.lambda_align, w.beta_mlm, w.gamma_xmlm, w.mu, w.r), (0.1, 0.01, 0.01, 0.05, 0.3));
}
