//! Finite-difference checks of every objective on random small models.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng as _;

use super::{term_loss, total_loss, Components, LossContext, LossWeights, Term};
use crate::corpus::{AlignedExample, TagSet, Vocabulary, Word};
use crate::dictionary::{BilingualDictionary, Translation};
use crate::nnet::{grad_check, EmbedFlags, EncoderConfig, GradCheckOptions, GradCheckReport, Model, Params};
use crate::rng::{stream, Rng, Stream};
use crate::transcription::PhonemeString;
use crate::Lang;

/// What a check covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Checked {
    Term(Term),
    Total,
}

impl Checked {
    pub const ALL: [Checked; 5] = [
        Checked::Term(Term::Task),
        Checked::Term(Term::Align),
        Checked::Term(Term::Mlm),
        Checked::Term(Term::Xmlm),
        Checked::Total,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Checked::Term(t) => t.name(),
            Checked::Total => "total",
        }
    }
}

/// Sizes of the random problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub layers: usize,
    pub heads: usize,
    pub hidden: usize,
    pub tags: usize,
    pub vocab: usize,
    pub sentence_lengths: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub checked: Checked,
    pub problem: Problem,
    pub report: GradCheckReport,
}

const ORTHO: [&str; 6] = ["a", "b", "c", "d", "e", "ab"];
const TARGET: [&str; 4] = ["w", "x", "y", "z"];
const PHONES: [&str; 6] = ["p", "t", "a", "i", "ŋ", "ɕ"];

fn random_word(rng: &mut Rng, letters: &[&str], lang: &Lang, label: Option<String>) -> Word {
    let surface: String = (0..rng.random_range(1..=3))
        .map(|_| letters[rng.random_range(0..letters.len())])
        .collect();
    let ipa = PhonemeString::from_segments((0..rng.random_range(1..=3)).map(|_| PHONES[rng.random_range(0..PHONES.len())]));
    Word::new(surface, ipa, label, lang.clone())
}

struct Fixture {
    model: Model,
    examples: Vec<AlignedExample>,
    vocab: Vocabulary,
    tags: TagSet,
    dictionary: BilingualDictionary,
    langs: Vec<Lang>,
    problem: Problem,
}

fn fixture(seed: u64) -> Fixture {
    let mut rng = stream(seed, Stream::GradCheck, &[1]);
    let src = Lang::new("src").expect("valid tag");
    let tgt = Lang::new("tgt").expect("valid tag");
    let k = rng.random_range(2..=4);
    let tags = TagSet::new(["O", "B-X", "I-X", "B-Y"].into_iter().take(k));
    let heads = rng.random_range(1..=2);
    let hidden = heads * rng.random_range(2..=4) * 2;
    let layers = rng.random_range(1..=2);
    let lengths: Vec<usize> = (0..2).map(|_| rng.random_range(2..=5)).collect();

    let examples: Vec<AlignedExample> = lengths
        .iter()
        .map(|&m| {
            let words = (0..m)
                .map(|_| {
                    let label = tags.tag(rng.random_range(0..k)).into();
                    random_word(&mut rng, &ORTHO[..5], &src, Some(label))
                })
                .collect();
            AlignedExample::new(src.clone(), words)
        })
        .collect();
    let mut dictionary = BilingualDictionary::new();
    for ex in &examples {
        for w in ex.words() {
            let t = random_word(&mut rng, &TARGET, &tgt, None);
            dictionary.insert(w.surface.clone(), Translation {
                surface: t.surface,
                ipa: t.ipa,
                lang: tgt.clone(),
            });
        }
    }
    let vocab = Vocabulary::from_entries(ORTHO.iter().chain(&TARGET).copied()).extend(PHONES);
    let config = EncoderConfig {
        layers,
        heads,
        hidden,
        ff: 2 * hidden,
        max_positions: 16,
        segments: 1,
        languages: 2,
        ortho_vocab: vocab.len(),
        phone_vocab: vocab.len(),
    };
    let mut init = stream(seed, Stream::GradCheck, &[2]);
    let mut model = Model::new(config, EmbedFlags::default(), k, 0.3, &mut init).expect("valid config");
    // move layer-norm and bias parameters off their trivial initial values
    let normal = rand_distr::Normal::new(0.0, 0.3).expect("valid std");
    for t in model.params.tensors_mut() {
        for v in t.data_mut() {
            *v += rand_distr::Distribution::sample(&normal, &mut init);
        }
    }
    let problem = Problem {
        layers,
        heads,
        hidden,
        tags: k,
        vocab: vocab.len(),
        sentence_lengths: lengths,
    };
    Fixture {
        model,
        examples,
        vocab,
        tags,
        dictionary,
        langs: alloc::vec![src, tgt],
        problem,
    }
}

const WEIGHTS: LossWeights = LossWeights {
    lambda_align: 0.7,
    beta_mlm: 0.3,
    gamma_xmlm: 0.5,
    mu: 0.4,
    r: 0.5,
};

/// Checks each term and the weighted total on the random problem drawn
/// from `seed`.
pub fn check_objectives(seed: u64, opts: &GradCheckOptions) -> Vec<CheckResult> {
    let f = fixture(seed);
    let ctx = LossContext {
        vocab: &f.vocab,
        langs: &f.langs,
        tags: &f.tags,
        dictionary: Some(&f.dictionary),
    };
    let refs: Vec<&AlignedExample> = f.examples.iter().collect();
    let seeds: Vec<u64> = (0..refs.len() as u64).map(|i| seed.wrapping_add(i)).collect();
    let mut out = Vec::new();
    for checked in Checked::ALL {
        let mut model = f.model.clone();
        let template = model.clone();
        let loss = |p: &Params| {
            let m = Model {
                params: p.clone(),
                ..template.clone()
            };
            let r = match checked {
                Checked::Term(t) => term_loss(&m, &refs, &seeds, &WEIGHTS, &ctx, t),
                Checked::Total => {
                    total_loss(&m, &refs, &seeds, &WEIGHTS, &ctx, Components::All).map(|(b, g)| (b.total, g))
                }
            };
            r.unwrap_or_else(|e| panic!("{}: {e}", checked.name()))
        };
        let report = grad_check(loss, &mut model.params, opts);
        out.push(CheckResult {
            checked,
            problem: f.problem.clone(),
            report,
        });
    }
    out
}

impl core::fmt::Display for CheckResult {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let p = &self.problem;
        let sizes = format!(
            "L={} H={} D={} K={} V={} M={:?}",
            p.layers, p.heads, p.hidden, p.tags, p.vocab, p.sentence_lengths
        );
        write!(f, "{:<6} {sizes}\n{}", self.checked.name(), self.report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_objectives_pass() {
        for r in check_objectives(11, &GradCheckOptions::default()) {
            assert!(r.report.passed(), "{r}");
            assert!(r.report.coordinates() >= 200);
        }
    }
}
