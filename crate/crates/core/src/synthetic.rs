//! A seeded pair of artificial languages for desk-scale transfer runs.
//!
//! Both languages draw words from one shared syllable inventory. The source
//! writes syllable `i` as U+4E00+i, the target as the Yi syllable U+A000+i,
//! so no surface is shared. The target pronounces one onset differently
//! (a single systematic substitution) and about one multi-syllable word in
//! ten has one vowel shifted. Each language has its own romanization
//! convention, chosen so that Latin letters are a much noisier bridge than
//! IPA segments.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::{index, IndexedRandom};
use rand::Rng as _;

use crate::corpus::{AlignedExample, Dataset, Role, TagSet, Word};
use crate::metrics::Task;
use crate::rng::{stream, Rng, Stream};
use crate::transcription::PhonemeString;
use crate::Lang;

const ONSETS: [&str; 16] = [
    "p", "t", "k", "b", "d", "g", "m", "n", "s", "ʃ", "l", "h", "w", "j", "ts", "tɕ",
];
const VOWELS: [&str; 8] = ["a", "e", "i", "o", "u", "ɛ", "ɔ", "ə"];
const CODAS: [&str; 4] = ["", "n", "ŋ", "l"];
const SYLLABLES: usize = ONSETS.len() * VOWELS.len() * CODAS.len();

const SOURCE_BASE: u32 = 0x4E00;
const TARGET_BASE: u32 = 0xA000;

/// Candidate sound changes; the seed picks one.
const SUBSTITUTIONS: [(&str, &str); 4] = [("s", "θ"), ("b", "β"), ("d", "ð"), ("ts", "tθ")];

const PERTURB_RATE: f64 = 0.1;

fn source_roman(seg: &str) -> &'static str {
    match seg {
        "p" => "p",
        "t" => "t",
        "k" => "k",
        "b" => "b",
        "d" => "d",
        "g" => "g",
        "m" => "m",
        "n" => "n",
        "s" => "s",
        "ʃ" => "sh",
        "l" => "l",
        "h" => "h",
        "w" => "w",
        "j" => "y",
        "ts" => "z",
        "tɕ" => "j",
        "a" => "a",
        "e" => "e",
        "i" => "i",
        "o" => "o",
        "u" => "u",
        "ɛ" => "eh",
        "ɔ" => "aw",
        "ə" => "eu",
        "ŋ" => "ng",
        "θ" => "th",
        "β" => "v",
        "ð" => "dh",
        "tθ" => "tth",
        other => unreachable!("no romanization for {other}"),
    }
}

fn target_roman(seg: &str) -> &'static str {
    match seg {
        "p" => "ph",
        "t" => "th",
        "k" => "kh",
        "b" => "p",
        "d" => "t",
        "g" => "k",
        "m" => "m",
        "n" => "n",
        "s" => "ss",
        "ʃ" => "x",
        "l" => "r",
        "h" => "h",
        "w" => "v",
        "j" => "j",
        "ts" => "c",
        "tɕ" => "q",
        "a" => "a",
        "e" => "ei",
        "i" => "ee",
        "o" => "ou",
        "u" => "oo",
        "ɛ" => "e",
        "ɔ" => "o",
        "ə" => "ue",
        "ŋ" => "nk",
        "θ" => "s",
        "β" => "bh",
        "ð" => "z",
        "tθ" => "ts",
        other => unreachable!("no romanization for {other}"),
    }
}

fn syllable_parts(i: usize) -> [&'static str; 3] {
    let coda = i % CODAS.len();
    let vowel = (i / CODAS.len()) % VOWELS.len();
    let onset = i / (CODAS.len() * VOWELS.len());
    [ONSETS[onset], VOWELS[vowel], CODAS[coda]]
}

fn syllable_index(onset: usize, vowel: usize, coda: usize) -> usize {
    (onset * VOWELS.len() + vowel) * CODAS.len() + coda
}

/// Lexical classes with their tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum WordClass {
    Given,
    Family,
    Place,
    Org,
    OrgSuffix,
    Noun,
    Verb,
    Adj,
    Adp,
    Det,
    Pron,
    Adv,
    Num,
    Cconj,
    Part,
}

impl WordClass {
    const ALL: [WordClass; 15] = [
        WordClass::Given,
        WordClass::Family,
        WordClass::Place,
        WordClass::Org,
        WordClass::OrgSuffix,
        WordClass::Noun,
        WordClass::Verb,
        WordClass::Adj,
        WordClass::Adp,
        WordClass::Det,
        WordClass::Pron,
        WordClass::Adv,
        WordClass::Num,
        WordClass::Cconj,
        WordClass::Part,
    ];

    pub fn pos(self) -> &'static str {
        match self {
            WordClass::Given | WordClass::Family | WordClass::Place | WordClass::Org | WordClass::OrgSuffix => {
                "PROPN"
            }
            WordClass::Noun => "NOUN",
            WordClass::Verb => "VERB",
            WordClass::Adj => "ADJ",
            WordClass::Adp => "ADP",
            WordClass::Det => "DET",
            WordClass::Pron => "PRON",
            WordClass::Adv => "ADV",
            WordClass::Num => "NUM",
            WordClass::Cconj => "CCONJ",
            WordClass::Part => "PART",
        }
    }

    fn name(self) -> &'static str {
        match self {
            WordClass::Given => "given",
            WordClass::Family => "family",
            WordClass::Place => "place",
            WordClass::Org => "org",
            WordClass::OrgSuffix => "orgsuffix",
            WordClass::Noun => "noun",
            WordClass::Verb => "verb",
            WordClass::Adj => "adj",
            WordClass::Adp => "adp",
            WordClass::Det => "det",
            WordClass::Pron => "pron",
            WordClass::Adv => "adv",
            WordClass::Num => "num",
            WordClass::Cconj => "cconj",
            WordClass::Part => "part",
        }
    }

    fn size(self) -> usize {
        match self {
            WordClass::Given => 30,
            WordClass::Family => 20,
            WordClass::Place => 40,
            WordClass::Org => 30,
            WordClass::OrgSuffix => 3,
            WordClass::Noun => 80,
            WordClass::Verb => 50,
            WordClass::Adj => 30,
            WordClass::Adp => 8,
            WordClass::Det => 5,
            WordClass::Pron => 6,
            WordClass::Adv => 15,
            WordClass::Num => 10,
            WordClass::Cconj => 3,
            WordClass::Part => 3,
        }
    }

    fn syllables(self) -> (usize, usize) {
        match self {
            WordClass::Adp | WordClass::Det | WordClass::Pron | WordClass::Cconj | WordClass::Part => (1, 1),
            WordClass::Num | WordClass::OrgSuffix => (1, 2),
            _ => (2, 3),
        }
    }
}

/// Entity-bearing or plain slot of a sentence template.
#[derive(Debug, Clone, Copy)]
enum Slot {
    Person,
    Place,
    Org,
    Plain(WordClass),
}

const TEMPLATES: [&[Slot]; 8] = {
    use Slot::*;
    use WordClass as W;
    [
        &[Person, Plain(W::Verb), Plain(W::Det), Plain(W::Noun), Plain(W::Adp), Place],
        &[Org, Plain(W::Verb), Plain(W::Adj), Plain(W::Noun), Plain(W::Part)],
        &[Plain(W::Pron), Plain(W::Adv), Plain(W::Verb), Plain(W::Adp), Place],
        &[Plain(W::Det), Plain(W::Adj), Plain(W::Noun), Plain(W::Adp), Org, Plain(W::Verb), Person],
        &[Person, Plain(W::Cconj), Person, Plain(W::Verb), Plain(W::Num), Plain(W::Noun)],
        &[Plain(W::Adp), Place, Plain(W::Pron), Plain(W::Verb), Plain(W::Det), Plain(W::Noun)],
        &[Place, Plain(W::Noun), Plain(W::Verb), Plain(W::Adv)],
        &[Person, Plain(W::Verb), Plain(W::Adp), Org, Plain(W::Adp), Place, Plain(W::Part)],
    ]
};

/// One lexeme in both languages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexEntry {
    pub class: WordClass,
    /// English pivot gloss, e.g. `noun007`.
    pub gloss: String,
    pub source: String,
    pub target: String,
    pub source_ipa: PhonemeString,
    pub target_ipa: PhonemeString,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub seed: u64,
    /// Labelled source training sentences.
    pub train: usize,
    /// Sentences in each dev and test split.
    pub eval: usize,
    /// Fraction of the lexicon with a pivot translation.
    pub coverage: f64,
}

impl SyntheticSpec {
    pub const MIN_TRAIN: usize = 200;

    pub fn new(seed: u64, train: usize) -> Self {
        SyntheticSpec {
            seed,
            train,
            eval: (train / 5).max(50),
            coverage: 0.4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SyntheticError {
    #[error("at least {min} training sentences are needed, got {got}")]
    TooSmall { min: usize, got: usize },
    #[error("coverage must lie in [0, 1]")]
    Coverage,
}

/// A generated corpus with its canonical file name.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub file_name: String,
    pub lang: Lang,
    pub task: Option<Task>,
    pub dataset: Dataset,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticBenchmark {
    pub source: Lang,
    pub target: Lang,
    /// The target's sound change, `(source segment, target segment)`.
    pub substitution: (String, String),
    pub lexicon: Vec<LexEntry>,
    /// `(file name, text)` pairs loadable with `TableSet::load_named`.
    pub tables: Vec<(String, String)>,
    pub corpora: Vec<SyntheticCorpus>,
    /// MUSE-style `source gloss` lines.
    pub source_en: String,
    /// MUSE-style `gloss target` lines for the covered part of the lexicon.
    pub en_target: String,
}

impl SyntheticBenchmark {
    pub const SOURCE_EN: &'static str = "syn-src-en.txt";
    pub const EN_TARGET: &'static str = "en-syn-tgt.txt";

    pub fn corpus(&self, file_name: &str) -> Option<&SyntheticCorpus> {
        self.corpora.iter().find(|c| c.file_name == file_name)
    }

    /// Every output file as `(name, text)`, in a fixed order.
    pub fn files(&self) -> Vec<(String, String)> {
        let mut out = self.tables.clone();
        for c in &self.corpora {
            out.push((c.file_name.clone(), crate::corpus::write_dataset(&c.dataset)));
        }
        out.push((Self::SOURCE_EN.into(), self.source_en.clone()));
        out.push((Self::EN_TARGET.into(), self.en_target.clone()));
        out
    }
}

/// Corpus file name: `<lang>.<split>.<task>.tsv`, or `<lang>.raw.tsv` for
/// unlabelled text.
pub fn corpus_file_name(lang: &Lang, split: &str, task: Option<Task>) -> String {
    match task {
        Some(t) => format!("{lang}.{split}.{t}.tsv"),
        None => format!("{lang}.{split}.tsv"),
    }
}

/// Fraction of segments two forms share: longest common subsequence over
/// the longer length.
pub fn segment_overlap(a: &PhonemeString, b: &PhonemeString) -> f64 {
    let (a, b) = (a.segments(), b.segments());
    let n = a.len().max(b.len());
    if n == 0 {
        return 1.0;
    }
    let mut prev = alloc::vec![0usize; b.len() + 1];
    for x in a {
        let mut cur = alloc::vec![0usize; b.len() + 1];
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        prev = cur;
    }
    prev[b.len()] as f64 / n as f64
}

struct Generator {
    source: Lang,
    target: Lang,
    subst: (&'static str, &'static str),
}

impl Generator {
    fn segments(&self, syllable: usize, target: bool) -> Vec<&'static str> {
        syllable_parts(syllable)
            .into_iter()
            .filter(|s| !s.is_empty())
            .map(|s| if target && s == self.subst.0 { self.subst.1 } else { s })
            .collect()
    }

    fn ipa(&self, syllables: &[usize], target: bool) -> PhonemeString {
        PhonemeString::from_segments(syllables.iter().flat_map(|&s| self.segments(s, target)))
    }

    fn roman(&self, syllable: usize, target: bool) -> String {
        let f = if target { target_roman } else { source_roman };
        self.segments(syllable, target).into_iter().map(f).collect()
    }

    fn tables(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for (lang, target, base) in [(&self.source, false, SOURCE_BASE), (&self.target, true, TARGET_BASE)] {
            let mut ipa = format!("# {lang}: syllable character -> IPA segments\n");
            let mut roman = format!("# {lang}: syllable character -> romanization\n");
            for s in 0..SYLLABLES {
                let c = char::from_u32(base + s as u32).expect("syllable codepoint");
                ipa.push_str(&format!("{c}\t{}\n", self.segments(s, target).join(" ")));
                roman.push_str(&format!("{c}\t{}\n", self.roman(s, target)));
            }
            out.push((format!("{lang}.ipa.tsv"), ipa));
            out.push((format!("{lang}.roman.tsv"), roman));
        }
        out
    }
}

fn spell(syllables: &[usize], base: u32) -> String {
    syllables
        .iter()
        .map(|&s| char::from_u32(base + s as u32).expect("syllable codepoint"))
        .collect()
}

// shifts one vowel of a multi-syllable word, keeping the form unused
fn perturb(syllables: &[usize], used: &BTreeSet<Vec<usize>>, rng: &mut Rng) -> Option<Vec<usize>> {
    for _ in 0..8 {
        let k = rng.random_range(0..syllables.len());
        let s = syllables[k];
        let coda = s % CODAS.len();
        let vowel = (s / CODAS.len()) % VOWELS.len();
        let onset = s / (CODAS.len() * VOWELS.len());
        let shift = rng.random_range(1..VOWELS.len());
        let mut out = syllables.to_vec();
        out[k] = syllable_index(onset, (vowel + shift) % VOWELS.len(), coda);
        if !used.contains(&out) {
            return Some(out);
        }
    }
    None
}

/// Source and target syllable sequences per lexeme.
type Forms = Vec<(WordClass, Vec<usize>, Vec<usize>)>;

fn draw_lexicon(rng: &mut Rng) -> Forms {
    let mut used_src = BTreeSet::new();
    let mut used_tgt = BTreeSet::new();
    let mut out = Vec::new();
    for class in WordClass::ALL {
        let (lo, hi) = class.syllables();
        let mut made = 0;
        while made < class.size() {
            let n = rng.random_range(lo..=hi);
            let src: Vec<usize> = (0..n).map(|_| rng.random_range(0..SYLLABLES)).collect();
            if used_src.contains(&src) || used_tgt.contains(&src) {
                continue;
            }
            let mut tgt = src.clone();
            if n >= 2 && rng.random_bool(PERTURB_RATE) {
                let mut taken = used_tgt.clone();
                taken.insert(src.clone());
                if let Some(p) = perturb(&src, &taken, rng) {
                    tgt = p;
                }
            }
            used_src.insert(src.clone());
            used_tgt.insert(tgt.clone());
            out.push((class, src, tgt));
            made += 1;
        }
    }
    out
}

/// One generated sentence: lexicon indices with NER and POS tags.
type Sentence = Vec<(usize, &'static str, &'static str)>;

fn draw_sentence(by_class: &BTreeMap<WordClass, Vec<usize>>, rng: &mut Rng) -> Sentence {
    let pick = |c: WordClass, rng: &mut Rng| *by_class[&c].choose(rng).expect("non-empty class");
    let template = TEMPLATES[rng.random_range(0..TEMPLATES.len())];
    let mut out = Vec::new();
    for slot in template {
        match *slot {
            Slot::Person => {
                out.push((pick(WordClass::Given, rng), "B-PER", "PROPN"));
                if rng.random_bool(0.5) {
                    out.push((pick(WordClass::Family, rng), "I-PER", "PROPN"));
                }
            }
            Slot::Place => out.push((pick(WordClass::Place, rng), "B-LOC", "PROPN")),
            Slot::Org => {
                out.push((pick(WordClass::Org, rng), "B-ORG", "PROPN"));
                if rng.random_bool(0.5) {
                    out.push((pick(WordClass::OrgSuffix, rng), "I-ORG", "PROPN"));
                }
            }
            Slot::Plain(c) => out.push((pick(c, rng), "O", c.pos())),
        }
    }
    out
}

fn render(
    sentences: &[Sentence],
    lexicon: &[LexEntry],
    lang: &Lang,
    target: bool,
    task: Option<Task>,
    role: Role,
) -> Dataset {
    let tags = task.map_or_else(TagSet::ner, Task::default_tags);
    let examples = sentences
        .iter()
        .map(|s| {
            let words = s
                .iter()
                .map(|&(i, ner, pos)| {
                    let e = &lexicon[i];
                    let (surface, ipa) = if target {
                        (&e.target, &e.target_ipa)
                    } else {
                        (&e.source, &e.source_ipa)
                    };
                    let label = match task {
                        Some(Task::Ner) => Some(ner.to_string()),
                        Some(Task::Pos) => Some(pos.to_string()),
                        None => None,
                    };
                    Word::new(surface.clone(), ipa.clone(), label, lang.clone())
                })
                .collect();
            AlignedExample::new(lang.clone(), words)
        })
        .collect();
    Dataset::new(examples, role, tags)
}

/// Generates the benchmark. Identical specs give identical output.
///
/// Corpora: labelled source `train`/`dev`/`test` and target `dev`/`test`
/// for both tasks, plus an unlabelled target `raw` split of the same size as
/// the source training set (for vocabulary construction only).
pub fn make_synthetic(spec: &SyntheticSpec) -> Result<SyntheticBenchmark, SyntheticError> {
    if spec.train < SyntheticSpec::MIN_TRAIN {
        return Err(SyntheticError::TooSmall {
            min: SyntheticSpec::MIN_TRAIN,
            got: spec.train,
        });
    }
    if !(0.0..=1.0).contains(&spec.coverage) {
        return Err(SyntheticError::Coverage);
    }
    let rng = |k: u64| stream(spec.seed, Stream::Synthetic, &[k]);
    let subst = SUBSTITUTIONS[rng(0).random_range(0..SUBSTITUTIONS.len())];
    let g = Generator {
        source: Lang::new("syn-src").expect("valid tag"),
        target: Lang::new("syn-tgt").expect("valid tag"),
        subst,
    };

    let forms = draw_lexicon(&mut rng(1));
    let mut counters: BTreeMap<WordClass, usize> = BTreeMap::new();
    let lexicon: Vec<LexEntry> = forms
        .iter()
        .map(|(class, src, tgt)| {
            let k = counters.entry(*class).or_default();
            *k += 1;
            LexEntry {
                class: *class,
                gloss: format!("{}{:03}", class.name(), *k),
                source: spell(src, SOURCE_BASE),
                target: spell(tgt, TARGET_BASE),
                source_ipa: g.ipa(src, false),
                target_ipa: g.ipa(tgt, true),
            }
        })
        .collect();

    let mut by_class: BTreeMap<WordClass, Vec<usize>> = BTreeMap::new();
    for (i, e) in lexicon.iter().enumerate() {
        by_class.entry(e.class).or_default().push(i);
    }

    let mut source_en = String::new();
    for e in &lexicon {
        source_en.push_str(&format!("{} {}\n", e.source, e.gloss));
    }
    let covered = crate::math::round_half_up(spec.coverage * lexicon.len() as f64).min(lexicon.len());
    let mut picks = index::sample(&mut rng(2), lexicon.len(), covered).into_vec();
    picks.sort_unstable();
    let mut en_target = String::new();
    for i in picks {
        en_target.push_str(&format!("{} {}\n", lexicon[i].gloss, lexicon[i].target));
    }

    let splits: [(&str, usize, bool, Role); 6] = [
        ("train", spec.train, false, Role::Train),
        ("dev", spec.eval, false, Role::Dev),
        ("test", spec.eval, false, Role::Test),
        ("dev", spec.eval, true, Role::Dev),
        ("test", spec.eval, true, Role::Test),
        ("raw", spec.train, true, Role::Train),
    ];
    let mut corpora = Vec::new();
    for (k, (split, n, target, role)) in splits.into_iter().enumerate() {
        let mut r = rng(10 + k as u64);
        let sentences: Vec<Sentence> = (0..n).map(|_| draw_sentence(&by_class, &mut r)).collect();
        let lang = if target { &g.target } else { &g.source };
        let tasks: &[Option<Task>] = if split == "raw" {
            &[None]
        } else {
            &[Some(Task::Ner), Some(Task::Pos)]
        };
        for &task in tasks {
            corpora.push(SyntheticCorpus {
                file_name: corpus_file_name(lang, split, task),
                lang: lang.clone(),
                task,
                dataset: render(&sentences, &lexicon, lang, target, task, role),
            });
        }
    }

    Ok(SyntheticBenchmark {
        tables: g.tables(),
        source: g.source,
        target: g.target,
        substitution: (subst.0.into(), subst.1.into()),
        lexicon,
        corpora,
        source_en,
        en_target,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transcription::{Mode, TableSet};

    fn bench() -> SyntheticBenchmark {
        make_synthetic(&SyntheticSpec::new(3, 200)).unwrap()
    }

    #[test]
    fn size_is_checked() {
        assert!(make_synthetic(&SyntheticSpec::new(0, 199)).is_err());
    }

    #[test]
    fn surfaces_are_disjoint() {
        let b = bench();
        let src: BTreeSet<&str> = b.lexicon.iter().map(|e| e.source.as_str()).collect();
        let tgt: BTreeSet<&str> = b.lexicon.iter().map(|e| e.target.as_str()).collect();
        assert_eq!(src.len(), b.lexicon.len());
        assert_eq!(tgt.len(), b.lexicon.len());
        assert_eq!(src.intersection(&tgt).count(), 0);
    }

    #[test]
    fn cognates_mostly_share_segments() {
        let b = bench();
        let close = b
            .lexicon
            .iter()
            .filter(|e| segment_overlap(&e.source_ipa, &e.target_ipa) >= 0.8)
            .count();
        assert!(close * 10 >= b.lexicon.len() * 9, "{close} of {}", b.lexicon.len());
    }

    #[test]
    fn tables_reproduce_lexicon_forms() {
        let b = bench();
        let mut set = TableSet::new();
        for (name, text) in &b.tables {
            set.load_named(name, text).unwrap();
        }
        for e in &b.lexicon {
            assert_eq!(set.to_ipa(&e.source, &b.source).unwrap(), e.source_ipa);
            assert_eq!(set.to_ipa(&e.target, &b.target).unwrap(), e.target_ipa);
            assert!(set.transcribe(&e.target, &b.target, Mode::Romanized).is_ok());
        }
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        assert_eq!(bench().files(), bench().files());
        let other = make_synthetic(&SyntheticSpec::new(4, 200)).unwrap();
        assert_ne!(bench().files(), other.files());
    }

    #[test]
    fn coverage_and_splits() {
        let b = bench();
        let lines = b.en_target.lines().count();
        assert_eq!(lines, crate::math::round_half_up(0.4 * b.lexicon.len() as f64));
        let train = b.corpus("syn-src.train.ner.tsv").unwrap();
        assert_eq!(train.dataset.len(), 200);
        assert!(train.dataset.examples().iter().all(|e| e.is_labelled()));
        let raw = b.corpus("syn-tgt.raw.tsv").unwrap();
        assert!(raw.dataset.examples().iter().all(|e| !e.is_labelled()));
        let pos = b.corpus("syn-tgt.test.pos.tsv").unwrap();
        let ner = b.corpus("syn-tgt.test.ner.tsv").unwrap();
        for (p, n) in pos.dataset.examples().iter().zip(ner.dataset.examples()) {
            assert_eq!(p.surfaces().collect::<Vec<_>>(), n.surfaces().collect::<Vec<_>>());
        }
    }
}
