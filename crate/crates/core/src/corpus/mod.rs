//! Token-level datasets, the joint subword vocabulary and subtoken alignment.
//!
//! The corpus format is CoNLL-like UTF-8 text. Each sentence opens with a
//! `# lang = <id>` line followed by one row per word:
//!
//! ```text
//! # lang = zh
//! 电子	t·j·ɛ·n·˥˩·.·ts·ɯ·˨˩˦	O
//! 行业	x·ɑ·ŋ·˧˥·.·j·ɛ·˥˩	O
//!
//! # lang = vi
//! Việt Nam	v·i·ə·t·˨ˀ˩·.·n·a·m·˧	B-LOC
//! ```
//!
//! Columns are surface, phonemic segments joined by `·`, and label; `_`
//! marks an empty phonemic column or an absent label. A fourth column gives
//! the word's language when it differs from the sentence (code-switched
//! text). Sentences are separated by a blank line.
#![allow(clippy::tabs_in_doc_comments)]

mod tokenize;
mod vocab;

pub use tokenize::{pool_subtokens, tokenize, SubtokenBatch, TokenizedRow};
pub use vocab::{train_subword_vocab, Vocabulary, VocabError, CLS, MASK, PAD, SEP, SPECIALS, UNK};

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::transcription::PhonemeString;
use crate::Lang;

pub const ABSENT: &str = "_";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CorpusError {
    #[error("line {line}: expected 3 or 4 tab-separated columns, found {found}")]
    RaggedSentence { line: usize, found: usize },
    #[error("line {line}: label {label:?} is not in the tag set")]
    LabelOutsideTagSet { line: usize, label: String },
    #[error("line {line}: sentence mixes labelled and unlabelled words")]
    MixedLabels { line: usize },
    #[error("line {line}: sentence has no `# lang = <id>` header")]
    MissingLanguage { line: usize },
    #[error("line {line}: invalid language tag {tag:?}")]
    InvalidLanguage { line: usize, tag: String },
    #[error("line {line}: empty surface form")]
    EmptyToken { line: usize },
    #[error("word {word} has no subtokens")]
    DegenerateAlignment { word: usize },
    #[error("language `{0}` is not in the language index")]
    UnknownLanguage(Lang),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Word {
    pub surface: String,
    pub ipa: PhonemeString,
    pub label: Option<String>,
    pub lang: Lang,
}

impl Word {
    pub fn new(surface: impl Into<String>, ipa: PhonemeString, label: Option<String>, lang: Lang) -> Self {
        Word {
            surface: surface.into(),
            ipa,
            label,
            lang,
        }
    }
}

/// One sentence: surfaces, phonemic segments, labels and languages per word.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AlignedExample {
    lang: Lang,
    words: Vec<Word>,
}

impl AlignedExample {
    /// Panics on an empty word list.
    pub fn new(lang: Lang, words: Vec<Word>) -> Self {
        assert!(!words.is_empty(), "sentence without words");
        AlignedExample { lang, words }
    }

    pub fn lang(&self) -> &Lang {
        &self.lang
    }

    pub fn words(&self) -> &[Word] {
        &self.words
    }

    pub fn words_mut(&mut self) -> &mut [Word] {
        &mut self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn is_labelled(&self) -> bool {
        self.words.iter().all(|w| w.label.is_some())
    }

    /// Tag ids, or `None` when unlabelled or a label is outside `tags`.
    pub fn label_ids(&self, tags: &TagSet) -> Option<Vec<usize>> {
        self.words
            .iter()
            .map(|w| w.label.as_deref().and_then(|l| tags.id(l)))
            .collect()
    }

    pub fn surfaces(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(|w| w.surface.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Role {
    #[default]
    Train,
    Dev,
    Test,
}

impl FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Role::Train),
            "dev" => Ok(Role::Dev),
            "test" => Ok(Role::Test),
            other => Err(alloc::format!("unknown dataset role {other:?}")),
        }
    }
}

/// Ordered label inventory of one task.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TagSet {
    tags: Vec<String>,
}

impl TagSet {
    /// Panics on duplicate or empty tag lists.
    pub fn new<I, S>(tags: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let tags: Vec<String> = tags.into_iter().map(Into::into).collect();
        assert!(!tags.is_empty(), "empty tag set");
        for (i, t) in tags.iter().enumerate() {
            assert!(!tags[..i].contains(t), "duplicate tag {t}");
        }
        TagSet { tags }
    }

    /// BIO tags for person, organisation and location entities.
    pub fn ner() -> Self {
        TagSet::new(["O", "B-PER", "I-PER", "B-ORG", "I-ORG", "B-LOC", "I-LOC"])
    }

    /// Universal POS tags.
    pub fn pos() -> Self {
        TagSet::new([
            "ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET", "INTJ", "NOUN", "NUM", "PART", "PRON",
            "PROPN", "PUNCT", "SCONJ", "SYM", "VERB", "X",
        ])
    }

    pub fn id(&self, tag: &str) -> Option<usize> {
        self.tags.iter().position(|t| t == tag)
    }

    pub fn tag(&self, id: usize) -> &str {
        &self.tags[id]
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    examples: Vec<AlignedExample>,
    role: Role,
    tags: TagSet,
}

impl Dataset {
    pub fn new(examples: Vec<AlignedExample>, role: Role, tags: TagSet) -> Self {
        Dataset {
            examples,
            role,
            tags,
        }
    }

    pub fn examples(&self) -> &[AlignedExample] {
        &self.examples
    }

    pub fn examples_mut(&mut self) -> &mut [AlignedExample] {
        &mut self.examples
    }

    pub fn into_examples(self) -> Vec<AlignedExample> {
        self.examples
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn tags(&self) -> &TagSet {
        &self.tags
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Every phonemic segment used anywhere in the dataset.
    pub fn segments(&self) -> impl Iterator<Item = &str> {
        self.examples
            .iter()
            .flat_map(|e| e.words.iter())
            .flat_map(|w| w.ipa.segments().iter().map(String::as_str))
    }

    pub fn word_count(&self) -> usize {
        self.examples.iter().map(AlignedExample::len).sum()
    }
}

/// Parses corpus text. Labels must belong to `tags`.
pub fn parse_dataset(text: &str, tags: &TagSet, role: Role) -> Result<Dataset, CorpusError> {
    let mut examples = Vec::new();
    let mut lang: Option<Lang> = None;
    let mut words: Vec<Word> = Vec::new();
    let mut first_label_line = 0;

    let mut flush = |lang: &mut Option<Lang>, words: &mut Vec<Word>, line: usize| {
        if !words.is_empty() {
            let labelled = words.iter().filter(|w| w.label.is_some()).count();
            if labelled != 0 && labelled != words.len() {
                return Err(CorpusError::MixedLabels { line });
            }
            let l = lang.take().expect("language checked per row");
            examples.push(AlignedExample::new(l, core::mem::take(words)));
        }
        *lang = None;
        Ok(())
    };

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let l = raw.strip_suffix('\r').unwrap_or(raw);
        if l.trim().is_empty() {
            flush(&mut lang, &mut words, first_label_line)?;
            continue;
        }
        if let Some(rest) = l.strip_prefix('#') {
            if let Some(tag) = rest.trim().strip_prefix("lang").map(str::trim) {
                if let Some(tag) = tag.strip_prefix('=') {
                    if !words.is_empty() {
                        flush(&mut lang, &mut words, first_label_line)?;
                    }
                    let tag = tag.trim();
                    lang = Some(Lang::new(tag).map_err(|_| CorpusError::InvalidLanguage {
                        line,
                        tag: tag.to_string(),
                    })?);
                }
            }
            continue;
        }
        let cols: Vec<&str> = l.split('\t').collect();
        if cols.len() != 3 && cols.len() != 4 {
            return Err(CorpusError::RaggedSentence {
                line,
                found: cols.len(),
            });
        }
        let sentence_lang = lang.clone().ok_or(CorpusError::MissingLanguage { line })?;
        if cols[0].is_empty() {
            return Err(CorpusError::EmptyToken { line });
        }
        let ipa = if cols[1] == ABSENT {
            PhonemeString::new()
        } else {
            PhonemeString::from_column(cols[1])
        };
        let label = match cols[2] {
            ABSENT => None,
            t if tags.id(t).is_some() => Some(t.to_string()),
            t => {
                return Err(CorpusError::LabelOutsideTagSet {
                    line,
                    label: t.to_string(),
                })
            }
        };
        let word_lang = match cols.get(3) {
            Some(t) => Lang::new(t).map_err(|_| CorpusError::InvalidLanguage {
                line,
                tag: t.to_string(),
            })?,
            None => sentence_lang,
        };
        if words.is_empty() {
            first_label_line = line;
        }
        words.push(Word::new(cols[0], ipa, label, word_lang));
    }
    flush(&mut lang, &mut words, first_label_line)?;
    Ok(Dataset::new(examples, role, tags.clone()))
}

/// Canonical text form; `parse_dataset` of the result gives back `dataset`.
pub fn write_dataset(dataset: &Dataset) -> String {
    let mut out = String::new();
    for (i, ex) in dataset.examples.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        write_example(&mut out, ex);
    }
    out
}

fn write_example(out: &mut String, ex: &AlignedExample) {
    out.push_str("# lang = ");
    out.push_str(ex.lang.as_str());
    out.push('\n');
    for w in &ex.words {
        out.push_str(&w.surface);
        out.push('\t');
        if w.ipa.is_empty() {
            out.push_str(ABSENT);
        } else {
            out.push_str(&w.ipa.to_column());
        }
        out.push('\t');
        out.push_str(w.label.as_deref().unwrap_or(ABSENT));
        if w.lang != ex.lang {
            out.push('\t');
            out.push_str(w.lang.as_str());
        }
        out.push('\n');
    }
}

impl fmt::Display for AlignedExample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        write_example(&mut s, self);
        f.write_str(&s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "# lang = zh\n电子\tt·j·ɛ·n·˥˩·.·ts·ɯ·˨˩˦\tO\n越南\t_\tB-LOC\n\n# lang = vi\nViệt Nam\tv·i·ə·t\tB-LOC\nđiện\td·i·ə·n\tO\tzh\n";

    #[test]
    fn parses_and_round_trips() {
        let d = parse_dataset(SAMPLE, &TagSet::ner(), Role::Train).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.examples()[0].len(), 2);
        assert!(d.examples()[0].words()[1].ipa.is_empty());
        assert_eq!(d.examples()[1].words()[1].lang, Lang::zh());
        assert_eq!(d.examples()[1].words()[0].lang, Lang::vi());
        assert_eq!(write_dataset(&d), SAMPLE);
    }

    #[test]
    fn empty_text_gives_empty_dataset() {
        assert!(parse_dataset("", &TagSet::ner(), Role::Dev).unwrap().is_empty());
    }

    #[test]
    fn error_contracts() {
        let ner = TagSet::ner();
        assert_eq!(
            parse_dataset("# lang = zh\na\tb\n", &ner, Role::Train).unwrap_err(),
            CorpusError::RaggedSentence { line: 2, found: 2 }
        );
        assert_eq!(
            parse_dataset("# lang = zh\na\tb\tNOUN\n", &ner, Role::Train).unwrap_err(),
            CorpusError::LabelOutsideTagSet {
                line: 2,
                label: "NOUN".into()
            }
        );
        assert_eq!(
            parse_dataset("a\tb\tO\n", &ner, Role::Train).unwrap_err(),
            CorpusError::MissingLanguage { line: 1 }
        );
        assert_eq!(
            parse_dataset("# lang = zh\na\tb\tO\nc\td\t_\n", &ner, Role::Train).unwrap_err(),
            CorpusError::MixedLabels { line: 2 }
        );
        assert_eq!(
            parse_dataset("# lang = zh\n\tb\tO\n", &ner, Role::Train).unwrap_err(),
            CorpusError::EmptyToken { line: 2 }
        );
    }

    #[test]
    fn unlabelled_sentences_are_allowed() {
        let d = parse_dataset("# lang = ko\n베트남\t_\t_\n", &TagSet::ner(), Role::Test).unwrap();
        assert!(!d.examples()[0].is_labelled());
        assert_eq!(d.examples()[0].label_ids(&TagSet::ner()), None);
    }

    #[test]
    fn header_resets_sentence_language() {
        let text = "# lang = zh\na\t_\tO\n# lang = vi\nb\t_\tO\n";
        let d = parse_dataset(text, &TagSet::ner(), Role::Train).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.examples()[1].lang(), &Lang::vi());
    }
}
