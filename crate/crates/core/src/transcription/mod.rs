//! Table-driven romanization and IPA transcription for CJKV tokens.
//!
//! Every language goes through one of three paths:
//! * Vietnamese: tone diacritics are split off, the toneless syllable is
//!   matched against `vi.ipa`, and the tone is appended as its own segment.
//! * A direct `<lang>.ipa` table, when one is loaded.
//! * Two stages, `<lang>.roman` then `<lang>.latin-ipa`. Roman outputs may be
//!   numbered-pinyin syllables (`dian4`); each one becomes its own syllable
//!   and its tone number becomes a Chao tone-letter segment.
//!
//! Korean syllables are decomposed into conjoining jamo before the roman
//! table is applied. Whitespace inside a token becomes a syllable break.

mod hangul;
mod phoneme;
mod table;

pub use hangul::{decompose_hangul, is_hangul_syllable, HangulJamo};
pub use phoneme::{is_ipa_char, is_tone_char, PhonemeString, SEGMENT_SEPARATOR, SYLLABLE_BREAK};
pub use table::{Match, Rule, RuleTable, Stage, TableError, Unmatched};

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use unicode_normalization::UnicodeNormalization;

use crate::corpus::Dataset;
use crate::Lang;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TranscriptionError {
    #[error("no rule covers {:?} (U+{:04X}) at position {position}", char::from_u32(*.codepoint).unwrap_or('\u{FFFD}'), .codepoint)]
    UncoveredGrapheme { codepoint: u32, position: usize },
    #[error("U+{0:04X} is not a precomposed Hangul syllable")]
    NotHangulSyllable(u32),
    #[error("no {stage} table loaded for `{lang}`")]
    MissingTable { lang: Lang, stage: Stage },
    #[error("table {name}: {source}")]
    Table { name: String, source: TableError },
    #[error("table file name {0:?} is not `<lang>.<roman|ipa|latin-ipa>.tsv`")]
    TableName(String),
    #[error("sentence {sentence}, token {token}: {source}")]
    At {
        sentence: usize,
        token: usize,
        source: Box<TranscriptionError>,
    },
}

/// What fills the phonemic column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Mode {
    #[default]
    Ipa,
    /// Romanized letters stand in for IPA segments, one letter per segment.
    Romanized,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Ipa => "ipa",
            Mode::Romanized => "romanized",
        })
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ipa" => Ok(Mode::Ipa),
            "romanized" | "roman" => Ok(Mode::Romanized),
            other => Err(alloc::format!("unknown transcription mode {other:?}")),
        }
    }
}

const BUNDLED: [(&str, &str); 7] = [
    ("zh.roman.tsv", include_str!("../../tables/zh.roman.tsv")),
    ("zh.latin-ipa.tsv", include_str!("../../tables/zh.latin-ipa.tsv")),
    ("vi.ipa.tsv", include_str!("../../tables/vi.ipa.tsv")),
    ("ja.roman.tsv", include_str!("../../tables/ja.roman.tsv")),
    ("ja.latin-ipa.tsv", include_str!("../../tables/ja.latin-ipa.tsv")),
    ("ko.roman.tsv", include_str!("../../tables/ko.roman.tsv")),
    ("ko.latin-ipa.tsv", include_str!("../../tables/ko.latin-ipa.tsv")),
];

/// Mandarin tone numbers as Chao tone letters; the neutral tone has none.
fn chao_tone(n: u8) -> Option<&'static str> {
    match n {
        1 => Some("˥"),
        2 => Some("˧˥"),
        3 => Some("˨˩˦"),
        4 => Some("˥˩"),
        _ => None,
    }
}

/// Vietnamese tone diacritic (after NFD) to its tone-letter segment.
fn vi_tone(mark: char) -> Option<&'static str> {
    match mark {
        '\u{0300}' => Some("˨˩"),
        '\u{0301}' => Some("˧˥"),
        '\u{0303}' => Some("˧ˀ˥"),
        '\u{0309}' => Some("˧˩˧"),
        '\u{0323}' => Some("˨ˀ˩"),
        _ => None,
    }
}

const VI_LEVEL_TONE: &str = "˧";

/// One romanized syllable-or-run produced by the roman stage.
#[derive(Debug, Clone, PartialEq, Eq)]
enum Unit {
    Text { text: String, tone: Option<u8> },
    Break,
}

/// Named collection of rule tables, at most one per language and stage.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TableSet {
    tables: BTreeMap<(Lang, Stage), RuleTable>,
}

impl TableSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// The tables shipped with the crate (zh, vi, ja, ko).
    pub fn bundled() -> Self {
        let mut set = TableSet::new();
        for (name, text) in BUNDLED {
            set.load_named(name, text).expect("bundled tables are well formed");
        }
        set
    }

    /// Parses `text` as the table named by `file_name`; replaces any table
    /// already loaded for that language and stage.
    pub fn load_named(&mut self, file_name: &str, text: &str) -> Result<(), TranscriptionError> {
        let (lang, stage) = parse_table_name(file_name)?;
        let table = RuleTable::parse(lang, stage, text).map_err(|source| {
            TranscriptionError::Table {
                name: file_name.into(),
                source,
            }
        })?;
        self.insert(table);
        Ok(())
    }

    pub fn insert(&mut self, table: RuleTable) -> Option<RuleTable> {
        self.tables
            .insert((table.lang().clone(), table.stage()), table)
    }

    pub fn get(&self, lang: &Lang, stage: Stage) -> Option<&RuleTable> {
        self.tables.get(&(lang.clone(), stage))
    }

    fn require(&self, lang: &Lang, stage: Stage) -> Result<&RuleTable, TranscriptionError> {
        self.get(lang, stage).ok_or_else(|| TranscriptionError::MissingTable {
            lang: lang.clone(),
            stage,
        })
    }

    pub fn tables(&self) -> impl Iterator<Item = &RuleTable> {
        self.tables.values()
    }

    /// Languages with at least one table, sorted.
    pub fn languages(&self) -> Vec<Lang> {
        let mut langs: Vec<Lang> = self.tables.keys().map(|(l, _)| l.clone()).collect();
        langs.dedup();
        langs
    }

    /// Canonical file name for a table: `<lang>.<stage>.tsv`.
    pub fn file_name(lang: &Lang, stage: Stage) -> String {
        alloc::format!("{lang}.{stage}.tsv")
    }

    pub fn romanize(&self, token: &str, lang: &Lang) -> Result<String, TranscriptionError> {
        if is_vi(lang) {
            return Ok(token.into());
        }
        let units = self.roman_units(token, lang)?;
        let mut out = String::new();
        let mut prev_text = false;
        for u in units {
            match u {
                Unit::Break => {
                    out.push(' ');
                    prev_text = false;
                }
                Unit::Text { text, .. } => {
                    // pinyin apostrophe before a vowel-initial non-initial syllable
                    if prev_text && text.starts_with(['a', 'e', 'o']) {
                        out.push('\'');
                    }
                    out.push_str(&text);
                    prev_text = true;
                }
            }
        }
        Ok(out)
    }

    pub fn to_ipa(&self, token: &str, lang: &Lang) -> Result<PhonemeString, TranscriptionError> {
        if is_vi(lang) {
            return self.vi_to_ipa(token, lang);
        }
        if let Some(direct) = self.get(lang, Stage::OrthoToIpa) {
            return direct_to_ipa(token, direct);
        }
        let latin = self.require(lang, Stage::LatinToIpa)?;
        let mut out = PhonemeString::new();
        let mut prev = false;
        for u in self.roman_units(token, lang)? {
            match u {
                Unit::Break => {
                    out.push(SYLLABLE_BREAK);
                    prev = false;
                }
                Unit::Text { text, tone } => {
                    if prev {
                        out.push(SYLLABLE_BREAK);
                    }
                    out.extend(latin_to_ipa(&text, latin)?);
                    if let Some(t) = tone.and_then(chao_tone) {
                        out.push(t);
                    }
                    prev = true;
                }
            }
        }
        Ok(out)
    }

    pub fn transcribe(
        &self,
        token: &str,
        lang: &Lang,
        mode: Mode,
    ) -> Result<PhonemeString, TranscriptionError> {
        match mode {
            Mode::Ipa => self.to_ipa(token, lang),
            Mode::Romanized => {
                let roman = self.romanize(token, lang)?;
                let lowered: String = roman.nfc().flat_map(char::to_lowercase).collect();
                let mut out = PhonemeString::new();
                let mut prev_break = true;
                for c in lowered.chars() {
                    if c.is_whitespace() {
                        if !prev_break {
                            out.push(SYLLABLE_BREAK);
                        }
                        prev_break = true;
                    } else {
                        out.push(String::from(c));
                        prev_break = false;
                    }
                }
                Ok(out)
            }
        }
    }

    /// Fills the phonemic column of every word from its surface, using `lang`
    /// for all words. Sentence and token counts are preserved.
    pub fn transcribe_dataset(
        &self,
        dataset: &Dataset,
        lang: &Lang,
        mode: Mode,
    ) -> Result<Dataset, TranscriptionError> {
        let mut out = dataset.clone();
        for (s, ex) in out.examples_mut().iter_mut().enumerate() {
            for (t, word) in ex.words_mut().iter_mut().enumerate() {
                word.ipa = self.transcribe(&word.surface, lang, mode).map_err(|e| {
                    TranscriptionError::At {
                        sentence: s + 1,
                        token: t + 1,
                        source: Box::new(e),
                    }
                })?;
            }
        }
        Ok(out)
    }

    fn roman_units(&self, token: &str, lang: &Lang) -> Result<Vec<Unit>, TranscriptionError> {
        let table = self.require(lang, Stage::OrthoToRoman)?;
        let mut units = Vec::new();
        for (chars, origin) in chunks(&expand_token(token, lang)) {
            if !units.is_empty() {
                units.push(Unit::Break);
            }
            let matches = table.segment(&chars).map_err(|u| uncovered(token, &origin, u))?;
            let mut run = String::new();
            for m in matches {
                let first = m.rule.output().split('|').next().unwrap_or("");
                for piece in first.split(' ').filter(|p| !p.is_empty()) {
                    match split_tone(piece) {
                        Some((text, tone)) => {
                            if !run.is_empty() {
                                units.push(Unit::Text {
                                    text: core::mem::take(&mut run),
                                    tone: None,
                                });
                            }
                            units.push(Unit::Text {
                                text: text.into(),
                                tone: Some(tone),
                            });
                        }
                        None => run.push_str(piece),
                    }
                }
            }
            if !run.is_empty() {
                units.push(Unit::Text {
                    text: run,
                    tone: None,
                });
            }
        }
        Ok(units)
    }

    fn vi_to_ipa(&self, token: &str, lang: &Lang) -> Result<PhonemeString, TranscriptionError> {
        let table = self.require(lang, Stage::OrthoToIpa)?;
        let mut out = PhonemeString::new();
        let mut offset = 0;
        for (k, syllable) in token.split(char::is_whitespace).enumerate() {
            let start = offset;
            offset += syllable.chars().count() + 1;
            if syllable.is_empty() {
                continue;
            }
            if k > 0 && !out.is_empty() {
                out.push(SYLLABLE_BREAK);
            }
            let mut tone = None;
            let bare: String = syllable
                .nfd()
                .filter(|&c| match vi_tone(c) {
                    Some(t) => {
                        tone = Some(t);
                        false
                    }
                    None => true,
                })
                .nfc()
                .flat_map(char::to_lowercase)
                .collect();
            let chars: Vec<char> = bare.chars().collect();
            let matches = table.segment(&chars).map_err(|u| TranscriptionError::UncoveredGrapheme {
                codepoint: u.ch as u32,
                position: start + u.position,
            })?;
            for m in matches {
                for seg in m.rule.segments() {
                    out.push(seg);
                }
            }
            out.push(tone.unwrap_or(VI_LEVEL_TONE));
        }
        Ok(out)
    }
}

fn is_vi(lang: &Lang) -> bool {
    lang.as_str() == "vi"
}

fn parse_table_name(file_name: &str) -> Result<(Lang, Stage), TranscriptionError> {
    let bad = || TranscriptionError::TableName(file_name.into());
    let stem = file_name.strip_suffix(".tsv").ok_or_else(bad)?;
    let (lang, stage) = stem.split_once('.').ok_or_else(bad)?;
    let stage = Stage::from_suffix(stage).ok_or_else(bad)?;
    let lang = Lang::new(lang).map_err(|_| bad())?;
    Ok((lang, stage))
}

/// `dian4` -> (`dian`, 4)
fn split_tone(piece: &str) -> Option<(&str, u8)> {
    let last = piece.chars().last()?;
    let d = last.to_digit(10)?;
    let text = &piece[..piece.len() - 1];
    ((1..=5).contains(&d) && !text.is_empty()).then_some((text, d as u8))
}

/// Characters the roman stage matches, each tagged with its source index.
/// Korean syllables expand to conjoining jamo.
fn expand_token(token: &str, lang: &Lang) -> Vec<(char, usize)> {
    let korean = lang.as_str() == "ko";
    let mut out = Vec::new();
    for (i, c) in token.chars().enumerate() {
        match decompose_hangul(c) {
            Ok(j) if korean => out.extend(j.conjoining().map(|jc| (jc, i))),
            _ => out.push((c, i)),
        }
    }
    out
}

/// Splits on whitespace into (chars, source indices) runs.
fn chunks(expanded: &[(char, usize)]) -> Vec<(Vec<char>, Vec<usize>)> {
    let mut out = Vec::new();
    for run in expanded.split(|(c, _)| c.is_whitespace()) {
        if !run.is_empty() {
            out.push(run.iter().copied().unzip());
        }
    }
    out
}

fn uncovered(token: &str, origin: &[usize], u: Unmatched) -> TranscriptionError {
    let position = origin[u.position];
    let codepoint = token.chars().nth(position).map_or(u.ch as u32, |c| c as u32);
    TranscriptionError::UncoveredGrapheme {
        codepoint,
        position,
    }
}

fn direct_to_ipa(token: &str, table: &RuleTable) -> Result<PhonemeString, TranscriptionError> {
    let expanded: Vec<(char, usize)> = token.chars().enumerate().map(|(i, c)| (c, i)).collect();
    let mut out = PhonemeString::new();
    for (chars, origin) in chunks(&expanded) {
        if !out.is_empty() {
            out.push(SYLLABLE_BREAK);
        }
        let matches = table.segment(&chars).map_err(|u| uncovered(token, &origin, u))?;
        for m in matches {
            for seg in m.rule.segments() {
                out.push(seg);
            }
        }
    }
    Ok(out)
}

/// Greedy longest-match segmentation of a romanization. Input is lowercased;
/// whitespace becomes a syllable break.
pub fn latin_to_ipa(roman: &str, table: &RuleTable) -> Result<PhonemeString, TranscriptionError> {
    let lowered: String = roman.chars().flat_map(char::to_lowercase).collect();
    let expanded: Vec<(char, usize)> = lowered.chars().enumerate().map(|(i, c)| (c, i)).collect();
    let mut out = PhonemeString::new();
    for (chars, origin) in chunks(&expanded) {
        if !out.is_empty() {
            out.push(SYLLABLE_BREAK);
        }
        let matches = table
            .segment(&chars)
            .map_err(|u| TranscriptionError::UncoveredGrapheme {
                codepoint: u.ch as u32,
                position: origin[u.position],
            })?;
        for m in matches {
            for seg in m.rule.segments() {
                out.push(seg);
            }
        }
    }
    Ok(out)
}

/// Romanization with the given tables; identity for Vietnamese.
pub fn romanize(token: &str, lang: &Lang, tables: &TableSet) -> Result<String, TranscriptionError> {
    tables.romanize(token, lang)
}

pub fn to_ipa(token: &str, lang: &Lang, tables: &TableSet) -> Result<PhonemeString, TranscriptionError> {
    tables.to_ipa(token, lang)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toneless(tables: &TableSet, lang: Lang, s: &str) -> String {
        tables.to_ipa(s, &lang).unwrap().without_tones().render()
    }

    #[test]
    fn zh_syllables_carry_tone_segments() {
        let t = TableSet::bundled();
        let p = t.to_ipa("电子", &Lang::zh()).unwrap();
        assert_eq!(p.segments(), ["t", "j", "ɛ", "n", "˥˩", ".", "ts", "ɯ", "˨˩˦"]);
        assert_eq!(t.romanize("电子", &Lang::zh()).unwrap(), "dianzi");
    }

    #[test]
    fn heteronym_resolves_to_first_reading_unless_a_word_matches() {
        let t = TableSet::bundled();
        assert_eq!(t.romanize("行", &Lang::zh()).unwrap(), "xing");
        assert_eq!(t.romanize("行业", &Lang::zh()).unwrap(), "hangye");
    }

    #[test]
    fn pinyin_apostrophe() {
        let t = TableSet::bundled();
        assert_eq!(t.romanize("天安", &Lang::zh()).unwrap(), "tian'an");
    }

    #[test]
    fn vi_tones_split_off() {
        let t = TableSet::bundled();
        let p = t.to_ipa("Việt Nam", &Lang::vi()).unwrap();
        assert_eq!(p.segments(), ["v", "i", "ə", "t", "˨ˀ˩", ".", "n", "a", "m", "˧"]);
        assert_eq!(t.romanize("Điện", &Lang::vi()).unwrap(), "Điện");
    }

    #[test]
    fn ja_and_ko_are_two_stage() {
        let t = TableSet::bundled();
        for (lang, word) in [(Lang::ja(), "ベトナム"), (Lang::ko(), "베트남")] {
            let roman = t.romanize(word, &lang).unwrap();
            let latin = t.get(&lang, Stage::LatinToIpa).unwrap();
            assert_eq!(t.to_ipa(word, &lang).unwrap(), latin_to_ipa(&roman, latin).unwrap());
        }
        assert_eq!(t.romanize("베트남", &Lang::ko()).unwrap(), "beteunam");
        assert_eq!(toneless(&t, Lang::ja(), "ベトナム"), "bɪtənɑmu");
    }

    #[test]
    fn empty_token() {
        let t = TableSet::bundled();
        assert_eq!(t.romanize("", &Lang::ko()).unwrap(), "");
        assert!(t.to_ipa("", &Lang::zh()).unwrap().is_empty());
        assert!(latin_to_ipa("", t.get(&Lang::ja(), Stage::LatinToIpa).unwrap())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn uncovered_names_first_bad_codepoint() {
        let t = TableSet::bundled();
        let err = t.to_ipa("电X子", &Lang::zh()).unwrap_err();
        assert_eq!(
            err,
            TranscriptionError::UncoveredGrapheme {
                codepoint: 'X' as u32,
                position: 1
            }
        );
        // a Hangul syllable whose tail jamo is fine but the token has a stray symbol
        let err = t.romanize("베@", &Lang::ko()).unwrap_err();
        assert_eq!(
            err,
            TranscriptionError::UncoveredGrapheme {
                codepoint: '@' as u32,
                position: 1
            }
        );
    }

    #[test]
    fn missing_table_is_reported() {
        let err = TableSet::new().to_ipa("a", &Lang::en()).unwrap_err();
        assert!(matches!(err, TranscriptionError::MissingTable { .. }));
    }

    #[test]
    fn table_names() {
        assert_eq!(
            parse_table_name("syn-src.latin-ipa.tsv").unwrap(),
            (Lang::new("syn-src").unwrap(), Stage::LatinToIpa)
        );
        assert!(parse_table_name("zh.tsv").is_err());
        assert!(parse_table_name("zh.foo.tsv").is_err());
    }

    #[test]
    fn romanized_mode_uses_letters_as_segments() {
        let t = TableSet::bundled();
        let p = t.transcribe("전자", &Lang::ko(), Mode::Romanized).unwrap();
        assert_eq!(p.to_column(), "j·e·o·n·j·a");
    }
}
