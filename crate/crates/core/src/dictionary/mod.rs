//! Bilingual dictionaries composed through an English pivot, and
//! dictionary-driven code-switching of source sentences.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::index;
use rand::Rng as _;

use crate::corpus::AlignedExample;
use crate::math::round_half_up;
use crate::rng::Rng;
use crate::transcription::{Mode, PhonemeString, TableSet};
use crate::Lang;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DictionaryError {
    #[error("line {line}: expected `source<SPACE>target`")]
    Malformed { line: usize },
    #[error("line {line}: invalid language tag {tag:?}")]
    InvalidLanguage { line: usize, tag: String },
}

/// Parses MUSE-style pairs: source and target split at the first run of
/// whitespace, so targets may contain spaces. Blank lines are skipped.
pub fn parse_muse(text: &str) -> Result<Vec<(String, String)>, DictionaryError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let l = raw.trim();
        if l.is_empty() {
            continue;
        }
        let (s, t) = l
            .split_once(char::is_whitespace)
            .ok_or(DictionaryError::Malformed { line: i + 1 })?;
        let t = t.trim();
        if t.is_empty() {
            return Err(DictionaryError::Malformed { line: i + 1 });
        }
        out.push((s.to_string(), t.to_string()));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Translation {
    pub surface: String,
    pub ipa: PhonemeString,
    pub lang: Lang,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BilingualDictionary {
    map: BTreeMap<String, Vec<Translation>>,
}

/// Outcome of composing two pivot dictionaries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PivotBuild {
    pub dictionary: BilingualDictionary,
    /// Distinct target words the transcription tables could not cover.
    pub dropped: usize,
}

impl BilingualDictionary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a translation unless an identical one is present. Panics on an
    /// empty phonemic form.
    pub fn insert(&mut self, source: impl Into<String>, t: Translation) {
        assert!(!t.ipa.is_empty(), "translation without phonemes");
        let list = self.map.entry(source.into()).or_default();
        if let Err(pos) = list.binary_search(&t) {
            list.insert(pos, t);
        }
    }

    pub fn get(&self, source: &str) -> Option<&[Translation]> {
        self.map.get(source).map(Vec::as_slice)
    }

    pub fn contains(&self, source: &str) -> bool {
        self.map.contains_key(source)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[Translation])> {
        self.map.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    /// All phonemic segments on the target side.
    pub fn segments(&self) -> impl Iterator<Item = &str> {
        self.map
            .values()
            .flatten()
            .flat_map(|t| t.ipa.segments().iter().map(String::as_str))
    }

    /// One `src<TAB>tgt<TAB>ipa·segments<TAB>lang` line per translation.
    pub fn to_tsv(&self) -> String {
        let mut s = String::new();
        for (src, list) in &self.map {
            for t in list {
                s.push_str(src);
                s.push('\t');
                s.push_str(&t.surface);
                s.push('\t');
                s.push_str(&t.ipa.to_column());
                s.push('\t');
                s.push_str(t.lang.as_str());
                s.push('\n');
            }
        }
        s
    }

    pub fn parse_tsv(text: &str) -> Result<Self, DictionaryError> {
        let mut d = BilingualDictionary::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let l = raw.strip_suffix('\r').unwrap_or(raw);
            if l.is_empty() {
                continue;
            }
            let cols: Vec<&str> = l.split('\t').collect();
            let [src, tgt, ipa, lang] = cols[..] else {
                return Err(DictionaryError::Malformed { line });
            };
            let ipa = PhonemeString::from_column(ipa);
            if src.is_empty() || tgt.is_empty() || ipa.is_empty() {
                return Err(DictionaryError::Malformed { line });
            }
            let lang = Lang::new(lang).map_err(|_| DictionaryError::InvalidLanguage {
                line,
                tag: lang.to_string(),
            })?;
            d.insert(
                src,
                Translation {
                    surface: tgt.to_string(),
                    ipa,
                    lang,
                },
            );
        }
        Ok(d)
    }
}

/// Composes `src->en` with `en->tgt`. Multi-word targets collapse into one
/// hyphen-joined word whose phonemes come from the whole phrase. Targets the
/// tables cannot transcribe are dropped and counted.
pub fn build_pivot_dictionary(
    src_en: &[(String, String)],
    en_tgt: &[(String, String)],
    target: &Lang,
    tables: &TableSet,
    mode: Mode,
) -> PivotBuild {
    let mut pivot: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for (e, t) in en_tgt {
        pivot.entry(e.as_str()).or_default().insert(t.as_str());
    }
    let mut transcribed: BTreeMap<&str, Option<Translation>> = BTreeMap::new();
    let mut dictionary = BilingualDictionary::new();
    for (s, e) in src_en {
        let Some(targets) = pivot.get(e.as_str()) else {
            continue;
        };
        for &t in targets {
            let entry = transcribed.entry(t).or_insert_with(|| {
                tables.transcribe(t, target, mode).ok().map(|ipa| Translation {
                    surface: t.split_whitespace().collect::<Vec<_>>().join("-"),
                    ipa,
                    lang: target.clone(),
                })
            });
            if let Some(tr) = entry {
                if !tr.ipa.is_empty() {
                    dictionary.insert(s.as_str(), tr.clone());
                }
            }
        }
    }
    let dropped = transcribed.values().filter(|t| t.is_none()).count();
    PivotBuild {
        dictionary,
        dropped,
    }
}

/// Which words were switched and to which translation.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CodeSwitchPlan {
    pub positions: Vec<usize>,
    /// Index into the translation list, parallel to `positions`.
    pub chosen: Vec<usize>,
    /// Number of dictionary-covered words in the sentence.
    pub covered: usize,
}

impl CodeSwitchPlan {
    pub fn r_effective(&self) -> f64 {
        if self.covered == 0 {
            0.0
        } else {
            self.positions.len() as f64 / self.covered as f64
        }
    }
}

/// Replaces `round(r * covered)` uniformly chosen covered words with a
/// uniformly chosen translation. Labels are kept.
pub fn code_switch(
    example: &AlignedExample,
    dict: &BilingualDictionary,
    r: f64,
    rng: &mut Rng,
) -> (AlignedExample, CodeSwitchPlan) {
    assert!((0.0..=1.0).contains(&r), "code-switch ratio outside [0, 1]");
    let covered: Vec<usize> = example
        .words()
        .iter()
        .enumerate()
        .filter(|(_, w)| dict.contains(&w.surface))
        .map(|(i, _)| i)
        .collect();
    let count = round_half_up(r * covered.len() as f64).min(covered.len());
    let mut plan = CodeSwitchPlan {
        covered: covered.len(),
        ..Default::default()
    };
    if count == 0 {
        return (example.clone(), plan);
    }
    let mut picks = index::sample(rng, covered.len(), count).into_vec();
    picks.sort_unstable();
    let mut out = example.clone();
    for k in picks {
        let pos = covered[k];
        let word = &mut out.words_mut()[pos];
        let options = dict.get(&word.surface).expect("covered word");
        let c = rng.random_range(0..options.len());
        let t = &options[c];
        word.surface = t.surface.clone();
        word.ipa = t.ipa.clone();
        word.lang = t.lang.clone();
        plan.positions.push(pos);
        plan.chosen.push(c);
    }
    (out, plan)
}
