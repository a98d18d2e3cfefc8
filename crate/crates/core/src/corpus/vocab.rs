use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::Dataset;

pub const PAD: u32 = 0;
pub const UNK: u32 = 1;
pub const CLS: u32 = 2;
pub const SEP: u32 = 3;
pub const MASK: u32 = 4;

pub const SPECIALS: [&str; 5] = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum VocabError {
    #[error("line {line}: expected `id<TAB>string`")]
    Malformed { line: usize },
    #[error("line {line}: id {found} out of order, expected {expected}")]
    IdOrder { line: usize, expected: usize, found: usize },
    #[error("line {line}: duplicate entry {entry:?}")]
    Duplicate { line: usize, entry: String },
    #[error("special tokens are missing or out of place")]
    Specials,
    #[error("base size {base} exceeds vocabulary size {size}")]
    BaseSize { base: usize, size: usize },
}

/// Joint inventory of orthographic subwords and phonemic segments.
/// Ids are dense; extension only appends.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    entries: Vec<String>,
    index: BTreeMap<String, u32>,
    base_size: usize,
    max_chars: usize,
}

impl Vocabulary {
    /// Specials followed by `entries` in order; duplicates are skipped.
    pub fn from_entries<I, S>(entries: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut v = Vocabulary {
            entries: Vec::new(),
            index: BTreeMap::new(),
            base_size: 0,
            max_chars: 0,
        };
        for s in SPECIALS {
            v.push(s.to_string());
        }
        for e in entries {
            v.push(e.into());
        }
        v.base_size = v.len();
        v
    }

    fn push(&mut self, s: String) -> bool {
        if self.index.contains_key(&s) {
            return false;
        }
        self.max_chars = self.max_chars.max(s.chars().count());
        self.index.insert(s.clone(), self.entries.len() as u32);
        self.entries.push(s);
        true
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Size before any extension.
    pub fn base_size(&self) -> usize {
        self.base_size
    }

    pub fn id(&self, s: &str) -> Option<u32> {
        self.index.get(s).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.entries.get(id as usize).map(String::as_str)
    }

    pub fn entries(&self) -> &[String] {
        &self.entries
    }

    pub fn contains(&self, s: &str) -> bool {
        self.index.contains_key(s)
    }

    /// Appends every segment not yet present, in sorted order.
    pub fn extend<'a, I>(&self, segments: I) -> Vocabulary
    where
        I: IntoIterator<Item = &'a str>,
    {
        let fresh: BTreeSet<&str> = segments
            .into_iter()
            .filter(|s| !s.is_empty() && !self.contains(s))
            .collect();
        let mut v = self.clone();
        for s in fresh {
            v.push(s.to_string());
        }
        v
    }

    /// Greedy longest-match segmentation of a surface; unknown characters
    /// become [`UNK`].
    pub fn encode_surface(&self, surface: &str) -> Vec<u32> {
        let chars: Vec<char> = surface.chars().collect();
        let mut out = Vec::new();
        let mut pos = 0;
        let mut buf = String::new();
        while pos < chars.len() {
            let mut found = None;
            for len in (1..=self.max_chars.min(chars.len() - pos)).rev() {
                buf.clear();
                buf.extend(&chars[pos..pos + len]);
                if let Some(id) = self.id(&buf) {
                    found = Some((id, len));
                    break;
                }
            }
            match found {
                Some((id, len)) => {
                    out.push(id);
                    pos += len;
                }
                None => {
                    out.push(UNK);
                    pos += 1;
                }
            }
        }
        out
    }

    /// Greedy longest match over runs of whole segments: a subtoken is the
    /// concatenation of one or more consecutive segments. A segment that is
    /// not in the vocabulary becomes [`UNK`].
    pub fn encode_segments(&self, segments: &[String]) -> Vec<u32> {
        let mut out = Vec::new();
        let mut pos = 0;
        let mut buf = String::new();
        while pos < segments.len() {
            let mut best = None;
            buf.clear();
            let mut chars = 0;
            for (k, seg) in segments[pos..].iter().enumerate() {
                chars += seg.chars().count();
                if chars > self.max_chars {
                    break;
                }
                buf.push_str(seg);
                if let Some(id) = self.id(&buf) {
                    best = Some((id, k + 1));
                }
            }
            match best {
                Some((id, n)) => {
                    out.push(id);
                    pos += n;
                }
                None => {
                    out.push(UNK);
                    pos += 1;
                }
            }
        }
        out
    }

    /// `# base-size = N` followed by `id<TAB>string` lines.
    pub fn to_text(&self) -> String {
        let mut s = alloc::format!("# base-size = {}\n", self.base_size);
        for (i, e) in self.entries.iter().enumerate() {
            s.push_str(&alloc::format!("{i}\t{e}\n"));
        }
        s
    }

    pub fn parse(text: &str) -> Result<Vocabulary, VocabError> {
        let mut entries: Vec<String> = Vec::new();
        let mut base = None;
        let mut seen = BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let l = raw.strip_suffix('\r').unwrap_or(raw);
            if let Some(rest) = l.strip_prefix('#') {
                if let Some(n) = rest.trim().strip_prefix("base-size").map(str::trim) {
                    let n = n.strip_prefix('=').ok_or(VocabError::Malformed { line })?;
                    base = Some(n.trim().parse().map_err(|_| VocabError::Malformed { line })?);
                }
                continue;
            }
            if l.is_empty() {
                continue;
            }
            let (id, s) = l.split_once('\t').ok_or(VocabError::Malformed { line })?;
            let id: usize = id.parse().map_err(|_| VocabError::Malformed { line })?;
            if id != entries.len() {
                return Err(VocabError::IdOrder {
                    line,
                    expected: entries.len(),
                    found: id,
                });
            }
            if !seen.insert(s.to_string()) {
                return Err(VocabError::Duplicate {
                    line,
                    entry: s.to_string(),
                });
            }
            entries.push(s.to_string());
        }
        if entries.len() < SPECIALS.len() || entries.iter().zip(SPECIALS).any(|(e, s)| e != s) {
            return Err(VocabError::Specials);
        }
        let base = base.unwrap_or(entries.len());
        if base > entries.len() || base < SPECIALS.len() {
            return Err(VocabError::BaseSize {
                base,
                size: entries.len(),
            });
        }
        let mut v = Vocabulary::from_entries(entries.drain(SPECIALS.len()..base).collect::<Vec<_>>());
        for e in entries.drain(SPECIALS.len()..) {
            v.push(e);
        }
        Ok(v)
    }
}

/// Frequency-greedy pair merging over the word surfaces of `corpora`.
///
/// Starts from every distinct character, then repeatedly merges the most
/// frequent adjacent symbol pair inside words (ties go to the
/// lexicographically smallest pair) until the vocabulary reaches
/// `target_size` or no pair is left.
pub fn train_subword_vocab(corpora: &[&Dataset], target_size: usize) -> Vocabulary {
    let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
    for d in corpora {
        for ex in d.examples() {
            for w in ex.words() {
                *freq.entry(w.surface.as_str()).or_default() += 1;
            }
        }
    }
    let chars: BTreeSet<char> = freq.keys().flat_map(|w| w.chars()).collect();
    let mut vocab = Vocabulary::from_entries(chars.iter().map(|c| c.to_string()));
    let mut words: Vec<(Vec<String>, usize)> = freq
        .iter()
        .map(|(w, &n)| (w.chars().map(|c| c.to_string()).collect(), n))
        .collect();

    while vocab.len() < target_size {
        let mut pairs: BTreeMap<(&str, &str), usize> = BTreeMap::new();
        for (syms, n) in &words {
            for p in syms.windows(2) {
                *pairs.entry((p[0].as_str(), p[1].as_str())).or_default() += n;
            }
        }
        // max count; BTreeMap order makes the first maximum the smallest pair
        let Some(((a, b), _)) = pairs
            .iter()
            .fold(None, |best: Option<(&(&str, &str), usize)>, (k, &c)| match best {
                Some((_, bc)) if bc >= c => best,
                _ => Some((k, c)),
            })
        else {
            break;
        };
        let (a, b) = (a.to_string(), b.to_string());
        let merged = alloc::format!("{a}{b}");
        for (syms, _) in words.iter_mut() {
            let mut out = Vec::with_capacity(syms.len());
            let mut i = 0;
            while i < syms.len() {
                if i + 1 < syms.len() && syms[i] == a && syms[i + 1] == b {
                    out.push(merged.clone());
                    i += 2;
                } else {
                    out.push(core::mem::take(&mut syms[i]));
                    i += 1;
                }
            }
            *syms = out;
        }
        vocab.push(merged);
    }
    vocab.base_size = vocab.len();
    vocab
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_dataset, Role, TagSet};

    fn corpus(words: &[&str]) -> Dataset {
        let mut text = String::from("# lang = zh\n");
        for w in words {
            text.push_str(w);
            text.push_str("\t_\tO\n");
        }
        parse_dataset(&text, &TagSet::ner(), Role::Train).unwrap()
    }

    #[test]
    fn single_merge() {
        let d = corpus(&["aa"]);
        let v = train_subword_vocab(&[&d], 8);
        assert_eq!(&v.entries()[5..], ["a", "aa"]);
        assert_eq!(v.encode_surface("aaa"), [6, 5]);
    }

    #[test]
    fn character_level_when_target_leaves_no_room() {
        let d = corpus(&["abc", "cab"]);
        let v = train_subword_vocab(&[&d], 3 + 5);
        assert_eq!(v.len(), 8);
        assert_eq!(v.encode_surface("cab"), [7, 5, 6]);
    }

    #[test]
    fn tie_goes_to_smallest_pair() {
        // "ab" and "cd" both occur once
        let d = corpus(&["ab", "cd"]);
        let v = train_subword_vocab(&[&d], 10);
        assert_eq!(v.token(9), Some("ab"));
        assert_eq!(v.token(10), None);
    }

    #[test]
    fn extension_appends_sorted_and_is_idempotent() {
        let v = Vocabulary::from_entries(["a", "n"]);
        let e = v.extend(["ʑ", "ŋ", "ɕ", "a"]);
        assert_eq!(e.len(), v.len() + 3);
        assert_eq!(e.base_size(), v.base_size());
        assert_eq!(&e.entries()[..v.len()], v.entries());
        assert_eq!(e.extend(["ʑ", "ŋ", "ɕ"]), e);
    }

    #[test]
    fn segment_runs() {
        let v = Vocabulary::from_entries(["a", "n", "an", "ŋ"]);
        let segs: Vec<String> = ["a", "n", "ŋ", "ʑ"].iter().map(|s| s.to_string()).collect();
        assert_eq!(v.encode_segments(&segs), [v.id("an").unwrap(), v.id("ŋ").unwrap(), UNK]);
    }

    #[test]
    fn text_round_trip() {
        let v = Vocabulary::from_entries(["a", "b"]).extend(["ŋ"]);
        let back = Vocabulary::parse(&v.to_text()).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.base_size(), 7);
    }
}
