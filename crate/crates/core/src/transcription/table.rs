use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use super::phoneme::is_ipa_char;
use crate::Lang;

/// What a rule table converts between.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    /// Native orthography to a Latin romanization (pinyin, romaji, romaja).
    OrthoToRoman,
    /// Native orthography straight to IPA segments.
    OrthoToIpa,
    /// Latin romanization to IPA segments.
    LatinToIpa,
}

impl Stage {
    pub const ALL: [Stage; 3] = [Stage::OrthoToRoman, Stage::OrthoToIpa, Stage::LatinToIpa];

    /// Suffix used in table file names: `<lang>.<suffix>.tsv`.
    pub fn file_suffix(self) -> &'static str {
        match self {
            Stage::OrthoToRoman => "roman",
            Stage::OrthoToIpa => "ipa",
            Stage::LatinToIpa => "latin-ipa",
        }
    }

    pub fn from_suffix(s: &str) -> Option<Stage> {
        Stage::ALL.into_iter().find(|st| st.file_suffix() == s)
    }

    pub fn emits_ipa(self) -> bool {
        !matches!(self, Stage::OrthoToRoman)
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.file_suffix())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TableError {
    #[error("line {line}: expected `pattern<TAB>output`")]
    Malformed { line: usize },
    #[error("line {line}: empty pattern")]
    EmptyPattern { line: usize },
    #[error("line {line}: duplicate pattern {pattern:?}")]
    DuplicatePattern { line: usize, pattern: String },
    #[error("line {line}: segment {segment:?} contains non-IPA characters")]
    InvalidIpa { line: usize, segment: String },
    #[error("latin table is missing an entry for {0:?}")]
    NotTotal(char),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pattern: Vec<char>,
    output: String,
}

impl Rule {
    pub fn pattern(&self) -> String {
        self.pattern.iter().collect()
    }

    pub fn output(&self) -> &str {
        &self.output
    }

    /// Space-separated output segments (IPA stages).
    pub fn segments(&self) -> impl Iterator<Item = &str> {
        self.output.split(' ').filter(|s| !s.is_empty())
    }
}

/// A matched rule and where it matched.
#[derive(Debug, Clone, Copy)]
pub struct Match<'a> {
    pub rule: &'a Rule,
    pub start: usize,
    pub len: usize,
}

/// First position a table could not match.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Unmatched {
    pub ch: char,
    pub position: usize,
}

/// Ordered `pattern -> output` rules for one language and stage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleTable {
    lang: Lang,
    stage: Stage,
    rules: Vec<Rule>,
    longest_match: bool,
    /// Rule indices by first pattern character, in match-priority order.
    by_first: BTreeMap<char, Vec<usize>>,
}

impl RuleTable {
    pub fn new(
        lang: Lang,
        stage: Stage,
        entries: Vec<(String, String)>,
        longest_match: bool,
    ) -> Result<Self, TableError> {
        let numbered = entries.into_iter().enumerate().map(|(i, (p, o))| (i + 1, p, o));
        Self::build(lang, stage, numbered, longest_match)
    }

    fn build(
        lang: Lang,
        stage: Stage,
        entries: impl Iterator<Item = (usize, String, String)>,
        longest_match: bool,
    ) -> Result<Self, TableError> {
        let mut rules: Vec<Rule> = Vec::new();
        let mut seen = BTreeMap::new();
        for (line, pattern, output) in entries {
            if pattern.is_empty() {
                return Err(TableError::EmptyPattern { line });
            }
            if stage.emits_ipa() {
                if let Some(bad) = output.split(' ').find(|s| !s.chars().all(is_ipa_char)) {
                    return Err(TableError::InvalidIpa {
                        line,
                        segment: bad.to_string(),
                    });
                }
            }
            let chars: Vec<char> = pattern.chars().collect();
            if seen.insert(pattern, ()).is_some() {
                return Err(TableError::DuplicatePattern {
                    line,
                    pattern: chars.into_iter().collect(),
                });
            }
            rules.push(Rule {
                pattern: chars,
                output,
            });
        }
        Self::assemble(lang, stage, rules, longest_match)
    }

    fn assemble(
        lang: Lang,
        stage: Stage,
        rules: Vec<Rule>,
        longest_match: bool,
    ) -> Result<Self, TableError> {
        let mut by_first: BTreeMap<char, Vec<usize>> = BTreeMap::new();
        for (i, r) in rules.iter().enumerate() {
            by_first.entry(r.pattern[0]).or_default().push(i);
        }
        if longest_match {
            for ids in by_first.values_mut() {
                // equal-length candidates can never both match at one position
                ids.sort_by(|&a, &b| rules[b].pattern.len().cmp(&rules[a].pattern.len()));
            }
        }
        let table = RuleTable {
            lang,
            stage,
            rules,
            longest_match,
            by_first,
        };
        if stage == Stage::LatinToIpa {
            for ch in ('a'..='z').chain(core::iter::once('\'')) {
                if !table.rules.iter().any(|r| r.pattern.len() == 1 && r.pattern[0] == ch) {
                    return Err(TableError::NotTotal(ch));
                }
            }
        }
        Ok(table)
    }

    /// Parses the `pattern<TAB>output` format; `#` starts a comment line.
    /// Line numbers in errors refer to the text.
    pub fn parse(lang: Lang, stage: Stage, text: &str) -> Result<Self, TableError> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let l = raw.strip_suffix('\r').unwrap_or(raw);
            if l.trim().is_empty() || l.starts_with('#') {
                continue;
            }
            let (pattern, output) = l.split_once('\t').ok_or(TableError::Malformed { line })?;
            entries.push((line, pattern.to_string(), output.to_string()));
        }
        Self::build(lang, stage, entries.into_iter(), true)
    }

    pub fn lang(&self) -> &Lang {
        &self.lang
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    pub fn longest_match(&self) -> bool {
        self.longest_match
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Best rule matching at `pos`, if any.
    pub fn match_at(&self, chars: &[char], pos: usize) -> Option<Match<'_>> {
        let ids = self.by_first.get(&chars[pos])?;
        ids.iter().find_map(|&id| {
            let r = &self.rules[id];
            let end = pos + r.pattern.len();
            (end <= chars.len() && chars[pos..end] == r.pattern[..]).then_some(Match {
                rule: r,
                start: pos,
                len: r.pattern.len(),
            })
        })
    }

    /// Greedy left-to-right segmentation of `chars` into rules.
    pub fn segment<'a>(&'a self, chars: &[char]) -> Result<Vec<Match<'a>>, Unmatched> {
        let mut out = Vec::new();
        let mut pos = 0;
        while pos < chars.len() {
            match self.match_at(chars, pos) {
                Some(m) => {
                    pos += m.len;
                    out.push(m);
                }
                None => {
                    return Err(Unmatched {
                        ch: chars[pos],
                        position: pos,
                    })
                }
            }
        }
        Ok(out)
    }

    /// Serialises back to the TSV format (rules in their stored order).
    pub fn to_tsv(&self) -> String {
        let mut s = String::new();
        for r in &self.rules {
            s.extend(r.pattern.iter());
            s.push('\t');
            s.push_str(&r.output);
            s.push('\n');
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn latin_rows(extra: &[(&str, &str)]) -> String {
        let mut s = String::from("# test table\n");
        for (p, o) in extra {
            s.push_str(p);
            s.push('\t');
            s.push_str(o);
            s.push('\n');
        }
        for c in 'a'..='z' {
            s.push(c);
            s.push('\t');
            s.push(c);
            s.push('\n');
        }
        s.push_str("'\t.\n");
        s
    }

    #[test]
    fn longest_match_wins() {
        let t = RuleTable::parse(Lang::ja(), Stage::LatinToIpa, &latin_rows(&[("sh", "ʃ")]))
            .unwrap();
        let chars: Vec<char> = "shi".chars().collect();
        let m = t.segment(&chars).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m[0].rule.output(), "ʃ");
    }

    #[test]
    fn rejects_duplicates_empty_and_tabless_lines() {
        let dup = "a\tb\na\tc\n";
        assert!(matches!(
            RuleTable::parse(Lang::ko(), Stage::OrthoToRoman, dup),
            Err(TableError::DuplicatePattern { line: 2, .. })
        ));
        assert!(matches!(
            RuleTable::parse(Lang::ko(), Stage::OrthoToRoman, "\tx\n"),
            Err(TableError::EmptyPattern { line: 1 })
        ));
        assert!(matches!(
            RuleTable::parse(Lang::ko(), Stage::OrthoToRoman, "ab\n"),
            Err(TableError::Malformed { line: 1 })
        ));
    }

    #[test]
    fn latin_tables_must_be_total() {
        let err = RuleTable::parse(Lang::ja(), Stage::LatinToIpa, "a\ta\n").unwrap_err();
        assert_eq!(err, TableError::NotTotal('b'));
    }

    #[test]
    fn ipa_outputs_are_validated() {
        let err = RuleTable::parse(Lang::vi(), Stage::OrthoToIpa, "a\t#\n").unwrap_err();
        assert!(matches!(err, TableError::InvalidIpa { line: 1, .. }));
    }

    #[test]
    fn unmatched_reports_position() {
        let t = RuleTable::parse(Lang::ko(), Stage::OrthoToRoman, "a\tx\n").unwrap();
        let chars: Vec<char> = "aab".chars().collect();
        assert_eq!(
            t.segment(&chars).unwrap_err(),
            Unmatched {
                ch: 'b',
                position: 2
            }
        );
    }
}
