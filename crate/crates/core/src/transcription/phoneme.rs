use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Separator between segments in the corpus IPA column.
pub const SEGMENT_SEPARATOR: char = '·';

/// Segment marking a syllable or word break inside one token.
pub const SYLLABLE_BREAK: &str = ".";

/// Chao tone letters plus the glottalization modifier used in Vietnamese tones.
pub fn is_tone_char(c: char) -> bool {
    matches!(c, '\u{02E5}'..='\u{02E9}' | '\u{A712}'..='\u{A716}' | 'ˀ')
}

/// Characters allowed in IPA segments: lowercase Latin base letters, the
/// IPA extensions block, spacing modifier letters (aspiration, length,
/// tone letters), combining diacritics (tie bars, syllabicity) and the few
/// Latin-1/Greek letters IPA borrows.
pub fn is_ipa_char(c: char) -> bool {
    matches!(c,
        'a'..='z'
        | '\u{0250}'..='\u{02AF}'
        | '\u{02B0}'..='\u{02FF}'
        | '\u{0300}'..='\u{036F}'
        | '\u{1D00}'..='\u{1D7F}'
        | '\u{A712}'..='\u{A716}'
        | 'æ' | 'ç' | 'ð' | 'ø' | 'ħ' | 'ŋ' | 'œ' | 'β' | 'θ' | 'χ' | 'ⱱ'
        | '.' | '|' | '‖')
}

/// Ordered phoneme segments of one token. Tones are trailing segments made
/// only of tone letters, so dropping them is a filter.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PhonemeString {
    segments: Vec<String>,
}

impl PhonemeString {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_segments<I, S>(segments: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        PhonemeString {
            segments: segments
                .into_iter()
                .map(Into::into)
                .filter(|s: &String| !s.is_empty())
                .collect(),
        }
    }

    pub fn segments(&self) -> &[String] {
        &self.segments
    }

    pub fn into_segments(self) -> Vec<String> {
        self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn push(&mut self, segment: impl Into<String>) {
        let s = segment.into();
        if !s.is_empty() {
            self.segments.push(s);
        }
    }

    pub fn extend(&mut self, other: PhonemeString) {
        self.segments.extend(other.segments);
    }

    /// True when every codepoint is in the IPA charset.
    pub fn is_valid_ipa(&self) -> bool {
        self.segments.iter().all(|s| s.chars().all(is_ipa_char))
    }

    pub fn is_tone_segment(segment: &str) -> bool {
        !segment.is_empty() && segment.chars().all(is_tone_char)
    }

    pub fn without_tones(&self) -> PhonemeString {
        PhonemeString {
            segments: self
                .segments
                .iter()
                .filter(|s| !Self::is_tone_segment(s))
                .cloned()
                .collect(),
        }
    }

    /// Concatenated segments with syllable breaks shown as spaces.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for s in &self.segments {
            if s == SYLLABLE_BREAK {
                out.push(' ');
            } else {
                out.push_str(s);
            }
        }
        out
    }

    /// Corpus column form: segments joined by `·`.
    pub fn to_column(&self) -> String {
        let mut out = String::new();
        for (i, s) in self.segments.iter().enumerate() {
            if i > 0 {
                out.push(SEGMENT_SEPARATOR);
            }
            out.push_str(s);
        }
        out
    }

    pub fn from_column(column: &str) -> Self {
        Self::from_segments(column.split(SEGMENT_SEPARATOR))
    }
}

impl fmt::Display for PhonemeString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "/{}/", self.render())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    #[test]
    fn tone_filter_and_render() {
        let p = PhonemeString::from_segments(["t", "j", "ɛ", "n", "˥˩", ".", "ts", "ɯ", "˨˩˦"]);
        assert_eq!(p.without_tones().render(), "tjɛn tsɯ");
        assert!(p.is_valid_ipa());
        assert_eq!(p.to_string(), "/tjɛn˥˩ tsɯ˨˩˦/");
    }

    #[test]
    fn column_round_trip() {
        let p = PhonemeString::from_segments(["d͡ʒ", "ɛ", "ə"]);
        assert_eq!(p.to_column(), "d͡ʒ·ɛ·ə");
        assert_eq!(PhonemeString::from_column(&p.to_column()), p);
        assert!(PhonemeString::from_column("").is_empty());
    }

    #[test]
    fn charset_excludes_punctuation_and_uppercase() {
        assert!(!is_ipa_char('A'));
        assert!(!is_ipa_char('#'));
        assert!(is_ipa_char('ʰ'));
        assert!(is_ipa_char('\u{0361}'));
    }
}
