//! Algorithmic Hangul syllable (de)composition.

use super::TranscriptionError;

const SYLLABLE_BASE: u32 = 0xAC00;
const SYLLABLE_LAST: u32 = 0xD7A3;
const LEAD_BASE: u32 = 0x1100;
const VOWEL_BASE: u32 = 0x1161;
const TAIL_BASE: u32 = 0x11A7;
const VOWEL_COUNT: u32 = 21;
const TAIL_COUNT: u32 = 28;

/// Jamo indices of a precomposed syllable; `tail == 0` means no final.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HangulJamo {
    pub lead: u8,
    pub vowel: u8,
    pub tail: u8,
}

pub fn is_hangul_syllable(c: char) -> bool {
    (SYLLABLE_BASE..=SYLLABLE_LAST).contains(&(c as u32))
}

pub fn decompose_hangul(syllable: char) -> Result<HangulJamo, TranscriptionError> {
    if !is_hangul_syllable(syllable) {
        return Err(TranscriptionError::NotHangulSyllable(syllable as u32));
    }
    let n = syllable as u32 - SYLLABLE_BASE;
    Ok(HangulJamo {
        lead: (n / (VOWEL_COUNT * TAIL_COUNT)) as u8,
        vowel: ((n / TAIL_COUNT) % VOWEL_COUNT) as u8,
        tail: (n % TAIL_COUNT) as u8,
    })
}

impl HangulJamo {
    /// `None` when an index is out of range.
    pub fn new(lead: u8, vowel: u8, tail: u8) -> Option<Self> {
        (lead < 19 && u32::from(vowel) < VOWEL_COUNT && u32::from(tail) < TAIL_COUNT)
            .then_some(HangulJamo { lead, vowel, tail })
    }

    pub fn compose(self) -> char {
        let cp = SYLLABLE_BASE
            + (u32::from(self.lead) * VOWEL_COUNT + u32::from(self.vowel)) * TAIL_COUNT
            + u32::from(self.tail);
        char::from_u32(cp).expect("jamo indices in range")
    }

    /// Conjoining jamo codepoints (U+1100 block), two or three of them.
    pub fn conjoining(self) -> impl Iterator<Item = char> {
        let lead = char::from_u32(LEAD_BASE + u32::from(self.lead));
        let vowel = char::from_u32(VOWEL_BASE + u32::from(self.vowel));
        let tail = (self.tail > 0)
            .then(|| char::from_u32(TAIL_BASE + u32::from(self.tail)))
            .flatten();
        lead.into_iter().chain(vowel).chain(tail)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_syllables() {
        assert_eq!(
            decompose_hangul('가').unwrap(),
            HangulJamo { lead: 0, vowel: 0, tail: 0 }
        );
        assert_eq!(
            decompose_hangul('힣').unwrap(),
            HangulJamo { lead: 18, vowel: 20, tail: 27 }
        );
    }

    #[test]
    fn be_by_hand() {
        // 0xBCA0 - 0xAC00 = 4256 = (7*21 + 5)*28 + 0
        assert_eq!(
            decompose_hangul('\u{BCA0}').unwrap(),
            HangulJamo { lead: 7, vowel: 5, tail: 0 }
        );
    }

    #[test]
    fn rejects_non_syllables() {
        assert!(matches!(
            decompose_hangul('a'),
            Err(TranscriptionError::NotHangulSyllable(0x61))
        ));
        assert!(decompose_hangul('\u{D7A4}').is_err());
        assert!(decompose_hangul('\u{ABFF}').is_err());
    }

    #[test]
    fn round_trip_all_syllables() {
        for cp in SYLLABLE_BASE..=SYLLABLE_LAST {
            let c = char::from_u32(cp).unwrap();
            assert_eq!(decompose_hangul(c).unwrap().compose(), c);
        }
    }

    #[test]
    fn conjoining_forms() {
        let j: alloc::vec::Vec<char> = decompose_hangul('남').unwrap().conjoining().collect();
        assert_eq!(j, ['\u{1102}', '\u{1161}', '\u{11B7}']);
    }
}
