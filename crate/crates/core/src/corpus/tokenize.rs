use alloc::vec;
use alloc::vec::Vec;

use super::{AlignedExample, CorpusError, Vocabulary, PAD, UNK};
use crate::{Lang, Matrix};

/// Both subtoken streams of one sentence with their word maps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedRow {
    pub ortho: Vec<u32>,
    pub ortho_word: Vec<usize>,
    pub phone: Vec<u32>,
    pub phone_word: Vec<usize>,
    /// Language index of each word.
    pub word_lang: Vec<usize>,
}

impl TokenizedRow {
    pub fn words(&self) -> usize {
        self.word_lang.len()
    }

    /// Orthographic subtoken positions of word `m`.
    pub fn ortho_span(&self, m: usize) -> core::ops::Range<usize> {
        span(&self.ortho_word, m)
    }

    pub fn phone_span(&self, m: usize) -> core::ops::Range<usize> {
        span(&self.phone_word, m)
    }
}

// word maps are sorted, so each word owns one contiguous range
fn span(map: &[usize], m: usize) -> core::ops::Range<usize> {
    let start = map.partition_point(|&w| w < m);
    let end = map.partition_point(|&w| w <= m);
    start..end
}

/// Greedy longest-match tokenization of both streams. `langs` maps word
/// languages to embedding rows. A word with an empty phonemic column gets a
/// single [`UNK`] phone.
pub fn tokenize(
    example: &AlignedExample,
    vocab: &Vocabulary,
    langs: &[Lang],
) -> Result<TokenizedRow, CorpusError> {
    let mut row = TokenizedRow {
        ortho: Vec::new(),
        ortho_word: Vec::new(),
        phone: Vec::new(),
        phone_word: Vec::new(),
        word_lang: Vec::with_capacity(example.len()),
    };
    for (m, w) in example.words().iter().enumerate() {
        let o = vocab.encode_surface(&w.surface);
        row.ortho_word.extend(core::iter::repeat_n(m, o.len()));
        row.ortho.extend(o);
        let p = if w.ipa.is_empty() {
            vec![UNK]
        } else {
            vocab.encode_segments(w.ipa.segments())
        };
        row.phone_word.extend(core::iter::repeat_n(m, p.len()));
        row.phone.extend(p);
        let l = langs
            .iter()
            .position(|l| *l == w.lang)
            .ok_or_else(|| CorpusError::UnknownLanguage(w.lang.clone()))?;
        row.word_lang.push(l);
    }
    Ok(row)
}

/// Rows padded to common lengths, with attention masks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubtokenBatch {
    rows: Vec<TokenizedRow>,
    ortho_len: usize,
    phone_len: usize,
}

impl SubtokenBatch {
    pub fn new(rows: Vec<TokenizedRow>) -> Self {
        let ortho_len = rows.iter().map(|r| r.ortho.len()).max().unwrap_or(0);
        let phone_len = rows.iter().map(|r| r.phone.len()).max().unwrap_or(0);
        SubtokenBatch {
            rows,
            ortho_len,
            phone_len,
        }
    }

    pub fn rows(&self) -> &[TokenizedRow] {
        &self.rows
    }

    pub fn batch_size(&self) -> usize {
        self.rows.len()
    }

    /// Padded orthographic length `T`.
    pub fn ortho_len(&self) -> usize {
        self.ortho_len
    }

    /// Padded phonemic length `T'`.
    pub fn phone_len(&self) -> usize {
        self.phone_len
    }

    /// Orthographic ids `[B×T]`, row-major, [`PAD`]-filled.
    pub fn ortho_ids(&self) -> Vec<u32> {
        pad(self.rows.iter().map(|r| &r.ortho[..]), self.ortho_len)
    }

    pub fn phone_ids(&self) -> Vec<u32> {
        pad(self.rows.iter().map(|r| &r.phone[..]), self.phone_len)
    }

    /// `true` at real (non-pad) orthographic positions, `[B×T]`.
    pub fn ortho_mask(&self) -> Vec<bool> {
        mask(self.rows.iter().map(|r| r.ortho.len()), self.ortho_len)
    }

    pub fn phone_mask(&self) -> Vec<bool> {
        mask(self.rows.iter().map(|r| r.phone.len()), self.phone_len)
    }

    /// All subtokens share segment 0.
    pub fn segment_ids(&self) -> Vec<u32> {
        vec![0; self.rows.len() * self.ortho_len]
    }
}

fn pad<'a>(rows: impl Iterator<Item = &'a [u32]>, len: usize) -> Vec<u32> {
    let mut out = Vec::new();
    for r in rows {
        out.extend_from_slice(r);
        out.extend(core::iter::repeat_n(PAD, len - r.len()));
    }
    out
}

fn mask(lens: impl Iterator<Item = usize>, len: usize) -> Vec<bool> {
    let mut out = Vec::new();
    for n in lens {
        out.extend((0..len).map(|i| i < n));
    }
    out
}

/// Row `m` of the result is the mean of the rows of `vectors` mapped to word `m`.
pub fn pool_subtokens(vectors: &Matrix, word_map: &[usize]) -> Result<Matrix, CorpusError> {
    assert_eq!(vectors.rows(), word_map.len(), "word map length");
    let words = word_map.iter().max().map_or(0, |&m| m + 1);
    let mut out = Matrix::zeros(words, vectors.cols());
    let mut counts = vec![0usize; words];
    for (t, &m) in word_map.iter().enumerate() {
        counts[m] += 1;
        for (o, v) in out.row_mut(m).iter_mut().zip(vectors.row(t)) {
            *o += v;
        }
    }
    for (m, &n) in counts.iter().enumerate() {
        if n == 0 {
            return Err(CorpusError::DegenerateAlignment { word: m });
        }
        let inv = 1.0 / n as f64;
        out.row_mut(m).iter_mut().for_each(|x| *x *= inv);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Word, MASK};
    use crate::transcription::PhonemeString;

    fn example() -> AlignedExample {
        AlignedExample::new(
            Lang::zh(),
            vec![
                Word::new("ab", PhonemeString::from_segments(["a", "b", "ŋ"]), None, Lang::zh()),
                Word::new("c", PhonemeString::new(), None, Lang::vi()),
            ],
        )
    }

    #[test]
    fn word_maps_and_languages() {
        let v = Vocabulary::from_entries(["a", "b", "c"]).extend(["ŋ"]);
        let row = tokenize(&example(), &v, &[Lang::zh(), Lang::vi()]).unwrap();
        assert_eq!(row.ortho, [5, 6, 7]);
        assert_eq!(row.ortho_word, [0, 0, 1]);
        assert_eq!(row.phone, [5, 6, 8, UNK]);
        assert_eq!(row.phone_word, [0, 0, 0, 1]);
        assert_eq!(row.word_lang, [0, 1]);
        assert_eq!(row.ortho_span(1), 2..3);
        assert_eq!(row.phone_span(0), 0..3);
        assert!(tokenize(&example(), &v, &[Lang::zh()]).is_err());
    }

    #[test]
    fn batch_padding() {
        let v = Vocabulary::from_entries(["a", "b", "c"]);
        let r1 = tokenize(&example(), &v, &[Lang::zh(), Lang::vi()]).unwrap();
        let mut r2 = r1.clone();
        r2.ortho.truncate(1);
        r2.ortho[0] = MASK;
        let b = SubtokenBatch::new(vec![r1, r2]);
        assert_eq!(b.ortho_ids(), [5, 6, 7, MASK, PAD, PAD]);
        assert_eq!(b.ortho_mask(), [true, true, true, true, false, false]);
    }

    #[test]
    fn pooling() {
        let v = Matrix::from_rows(&[&[1.0, 0.0], &[0.0, 1.0], &[3.0, 3.0]]);
        let p = pool_subtokens(&v, &[0, 0, 1]).unwrap();
        assert_eq!(p, Matrix::from_rows(&[&[0.5, 0.5], &[3.0, 3.0]]));
        assert_eq!(
            pool_subtokens(&v, &[0, 0, 2]).unwrap_err(),
            CorpusError::DegenerateAlignment { word: 1 }
        );
    }
}
