//! Entity-level and token-level F1, and seed aggregation.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::corpus::TagSet;
use crate::math::sqrt;
use crate::Lang;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Task {
    /// Named entities, BIO tags, scored on exact spans.
    Ner,
    /// Part of speech, scored per token.
    Pos,
}

impl Task {
    pub fn default_tags(self) -> TagSet {
        match self {
            Task::Ner => TagSet::ner(),
            Task::Pos => TagSet::pos(),
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Ner => "ner",
            Task::Pos => "pos",
        })
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ner" | "panx" => Ok(Task::Ner),
            "pos" | "udpos" => Ok(Task::Pos),
            other => Err(alloc::format!("unknown task {other:?}")),
        }
    }
}

/// Precision, recall and F1 in percent.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Score {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Score {
    fn from_counts(tp: usize, predicted: usize, gold: usize) -> Score {
        if predicted == 0 && gold == 0 {
            return Score {
                precision: 100.0,
                recall: 100.0,
                f1: 100.0,
            };
        }
        let p = if predicted == 0 { 0.0 } else { tp as f64 / predicted as f64 };
        let r = if gold == 0 { 0.0 } else { tp as f64 / gold as f64 };
        let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        Score {
            precision: 100.0 * p,
            recall: 100.0 * r,
            f1: 100.0 * f,
        }
    }
}

/// A labelled span `[start, end)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Chunk {
    pub start: usize,
    pub end: usize,
    pub kind: String,
}

/// BIO chunks. An `I-X` that does not continue an `X` chunk opens a new
/// one; tags without a `B-`/`I-` prefix count as outside.
pub fn bio_chunks<S: AsRef<str>>(tags: &[S]) -> Vec<Chunk> {
    let mut out = Vec::new();
    let mut open: Option<(usize, &str)> = None;
    for (i, tag) in tags.iter().enumerate() {
        let tag = tag.as_ref();
        let (begin, kind) = match (tag.strip_prefix("B-"), tag.strip_prefix("I-")) {
            (Some(k), _) => (true, Some(k)),
            (_, Some(k)) => (false, Some(k)),
            _ => (false, None),
        };
        let continues = matches!((open, kind), (Some((_, o)), Some(k)) if !begin && o == k);
        if continues {
            continue;
        }
        if let Some((s, k)) = open.take() {
            out.push(Chunk {
                start: s,
                end: i,
                kind: k.into(),
            });
        }
        if let Some(k) = kind {
            open = Some((i, k));
        }
    }
    if let Some((s, k)) = open {
        out.push(Chunk {
            start: s,
            end: tags.len(),
            kind: k.into(),
        });
    }
    out
}

/// Exact-match span F1 over sentences.
pub fn ner_score<S: AsRef<str>>(gold: &[Vec<S>], pred: &[Vec<S>]) -> Score {
    assert_eq!(gold.len(), pred.len(), "sentence counts differ");
    let (mut tp, mut np, mut ng) = (0, 0, 0);
    for (g, p) in gold.iter().zip(pred) {
        assert_eq!(g.len(), p.len(), "sentence lengths differ");
        let gc = bio_chunks(g);
        let pc = bio_chunks(p);
        tp += pc.iter().filter(|c| gc.contains(c)).count();
        np += pc.len();
        ng += gc.len();
    }
    Score::from_counts(tp, np, ng)
}

/// Micro-averaged token F1 (every token carries exactly one tag, so this is
/// accuracy).
pub fn pos_score<S: AsRef<str>>(gold: &[Vec<S>], pred: &[Vec<S>]) -> Score {
    assert_eq!(gold.len(), pred.len(), "sentence counts differ");
    let (mut tp, mut n) = (0, 0);
    for (g, p) in gold.iter().zip(pred) {
        assert_eq!(g.len(), p.len(), "sentence lengths differ");
        tp += g.iter().zip(p).filter(|(a, b)| a.as_ref() == b.as_ref()).count();
        n += g.len();
    }
    Score::from_counts(tp, n, n)
}

pub fn score<S: AsRef<str>>(task: Task, gold: &[Vec<S>], pred: &[Vec<S>]) -> Score {
    match task {
        Task::Ner => ner_score(gold, pred),
        Task::Pos => pos_score(gold, pred),
    }
}

/// Mean and, from two values on, the sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub stdev: Option<f64>,
}

pub fn summarize(values: &[f64]) -> Summary {
    let n = values.len() as f64;
    let mean = if values.is_empty() { 0.0 } else { values.iter().sum::<f64>() / n };
    let stdev = (values.len() >= 2).then(|| {
        sqrt(values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0))
    });
    Summary { mean, stdev }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.stdev {
            Some(s) => write!(f, "{:.2} ± {:.2}", self.mean, s),
            None => write!(f, "{:.2}", self.mean),
        }
    }
}

/// Scores of one language across seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct LangScores {
    pub lang: Lang,
    pub seeds: Vec<u64>,
    pub scores: Vec<Score>,
}

impl LangScores {
    pub fn f1(&self) -> Summary {
        summarize(&self.scores.iter().map(|s| s.f1).collect::<Vec<_>>())
    }

    pub fn precision(&self) -> Summary {
        summarize(&self.scores.iter().map(|s| s.precision).collect::<Vec<_>>())
    }

    pub fn recall(&self) -> Summary {
        summarize(&self.scores.iter().map(|s| s.recall).collect::<Vec<_>>())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub task: Task,
    pub languages: Vec<LangScores>,
}

impl EvalReport {
    pub fn lang(&self, lang: &Lang) -> Option<&LangScores> {
        self.languages.iter().find(|l| &l.lang == lang)
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.languages {
            writeln!(
                f,
                "{}\t{}\tP {}\tR {}\tF1 {}\t(seeds {})",
                self.task,
                l.lang,
                l.precision(),
                l.recall(),
                l.f1(),
                l.seeds.len()
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn tags(s: &str) -> Vec<&str> {
        s.split(' ').collect()
    }

    #[test]
    fn chunking() {
        let c = bio_chunks(&tags("B-PER I-PER O I-LOC I-LOC B-LOC I-ORG"));
        let spans: Vec<_> = c.iter().map(|c| (c.start, c.end, c.kind.as_str())).collect();
        assert_eq!(spans, [(0, 2, "PER"), (3, 5, "LOC"), (5, 6, "LOC"), (6, 7, "ORG")]);
    }

    #[test]
    fn perfect_and_empty_predictions() {
        let gold = vec![tags("B-PER I-PER O"), tags("O B-LOC")];
        assert_eq!(ner_score(&gold, &gold).f1, 100.0);
        let none = vec![tags("O O O"), tags("O O")];
        assert_eq!(ner_score(&gold, &none).f1, 0.0);
        assert_eq!(ner_score(&none, &none).f1, 100.0);
    }

    #[test]
    fn one_boundary_error() {
        // gold: 3 chunks; prediction cuts one short: 2 of 3 correct both ways
        let gold = vec![tags("B-PER I-PER O"), tags("B-ORG O"), tags("O B-LOC I-LOC")];
        let pred = vec![tags("B-PER O O"), tags("B-ORG O"), tags("O B-LOC I-LOC")];
        let s = ner_score(&gold, &pred);
        assert!((s.precision - 200.0 / 3.0).abs() < 1e-12);
        assert!((s.f1 - 200.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn pos_is_accuracy() {
        let gold = vec![tags("NOUN VERB"), tags("ADJ")];
        let pred = vec![tags("NOUN NOUN"), tags("ADJ")];
        assert!((pos_score(&gold, &pred).f1 - 200.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn summaries() {
        assert_eq!(summarize(&[3.0]).stdev, None);
        let s = summarize(&[1.0, 2.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.stdev, Some(1.0));
    }
}
