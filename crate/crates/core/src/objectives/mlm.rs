use alloc::vec::Vec;

use rand::seq::index;

use crate::corpus::{TokenizedRow, MASK};
use crate::math::{logsumexp, round_half_up};
use crate::nnet::{Model, Tape, Var};
use crate::rng::Rng;
use crate::Matrix;

/// Words chosen for masking and the subtokens they covered.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MaskPlan {
    pub words: Vec<usize>,
    /// Orthographic subtoken positions replaced by [`MASK`].
    pub positions: Vec<usize>,
    /// Ids at `positions` before masking.
    pub originals: Vec<u32>,
}

impl MaskPlan {
    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Number of words masked out of `words` at fraction `mu`.
pub fn mask_count(mu: f64, words: usize) -> usize {
    if words == 0 || mu <= 0.0 {
        return 0;
    }
    round_half_up(mu * words as f64).clamp(1, words)
}

/// Whole-word masking: every orthographic subtoken of each chosen word
/// becomes [`MASK`]; the phonemic stream is left alone.
pub fn mask_tokens(row: &TokenizedRow, mu: f64, rng: &mut Rng) -> (TokenizedRow, MaskPlan) {
    assert!((0.0..=1.0).contains(&mu), "mask fraction outside [0, 1]");
    let n = mask_count(mu, row.words());
    let mut plan = MaskPlan::default();
    if n == 0 {
        return (row.clone(), plan);
    }
    let mut words = index::sample(rng, row.words(), n).into_vec();
    words.sort_unstable();
    let mut out = row.clone();
    for &m in &words {
        for pos in row.ortho_span(m) {
            plan.positions.push(pos);
            plan.originals.push(row.ortho[pos]);
            out.ortho[pos] = MASK;
        }
    }
    plan.words = words;
    (out, plan)
}

/// Mean cross-entropy of the tied output head at the masked positions:
/// logits are `v_j · W_tᵀ + b`. An empty plan gives 0.
pub fn mlm_loss(hidden: &Matrix, plan: &MaskPlan, w_tok: &Matrix, bias: &[f64]) -> f64 {
    if plan.is_empty() {
        return 0.0;
    }
    let mut total = 0.0;
    for (&pos, &target) in plan.positions.iter().zip(&plan.originals) {
        let h = hidden.row(pos);
        let logits: Vec<f64> = (0..w_tok.rows())
            .map(|v| crate::tensor::dot(h, w_tok.row(v)) + bias[v])
            .collect();
        total += logsumexp(&logits) - logits[target as usize];
    }
    total / plan.positions.len() as f64
}

/// `weight · Σ_b mlm_loss(b)` for a padded batch whose hidden rows are
/// `b · len + position`. Returns `None` when nothing is masked.
pub fn mlm_on_tape(
    tape: &mut Tape<'_>,
    model: &Model,
    hidden: Var,
    len: usize,
    plans: &[MaskPlan],
    weight: f64,
) -> Option<Var> {
    let mut rows = Vec::new();
    let mut targets = Vec::new();
    let mut weights = Vec::new();
    for (b, plan) in plans.iter().enumerate() {
        let w = weight / plan.positions.len().max(1) as f64;
        for (&pos, &t) in plan.positions.iter().zip(&plan.originals) {
            rows.push(b * len + pos);
            targets.push(t as usize);
            weights.push(w);
        }
    }
    if rows.is_empty() {
        return None;
    }
    let sel = tape.select_rows(hidden, rows);
    let w_tok = tape.param(model.ids.tok);
    let logits = tape.matmul_t(sel, w_tok);
    let bias = tape.param(model.ids.mlm_bias);
    let logits = tape.add_row_bias(logits, bias);
    Some(tape.softmax_cross_entropy(logits, targets, weights))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::ln;
    use crate::rng::{stream, Stream};
    use alloc::vec;

    fn row(words: usize) -> TokenizedRow {
        // word m has m % 2 + 1 orthographic subtokens
        let mut r = TokenizedRow {
            ortho: Vec::new(),
            ortho_word: Vec::new(),
            phone: Vec::new(),
            phone_word: Vec::new(),
            word_lang: vec![0; words],
        };
        for m in 0..words {
            for _ in 0..(m % 2 + 1) {
                r.ortho.push(10 + m as u32);
                r.ortho_word.push(m);
            }
            r.phone.push(50 + m as u32);
            r.phone_word.push(m);
        }
        r
    }

    #[test]
    fn counts() {
        assert_eq!(mask_count(0.0, 10), 0);
        assert_eq!(mask_count(0.2, 10), 2);
        assert_eq!(mask_count(0.05, 3), 1);
        assert_eq!(mask_count(1.0, 7), 7);
        assert_eq!(mask_count(0.5, 0), 0);
    }

    #[test]
    fn forced_extremes() {
        let r = row(4);
        let mut rng = stream(0, Stream::Mask, &[]);
        let (same, plan) = mask_tokens(&r, 0.0, &mut rng);
        assert_eq!(same, r);
        assert!(plan.is_empty());
        let (all, plan) = mask_tokens(&r, 1.0, &mut rng);
        assert!(all.ortho.iter().all(|&t| t == MASK));
        assert_eq!(all.phone, r.phone);
        assert_eq!(plan.words, [0, 1, 2, 3]);
        assert_eq!(plan.positions.len(), r.ortho.len());
    }

    #[test]
    fn selection_frequencies() {
        let r = row(10);
        let mut counts = [0usize; 10];
        for trial in 0..10_000u64 {
            let (_, plan) = mask_tokens(&r, 0.2, &mut stream(5, Stream::Mask, &[trial]));
            assert_eq!(plan.words.len(), 2);
            for w in plan.words {
                counts[w] += 1;
            }
        }
        for c in counts {
            assert!((1860..=2140).contains(&c), "{c}");
        }
    }

    #[test]
    fn uniform_logits_give_ln_v() {
        let plan = MaskPlan {
            words: vec![0],
            positions: vec![0],
            originals: vec![3],
        };
        let w = Matrix::zeros(9, 4);
        let h = Matrix::filled(1, 4, 0.3);
        assert!((mlm_loss(&h, &plan, &w, &[0.0; 9]) - ln(9.0)).abs() < 1e-14);
        assert_eq!(mlm_loss(&h, &MaskPlan::default(), &w, &[0.0; 9]), 0.0);
    }
}
