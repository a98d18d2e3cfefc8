use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use crate::math::{exp, logsumexp};
use crate::nnet::{CustomBackward, Tape, Var};
use crate::Matrix;

/// Linear-chain CRF scores over `K` tags.
#[derive(Debug, Clone, PartialEq)]
pub struct CrfParams {
    /// `transitions[(from, to)]`, `K×K`.
    pub transitions: Matrix,
    pub start: Vec<f64>,
    pub stop: Vec<f64>,
}

impl CrfParams {
    pub fn zeros(k: usize) -> Self {
        CrfParams {
            transitions: Matrix::zeros(k, k),
            start: vec![0.0; k],
            stop: vec![0.0; k],
        }
    }

    pub fn tags(&self) -> usize {
        self.start.len()
    }

    /// Unnormalised log-score of one tag path.
    pub fn path_score(&self, emissions: &Matrix, labels: &[usize]) -> f64 {
        let mut s = self.start[labels[0]] + emissions.get(0, labels[0]);
        for m in 1..labels.len() {
            s += self.transitions.get(labels[m - 1], labels[m]) + emissions.get(m, labels[m]);
        }
        s + self.stop[labels[labels.len() - 1]]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrfGrad {
    pub nll: f64,
    pub emissions: Matrix,
    pub transitions: Matrix,
    pub start: Vec<f64>,
    pub stop: Vec<f64>,
}

fn forward(emissions: &Matrix, crf: &CrfParams) -> (Matrix, f64) {
    let (m, k) = emissions.shape();
    let mut alpha = Matrix::zeros(m, k);
    for j in 0..k {
        alpha.set(0, j, crf.start[j] + emissions.get(0, j));
    }
    let mut buf = vec![0.0; k];
    for t in 1..m {
        for j in 0..k {
            for (i, b) in buf.iter_mut().enumerate() {
                *b = alpha.get(t - 1, i) + crf.transitions.get(i, j);
            }
            alpha.set(t, j, logsumexp(&buf) + emissions.get(t, j));
        }
    }
    for (j, b) in buf.iter_mut().enumerate() {
        *b = alpha.get(m - 1, j) + crf.stop[j];
    }
    let log_z = logsumexp(&buf);
    (alpha, log_z)
}

/// `log Z − score(labels)` with the partition function from the forward
/// recursion in log space.
pub fn crf_nll(emissions: &Matrix, labels: &[usize], crf: &CrfParams) -> f64 {
    assert_eq!(emissions.rows(), labels.len(), "one label per word");
    let (_, log_z) = forward(emissions, crf);
    log_z - crf.path_score(emissions, labels)
}

/// Negative log-likelihood with gradients from forward-backward marginals.
pub fn crf_nll_grad(emissions: &Matrix, labels: &[usize], crf: &CrfParams) -> CrfGrad {
    let (m, k) = emissions.shape();
    assert_eq!(m, labels.len(), "one label per word");
    let (alpha, log_z) = forward(emissions, crf);
    let mut beta = Matrix::zeros(m, k);
    for j in 0..k {
        beta.set(m - 1, j, crf.stop[j]);
    }
    let mut buf = vec![0.0; k];
    for t in (0..m - 1).rev() {
        for i in 0..k {
            for (j, b) in buf.iter_mut().enumerate() {
                *b = crf.transitions.get(i, j) + emissions.get(t + 1, j) + beta.get(t + 1, j);
            }
            beta.set(t, i, logsumexp(&buf));
        }
    }

    let mut g = CrfGrad {
        nll: log_z - crf.path_score(emissions, labels),
        emissions: Matrix::zeros(m, k),
        transitions: Matrix::zeros(k, k),
        start: vec![0.0; k],
        stop: vec![0.0; k],
    };
    for t in 0..m {
        for j in 0..k {
            let p = exp(alpha.get(t, j) + beta.get(t, j) - log_z);
            g.emissions.set(t, j, p);
            if t == 0 {
                g.start[j] = p;
            }
            if t == m - 1 {
                g.stop[j] = p;
            }
        }
    }
    for t in 0..m.saturating_sub(1) {
        for i in 0..k {
            for j in 0..k {
                let p = exp(
                    alpha.get(t, i) + crf.transitions.get(i, j) + emissions.get(t + 1, j) + beta.get(t + 1, j)
                        - log_z,
                );
                let v = g.transitions.get(i, j) + p;
                g.transitions.set(i, j, v);
            }
        }
    }
    for (t, &y) in labels.iter().enumerate() {
        let v = g.emissions.get(t, y) - 1.0;
        g.emissions.set(t, y, v);
        if t > 0 {
            let prev = labels[t - 1];
            let v = g.transitions.get(prev, y) - 1.0;
            g.transitions.set(prev, y, v);
        }
    }
    g.start[labels[0]] -= 1.0;
    g.stop[labels[m - 1]] -= 1.0;
    g
}

/// Highest-scoring tag path; among equal scores the lexicographically
/// smallest path wins.
pub fn crf_decode(emissions: &Matrix, crf: &CrfParams) -> Vec<usize> {
    let (m, k) = emissions.shape();
    if m == 0 {
        return Vec::new();
    }
    // best[t][j]: best score of positions t.. given tag j at t
    let mut best = Matrix::zeros(m, k);
    for j in 0..k {
        best.set(m - 1, j, emissions.get(m - 1, j) + crf.stop[j]);
    }
    for t in (0..m - 1).rev() {
        for i in 0..k {
            let tail = (0..k)
                .map(|j| crf.transitions.get(i, j) + best.get(t + 1, j))
                .fold(f64::NEG_INFINITY, f64::max);
            best.set(t, i, emissions.get(t, i) + tail);
        }
    }
    let argmax = |scores: &mut dyn Iterator<Item = f64>| {
        let mut arg = 0;
        let mut max = f64::NEG_INFINITY;
        for (j, s) in scores.enumerate() {
            if s > max {
                max = s;
                arg = j;
            }
        }
        arg
    };
    let mut path = Vec::with_capacity(m);
    path.push(argmax(&mut (0..k).map(|j| crf.start[j] + best.get(0, j))));
    for t in 1..m {
        let prev = path[t - 1];
        path.push(argmax(&mut (0..k).map(|j| crf.transitions.get(prev, j) + best.get(t, j))));
    }
    path
}

struct CrfBackward {
    emissions: Matrix,
    transitions: Matrix,
    start: Matrix,
    stop: Matrix,
}

impl CustomBackward for CrfBackward {
    fn backward(&self, out_grad: &Matrix) -> Vec<Option<Matrix>> {
        let u = out_grad.item();
        vec![
            Some(self.emissions.scaled(u)),
            Some(self.transitions.scaled(u)),
            Some(self.start.scaled(u)),
            Some(self.stop.scaled(u)),
        ]
    }
}

/// Tape nodes of the CRF scores; `start` and `stop` are `1×K`.
#[derive(Debug, Clone, Copy)]
pub struct CrfVars {
    pub transitions: Var,
    pub start: Var,
    pub stop: Var,
}

/// `weight · Σ_b NLL_b` over word ranges of stacked `[W×K]` emissions.
pub fn crf_on_tape(
    tape: &mut Tape<'_>,
    emissions: Var,
    vars: CrfVars,
    sentences: &[Range<usize>],
    labels: &[Vec<usize>],
    weight: f64,
) -> Var {
    let CrfVars { transitions, start, stop } = vars;
    let e = tape.value(emissions);
    let crf = CrfParams {
        transitions: tape.value(transitions).clone(),
        start: tape.value(start).data().to_vec(),
        stop: tape.value(stop).data().to_vec(),
    };
    let k = crf.tags();
    let mut back = CrfBackward {
        emissions: Matrix::zeros(e.rows(), k),
        transitions: Matrix::zeros(k, k),
        start: Matrix::zeros(1, k),
        stop: Matrix::zeros(1, k),
    };
    let mut total = 0.0;
    for (range, y) in sentences.iter().zip(labels) {
        let mut em = Matrix::zeros(range.len(), k);
        for (r, src) in range.clone().enumerate() {
            em.row_mut(r).copy_from_slice(e.row(src));
        }
        let g = crf_nll_grad(&em, y, &crf);
        total += weight * g.nll;
        for (r, dst) in range.clone().enumerate() {
            for (d, s) in back.emissions.row_mut(dst).iter_mut().zip(g.emissions.row(r)) {
                *d += weight * s;
            }
        }
        back.transitions.add_scaled(&g.transitions, weight);
        for j in 0..k {
            back.start.data_mut()[j] += weight * g.start[j];
            back.stop.data_mut()[j] += weight * g.stop[j];
        }
    }
    tape.custom(
        Matrix::scalar(total),
        vec![emissions, transitions, start, stop],
        Box::new(back),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::ln;

    #[test]
    fn single_position_two_tags() {
        let e = Matrix::from_rows(&[&[0.7, -0.4]]);
        let crf = CrfParams::zeros(2);
        let want = logsumexp(&[0.7, -0.4]) - 0.7;
        assert!((crf_nll(&e, &[0], &crf) - want).abs() < 1e-15);
    }

    #[test]
    fn all_zero_scores_are_uniform() {
        let crf = CrfParams::zeros(3);
        let e = Matrix::zeros(4, 3);
        assert!((crf_nll(&e, &[0, 2, 1, 1], &crf) - 4.0 * ln(3.0)).abs() < 1e-12);
    }

    #[test]
    fn decode_trivial_cases() {
        let crf = CrfParams::zeros(1);
        assert_eq!(crf_decode(&Matrix::zeros(3, 1), &crf), [0, 0, 0]);
        let crf = CrfParams::zeros(3);
        let e = Matrix::from_rows(&[&[0.0, 9.0, 0.0], &[9.0, 0.0, 0.0], &[0.0, 0.0, 9.0]]);
        assert_eq!(crf_decode(&e, &crf), [1, 0, 2]);
        // exact ties resolve to the lowest index
        assert_eq!(crf_decode(&Matrix::zeros(2, 3), &crf), [0, 0]);
    }
}
