use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use super::ObjectiveError;
use crate::math::{exp, logsumexp, sqrt};
use crate::nnet::{CustomBackward, Tape, Var};
use crate::tensor::dot;
use crate::Matrix;

/// Loss value with gradients for both modalities and the log-temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentGrad {
    pub loss: f64,
    pub d_ortho: Matrix,
    pub d_phone: Matrix,
    pub d_log_tau: f64,
}

fn normalized(m: &Matrix) -> Result<(Matrix, Vec<f64>), ObjectiveError> {
    let mut out = m.clone();
    let mut norms = Vec::with_capacity(m.rows());
    for r in 0..m.rows() {
        let n = sqrt(dot(m.row(r), m.row(r)));
        if n == 0.0 || !n.is_finite() {
            return Err(ObjectiveError::DegenerateEmbedding { word: r });
        }
        out.row_mut(r).iter_mut().for_each(|x| *x /= n);
        norms.push(n);
    }
    Ok((out, norms))
}

/// Symmetric in-sentence contrastive loss between orthographic and
/// phonemic word vectors: `S = τ·cos(o_i, p_j)`, cross-entropy towards the
/// diagonal over rows and over columns, averaged.
pub fn alignment_loss(ortho: &Matrix, phone: &Matrix, tau: f64) -> Result<f64, ObjectiveError> {
    alignment_loss_grad(ortho, phone, tau).map(|g| g.loss)
}

pub fn alignment_loss_grad(ortho: &Matrix, phone: &Matrix, tau: f64) -> Result<AlignmentGrad, ObjectiveError> {
    assert_eq!(ortho.shape(), phone.shape(), "modalities differ in shape");
    let m = ortho.rows();
    assert!(m > 0, "empty sentence");
    let (oh, on) = normalized(ortho)?;
    let (ph, pn) = normalized(phone)?;
    let s = oh.matmul_t(&ph).scaled(tau);

    let mut row_sm = s.clone();
    let mut col_sm = s.clone();
    let mut loss_rows = 0.0;
    let mut loss_cols = 0.0;
    let mut col = vec![0.0; m];
    for i in 0..m {
        let lse = logsumexp(s.row(i));
        loss_rows += lse - s.get(i, i);
        row_sm.row_mut(i).iter_mut().for_each(|x| *x = exp(*x - lse));
    }
    for j in 0..m {
        for (i, c) in col.iter_mut().enumerate() {
            *c = s.get(i, j);
        }
        let lse = logsumexp(&col);
        loss_cols += lse - s.get(j, j);
        for i in 0..m {
            col_sm.set(i, j, exp(s.get(i, j) - lse));
        }
    }
    let loss = (loss_rows + loss_cols) / (2.0 * m as f64);

    // dL/dS
    let mut g = row_sm;
    g.add_assign(&col_sm);
    for i in 0..m {
        let v = g.get(i, i) - 2.0;
        g.set(i, i, v);
    }
    g.scale(1.0 / (2.0 * m as f64));

    let d_log_tau: f64 = g.data().iter().zip(s.data()).map(|(a, b)| a * b).sum();
    let d_oh = g.matmul(&ph).scaled(tau);
    let d_ph = g.t_matmul(&oh).scaled(tau);
    Ok(AlignmentGrad {
        loss,
        d_ortho: unnormalize_grad(&d_oh, &oh, &on),
        d_phone: unnormalize_grad(&d_ph, &ph, &pn),
        d_log_tau,
    })
}

// d/dx of x/|x| applied to an upstream gradient
fn unnormalize_grad(g: &Matrix, xh: &Matrix, norms: &[f64]) -> Matrix {
    let mut out = g.clone();
    for r in 0..g.rows() {
        let proj = dot(xh.row(r), g.row(r));
        for (o, x) in out.row_mut(r).iter_mut().zip(xh.row(r)) {
            *o = (*o - x * proj) / norms[r];
        }
    }
    out
}

struct AlignmentBackward {
    d_ortho: Matrix,
    d_phone: Matrix,
    d_log_tau: f64,
}

impl CustomBackward for AlignmentBackward {
    fn backward(&self, out_grad: &Matrix) -> Vec<Option<Matrix>> {
        let u = out_grad.item();
        vec![
            Some(self.d_ortho.scaled(u)),
            Some(self.d_phone.scaled(u)),
            Some(Matrix::scalar(self.d_log_tau * u)),
        ]
    }
}

/// `Σ_b alignment_loss(sentence b) · weight` over word ranges of stacked
/// `[W×D]` inputs; `log_tau` is a `1×1` node.
pub fn alignment_on_tape(
    tape: &mut Tape<'_>,
    ortho: Var,
    phone: Var,
    log_tau: Var,
    sentences: &[Range<usize>],
    weight: f64,
) -> Result<Var, ObjectiveError> {
    let o = tape.value(ortho);
    let p = tape.value(phone);
    let tau = exp(tape.value(log_tau).item());
    let mut d_ortho = Matrix::zeros(o.rows(), o.cols());
    let mut d_phone = Matrix::zeros(p.rows(), p.cols());
    let mut d_log_tau = 0.0;
    let mut total = 0.0;
    for range in sentences {
        let rows = |m: &Matrix| {
            let mut out = Matrix::zeros(range.len(), m.cols());
            for (k, r) in range.clone().enumerate() {
                out.row_mut(k).copy_from_slice(m.row(r));
            }
            out
        };
        let g = alignment_loss_grad(&rows(o), &rows(p), tau).map_err(|e| match e {
            ObjectiveError::DegenerateEmbedding { word } => {
                ObjectiveError::DegenerateEmbedding { word: range.start + word }
            }
            other => other,
        })?;
        total += weight * g.loss;
        d_log_tau += weight * g.d_log_tau;
        for (k, r) in range.clone().enumerate() {
            for (d, s) in d_ortho.row_mut(r).iter_mut().zip(g.d_ortho.row(k)) {
                *d += weight * s;
            }
            for (d, s) in d_phone.row_mut(r).iter_mut().zip(g.d_phone.row(k)) {
                *d += weight * s;
            }
        }
    }
    Ok(tape.custom(
        Matrix::scalar(total),
        vec![ortho, phone, log_tau],
        Box::new(AlignmentBackward {
            d_ortho,
            d_phone,
            d_log_tau,
        }),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::ln;

    #[test]
    fn single_word_is_zero() {
        let o = Matrix::from_rows(&[&[0.3, -1.0]]);
        let p = Matrix::from_rows(&[&[2.0, 5.0]]);
        assert_eq!(alignment_loss(&o, &p, 14.0).unwrap(), 0.0);
    }

    #[test]
    fn orthonormal_pair() {
        let e = Matrix::from_rows(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let want = ln(1.0 + exp(-1.0));
        assert!((alignment_loss(&e, &e, 1.0).unwrap() - want).abs() < 1e-15);
        assert!((want - 0.31326).abs() < 1e-5);
    }

    #[test]
    fn zero_vector_is_degenerate() {
        let o = Matrix::from_rows(&[&[1.0, 0.0], &[0.0, 0.0]]);
        assert_eq!(
            alignment_loss(&o, &o, 1.0).unwrap_err(),
            ObjectiveError::DegenerateEmbedding { word: 1 }
        );
    }
}
