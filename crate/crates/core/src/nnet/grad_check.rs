//! Central finite-difference check of analytic gradients.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::index;

use super::params::{Gradients, Params};
use crate::rng::{stream, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckOptions {
    pub step: f64,
    pub tolerance: f64,
    /// Coordinates to check, spread over all tensors.
    pub min_coordinates: usize,
    /// Denominator floor of the relative error.
    pub floor: f64,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            step: 1e-5,
            tolerance: 1e-4,
            min_coordinates: 200,
            floor: 1e-5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorReport {
    pub name: String,
    pub checked: usize,
    pub worst_index: usize,
    pub worst_relative: f64,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub tensors: Vec<TensorReport>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.tensors.iter().all(|t| t.worst_relative < self.tolerance)
    }

    pub fn coordinates(&self) -> usize {
        self.tensors.iter().map(|t| t.checked).sum()
    }

    pub fn max_relative(&self) -> f64 {
        self.tensors.iter().map(|t| t.worst_relative).fold(0.0, f64::max)
    }

    pub fn worst(&self) -> Option<&TensorReport> {
        self.tensors
            .iter()
            .max_by(|a, b| a.worst_relative.total_cmp(&b.worst_relative))
    }
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{} coordinates, max relative error {:.3e} (tolerance {:.0e}): {}",
            self.coordinates(),
            self.max_relative(),
            self.tolerance,
            if self.passed() { "ok" } else { "FAILED" }
        )?;
        for t in &self.tensors {
            writeln!(
                f,
                "  {:<24} n={:<4} worst[{}] rel={:.3e} analytic={:.6e} numeric={:.6e}",
                t.name, t.checked, t.worst_index, t.worst_relative, t.analytic, t.numeric
            )?;
        }
        Ok(())
    }
}

// an even share per tensor, topped up round-robin where small tensors run out
fn quotas(params: &Params, total: usize) -> Vec<usize> {
    let sizes: Vec<usize> = params.iter().map(|(_, _, t)| t.len()).collect();
    let share = total.div_ceil(sizes.len().max(1)).max(1);
    let mut q: Vec<usize> = sizes.iter().map(|&n| n.min(share)).collect();
    let mut missing = total.saturating_sub(q.iter().sum());
    while missing > 0 {
        let before = missing;
        for (k, &n) in q.iter_mut().zip(&sizes) {
            if missing > 0 && *k < n {
                *k += 1;
                missing -= 1;
            }
        }
        if missing == before {
            break;
        }
    }
    q
}

/// Compares `loss`'s analytic gradient with central differences on a
/// sample of coordinates from every tensor. Half of each tensor's sample
/// comes from coordinates with a nonzero analytic gradient. `params` is
/// restored on return.
pub fn grad_check<F>(mut loss: F, params: &mut Params, opts: &GradCheckOptions) -> GradCheckReport
where
    F: FnMut(&Params) -> (f64, Gradients),
{
    let (_, grads) = loss(params);
    let quotas = quotas(params, opts.min_coordinates);
    let mut rng = stream(opts.seed, Stream::GradCheck, &[]);
    let mut tensors = Vec::new();
    for id in 0..params.len() {
        let g = grads.get(id).data().to_vec();
        let n = g.len();
        let want = quotas[id];
        let nonzero: Vec<usize> = (0..n).filter(|&i| g[i] != 0.0).collect();
        let mut picks: Vec<usize> = index::sample(&mut rng, nonzero.len(), (want / 2).min(nonzero.len()))
            .into_iter()
            .map(|k| nonzero[k])
            .collect();
        for i in index::sample(&mut rng, n, n.min(want * 2)) {
            if picks.len() >= want {
                break;
            }
            if !picks.contains(&i) {
                picks.push(i);
            }
        }
        picks.sort_unstable();

        let mut report = TensorReport {
            name: params.name(id).into(),
            checked: picks.len(),
            worst_index: 0,
            worst_relative: 0.0,
            analytic: 0.0,
            numeric: 0.0,
        };
        for i in picks {
            let orig = params.get(id).data()[i];
            params.get_mut(id).data_mut()[i] = orig + opts.step;
            let (plus, _) = loss(params);
            params.get_mut(id).data_mut()[i] = orig - opts.step;
            let (minus, _) = loss(params);
            params.get_mut(id).data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * opts.step);
            let analytic = g[i];
            let denom = analytic.abs().max(numeric.abs()).max(opts.floor);
            let rel = (analytic - numeric).abs() / denom;
            if rel > report.worst_relative || !rel.is_finite() {
                report.worst_relative = if rel.is_finite() { rel } else { f64::INFINITY };
                report.worst_index = i;
                report.analytic = analytic;
                report.numeric = numeric;
            }
        }
        tensors.push(report);
    }
    GradCheckReport {
        tensors,
        tolerance: opts.tolerance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Matrix;

    fn quadratic(p: &Params) -> (f64, Gradients) {
        let mut g = p.zeros_like();
        let mut l = 0.0;
        for (id, _, t) in p.iter() {
            l += 0.5 * t.sum_squares();
            g.get_mut(id).add_assign(t);
        }
        (l, g)
    }

    fn probe_params() -> Params {
        let mut p = Params::new();
        p.add("a", Matrix::from_vec(10, 12, (0..120).map(|i| (i as f64 * 0.37).sin()).collect()));
        p.add("b", Matrix::from_vec(1, 150, (0..150).map(|i| (i as f64 * 0.11).cos()).collect()));
        p
    }

    #[test]
    fn quadratic_probe_gradient_is_theta() {
        let mut p = probe_params();
        let (_, g) = quadratic(&p);
        for (id, _, t) in p.iter() {
            assert_eq!(g.get(id), t);
        }
        let before = p.clone();
        let report = grad_check(quadratic, &mut p, &GradCheckOptions::default());
        assert!(report.passed(), "{report}");
        assert!(report.coordinates() >= 200);
        assert_eq!(p, before);
    }

    #[test]
    fn corrupted_gradient_is_caught() {
        let mut p = probe_params();
        let corrupted = |p: &Params| {
            let (l, mut g) = quadratic(p);
            g.scale(1.01);
            (l, g)
        };
        let report = grad_check(corrupted, &mut p, &GradCheckOptions::default());
        assert!(!report.passed());
    }
}
