//! Float helpers that work without `std`.

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn tanh(x: f64) -> f64 {
    libm::tanh(x)
}

#[inline]
pub fn floor(x: f64) -> f64 {
    libm::floor(x)
}

/// `round(x)` with halves going up; a tiny slack absorbs products such as
/// `0.15 * 10` landing just below the half.
pub fn round_half_up(x: f64) -> usize {
    let r = floor(x + 0.5 + 1e-9);
    if r <= 0.0 {
        0
    } else {
        r as usize
    }
}

/// Numerically stable `ln(sum(exp(xs)))`.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let s: f64 = xs.iter().map(|&x| exp(x - max)).sum();
    max + ln(s)
}

/// In-place softmax; returns the log-normaliser.
pub fn softmax_in_place(xs: &mut [f64]) -> f64 {
    let lse = logsumexp(xs);
    for x in xs.iter_mut() {
        *x = exp(*x - lse);
    }
    lse
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_half_up_cases() {
        assert_eq!(round_half_up(0.0), 0);
        assert_eq!(round_half_up(0.5), 1);
        assert_eq!(round_half_up(1.49), 1);
        assert_eq!(round_half_up(0.15 * 10.0), 2);
        assert_eq!(round_half_up(0.4 * 5.0), 2);
        assert_eq!(round_half_up(0.3 * 5.0), 2);
    }

    #[test]
    fn logsumexp_matches_naive() {
        let xs = [0.3, -1.2, 2.5];
        let naive = ln(xs.iter().map(|&x| exp(x)).sum::<f64>());
        assert!((logsumexp(&xs) - naive).abs() < 1e-14);
        assert_eq!(logsumexp(&[]), f64::NEG_INFINITY);
    }
}
