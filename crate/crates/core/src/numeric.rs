//! Small numerical helpers shared by the samplers.

/// `log(sum(exp(x)))` evaluated as `max + ln_1p(sum of the rest)`.
///
/// Keeping the dominant term out of the sum preserves relative precision when
/// the result is close to zero.
pub(crate) fn log_sum_exp(values: &[f64]) -> f64 {
    let Some((arg, &max)) = values.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)) else {
        return f64::NEG_INFINITY;
    };
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let rest: f64 = values.iter().enumerate().filter(|&(i, _)| i != arg).map(|(_, &v)| (v - max).exp()).sum();
    max + rest.ln_1p()
}

/// Normalizes log-weights into probabilities.
pub(crate) fn softmax(log_weights: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(log_weights);
    log_weights.iter().map(|&w| (w - lse).exp()).collect()
}

/// `ln(n!)` accumulated as `ln 2 + ln 3 + ... + ln n`, in that order.
pub(crate) fn ln_factorial(n: usize) -> f64 {
    let mut total = 0.0_f64;
    for i in 2..=n {
        total += (i as f64).ln();
    }
    total
}

/// Metropolis-Hastings accept/reject on the log scale.
pub(crate) fn accept<R: rand::Rng + ?Sized>(log_ratio: f64, rng: &mut R) -> bool {
    if log_ratio.is_nan() {
        return false;
    }
    if log_ratio >= 0.0 {
        return true;
    }
    let u: f64 = rng.random();
    u.ln() < log_ratio
}

/// Draws an index from unnormalized nonnegative weights.
pub(crate) fn sample_weighted<R: rand::Rng + ?Sized>(weights: &[f64], total: f64, rng: &mut R) -> usize {
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if target < acc {
            return i;
        }
    }
    // rounding can leave target == total; fall back to the last positive weight
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sum_exp_matches_naive() {
        let v = [0.1, -2.0, 3.5, 1.25];
        let naive = v.iter().map(|x: &f64| x.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(&v) - naive).abs() < 1e-14);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY, f64::NEG_INFINITY]), f64::NEG_INFINITY);
    }

    #[test]
    fn softmax_shift_invariant() {
        let a = softmax(&[1.0, 2.0, 3.0]);
        let b = softmax(&[101.0, 102.0, 103.0]);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-14);
        }
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ln_factorial_small() {
        assert_eq!(ln_factorial(0), 0.0);
        assert_eq!(ln_factorial(1), 0.0);
        assert!((ln_factorial(4) - 24f64.ln()).abs() < 1e-15);
    }
}
