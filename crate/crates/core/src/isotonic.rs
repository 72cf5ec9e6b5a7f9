//! Weighted pool-adjacent-violators for monotone sequences.

use crate::scalar::Scalar;

/// Result of an isotonic fit: fitted values plus, per input position, whether
/// it was merged into a block with a neighbour.
#[derive(Debug, Clone, PartialEq)]
pub struct IsotonicFit<S> {
    pub values: Vec<S>,
    pub pooled: Vec<bool>,
}

/// Least-squares non-increasing fit of `y` with positive `weights`.
pub fn fit_non_increasing<S: Scalar>(y: &[S], weights: &[S]) -> IsotonicFit<S> {
    let neg: Vec<S> = y.iter().map(|&v| -v).collect();
    let mut fit = fit_non_decreasing(&neg, weights);
    fit.values.iter_mut().for_each(|v| *v = -*v);
    fit
}

/// Least-squares non-decreasing fit of `y` with positive `weights`.
pub fn fit_non_decreasing<S: Scalar>(y: &[S], weights: &[S]) -> IsotonicFit<S> {
    assert_eq!(y.len(), weights.len(), "values and weights differ in length");
    // (weighted mean, total weight, count)
    let mut blocks: Vec<(S, S, usize)> = Vec::with_capacity(y.len());
    for (&v, &w) in y.iter().zip(weights) {
        blocks.push((v, w, 1));
        while blocks.len() > 1 {
            let (m1, w1, c1) = blocks[blocks.len() - 1];
            let (m0, w0, c0) = blocks[blocks.len() - 2];
            if m0 <= m1 {
                break;
            }
            blocks.pop();
            let wt = w0 + w1;
            *blocks.last_mut().expect("two blocks") = ((m0 * w0 + m1 * w1) / wt, wt, c0 + c1);
        }
    }
    let mut values = Vec::with_capacity(y.len());
    let mut pooled = Vec::with_capacity(y.len());
    for (m, _, c) in blocks {
        values.extend(std::iter::repeat_n(m, c));
        pooled.extend(std::iter::repeat_n(c > 1, c));
    }
    IsotonicFit { values, pooled }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pools_single_violation() {
        let fit = fit_non_increasing(&[0.9, 0.7, 0.75, 0.5], &[1.0; 4]);
        assert_eq!(fit.values, vec![0.9, 0.725, 0.725, 0.5]);
        assert_eq!(fit.pooled, vec![false, true, true, false]);
    }

    #[test]
    fn monotone_input_untouched() {
        let y = [5.0, 4.0, 4.0, 1.0];
        let fit = fit_non_increasing(&y, &[1.0; 4]);
        assert_eq!(fit.values, y.to_vec());
        assert!(fit.pooled.iter().all(|p| !p));
    }

    proptest! {
        #[test]
        fn output_monotone_and_mass_preserving(y in prop::collection::vec(-5.0f64..5.0, 1..40)) {
            let w = vec![1.0; y.len()];
            let fit = fit_non_decreasing(&y, &w);
            for pair in fit.values.windows(2) {
                prop_assert!(pair[0] <= pair[1] + 1e-12);
            }
            let before: f64 = y.iter().sum();
            let after: f64 = fit.values.iter().sum();
            prop_assert!((before - after).abs() < 1e-9);
        }
    }
}
