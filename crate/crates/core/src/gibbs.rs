//! Gibbs risk from a risk-entropy curve and a model of the typical training
//! ratio: saddle-point solution of s′(r) + μ′(r) = 0, the full log-normal
//! integral, and the growth exponent near the minimum risk.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::quadrature::{integrate_with_points, QuadOptions};
use crate::roots::{find_root, RootOptions};
use crate::scalar::Scalar;

type RealFn<'a, S> = Box<dyn Fn(S) -> S + Send + Sync + 'a>;

/// Log typical training ratio μ(r) together with its fluctuation variance σ²(r).
pub enum TrainingRatioModel<'a, S> {
    /// μ(r) = m·log(1 − r), σ² ≡ 0.
    Annealed {
        m: S,
    },
    Custom {
        mu: RealFn<'a, S>,
        sigma2: Option<RealFn<'a, S>>,
    },
}

impl<S: Scalar> std::fmt::Debug for TrainingRatioModel<'_, S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Annealed { m } => f.debug_struct("Annealed").field("m", m).finish(),
            Self::Custom { sigma2, .. } => f.debug_struct("Custom").field("has_sigma2", &sigma2.is_some()).finish(),
        }
    }
}

/// The annealed training-ratio model for `m` examples.
pub fn annealed_mu<'a, S: Scalar>(m: u64) -> TrainingRatioModel<'a, S> {
    TrainingRatioModel::Annealed { m: S::from_u64(m).expect("u64 representable") }
}

impl<'a, S: Scalar> TrainingRatioModel<'a, S> {
    /// A user-supplied μ (and optional σ²). μ(0) must vanish.
    pub fn custom(mu: impl Fn(S) -> S + Send + Sync + 'a, sigma2: Option<Box<dyn Fn(S) -> S + Send + Sync + 'a>>) -> Result<Self> {
        let at_zero = mu(S::zero());
        if !(at_zero.abs() <= S::lit(1e-12)) {
            return domain(format!("training-ratio model must satisfy mu(0) = 0, got {at_zero}"));
        }
        Ok(Self::Custom { mu: Box::new(mu), sigma2 })
    }

    pub fn mu(&self, r: S) -> S {
        match self {
            Self::Annealed { m } if *m == S::zero() => S::zero(),
            Self::Annealed { m } => *m * (-r).ln_1p(),
            Self::Custom { mu, .. } => mu(r),
        }
    }

    pub fn sigma2(&self, r: S) -> S {
        match self {
            Self::Custom { sigma2: Some(s), .. } => s(r),
            _ => S::zero(),
        }
    }

    /// dμ/dr: exact for the annealed model, Richardson-extrapolated central
    /// differences otherwise.
    pub fn mu_prime(&self, r: S) -> S {
        match self {
            Self::Annealed { m } => -*m / (S::one() - r),
            Self::Custom { mu, .. } => {
                let mut h = S::epsilon().cbrt() * r.abs().max(S::lit(1e-2));
                h = h.min(r.abs() / S::lit(4.0)).min((S::one() - r).abs() / S::lit(4.0)).max(S::epsilon().sqrt());
                let central = |h: S| (mu(r + h) - mu(r - h)) / (S::lit(2.0) * h);
                let coarse = central(h);
                let fine = central(h / S::lit(2.0));
                (S::lit(4.0) * fine - coarse) / S::lit(3.0)
            }
        }
    }
}

/// Solves s′(r) + μ′(r) = 0 on `bracket`, to |G₀′| ≤ 1e−10·|s′| or until the
/// bracket collapses to adjacent floats.
pub fn gibbs_risk_saddle<S, F>(s_prime: F, model: &TrainingRatioModel<'_, S>, bracket: (S, S)) -> Result<S>
where
    S: Scalar,
    F: Fn(S) -> S,
{
    let g = |r: S| s_prime(r) + model.mu_prime(r);
    let tol = S::lit(1e-10);
    let opts = RootOptions::default();
    let root = find_root(g, bracket.0, bracket.1, &opts, |r, gr| gr.abs() <= tol * s_prime(r).abs())?;
    Ok(root.x)
}

/// Gibbs risk ∫ r e^{s+μ+σχ} / ∫ e^{s+μ+σχ} over [0, 1]. `s` may return −∞
/// outside its support. χ ≡ 0 when no path is supplied.
pub fn gibbs_risk_integral<S, F>(s: F, model: &TrainingRatioModel<'_, S>, chi: Option<&dyn Fn(S) -> S>) -> Result<S>
where
    S: Scalar,
    F: Fn(S) -> S,
{
    let exponent = |r: S| {
        let mut e = s(r) + model.mu(r);
        if let Some(chi) = chi {
            let s2 = model.sigma2(r);
            if s2 > S::zero() {
                e = e + s2.sqrt() * chi(r);
            }
        }
        e
    };
    let grid = 8192usize;
    let h = S::one() / S::from_usize_lossy(grid);
    let (mut peak, mut peak_r) = (S::neg_infinity(), S::lit(0.5));
    for i in 1..grid {
        let r = h * S::from_usize_lossy(i);
        let e = exponent(r);
        if e.is_nan() || e == S::infinity() {
            return Err(Error::NonFinite(format!("log integrand is {e} at r = {r}")));
        }
        if e > peak {
            peak = e;
            peak_r = r;
        }
    }
    if peak == S::neg_infinity() {
        return Err(Error::NonFinite("Gibbs normaliser underflowed: integrand vanishes on the grid".into()));
    }
    let mut breaks = vec![peak_r];
    for k in [1usize, 2, 4, 8, 16] {
        let d = h * S::from_usize_lossy(k);
        breaks.push(peak_r - d);
        breaks.push(peak_r + d);
    }
    let opts = QuadOptions::default().with_rel_tol(S::lit(1e-10)).with_panels(64);
    let weight = |r: S| {
        let e = exponent(r);
        if e == S::neg_infinity() {
            S::zero()
        } else {
            (e - peak).exp()
        }
    };
    let num = integrate_with_points(|r| r * weight(r), S::zero(), S::one(), &breaks, &opts)?;
    let den = integrate_with_points(weight, S::zero(), S::one(), &breaks, &opts)?;
    if !(den.value > S::zero()) {
        return Err(Error::NonFinite("Gibbs normaliser underflowed".into()));
    }
    Ok(num.value / den.value)
}

/// a = d₁ + d₂/2 − 1 for d₁ linear and d₂ quadratic risk directions.
pub fn growth_exponent<S: Scalar>(d1: usize, d2: usize) -> S {
    S::from_usize_lossy(d1) + S::from_usize_lossy(d2) / S::lit(2.0) - S::one()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit<S> {
    pub exponent: S,
    pub stderr: S,
    pub samples_in_window: usize,
    pub bins: usize,
    /// Smallest offset r − r_min covered by the bins.
    pub lower_offset: S,
}

/// Fits ρ(r) ∝ (r − r_min)^a from samples inside the half-open window
/// (lo, hi], by count-weighted least squares of log bin density on
/// log(r − r_min) over logarithmically spaced bins.
///
/// When `lo == r_min` the lowest bin edge is placed at the offset of the
/// ⌈max(10, n/100)⌉-th smallest sample so the first bin is populated.
pub fn estimate_local_exponent<S: Scalar>(risk_samples: &[S], r_min: S, window: (S, S), bins: usize) -> Result<ExponentFit<S>> {
    let (lo, hi) = window;
    if !(lo >= r_min && hi > lo) {
        return domain(format!("window ({lo}, {hi}] must lie above r_min = {r_min}"));
    }
    if bins < 2 {
        return domain("need at least two bins");
    }
    let mut offsets: Vec<S> = risk_samples.iter().filter(|&&r| r > lo && r <= hi).map(|&r| r - r_min).filter(|&o| o > S::zero()).collect();
    if offsets.len() < 100 {
        return Err(Error::Fit(format!("only {} samples inside the window, need 100", offsets.len())));
    }
    let upper = hi - r_min;
    let lower = if lo > r_min {
        lo - r_min
    } else {
        offsets.sort_by(|a, b| a.partial_cmp(b).expect("finite risks"));
        offsets[10usize.max(offsets.len() / 100).min(offsets.len() - 1)]
    };
    let ratio = (upper / lower).ln();
    let edges: Vec<S> = (0..=bins).map(|k| lower * (ratio * S::from_usize_lossy(k) / S::from_usize_lossy(bins)).exp()).collect();
    let mut counts = vec![0usize; bins];
    for &o in &offsets {
        if o < lower || o > upper {
            continue;
        }
        let k = ((o / lower).ln() / ratio * S::from_usize_lossy(bins)).floor().to_usize().unwrap_or(0);
        counts[k.min(bins - 1)] += 1;
    }
    if let Some(k) = counts.iter().position(|&c| c == 0) {
        return Err(Error::Fit(format!("bin {k} of {bins} is empty; widen the window or add samples")));
    }
    let mut sw = S::zero();
    let mut sx = S::zero();
    let mut sy = S::zero();
    let points: Vec<(S, S, S)> = counts
        .iter()
        .enumerate()
        .map(|(k, &c)| {
            let (a, b) = (edges[k], edges[k + 1]);
            let c = S::from_usize_lossy(c);
            ((a * b).sqrt().ln(), (c / (b - a)).ln(), c)
        })
        .collect();
    for &(x, y, w) in &points {
        sw = sw + w;
        sx = sx + w * x;
        sy = sy + w * y;
    }
    let (mx, my) = (sx / sw, sy / sw);
    let mut sxx = S::zero();
    let mut sxy = S::zero();
    for &(x, y, w) in &points {
        sxx = sxx + w * (x - mx) * (x - mx);
        sxy = sxy + w * (x - mx) * (y - my);
    }
    Ok(ExponentFit { exponent: sxy / sxx, stderr: sxx.recip().sqrt(), samples_in_window: offsets.len(), bins, lower_offset: lower })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perceptron::{risk_entropy, risk_entropy_derivative, sample_uniform_direction_risks, GaussianClassSpec};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn power_law_closed_form(a: f64, m: f64, r_min: f64) -> f64 {
        r_min + a * (1.0 - r_min) / (a + m)
    }

    #[test]
    fn annealed_model_values() {
        for m in [0u64, 1, 7, 1000] {
            assert_eq!(annealed_mu::<f64>(m).mu(0.0), 0.0);
        }
        assert_relative_eq!(annealed_mu::<f64>(10).mu(0.5), -10.0 * 2f64.ln(), max_relative = 1e-15);
        for r in [0.1, 0.4, 0.9] {
            assert_relative_eq!(annealed_mu::<f64>(12).mu(r).exp(), (1.0f64 - r).powi(12), max_relative = 1e-12);
        }
    }

    #[test]
    fn custom_model_derivative_and_validation() {
        let model = TrainingRatioModel::custom(|r: f64| -3.0 * r * r - 2.0 * r, None).unwrap();
        assert_relative_eq!(model.mu_prime(0.3), -3.8, max_relative = 1e-9);
        assert!(TrainingRatioModel::custom(|r: f64| r + 1.0, None).is_err());
    }

    #[test]
    fn saddle_power_law() {
        for (a, m, r_min) in [(1.0, 10.0, 0.0), (3.0, 100.0, 0.05), (10.0, 1e5, 0.2)] {
            let model = annealed_mu::<f64>(m as u64);
            let r = gibbs_risk_saddle(|r| a / (r - r_min), &model, (r_min + 1e-14, 1.0 - 1e-14)).unwrap();
            assert!((r - power_law_closed_form(a, m, r_min)).abs() < 1e-12, "{a} {m} {r_min}: {r}");
        }
        let r = gibbs_risk_saddle(|r: f64| 50.0 / r, &annealed_mu(50), (1e-9, 1.0 - 1e-9)).unwrap();
        assert!((r - 0.5).abs() < 1e-14);
    }

    #[test]
    fn saddle_reports_missing_sign_change() {
        let err = gibbs_risk_saddle(|_r: f64| 1.0, &annealed_mu(0), (0.1, 0.9)).unwrap_err();
        assert!(matches!(err, Error::NoBracket { .. }));
    }

    #[test]
    fn saddle_matches_grid_search_on_perceptron() {
        let spec = GaussianClassSpec::<f64>::axis_aligned(20, 2.0).unwrap();
        let m = 200u64;
        let (lo, hi) = (spec.min_risk() + 1e-9, 0.5);
        let r = gibbs_risk_saddle(|r| risk_entropy_derivative(r, &spec).unwrap(), &annealed_mu(m), (lo, hi)).unwrap();
        let n = 200_000;
        let cell = (hi - lo) / n as f64;
        let best = (0..=n)
            .map(|i| lo + cell * i as f64)
            .map(|r| (r, risk_entropy(r, &spec).unwrap() + m as f64 * (1.0 - r).ln()))
            .fold((0.0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
        assert!((r - best.0).abs() <= cell, "{r} vs {}", best.0);
    }

    #[test]
    fn saddle_invariant_under_entropy_shift_and_monotone_in_m() {
        let spec = GaussianClassSpec::<f64>::axis_aligned(20, 2.0).unwrap();
        let bracket = (spec.min_risk() + 1e-6, 0.5);
        // shifting s by a constant leaves s′ and the saddle unchanged
        let s_shifted = |r: f64| risk_entropy(r, &spec).unwrap() + 1e6;
        let fd_prime = |r: f64| (s_shifted(r + 1e-7) - s_shifted(r - 1e-7)) / 2e-7;
        let exact = gibbs_risk_saddle(|r| risk_entropy_derivative(r, &spec).unwrap(), &annealed_mu(100), bracket).unwrap();
        let shifted = gibbs_risk_saddle(fd_prime, &annealed_mu(100), bracket).unwrap();
        assert!((exact - shifted).abs() < 1e-3, "{exact} vs {shifted}");
        let mut prev = 1.0;
        for m in [5u64, 20, 100, 1000, 10_000] {
            let r = gibbs_risk_saddle(|r| risk_entropy_derivative(r, &spec).unwrap(), &annealed_mu(m), bracket).unwrap();
            assert!(r <= prev);
            prev = r;
        }
    }

    #[test]
    fn integral_examples() {
        let spec = GaussianClassSpec::<f64>::axis_aligned(10, 1.0).unwrap();
        let s = |r: f64| risk_entropy(r, &spec).unwrap_or(f64::NEG_INFINITY);
        let v = gibbs_risk_integral(s, &annealed_mu(0), None).unwrap();
        assert!((v - 0.5).abs() < 1e-8, "{v}");
        let flat = gibbs_risk_integral(|_r: f64| 3.0, &annealed_mu(1), None).unwrap();
        assert_relative_eq!(flat, 1.0 / 3.0, max_relative = 1e-9);
    }

    #[test]
    fn integral_approaches_saddle_for_large_m() {
        let spec = GaussianClassSpec::<f64>::axis_aligned(50, 2.0).unwrap();
        let m = 10_000u64;
        let s = |r: f64| risk_entropy(r, &spec).unwrap_or(f64::NEG_INFINITY);
        let integral = gibbs_risk_integral(s, &annealed_mu(m), None).unwrap();
        let saddle = gibbs_risk_saddle(|r| risk_entropy_derivative(r, &spec).unwrap(), &annealed_mu(m), (spec.min_risk() + 1e-12, 0.5)).unwrap();
        assert!((integral - saddle).abs() < 1e-3, "{integral} vs {saddle}");
    }

    #[test]
    fn integral_with_noise_path() {
        let model = TrainingRatioModel::custom(|r: f64| 5.0 * (-r).ln_1p(), Some(Box::new(|_r: f64| 0.25))).unwrap();
        let base = gibbs_risk_integral(|_r: f64| 0.0, &model, None).unwrap();
        let tilted = gibbs_risk_integral(|_r: f64| 0.0, &model, Some(&|r: f64| -4.0 * r)).unwrap();
        assert!(tilted < base);
    }

    #[test]
    fn growth_exponent_formula() {
        assert_eq!(growth_exponent::<f64>(1, 0), 0.0);
        assert_eq!(growth_exponent::<f64>(0, 2), 0.0);
        assert_eq!(growth_exponent::<f64>(2, 4), 3.0);
        for (d1, d2) in [(0, 6), (3, 1), (5, 5)] {
            assert_eq!(growth_exponent::<f64>(d1, d2) + 1.0, d1 as f64 + d2 as f64 / 2.0);
        }
    }

    #[test]
    fn local_exponent_power_law_oracle() {
        // inverse-CDF sampling of ρ ∝ (r − 0.1)² on (0.1, 0.5]
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let samples: Vec<f64> = (0..200_000).map(|_| 0.1 + 0.4 * rng.random::<f64>().cbrt()).collect();
        let fit = estimate_local_exponent(&samples, 0.1, (0.11, 0.5), 8).unwrap();
        assert!((fit.exponent - 2.0).abs() < 0.1, "{fit:?}");
        let uniform: Vec<f64> = (0..200_000).map(|_| rng.random::<f64>()).collect();
        let fit = estimate_local_exponent(&uniform, 0.0, (0.01, 1.0), 8).unwrap();
        assert!(fit.exponent.abs() < 0.1, "{fit:?}");
    }

    #[test]
    fn local_exponent_errors() {
        let few = vec![0.5; 50];
        assert!(matches!(estimate_local_exponent(&few, 0.0, (0.1, 1.0), 4), Err(Error::Fit(_))));
        assert!(estimate_local_exponent(&few, 0.2, (0.1, 1.0), 4).is_err());
        let gap: Vec<f64> = (0..500).map(|i| if i % 2 == 0 { 0.11 } else { 0.9 }).collect();
        assert!(matches!(estimate_local_exponent(&gap, 0.0, (0.1, 1.0), 8), Err(Error::Fit(_))));
    }

    #[test]
    fn local_exponent_of_sphere_risks() {
        let spec = GaussianClassSpec::<f64>::axis_aligned(7, 1.0).unwrap();
        let risks = sample_uniform_direction_risks(&spec, 10_000_000, 17);
        let r_min = spec.min_risk();
        let fit = estimate_local_exponent(&risks, r_min, (r_min, r_min + 0.01), 8).unwrap();
        assert!((fit.exponent - 2.0).abs() < 0.3, "{fit:?}");
    }
}
