//! Risk-entropy reconstruction from a Boltzmann curve by the trapezium rule
//! on s′(r) = β, the quadratic summary fit, and the bridge back to annealed
//! learning curves.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::gibbs::{annealed_mu, gibbs_risk_saddle};
use crate::interp::MonotoneCubic;
use crate::isotonic::fit_non_increasing;
use crate::mcmc::BoltzmannCurve;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyPoint<S> {
    pub r: S,
    pub s: S,
    /// Inverse temperature whose risk produced this point.
    pub beta: S,
    /// Whether the risk was adjusted by isotonic pooling.
    pub pooled: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anchor<S> {
    pub beta: S,
    pub r: S,
    pub s: S,
}

/// s(r) up to an additive constant, fixed by the anchor. Points run in
/// strictly decreasing r with the anchor first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyCurve<S> {
    points: Vec<EntropyPoint<S>>,
    anchor: Anchor<S>,
}

impl<S: Scalar> EntropyCurve<S> {
    pub fn new(points: Vec<EntropyPoint<S>>) -> Result<Self> {
        let first = *points.first().ok_or_else(|| Error::Empty("entropy curve has no points".into()))?;
        if let Some(w) = points.windows(2).find(|w| !(w[1].r < w[0].r)) {
            return domain(format!("entropy curve risks must decrease strictly: {} then {}", w[0].r, w[1].r));
        }
        Ok(Self { points, anchor: Anchor { beta: first.beta, r: first.r, s: first.s } })
    }

    pub fn points(&self) -> &[EntropyPoint<S>] {
        &self.points
    }

    pub fn anchor(&self) -> Anchor<S> {
        self.anchor
    }

    /// True when any risk was pooled.
    pub fn pooled(&self) -> bool {
        self.points.iter().any(|p| p.pooled)
    }

    /// Covered risk interval (lowest, anchor).
    pub fn risk_range(&self) -> (S, S) {
        (self.points.last().expect("non-empty").r, self.anchor.r)
    }

    /// Monotone cubic interpolant of s on increasing r.
    pub fn interpolant(&self) -> Result<MonotoneCubic<S>> {
        let (r, s): (Vec<S>, Vec<S>) = self.points.iter().rev().map(|p| (p.r, p.s)).unzip();
        MonotoneCubic::new(r, s)
    }
}

/// s(r_n) = s₀ + Σ_{i≤n} ½(β_i + β_{i−1})(r_i − r_{i−1}), anchored at the
/// smallest-β point. Risks that increase with β are first pooled by weighted
/// isotonic regression (weights 1/stderr² when every stderr is positive);
/// each pooled block then contributes a single point.
pub fn reconstruct<S: Scalar>(curve: &BoltzmannCurve<S>, anchor_s0: S) -> Result<EntropyCurve<S>> {
    let pts = curve.points();
    if let Some(w) = pts.windows(2).find(|w| !(w[1].beta > w[0].beta)) {
        return domain(format!("inverse temperatures must increase strictly: {} then {}", w[0].beta, w[1].beta));
    }
    let risks: Vec<S> = pts.iter().map(|p| p.risk).collect();
    let weights: Vec<S> = if pts.iter().all(|p| p.stderr > S::zero()) {
        pts.iter().map(|p| (p.stderr * p.stderr).recip()).collect()
    } else {
        vec![S::one(); pts.len()]
    };
    let fit = fit_non_increasing(&risks, &weights);
    let mut out = Vec::with_capacity(pts.len());
    let mut s = anchor_s0;
    for (i, p) in pts.iter().enumerate() {
        if i > 0 {
            let half = (p.beta + pts[i - 1].beta) / S::lit(2.0);
            s = s + half * (fit.values[i] - fit.values[i - 1]);
        }
        let duplicate = out.last().is_some_and(|q: &EntropyPoint<S>| !(fit.values[i] < q.r));
        if !duplicate {
            out.push(EntropyPoint { r: fit.values[i], s, beta: p.beta, pooled: fit.pooled[i] });
        }
    }
    let mut curve = EntropyCurve::new(out)?;
    curve.anchor.s = anchor_s0;
    Ok(curve)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticFit<S> {
    pub c0: S,
    pub c1: S,
    pub c2: S,
    /// Root-mean-square residual.
    pub rms: S,
}

impl<S: Scalar> QuadraticFit<S> {
    pub fn eval(&self, r: S) -> S {
        self.c0 + r * (self.c1 + r * self.c2)
    }
}

/// Least-squares s ≈ c₀ + c₁r + c₂r², solved on centred and scaled risks for
/// conditioning.
pub fn quadratic_fit<S: Scalar>(curve: &EntropyCurve<S>) -> Result<QuadraticFit<S>> {
    let pts = curve.points();
    if pts.len() < 3 {
        return Err(Error::Fit(format!("quadratic fit needs at least 3 points, got {}", pts.len())));
    }
    let n = S::from_usize_lossy(pts.len());
    let centre = pts.iter().map(|p| p.r).sum::<S>() / n;
    let spread = pts.iter().map(|p| (p.r - centre).abs()).fold(S::zero(), S::max);
    let mut a = [[S::zero(); 3]; 3];
    let mut b = [S::zero(); 3];
    for p in pts {
        let u = (p.r - centre) / spread;
        let basis = [S::one(), u, u * u];
        for i in 0..3 {
            for j in 0..3 {
                a[i][j] = a[i][j] + basis[i] * basis[j];
            }
            b[i] = b[i] + basis[i] * p.s;
        }
    }
    let d = solve3(a, b).ok_or_else(|| Error::Fit("singular normal equations".into()))?;
    // s = d0 + d1 u + d2 u², u = (r − c)/h
    let h = spread;
    let c2 = d[2] / (h * h);
    let c1 = d[1] / h - S::lit(2.0) * centre * c2;
    let c0 = d[0] - d[1] * centre / h + d[2] * centre * centre / (h * h);
    let mut fit = QuadraticFit { c0, c1, c2, rms: S::zero() };
    fit.rms = (pts.iter().map(|p| (fit.eval(p.r) - p.s).powi(2)).sum::<S>() / n).sqrt();
    Ok(fit)
}

#[allow(clippy::needless_range_loop)]
fn solve3<S: Scalar>(mut a: [[S; 3]; 3], mut b: [S; 3]) -> Option<[S; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).expect("finite"))?;
        if a[piv][col].abs() <= S::epsilon() * S::lit(1e3) {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] = a[row][k] - f * a[col][k];
            }
            b[row] = b[row] - f * b[col];
        }
    }
    let mut x = [S::zero(); 3];
    for i in (0..3).rev() {
        let tail: S = (i + 1..3).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - tail) / a[i][i];
    }
    Some(x)
}

/// Annealed Gibbs risk for `m` examples from a reconstructed curve: the saddle
/// of the monotone-cubic interpolant plus m·log(1 − r). Returns the anchor risk
/// when the objective still rises there, and fails when the saddle lies below
/// the measured range.
pub fn predicted_annealed_risk<S: Scalar>(curve: &EntropyCurve<S>, m: u64) -> Result<S> {
    let interp = curve.interpolant()?;
    let (lo, hi) = interp.domain();
    let model = annealed_mu::<S>(m);
    let g = |r: S| interp.derivative(r) + model.mu_prime(r);
    if g(hi) >= S::zero() {
        return Ok(hi);
    }
    if g(lo) <= S::zero() {
        return domain(format!("the saddle for m = {m} lies below the measured risk range [{lo}, {hi}]; extend the beta grid"));
    }
    gibbs_risk_saddle(|r| interp.derivative(r), &model, (lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gibbs::gibbs_risk_saddle;
    use crate::mcmc::CurvePoint;
    use crate::perceptron::{boltzmann_risk_exact, risk_entropy, risk_entropy_derivative, GaussianClassSpec};

    fn exact_curve(betas: &[f64], spec: &GaussianClassSpec<f64>) -> BoltzmannCurve<f64> {
        let risks: Vec<f64> = betas.iter().map(|&b| boltzmann_risk_exact(b, spec).unwrap()).collect();
        BoltzmannCurve::from_exact(betas, &risks).unwrap()
    }

    #[test]
    fn single_step_arithmetic() {
        let c = BoltzmannCurve::<f64>::from_exact(&[0.0, 10.0], &[0.9, 0.8]).unwrap();
        let e = reconstruct(&c, 0.0).unwrap();
        assert_eq!(e.anchor(), Anchor { beta: 0.0, r: 0.9, s: 0.0 });
        assert!((e.points()[1].s + 0.5).abs() < 1e-15);
        let only = reconstruct(&BoltzmannCurve::<f64>::from_exact(&[0.0], &[0.9]).unwrap(), 1.5).unwrap();
        assert_eq!(only.points().len(), 1);
        assert_eq!(only.points()[0].s, 1.5);
    }

    #[test]
    fn gauge_shift() {
        let c = BoltzmannCurve::<f64>::from_exact(&[0.0, 1.0, 4.0, 9.0], &[0.5, 0.4, 0.3, 0.25]).unwrap();
        let a = reconstruct(&c, 0.0).unwrap();
        let b = reconstruct(&c, 3.25).unwrap();
        for (p, q) in a.points().iter().zip(b.points()) {
            assert!((q.s - p.s - 3.25).abs() < 1e-14);
        }
    }

    #[test]
    fn exact_for_piecewise_linear_derivative() {
        // s′(r) = 40 (0.5 − r) on [0.2, 0.5]: β = s′(r) ⇒ r = 0.5 − β/40; s = −20 (0.5 − r)²
        let betas: Vec<f64> = (0..7).map(|i| 2.0 * i as f64).collect();
        let risks: Vec<f64> = betas.iter().map(|b| 0.5 - b / 40.0).collect();
        let e = reconstruct(&BoltzmannCurve::from_exact(&betas, &risks).unwrap(), 0.0).unwrap();
        for p in e.points() {
            assert!((p.s + 20.0 * (0.5 - p.r).powi(2)).abs() < 1e-14, "{p:?}");
        }
    }

    #[test]
    fn pools_noisy_risks() {
        let points = [(0.0, 0.5), (1.0, 0.45), (2.0, 0.47), (3.0, 0.40)]
            .iter()
            .map(|&(beta, risk)| CurvePoint { beta, risk, stderr: 0.01, acceptance: 0.3, ess: 100.0 })
            .collect();
        let e = reconstruct(&BoltzmannCurve::<f64>::new(points).unwrap(), 0.0).unwrap();
        assert!(e.pooled());
        assert_eq!(e.points().len(), 3);
        assert!((e.points()[1].r - 0.46).abs() < 1e-12);
        assert!(e.points()[1].pooled && !e.points()[2].pooled);
        // pooled block contributes nothing; last segment uses β = 2 and 3
        let expect = 0.5 * -0.04 + 2.5 * (0.40 - 0.46);
        assert!((e.points()[2].s - expect).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_beta_order() {
        let pts = vec![
            CurvePoint { beta: 1.0, risk: 0.5, stderr: 0.0, acceptance: 1.0, ess: 1.0 },
            CurvePoint { beta: 0.5, risk: 0.4, stderr: 0.0, acceptance: 1.0, ess: 1.0 },
        ];
        assert!(BoltzmannCurve::new(pts).is_err());
    }

    #[test]
    fn legendre_round_trip_on_perceptron() {
        // the trapezium sum integrates r dβ, so it reproduces log Z(β) + β R̄(β)
        let spec = GaussianClassSpec::<f64>::axis_aligned(20, 2.0).unwrap();
        let betas: Vec<f64> = (0..=40).map(|i| 200.0 * (i as f64 / 40.0).powi(2)).collect();
        let e = reconstruct(&exact_curve(&betas, &spec), 0.0).unwrap();
        let log_z = |beta: f64| {
            crate::quadrature::integrate(
                |r: f64| (risk_entropy(r, &spec).unwrap_or(f64::NEG_INFINITY) - beta * (r - 0.5)).exp(),
                spec.min_risk(),
                1.0 - spec.min_risk(),
                &crate::quadrature::QuadOptions::default().with_rel_tol(1e-11).with_panels(64),
            )
            .unwrap()
            .value
            .ln()
        };
        let z0 = log_z(0.0);
        let drop = e.points()[0].s - e.points().last().unwrap().s;
        for p in e.points() {
            let legendre = log_z(p.beta) - z0 + p.beta * (p.r - 0.5);
            assert!((p.s - legendre).abs() < 0.02 * drop, "{p:?}: {legendre}");
        }
    }

    #[test]
    fn quadratic_fit_exact_and_errors() {
        let pts: Vec<EntropyPoint<f64>> =
            [0.9, 0.7, 0.5, 0.35, 0.2].iter().map(|&r| EntropyPoint { r, s: 1.0 - 2.0 * r + 3.0 * r * r, beta: 0.0, pooled: false }).collect();
        let fit = quadratic_fit(&EntropyCurve::new(pts.clone()).unwrap()).unwrap();
        assert!((fit.c0 - 1.0).abs() < 1e-10 && (fit.c1 + 2.0).abs() < 1e-10 && (fit.c2 - 3.0).abs() < 1e-10, "{fit:?}");
        assert!(fit.rms < 1e-12);
        assert!(matches!(quadratic_fit(&EntropyCurve::new(pts[..2].to_vec()).unwrap()), Err(Error::Fit(_))));
    }

    #[test]
    fn annealed_prediction_from_round_trip() {
        let spec = GaussianClassSpec::<f64>::axis_aligned(20, 2.0).unwrap();
        let betas: Vec<f64> = (0..12).map(|i| if i == 0 { 0.0 } else { 2f64.powf(i as f64 * 11.0 / 11.0) }).collect();
        let e = reconstruct(&exact_curve(&betas, &spec), 0.0).unwrap();
        assert_eq!(predicted_annealed_risk(&e, 0).unwrap(), e.anchor().r);
        let from_curve = predicted_annealed_risk(&e, 200).unwrap();
        let closed = gibbs_risk_saddle(|r| risk_entropy_derivative(r, &spec).unwrap(), &annealed_mu(200), (spec.min_risk() + 1e-12, 0.5)).unwrap();
        assert!((from_curve - closed).abs() < 0.02, "{from_curve} vs {closed}");
        let preds: Vec<f64> = [10, 100, 1000].iter().map(|&m| predicted_annealed_risk(&e, m).unwrap()).collect();
        assert!(preds[0] >= preds[1] && preds[1] >= preds[2], "{preds:?}");
        assert!(predicted_annealed_risk(&e, 10_000_000).is_err());
    }
}
