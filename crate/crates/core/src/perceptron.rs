//! Closed forms and quadratures for the unrealisable perceptron: a unit-norm
//! linear separator through the origin facing two isotropic Gaussian classes
//! centred at ±Δ·t.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::quadrature::{integrate_with_points, QuadOptions};
use crate::rng::{self, SeedTree};
use crate::scalar::Scalar;
use crate::special::{ln_beta, norm_cdf, norm_pdf, norm_quantile};

/// The two-Gaussian data distribution γ(x, y).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianClassSpec<S> {
    p: usize,
    delta: S,
    t: Vec<S>,
}

impl<S: Scalar> GaussianClassSpec<S> {
    pub fn new(p: usize, delta: S, t: Vec<S>) -> Result<Self> {
        if p < 2 {
            return domain(format!("feature dimension must be at least 2, got {p}"));
        }
        if !(delta >= S::zero()) || !delta.is_finite() {
            return domain(format!("separation must be finite and non-negative, got {delta}"));
        }
        if t.len() != p {
            return Err(Error::DimensionMismatch { expected: p, got: t.len() });
        }
        let norm: S = t.iter().map(|&v| v * v).sum::<S>().sqrt();
        if (norm - S::one()).abs() > S::lit(1e-12).max(S::epsilon() * S::lit(8.0)) {
            return domain(format!("target direction must have unit norm, got {norm}"));
        }
        Ok(Self { p, delta, t })
    }

    /// Target direction along the first coordinate axis.
    pub fn axis_aligned(p: usize, delta: S) -> Result<Self> {
        let mut t = vec![S::zero(); p];
        if let Some(first) = t.first_mut() {
            *first = S::one();
        }
        Self::new(p, delta, t)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn delta(&self) -> S {
        self.delta
    }

    pub fn target(&self) -> &[S] {
        &self.t
    }

    /// Bayes-optimal risk Φ(−Δ).
    pub fn min_risk(&self) -> S {
        norm_cdf(-self.delta)
    }

    /// Risk of the linear separator with normal `w` (any non-zero length).
    pub fn risk_of(&self, w: &[S]) -> Result<S> {
        if w.len() != self.p {
            return Err(Error::DimensionMismatch { expected: self.p, got: w.len() });
        }
        let norm = w.iter().map(|&v| v * v).sum::<S>().sqrt();
        if norm == S::zero() {
            return domain("zero weight vector has no direction");
        }
        let cos = w.iter().zip(&self.t).map(|(&a, &b)| a * b).sum::<S>() / norm;
        Ok(norm_cdf(-self.delta * cos.max(-S::one()).min(S::one())))
    }
}

/// R(θ) = Φ(−Δ cos θ), the risk of a separator at angle θ from the target.
pub fn perceptron_risk<S: Scalar>(theta: S, delta: S) -> Result<S> {
    if !(theta >= S::zero() && theta <= S::PI()) {
        return domain(format!("angle {theta} outside [0, π]"));
    }
    if !(delta >= S::zero()) {
        return domain(format!("negative separation {delta}"));
    }
    Ok(norm_cdf(-delta * theta.cos()))
}

/// Density of the angle between two independent uniform directions in R^p.
pub fn angle_density<S: Scalar>(theta: S, p: usize) -> Result<S> {
    if p < 2 {
        return domain(format!("angle density needs p >= 2, got {p}"));
    }
    if !(theta >= S::zero() && theta <= S::PI()) {
        return domain(format!("angle {theta} outside [0, π]"));
    }
    let half = S::lit(0.5);
    let exponent = S::from_usize_lossy(p - 2);
    let log_norm = ln_beta(half, half * S::from_usize_lossy(p - 1));
    if p == 2 {
        return Ok((-log_norm).exp());
    }
    Ok((exponent * theta.sin().ln() - log_norm).exp())
}

/// Φ⁻¹(r)/Δ after checking r lies strictly inside (Φ(−Δ), Φ(Δ)).
fn normalised_quantile<S: Scalar>(r: S, spec: &GaussianClassSpec<S>) -> Result<S> {
    if spec.delta == S::zero() {
        return domain("risk entropy is undefined for zero separation");
    }
    let u = norm_quantile(r);
    let z = u / spec.delta;
    if !(z.abs() < S::one()) {
        return domain(format!("risk {r} outside the achievable range ({}, {})", norm_cdf(-spec.delta), norm_cdf(spec.delta)));
    }
    Ok(z)
}

/// Risk entropy s(r) = ((p−3)/2)·log(1 − (Φ⁻¹(r)/Δ)²) + Φ⁻¹(r)²/2, which is
/// log ρ(r) up to an r-independent constant.
pub fn risk_entropy<S: Scalar>(r: S, spec: &GaussianClassSpec<S>) -> Result<S> {
    let z = normalised_quantile(r, spec)?;
    let u = z * spec.delta;
    let k = (S::from_usize_lossy(spec.p) - S::lit(3.0)) / S::lit(2.0);
    Ok(k * (-(z * z)).ln_1p() + u * u / S::lit(2.0))
}

/// Large-p per-feature limit of the risk entropy, (1/2)·log(1 − (Φ⁻¹(r)/Δ)²).
pub fn risk_entropy_per_feature_limit<S: Scalar>(r: S, delta: S) -> Result<S> {
    let spec = GaussianClassSpec::axis_aligned(2, delta)?;
    let z = normalised_quantile(r, &spec)?;
    Ok(S::lit(0.5) * (-(z * z)).ln_1p())
}

/// ds/dr of [`risk_entropy`].
pub fn risk_entropy_derivative<S: Scalar>(r: S, spec: &GaussianClassSpec<S>) -> Result<S> {
    let z = normalised_quantile(r, spec)?;
    let u = z * spec.delta;
    let k = (S::from_usize_lossy(spec.p) - S::lit(3.0)) / S::lit(2.0);
    let ds_du = -k * S::lit(2.0) * z / (spec.delta * (S::one() - z * z)) + u;
    Ok(ds_du / norm_pdf(u))
}

/// Normalised density of risks ρ(r) for a uniformly random direction.
pub fn risk_density<S: Scalar>(r: S, spec: &GaussianClassSpec<S>) -> Result<S> {
    let s = risk_entropy(r, spec)?;
    let half = S::lit(0.5);
    let log_prefactor = half * S::TAU().ln() - spec.delta.ln() - ln_beta(half, half * S::from_usize_lossy(spec.p - 1));
    Ok((log_prefactor + s).exp())
}

/// Exact Boltzmann risk ⟨R⟩ under w ∝ exp(−β R(w)) on the unit sphere,
/// by adaptive quadrature over the angle to the target.
pub fn boltzmann_risk_exact<S: Scalar>(beta: S, spec: &GaussianClassSpec<S>) -> Result<S> {
    if !(beta >= S::zero()) || !beta.is_finite() {
        return domain(format!("inverse temperature must be finite and >= 0, got {beta}"));
    }
    if spec.delta == S::zero() {
        return Ok(S::lit(0.5));
    }
    let delta = spec.delta;
    let sin_power = S::from_usize_lossy(spec.p - 2);
    let log_weight = |theta: S| {
        let r = norm_cdf(-delta * theta.cos());
        let lw = if spec.p == 2 { S::zero() } else { sin_power * theta.sin().ln() };
        (r, lw - beta * r)
    };

    // locate the peak of the log weight for max-subtraction and as a breakpoint
    let grid = 4096usize;
    let (mut peak_theta, mut peak) = (S::PI() / S::lit(2.0), S::neg_infinity());
    for i in 1..grid {
        let theta = S::PI() * S::from_usize_lossy(i) / S::from_usize_lossy(grid);
        let (_, lw) = log_weight(theta);
        if lw > peak {
            peak = lw;
            peak_theta = theta;
        }
    }
    let opts = QuadOptions::default().with_rel_tol(S::lit(1e-11)).with_panels(16);
    let breaks = [peak_theta];
    let num = integrate_with_points(
        |theta| {
            let (r, lw) = log_weight(theta);
            r * (lw - peak).exp()
        },
        S::zero(),
        S::PI(),
        &breaks,
        &opts,
    )?;
    let den = integrate_with_points(|theta| (log_weight(theta).1 - peak).exp(), S::zero(), S::PI(), &breaks, &opts)?;
    if !(den.value > S::zero()) {
        return Err(Error::NonFinite("Boltzmann normaliser underflowed".into()));
    }
    Ok(num.value / den.value)
}

/// Closed-form Hebbian learning curve Φ(−Δ/√(1 + p/(mΔ²))).
pub fn hebbian_expected_risk<S: Scalar>(m: u64, spec: &GaussianClassSpec<S>) -> Result<S> {
    hebbian_expected_risk_with(m, S::from_usize_lossy(spec.p), spec.delta)
}

/// [`hebbian_expected_risk`] for an arbitrary (real) feature count.
pub fn hebbian_expected_risk_with<S: Scalar>(m: u64, p: S, delta: S) -> Result<S> {
    if m == 0 {
        return domain("Hebbian learning needs at least one example");
    }
    if delta == S::zero() {
        return Ok(S::lit(0.5));
    }
    let m = S::from_u64(m).expect("u64 representable");
    Ok(norm_cdf(-delta / (S::one() + p / (m * delta * delta)).sqrt()))
}

/// Large-m expansion Φ(−Δ)·(1 + p/(2m)).
pub fn hebbian_asymptote<S: Scalar>(m: u64, spec: &GaussianClassSpec<S>) -> Result<S> {
    hebbian_asymptote_with(m, S::from_usize_lossy(spec.p), spec.delta)
}

pub fn hebbian_asymptote_with<S: Scalar>(m: u64, p: S, delta: S) -> Result<S> {
    if m == 0 {
        return domain("Hebbian learning needs at least one example");
    }
    let m = S::from_u64(m).expect("u64 representable");
    Ok(norm_cdf(-delta) * (S::one() + p / (S::lit(2.0) * m)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulatedRisk<S> {
    pub mean: S,
    pub stderr: S,
}

/// Risk of one Hebbian classifier trained on `m` fresh samples.
fn hebbian_run<S: Scalar, R: Rng + ?Sized>(m: u64, spec: &GaussianClassSpec<S>, rng: &mut R) -> S {
    let mut w = vec![S::zero(); spec.p];
    for _ in 0..m {
        let y = if rng.random::<bool>() { S::one() } else { -S::one() };
        for (wi, &ti) in w.iter_mut().zip(&spec.t) {
            let x = y * spec.delta * ti + rng::standard_normal::<S, _>(rng);
            *wi = *wi + y * x;
        }
    }
    let norm = w.iter().map(|&v| v * v).sum::<S>().sqrt();
    let cos = w.iter().zip(&spec.t).map(|(&a, &b)| a * b).sum::<S>() / norm;
    norm_cdf(-spec.delta * cos)
}

/// Monte Carlo Hebbian learning curve point: mean and standard error of the
/// exact risk over `runs` independent training sets. Run k always uses the
/// stream `[HEBBIAN, k]` of `seed`, so results do not depend on scheduling.
pub fn hebbian_simulate<S: Scalar>(m: u64, spec: &GaussianClassSpec<S>, runs: usize, seed: u64) -> Result<SimulatedRisk<S>> {
    if m == 0 {
        return domain("Hebbian learning needs at least one example");
    }
    if runs < 2 {
        return domain(format!("need at least two runs for a standard error, got {runs}"));
    }
    let tree = SeedTree::new(seed);
    let risks: Vec<S> = (0..runs).into_par_iter().map(|k| hebbian_run(m, spec, &mut tree.stream(&[rng::domain::HEBBIAN, k as u64]))).collect();
    let n = S::from_usize_lossy(runs);
    let mean = risks.iter().copied().sum::<S>() / n;
    let var = risks.iter().map(|&r| (r - mean) * (r - mean)).sum::<S>() / (n - S::one());
    Ok(SimulatedRisk { mean, stderr: (var / n).sqrt() })
}

/// Risks of `n` directions drawn uniformly from the unit sphere. Chunked into
/// fixed-size blocks with one stream each, so the output is independent of
/// the thread count.
pub fn sample_uniform_direction_risks<S: Scalar>(spec: &GaussianClassSpec<S>, n: usize, seed: u64) -> Vec<S> {
    const CHUNK: usize = 1 << 15;
    let tree = SeedTree::new(seed);
    let chunks = n.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = tree.stream(&[rng::domain::SPHERE, c as u64]);
            let len = CHUNK.min(n - c * CHUNK);
            let mut buf = vec![S::zero(); spec.p];
            (0..len)
                .map(move |_| {
                    buf.iter_mut().for_each(|v| *v = rng::standard_normal(&mut rng));
                    spec.risk_of(&buf).expect("non-zero Gaussian vector")
                })
                .collect::<Vec<_>>()
        })
        .collect()
}
