//! Replica-symmetric Gibbs learning for the realisable perceptron: the typical
//! log training ratio per example μ(r, q)/m, the replica entropy s(r, q), and
//! the saddle point in the load α = m/p.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::quadrature::{integrate_real_line, QuadOptions};
use crate::roots::{find_root, RootOptions};
use crate::scalar::Scalar;
use crate::special::{log_norm_cdf, norm_cdf, norm_pdf};

/// Lower and upper ends of the overlap bracket searched by [`solve_saddle`].
pub const Q_BRACKET: (f64, f64) = (1e-6, 1.0 - 1e-6);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicaState<S> {
    pub alpha: S,
    pub q: S,
    pub r: S,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaddleSolution<S> {
    pub state: ReplicaState<S>,
    /// Residual of the overlap equation at the returned q.
    pub residual: S,
}

impl<S: Scalar> SaddleSolution<S> {
    /// The Gibbs risk predicted at this load.
    pub fn gibbs_risk(&self) -> S {
        self.state.r
    }
}

fn quad_opts<S: Scalar>() -> QuadOptions<S> {
    QuadOptions::default().with_rel_tol(S::lit(1e-12)).with_panels(32)
}

/// μ(r, q)/m = 2 ∫ N(t) log Φ(√(q/(1−q)) t) Φ(t cos(πr)/√(q − cos²(πr))) dt.
pub fn mu_per_example<S: Scalar>(r: S, q: S) -> Result<S> {
    let c = (S::PI() * r).cos();
    let c2 = c * c;
    if !(q > c2 && q < S::one()) {
        return domain(format!("overlap q = {q} must lie in (cos²(πr), 1) = ({c2}, 1)"));
    }
    let a = (q / (S::one() - q)).sqrt();
    let b = c / (q - c2).sqrt();
    let two = S::lit(2.0);
    let res = integrate_real_line(|t| two * norm_pdf(t) * log_norm_cdf(a * t) * norm_cdf(b * t), &quad_opts())?;
    Ok(res.value)
}

/// Replica entropy s(r, q) = (p/2)·(log(1−q) + (q − cos²(πr))/(1−q)).
pub fn entropy_rq<S: Scalar>(r: S, q: S, p: S) -> S {
    let c = (S::PI() * r).cos();
    p / S::lit(2.0) * ((S::one() - q).ln() + (q - c * c) / (S::one() - q))
}

/// Right-hand side of the overlap equation,
/// (α/π) ∫ exp(−(1+q)t²/(2(1−q))) / Φ(√(q/(1−q)) t) dt/√(2π).
pub fn overlap_equation_rhs<S: Scalar>(q: S, alpha: S) -> Result<S> {
    if !(q > S::zero() && q < S::one()) {
        return domain(format!("overlap {q} outside (0, 1)"));
    }
    let one = S::one();
    let a = (q / (one - q)).sqrt();
    let damp = (one + q) / (S::lit(2.0) * (one - q));
    let norm = S::TAU().sqrt();
    // the 1/Φ growth in the left tail is absorbed in log space
    let res = integrate_real_line(|t| (-damp * t * t - log_norm_cdf(a * t)).exp() / norm, &quad_opts())?;
    Ok(alpha / S::PI() * res.value)
}

/// Solves the saddle-point conditions q = cos(πr) and the overlap equation
/// for the load `alpha`, by bracketed root search on q ∈ [1e−6, 1 − 1e−6].
pub fn solve_saddle<S: Scalar>(alpha: S) -> Result<SaddleSolution<S>> {
    if !(alpha > S::zero()) || !alpha.is_finite() {
        return domain(format!("load must be positive and finite, got {alpha}"));
    }
    let mut failure: Option<Error> = None;
    let mut residual = |q: S| match overlap_equation_rhs(q, alpha) {
        Ok(v) => v - q,
        Err(e) => {
            failure.get_or_insert(e);
            S::nan()
        }
    };
    let (lo, hi) = (S::lit(Q_BRACKET.0), S::lit(Q_BRACKET.1));
    let tol = S::lit(1e-12);
    let root = find_root(&mut residual, lo, hi, &RootOptions::default(), |_, f| f.abs() <= tol);
    if let Some(e) = failure {
        return Err(e);
    }
    let root = root?;
    if !(root.residual.abs() <= S::lit(1e-8)) {
        return Err(Error::NonFinite(format!("overlap equation residual {} above 1e-8", root.residual)));
    }
    let q = root.x;
    Ok(SaddleSolution { state: ReplicaState { alpha, q, r: q.acos() / S::PI() }, residual: root.residual })
}

/// Extrapolates r·α to α → ∞ from the two largest loads, assuming
/// r·α ≈ L + c/α.
pub fn extrapolate_product_limit<S: Scalar>(solutions: &[SaddleSolution<S>]) -> Result<S> {
    if solutions.len() < 2 {
        return Err(Error::Empty("need at least two loads to extrapolate".into()));
    }
    let mut sorted: Vec<_> = solutions.iter().map(|s| (s.state.alpha, s.state.alpha * s.state.r)).collect();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite loads"));
    let (a1, p1) = sorted[sorted.len() - 2];
    let (a2, p2) = sorted[sorted.len() - 1];
    if a1 == a2 {
        return domain("the two largest loads coincide");
    }
    Ok((a2 * p2 - a1 * p1) / (a2 - a1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn mu_degenerates_to_log_half() {
        let v = mu_per_example(0.5, 1e-10).unwrap();
        assert!((v - 0.5f64.ln()).abs() < 1e-4, "{v}");
    }

    #[test]
    fn mu_non_positive_and_decreasing_in_q() {
        for r in [0.05, 0.1, 0.25, 0.4, 0.5] {
            let c2 = (std::f64::consts::PI * r).cos().powi(2);
            let mut prev = 0.0;
            for k in 1..10 {
                let q = c2 + (1.0 - c2) * k as f64 / 10.0;
                let v = mu_per_example(r, q).unwrap();
                assert!(v <= 0.0);
                assert!(v < prev, "r={r} q={q}: {v} >= {prev}");
                prev = v;
            }
        }
    }

    #[test]
    fn mu_domain_errors() {
        assert!(mu_per_example(0.1, 0.5).is_err());
        assert!(mu_per_example(0.25, 1.0).is_err());
    }

    #[test]
    fn mu_matches_monte_carlo() {
        let (r, q) = (0.25f64, 0.8f64);
        let c = (std::f64::consts::PI * r).cos();
        let a = (q / (1.0 - q)).sqrt();
        let b = c / (q - c * c).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 10_000_000usize;
        let (mut sum, mut sum2) = (0.0, 0.0);
        for _ in 0..n {
            let t: f64 = StandardNormal.sample(&mut rng);
            let v = 2.0 * norm_cdf(a * t).ln() * norm_cdf(b * t);
            sum += v;
            sum2 += v * v;
        }
        let mean = sum / n as f64;
        let se = ((sum2 / n as f64 - mean * mean) / n as f64).sqrt();
        let exact = mu_per_example(r, q).unwrap();
        assert!((exact - mean).abs() < 3.0 * se, "{exact} vs {mean} ± {se}");
    }

    #[test]
    fn entropy_examples() {
        let r = 0.3f64;
        let q = (std::f64::consts::PI * r).cos().powi(2);
        assert_relative_eq!(entropy_rq(r, q, 10.0), 5.0 * (1.0 - q).ln(), max_relative = 1e-14);
        assert!(entropy_rq(0.5f64, 0.0, 10.0).abs() < 1e-15);
        let c2 = (0.3 * std::f64::consts::PI).cos().powi(2);
        let direct = 50.0 * (0.5f64.ln() + (0.5 - c2) / 0.5);
        assert_relative_eq!(entropy_rq(0.3, 0.5, 100.0), direct, max_relative = 1e-14);
    }

    #[test]
    fn small_load_is_near_random() {
        let sol = solve_saddle(1e-3f64).unwrap();
        assert!(sol.state.q < 1e-2);
        assert!((sol.state.r - 0.5).abs() < 1e-2);
    }

    #[test]
    fn asymptote_at_alpha_100() {
        let sol = solve_saddle(100.0f64).unwrap();
        let product = sol.state.r * 100.0;
        assert!((0.60..=0.65).contains(&product), "{product}");
        assert!(sol.residual.abs() <= 1e-8);
    }

    #[test]
    fn monotone_in_load() {
        let sols: Vec<_> = [1.0, 5.0, 10.0, 20.0, 50.0].iter().map(|&a| solve_saddle(a).unwrap()).collect();
        for w in sols.windows(2) {
            assert!(w[1].state.q > w[0].state.q);
            assert!(w[1].state.r < w[0].state.r);
        }
    }

    /// Composite Simpson over a truncated range: an independent route to the
    /// overlap equation used as an oracle.
    fn simpson_rhs(q: f64, alpha: f64, n: usize) -> f64 {
        let a = (q / (1.0 - q)).sqrt();
        let damp = (1.0 + q) / (2.0 * (1.0 - q));
        let width = 40.0 * (1.0 - q).sqrt().max(1e-3);
        let h = 2.0 * width / n as f64;
        let mut acc = 0.0;
        for i in 0..=n {
            let t = -width + i as f64 * h;
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += w * (-damp * t * t - log_norm_cdf(a * t)).exp();
        }
        alpha / std::f64::consts::PI * acc * h / 3.0 / (2.0 * std::f64::consts::PI).sqrt()
    }

    #[test]
    fn alpha_20_matches_refined_oracle() {
        let alpha = 20.0;
        let bisect = |n: usize| {
            let (mut lo, mut hi) = (1e-6, 1.0 - 1e-6);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if simpson_rhs(mid, alpha, n) - mid > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        let coarse = bisect(20_000);
        let fine = bisect(40_000);
        assert!((coarse - fine).abs() < 1e-9);
        let sol = solve_saddle(alpha).unwrap();
        assert!((sol.state.q - fine).abs() < 1e-6, "{} vs {fine}", sol.state.q);
    }

    #[test]
    fn rejects_bad_load() {
        assert!(solve_saddle(0.0).is_err());
        assert!(solve_saddle(f64::NAN).is_err());
        assert!(matches!(solve_saddle(1e-9).unwrap_err(), Error::NoBracket { .. }));
    }
}
