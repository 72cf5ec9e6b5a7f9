//! Monotone piecewise-cubic Hermite interpolation (Fritsch–Carlson slopes).

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct MonotoneCubic<S> {
    x: Vec<S>,
    y: Vec<S>,
    slopes: Vec<S>,
}

impl<S: Scalar> MonotoneCubic<S> {
    /// `x` must be strictly increasing.
    pub fn new(x: Vec<S>, y: Vec<S>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
        }
        if x.len() < 2 {
            return Err(Error::Empty("monotone cubic needs at least two knots".into()));
        }
        if x.windows(2).any(|w| !(w[0] < w[1])) {
            return crate::error::domain("interpolation knots must be strictly increasing");
        }
        let n = x.len();
        let secants: Vec<S> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / (x[i + 1] - x[i])).collect();
        let mut slopes = vec![S::zero(); n];
        slopes[0] = secants[0];
        slopes[n - 1] = secants[n - 2];
        for i in 1..n - 1 {
            let (d0, d1) = (secants[i - 1], secants[i]);
            slopes[i] = if d0 * d1 <= S::zero() {
                S::zero()
            } else {
                // weighted harmonic mean keeps the interpolant monotone
                let h0 = x[i] - x[i - 1];
                let h1 = x[i + 1] - x[i];
                let w1 = S::lit(2.0) * h1 + h0;
                let w2 = h1 + S::lit(2.0) * h0;
                (w1 + w2) / (w1 / d0 + w2 / d1)
            };
        }
        Ok(Self { x, y, slopes })
    }

    pub fn domain(&self) -> (S, S) {
        (self.x[0], *self.x.last().expect("non-empty"))
    }

    fn locate(&self, t: S) -> usize {
        let n = self.x.len();
        match self.x.binary_search_by(|v| v.partial_cmp(&t).expect("finite knots")) {
            Ok(i) => i.min(n - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(n - 2),
        }
    }

    /// Value and first derivative at `t`. Outside the knot range the end
    /// cubic is extended.
    pub fn eval_with_derivative(&self, t: S) -> (S, S) {
        let i = self.locate(t);
        let h = self.x[i + 1] - self.x[i];
        let s = (t - self.x[i]) / h;
        let (y0, y1) = (self.y[i], self.y[i + 1]);
        let (m0, m1) = (self.slopes[i] * h, self.slopes[i + 1] * h);
        let two = S::lit(2.0);
        let three = S::lit(3.0);
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = two * s3 - three * s2 + S::one();
        let h10 = s3 - two * s2 + s;
        let h01 = -two * s3 + three * s2;
        let h11 = s3 - s2;
        let value = h00 * y0 + h10 * m0 + h01 * y1 + h11 * m1;
        let six = S::lit(6.0);
        let d00 = six * s2 - six * s;
        let d10 = three * s2 - S::lit(4.0) * s + S::one();
        let d01 = -six * s2 + six * s;
        let d11 = three * s2 - two * s;
        let deriv = (d00 * y0 + d10 * m0 + d01 * y1 + d11 * m1) / h;
        (value, deriv)
    }

    pub fn eval(&self, t: S) -> S {
        self.eval_with_derivative(t).0
    }

    pub fn derivative(&self, t: S) -> S {
        self.eval_with_derivative(t).1
    }
}
