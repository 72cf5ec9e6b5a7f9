//! Adaptive Gauss–Kronrod (7/15) quadrature with global error-driven bisection.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions<S> {
    pub rel_tol: S,
    pub abs_tol: S,
    pub max_intervals: usize,
    /// Number of equal panels the interval is split into before adapting.
    pub initial_panels: usize,
}

impl<S: Scalar> Default for QuadOptions<S> {
    fn default() -> Self {
        Self { rel_tol: S::lit(1e-10), abs_tol: S::zero(), max_intervals: 4000, initial_panels: 8 }
    }
}

impl<S: Scalar> QuadOptions<S> {
    pub fn with_rel_tol(mut self, rel_tol: S) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn with_panels(mut self, panels: usize) -> Self {
        self.initial_panels = panels.max(1);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult<S> {
    pub value: S,
    pub abs_error: S,
    pub evaluations: usize,
    pub intervals: usize,
}

#[derive(Debug, Clone, Copy)]
struct Panel<S> {
    a: S,
    b: S,
    value: S,
    error: S,
}

fn kronrod15<S: Scalar, F: FnMut(S) -> S>(f: &mut F, a: S, b: S) -> Panel<S> {
    let half = S::lit(0.5);
    let center = half * (a + b);
    let half_len = half * (b - a);
    let f_center = f(center);
    let mut res_k = f_center * S::lit(WGK[7]);
    let mut res_g = f_center * S::lit(WG[3]);
    let mut res_abs = res_k.abs();
    let mut fv1 = [S::zero(); 7];
    let mut fv2 = [S::zero(); 7];
    for j in 0..7 {
        let dx = half_len * S::lit(XGK[j]);
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k = res_k + S::lit(WGK[j]) * (f1 + f2);
        res_abs = res_abs + S::lit(WGK[j]) * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g = res_g + S::lit(WG[j / 2]) * (f1 + f2);
        }
    }
    let mean = res_k * half;
    let mut res_asc = S::lit(WGK[7]) * (f_center - mean).abs();
    for j in 0..7 {
        res_asc = res_asc + S::lit(WGK[j]) * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let abs_half = half_len.abs();
    let value = res_k * half_len;
    res_abs = res_abs * abs_half;
    res_asc = res_asc * abs_half;
    let mut error = ((res_k - res_g) * half_len).abs();
    if res_asc != S::zero() && error != S::zero() {
        let scale = (S::lit(200.0) * error / res_asc).powf(S::lit(1.5));
        error = if scale < S::one() { res_asc * scale } else { res_asc };
    }
    let floor = S::lit(50.0) * S::epsilon() * res_abs;
    if res_abs > S::min_positive_value() / (S::lit(50.0) * S::epsilon()) && floor > error {
        error = floor;
    }
    Panel { a, b, value, error }
}

/// Integrates `f` over `[a, b]` with extra breakpoints `points` (any order,
/// points outside the interval are ignored).
pub fn integrate_with_points<S, F>(mut f: F, a: S, b: S, points: &[S], opts: &QuadOptions<S>) -> Result<QuadResult<S>>
where
    S: Scalar,
    F: FnMut(S) -> S,
{
    if !(a.is_finite() && b.is_finite()) {
        return crate::error::domain("integration limits must be finite");
    }
    if a == b {
        return Ok(QuadResult { value: S::zero(), abs_error: S::zero(), evaluations: 0, intervals: 0 });
    }
    let (lo, hi, sign) = if a < b { (a, b, S::one()) } else { (b, a, -S::one()) };
    let mut edges: Vec<S> =
        (0..=opts.initial_panels).map(|i| lo + (hi - lo) * S::from_usize_lossy(i) / S::from_usize_lossy(opts.initial_panels)).collect();
    edges.extend(points.iter().copied().filter(|&p| p > lo && p < hi));
    edges.sort_by(|x, y| x.partial_cmp(y).expect("finite breakpoints"));
    edges.dedup();

    let mut panels: Vec<Panel<S>> = edges.windows(2).map(|w| kronrod15(&mut f, w[0], w[1])).collect();
    let mut evaluations = 15 * panels.len();

    loop {
        let total: S = panels.iter().map(|p| p.value).sum();
        let err: S = panels.iter().map(|p| p.error).sum();
        if total.is_nan() || err.is_nan() {
            return Err(Error::NonFinite("integrand produced NaN".into()));
        }
        let target = opts.abs_tol.max(opts.rel_tol * total.abs());
        if err <= target {
            return Ok(QuadResult { value: sign * total, abs_error: err, evaluations, intervals: panels.len() });
        }
        let (worst, _) = panels.iter().enumerate().fold((0, S::neg_infinity()), |acc, (i, p)| if p.error > acc.1 { (i, p.error) } else { acc });
        let p = panels[worst];
        let mid = S::lit(0.5) * (p.a + p.b);
        if panels.len() >= opts.max_intervals || mid <= p.a || mid >= p.b {
            return Err(Error::Quadrature { estimate: (sign * total).as_f64(), achieved: err.as_f64(), requested: target.as_f64() });
        }
        panels[worst] = kronrod15(&mut f, p.a, mid);
        panels.push(kronrod15(&mut f, mid, p.b));
        evaluations += 30;
    }
}

pub fn integrate<S, F>(f: F, a: S, b: S, opts: &QuadOptions<S>) -> Result<QuadResult<S>>
where
    S: Scalar,
    F: FnMut(S) -> S,
{
    integrate_with_points(f, a, b, &[], opts)
}

/// Integrates over the whole real line through t = x / (1 − x²), x ∈ (−1, 1).
pub fn integrate_real_line<S, F>(mut f: F, opts: &QuadOptions<S>) -> Result<QuadResult<S>>
where
    S: Scalar,
    F: FnMut(S) -> S,
{
    let g = |x: S| {
        let d = S::one() - x * x;
        let t = x / d;
        let jac = (S::one() + x * x) / (d * d);
        let v = f(t);
        if v == S::zero() {
            S::zero()
        } else {
            v * jac
        }
    };
    integrate(g, -S::one(), S::one(), opts)
}
