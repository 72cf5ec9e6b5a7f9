//! Forward-only classifiers whose weight spaces the samplers explore: a
//! linear separator on the unit sphere and a rectifier multilayer perceptron.

use std::io::{Read, Write};
use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::LabelledDataset;
use crate::error::{domain, Error, Result};
use crate::rng::{self, SeedTree};
use crate::scalar::Scalar;

/// Examples times weights above which risk evaluation is split across threads.
const PARALLEL_WORK: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PredictorSpec {
    /// Two classes, class = [wᵀx > 0].
    SphereLinear { input_dim: usize },
    /// Dense layers with biases and rectifiers between them. The last entry of
    /// `layer_sizes` is the class count.
    Mlp { input_dim: usize, layer_sizes: Vec<usize> },
}

impl PredictorSpec {
    pub fn sphere_linear(input_dim: usize) -> Result<Self> {
        if input_dim == 0 {
            return domain("input dimension must be positive");
        }
        Ok(Self::SphereLinear { input_dim })
    }

    pub fn mlp(input_dim: usize, layer_sizes: Vec<usize>) -> Result<Self> {
        if input_dim == 0 || layer_sizes.is_empty() || layer_sizes.contains(&0) {
            return domain(format!("invalid MLP shape {input_dim} -> {layer_sizes:?}"));
        }
        if *layer_sizes.last().expect("non-empty") < 2 {
            return domain("an MLP needs at least two output classes");
        }
        Ok(Self::Mlp { input_dim, layer_sizes })
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Self::SphereLinear { input_dim } | Self::Mlp { input_dim, .. } => *input_dim,
        }
    }

    pub fn class_count(&self) -> usize {
        match self {
            Self::SphereLinear { .. } => 2,
            Self::Mlp { layer_sizes, .. } => *layer_sizes.last().expect("validated"),
        }
    }

    /// Default constraint for freshly drawn weights.
    pub fn natural_constraint(&self) -> Constraint {
        match self {
            Self::SphereLinear { .. } => Constraint::UnitSphere,
            Self::Mlp { .. } => Constraint::Unconstrained,
        }
    }

    fn layers(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let (input, sizes): (usize, &[usize]) = match self {
            Self::SphereLinear { input_dim } => (*input_dim, &[]),
            Self::Mlp { input_dim, layer_sizes } => (*input_dim, layer_sizes),
        };
        std::iter::once(input).chain(sizes.iter().copied()).zip(sizes.iter().copied())
    }

    fn widest_layer(&self) -> usize {
        self.layers().map(|(i, o)| i.max(o)).max().unwrap_or(0)
    }
}

/// Σ (fan_in + 1)·fan_out for an MLP, input_dim for the sphere separator.
pub fn weight_count(spec: &PredictorSpec) -> usize {
    match spec {
        PredictorSpec::SphereLinear { input_dim } => *input_dim,
        PredictorSpec::Mlp { .. } => spec.layers().map(|(i, o)| (i + 1) * o).sum(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    UnitSphere,
    Unconstrained,
}

/// Flat parameter vector. MLP layout per layer is the fan_out×fan_in weight
/// matrix in row-major order followed by the fan_out biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector<S> {
    values: Vec<S>,
    constraint: Constraint,
}

impl<S: Scalar> WeightVector<S> {
    pub fn new(values: Vec<S>, constraint: Constraint) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("weight vector entry".into()));
        }
        let w = Self { values, constraint };
        if constraint == Constraint::UnitSphere && (w.norm() - S::one()).abs() > S::lit(1e-10) {
            return domain(format!("unit-sphere weights have norm {}", w.norm()));
        }
        Ok(w)
    }

    pub fn unconstrained(values: Vec<S>) -> Result<Self> {
        Self::new(values, Constraint::Unconstrained)
    }

    /// Projects onto the unit sphere and marks the vector as constrained.
    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n == S::zero() {
            return domain("cannot normalise the zero vector");
        }
        Ok(Self { values: self.values.iter().map(|&v| v / n).collect(), constraint: Constraint::UnitSphere })
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn constraint(&self) -> Constraint {
        self.constraint
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn norm(&self) -> S {
        self.values.iter().map(|&v| v * v).sum::<S>().sqrt()
    }

    pub(crate) fn from_parts_unchecked(values: Vec<S>, constraint: Constraint) -> Self {
        Self { values, constraint }
    }

    /// Little-endian f64 payload behind a u64 length header.
    pub fn write_to<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(&(self.values.len() as u64).to_le_bytes())?;
        for &v in &self.values {
            out.write_all(&v.as_f64().to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut input: R, constraint: Constraint) -> Result<Self> {
        let io = |e: std::io::Error| Error::Domain(format!("reading weights: {e}"));
        let mut header = [0u8; 8];
        input.read_exact(&mut header).map_err(io)?;
        let len = u64::from_le_bytes(header) as usize;
        let mut values = Vec::with_capacity(len.min(1 << 24));
        let mut buf = [0u8; 8];
        for _ in 0..len {
            input.read_exact(&mut buf).map_err(io)?;
            values.push(S::lit(f64::from_le_bytes(buf)));
        }
        Self::new(values, constraint)
    }
}

fn check_weights<S: Scalar>(spec: &PredictorSpec, w: &WeightVector<S>) -> Result<()> {
    let expected = weight_count(spec);
    if w.len() != expected {
        return Err(Error::DimensionMismatch { expected, got: w.len() });
    }
    Ok(())
}

/// Forward pass with caller-provided scratch buffers of the widest layer size.
fn classify<S: Scalar>(spec: &PredictorSpec, w: &[S], x: &[S], a: &mut Vec<S>, b: &mut Vec<S>) -> usize {
    match spec {
        PredictorSpec::SphereLinear { .. } => {
            let dot: S = w.iter().zip(x).map(|(&wi, &xi)| wi * xi).sum();
            usize::from(dot > S::zero())
        }
        PredictorSpec::Mlp { layer_sizes, .. } => {
            a.clear();
            a.extend_from_slice(x);
            let last = layer_sizes.len() - 1;
            let mut offset = 0;
            for (l, (fan_in, fan_out)) in spec.layers().enumerate() {
                let (mat, bias) = w[offset..offset + (fan_in + 1) * fan_out].split_at(fan_in * fan_out);
                offset += (fan_in + 1) * fan_out;
                b.clear();
                for (row, &bo) in mat.chunks_exact(fan_in).zip(bias) {
                    let z = row.iter().zip(a.iter()).fold(bo, |acc, (&wi, &ai)| acc + wi * ai);
                    b.push(if l < last { z.max(S::zero()) } else { z });
                }
                std::mem::swap(a, b);
            }
            let mut best = 0;
            for (k, &score) in a.iter().enumerate() {
                if score > a[best] {
                    best = k;
                }
            }
            best
        }
    }
}

/// Predicted class index; MLP ties go to the lowest index.
pub fn predict<S: Scalar>(spec: &PredictorSpec, w: &WeightVector<S>, x: &[S]) -> Result<usize> {
    check_weights(spec, w)?;
    if x.len() != spec.input_dim() {
        return Err(Error::DimensionMismatch { expected: spec.input_dim(), got: x.len() });
    }
    let cap = spec.widest_layer();
    Ok(classify(spec, &w.values, x, &mut Vec::with_capacity(cap), &mut Vec::with_capacity(cap)))
}

fn count_errors<S: Scalar>(spec: &PredictorSpec, w: &[S], data: &LabelledDataset<S>, idx: impl Iterator<Item = usize>) -> usize {
    let cap = spec.widest_layer();
    let (mut a, mut b) = (Vec::with_capacity(cap), Vec::with_capacity(cap));
    idx.filter(|&i| classify(spec, w, data.row(i), &mut a, &mut b) != data.label(i)).count()
}

fn check_data<S: Scalar>(spec: &PredictorSpec, w: &WeightVector<S>, data: &LabelledDataset<S>) -> Result<()> {
    check_weights(spec, w)?;
    if data.p() != spec.input_dim() {
        return Err(Error::DimensionMismatch { expected: spec.input_dim(), got: data.p() });
    }
    Ok(())
}

/// Fraction of misclassified examples in `subset` (all rows by default). The
/// count is an exact integer reduction, so the result does not depend on how
/// the work is split.
pub fn empirical_risk<S: Scalar>(spec: &PredictorSpec, w: &WeightVector<S>, data: &LabelledDataset<S>, subset: Option<Range<usize>>) -> Result<S> {
    check_data(spec, w, data)?;
    let range = subset.unwrap_or(0..data.n());
    if range.is_empty() || range.end > data.n() {
        return Err(Error::Empty(format!("evaluation range {range:?} of {} examples", data.n())));
    }
    let len = range.len();
    let errors = if len * w.len() >= PARALLEL_WORK {
        const BLOCK: usize = 256;
        let start = range.start;
        (0..len.div_ceil(BLOCK))
            .into_par_iter()
            .map(|blk| {
                let lo = start + blk * BLOCK;
                count_errors(spec, &w.values, data, lo..(lo + BLOCK).min(range.end))
            })
            .sum()
    } else {
        count_errors(spec, &w.values, data, range)
    };
    Ok(S::from_usize_lossy(errors) / S::from_usize_lossy(len))
}

/// Risk on an explicit list of row indices (a minibatch).
pub fn empirical_risk_on<S: Scalar>(spec: &PredictorSpec, w: &WeightVector<S>, data: &LabelledDataset<S>, rows: &[usize]) -> Result<S> {
    check_data(spec, w, data)?;
    if rows.is_empty() {
        return Err(Error::Empty("minibatch".into()));
    }
    if let Some(&bad) = rows.iter().find(|&&i| i >= data.n()) {
        return Err(Error::DimensionMismatch { expected: data.n(), got: bad });
    }
    let errors = count_errors(spec, &w.values, data, rows.iter().copied());
    Ok(S::from_usize_lossy(errors) / S::from_usize_lossy(rows.len()))
}

/// Independent N(0, scale²) entries from stream `[WEIGHTS]` of `seed`;
/// sphere-linear draws are renormalised.
pub fn random_weights<S: Scalar>(spec: &PredictorSpec, scale: S, seed: u64) -> Result<WeightVector<S>> {
    random_weights_stream(spec, scale, seed, 0)
}

/// As [`random_weights`], drawing from stream `[WEIGHTS, index]` so that many
/// independent initialisations share one master seed.
pub fn random_weights_stream<S: Scalar>(spec: &PredictorSpec, scale: S, seed: u64, index: u64) -> Result<WeightVector<S>> {
    if !(scale > S::zero()) || !scale.is_finite() {
        return domain(format!("weight scale must be positive, got {scale}"));
    }
    let mut rng = SeedTree::new(seed).stream(&[rng::domain::WEIGHTS, index]);
    let values: Vec<S> = (0..weight_count(spec)).map(|_| scale * rng::standard_normal::<S, _>(&mut rng)).collect();
    let w = WeightVector::from_parts_unchecked(values, Constraint::Unconstrained);
    match spec.natural_constraint() {
        Constraint::UnitSphere => w.normalized(),
        Constraint::Unconstrained => Ok(w),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_data(features: Vec<f64>, p: usize, labels: Vec<usize>, c: usize) -> LabelledDataset<f64> {
        LabelledDataset::new(features, p, labels, c).unwrap()
    }

    #[test]
    fn weight_counts() {
        assert_eq!(weight_count(&PredictorSpec::sphere_linear(100).unwrap()), 100);
        assert_eq!(weight_count(&PredictorSpec::mlp(4, vec![3, 2]).unwrap()), 23);
        assert_eq!(weight_count(&PredictorSpec::mlp(3072, vec![768, 10]).unwrap()), 2_367_754);
        assert!(PredictorSpec::mlp(4, vec![]).is_err());
        assert!(PredictorSpec::mlp(4, vec![3, 1]).is_err());
    }

    #[test]
    fn sphere_predict() {
        let spec = PredictorSpec::sphere_linear(3).unwrap();
        let x = [0.3, -1.2, 2.0];
        let w = WeightVector::unconstrained(x.to_vec()).unwrap().normalized().unwrap();
        assert_eq!(predict(&spec, &w, &x).unwrap(), 1);
        let neg = WeightVector::unconstrained(x.iter().map(|v| -v).collect()).unwrap();
        assert_eq!(predict(&spec, &neg, &x).unwrap(), 0);
        let scaled = WeightVector::unconstrained(x.iter().map(|v| 7.5 * v).collect()).unwrap();
        assert_eq!(predict(&spec, &scaled, &x).unwrap(), 1);
        assert!(matches!(predict(&spec, &w, &[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn mlp_zero_weights_tie_to_class_zero() {
        let spec = PredictorSpec::mlp(3, vec![4, 3]).unwrap();
        let w = WeightVector::unconstrained(vec![0.0; weight_count(&spec)]).unwrap();
        for x in [[1.0, 2.0, 3.0], [-5.0, 0.0, 9.0]] {
            assert_eq!(predict(&spec, &w, &x).unwrap(), 0);
        }
    }

    #[test]
    fn mlp_hand_forward_pass() {
        // hidden: h1 = relu(x0 - x1 + 0.5), h2 = relu(2 x2 - 1)
        // out:    s0 = h1 - h2, s1 = h2 + 0.25
        let spec = PredictorSpec::mlp(3, vec![2, 2]).unwrap();
        #[rustfmt::skip]
        let w = WeightVector::unconstrained(vec![
            1.0, -1.0, 0.0,
            0.0, 0.0, 2.0,
            0.5, -1.0,
            1.0, -1.0,
            0.0, 1.0,
            0.0, 0.25,
        ])
        .unwrap();
        // x = (2, 0, 1): h = (2.5, 1), s = (1.5, 1.25) -> 0
        assert_eq!(predict(&spec, &w, &[2.0, 0.0, 1.0]).unwrap(), 0);
        // x = (0, 1, 1): h = (0, 1), s = (-1, 1.25) -> 1
        assert_eq!(predict(&spec, &w, &[0.0, 1.0, 1.0]).unwrap(), 1);
        // x = (0, 0, 0): h = (0.5, 0), s = (0.5, 0.25) -> 0
        assert_eq!(predict(&spec, &w, &[0.0, 0.0, 0.0]).unwrap(), 0);
    }

    #[test]
    fn risk_hand_count() {
        let spec = PredictorSpec::sphere_linear(2).unwrap();
        let w = WeightVector::unconstrained(vec![1.0, 1.0]).unwrap();
        let data = toy_data(vec![1.0, 0.0, -1.0, 0.5, 0.2, -0.5, -2.0, -2.0, 3.0, -4.0], 2, vec![1, 1, 1, 0, 0], 2);
        // predictions: 1, 0, 0, 0, 0 -> errors at rows 1 and 2
        assert_eq!(empirical_risk(&spec, &w, &data, None).unwrap(), 0.4);
        assert_eq!(empirical_risk(&spec, &w, &data, Some(0..1)).unwrap(), 0.0);
        assert_eq!(empirical_risk_on(&spec, &w, &data, &[1, 2]).unwrap(), 1.0);
        assert!(matches!(empirical_risk(&spec, &w, &data, Some(2..2)), Err(Error::Empty(_))));
    }

    #[test]
    fn constant_predictor_on_balanced_set() {
        let spec = PredictorSpec::mlp(1, vec![4]).unwrap();
        let w = WeightVector::unconstrained(vec![0.0; weight_count(&spec)]).unwrap();
        let data = toy_data((0..40).map(f64::from).collect(), 1, (0..40).map(|i| i % 4).collect(), 4);
        assert_eq!(empirical_risk(&spec, &w, &data, None).unwrap(), 0.75);
    }

    #[test]
    fn random_weights_properties() {
        let sphere = PredictorSpec::sphere_linear(10).unwrap();
        let w = random_weights::<f64>(&sphere, 3.0, 9).unwrap();
        assert!((w.norm() - 1.0).abs() < 1e-10);
        assert_eq!(w, random_weights(&sphere, 3.0, 9).unwrap());
        assert_ne!(w, random_weights(&sphere, 3.0, 10).unwrap());

        let mlp = PredictorSpec::mlp(100, vec![999]).unwrap();
        let v = random_weights::<f64>(&mlp, 0.5, 4).unwrap();
        let n = v.len() as f64;
        assert!(n > 1e5);
        let mean = v.values().iter().sum::<f64>() / n;
        let var = v.values().iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        // stderr of a sample variance is about σ²·√(2/n)
        assert!((var - 0.25).abs() < 3.0 * 0.25 * (2.0 / n).sqrt(), "{var}");
    }

    #[test]
    fn serialization_round_trip() {
        let spec = PredictorSpec::mlp(5, vec![3, 2]).unwrap();
        let w = random_weights::<f64>(&spec, 1.0, 2).unwrap();
        let mut bytes = Vec::new();
        w.write_to(&mut bytes).unwrap();
        assert_eq!(bytes.len(), 8 + 8 * w.len());
        assert_eq!(&bytes[..8], &(w.len() as u64).to_le_bytes());
        let back = WeightVector::<f64>::read_from(bytes.as_slice(), Constraint::Unconstrained).unwrap();
        assert_eq!(back, w);
        assert!(WeightVector::<f64>::read_from(&bytes[..20], Constraint::Unconstrained).is_err());
    }

    #[test]
    fn sphere_constraint_validated() {
        assert!(WeightVector::new(vec![1.0, 1.0], Constraint::UnitSphere).is_err());
        assert!(WeightVector::new(vec![0.6, 0.8], Constraint::UnitSphere).is_ok());
        assert!(WeightVector::unconstrained(vec![0.0, f64::NAN]).is_err());
    }
}
