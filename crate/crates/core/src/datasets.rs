//! Labelled datasets: the two-Gaussian generator, IDX ingestion, teacher
//! relabelling and random splits.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::error::{domain, Error, Result};
use crate::perceptron::GaussianClassSpec;
use crate::predictors::{predict, PredictorSpec, WeightVector};
use crate::rng::{self, SeedTree};
use crate::scalar::Scalar;

pub const IDX_IMAGE_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABEL_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IdxError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },

    #[error("{path}: magic {found:#010x}, expected {expected:#010x}")]
    BadMagic { path: String, expected: u32, found: u32 },

    #[error("image file holds {images} items but label file holds {labels}")]
    CountMismatch { images: usize, labels: usize },

    #[error("{path}: truncated, need {expected} bytes, found {found}")]
    Truncated { path: String, expected: usize, found: usize },
}

/// Row-major n×p features with labels in [0, class_count).
#[derive(Debug, Clone, PartialEq)]
pub struct LabelledDataset<S> {
    features: Vec<S>,
    p: usize,
    labels: Vec<usize>,
    class_count: usize,
}

impl<S: Scalar> LabelledDataset<S> {
    pub fn new(features: Vec<S>, p: usize, labels: Vec<usize>, class_count: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Empty("dataset has no examples".into()));
        }
        if p == 0 || features.len() != p * labels.len() {
            return Err(Error::DimensionMismatch { expected: p * labels.len(), got: features.len() });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_count) {
            return domain(format!("label {bad} outside [0, {class_count})"));
        }
        if let Some(i) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("feature in row {}", i / p)));
        }
        Ok(Self { features, p, labels, class_count })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn row(&self, i: usize) -> &[S] {
        &self.features[i * self.p..(i + 1) * self.p]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn features(&self) -> &[S] {
        &self.features
    }

    /// Label frequencies.
    pub fn label_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_count];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Σ_c (n_c / n)².
    pub fn collision_probability(&self) -> S {
        let n = S::from_usize_lossy(self.n());
        self.label_counts()
            .into_iter()
            .map(|c| {
                let f = S::from_usize_lossy(c) / n;
                f * f
            })
            .sum()
    }

    pub fn select(&self, rows: &[usize]) -> Result<Self> {
        let mut features = Vec::with_capacity(rows.len() * self.p);
        for &i in rows {
            features.extend_from_slice(self.row(i));
        }
        Self::new(features, self.p, rows.iter().map(|&i| self.labels[i]).collect(), self.class_count)
    }

    /// SHA-256 over the shape, the features as little-endian f64 and the labels.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for v in [self.n(), self.p, self.class_count] {
            h.update((v as u64).to_le_bytes());
        }
        for &v in &self.features {
            h.update(v.as_f64().to_le_bytes());
        }
        for &l in &self.labels {
            h.update((l as u64).to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Draws y uniformly from {0, 1} and x = (2y − 1)·Δ·t + η with η ~ N(0, I).
pub fn gen_gaussian_pair<S: Scalar>(spec: &GaussianClassSpec<S>, n: usize, seed: u64) -> Result<LabelledDataset<S>> {
    if n == 0 {
        return Err(Error::Empty("requested zero examples".into()));
    }
    let p = spec.p();
    let mut rng = SeedTree::new(seed).stream(&[rng::domain::DATASET]);
    let mut features = Vec::with_capacity(n * p);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let y = usize::from(rng.random::<bool>());
        let sign = if y == 1 { S::one() } else { -S::one() };
        for &t in spec.target() {
            features.push(sign * spec.delta() * t + rng::standard_normal::<S, _>(&mut rng));
        }
        labels.push(y);
    }
    LabelledDataset::new(features, p, labels, 2)
}

fn be_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_be_bytes(bytes[at..at + 4].try_into().expect("four bytes"))
}

fn header(bytes: &[u8], path: &str, magic: u32, dims: usize) -> Result<Vec<usize>, IdxError> {
    let need = 4 + 4 * dims;
    if bytes.len() < need {
        return Err(IdxError::Truncated { path: path.into(), expected: need, found: bytes.len() });
    }
    let found = be_u32(bytes, 0);
    if found != magic {
        return Err(IdxError::BadMagic { path: path.into(), expected: magic, found });
    }
    Ok((0..dims).map(|k| be_u32(bytes, 4 + 4 * k) as usize).collect())
}

/// Parses in-memory IDX image and label payloads. Pixels become byte/255.
pub fn parse_idx<S: Scalar>(images: &[u8], labels: &[u8], image_name: &str, label_name: &str) -> Result<LabelledDataset<S>> {
    let dims = header(images, image_name, IDX_IMAGE_MAGIC, 3)?;
    let (n, pixels) = (dims[0], dims[1] * dims[2]);
    let label_n = header(labels, label_name, IDX_LABEL_MAGIC, 1)?[0];
    if n != label_n {
        return Err(IdxError::CountMismatch { images: n, labels: label_n }.into());
    }
    let need = 16 + n * pixels;
    if images.len() < need {
        return Err(IdxError::Truncated { path: image_name.into(), expected: need, found: images.len() }.into());
    }
    if labels.len() < 8 + n {
        return Err(IdxError::Truncated { path: label_name.into(), expected: 8 + n, found: labels.len() }.into());
    }
    let scale = S::lit(255.0);
    let features = images[16..need].iter().map(|&b| S::from_u8(b).expect("byte") / scale).collect();
    let labels: Vec<usize> = labels[8..8 + n].iter().map(|&b| b as usize).collect();
    let classes = labels.iter().copied().max().unwrap_or(0) + 1;
    LabelledDataset::new(features, pixels, labels, classes)
}

fn read(path: &Path) -> Result<Vec<u8>, IdxError> {
    std::fs::read(path).map_err(|e| IdxError::Io { path: path.display().to_string(), message: e.to_string() })
}

/// Loads a big-endian IDX image file (n, rows, cols) and its label file.
/// Class count is one more than the largest label present.
pub fn load_idx<S: Scalar>(image_path: &Path, label_path: &Path) -> Result<LabelledDataset<S>> {
    let images = read(image_path)?;
    let labels = read(label_path)?;
    parse_idx(&images, &labels, &image_path.display().to_string(), &label_path.display().to_string())
}

/// Encodes a dataset as IDX (image, label) byte payloads. Features must lie in
/// [0, 1] and labels below 256; pixels are rounded to the nearest byte.
pub fn encode_idx<S: Scalar>(data: &LabelledDataset<S>, rows: usize, cols: usize) -> Result<(Vec<u8>, Vec<u8>)> {
    if rows * cols != data.p() {
        return Err(Error::DimensionMismatch { expected: data.p(), got: rows * cols });
    }
    let n = data.n();
    let mut images = Vec::with_capacity(16 + n * data.p());
    for v in [IDX_IMAGE_MAGIC, n as u32, rows as u32, cols as u32] {
        images.extend_from_slice(&v.to_be_bytes());
    }
    for &f in data.features() {
        if !(f >= S::zero() && f <= S::one()) {
            return domain(format!("pixel value {f} outside [0, 1]"));
        }
        images.push((f * S::lit(255.0)).round().to_u8().expect("in range"));
    }
    let mut labels = Vec::with_capacity(8 + n);
    labels.extend_from_slice(&IDX_LABEL_MAGIC.to_be_bytes());
    labels.extend_from_slice(&(n as u32).to_be_bytes());
    for &l in data.labels() {
        labels.push(u8::try_from(l).map_err(|_| Error::Domain(format!("label {l} does not fit in a byte")))?);
    }
    Ok((images, labels))
}

/// Replaces every label by the teacher's prediction; features are unchanged.
pub fn teacher_relabel<S: Scalar>(data: &LabelledDataset<S>, spec: &PredictorSpec, w_star: &WeightVector<S>) -> Result<LabelledDataset<S>> {
    let labels = (0..data.n()).map(|i| predict(spec, w_star, data.row(i))).collect::<Result<Vec<_>>>()?;
    LabelledDataset::new(data.features.clone(), data.p, labels, spec.class_count())
}

/// Random partition into ⌈f·n⌉ training rows and the rest, each kept in
/// original order.
pub fn split<S: Scalar>(data: &LabelledDataset<S>, fraction: f64, seed: u64) -> Result<(LabelledDataset<S>, LabelledDataset<S>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return domain(format!("split fraction must lie in (0, 1), got {fraction}"));
    }
    let n = data.n();
    let n_train = (fraction * n as f64).ceil() as usize;
    if n_train == 0 || n_train >= n {
        return Err(Error::Empty(format!("split of {n} examples at {fraction} leaves one side empty")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut SeedTree::new(seed).stream(&[rng::domain::SPLIT]));
    let (train, hold) = order.split_at_mut(n_train);
    train.sort_unstable();
    hold.sort_unstable();
    Ok((data.select(train)?, data.select(hold)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictors::{empirical_risk, random_weights};

    #[test]
    fn dataset_validation() {
        assert!(LabelledDataset::<f64>::new(vec![], 2, vec![], 2).is_err());
        assert!(LabelledDataset::new(vec![1.0, 2.0, 3.0], 2, vec![0], 2).is_err());
        assert!(LabelledDataset::new(vec![1.0, 2.0], 2, vec![2], 2).is_err());
        assert!(LabelledDataset::new(vec![1.0, f64::INFINITY], 2, vec![0], 2).is_err());
    }

    #[test]
    fn gaussian_pair_statistics() {
        let spec = GaussianClassSpec::<f64>::axis_aligned(10, 2.0).unwrap();
        let n = 100_000;
        let d = gen_gaussian_pair(&spec, n, 5).unwrap();
        assert_eq!(d, gen_gaussian_pair(&spec, n, 5).unwrap());
        let proj: f64 = (0..n).map(|i| (2.0 * d.label(i) as f64 - 1.0) * d.row(i)[0]).sum::<f64>() / n as f64;
        assert!((proj - 2.0).abs() < 3.0 / (n as f64).sqrt(), "{proj}");
        // residual variance per coordinate, χ²-style bound: sd of a variance estimate is √(2/n)
        for k in 0..10 {
            let t = if k == 0 { 2.0 } else { 0.0 };
            let var = (0..n)
                .map(|i| {
                    let e = d.row(i)[k] - (2.0 * d.label(i) as f64 - 1.0) * t;
                    e * e
                })
                .sum::<f64>()
                / n as f64;
            assert!((var - 1.0).abs() < 4.0 * (2.0 / n as f64).sqrt(), "coordinate {k}: {var}");
        }
        let err = gen_gaussian_pair(&spec, 0, 1).unwrap_err();
        assert!(matches!(err, Error::Empty(_)));
    }

    #[test]
    fn no_signal_means_near_origin() {
        let p = 5;
        let spec = GaussianClassSpec::<f64>::axis_aligned(p, 0.0).unwrap();
        let d = gen_gaussian_pair(&spec, 4000, 1).unwrap();
        for class in 0..2 {
            let rows: Vec<usize> = (0..d.n()).filter(|&i| d.label(i) == class).collect();
            let nc = rows.len() as f64;
            let mean_sq: f64 = (0..p).map(|k| (rows.iter().map(|&i| d.row(i)[k]).sum::<f64>() / nc).powi(2)).sum();
            assert!(mean_sq.sqrt() < 3.0 * (p as f64 / nc).sqrt());
        }
    }

    #[test]
    fn idx_fixture_and_errors() {
        let mut images = vec![0, 0, 8, 3, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0, 2];
        images.extend([0, 255, 0, 255]);
        let labels = vec![0, 0, 8, 1, 0, 0, 0, 1, 7];
        let d: LabelledDataset<f64> = parse_idx(&images, &labels, "img", "lbl").unwrap();
        assert_eq!(d.row(0), &[0.0, 1.0, 0.0, 1.0]);
        assert_eq!(d.label(0), 7);

        let mut two = labels.clone();
        two[7] = 2;
        two.push(3);
        let err = parse_idx::<f64>(&images, &two, "img", "lbl").unwrap_err();
        assert_eq!(err, Error::Idx(IdxError::CountMismatch { images: 1, labels: 2 }));

        let mut bad = images.clone();
        bad[3] = 1;
        assert!(matches!(parse_idx::<f64>(&bad, &labels, "img", "lbl"), Err(Error::Idx(IdxError::BadMagic { .. }))));
        assert!(matches!(parse_idx::<f64>(&images[..18], &labels, "img", "lbl"), Err(Error::Idx(IdxError::Truncated { .. }))));
    }

    #[test]
    fn idx_round_trip() {
        let features: Vec<f64> = (0..60).map(|i| ((i * 37) % 256) as f64 / 255.0).collect();
        let d = LabelledDataset::new(features, 6, (0..10).map(|i| i % 3).collect(), 3).unwrap();
        let (img, lbl) = encode_idx(&d, 2, 3).unwrap();
        let back: LabelledDataset<f64> = parse_idx(&img, &lbl, "a", "b").unwrap();
        assert_eq!(back, d);
        assert_eq!(back.fingerprint(), d.fingerprint());
    }

    #[test]
    fn relabel_is_realisable_and_idempotent() {
        let spec = GaussianClassSpec::<f64>::axis_aligned(6, 1.0).unwrap();
        let d = gen_gaussian_pair(&spec, 500, 3).unwrap();
        let mlp = PredictorSpec::mlp(6, vec![5, 3]).unwrap();
        let teacher = random_weights(&mlp, 1.0, 8).unwrap();
        let once = teacher_relabel(&d, &mlp, &teacher).unwrap();
        assert_eq!(once.class_count(), 3);
        assert_eq!(empirical_risk(&mlp, &teacher, &once, None).unwrap(), 0.0);
        assert_eq!(teacher_relabel(&once, &mlp, &teacher).unwrap(), once);
        let mut tally = vec![0; 3];
        for i in 0..d.n() {
            tally[predict(&mlp, &teacher, d.row(i)).unwrap()] += 1;
        }
        assert_eq!(once.label_counts(), tally);
    }

    #[test]
    fn split_partitions() {
        let d = LabelledDataset::new((0..10).map(f64::from).collect(), 1, vec![0; 10], 1).unwrap();
        let (a, b) = split(&d, 0.5, 4).unwrap();
        assert_eq!((a.n(), b.n()), (5, 5));
        let mut all: Vec<f64> = a.features().iter().chain(b.features()).copied().collect();
        all.sort_by(f64::total_cmp);
        assert_eq!(all, d.features());
        assert_eq!(split(&d, 0.5, 4).unwrap(), (a, b));
        let (c, _) = split(&d, 0.31, 4).unwrap();
        assert_eq!(c.n(), 4);
        assert!(split(&d, 1.0, 4).is_err());
    }
}
