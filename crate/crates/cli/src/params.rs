//! Parameter records shared by flags and JSON config files.
//!
//! Every subcommand has a flag struct whose fields are all optional and a
//! parameter record with defaults. The config file is read as a JSON object,
//! explicitly given flags are laid over it, and the result is deserialised
//! strictly into the record.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::UsageError;

macro_rules! params {
    ($(#[$smeta:meta])* $args:ident => $params:ident {
        $( $(#[$fmeta:meta])* $field:ident : $ty:ty = $default:expr ),* $(,)?
    }) => {
        $(#[$smeta])*
        #[derive(Debug, Clone, clap::Args, serde::Serialize)]
        pub struct $args {
            /// JSON file of parameter values; flags take precedence
            #[arg(long)]
            #[serde(skip)]
            pub config: Option<std::path::PathBuf>,
            /// Directory for CSV outputs and manifest.json
            #[arg(long)]
            #[serde(skip)]
            pub out: Option<std::path::PathBuf>,
            $( $(#[$fmeta])* #[arg(long)] pub $field: Option<$ty>, )*
        }

        #[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
        #[serde(default, deny_unknown_fields)]
        pub struct $params {
            $( pub $field: $ty, )*
        }

        impl Default for $params {
            fn default() -> Self {
                Self { $( $field: $default, )* }
            }
        }

        impl $args {
            pub fn resolve(&self) -> anyhow::Result<$params> {
                merge(self, self.config.as_deref())
            }
        }
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Exact risk of a linear separator on the Gaussian pair
    Perceptron,
    /// Zero-one risk of an MLP on a dataset
    Mlp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Start {
    Warm,
    Cold,
}

params! {
    PerceptronEntropyArgs => PerceptronEntropyParams {
        /// Feature dimension
        p: usize = 20,
        /// Class separation Δ
        delta: f64 = 2.0,
        /// Grid size when no explicit risks are given
        points: usize = 200,
        /// Explicit risk values
        #[arg(value_delimiter = ',')]
        r_grid: Vec<f64> = Vec::new(),
    }
}

params! {
    BoltzmannRiskArgs => BoltzmannRiskParams {
        p: usize = 20,
        delta: f64 = 2.0,
        /// Inverse temperatures
        #[arg(value_delimiter = ',')]
        beta_grid: Vec<f64> = vec![0.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0],
    }
}

params! {
    HebbianArgs => HebbianParams {
        p: usize = 100,
        delta: f64 = 2.0,
        /// Training-set sizes
        #[arg(value_delimiter = ',')]
        m_grid: Vec<u64> = vec![1, 10, 100, 1000],
    }
}

params! {
    GardnerArgs => GardnerParams {
        /// Loads α = m/p
        #[arg(value_delimiter = ',')]
        alpha: Vec<f64> = vec![10.0, 20.0, 50.0, 100.0, 200.0],
    }
}

params! {
    GibbsAnnealedArgs => GibbsAnnealedParams {
        p: usize = 20,
        delta: f64 = 2.0,
        #[arg(value_delimiter = ',')]
        m_grid: Vec<u64> = vec![10, 100, 1000, 10000],
    }
}

params! {
    SimulateHebbianArgs => SimulateHebbianParams {
        p: usize = 100,
        delta: f64 = 2.0,
        #[arg(value_delimiter = ',')]
        m_grid: Vec<u64> = vec![10, 100, 1000],
        /// Independent training sets per m
        runs: usize = 100,
        seed: u64 = 0,
    }
}

params! {
    GenGaussianArgs => GenGaussianParams {
        p: usize = 20,
        delta: f64 = 2.0,
        /// Number of examples
        n: usize = 1000,
        seed: u64 = 0,
    }
}

params! {
    LoadIdxArgs => LoadIdxParams {
        /// IDX image file
        images: PathBuf = PathBuf::new(),
        /// IDX label file
        labels: PathBuf = PathBuf::new(),
        /// Keep only the first rows (0 keeps all)
        limit: usize = 0,
    }
}

params! {
    RelabelArgs => RelabelParams {
        /// Dataset CSV (label,f0,f1,...)
        input: PathBuf = PathBuf::new(),
        /// Teacher MLP layer sizes after the input layer
        #[arg(value_delimiter = ',')]
        layer_sizes: Vec<usize> = vec![16, 2],
        /// Standard deviation of the teacher's weights
        teacher_scale: f64 = 1.0,
        seed: u64 = 0,
    }
}

params! {
    BoltzmannSweepArgs => BoltzmannSweepParams {
        #[arg(value_enum)]
        model: ModelKind = ModelKind::Perceptron,
        p: usize = 20,
        delta: f64 = 2.0,
        #[arg(value_delimiter = ',')]
        beta_grid: Vec<f64> = vec![0.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0],
        /// Dataset CSV for the mlp model; generated from the Gaussian pair when empty
        dataset: PathBuf = PathBuf::new(),
        /// Generated dataset size
        n: usize = 2000,
        /// Fraction held out for reported risk (0 reports on the acceptance data)
        holdout_fraction: f64 = 0.0,
        #[arg(value_delimiter = ',')]
        layer_sizes: Vec<usize> = vec![16, 2],
        /// Standard deviation of initial weights
        weight_scale: f64 = 1.0,
        /// Keep MLP weights on the unit sphere
        sphere: bool = true,
        chains: usize = 4,
        burn_in: usize = 2000,
        samples: usize = 2000,
        thin: usize = 10,
        proposal_scale: f64 = 0.1,
        calibrate: bool = true,
        max_proposal_scale: f64 = 10.0,
        #[arg(value_enum)]
        start: Start = Start::Warm,
        seed: u64 = 0,
    }
}

params! {
    AnnealedArgs => AnnealedParams {
        #[arg(value_enum)]
        model: ModelKind = ModelKind::Perceptron,
        p: usize = 20,
        delta: f64 = 2.0,
        /// Sample counts m of the (1 − R)^m target
        #[arg(value_delimiter = ',')]
        m_grid: Vec<u64> = vec![0, 10, 100, 1000],
        dataset: PathBuf = PathBuf::new(),
        n: usize = 2000,
        holdout_fraction: f64 = 0.0,
        #[arg(value_delimiter = ',')]
        layer_sizes: Vec<usize> = vec![16, 2],
        weight_scale: f64 = 1.0,
        sphere: bool = true,
        chains: usize = 4,
        burn_in: usize = 2000,
        samples: usize = 2000,
        thin: usize = 10,
        proposal_scale: f64 = 0.1,
        calibrate: bool = true,
        max_proposal_scale: f64 = 10.0,
        #[arg(value_enum)]
        start: Start = Start::Warm,
        seed: u64 = 0,
    }
}

params! {
    ReconstructArgs => ReconstructParams {
        /// Boltzmann curve CSV (beta,risk,stderr,...)
        curve: PathBuf = PathBuf::new(),
        /// Entropy assigned to the anchor
        anchor_s0: f64 = 0.0,
        /// Also predict annealed risks for these sample counts
        #[arg(value_delimiter = ',')]
        m_grid: Vec<u64> = Vec::new(),
    }
}

params! {
    FitQuadraticArgs => FitQuadraticParams {
        /// Entropy curve CSV (r,s,pooled_flag)
        entropy: PathBuf = PathBuf::new(),
    }
}

fn read_config(path: &Path) -> anyhow::Result<Map<String, Value>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    match serde_json::from_str::<Value>(&text) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(UsageError(format!("config {} must hold a JSON object", path.display())).into()),
        Err(e) => Err(UsageError(format!("malformed config {}: {e}", path.display())).into()),
    }
}

/// Config values overlaid with explicitly given flags, deserialised strictly.
pub fn merge<A: Serialize, P: DeserializeOwned>(flags: &A, config: Option<&Path>) -> anyhow::Result<P> {
    let mut merged = match config {
        Some(path) => read_config(path)?,
        None => Map::new(),
    };
    if let Value::Object(given) = serde_json::to_value(flags)? {
        merged.extend(given.into_iter().filter(|(_, v)| !v.is_null()));
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| UsageError(format!("invalid parameters: {e}")).into())
}

/// Fails with a usage error when a path parameter was never given.
pub fn required<'a>(path: &'a Path, name: &str) -> anyhow::Result<&'a Path> {
    if path.as_os_str().is_empty() {
        Err(UsageError(format!("missing required parameter --{}", name.replace('_', "-"))).into())
    } else {
        Ok(path)
    }
}
