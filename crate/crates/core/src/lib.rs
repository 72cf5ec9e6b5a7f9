//! Risk-entropy curves of simple learning machines.
//!
//! The numerical kernels are generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the scalar to `f64`, which is what the pipelines use.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod datasets;
pub mod entropy;
pub mod error;
pub mod gardner;
pub mod gibbs;
pub mod interp;
pub mod isotonic;
pub mod mcmc;
pub mod perceptron;
pub mod predictors;
pub mod quadrature;
pub mod rng;
pub mod roots;
pub mod scalar;
pub mod special;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type GaussianClassSpec = perceptron::GaussianClassSpec<f64>;
pub type LabelledDataset = datasets::LabelledDataset<f64>;
pub type WeightVector = predictors::WeightVector<f64>;
pub type BoltzmannCurve = mcmc::BoltzmannCurve<f64>;
pub type EntropyCurve = entropy::EntropyCurve<f64>;
pub type ChainConfig = mcmc::ChainConfig<f64>;
pub type ReplicaState = gardner::ReplicaState<f64>;
