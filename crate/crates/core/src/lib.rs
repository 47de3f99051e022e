//! Synthetic flight-operations data with a Gaussian copula, a twelve-metric
//! fidelity battery, and a train-on-synthetic / test-on-real utility harness
//! built on in-house tree ensembles.

pub mod copula;
pub mod dataset;
pub mod error;
pub mod fidelity;
pub mod pipeline;
pub mod predictors;
pub mod scalar;
pub mod stats;
pub mod table;
pub mod tstr;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Matrix64 = predictors::Matrix<f64>;
pub type Matrix32 = predictors::Matrix<f32>;
pub type TreeModel64 = predictors::TreeModel<f64>;
pub type TreeModel32 = predictors::TreeModel<f32>;
pub type ForestModel64 = predictors::ForestModel<f64>;
pub type ForestModel32 = predictors::ForestModel<f32>;
pub type GbmModel64 = predictors::GbmModel<f64>;
pub type GbmModel32 = predictors::GbmModel<f32>;
pub type RegressionMetrics64 = tstr::RegressionMetrics<f64>;
pub type RegressionMetrics32 = tstr::RegressionMetrics<f32>;
