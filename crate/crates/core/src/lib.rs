//! Generalized additive model (GAM) toolkit.
//!
//! Every trainer in this crate produces an [`AdditiveModel`]: an intercept plus
//! one shape function per feature, in log-odds units. The metrics in
//! [`metrics`] consume that single representation, so tree-based, spline,
//! fused-lasso and linear models can be compared on equal footing.

pub mod boost;
pub mod data;
pub mod error;
pub mod metrics;
pub mod model;
pub mod seed;
pub mod smooth;
pub mod trainer;

pub use data::{BinnedDataset, BinningSpec, RawDataset, SplitPlan, Value};
pub use error::{Error, Result};
pub use model::{AdditiveModel, ShapeFunction};
pub use trainer::{Algorithm, TrainConfig, Trainer};
