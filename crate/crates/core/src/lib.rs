//! Parametric and semiparametric estimators of average treatment effects
//! for a binary treatment and continuous outcome on observational data.
//!
//! The crate provides:
//!
//! - [`data`]: typed column-major tables with missingness, complete-case
//!   filtering, and seedable row resampling;
//! - [`formula`]: the analysis configuration with autogenerated default
//!   outcome/propensity formulas, and a small formula grammar;
//! - [`glm`]: weighted least squares and IRLS logistic regression with
//!   coefficient covariance and contrast inference;
//! - [`estimators`]: standardization, IP weighting, outcome regression,
//!   propensity matching, single-parameter g-estimation (closed form and
//!   grid search), doubly-robust estimation, the Wald instrumental
//!   variable estimator, and exact nonparametric oracles;
//! - [`inference`]: a deterministic parallel bootstrap and Wald intervals;
//! - [`report`]: text blocks and JSON for every estimator.

pub mod data;
pub mod design;
pub mod error;
pub mod estimators;
pub mod formula;
pub mod glm;
pub mod inference;
pub mod report;
pub mod rng;

pub use data::{Column, ColumnKind, Dataset};
pub use error::{Error, Result};
pub use formula::{init_config, CausalConfig, ModelFormula, Term};
pub use glm::{fit_glm, Family, GlmFit};
