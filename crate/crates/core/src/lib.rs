//! Simulation of a squeezing-enhanced Sagnac interferometer.
//!
//! The primary track propagates multimode Gaussian states through the loop
//! and estimates phase sensitivity from the detected intensity. Closed-form
//! expressions and a truncated Fock-space oracle serve as independent checks.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod closed_form;
pub mod config;
pub mod error;
pub mod fock;
pub mod gaussian;
pub mod model;
pub mod presets;
pub mod sensitivity;
pub mod validation;

pub use error::{Error, Result};
pub use gaussian::{GaussianState, MomentReport};
pub use model::{
    build_and_run, n_in, Detection, DetectionReport, LossPlacement, LoopLossSpec, MeasuredModes,
    Model, Scenario, Seed,
};
pub use sensitivity::{
    calibrate_kappa, Estimator, FdOptions, SensitivityCurve, SensitivityPoint, SnlConvention,
    KAPPA,
};

/// Version string recorded in output metadata.
pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");
