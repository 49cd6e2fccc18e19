//! Bayes error estimation from soft labels.
//!
//! The plug-in estimator averages `min(eta, 1 - eta)` over instances. When
//! only hard labels or distorted soft labels are available, the crate provides
//! averaging, calibration (isotonic, histogram, beta, Platt) and the
//! accompanying bias bounds, synthetic data generators and evaluation tools.

pub mod bounds;
pub mod calibration;
pub mod cli;
pub mod error;
pub mod estimator;
pub mod evaluation;
pub mod rng;
pub mod synthdata;

pub use calibration::{
    calibrate_and_estimate, CalibrationMethod, CalibratorModel, PairedDataset, PairedEstimator,
};
pub use error::{Error, Result};
pub use estimator::{
    estimate_bayes_error, soft_from_hard, ConfidenceInterval, EstimateReport, HardLabelCount,
    HardLabelCounts, SoftLabelSet,
};
pub use rng::Seed;
