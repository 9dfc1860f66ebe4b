//! Correlation testing with data calibration.
//!
//! The central operation is [`dcal_test`]: the classical Pearson test applied
//! to out-of-sample predictions of each variable from the other, which tempers
//! significance driven by a handful of influential points. Around it sit the
//! classical test and its numerics, p-value calibrations, multiple-testing
//! corrections, a skipped (outlier-robust) correlation, a seeded simulation
//! harness and batch screening of feature matrices.

pub mod anscombe;
pub mod batch;
pub mod calibration;
pub mod dcal;
pub mod error;
pub mod multitest;
pub mod rng;
pub mod robust;
pub mod simgen;
pub mod special;
pub mod stats;

pub use calibration::{calibrate, pcal_bickel, pcal_sellke, CalibratedP, CalibrationMethod};
pub use dcal::{dcal_test, dcal_test_with, DcalOptions, DcalResult, OosScheme};
pub use error::{Error, Result};
pub use multitest::{bh_adjust, holm_adjust, Correction};
pub use robust::{skipped_correlation, SkippedResult};
pub use stats::{pearson, CorrelationResult, DataPair};
