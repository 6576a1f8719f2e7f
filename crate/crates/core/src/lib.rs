//! Subpixel localization of circular particles.
//!
//! The crate provides the circular-symmetry detector ([`csym`]), four
//! reference detectors ([`baselines`]), a synthetic particle generator
//! ([`synth`]) and the benchmark harness used to compare them
//! ([`experiments`]).

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod baselines;
pub mod csym;
pub mod detector;
pub mod error;
pub mod experiments;
pub mod fit;
pub mod image;
pub mod io;
pub mod synth;

pub use detector::{Detector, DetectorKind};
pub use error::{Error, Result};
pub use image::{
    crop, euclidean_error, measure_snr, GrayImage, RegionSpec, SnrLevel, SubpixelPoint,
};
