//! One interface over every detector in the crate.

use std::fmt;
use std::str::FromStr;

use crate::baselines::{self, BaselineParams};
use crate::csym::{self, CsymParams};
use crate::error::{Error, Result};
use crate::image::{GrayImage, SubpixelPoint};

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum DetectorKind {
    Csym,
    Com,
    Cht,
    Xcorr,
    Qi,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 5] = [
        DetectorKind::Csym,
        DetectorKind::Com,
        DetectorKind::Cht,
        DetectorKind::Xcorr,
        DetectorKind::Qi,
    ];

    pub fn id(&self) -> &'static str {
        match self {
            DetectorKind::Csym => "csym",
            DetectorKind::Com => "com",
            DetectorKind::Cht => "cht",
            DetectorKind::Xcorr => "xcorr",
            DetectorKind::Qi => "qi",
        }
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DetectorKind::ALL
            .into_iter()
            .find(|k| k.id().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown detector id '{s}'")))
    }
}

/// A configured detector.
#[derive(Debug, Clone, PartialEq)]
pub enum Detector {
    Csym(CsymParams),
    Com(BaselineParams),
    /// Hough transform restricted to the ROI around the guess.
    Cht(BaselineParams),
    Xcorr(BaselineParams),
    Qi(BaselineParams),
}

impl Detector {
    /// Detector with default parameters scaled to the particle radius.
    pub fn for_radius(kind: DetectorKind, radius: f64) -> Self {
        match kind {
            DetectorKind::Csym => Detector::Csym(CsymParams::for_radius(radius)),
            DetectorKind::Com => Detector::Com(BaselineParams::for_radius(radius)),
            DetectorKind::Cht => Detector::Cht(BaselineParams::for_radius(radius)),
            DetectorKind::Xcorr => Detector::Xcorr(BaselineParams::for_radius(radius)),
            DetectorKind::Qi => Detector::Qi(BaselineParams::for_radius(radius)),
        }
    }

    /// Same detector reading an `n x n` region instead.
    pub fn with_roi(mut self, n: usize) -> Self {
        match &mut self {
            Detector::Csym(p) => p.roi_n = n,
            Detector::Com(p) | Detector::Cht(p) | Detector::Xcorr(p) | Detector::Qi(p) => {
                p.roi_n = n
            }
        }
        self
    }

    pub fn kind(&self) -> DetectorKind {
        match self {
            Detector::Csym(_) => DetectorKind::Csym,
            Detector::Com(_) => DetectorKind::Com,
            Detector::Cht(_) => DetectorKind::Cht,
            Detector::Xcorr(_) => DetectorKind::Xcorr,
            Detector::Qi(_) => DetectorKind::Qi,
        }
    }

    /// Side of the square region the detector reads around its guess.
    pub fn roi_n(&self) -> usize {
        match self {
            Detector::Csym(p) => p.roi_n,
            Detector::Com(p) | Detector::Cht(p) | Detector::Xcorr(p) | Detector::Qi(p) => p.roi_n,
        }
    }

    pub fn locate(&self, image: &GrayImage, guess: SubpixelPoint) -> Result<SubpixelPoint> {
        let p = match self {
            Detector::Csym(p) => csym::detect(image, guess, p),
            Detector::Com(p) => baselines::detect_com(image, guess, p),
            Detector::Cht(p) => baselines::detect_cht_roi(image, guess, p),
            Detector::Xcorr(p) => baselines::detect_xcorr(image, guess, p),
            Detector::Qi(p) => baselines::detect_qi(image, guess, p),
        }?;
        if !p.is_finite() {
            return Err(Error::NoParticle(format!(
                "{} produced a non-finite position",
                self.kind()
            )));
        }
        Ok(p)
    }
}
