//! Benchmark harness: accuracy sweeps, oscillation amplitude recovery,
//! pixel-to-nanometer calibration, tethered-motion tracking quality and the
//! C-Sym ablation.

pub mod ablation;
pub mod calibration;
pub mod oscillation;
pub mod stats;
pub mod sweep;
pub mod tether;

pub use ablation::run_ablation;
pub use calibration::{fit_calibration, Calibration};
pub use oscillation::{
    fit_sinusoid, synth_oscillation, track, OscillationSeries, Sinusoid, SinusoidFit,
};
pub use sweep::{
    log_snr_grid, run_sweep, CellSummary, DetectorChoice, SweepConfig, SweepResult, TrialRecord,
};
pub use tether::{run_tether_eval, synth_tether, TetherConfig, TetherSeries};

use crate::detector::Detector;
use crate::error::Result;
use crate::image::{GrayImage, SubpixelPoint};

/// Anything that locates a particle in frame `index` of a sequence.
pub trait Locator {
    fn locate_frame(
        &self,
        index: usize,
        image: &GrayImage,
        guess: SubpixelPoint,
    ) -> Result<SubpixelPoint>;
}

impl Locator for Detector {
    fn locate_frame(
        &self,
        _index: usize,
        image: &GrayImage,
        guess: SubpixelPoint,
    ) -> Result<SubpixelPoint> {
        self.locate(image, guess)
    }
}
