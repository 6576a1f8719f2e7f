//! C-Sym with the median prefilter and the Hermite step switched on and off.

use super::sweep::{run_sweep, DetectorChoice, SweepConfig, SweepResult};
use crate::error::Result;

/// Runs the four C-Sym variants on paired trials. The detector list of
/// `config` is replaced.
pub fn run_ablation(config: &SweepConfig) -> Result<SweepResult> {
    let config = SweepConfig {
        detectors: DetectorChoice::CSYM_VARIANTS.to_vec(),
        ..config.clone()
    };
    run_sweep(&config)
}
