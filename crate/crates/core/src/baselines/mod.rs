//! Reference detectors used for comparison: center of mass, circular Hough
//! transform, mirror cross-correlation and quadrant interpolation.

mod cht;
mod com;
mod qi;
mod xcorr;

pub use cht::{detect_cht, detect_cht_roi, otsu_threshold, sobel};
pub use com::detect_com;
pub use qi::{detect_qi, refine_qi};
pub use xcorr::{detect_xcorr, mirror_correlation, mirror_correlation_direct};

use std::f64::consts::PI;

use crate::error::{invalid_arg, Result};
use crate::image::{crop, GrayImage, RegionSpec, SubpixelPoint};

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineParams {
    /// Side of the square ROI around the initial guess; odd.
    pub roi_n: usize,
    /// Radii (pixels) that vote in the Hough accumulator.
    pub cht_radius_range: (f64, f64),
    /// Radial sampling step of the quadrant profiles, below one pixel.
    pub qi_radial_step: f64,
    /// Angular sampling step of the quadrant profiles, radians.
    pub qi_angular_step: f64,
    /// QI refinement passes.
    pub qi_iterations: usize,
    /// Fraction of the ROI averaged into the cross-correlation profiles.
    pub band_fraction: f64,
}

impl Default for BaselineParams {
    fn default() -> Self {
        Self {
            roi_n: 25,
            cht_radius_range: (3.0, 13.0),
            qi_radial_step: 0.5,
            qi_angular_step: 2.0 * PI / 64.0,
            qi_iterations: 1,
            band_fraction: 0.2,
        }
    }
}

impl BaselineParams {
    /// ROI of the smallest odd side >= 2.5 radius and a Hough range covering
    /// the inner and outer edges of the built-in patterns.
    pub fn for_radius(radius: f64) -> Self {
        Self {
            roi_n: crate::csym::roi_for_radius(radius),
            cht_radius_range: ((0.25 * radius).max(1.0), 1.3 * radius),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.roi_n < 5 || self.roi_n.is_multiple_of(2) {
            return invalid_arg(format!("roi_n must be odd and >= 5, got {}", self.roi_n));
        }
        let (lo, hi) = self.cht_radius_range;
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return invalid_arg(format!("invalid Hough radius range ({lo}, {hi})"));
        }
        if !(self.qi_radial_step > 0.0 && self.qi_radial_step < 1.0) {
            return invalid_arg("qi_radial_step must lie in (0, 1)");
        }
        if !(self.qi_angular_step > 0.0 && self.qi_angular_step <= PI / 2.0) {
            return invalid_arg("qi_angular_step must lie in (0, pi/2]");
        }
        if !(self.band_fraction > 0.0 && self.band_fraction < 1.0) {
            return invalid_arg("band_fraction must lie in (0, 1)");
        }
        Ok(())
    }
}

/// `|ROI - median(image)|` around the rounded guess, with the ROI origin.
pub(crate) fn background_free_roi(
    image: &GrayImage,
    guess: SubpixelPoint,
    n: usize,
    background: f64,
) -> Result<(Vec<f64>, (i64, i64))> {
    if !guess.is_finite() {
        return invalid_arg("initial guess must be finite");
    }
    let (gx, gy) = guess.round();
    let region = RegionSpec::new(gx, gy, n)?;
    let roi = crop(image, &region)?;
    let data = roi.data().iter().map(|v| (v - background).abs()).collect();
    Ok((data, region.origin()))
}

/// Five-point least-squares parabola around the discrete maximum of
/// `values`; falls back to the discrete index when no concave fit exists.
pub(crate) fn five_point_peak(values: &[f64]) -> f64 {
    let Some(peak) = crate::csym::argmax_centered(values) else {
        return 0.0;
    };
    let half = 2.min(peak).min(values.len() - 1 - peak);
    if half == 0 {
        return peak as f64;
    }
    let xs: Vec<f64> = (peak - half..=peak + half).map(|i| i as f64).collect();
    crate::fit::concave_vertex(&xs, &values[peak - half..=peak + half])
        .map(|v| v.clamp(xs[0], xs[xs.len() - 1]))
        .unwrap_or(peak as f64)
}
