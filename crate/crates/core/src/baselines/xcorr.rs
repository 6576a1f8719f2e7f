use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::{background_free_roi, five_point_peak, BaselineParams};
use crate::error::{Error, Result};
use crate::image::{GrayImage, SubpixelPoint};

/// Correlation of a profile with its own mirror image,
/// `C(m) = sum_i P(i) P(m - i)` for `m` in `0..2 len - 1`. A profile
/// symmetric about index `x0` peaks at `m = 2 x0`. Computed by FFT on a
/// buffer zero-padded to twice the profile length (no circular wrap-around).
pub fn mirror_correlation(profile: &[f64]) -> Vec<f64> {
    let len = profile.len();
    if len == 0 {
        return Vec::new();
    }
    let size = 2 * len;
    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(size);
    let inverse = planner.plan_fft_inverse(size);
    let mut buf: Vec<Complex64> = profile.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    buf.resize(size, Complex64::new(0.0, 0.0));
    forward.process(&mut buf);
    for z in &mut buf {
        *z = *z * *z;
    }
    inverse.process(&mut buf);
    let scale = 1.0 / size as f64;
    buf[..2 * len - 1].iter().map(|z| z.re * scale).collect()
}

/// Direct O(n^2) evaluation of [`mirror_correlation`].
pub fn mirror_correlation_direct(profile: &[f64]) -> Vec<f64> {
    let len = profile.len();
    if len == 0 {
        return Vec::new();
    }
    (0..2 * len - 1)
        .map(|m| {
            let lo = m.saturating_sub(len - 1);
            let hi = m.min(len - 1);
            (lo..=hi).map(|i| profile[i] * profile[m - i]).sum()
        })
        .collect()
}

/// Symmetry center (profile index units) from the mirror correlation peak.
pub(crate) fn symmetry_center(profile: &[f64]) -> Result<f64> {
    if profile.iter().all(|&v| v == profile[0]) {
        return Err(Error::NoParticle("flat intensity profile".into()));
    }
    Ok(five_point_peak(&mirror_correlation(profile)) / 2.0)
}

/// Rows (or columns) `c +- floor(band * n / 2)` around the ROI center.
fn band(n: usize, band_fraction: f64) -> std::ops::RangeInclusive<usize> {
    let c = n / 2;
    let half = ((band_fraction * n as f64) / 2.0).floor() as usize;
    c - half.min(c)..=c + half.min(c)
}

/// Cross-correlation detector: band-averaged profiles of the median-free
/// ROI, each correlated with its mirror.
pub fn detect_xcorr(
    image: &GrayImage,
    guess: SubpixelPoint,
    params: &BaselineParams,
) -> Result<SubpixelPoint> {
    params.validate()?;
    xcorr_with_background(image, guess, params, image.median())
}

pub(crate) fn xcorr_with_background(
    image: &GrayImage,
    guess: SubpixelPoint,
    params: &BaselineParams,
    background: f64,
) -> Result<SubpixelPoint> {
    let n = params.roi_n;
    let (roi, (ox, oy)) = background_free_roi(image, guess, n, background)?;
    let rows = band(n, params.band_fraction);
    let width = rows.clone().count() as f64;

    let px: Vec<f64> = (0..n)
        .map(|i| rows.clone().map(|j| roi[j * n + i]).sum::<f64>() / width)
        .collect();
    let py: Vec<f64> = (0..n)
        .map(|j| rows.clone().map(|i| roi[j * n + i]).sum::<f64>() / width)
        .collect();

    let cx = symmetry_center(&px)?;
    let cy = symmetry_center(&py)?;
    Ok(SubpixelPoint::new(ox as f64 + cx, oy as f64 + cy))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{render_particle, ParticleSpec, Pattern};

    #[test]
    fn fft_matches_direct() {
        let p: Vec<f64> = (0..23)
            .map(|i| ((i * 37 % 11) as f64).sin().abs())
            .collect();
        let a = mirror_correlation(&p);
        let b = mirror_correlation_direct(&p);
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn symmetric_profile_has_zero_offset() {
        let p = [0.0, 1.0, 3.0, 4.0, 3.0, 1.0, 0.0];
        assert!((symmetry_center(&p).unwrap() - 3.0).abs() < 1e-12);
        assert!(matches!(
            symmetry_center(&[0.2; 7]),
            Err(Error::NoParticle(_))
        ));
    }

    fn spot_at(cx: f64, cy: f64) -> GrayImage {
        render_particle(
            &ParticleSpec::new(10, Pattern::Spot, SubpixelPoint::new(cx, cy), 0.5),
            101,
        )
        .unwrap()
    }

    #[test]
    fn shifted_spot() {
        let params = BaselineParams::for_radius(10.0);
        let centered = detect_xcorr(
            &spot_at(50.0, 50.0),
            SubpixelPoint::new(50.0, 50.0),
            &params,
        )
        .unwrap();
        assert!((centered.x - 50.0).abs() < 1e-9 && (centered.y - 50.0).abs() < 1e-9);
        let shifted = detect_xcorr(
            &spot_at(51.0, 50.0),
            SubpixelPoint::new(50.0, 50.0),
            &params,
        )
        .unwrap();
        assert!((shifted.x - 51.0).abs() < 0.05, "{shifted:?}");
        assert!((shifted.y - 50.0).abs() < 1e-9);
    }

    #[test]
    fn band_is_centered() {
        assert_eq!(band(25, 0.2), 10..=14);
        assert_eq!(band(5, 0.2), 2..=2);
    }
}
