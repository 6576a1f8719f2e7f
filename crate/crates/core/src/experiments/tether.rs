//! Tracking quality on a tethered particle without ground truth: regions
//! cut at consecutive detections should look alike.

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::stats::{mean, sample_sd};
use super::Locator;
use crate::error::{invalid_arg, Error, Result};
use crate::image::{sigma_from_contrast, GrayImage, SnrLevel, SubpixelPoint};
use crate::synth::{
    add_gaussian_noise, add_noise, random_offset, render_particle, substream, ParticleSpec, Pattern,
};

#[derive(Debug, Clone)]
pub struct TetherSeries {
    /// Frames at the original noise level.
    pub frames: Vec<GrayImage>,
    pub truths: Vec<SubpixelPoint>,
    /// Noise-free contrast of the frames.
    pub contrast: f64,
    /// Noise standard deviation already present in `frames`.
    pub base_sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TetherConfig {
    pub radius: u32,
    pub n_frames: usize,
    /// Per-axis standard deviation of one random-walk step, pixels.
    pub step_sigma: f64,
    /// The walk is reflected back inside this distance from the anchor.
    pub tether_radius: f64,
    pub original_snr: SnrLevel,
    pub image_size: usize,
    pub seed: u64,
}

impl TetherConfig {
    /// Spot of radius 10, unit steps, 5 px tether, SNR 10.
    pub fn standard(seed: u64) -> Self {
        Self {
            radius: 10,
            n_frames: 200,
            step_sigma: 1.0,
            tether_radius: 5.0,
            original_snr: SnrLevel::new(10.0).expect("positive"),
            image_size: 81,
            seed,
        }
    }
}

/// Reflects `p` (relative to the anchor) back inside a circle of radius `r`.
fn reflect(p: (f64, f64), r: f64) -> (f64, f64) {
    let d = p.0.hypot(p.1);
    if d <= r {
        return p;
    }
    // mirror the overshoot about the boundary, clamped for very long steps
    let back = (2.0 * r - d).max(0.0);
    (p.0 / d * back, p.1 / d * back)
}

/// Gaussian random walk of a spot around the image center.
pub fn synth_tether(config: &TetherConfig) -> Result<TetherSeries> {
    if config.n_frames < 2 {
        return invalid_arg("tether series needs at least two frames");
    }
    if !(config.step_sigma >= 0.0 && config.tether_radius >= 0.0) {
        return invalid_arg("step sigma and tether radius must be non-negative");
    }
    let mut rng = substream(config.seed, 0);
    let anchor = (config.image_size as f64 - 1.0) / 2.0 + rng.random_range(-0.5..0.5);
    let mut pos = (0.0, 0.0);
    let mut truths = Vec::with_capacity(config.n_frames);
    for _ in 0..config.n_frames {
        truths.push(SubpixelPoint::new(anchor + pos.0, anchor + pos.1));
        let step: (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
        pos = reflect(
            (
                pos.0 + config.step_sigma * step.0,
                pos.1 + config.step_sigma * step.1,
            ),
            config.tether_radius,
        );
    }
    let background = rng.random_range(0.25..=0.75);
    let noise_seed = rng.next_u64();

    let rendered: Vec<(GrayImage, GrayImage)> = truths
        .par_iter()
        .enumerate()
        .map(|(i, &c)| {
            let spec = ParticleSpec::new(config.radius, Pattern::Spot, c, background);
            let clean = render_particle(&spec, config.image_size)?;
            let (noisy, _) = add_noise(
                &clean,
                config.original_snr,
                substream(noise_seed, i as u64).next_u64(),
            )?;
            Ok((clean, noisy))
        })
        .collect::<Result<_>>()?;
    let contrast = rendered
        .iter()
        .map(|(c, _)| {
            let (lo, hi) = c.min_max();
            hi - lo
        })
        .fold(f64::MAX, f64::min);
    let base_sigma = sigma_from_contrast(contrast, config.original_snr.value());
    Ok(TetherSeries {
        frames: rendered.into_iter().map(|(_, n)| n).collect(),
        truths,
        contrast,
        base_sigma,
    })
}

/// Zero-mean normalized correlation of two equally sized sample vectors,
/// clipped at zero; 1 for two identical flat regions.
pub fn region_correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return if a == b { 1.0 } else { 0.0 };
    }
    (sab / (saa * sbb).sqrt()).clamp(0.0, 1.0)
}

/// `n x n` region centered at a subpixel point, resampled bilinearly.
pub fn resampled_region(image: &GrayImage, center: SubpixelPoint, n: usize) -> Vec<f64> {
    let h = (n / 2) as f64;
    let mut out = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            out.push(image.sample_bilinear(center.x - h + i as f64, center.y - h + j as f64));
        }
    }
    out
}

/// Correlations of regions cut from `original` at consecutive positions.
/// Pairs with a missing detection are skipped.
pub fn consecutive_correlation(
    original: &[GrayImage],
    positions: &[Option<SubpixelPoint>],
    n: usize,
) -> Vec<f64> {
    let regions: Vec<Option<Vec<f64>>> = original
        .iter()
        .zip(positions)
        .map(|(img, p)| p.map(|p| resampled_region(img, p, n)))
        .collect();
    regions
        .windows(2)
        .filter_map(|w| match (&w[0], &w[1]) {
            (Some(a), Some(b)) => Some(region_correlation(a, b)),
            _ => None,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TetherRow {
    pub detector: String,
    pub snr: f64,
    pub mean_corr: f64,
    pub sd_corr: f64,
    pub failed_frames: usize,
}

/// For each target SNR, tops the frames up with noise, tracks the particle
/// in the noisy frames (each frame seeded by the previous detection), and
/// scores consecutive regions cut from the original frames.
pub fn run_tether_eval<L: Locator + Sync>(
    series: &TetherSeries,
    locators: &[(String, L)],
    roi_n: usize,
    snrs: &[SnrLevel],
    seed: u64,
) -> Result<Vec<TetherRow>> {
    if series.frames.len() < 2 {
        return invalid_arg("tether evaluation needs at least two frames");
    }
    let noisy_sets: Vec<Vec<GrayImage>> = snrs
        .par_iter()
        .enumerate()
        .map(|(k, snr)| {
            let target = sigma_from_contrast(series.contrast, snr.value());
            let extra = (target * target - series.base_sigma * series.base_sigma)
                .max(0.0)
                .sqrt();
            let mut rng = substream(seed, k as u64);
            let base = rng.next_u64();
            series
                .frames
                .iter()
                .enumerate()
                .map(|(i, f)| {
                    if extra > 0.0 {
                        add_gaussian_noise(f, extra, base.wrapping_add(i as u64))
                    } else {
                        f.clone()
                    }
                })
                .collect()
        })
        .collect();

    let jobs: Vec<(usize, usize)> = (0..locators.len())
        .flat_map(|li| (0..snrs.len()).map(move |si| (li, si)))
        .collect();
    jobs.into_par_iter()
        .map(|(li, si)| {
            let (name, locator) = &locators[li];
            let found = super::oscillation::track(locator, &noisy_sets[si], series.truths[0]);
            let corr = consecutive_correlation(&series.frames, &found, roi_n);
            if corr.is_empty() {
                return Err(Error::NoParticle(format!(
                    "{name}: no consecutive detections at SNR {}",
                    snrs[si].value()
                )));
            }
            Ok(TetherRow {
                detector: name.clone(),
                snr: snrs[si].value(),
                mean_corr: mean(&corr),
                sd_corr: sample_sd(&corr),
                failed_frames: found.iter().filter(|p| p.is_none()).count(),
            })
        })
        .collect()
}

/// Reports the true position, optionally displaced by `bias` pixels in a
/// random direction drawn per frame.
#[derive(Debug, Clone)]
pub struct TruthOracle {
    pub truths: Vec<SubpixelPoint>,
    pub bias: f64,
    pub seed: u64,
}

impl Locator for TruthOracle {
    fn locate_frame(
        &self,
        index: usize,
        _image: &GrayImage,
        _guess: SubpixelPoint,
    ) -> Result<SubpixelPoint> {
        let t = self
            .truths
            .get(index)
            .ok_or_else(|| Error::InvalidInput(format!("no truth for frame {index}")))?;
        let (dx, dy) = if self.bias > 0.0 {
            let mut rng = substream(self.seed, index as u64);
            let (ux, uy) = random_offset(&mut rng, 1.0);
            let norm = ux.hypot(uy).max(f64::MIN_POSITIVE);
            (self.bias * ux / norm, self.bias * uy / norm)
        } else {
            (0.0, 0.0)
        };
        Ok(t.offset(dx, dy))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn self_correlation_is_one() {
        let img = render_particle(
            &ParticleSpec::new(6, Pattern::Ring, SubpixelPoint::new(20.3, 19.6), 0.5),
            41,
        )
        .unwrap();
        let r = resampled_region(&img, SubpixelPoint::new(20.0, 20.0), 15);
        assert!((region_correlation(&r, &r) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reflection_stays_inside() {
        assert_eq!(reflect((3.0, 4.0), 5.0), (3.0, 4.0));
        let (x, y) = reflect((6.0, 8.0), 5.0);
        assert!((x.hypot(y) - 0.0).abs() < 1e-12);
        let (x, y) = reflect((0.0, 6.0), 5.0);
        assert!((x - 0.0).abs() < 1e-12 && (y - 4.0).abs() < 1e-12);
    }

    #[test]
    fn walk_respects_tether() {
        let cfg = TetherConfig {
            n_frames: 300,
            ..TetherConfig::standard(2)
        };
        let s = synth_tether(&cfg).unwrap();
        let anchor = s.truths[0];
        assert!(s
            .truths
            .iter()
            .all(|t| (t.x - anchor.x).hypot(t.y - anchor.y) <= 5.0 + 1e-9));
    }

    #[test]
    fn static_particle_correlates_perfectly() {
        let img = render_particle(
            &ParticleSpec::new(6, Pattern::Spot, SubpixelPoint::new(20.0, 20.0), 0.5),
            41,
        )
        .unwrap();
        let frames = vec![img.clone(), img.clone(), img];
        let pos = vec![Some(SubpixelPoint::new(20.0, 20.0)); 3];
        let c = consecutive_correlation(&frames, &pos, 15);
        assert_eq!(c.len(), 2);
        assert!(c.iter().all(|v| (v - 1.0).abs() < 1e-9));
    }

    #[test]
    fn biased_oracle_scores_lower() {
        let cfg = TetherConfig {
            n_frames: 60,
            ..TetherConfig::standard(5)
        };
        let s = synth_tether(&cfg).unwrap();
        let oracles = vec![
            (
                "truth".to_string(),
                TruthOracle {
                    truths: s.truths.clone(),
                    bias: 0.0,
                    seed: 1,
                },
            ),
            (
                "biased".to_string(),
                TruthOracle {
                    truths: s.truths.clone(),
                    bias: 3.0,
                    seed: 1,
                },
            ),
        ];
        let rows = run_tether_eval(&s, &oracles, 25, &[SnrLevel::new(10.0).unwrap()], 3).unwrap();
        assert!(rows[1].mean_corr < rows[0].mean_corr, "{rows:?}");
    }
}
