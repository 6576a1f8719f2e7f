//! Sinusoidal motion sequences and amplitude recovery.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use rand::RngCore;
use rayon::prelude::*;

use super::Locator;
use crate::error::{invalid_arg, Error, Result};
use crate::image::{GrayImage, SnrLevel, SubpixelPoint};
use crate::synth::{add_noise, render_particle_rect, substream, ParticleSpec, Pattern};

/// Nanometers per pixel of the reference microscope setup.
pub const NM_PER_PX: f64 = 84.7;

/// `x(i) = amplitude * sin(2 pi i / period + phase) + offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sinusoid {
    pub amplitude: f64,
    /// Frames per cycle.
    pub period: f64,
    pub phase: f64,
    pub offset: f64,
}

impl Sinusoid {
    pub fn eval(&self, i: f64) -> f64 {
        self.amplitude * (2.0 * PI * i / self.period + self.phase).sin() + self.offset
    }
}

#[derive(Debug, Clone)]
pub struct OscillationSeries {
    pub frames: Vec<GrayImage>,
    pub motion: Sinusoid,
    /// Particle center of each frame.
    pub truths: Vec<SubpixelPoint>,
    /// Frames per second; one cycle per second for a 1 Hz oscillation.
    pub frame_rate: f64,
}

/// Renders `n_frames` of `spec` moving along x by `motion` (the spec's own x
/// is replaced, y stays fixed). Each frame draws its noise from its own
/// substream of `seed`.
pub fn synth_oscillation(
    spec: &ParticleSpec,
    motion: &Sinusoid,
    n_frames: usize,
    snr: Option<SnrLevel>,
    seed: u64,
    frame_size: (usize, usize),
) -> Result<OscillationSeries> {
    if !(motion.period > 0.0) || !motion.amplitude.is_finite() {
        return invalid_arg("oscillation needs a positive period and finite amplitude");
    }
    if (n_frames as f64) < 2.0 * motion.period {
        return invalid_arg(format!(
            "{n_frames} frames hold fewer than two periods of {}",
            motion.period
        ));
    }
    let (w, h) = frame_size;
    let reach = 2.0 * spec.radius as f64;
    let (lo, hi) = (
        motion.offset - motion.amplitude.abs(),
        motion.offset + motion.amplitude.abs(),
    );
    if lo < reach || hi > (w - 1) as f64 - reach {
        return Err(Error::Geometry(format!(
            "motion range [{lo}, {hi}] leaves less than {reach} px to the frame edge"
        )));
    }
    let results: Vec<(GrayImage, SubpixelPoint)> = (0..n_frames)
        .into_par_iter()
        .map(|i| {
            let center = SubpixelPoint::new(motion.eval(i as f64), spec.true_center.y);
            let frame_spec = ParticleSpec {
                true_center: center,
                ..spec.clone()
            };
            let clean = render_particle_rect(&frame_spec, w, h)?;
            let frame = match snr {
                Some(s) => add_noise(&clean, s, substream(seed, i as u64).next_u64())?.0,
                None => clean,
            };
            Ok((frame, center))
        })
        .collect::<Result<_>>()?;
    let (frames, truths) = results.into_iter().unzip();
    Ok(OscillationSeries {
        frames,
        motion: *motion,
        truths,
        frame_rate: motion.period,
    })
}

/// Least-squares sinusoid with a known period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinusoidFit {
    /// Non-negative; a sign flip is absorbed into the phase.
    pub amplitude: f64,
    /// Phase in `(-pi, pi]`.
    pub phase: f64,
    pub offset: f64,
    /// The phase written as `2 pi / c`; `None` when the phase is zero.
    pub c: Option<f64>,
    pub residual_rms: f64,
    /// Finite samples used by the fit.
    pub used: usize,
}

impl SinusoidFit {
    pub fn curve(&self, period: f64) -> Sinusoid {
        Sinusoid {
            amplitude: self.amplitude,
            period,
            phase: self.phase,
            offset: self.offset,
        }
    }
}

/// Fits `a sin(2 pi i / b + phi) + d` to `positions` (frame `i` at index `i`,
/// NaN for missing frames). With `b` fixed the model is linear in
/// `(a cos phi, a sin phi, d)`, so the global optimum is found directly.
pub fn fit_sinusoid(positions: &[f64], period: f64) -> Result<SinusoidFit> {
    if !(period > 0.0) {
        return invalid_arg("period must be positive");
    }
    if (positions.len() as f64) < 2.0 * period {
        return Err(Error::InvalidInput(format!(
            "{} samples hold fewer than two periods of {period}",
            positions.len()
        )));
    }
    let mut ata = Matrix3::<f64>::zeros();
    let mut atb = Vector3::<f64>::zeros();
    let mut used = 0;
    for (i, &x) in positions.iter().enumerate() {
        if !x.is_finite() {
            continue;
        }
        let theta = 2.0 * PI * i as f64 / period;
        let row = Vector3::new(theta.sin(), theta.cos(), 1.0);
        ata += row * row.transpose();
        atb += row * x;
        used += 1;
    }
    if used < 3 {
        return Err(Error::InvalidInput(
            "fewer than three finite positions".into(),
        ));
    }
    let sol = ata.lu().solve(&atb).ok_or_else(|| Error::Fit {
        message: "sinusoid design matrix is singular".into(),
        residual: f64::NAN,
    })?;
    let (s, c, offset) = (sol[0], sol[1], sol[2]);
    let amplitude = s.hypot(c);
    let phase = if amplitude > 0.0 { c.atan2(s) } else { 0.0 };
    let fit = SinusoidFit {
        amplitude,
        phase,
        offset,
        c: (phase != 0.0).then(|| 2.0 * PI / phase),
        residual_rms: 0.0,
        used,
    };
    let curve = fit.curve(period);
    let ss: f64 = positions
        .iter()
        .enumerate()
        .filter(|(_, x)| x.is_finite())
        .map(|(i, x)| (x - curve.eval(i as f64)).powi(2))
        .sum();
    Ok(SinusoidFit {
        residual_rms: (ss / used as f64).sqrt(),
        ..fit
    })
}

/// Locates the particle in every frame, seeding each frame with the previous
/// detection (or the last good one after a failure).
pub fn track<L: Locator + ?Sized>(
    locator: &L,
    frames: &[GrayImage],
    first_guess: SubpixelPoint,
) -> Vec<Option<SubpixelPoint>> {
    let mut guess = first_guess;
    frames
        .iter()
        .enumerate()
        .map(|(i, frame)| {
            let found = locator.locate_frame(i, frame, guess).ok();
            if let Some(p) = found {
                guess = p;
            }
            found
        })
        .collect()
}

/// Amplitude-recovery experiment over a list of peak-to-peak amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeConfig {
    pub radius: u32,
    pub pattern: Pattern,
    pub period: f64,
    pub n_frames: usize,
    pub snr: Option<SnrLevel>,
    /// Peak-to-peak amplitudes in pixels.
    pub peak_to_peak: Vec<f64>,
    pub seed: u64,
}

impl AmplitudeConfig {
    /// Radius 12, 500 frames per cycle, 1000 frames, SNR 50, 1 to 20 px.
    pub fn standard(seed: u64) -> Self {
        Self {
            radius: 12,
            pattern: Pattern::Spot,
            period: 500.0,
            n_frames: 1000,
            snr: Some(SnrLevel::new(50.0).expect("positive")),
            peak_to_peak: vec![1.0, 2.0, 5.0, 10.0, 15.0, 20.0],
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeRow {
    pub detector: String,
    pub true_p2p: f64,
    pub measured_p2p: f64,
    pub abs_error_px: f64,
    pub rel_error: f64,
    pub residual_rms: f64,
    pub failed_frames: usize,
}

/// One sequence per amplitude, shared by all locators.
pub fn amplitude_series(config: &AmplitudeConfig) -> Result<Vec<OscillationSeries>> {
    config
        .peak_to_peak
        .iter()
        .enumerate()
        .map(|(k, &p2p)| {
            let r = config.radius as f64;
            let width = (p2p + 6.0 * r + 16.0).ceil() as usize | 1;
            let height = (6.0 * r + 16.0).ceil() as usize | 1;
            let mut rng = substream(config.seed, k as u64);
            let jitter = (rng.next_u64() % 1000) as f64 / 1000.0;
            let cy = (height / 2) as f64 + jitter - 0.5;
            let spec = ParticleSpec::new(
                config.radius,
                config.pattern.clone(),
                SubpixelPoint::new(0.0, cy),
                0.5,
            );
            let motion = Sinusoid {
                amplitude: p2p / 2.0,
                period: config.period,
                phase: 2.0 * PI * ((rng.next_u64() % 1000) as f64 / 1000.0),
                offset: (width / 2) as f64 + jitter,
            };
            synth_oscillation(
                &spec,
                &motion,
                config.n_frames,
                config.snr,
                rng.next_u64(),
                (width, height),
            )
        })
        .collect()
}

/// Tracks every sequence with each locator and fits the sinusoid.
pub fn run_amplitude<L: Locator + Sync>(
    series: &[OscillationSeries],
    locators: &[(String, L)],
) -> Result<Vec<AmplitudeRow>> {
    let pairs: Vec<(&str, &L, &OscillationSeries)> = locators
        .iter()
        .flat_map(|(name, l)| series.iter().map(move |s| (name.as_str(), l, s)))
        .collect();
    pairs
        .into_par_iter()
        .map(|(name, locator, s)| {
            let found = track(locator, &s.frames, s.truths[0]);
            let xs: Vec<f64> = found
                .iter()
                .map(|p| p.map(|p| p.x).unwrap_or(f64::NAN))
                .collect();
            let fit = fit_sinusoid(&xs, s.motion.period)?;
            let true_p2p = 2.0 * s.motion.amplitude.abs();
            let measured_p2p = 2.0 * fit.amplitude;
            Ok(AmplitudeRow {
                detector: name.to_string(),
                true_p2p,
                measured_p2p,
                abs_error_px: (measured_p2p - true_p2p).abs(),
                rel_error: if true_p2p > 0.0 {
                    (measured_p2p - true_p2p).abs() / true_p2p
                } else {
                    f64::NAN
                },
                residual_rms: fit.residual_rms,
                failed_frames: found.iter().filter(|p| p.is_none()).count(),
            })
        })
        .collect()
}
