//! Randomized synthetic particle images with known ground truth.
//!
//! Random streams come from ChaCha8 (`rand_chacha::ChaCha8Rng`). A base seed
//! selects the key and a 64-bit stream id selects an independent substream,
//! see [`substream`]. Every trial of a sweep owns its own substream, so trials
//! can be generated in any order or in parallel with identical results.

use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid_arg, Error, Result};
use crate::image::{sigma_from_contrast, GrayImage, SnrLevel, SubpixelPoint};

/// Independent ChaCha8 substream `stream` under key `seed`.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// First 64-bit draw of [`substream`]; a convenient derived seed.
pub fn stream_seed(seed: u64, stream: u64) -> u64 {
    substream(seed, stream).next_u64()
}

/// Radial intensity profile read from a two-column CSV
/// (`r_normalized, intensity_offset`). Linear interpolation between rows;
/// outside the sampled range the nearest end value is held.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    r: Vec<f64>,
    offset: Vec<f64>,
}

impl RadialProfile {
    pub fn new(r: Vec<f64>, offset: Vec<f64>) -> Result<Self> {
        if r.len() != offset.len() || r.len() < 2 {
            return invalid_arg("radial profile needs at least two (r, offset) rows");
        }
        if r.iter().chain(&offset).any(|v| !v.is_finite()) {
            return invalid_arg("radial profile contains non-finite values");
        }
        if r.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return invalid_arg("radial profile r_normalized must lie in [0, 1]");
        }
        if r.windows(2).any(|w| w[1] <= w[0]) {
            return invalid_arg("radial profile r_normalized must be strictly increasing");
        }
        Ok(Self { r, offset })
    }

    pub fn from_csv_reader<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::InvalidInput(format!("radial profile header: {e}")))?
            .clone();
        if headers.len() != 2 {
            return Err(Error::InvalidInput(format!(
                "radial profile needs 2 columns, header has {}",
                headers.len()
            )));
        }
        let (mut r, mut offset) = (Vec::new(), Vec::new());
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| {
                Error::InvalidInput(format!("radial profile row {}: {e}", line + 2))
            })?;
            let parse = |i: usize| -> Result<f64> {
                rec.get(i).unwrap_or("").parse::<f64>().map_err(|e| {
                    Error::InvalidInput(format!("radial profile row {}: {e}", line + 2))
                })
            };
            r.push(parse(0)?);
            offset.push(parse(1)?);
        }
        Self::new(r, offset)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    pub fn eval(&self, u: f64) -> f64 {
        let last = self.r.len() - 1;
        if u <= self.r[0] {
            return self.offset[0];
        }
        if u >= self.r[last] {
            return self.offset[last];
        }
        let k = self.r.partition_point(|&v| v <= u) - 1;
        let t = (u - self.r[k]) / (self.r[k + 1] - self.r[k]);
        self.offset[k] * (1.0 - t) + self.offset[k + 1] * t
    }

    fn tail(&self) -> f64 {
        self.offset[self.offset.len() - 1]
    }
}

/// Radial pattern of a particle as a function of normalized distance
/// `u = r / radius`. Offsets are relative to the background, roughly in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub enum Pattern {
    /// Gaussian spot, `exp(-2 u^2)`.
    Spot,
    /// Bright ring at `u = 1` around a dark core.
    Ring,
    /// Damped cosine with a few diffraction-like fringes inside `u = 1`.
    Airy,
    /// User supplied profile.
    Profile(Arc<RadialProfile>),
}

impl Pattern {
    pub const BUILTIN: [Pattern; 3] = [Pattern::Spot, Pattern::Ring, Pattern::Airy];

    pub fn offset(&self, u: f64) -> f64 {
        match self {
            Pattern::Spot => (-2.0 * u * u).exp(),
            Pattern::Ring => {
                let ring = (u - 1.0) / 0.12;
                let core = u / 0.5;
                (-ring * ring).exp() - 0.5 * (-core * core).exp()
            }
            Pattern::Airy => {
                let taper = if u <= 1.0 {
                    1.0
                } else {
                    let t = (u - 1.0) / 0.15;
                    (-t * t).exp()
                };
                (2.5 * PI * u).cos() * (-1.2 * u).exp() * taper
            }
            Pattern::Profile(p) => p.eval(u),
        }
    }

    /// Normalized distance beyond which the offset is treated as exactly zero.
    fn support(&self) -> f64 {
        match self {
            Pattern::Spot => 4.0,
            Pattern::Ring | Pattern::Airy => 2.0,
            Pattern::Profile(p) if p.tail() == 0.0 => p.r[p.r.len() - 1],
            Pattern::Profile(_) => f64::INFINITY,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Pattern::Spot => "spot",
            Pattern::Ring => "ring",
            Pattern::Airy => "airy",
            Pattern::Profile(_) => "profile",
        }
    }
}

/// Ground-truth description of one synthetic particle.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSpec {
    pub radius: u32,
    pub pattern: Pattern,
    pub true_center: SubpixelPoint,
    /// Background intensity, in `[0.25, 0.75]`.
    pub background: f64,
    pub inverted: bool,
    /// Peak intensity excursion of the pattern above the background.
    pub amplitude: f64,
    /// Radial scale factor applied to `radius`.
    pub scale: f64,
    pub stretch_x: f64,
    pub stretch_y: f64,
}

impl ParticleSpec {
    /// Plain particle: no inversion, unit scale and stretch, amplitude 0.25.
    pub fn new(radius: u32, pattern: Pattern, center: SubpixelPoint, background: f64) -> Self {
        Self {
            radius,
            pattern,
            true_center: center,
            background,
            inverted: false,
            amplitude: 0.25,
            scale: 1.0,
            stretch_x: 1.0,
            stretch_y: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.radius == 0 {
            return invalid_arg("particle radius must be positive");
        }
        if !(0.25..=0.75).contains(&self.background) {
            return invalid_arg(format!(
                "background {} outside [0.25, 0.75]",
                self.background
            ));
        }
        if !self.true_center.is_finite() {
            return invalid_arg("particle center must be finite");
        }
        for (name, v) in [
            ("amplitude", self.amplitude),
            ("scale", self.scale),
            ("stretch_x", self.stretch_x),
            ("stretch_y", self.stretch_y),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return invalid_arg(format!("{name} must be positive, got {v}"));
            }
        }
        Ok(())
    }

    fn check_fits(&self, width: usize, height: usize) -> Result<()> {
        let margin = 2.0 * self.radius as f64;
        let c = self.true_center;
        if c.x < margin
            || c.y < margin
            || c.x > width as f64 - 1.0 - margin
            || c.y > height as f64 - 1.0 - margin
        {
            return Err(Error::Geometry(format!(
                "particle of radius {} at ({:.3}, {:.3}) is closer than 2 radii to the border of a {width}x{height} image",
                self.radius, c.x, c.y
            )));
        }
        Ok(())
    }

    /// Noise-free intensity at a continuous position.
    fn intensity(&self, x: f64, y: f64) -> f64 {
        let r0 = self.radius as f64 * self.scale;
        let dx = (x - self.true_center.x) / (self.stretch_x * r0);
        let dy = (y - self.true_center.y) / (self.stretch_y * r0);
        let u = (dx * dx + dy * dy).sqrt();
        let v = self.background + self.amplitude * self.pattern.offset(u);
        if self.inverted {
            2.0 * self.background - v
        } else {
            v
        }
    }
}

const SUPERSAMPLE: [f64; 2] = [-0.25, 0.25];

/// Renders a noise-free `size x size` image of one particle.
pub fn render_particle(spec: &ParticleSpec, size: usize) -> Result<GrayImage> {
    render_particle_rect(spec, size, size)
}

/// Rectangular variant of [`render_particle`].
pub fn render_particle_rect(spec: &ParticleSpec, width: usize, height: usize) -> Result<GrayImage> {
    spec.validate()?;
    if width == 0 || height == 0 {
        return invalid_arg("image size must be positive");
    }
    spec.check_fits(width, height)?;

    let mut data = vec![spec.background; width * height];
    let r0 = spec.radius as f64 * spec.scale;
    let reach = spec.pattern.support() * r0 * spec.stretch_x.max(spec.stretch_y) + 2.0;
    let (x0, x1, y0, y1) = if reach.is_finite() {
        let c = spec.true_center;
        (
            (c.x - reach).floor().max(0.0) as usize,
            ((c.x + reach).ceil() as usize).min(width - 1),
            (c.y - reach).floor().max(0.0) as usize,
            ((c.y + reach).ceil() as usize).min(height - 1),
        )
    } else {
        (0, width - 1, 0, height - 1)
    };
    for y in y0..=y1 {
        for x in x0..=x1 {
            let mut acc = 0.0;
            for sy in SUPERSAMPLE {
                for sx in SUPERSAMPLE {
                    acc += spec.intensity(x as f64 + sx, y as f64 + sy);
                }
            }
            data[y * width + x] = acc / 4.0;
        }
    }
    Ok(GrayImage::from_clamped(width, height, data))
}

/// Adds white Gaussian noise whose standard deviation realizes `snr` for the
/// contrast of the (noise-free) input. Returns the noisy image and sigma.
pub fn add_noise(image: &GrayImage, snr: SnrLevel, seed: u64) -> Result<(GrayImage, f64)> {
    let (lo, hi) = image.min_max();
    let contrast = hi - lo;
    if !(contrast > 0.0) {
        return Err(Error::InvalidInput(
            "image has no contrast, SNR is undefined".into(),
        ));
    }
    let sigma = sigma_from_contrast(contrast, snr.value());
    Ok((add_gaussian_noise(image, sigma, seed), sigma))
}

/// Adds zero-mean Gaussian noise with a fixed standard deviation and clamps
/// to `[0, 1]`.
pub fn add_gaussian_noise(image: &GrayImage, sigma: f64, seed: u64) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = image
        .data()
        .iter()
        .map(|&v| {
            let n: f64 = rng.sample(StandardNormal);
            v + sigma * n
        })
        .collect();
    GrayImage::from_clamped(image.width(), image.height(), data)
}

/// Parameters of one randomized localization trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialConfig {
    pub radius: u32,
    /// `None` renders a noise-free trial.
    pub snr: Option<SnrLevel>,
    pub image_size: usize,
    pub seed: u64,
    pub initial_error_max: f64,
    /// Patterns drawn uniformly per trial.
    pub patterns: Vec<Pattern>,
}

impl TrialConfig {
    pub fn new(radius: u32, snr: Option<SnrLevel>, seed: u64) -> Self {
        Self {
            radius,
            snr,
            image_size: 512,
            seed,
            initial_error_max: 2.0,
            patterns: Pattern::BUILTIN.to_vec(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.radius == 0 {
            return invalid_arg("trial radius must be positive");
        }
        let needed = 4 * self.radius as usize + 8;
        if self.image_size < needed {
            return Err(Error::Geometry(format!(
                "image size {} too small for radius {} (need at least {needed})",
                self.image_size, self.radius
            )));
        }
        if !(self.initial_error_max >= 0.0) || !self.initial_error_max.is_finite() {
            return invalid_arg("initial_error_max must be a non-negative number");
        }
        if self.patterns.is_empty() {
            return invalid_arg("trial needs at least one pattern");
        }
        Ok(())
    }
}

/// One generated trial.
#[derive(Debug, Clone)]
pub struct Trial {
    pub image: GrayImage,
    /// Noise-free rendering of the same particle.
    pub clean: GrayImage,
    pub truth: SubpixelPoint,
    pub initial_guess: SubpixelPoint,
    /// Noise standard deviation, zero for noise-free trials.
    pub sigma: f64,
    pub spec: ParticleSpec,
}

/// Draws a randomized particle for `config` (consumes `rng`).
pub fn random_spec(config: &TrialConfig, rng: &mut ChaCha8Rng) -> ParticleSpec {
    let r = config.radius as f64;
    let hi = config.image_size as f64 - 1.0 - 2.0 * r;
    let pattern = config.patterns[rng.random_range(0..config.patterns.len())].clone();
    let cx = rng.random_range(2.0 * r..=hi);
    let cy = rng.random_range(2.0 * r..=hi);
    ParticleSpec {
        radius: config.radius,
        pattern,
        true_center: SubpixelPoint::new(cx, cy),
        background: rng.random_range(0.25..=0.75),
        inverted: rng.random_bool(0.5),
        amplitude: rng.random_range(0.15..=0.25),
        scale: rng.random_range(0.9..=1.1),
        stretch_x: rng.random_range(0.95..=1.05),
        stretch_y: rng.random_range(0.95..=1.05),
    }
}

/// Random offset uniform in angle with magnitude uniform in `[0, max]`.
pub fn random_offset(rng: &mut ChaCha8Rng, max: f64) -> (f64, f64) {
    let angle = rng.random_range(0.0..2.0 * PI);
    let mag = if max > 0.0 {
        rng.random_range(0.0..=max)
    } else {
        0.0
    };
    (mag * angle.cos(), mag * angle.sin())
}

/// Generates a randomized particle image, its ground truth and a perturbed
/// initial guess. Fully determined by `config.seed`.
pub fn make_trial(config: &TrialConfig) -> Result<Trial> {
    config.validate()?;
    let mut rng = substream(config.seed, 0);
    let spec = random_spec(config, &mut rng);
    let (dx, dy) = random_offset(&mut rng, config.initial_error_max);
    let noise_seed: u64 = rng.random();

    let clean = render_particle(&spec, config.image_size)?;
    let (image, sigma) = match config.snr {
        Some(snr) => add_noise(&clean, snr, noise_seed)?,
        None => (clean.clone(), 0.0),
    };
    let truth = spec.true_center;
    Ok(Trial {
        image,
        clean,
        truth,
        initial_guess: truth.offset(dx, dy),
        sigma,
        spec,
    })
}
