//! Circular-symmetry (C-Sym) particle localization.
//!
//! For every integer candidate center in a square search area around the
//! initial guess, the `n x n` ROI is rebuilt four times from mirrored halves
//! (left, right, top, bottom). The normalized correlation between the left
//! and right reconstructions measures mirror symmetry about the candidate
//! column, top/bottom about the candidate row. Averaging the two correlation
//! maps along their second axis gives one symmetry profile per axis; each
//! profile is upsampled with a cubic Hermite spline and its peak is located
//! with a least-squares parabola.

use rayon::prelude::*;

use crate::error::{invalid_arg, Error, Result};
use crate::fit::fit_quadratic;
use crate::image::{crop, GrayImage, RegionSpec, SubpixelPoint};

/// Variance below which a template counts as flat.
const DEGENERATE_VARIANCE: f64 = 1e-20;

#[derive(Debug, Clone, PartialEq)]
pub struct CsymParams {
    /// Side of the square ROI; odd, at least 5.
    pub roi_n: usize,
    /// The search area spans `2 * search_half + 1` candidates per axis. The
    /// default of 5 keeps the full 5 px fit span inside the profile for any
    /// peak within 2.5 px of the rounded guess.
    pub search_half: usize,
    pub use_hermite: bool,
    pub use_median_prefilter: bool,
    /// Odd median window, used when the prefilter is on.
    pub median_window: usize,
    /// Interpolated samples used by the peak fit.
    pub peak_fit_span: usize,
    /// Interpolation step in pixels.
    pub peak_sample_step: f64,
}

impl Default for CsymParams {
    fn default() -> Self {
        Self {
            roi_n: 25,
            search_half: 5,
            use_hermite: true,
            use_median_prefilter: false,
            median_window: 3,
            peak_fit_span: 500,
            peak_sample_step: 0.01,
        }
    }
}

impl CsymParams {
    /// Defaults with the ROI sized to the smallest odd integer >= 2.5 radius.
    pub fn for_radius(radius: f64) -> Self {
        Self {
            roi_n: roi_for_radius(radius),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.roi_n < 5 || self.roi_n.is_multiple_of(2) {
            return invalid_arg(format!("roi_n must be odd and >= 5, got {}", self.roi_n));
        }
        if self.search_half < 1 {
            return invalid_arg("search_half must be at least 1");
        }
        if !(self.peak_sample_step > 0.0) || !self.peak_sample_step.is_finite() {
            return invalid_arg("peak_sample_step must be positive");
        }
        if self.peak_fit_span < 3 {
            return invalid_arg("peak_fit_span must be at least 3");
        }
        if self.use_median_prefilter
            && (self.median_window == 0 || self.median_window.is_multiple_of(2))
        {
            return invalid_arg("median_window must be odd");
        }
        Ok(())
    }

    fn side(&self) -> usize {
        2 * self.search_half + 1
    }
}

/// Smallest odd integer not below `2.5 * radius` (and at least 5).
pub fn roi_for_radius(radius: f64) -> usize {
    let n = (2.5 * radius).ceil().max(5.0) as usize;
    if n.is_multiple_of(2) {
        n + 1
    } else {
        n
    }
}

/// Full-size reconstructions of a ROI from each mirrored half.
#[derive(Debug, Clone, PartialEq)]
pub struct Templates {
    pub left: GrayImage,
    pub right: GrayImage,
    pub top: GrayImage,
    pub bottom: GrayImage,
}

/// Builds the four mirrored templates of the `n x n` ROI centered on
/// `candidate`. The center column (row) is shared by both halves.
pub fn extract_templates(image: &GrayImage, candidate: (i64, i64), n: usize) -> Result<Templates> {
    let roi = crop(image, &RegionSpec::new(candidate.0, candidate.1, n)?)?;
    let c = n / 2;
    let mirror = |i: usize| 2 * c - i;
    let build = |f: &dyn Fn(usize, usize) -> f64| {
        let mut data = Vec::with_capacity(n * n);
        for y in 0..n {
            for x in 0..n {
                data.push(f(x, y));
            }
        }
        GrayImage::new(n, n, data)
    };
    Ok(Templates {
        left: build(&|x, y| roi.get(if x <= c { x } else { mirror(x) }, y))?,
        right: build(&|x, y| roi.get(if x >= c { x } else { mirror(x) }, y))?,
        top: build(&|x, y| roi.get(x, if y <= c { y } else { mirror(y) }))?,
        bottom: build(&|x, y| roi.get(x, if y >= c { y } else { mirror(y) }))?,
    })
}

/// Normalized symmetry correlations over the search grid, row-major with the
/// candidate row as the outer index.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMaps {
    pub side: usize,
    /// Left/right template correlation per candidate.
    pub corr_x: Vec<f64>,
    /// Top/bottom template correlation per candidate.
    pub corr_y: Vec<f64>,
    /// Candidates where a template had zero variance; their entry is 0.
    pub degenerate_x: Vec<bool>,
    pub degenerate_y: Vec<bool>,
}

impl CorrelationMaps {
    pub fn all_degenerate(&self) -> bool {
        self.degenerate_x.iter().all(|&d| d) || self.degenerate_y.iter().all(|&d| d)
    }

    #[inline]
    pub fn at_x(&self, col: usize, row: usize) -> f64 {
        self.corr_x[row * self.side + col]
    }

    #[inline]
    pub fn at_y(&self, col: usize, row: usize) -> f64 {
        self.corr_y[row * self.side + col]
    }
}

/// Correlation maps for the search grid around `guess`.
pub fn correlation_maps(
    image: &GrayImage,
    guess: (i64, i64),
    params: &CsymParams,
) -> Result<CorrelationMaps> {
    params.validate()?;
    let span = params.roi_n + 2 * params.search_half;
    let window = crop(image, &RegionSpec::new(guess.0, guess.1, span)?)?;
    Ok(window_correlation_maps(&window, params))
}

/// Correlation maps on a window whose center pixel is the grid center and
/// whose side is `roi_n + 2 * search_half`.
fn window_correlation_maps(window: &GrayImage, params: &CsymParams) -> CorrelationMaps {
    let side = params.side();
    let n = params.roi_n;
    debug_assert_eq!(window.width(), n + 2 * params.search_half);

    // Shift intensities so sums of squares do not cancel catastrophically.
    let reference = window.mean();
    let w = window.width();
    let centered: Vec<f64> = window.data().iter().map(|v| v - reference).collect();

    let entries: Vec<(Option<f64>, Option<f64>)> = (0..side * side)
        .into_par_iter()
        .map(|k| {
            let (gx, gy) = (k % side, k / side);
            let roi = RoiView {
                data: &centered,
                stride: w,
                x0: gx,
                y0: gy,
                n,
            };
            (roi.mirror_correlation_x(), roi.mirror_correlation_y())
        })
        .collect();

    let mut maps = CorrelationMaps {
        side,
        corr_x: Vec::with_capacity(side * side),
        corr_y: Vec::with_capacity(side * side),
        degenerate_x: Vec::with_capacity(side * side),
        degenerate_y: Vec::with_capacity(side * side),
    };
    for (cx, cy) in entries {
        maps.corr_x.push(cx.unwrap_or(0.0));
        maps.degenerate_x.push(cx.is_none());
        maps.corr_y.push(cy.unwrap_or(0.0));
        maps.degenerate_y.push(cy.is_none());
    }
    maps
}

struct RoiView<'a> {
    data: &'a [f64],
    stride: usize,
    x0: usize,
    y0: usize,
    n: usize,
}

impl RoiView<'_> {
    #[inline]
    fn at(&self, x: usize, y: usize) -> f64 {
        self.data[(self.y0 + y) * self.stride + self.x0 + x]
    }

    /// Pearson correlation of the left and right mirrored templates without
    /// materializing them: the left template holds every pixel left of the
    /// center column twice and the center column once.
    fn mirror_correlation_x(&self) -> Option<f64> {
        let (n, c) = (self.n, self.n / 2);
        let mut acc = MirrorSums::default();
        for y in 0..n {
            for j in 0..c {
                acc.add_pair(self.at(j, y), self.at(2 * c - j, y));
            }
            acc.add_axis(self.at(c, y));
        }
        acc.correlation(n * n)
    }

    fn mirror_correlation_y(&self) -> Option<f64> {
        let (n, c) = (self.n, self.n / 2);
        let mut acc = MirrorSums::default();
        for i in 0..c {
            for x in 0..n {
                acc.add_pair(self.at(x, i), self.at(x, 2 * c - i));
            }
        }
        for x in 0..n {
            acc.add_axis(self.at(x, c));
        }
        acc.correlation(n * n)
    }
}

#[derive(Default)]
struct MirrorSums {
    sum_a: f64,
    sum_b: f64,
    sq_a: f64,
    sq_b: f64,
    cross: f64,
}

impl MirrorSums {
    /// `a` lies in the first half, `b` is its mirror partner.
    #[inline]
    fn add_pair(&mut self, a: f64, b: f64) {
        self.sum_a += 2.0 * a;
        self.sum_b += 2.0 * b;
        self.sq_a += 2.0 * a * a;
        self.sq_b += 2.0 * b * b;
        self.cross += 2.0 * a * b;
    }

    #[inline]
    fn add_axis(&mut self, v: f64) {
        self.sum_a += v;
        self.sum_b += v;
        self.sq_a += v * v;
        self.sq_b += v * v;
        self.cross += v * v;
    }

    fn correlation(&self, count: usize) -> Option<f64> {
        let m = count as f64;
        let (mu_a, mu_b) = (self.sum_a / m, self.sum_b / m);
        let var_a = self.sq_a / m - mu_a * mu_a;
        let var_b = self.sq_b / m - mu_b * mu_b;
        if var_a <= DEGENERATE_VARIANCE || var_b <= DEGENERATE_VARIANCE {
            return None;
        }
        let cov = self.cross / m - mu_a * mu_b;
        Some((cov / (var_a * var_b).sqrt()).clamp(-1.0, 1.0))
    }
}

/// Per-axis symmetry profiles, indexed by candidate column / row.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetryProfiles {
    pub sym_x: Vec<f64>,
    pub sym_y: Vec<f64>,
}

/// Averages `corr_x` over rows and `corr_y` over columns.
pub fn symmetry_profiles(maps: &CorrelationMaps) -> Result<SymmetryProfiles> {
    let side = maps.side;
    if side == 0 || maps.corr_x.len() != side * side || maps.corr_y.len() != side * side {
        return invalid_arg("correlation maps must be square and of equal size");
    }
    let inv = 1.0 / side as f64;
    let sym_x = (0..side)
        .map(|col| (0..side).map(|row| maps.at_x(col, row)).sum::<f64>() * inv)
        .collect();
    let sym_y = (0..side)
        .map(|row| (0..side).map(|col| maps.at_y(col, row)).sum::<f64>() * inv)
        .collect();
    Ok(SymmetryProfiles { sym_x, sym_y })
}

/// C1 piecewise cubic Hermite curve through unit-spaced knots, with
/// centered-difference tangents inside and one-sided tangents at the ends.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteSpline {
    knots: Vec<f64>,
    slopes: Vec<f64>,
}

impl HermiteSpline {
    pub fn new(knots: &[f64]) -> Result<Self> {
        let len = knots.len();
        if len < 3 {
            return Err(Error::InvalidInput(format!(
                "Hermite interpolation needs at least 3 knots, got {len}"
            )));
        }
        let slopes = (0..len)
            .map(|k| match k {
                0 => knots[1] - knots[0],
                k if k == len - 1 => knots[k] - knots[k - 1],
                k => 0.5 * (knots[k + 1] - knots[k - 1]),
            })
            .collect();
        Ok(Self {
            knots: knots.to_vec(),
            slopes,
        })
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    /// Last knot position.
    pub fn end(&self) -> f64 {
        (self.knots.len() - 1) as f64
    }

    fn segment(&self, s: f64) -> (usize, f64) {
        let s = s.clamp(0.0, self.end());
        let k = (s.floor() as usize).min(self.knots.len() - 2);
        (k, s - k as f64)
    }

    pub fn eval(&self, s: f64) -> f64 {
        let (k, t) = self.segment(s);
        let (t2, t3) = (t * t, t * t * t);
        (2.0 * t3 - 3.0 * t2 + 1.0) * self.knots[k]
            + (t3 - 2.0 * t2 + t) * self.slopes[k]
            + (-2.0 * t3 + 3.0 * t2) * self.knots[k + 1]
            + (t3 - t2) * self.slopes[k + 1]
    }

    pub fn derivative(&self, s: f64) -> f64 {
        let (k, t) = self.segment(s);
        let t2 = t * t;
        (6.0 * t2 - 6.0 * t) * self.knots[k]
            + (3.0 * t2 - 4.0 * t + 1.0) * self.slopes[k]
            + (-6.0 * t2 + 6.0 * t) * self.knots[k + 1]
            + (3.0 * t2 - 2.0 * t) * self.slopes[k + 1]
    }

    /// Samples on `0, step, 2 step, ...` up to the last knot.
    pub fn sample(&self, step: f64) -> (Vec<f64>, Vec<f64>) {
        let count = (self.end() / step + 1e-9).floor() as usize + 1;
        let positions: Vec<f64> = (0..count)
            .map(|i| (i as f64 * step).min(self.end()))
            .collect();
        let values = positions.iter().map(|&s| self.eval(s)).collect();
        (positions, values)
    }
}

/// Upsampled profile: `(positions, values)` with spacing `step`, positions in
/// knot-index units.
pub fn hermite_interpolate(profile: &[f64], step: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(step > 0.0) || !step.is_finite() {
        return invalid_arg("interpolation step must be positive");
    }
    Ok(HermiteSpline::new(profile)?.sample(step))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PeakWarning {
    /// The discrete maximum sits on the first or last sample.
    EdgePeak,
    /// The fitted parabola is not concave; the discrete maximum is returned.
    NotConcave,
    /// Fewer samples than requested were available on one side.
    TruncatedSpan,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakEstimate {
    pub position: f64,
    pub warning: Option<PeakWarning>,
}

/// Index of the maximum; ties go to the index nearest the array center, then
/// to the lower index.
pub fn argmax_centered(values: &[f64]) -> Option<usize> {
    let center = (values.len() as f64 - 1.0) / 2.0;
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if v.is_nan() {
            continue;
        }
        best = match best {
            None => Some(i),
            Some(b) => {
                let bv = values[b];
                if v > bv || (v == bv && (i as f64 - center).abs() < (b as f64 - center).abs()) {
                    Some(i)
                } else {
                    Some(b)
                }
            }
        };
    }
    best
}

/// Subpixel peak from a least-squares parabola over at most `span` samples
/// centered on the discrete maximum.
pub fn parabolic_peak(samples: &[f64], positions: &[f64], span: usize) -> Result<PeakEstimate> {
    if samples.len() != positions.len() {
        return Err(Error::InvalidInput(
            "samples and positions differ in length".into(),
        ));
    }
    if samples.len() < 3 || span < 3 {
        return Err(Error::InvalidInput(
            "parabolic peak needs at least 3 samples".into(),
        ));
    }
    let peak = argmax_centered(samples)
        .ok_or_else(|| Error::InvalidInput("all samples are NaN".into()))?;
    let last = samples.len() - 1;
    if peak == 0 || peak == last {
        return Ok(PeakEstimate {
            position: positions[peak],
            warning: Some(PeakWarning::EdgePeak),
        });
    }
    let wanted = span / 2;
    let half = wanted.min(peak).min(last - peak);
    let warning = (half < wanted).then_some(PeakWarning::TruncatedSpan);
    let range = peak - half..=peak + half;
    let origin = positions[peak];
    let xs: Vec<f64> = positions[range.clone()]
        .iter()
        .map(|p| p - origin)
        .collect();
    let fitted = fit_quadratic(&xs, &samples[range]).filter(|q| q.q1 < 0.0);
    match fitted {
        Some(q) => {
            let v = q.vertex().clamp(xs[0], xs[xs.len() - 1]);
            Ok(PeakEstimate {
                position: origin + v,
                warning,
            })
        }
        None => Ok(PeakEstimate {
            position: origin,
            warning: Some(PeakWarning::NotConcave),
        }),
    }
}

/// Detector output with per-axis diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub point: SubpixelPoint,
    pub warning_x: Option<PeakWarning>,
    pub warning_y: Option<PeakWarning>,
    pub profiles: SymmetryProfiles,
}

/// Locates the particle near `guess`.
pub fn detect(
    image: &GrayImage,
    guess: SubpixelPoint,
    params: &CsymParams,
) -> Result<SubpixelPoint> {
    detect_detailed(image, guess, params).map(|d| d.point)
}

pub fn detect_detailed(
    image: &GrayImage,
    guess: SubpixelPoint,
    params: &CsymParams,
) -> Result<Detection> {
    params.validate()?;
    if !guess.is_finite() || !guess.inside(image) {
        return invalid_arg(format!(
            "initial guess ({}, {}) lies outside the image",
            guess.x, guess.y
        ));
    }
    let (gx, gy) = guess.round();
    let span = params.roi_n + 2 * params.search_half;
    let window = crop(image, &RegionSpec::new(gx, gy, span)?)?;
    let window = if params.use_median_prefilter {
        median_window(image, (gx, gy), span, params.median_window)?
    } else {
        window
    };

    let maps = window_correlation_maps(&window, params);
    if maps.all_degenerate() {
        return Err(Error::NoParticle("every candidate template is flat".into()));
    }
    let profiles = symmetry_profiles(&maps)?;
    let (ox, wx) = profile_peak(&profiles.sym_x, params)?;
    let (oy, wy) = profile_peak(&profiles.sym_y, params)?;
    let h = params.search_half as f64;
    Ok(Detection {
        point: SubpixelPoint::new(gx as f64 - h + ox, gy as f64 - h + oy),
        warning_x: wx,
        warning_y: wy,
        profiles,
    })
}

/// Median-filtered search window. Pixels beyond the window are used as
/// filter support when the image has them; otherwise edges are replicated.
fn median_window(
    image: &GrayImage,
    center: (i64, i64),
    span: usize,
    k: usize,
) -> Result<GrayImage> {
    let pad = k / 2;
    let padded = RegionSpec::new(center.0, center.1, span + 2 * pad)?;
    if padded.check_fits(image.width(), image.height()).is_ok() {
        let filtered = crop(image, &padded)?.median_filter(k)?;
        let c = (filtered.width() / 2) as i64;
        crop(&filtered, &RegionSpec::new(c, c, span)?)
    } else {
        crop(image, &RegionSpec::new(center.0, center.1, span)?)?.median_filter(k)
    }
}

/// Peak of one symmetry profile, in candidate-index units.
fn profile_peak(profile: &[f64], params: &CsymParams) -> Result<(f64, Option<PeakWarning>)> {
    let est = if params.use_hermite {
        let (positions, values) = hermite_interpolate(profile, params.peak_sample_step)?;
        parabolic_peak(&values, &positions, params.peak_fit_span)?
    } else {
        let positions: Vec<f64> = (0..profile.len()).map(|i| i as f64).collect();
        parabolic_peak(profile, &positions, 5)?
    };
    Ok((est.position, est.warning))
}
