//! Image, geometry and statistics types shared by every detector.
//!
//! Pixel coordinates: `(0, 0)` is the center of the top-left pixel, `x` grows
//! to the right along columns and `y` grows downward along rows. A pixel at
//! column `c`, row `r` therefore covers `[c - 0.5, c + 0.5) x [r - 0.5, r + 0.5)`.

use crate::error::{invalid_arg, Edge, Error, Result};

/// Row-major grayscale image with intensities normalized to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return invalid_arg(format!(
                "image dimensions must be positive, got {width}x{height}"
            ));
        }
        if data.len() != width * height {
            return invalid_arg(format!(
                "data length {} does not match {width}x{height}",
                data.len()
            ));
        }
        if let Some(i) = data
            .iter()
            .position(|v| !v.is_finite() || !(0.0..=1.0).contains(v))
        {
            return invalid_arg(format!("sample {i} = {} outside [0, 1]", data[i]));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    /// Builds an image from `f(x, y)`, clamping every sample into `[0, 1]`.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(clamp_unit(f(x, y)));
            }
        }
        Self::new(width, height, data)
    }

    /// Clamps arbitrary samples into `[0, 1]`; non-finite samples become 0.
    pub(crate) fn from_clamped(width: usize, height: usize, mut data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height);
        for v in &mut data {
            *v = clamp_unit(*v);
        }
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn row(&self, y: usize) -> &[f64] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn median(&self) -> f64 {
        median(&self.data)
    }

    /// Bilinear interpolation at a subpixel position. Positions outside the
    /// pixel-center grid are clamped to the nearest border sample.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> f64 {
        let xm = (self.width - 1) as f64;
        let ym = (self.height - 1) as f64;
        let x = x.clamp(0.0, xm);
        let y = y.clamp(0.0, ym);
        let x0 = (x.floor() as usize).min(self.width.saturating_sub(2));
        let y0 = (y.floor() as usize).min(self.height.saturating_sub(2));
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let top = self.get(x0, y0) * (1.0 - fx) + self.get(x1, y0) * fx;
        let bottom = self.get(x0, y1) * (1.0 - fx) + self.get(x1, y1) * fx;
        top * (1.0 - fy) + bottom * fy
    }

    /// Shifts the image content by an integer offset, filling exposed pixels
    /// with `fill`.
    pub fn translate(&self, dx: i64, dy: i64, fill: f64) -> Self {
        let mut out = vec![clamp_unit(fill); self.data.len()];
        for y in 0..self.height as i64 {
            let sy = y - dy;
            if sy < 0 || sy >= self.height as i64 {
                continue;
            }
            for x in 0..self.width as i64 {
                let sx = x - dx;
                if sx < 0 || sx >= self.width as i64 {
                    continue;
                }
                out[(y as usize) * self.width + x as usize] = self.get(sx as usize, sy as usize);
            }
        }
        Self {
            width: self.width,
            height: self.height,
            data: out,
        }
    }

    /// Median filter over a `window x window` neighborhood (odd window) with
    /// edge replication.
    pub fn median_filter(&self, window: usize) -> Result<Self> {
        if window == 0 || window.is_multiple_of(2) {
            return invalid_arg(format!("median window must be odd, got {window}"));
        }
        let k = (window / 2) as i64;
        let (w, h) = (self.width as i64, self.height as i64);
        let mut out = Vec::with_capacity(self.data.len());
        let mut win = Vec::with_capacity(window * window);
        for y in 0..h {
            for x in 0..w {
                win.clear();
                for dy in -k..=k {
                    let yy = (y + dy).clamp(0, h - 1) as usize;
                    for dx in -k..=k {
                        let xx = (x + dx).clamp(0, w - 1) as usize;
                        win.push(self.data[yy * self.width + xx]);
                    }
                }
                let mid = win.len() / 2;
                let (_, m, _) = win.select_nth_unstable_by(mid, f64::total_cmp);
                out.push(*m);
            }
        }
        Ok(Self {
            width: self.width,
            height: self.height,
            data: out,
        })
    }
}

#[inline]
pub(crate) fn clamp_unit(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

/// Median of a slice; the mean of the two central values for even lengths.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut buf = values.to_vec();
    let mid = buf.len() / 2;
    let (lower, upper, _) = buf.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if values.len() % 2 == 1 {
        upper
    } else {
        let lower_max = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower_max + upper)
    }
}

/// Floating-point position in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct SubpixelPoint {
    pub x: f64,
    pub y: f64,
}

impl SubpixelPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Nearest integer pixel.
    pub fn round(&self) -> (i64, i64) {
        (self.x.round() as i64, self.y.round() as i64)
    }

    pub fn offset(&self, dx: f64, dy: f64) -> Self {
        Self::new(self.x + dx, self.y + dy)
    }

    pub fn inside(&self, image: &GrayImage) -> bool {
        self.x >= 0.0
            && self.y >= 0.0
            && self.x < image.width() as f64
            && self.y < image.height() as f64
    }
}

/// Square region of odd side `n` centered on an integer pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegionSpec {
    cx: i64,
    cy: i64,
    n: usize,
}

impl RegionSpec {
    pub fn new(cx: i64, cy: i64, n: usize) -> Result<Self> {
        if n < 3 {
            return invalid_arg(format!("region side must be at least 3, got {n}"));
        }
        if n.is_multiple_of(2) {
            return invalid_arg(format!("region side must be odd, got {n}"));
        }
        Ok(Self { cx, cy, n })
    }

    pub fn center(&self) -> (i64, i64) {
        (self.cx, self.cy)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half(&self) -> i64 {
        (self.n / 2) as i64
    }

    /// Top-left pixel of the region.
    pub fn origin(&self) -> (i64, i64) {
        (self.cx - self.half(), self.cy - self.half())
    }

    /// Checks that the region lies inside a `width x height` image.
    pub fn check_fits(&self, width: usize, height: usize) -> Result<()> {
        let h = self.half();
        let oob = |edge| {
            Err(Error::OutOfBounds {
                edge,
                width,
                height,
            })
        };
        if self.cx - h < 0 {
            return oob(Edge::Left);
        }
        if self.cy - h < 0 {
            return oob(Edge::Top);
        }
        if self.cx + h >= width as i64 {
            return oob(Edge::Right);
        }
        if self.cy + h >= height as i64 {
            return oob(Edge::Bottom);
        }
        Ok(())
    }
}

/// Copies the `n x n` sub-image described by `region`.
pub fn crop(image: &GrayImage, region: &RegionSpec) -> Result<GrayImage> {
    region.check_fits(image.width(), image.height())?;
    let (ox, oy) = region.origin();
    let (ox, oy, n) = (ox as usize, oy as usize, region.n());
    let mut data = Vec::with_capacity(n * n);
    for y in oy..oy + n {
        data.extend_from_slice(&image.row(y)[ox..ox + n]);
    }
    Ok(GrayImage {
        width: n,
        height: n,
        data,
    })
}

/// Euclidean distance between an estimate and the ground truth.
pub fn euclidean_error(estimate: SubpixelPoint, truth: SubpixelPoint) -> Result<f64> {
    if !estimate.is_finite() || !truth.is_finite() {
        return invalid_arg("euclidean_error requires finite points");
    }
    Ok((estimate.x - truth.x).hypot(estimate.y - truth.y))
}

/// Signal-to-noise ratio `(I_max - I_min) / (4 sigma) - 1` over the image.
pub fn measure_snr(image: &GrayImage, noise_sigma: f64) -> Result<f64> {
    if !(noise_sigma > 0.0) || !noise_sigma.is_finite() {
        return invalid_arg(format!("noise sigma must be positive, got {noise_sigma}"));
    }
    let (lo, hi) = image.min_max();
    Ok(snr_from_contrast(hi - lo, noise_sigma))
}

pub(crate) fn snr_from_contrast(contrast: f64, sigma: f64) -> f64 {
    contrast / (4.0 * sigma) - 1.0
}

pub(crate) fn sigma_from_contrast(contrast: f64, snr: f64) -> f64 {
    contrast / (4.0 * (snr + 1.0))
}

/// Strictly positive signal-to-noise ratio.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, serde::Serialize, serde::Deserialize)]
pub struct SnrLevel(f64);

impl SnrLevel {
    pub fn new(value: f64) -> Result<Self> {
        if !(value > 0.0) || !value.is_finite() {
            return invalid_arg(format!("SNR must be positive and finite, got {value}"));
        }
        Ok(Self(value))
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}
