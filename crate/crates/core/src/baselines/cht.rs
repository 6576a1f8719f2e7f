use super::BaselineParams;
use crate::error::{invalid_arg, Error, Result};
use crate::image::{crop, GrayImage, RegionSpec, SubpixelPoint};

/// Sobel gradients `(gx, gy)`; the one-pixel border is left at zero.
pub fn sobel(image: &GrayImage) -> (Vec<f64>, Vec<f64>) {
    let (w, h) = (image.width(), image.height());
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    if w < 3 || h < 3 {
        return (gx, gy);
    }
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let p = |dx: isize, dy: isize| {
                image.get((x as isize + dx) as usize, (y as isize + dy) as usize)
            };
            gx[y * w + x] =
                (p(1, -1) + 2.0 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2.0 * p(-1, 0) + p(-1, 1));
            gy[y * w + x] =
                (p(-1, 1) + 2.0 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2.0 * p(0, -1) + p(1, -1));
        }
    }
    (gx, gy)
}

/// Otsu threshold of non-negative values on a 256-bin histogram over
/// `[0, max]`. Returns the upper edge of the last background bin.
pub fn otsu_threshold(values: &[f64]) -> Option<f64> {
    let max = values.iter().copied().fold(0.0, f64::max);
    if !(max > 0.0) {
        return None;
    }
    const BINS: usize = 256;
    let mut hist = [0u64; BINS];
    for &v in values {
        let b = ((v / max) * BINS as f64) as usize;
        hist[b.min(BINS - 1)] += 1;
    }
    let total = values.len() as f64;
    let sum_all: f64 = hist
        .iter()
        .enumerate()
        .map(|(i, &c)| i as f64 * c as f64)
        .sum();
    let (mut w_bg, mut sum_bg) = (0.0, 0.0);
    let (mut best, mut best_bin) = (-1.0, 0);
    for (i, &c) in hist.iter().enumerate() {
        w_bg += c as f64;
        if w_bg == 0.0 {
            continue;
        }
        let w_fg = total - w_bg;
        if w_fg == 0.0 {
            break;
        }
        sum_bg += i as f64 * c as f64;
        let m_bg = sum_bg / w_bg;
        let m_fg = (sum_all - sum_bg) / w_fg;
        let between = w_bg * w_fg * (m_bg - m_fg) * (m_bg - m_fg);
        if between > best {
            best = between;
            best_bin = i;
        }
    }
    Some((best_bin + 1) as f64 * max / BINS as f64)
}

/// Circular Hough transform over the whole image. Edge pixels (Sobel
/// magnitude above the Otsu threshold) vote along both gradient directions
/// for every integer radius in the configured range into one accumulator;
/// the peak is refined by the centroid of its 3x3 neighborhood.
pub fn detect_cht(image: &GrayImage, params: &BaselineParams) -> Result<SubpixelPoint> {
    params.validate()?;
    let (w, h) = (image.width(), image.height());
    let (gx, gy) = sobel(image);
    let magnitude: Vec<f64> = gx.iter().zip(&gy).map(|(a, b)| a.hypot(*b)).collect();
    let threshold = otsu_threshold(&magnitude)
        .ok_or_else(|| Error::NoParticle("image has no gradient".into()))?;

    let (lo, hi) = params.cht_radius_range;
    let radii: Vec<f64> = (lo.ceil() as usize..=hi.floor() as usize)
        .map(|r| r as f64)
        .collect();
    if radii.is_empty() {
        return invalid_arg(format!(
            "Hough radius range ({lo}, {hi}) holds no integer radius"
        ));
    }

    let mut acc = vec![0u32; w * h];
    let mut edges = 0usize;
    for (k, &m) in magnitude.iter().enumerate() {
        if !(m > threshold) {
            continue;
        }
        edges += 1;
        let (x, y) = ((k % w) as f64, (k / w) as f64);
        let (dx, dy) = (gx[k] / m, gy[k] / m);
        for &r in &radii {
            for s in [-r, r] {
                let vx = (x + s * dx).round();
                let vy = (y + s * dy).round();
                if vx >= 0.0 && vy >= 0.0 && (vx as usize) < w && (vy as usize) < h {
                    acc[vy as usize * w + vx as usize] += 1;
                }
            }
        }
    }
    if edges == 0 {
        return Err(Error::NoParticle("edge map is empty".into()));
    }
    let (peak, &votes) = acc
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .expect("accumulator is non-empty");
    if votes == 0 {
        return Err(Error::NoParticle("no votes landed inside the image".into()));
    }

    let (px, py) = ((peak % w) as i64, (peak / w) as i64);
    let (mut mass, mut mx, mut my) = (0.0, 0.0, 0.0);
    for y in (py - 1).max(0)..=(py + 1).min(h as i64 - 1) {
        for x in (px - 1).max(0)..=(px + 1).min(w as i64 - 1) {
            let v = acc[y as usize * w + x as usize] as f64;
            mass += v;
            mx += v * x as f64;
            my += v * y as f64;
        }
    }
    Ok(SubpixelPoint::new(mx / mass, my / mass))
}

/// [`detect_cht`] restricted to the `roi_n x roi_n` region around `guess`.
pub fn detect_cht_roi(
    image: &GrayImage,
    guess: SubpixelPoint,
    params: &BaselineParams,
) -> Result<SubpixelPoint> {
    params.validate()?;
    if !guess.is_finite() {
        return invalid_arg("initial guess must be finite");
    }
    let (gx, gy) = guess.round();
    let region = RegionSpec::new(gx, gy, params.roi_n)?;
    let roi = crop(image, &region)?;
    let (ox, oy) = region.origin();
    detect_cht(&roi, params).map(|p| p.offset(ox as f64, oy as f64))
}
