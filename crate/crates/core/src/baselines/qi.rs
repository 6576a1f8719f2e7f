use std::f64::consts::{FRAC_PI_2, PI};

use super::xcorr::{symmetry_center, xcorr_with_background};
use super::BaselineParams;
use crate::error::{Edge, Error, Result};
use crate::image::{GrayImage, SubpixelPoint};

/// Quadrant profiles average over a half-plane, which scales a small center
/// offset by the mean of `cos(theta)` over `(-pi/2, pi/2)`, i.e. `2 / pi`.
const QUADRANT_GAIN: f64 = 2.0 / PI;

/// Quadrant interpolation, seeded with the cross-correlation estimate.
pub fn detect_qi(
    image: &GrayImage,
    guess: SubpixelPoint,
    params: &BaselineParams,
) -> Result<SubpixelPoint> {
    params.validate()?;
    let background = image.median();
    let start = xcorr_with_background(image, guess, params, background)?;
    qi_from(image, start, params, background)
}

/// Runs only the quadrant-interpolation refinement from `start`.
pub fn refine_qi(
    image: &GrayImage,
    start: SubpixelPoint,
    params: &BaselineParams,
) -> Result<SubpixelPoint> {
    params.validate()?;
    qi_from(image, start, params, image.median())
}

fn qi_from(
    image: &GrayImage,
    start: SubpixelPoint,
    params: &BaselineParams,
    background: f64,
) -> Result<SubpixelPoint> {
    let r_max = (params.roi_n / 2) as f64;
    let dr = params.qi_radial_step;
    let radial = (r_max / dr).floor() as usize;
    let angular = ((FRAC_PI_2 / params.qi_angular_step).round() as usize).max(1);
    let angles: Vec<(f64, f64)> = (0..angular)
        .map(|j| {
            let t = (j as f64 + 0.5) * FRAC_PI_2 / angular as f64;
            (t.cos(), t.sin())
        })
        .collect();

    let mut center = start;
    for _ in 0..params.qi_iterations {
        check_grid(image, center, r_max)?;
        let sample = |x: f64, y: f64| abs_bilinear(image, x, y, background);
        // q[quadrant][k]; quadrants are TR, TL, BL, BR with y growing downward.
        let mut q = [
            vec![0.0; radial],
            vec![0.0; radial],
            vec![0.0; radial],
            vec![0.0; radial],
        ];
        for k in 0..radial {
            let r = (k as f64 + 0.5) * dr;
            for &(c, s) in &angles {
                let (dx, dy) = (r * c, r * s);
                q[0][k] += sample(center.x + dx, center.y - dy);
                q[1][k] += sample(center.x - dx, center.y - dy);
                q[2][k] += sample(center.x - dx, center.y + dy);
                q[3][k] += sample(center.x + dx, center.y + dy);
            }
        }
        let sum = |a: usize, b: usize| -> Vec<f64> {
            q[a].iter().zip(&q[b]).map(|(u, v)| u + v).collect()
        };
        let joined = |neg: Vec<f64>, pos: Vec<f64>| -> Vec<f64> {
            neg.into_iter().rev().chain(pos).collect()
        };
        let px = joined(sum(1, 2), sum(0, 3));
        let py = joined(sum(0, 1), sum(2, 3));

        let mid = radial as f64 - 0.5;
        let shift_x = (symmetry_center(&px)? - mid) * dr / QUADRANT_GAIN;
        let shift_y = (symmetry_center(&py)? - mid) * dr / QUADRANT_GAIN;
        center = center.offset(shift_x, shift_y);
    }
    Ok(center)
}

fn check_grid(image: &GrayImage, c: SubpixelPoint, r: f64) -> Result<()> {
    let (width, height) = (image.width(), image.height());
    let edge = if c.x - r < 0.0 {
        Some(Edge::Left)
    } else if c.y - r < 0.0 {
        Some(Edge::Top)
    } else if c.x + r > (width - 1) as f64 {
        Some(Edge::Right)
    } else if c.y + r > (height - 1) as f64 {
        Some(Edge::Bottom)
    } else {
        None
    };
    match edge {
        Some(edge) => Err(Error::OutOfBounds {
            edge,
            width,
            height,
        }),
        None => Ok(()),
    }
}

/// Bilinear interpolation of `|I - background|` from its four neighbors.
fn abs_bilinear(image: &GrayImage, x: f64, y: f64, background: f64) -> f64 {
    let x0 = (x.floor() as usize).min(image.width() - 2);
    let y0 = (y.floor() as usize).min(image.height() - 2);
    let (fx, fy) = (x - x0 as f64, y - y0 as f64);
    let v = |xx: usize, yy: usize| (image.get(xx, yy) - background).abs();
    let top = v(x0, y0) * (1.0 - fx) + v(x0 + 1, y0) * fx;
    let bottom = v(x0, y0 + 1) * (1.0 - fx) + v(x0 + 1, y0 + 1) * fx;
    top * (1.0 - fy) + bottom * fy
}
