//! Small least-squares helpers shared by the detectors and the experiments.

use nalgebra::{Matrix3, Vector3};

/// Coefficients of `q1 x^2 + q2 x + q3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadratic {
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
}

impl Quadratic {
    pub fn vertex(&self) -> f64 {
        -self.q2 / (2.0 * self.q1)
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.q1 * x + self.q2) * x + self.q3
    }
}

/// Least-squares quadratic through `(xs, ys)` from the Vandermonde normal
/// equations. Abscissae are centered and scaled internally for conditioning;
/// the returned coefficients are in the original coordinates.
pub fn fit_quadratic(xs: &[f64], ys: &[f64]) -> Option<Quadratic> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return None;
    }
    let n = xs.len() as f64;
    let center = xs.iter().sum::<f64>() / n;
    let scale = xs.iter().map(|x| (x - center).abs()).fold(0.0, f64::max);
    if !(scale > 0.0) {
        return None;
    }
    let mut ata = Matrix3::<f64>::zeros();
    let mut aty = Vector3::<f64>::zeros();
    for (&x, &y) in xs.iter().zip(ys) {
        let u = (x - center) / scale;
        let row = Vector3::new(u * u, u, 1.0);
        ata += row * row.transpose();
        aty += row * y;
    }
    let q = ata.lu().solve(&aty)?;
    let (a, b, c) = (q[0], q[1], q[2]);
    if !(a.is_finite() && b.is_finite() && c.is_finite()) {
        return None;
    }
    // Undo u = (x - center) / scale.
    let s2 = scale * scale;
    Some(Quadratic {
        q1: a / s2,
        q2: b / scale - 2.0 * a * center / s2,
        q3: a * center * center / s2 - b * center / scale + c,
    })
}

/// Vertex of the least-squares parabola, computed in local centered
/// coordinates (more accurate than [`Quadratic::vertex`] far from the origin).
/// `None` when the fit fails or the parabola is not concave.
pub fn concave_vertex(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    if n < 3.0 {
        return None;
    }
    let center = xs.iter().sum::<f64>() / n;
    let local: Vec<f64> = xs.iter().map(|x| x - center).collect();
    let q = fit_quadratic(&local, ys)?;
    if q.q1 < 0.0 {
        Some(center + q.vertex())
    } else {
        None
    }
}
