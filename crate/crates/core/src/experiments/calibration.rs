//! Fifth-degree polynomial mapping from measured pixel amplitudes to
//! physical displacements.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const DEGREE: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    /// `coeffs[k]` multiplies `a^k`, so `coeffs[0]` is the constant term.
    pub coeffs: [f64; DEGREE + 1],
    /// Mean of `|D_fit - D| / |D|` over the calibration points.
    pub mean_rel_error: f64,
    pub max_rel_error: f64,
    /// Pearson correlation between fitted and true displacements.
    pub correlation: f64,
}

impl Calibration {
    pub fn eval(&self, a: f64) -> f64 {
        horner(&self.coeffs, a)
    }
}

fn horner(coeffs: &[f64], a: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * a + c)
}

/// Least-squares fit of `D = p6 a^5 + ... + p2 a + p1`. Columns are scaled to
/// unit norm before an SVD solve; fewer than six distinct amplitudes, or a
/// numerically rank-deficient design, is reported as collinear.
pub fn fit_calibration(measured: &[f64], truth: &[f64]) -> Result<Calibration> {
    if measured.len() != truth.len() {
        return Err(Error::InvalidInput(format!(
            "{} amplitudes but {} displacements",
            measured.len(),
            truth.len()
        )));
    }
    if measured.iter().chain(truth).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(
            "calibration data must be finite".into(),
        ));
    }
    let mut distinct = measured.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < DEGREE + 1 {
        return Err(Error::Collinear(format!(
            "{} distinct amplitudes cannot determine a degree-{DEGREE} polynomial",
            distinct.len()
        )));
    }

    let m = measured.len();
    let mut design = DMatrix::from_fn(m, DEGREE + 1, |i, k| measured[i].powi(k as i32));
    let norms: Vec<f64> = (0..=DEGREE).map(|k| design.column(k).norm()).collect();
    for (k, &n) in norms.iter().enumerate() {
        if n == 0.0 {
            return Err(Error::Collinear(format!("design column {k} is zero")));
        }
        design.column_mut(k).scale_mut(1.0 / n);
    }
    let svd = design.svd(true, true);
    let s_max = svd.singular_values.max();
    let s_min = svd.singular_values.min();
    if !(s_min > s_max * 1e-12) {
        return Err(Error::Collinear(format!(
            "design matrix condition number {:.3e}",
            s_max / s_min
        )));
    }
    let rhs = DVector::from_column_slice(truth);
    let scaled = svd
        .solve(&rhs, 0.0)
        .map_err(|e| Error::Collinear(e.to_string()))?;
    let mut coeffs = [0.0; DEGREE + 1];
    for k in 0..=DEGREE {
        coeffs[k] = scaled[k] / norms[k];
    }

    let fitted: Vec<f64> = measured.iter().map(|&a| horner(&coeffs, a)).collect();
    let rel: Vec<f64> = fitted
        .iter()
        .zip(truth)
        .filter(|(_, t)| **t != 0.0)
        .map(|(f, t)| ((f - t) / t).abs())
        .collect();
    let mean_rel_error = if rel.is_empty() {
        0.0
    } else {
        rel.iter().sum::<f64>() / rel.len() as f64
    };
    let max_rel_error = rel.iter().cloned().fold(0.0, f64::max);
    Ok(Calibration {
        coeffs,
        mean_rel_error,
        max_rel_error,
        correlation: pearson(&fitted, truth),
    })
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return f64::NAN;
    }
    sab / (saa * sbb).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::oscillation::NM_PER_PX;

    #[test]
    fn linear_mapping_is_reproduced() {
        let a: Vec<f64> = (1..=11).map(|k| k as f64 * 0.9).collect();
        let d: Vec<f64> = a.iter().map(|v| NM_PER_PX * v).collect();
        let cal = fit_calibration(&a, &d).unwrap();
        assert!(cal.max_rel_error < 1e-9, "{cal:?}");
        assert!((cal.coeffs[1] - NM_PER_PX).abs() < 1e-6);
        for k in 2..=5 {
            assert!(cal.coeffs[k].abs() < 1e-6, "{:?}", cal.coeffs);
        }
        assert!((cal.correlation - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mild_nonlinearity() {
        let a: Vec<f64> = (0..11).map(|k| 0.5 + 2.0 * k as f64).collect();
        let d: Vec<f64> = a
            .iter()
            .map(|v| NM_PER_PX * v * (1.0 + 0.01 * (v / 7.0).sin()))
            .collect();
        let cal = fit_calibration(&a, &d).unwrap();
        assert!(cal.mean_rel_error < 0.01, "{cal:?}");
    }

    #[test]
    fn underdetermined_is_collinear() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let d = a.map(|v| v * 2.0);
        assert!(matches!(fit_calibration(&a, &d), Err(Error::Collinear(_))));
        let repeated = [1.0, 1.0, 2.0, 2.0, 3.0, 3.0, 4.0];
        assert!(matches!(
            fit_calibration(&repeated, &repeated),
            Err(Error::Collinear(_))
        ));
    }
}
