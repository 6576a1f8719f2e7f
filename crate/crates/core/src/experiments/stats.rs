//! Summary statistics and the paired tests used to compare detectors.

use statrs::distribution::{Binomial, ContinuousCDF, DiscreteCDF, StudentsT};

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (n - 1 denominator); zero below two values.
pub fn sample_sd(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

/// Outcome of a one-sided paired sign test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignTest {
    /// Pairs where the first sample is strictly smaller.
    pub wins: u64,
    /// Pairs that are not ties.
    pub trials: u64,
    pub p_value: f64,
}

/// One-sided sign test of "`a` tends to be smaller than `b`". Ties and pairs
/// with a missing side are dropped.
pub fn sign_test_less(a: &[f64], b: &[f64]) -> SignTest {
    let (mut wins, mut trials) = (0u64, 0u64);
    for (x, y) in a.iter().zip(b) {
        if !x.is_finite() || !y.is_finite() || x == y {
            continue;
        }
        trials += 1;
        if x < y {
            wins += 1;
        }
    }
    let p_value = if trials == 0 {
        1.0
    } else {
        let dist = Binomial::new(0.5, trials).expect("valid binomial");
        // P(X >= wins)
        if wins == 0 {
            1.0
        } else {
            dist.sf(wins - 1)
        }
    };
    SignTest {
        wins,
        trials,
        p_value,
    }
}

/// Outcome of a paired t-test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedT {
    pub mean_diff: f64,
    pub t: f64,
    /// Two-sided p-value.
    pub p_value: f64,
    pub pairs: usize,
}

/// Paired t-test on `a - b`, skipping pairs with a missing side.
pub fn paired_t(a: &[f64], b: &[f64]) -> PairedT {
    let diffs: Vec<f64> = a
        .iter()
        .zip(b)
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .map(|(x, y)| x - y)
        .collect();
    let n = diffs.len();
    let mean_diff = mean(&diffs);
    let sd = sample_sd(&diffs);
    if n < 2 {
        return PairedT {
            mean_diff,
            t: f64::NAN,
            p_value: 1.0,
            pairs: n,
        };
    }
    if sd == 0.0 {
        let p_value = if mean_diff == 0.0 { 1.0 } else { 0.0 };
        return PairedT {
            mean_diff,
            t: mean_diff.signum() * f64::INFINITY,
            p_value,
            pairs: n,
        };
    }
    let t = mean_diff / (sd / (n as f64).sqrt());
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("valid t distribution");
    let p_value = 2.0 * dist.sf(t.abs());
    PairedT {
        mean_diff,
        t,
        p_value,
        pairs: n,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn moments() {
        let v = [2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0];
        assert_relative_eq!(mean(&v), 5.0);
        assert_relative_eq!(sample_sd(&v), (32.0f64 / 7.0).sqrt(), epsilon = 1e-12);
        assert_eq!(sample_sd(&[1.0]), 0.0);
    }

    #[test]
    fn sign_test_matches_binomial_tail() {
        // 9 of 10 wins: P(X >= 9) = 11 / 1024.
        let a = [0.0; 10];
        let mut b = [1.0; 10];
        b[3] = -1.0;
        let s = sign_test_less(&a, &b);
        assert_eq!((s.wins, s.trials), (9, 10));
        assert_relative_eq!(s.p_value, 11.0 / 1024.0, epsilon = 1e-12);
    }

    #[test]
    fn sign_test_drops_ties_and_missing() {
        let s = sign_test_less(&[1.0, f64::NAN, 0.0], &[1.0, 2.0, 3.0]);
        assert_eq!((s.wins, s.trials), (1, 1));
        assert_relative_eq!(s.p_value, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn paired_t_reference() {
        // diffs 1, 2, 3, 4, 5: mean 3, sd sqrt(2.5), t = 3 / (sqrt(2.5) / sqrt(5)).
        let a = [2.0, 4.0, 6.0, 8.0, 10.0];
        let b = [1.0, 2.0, 3.0, 4.0, 5.0];
        let r = paired_t(&a, &b);
        assert_relative_eq!(r.t, 3.0 / (2.5f64.sqrt() / 5f64.sqrt()), epsilon = 1e-12);
        // two-sided p for t = 4.2426 with 4 dof
        assert!((r.p_value - 0.013_235_6).abs() < 1e-7, "{}", r.p_value);
    }
}
