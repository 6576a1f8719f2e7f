//! Independent oracles and property checks shared by the property suite and
//! the acceptance target.
#![allow(dead_code, clippy::needless_range_loop)]

use csym::csym::{
    correlation_maps, detect, extract_templates, symmetry_profiles, CsymParams, HermiteSpline,
};
use csym::experiments::{run_sweep, DetectorChoice, SweepConfig};
use csym::fit::fit_quadratic;
use csym::synth::{make_trial, Pattern, TrialConfig};
use csym::{GrayImage, SnrLevel, SubpixelPoint};

/// Pearson correlation with population moments; `None` for a flat input.
pub fn pearson(a: &GrayImage, b: &GrayImage) -> Option<f64> {
    let n = a.data().len() as f64;
    let ma = a.data().iter().sum::<f64>() / n;
    let mb = b.data().iter().sum::<f64>() / n;
    let cov = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - ma) * (y - mb))
        .sum::<f64>()
        / n;
    let sa = (a.data().iter().map(|x| (x - ma).powi(2)).sum::<f64>() / n).sqrt();
    let sb = (b.data().iter().map(|y| (y - mb).powi(2)).sum::<f64>() / n).sqrt();
    if sa * sb <= 1e-20 {
        return None;
    }
    Some(cov / (sa * sb))
}

/// Symmetry profiles built from explicitly materialized templates.
pub fn oracle_profiles(
    image: &GrayImage,
    guess: (i64, i64),
    params: &CsymParams,
) -> (Vec<f64>, Vec<f64>) {
    let h = params.search_half as i64;
    let side = 2 * params.search_half + 1;
    let mut sx = vec![0.0; side];
    let mut sy = vec![0.0; side];
    for row in 0..side {
        for col in 0..side {
            let cand = (guess.0 - h + col as i64, guess.1 - h + row as i64);
            let t = extract_templates(image, cand, params.roi_n).expect("candidate fits");
            sx[col] += pearson(&t.left, &t.right).unwrap_or(0.0) / side as f64;
            sy[row] += pearson(&t.top, &t.bottom).unwrap_or(0.0) / side as f64;
        }
    }
    (sx, sy)
}

/// Peak of the interpolated profile by dense evaluation on a 0.001 px grid.
pub fn dense_argmax(profile: &[f64]) -> f64 {
    let spline = HermiteSpline::new(profile).unwrap();
    let steps = (spline.end() / 0.001).round() as usize;
    let mut best = (f64::MIN, 0.0);
    for i in 0..=steps {
        let s = i as f64 * 0.001;
        let v = spline.eval(s);
        if v > best.0 {
            best = (v, s);
        }
    }
    best.1
}

/// Brute-force C-Sym: explicit templates, dense interpolant argmax.
pub fn dense_oracle(image: &GrayImage, guess: SubpixelPoint, params: &CsymParams) -> SubpixelPoint {
    let (gx, gy) = guess.round();
    let (sx, sy) = oracle_profiles(image, (gx, gy), params);
    let h = params.search_half as f64;
    SubpixelPoint::new(
        gx as f64 - h + dense_argmax(&sx),
        gy as f64 - h + dense_argmax(&sy),
    )
}

pub type Check = Result<(), String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Check {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Translating the image by whole pixels translates the C-Sym output.
pub fn check_translation(radius: u32, seed: u64, dx: i64, dy: i64) -> Check {
    let cfg = TrialConfig {
        image_size: 8 * radius as usize + 24,
        ..TrialConfig::new(radius, Some(SnrLevel::new(2.0).unwrap()), seed)
    };
    let t = make_trial(&cfg).map_err(|e| e.to_string())?;
    let params = CsymParams::for_radius(radius as f64);
    // keep the shifted window well inside the frame
    let limit = (4 * radius) as i64;
    let (dx, dy) = (dx.clamp(-limit, limit), dy.clamp(-limit, limit));
    let (sx, sy) = (t.truth.x + dx as f64, t.truth.y + dy as f64);
    let reach = (params.roi_n / 2 + params.search_half + 3) as f64;
    let size = cfg.image_size as f64;
    if sx < reach || sy < reach || sx > size - reach || sy > size - reach {
        return Ok(());
    }
    let a = detect(&t.image, t.initial_guess, &params).map_err(|e| e.to_string())?;
    let moved = t.image.translate(dx, dy, t.spec.background);
    let b = detect(
        &moved,
        t.initial_guess.offset(dx as f64, dy as f64),
        &params,
    )
    .map_err(|e| e.to_string())?;
    ensure(
        (b.x - a.x - dx as f64).abs() < 1e-9 && (b.y - a.y - dy as f64).abs() < 1e-9,
        || format!("translation by ({dx},{dy}): {a:?} -> {b:?}"),
    )
}

/// Correlation maps and the profile argmax survive `I -> a I + b`.
pub fn check_affine(radius: u32, seed: u64, gain: f64, bias: f64) -> Check {
    let cfg = TrialConfig {
        image_size: 6 * radius as usize + 24,
        ..TrialConfig::new(radius, Some(SnrLevel::new(1.0).unwrap()), seed)
    };
    let t = make_trial(&cfg).map_err(|e| e.to_string())?;
    let scaled = GrayImage::new(
        t.image.width(),
        t.image.height(),
        t.image.data().iter().map(|v| gain * v + bias).collect(),
    )
    .map_err(|e| e.to_string())?;
    let params = CsymParams::for_radius(radius as f64);
    let g = t.initial_guess.round();
    let m1 = correlation_maps(&t.image, g, &params).map_err(|e| e.to_string())?;
    let m2 = correlation_maps(&scaled, g, &params).map_err(|e| e.to_string())?;
    for (a, b) in m1
        .corr_x
        .iter()
        .zip(&m2.corr_x)
        .chain(m1.corr_y.iter().zip(&m2.corr_y))
    {
        ensure((a - b).abs() < 1e-9, || {
            format!("map entry {a} vs {b} under gain {gain} bias {bias}")
        })?;
    }
    let p1 = symmetry_profiles(&m1).map_err(|e| e.to_string())?;
    let p2 = symmetry_profiles(&m2).map_err(|e| e.to_string())?;
    let am = |v: &[f64]| csym::csym::argmax_centered(v);
    ensure(
        am(&p1.sym_x) == am(&p2.sym_x) && am(&p1.sym_y) == am(&p2.sym_y),
        || "profile argmax moved".into(),
    )
}

/// Interpolant hits every knot and its one-sided derivatives agree with the
/// knot tangent.
pub fn check_hermite(knots: &[f64]) -> Check {
    let s = HermiteSpline::new(knots).map_err(|e| e.to_string())?;
    for (k, &v) in knots.iter().enumerate() {
        let x = k as f64;
        ensure((s.eval(x) - v).abs() < 1e-12, || {
            format!("knot {k}: {} vs {v}", s.eval(x))
        })?;
        let h = 1e-4;
        let m = s.slopes()[k];
        if k > 0 {
            let left = (3.0 * s.eval(x) - 4.0 * s.eval(x - h) + s.eval(x - 2.0 * h)) / (2.0 * h);
            ensure((left - m).abs() < 1e-6, || {
                format!("knot {k}: left derivative {left} vs slope {m}")
            })?;
        }
        if k + 1 < knots.len() {
            let right = (-3.0 * s.eval(x) + 4.0 * s.eval(x + h) - s.eval(x + 2.0 * h)) / (2.0 * h);
            ensure((right - m).abs() < 1e-6, || {
                format!("knot {k}: right derivative {right} vs slope {m}")
            })?;
        }
    }
    Ok(())
}

/// Peak refinement returns the vertex of an exact parabola.
pub fn check_parabola(vertex: f64, curvature: f64, level: f64, step: f64) -> Check {
    let n = 601;
    let start = vertex - 300.0 * step + 0.37 * step;
    let positions: Vec<f64> = (0..n).map(|i| start + i as f64 * step).collect();
    let samples: Vec<f64> = positions
        .iter()
        .map(|x| -curvature * (x - vertex).powi(2) + level)
        .collect();
    let est = csym::csym::parabolic_peak(&samples, &positions, 500).map_err(|e| e.to_string())?;
    ensure((est.position - vertex).abs() < 1e-9, || {
        format!("vertex {vertex}: got {}", est.position)
    })?;
    let q = fit_quadratic(&positions, &samples).ok_or("fit failed")?;
    ensure((q.vertex() - vertex).abs() < 1e-9, || {
        format!("direct fit vertex {}", q.vertex())
    })
}

/// C-Sym agrees with the brute-force dense oracle on a noise-free trial.
/// Returns the per-axis discrepancy.
pub fn dense_oracle_gap(radius: u32, seed: u64, patterns: &[Pattern]) -> Result<f64, String> {
    let cfg = TrialConfig {
        image_size: 6 * radius as usize + 24,
        patterns: patterns.to_vec(),
        ..TrialConfig::new(radius, None, seed)
    };
    let t = make_trial(&cfg).map_err(|e| e.to_string())?;
    let params = CsymParams::for_radius(radius as f64);
    let fast = detect(&t.image, t.initial_guess, &params).map_err(|e| e.to_string())?;
    let slow = dense_oracle(&t.image, t.initial_guess, &params);
    Ok((fast.x - slow.x).abs().max((fast.y - slow.y).abs()))
}

/// Repeated runs give bit-identical detections and sweep records.
pub fn check_determinism(seed: u64) -> Check {
    let cfg = TrialConfig::new(12, Some(SnrLevel::new(0.5).unwrap()), seed);
    let t1 = make_trial(&cfg).map_err(|e| e.to_string())?;
    let t2 = make_trial(&cfg).map_err(|e| e.to_string())?;
    ensure(
        t1.image == t2.image && t1.initial_guess == t2.initial_guess,
        || "trial differs".into(),
    )?;
    let params = CsymParams::for_radius(12.0);
    let a = detect(&t1.image, t1.initial_guess, &params).map_err(|e| e.to_string())?;
    let b = detect(&t2.image, t2.initial_guess, &params).map_err(|e| e.to_string())?;
    ensure(
        a.x.to_bits() == b.x.to_bits() && a.y.to_bits() == b.y.to_bits(),
        || format!("{a:?} vs {b:?}"),
    )?;
    let sweep = SweepConfig {
        trials_per_cell: 4,
        base_seed: seed,
        image_size: 96,
        ..SweepConfig::new(
            DetectorChoice::standard(),
            vec![8],
            vec![Some(SnrLevel::new(1.0).unwrap())],
        )
    };
    let r1 = run_sweep(&sweep).map_err(|e| e.to_string())?;
    let r2 = run_sweep(&sweep).map_err(|e| e.to_string())?;
    ensure(r1 == r2, || "sweep differs between runs".into())
}

pub fn pattern(i: usize) -> Pattern {
    Pattern::BUILTIN[i % Pattern::BUILTIN.len()].clone()
}
