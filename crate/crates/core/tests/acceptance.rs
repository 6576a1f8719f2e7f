//! Acceptance run: one PASS/FAIL line per criterion, followed by the
//! measurements behind it. Exits non-zero when any criterion fails.

mod common;

use std::time::{Duration, Instant};

use csym::experiments::oscillation::{amplitude_series, run_amplitude, AmplitudeConfig};
use csym::experiments::stats::{mean, paired_t, sign_test_less};
use csym::experiments::{
    log_snr_grid, run_ablation, run_sweep, run_tether_eval, synth_tether, DetectorChoice,
    SweepConfig, SweepResult, TetherConfig,
};
use csym::synth::Pattern;
use csym::{Detector, DetectorKind, SnrLevel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TRIALS: usize = 100;
const ALPHA: f64 = 0.05;
const RADII: [u32; 3] = [10, 50, 100];
const SNRS: [f64; 4] = [0.1, 1.0, 10.0, 100.0];

struct Outcome {
    pass: bool,
    summary: String,
    details: Vec<String>,
}

fn snr(v: f64) -> SnrLevel {
    SnrLevel::new(v).unwrap()
}

fn sweep(
    detectors: Vec<DetectorChoice>,
    radii: &[u32],
    snrs: Vec<Option<SnrLevel>>,
    seed: u64,
) -> SweepResult {
    let cfg = SweepConfig {
        trials_per_cell: TRIALS,
        base_seed: seed,
        ..SweepConfig::new(detectors, radii.to_vec(), snrs)
    };
    run_sweep(&cfg).expect("sweep runs")
}

fn csym_only() -> Vec<DetectorChoice> {
    vec![DetectorChoice::Standard(DetectorKind::Csym)]
}

fn noise_free_accuracy() -> Outcome {
    let start = Instant::now();
    let res = sweep(csym_only(), &RADII, vec![None], 101);
    let elapsed = start.elapsed();
    let mut pass = elapsed < Duration::from_secs(300);
    let mut details = Vec::new();
    for r in RADII {
        let c = res.cell("csym", r, None).unwrap();
        let ok = c.mean_error <= 0.1 && c.failures == 0;
        pass &= ok;
        details.push(format!(
            "radius {r}: mean {:.4} px, sd {:.4}, failures {}",
            c.mean_error, c.sd_error, c.failures
        ));
    }
    Outcome {
        pass,
        summary: format!(
            "noise-free C-Sym mean error <= 0.1 px ({:.1} s)",
            elapsed.as_secs_f64()
        ),
        details,
    }
}

fn extreme_noise() -> Outcome {
    let start = Instant::now();
    let res = sweep(csym_only(), &[50], vec![Some(snr(0.1))], 102);
    let elapsed = start.elapsed();
    let c = res.cell("csym", 50, Some(0.1)).unwrap();
    let pass = c.mean_error <= 0.3 && elapsed < Duration::from_secs(600);
    Outcome {
        pass,
        summary: format!(
            "C-Sym mean error at SNR 0.1, radius 50: {:.4} px (limit 0.3, {:.1} s)",
            c.mean_error,
            elapsed.as_secs_f64()
        ),
        details: vec![format!("sd {:.4}, failures {}", c.sd_error, c.failures)],
    }
}

fn detector_ordering() -> Outcome {
    let snrs: Vec<Option<SnrLevel>> = SNRS.iter().map(|&v| Some(snr(v))).collect();
    let res = sweep(DetectorChoice::standard(), &RADII, snrs, 103);
    let mut details = Vec::new();
    let (mut csym_qi, mut qi_xcorr, mut degrade) = (true, true, true);
    for r in RADII {
        for s in SNRS {
            let e = |d: &str| res.errors(d, r, Some(s));
            let m = |d: &str| res.cell(d, r, Some(s)).unwrap().mean_error;
            let st = sign_test_less(&e("csym"), &e("qi"));
            let a = m("csym") <= m("qi") && st.p_value < ALPHA;
            let t = paired_t(&e("qi"), &e("xcorr"));
            let b = m("qi") <= m("xcorr") || t.p_value >= ALPHA;
            csym_qi &= a;
            qi_xcorr &= b;
            let mut line = format!(
                "r={r:3} snr={s:5}: csym {:.4} qi {:.4} xcorr {:.4} com {:.4} cht {:.4} | csym<qi {} (sign p={:.2e}) qi<=~xcorr {} (t p={:.2e})",
                m("csym"),
                m("qi"),
                m("xcorr"),
                m("com"),
                m("cht"),
                ok(a),
                st.p_value,
                ok(b),
                t.p_value
            );
            if s < 50.0 {
                for d in ["com", "cht"] {
                    let st = sign_test_less(&e("csym"), &e(d));
                    let worse = m(d) > m("csym") && st.p_value < ALPHA;
                    degrade &= worse;
                    line += &format!(" {d}>csym {}", ok(worse));
                }
            }
            details.push(line);
        }
        for d in ["com", "cht"] {
            let low = res.cell(d, r, Some(0.1)).unwrap().mean_error;
            let high = res.cell(d, r, Some(100.0)).unwrap().mean_error;
            let sharp = low >= 2.0 * high;
            degrade &= sharp;
            details.push(format!(
                "r={r:3} {d}: SNR 0.1 / SNR 100 error ratio {:.2} (>= 2 {})",
                low / high,
                ok(sharp)
            ));
        }
    }
    Outcome {
        pass: csym_qi && qi_xcorr && degrade,
        summary: format!(
            "ordering: C-Sym < QI {}, QI <=~ XCorr {}, CoM/CHT degrade below SNR 50 {}",
            ok(csym_qi),
            ok(qi_xcorr),
            ok(degrade)
        ),
        details,
    }
}

fn ablation() -> Outcome {
    let snrs: Vec<Option<SnrLevel>> = SNRS.iter().map(|&v| Some(snr(v))).collect();
    let cfg = SweepConfig {
        trials_per_cell: TRIALS,
        base_seed: 104,
        ..SweepConfig::new(vec![], RADII.to_vec(), snrs)
    };
    let res = run_ablation(&cfg).expect("ablation runs");
    let (mut median_low, mut median_high) = (true, true);
    let mut details = Vec::new();
    let mut gains = Vec::new();
    for r in RADII {
        for s in SNRS {
            let e = |d: &str| res.errors(d, r, Some(s));
            let m = |d: &str| res.cell(d, r, Some(s)).unwrap().mean_error;
            let mf = if s < 2.0 {
                let st = sign_test_less(&e("csym+mf"), &e("csym"));
                let better = m("csym+mf") < m("csym") && st.p_value < ALPHA;
                median_low &= better;
                format!("median better {} (sign p={:.2e})", ok(better), st.p_value)
            } else {
                let t = paired_t(&e("csym+mf"), &e("csym"));
                let same = t.p_value >= ALPHA;
                median_high &= same;
                format!(
                    "median indistinguishable {} (t p={:.2e})",
                    ok(same),
                    t.p_value
                )
            };
            details.push(format!(
                "r={r:3} snr={s:5}: csym {:.4} csym+mf {:.4} csym-h {:.4} csym+mf-h {:.4} | {mf}",
                m("csym"),
                m("csym+mf"),
                m("csym-h"),
                m("csym+mf-h")
            ));
        }
        // Hermite gain at moderate SNR, pooled over SNR >= 1.
        let pooled = |d: &str| -> Vec<f64> {
            SNRS.iter()
                .filter(|&&s| s >= 1.0)
                .flat_map(|&s| res.errors(d, r, Some(s)))
                .collect()
        };
        let (on, off) = (pooled("csym"), pooled("csym-h"));
        let st = sign_test_less(&on, &off);
        gains.push((r, mean(&off) - mean(&on), st.p_value));
    }
    let (r10_gain, r10_p) = (gains[0].1, gains[0].2);
    let hermite = r10_gain > 0.0 && r10_p < ALPHA && gains[1..].iter().all(|g| g.1 < r10_gain);
    for (r, g, p) in &gains {
        details.push(format!(
            "r={r:3}: Hermite gain (SNR >= 1) {g:+.4} px, sign p={p:.2e}"
        ));
    }
    Outcome {
        pass: median_low && median_high && hermite,
        summary: format!(
            "ablation: median helps below SNR 2 {}, no change at SNR >= 10 {}, Hermite gain concentrated at radius 10 {}",
            ok(median_low),
            ok(median_high),
            ok(hermite)
        ),
        details,
    }
}

fn oscillation() -> Outcome {
    let mut rows = Vec::new();
    let locators: Vec<(String, Detector)> = DetectorKind::ALL
        .iter()
        .map(|&k| (k.to_string(), Detector::for_radius(k, 12.0)))
        .collect();
    for seed in 0..4 {
        let series =
            amplitude_series(&AmplitudeConfig::standard(200 + seed)).expect("series renders");
        rows.extend(run_amplitude(&series, &locators).expect("tracking runs"));
    }
    let mut details = Vec::new();
    let mut means = Vec::new();
    for (name, _) in &locators {
        let errs: Vec<f64> = rows
            .iter()
            .filter(|r| &r.detector == name)
            .map(|r| r.abs_error_px)
            .collect();
        let max = errs.iter().cloned().fold(0.0, f64::max);
        means.push((name.clone(), mean(&errs), max));
        details.push(format!(
            "{name:6}: mean |error| {:.5} px, max {:.5} px over {} sequences",
            mean(&errs),
            max,
            errs.len()
        ));
    }
    let csym = means.iter().find(|m| m.0 == "csym").unwrap().clone();
    let below = csym.2 < 0.02;
    let lowest = means.iter().all(|m| m.0 == "csym" || csym.1 < m.1);
    Outcome {
        pass: below && lowest,
        summary: format!(
            "oscillation amplitude: C-Sym max error {:.5} px < 0.02 {}, lowest mean error {}",
            csym.2,
            ok(below),
            ok(lowest)
        ),
        details,
    }
}

fn tether() -> Outcome {
    let series = synth_tether(&TetherConfig::standard(300)).expect("tether renders");
    let snrs = log_snr_grid(0.1, 10.0, 5).unwrap();
    let locators: Vec<(String, Detector)> = DetectorKind::ALL
        .iter()
        .map(|&k| (k.to_string(), Detector::for_radius(k, 10.0)))
        .collect();
    let rows = run_tether_eval(&series, &locators, 25, &snrs, 301).expect("tether evaluation runs");
    let mut pass = true;
    let mut details = Vec::new();
    for r in &rows {
        if r.detector == "csym" {
            pass &= r.mean_corr > 0.95 && r.sd_corr < 0.02;
        }
        details.push(format!(
            "{:6} snr {:7.4}: mean corr {:.4}, sd {:.4}, failed frames {}",
            r.detector, r.snr, r.mean_corr, r.sd_corr, r.failed_frames
        ));
    }
    Outcome {
        pass,
        summary: "tether: C-Sym mean correlation > 0.95 and sd < 0.02 for SNR 0.1 to 10".into(),
        details,
    }
}

fn properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut failures = Vec::new();
    let mut record = |name: &str, r: Result<(), String>| {
        if let Err(e) = r {
            failures.push(format!("{name}: {e}"));
        }
    };
    for _ in 0..20 {
        let radius = rng.random_range(10..=20);
        record(
            "translation",
            common::check_translation(
                radius,
                rng.random(),
                rng.random_range(-20..=20),
                rng.random_range(-20..=20),
            ),
        );
        let gain = rng.random_range(0.3..1.0);
        record(
            "affine",
            common::check_affine(
                radius,
                rng.random(),
                gain,
                rng.random_range(0.0..=1.0 - gain),
            ),
        );
        let len = rng.random_range(3..16);
        let knots: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
        record("hermite", common::check_hermite(&knots));
        record(
            "parabola",
            common::check_parabola(
                rng.random_range(-50.0..50.0),
                rng.random_range(0.01..10.0),
                rng.random_range(-5.0..5.0),
                rng.random_range(0.001..0.1),
            ),
        );
    }
    record("determinism", common::check_determinism(rng.random()));
    let mut worst = 0.0f64;
    let mut over = 0;
    for _ in 0..50 {
        let radius = rng.random_range(10..=100);
        match common::dense_oracle_gap(radius, rng.random(), &Pattern::BUILTIN) {
            Ok(g) => {
                worst = worst.max(g);
                if g > 0.02 {
                    over += 1;
                }
            }
            Err(e) => record("dense oracle", Err(e)),
        }
    }
    if over > 0 {
        failures.push(format!("dense oracle: {over} of 50 noise-free trials differ by more than 0.02 px (worst {worst:.4})"));
    }
    Outcome {
        pass: failures.is_empty(),
        summary: format!(
            "property checks: {} failure(s), dense oracle worst gap {worst:.4} px",
            failures.len()
        ),
        details: failures,
    }
}

fn ok(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 7] = [
        ("noise-free localization", noise_free_accuracy),
        ("extreme-noise robustness", extreme_noise),
        ("detector ordering", detector_ordering),
        ("ablation", ablation),
        ("oscillation recovery", oscillation),
        ("tether metric", tether),
        ("property suites", properties),
    ];
    let mut failed = 0;
    let mut report = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {}: {verdict}: {name}: {} [{:.1} s]",
            i + 1,
            o.summary,
            start.elapsed().as_secs_f64()
        );
        report.push((i + 1, o.details));
    }
    println!();
    for (i, details) in report {
        for d in details {
            println!("  [{i}] {d}");
        }
    }
    if failed > 0 {
        println!("\n{failed} of 7 acceptance criteria failed");
        std::process::exit(1);
    }
}
