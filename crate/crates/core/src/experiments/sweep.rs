//! Randomized accuracy sweeps over radius and SNR grids.

use std::collections::hash_map::DefaultHasher;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rand::RngCore;
use rayon::prelude::*;
use serde::Serialize;

use super::stats::{mean, sample_sd};
use crate::csym::CsymParams;
use crate::detector::{Detector, DetectorKind};
use crate::error::{invalid_arg, Error, Result};
use crate::image::{euclidean_error, GrayImage, SnrLevel, SubpixelPoint};
use crate::synth::{make_trial, substream, TrialConfig};

/// A detector entry of a sweep: one of the standard detectors, or C-Sym with
/// explicit prefilter and interpolation switches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DetectorChoice {
    Standard(DetectorKind),
    CsymVariant { median: bool, hermite: bool },
}

impl DetectorChoice {
    /// The four C-Sym variants compared in the ablation.
    pub const CSYM_VARIANTS: [DetectorChoice; 4] = [
        DetectorChoice::CsymVariant {
            median: false,
            hermite: true,
        },
        DetectorChoice::CsymVariant {
            median: true,
            hermite: true,
        },
        DetectorChoice::CsymVariant {
            median: false,
            hermite: false,
        },
        DetectorChoice::CsymVariant {
            median: true,
            hermite: false,
        },
    ];

    pub fn standard() -> Vec<DetectorChoice> {
        DetectorKind::ALL
            .into_iter()
            .map(DetectorChoice::Standard)
            .collect()
    }

    /// Stable label used in CSV output. Variants read `csym`, `csym+mf`,
    /// `csym-h` and `csym+mf-h`.
    pub fn label(&self) -> String {
        match self {
            DetectorChoice::Standard(k) => k.id().to_string(),
            DetectorChoice::CsymVariant { median, hermite } => {
                let mut s = String::from("csym");
                if *median {
                    s.push_str("+mf");
                }
                if !*hermite {
                    s.push_str("-h");
                }
                s
            }
        }
    }

    pub fn build(&self, radius: f64) -> Detector {
        match *self {
            DetectorChoice::Standard(k) => Detector::for_radius(k, radius),
            DetectorChoice::CsymVariant { median, hermite } => Detector::Csym(CsymParams {
                use_median_prefilter: median,
                use_hermite: hermite,
                ..CsymParams::for_radius(radius)
            }),
        }
    }
}

impl fmt::Display for DetectorChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for DetectorChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if let Some(rest) = s.strip_prefix("csym") {
            if rest.is_empty() {
                return Ok(DetectorChoice::Standard(DetectorKind::Csym));
            }
            let (median, hermite) = match rest {
                "+mf" => (true, true),
                "-h" => (false, false),
                "+mf-h" => (true, false),
                _ => return invalid_arg(format!("unknown detector id '{s}'")),
            };
            return Ok(DetectorChoice::CsymVariant { median, hermite });
        }
        s.parse().map(DetectorChoice::Standard)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub detectors: Vec<DetectorChoice>,
    pub radii: Vec<u32>,
    /// `None` is a noise-free cell.
    pub snrs: Vec<Option<SnrLevel>>,
    pub trials_per_cell: usize,
    pub base_seed: u64,
    pub image_size: usize,
    /// Off by default so repeated runs produce identical files.
    pub record_timing: bool,
}

impl SweepConfig {
    pub fn new(
        detectors: Vec<DetectorChoice>,
        radii: Vec<u32>,
        snrs: Vec<Option<SnrLevel>>,
    ) -> Self {
        Self {
            detectors,
            radii,
            snrs,
            trials_per_cell: 100,
            base_seed: 0,
            image_size: 512,
            record_timing: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.detectors.is_empty() || self.radii.is_empty() || self.snrs.is_empty() {
            return invalid_arg("sweep needs at least one detector, radius and SNR");
        }
        if self.trials_per_cell == 0 {
            return invalid_arg("trials_per_cell must be at least 1");
        }
        if self.radii.contains(&0) {
            return invalid_arg("radii must be positive");
        }
        let mut labels: Vec<String> = self.detectors.iter().map(|d| d.label()).collect();
        labels.sort();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return invalid_arg("sweep lists the same detector twice");
        }
        Ok(())
    }

    /// Seed of one trial; independent of the detector list so that sweeps
    /// over different detectors see the same images.
    pub fn trial_seed(&self, radius_index: usize, snr_index: usize, trial: usize) -> u64 {
        let cell = (radius_index * self.snrs.len() + snr_index) as u64;
        substream(self.base_seed, (cell << 32) | trial as u64).next_u64()
    }
}

/// `steps` SNR values spaced evenly in log scale from `lo` to `hi`.
pub fn log_snr_grid(lo: f64, hi: f64, steps: usize) -> Result<Vec<SnrLevel>> {
    if !(lo > 0.0 && hi >= lo && steps >= 1) {
        return invalid_arg("log SNR grid needs 0 < lo <= hi and at least one step");
    }
    if steps == 1 {
        return Ok(vec![SnrLevel::new(lo)?]);
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..steps)
        .map(|i| {
            let v = if i == 0 {
                lo
            } else if i + 1 == steps {
                hi
            } else {
                (a + (b - a) * i as f64 / (steps - 1) as f64).exp()
            };
            SnrLevel::new(v)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub detector: String,
    pub radius: u32,
    pub snr: Option<f64>,
    pub trial: usize,
    pub seed: u64,
    /// Euclidean error in pixels; `None` when the detector failed.
    pub error: Option<f64>,
    pub elapsed: f64,
    /// Hash of the trial image and initial guess, equal for every detector
    /// of the same trial.
    pub fingerprint: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub detector: String,
    pub radius: u32,
    pub snr: Option<f64>,
    pub n: usize,
    pub mean_error: f64,
    pub sd_error: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    /// Sorted by detector (config order), radius, SNR and trial.
    pub records: Vec<TrialRecord>,
    pub cells: Vec<CellSummary>,
}

fn fingerprint(image: &GrayImage, guess: SubpixelPoint) -> u64 {
    let mut h = DefaultHasher::new();
    (image.width(), image.height()).hash(&mut h);
    for v in image.data() {
        v.to_bits().hash(&mut h);
    }
    guess.x.to_bits().hash(&mut h);
    guess.y.to_bits().hash(&mut h);
    h.finish()
}

/// Runs every detector on the same randomized trials of each grid cell.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepResult> {
    config.validate()?;
    let jobs: Vec<(usize, usize, usize)> = (0..config.radii.len())
        .flat_map(|ri| {
            (0..config.snrs.len())
                .flat_map(move |si| (0..config.trials_per_cell).map(move |t| (ri, si, t)))
        })
        .collect();

    let per_trial: Vec<Vec<(usize, TrialRecord)>> = jobs
        .par_iter()
        .map(|&(ri, si, trial)| {
            let radius = config.radii[ri];
            let snr = config.snrs[si];
            let seed = config.trial_seed(ri, si, trial);
            let trial_config = TrialConfig {
                image_size: config.image_size,
                ..TrialConfig::new(radius, snr, seed)
            };
            let t = make_trial(&trial_config).map_err(|e| {
                Error::Geometry(format!(
                    "cell radius={radius} snr={}: {e}",
                    snr_label(snr.map(|s| s.value()))
                ))
            })?;
            let fp = fingerprint(&t.image, t.initial_guess);
            Ok(config
                .detectors
                .iter()
                .enumerate()
                .map(|(di, choice)| {
                    let detector = choice.build(radius as f64);
                    let start = Instant::now();
                    let found = detector.locate(&t.image, t.initial_guess);
                    let elapsed = if config.record_timing {
                        start.elapsed().as_secs_f64()
                    } else {
                        0.0
                    };
                    let error = found.ok().and_then(|p| euclidean_error(p, t.truth).ok());
                    let record = TrialRecord {
                        detector: choice.label(),
                        radius,
                        snr: snr.map(|s| s.value()),
                        trial,
                        seed,
                        error,
                        elapsed,
                        fingerprint: fp,
                    };
                    (di, record)
                })
                .collect())
        })
        .collect::<Result<_>>()?;

    let mut keyed: Vec<((usize, usize, usize, usize), TrialRecord)> =
        Vec::with_capacity(jobs.len() * config.detectors.len());
    for (&(ri, si, t), recs) in jobs.iter().zip(per_trial) {
        for (di, r) in recs {
            keyed.push(((di, ri, si, t), r));
        }
    }
    keyed.sort_by_key(|(k, _)| *k);
    let records: Vec<TrialRecord> = keyed.into_iter().map(|(_, r)| r).collect();
    let cells = summarize(&records);
    Ok(SweepResult { records, cells })
}

/// Per-cell moments recomputed from records that are grouped by cell.
pub fn summarize(records: &[TrialRecord]) -> Vec<CellSummary> {
    let mut cells = Vec::new();
    let mut start = 0;
    while start < records.len() {
        let head = &records[start];
        let end = start
            + records[start..]
                .iter()
                .take_while(|r| {
                    r.detector == head.detector && r.radius == head.radius && r.snr == head.snr
                })
                .count();
        let group = &records[start..end];
        let errors: Vec<f64> = group.iter().filter_map(|r| r.error).collect();
        cells.push(CellSummary {
            detector: head.detector.clone(),
            radius: head.radius,
            snr: head.snr,
            n: errors.len(),
            mean_error: mean(&errors),
            sd_error: sample_sd(&errors),
            failures: group.len() - errors.len(),
        });
        start = end;
    }
    cells
}

/// `inf` for a noise-free cell.
pub fn snr_label(snr: Option<f64>) -> String {
    match snr {
        Some(v) => format!("{v}"),
        None => "inf".to_string(),
    }
}

impl SweepResult {
    pub fn cell(&self, detector: &str, radius: u32, snr: Option<f64>) -> Option<&CellSummary> {
        self.cells
            .iter()
            .find(|c| c.detector == detector && c.radius == radius && c.snr == snr)
    }

    /// Per-trial errors of one cell in trial order, NaN for failures, for
    /// paired comparisons between detectors.
    pub fn errors(&self, detector: &str, radius: u32, snr: Option<f64>) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.detector == detector && r.radius == radius && r.snr == snr)
            .map(|r| r.error.unwrap_or(f64::NAN))
            .collect()
    }

    pub fn write_records_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "detector",
            "radius",
            "snr",
            "trial",
            "seed",
            "err_px",
            "elapsed_s",
            "failed",
        ])
        .map_err(csv_error)?;
        for r in &self.records {
            w.write_record([
                r.detector.clone(),
                r.radius.to_string(),
                snr_label(r.snr),
                r.trial.to_string(),
                r.seed.to_string(),
                r.error.map(|e| e.to_string()).unwrap_or_default(),
                r.elapsed.to_string(),
                u8::from(r.error.is_none()).to_string(),
            ])
            .map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "detector",
            "radius",
            "snr",
            "n",
            "mean_err_px",
            "sd_err_px",
            "failures",
        ])
        .map_err(csv_error)?;
        for c in &self.cells {
            w.write_record([
                c.detector.clone(),
                c.radius.to_string(),
                snr_label(c.snr),
                c.n.to_string(),
                c.mean_error.to_string(),
                c.sd_error.to_string(),
                c.failures.to_string(),
            ])
            .map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::InvalidInput(format!("csv: {e}"))
}

/// Run metadata written next to the CSV files.
#[derive(Debug, Clone, Serialize)]
pub struct RunMetadata {
    pub command: String,
    pub version: String,
    pub base_seed: u64,
    pub trials_per_cell: usize,
    pub image_size: usize,
    pub detectors: Vec<String>,
    pub radii: Vec<u32>,
    pub snrs: Vec<String>,
    pub snr_spacing: String,
}

impl RunMetadata {
    pub fn new(command: &str, config: &SweepConfig, snr_spacing: &str) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            base_seed: config.base_seed,
            trials_per_cell: config.trials_per_cell,
            image_size: config.image_size,
            detectors: config.detectors.iter().map(|d| d.label()).collect(),
            radii: config.radii.clone(),
            snrs: config
                .snrs
                .iter()
                .map(|s| snr_label(s.map(|v| v.value())))
                .collect(),
            snr_spacing: snr_spacing.to_string(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metadata serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SweepConfig {
        SweepConfig {
            trials_per_cell: 3,
            base_seed: 11,
            image_size: 96,
            ..SweepConfig::new(
                vec![
                    DetectorChoice::Standard(DetectorKind::Csym),
                    DetectorChoice::Standard(DetectorKind::Com),
                ],
                vec![8],
                vec![None, Some(SnrLevel::new(5.0).unwrap())],
            )
        }
    }

    #[test]
    fn labels_round_trip() {
        for c in DetectorChoice::standard()
            .into_iter()
            .chain(DetectorChoice::CSYM_VARIANTS)
        {
            let back: DetectorChoice = c.label().parse().unwrap();
            assert_eq!(back.label(), c.label());
        }
        assert!("sobel".parse::<DetectorChoice>().is_err());
        assert!("csym+x".parse::<DetectorChoice>().is_err());
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_snr_grid(0.1, 100.0, 11).unwrap();
        assert_eq!(g.len(), 11);
        assert_eq!(g[0].value(), 0.1);
        assert_eq!(g[10].value(), 100.0);
        let ratio = g[1].value() / g[0].value();
        for w in g.windows(2) {
            assert!((w[1].value() / w[0].value() - ratio).abs() < 1e-9);
        }
    }

    #[test]
    fn paired_and_deterministic() {
        let cfg = small();
        let a = run_sweep(&cfg).unwrap();
        let b = run_sweep(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.records.len(), 2 * 2 * 3);
        let (csym, com) = a.records.split_at(6);
        for (x, y) in csym.iter().zip(com) {
            assert_eq!(
                (x.fingerprint, x.seed, x.trial),
                (y.fingerprint, y.seed, y.trial)
            );
        }
    }

    #[test]
    fn summary_matches_records() {
        let res = run_sweep(&small()).unwrap();
        for c in &res.cells {
            let errs: Vec<f64> = res
                .errors(&c.detector, c.radius, c.snr)
                .into_iter()
                .filter(|e| e.is_finite())
                .collect();
            assert_eq!(c.mean_error, mean(&errs));
            assert_eq!(c.sd_error, sample_sd(&errs));
        }
    }

    #[test]
    fn csv_header_and_rows() {
        let res = run_sweep(&small()).unwrap();
        let mut buf = Vec::new();
        res.write_records_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next(),
            Some("detector,radius,snr,trial,seed,err_px,elapsed_s,failed")
        );
        assert_eq!(lines.count(), res.records.len());
        assert!(text.contains(",inf,"));
    }

    #[test]
    fn too_small_image_aborts_cell() {
        let cfg = SweepConfig {
            image_size: 20,
            ..small()
        };
        assert!(matches!(run_sweep(&cfg), Err(Error::Geometry(_))));
    }
}
