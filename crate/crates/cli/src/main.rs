//! Command-line front end: detection on image files, benchmark sweeps,
//! oscillation and tether experiments, and synthetic frame generation.

mod config;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use csym::experiments::oscillation::{amplitude_series, run_amplitude, AmplitudeConfig, NM_PER_PX};
use csym::experiments::sweep::RunMetadata;
use csym::experiments::tether::run_tether_eval;
use csym::experiments::{
    log_snr_grid, run_ablation, run_sweep, synth_tether, DetectorChoice, SweepConfig, TetherConfig,
};
use csym::io::{load_image, save_pgm, BitDepth};
use csym::synth::{make_trial, stream_seed, Pattern, TrialConfig};
use csym::{Detector, Error, SnrLevel, SubpixelPoint};

use config::{ConfigFile, Usage};

const ABOUT: &str = "Subpixel localization of circular particles.

Coordinates use pixel centers: (0,0) is the center of the top-left pixel,
x grows along columns and y grows downward.";

#[derive(Parser, Debug)]
#[command(name = "csym", version, about = ABOUT)]
struct Cli {
    /// Base seed of every randomized command.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker thread cap (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Flat key=value file; command-line flags take precedence over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Locate one particle in each image and print `x,y` (4 decimals).
    Detect(DetectArgs),
    /// Monte-Carlo localization error over radii and SNR levels.
    Sweep(SweepArgs),
    /// Median-filter and Hermite ablation of the symmetry detector.
    Ablation(SweepArgs),
    /// Amplitude recovery from synthetic sinusoidal motion.
    Oscillate(OscillateArgs),
    /// Consecutive-region correlation on a synthetic tethered walk.
    Tether(TetherArgs),
    /// Write synthetic frames as PGM plus a ground-truth CSV.
    Generate(GenerateArgs),
}

#[derive(Args, Debug)]
struct DetectArgs {
    /// Detector id: csym, com, cht, xcorr, qi, or a csym variant (csym+mf, csym-h, csym+mf-h).
    #[arg(long)]
    algo: Option<DetectorChoice>,
    /// Initial guess `x,y`.
    #[arg(long, allow_hyphen_values = true)]
    guess: Option<Point>,
    /// Side of the region read around the guess (odd).
    #[arg(long)]
    roi: Option<usize>,
    /// Expected particle radius; defaults to roi / 2.5.
    #[arg(long)]
    radius: Option<f64>,
    #[arg(required = true)]
    images: Vec<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Comma-separated detector ids.
    #[arg(long, value_delimiter = ',')]
    detectors: Vec<DetectorChoice>,
    #[arg(long, value_delimiter = ',')]
    radii: Vec<u32>,
    /// Comma-separated SNR levels; `inf` is a noise-free cell.
    #[arg(long, value_delimiter = ',')]
    snrs: Vec<Snr>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    image_size: Option<usize>,
    /// Record per-trial wall time (makes output non-reproducible).
    #[arg(long)]
    timing: bool,
    /// Output directory for records.csv, summary.csv and metadata.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct OscillateArgs {
    #[arg(long, value_delimiter = ',')]
    detectors: Vec<DetectorChoice>,
    /// Peak-to-peak amplitudes in pixels.
    #[arg(long, value_delimiter = ',')]
    amplitudes: Vec<f64>,
    #[arg(long)]
    radius: Option<u32>,
    #[arg(long)]
    frames: Option<usize>,
    /// Frames per cycle.
    #[arg(long)]
    period: Option<f64>,
    #[arg(long)]
    snr: Option<Snr>,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TetherArgs {
    #[arg(long, value_delimiter = ',')]
    detectors: Vec<DetectorChoice>,
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long)]
    radius: Option<u32>,
    /// Lowest and highest added-noise SNR of the log-spaced grid.
    #[arg(long)]
    snr_lo: Option<f64>,
    #[arg(long)]
    snr_hi: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    radius: Option<u32>,
    /// SNR of the frames; `inf` for noise-free.
    #[arg(long)]
    snr: Option<Snr>,
    #[arg(long)]
    size: Option<usize>,
    /// spot, ring, airy or random.
    #[arg(long)]
    pattern: Option<PatternArg>,
    /// Sample depth, 8 or 16.
    #[arg(long)]
    depth: Option<Depth>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy)]
struct Point(f64, f64);

impl FromStr for Point {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (x, y) = s
            .split_once(',')
            .ok_or_else(|| format!("expected x,y, got '{s}'"))?;
        let p = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("'{v}': {e}"));
        Ok(Point(p(x)?, p(y)?))
    }
}

#[derive(Debug, Clone, Copy)]
struct Snr(Option<SnrLevel>);

impl FromStr for Snr {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("inf") || s.eq_ignore_ascii_case("none") {
            return Ok(Snr(None));
        }
        let v: f64 = s.parse().map_err(|e| format!("'{s}': {e}"))?;
        SnrLevel::new(v)
            .map(|l| Snr(Some(l)))
            .map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone)]
struct PatternArg(Vec<Pattern>);

impl FromStr for PatternArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "random" => Ok(PatternArg(Pattern::BUILTIN.to_vec())),
            name => Pattern::BUILTIN
                .iter()
                .find(|p| p.name() == name)
                .map(|p| PatternArg(vec![p.clone()]))
                .ok_or_else(|| format!("unknown pattern '{s}'")),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Depth(BitDepth);

impl FromStr for Depth {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "8" => Ok(Depth(BitDepth::Eight)),
            "16" => Ok(Depth(BitDepth::Sixteen)),
            _ => Err(format!("bit depth must be 8 or 16, got '{s}'")),
        }
    }
}

/// A failure with the module it came from.
struct Failure {
    module: &'static str,
    error: Error,
    context: Option<String>,
}

impl Failure {
    fn from_core(error: Error) -> Self {
        let module = match &error {
            Error::Decode { .. } | Error::Unsupported(_) | Error::Io(_) => "io",
            Error::OutOfBounds { .. } | Error::NoParticle(_) => "detector",
            Error::Fit { .. } | Error::Collinear(_) => "fit",
            Error::InvalidArgument(_) | Error::InvalidInput(_) | Error::Geometry(_) => {
                "experiments"
            }
        };
        Failure {
            module,
            error,
            context: None,
        }
    }
}

enum Exit {
    Usage(String),
    Runtime(Failure),
}

impl From<Error> for Exit {
    fn from(e: Error) -> Self {
        Exit::Runtime(Failure::from_core(e))
    }
}

impl From<Usage> for Exit {
    fn from(u: Usage) -> Self {
        Exit::Usage(u.0)
    }
}

impl From<io::Error> for Exit {
    fn from(e: io::Error) -> Self {
        Exit::Runtime(Failure {
            module: "io",
            error: Error::Io(e),
            context: None,
        })
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Exit::Usage(msg)) => {
            eprintln!("error: usage: {msg}");
            ExitCode::from(2)
        }
        Err(Exit::Runtime(f)) => {
            let msg = match &f.error {
                Error::Io(e) => e.to_string(),
                other => other.to_string(),
            };
            let msg = match f.context {
                Some(c) => format!("{c}: {msg}"),
                None => msg,
            };
            eprintln!("error: {}: {}", f.module, msg.replace('\n', " "));
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<(), Exit> {
    let file = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let seed = file.pick(cli.seed, "seed", 0u64)?;
    let jobs = file.pick(cli.jobs, "jobs", 0usize)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Exit::Usage(format!("cannot start {jobs} workers: {e}")))?;
    pool.install(|| match cli.command {
        Command::Detect(a) => detect(a, &file),
        Command::Sweep(a) => sweep(a, &file, seed, false),
        Command::Ablation(a) => sweep(a, &file, seed, true),
        Command::Oscillate(a) => oscillate(a, &file, seed),
        Command::Tether(a) => tether(a, &file, seed),
        Command::Generate(a) => generate(a, &file, seed),
    })
}

fn detect(a: DetectArgs, file: &ConfigFile) -> Result<(), Exit> {
    let algo = file.pick(
        a.algo,
        "algo",
        DetectorChoice::Standard(csym::DetectorKind::Csym),
    )?;
    let guess = file.require(a.guess, "guess")?;
    let roi: Option<usize> = file.pick_opt(a.roi, "roi")?;
    let radius = match (file.pick_opt(a.radius, "radius")?, roi) {
        (Some(r), _) => r,
        (None, Some(n)) => n as f64 / 2.5,
        (None, None) => return Err(Exit::Usage("detect needs --roi or --radius".into())),
    };
    if radius.is_nan() || radius <= 0.0 {
        return Err(Exit::Usage(format!(
            "radius must be positive, got {radius}"
        )));
    }
    let mut detector: Detector = algo.build(radius);
    if let Some(n) = roi {
        detector = detector.with_roi(n);
    }
    let stdout = io::stdout();
    let mut out = stdout.lock();
    for path in &a.images {
        let image = load_image(path).map_err(|e| {
            let mut f = Failure::from_core(e);
            f.context = Some(path.display().to_string());
            Exit::Runtime(f)
        })?;
        let p = detector.locate(&image, SubpixelPoint::new(guess.0, guess.1))?;
        writeln!(out, "{:.4},{:.4}", p.x, p.y)?;
    }
    Ok(())
}

fn sweep(a: SweepArgs, file: &ConfigFile, seed: u64, ablation: bool) -> Result<(), Exit> {
    let detectors = file.pick_list(a.detectors, "detectors", DetectorChoice::standard())?;
    let radii = file.pick_list(a.radii, "radii", vec![10, 50, 100])?;
    let default_snrs = [0.1, 1.0, 10.0, 100.0]
        .map(|v| Snr(Some(SnrLevel::new(v).expect("positive"))))
        .to_vec();
    let snrs = file.pick_list(a.snrs, "snrs", default_snrs)?;
    let mut config = SweepConfig::new(detectors, radii, snrs.into_iter().map(|s| s.0).collect());
    config.trials_per_cell = file.pick(a.trials, "trials", 100)?;
    config.image_size = file.pick(a.image_size, "image_size", 512)?;
    config.record_timing = a.timing || file.pick(None, "timing", false)?;
    config.base_seed = seed;
    let command = if ablation { "ablation" } else { "sweep" };
    let out = file.pick(a.out, "out", PathBuf::from(format!("{command}_out")))?;

    let result = if ablation {
        run_ablation(&config)?
    } else {
        run_sweep(&config)?
    };
    if ablation {
        config.detectors = DetectorChoice::CSYM_VARIANTS.to_vec();
    }
    fs::create_dir_all(&out)?;
    result.write_records_csv(fs::File::create(out.join("records.csv"))?)?;
    result.write_summary_csv(fs::File::create(out.join("summary.csv"))?)?;
    let meta = RunMetadata::new(command, &config, "as given");
    fs::write(out.join("metadata.json"), meta.to_json() + "\n")?;
    eprintln!("wrote {} trials to {}", result.records.len(), out.display());
    Ok(())
}

fn oscillate(a: OscillateArgs, file: &ConfigFile, seed: u64) -> Result<(), Exit> {
    let standard = AmplitudeConfig::standard(seed);
    let detectors = file.pick_list(a.detectors, "detectors", DetectorChoice::standard())?;
    let config = AmplitudeConfig {
        radius: file.pick(a.radius, "radius", standard.radius)?,
        n_frames: file.pick(a.frames, "frames", standard.n_frames)?,
        period: file.pick(a.period, "period", standard.period)?,
        snr: file.pick(a.snr, "snr", Snr(standard.snr))?.0,
        peak_to_peak: file.pick_list(a.amplitudes, "amplitudes", standard.peak_to_peak.clone())?,
        ..standard
    };
    let series = amplitude_series(&config)?;
    let locators: Vec<(String, Detector)> = detectors
        .iter()
        .map(|d| (d.label(), d.build(config.radius as f64)))
        .collect();
    let rows = run_amplitude(&series, &locators)?;

    let mut text = String::from("detector,true_p2p_px,measured_p2p_px,abs_err_px,abs_err_nm,rel_err,residual_rms_px,failed_frames\n");
    for r in &rows {
        text += &format!(
            "{},{},{:.6},{:.6},{:.4},{:.6},{:.6},{}\n",
            r.detector,
            r.true_p2p,
            r.measured_p2p,
            r.abs_error_px,
            r.abs_error_px * NM_PER_PX,
            r.rel_error,
            r.residual_rms,
            r.failed_frames
        );
    }
    emit(a.out.or(file.pick_opt(None, "out")?), &text)
}

fn tether(a: TetherArgs, file: &ConfigFile, seed: u64) -> Result<(), Exit> {
    let standard = TetherConfig::standard(seed);
    let detectors = file.pick_list(a.detectors, "detectors", DetectorChoice::standard())?;
    let radius = file.pick(a.radius, "radius", standard.radius)?;
    let config = TetherConfig {
        radius,
        n_frames: file.pick(a.frames, "frames", standard.n_frames)?,
        image_size: standard.image_size.max(8 * radius as usize + 1),
        ..standard
    };
    let snrs = log_snr_grid(
        file.pick(a.snr_lo, "snr_lo", 0.1)?,
        file.pick(a.snr_hi, "snr_hi", 10.0)?,
        file.pick(a.steps, "steps", 5)?,
    )?;
    let series = synth_tether(&config)?;
    let locators: Vec<(String, Detector)> = detectors
        .iter()
        .map(|d| (d.label(), d.build(radius as f64)))
        .collect();
    let roi_n = csym::csym::roi_for_radius(radius as f64);
    let rows = run_tether_eval(&series, &locators, roi_n, &snrs, stream_seed(seed, 1))?;

    let mut text = String::from("detector,snr,mean_corr,sd_corr,failed_frames\n");
    for r in &rows {
        text += &format!(
            "{},{:.6},{:.6},{:.6},{}\n",
            r.detector, r.snr, r.mean_corr, r.sd_corr, r.failed_frames
        );
    }
    emit(a.out.or(file.pick_opt(None, "out")?), &text)
}

fn generate(a: GenerateArgs, file: &ConfigFile, seed: u64) -> Result<(), Exit> {
    let count = file.pick(a.count, "count", 1usize)?;
    let radius = file.pick(a.radius, "radius", 10u32)?;
    let snr = file.pick(a.snr, "snr", Snr(None))?.0;
    let size = file.pick(a.size, "size", 8 * radius as usize + 24)?;
    let patterns = file
        .pick(a.pattern, "pattern", PatternArg(Pattern::BUILTIN.to_vec()))?
        .0;
    let depth = file.pick(a.depth, "depth", Depth(BitDepth::Sixteen))?.0;
    let out = file.pick(a.out, "out", PathBuf::from("frames"))?;

    fs::create_dir_all(&out)?;
    let mut truth = String::from("frame,file,x,y,guess_x,guess_y,pattern,sigma\n");
    for i in 0..count {
        let config = TrialConfig {
            image_size: size,
            patterns: patterns.clone(),
            ..TrialConfig::new(radius, snr, stream_seed(seed, i as u64))
        };
        let trial = make_trial(&config)?;
        let name = format!("frame_{i:04}.pgm");
        save_pgm(&trial.image, out.join(&name), depth)?;
        truth += &format!(
            "{i},{name},{},{},{},{},{},{}\n",
            trial.truth.x,
            trial.truth.y,
            trial.initial_guess.x,
            trial.initial_guess.y,
            trial.spec.pattern.name(),
            trial.sigma
        );
    }
    fs::write(out.join("truth.csv"), truth)?;
    eprintln!("wrote {count} frames to {}", out.display());
    Ok(())
}

fn emit(path: Option<PathBuf>, text: &str) -> Result<(), Exit> {
    match path {
        Some(p) => write_file(&p, text),
        None => {
            io::stdout().lock().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), Exit> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)?;
    Ok(())
}
