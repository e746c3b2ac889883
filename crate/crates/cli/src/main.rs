//! `omrkit`: command-line front end for the omrkit library.
//!
//! Exit codes: 0 success, 1 usage error, 2 I/O or format error, 3 validation
//! or contract failure.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use omrkit_core::Error;

#[derive(Parser)]
#[command(
    name = "omrkit",
    version,
    about = "Tooling for optical music recognition datasets and detectors"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic score pages with exact ground truth
    Synth(SynthArgs),
    /// Print class-frequency statistics and the rare-class set
    Stats(StatsArgs),
    /// Paste rare-symbol crops into the top margin of every page
    Augment(AugmentArgs),
    /// Build the per-class cached bounding-box table
    Cached(CachedArgs),
    /// Turn output maps into detections
    Detect(DetectArgs),
    /// Score detections against ground truth
    Eval(EvalArgs),
    /// Estimate the rigid transform between a page and its scan
    Align(AlignArgs),
    /// Report the size bias of detected boxes
    Bias(BiasArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    pages: usize,
    #[arg(long)]
    seed: u64,
    /// Equal class counts on every page
    #[arg(long, conflicts_with = "zipf")]
    balanced: bool,
    /// Power-law class weights with this exponent
    #[arg(long)]
    zipf: Option<f64>,
    #[arg(long, default_value_t = 640)]
    width: u32,
    #[arg(long, default_value_t = 480)]
    height: u32,
    #[arg(long, default_value_t = 4)]
    staves: u32,
    #[arg(long, default_value_t = 8)]
    symbols_per_staff: u32,
    /// Blank rows kept free at the top of each page
    #[arg(long, default_value_t = 0)]
    top_margin: u32,
    /// Also write oracle output maps (`<id>.dwm`)
    #[arg(long)]
    emit_maps: bool,
    #[arg(long, default_value_t = 0.0, requires = "emit_maps")]
    energy_noise: f64,
    #[arg(long, default_value_t = 0.0, requires = "emit_maps")]
    class_confusion: f64,
    #[arg(long, default_value_t = 0, requires = "emit_maps")]
    box_smoothing: u32,
    /// Also write a degraded scan of each page (`<id>.scan.pgm`)
    #[arg(long)]
    emit_scans: bool,
    #[arg(long, default_value_t = 0.0, requires = "emit_scans", allow_hyphen_values = true)]
    scan_theta: f64,
    #[arg(long, default_value_t = 0.0, requires = "emit_scans", allow_hyphen_values = true)]
    scan_tx: f64,
    #[arg(long, default_value_t = 0.0, requires = "emit_scans", allow_hyphen_values = true)]
    scan_ty: f64,
    #[arg(long, default_value_t = 0.0, requires = "emit_scans")]
    scan_blur: f64,
    #[arg(long, default_value_t = 0.0, requires = "emit_scans")]
    scan_noise: f64,
    #[arg(long, default_value_t = 1.0, requires = "emit_scans")]
    scan_contrast: f64,
}

#[derive(Args)]
struct StatsArgs {
    dataset: PathBuf,
    #[arg(long, default_value_t = 10)]
    top: usize,
    #[arg(long, default_value_t = omrkit_core::imbalance::DEFAULT_HEAD_COVERAGE)]
    head_coverage: f64,
    /// Keep at most this many rare classes
    #[arg(long)]
    max_rare: Option<usize>,
}

#[derive(Args)]
struct AugmentArgs {
    dataset: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 12)]
    num_crops: usize,
    #[arg(long, default_value_t = 130)]
    crop_w: usize,
    #[arg(long, default_value_t = 80)]
    crop_h: usize,
    #[arg(long, default_value_t = 1)]
    margin_rows: usize,
    #[arg(long, default_value_t = 4)]
    gap: usize,
    #[arg(long, default_value_t = omrkit_core::imbalance::DEFAULT_HEAD_COVERAGE)]
    head_coverage: f64,
    #[arg(long)]
    max_rare: Option<usize>,
}

#[derive(Args)]
struct CachedArgs {
    dataset: PathBuf,
    /// Where to write the table
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DetectArgs {
    /// Map files; each file's stem is used as the page id
    #[arg(required = true)]
    maps: Vec<PathBuf>,
    /// Dataset whose class registry names the class planes
    #[arg(long)]
    registry: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "regressed")]
    mode: String,
    #[arg(long)]
    cache: Option<PathBuf>,
    #[arg(long, default_value_t = 0.2)]
    tau: f64,
    #[arg(long, default_value_t = 8)]
    connectivity: u8,
    #[arg(long, default_value_t = 4)]
    min_area: usize,
    /// Hybrid-mode relative tolerance
    #[arg(long, default_value_t = 0.5)]
    delta: f64,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    dets: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    #[arg(long, default_value_t = omrkit_core::eval::DEFAULT_IOU_THRESHOLD)]
    iou: f64,
    /// Also write the result as JSON
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AlignArgs {
    #[arg(long)]
    reference: PathBuf,
    #[arg(long)]
    scan: PathBuf,
    /// Dataset holding the page to transfer
    #[arg(long, requires_all = ["page", "out"])]
    annotations: Option<PathBuf>,
    #[arg(long, requires = "annotations")]
    page: Option<String>,
    #[arg(long, requires = "annotations")]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 10.0)]
    max_theta: f64,
    #[arg(long, default_value_t = 50.0)]
    max_shift: f64,
}

#[derive(Args)]
struct BiasArgs {
    #[arg(long)]
    dets: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    #[arg(long, default_value_t = 4)]
    bins: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A failure carrying its exit code.
#[derive(Debug)]
pub struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::InvalidArgument(_) => 1,
            Error::Io { .. } | Error::Schema(_) | Error::Format(_) | Error::MissingImage(_) => 2,
            Error::MalformedLabel { .. }
            | Error::Validation(_)
            | Error::EmptyStats
            | Error::EmptyBank
            | Error::DoesNotFit(_)
            | Error::MissingCacheEntry(_)
            | Error::NoMatches
            | Error::DegenerateImage(_)
            | Error::NoOverlap
            | Error::UnknownClass(_) => 3,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            // clap routes help/version to stdout and errors to stderr
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Stats(a) => commands::stats(a),
        Command::Augment(a) => commands::augment(a),
        Command::Cached(a) => commands::cached(a),
        Command::Detect(a) => commands::detect(a),
        Command::Eval(a) => commands::eval(a),
        Command::Align(a) => commands::align(a),
        Command::Bias(a) => commands::bias(a),
    };
    match result {
        Ok(report) => {
            print!("{report}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("omrkit: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
