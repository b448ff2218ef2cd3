mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fibertrack::dwi::Geometry;

#[derive(Debug, Parser)]
#[command(name = "fibertrack", version, about = "Diffusion tensor fitting and fiber tracking")]
struct Cli {
    /// TOML config with optional [tracker], [train], [dataset] and [bench] tables.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize a phantom volume and its ground truth.
    Phantom(PhantomArgs),
    /// Fit tensors and write tensor, FA and MD maps.
    Fit(FitArgs),
    /// Track fibers and write a .trk file plus a connectivity map.
    Track(TrackArgs),
    /// Train the orientation network on synthetic patches.
    Train(TrainArgs),
    /// Angular error of a trained network against ground truth.
    Eval(EvalArgs),
    /// Timing report for posterior evaluation, inference and tracking.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GeometryArg {
    Straight,
    QuarterArc,
    OrthogonalCrossing,
}

impl From<GeometryArg> for Geometry {
    fn from(g: GeometryArg) -> Self {
        match g {
            GeometryArg::Straight => Geometry::Straight,
            GeometryArg::QuarterArc => Geometry::QuarterArc,
            GeometryArg::OrthogonalCrossing => Geometry::OrthogonalCrossing,
        }
    }
}

#[derive(Debug, Clone, Args)]
struct TableArgs {
    /// Diffusion-weighted directions; one b=0 shell is always added.
    #[arg(long, default_value_t = 6)]
    directions: usize,
    #[arg(long, default_value_t = 1000.0)]
    b_value: f64,
}

#[derive(Debug, Args)]
struct PhantomArgs {
    #[arg(long, value_enum, default_value = "straight")]
    geometry: GeometryArg,
    /// Edge length of the cubic volume.
    #[arg(long, default_value_t = 32)]
    size: usize,
    /// Standard deviation of the log-signal noise.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    table: TableArgs,
    /// Output base path; `<out>_labels` and `<out>_tangents` hold the ground truth.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[arg(long)]
    input: PathBuf,
    /// Output base; writes `<out>_tensor`, `<out>_fa` and `<out>_md`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    Deterministic,
    Probabilistic,
    Learned,
}

#[derive(Debug, Args)]
struct TrackArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "probabilistic")]
    mode: Mode,
    /// Text file with one `x y z` voxel per line.
    #[arg(long, conflicts_with = "seed_fa")]
    seeds: Option<PathBuf>,
    /// Seed every voxel whose FA is at least this value.
    #[arg(long)]
    seed_fa: Option<f64>,
    /// Fibers per seed (probabilistic mode).
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    sphere_level: Option<u8>,
    #[arg(long)]
    fa_stop: Option<f64>,
    /// Noise level used in the likelihood instead of the fit residual.
    #[arg(long)]
    sigma: Option<f64>,
    /// Disable the likelihood cache.
    #[arg(long)]
    no_cache: bool,
    /// Network checkpoint (learned mode).
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Connectivity map base path; defaults to `<out>` with `_connectivity`.
    #[arg(long)]
    map: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    table: TableArgs,
    #[arg(long, default_value_t = 10_000)]
    train_samples: usize,
    #[arg(long, default_value_t = 1000)]
    val_samples: usize,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long)]
    time_budget: Option<f64>,
    /// Checkpoint path.
    #[arg(long)]
    out: PathBuf,
    /// Per-epoch error history as CSV.
    #[arg(long)]
    history: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Phantom base path written by `phantom`; every in-fiber voxel with a
    /// full patch window is evaluated. Without it a synthetic set is drawn.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Network to time; a randomly initialized one is used otherwise.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    repetitions: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    sphere_level: Option<u8>,
    #[arg(long)]
    fa_stop: Option<f64>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
