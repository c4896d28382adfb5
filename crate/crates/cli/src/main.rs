//! `resfield`: synthesize toy scenes, train and code them, render and score
//! the results, and sweep rate-distortion curves.

mod commands;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "resfield", version, about, propagate_version = true)]
struct Cli {
    /// Worker threads [default: all cores]. Results do not depend on the
    /// thread count; use 1 for strictly sequential runs.
    #[arg(long, global = true, env = "RESFIELD_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dynamic scene dataset (PNG images + manifest).
    Synth(SynthArgs),
    /// Train every group of frames of a dataset and write `.gof` streams.
    Train(TrainArgs),
    /// Decode a `.gof` stream into dequantized grids (JSON).
    Decode(DecodeArgs),
    /// Render one frame from one dataset camera.
    Render(RenderArgs),
    /// Score `.gof` streams against a dataset (PSNR / SSIM).
    Eval(EvalArgs),
    /// Train at several quantization parameters and plot size vs. PSNR.
    Rdcurve(RdArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Scene description (JSON); defaults to the built-in toy scene.
    #[arg(long)]
    scene: Option<PathBuf>,
    /// Frame count [default: 10, or the scene file's count].
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long, default_value_t = 24)]
    cameras: usize,
    /// Every n-th camera is held out for testing (0: none).
    #[arg(long, default_value_t = 6)]
    test_every: usize,
    #[arg(long, default_value_t = 128)]
    width: u32,
    #[arg(long, default_value_t = 128)]
    height: u32,
    /// Horizontal field of view in degrees.
    #[arg(long, default_value_t = 40.0)]
    fov: f64,
    /// Camera distance from the scene center.
    #[arg(long, default_value_t = 3.0)]
    distance: f64,
    /// Quadrature samples per ray for the ground truth.
    #[arg(long, default_value_t = 128)]
    samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Preset {
    /// Full-size defaults.
    Default,
    /// Scaled-down model and schedule for quick runs.
    Small,
}

#[derive(Debug, Args)]
struct TrainOpts {
    /// Training configuration (TOML); keys left out take their defaults.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration used when no `--config` is given.
    #[arg(long, value_enum, default_value_t = Preset::Default)]
    preset: Preset,
    /// Random seed (overrides the configuration).
    #[arg(long)]
    seed: Option<u64>,
    /// Frames per group, keyframe included [default: 10].
    #[arg(long)]
    gof_len: Option<usize>,
    /// Train for reconstruction only and fit the entropy models afterwards.
    #[arg(long)]
    no_joint: bool,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Dataset directory or manifest.
    #[arg(long)]
    data: PathBuf,
    /// Output directory for streams, logs and reports.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    opts: TrainOpts,
    /// Quantization parameter (overrides the configuration).
    #[arg(long)]
    q: Option<f64>,
}

#[derive(Debug, Args)]
struct DecodeArgs {
    /// Input `.gof` stream.
    #[arg(long)]
    gof: PathBuf,
    /// Output JSON file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct RenderArgs {
    /// A `.gof` stream or the JSON written by `decode`.
    #[arg(long)]
    input: PathBuf,
    /// Dataset supplying the camera and background.
    #[arg(long)]
    data: PathBuf,
    /// Sequence frame index.
    #[arg(long)]
    frame: usize,
    /// Camera index or name.
    #[arg(long)]
    camera: String,
    /// Output image (PNG or PPM).
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 128)]
    samples: usize,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Dataset directory or manifest.
    #[arg(long)]
    data: PathBuf,
    /// Streams to score.
    #[arg(required = true)]
    gofs: Vec<PathBuf>,
    /// Samples per ray [default: from `--config`, else 128].
    #[arg(long)]
    samples: Option<usize>,
    /// Training configuration supplying the sample count.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Per-frame report (CSV).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RdArgs {
    /// Dataset directory or manifest.
    #[arg(long)]
    data: PathBuf,
    /// Output directory: `rd.csv`, `rd.svg` and one stream directory per q.
    #[arg(long)]
    out: PathBuf,
    /// Quantization parameters to visit.
    #[arg(long, value_delimiter = ',', default_values_t = [1.0, 2.0, 5.0, 10.0])]
    q: Vec<f64>,
    #[command(flatten)]
    opts: TrainOpts,
    /// Another RD CSV to compare against (Bjøntegaard deltas and plot).
    #[arg(long)]
    compare: Option<PathBuf>,
    /// Curve name in the plot.
    #[arg(long, default_value = "resfield")]
    label: String,
}

/// Failures mapped to exit codes: 2 for invalid input, 1 otherwise.
#[derive(Debug)]
enum Failure {
    Invalid(String),
    Missing(String),
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Invalid(m) | Failure::Missing(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for Failure {}

fn exit_code(err: &anyhow::Error) -> u8 {
    if let Some(f) = err.downcast_ref::<Failure>() {
        return match f {
            Failure::Invalid(_) => 2,
            Failure::Missing(_) => 1,
        };
    }
    match err.downcast_ref::<resfield::Error>() {
        Some(resfield::Error::Config(_) | resfield::Error::Usage(_)) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Invalid("--threads must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Train(a) => commands::train(a),
        Command::Decode(a) => commands::decode(a),
        Command::Render(a) => commands::render(a),
        Command::Eval(a) => commands::eval(a),
        Command::Rdcurve(a) => commands::rdcurve(a),
    }
}
