//! Command-line front end: scene files, configuration and subcommands.

pub mod config;
pub mod run;
pub mod scene_file;

use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use config::{ConfigError, RenderConfig};
pub use run::{run, stats_row, RunError, RunSummary, STATS_HEADER};
pub use scene_file::{load_scene, SceneDescription, SceneFileError};

use crate::harness::{compute_metrics, Image};
use crate::nn::bench::bench_mlp;
use crate::nn::gradcheck::{check_loss_gradients, GradCheckConfig};
use crate::optimizer::EmaForm;

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "NRC_THREADS";

#[derive(Debug, Parser)]
#[command(name = "nrc", version, about = "Path tracing with an online-trained neural radiance cache")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a scene file frame by frame while training the cache.
    Render(RenderArgs),
    /// Compare the fused network kernel with the layer-by-layer one.
    BenchMlp(BenchArgs),
    /// Check analytic loss gradients against central differences.
    Gradcheck(GradcheckArgs),
    /// MRSE and SMAPE between PFM images.
    Metrics(MetricsArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EmaFormArg {
    Corrected,
    Printed,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long, default_value_t = 64)]
    pub frames: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 128)]
    pub width: usize,
    #[arg(long, default_value_t = 128)]
    pub height: usize,
    /// Spread termination factor.
    #[arg(long = "c", default_value_t = 0.01)]
    pub spread_factor: f64,
    #[arg(long, default_value_t = 0.99)]
    pub ema_alpha: f64,
    #[arg(long, value_enum, default_value_t = EmaFormArg::Corrected)]
    pub ema_form: EmaFormArg,
    #[arg(long, default_value_t = 1.0 / 16.0)]
    pub unbiased_fraction: f64,
    /// Optimization steps per frame.
    #[arg(long, default_value_t = 4)]
    pub batches: usize,
    /// Records per optimization step.
    #[arg(long, default_value_t = 16384)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-2)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 4096)]
    pub target_records: usize,
    #[arg(long, default_value_t = 16)]
    pub initial_tile: usize,
    #[arg(long, value_enum, default_value_t = Switch::On)]
    pub self_train: Switch,
    /// Animation seconds per frame.
    #[arg(long, default_value_t = 1.0 / 30.0)]
    pub frame_time: f64,
    /// Render a path-traced reference with this many samples for MRSE.
    #[arg(long)]
    pub reference_spp: Option<usize>,
    #[arg(long, default_value = "out")]
    pub output: PathBuf,
}

impl RenderArgs {
    pub fn config(&self) -> RenderConfig {
        RenderConfig {
            width: self.width,
            height: self.height,
            frames: self.frames,
            seed: self.seed,
            spread_factor: self.spread_factor,
            ema_alpha: self.ema_alpha,
            ema_form: match self.ema_form {
                EmaFormArg::Corrected => EmaForm::BiasCorrected,
                EmaFormArg::Printed => EmaForm::Printed,
            },
            unbiased_fraction: self.unbiased_fraction,
            batches: self.batches,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            target_records: self.target_records,
            initial_tile: self.initial_tile,
            self_training: self.self_train == Switch::On,
            frame_time: self.frame_time,
            reference_spp: self.reference_spp,
            output: self.output.clone(),
        }
    }
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 65536)]
    pub batch: usize,
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
    #[arg(long, default_value_t = crate::nn::DEFAULT_CHUNK)]
    pub chunk: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 100)]
    pub draws: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long)]
    pub previous: Option<PathBuf>,
}

fn read_pfm(path: &PathBuf) -> Result<Image, String> {
    let file = File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Image::read_pfm(&mut BufReader::new(file)).map_err(|e| format!("{}: {e}", path.display()))
}

fn configure_threads() -> Result<(), String> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .parse()
        .map_err(|_| format!("{THREADS_ENV} must be a thread count, got `{value}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn execute(command: Command) -> Result<bool, String> {
    match command {
        Command::Render(args) => {
            let desc = load_scene(&args.scene).map_err(|e| e.to_string())?;
            let summary = run(&args.config(), &desc).map_err(|e| e.to_string())?;
            println!("rendered {} frames into {}", summary.frames, summary.output.display());
            println!("{STATS_HEADER}\n{}", stats_row(&summary.last));
            Ok(true)
        }
        Command::BenchMlp(args) => {
            if args.batch == 0 || args.repeats == 0 || args.chunk == 0 || args.chunk % 16 != 0 {
                return Err("batch and repeats must be positive, chunk a positive multiple of 16".into());
            }
            let r = bench_mlp(args.batch, args.repeats, args.chunk, args.seed);
            println!("batch {} x {} repeats", r.batch, r.repeats);
            println!("fused {:.4} s  ({:.2} GMAC/s)", r.fused_seconds, r.fused_macs_per_second() / 1e9);
            println!("naive {:.4} s", r.naive_seconds);
            println!("speedup {:.2}x  max relative error {:.3e}", r.speedup(), r.max_relative_error);
            Ok(true)
        }
        Command::Gradcheck(args) => {
            let r = check_loss_gradients(GradCheckConfig {
                draws: args.draws,
                seed: args.seed,
                ..GradCheckConfig::default()
            });
            println!(
                "{} draws ({} redrawn near ReLU kinks), {} entries, max relative error {:.3e}",
                r.draws, r.redraws, r.entries_checked, r.max_relative_error
            );
            Ok(r.max_relative_error <= args.tolerance)
        }
        Command::Metrics(args) => {
            let image = read_pfm(&args.image)?;
            let reference = args.reference.as_ref().map(read_pfm).transpose()?;
            let previous = args.previous.as_ref().map(read_pfm).transpose()?;
            let m = compute_metrics(&image, reference.as_ref(), previous.as_ref()).map_err(|e| e.to_string())?;
            if let Some(v) = m.mrse {
                println!("mrse {v:.6e}");
            }
            if let Some(v) = m.smape {
                println!("smape {v:.6e}");
            }
            Ok(true)
        }
    }
}

/// Parses the process arguments and runs the selected subcommand.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|_| execute(cli.command));
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
