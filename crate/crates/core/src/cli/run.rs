//! The `render` driver: frame loop plus artifacts on disk.
//!
//! Output directory layout:
//! - `frame_NNNN.pfm` for every frame,
//! - `final.ppm`, the last frame for viewing,
//! - `stats.csv` with the columns of [`STATS_HEADER`]; empty cells mean
//!   the metric is unavailable (no reference, or first frame),
//! - `cache.nrc`, the final cache checkpoint.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use thiserror::Error;

use super::config::{ConfigError, RenderConfig};
use super::scene_file::{SceneDescription, SceneFileError};
use crate::cache::NeuralRadianceCache;
use crate::harness::{render_frame, render_reference, training_pixels, FrameState, FrameStats};
use crate::optimizer::EmaError;

pub const STATS_HEADER: &str = "frame,mrse,smape,loss,records,training_paths,tile_size,trace_ms,query_ms,train_ms";

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Scene(#[from] SceneFileError),
    #[error(transparent)]
    Ema(#[from] EmaError),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("frame {0}: {1}")]
    Invariant(u64, String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub frames: usize,
    pub last: FrameStats,
    pub output: PathBuf,
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.9e}")).unwrap_or_default()
}

pub fn stats_row(s: &FrameStats) -> String {
    format!(
        "{},{},{},{:.9e},{},{},{},{:.3},{:.3},{:.3}",
        s.frame,
        cell(s.mrse),
        cell(s.smape),
        s.loss,
        s.records,
        s.training_paths,
        s.tile_size,
        s.trace_ms,
        s.query_ms,
        s.train_ms
    )
}

pub fn run(config: &RenderConfig, desc: &SceneDescription) -> Result<RunSummary, RunError> {
    config.validate()?;
    let scene = desc.build()?;
    fs::create_dir_all(&config.output)?;
    let reference = match config.reference_spp {
        Some(spp) if !desc.is_animated() => Some(render_reference(&scene, config.width, config.height, spp, 64, config.seed ^ 0x5eed)),
        _ => None,
    };
    let cache = NeuralRadianceCache::new(config.cache_config(), *scene.bounds())?;
    let mut state = FrameState::new(config.frame_config(), scene, cache, config.seed);
    let mut csv = BufWriter::new(File::create(config.output.join("stats.csv"))?);
    writeln!(csv, "{STATS_HEADER}")?;

    let mut last = FrameStats::default();
    let mut image = None;
    for f in 0..config.frames {
        if desc.is_animated() {
            state.scene = desc.at_time(f as f64 * config.frame_time)?;
        }
        let tiles = training_pixels(config.width, config.height, state.tile_size, 0, 0).len();
        let (img, stats) = render_frame(&mut state, reference.as_ref());
        if stats.training_paths != tiles {
            return Err(RunError::Invariant(stats.frame, format!("{} training paths for {tiles} tiles", stats.training_paths)));
        }
        if img.pixels.iter().any(|p| !p.is_finite() || p.min_element() < 0.0) {
            return Err(RunError::Invariant(stats.frame, "non-finite or negative radiance".into()));
        }
        img.write_pfm(&mut BufWriter::new(File::create(config.output.join(format!("frame_{f:04}.pfm")))?))?;
        writeln!(csv, "{}", stats_row(&stats))?;
        last = stats;
        image = Some(img);
    }
    csv.flush()?;
    if let Some(img) = image {
        img.write_ppm(&mut BufWriter::new(File::create(config.output.join("final.ppm"))?))?;
    }
    let mut ckpt = BufWriter::new(File::create(config.output.join("cache.nrc"))?);
    state.cache.write_checkpoint(&mut ckpt)?;
    ckpt.flush()?;
    Ok(RunSummary {
        frames: config.frames,
        last,
        output: config.output.clone(),
    })
}
