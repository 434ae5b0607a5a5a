//! Render configuration.

use std::path::PathBuf;

use thiserror::Error;

use crate::cache::CacheConfig;
use crate::harness::FrameConfig;
use crate::optimizer::{AdamConfig, EmaForm};
use crate::tracer::TraceSettings;

#[derive(Debug, Clone, PartialEq)]
pub struct RenderConfig {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub seed: u64,
    /// Spread termination factor `c`.
    pub spread_factor: f64,
    pub ema_alpha: f64,
    pub ema_form: EmaForm,
    /// Fraction of training suffixes terminated by Russian roulette only.
    pub unbiased_fraction: f64,
    /// Optimization steps per frame (`s`).
    pub batches: usize,
    /// Records per step (`l`); steps shrink when fewer records exist.
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Training records per frame the tile controller aims for.
    pub target_records: usize,
    pub initial_tile: usize,
    pub self_training: bool,
    /// Animation time advanced per frame, in seconds.
    pub frame_time: f64,
    /// Samples per pixel of a path-traced reference for MRSE (static scenes).
    pub reference_spp: Option<usize>,
    pub output: PathBuf,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            width: 128,
            height: 128,
            frames: 64,
            seed: 0,
            spread_factor: 0.01,
            ema_alpha: 0.99,
            ema_form: EmaForm::BiasCorrected,
            unbiased_fraction: 1.0 / 16.0,
            batches: 4,
            batch_size: 16384,
            learning_rate: 1e-2,
            target_records: 4096,
            initial_tile: 16,
            self_training: true,
            frame_time: 1.0 / 30.0,
            reference_spp: None,
            output: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("invalid configuration: {0}")]
pub struct ConfigError(pub String);

impl RenderConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |m: &str| Err(ConfigError(m.to_owned()));
        if self.width == 0 || self.height == 0 {
            return fail("resolution must be positive");
        }
        if self.frames == 0 {
            return fail("frame count must be positive");
        }
        if !(self.spread_factor > 0.0 && self.spread_factor.is_finite()) {
            return fail("spread factor must be positive");
        }
        if !(0.0..1.0).contains(&self.ema_alpha) {
            return fail("EMA decay must lie in [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.unbiased_fraction) {
            return fail("unbiased fraction must lie in [0, 1]");
        }
        if self.batches == 0 || self.batch_size == 0 || self.target_records == 0 {
            return fail("batch count, batch size and record target must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail("learning rate must be positive");
        }
        if self.initial_tile == 0 {
            return fail("tile size must be positive");
        }
        if !(self.frame_time >= 0.0 && self.frame_time.is_finite()) {
            return fail("frame time must be non-negative");
        }
        if self.reference_spp == Some(0) {
            return fail("reference needs at least one sample per pixel");
        }
        Ok(())
    }

    pub fn cache_config(&self) -> CacheConfig {
        CacheConfig {
            adam: AdamConfig {
                learning_rate: self.learning_rate,
                ..AdamConfig::default()
            },
            ema_alpha: self.ema_alpha,
            ema_form: self.ema_form,
            init_seed: self.seed,
            ..CacheConfig::default()
        }
    }

    pub fn frame_config(&self) -> FrameConfig {
        FrameConfig {
            width: self.width,
            height: self.height,
            trace: TraceSettings {
                spread_factor: self.spread_factor,
                unbiased_fraction: self.unbiased_fraction,
                self_training: self.self_training,
                ..TraceSettings::default()
            },
            batches: self.batches,
            batch_size: self.batch_size,
            target_records: self.target_records,
            initial_tile: self.initial_tile,
            train: true,
        }
    }
}
