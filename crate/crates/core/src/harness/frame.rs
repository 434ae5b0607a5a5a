//! The per-frame loop: trace, query, train, reconstruct.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;
use rayon::prelude::*;

use super::image::Image;
use super::metrics::compute_metrics;
use super::reference::pixel_ray;
use crate::cache::{NeuralRadianceCache, RadianceCache, RadianceQuery};
use crate::math::{hash_seed, Ray, Rgb};
use crate::tracer::{trace_deferred, PathMode, Scene, TraceSettings};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Accumulation {
    /// Every frame shows its own 1-spp image.
    Single,
    /// Running mean over all frames so far.
    Accumulate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameConfig {
    pub width: usize,
    pub height: usize,
    pub trace: TraceSettings,
    /// Optimization steps per frame (`s`).
    pub batches: usize,
    /// Records per step (`l`).
    pub batch_size: usize,
    /// Records the tile controller aims for each frame.
    pub target_records: usize,
    pub initial_tile: usize,
    /// Optimize the cache after every frame.
    pub train: bool,
}

impl Default for FrameConfig {
    fn default() -> Self {
        Self {
            width: 128,
            height: 128,
            trace: TraceSettings::default(),
            batches: 4,
            batch_size: 16384,
            target_records: 4096,
            initial_tile: 16,
            train: true,
        }
    }
}

/// Per-frame measurements. Timings are wall-clock milliseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FrameStats {
    pub frame: u64,
    pub mrse: Option<f64>,
    pub smape: Option<f64>,
    pub rbias2: Option<f64>,
    pub rvar: Option<f64>,
    pub loss: f64,
    pub records: usize,
    pub training_paths: usize,
    pub tile_size: usize,
    pub trace_ms: f64,
    pub query_ms: f64,
    pub train_ms: f64,
}

impl FrameStats {
    /// The stats with timings cleared, for reproducibility comparisons.
    pub fn without_timings(&self) -> Self {
        Self {
            trace_ms: 0.0,
            query_ms: 0.0,
            train_ms: 0.0,
            ..*self
        }
    }
}

/// Mutable state carried from frame to frame.
#[derive(Debug, Clone)]
pub struct FrameState {
    pub frame: u64,
    pub tile_size: usize,
    pub seed: u64,
    pub accumulation: Accumulation,
    pub config: FrameConfig,
    pub cache: NeuralRadianceCache,
    /// Replaced between frames for animated scenes.
    pub scene: Scene,
    previous: Option<Image>,
    accumulated: Option<(Image, usize)>,
}

impl FrameState {
    pub fn new(config: FrameConfig, scene: Scene, cache: NeuralRadianceCache, seed: u64) -> Self {
        let max = config.width.min(config.height).max(1);
        Self {
            frame: 0,
            tile_size: config.initial_tile.clamp(1, max),
            seed,
            accumulation: Accumulation::Single,
            config,
            cache,
            scene,
            previous: None,
            accumulated: None,
        }
    }

    /// Last displayed image.
    pub fn previous(&self) -> Option<&Image> {
        self.previous.as_ref()
    }
}

/// Multiplicative tile controller: side scales with the square root of the
/// produced-to-target record ratio.
pub fn update_tile_size(current: usize, produced: usize, target: usize, max: usize) -> usize {
    let target = target.max(1);
    let next = (current as f64 * (produced as f64 / target as f64).sqrt()).round();
    (next as usize).clamp(1, max.max(1))
}

/// Pixel indices promoted to training paths: one per tile at the shared
/// offset `(ox, oy)`, wrapped inside partial edge tiles.
pub fn training_pixels(width: usize, height: usize, tile: usize, ox: usize, oy: usize) -> Vec<usize> {
    let tile = tile.max(1);
    let mut out = Vec::new();
    for ty in (0..height).step_by(tile) {
        let th = tile.min(height - ty);
        for tx in (0..width).step_by(tile) {
            let tw = tile.min(width - tx);
            out.push((ty + oy % th) * width + tx + ox % tw);
        }
    }
    out
}

/// Renders one frame, trains the cache on the frame's records and adapts
/// the tile size. `reference` enables the MRSE column.
pub fn render_frame(state: &mut FrameState, reference: Option<&Image>) -> (Image, FrameStats) {
    let cfg = state.config;
    let (w, h) = (cfg.width, cfg.height);
    let frame_seed = hash_seed(&[state.seed, state.frame]);

    let t0 = Instant::now();
    let mut offset_rng = Pcg64::seed_from_u64(frame_seed);
    let ox = offset_rng.gen_range(0..state.tile_size);
    let oy = offset_rng.gen_range(0..state.tile_size);
    let mut is_training = vec![false; w * h];
    let promoted = training_pixels(w, h, state.tile_size, ox, oy);
    for &p in &promoted {
        is_training[p] = true;
    }
    let scene = &state.scene;
    let paths: Vec<_> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let mut rng = Pcg64::seed_from_u64(hash_seed(&[state.seed, state.frame, i as u64]));
            let ray = pixel_ray(scene, i % w, i / w, w, h, &mut rng);
            let mode = if is_training[i] {
                PathMode::Train
            } else {
                PathMode::Render
            };
            trace_deferred(scene, ray, mode, &cfg.trace, &mut rng)
        })
        .collect();
    let trace_ms = t0.elapsed().as_secs_f64() * 1e3;

    let t1 = Instant::now();
    let mut queries: Vec<RadianceQuery> = Vec::with_capacity(w * h + promoted.len());
    for p in &paths {
        queries.extend(p.render_query);
        queries.extend(p.training.as_ref().and_then(|t| t.tail_query));
    }
    let answers = state.cache.query(&queries);
    let mut next = answers.into_iter();
    let mut pixels = Vec::with_capacity(w * h);
    let mut records = Vec::new();
    for p in &paths {
        let render = p.render_query.map(|_| next.next().unwrap()).unwrap_or(Rgb::ZERO);
        let tail = p
            .training
            .as_ref()
            .and_then(|t| t.tail_query)
            .map(|_| next.next().unwrap())
            .unwrap_or(Rgb::ZERO);
        pixels.push(p.radiance(render));
        records.extend(p.records(tail));
    }
    let query_ms = t1.elapsed().as_secs_f64() * 1e3;

    let t2 = Instant::now();
    let loss = if cfg.train {
        state
            .cache
            .train_frame(&records, cfg.batches, cfg.batch_size, frame_seed)
            .mean_loss()
    } else {
        0.0
    };
    let train_ms = t2.elapsed().as_secs_f64() * 1e3;

    let frame_image = Image { width: w, height: h, pixels };
    let image = match state.accumulation {
        Accumulation::Single => frame_image,
        Accumulation::Accumulate => {
            let (mut acc, n) = state.accumulated.take().unwrap_or((Image::new(w, h), 0));
            let k = (n + 1) as f64;
            for (a, p) in acc.pixels.iter_mut().zip(&frame_image.pixels) {
                *a += (*p - *a) / k;
            }
            state.accumulated = Some((acc.clone(), n + 1));
            acc
        }
    };
    let metrics = compute_metrics(&image, reference, state.previous.as_ref()).unwrap_or_default();

    let stats = FrameStats {
        frame: state.frame,
        mrse: metrics.mrse,
        smape: metrics.smape,
        rbias2: None,
        rvar: None,
        loss,
        records: records.len(),
        training_paths: promoted.len(),
        tile_size: state.tile_size,
        trace_ms,
        query_ms,
        train_ms,
    };
    state.tile_size = update_tile_size(state.tile_size, records.len(), cfg.target_records, w.min(h));
    state.previous = Some(image.clone());
    state.frame += 1;
    (image, stats)
}

/// Emission plus cached scattered radiance at the primary hit through each
/// pixel center.
pub fn visualize_cache<C: RadianceCache + ?Sized>(scene: &Scene, cache: &C, width: usize, height: usize) -> Image {
    let hits: Vec<_> = (0..width * height)
        .into_par_iter()
        .map(|i| {
            let ray: Ray = scene.camera.ray((i % width) as f64 + 0.5, (i / width) as f64 + 0.5, width, height);
            scene.intersect(&ray).map(|hit| {
                let m = scene.material(&hit);
                let q = RadianceQuery {
                    position: hit.position,
                    direction: -ray.dir,
                    normal: hit.normal,
                    roughness: m.roughness,
                    diffuse: m.diffuse,
                    specular: m.specular,
                };
                (scene.emitted(&hit, ray.dir), q)
            })
        })
        .collect();
    let queries: Vec<RadianceQuery> = hits.iter().flatten().map(|(_, q)| *q).collect();
    let mut cached = cache.query(&queries).into_iter();
    let pixels = hits
        .iter()
        .map(|h| match h {
            Some((le, _)) => *le + cached.next().unwrap(),
            None => Rgb::ZERO,
        })
        .collect();
    Image { width, height, pixels }
}
