//! Fused-vs-naive inference timing.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;

use super::{infer_with, naive_infer, FusedConfig, NetworkWeights, WIDTH};

#[derive(Debug, Clone, Copy)]
pub struct BenchReport {
    pub batch: usize,
    pub repeats: usize,
    /// Best-of-`repeats` wall time, seconds.
    pub fused_seconds: f64,
    pub naive_seconds: f64,
    /// Maximum relative difference between the two outputs.
    pub max_relative_error: f64,
}

impl BenchReport {
    pub fn speedup(&self) -> f64 {
        self.naive_seconds / self.fused_seconds
    }

    /// Multiply-accumulates per second of the fused kernel.
    pub fn fused_macs_per_second(&self) -> f64 {
        let macs = (5 * WIDTH * WIDTH + 3 * WIDTH) as f64 * self.batch as f64;
        macs / self.fused_seconds
    }
}

pub fn random_inputs(rng: &mut impl Rng, n: usize) -> Vec<[f32; WIDTH]> {
    (0..n)
        .map(|_| std::array::from_fn(|i| if i >= 62 { 1.0 } else { rng.gen_range(-1.0..1.0) }))
        .collect()
}

pub fn bench_mlp(batch: usize, repeats: usize, chunk: usize, seed: u64) -> BenchReport {
    let mut rng = Pcg64::seed_from_u64(seed);
    let w = NetworkWeights::<f32>::init_uniform(&mut rng);
    let x = random_inputs(&mut rng, batch);
    let cfg = FusedConfig::new(chunk);
    let mut fused_seconds = f64::INFINITY;
    let mut naive_seconds = f64::INFINITY;
    let mut fused = Vec::new();
    let mut naive = Vec::new();
    for _ in 0..repeats.max(1) {
        let t = Instant::now();
        fused = infer_with(cfg, &w, &x);
        fused_seconds = fused_seconds.min(t.elapsed().as_secs_f64());
        let t = Instant::now();
        naive = naive_infer(&w, &x);
        naive_seconds = naive_seconds.min(t.elapsed().as_secs_f64());
    }
    let max_relative_error = fused
        .iter()
        .flatten()
        .zip(naive.iter().flatten())
        .map(|(&a, &b)| ((a - b).abs() / b.abs().max(1e-30)) as f64)
        .fold(0.0, f64::max);
    BenchReport {
        batch,
        repeats,
        fused_seconds,
        naive_seconds,
        max_relative_error,
    }
}
