//! The neural radiance cache: reflectance-factorized queries against the EMA
//! weights, and per-frame training from shuffled record batches.

use std::io::{self, Read, Write};

use glam::DVec3;
use rand::SeedableRng;
use rand_pcg::Pcg64;
use rayon::prelude::*;

use crate::encoding::{encode_query, INPUT_DIM};
use crate::math::{hash_seed, mix_seed, Aabb, Rgb};
use crate::nn::snapshot_io::{read_f32s, read_u32, write_f32s};
use crate::nn::{
    infer_with, read_weights, train_pass_with, write_weights, FusedConfig, NetworkWeights, SnapshotError,
    OUTPUT_DIM, PARAM_COUNT, SNAPSHOT_VERSION,
};
use crate::optimizer::{relative_l2_loss, AdamConfig, AdamState, EmaForm, EmaState, LOSS_EPSILON};

/// A surface point and outgoing direction at which scattered radiance is
/// requested, together with the material attributes the network sees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadianceQuery {
    pub position: DVec3,
    /// Unit direction of the scattered light (pointing away from the surface).
    pub direction: DVec3,
    pub normal: DVec3,
    pub roughness: f64,
    pub diffuse: Rgb,
    pub specular: Rgb,
}

impl RadianceQuery {
    /// The reflectance factor `α + β` multiplied onto the network output.
    pub fn reflectance(&self) -> Rgb {
        self.diffuse + self.specular
    }
}

/// A query paired with a scattered-radiance target harvested from a training path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingRecord {
    pub query: RadianceQuery,
    pub target: Rgb,
}

/// Anything that can answer batched scattered-radiance queries.
pub trait RadianceCache: Sync {
    fn query(&self, queries: &[RadianceQuery]) -> Vec<Rgb>;
}

/// A cache that always answers zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroCache;

impl RadianceCache for ZeroCache {
    fn query(&self, queries: &[RadianceQuery]) -> Vec<Rgb> {
        vec![Rgb::ZERO; queries.len()]
    }
}

/// Combines a raw network output with the query's reflectance; negative
/// outputs are clamped to zero.
pub fn factorize(net_out: [f32; OUTPUT_DIM], reflectance: Rgb) -> Rgb {
    Rgb::new(net_out[0] as f64, net_out[1] as f64, net_out[2] as f64).max(Rgb::ZERO) * reflectance
}

/// Multiplier of the shuffling map; always `≡ 1 (mod 4)`.
pub fn lcg_multiplier(seed: u64) -> u64 {
    (mix_seed(seed) & !3) | 1
}

/// Increment of the shuffling map; always odd.
pub fn lcg_increment(seed: u64) -> u64 {
    mix_seed(seed ^ 0xa5a5_a5a5_a5a5_a5a5) | 1
}

/// Permutation of `0..n` produced by `i -> (a i + c) mod m`, with `m` the
/// smallest power of two `>= n` and out-of-range values skipped.
pub fn lcg_permute_with(n: usize, a: u64, c: u64) -> Vec<usize> {
    assert!(n >= 1, "cannot permute an empty range");
    let m = n.next_power_of_two() as u64;
    let mask = m - 1;
    (0..m)
        .map(|i| (a.wrapping_mul(i).wrapping_add(c) & mask) as usize)
        .filter(|&v| v < n)
        .collect()
}

/// Seeded shuffle of `0..n`.
pub fn lcg_permute(n: usize, seed: u64) -> Vec<usize> {
    lcg_permute_with(n, lcg_multiplier(seed), lcg_increment(seed))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CacheConfig {
    pub adam: AdamConfig,
    pub ema_alpha: f64,
    pub ema_form: EmaForm,
    pub loss_epsilon: f64,
    pub chunk: usize,
    /// Seed of the weight initialisation.
    pub init_seed: u64,
}

impl Default for CacheConfig {
    fn default() -> Self {
        Self {
            adam: AdamConfig::default(),
            ema_alpha: 0.99,
            ema_form: EmaForm::BiasCorrected,
            loss_epsilon: LOSS_EPSILON,
            chunk: crate::nn::DEFAULT_CHUNK,
            init_seed: 0,
        }
    }
}

/// Outcome of one [`NeuralRadianceCache::train_frame`] call.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainStats {
    /// Mean relative L2 loss of each optimisation step.
    pub batch_losses: Vec<f64>,
    pub records_used: usize,
    pub records_dropped: usize,
    pub records_rejected: usize,
    pub nonfinite_gradients: usize,
}

impl TrainStats {
    pub fn mean_loss(&self) -> f64 {
        if self.batch_losses.is_empty() {
            0.0
        } else {
            self.batch_losses.iter().sum::<f64>() / self.batch_losses.len() as f64
        }
    }
}

#[derive(Debug, Clone)]
pub struct NeuralRadianceCache {
    config: CacheConfig,
    bounds: Aabb,
    weights: NetworkWeights<f32>,
    adam: AdamState,
    ema: EmaState,
}

impl NeuralRadianceCache {
    /// Creates a freshly initialised cache for a scene with the given bounds.
    pub fn new(config: CacheConfig, bounds: Aabb) -> Result<Self, crate::optimizer::EmaError> {
        let mut rng = Pcg64::seed_from_u64(hash_seed(&[config.init_seed, 0x6e72_6321]));
        let weights = NetworkWeights::init_uniform(&mut rng);
        Self::from_weights(config, bounds, weights)
    }

    pub fn from_weights(
        config: CacheConfig,
        bounds: Aabb,
        weights: NetworkWeights<f32>,
    ) -> Result<Self, crate::optimizer::EmaError> {
        let ema = EmaState::new(weights.clone(), config.ema_alpha, config.ema_form)?;
        Ok(Self {
            config,
            bounds,
            adam: AdamState::new(config.adam),
            weights,
            ema,
        })
    }

    pub fn config(&self) -> &CacheConfig {
        &self.config
    }

    pub fn bounds(&self) -> &Aabb {
        &self.bounds
    }

    /// Raw optimizer weights.
    pub fn weights(&self) -> &NetworkWeights<f32> {
        &self.weights
    }

    /// EMA weights used for every query.
    pub fn ema_weights(&self) -> &NetworkWeights<f32> {
        &self.ema.shadow
    }

    pub fn adam(&self) -> &AdamState {
        &self.adam
    }

    pub fn ema(&self) -> &EmaState {
        &self.ema
    }

    /// Replaces the EMA weights, e.g. to evaluate a fixed network.
    pub fn set_ema_weights(&mut self, w: NetworkWeights<f32>) {
        self.ema.shadow = w;
    }

    fn fused(&self) -> FusedConfig {
        FusedConfig::new(self.config.chunk)
    }

    fn encode_all(&self, queries: &[RadianceQuery]) -> Vec<[f32; INPUT_DIM]> {
        queries
            .par_iter()
            .map(|q| encode_query(q, &self.bounds).0)
            .collect()
    }

    /// Raw EMA-network outputs before factorization and clamping.
    pub fn raw_outputs(&self, queries: &[RadianceQuery]) -> Vec<[f32; OUTPUT_DIM]> {
        infer_with(self.fused(), &self.ema.shadow, &self.encode_all(queries))
    }

    /// Scattered radiance for every query.
    pub fn query(&self, queries: &[RadianceQuery]) -> Vec<Rgb> {
        self.raw_outputs(queries)
            .into_iter()
            .zip(queries)
            .map(|(o, q)| factorize(o, q.reflectance()))
            .collect()
    }

    /// One frame of training: shuffle, split into `batches` disjoint batches
    /// of at most `batch_size` records, and take one Adam step plus one EMA
    /// update per batch. With fewer than `batches * batch_size` records the
    /// batches shrink evenly; surplus records are dropped.
    pub fn train_frame(
        &mut self,
        records: &[TrainingRecord],
        batches: usize,
        batch_size: usize,
        seed: u64,
    ) -> TrainStats {
        let mut stats = TrainStats::default();
        let valid: Vec<&TrainingRecord> = records
            .iter()
            .filter(|r| r.target.is_finite() && r.target.min_element() >= 0.0)
            .collect();
        stats.records_rejected = records.len() - valid.len();
        let n = valid.len();
        if n == 0 || batches == 0 || batch_size == 0 {
            return stats;
        }
        let perm = lcg_permute(n, seed);
        let steps = batches.min(n);
        let size = batch_size.min(n / steps);
        stats.records_used = steps * size;
        stats.records_dropped = n - stats.records_used;

        let eps = self.config.loss_epsilon;
        let fused = self.fused();
        for k in 0..steps {
            let batch: Vec<&TrainingRecord> = perm[k * size..(k + 1) * size].iter().map(|&i| valid[i]).collect();
            let inputs: Vec<[f32; INPUT_DIM]> = batch
                .par_iter()
                .map(|r| encode_query(&r.query, &self.bounds).0)
                .collect();
            let inv = 1.0 / size as f64;
            let (grads, loss) = train_pass_with(fused, &self.weights, &inputs, |start, out, d| {
                let mut sum = 0.0;
                for (b, (o, d)) in out.iter().zip(d.iter_mut()).enumerate() {
                    let rec = batch[start + b];
                    let f = rec.query.reflectance();
                    let pred = Rgb::new(o[0] as f64, o[1] as f64, o[2] as f64) * f;
                    let (l, g) = relative_l2_loss(pred, rec.target, eps);
                    let g = g * f * inv;
                    *d = [g.x as f32, g.y as f32, g.z as f32];
                    sum += l;
                }
                sum
            });
            stats.nonfinite_gradients += self.adam.step(&mut self.weights, &grads);
            self.ema.update(&self.weights);
            stats.batch_losses.push(loss * inv);
        }
        stats
    }

    /// Writes training weights, EMA weights and optimizer state.
    ///
    /// Layout: weight snapshot (training), weight snapshot (EMA), then an
    /// optimizer block of little-endian words `[b"NRCA", version, adam step,
    /// ema step]`, five `f32` (learning rate, β1, β2, ε, EMA α) and the first
    /// and second Adam moments as `f32` arrays.
    pub fn write_checkpoint<W: Write>(&self, out: &mut W) -> io::Result<()> {
        write_weights(out, &self.weights)?;
        write_weights(out, &self.ema.shadow)?;
        for word in [
            CHECKPOINT_MAGIC,
            SNAPSHOT_VERSION,
            self.adam.step as u32,
            self.ema.step as u32,
        ] {
            out.write_all(&word.to_le_bytes())?;
        }
        let c = self.adam.config;
        write_f32s(
            out,
            &[
                c.learning_rate as f32,
                c.beta1 as f32,
                c.beta2 as f32,
                c.epsilon as f32,
                self.ema.alpha as f32,
            ],
        )?;
        write_f32s(out, &self.adam.first_moment)?;
        write_f32s(out, &self.adam.second_moment)
    }

    /// Restores a cache written by [`write_checkpoint`](Self::write_checkpoint).
    /// Hyperparameters stored in the file override those in `config`.
    pub fn read_checkpoint<R: Read>(
        input: &mut R,
        mut config: CacheConfig,
        bounds: Aabb,
    ) -> Result<Self, SnapshotError> {
        let weights = read_weights(input)?;
        let shadow = read_weights(input)?;
        let magic = read_u32(input)?;
        if magic != CHECKPOINT_MAGIC {
            return Err(SnapshotError::Magic(magic));
        }
        let version = read_u32(input)?;
        if version != SNAPSHOT_VERSION {
            return Err(SnapshotError::Version(version));
        }
        let adam_step = read_u32(input)? as u64;
        let ema_step = read_u32(input)? as u64;
        let h = read_f32s(input, 5)?;
        config.adam = AdamConfig {
            learning_rate: h[0] as f64,
            beta1: h[1] as f64,
            beta2: h[2] as f64,
            epsilon: h[3] as f64,
        };
        config.ema_alpha = h[4] as f64;
        let first_moment = read_f32s(input, PARAM_COUNT)?;
        let second_moment = read_f32s(input, PARAM_COUNT)?;
        let ema = EmaState {
            shadow,
            alpha: config.ema_alpha,
            step: ema_step,
            form: config.ema_form,
        };
        Ok(Self {
            config,
            bounds,
            weights,
            adam: AdamState {
                config: config.adam,
                first_moment,
                second_moment,
                step: adam_step,
            },
            ema,
        })
    }
}

/// `b"NRCA"` read as a little-endian word.
pub const CHECKPOINT_MAGIC: u32 = u32::from_le_bytes(*b"NRCA");

impl RadianceCache for NeuralRadianceCache {
    fn query(&self, queries: &[RadianceQuery]) -> Vec<Rgb> {
        NeuralRadianceCache::query(self, queries)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bounds() -> Aabb {
        Aabb::new(DVec3::splat(-1.0), DVec3::splat(1.0))
    }

    fn q(diffuse: Rgb, specular: Rgb) -> RadianceQuery {
        RadianceQuery {
            position: DVec3::new(0.1, 0.2, -0.3),
            direction: DVec3::new(0.0, 0.6, 0.8),
            normal: DVec3::Y,
            roughness: 0.5,
            diffuse,
            specular,
        }
    }

    #[test]
    fn lcg_examples() {
        assert_eq!(lcg_permute_with(1, 5, 3), vec![0]);
        assert_eq!(lcg_permute_with(4, 5, 3), vec![3, 0, 1, 2]);
        assert_eq!(lcg_permute(1, 99), vec![0]);
        assert_eq!(lcg_multiplier(7) % 4, 1);
        assert_eq!(lcg_increment(7) % 2, 1);
    }

    proptest! {
        #[test]
        fn lcg_is_a_bijection(n in 1usize..5000, seed in any::<u64>()) {
            let p = lcg_permute(n, seed);
            prop_assert_eq!(&p, &lcg_permute(n, seed));
            let mut s = p.clone();
            s.sort_unstable();
            prop_assert_eq!(s, (0..n).collect::<Vec<_>>());
        }

        #[test]
        fn query_is_nonnegative(seed in 0u64..200, px in -1.0f64..1.0, a in 0.0f64..1.0) {
            let cache = NeuralRadianceCache::new(CacheConfig { init_seed: seed, ..Default::default() }, bounds()).unwrap();
            let mut query = q(Rgb::splat(a), Rgb::splat(0.1));
            query.position.x = px;
            let r = cache.query(&[query])[0];
            prop_assert!(r.min_element() >= 0.0 && r.is_finite());
        }
    }

    #[test]
    fn zero_reflectance_gives_zero() {
        let cache = NeuralRadianceCache::new(CacheConfig::default(), bounds()).unwrap();
        let out = cache.query(&[q(Rgb::ZERO, Rgb::ZERO)]);
        assert_eq!(out[0], Rgb::ZERO);
    }

    #[test]
    fn zero_ema_weights_give_zero() {
        let mut cache = NeuralRadianceCache::new(CacheConfig::default(), bounds()).unwrap();
        cache.set_ema_weights(NetworkWeights::zeros());
        assert_eq!(cache.query(&[q(Rgb::ONE * 0.5, Rgb::ONE * 0.5)])[0], Rgb::ZERO);
    }

    #[test]
    fn factorization_scales_with_reflectance() {
        let cache = NeuralRadianceCache::new(CacheConfig { init_seed: 3, ..Default::default() }, bounds()).unwrap();
        let query = q(Rgb::new(0.2, 0.3, 0.1), Rgb::new(0.1, 0.0, 0.2));
        let out = cache.raw_outputs(&[query])[0];
        let base = factorize(out, query.reflectance());
        for s in [0.5, 2.0, 3.25] {
            let scaled = factorize(out, query.reflectance() * s);
            assert!((scaled - base * s).abs().max_element() <= 1e-15 * (1.0 + base.max_element()));
        }
        assert_eq!(base, cache.query(&[query])[0]);
    }

    #[test]
    fn query_is_repeatable() {
        let cache = NeuralRadianceCache::new(CacheConfig::default(), bounds()).unwrap();
        let qs: Vec<_> = (0..300)
            .map(|i| {
                let mut x = q(Rgb::splat(0.4), Rgb::splat(0.1));
                x.position.x = i as f64 / 300.0 - 0.5;
                x
            })
            .collect();
        assert_eq!(cache.query(&qs), cache.query(&qs));
    }

    #[test]
    fn empty_records_are_a_no_op() {
        let mut cache = NeuralRadianceCache::new(CacheConfig::default(), bounds()).unwrap();
        let before = cache.clone();
        let stats = cache.train_frame(&[], 4, 16, 1);
        assert!(stats.batch_losses.is_empty());
        assert_eq!(cache.weights(), before.weights());
        assert_eq!(cache.ema_weights(), before.ema_weights());
    }

    #[test]
    fn non_finite_targets_are_rejected() {
        let mut cache = NeuralRadianceCache::new(CacheConfig::default(), bounds()).unwrap();
        let good = TrainingRecord {
            query: q(Rgb::splat(0.5), Rgb::ZERO),
            target: Rgb::ONE,
        };
        let mut bad = good;
        bad.target.y = f64::NAN;
        let stats = cache.train_frame(&[good, bad, good, good], 2, 8, 1);
        assert_eq!(stats.records_rejected, 1);
        assert_eq!(stats.records_used, 2);
        assert_eq!(stats.records_dropped, 1);
        assert_eq!(stats.batch_losses.len(), 2);
    }

    #[test]
    fn batches_are_disjoint_and_bounded() {
        let mut cache = NeuralRadianceCache::new(CacheConfig::default(), bounds()).unwrap();
        let rec = TrainingRecord {
            query: q(Rgb::splat(0.5), Rgb::ZERO),
            target: Rgb::ONE,
        };
        let stats = cache.train_frame(&vec![rec; 100], 4, 16, 1);
        assert_eq!(stats.records_used, 64);
        assert_eq!(stats.records_dropped, 36);
        assert_eq!(cache.adam().step, 4);
        assert_eq!(cache.ema().step, 4);
        let stats = cache.train_frame(&vec![rec; 30], 4, 16, 2);
        assert_eq!(stats.records_used, 28);
    }

    #[test]
    fn training_is_deterministic() {
        let recs: Vec<TrainingRecord> = (0..500)
            .map(|i| {
                let mut query = q(Rgb::splat(0.5), Rgb::splat(0.2));
                query.position.y = (i as f64 * 0.37).sin();
                TrainingRecord {
                    query,
                    target: Rgb::splat(1.0 + (i % 7) as f64 * 0.1),
                }
            })
            .collect();
        let run = || {
            let mut c = NeuralRadianceCache::new(CacheConfig::default(), bounds()).unwrap();
            for f in 0..3 {
                c.train_frame(&recs, 4, 64, f);
            }
            c
        };
        let (a, b) = (run(), run());
        assert_eq!(a.weights(), b.weights());
        assert_eq!(a.ema_weights(), b.ema_weights());
    }

    #[test]
    fn checkpoint_roundtrip() {
        let mut cache = NeuralRadianceCache::new(CacheConfig::default(), bounds()).unwrap();
        let rec = TrainingRecord {
            query: q(Rgb::splat(0.5), Rgb::ZERO),
            target: Rgb::ONE,
        };
        cache.train_frame(&vec![rec; 64], 4, 16, 3);
        let mut buf = Vec::new();
        cache.write_checkpoint(&mut buf).unwrap();
        assert_eq!(buf.len(), 2 * (16 + 4 * PARAM_COUNT) + 16 + 20 + 8 * PARAM_COUNT);
        let back = NeuralRadianceCache::read_checkpoint(&mut buf.as_slice(), CacheConfig::default(), bounds()).unwrap();
        assert_eq!(back.weights(), cache.weights());
        assert_eq!(back.ema_weights(), cache.ema_weights());
        assert_eq!(back.adam().step, 4);
        assert_eq!(back.adam().first_moment, cache.adam().first_moment);
        assert_eq!(back.ema().step, 4);
    }
}
