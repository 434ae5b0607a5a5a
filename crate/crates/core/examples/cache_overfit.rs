//! Trains the cache on one fixed set of records and watches the loss fall
//! and the predictions approach the targets.

use glam::DVec3;
use nrc::cache::{CacheConfig, NeuralRadianceCache, RadianceQuery, TrainingRecord};
use nrc::math::{Aabb, Rgb};
use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;

fn main() {
    let bounds = Aabb::new(DVec3::splat(-1.0), DVec3::splat(1.0));
    let mut rng = Pcg64::seed_from_u64(3);
    let records: Vec<TrainingRecord> = (0..512)
        .map(|_| {
            let position = DVec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let query = RadianceQuery {
                position,
                direction: DVec3::Z,
                normal: DVec3::Y,
                roughness: 1.0,
                diffuse: Rgb::splat(0.8),
                specular: Rgb::ZERO,
            };
            // smooth radiance field
            let target = Rgb::new(1.0 + position.x, 0.5 + 0.4 * position.y.sin(), 0.3 * (1.0 + position.z * position.z));
            TrainingRecord { query, target }
        })
        .collect();

    let mut cache = NeuralRadianceCache::new(CacheConfig::default(), bounds).unwrap();
    let queries: Vec<RadianceQuery> = records.iter().map(|r| r.query).collect();
    for frame in 0..=400 {
        let stats = cache.train_frame(&records, 4, 128, frame);
        if frame % 50 == 0 {
            let pred = cache.query(&queries);
            let err = pred
                .iter()
                .zip(&records)
                .map(|(p, r)| ((*p - r.target).abs() / r.target).max_element())
                .sum::<f64>()
                / records.len() as f64;
            println!("frame {frame:3}: loss {:.5}  mean relative error of EMA prediction {err:.4}", stats.mean_loss());
        }
    }
}
