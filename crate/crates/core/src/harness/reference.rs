//! Cache-free path tracing and closed-form oracles.

use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;
use rayon::prelude::*;
use thiserror::Error;

use super::image::Image;
use crate::math::{hash_seed, max_component, Ray, Rgb};
use crate::tracer::{bsdf_hit_emission, next_event_estimate, sample_bsdf, Scene, ShadingPoint};

/// Russian roulette starts after this many vertices.
pub const RR_START: usize = 3;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("albedo must lie in [0, 1), got {0}")]
    Albedo(f64),
    #[error("emission must be non-negative, got {0}")]
    Emission(f64),
}

/// Radiance inside a closed, uniformly emissive enclosure of albedo `rho`.
pub fn furnace_expected(rho: f64, emission: f64) -> Result<f64, OracleError> {
    if !(0.0..1.0).contains(&rho) {
        return Err(OracleError::Albedo(rho));
    }
    if !(emission >= 0.0) {
        return Err(OracleError::Emission(emission));
    }
    Ok(emission / (1.0 - rho))
}

/// One unbiased path-traced estimate along `ray`: NEE with MIS at every
/// vertex, Russian roulette after [`RR_START`] vertices.
pub fn path_trace<R: Rng + ?Sized>(scene: &Scene, ray: Ray, max_depth: usize, rng: &mut R) -> Rgb {
    let Some(mut hit) = scene.intersect(&ray) else {
        return Rgb::ZERO;
    };
    let mut radiance = scene.emitted(&hit, ray.dir);
    let mut throughput = Rgb::ONE;
    let mut wo = -ray.dir;
    for depth in 1..=max_depth {
        let material = scene.material(&hit);
        let x = ShadingPoint {
            position: hit.position,
            normal: hit.normal,
            wo,
            material,
        };
        radiance += throughput * next_event_estimate(scene, &x, rng);
        let u = [rng.gen::<f64>(), rng.gen::<f64>()];
        let Ok(Some(s)) = sample_bsdf(material, wo, hit.normal, u) else {
            break;
        };
        throughput *= s.throughput;
        if depth >= RR_START {
            let survive = max_component(throughput).min(1.0);
            if !(rng.gen::<f64>() < survive) {
                break;
            }
            throughput /= survive;
        }
        let origin = hit.position;
        let Some(next) = scene.intersect(&Ray::new(origin, s.direction)) else {
            break;
        };
        radiance += throughput * bsdf_hit_emission(scene, origin, &next, s.direction, s.pdf, s.delta);
        wo = -s.direction;
        hit = next;
    }
    radiance
}

/// Jittered primary ray through pixel `(x, y)`.
pub fn pixel_ray<R: Rng + ?Sized>(scene: &Scene, x: usize, y: usize, width: usize, height: usize, rng: &mut R) -> Ray {
    let (jx, jy) = (rng.gen::<f64>(), rng.gen::<f64>());
    scene.camera.ray(x as f64 + jx, y as f64 + jy, width, height)
}

/// Brute-force path-traced image averaging `spp` samples per pixel.
pub fn render_reference(
    scene: &Scene,
    width: usize,
    height: usize,
    spp: usize,
    max_depth: usize,
    seed: u64,
) -> Image {
    let spp = spp.max(1);
    let pixels = (0..width * height)
        .into_par_iter()
        .map(|i| {
            let mut rng = Pcg64::seed_from_u64(hash_seed(&[seed, 0x7265_66, i as u64]));
            let (x, y) = (i % width, i / width);
            let mut sum = Rgb::ZERO;
            for _ in 0..spp {
                let ray = pixel_ray(scene, x, y, width, height, &mut rng);
                sum += path_trace(scene, ray, max_depth, &mut rng);
            }
            sum / spp as f64
        })
        .collect();
    Image { width, height, pixels }
}
