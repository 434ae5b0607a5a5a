//! Lambertian diffuse lobe plus a normalised Phong glossy lobe around the
//! mirror direction. Roughness 0 makes the glossy lobe a perfect mirror.

use std::f64::consts::PI;

use glam::DVec3;
use thiserror::Error;

use super::scene::Material;
use crate::math::{max_component, orthonormal_basis, reflect, Rgb};

/// Roughness below this is treated as a perfect mirror.
pub const DELTA_ROUGHNESS: f64 = 1e-4;

#[derive(Debug, Error, PartialEq)]
pub enum BsdfError {
    #[error("shading normal is degenerate")]
    DegenerateNormal,
}

/// Result of [`sample_bsdf`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BsdfSample {
    pub direction: DVec3,
    /// Solid-angle density of `direction` under the lobe mixture. For delta
    /// samples this is the discrete probability of having picked the lobe.
    pub pdf: f64,
    /// `f |cos| / pdf`.
    pub throughput: Rgb,
    pub delta: bool,
}

/// Phong exponent for a roughness value.
pub fn phong_exponent(roughness: f64) -> f64 {
    (2.0 / (roughness * roughness).max(1e-12) - 2.0).max(0.0)
}

fn is_delta(m: &Material) -> bool {
    m.roughness < DELTA_ROUGHNESS
}

/// Probability of sampling the glossy lobe.
fn specular_probability(m: &Material) -> f64 {
    let d = max_component(m.diffuse);
    let s = max_component(m.specular);
    if d + s <= 0.0 {
        0.0
    } else {
        s / (d + s)
    }
}

fn check_normal(n: DVec3) -> Result<DVec3, BsdfError> {
    let len = n.length();
    if !(len > 0.5) || !len.is_finite() {
        return Err(BsdfError::DegenerateNormal);
    }
    Ok(n / len)
}

/// Non-delta BSDF value and mixture density for the pair `(wo, wi)`.
pub fn eval(m: &Material, wo: DVec3, wi: DVec3, n: DVec3) -> (Rgb, f64) {
    let cos_i = wi.dot(n);
    if cos_i <= 0.0 || wo.dot(n) <= 0.0 {
        return (Rgb::ZERO, 0.0);
    }
    let ps = specular_probability(m);
    let mut f = m.diffuse / PI;
    let mut pdf = (1.0 - ps) * cos_i / PI;
    if !is_delta(m) && ps > 0.0 {
        let e = phong_exponent(m.roughness);
        let c = reflect(wo, n).dot(wi).max(0.0);
        let lobe = c.powf(e);
        f += m.specular * (e + 2.0) / (2.0 * PI) * lobe;
        pdf += ps * (e + 1.0) / (2.0 * PI) * lobe;
    }
    (f, pdf)
}

/// Samples an incident direction. `wo` points away from the surface on the
/// side of `n`. Returns `Ok(None)` when the sample is absorbed (black
/// material or a glossy direction below the surface).
pub fn sample_bsdf(m: &Material, wo: DVec3, n: DVec3, u: [f64; 2]) -> Result<Option<BsdfSample>, BsdfError> {
    let n = check_normal(n)?;
    let ps = specular_probability(m);
    if max_component(m.diffuse) + max_component(m.specular) <= 0.0 {
        return Ok(None);
    }
    let (t, b) = orthonormal_basis(n);
    if u[0] < ps {
        let u0 = u[0] / ps;
        let r = reflect(wo, n);
        if is_delta(m) {
            if r.dot(n) <= 0.0 {
                return Ok(None);
            }
            return Ok(Some(BsdfSample {
                direction: r,
                pdf: ps,
                throughput: m.specular / ps,
                delta: true,
            }));
        }
        let e = phong_exponent(m.roughness);
        let cos_a = u0.powf(1.0 / (e + 1.0));
        let sin_a = (1.0 - cos_a * cos_a).max(0.0).sqrt();
        let phi = 2.0 * PI * u[1];
        let (rt, rb) = orthonormal_basis(r);
        let wi = (rt * (sin_a * phi.cos()) + rb * (sin_a * phi.sin()) + r * cos_a).normalize();
        finish(m, wo, wi, n)
    } else {
        let u0 = if ps > 0.0 { (u[0] - ps) / (1.0 - ps) } else { u[0] };
        let r = u0.sqrt();
        let phi = 2.0 * PI * u[1];
        let z = (1.0 - u0).max(0.0).sqrt();
        let wi = (t * (r * phi.cos()) + b * (r * phi.sin()) + n * z).normalize();
        if is_delta(m) {
            // the mirror lobe cannot produce this direction
            let cos_i = wi.dot(n);
            let pdf = (1.0 - ps) * cos_i / PI;
            if !(cos_i > 0.0 && pdf > 0.0) {
                return Ok(None);
            }
            return Ok(Some(BsdfSample {
                direction: wi,
                pdf,
                throughput: m.diffuse / (1.0 - ps),
                delta: false,
            }));
        }
        finish(m, wo, wi, n)
    }
}

fn finish(m: &Material, wo: DVec3, wi: DVec3, n: DVec3) -> Result<Option<BsdfSample>, BsdfError> {
    let cos_i = wi.dot(n);
    if cos_i <= 0.0 {
        return Ok(None);
    }
    let (f, pdf) = eval(m, wo, wi, n);
    if !(pdf > 0.0) {
        return Ok(None);
    }
    Ok(Some(BsdfSample {
        direction: wi,
        pdf,
        throughput: f * cos_i / pdf,
        delta: false,
    }))
}
