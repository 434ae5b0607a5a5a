//! Input encoding for the radiance cache network.
//!
//! A [`RadianceQuery`] is mapped to a 64-wide input vector:
//!
//! | range    | content                                        | dims |
//! |----------|------------------------------------------------|------|
//! | `0..36`  | triangle-wave frequency encoding of `x`, `y`, `z` | 36 |
//! | `36..44` | one-blob of the spherical scattered direction  | 8    |
//! | `44..52` | one-blob of the spherical surface normal       | 8    |
//! | `52..56` | one-blob of `1 - exp(-roughness)`              | 4    |
//! | `56..59` | diffuse reflectance, raw                       | 3    |
//! | `59..62` | specular reflectance, raw                      | 3    |
//! | `62..64` | constant 1 (lets the first layer learn a bias) | 2    |
//!
//! The Gaussian and sine primitives usually used for these encodings are
//! replaced by a compact quartic kernel and a triangle wave.

use glam::DVec3;
use thiserror::Error;

use crate::cache::RadianceQuery;
use crate::math::Aabb;

/// Width of the network input.
pub const INPUT_DIM: usize = 64;
/// Number of meaningful input dimensions before padding.
pub const SEMANTIC_DIM: usize = 62;
/// Frequencies per position axis.
pub const FREQ_BANDS: usize = 12;
/// Blobs per one-blob encoded scalar.
pub const BLOBS: usize = 4;

pub const POSITION_OFFSET: usize = 0;
pub const DIRECTION_OFFSET: usize = POSITION_OFFSET + 3 * FREQ_BANDS;
pub const NORMAL_OFFSET: usize = DIRECTION_OFFSET + 2 * BLOBS;
pub const ROUGHNESS_OFFSET: usize = NORMAL_OFFSET + 2 * BLOBS;
pub const DIFFUSE_OFFSET: usize = ROUGHNESS_OFFSET + BLOBS;
pub const SPECULAR_OFFSET: usize = DIFFUSE_OFFSET + 3;
pub const PADDING_OFFSET: usize = SPECULAR_OFFSET + 3;

#[derive(Debug, Error, PartialEq)]
pub enum EncodingError {
    #[error("cannot convert a zero-length vector to spherical coordinates")]
    ZeroDirection,
}

/// A fully encoded network input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncodedInput(pub [f32; INPUT_DIM]);

impl EncodedInput {
    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }
}

impl Default for EncodedInput {
    fn default() -> Self {
        let mut v = [0.0; INPUT_DIM];
        v[PADDING_OFFSET..].fill(1.0);
        Self(v)
    }
}

/// Triangle wave with period 2: `2 |x mod 2 - 1| - 1`, using floored modulo.
#[inline]
pub fn tri(x: f64) -> f64 {
    2.0 * (x.rem_euclid(2.0) - 1.0).abs() - 1.0
}

/// Compactly supported quartic kernel `15/16 (1 - x^2)^2` on `[-1, 1]`.
#[inline]
pub fn quartic(x: f64) -> f64 {
    if x.abs() > 1.0 {
        0.0
    } else {
        let s = 1.0 - x * x;
        15.0 / 16.0 * s * s
    }
}

/// One-blob encoding of `v` with `k` kernels centred on the bin midpoints.
pub fn one_blob(v: f64, k: usize) -> Vec<f64> {
    let mut out = vec![0.0; k];
    one_blob_into(v, &mut out);
    out
}

fn one_blob_into(v: f64, out: &mut [f64]) {
    let k = out.len() as f64;
    let v = v.clamp(0.0, 1.0);
    for (i, o) in out.iter_mut().enumerate() {
        let center = (i as f64 + 0.5) / k;
        *o = quartic((v - center) * k);
    }
}

/// Frequency encoding: entry `d` is `tri(2^d v)`.
pub fn freq_encode(v: f64) -> [f64; FREQ_BANDS] {
    let mut out = [0.0; FREQ_BANDS];
    let mut scale = 1.0;
    for o in out.iter_mut() {
        *o = tri(scale * v);
        scale *= 2.0;
    }
    out
}

/// Spherical coordinates of a direction, normalized to `[0, 1]^2` as
/// `(theta / pi, (phi + pi) / 2pi)`.
pub fn sph(dir: DVec3) -> Result<(f64, f64), EncodingError> {
    let len = dir.length();
    if !(len > 0.0) || !len.is_finite() {
        return Err(EncodingError::ZeroDirection);
    }
    let d = dir / len;
    let theta = d.z.clamp(-1.0, 1.0).acos();
    // adding +0.0 maps -0.0 to +0.0 so atan2(±0, ±0) = 0
    let phi = (d.y + 0.0).atan2(d.x + 0.0);
    Ok((
        theta / std::f64::consts::PI,
        (phi + std::f64::consts::PI) / (2.0 * std::f64::consts::PI),
    ))
}

fn write_direction(dir: DVec3, out: &mut [f32]) {
    let (u, v) = sph(dir).unwrap_or((0.0, 0.5));
    let mut blobs = [0.0; 2 * BLOBS];
    let (a, b) = blobs.split_at_mut(BLOBS);
    one_blob_into(u, a);
    one_blob_into(v, b);
    for (o, b) in out.iter_mut().zip(blobs) {
        *o = b as f32;
    }
}

/// Encodes a cache query. Positions are first normalized to the unit cube of
/// `scene_bounds`.
pub fn encode_query(q: &RadianceQuery, scene_bounds: &Aabb) -> EncodedInput {
    let mut v = [0.0f32; INPUT_DIM];
    let p = scene_bounds.normalize(q.position);
    for (axis, &c) in p.to_array().iter().enumerate() {
        let base = POSITION_OFFSET + axis * FREQ_BANDS;
        for (o, f) in v[base..base + FREQ_BANDS].iter_mut().zip(freq_encode(c)) {
            *o = f as f32;
        }
    }
    write_direction(q.direction, &mut v[DIRECTION_OFFSET..NORMAL_OFFSET]);
    write_direction(q.normal, &mut v[NORMAL_OFFSET..ROUGHNESS_OFFSET]);

    let mut rough = [0.0; BLOBS];
    one_blob_into(1.0 - (-q.roughness.max(0.0)).exp(), &mut rough);
    for (o, r) in v[ROUGHNESS_OFFSET..DIFFUSE_OFFSET].iter_mut().zip(rough) {
        *o = r as f32;
    }
    for (o, a) in v[DIFFUSE_OFFSET..SPECULAR_OFFSET]
        .iter_mut()
        .zip(q.diffuse.to_array())
    {
        *o = a as f32;
    }
    for (o, b) in v[SPECULAR_OFFSET..PADDING_OFFSET]
        .iter_mut()
        .zip(q.specular.to_array())
    {
        *o = b as f32;
    }
    v[PADDING_OFFSET..].fill(1.0);
    EncodedInput(v)
}
