//! Area-spread path termination heuristic.
//!
//! The spread of a subpath `x1 .. xn` is
//! `(sum_{i=2..n} sqrt(|x_{i-1} - x_i|^2 / (p(w_i) |cos θ_i|)))^2`,
//! compared against `c * a0` where `a0 = |x0 - x1|^2 / (4 π cos θ1)` is the
//! footprint of the primary vertex seen from the camera.

use std::f64::consts::PI;

use glam::DVec3;

use super::path::PathVertex;

/// Smallest cosine used for the primary footprint.
pub const GRAZING_CLAMP: f64 = 0.01;

/// Footprint of the primary hit `x1` seen from camera `x0`.
pub fn primary_spread(x0: DVec3, x1: DVec3, cos_theta1: f64) -> f64 {
    x0.distance_squared(x1) / (4.0 * PI * cos_theta1.abs().max(GRAZING_CLAMP))
}

/// Running square-root sum of segment spreads.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SpreadAccumulator {
    root_sum: f64,
}

impl SpreadAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds one segment. Delta segments add nothing; a zero density or
    /// cosine makes the spread infinite.
    pub fn add_segment(&mut self, length: f64, pdf: f64, cos_theta: f64, delta: bool) {
        if delta {
            return;
        }
        let denom = pdf * cos_theta.abs();
        if !(denom > 0.0) {
            self.root_sum = f64::INFINITY;
            return;
        }
        self.root_sum += (length * length / denom).sqrt();
    }

    pub fn value(&self) -> f64 {
        self.root_sum * self.root_sum
    }
}

/// Spread of the subpath formed by `vertices`; the first vertex only
/// anchors the sum.
pub fn area_spread(vertices: &[PathVertex]) -> f64 {
    let mut acc = SpreadAccumulator::new();
    for v in vertices.iter().skip(1) {
        acc.add_segment(v.segment_length, v.pdf, v.cos_theta, v.delta);
    }
    acc.value()
}
