//! Runtime scene: primitives, materials, lights and the camera.

use std::f64::consts::PI;

use glam::{DMat3, DVec3};
use rand::Rng;
use thiserror::Error;

use crate::math::{luminance, Aabb, Ray, Rgb};

/// Surface material. `diffuse + specular <= 1` per channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    pub diffuse: Rgb,
    pub specular: Rgb,
    pub roughness: f64,
    pub emission: Rgb,
}

impl Material {
    pub fn diffuse(albedo: Rgb) -> Self {
        Self {
            diffuse: albedo,
            specular: Rgb::ZERO,
            roughness: 1.0,
            emission: Rgb::ZERO,
        }
    }

    pub fn with_emission(mut self, emission: Rgb) -> Self {
        self.emission = emission;
        self
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let sum = self.diffuse + self.specular;
        if !sum.is_finite() || sum.max_element() > 1.0 + 1e-9 {
            return Err(SceneError::EnergyConservation(sum.to_array()));
        }
        if self.diffuse.min_element() < 0.0 || self.specular.min_element() < 0.0 {
            return Err(SceneError::NegativeReflectance);
        }
        if !self.roughness.is_finite() || self.roughness < 0.0 {
            return Err(SceneError::Roughness(self.roughness));
        }
        if !self.emission.is_finite() || self.emission.min_element() < 0.0 {
            return Err(SceneError::Emission);
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SceneError {
    #[error("diffuse + specular reflectance {0:?} exceeds 1 (energy conservation)")]
    EnergyConservation([f64; 3]),
    #[error("reflectance must be non-negative")]
    NegativeReflectance,
    #[error("roughness must be finite and non-negative, got {0}")]
    Roughness(f64),
    #[error("emission must be finite and non-negative")]
    Emission,
    #[error("primitive {0} references missing material {1}")]
    MissingMaterial(usize, usize),
    #[error("primitive {0} is degenerate")]
    Degenerate(usize),
    #[error("scene has no geometry")]
    Empty,
}

/// Geometric primitive. The emitting side is the one the normal points to;
/// `inward`/`flip` reverse it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Sphere { center: DVec3, radius: f64, inward: bool },
    /// Parallelogram `origin + s edge_u + t edge_v`, `s, t in [0, 1]`.
    Quad { origin: DVec3, edge_u: DVec3, edge_v: DVec3, flip: bool },
    Triangle { a: DVec3, b: DVec3, c: DVec3, flip: bool },
}

impl Shape {
    pub fn area(&self) -> f64 {
        match *self {
            Shape::Sphere { radius, .. } => 4.0 * PI * radius * radius,
            Shape::Quad { edge_u, edge_v, .. } => edge_u.cross(edge_v).length(),
            Shape::Triangle { a, b, c, .. } => 0.5 * (b - a).cross(c - a).length(),
        }
    }

    pub fn bounds(&self) -> Aabb {
        let mut bb = Aabb::EMPTY;
        match *self {
            Shape::Sphere { center, radius, .. } => {
                bb.grow(center - DVec3::splat(radius));
                bb.grow(center + DVec3::splat(radius));
            }
            Shape::Quad { origin, edge_u, edge_v, .. } => {
                for p in [origin, origin + edge_u, origin + edge_v, origin + edge_u + edge_v] {
                    bb.grow(p);
                }
            }
            Shape::Triangle { a, b, c, .. } => {
                for p in [a, b, c] {
                    bb.grow(p);
                }
            }
        }
        bb
    }

    /// Ray parameter of the nearest intersection in `(t_min, t_max)`.
    pub fn intersect(&self, ray: &Ray, t_min: f64, t_max: f64) -> Option<f64> {
        match *self {
            Shape::Sphere { center, radius, .. } => {
                let oc = ray.origin - center;
                let b = oc.dot(ray.dir);
                let c = oc.length_squared() - radius * radius;
                let disc = b * b - c;
                if disc < 0.0 {
                    return None;
                }
                let sq = disc.sqrt();
                [-b - sq, -b + sq].into_iter().find(|&t| t > t_min && t < t_max)
            }
            Shape::Quad { origin, edge_u, edge_v, .. } => {
                parallelogram_hit(ray, origin, edge_u, edge_v, t_min, t_max, false)
            }
            Shape::Triangle { a, b, c, .. } => parallelogram_hit(ray, a, b - a, c - a, t_min, t_max, true),
        }
    }

    /// Normal on the emitting side at surface point `p`.
    pub fn normal_at(&self, p: DVec3) -> DVec3 {
        match *self {
            Shape::Sphere { center, inward, .. } => {
                let n = (p - center).normalize();
                if inward {
                    -n
                } else {
                    n
                }
            }
            Shape::Quad { edge_u, edge_v, flip, .. } => {
                let n = edge_u.cross(edge_v).normalize();
                if flip {
                    -n
                } else {
                    n
                }
            }
            Shape::Triangle { a, b, c, flip } => {
                let n = (b - a).cross(c - a).normalize();
                if flip {
                    -n
                } else {
                    n
                }
            }
        }
    }

    /// Uniform point on the surface for `u in [0,1)^2`, with its normal.
    pub fn sample_area(&self, u: [f64; 2]) -> (DVec3, DVec3) {
        let p = match *self {
            Shape::Sphere { center, radius, .. } => {
                let z = 1.0 - 2.0 * u[0];
                let r = (1.0 - z * z).max(0.0).sqrt();
                let phi = 2.0 * PI * u[1];
                center + radius * DVec3::new(r * phi.cos(), r * phi.sin(), z)
            }
            Shape::Quad { origin, edge_u, edge_v, .. } => origin + u[0] * edge_u + u[1] * edge_v,
            Shape::Triangle { a, b, c, .. } => {
                let s = u[0].sqrt();
                a + s * (1.0 - u[1]) * (b - a) + s * u[1] * (c - a)
            }
        };
        (p, self.normal_at(p))
    }

    /// Applies `p -> rotation * p + translation` (scale-free).
    pub fn transformed(&self, rotation: DMat3, translation: DVec3) -> Shape {
        let tp = |p: DVec3| rotation * p + translation;
        match *self {
            Shape::Sphere { center, radius, inward } => Shape::Sphere {
                center: tp(center),
                radius,
                inward,
            },
            Shape::Quad { origin, edge_u, edge_v, flip } => Shape::Quad {
                origin: tp(origin),
                edge_u: rotation * edge_u,
                edge_v: rotation * edge_v,
                flip,
            },
            Shape::Triangle { a, b, c, flip } => Shape::Triangle {
                a: tp(a),
                b: tp(b),
                c: tp(c),
                flip,
            },
        }
    }

    pub fn scaled(&self, s: f64) -> Shape {
        match *self {
            Shape::Sphere { center, radius, inward } => Shape::Sphere {
                center: center * s,
                radius: radius * s,
                inward,
            },
            Shape::Quad { origin, edge_u, edge_v, flip } => Shape::Quad {
                origin: origin * s,
                edge_u: edge_u * s,
                edge_v: edge_v * s,
                flip,
            },
            Shape::Triangle { a, b, c, flip } => Shape::Triangle {
                a: a * s,
                b: b * s,
                c: c * s,
                flip,
            },
        }
    }
}

fn parallelogram_hit(
    ray: &Ray,
    origin: DVec3,
    e1: DVec3,
    e2: DVec3,
    t_min: f64,
    t_max: f64,
    triangle: bool,
) -> Option<f64> {
    // Möller–Trumbore
    let p = ray.dir.cross(e2);
    let det = e1.dot(p);
    if det.abs() < 1e-14 {
        return None;
    }
    let inv = 1.0 / det;
    let s = ray.origin - origin;
    let u = s.dot(p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(e1);
    let v = ray.dir.dot(q) * inv;
    if v < 0.0 || (triangle && u + v > 1.0) || (!triangle && v > 1.0) {
        return None;
    }
    let t = e2.dot(q) * inv;
    (t > t_min && t < t_max).then_some(t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Primitive {
    pub shape: Shape,
    pub material: usize,
    /// Multiplier on the material emission (animated).
    pub emission_scale: f64,
}

/// Pinhole camera; pixel rows run top to bottom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    pub position: DVec3,
    pub look_at: DVec3,
    pub up: DVec3,
    /// Vertical field of view, degrees.
    pub fov_degrees: f64,
}

impl Camera {
    /// Primary ray through the continuous pixel coordinate `(px, py)`.
    pub fn ray(&self, px: f64, py: f64, width: usize, height: usize) -> Ray {
        let forward = (self.look_at - self.position).normalize();
        let right = forward.cross(self.up).normalize();
        let up = right.cross(forward);
        let tan = (self.fov_degrees.to_radians() * 0.5).tan();
        let aspect = width as f64 / height as f64;
        let x = (2.0 * px / width as f64 - 1.0) * tan * aspect;
        let y = (1.0 - 2.0 * py / height as f64) * tan;
        Ray::new(self.position, (forward + x * right + y * up).normalize())
    }
}

/// Intersection record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub position: DVec3,
    /// Geometric normal flipped to face the incoming ray.
    pub normal: DVec3,
    /// Normal on the emitting side.
    pub emit_normal: DVec3,
    pub primitive: usize,
    pub material: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct LightEntry {
    primitive: usize,
    cdf: f64,
    pmf: f64,
}

/// A point sampled on an emitter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LightSample {
    pub position: DVec3,
    pub normal: DVec3,
    pub radiance: Rgb,
    /// Selection probability times the area density (`1/area`).
    pub pdf_area: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub materials: Vec<Material>,
    pub primitives: Vec<Primitive>,
    pub camera: Camera,
    lights: Vec<LightEntry>,
    /// Per-primitive light selection probability (0 for non-emitters).
    light_pmf: Vec<f64>,
    bounds: Aabb,
    ray_epsilon: f64,
}

impl Scene {
    pub fn new(materials: Vec<Material>, primitives: Vec<Primitive>, camera: Camera) -> Result<Self, SceneError> {
        if primitives.is_empty() {
            return Err(SceneError::Empty);
        }
        for m in &materials {
            m.validate()?;
        }
        let mut bounds = Aabb::EMPTY;
        let mut power = Vec::with_capacity(primitives.len());
        for (i, p) in primitives.iter().enumerate() {
            let Some(m) = materials.get(p.material) else {
                return Err(SceneError::MissingMaterial(i, p.material));
            };
            let area = p.shape.area();
            if !(area > 0.0) || !area.is_finite() {
                return Err(SceneError::Degenerate(i));
            }
            bounds = bounds.union(&p.shape.bounds());
            power.push(luminance(m.emission) * p.emission_scale.max(0.0) * area);
        }
        // pad flat boxes so every axis has extent
        let pad = DVec3::splat(1e-3 * bounds.diagonal().max(1e-9));
        let bounds = Aabb::new(bounds.min - pad, bounds.max + pad);

        let total: f64 = power.iter().sum();
        let mut lights = Vec::new();
        let mut light_pmf = vec![0.0; primitives.len()];
        if total > 0.0 {
            let mut acc = 0.0;
            for (i, &p) in power.iter().enumerate() {
                if p > 0.0 {
                    acc += p / total;
                    light_pmf[i] = p / total;
                    lights.push(LightEntry {
                        primitive: i,
                        cdf: acc,
                        pmf: p / total,
                    });
                }
            }
            if let Some(last) = lights.last_mut() {
                last.cdf = 1.0;
            }
        }
        let ray_epsilon = 1e-4 * bounds.diagonal();
        Ok(Self {
            materials,
            primitives,
            camera,
            lights,
            light_pmf,
            bounds,
            ray_epsilon,
        })
    }

    pub fn bounds(&self) -> &Aabb {
        &self.bounds
    }

    /// Self-intersection offset, proportional to the scene size.
    pub fn ray_epsilon(&self) -> f64 {
        self.ray_epsilon
    }

    pub fn has_lights(&self) -> bool {
        !self.lights.is_empty()
    }

    pub fn material(&self, hit: &Hit) -> &Material {
        &self.materials[hit.material]
    }

    /// Nearest hit with `t > ray_epsilon`.
    pub fn intersect(&self, ray: &Ray) -> Option<Hit> {
        let mut best: Option<(f64, usize)> = None;
        let mut t_max = f64::INFINITY;
        for (i, p) in self.primitives.iter().enumerate() {
            if let Some(t) = p.shape.intersect(ray, self.ray_epsilon, t_max) {
                t_max = t;
                best = Some((t, i));
            }
        }
        let (t, i) = best?;
        let prim = &self.primitives[i];
        let position = ray.at(t);
        let emit_normal = prim.shape.normal_at(position);
        let normal = if emit_normal.dot(ray.dir) < 0.0 {
            emit_normal
        } else {
            -emit_normal
        };
        Some(Hit {
            t,
            position,
            normal,
            emit_normal,
            primitive: i,
            material: prim.material,
        })
    }

    /// True if anything blocks the open segment between `a` and `b`.
    pub fn occluded(&self, a: DVec3, b: DVec3) -> bool {
        let d = b - a;
        let len = d.length();
        let ray = Ray::new(a, d / len);
        let t_max = len - self.ray_epsilon;
        self.primitives
            .iter()
            .any(|p| p.shape.intersect(&ray, self.ray_epsilon, t_max).is_some())
    }

    /// Radiance emitted from `hit` towards `-dir`. One-sided.
    pub fn emitted(&self, hit: &Hit, dir: DVec3) -> Rgb {
        let prim = &self.primitives[hit.primitive];
        let m = &self.materials[hit.material];
        if m.emission == Rgb::ZERO || hit.emit_normal.dot(dir) >= 0.0 {
            Rgb::ZERO
        } else {
            m.emission * prim.emission_scale
        }
    }

    /// Picks an emitter proportionally to its power and samples a point on it.
    pub fn sample_light<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<LightSample> {
        if self.lights.is_empty() {
            return None;
        }
        let u: f64 = rng.gen();
        let idx = self.lights.partition_point(|l| l.cdf <= u).min(self.lights.len() - 1);
        let entry = self.lights[idx];
        let prim = &self.primitives[entry.primitive];
        let (position, normal) = prim.shape.sample_area([rng.gen(), rng.gen()]);
        Some(LightSample {
            position,
            normal,
            radiance: self.materials[prim.material].emission * prim.emission_scale,
            pdf_area: entry.pmf / prim.shape.area(),
        })
    }

    /// Area density with which [`sample_light`](Self::sample_light) produces
    /// a point on `primitive`.
    pub fn light_pdf_area(&self, primitive: usize) -> f64 {
        self.light_pmf[primitive] / self.primitives[primitive].shape.area()
    }

    /// The same scene with every coordinate multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Scene {
        let prims = self
            .primitives
            .iter()
            .map(|p| Primitive {
                shape: p.shape.scaled(s),
                ..*p
            })
            .collect();
        let camera = Camera {
            position: self.camera.position * s,
            look_at: self.camera.look_at * s,
            ..self.camera
        };
        Scene::new(self.materials.clone(), prims, camera).expect("scaling keeps a valid scene")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn camera() -> Camera {
        Camera {
            position: DVec3::new(0.0, 0.0, -5.0),
            look_at: DVec3::ZERO,
            up: DVec3::Y,
            fov_degrees: 45.0,
        }
    }

    fn one(shape: Shape) -> Scene {
        Scene::new(
            vec![Material::diffuse(Rgb::splat(0.5))],
            vec![Primitive {
                shape,
                material: 0,
                emission_scale: 1.0,
            }],
            camera(),
        )
        .unwrap()
    }

    #[test]
    fn sphere_hit() {
        let s = one(Shape::Sphere {
            center: DVec3::ZERO,
            radius: 1.0,
            inward: false,
        });
        let h = s.intersect(&Ray::new(DVec3::new(0.0, 0.0, -2.0), DVec3::Z)).unwrap();
        assert!((h.t - 1.0).abs() < 1e-12);
        assert!((h.position - DVec3::new(0.0, 0.0, -1.0)).length() < 1e-12);
        assert!((h.normal - DVec3::new(0.0, 0.0, -1.0)).length() < 1e-12);
        assert!(s.intersect(&Ray::new(DVec3::new(0.0, 0.0, -2.0), -DVec3::Z)).is_none());
    }

    #[test]
    fn quad_hit() {
        let s = one(Shape::Quad {
            origin: DVec3::ZERO,
            edge_u: DVec3::X,
            edge_v: DVec3::Y,
            flip: false,
        });
        let h = s.intersect(&Ray::new(DVec3::new(0.25, 0.25, 1.0), -DVec3::Z)).unwrap();
        assert!((h.t - 1.0).abs() < 1e-12);
        assert!(s.intersect(&Ray::new(DVec3::new(1.25, 0.25, 1.0), -DVec3::Z)).is_none());
    }

    #[test]
    fn triangle_hit() {
        let s = one(Shape::Triangle {
            a: DVec3::ZERO,
            b: DVec3::X,
            c: DVec3::Y,
            flip: false,
        });
        assert!(s.intersect(&Ray::new(DVec3::new(0.2, 0.2, 1.0), -DVec3::Z)).is_some());
        assert!(s.intersect(&Ray::new(DVec3::new(0.6, 0.6, 1.0), -DVec3::Z)).is_none());
    }

    #[test]
    fn inside_sphere_hits_far_wall() {
        let s = one(Shape::Sphere {
            center: DVec3::ZERO,
            radius: 2.0,
            inward: true,
        });
        let h = s.intersect(&Ray::new(DVec3::ZERO, DVec3::X)).unwrap();
        assert!((h.t - 2.0).abs() < 1e-12);
        assert!((h.emit_normal + DVec3::X).length() < 1e-12);
        assert!((h.normal + DVec3::X).length() < 1e-12);
    }

    #[test]
    fn energy_conservation_is_validated() {
        let bad = Material {
            diffuse: Rgb::splat(0.7),
            specular: Rgb::new(0.2, 0.4, 0.0),
            roughness: 0.3,
            emission: Rgb::ZERO,
        };
        assert!(matches!(bad.validate(), Err(SceneError::EnergyConservation(_))));
    }

    #[test]
    fn light_selection_follows_power() {
        let mats = vec![
            Material::diffuse(Rgb::ZERO).with_emission(Rgb::ONE),
            Material::diffuse(Rgb::ZERO).with_emission(Rgb::splat(3.0)),
        ];
        let quad = |x: f64, m| Primitive {
            shape: Shape::Quad {
                origin: DVec3::new(x, 0.0, 0.0),
                edge_u: DVec3::X,
                edge_v: DVec3::Y,
                flip: false,
            },
            material: m,
            emission_scale: 1.0,
        };
        let s = Scene::new(mats, vec![quad(0.0, 0), quad(2.0, 1)], camera()).unwrap();
        assert!((s.light_pdf_area(0) - 0.25).abs() < 1e-12);
        assert!((s.light_pdf_area(1) - 0.75).abs() < 1e-12);
    }
}
