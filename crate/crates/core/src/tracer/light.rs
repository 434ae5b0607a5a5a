//! Next-event estimation with power-heuristic MIS against BSDF sampling.

use glam::DVec3;
use rand::Rng;

use super::bsdf;
use super::scene::{Hit, Material, Scene};
use crate::math::Rgb;

/// Power heuristic with exponent 2 for the strategy with density `a`.
#[inline]
pub fn power_heuristic(a: f64, b: f64) -> f64 {
    let (a2, b2) = (a * a, b * b);
    if a2 + b2 == 0.0 {
        0.0
    } else {
        a2 / (a2 + b2)
    }
}

/// A shading point: position, facing normal, outgoing direction and material.
#[derive(Debug, Clone, Copy)]
pub struct ShadingPoint<'a> {
    pub position: DVec3,
    pub normal: DVec3,
    pub wo: DVec3,
    pub material: &'a Material,
}

/// One light sample weighted against BSDF sampling. Occluded or back-facing
/// samples contribute zero.
pub fn next_event_estimate<R: Rng + ?Sized>(scene: &Scene, x: &ShadingPoint<'_>, rng: &mut R) -> Rgb {
    let Some(ls) = scene.sample_light(rng) else {
        return Rgb::ZERO;
    };
    let to_light = ls.position - x.position;
    let dist2 = to_light.length_squared();
    if !(dist2 > 0.0) {
        return Rgb::ZERO;
    }
    let dist = dist2.sqrt();
    let wi = to_light / dist;
    let cos_x = wi.dot(x.normal);
    let cos_l = -wi.dot(ls.normal);
    if cos_x <= 0.0 || cos_l <= 0.0 {
        return Rgb::ZERO;
    }
    let (f, pdf_bsdf) = bsdf::eval(x.material, x.wo, wi, x.normal);
    if f == Rgb::ZERO {
        return Rgb::ZERO;
    }
    if scene.occluded(x.position, ls.position) {
        return Rgb::ZERO;
    }
    let pdf_light = ls.pdf_area * dist2 / cos_l;
    let w = power_heuristic(pdf_light, pdf_bsdf);
    f * ls.radiance * (cos_x * w / pdf_light)
}

/// Emission reached by a BSDF-sampled ray from `origin`, weighted against
/// the light-sampling strategy. Delta samples get full weight.
pub fn bsdf_hit_emission(scene: &Scene, origin: DVec3, hit: &Hit, dir: DVec3, bsdf_pdf: f64, delta: bool) -> Rgb {
    let le = scene.emitted(hit, dir);
    if le == Rgb::ZERO || delta {
        return le;
    }
    let cos_l = hit.emit_normal.dot(-dir);
    if cos_l <= 0.0 {
        return Rgb::ZERO;
    }
    let dist2 = (hit.position - origin).length_squared();
    let pdf_light = scene.light_pdf_area(hit.primitive) * dist2 / cos_l;
    le * power_heuristic(bsdf_pdf, pdf_light)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Ray;
    use crate::tracer::scene::{Camera, Primitive, Shape};
    use rand::SeedableRng;
    use rand_pcg::Pcg64;

    fn camera() -> Camera {
        Camera {
            position: DVec3::new(0.0, -3.0, 0.0),
            look_at: DVec3::ZERO,
            up: DVec3::Z,
            fov_degrees: 40.0,
        }
    }

    fn quad(origin: DVec3, u: DVec3, v: DVec3, material: usize, flip: bool) -> Primitive {
        Primitive {
            shape: Shape::Quad {
                origin,
                edge_u: u,
                edge_v: v,
                flip,
            },
            material,
            emission_scale: 1.0,
        }
    }

    #[test]
    fn no_emitters_gives_zero() {
        let scene = Scene::new(
            vec![Material::diffuse(Rgb::splat(0.5))],
            vec![quad(DVec3::ZERO, DVec3::X, DVec3::Y, 0, false)],
            camera(),
        )
        .unwrap();
        let m = Material::diffuse(Rgb::ONE);
        let x = ShadingPoint {
            position: DVec3::new(0.5, 0.5, 0.0),
            normal: DVec3::Z,
            wo: DVec3::Z,
            material: &m,
        };
        let mut rng = Pcg64::seed_from_u64(1);
        assert_eq!(next_event_estimate(&scene, &x, &mut rng), Rgb::ZERO);
    }

    #[test]
    fn occluded_light_gives_zero() {
        let scene = Scene::new(
            vec![
                Material::diffuse(Rgb::splat(0.5)),
                Material::diffuse(Rgb::ZERO).with_emission(Rgb::ONE),
            ],
            vec![
                // blocker at z = 0.5 covering everything below the light
                quad(DVec3::new(-5.0, -5.0, 0.5), DVec3::X * 10.0, DVec3::Y * 10.0, 0, false),
                quad(DVec3::new(-0.5, -0.5, 1.0), DVec3::Y, DVec3::X, 1, false),
            ],
            camera(),
        )
        .unwrap();
        let m = Material::diffuse(Rgb::ONE);
        let x = ShadingPoint {
            position: DVec3::ZERO,
            normal: DVec3::Z,
            wo: DVec3::Z,
            material: &m,
        };
        let mut rng = Pcg64::seed_from_u64(2);
        for _ in 0..100 {
            assert_eq!(next_event_estimate(&scene, &x, &mut rng), Rgb::ZERO);
        }
    }

    #[test]
    fn power_heuristic_weights_sum_to_one() {
        for (a, b) in [(1.0, 2.0), (0.3, 0.0), (5.0, 5.0)] {
            assert!((power_heuristic(a, b) + power_heuristic(b, a) - 1.0).abs() < 1e-15);
        }
        assert_eq!(power_heuristic(0.0, 0.0), 0.0);
    }

    #[test]
    fn emitter_seen_by_bsdf_ray_is_weighted() {
        let scene = Scene::new(
            vec![Material::diffuse(Rgb::ZERO).with_emission(Rgb::ONE)],
            vec![quad(DVec3::new(-0.5, -0.5, 1.0), DVec3::Y, DVec3::X, 0, false)],
            camera(),
        )
        .unwrap();
        let ray = Ray::new(DVec3::ZERO, DVec3::Z);
        let hit = scene.intersect(&ray).unwrap();
        let w = bsdf_hit_emission(&scene, DVec3::ZERO, &hit, DVec3::Z, 1.0 / std::f64::consts::PI, false);
        // pdf_light = 1 * 1 / 1 = 1 vs bsdf 1/pi
        let expect = power_heuristic(1.0 / std::f64::consts::PI, 1.0);
        assert!((w.x - expect).abs() < 1e-12);
        assert_eq!(bsdf_hit_emission(&scene, DVec3::ZERO, &hit, DVec3::Z, 0.3, true), Rgb::ONE);
    }
}
