//! Built-in test scenes.

use glam::DVec3;

use crate::math::Rgb;
use crate::tracer::{Camera, Material, Primitive, Scene, SceneError, Shape};

/// Uniformly emissive, uniformly diffuse closed sphere viewed from its center.
///
/// Outgoing radiance everywhere is `emission / (1 - albedo)`.
pub fn furnace(albedo: f64, emission: f64) -> Result<Scene, SceneError> {
    let material = Material::diffuse(Rgb::splat(albedo)).with_emission(Rgb::splat(emission));
    Scene::new(
        vec![material],
        vec![Primitive {
            shape: Shape::Sphere {
                center: DVec3::ZERO,
                radius: 1.0,
                inward: true,
            },
            material: 0,
            emission_scale: 1.0,
        }],
        Camera {
            position: DVec3::ZERO,
            look_at: DVec3::Z,
            up: DVec3::Y,
            fov_degrees: 60.0,
        },
    )
}

fn quad(origin: DVec3, edge_u: DVec3, edge_v: DVec3, material: usize) -> Primitive {
    Primitive {
        shape: Shape::Quad {
            origin,
            edge_u,
            edge_v,
            flip: false,
        },
        material,
        emission_scale: 1.0,
    }
}

/// Axis-aligned box as five quads (no bottom face).
fn block(min: DVec3, max: DVec3, material: usize) -> Vec<Primitive> {
    let d = max - min;
    let (x, y, z) = (DVec3::X * d.x, DVec3::Y * d.y, DVec3::Z * d.z);
    vec![
        quad(min + y, x, z, material),
        quad(min, y, z, material),
        quad(min + x, y, z, material),
        quad(min, x, y, material),
        quad(min + z, x, y, material),
    ]
}

/// Diffuse Cornell box spanning the unit cube with a square ceiling light
/// and one block. The front face is open and holds the camera.
pub fn cornell_box() -> Scene {
    let materials = vec![
        Material::diffuse(Rgb::splat(0.73)),
        Material::diffuse(Rgb::new(0.65, 0.05, 0.05)),
        Material::diffuse(Rgb::new(0.12, 0.45, 0.15)),
        Material::diffuse(Rgb::ZERO).with_emission(Rgb::splat(12.0)),
    ];
    let (white, red, green, light) = (0, 1, 2, 3);
    let mut prims = vec![
        quad(DVec3::ZERO, DVec3::X, DVec3::Z, white),
        quad(DVec3::Y, DVec3::X, DVec3::Z, white),
        quad(DVec3::Z, DVec3::X, DVec3::Y, white),
        quad(DVec3::ZERO, DVec3::Y, DVec3::Z, red),
        quad(DVec3::X, DVec3::Y, DVec3::Z, green),
        // emits downwards: X × Z = -Y
        quad(DVec3::new(0.325, 0.999, 0.325), DVec3::X * 0.35, DVec3::Z * 0.35, light),
    ];
    prims.extend(block(DVec3::new(0.2, 0.0, 0.45), DVec3::new(0.5, 0.6, 0.75), white));
    Scene::new(
        materials,
        prims,
        Camera {
            position: DVec3::new(0.5, 0.5, -1.35),
            look_at: DVec3::new(0.5, 0.5, 0.0),
            up: DVec3::Y,
            fov_degrees: 40.0,
        },
    )
    .expect("built-in scene is valid")
}
