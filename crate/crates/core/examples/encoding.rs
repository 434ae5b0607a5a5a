//! Prints the 64-dimensional network input of a single radiance query.

use glam::DVec3;
use nrc::cache::RadianceQuery;
use nrc::encoding::*;
use nrc::math::{Aabb, Rgb};

fn main() {
    let bounds = Aabb::new(DVec3::ZERO, DVec3::ONE);
    let q = RadianceQuery {
        position: DVec3::new(0.25, 0.5, 0.9),
        direction: DVec3::new(0.0, 1.0, -1.0).normalize(),
        normal: DVec3::Y,
        roughness: 0.3,
        diffuse: Rgb::new(0.6, 0.2, 0.1),
        specular: Rgb::splat(0.2),
    };
    let e = encode_query(&q, &bounds);
    let groups = [
        ("position (frequency)", POSITION_OFFSET, DIRECTION_OFFSET),
        ("direction (one-blob)", DIRECTION_OFFSET, NORMAL_OFFSET),
        ("normal (one-blob)", NORMAL_OFFSET, ROUGHNESS_OFFSET),
        ("roughness (one-blob)", ROUGHNESS_OFFSET, DIFFUSE_OFFSET),
        ("diffuse", DIFFUSE_OFFSET, SPECULAR_OFFSET),
        ("specular", SPECULAR_OFFSET, PADDING_OFFSET),
        ("padding", PADDING_OFFSET, INPUT_DIM),
    ];
    for (name, a, b) in groups {
        let vals: Vec<String> = e.0[a..b].iter().map(|v| format!("{v:+.3}")).collect();
        println!("{name:>22} [{a:2}..{b:2}): {}", vals.join(" "));
    }
    println!();
    println!("tri(0.25) = {}, quartic(0) = {}", tri(0.25), quartic(0.0));
    println!("one_blob(0.3, 4) = {:?}", one_blob(0.3, 4));
}
