//! Loads a TOML scene file and renders a few frames of it, writing PFM
//! frames, stats.csv and a cache checkpoint.
//!
//! cargo run --release --example scene_file -- [scene.toml] [out_dir]

use std::path::PathBuf;

use nrc::cli::{load_scene, run, RenderConfig};

fn main() {
    let mut args = std::env::args().skip(1);
    let scene = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenes/swinging_lamp.toml"));
    let output = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("nrc_scene_file"));
    let desc = load_scene(&scene).unwrap_or_else(|e| panic!("{}: {e}", scene.display()));
    println!("{} objects, {} materials, {} animations", desc.objects.len(), desc.materials.len(), desc.animations.len());
    let config = RenderConfig {
        width: 64,
        height: 64,
        frames: 16,
        output,
        ..RenderConfig::default()
    };
    let summary = run(&config, &desc).expect("render failed");
    println!(
        "wrote {} frames to {}; last frame loss {:.4}, {} records, tile {}",
        summary.frames,
        summary.output.display(),
        summary.last.loss,
        summary.last.records,
        summary.last.tile_size
    );
}
