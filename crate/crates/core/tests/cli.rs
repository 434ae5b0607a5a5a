use std::fs;
use std::path::{Path, PathBuf};

use nrc::cache::NeuralRadianceCache;
use nrc::cli::{load_scene, run, RenderConfig, STATS_HEADER};
use nrc::harness::Image;
use nrc::scenes::{cornell_box, furnace};

fn scene_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenes").join(name)
}

#[test]
fn bundled_scenes_load() {
    let f = load_scene(&scene_path("furnace.toml")).unwrap();
    assert_eq!(f.build().unwrap(), furnace(0.5, 1.0).unwrap());

    let c = load_scene(&scene_path("cornell.toml")).unwrap().build().unwrap();
    let builtin = cornell_box();
    assert_eq!(c.camera, builtin.camera);
    assert_eq!(c.bounds(), builtin.bounds());
    assert_eq!(c.primitives.len(), 6 + 10);
    assert!(c.has_lights());

    let a = load_scene(&scene_path("swinging_lamp.toml")).unwrap();
    assert!(a.is_animated());
    assert_ne!(a.at_time(0.0).unwrap(), a.at_time(1.0).unwrap());
    // the last keyframe returns the lamp to its start
    assert_eq!(a.at_time(0.0).unwrap(), a.at_time(4.0).unwrap());
}

fn small(output: PathBuf, frames: usize) -> RenderConfig {
    RenderConfig {
        width: 16,
        height: 12,
        frames,
        seed: 7,
        target_records: 256,
        initial_tile: 4,
        reference_spp: Some(4),
        output,
        ..RenderConfig::default()
    }
}

#[test]
fn render_writes_frames_stats_and_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let desc = load_scene(&scene_path("furnace.toml")).unwrap();
    let summary = run(&small(dir.path().to_path_buf(), 3), &desc).unwrap();
    assert_eq!(summary.frames, 3);
    for f in 0..3 {
        let bytes = fs::read(dir.path().join(format!("frame_{f:04}.pfm"))).unwrap();
        let img = Image::read_pfm(&mut bytes.as_slice()).unwrap();
        assert_eq!((img.width, img.height), (16, 12));
    }
    let csv = fs::read_to_string(dir.path().join("stats.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], STATS_HEADER);
    assert_eq!(lines.len(), 4);
    let first: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(first.len(), STATS_HEADER.split(',').count());
    assert_eq!(first[0], "0");
    assert!(!first[1].is_empty(), "mrse present with a reference");
    assert!(first[2].is_empty(), "no smape on the first frame");
    assert!(fs::read(dir.path().join("final.ppm")).unwrap().starts_with(b"P6\n16 12\n255\n"));

    let ckpt = fs::read(dir.path().join("cache.nrc")).unwrap();
    let cache = NeuralRadianceCache::read_checkpoint(&mut ckpt.as_slice(), small(dir.path().to_path_buf(), 3).cache_config(), *desc.build().unwrap().bounds()).unwrap();
    assert_eq!(cache.adam().step as usize, 3 * 4);
}

#[test]
fn render_is_reproducible() {
    let desc = load_scene(&scene_path("swinging_lamp.toml")).unwrap();
    let strip_timings = |csv: String| -> Vec<String> {
        csv.lines()
            .map(|l| l.split(',').take(7).collect::<Vec<_>>().join(","))
            .collect()
    };
    let mut outputs = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small(dir.path().to_path_buf(), 3);
        cfg.reference_spp = None;
        run(&cfg, &desc).unwrap();
        let frames: Vec<Vec<u8>> = (0..3)
            .map(|f| fs::read(dir.path().join(format!("frame_{f:04}.pfm"))).unwrap())
            .collect();
        let stats = strip_timings(fs::read_to_string(dir.path().join("stats.csv")).unwrap());
        let ckpt = fs::read(dir.path().join("cache.nrc")).unwrap();
        outputs.push((frames, stats, ckpt));
    }
    assert!(outputs[0] == outputs[1]);
}

#[test]
fn invalid_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let desc = load_scene(&scene_path("furnace.toml")).unwrap();
    let cfg = RenderConfig {
        ema_alpha: 1.0,
        ..small(dir.path().to_path_buf(), 1)
    };
    assert!(run(&cfg, &desc).is_err());
}
