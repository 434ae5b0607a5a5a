//! White furnace: with self-training the cache learns the full multi-bounce
//! radiance e / (1 - ρ); without it, only the bounces its paths reach.
//!
//! cargo run --release --example furnace_self_training -- [frames] [resolution]

use nrc::cache::{CacheConfig, NeuralRadianceCache};
use nrc::harness::{furnace_expected, render_frame, visualize_cache, FrameConfig, FrameState, Image};
use nrc::scenes::furnace;
use nrc::tracer::TraceSettings;

fn run(self_training: bool, frames: usize, res: usize) -> f64 {
    let scene = furnace(0.5, 1.0).unwrap();
    let cache = NeuralRadianceCache::new(CacheConfig::default(), *scene.bounds()).unwrap();
    let config = FrameConfig {
        width: res,
        height: res,
        trace: TraceSettings {
            self_training,
            ..TraceSettings::default()
        },
        ..FrameConfig::default()
    };
    let reference = Image::filled(res, res, nrc::math::Rgb::splat(2.0));
    let mut state = FrameState::new(config, scene, cache, 7);
    let start = std::time::Instant::now();
    for f in 0..frames {
        let (_, stats) = render_frame(&mut state, Some(&reference));
        if f.is_power_of_two() || f + 1 == frames {
            let vis = visualize_cache(&state.scene, &state.cache, res, res);
            println!(
                "  frame {:4}  mrse {:.5}  loss {:.4}  records {:5}  tile {:2}  cache view {:.4}",
                f + 1,
                stats.mrse.unwrap(),
                stats.loss,
                stats.records,
                stats.tile_size,
                vis.mean()
            );
        }
    }
    let ms = start.elapsed().as_secs_f64() * 1e3 / frames as f64;
    let vis = visualize_cache(&state.scene, &state.cache, res, res);
    println!("  {ms:.1} ms/frame");
    vis.mean()
}

fn main() {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>().expect("integer argument"));
    let frames = args.next().unwrap_or(512);
    let res = args.next().unwrap_or(128);
    println!("expected {}", furnace_expected(0.5, 1.0).unwrap());
    println!("self-training on");
    let on = run(true, frames, res);
    println!("self-training off");
    let off = run(false, frames, res);
    println!("cache view: on {on:.4}  off {off:.4}");
}
