//! Equal-sample comparison on a diffuse Cornell box: one frame rendered with
//! a warmed-up cache versus one sample of plain path tracing, both measured
//! against a converged reference.
//!
//! cargo run --release --example cornell_nrc_vs_path_tracing -- [res] [warmup] [seeds] [ref_spp]

use nrc::cache::{CacheConfig, NeuralRadianceCache};
use nrc::harness::{mrse, render_frame, render_reference, FrameConfig, FrameState};
use nrc::scenes::cornell_box;

fn main() {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>().expect("integer argument"));
    let res = args.next().unwrap_or(32);
    let warmup = args.next().unwrap_or(1024);
    let seeds = args.next().unwrap_or(8) as u64;
    let ref_spp = args.next().unwrap_or(4096);

    let scene = cornell_box();
    let t = std::time::Instant::now();
    let reference = render_reference(&scene, res, res, ref_spp, 64, 0xC0FFEE);
    println!("reference {res}x{res} @ {ref_spp} spp: {:.1}s", t.elapsed().as_secs_f64());

    let (mut nrc_sum, mut pt_sum) = (0.0, 0.0);
    for seed in 0..seeds {
        let cache = NeuralRadianceCache::new(
            CacheConfig {
                init_seed: seed,
                ..CacheConfig::default()
            },
            *scene.bounds(),
        )
        .unwrap();
        let config = FrameConfig {
            width: res,
            height: res,
            ..FrameConfig::default()
        };
        let mut state = FrameState::new(config, scene.clone(), cache, seed);
        for _ in 0..warmup {
            render_frame(&mut state, None);
        }
        let (_, stats) = render_frame(&mut state, Some(&reference));
        let nrc = stats.mrse.unwrap();
        let pt = mrse(&render_reference(&scene, res, res, 1, 64, seed), &reference).unwrap();
        println!("seed {seed}: nrc {nrc:.4}  path tracing {pt:.4}  records {}  tile {}", stats.records, stats.tile_size);
        nrc_sum += nrc;
        pt_sum += pt;
    }
    let (nrc, pt) = (nrc_sum / seeds as f64, pt_sum / seeds as f64);
    println!("mean MRSE: nrc {nrc:.4}  path tracing {pt:.4}  ratio {:.3}", nrc / pt);
}
