//! Fused, cache-resident network evaluation versus a layer-by-layer baseline.
//!
//! cargo run --release --example fused_mlp_bench -- [batch] [chunk]

use nrc::nn::bench::bench_mlp;

fn main() {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>().expect("integer argument"));
    let batch = args.next().unwrap_or(1 << 16);
    let chunk = args.next().unwrap_or(nrc::nn::DEFAULT_CHUNK);
    let r = bench_mlp(batch, 3, chunk, 1);
    println!("batch {batch}, chunk {chunk}");
    println!("fused: {:.2} ms/pass, {:.2} GMAC/s", r.fused_seconds * 1e3 / r.repeats as f64, r.fused_macs_per_second() / 1e9);
    println!("naive: {:.2} ms/pass", r.naive_seconds * 1e3 / r.repeats as f64);
    println!("speedup {:.1}x, max relative difference {:.2e}", r.speedup(), r.max_relative_error);
}
