//! How the spread threshold `c` controls rendering path length and the
//! share of training paths left unbiased.

use nrc::scenes::cornell_box;
use nrc::tracer::{trace_deferred, PathMode, Termination, TraceSettings};
use rand::SeedableRng;
use rand_pcg::Pcg64;

fn main() {
    let scene = cornell_box();
    let res = 64;
    for c in [0.001, 0.01, 0.1, 1.0] {
        let settings = TraceSettings {
            spread_factor: c,
            ..TraceSettings::default()
        };
        let (mut vertices, mut train_len, mut spread, mut unbiased, mut n) = (0, 0, 0, 0, 0);
        for i in 0..res * res {
            let mut rng = Pcg64::seed_from_u64(i as u64);
            let ray = scene.camera.ray((i % res) as f64 + 0.5, (i / res) as f64 + 0.5, res, res);
            let p = trace_deferred(&scene, ray, PathMode::Train, &settings, &mut rng);
            if p.render_termination == Termination::Escaped {
                continue;
            }
            let t = p.training.as_ref().unwrap();
            vertices += p.vertices.len();
            train_len += t.records.len();
            spread += usize::from(p.render_termination == Termination::Spread);
            unbiased += usize::from(t.unbiased);
            n += 1;
        }
        println!(
            "c = {c:<6} spread-terminated {:5.1}%  training records/path {:.2}  vertices/path {:.2}  unbiased {:.1}%",
            100.0 * spread as f64 / n as f64,
            train_len as f64 / n as f64,
            vertices as f64 / n as f64,
            100.0 * unbiased as f64 / n as f64,
        );
    }
}
