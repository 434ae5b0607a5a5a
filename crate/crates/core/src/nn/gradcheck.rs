//! Finite-difference check of the backpropagated weight gradients of the
//! relative L2 loss composed with the network.
//!
//! The difference quotients come from a plain forward evaluator written here
//! (column-major products, no chunking, no stash), so the check does not share
//! code with the fused training pass it verifies.

use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;

use super::{matrix_shape, train_pass_with, FusedConfig, NetworkWeights, NUM_MATRICES, OUTPUT_DIM, WIDTH};
use crate::math::{luminance, Rgb};
use crate::optimizer::{relative_l2_loss, LOSS_EPSILON};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub draws: usize,
    /// Draws rejected because a hidden pre-activation sat within the kink margin.
    pub redraws: usize,
    pub entries_checked: usize,
    pub max_relative_error: f64,
}

/// Settings for [`check_loss_gradients`].
#[derive(Debug, Clone, Copy)]
pub struct GradCheckConfig {
    pub draws: usize,
    pub step: f64,
    pub seed: u64,
    /// Minimum |pre-activation| for a draw to be accepted; keeps central
    /// differences from straddling a ReLU kink.
    pub kink_margin: f64,
    /// Lower bound on the relative-error denominator.
    pub floor: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            draws: 100,
            step: 1e-4,
            seed: 0x5eed,
            kink_margin: 1e-3,
            floor: 1e-7,
        }
    }
}

/// Column-major copies of the weights: `cm[m][i * rows + j] = M_m[j, i]`.
fn column_major(w: &NetworkWeights<f64>) -> Vec<Vec<f64>> {
    (0..NUM_MATRICES)
        .map(|m| {
            let (rows, cols) = matrix_shape(m);
            let src = w.matrix(m);
            let mut out = vec![0.0; rows * cols];
            for j in 0..rows {
                for i in 0..cols {
                    out[i * rows + j] = src[j * cols + i];
                }
            }
            out
        })
        .collect()
}

/// Evaluates matrices `from..` starting from the activation `x` fed into
/// matrix `from`. Returns the pre-activations of each evaluated layer.
fn forward_from(cm: &[Vec<f64>], from: usize, x: &[f64]) -> Vec<Vec<f64>> {
    let mut pre = Vec::with_capacity(NUM_MATRICES - from);
    let mut act = x.to_vec();
    for (m, mat) in cm.iter().enumerate().skip(from) {
        let (rows, cols) = matrix_shape(m);
        let mut z = vec![0.0; rows];
        for i in 0..cols {
            let xi = act[i];
            if xi == 0.0 {
                continue;
            }
            for (zj, &wji) in z.iter_mut().zip(&mat[i * rows..(i + 1) * rows]) {
                *zj += wji * xi;
            }
        }
        act = z.iter().map(|&v| v.max(0.0)).collect();
        pre.push(z);
    }
    pre
}

fn output_of(pre: &[Vec<f64>]) -> Rgb {
    let z = pre.last().unwrap();
    Rgb::new(z[0], z[1], z[2])
}

/// Compares analytic gradients against central differences over every weight
/// of `draws` random networks, each with a single random input and target.
pub fn check_loss_gradients(cfg: GradCheckConfig) -> GradCheckReport {
    let mut rng = Pcg64::seed_from_u64(cfg.seed);
    let mut report = GradCheckReport {
        draws: 0,
        redraws: 0,
        entries_checked: 0,
        max_relative_error: 0.0,
    };
    while report.draws < cfg.draws {
        let w = NetworkWeights::<f64>::init_uniform(&mut rng);
        let x: [f64; WIDTH] = std::array::from_fn(|i| if i >= 62 { 1.0 } else { rng.gen_range(-1.0..1.0) });
        let target = Rgb::new(rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0));

        let mut cm = column_major(&w);
        let base = forward_from(&cm, 0, &x);
        let hidden_ok = base[..NUM_MATRICES - 1]
            .iter()
            .flatten()
            .all(|z| z.abs() >= cfg.kink_margin);
        if !hidden_ok {
            report.redraws += 1;
            continue;
        }
        report.draws += 1;

        let pred = output_of(&base);
        let lum = luminance(pred);
        let denom = 3.0 * (lum * lum + LOSS_EPSILON);
        let frozen_loss = |p: Rgb| (p - target).length_squared() / denom;

        let (analytic, _) = train_pass_with(FusedConfig::default(), &w, &[x], |_, out, d| {
            let p = Rgb::new(out[0][0], out[0][1], out[0][2]);
            let (l, g) = relative_l2_loss(p, target, LOSS_EPSILON);
            d[0] = [g.x, g.y, g.z];
            l
        });

        // activations entering each matrix
        let mut inputs: Vec<Vec<f64>> = vec![x.to_vec()];
        for z in &base[..NUM_MATRICES - 1] {
            inputs.push(z.iter().map(|&v| v.max(0.0)).collect());
        }

        for m in 0..NUM_MATRICES {
            let (rows, cols) = matrix_shape(m);
            for j in 0..rows {
                for i in 0..cols {
                    let idx = i * rows + j;
                    let orig = cm[m][idx];
                    cm[m][idx] = orig + cfg.step;
                    let up = frozen_loss(output_of(&forward_from(&cm, m, &inputs[m])));
                    cm[m][idx] = orig - cfg.step;
                    let down = frozen_loss(output_of(&forward_from(&cm, m, &inputs[m])));
                    cm[m][idx] = orig;
                    let fd = (up - down) / (2.0 * cfg.step);
                    let g = analytic.matrix(m)[j * cols + i];
                    let rel = (g - fd).abs() / g.abs().max(fd.abs()).max(cfg.floor);
                    report.max_relative_error = report.max_relative_error.max(rel);
                    report.entries_checked += 1;
                }
            }
        }
    }
    debug_assert_eq!(OUTPUT_DIM, 3);
    report
}
