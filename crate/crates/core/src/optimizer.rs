//! Relative L2 loss, Adam, and the bias-corrected EMA of network weights.

use thiserror::Error;

use crate::math::{luminance, Rgb};
use crate::nn::{NetworkWeights, PARAM_COUNT};

/// Stabiliser in the relative loss denominator.
pub const LOSS_EPSILON: f64 = 0.01;

/// Relative L2 loss of one RGB prediction, averaged over channels.
///
/// Every channel is normalised by the squared luminance of the prediction,
/// which is treated as a constant when differentiating. Returns the loss and
/// its gradient with respect to `pred`.
pub fn relative_l2_loss(pred: Rgb, target: Rgb, eps: f64) -> (f64, Rgb) {
    let lum = luminance(pred);
    let denom = lum * lum + eps;
    let diff = pred - target;
    let loss = diff.length_squared() / (3.0 * denom);
    (loss, 2.0 * diff / (3.0 * denom))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-2,
            beta1: 0.9,
            beta2: 0.99,
            epsilon: 1e-8,
        }
    }
}

/// Adam moments and step counter for one set of network weights.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub first_moment: Vec<f32>,
    pub second_moment: Vec<f32>,
    pub step: u64,
}

impl AdamState {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            first_moment: vec![0.0; PARAM_COUNT],
            second_moment: vec![0.0; PARAM_COUNT],
            step: 0,
        }
    }

    /// Applies one update in place. Non-finite gradient entries are treated
    /// as zero; their count is returned.
    pub fn step(&mut self, weights: &mut NetworkWeights<f32>, grads: &NetworkWeights<f32>) -> usize {
        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.step as i32;
        let c1 = (1.0 - beta1.powi(t)) as f32;
        let c2 = (1.0 - beta2.powi(t)) as f32;
        let (b1, b2, lr, eps) = (beta1 as f32, beta2 as f32, learning_rate as f32, epsilon as f32);
        let mut rejected = 0;
        for (((w, &g), m), v) in weights
            .as_mut_slice()
            .iter_mut()
            .zip(grads.as_slice())
            .zip(&mut self.first_moment)
            .zip(&mut self.second_moment)
        {
            let g = if g.is_finite() {
                g
            } else {
                rejected += 1;
                0.0
            };
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            let next = *w - lr * m_hat / (v_hat.sqrt() + eps);
            if next.is_finite() {
                *w = next;
            }
        }
        rejected
    }
}

/// Which averaging formula [`EmaState::update`] applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EmaForm {
    /// `W̄_t = ((1-α) W_t + α η_{t-1} W̄_{t-1}) / η_t`, which reproduces a
    /// constant weight stream exactly.
    #[default]
    BiasCorrected,
    /// `W̄_t = (1-α)/η_t W_t + α η_{t-1} W̄_{t-1}`, kept for comparison only.
    Printed,
}

#[derive(Debug, Error, PartialEq)]
pub enum EmaError {
    #[error("EMA decay must lie in [0, 1), got {0}")]
    Decay(f64),
}

/// Shadow weights used for every cache evaluation. `η_t = 1 - α^t`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmaState {
    pub shadow: NetworkWeights<f32>,
    pub alpha: f64,
    pub step: u64,
    pub form: EmaForm,
}

impl EmaState {
    /// Starts from `initial` so the cache is usable before the first update.
    pub fn new(initial: NetworkWeights<f32>, alpha: f64, form: EmaForm) -> Result<Self, EmaError> {
        if !(0.0..1.0).contains(&alpha) {
            return Err(EmaError::Decay(alpha));
        }
        Ok(Self {
            shadow: initial,
            alpha,
            step: 0,
            form,
        })
    }

    fn eta(&self, t: u64) -> f64 {
        1.0 - self.alpha.powi(t as i32)
    }

    pub fn update(&mut self, weights: &NetworkWeights<f32>) {
        self.step += 1;
        let a = self.alpha;
        let eta = self.eta(self.step);
        let eta_prev = self.eta(self.step - 1);
        let form = self.form;
        for (s, &w) in self.shadow.as_mut_slice().iter_mut().zip(weights.as_slice()) {
            let (s64, w64) = (*s as f64, w as f64);
            let next = match form {
                EmaForm::BiasCorrected => ((1.0 - a) * w64 + a * eta_prev * s64) / eta,
                EmaForm::Printed => (1.0 - a) / eta * w64 + a * eta_prev * s64,
            };
            *s = next as f32;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_pcg::Pcg64;

    #[test]
    fn loss_examples() {
        let (l, g) = relative_l2_loss(Rgb::ONE, Rgb::ONE, 0.01);
        assert_eq!(l, 0.0);
        assert_eq!(g, Rgb::ZERO);

        let (l, _) = relative_l2_loss(Rgb::splat(2.0), Rgb::ONE, 0.01);
        assert!((l - 1.0 / 4.01).abs() < 1e-12);
        assert!((l - 0.24938).abs() < 1e-5);

        let (l, _) = relative_l2_loss(Rgb::ZERO, Rgb::new(1.0, 0.0, 0.0), 0.01);
        assert!((l - 1.0 / 0.03).abs() < 1e-9);
    }

    #[test]
    fn loss_gradient_matches_frozen_denominator_differences() {
        let mut rng = Pcg64::seed_from_u64(11);
        let h = 1e-6;
        for _ in 0..200 {
            let p = Rgb::new(rng.gen(), rng.gen(), rng.gen()) * 3.0;
            let t = Rgb::new(rng.gen(), rng.gen(), rng.gen()) * 3.0;
            let (_, g) = relative_l2_loss(p, t, LOSS_EPSILON);
            let lum = luminance(p);
            let frozen = |q: Rgb| (q - t).length_squared() / (3.0 * (lum * lum + LOSS_EPSILON));
            for c in 0..3 {
                let mut e = Rgb::ZERO;
                e[c] = h;
                let fd = (frozen(p + e) - frozen(p - e)) / (2.0 * h);
                let rel = (fd - g[c]).abs() / g[c].abs().max(fd.abs()).max(1e-9);
                assert!(rel < 1e-6, "rel {rel}");
            }
        }
    }

    #[test]
    fn adam_zero_gradient_keeps_weights() {
        let mut rng = Pcg64::seed_from_u64(12);
        let mut w = NetworkWeights::<f32>::init_uniform(&mut rng);
        let before = w.clone();
        let mut adam = AdamState::new(AdamConfig::default());
        adam.step(&mut w, &NetworkWeights::zeros());
        assert_eq!(w, before);
        assert_eq!(adam.step, 1);
        assert!(adam.first_moment.iter().all(|&m| m == 0.0));
    }

    #[test]
    fn adam_first_step_has_learning_rate_magnitude() {
        let mut w = NetworkWeights::<f32>::zeros();
        let mut g = NetworkWeights::<f32>::zeros();
        g.as_mut_slice()[0] = 3.0;
        g.as_mut_slice()[1] = -0.02;
        let mut adam = AdamState::new(AdamConfig::default());
        adam.step(&mut w, &g);
        assert!((w.as_slice()[0] + 0.01).abs() < 1e-6);
        assert!((w.as_slice()[1] - 0.01).abs() < 1e-6);
        assert_eq!(w.as_slice()[2], 0.0);
    }

    #[test]
    fn adam_moves_monotonically_against_gradient() {
        let mut w = NetworkWeights::<f32>::zeros();
        let mut g = NetworkWeights::<f32>::zeros();
        g.as_mut_slice()[5] = 0.7;
        let mut adam = AdamState::new(AdamConfig::default());
        adam.step(&mut w, &g);
        let first = w.as_slice()[5];
        adam.step(&mut w, &g);
        assert!(first < 0.0 && w.as_slice()[5] < first);
    }

    #[test]
    fn adam_rejects_non_finite_gradients() {
        let mut w = NetworkWeights::<f32>::zeros();
        let mut g = NetworkWeights::<f32>::zeros();
        g.as_mut_slice()[0] = f32::NAN;
        g.as_mut_slice()[1] = f32::INFINITY;
        g.as_mut_slice()[2] = 1.0;
        let mut adam = AdamState::new(AdamConfig::default());
        assert_eq!(adam.step(&mut w, &g), 2);
        assert!(w.is_finite());
        assert_eq!(w.as_slice()[0], 0.0);
    }

    #[test]
    fn ema_first_step_copies_weights() {
        let mut rng = Pcg64::seed_from_u64(13);
        let w = NetworkWeights::<f32>::init_uniform(&mut rng);
        for alpha in [0.0, 0.5, 0.99] {
            let mut ema = EmaState::new(NetworkWeights::zeros(), alpha, EmaForm::BiasCorrected).unwrap();
            ema.update(&w);
            assert_eq!(ema.shadow, w);
        }
    }

    #[test]
    fn ema_alpha_zero_tracks_weights() {
        let mut rng = Pcg64::seed_from_u64(14);
        let mut ema = EmaState::new(NetworkWeights::zeros(), 0.0, EmaForm::BiasCorrected).unwrap();
        for _ in 0..5 {
            let w = NetworkWeights::<f32>::init_uniform(&mut rng);
            ema.update(&w);
            assert_eq!(ema.shadow, w);
        }
    }

    #[test]
    fn ema_constant_stream_is_preserved() {
        let mut rng = Pcg64::seed_from_u64(15);
        let c = NetworkWeights::<f32>::init_uniform(&mut rng);
        let mut ema = EmaState::new(NetworkWeights::zeros(), 0.99, EmaForm::BiasCorrected).unwrap();
        for _ in 0..10_000 {
            ema.update(&c);
            assert_eq!(ema.shadow, c);
        }
    }

    #[test]
    fn printed_form_shrinks_a_constant_stream() {
        let mut c = NetworkWeights::<f32>::zeros();
        c.as_mut_slice().fill(1.0);
        let mut ema = EmaState::new(NetworkWeights::zeros(), 0.99, EmaForm::Printed).unwrap();
        ema.update(&c);
        ema.update(&c);
        let v = ema.shadow.as_slice()[0] as f64;
        // 0.01 / 0.0199 + 0.99 * 0.01 * 1
        assert!((v - (0.01 / 0.0199 + 0.0099)).abs() < 1e-6);
        assert!((v - 0.5124).abs() < 1e-3);
    }

    #[test]
    fn ema_rejects_bad_decay() {
        assert!(EmaState::new(NetworkWeights::zeros(), 1.0, EmaForm::BiasCorrected).is_err());
        assert!(EmaState::new(NetworkWeights::zeros(), -0.1, EmaForm::BiasCorrected).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn ema_is_linear(seed in 0u64..1000, a in -2.0f32..2.0, b in -2.0f32..2.0) {
            let mut rng = Pcg64::seed_from_u64(seed);
            let mut ew = EmaState::new(NetworkWeights::zeros(), 0.9, EmaForm::BiasCorrected).unwrap();
            let mut ev = ew.clone();
            let mut ec = ew.clone();
            for _ in 0..20 {
                let w = NetworkWeights::<f32>::init_uniform(&mut rng);
                let v = NetworkWeights::<f32>::init_uniform(&mut rng);
                let mut comb = NetworkWeights::<f32>::zeros();
                for ((c, &x), &y) in comb.as_mut_slice().iter_mut().zip(w.as_slice()).zip(v.as_slice()) {
                    *c = a * x + b * y;
                }
                ew.update(&w);
                ev.update(&v);
                ec.update(&comb);
            }
            for ((&c, &x), &y) in ec.shadow.as_slice().iter().zip(ew.shadow.as_slice()).zip(ev.shadow.as_slice()) {
                prop_assert!((c - (a * x + b * y)).abs() < 1e-5);
            }
        }

        #[test]
        fn adam_stays_finite(seed in 0u64..1000, scale in 1e-6f32..1e6) {
            let mut rng = Pcg64::seed_from_u64(seed);
            let mut w = NetworkWeights::<f32>::init_uniform(&mut rng);
            let mut adam = AdamState::new(AdamConfig::default());
            for _ in 0..3 {
                let mut g = NetworkWeights::<f32>::init_uniform(&mut rng);
                g.as_mut_slice().iter_mut().for_each(|v| *v *= scale);
                adam.step(&mut w, &g);
            }
            prop_assert!(w.is_finite());
        }
    }
}
