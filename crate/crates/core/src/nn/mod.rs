//! Fixed-architecture MLP: 64 inputs, five hidden layers of 64 ReLU units,
//! three linear outputs, no biases.
//!
//! Weights are six row-major matrices `M0..M4` (64x64) and `M5` (3x64),
//! stored back to back in one flat buffer so optimizers can treat them as a
//! single parameter vector.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Mul, Sub};

use rand::Rng;

pub mod bench;
mod fused;
pub mod gradcheck;
mod naive;
mod snapshot;
pub(crate) mod snapshot_io {
    pub(crate) use super::snapshot::{read_f32s, read_u32, write_f32s};
}

pub use fused::{infer, infer_with, train_pass, train_pass_with, ActivationStash, FusedConfig};
pub use naive::{naive_forward, naive_infer};
pub use snapshot::{read_weights, write_weights, SnapshotError, SNAPSHOT_MAGIC, SNAPSHOT_VERSION};

/// Width of every hidden layer and of the input.
pub const WIDTH: usize = 64;
/// Output channels (RGB).
pub const OUTPUT_DIM: usize = 3;
/// Number of weight matrices.
pub const NUM_MATRICES: usize = 6;
/// Default number of batch columns processed per fused chunk.
pub const DEFAULT_CHUNK: usize = 128;

/// Element type of the network. Implemented for `f32` (rendering) and
/// `f64` (gradient checks).
pub trait Scalar:
    Copy
    + Default
    + Debug
    + PartialOrd
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + AddAssign
{
    const ZERO: Self;
    const ONE: Self;
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
    fn is_finite(self) -> bool;
}

impl Scalar for f32 {
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
    fn is_finite(self) -> bool {
        f32::is_finite(self)
    }
}

impl Scalar for f64 {
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
}

/// `(rows, cols)` of matrix `index`.
pub const fn matrix_shape(index: usize) -> (usize, usize) {
    if index + 1 == NUM_MATRICES {
        (OUTPUT_DIM, WIDTH)
    } else {
        (WIDTH, WIDTH)
    }
}

/// Offset of matrix `index` in the flat parameter buffer.
pub const fn matrix_offset(index: usize) -> usize {
    index * WIDTH * WIDTH
}

/// Total number of parameters.
pub const PARAM_COUNT: usize = (NUM_MATRICES - 1) * WIDTH * WIDTH + OUTPUT_DIM * WIDTH;

/// The six weight matrices of the network.
#[derive(Clone, PartialEq)]
pub struct NetworkWeights<T: Scalar = f32> {
    data: Vec<T>,
}

impl<T: Scalar> Debug for NetworkWeights<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NetworkWeights")
            .field("params", &self.data.len())
            .finish()
    }
}

impl<T: Scalar> NetworkWeights<T> {
    pub fn zeros() -> Self {
        Self {
            data: vec![T::ZERO; PARAM_COUNT],
        }
    }

    /// Wraps a flat buffer laid out as `M0 | M1 | ... | M5`.
    pub fn from_flat(data: Vec<T>) -> Option<Self> {
        (data.len() == PARAM_COUNT).then_some(Self { data })
    }

    /// Uniform initialisation in `+-sqrt(6 / (fan_in + fan_out))` per matrix.
    pub fn init_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut w = Self::zeros();
        for m in 0..NUM_MATRICES {
            let (rows, cols) = matrix_shape(m);
            let bound = (6.0 / (rows + cols) as f64).sqrt();
            for v in w.matrix_mut(m) {
                *v = T::from_f64(rng.gen_range(-bound..bound));
            }
        }
        w
    }

    pub fn matrix(&self, index: usize) -> &[T] {
        let (r, c) = matrix_shape(index);
        let o = matrix_offset(index);
        &self.data[o..o + r * c]
    }

    pub fn matrix_mut(&mut self, index: usize) -> &mut [T] {
        let (r, c) = matrix_shape(index);
        let o = matrix_offset(index);
        &mut self.data[o..o + r * c]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_flat(self) -> Vec<T> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn cast<U: Scalar>(&self) -> NetworkWeights<U> {
        NetworkWeights {
            data: self.data.iter().map(|v| U::from_f64(v.to_f64())).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_pcg::Pcg64;

    #[test]
    fn shapes() {
        assert_eq!(PARAM_COUNT, 5 * 4096 + 192);
        assert_eq!(matrix_shape(0), (64, 64));
        assert_eq!(matrix_shape(4), (64, 64));
        assert_eq!(matrix_shape(5), (3, 64));
        let w = NetworkWeights::<f32>::zeros();
        assert_eq!(w.matrix(5).len(), 192);
        assert_eq!(w.matrix(2).len(), 4096);
    }

    #[test]
    fn init_respects_bounds() {
        let mut rng = Pcg64::seed_from_u64(3);
        let w = NetworkWeights::<f32>::init_uniform(&mut rng);
        assert!(w.is_finite());
        let hidden = (6.0f32 / 128.0).sqrt();
        assert!(w.matrix(0).iter().all(|v| v.abs() <= hidden));
        let out = (6.0f32 / 67.0).sqrt();
        assert!(w.matrix(5).iter().all(|v| v.abs() <= out));
        assert!(w.matrix(5).iter().any(|v| v.abs() > hidden));
    }

    #[test]
    fn from_flat_checks_length() {
        assert!(NetworkWeights::<f32>::from_flat(vec![0.0; 10]).is_none());
        assert!(NetworkWeights::<f32>::from_flat(vec![0.0; PARAM_COUNT]).is_some());
    }
}
