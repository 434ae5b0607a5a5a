//! Chunked, fused evaluation of the whole network.
//!
//! A chunk of batch columns is transposed into a feature-major buffer
//! (`64 x chunk`) and all six matrices stream over it back to back, so the
//! chunk's activations stay in L1/L2 for the entire pass. The inner product
//! for every output element accumulates in input order `i = 0..64`, the same
//! order used by [`naive_infer`](super::naive_infer), so both paths agree
//! bit for bit.

use rayon::prelude::*;

use super::{matrix_shape, NetworkWeights, Scalar, DEFAULT_CHUNK, NUM_MATRICES, OUTPUT_DIM, PARAM_COUNT, WIDTH};

/// Columns per register block.
const LANES: usize = 16;
/// Output rows per register block.
const ROWS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FusedConfig {
    /// Batch columns per chunk; must be a positive multiple of 16.
    pub chunk: usize,
}

impl Default for FusedConfig {
    fn default() -> Self {
        Self {
            chunk: DEFAULT_CHUNK,
        }
    }
}

impl FusedConfig {
    pub fn new(chunk: usize) -> Self {
        assert!(
            chunk > 0 && chunk % LANES == 0,
            "chunk width must be a positive multiple of {LANES}"
        );
        Self { chunk }
    }
}

#[inline(always)]
fn block<T: Scalar, const NR: usize>(
    w: &[T],
    j0: usize,
    inner: usize,
    input: &[T],
    out: &mut [T],
    cols: usize,
    relu: bool,
) {
    let wrows: [&[T]; NR] = std::array::from_fn(|r| &w[(j0 + r) * inner..(j0 + r + 1) * inner]);
    for b0 in (0..cols).step_by(LANES) {
        let mut acc = [[T::ZERO; LANES]; NR];
        for i in 0..inner {
            let x: &[T; LANES] = input[i * cols + b0..i * cols + b0 + LANES]
                .try_into()
                .unwrap();
            for r in 0..NR {
                let wv = wrows[r][i];
                for l in 0..LANES {
                    acc[r][l] += wv * x[l];
                }
            }
        }
        for (r, row) in acc.iter().enumerate() {
            let o = &mut out[(j0 + r) * cols + b0..(j0 + r) * cols + b0 + LANES];
            if relu {
                for (o, &a) in o.iter_mut().zip(row) {
                    *o = if a > T::ZERO { a } else { T::ZERO };
                }
            } else {
                o.copy_from_slice(row);
            }
        }
    }
}

/// `out[j, b] = act(sum_i w[j, i] * input[i, b])` with feature-major operands.
fn matmul_cols<T: Scalar>(
    w: &[T],
    rows: usize,
    inner: usize,
    input: &[T],
    out: &mut [T],
    cols: usize,
    relu: bool,
) {
    debug_assert_eq!(w.len(), rows * inner);
    debug_assert!(input.len() >= inner * cols && out.len() >= rows * cols);
    let mut j = 0;
    while j + ROWS <= rows {
        block::<T, ROWS>(w, j, inner, input, out, cols, relu);
        j += ROWS;
    }
    match rows - j {
        0 => {}
        1 => block::<T, 1>(w, j, inner, input, out, cols, relu),
        2 => block::<T, 2>(w, j, inner, input, out, cols, relu),
        3 => block::<T, 3>(w, j, inner, input, out, cols, relu),
        4 => block::<T, 4>(w, j, inner, input, out, cols, relu),
        5 => block::<T, 5>(w, j, inner, input, out, cols, relu),
        6 => block::<T, 6>(w, j, inner, input, out, cols, relu),
        7 => block::<T, 7>(w, j, inner, input, out, cols, relu),
        _ => unreachable!(),
    }
}

/// `g[j, i] += sum_b d[j, b] * a[i, b]`.
fn accumulate_outer<T: Scalar>(d: &[T], rows: usize, a: &[T], cols: usize, g: &mut [T]) {
    const NI: usize = 4;
    for j in 0..rows {
        let dj = &d[j * cols..(j + 1) * cols];
        for i0 in (0..WIDTH).step_by(NI) {
            let mut acc = [[T::ZERO; LANES]; NI];
            for b0 in (0..cols).step_by(LANES) {
                let dv: &[T; LANES] = dj[b0..b0 + LANES].try_into().unwrap();
                for (r, acc_r) in acc.iter_mut().enumerate() {
                    let av: &[T; LANES] = a[(i0 + r) * cols + b0..(i0 + r) * cols + b0 + LANES]
                        .try_into()
                        .unwrap();
                    for l in 0..LANES {
                        acc_r[l] += dv[l] * av[l];
                    }
                }
            }
            for (r, acc_r) in acc.iter().enumerate() {
                let s = acc_r.iter().fold(T::ZERO, |s, &v| s + v);
                g[j * WIDTH + i0 + r] += s;
            }
        }
    }
}

fn load_columns<T: Scalar>(inputs: &[[T; WIDTH]], buf: &mut [T], cols: usize) {
    buf[..WIDTH * cols].fill(T::ZERO);
    for (b, x) in inputs.iter().enumerate() {
        for (i, &v) in x.iter().enumerate() {
            buf[i * cols + b] = v;
        }
    }
}

struct Scratch<T> {
    a: Vec<T>,
    b: Vec<T>,
}

impl<T: Scalar> Scratch<T> {
    fn new(cols: usize) -> Self {
        Self {
            a: vec![T::ZERO; WIDTH * cols],
            b: vec![T::ZERO; WIDTH * cols],
        }
    }
}

fn infer_chunk<T: Scalar>(
    w: &NetworkWeights<T>,
    inputs: &[[T; WIDTH]],
    out: &mut [[T; OUTPUT_DIM]],
    cols: usize,
    s: &mut Scratch<T>,
) {
    load_columns(inputs, &mut s.a, cols);
    for m in 0..NUM_MATRICES - 1 {
        matmul_cols(w.matrix(m), WIDTH, WIDTH, &s.a, &mut s.b, cols, true);
        std::mem::swap(&mut s.a, &mut s.b);
    }
    matmul_cols(w.matrix(NUM_MATRICES - 1), OUTPUT_DIM, WIDTH, &s.a, &mut s.b, cols, false);
    for (b, o) in out.iter_mut().enumerate() {
        for (c, v) in o.iter_mut().enumerate() {
            *v = s.b[c * cols + b];
        }
    }
}

/// Fused batched inference with the default chunk width.
pub fn infer<T: Scalar>(w: &NetworkWeights<T>, inputs: &[[T; WIDTH]]) -> Vec<[T; OUTPUT_DIM]> {
    infer_with(FusedConfig::default(), w, inputs)
}

/// Fused batched inference. Chunks are independent and run in parallel.
pub fn infer_with<T: Scalar>(
    cfg: FusedConfig,
    w: &NetworkWeights<T>,
    inputs: &[[T; WIDTH]],
) -> Vec<[T; OUTPUT_DIM]> {
    let cols = cfg.chunk;
    let mut out = vec![[T::ZERO; OUTPUT_DIM]; inputs.len()];
    inputs
        .par_chunks(cols)
        .zip(out.par_chunks_mut(cols))
        .for_each_init(
            || Scratch::new(cols),
            |s, (x, o)| infer_chunk(w, x, o, cols, s),
        );
    out
}

/// Activations of one forward pass, kept for backpropagation.
///
/// `stage(0)` is the input; `stage(k)` for `k = 1..=5` is the post-ReLU
/// output of hidden layer `k`. All stages are feature-major with
/// [`cols`](Self::cols) columns; columns past the batch length are zero.
#[derive(Debug, Clone)]
pub struct ActivationStash<T: Scalar = f32> {
    cols: usize,
    len: usize,
    stages: Vec<Vec<T>>,
    output: Vec<T>,
}

impl<T: Scalar> ActivationStash<T> {
    /// Allocates a stash for batches of up to `cols` columns (rounded up to
    /// a multiple of the register block width).
    pub fn new(cols: usize) -> Self {
        let cols = cols.div_ceil(LANES).max(1) * LANES;
        Self {
            cols,
            len: 0,
            stages: (0..NUM_MATRICES).map(|_| vec![T::ZERO; WIDTH * cols]).collect(),
            output: vec![T::ZERO; OUTPUT_DIM * cols],
        }
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn stage(&self, k: usize) -> &[T] {
        &self.stages[k]
    }

    /// Output of batch element `b`.
    pub fn output(&self, b: usize) -> [T; OUTPUT_DIM] {
        std::array::from_fn(|c| self.output[c * self.cols + b])
    }

    /// Runs the forward pass over `inputs`, keeping every activation.
    pub fn forward(&mut self, w: &NetworkWeights<T>, inputs: &[[T; WIDTH]]) {
        assert!(inputs.len() <= self.cols, "batch larger than stash");
        let cols = self.cols;
        self.len = inputs.len();
        load_columns(inputs, &mut self.stages[0], cols);
        for m in 0..NUM_MATRICES - 1 {
            let (prev, next) = self.stages.split_at_mut(m + 1);
            matmul_cols(w.matrix(m), WIDTH, WIDTH, &prev[m], &mut next[0], cols, true);
        }
        matmul_cols(
            w.matrix(NUM_MATRICES - 1),
            OUTPUT_DIM,
            WIDTH,
            &self.stages[NUM_MATRICES - 1],
            &mut self.output,
            cols,
            false,
        );
    }

    /// Backpropagates `d_out` and adds the weight gradients into `grads`.
    /// `transposed` holds `M_k^T` for every matrix (see [`transposes`]).
    fn backward(
        &self,
        transposed: &[Vec<T>],
        d_out: &[[T; OUTPUT_DIM]],
        grads: &mut [T],
        delta: &mut Vec<T>,
        next: &mut Vec<T>,
    ) {
        let cols = self.cols;
        delta.clear();
        delta.resize(WIDTH * cols, T::ZERO);
        for (b, d) in d_out.iter().enumerate() {
            for (c, &v) in d.iter().enumerate() {
                delta[c * cols + b] = v;
            }
        }
        next.resize(WIDTH * cols, T::ZERO);
        for m in (0..NUM_MATRICES).rev() {
            let (rows, _) = matrix_shape(m);
            let off = super::matrix_offset(m);
            accumulate_outer(
                delta,
                rows,
                &self.stages[m],
                cols,
                &mut grads[off..off + rows * WIDTH],
            );
            if m == 0 {
                break;
            }
            matmul_cols(&transposed[m], WIDTH, rows, delta, next, cols, false);
            for (d, &a) in next[..WIDTH * cols].iter_mut().zip(&self.stages[m]) {
                if !(a > T::ZERO) {
                    *d = T::ZERO;
                }
            }
            std::mem::swap(delta, next);
        }
    }
}

fn transposes<T: Scalar>(w: &NetworkWeights<T>) -> Vec<Vec<T>> {
    (0..NUM_MATRICES)
        .map(|m| {
            let (rows, cols) = matrix_shape(m);
            let src = w.matrix(m);
            let mut t = vec![T::ZERO; rows * cols];
            for j in 0..rows {
                for i in 0..cols {
                    t[i * rows + j] = src[j * cols + i];
                }
            }
            t
        })
        .collect()
}

/// Weight gradients for a batch, given the loss gradient with respect to
/// every network output.
pub fn train_pass<T: Scalar>(
    w: &NetworkWeights<T>,
    inputs: &[[T; WIDTH]],
    d_out: &[[T; OUTPUT_DIM]],
) -> NetworkWeights<T> {
    assert_eq!(inputs.len(), d_out.len(), "gradient batch does not match input batch");
    let (grads, _) = train_pass_with(FusedConfig::default(), w, inputs, |start, _, d| {
        d.copy_from_slice(&d_out[start..start + d.len()]);
        0.0
    });
    grads
}

/// Forward + backward pass where the output gradient is produced on the fly.
///
/// For every chunk, `loss_grad(start, outputs, d_out)` receives the network
/// outputs of batch elements `start..start + outputs.len()`, must fill
/// `d_out` with `dL/d output`, and returns that chunk's loss contribution.
/// Returns the accumulated weight gradients and the summed loss.
pub fn train_pass_with<T, F>(
    cfg: FusedConfig,
    w: &NetworkWeights<T>,
    inputs: &[[T; WIDTH]],
    loss_grad: F,
) -> (NetworkWeights<T>, f64)
where
    T: Scalar,
    F: Fn(usize, &[[T; OUTPUT_DIM]], &mut [[T; OUTPUT_DIM]]) -> f64 + Sync,
{
    let cols = cfg.chunk;
    let wt = transposes(w);
    let parts: Vec<(Vec<T>, f64)> = inputs
        .par_chunks(cols)
        .enumerate()
        .map_init(
            || (ActivationStash::new(cols), Vec::new(), Vec::new()),
            |(stash, delta, next), (ci, x)| {
                stash.forward(w, x);
                let outs: Vec<[T; OUTPUT_DIM]> = (0..x.len()).map(|b| stash.output(b)).collect();
                let mut d = vec![[T::ZERO; OUTPUT_DIM]; x.len()];
                let loss = loss_grad(ci * cols, &outs, &mut d);
                let mut g = vec![T::ZERO; PARAM_COUNT];
                stash.backward(&wt, &d, &mut g, delta, next);
                (g, loss)
            },
        )
        .collect();

    let mut total = vec![T::ZERO; PARAM_COUNT];
    let mut loss = 0.0;
    for (g, l) in parts {
        for (t, v) in total.iter_mut().zip(g) {
            *t += v;
        }
        loss += l;
    }
    (NetworkWeights::from_flat(total).unwrap(), loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::naive_infer;
    use rand::{Rng, SeedableRng};
    use rand_pcg::Pcg64;

    fn random_batch(rng: &mut Pcg64, n: usize) -> Vec<[f32; WIDTH]> {
        (0..n)
            .map(|_| std::array::from_fn(|i| if i >= 62 { 1.0 } else { rng.gen_range(-1.0..1.0) }))
            .collect()
    }

    #[test]
    fn zero_weights_give_zero() {
        let w = NetworkWeights::<f32>::zeros();
        let mut rng = Pcg64::seed_from_u64(1);
        let out = infer(&w, &random_batch(&mut rng, 37));
        assert!(out.iter().all(|o| *o == [0.0; 3]));
    }

    #[test]
    fn constant_network_through_padding_channel() {
        let mut w = NetworkWeights::<f32>::zeros();
        w.matrix_mut(0)[62] = 1.0; // row 0 reads the padding entry
        for m in 1..5 {
            w.matrix_mut(m)[0] = 1.0; // channel 0 -> channel 0
        }
        w.matrix_mut(5)[0] = 1.0;
        let mut rng = Pcg64::seed_from_u64(2);
        let out = infer(&w, &random_batch(&mut rng, 300));
        assert!(out.iter().all(|o| *o == [1.0, 0.0, 0.0]));
    }

    #[test]
    fn matches_naive_bitwise_for_odd_sizes() {
        let mut rng = Pcg64::seed_from_u64(5);
        let w = NetworkWeights::<f32>::init_uniform(&mut rng);
        for n in [1, 15, 16, 17, 128, 129, 300] {
            let x = random_batch(&mut rng, n);
            assert_eq!(infer(&w, &x), naive_infer(&w, &x));
            assert_eq!(infer_with(FusedConfig::new(32), &w, &x), naive_infer(&w, &x));
        }
    }

    #[test]
    fn zero_output_gradient_gives_zero_weight_gradient() {
        let mut rng = Pcg64::seed_from_u64(6);
        let w = NetworkWeights::<f32>::init_uniform(&mut rng);
        let x = random_batch(&mut rng, 50);
        let g = train_pass(&w, &x, &vec![[0.0; 3]; 50]);
        assert!(g.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_layer_gradient_is_outer_product() {
        // M1..M4 identity, M5 picks channel 0 into output 0; inputs non-negative
        // so every hidden unit on the path is active.
        let mut rng = Pcg64::seed_from_u64(7);
        let mut w = NetworkWeights::<f64>::zeros();
        for v in w.matrix_mut(0) {
            *v = rng.gen_range(0.0..1.0);
        }
        for m in 1..5 {
            for k in 0..WIDTH {
                w.matrix_mut(m)[k * WIDTH + k] = 1.0;
            }
        }
        w.matrix_mut(5)[0] = 2.0;
        let x: [f64; WIDTH] = std::array::from_fn(|_| rng.gen_range(0.1..1.0));
        let d = [[0.5, -1.0, 3.0]];
        let g = train_pass(&w, &[x], &d);
        // only hidden channel 0 reaches the output: dL/dh0 = 2 * 0.5
        for j in 0..WIDTH {
            for i in 0..WIDTH {
                let expect = if j == 0 { 1.0 * x[i] } else { 0.0 };
                assert!((g.matrix(0)[j * WIDTH + i] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn stash_hidden_stages_are_nonnegative() {
        let mut rng = Pcg64::seed_from_u64(8);
        let w = NetworkWeights::<f32>::init_uniform(&mut rng);
        let x = random_batch(&mut rng, 40);
        let mut stash = ActivationStash::new(40);
        stash.forward(&w, &x);
        assert_eq!(stash.cols(), 48);
        assert_eq!(stash.len(), 40);
        for k in 1..NUM_MATRICES {
            assert!(stash.stage(k).iter().all(|&v| v >= 0.0));
        }
        let direct = naive_infer(&w, &x);
        for (b, o) in direct.iter().enumerate() {
            assert_eq!(stash.output(b), *o);
        }
    }

    #[test]
    #[should_panic]
    fn rejects_unaligned_chunk() {
        FusedConfig::new(100);
    }
}
