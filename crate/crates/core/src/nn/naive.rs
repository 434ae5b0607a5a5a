//! Reference evaluation: one full-batch matrix product per layer, batch-major,
//! no fusion. Used as the oracle for the fused kernel.

use super::{matrix_shape, NetworkWeights, Scalar, NUM_MATRICES, OUTPUT_DIM, WIDTH};

/// Every layer's activations for the whole batch, input first, output last.
pub fn naive_forward<T: Scalar>(w: &NetworkWeights<T>, inputs: &[[T; WIDTH]]) -> Vec<Vec<Vec<T>>> {
    let mut layers: Vec<Vec<Vec<T>>> = vec![inputs.iter().map(|x| x.to_vec()).collect()];
    for m in 0..NUM_MATRICES {
        let (rows, cols) = matrix_shape(m);
        let mat = w.matrix(m);
        let relu = m + 1 < NUM_MATRICES;
        let prev = layers.last().unwrap();
        let mut next = Vec::with_capacity(prev.len());
        for x in prev {
            let mut y = vec![T::ZERO; rows];
            for (j, yj) in y.iter_mut().enumerate() {
                let mut acc = T::ZERO;
                for i in 0..cols {
                    acc += mat[j * cols + i] * x[i];
                }
                *yj = if relu && !(acc > T::ZERO) { T::ZERO } else { acc };
            }
            next.push(y);
        }
        layers.push(next);
    }
    layers
}

pub fn naive_infer<T: Scalar>(w: &NetworkWeights<T>, inputs: &[[T; WIDTH]]) -> Vec<[T; OUTPUT_DIM]> {
    naive_forward(w, inputs)
        .pop()
        .unwrap()
        .into_iter()
        .map(|y| [y[0], y[1], y[2]])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights() {
        let w = NetworkWeights::<f64>::zeros();
        assert_eq!(naive_infer(&w, &[[1.0; WIDTH]; 3]), vec![[0.0; 3]; 3]);
    }

    #[test]
    fn single_path_is_product_of_weights() {
        let mut w = NetworkWeights::<f64>::zeros();
        let path = [0.5, 2.0, 3.0, 0.25, 4.0, 1.5];
        // input 5 -> h0 -> ... -> output 1
        w.matrix_mut(0)[5] = path[0];
        for m in 1..5 {
            w.matrix_mut(m)[0] = path[m];
        }
        w.matrix_mut(5)[WIDTH] = path[5];
        let mut x = [0.0; WIDTH];
        x[5] = 2.0;
        let out = naive_infer(&w, &[x]);
        assert_eq!(out[0], [0.0, 2.0 * path.iter().product::<f64>(), 0.0]);
    }
}
