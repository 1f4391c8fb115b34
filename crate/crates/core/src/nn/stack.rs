//! Layer stacks with recorded forward passes and exact backprop.

use super::{Activation, Array, DenseLayer, NnError, Result, Scalar};

/// A sequence of dense layers with matching widths.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseStack<F: Scalar = f32> {
    layers: Vec<DenseLayer<F>>,
}

/// Recorded forward values: per-layer inputs and pre-activations.
///
/// A tape is consumed by [`DenseStack::backward`], so at most one backward
/// pass can run per forward pass.
pub struct Tape<F: Scalar = f32> {
    fingerprint: u64,
    rows: usize,
    inputs: Vec<Array<F>>,
    preacts: Vec<Array<F>>,
}

impl<F: Scalar> Tape<F> {
    pub fn rows(&self) -> usize {
        self.rows
    }
}

/// Parameter and input gradients of a scalar loss, per layer.
#[derive(Debug, Clone)]
pub struct StackGradients<F: Scalar = f32> {
    pub weights: Vec<Array<F>>,
    pub biases: Vec<Array<F>>,
    /// Gradient with respect to the stack input, `[rows, in]`.
    pub input: Array<F>,
}

impl<F: Scalar> DenseStack<F> {
    pub fn new(layers: Vec<DenseLayer<F>>) -> Result<Self> {
        for pair in layers.windows(2) {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(NnError::ShapeMismatch {
                    context: "DenseStack layer chaining",
                    expected: vec![pair[0].out_dim()],
                    got: vec![pair[1].in_dim()],
                });
            }
        }
        Ok(Self { layers })
    }

    /// Glorot-initialized stack through `dims`, e.g. `[in, h1, h2, out]`.
    /// Hidden layers use `hidden_act`; the final layer uses `out_act`.
    pub fn glorot(
        dims: &[usize],
        hidden_act: Activation,
        out_act: Activation,
        rng: &mut rand_chacha::ChaCha8Rng,
    ) -> Self {
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for w in 0..dims.len() - 1 {
            let act = if w + 2 == dims.len() { out_act } else { hidden_act };
            layers.push(DenseLayer::glorot(dims[w], dims[w + 1], act, rng));
        }
        Self { layers }
    }

    pub fn layers(&self) -> &[DenseLayer<F>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer<F>] {
        &mut self.layers
    }

    pub fn in_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.in_dim())
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_dim())
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights().len() + l.bias().len()).sum()
    }

    fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for l in &self.layers {
            for v in [l.in_dim() as u64, l.out_dim() as u64, l.activation().code() as u64] {
                h ^= v;
                h = h.wrapping_mul(0x0000_0100_0000_01B3);
            }
        }
        h
    }

    /// Forward pass for a single vector.
    pub fn forward(&self, x: &Array<F>) -> Result<Array<F>> {
        let y = self.forward_batch(x, 1)?;
        Ok(y.reshaped(&[self.out_dim()])?)
    }

    /// Forward pass for `rows` stacked inputs (row-major `[rows, in]`).
    pub fn forward_batch(&self, x: &Array<F>, rows: usize) -> Result<Array<F>> {
        self.check_batch_shape(x, rows)?;
        let mut cur = x.clone();
        for layer in &self.layers {
            let mut z = layer.preactivate_batch(&cur, rows);
            let act = layer.activation();
            for v in z.as_mut_slice() {
                *v = act.apply(*v);
            }
            cur = z;
        }
        if !cur.all_finite() {
            return Err(NnError::NonFinite("forward pass output"));
        }
        Ok(cur)
    }

    /// Forward pass that records the values backprop needs.
    pub fn forward_recording(&self, x: &Array<F>, rows: usize) -> Result<(Array<F>, Tape<F>)> {
        self.check_batch_shape(x, rows)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut preacts = Vec::with_capacity(self.layers.len());
        let mut cur = x.clone();
        for layer in &self.layers {
            let z = layer.preactivate_batch(&cur, rows);
            inputs.push(cur);
            let act = layer.activation();
            let mut y = z.clone();
            for v in y.as_mut_slice() {
                *v = act.apply(*v);
            }
            preacts.push(z);
            cur = y;
        }
        if !cur.all_finite() {
            return Err(NnError::NonFinite("forward pass output"));
        }
        Ok((
            cur,
            Tape {
                fingerprint: self.fingerprint(),
                rows,
                inputs,
                preacts,
            },
        ))
    }

    /// Exact chain-rule gradients for the recorded pass.
    ///
    /// `loss_grad` is `dL/dY [rows, out]`; weight and bias gradients are
    /// summed over the batch rows, matching the derivative of a loss that
    /// already folds any `1/rows` scaling into `loss_grad`.
    pub fn backward(&self, tape: Tape<F>, loss_grad: &Array<F>) -> Result<StackGradients<F>> {
        if tape.fingerprint != self.fingerprint() {
            return Err(NnError::TapeMismatch);
        }
        let rows = tape.rows;
        if loss_grad.shape() != [rows, self.out_dim()] && loss_grad.shape() != [self.out_dim()] {
            return Err(NnError::ShapeMismatch {
                context: "backward loss gradient",
                expected: vec![rows, self.out_dim()],
                got: loss_grad.shape().to_vec(),
            });
        }

        let n_layers = self.layers.len();
        let mut w_grads = vec![Array::zeros(&[0]); n_layers];
        let mut b_grads = vec![Array::zeros(&[0]); n_layers];
        let mut upstream = loss_grad.clone();

        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let (in_dim, out_dim) = (layer.in_dim(), layer.out_dim());
            let z = &tape.preacts[idx];
            let x = &tape.inputs[idx];
            let act = layer.activation();

            // dZ = dY ⊙ act'(Z)
            let mut dz = upstream;
            for (d, &zv) in dz.as_mut_slice().iter_mut().zip(z.as_slice()) {
                *d = *d * act.derivative(zv);
            }

            // dW = dZ^T · X  -> [out, in]
            let mut dw = Array::zeros(&[out_dim, in_dim]);
            unsafe {
                F::gemm(
                    out_dim,
                    rows,
                    in_dim,
                    F::ONE,
                    dz.as_slice().as_ptr(),
                    1,
                    out_dim as isize,
                    x.as_slice().as_ptr(),
                    in_dim as isize,
                    1,
                    F::ZERO,
                    dw.as_mut_slice().as_mut_ptr(),
                    in_dim as isize,
                    1,
                );
            }

            // db = column sums of dZ
            let mut db = Array::zeros(&[out_dim]);
            for row in dz.as_slice().chunks(out_dim) {
                for (b, &d) in db.as_mut_slice().iter_mut().zip(row) {
                    *b += d;
                }
            }

            // dX = dZ · W -> [rows, in]
            let mut dx = Array::zeros(&[rows, in_dim]);
            unsafe {
                F::gemm(
                    rows,
                    out_dim,
                    in_dim,
                    F::ONE,
                    dz.as_slice().as_ptr(),
                    out_dim as isize,
                    1,
                    layer.weights().as_slice().as_ptr(),
                    in_dim as isize,
                    1,
                    F::ZERO,
                    dx.as_mut_slice().as_mut_ptr(),
                    in_dim as isize,
                    1,
                );
            }

            w_grads[idx] = dw;
            b_grads[idx] = db;
            upstream = dx;
        }

        for g in w_grads.iter().chain(b_grads.iter()) {
            if !g.all_finite() {
                return Err(NnError::NonFinite("backward pass gradient"));
            }
        }
        Ok(StackGradients {
            weights: w_grads,
            biases: b_grads,
            input: upstream,
        })
    }

    fn check_batch_shape(&self, x: &Array<F>, rows: usize) -> Result<()> {
        if x.len() != rows * self.in_dim() {
            return Err(NnError::ShapeMismatch {
                context: "stack input",
                expected: vec![rows, self.in_dim()],
                got: x.shape().to_vec(),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn single_layer_squared_error_bias_gradient() {
        // Zero weights, squared-error loss sum((y_hat - y)^2): with y_hat = 0
        // the bias gradient is 2*(y_hat - y) = -2y.
        let layer = DenseLayer::<f64>::zeroed(3, 2, Activation::Identity);
        let stack = DenseStack::new(vec![layer]).unwrap();
        let x = Array::from_vec(&[1, 3], vec![0.5, -1.0, 2.0]).unwrap();
        let target = [1.5, -0.25];
        let (y, tape) = stack.forward_recording(&x, 1).unwrap();
        let loss_grad = Array::from_vec(
            &[1, 2],
            y.as_slice()
                .iter()
                .zip(&target)
                .map(|(&yh, &t)| 2.0 * (yh - t))
                .collect(),
        )
        .unwrap();
        let grads = stack.backward(tape, &loss_grad).unwrap();
        assert_eq!(grads.biases[0].as_slice(), &[-3.0, 0.5]);
    }

    #[test]
    fn tape_from_other_stack_is_rejected() {
        let mut rng = rng_from_seed(1);
        let a = DenseStack::<f64>::glorot(&[3, 2], Activation::Tanh, Activation::Identity, &mut rng);
        let b = DenseStack::<f64>::glorot(&[3, 4], Activation::Tanh, Activation::Identity, &mut rng);
        let x = Array::from_vec(&[1, 3], vec![0.1, 0.2, 0.3]).unwrap();
        let (_, tape) = a.forward_recording(&x, 1).unwrap();
        let g = Array::from_vec(&[1, 4], vec![1.0; 4]).unwrap();
        assert!(matches!(b.backward(tape, &g), Err(NnError::TapeMismatch)));
    }

    #[test]
    fn forward_batch_matches_per_row_forward() {
        let mut rng = rng_from_seed(9);
        let stack = DenseStack::<f32>::glorot(&[4, 5, 2], Activation::Relu, Activation::Identity, &mut rng);
        let rows: Vec<Vec<f32>> = (0..3)
            .map(|r| (0..4).map(|i| (r * 4 + i) as f32 * 0.17 - 1.0).collect())
            .collect();
        let flat: Vec<f32> = rows.iter().flatten().copied().collect();
        let batch = stack
            .forward_batch(&Array::from_vec(&[3, 4], flat).unwrap(), 3)
            .unwrap();
        for (r, row) in rows.iter().enumerate() {
            let single = stack.forward(&Array::vector(row.clone())).unwrap();
            assert_eq!(&batch.as_slice()[r * 2..(r + 1) * 2], single.as_slice());
        }
    }
}
