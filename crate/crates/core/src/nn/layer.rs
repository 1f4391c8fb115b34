//! Dense layers: `y = activation(W x + b)`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Array, NnError, Result, Scalar};

/// Element-wise activation; total on all finite inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
}

impl Activation {
    pub fn apply<F: Scalar>(self, z: F) -> F {
        match self {
            Activation::Identity => z,
            Activation::Relu => z.max(F::ZERO),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative as a function of the pre-activation `z`.
    /// For relu the subgradient at exactly 0 is taken as 0.
    pub fn derivative<F: Scalar>(self, z: F) -> F {
        match self {
            Activation::Identity => F::ONE,
            Activation::Relu => {
                if z > F::ZERO {
                    F::ONE
                } else {
                    F::ZERO
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                F::ONE - t * t
            }
        }
    }

    /// Stable numeric code used by the checkpoint container.
    pub fn code(self) -> u32 {
        match self {
            Activation::Identity => 0,
            Activation::Relu => 1,
            Activation::Tanh => 2,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(Activation::Identity),
            1 => Some(Activation::Relu),
            2 => Some(Activation::Tanh),
            _ => None,
        }
    }
}

/// A dense layer holding `weights [out, in]`, `bias [out]`, and an activation.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer<F: Scalar = f32> {
    weights: Array<F>,
    bias: Array<F>,
    activation: Activation,
}

impl<F: Scalar> DenseLayer<F> {
    pub fn new(weights: Array<F>, bias: Array<F>, activation: Activation) -> Result<Self> {
        if weights.shape().len() != 2 {
            return Err(NnError::ShapeMismatch {
                context: "DenseLayer weights rank",
                expected: vec![2],
                got: weights.shape().to_vec(),
            });
        }
        if bias.shape() != [weights.shape()[0]] {
            return Err(NnError::ShapeMismatch {
                context: "DenseLayer bias",
                expected: vec![weights.shape()[0]],
                got: bias.shape().to_vec(),
            });
        }
        Ok(Self {
            weights,
            bias,
            activation,
        })
    }

    pub fn zeroed(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self {
            weights: Array::zeros(&[out_dim, in_dim]),
            bias: Array::zeros(&[out_dim]),
            activation,
        }
    }

    /// Glorot-uniform weights in `±sqrt(6/(fan_in+fan_out))`, zero bias.
    pub fn glorot(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut ChaCha8Rng) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let data: Vec<F> = (0..in_dim * out_dim)
            .map(|_| F::from_f64(rng.gen_range(-limit..limit)))
            .collect();
        Self {
            weights: Array::from_vec(&[out_dim, in_dim], data).expect("sized above"),
            bias: Array::zeros(&[out_dim]),
            activation,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn out_dim(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &Array<F> {
        &self.weights
    }

    pub fn bias(&self) -> &Array<F> {
        &self.bias
    }

    pub fn weights_mut(&mut self) -> &mut Array<F> {
        &mut self.weights
    }

    pub fn bias_mut(&mut self) -> &mut Array<F> {
        &mut self.bias
    }

    /// Pre-activation `Z = X W^T + b` for a batch `X [rows, in]`.
    pub(crate) fn preactivate_batch(&self, x: &Array<F>, rows: usize) -> Array<F> {
        let (in_dim, out_dim) = (self.in_dim(), self.out_dim());
        let mut z = Array::zeros(&[rows, out_dim]);
        unsafe {
            F::gemm(
                rows,
                in_dim,
                out_dim,
                F::ONE,
                x.as_slice().as_ptr(),
                in_dim as isize,
                1,
                self.weights.as_slice().as_ptr(),
                1,
                in_dim as isize,
                F::ZERO,
                z.as_mut_slice().as_mut_ptr(),
                out_dim as isize,
                1,
            );
        }
        let bias = self.bias.as_slice();
        for row in z.as_mut_slice().chunks_mut(out_dim) {
            for (v, b) in row.iter_mut().zip(bias) {
                *v += *b;
            }
        }
        z
    }

    /// Forward pass for a single vector `x [in] -> y [out]`.
    pub fn forward(&self, x: &Array<F>) -> Result<Array<F>> {
        if x.shape() != [self.in_dim()] {
            return Err(NnError::ShapeMismatch {
                context: "dense_forward input",
                expected: vec![self.in_dim()],
                got: x.shape().to_vec(),
            });
        }
        let z = self.preactivate_batch(x, 1);
        let act = self.activation;
        Ok(Array::from_vec(
            &[self.out_dim()],
            z.as_slice().iter().map(|&v| act.apply(v)).collect(),
        )
        .expect("sized above"))
    }
}

/// Free-function form of the single-vector dense forward pass.
pub fn dense_forward<F: Scalar>(layer: &DenseLayer<F>, x: &Array<F>) -> Result<Array<F>> {
    layer.forward(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layer(w: Vec<f32>, shape: [usize; 2], b: Vec<f32>, act: Activation) -> DenseLayer<f32> {
        DenseLayer::new(
            Array::from_vec(&[shape[0], shape[1]], w).unwrap(),
            Array::vector(b),
            act,
        )
        .unwrap()
    }

    #[test]
    fn identity_weights_pass_input_through() {
        let l = layer(
            vec![1.0, 0.0, 0.0, 1.0],
            [2, 2],
            vec![0.0, 0.0],
            Activation::Identity,
        );
        let y = l.forward(&Array::vector(vec![5.0, -3.0])).unwrap();
        assert_eq!(y.as_slice(), &[5.0, -3.0]);
    }

    #[test]
    fn hand_computed_affine() {
        // [[1,2],[3,4]] * [1,1] = [3,7]
        let l = layer(
            vec![1.0, 2.0, 3.0, 4.0],
            [2, 2],
            vec![0.0, 0.0],
            Activation::Identity,
        );
        let y = l.forward(&Array::vector(vec![1.0, 1.0])).unwrap();
        assert_eq!(y.as_slice(), &[3.0, 7.0]);
    }

    #[test]
    fn relu_clamps_negatives() {
        // Identity weights so the pre-activation is [-1, 2].
        let l = layer(
            vec![1.0, 0.0, 0.0, 1.0],
            [2, 2],
            vec![0.0, 0.0],
            Activation::Relu,
        );
        let y = l.forward(&Array::vector(vec![-1.0, 2.0])).unwrap();
        assert_eq!(y.as_slice(), &[0.0, 2.0]);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let l = layer(vec![1.0, 2.0], [1, 2], vec![0.0], Activation::Identity);
        let err = l.forward(&Array::vector(vec![1.0, 2.0, 3.0])).unwrap_err();
        assert!(matches!(err, NnError::ShapeMismatch { .. }));
    }

    #[test]
    fn forward_is_pure() {
        let mut rng = crate::rng::rng_from_seed(5);
        let l = DenseLayer::<f32>::glorot(8, 4, Activation::Tanh, &mut rng);
        let x = Array::vector((0..8).map(|i| i as f32 * 0.3 - 1.0).collect());
        let y1 = l.forward(&x).unwrap();
        let y2 = l.forward(&x).unwrap();
        assert_eq!(y1.as_slice(), y2.as_slice());
    }
}
