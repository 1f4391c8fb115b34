//! Adamax: the infinity-norm variant of Adam.
//!
//! Update rule, applied elementwise with step count `t` starting at 1:
//! `m_t = b1*m_{t-1} + (1-b1)*g_t`, `u_t = max(b2*u_{t-1}, |g_t|)`,
//! `theta -= alpha/(1-b1^t) * m_t/(u_t + eps)`.

use super::{Array, NnError, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamaxHyper<F: Scalar = f32> {
    pub alpha: F,
    pub beta1: F,
    pub beta2: F,
    pub epsilon: F,
}

impl<F: Scalar> Default for AdamaxHyper<F> {
    fn default() -> Self {
        Self {
            alpha: F::from_f64(0.002),
            beta1: F::from_f64(0.9),
            beta2: F::from_f64(0.999),
            epsilon: F::from_f64(1e-8),
        }
    }
}

impl<F: Scalar> AdamaxHyper<F> {
    pub fn with_alpha(alpha: f64) -> Self {
        Self {
            alpha: F::from_f64(alpha),
            ..Self::default()
        }
    }
}

/// Optimizer state for one parameter array.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamaxState<F: Scalar = f32> {
    step_count: u64,
    first_moment: Array<F>,
    infinity_norm: Array<F>,
    hyper: AdamaxHyper<F>,
}

impl<F: Scalar> AdamaxState<F> {
    pub fn new(param_shape: &[usize], hyper: AdamaxHyper<F>) -> Self {
        Self {
            step_count: 0,
            first_moment: Array::zeros(param_shape),
            infinity_norm: Array::zeros(param_shape),
            hyper,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn first_moment(&self) -> &Array<F> {
        &self.first_moment
    }

    pub fn infinity_norm(&self) -> &Array<F> {
        &self.infinity_norm
    }

    /// One elementwise update. Rejects non-finite gradients so a diverging
    /// training run aborts instead of poisoning the parameters.
    pub fn step(&mut self, params: &mut Array<F>, grads: &Array<F>) -> Result<()> {
        if params.shape() != grads.shape() || params.shape() != self.first_moment.shape() {
            return Err(NnError::ShapeMismatch {
                context: "adamax_step",
                expected: params.shape().to_vec(),
                got: grads.shape().to_vec(),
            });
        }
        if !grads.all_finite() {
            return Err(NnError::NonFinite("adamax gradient"));
        }
        self.step_count += 1;
        let h = self.hyper;
        let one_minus_b1 = F::ONE - h.beta1;
        // alpha / (1 - beta1^t)
        let bias_corr = F::ONE - F::from_f64(h.beta1.to_f64().powi(self.step_count as i32));
        let lr = h.alpha / bias_corr;

        let m = self.first_moment.as_mut_slice();
        let u = self.infinity_norm.as_mut_slice();
        let p = params.as_mut_slice();
        let g = grads.as_slice();
        for i in 0..g.len() {
            m[i] = h.beta1 * m[i] + one_minus_b1 * g[i];
            u[i] = (h.beta2 * u[i]).max(g[i].abs());
            p[i] = p[i] - lr * m[i] / (u[i] + h.epsilon);
        }
        Ok(())
    }
}

/// Functional form of the update: returns the new parameters and state.
pub fn adamax_step<F: Scalar>(
    mut params: Array<F>,
    grads: &Array<F>,
    mut state: AdamaxState<F>,
) -> Result<(Array<F>, AdamaxState<F>)> {
    state.step(&mut params, grads)?;
    Ok((params, state))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_state(hyper: AdamaxHyper<f64>) -> AdamaxState<f64> {
        AdamaxState::new(&[1], hyper)
    }

    #[test]
    fn hand_computed_first_step() {
        // alpha=0.002, b1=0.9, b2=0.999, eps=0, theta=1.0, g=0.5:
        // m=0.05, u=0.5, theta = 1.0 - (0.002/0.1)*(0.05/0.5) = 0.998
        let hyper = AdamaxHyper {
            alpha: 0.002,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 0.0,
        };
        let mut st = scalar_state(hyper);
        let mut theta = Array::vector(vec![1.0f64]);
        st.step(&mut theta, &Array::vector(vec![0.5])).unwrap();
        assert_eq!(st.step_count(), 1);
        assert!((st.first_moment()[0] - 0.05).abs() < 1e-15);
        assert!((st.infinity_norm()[0] - 0.5).abs() < 1e-15);
        assert!((theta[0] - 0.998).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut st = scalar_state(AdamaxHyper::default());
        let mut theta = Array::vector(vec![1.25f64]);
        st.step(&mut theta, &Array::vector(vec![0.0])).unwrap();
        assert_eq!(theta[0], 1.25);
        assert_eq!(st.infinity_norm()[0], 0.0);
        assert_eq!(st.step_count(), 1);
    }

    #[test]
    fn matches_independent_reference_over_two_steps() {
        // Reference written as plain scalar recurrences.
        let (alpha, b1, b2, eps) = (0.002f64, 0.9, 0.999, 1e-8);
        let g = 0.5;
        let mut theta_ref = 1.0;
        let (mut m, mut u) = (0.0f64, 0.0f64);
        for t in 1..=2u32 {
            m = b1 * m + (1.0 - b1) * g;
            u = (b2 * u).max(g.abs());
            theta_ref -= alpha / (1.0 - b1.powi(t as i32)) * m / (u + eps);
        }

        let mut st = scalar_state(AdamaxHyper {
            alpha,
            beta1: b1,
            beta2: b2,
            epsilon: eps,
        });
        let mut theta = Array::vector(vec![1.0f64]);
        st.step(&mut theta, &Array::vector(vec![g])).unwrap();
        st.step(&mut theta, &Array::vector(vec![g])).unwrap();
        assert!((theta[0] - theta_ref).abs() < 1e-15);
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let mut st = scalar_state(AdamaxHyper::default());
        let mut theta = Array::vector(vec![1.0f64]);
        let err = st.step(&mut theta, &Array::vector(vec![f64::NAN])).unwrap_err();
        assert!(matches!(err, NnError::NonFinite(_)));
        assert_eq!(st.step_count(), 0);
        assert_eq!(theta[0], 1.0);
    }

    #[test]
    fn infinity_norm_follows_max_rule() {
        let mut st = scalar_state(AdamaxHyper::default());
        let mut theta = Array::vector(vec![0.0f64]);
        st.step(&mut theta, &Array::vector(vec![2.0])).unwrap();
        assert_eq!(st.infinity_norm()[0], 2.0);
        // Small gradient: u decays by beta2, does not jump to |g|.
        st.step(&mut theta, &Array::vector(vec![0.001])).unwrap();
        assert_eq!(st.infinity_norm()[0], 2.0 * 0.999);
        // Large gradient: u jumps to |g|.
        st.step(&mut theta, &Array::vector(vec![-5.0])).unwrap();
        assert_eq!(st.infinity_norm()[0], 5.0);
    }
}
