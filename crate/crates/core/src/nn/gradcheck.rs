//! Central finite differences, the independent oracle for every analytic
//! gradient in this crate.

use super::{Array, NnError, Result, Scalar};

/// Central-difference gradient `(f(x+eps*e_i) - f(x-eps*e_i)) / (2*eps)`.
///
/// `f` must be total and finite near `x`; a non-finite evaluation aborts.
pub fn finite_difference_grad<F: Scalar>(
    mut f: impl FnMut(&Array<F>) -> F,
    x: &Array<F>,
    eps: f64,
) -> Result<Array<F>> {
    if !(eps > 0.0) {
        return Err(NnError::BadEpsilon(eps));
    }
    let eps_f = F::from_f64(eps);
    let two_eps = F::from_f64(2.0 * eps);
    let mut probe = x.clone();
    let mut grad = Array::zeros(x.shape());
    for i in 0..x.len() {
        let orig = probe[i];
        probe[i] = orig + eps_f;
        let plus = f(&probe);
        probe[i] = orig - eps_f;
        let minus = f(&probe);
        probe[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(NnError::NonFinite("finite-difference evaluation"));
        }
        grad[i] = (plus - minus) / two_eps;
    }
    Ok(grad)
}
