use super::Matrix;
use crate::error::{Error, Result};

pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Central finite-difference Jacobian of `f` at `x`:
/// column `j` is `(f(x + h e_j) - f(x - h e_j)) / 2h`.
pub fn fd_jacobian<F>(f: F, x: &[f64], h: f64) -> Result<Matrix>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    if !(h > 0.0) {
        return Err(Error::Argument(format!("finite-difference step must be > 0, got {h}")));
    }
    let n = x.len();
    let mut probe = x.to_vec();
    let mut jac: Option<Matrix> = None;
    for j in 0..n {
        probe[j] = x[j] + h;
        let plus = f(&probe);
        probe[j] = x[j] - h;
        let minus = f(&probe);
        probe[j] = x[j];
        if plus.len() != minus.len() {
            return Err(Error::Argument("function output length changed between probes".into()));
        }
        let m = jac.get_or_insert_with(|| Matrix::zeros(plus.len(), n));
        for (i, (p, q)) in plus.iter().zip(&minus).enumerate() {
            let v = (p - q) / (2.0 * h);
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("finite difference column {j}, output {i}")));
            }
            m[(i, j)] = v;
        }
    }
    match jac {
        Some(m) => Ok(m),
        None => Ok(Matrix::zeros(f(x).len(), 0)),
    }
}
