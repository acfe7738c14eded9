use super::Matrix;
use crate::error::{Error, Result};

fn check_symmetric(m: &Matrix) -> Result<()> {
    if m.rows() != m.cols() {
        return Err(Error::Argument(format!("expected a square matrix, got {}x{}", m.rows(), m.cols())));
    }
    let tol = 1e-9 * m.max_abs().max(1.0);
    if m.asymmetry() > tol {
        return Err(Error::Argument(format!("matrix is not symmetric (asymmetry {:.3e})", m.asymmetry())));
    }
    Ok(())
}

/// Eigenvalues (ascending) and eigenvectors (columns) of a symmetric matrix
/// by cyclic Jacobi rotations.
pub fn jacobi_eigen_sym(m: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    check_symmetric(m)?;
    let n = m.rows();
    let mut a = m.clone();
    a.symmetrize();
    let mut v = Matrix::identity(n);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[(i, j)] * a[(i, j)];
            }
        }
        let scale = a.frobenius_norm();
        if off.sqrt() <= 1e-15 * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        for k in 0..n {
            vectors[(k, col)] = v[(k, src)];
        }
    }
    Ok((values, vectors))
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue_sym(m: &Matrix) -> Result<f64> {
    let (values, _) = jacobi_eigen_sym(m)?;
    Ok(values.first().copied().unwrap_or(f64::NAN))
}

/// `log det` of a symmetric matrix via its eigenvalues; `-inf` when singular,
/// `NaN` when indefinite.
pub fn log_det_sym(m: &Matrix) -> Result<f64> {
    let (values, _) = jacobi_eigen_sym(m)?;
    Ok(values.iter().map(|v| v.ln()).sum())
}

/// Lower Cholesky factor; `None` unless the matrix is positive definite.
fn cholesky(m: &Matrix) -> Option<Matrix> {
    let n = m.rows();
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[(i, i)] = s.sqrt();
            } else {
                l[(i, j)] = s / l[(j, j)];
            }
        }
    }
    Some(l)
}

/// `log det` of a symmetric positive-definite matrix.
pub fn cholesky_log_det(m: &Matrix) -> Result<f64> {
    let l = cholesky(m).ok_or_else(|| Error::Domain("matrix is not positive definite".into()))?;
    Ok((0..m.rows()).map(|i| 2.0 * l[(i, i)].ln()).sum())
}

/// Solves `m x = b` for symmetric positive-definite `m`.
pub fn solve_spd(m: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = m.rows();
    if b.len() != n {
        return Err(Error::Argument("solve_spd dimension mismatch".into()));
    }
    let l = cholesky(m).ok_or_else(|| Error::Domain("matrix is not positive definite".into()))?;
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[(i, k)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l[(k, i)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    Ok(x)
}
