//! Planar serial-chain forward kinematics.
//!
//! Body points are indexed `0..=η`: point 0 is the base (origin of joint 1),
//! point `m` is the far end of link `m`, and point `η` is the end-effector.
//! The stacked Jacobian has `2(η + 1) + 1` rows (x/y per point, then the
//! end-effector angle); the base rows are identically zero.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numerics::{cholesky_log_det, jacobi_eigen_sym, solve_spd, Matrix};

/// Regulariser added to `JᵀJ` in the volume measure unless configured.
pub const DEFAULT_EPS_REG: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct PlanarChain {
    link_lengths: Vec<f64>,
    base_position: [f64; 2],
    joint_limits: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BodyState {
    pub points: Vec<[f64; 2]>,
    pub ee_position: [f64; 2],
    pub ee_angle: f64,
}

impl PlanarChain {
    pub fn new(link_lengths: Vec<f64>) -> Result<Self> {
        let n = link_lengths.len();
        Self::with_base(link_lengths, [0.0, 0.0], vec![(-PI, PI); n])
    }

    pub fn with_base(link_lengths: Vec<f64>, base_position: [f64; 2], joint_limits: Vec<(f64, f64)>) -> Result<Self> {
        if link_lengths.is_empty() {
            return Err(Error::Argument("a chain needs at least one link".into()));
        }
        if let Some(l) = link_lengths.iter().find(|l| !(**l > 0.0) || !l.is_finite()) {
            return Err(Error::Argument(format!("link lengths must be positive, got {l}")));
        }
        if joint_limits.len() != link_lengths.len() {
            return Err(Error::Argument("one joint limit pair per link is required".into()));
        }
        if let Some((lo, hi)) = joint_limits.iter().find(|(lo, hi)| !(lo < hi)) {
            return Err(Error::Argument(format!("joint limit [{lo}, {hi}] is empty")));
        }
        if !base_position.iter().all(|v| v.is_finite()) {
            return Err(Error::Argument("base position must be finite".into()));
        }
        Ok(Self { link_lengths, base_position, joint_limits })
    }

    pub fn link_lengths(&self) -> &[f64] {
        &self.link_lengths
    }

    pub fn base_position(&self) -> [f64; 2] {
        self.base_position
    }

    pub fn joint_limits(&self) -> &[(f64, f64)] {
        &self.joint_limits
    }

    /// Number of joints `η`.
    pub fn dof(&self) -> usize {
        self.link_lengths.len()
    }

    /// Number of body points `M = η + 1`.
    pub fn num_points(&self) -> usize {
        self.dof() + 1
    }

    /// Rows of the stacked Jacobian.
    pub fn jacobian_rows(&self) -> usize {
        2 * self.num_points() + 1
    }

    pub fn reach(&self) -> f64 {
        self.link_lengths.iter().sum()
    }

    pub fn within_limits(&self, theta: &[f64]) -> bool {
        theta.len() == self.dof() && theta.iter().zip(&self.joint_limits).all(|(t, (lo, hi))| *lo <= *t && *t <= *hi)
    }

    fn check(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.dof() {
            return Err(Error::Argument(format!("expected {} joint angles, got {}", self.dof(), theta.len())));
        }
        Ok(())
    }

    /// Cumulative link angles `Θ_i`.
    fn absolute_angles(&self, theta: &[f64]) -> Vec<f64> {
        let mut acc = 0.0;
        theta.iter().map(|t| {
            acc += t;
            acc
        }).collect()
    }

    pub fn fk_points(&self, theta: &[f64]) -> Result<BodyState> {
        self.check(theta)?;
        let angles = self.absolute_angles(theta);
        let mut points = Vec::with_capacity(self.num_points());
        let mut p = self.base_position;
        points.push(p);
        for (l, a) in self.link_lengths.iter().zip(&angles) {
            p = [p[0] + l * a.cos(), p[1] + l * a.sin()];
            points.push(p);
        }
        Ok(BodyState { ee_position: p, ee_angle: *angles.last().unwrap_or(&0.0), points })
    }

    /// Stacked analytic Jacobian, `(2M + 1) × η`.
    pub fn fk_jacobian(&self, theta: &[f64]) -> Result<Matrix> {
        self.check(theta)?;
        let n = self.dof();
        let angles = self.absolute_angles(theta);
        let mut jac = Matrix::zeros(self.jacobian_rows(), n);
        let perp: Vec<[f64; 2]> =
            self.link_lengths.iter().zip(&angles).map(|(l, a)| [-l * a.sin(), l * a.cos()]).collect();
        for m in 1..=n {
            for j in 0..m {
                let (mut x, mut y) = (0.0, 0.0);
                for v in &perp[j..m] {
                    x += v[0];
                    y += v[1];
                }
                jac[(2 * m, j)] = x;
                jac[(2 * m + 1, j)] = y;
            }
        }
        let last = jac.rows() - 1;
        for j in 0..n {
            jac[(last, j)] = 1.0;
        }
        Ok(jac)
    }

    /// Position-only Gram matrix `J_pᵀ J_p + ε I` (angle row excluded).
    fn position_gram(&self, jac: &Matrix, eps_reg: f64) -> Matrix {
        let n = self.dof();
        let mut g = Matrix::zeros(n, n);
        for r in 0..jac.rows() - 1 {
            let row = jac.row(r);
            for a in 0..n {
                for b in 0..n {
                    g[(a, b)] += row[a] * row[b];
                }
            }
        }
        for a in 0..n {
            g[(a, a)] += eps_reg;
        }
        g
    }

    /// `√det(J_pᵀ J_p + ε I)` over the positional rows of the stacked Jacobian.
    pub fn volume_measure(&self, theta: &[f64], eps_reg: f64) -> Result<f64> {
        if !(eps_reg >= 0.0) {
            return Err(Error::Argument(format!("eps_reg must be >= 0, got {eps_reg}")));
        }
        let jac = self.fk_jacobian(theta)?;
        let g = self.position_gram(&jac, eps_reg);
        let (values, _) = jacobi_eigen_sym(&g)?;
        Ok(values.iter().map(|v| v.max(0.0)).product::<f64>().sqrt())
    }

    /// `log V` and its gradient with respect to `θ`, via the analytic second
    /// derivatives of the body-point positions. Requires `eps_reg > 0` or a
    /// non-singular configuration.
    pub fn log_volume_grad(&self, theta: &[f64], eps_reg: f64) -> Result<(f64, Vec<f64>)> {
        let n = self.dof();
        let jac = self.fk_jacobian(theta)?;
        let g = self.position_gram(&jac, eps_reg);
        let log_det = cholesky_log_det(&g)
            .map_err(|_| Error::Domain(format!("singular kinematic Gram matrix at θ = {theta:?}")))?;
        let mut ginv = Matrix::zeros(n, n);
        for c in 0..n {
            let mut e = vec![0.0; n];
            e[c] = 1.0;
            for (r, v) in solve_spd(&g, &e)?.into_iter().enumerate() {
                ginv[(r, c)] = v;
            }
        }
        let angles = self.absolute_angles(theta);
        let par: Vec<[f64; 2]> =
            self.link_lengths.iter().zip(&angles).map(|(l, a)| [-l * a.cos(), -l * a.sin()]).collect();
        let mut grad = vec![0.0; n];
        // d log det G / dθ_k = 2 tr(G⁻¹ Jᵀ ∂_k J)
        for (k, gk) in grad.iter_mut().enumerate() {
            let mut dj = Matrix::zeros(jac.rows() - 1, n);
            for m in 1..=n {
                for j in 0..m {
                    let start = j.max(k);
                    let (mut x, mut y) = (0.0, 0.0);
                    for v in par.iter().take(m).skip(start) {
                        x += v[0];
                        y += v[1];
                    }
                    dj[(2 * m, j)] = x;
                    dj[(2 * m + 1, j)] = y;
                }
            }
            let mut acc = 0.0;
            for a in 0..n {
                for b in 0..n {
                    let mut jt_dj = 0.0;
                    for r in 0..dj.rows() {
                        jt_dj += jac[(r, b)] * dj[(r, a)];
                    }
                    acc += ginv[(a, b)] * jt_dj;
                }
            }
            *gk = acc;
        }
        Ok((0.5 * log_det, grad))
    }
}
