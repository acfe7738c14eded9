use crate::error::{Error, Result};
use crate::numerics::{median, sigmoid, softplus, sq_dist, Matrix};

/// Kernels whose squared scaled distance exceeds this contribute below
/// 2e-22 and are skipped.
const KERNEL_CUTOFF: f64 = 50.0;

/// Radial basis network `out(z) = W φ(z) + floor` with
/// `φ_k(z) = exp(-|z - c_k|² / 2λ²)`.
///
/// `W = softplus(raw)` is nonnegative, so every output is bounded below by
/// its floor and decays to it away from the centers. Centers and bandwidth
/// are fixed at construction.
#[derive(Clone, Debug, PartialEq)]
pub struct RbfNet {
    centers: Vec<Vec<f64>>,
    bandwidth: f64,
    raw_weights: Matrix,
    weights: Matrix,
    floor: Vec<f64>,
}

impl RbfNet {
    pub fn new(centers: Vec<Vec<f64>>, bandwidth: f64, raw_weights: Matrix, floor: Vec<f64>) -> Result<Self> {
        if !(bandwidth > 0.0) || !bandwidth.is_finite() {
            return Err(Error::Argument(format!("RBF bandwidth must be > 0, got {bandwidth}")));
        }
        if centers.is_empty() {
            return Err(Error::Argument("RBF network needs at least one center".into()));
        }
        let dim = centers[0].len();
        if centers.iter().any(|c| c.len() != dim) {
            return Err(Error::Argument("RBF centers have inconsistent dimensions".into()));
        }
        if raw_weights.cols() != centers.len() || raw_weights.rows() != floor.len() {
            return Err(Error::Argument(format!(
                "RBF weight shape {:?} does not match {} outputs x {} centers",
                raw_weights.shape(),
                floor.len(),
                centers.len()
            )));
        }
        if floor.iter().any(|&f| !(f > 0.0)) {
            return Err(Error::Argument("RBF floor entries must be > 0".into()));
        }
        let mut net = Self { centers, bandwidth, weights: raw_weights.clone(), raw_weights, floor };
        net.sync_weights();
        Ok(net)
    }

    /// Every output/kernel weight set to `weight` (> 0).
    pub fn with_uniform_weights(centers: Vec<Vec<f64>>, bandwidth: f64, weight: &[f64], floor: Vec<f64>) -> Result<Self> {
        if weight.len() != floor.len() {
            return Err(Error::Argument("one initial weight per output is required".into()));
        }
        let k = centers.len();
        let mut raw = Matrix::zeros(floor.len(), k);
        for (j, &w) in weight.iter().enumerate() {
            if !(w > 0.0) {
                return Err(Error::Argument("initial RBF weights must be > 0".into()));
            }
            let r = crate::numerics::softplus_inv(w);
            raw.row_mut(j).iter_mut().for_each(|v| *v = r);
        }
        Self::new(centers, bandwidth, raw, floor)
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn floor(&self) -> &[f64] {
        &self.floor
    }

    pub fn raw_weights(&self) -> &Matrix {
        &self.raw_weights
    }

    /// Effective nonnegative weights `softplus(raw)`.
    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn input_dim(&self) -> usize {
        self.centers[0].len()
    }

    pub fn output_dim(&self) -> usize {
        self.floor.len()
    }

    /// Trainable parameters; call [`RbfNet::sync_weights`] after mutating.
    pub fn raw_weights_mut(&mut self) -> &mut [f64] {
        self.raw_weights.as_mut_slice()
    }

    pub fn sync_weights(&mut self) {
        for (w, &r) in self.weights.as_mut_slice().iter_mut().zip(self.raw_weights.as_slice()) {
            *w = softplus(r);
        }
    }

    /// Sets every effective weight to zero-limit (`raw = -inf` equivalent),
    /// leaving only the floor.
    pub fn zero_weights(&mut self) {
        self.raw_weights.as_mut_slice().iter_mut().for_each(|v| *v = -800.0);
        self.sync_weights();
        self.weights.as_mut_slice().iter_mut().for_each(|v| *v = 0.0);
    }

    fn check_input(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.input_dim() {
            return Err(Error::Argument(format!(
                "RBF network expects input of dimension {}, got {}",
                self.input_dim(),
                z.len()
            )));
        }
        Ok(())
    }

    /// Kernel activations `φ_k(z)`.
    pub fn kernels(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check_input(z)?;
        let inv = 1.0 / (2.0 * self.bandwidth * self.bandwidth);
        Ok(self
            .centers
            .iter()
            .map(|c| {
                let e = sq_dist(z, c) * inv;
                if e > KERNEL_CUTOFF {
                    0.0
                } else {
                    (-e).exp()
                }
            })
            .collect())
    }

    pub fn forward(&self, z: &[f64]) -> Result<Vec<f64>> {
        let phi = self.kernels(z)?;
        Ok(self.forward_from_kernels(&phi))
    }

    pub fn forward_from_kernels(&self, phi: &[f64]) -> Vec<f64> {
        let mut out = self.floor.clone();
        for (j, o) in out.iter_mut().enumerate() {
            let row = self.weights.row(j);
            *o += phi.iter().zip(row).filter(|(p, _)| **p != 0.0).map(|(p, w)| p * w).sum::<f64>();
        }
        out
    }

    /// `∂out/∂z`; row `j` is `Σ_k W_jk φ_k(z) (c_k - z)^T / λ²`.
    pub fn jacobian(&self, z: &[f64]) -> Result<Matrix> {
        let phi = self.kernels(z)?;
        Ok(self.jacobian_from_kernels(z, &phi))
    }

    pub fn jacobian_from_kernels(&self, z: &[f64], phi: &[f64]) -> Matrix {
        let d = z.len();
        let inv_l2 = 1.0 / (self.bandwidth * self.bandwidth);
        let mut jac = Matrix::zeros(self.output_dim(), d);
        for (k, (&p, c)) in phi.iter().zip(&self.centers).enumerate() {
            if p == 0.0 {
                continue;
            }
            for j in 0..self.output_dim() {
                let s = self.weights[(j, k)] * p * inv_l2;
                let row = jac.row_mut(j);
                for i in 0..d {
                    row[i] += s * (c[i] - z[i]);
                }
            }
        }
        jac
    }

    /// Accumulates `d loss / d raw` into `grad_raw` (row-major, outputs x
    /// centers) and returns `d loss / d z`.
    pub fn backward(&self, z: &[f64], phi: &[f64], grad_out: &[f64], grad_raw: &mut [f64]) -> Vec<f64> {
        let k_count = self.centers.len();
        let inv_l2 = 1.0 / (self.bandwidth * self.bandwidth);
        let mut grad_z = vec![0.0; z.len()];
        for (k, (&p, c)) in phi.iter().zip(&self.centers).enumerate() {
            if p == 0.0 {
                continue;
            }
            let mut s = 0.0;
            for (j, &g) in grad_out.iter().enumerate() {
                let idx = j * k_count + k;
                grad_raw[idx] += g * p * sigmoid(self.raw_weights.as_slice()[idx]);
                s += g * self.weights[(j, k)];
            }
            let s = s * p * inv_l2;
            for i in 0..z.len() {
                grad_z[i] += s * (c[i] - z[i]);
            }
        }
        grad_z
    }
}

/// `scale x` median nearest-neighbour distance between centers.
pub fn bandwidth_from_centers(centers: &[Vec<f64>], scale: f64) -> Result<f64> {
    if centers.len() < 2 {
        return Err(Error::Argument("bandwidth heuristic needs at least two centers".into()));
    }
    let mut nn: Vec<f64> = centers
        .iter()
        .enumerate()
        .map(|(i, c)| {
            centers
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, o)| sq_dist(c, o))
                .fold(f64::INFINITY, f64::min)
                .sqrt()
        })
        .collect();
    let m = median(&mut nn);
    if !(m > 0.0) {
        return Err(Error::Argument("RBF centers coincide; cannot derive a bandwidth".into()));
    }
    Ok(scale * m)
}
