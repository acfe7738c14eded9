//! Variational autoencoders over demonstrations: a task-space model on
//! `R^Dp x S^(D-1)` and a joint-space model with a forward-kinematics layer.

mod io;
mod joint;
mod task;
mod train;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};

pub use io::{load, load_from_str, save, save_to_string, FORMAT_VERSION};
pub use joint::{DecodedJoint, JointGrad, JointVae};
pub use task::{DecodedTask, TaskGrad, TaskVae};
pub use train::{train, EpochLoss, TrainReport};

use crate::error::{Error, Result};
use crate::kinematics::DEFAULT_EPS_REG;
use crate::nets::{Activation, Mlp, MlpTrace, RbfNet};
use crate::numerics::Rng;

/// Bounds on the encoder standard deviation.
pub const SIGMA_Z_MIN: f64 = 1e-4;
pub const SIGMA_Z_MAX: f64 = 10.0;

/// Architecture and uncertainty settings shared by both model kinds.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub latent_dim: usize,
    pub hidden: Vec<usize>,
    /// Number of RBF kernels placed by k-means over the phase-1 codes.
    pub rbf_k: usize,
    /// Bandwidth as a multiple of the median nearest-neighbour center gap.
    pub rbf_bandwidth_scale: f64,
    /// Fixed decoder standard deviation used during phase 1.
    pub sigma_init: f64,
    /// Fixed concentration used during phase 1.
    pub kappa_init: f64,
    /// Standard deviation reached far from the data (inverse precision floor).
    pub sigma_max: f64,
    /// Concentration reached far from the data.
    pub kappa_min: f64,
    pub eps_reg: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            latent_dim: 2,
            hidden: vec![200, 100],
            rbf_k: 500,
            rbf_bandwidth_scale: 6.0,
            sigma_init: 0.05,
            kappa_init: 50.0,
            sigma_max: 10.0,
            kappa_min: 0.1,
            eps_reg: DEFAULT_EPS_REG,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 {
            return Err(Error::Argument("latent_dim must be positive".into()));
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return Err(Error::Argument("hidden layer sizes must be positive".into()));
        }
        if self.rbf_k < 2 {
            return Err(Error::Argument("rbf_k must be at least 2".into()));
        }
        for (name, v) in [
            ("rbf_bandwidth_scale", self.rbf_bandwidth_scale),
            ("sigma_init", self.sigma_init),
            ("kappa_init", self.kappa_init),
            ("sigma_max", self.sigma_max),
            ("kappa_min", self.kappa_min),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Argument(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.eps_reg >= 0.0) {
            return Err(Error::Argument(format!("eps_reg must be >= 0, got {}", self.eps_reg)));
        }
        Ok(())
    }
}

/// Decoder evaluation counter. Clones start from the current count and the
/// counter never takes part in model equality.
#[derive(Debug, Default)]
pub(crate) struct DecodeCounter(AtomicU64);

impl DecodeCounter {
    pub(crate) fn bump(&self) {
        self.0.fetch_add(1, Ordering::Relaxed);
    }

    pub(crate) fn get(&self) -> u64 {
        self.0.load(Ordering::Relaxed)
    }
}

impl Clone for DecodeCounter {
    fn clone(&self) -> Self {
        Self(AtomicU64::new(self.get()))
    }
}

impl PartialEq for DecodeCounter {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

/// Either trained model kind.
#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Task(TaskVae),
    Joint(JointVae),
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::Task(_) => "task",
            Model::Joint(_) => "joint",
        }
    }

    pub fn latent_dim(&self) -> usize {
        match self {
            Model::Task(m) => m.latent_dim(),
            Model::Joint(m) => m.latent_dim(),
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Model::Task(m) => m.input_dim(),
            Model::Joint(m) => m.input_dim(),
        }
    }

    pub fn encode(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        match self {
            Model::Task(m) => m.encode(x),
            Model::Joint(m) => m.encode(x),
        }
    }

    pub fn decode_calls(&self) -> u64 {
        match self {
            Model::Task(m) => m.decode_calls(),
            Model::Joint(m) => m.decode_calls(),
        }
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        match self {
            Model::Task(m) => &m.metadata,
            Model::Joint(m) => &m.metadata,
        }
    }
}

/// `z = μ + ε ⊙ σ` with `ε ~ N(0, I)`.
pub fn reparameterize(mu: &[f64], sigma: &[f64], rng: &mut Rng) -> Vec<f64> {
    mu.iter().zip(sigma).map(|(m, s)| m + s * rng.normal()).collect()
}

pub(crate) fn new_encoder(input: usize, cfg: &ModelConfig, rng: &mut Rng) -> Result<Mlp> {
    let mut sizes = vec![input];
    sizes.extend(&cfg.hidden);
    sizes.push(2 * cfg.latent_dim);
    Mlp::new(&sizes, Activation::Identity, rng)
}

pub(crate) fn new_decoder(output: usize, cfg: &ModelConfig, rng: &mut Rng) -> Result<Mlp> {
    let mut sizes = vec![cfg.latent_dim];
    sizes.extend(&cfg.hidden);
    sizes.push(output);
    Mlp::new(&sizes, Activation::Identity, rng)
}

/// Single-kernel network with zero weights: a constant `floor` everywhere.
pub(crate) fn constant_rbf(latent_dim: usize, floor: Vec<f64>) -> Result<RbfNet> {
    let k = floor.len();
    let mut net = RbfNet::new(vec![vec![0.0; latent_dim]], 1.0, crate::numerics::Matrix::zeros(k, 1), floor)?;
    net.zero_weights();
    Ok(net)
}

/// Encoder heads recorded for back-propagation.
pub(crate) struct EncoderOut {
    pub trace: MlpTrace,
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    /// Whether each log-σ head lies inside the clamp (gradient passes).
    pub active: Vec<bool>,
}

pub(crate) fn run_encoder(net: &Mlp, x: &[f64], latent_dim: usize) -> Result<EncoderOut> {
    let trace = net.forward_trace(x)?;
    let out = trace.output();
    let mu = out[..latent_dim].to_vec();
    let (lo, hi) = (SIGMA_Z_MIN.ln(), SIGMA_Z_MAX.ln());
    let mut sigma = Vec::with_capacity(latent_dim);
    let mut active = Vec::with_capacity(latent_dim);
    for &s in &out[latent_dim..] {
        active.push(s > lo && s < hi);
        sigma.push(s.clamp(lo, hi).exp());
    }
    Ok(EncoderOut { trace, mu, sigma, active })
}

/// Gradient of the loss with respect to the encoder output, given
/// `d loss / d z`, the noise and the KL weight.
pub(crate) fn encoder_output_grad(enc: &EncoderOut, grad_z: &[f64], eps: &[f64], kl_weight: f64) -> Vec<f64> {
    let d = enc.mu.len();
    let mut g = vec![0.0; 2 * d];
    for i in 0..d {
        g[i] = grad_z[i] + kl_weight * enc.mu[i];
        if enc.active[i] {
            let s = enc.sigma[i];
            let d_sigma = grad_z[i] * eps[i] + kl_weight * (s - 1.0 / s);
            g[d + i] = d_sigma * s;
        }
    }
    g
}

pub(crate) fn check_term(name: &str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Training(format!("non-finite {name} term ({value})")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reparameterize_zero_sigma() {
        let mut rng = Rng::new(1);
        assert_eq!(reparameterize(&[0.3, -1.0], &[0.0, 0.0], &mut rng), vec![0.3, -1.0]);
    }

    #[test]
    fn reparameterize_moments() {
        let mut rng = Rng::new(5);
        let (mu, sigma) = ([0.5, -2.0], [0.3, 1.7]);
        let n = 100_000;
        let mut sum = [0.0; 2];
        let mut sq = [0.0; 2];
        for _ in 0..n {
            let z = reparameterize(&mu, &sigma, &mut rng);
            for i in 0..2 {
                sum[i] += z[i];
                sq[i] += z[i] * z[i];
            }
        }
        for i in 0..2 {
            let mean = sum[i] / n as f64;
            let std = (sq[i] / n as f64 - mean * mean).sqrt();
            assert!((mean - mu[i]).abs() < 0.01 + 0.01 * sigma[i], "mean {mean}");
            assert!((std / sigma[i] - 1.0).abs() < 0.02, "std {std}");
        }
    }

    #[test]
    fn config_validation() {
        assert!(ModelConfig::default().validate().is_ok());
        assert!(ModelConfig { latent_dim: 0, ..ModelConfig::default() }.validate().is_err());
        assert!(ModelConfig { sigma_max: 0.0, ..ModelConfig::default() }.validate().is_err());
    }
}
