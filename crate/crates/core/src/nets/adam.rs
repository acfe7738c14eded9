use crate::error::{Error, Result};

/// Optimiser and schedule settings shared by both VAE flavours.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Epochs of the joint phase (all networks).
    pub epochs: usize,
    /// Epochs of the warm-up phase (encoder and decoder mean only, fixed
    /// decoder uncertainty).
    pub pretrain_epochs: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub kl_warmup_epochs: usize,
    /// Weight of the position log-likelihood.
    pub beta_position: f64,
    /// Weight of the orientation log-likelihood.
    pub beta_orientation: f64,
    /// Learning-rate multiplier applied to RBF weights.
    pub rbf_lr_scale: f64,
    /// Score orientations with a single (signed) vMF during the warm-up
    /// phase so that `q` and `-q` are pushed to separate latent regions.
    pub signed_warmup: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 64,
            epochs: 150,
            pretrain_epochs: 150,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            kl_warmup_epochs: 50,
            beta_position: 1.0,
            beta_orientation: 1.0,
            rbf_lr_scale: 10.0,
            signed_warmup: true,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("learning_rate", self.learning_rate),
            ("adam_eps", self.adam_eps),
            ("beta_position", self.beta_position),
            ("beta_orientation", self.beta_orientation),
            ("rbf_lr_scale", self.rbf_lr_scale),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Argument(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::Argument(format!("{name} must lie in [0, 1), got {v}")));
            }
        }
        if self.batch_size == 0 {
            return Err(Error::Argument("batch_size must be positive".into()));
        }
        Ok(())
    }

    /// KL weight at `epoch` (0-based): linear ramp from 0 to 1 over
    /// `kl_warmup_epochs`.
    pub fn kl_weight(&self, epoch: usize) -> f64 {
        if self.kl_warmup_epochs == 0 {
            1.0
        } else {
            (epoch as f64 / self.kl_warmup_epochs as f64).min(1.0)
        }
    }
}

/// First and second moment estimates, one buffer per parameter tensor.
#[derive(Clone, Debug, Default)]
pub struct AdamState {
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn step(&self) -> u64 {
        self.step
    }
}

/// One Adam step with bias correction over a list of parameter tensors.
///
/// `lr_scale[i]` multiplies the learning rate of tensor `i`. Gradients are
/// checked for finiteness before any parameter is touched.
pub fn adam_update(
    params: &mut [&mut [f64]],
    grads: &[&[f64]],
    names: &[String],
    lr_scale: &[f64],
    state: &mut AdamState,
    cfg: &TrainConfig,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != names.len() || params.len() != lr_scale.len() {
        return Err(Error::Argument("parameter, gradient and name lists differ in length".into()));
    }
    for ((p, g), name) in params.iter().zip(grads).zip(names) {
        if p.len() != g.len() {
            return Err(Error::Argument(format!("gradient shape mismatch for {name}")));
        }
        if let Some(i) = g.iter().position(|v| !v.is_finite()) {
            return Err(Error::Training(format!("non-finite gradient in {name}[{i}]")));
        }
    }
    if state.m.is_empty() {
        state.m = params.iter().map(|p| vec![0.0; p.len()]).collect();
        state.v = params.iter().map(|p| vec![0.0; p.len()]).collect();
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - cfg.adam_beta1.powi(t);
    let bc2 = 1.0 - cfg.adam_beta2.powi(t);
    for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let lr = cfg.learning_rate * lr_scale[i];
        let (m, v) = (&mut state.m[i], &mut state.v[i]);
        for k in 0..p.len() {
            m[k] = cfg.adam_beta1 * m[k] + (1.0 - cfg.adam_beta1) * g[k];
            v[k] = cfg.adam_beta2 * v[k] + (1.0 - cfg.adam_beta2) * g[k] * g[k];
            let mh = m[k] / bc1;
            let vh = v[k] / bc2;
            p[k] -= lr * mh / (vh.sqrt() + cfg.adam_eps);
        }
    }
    Ok(())
}
