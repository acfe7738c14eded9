use super::{JointVae, Model, ModelConfig, TaskVae};
use crate::error::{Error, Result};
use crate::nets::{adam_update, bandwidth_from_centers, AdamState, RbfNet, TrainConfig};
use crate::numerics::{dot, kmeans, norm, softplus_inv, Matrix, Rng};

/// Mean loss of one epoch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochLoss {
    /// 1 for the warm-up phase (fixed uncertainty), 2 for the joint phase.
    pub phase: u8,
    pub epoch: usize,
    pub kl_weight: f64,
    pub loss: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub history: Vec<EpochLoss>,
}

impl TrainReport {
    pub fn initial_loss(&self) -> Option<f64> {
        self.history.first().map(|e| e.loss)
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.history.last().map(|e| e.loss)
    }
}

/// Epoch losses above this for three consecutive epochs abort training.
const DIVERGENCE_LOSS: f64 = 1e6;

/// Smallest positive RBF weight used when moment matching finds no excess.
const MIN_INIT_WEIGHT: f64 = 1e-8;

/// Activity threshold `Var_x E[z_k | x]` below which a latent axis counts
/// as collapsed onto the prior.
const ACTIVE_UNIT_VARIANCE: f64 = 0.01;

trait Trainable {
    fn latent_dim(&self) -> usize;
    fn batch(&self, batch: &[&[f64]], noise: &[Vec<f64>], kl_weight: f64, cfg: &TrainConfig, warmup: bool) -> Result<(f64, Vec<Vec<f64>>)>;
    fn params_mut(&mut self) -> Vec<&mut [f64]>;
    fn param_names(&self) -> Vec<String>;
    /// Number of trailing parameter tensors that belong to RBF networks.
    fn rbf_tensors(&self) -> usize;
    fn sync(&mut self);
    fn encode(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)>;
    fn init_uncertainty(&mut self, data: &[Vec<f64>], codes: &[Vec<f64>], centers: Vec<Vec<f64>>, bandwidth: f64, cfg: &ModelConfig) -> Result<()>;
}

fn owned(slices: Vec<&[f64]>) -> Vec<Vec<f64>> {
    slices.into_iter().map(|s| s.to_vec()).collect()
}

/// Weights that lift a floored RBF to `target` at every center, assuming
/// the kernel sum at each center approximates the local kernel mass.
fn moment_matched(centers: Vec<Vec<f64>>, bandwidth: f64, floor: Vec<f64>, target: &[f64]) -> Result<RbfNet> {
    let k = centers.len();
    let probe = RbfNet::with_uniform_weights(centers.clone(), bandwidth, &vec![1.0; floor.len()], vec![1.0; floor.len()])?;
    let mass: Vec<f64> = centers.iter().map(|c| probe.kernels(c).map(|phi| phi.iter().sum::<f64>())).collect::<Result<_>>()?;
    let mut raw = Matrix::zeros(floor.len(), k);
    for (j, (&t, &f)) in target.iter().zip(&floor).enumerate() {
        for (kk, m) in mass.iter().enumerate() {
            raw[(j, kk)] = softplus_inv(((t - f) / m).max(MIN_INIT_WEIGHT));
        }
    }
    RbfNet::new(centers, bandwidth, raw, floor)
}

/// Concentration whose mean resultant length `A_D(κ)` matches `r̄`, using
/// the large-κ expansion `A_D(κ) ≈ 1 - (D - 1) / 2κ`.
fn kappa_from_resultant(r_bar: f64, dim: usize) -> f64 {
    (dim as f64 - 1.0) / (2.0 * (1.0 - r_bar).max(1e-6))
}

impl Trainable for TaskVae {
    fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    fn batch(&self, batch: &[&[f64]], noise: &[Vec<f64>], kl_weight: f64, cfg: &TrainConfig, warmup: bool) -> Result<(f64, Vec<Vec<f64>>)> {
        let (l, g) = self.elbo_chunked(batch, noise, kl_weight, cfg, !(warmup && cfg.signed_warmup))?;
        Ok((l, owned(g.slices())))
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        TaskVae::params_mut(self)
    }

    fn param_names(&self) -> Vec<String> {
        TaskVae::param_names(self)
    }

    fn rbf_tensors(&self) -> usize {
        2
    }

    fn sync(&mut self) {
        TaskVae::sync(self)
    }

    fn encode(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        TaskVae::encode(self, x)
    }

    fn init_uncertainty(&mut self, data: &[Vec<f64>], codes: &[Vec<f64>], centers: Vec<Vec<f64>>, bandwidth: f64, cfg: &ModelConfig) -> Result<()> {
        let p = self.pos_dim;
        let mut sq = vec![0.0; p];
        let mut resultant = 0.0;
        for (x, z) in data.iter().zip(codes) {
            let d = self.decode(z)?;
            for i in 0..p {
                sq[i] += (x[i] - d.position[i]).powi(2);
            }
            resultant += dot(&d.orientation, &x[p..]).abs() / norm(&x[p..]);
        }
        let n = data.len() as f64;
        let target_prec: Vec<f64> = sq.iter().map(|s| 1.0 / (s / n).sqrt().max(1e-6)).collect();
        let target_kappa = kappa_from_resultant(resultant / n, self.rot_dim);
        self.precision = moment_matched(centers.clone(), bandwidth, vec![1.0 / cfg.sigma_max; p], &target_prec)?;
        self.concentration = moment_matched(centers, bandwidth, vec![cfg.kappa_min], &[target_kappa])?;
        Ok(())
    }
}

impl Trainable for JointVae {
    fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    fn batch(&self, batch: &[&[f64]], noise: &[Vec<f64>], kl_weight: f64, cfg: &TrainConfig, _warmup: bool) -> Result<(f64, Vec<Vec<f64>>)> {
        let (l, g) = self.elbo_chunked(batch, noise, kl_weight, cfg)?;
        Ok((l, owned(g.slices())))
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        JointVae::params_mut(self)
    }

    fn param_names(&self) -> Vec<String> {
        JointVae::param_names(self)
    }

    fn rbf_tensors(&self) -> usize {
        1
    }

    fn sync(&mut self) {
        JointVae::sync(self)
    }

    fn encode(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        JointVae::encode(self, x)
    }

    fn init_uncertainty(&mut self, data: &[Vec<f64>], codes: &[Vec<f64>], centers: Vec<Vec<f64>>, bandwidth: f64, cfg: &ModelConfig) -> Result<()> {
        let eta = self.chain.dof();
        let mut sq = vec![0.0; eta];
        for (x, z) in data.iter().zip(codes) {
            let d = self.decode(z)?;
            for i in 0..eta {
                sq[i] += (x[i] - d.theta[i]).powi(2);
            }
        }
        let n = data.len() as f64;
        let target: Vec<f64> = sq.iter().map(|s| 1.0 / (s / n).sqrt().max(1e-6)).collect();
        self.precision = moment_matched(centers, bandwidth, vec![1.0 / cfg.sigma_max; eta], &target)?;
        Ok(())
    }
}

/// Two-phase training.
///
/// Phase 1 (`pretrain_epochs`) fits encoder and decoder mean with the fixed
/// uncertainty of a freshly built model. The uncertainty networks are then
/// rebuilt with `rbf_k` k-means centers over the phase-1 codes, initialised
/// by moment matching, and phase 2 (`epochs`) trains every parameter.
pub fn train(model: &mut Model, data: &[Vec<f64>], model_cfg: &ModelConfig, cfg: &TrainConfig) -> Result<TrainReport> {
    match model {
        Model::Task(m) => train_impl(m, data, model_cfg, cfg),
        Model::Joint(m) => train_impl(m, data, model_cfg, cfg),
    }
}

fn train_impl<M: Trainable>(model: &mut M, data: &[Vec<f64>], model_cfg: &ModelConfig, cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    model_cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Argument("training data is empty".into()));
    }
    let mut rng = Rng::new(cfg.seed);
    let mut history = Vec::with_capacity(cfg.pretrain_epochs + cfg.epochs);
    let mut state = AdamState::default();
    for epoch in 0..cfg.pretrain_epochs {
        let klw = cfg.kl_weight(epoch);
        let loss = run_epoch(model, data, klw, cfg, &mut rng, &mut state, false)?;
        history.push(EpochLoss { phase: 1, epoch, kl_weight: klw, loss });
        check_divergence(&history)?;
    }

    let posteriors: Vec<(Vec<f64>, Vec<f64>)> = data.iter().map(|x| model.encode(x)).collect::<Result<_>>()?;
    let codes: Vec<Vec<f64>> = posteriors.iter().map(|(mu, _)| mu.clone()).collect();
    let inactive = inactive_axes(&codes);
    // Training still decodes at z ~ N(0, 1) along collapsed axes, so the
    // centers follow posterior samples there and the means elsewhere.
    let samples: Vec<Vec<f64>> = posteriors
        .iter()
        .map(|(mu, s)| {
            let mut z = mu.clone();
            for &k in &inactive {
                z[k] += s[k] * rng.normal();
            }
            z
        })
        .collect();
    let k = model_cfg.rbf_k.min(samples.len());
    let clusters = kmeans(&samples, k, &mut rng)?;
    let bandwidth = bandwidth_from_centers(&clusters.centers, model_cfg.rbf_bandwidth_scale)?;
    model.init_uncertainty(data, &codes, clusters.centers, bandwidth, model_cfg)?;

    let mut state = AdamState::default();
    for e in 0..cfg.epochs {
        let epoch = cfg.pretrain_epochs + e;
        let klw = cfg.kl_weight(epoch);
        let loss = run_epoch(model, data, klw, cfg, &mut rng, &mut state, true)?;
        history.push(EpochLoss { phase: 2, epoch, kl_weight: klw, loss });
        check_divergence(&history)?;
    }
    Ok(TrainReport { history })
}

/// Latent axes whose posterior mean varies by less than
/// [`ACTIVE_UNIT_VARIANCE`] across the data.
fn inactive_axes(codes: &[Vec<f64>]) -> Vec<usize> {
    let n = codes.len() as f64;
    let d = codes.first().map_or(0, Vec::len);
    (0..d)
        .filter(|&k| {
            let m = codes.iter().map(|z| z[k]).sum::<f64>() / n;
            codes.iter().map(|z| (z[k] - m).powi(2)).sum::<f64>() / n < ACTIVE_UNIT_VARIANCE
        })
        .collect()
}

fn check_divergence(history: &[EpochLoss]) -> Result<()> {
    let n = history.len();
    if n >= 3 && history[n - 3..].iter().all(|e| !(e.loss <= DIVERGENCE_LOSS)) {
        let last: Vec<String> = history[n - 3..].iter().map(|e| format!("{:.6e}", e.loss)).collect();
        return Err(Error::Training(format!("training diverged; last epoch losses {}", last.join(", "))));
    }
    Ok(())
}

fn run_epoch<M: Trainable>(
    model: &mut M,
    data: &[Vec<f64>],
    kl_weight: f64,
    cfg: &TrainConfig,
    rng: &mut Rng,
    state: &mut AdamState,
    train_rbf: bool,
) -> Result<f64> {
    let mut order: Vec<usize> = (0..data.len()).collect();
    rng.shuffle(&mut order);
    let d = model.latent_dim();
    let mut total = 0.0;
    for idx in order.chunks(cfg.batch_size) {
        let batch: Vec<&[f64]> = idx.iter().map(|&i| data[i].as_slice()).collect();
        let noise: Vec<Vec<f64>> = idx.iter().map(|_| (0..d).map(|_| rng.normal()).collect()).collect();
        let (loss, grads) = model.batch(&batch, &noise, kl_weight, cfg, !train_rbf)?;
        total += loss * idx.len() as f64;
        let names = model.param_names();
        let n = grads.len();
        let rbf = model.rbf_tensors();
        let keep = if train_rbf { n } else { n - rbf };
        let scales: Vec<f64> = (0..keep).map(|i| if i >= n - rbf { cfg.rbf_lr_scale } else { 1.0 }).collect();
        let grad_refs: Vec<&[f64]> = grads[..keep].iter().map(|g| g.as_slice()).collect();
        {
            let mut params = model.params_mut();
            params.truncate(keep);
            adam_update(&mut params, &grad_refs, &names[..keep], &scales, state, cfg)?;
        }
        model.sync();
    }
    Ok(total / data.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::PlanarChain;

    fn toy_task_data(rng: &mut Rng) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        for i in 0..60 {
            let t = i as f64 / 59.0;
            let a = 1.2 * t;
            let q = [a.cos(), a.sin(), 0.0];
            let x = [t + 0.01 * rng.normal(), (3.0 * t).sin() * 0.3 + 0.01 * rng.normal()];
            out.push(vec![x[0], x[1], q[0], q[1], q[2]]);
            out.push(vec![x[0], x[1], -q[0], -q[1], -q[2]]);
        }
        out
    }

    fn quick() -> (ModelConfig, TrainConfig) {
        (
            ModelConfig { hidden: vec![16, 16], rbf_k: 12, ..ModelConfig::default() },
            TrainConfig { epochs: 15, pretrain_epochs: 15, kl_warmup_epochs: 5, batch_size: 32, learning_rate: 3e-3, ..TrainConfig::default() },
        )
    }

    #[test]
    fn task_training_reduces_loss_and_is_reproducible() {
        let mut rng = Rng::new(1);
        let data = toy_task_data(&mut rng);
        let (mc, tc) = quick();
        let run = || {
            let mut model = Model::Task(TaskVae::new(2, 3, &mc, &mut Rng::new(2)).unwrap());
            let report = train(&mut model, &data, &mc, &tc).unwrap();
            (model, report)
        };
        let (m1, r1) = run();
        let (m2, r2) = run();
        assert!(r1.final_loss().unwrap() < r1.initial_loss().unwrap());
        let bits = |r: &TrainReport| r.history.iter().map(|e| e.loss.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&r1), bits(&r2));
        assert_eq!(m1, m2);
        assert_eq!(r1.history.len(), 30);
        assert_eq!(r1.history[0].kl_weight, 0.0);
        if let Model::Task(m) = &m1 {
            assert_eq!(m.precision().centers().len(), 12);
        }
    }

    #[test]
    fn joint_training_reduces_loss() {
        let mut rng = Rng::new(3);
        let data: Vec<Vec<f64>> = (0..80).map(|i| {
            let t = i as f64 / 79.0;
            vec![0.3 + t + 0.01 * rng.normal(), 1.0 - 0.5 * t + 0.01 * rng.normal()]
        }).collect();
        let (mut mc, tc) = quick();
        mc.latent_dim = 2;
        let chain = PlanarChain::new(vec![1.0, 1.0]).unwrap();
        let mut model = Model::Joint(JointVae::new(chain, &mc, &mut Rng::new(4)).unwrap());
        let report = train(&mut model, &data, &mc, &tc).unwrap();
        assert!(report.final_loss().unwrap() < report.initial_loss().unwrap());
    }

    #[test]
    fn empty_data_is_rejected() {
        let (mc, tc) = quick();
        let mut model = Model::Task(TaskVae::new(2, 3, &mc, &mut Rng::new(0)).unwrap());
        assert!(train(&mut model, &[], &mc, &tc).is_err());
    }

    #[test]
    fn resultant_inversion() {
        // A_3(κ) = coth κ - 1/κ; at κ = 40 the expansion is accurate to 1e-3.
        let k: f64 = 40.0;
        let a = 1.0 / k.tanh() - 1.0 / k;
        assert!((kappa_from_resultant(a, 3) / k - 1.0).abs() < 1e-3);
    }
}
