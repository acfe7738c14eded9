use std::collections::BTreeMap;

use super::{check_term, constant_rbf, encoder_output_grad, new_decoder, new_encoder, run_encoder, DecodeCounter, ModelConfig};
use crate::distributions::{antipodal_vmf_logpdf_grad, gaussian_logpdf_grad, kl_diag_gaussian_std_normal, vmf_logpdf_grad};
use crate::error::{Error, Result};
use crate::nets::{Mlp, MlpGrad, MlpTrace, RbfNet, TrainConfig};
use crate::numerics::{dot, norm, Matrix, Rng};

/// Task-space VAE over poses `(x, q)` with `x ∈ R^Dp` and `q ∈ S^(D-1)`.
///
/// The decoder mean is one network whose last `D` outputs are projected
/// onto the sphere. Position precision and orientation concentration come
/// from two separate RBF networks over the latent space.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskVae {
    pub(crate) pos_dim: usize,
    pub(crate) rot_dim: usize,
    pub(crate) latent_dim: usize,
    pub(crate) encoder: Mlp,
    pub(crate) decoder: Mlp,
    pub(crate) precision: RbfNet,
    pub(crate) concentration: RbfNet,
    pub metadata: BTreeMap<String, String>,
    pub(crate) decode_calls: DecodeCounter,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecodedTask {
    pub position: Vec<f64>,
    pub sigma: Vec<f64>,
    pub orientation: Vec<f64>,
    pub kappa: f64,
}

/// Parameter gradients of a task ELBO.
#[derive(Clone, Debug)]
pub struct TaskGrad {
    pub encoder: MlpGrad,
    pub decoder: MlpGrad,
    pub precision: Vec<f64>,
    pub concentration: Vec<f64>,
}

impl TaskGrad {
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out = self.encoder.slices();
        out.extend(self.decoder.slices());
        out.push(&self.precision);
        out.push(&self.concentration);
        out
    }

    fn add_assign(&mut self, other: &TaskGrad) {
        self.encoder.add_assign(&other.encoder);
        self.decoder.add_assign(&other.decoder);
        for (a, b) in self.precision.iter_mut().zip(&other.precision) {
            *a += b;
        }
        for (a, b) in self.concentration.iter_mut().zip(&other.concentration) {
            *a += b;
        }
    }

    fn scale(&mut self, s: f64) {
        self.encoder.scale(s);
        self.decoder.scale(s);
        self.precision.iter_mut().for_each(|v| *v *= s);
        self.concentration.iter_mut().for_each(|v| *v *= s);
    }
}

/// Forward values at one latent point, kept for back-propagation.
pub(crate) struct TaskDecodeTrace {
    pub dec: MlpTrace,
    pub raw_norm: f64,
    pub phi_prec: Vec<f64>,
    pub phi_conc: Vec<f64>,
    pub out: DecodedTask,
    pub precision: Vec<f64>,
}

impl TaskVae {
    pub fn new(pos_dim: usize, rot_dim: usize, cfg: &ModelConfig, rng: &mut Rng) -> Result<Self> {
        cfg.validate()?;
        if !(1..=3).contains(&pos_dim) || !(2..=4).contains(&rot_dim) {
            return Err(Error::Argument(format!("unsupported task dimensions Dp={pos_dim}, D={rot_dim}")));
        }
        let encoder = new_encoder(pos_dim + rot_dim, cfg, rng)?;
        let decoder = new_decoder(pos_dim + rot_dim, cfg, rng)?;
        Ok(Self {
            pos_dim,
            rot_dim,
            latent_dim: cfg.latent_dim,
            encoder,
            decoder,
            precision: constant_rbf(cfg.latent_dim, vec![1.0 / cfg.sigma_init; pos_dim])?,
            concentration: constant_rbf(cfg.latent_dim, vec![cfg.kappa_init])?,
            metadata: BTreeMap::new(),
            decode_calls: DecodeCounter::default(),
        })
    }

    pub fn from_parts(
        pos_dim: usize,
        rot_dim: usize,
        encoder: Mlp,
        decoder: Mlp,
        precision: RbfNet,
        concentration: RbfNet,
    ) -> Result<Self> {
        let d = decoder.input_dim();
        let n = pos_dim + rot_dim;
        if encoder.input_dim() != n || encoder.output_dim() != 2 * d || decoder.output_dim() != n {
            return Err(Error::Argument("task VAE network shapes are inconsistent".into()));
        }
        if precision.input_dim() != d || precision.output_dim() != pos_dim {
            return Err(Error::Argument("precision network shape is inconsistent".into()));
        }
        if concentration.input_dim() != d || concentration.output_dim() != 1 {
            return Err(Error::Argument("concentration network shape is inconsistent".into()));
        }
        Ok(Self { pos_dim, rot_dim, latent_dim: d, encoder, decoder, precision, concentration, metadata: BTreeMap::new(), decode_calls: DecodeCounter::default() })
    }

    pub fn pos_dim(&self) -> usize {
        self.pos_dim
    }

    pub fn rot_dim(&self) -> usize {
        self.rot_dim
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn input_dim(&self) -> usize {
        self.pos_dim + self.rot_dim
    }

    pub fn encoder(&self) -> &Mlp {
        &self.encoder
    }

    pub fn decoder(&self) -> &Mlp {
        &self.decoder
    }

    pub fn decoder_mut(&mut self) -> &mut Mlp {
        &mut self.decoder
    }

    pub fn precision(&self) -> &RbfNet {
        &self.precision
    }

    pub fn concentration(&self) -> &RbfNet {
        &self.concentration
    }

    pub fn precision_mut(&mut self) -> &mut RbfNet {
        &mut self.precision
    }

    pub fn concentration_mut(&mut self) -> &mut RbfNet {
        &mut self.concentration
    }

    pub fn encode(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if x.len() != self.input_dim() {
            return Err(Error::Argument(format!("task encoder expects {} values, got {}", self.input_dim(), x.len())));
        }
        let enc = run_encoder(&self.encoder, x, self.latent_dim)?;
        Ok((enc.mu, enc.sigma))
    }

    fn check_latent(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.latent_dim {
            return Err(Error::Argument(format!("expected a {}-dimensional latent point, got {}", self.latent_dim, z.len())));
        }
        Ok(())
    }

    /// Number of decoder evaluations made through this instance.
    pub fn decode_calls(&self) -> u64 {
        self.decode_calls.get()
    }

    pub(crate) fn decode_trace(&self, z: &[f64]) -> Result<TaskDecodeTrace> {
        self.decode_calls.bump();
        self.check_latent(z)?;
        let dec = self.decoder.forward_trace(z)?;
        let o = dec.output();
        let raw = &o[self.pos_dim..];
        let raw_norm = norm(raw);
        if !(raw_norm >= 1e-12) {
            return Err(Error::Decode(format!("orientation output has norm {raw_norm} at z = {z:?}")));
        }
        let orientation: Vec<f64> = raw.iter().map(|v| v / raw_norm).collect();
        let phi_prec = self.precision.kernels(z)?;
        let precision = self.precision.forward_from_kernels(&phi_prec);
        let phi_conc = self.concentration.kernels(z)?;
        let kappa = self.concentration.forward_from_kernels(&phi_conc)[0];
        let out = DecodedTask {
            position: o[..self.pos_dim].to_vec(),
            sigma: precision.iter().map(|p| 1.0 / p).collect(),
            orientation,
            kappa,
        };
        Ok(TaskDecodeTrace { dec, raw_norm, phi_prec, phi_conc, out, precision })
    }

    pub fn decode(&self, z: &[f64]) -> Result<DecodedTask> {
        Ok(self.decode_trace(z)?.out)
    }

    /// Jacobians of the decoded channels at `z`: position mean (Dp x d),
    /// unit orientation mean (D x d), σ (Dp x d) and κ (1 x d).
    pub fn decode_jacobians(&self, z: &[f64]) -> Result<(DecodedTask, [Matrix; 4])> {
        let t = self.decode_trace(z)?;
        let d = self.latent_dim;
        let jm = self.decoder.jacobian_from_trace(&t.dec);
        let mut jx = Matrix::zeros(self.pos_dim, d);
        for r in 0..self.pos_dim {
            jx.row_mut(r).copy_from_slice(jm.row(r));
        }
        // projection (I - μμᵀ)/|r| onto the sphere's tangent
        let mu = &t.out.orientation;
        let mut jq = Matrix::zeros(self.rot_dim, d);
        for c in 0..d {
            let col: Vec<f64> = (0..self.rot_dim).map(|r| jm[(self.pos_dim + r, c)]).collect();
            let along = dot(mu, &col);
            for r in 0..self.rot_dim {
                jq[(r, c)] = (col[r] - mu[r] * along) / t.raw_norm;
            }
        }
        let jp = self.precision.jacobian_from_kernels(z, &t.phi_prec);
        let mut js = Matrix::zeros(self.pos_dim, d);
        for r in 0..self.pos_dim {
            let f = -1.0 / (t.precision[r] * t.precision[r]);
            for c in 0..d {
                js[(r, c)] = f * jp[(r, c)];
            }
        }
        let jk = self.concentration.jacobian_from_kernels(z, &t.phi_conc);
        Ok((t.out, [jx, jq, js, jk]))
    }

    pub fn zero_grad(&self) -> TaskGrad {
        TaskGrad {
            encoder: self.encoder.zero_grad(),
            decoder: self.decoder.zero_grad(),
            precision: vec![0.0; self.precision.raw_weights().as_slice().len()],
            concentration: vec![0.0; self.concentration.raw_weights().as_slice().len()],
        }
    }

    /// Loss of one datum with fixed noise; accumulates parameter gradients.
    /// `antipodal = false` scores the orientation with a single vMF.
    fn datum(&self, x: &[f64], eps: &[f64], kl_weight: f64, cfg: &TrainConfig, antipodal: bool, grad: &mut TaskGrad) -> Result<f64> {
        if x.len() != self.input_dim() || eps.len() != self.latent_dim {
            return Err(Error::Argument("datum or noise dimension mismatch".into()));
        }
        let p = self.pos_dim;
        let qn = norm(&x[p..]);
        if (qn - 1.0).abs() > crate::distributions::UNIT_NORM_TOL {
            return Err(Error::Argument(format!("orientation is not unit length (|q| = {qn})")));
        }
        let q: Vec<f64> = x[p..].iter().map(|v| v / qn).collect();
        let enc = run_encoder(&self.encoder, x, self.latent_dim)?;
        let z: Vec<f64> = enc.mu.iter().zip(&enc.sigma).zip(eps).map(|((m, s), e)| m + s * e).collect();
        let t = self.decode_trace(&z)?;
        let (lp, gm, gs) = gaussian_logpdf_grad(&t.out.position, &t.out.sigma, &x[..p]);
        let (lq, gq, gk) = if antipodal {
            antipodal_vmf_logpdf_grad(&t.out.orientation, t.out.kappa, &q)?
        } else {
            vmf_logpdf_grad(&t.out.orientation, t.out.kappa, &q)?
        };
        let kl = kl_diag_gaussian_std_normal(&enc.mu, &enc.sigma)?;
        check_term("position log-likelihood", lp)?;
        check_term("orientation log-likelihood", lq)?;
        check_term("KL", kl)?;
        let loss = -(cfg.beta_position * lp + cfg.beta_orientation * lq) + kl_weight * kl;

        let mut grad_out = vec![0.0; p + self.rot_dim];
        for i in 0..p {
            grad_out[i] = -cfg.beta_position * gm[i];
        }
        let g_mu: Vec<f64> = gq.iter().map(|g| -cfg.beta_orientation * g).collect();
        let along = dot(&t.out.orientation, &g_mu);
        for i in 0..self.rot_dim {
            grad_out[p + i] = (g_mu[i] - t.out.orientation[i] * along) / t.raw_norm;
        }
        let mut grad_z = self.decoder.backward(&t.dec, &grad_out, &mut grad.decoder);
        let g_prec: Vec<f64> =
            gs.iter().zip(&t.out.sigma).map(|(g, s)| -cfg.beta_position * g * -(s * s)).collect();
        let gz_p = self.precision.backward(&z, &t.phi_prec, &g_prec, &mut grad.precision);
        let gz_k = self.concentration.backward(&z, &t.phi_conc, &[-cfg.beta_orientation * gk], &mut grad.concentration);
        for i in 0..self.latent_dim {
            grad_z[i] += gz_p[i] + gz_k[i];
        }
        let g_enc = encoder_output_grad(&enc, &grad_z, eps, kl_weight);
        self.encoder.backward(&enc.trace, &g_enc, &mut grad.encoder);
        Ok(loss)
    }

    /// Mean negative ELBO over `batch` (rows `[x, q]`) with one fixed noise
    /// vector per datum, and its parameter gradient.
    pub fn elbo(&self, batch: &[&[f64]], noise: &[Vec<f64>], kl_weight: f64, cfg: &TrainConfig) -> Result<(f64, TaskGrad)> {
        self.elbo_with(batch, noise, kl_weight, cfg, true)
    }

    fn elbo_with(&self, batch: &[&[f64]], noise: &[Vec<f64>], kl_weight: f64, cfg: &TrainConfig, antipodal: bool) -> Result<(f64, TaskGrad)> {
        if batch.is_empty() || batch.len() != noise.len() {
            return Err(Error::Argument("batch must be nonempty with one noise vector per datum".into()));
        }
        let mut grad = self.zero_grad();
        let mut total = 0.0;
        for (x, eps) in batch.iter().zip(noise) {
            total += self.datum(x, eps, kl_weight, cfg, antipodal, &mut grad)?;
        }
        let inv = 1.0 / batch.len() as f64;
        grad.scale(inv);
        Ok((total * inv, grad))
    }

    /// [`TaskVae::elbo`] with noise drawn from `rng`.
    pub fn elbo_sampled(&self, batch: &[&[f64]], kl_weight: f64, cfg: &TrainConfig, rng: &mut Rng) -> Result<(f64, TaskGrad)> {
        let noise: Vec<Vec<f64>> = batch.iter().map(|_| (0..self.latent_dim).map(|_| rng.normal()).collect()).collect();
        self.elbo(batch, &noise, kl_weight, cfg)
    }

    pub(crate) fn elbo_chunked(
        &self,
        batch: &[&[f64]],
        noise: &[Vec<f64>],
        kl_weight: f64,
        cfg: &TrainConfig,
        antipodal: bool,
    ) -> Result<(f64, TaskGrad)> {
        chunked(batch, noise, |b, n| self.elbo_with(b, n, kl_weight, cfg, antipodal), |g, o| g.add_assign(o), |g, s| g.scale(s))
    }

    pub(crate) fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = self.encoder.param_slices_mut();
        out.extend(self.decoder.param_slices_mut());
        out.push(self.precision.raw_weights_mut());
        out.push(self.concentration.raw_weights_mut());
        out
    }

    pub(crate) fn param_names(&self) -> Vec<String> {
        let mut out = self.encoder.param_names("encoder");
        out.extend(self.decoder.param_names("decoder"));
        out.push("precision.raw_weights".into());
        out.push("concentration.raw_weights".into());
        out
    }

    pub(crate) fn sync(&mut self) {
        self.precision.sync_weights();
        self.concentration.sync_weights();
    }
}

/// Evaluates a batch in fixed-size chunks and combines the means in order,
/// so results do not depend on how chunks are scheduled.
pub(crate) fn chunked<G: Send>(
    batch: &[&[f64]],
    noise: &[Vec<f64>],
    eval: impl Fn(&[&[f64]], &[Vec<f64>]) -> Result<(f64, G)> + Sync,
    add: impl Fn(&mut G, &G),
    scale: impl Fn(&mut G, f64),
) -> Result<(f64, G)> {
    use rayon::prelude::*;
    const CHUNK: usize = 16;
    let parts: Vec<Result<(f64, G, usize)>> = batch
        .par_chunks(CHUNK)
        .zip(noise.par_chunks(CHUNK))
        .map(|(b, n)| eval(b, n).map(|(l, g)| (l, g, b.len())))
        .collect();
    let mut total = 0.0;
    let mut acc: Option<G> = None;
    for part in parts {
        let (l, mut g, n) = part?;
        let w = n as f64 / batch.len() as f64;
        total += l * w;
        scale(&mut g, w);
        match acc.as_mut() {
            Some(a) => add(a, &g),
            None => acc = Some(g),
        }
    }
    acc.map(|g| (total, g)).ok_or_else(|| Error::Argument("empty batch".into()))
}
