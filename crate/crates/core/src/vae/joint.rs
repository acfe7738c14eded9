use std::collections::BTreeMap;

use super::task::chunked;
use super::{check_term, constant_rbf, encoder_output_grad, new_decoder, new_encoder, run_encoder, DecodeCounter, ModelConfig};
use crate::distributions::{gaussian_logpdf_grad, kl_diag_gaussian_std_normal};
use crate::error::{Error, Result};
use crate::kinematics::{BodyState, PlanarChain};
use crate::nets::{Mlp, MlpGrad, MlpTrace, RbfNet, TrainConfig};
use crate::numerics::{Matrix, Rng};

/// Joint-space VAE: decodes joint angles, supervised through the volume
/// measure of the chain's forward kinematics.
#[derive(Clone, Debug, PartialEq)]
pub struct JointVae {
    pub(crate) latent_dim: usize,
    pub(crate) encoder: Mlp,
    pub(crate) decoder: Mlp,
    pub(crate) precision: RbfNet,
    pub(crate) chain: PlanarChain,
    pub(crate) eps_reg: f64,
    pub metadata: BTreeMap<String, String>,
    pub(crate) decode_calls: DecodeCounter,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecodedJoint {
    pub theta: Vec<f64>,
    pub sigma: Vec<f64>,
    pub body: BodyState,
}

#[derive(Clone, Debug)]
pub struct JointGrad {
    pub encoder: MlpGrad,
    pub decoder: MlpGrad,
    pub precision: Vec<f64>,
}

impl JointGrad {
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out = self.encoder.slices();
        out.extend(self.decoder.slices());
        out.push(&self.precision);
        out
    }

    fn add_assign(&mut self, other: &JointGrad) {
        self.encoder.add_assign(&other.encoder);
        self.decoder.add_assign(&other.decoder);
        for (a, b) in self.precision.iter_mut().zip(&other.precision) {
            *a += b;
        }
    }

    fn scale(&mut self, s: f64) {
        self.encoder.scale(s);
        self.decoder.scale(s);
        self.precision.iter_mut().for_each(|v| *v *= s);
    }
}

pub(crate) struct JointDecodeTrace {
    pub dec: MlpTrace,
    pub phi: Vec<f64>,
    pub precision: Vec<f64>,
    pub out: DecodedJoint,
}

impl JointVae {
    pub fn new(chain: PlanarChain, cfg: &ModelConfig, rng: &mut Rng) -> Result<Self> {
        cfg.validate()?;
        let eta = chain.dof();
        Ok(Self {
            latent_dim: cfg.latent_dim,
            encoder: new_encoder(eta, cfg, rng)?,
            decoder: new_decoder(eta, cfg, rng)?,
            precision: constant_rbf(cfg.latent_dim, vec![1.0 / cfg.sigma_init; eta])?,
            chain,
            eps_reg: cfg.eps_reg,
            metadata: BTreeMap::new(),
            decode_calls: DecodeCounter::default(),
        })
    }

    pub fn from_parts(chain: PlanarChain, encoder: Mlp, decoder: Mlp, precision: RbfNet, eps_reg: f64) -> Result<Self> {
        let d = decoder.input_dim();
        let eta = chain.dof();
        if encoder.input_dim() != eta || encoder.output_dim() != 2 * d || decoder.output_dim() != eta {
            return Err(Error::Argument("joint VAE network shapes are inconsistent".into()));
        }
        if precision.input_dim() != d || precision.output_dim() != eta {
            return Err(Error::Argument("precision network shape is inconsistent".into()));
        }
        if !(eps_reg >= 0.0) {
            return Err(Error::Argument(format!("eps_reg must be >= 0, got {eps_reg}")));
        }
        Ok(Self { latent_dim: d, encoder, decoder, precision, chain, eps_reg, metadata: BTreeMap::new(), decode_calls: DecodeCounter::default() })
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn input_dim(&self) -> usize {
        self.chain.dof()
    }

    pub fn chain(&self) -> &PlanarChain {
        &self.chain
    }

    pub fn eps_reg(&self) -> f64 {
        self.eps_reg
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

    pub fn precision_mut(&mut self) -> &mut RbfNet {
        &mut self.precision
    }

    pub fn encode(&self, theta: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if theta.len() != self.input_dim() {
            return Err(Error::Argument(format!("joint encoder expects {} angles, got {}", self.input_dim(), theta.len())));
        }
        let enc = run_encoder(&self.encoder, theta, self.latent_dim)?;
        Ok((enc.mu, enc.sigma))
    }

    /// Number of decoder evaluations made through this instance.
    pub fn decode_calls(&self) -> u64 {
        self.decode_calls.get()
    }

    pub(crate) fn decode_trace(&self, z: &[f64]) -> Result<JointDecodeTrace> {
        self.decode_calls.bump();
        if z.len() != self.latent_dim {
            return Err(Error::Argument(format!("expected a {}-dimensional latent point, got {}", self.latent_dim, z.len())));
        }
        let dec = self.decoder.forward_trace(z)?;
        let theta = dec.output().to_vec();
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::Decode(format!("non-finite joint output at z = {z:?}")));
        }
        let phi = self.precision.kernels(z)?;
        let precision = self.precision.forward_from_kernels(&phi);
        let body = self.chain.fk_points(&theta)?;
        let out = DecodedJoint { sigma: precision.iter().map(|p| 1.0 / p).collect(), theta, body };
        Ok(JointDecodeTrace { dec, phi, precision, out })
    }

    pub fn decode(&self, z: &[f64]) -> Result<DecodedJoint> {
        Ok(self.decode_trace(z)?.out)
    }

    /// Decoded values with the Jacobians of `μ_θ` and `σ_θ` (each η x d).
    pub fn decode_jacobians(&self, z: &[f64]) -> Result<(DecodedJoint, [Matrix; 2])> {
        let t = self.decode_trace(z)?;
        let jm = self.decoder.jacobian_from_trace(&t.dec);
        let jp = self.precision.jacobian_from_kernels(z, &t.phi);
        let mut js = jp;
        for r in 0..js.rows() {
            let f = -1.0 / (t.precision[r] * t.precision[r]);
            js.row_mut(r).iter_mut().for_each(|v| *v *= f);
        }
        Ok((t.out, [jm, js]))
    }

    pub fn zero_grad(&self) -> JointGrad {
        JointGrad {
            encoder: self.encoder.zero_grad(),
            decoder: self.decoder.zero_grad(),
            precision: vec![0.0; self.precision.raw_weights().as_slice().len()],
        }
    }

    fn datum(&self, theta: &[f64], eps: &[f64], kl_weight: f64, grad: &mut JointGrad) -> Result<f64> {
        if theta.len() != self.input_dim() || eps.len() != self.latent_dim {
            return Err(Error::Argument("datum or noise dimension mismatch".into()));
        }
        let enc = run_encoder(&self.encoder, theta, self.latent_dim)?;
        let z: Vec<f64> = enc.mu.iter().zip(&enc.sigma).zip(eps).map(|((m, s), e)| m + s * e).collect();
        let t = self.decode_trace(&z)?;
        let (lp, gm, gs) = gaussian_logpdf_grad(&t.out.theta, &t.out.sigma, theta);
        let (log_v, g_log_v) = self.chain.log_volume_grad(&t.out.theta, self.eps_reg)?;
        let kl = kl_diag_gaussian_std_normal(&enc.mu, &enc.sigma)?;
        check_term("joint log-likelihood", lp)?;
        check_term("log volume", log_v)?;
        check_term("KL", kl)?;
        if let Some(g) = g_log_v.iter().find(|g| !g.is_finite()) {
            return Err(Error::Training(format!("non-finite log volume gradient ({g})")));
        }
        let loss = -(lp - log_v) + kl_weight * kl;

        let grad_out: Vec<f64> = gm.iter().zip(&g_log_v).map(|(g, v)| -g + v).collect();
        let mut grad_z = self.decoder.backward(&t.dec, &grad_out, &mut grad.decoder);
        let g_prec: Vec<f64> = gs.iter().zip(&t.out.sigma).map(|(g, s)| g * s * s).collect();
        let gz_p = self.precision.backward(&z, &t.phi, &g_prec, &mut grad.precision);
        for (a, b) in grad_z.iter_mut().zip(gz_p) {
            *a += b;
        }
        let g_enc = encoder_output_grad(&enc, &grad_z, eps, kl_weight);
        self.encoder.backward(&enc.trace, &g_enc, &mut grad.encoder);
        Ok(loss)
    }

    /// Mean negative ELBO `-(log p(θ|z) - log V(μ_θ) - KL)` over `batch`.
    pub fn elbo(&self, batch: &[&[f64]], noise: &[Vec<f64>], kl_weight: f64) -> Result<(f64, JointGrad)> {
        if batch.is_empty() || batch.len() != noise.len() {
            return Err(Error::Argument("batch must be nonempty with one noise vector per datum".into()));
        }
        let mut grad = self.zero_grad();
        let mut total = 0.0;
        for (x, eps) in batch.iter().zip(noise) {
            total += self.datum(x, eps, kl_weight, &mut grad)?;
        }
        let inv = 1.0 / batch.len() as f64;
        grad.scale(inv);
        Ok((total * inv, grad))
    }

    pub fn elbo_sampled(&self, batch: &[&[f64]], kl_weight: f64, rng: &mut Rng) -> Result<(f64, JointGrad)> {
        let noise: Vec<Vec<f64>> = batch.iter().map(|_| (0..self.latent_dim).map(|_| rng.normal()).collect()).collect();
        self.elbo(batch, &noise, kl_weight)
    }

    pub(crate) fn elbo_chunked(&self, batch: &[&[f64]], noise: &[Vec<f64>], kl_weight: f64, _cfg: &TrainConfig) -> Result<(f64, JointGrad)> {
        chunked(batch, noise, |b, n| self.elbo(b, n, kl_weight), |g, o| g.add_assign(o), |g, s| g.scale(s))
    }

    pub(crate) fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = self.encoder.param_slices_mut();
        out.extend(self.decoder.param_slices_mut());
        out.push(self.precision.raw_weights_mut());
        out
    }

    pub(crate) fn param_names(&self) -> Vec<String> {
        let mut out = self.encoder.param_names("encoder");
        out.extend(self.decoder.param_names("decoder"));
        out.push("precision.raw_weights".into());
        out
    }

    pub(crate) fn sync(&mut self) {
        self.precision.sync_weights();
    }
}
