//! Pullback metrics of trained decoders, obstacle ambient scaling and curve
//! functionals.
//!
//! Task space: `G = J_μᵀ blockdiag(s I, I) J_μ + J_σᵀ s J_σ + J_κᵀ J_κ`.
//! Joint space: `G = Aᵀ M_A A + Bᵀ M_A B` with `A = J_FK J_μ`,
//! `B = J_FK J_σ` and `M_A` scaling every body point by `s(p_m)`.

use crate::error::{Error, Result};
use crate::numerics::{log_det_sym, sq_dist, Matrix};
use crate::vae::{JointVae, Model, TaskVae};

/// Jitter added to `G` before taking its log determinant.
pub const MAGNIFICATION_JITTER: f64 = 1e-12;

/// Spherical obstacle that inflates the ambient position metric.
#[derive(Clone, Debug, PartialEq)]
pub struct Obstacle {
    pub center: Vec<f64>,
    pub radius: f64,
    pub strength: f64,
    pub inflation: f64,
}

impl Obstacle {
    pub fn new(center: Vec<f64>, radius: f64, strength: f64, inflation: f64) -> Result<Self> {
        if center.is_empty() || center.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument(format!("obstacle center {center:?} must be finite and non-empty")));
        }
        if !(strength >= 0.0) || !strength.is_finite() {
            return Err(Error::Argument(format!("obstacle strength must be finite and ≥ 0, got {strength}")));
        }
        if !(radius >= 0.0) || !(inflation >= 0.0) || !(radius + inflation > 0.0) || !(radius + inflation).is_finite() {
            return Err(Error::Argument(format!("obstacle radius {radius} plus inflation {inflation} must be positive")));
        }
        Ok(Self { center, radius, strength, inflation })
    }

    /// `r + r_extra`.
    pub fn effective_radius(&self) -> f64 {
        self.radius + self.inflation
    }

    /// `ζ exp(-‖x - o‖² / (2 r_eff²))`.
    pub fn bump(&self, x: &[f64]) -> f64 {
        let r = self.effective_radius();
        self.strength * (-sq_dist(x, &self.center) / (2.0 * r * r)).exp()
    }

    pub fn distance(&self, x: &[f64]) -> f64 {
        sq_dist(x, &self.center).sqrt()
    }
}

/// `s(x) = 1 + Σ ζ exp(-‖x - o‖² / (2 r_eff²))`.
pub fn ambient_scale(x: &[f64], obstacles: &[Obstacle]) -> f64 {
    1.0 + obstacles.iter().map(|o| o.bump(x)).sum::<f64>()
}

pub(crate) fn check_obstacles(obstacles: &[Obstacle], dim: usize) -> Result<()> {
    for o in obstacles {
        if o.center.len() != dim {
            return Err(Error::Argument(format!("obstacle center has {} coordinates, positions have {dim}", o.center.len())));
        }
    }
    Ok(())
}

/// Task pullback metric. The concentration enters through its spread
/// `1/κ`, the orientation counterpart of `σ = 1/β`, so that the metric stays
/// small wherever the decoder is confident.
pub fn pullback_metric_task(model: &TaskVae, z: &[f64], obstacles: &[Obstacle]) -> Result<Matrix> {
    check_obstacles(obstacles, model.pos_dim())?;
    let (dec, [jx, jq, js, jk]) = model.decode_jacobians(z)?;
    let s = ambient_scale(&dec.position, obstacles);
    let mut g = jx.gram().scaled(s);
    g.add_assign(&jq.gram());
    g.add_assign(&js.gram().scaled(s));
    g.add_assign(&jk.gram().scaled(dec.kappa.powi(-4)));
    Ok(g)
}

/// Diagonal of `M_A` for a stacked body Jacobian: `s(p_m)` on both rows of
/// every body point and 1 on the end-effector angle row.
pub(crate) fn body_weights(points: &[[f64; 2]], obstacles: &[Obstacle]) -> Vec<f64> {
    let mut w = Vec::with_capacity(2 * points.len() + 1);
    for p in points {
        let s = ambient_scale(p, obstacles);
        w.push(s);
        w.push(s);
    }
    w.push(1.0);
    w
}

pub fn pullback_metric_joint(model: &JointVae, z: &[f64], obstacles: &[Obstacle]) -> Result<Matrix> {
    check_obstacles(obstacles, 2)?;
    let (dec, [jm, js]) = model.decode_jacobians(z)?;
    let jfk = model.chain().fk_jacobian(&dec.theta)?;
    let w = body_weights(&dec.body.points, obstacles);
    let mut g = jfk.matmul(&jm).weighted_gram(&w);
    g.add_assign(&jfk.matmul(&js).weighted_gram(&w));
    Ok(g)
}

/// A model together with an obstacle snapshot. Evaluation is pure and
/// uncached, so a field can be shared across threads.
#[derive(Clone, Copy, Debug)]
pub struct MetricField<'a> {
    pub model: &'a Model,
    pub obstacles: &'a [Obstacle],
}

impl<'a> MetricField<'a> {
    pub fn new(model: &'a Model, obstacles: &'a [Obstacle]) -> Self {
        Self { model, obstacles }
    }

    pub fn latent_dim(&self) -> usize {
        self.model.latent_dim()
    }

    pub fn metric(&self, z: &[f64]) -> Result<Matrix> {
        match self.model {
            Model::Task(m) => pullback_metric_task(m, z, self.obstacles),
            Model::Joint(m) => pullback_metric_joint(m, z, self.obstacles),
        }
    }

    pub fn magnification(&self, z: &[f64]) -> Result<f64> {
        magnification_factor(&self.metric(z)?)
    }
}

/// `0.5 log det(G + 1e-12 I)`.
pub fn magnification_factor(g: &Matrix) -> Result<f64> {
    let mut m = g.clone();
    for i in 0..m.rows() {
        m[(i, i)] += MAGNIFICATION_JITTER;
    }
    Ok(0.5 * log_det_sym(&m)?)
}

/// Velocities of a curve sampled uniformly on `[0, 1]`: central differences
/// inside, one-sided at the ends.
pub fn sample_velocities(curve: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let t = curve.len();
    if t < 2 {
        return Err(Error::Argument(format!("a sampled curve needs at least 2 points, got {t}")));
    }
    let h = 1.0 / (t - 1) as f64;
    Ok((0..t)
        .map(|i| {
            let (a, b, span) = match i {
                0 => (0, 1, h),
                _ if i == t - 1 => (t - 2, t - 1, h),
                _ => (i - 1, i + 1, 2.0 * h),
            };
            curve[b].iter().zip(&curve[a]).map(|(y, x)| (y - x) / span).collect()
        })
        .collect())
}

/// Pointwise `ċᵀ G(c) ċ` along a uniformly sampled curve.
pub fn energy_densities(metric: impl Fn(&[f64]) -> Result<Matrix>, curve: &[Vec<f64>]) -> Result<Vec<f64>> {
    let vel = sample_velocities(curve)?;
    curve.iter().zip(&vel).map(|(c, v)| Ok(metric(c)?.quad_form(v).max(0.0))).collect()
}

fn trapezoid(values: &[f64]) -> f64 {
    let h = 1.0 / (values.len() - 1) as f64;
    let inner: f64 = values.iter().sum::<f64>() - 0.5 * (values[0] + values[values.len() - 1]);
    h * inner
}

/// Trapezoid quadrature of `√(ċᵀ G ċ)` over a curve sampled uniformly on `[0, 1]`.
pub fn curve_length(field: &MetricField, curve: &[Vec<f64>]) -> Result<f64> {
    let e = energy_densities(|z| field.metric(z), curve)?;
    Ok(trapezoid(&e.iter().map(|v| v.sqrt()).collect::<Vec<_>>()))
}

/// Trapezoid quadrature of `ċᵀ G ċ` over a curve sampled uniformly on `[0, 1]`.
pub fn curve_energy(field: &MetricField, curve: &[Vec<f64>]) -> Result<f64> {
    Ok(trapezoid(&energy_densities(|z| field.metric(z), curve)?))
}
