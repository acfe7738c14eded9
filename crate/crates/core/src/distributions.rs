//! Log-densities used by the ELBOs: diagonal Gaussian, von Mises-Fisher and
//! its antipodal mixture, and the closed-form KL to a standard normal.

use std::f64::consts::{LN_2, PI};

use crate::error::{Error, Result};
use crate::numerics::{bessel_i_ratio, dot, ln_gamma, log_add_exp, log_bessel_i, norm};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Tolerance on `|q|` before a direction is rejected instead of renormalised.
pub const UNIT_NORM_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct DiagGaussian {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl DiagGaussian {
    pub fn new(mean: Vec<f64>, std: Vec<f64>) -> Result<Self> {
        if mean.len() != std.len() {
            return Err(Error::Argument("gaussian mean and std lengths differ".into()));
        }
        if let Some(s) = std.iter().find(|s| !(**s > 0.0)) {
            return Err(Error::Argument(format!("gaussian std must be > 0, got {s}")));
        }
        Ok(Self { mean, std })
    }
}

pub fn gaussian_logpdf(d: &DiagGaussian, x: &[f64]) -> Result<f64> {
    if x.len() != d.mean.len() {
        return Err(Error::Argument(format!("expected a {}-vector, got {}", d.mean.len(), x.len())));
    }
    let mut total = 0.0;
    for ((&xi, &mi), &si) in x.iter().zip(&d.mean).zip(&d.std) {
        if !(si > 0.0) {
            return Err(Error::Argument(format!("gaussian std must be > 0, got {si}")));
        }
        let r = (xi - mi) / si;
        total += -HALF_LN_2PI - si.ln() - 0.5 * r * r;
    }
    Ok(total)
}

/// Value and partial derivatives `(log p, d/dmean, d/dstd)`.
pub(crate) fn gaussian_logpdf_grad(mean: &[f64], std: &[f64], x: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
    let mut total = 0.0;
    let mut gm = Vec::with_capacity(x.len());
    let mut gs = Vec::with_capacity(x.len());
    for ((&xi, &mi), &si) in x.iter().zip(mean).zip(std) {
        let r = xi - mi;
        let inv = 1.0 / si;
        total += -HALF_LN_2PI - si.ln() - 0.5 * r * r * inv * inv;
        gm.push(r * inv * inv);
        gs.push(-inv + r * r * inv * inv * inv);
    }
    (total, gm, gs)
}

/// Von Mises-Fisher distribution on the unit sphere `S^(D-1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Vmf {
    pub mean_direction: Vec<f64>,
    pub kappa: f64,
}

impl Vmf {
    pub fn new(mean_direction: Vec<f64>, kappa: f64) -> Result<Self> {
        if mean_direction.len() < 2 {
            return Err(Error::Argument("vMF needs an ambient dimension of at least 2".into()));
        }
        if (norm(&mean_direction) - 1.0).abs() > 1e-9 {
            return Err(Error::Argument(format!("vMF mean direction must be unit, |μ| = {}", norm(&mean_direction))));
        }
        if !(kappa >= 0.0) || !kappa.is_finite() {
            return Err(Error::Argument(format!("vMF concentration must be finite and >= 0, got {kappa}")));
        }
        Ok(Self { mean_direction, kappa })
    }

    pub fn dim(&self) -> usize {
        self.mean_direction.len()
    }
}

/// `log` of the surface area of `S^(D-1)`: `log(2 π^(D/2) / Γ(D/2))`.
pub fn log_sphere_area(dim: usize) -> f64 {
    let h = dim as f64 / 2.0;
    LN_2 + h * PI.ln() - ln_gamma(h)
}

/// `log C_D(κ) = (D/2 - 1) log κ - (D/2) log 2π - log I_(D/2-1)(κ)`, with the
/// uniform limit at `κ = 0`.
pub fn vmf_log_normalizer(dim: usize, kappa: f64) -> Result<f64> {
    if !(kappa >= 0.0) {
        return Err(Error::Argument(format!("vMF concentration must be >= 0, got {kappa}")));
    }
    if kappa == 0.0 {
        return Ok(-log_sphere_area(dim));
    }
    let order = dim as f64 / 2.0 - 1.0;
    Ok(order * kappa.ln() - (dim as f64 / 2.0) * (2.0 * PI).ln() - log_bessel_i(order, kappa)?)
}

fn unit(q: &[f64], dim: usize) -> Result<Vec<f64>> {
    if q.len() != dim {
        return Err(Error::Argument(format!("expected a {dim}-dimensional direction, got {}", q.len())));
    }
    let n = norm(q);
    if (n - 1.0).abs() > UNIT_NORM_TOL {
        return Err(Error::Argument(format!("direction is not unit length (|q| = {n})")));
    }
    Ok(q.iter().map(|v| v / n).collect())
}

pub fn vmf_logpdf(v: &Vmf, q: &[f64]) -> Result<f64> {
    let q = unit(q, v.dim())?;
    Ok(vmf_log_normalizer(v.dim(), v.kappa)? + v.kappa * dot(&v.mean_direction, &q))
}

/// `log(½ vMF(q | μ, κ) + ½ vMF(q | -μ, κ))`.
pub fn antipodal_vmf_logpdf(v: &Vmf, q: &[f64]) -> Result<f64> {
    let q = unit(q, v.dim())?;
    let t = v.kappa * dot(&v.mean_direction, &q);
    Ok(vmf_log_normalizer(v.dim(), v.kappa)? + log_add_exp(t, -t) - LN_2)
}

/// Value and derivatives `(log p, d/dμ, d/dκ)` of the antipodal mixture,
/// treating `μ` as a free vector (the caller chains through normalisation).
pub(crate) fn antipodal_vmf_logpdf_grad(mean: &[f64], kappa: f64, q: &[f64]) -> Result<(f64, Vec<f64>, f64)> {
    let dim = mean.len();
    let c = dot(mean, q);
    let t = kappa * c;
    let value = vmf_log_normalizer(dim, kappa)? + log_add_exp(t, -t) - LN_2;
    let th = t.tanh();
    let d_mean = q.iter().map(|qi| kappa * th * qi).collect();
    let d_kappa = -bessel_i_ratio(dim as f64 / 2.0 - 1.0, kappa)? + th * c;
    Ok((value, d_mean, d_kappa))
}

/// Value and derivatives `(log p, d/dμ, d/dκ)` of a single vMF, with `μ`
/// treated as a free vector.
pub(crate) fn vmf_logpdf_grad(mean: &[f64], kappa: f64, q: &[f64]) -> Result<(f64, Vec<f64>, f64)> {
    let dim = mean.len();
    let c = dot(mean, q);
    let value = vmf_log_normalizer(dim, kappa)? + kappa * c;
    let d_mean = q.iter().map(|qi| kappa * qi).collect();
    let d_kappa = -bessel_i_ratio(dim as f64 / 2.0 - 1.0, kappa)? + c;
    Ok((value, d_mean, d_kappa))
}

/// `KL(N(μ, diag σ²) || N(0, I)) = ½ Σ (μ² + σ² - 1 - log σ²)`.
pub fn kl_diag_gaussian_std_normal(mu: &[f64], sigma: &[f64]) -> Result<f64> {
    if mu.len() != sigma.len() {
        return Err(Error::Argument("KL: mean and std lengths differ".into()));
    }
    let mut total = 0.0;
    for (&m, &s) in mu.iter().zip(sigma) {
        if !(s > 0.0) {
            return Err(Error::Argument(format!("KL: std must be > 0, got {s}")));
        }
        total += 0.5 * (m * m + s * s - 1.0 - 2.0 * s.ln());
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;
    use proptest::prelude::*;

    /// Midpoint product rule in (cos θ, φ) over S².
    fn sphere_quadrature(f: impl Fn(&[f64]) -> f64, n: usize) -> f64 {
        let du = 2.0 / n as f64;
        let dphi = 2.0 * PI / n as f64;
        let mut total = 0.0;
        for i in 0..n {
            let u = -1.0 + (i as f64 + 0.5) * du;
            let s = (1.0 - u * u).sqrt();
            for j in 0..n {
                let phi = (j as f64 + 0.5) * dphi;
                total += f(&[s * phi.cos(), s * phi.sin(), u]);
            }
        }
        total * du * dphi
    }

    fn random_unit(rng: &mut Rng, dim: usize) -> Vec<f64> {
        let v: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
        let n = norm(&v);
        v.into_iter().map(|x| x / n).collect()
    }

    #[test]
    fn gaussian_examples() {
        let d = DiagGaussian::new(vec![0.0], vec![1.0]).unwrap();
        assert!((gaussian_logpdf(&d, &[0.0]).unwrap() + 0.918_938_533_204_672_7).abs() < 1e-14);
        let d = DiagGaussian::new(vec![1.0, -2.0], vec![0.5, 3.0]).unwrap();
        let expected = 2.0 * -HALF_LN_2PI - 0.5f64.ln() - 3f64.ln();
        assert!((gaussian_logpdf(&d, &[1.0, -2.0]).unwrap() - expected).abs() < 1e-14);
        let shifted = DiagGaussian::new(vec![1.7, -0.3], vec![0.5, 3.0]).unwrap();
        let a = gaussian_logpdf(&d, &[0.2, 0.4]).unwrap();
        let b = gaussian_logpdf(&shifted, &[0.2 + 0.7, 0.4 + 1.7]).unwrap();
        assert!((a - b).abs() < 1e-12);
        assert!(DiagGaussian::new(vec![0.0], vec![0.0]).is_err());
        let bad = DiagGaussian { mean: vec![0.0], std: vec![-1.0] };
        assert!(matches!(gaussian_logpdf(&bad, &[0.0]), Err(Error::Argument(_))));
    }

    #[test]
    fn gaussian_integrates_to_one() {
        // Simpson on [-10σ, 10σ]
        let d = DiagGaussian::new(vec![0.3], vec![0.7]).unwrap();
        let n = 2000;
        let (a, b) = (0.3 - 7.0, 0.3 + 7.0);
        let h = (b - a) / n as f64;
        let mut s = 0.0;
        for i in 0..=n {
            let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * gaussian_logpdf(&d, &[a + i as f64 * h]).unwrap().exp();
        }
        assert!((s * h / 3.0 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn vmf_examples() {
        let uniform = -(4.0 * PI).ln();
        let v0 = Vmf::new(vec![0.0, 0.0, 1.0], 0.0).unwrap();
        assert!((vmf_logpdf(&v0, &[1.0, 0.0, 0.0]).unwrap() - uniform).abs() < 1e-14);
        assert!((uniform + 2.531_024_246_969_290_7).abs() < 1e-12);
        // tiny κ approaches the uniform limit continuously
        let tiny = Vmf::new(vec![0.0, 0.0, 1.0], 1e-9).unwrap();
        assert!((vmf_logpdf(&tiny, &[0.6, 0.0, 0.8]).unwrap() - uniform).abs() < 1e-8);

        // C_3(κ) = κ / (4π sinh κ)
        let v = Vmf::new(vec![0.0, 1.0, 0.0], 2.0).unwrap();
        let expected = (2.0 / (4.0 * PI * 2f64.sinh())).ln() + 2.0;
        assert!((vmf_logpdf(&v, &[0.0, 1.0, 0.0]).unwrap() - expected).abs() < 1e-12);

        let flipped = Vmf::new(vec![0.0, -1.0, 0.0], 2.0).unwrap();
        let q = [0.6, 0.8, 0.0];
        let nq = [-0.6, -0.8, 0.0];
        assert_eq!(vmf_logpdf(&flipped, &nq).unwrap(), vmf_logpdf(&v, &q).unwrap());
    }

    #[test]
    fn vmf_normaliser_closed_form_d3() {
        for &k in &[1e-6f64, 0.1, 1.0, 5.0, 50.0, 300.0, 500.0] {
            let closed = k.ln() - (4.0 * PI).ln() - k - (-(-2.0 * k).exp_m1()).ln() + LN_2;
            let got = vmf_log_normalizer(3, k).unwrap();
            // relative error of C_3 itself
            assert!((got - closed).abs() <= 1e-10, "κ={k}: {got} vs {closed}");
        }
    }

    #[test]
    fn antipodal_examples() {
        let mut rng = Rng::new(8);
        for _ in 0..200 {
            let mu = random_unit(&mut rng, 4);
            let q = random_unit(&mut rng, 4);
            let nq: Vec<f64> = q.iter().map(|v| -v).collect();
            let v = Vmf::new(mu, rng.uniform() * 500.0).unwrap();
            assert!((antipodal_vmf_logpdf(&v, &q).unwrap() - antipodal_vmf_logpdf(&v, &nq).unwrap()).abs() <= 1e-12);
        }
        let v0 = Vmf::new(vec![1.0, 0.0, 0.0], 0.0).unwrap();
        assert_eq!(antipodal_vmf_logpdf(&v0, &[0.0, 1.0, 0.0]).unwrap(), vmf_logpdf(&v0, &[0.0, 1.0, 0.0]).unwrap());
    }

    #[test]
    fn antipodal_quadrature_normalisation() {
        let mut rng = Rng::new(2);
        for &kappa in &[0.5, 5.0, 50.0] {
            let v = Vmf::new(random_unit(&mut rng, 3), kappa).unwrap();
            let mass = sphere_quadrature(|q| antipodal_vmf_logpdf(&v, q).unwrap().exp(), 100);
            assert!((mass - 1.0).abs() < 1e-3, "κ={kappa}: mass {mass}");
        }
    }

    #[test]
    fn vmf_mode_is_mean_direction() {
        let mut rng = Rng::new(4);
        let mu = random_unit(&mut rng, 3);
        let v = Vmf::new(mu.clone(), 3.0).unwrap();
        let peak = vmf_logpdf(&v, &mu).unwrap();
        let n = 100;
        for i in 0..n {
            let u = -1.0 + (i as f64 + 0.5) * 2.0 / n as f64;
            let s = (1.0 - u * u).sqrt();
            for j in 0..n {
                let phi = (j as f64 + 0.5) * 2.0 * PI / n as f64;
                assert!(vmf_logpdf(&v, &[s * phi.cos(), s * phi.sin(), u]).unwrap() <= peak);
            }
        }
    }

    #[test]
    fn vmf_rejects_bad_input() {
        assert!(Vmf::new(vec![1.0, 1.0, 0.0], 1.0).is_err());
        assert!(Vmf::new(vec![1.0, 0.0, 0.0], -1.0).is_err());
        let v = Vmf { mean_direction: vec![1.0, 0.0, 0.0], kappa: -2.0 };
        assert!(matches!(vmf_logpdf(&v, &[1.0, 0.0, 0.0]), Err(Error::Argument(_))));
        let v = Vmf::new(vec![1.0, 0.0, 0.0], 2.0).unwrap();
        assert!(vmf_logpdf(&v, &[2.0, 0.0, 0.0]).is_err());
        // slightly off-unit inputs are renormalised
        assert!(vmf_logpdf(&v, &[1.0 + 5e-7, 0.0, 0.0]).is_ok());
    }

    #[test]
    fn log_densities_finite_over_range() {
        let mut rng = Rng::new(12);
        for _ in 0..500 {
            let dim = 3 + rng.index(2);
            let v = Vmf::new(random_unit(&mut rng, dim), rng.uniform() * 500.0).unwrap();
            assert!(antipodal_vmf_logpdf(&v, &random_unit(&mut rng, dim)).unwrap().is_finite());
            let g = DiagGaussian::new(vec![0.0; 3], vec![0.01 + rng.uniform(); 3]).unwrap();
            let x: Vec<f64> = (0..3).map(|_| rng.uniform_range(-50.0, 50.0)).collect();
            assert!(gaussian_logpdf(&g, &x).unwrap().is_finite());
        }
    }

    #[test]
    fn vmf_gradients_match_finite_differences() {
        type Grad = fn(&[f64], f64, &[f64]) -> Result<(f64, Vec<f64>, f64)>;
        let mut rng = Rng::new(30);
        for grad in [antipodal_vmf_logpdf_grad as Grad, vmf_logpdf_grad as Grad].into_iter().cycle().take(100) {
            let dim = 3 + rng.index(2);
            let mu = random_unit(&mut rng, dim);
            let q = random_unit(&mut rng, dim);
            let kappa = 0.1 + rng.uniform() * 80.0;
            let (_, gm, gk) = grad(&mu, kappa, &q).unwrap();
            let f = |m: &[f64], k: f64| grad(m, k, &q).unwrap().0;
            let h = 1e-6;
            let fd_k = (f(&mu, kappa + h) - f(&mu, kappa - h)) / (2.0 * h);
            assert!((fd_k - gk).abs() < 1e-6 * gk.abs().max(1.0));
            for i in 0..dim {
                let mut p = mu.clone();
                p[i] += h;
                let mut m = mu.clone();
                m[i] -= h;
                let fd = (f(&p, kappa) - f(&m, kappa)) / (2.0 * h);
                assert!((fd - gm[i]).abs() < 1e-5 * gm[i].abs().max(1.0));
            }
        }
    }

    #[test]
    fn kl_examples() {
        assert_eq!(kl_diag_gaussian_std_normal(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 0.0);
        assert!((kl_diag_gaussian_std_normal(&[1.0], &[1.0]).unwrap() - 0.5).abs() < 1e-15);
        assert!(kl_diag_gaussian_std_normal(&[0.0], &[0.0]).is_err());
    }

    proptest! {
        #[test]
        fn kl_is_nonnegative(m0 in -5.0f64..5.0, m1 in -5.0f64..5.0, s0 in 1e-3f64..10.0, s1 in 1e-3f64..10.0) {
            prop_assert!(kl_diag_gaussian_std_normal(&[m0, m1], &[s0, s1]).unwrap() >= 0.0);
        }

        #[test]
        fn antipodal_symmetry_exact(seed in 0u64..10_000, kappa in 0.0f64..500.0) {
            let mut rng = Rng::new(seed);
            let v = Vmf::new(random_unit(&mut rng, 4), kappa).unwrap();
            let q = random_unit(&mut rng, 4);
            let nq: Vec<f64> = q.iter().map(|x| -x).collect();
            prop_assert_eq!(antipodal_vmf_logpdf(&v, &q).unwrap(), antipodal_vmf_logpdf(&v, &nq).unwrap());
        }
    }
}
