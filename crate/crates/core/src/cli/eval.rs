//! Named check suites with measured values and pinned tolerances.

use std::fmt::Write as _;
use std::time::Instant;

use crate::distributions::{antipodal_vmf_logpdf, vmf_log_normalizer, Vmf};
use crate::error::{Error, Result};
use crate::geodesic::{bellman_ford, dijkstra, Connectivity, Grid, GridSpec, LatentGraph};
use crate::kinematics::PlanarChain;
use crate::metric::{MetricField, Obstacle};
use crate::nets::RbfNet;
use crate::numerics::{fd_jacobian, min_eigenvalue_sym, Matrix, Rng, DEFAULT_FD_STEP};
use crate::vae::{load_from_str, save_to_string, Model};

pub const SUITES: [&str; 7] = ["jacobians", "normalization", "metric", "graph", "edges", "roundtrip", "replan"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Comparison {
    AtMost,
    AtLeast,
    Equal,
}

impl Comparison {
    fn symbol(self) -> &'static str {
        match self {
            Comparison::AtMost => "<=",
            Comparison::AtLeast => ">=",
            Comparison::Equal => "==",
        }
    }

    fn holds(self, measured: f64, tolerance: f64) -> bool {
        match self {
            Comparison::AtMost => measured <= tolerance,
            Comparison::AtLeast => measured >= tolerance,
            Comparison::Equal => measured == tolerance,
        }
    }
}

/// One measured quantity against its tolerance. Checks with `required`
/// unset are reported but do not fail a suite.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub comparison: Comparison,
    pub tolerance: f64,
    pub required: bool,
    pub pass: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, measured: f64, comparison: Comparison, tolerance: f64) -> Self {
        Self { name: name.into(), measured, comparison, tolerance, required: true, pass: comparison.holds(measured, tolerance) }
    }

    pub fn advisory(mut self) -> Self {
        self.required = false;
        self
    }
}

/// Tab-separated table with a header row.
pub fn report(checks: &[Check]) -> String {
    let mut out = String::from("check\tmeasured\tcomparison\ttolerance\trequired\tpass\n");
    for c in checks {
        let _ = writeln!(out, "{}\t{:e}\t{}\t{:e}\t{}\t{}", c.name, c.measured, c.comparison.symbol(), c.tolerance, c.required, c.pass);
    }
    out
}

pub fn all_required_pass(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.pass || !c.required)
}

/// Inputs shared by the suites; suites that need a model or training codes
/// fail with an argument error when they are absent.
pub struct EvalContext<'a> {
    pub model: Option<&'a Model>,
    pub codes: Option<&'a [Vec<f64>]>,
    pub seed: u64,
    pub points: usize,
}

impl EvalContext<'_> {
    fn model(&self, suite: &str) -> Result<&Model> {
        self.model.ok_or_else(|| Error::Argument(format!("suite `{suite}` needs --model")))
    }

    fn codes(&self, suite: &str) -> Result<&[Vec<f64>]> {
        self.codes.ok_or_else(|| Error::Argument(format!("suite `{suite}` needs --data")))
    }
}

pub fn run_suite(name: &str, ctx: &EvalContext) -> Result<Vec<Check>> {
    match name {
        "jacobians" => jacobians(ctx.model(name)?, ctx.points, ctx.seed),
        "normalization" => normalization(ctx.seed),
        "metric" => metric(ctx.model(name)?, ctx.seed),
        "graph" => graph_oracle(ctx.seed),
        "edges" => edges(ctx.model(name)?, ctx.codes(name)?),
        "roundtrip" => roundtrip(ctx.model(name)?),
        "replan" => replan(ctx.model(name)?, ctx.codes(name)?, ctx.seed),
        other => Err(Error::Argument(format!("unknown suite `{other}`; expected one of {}", SUITES.join(", ")))),
    }
}

/// `max |a - f| / max(max |f|, 1e-6)`.
pub fn relative_error(analytic: &Matrix, reference: &Matrix) -> f64 {
    let scale = reference.max_abs().max(1e-6);
    let diff = analytic.as_slice().iter().zip(reference.as_slice()).map(|(a, f)| (a - f).abs()).fold(0.0, f64::max);
    diff / scale
}

fn precision_net(model: &Model) -> &RbfNet {
    match model {
        Model::Task(m) => m.precision(),
        Model::Joint(m) => m.precision(),
    }
}

/// A latent point near the data: a random RBF center plus a
/// bandwidth-scaled Gaussian offset.
pub fn near_data(model: &Model, rng: &mut Rng) -> Vec<f64> {
    let net = precision_net(model);
    let c = &net.centers()[rng.index(net.centers().len())];
    c.iter().map(|v| v + 0.5 * net.bandwidth() * rng.normal()).collect()
}

fn worst(errors: &mut [f64], f: impl Fn() -> Result<(Matrix, Matrix)>) -> Result<()> {
    let (a, r) = f()?;
    errors[0] = errors[0].max(relative_error(&a, &r));
    Ok(())
}

/// Analytic Jacobians of every network and of the decoded channels
/// against central finite differences.
pub fn jacobians(model: &Model, points: usize, seed: u64) -> Result<Vec<Check>> {
    let mut rng = Rng::new(seed);
    let h = DEFAULT_FD_STEP;
    let names: Vec<&str> = match model {
        Model::Task(_) => vec!["encoder_mlp", "decoder_mlp", "precision_rbf", "concentration_rbf", "decoded_position", "decoded_orientation", "decoded_sigma", "decoded_kappa", "forward_kinematics"],
        Model::Joint(_) => vec!["encoder_mlp", "decoder_mlp", "precision_rbf", "decoded_theta", "decoded_sigma", "forward_kinematics"],
    };
    let mut errs = vec![0.0; names.len()];
    let probe_chain = PlanarChain::new(vec![1.0, 0.8, 0.5])?;
    for _ in 0..points {
        let z = near_data(model, &mut rng);
        let mut e = |i: usize, f: &dyn Fn() -> Result<(Matrix, Matrix)>| worst(&mut errs[i..], f);
        match model {
            Model::Task(m) => {
                let x = m.decode(&z)?;
                let mut input = x.position.clone();
                input.extend(&x.orientation);
                e(0, &|| Ok((m.encoder().jacobian(&input)?, fd_jacobian(|v| m.encoder().forward(v).unwrap(), &input, h)?)))?;
                e(1, &|| Ok((m.decoder().jacobian(&z)?, fd_jacobian(|v| m.decoder().forward(v).unwrap(), &z, h)?)))?;
                e(2, &|| Ok((m.precision().jacobian(&z)?, fd_jacobian(|v| m.precision().forward(v).unwrap(), &z, h)?)))?;
                e(3, &|| Ok((m.concentration().jacobian(&z)?, fd_jacobian(|v| m.concentration().forward(v).unwrap(), &z, h)?)))?;
                let (_, [jx, jq, js, jk]) = m.decode_jacobians(&z)?;
                let dec = |v: &[f64]| m.decode(v).unwrap();
                e(4, &|| Ok((jx.clone(), fd_jacobian(|v| dec(v).position, &z, h)?)))?;
                e(5, &|| Ok((jq.clone(), fd_jacobian(|v| dec(v).orientation, &z, h)?)))?;
                e(6, &|| Ok((js.clone(), fd_jacobian(|v| dec(v).sigma, &z, h)?)))?;
                e(7, &|| Ok((jk.clone(), fd_jacobian(|v| vec![dec(v).kappa], &z, h)?)))?;
                let theta: Vec<f64> = (0..3).map(|_| rng.uniform_range(-3.0, 3.0)).collect();
                e(8, &|| Ok((probe_chain.fk_jacobian(&theta)?, fd_jacobian(|v| flat_fk(&probe_chain, v), &theta, h)?)))?;
            }
            Model::Joint(m) => {
                let d = m.decode(&z)?;
                let theta = d.theta.clone();
                e(0, &|| Ok((m.encoder().jacobian(&theta)?, fd_jacobian(|v| m.encoder().forward(v).unwrap(), &theta, h)?)))?;
                e(1, &|| Ok((m.decoder().jacobian(&z)?, fd_jacobian(|v| m.decoder().forward(v).unwrap(), &z, h)?)))?;
                e(2, &|| Ok((m.precision().jacobian(&z)?, fd_jacobian(|v| m.precision().forward(v).unwrap(), &z, h)?)))?;
                let (_, [jt, js]) = m.decode_jacobians(&z)?;
                e(3, &|| Ok((jt.clone(), fd_jacobian(|v| m.decode(v).unwrap().theta, &z, h)?)))?;
                e(4, &|| Ok((js.clone(), fd_jacobian(|v| m.decode(v).unwrap().sigma, &z, h)?)))?;
                e(5, &|| Ok((m.chain().fk_jacobian(&theta)?, fd_jacobian(|v| flat_fk(m.chain(), v), &theta, h)?)))?;
            }
        }
    }
    Ok(names.iter().zip(errs).map(|(n, v)| Check::new(format!("jacobian_{n}"), v, Comparison::AtMost, 1e-4)).collect())
}

fn flat_fk(chain: &PlanarChain, theta: &[f64]) -> Vec<f64> {
    let b = chain.fk_points(theta).unwrap();
    let mut out: Vec<f64> = b.points.iter().flatten().copied().collect();
    out.push(b.ee_angle);
    out
}

/// `∫ p(q) dq` over S² of the antipodal vMF by composite Simpson in the
/// polar angle from the mean direction.
pub fn antipodal_vmf_mass_s2(kappa: f64, intervals: usize) -> Result<f64> {
    let v = Vmf::new(vec![0.0, 0.0, 1.0], kappa)?;
    let n = intervals + intervals % 2;
    let h = std::f64::consts::PI / n as f64;
    let mut total = 0.0;
    for i in 0..=n {
        let t = i as f64 * h;
        let f = 2.0 * std::f64::consts::PI * t.sin() * antipodal_vmf_logpdf(&v, &[t.sin(), 0.0, t.cos()])?.exp();
        let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
        total += w * f;
    }
    Ok(total * h / 3.0)
}

/// Antipodal symmetry, quadrature mass and the closed-form `C_3(κ)`.
pub fn normalization(seed: u64) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let mut rng = Rng::new(seed);
    let mut sym: f64 = 0.0;
    for _ in 0..1000 {
        let dim = 3 + rng.index(2);
        let mut mu: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
        let n = mu.iter().map(|v| v * v).sum::<f64>().sqrt();
        mu.iter_mut().for_each(|v| *v /= n);
        let v = Vmf::new(mu, rng.uniform_range(0.01, 200.0))?;
        let mut q: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
        let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        q.iter_mut().for_each(|v| *v /= n);
        let neg: Vec<f64> = q.iter().map(|x| -x).collect();
        sym = sym.max((antipodal_vmf_logpdf(&v, &q)? - antipodal_vmf_logpdf(&v, &neg)?).abs());
    }
    checks.push(Check::new("antipodal_symmetry_log_diff", sym, Comparison::AtMost, 1e-12));
    for kappa in [0.5, 5.0, 50.0] {
        let mass = antipodal_vmf_mass_s2(kappa, 4000)?;
        checks.push(Check::new(format!("antipodal_vmf_mass_s2_kappa_{kappa}"), (mass - 1.0).abs(), Comparison::AtMost, 1e-3));
    }
    let mut c3: f64 = 0.0;
    for kappa in [1e-3f64, 0.1, 0.5, 1.0, 5.0, 20.0, 50.0, 300.0] {
        let closed = (kappa / (4.0 * std::f64::consts::PI * kappa.sinh())).ln();
        let got = vmf_log_normalizer(3, kappa)?;
        c3 = c3.max(((got - closed).exp() - 1.0).abs());
    }
    checks.push(Check::new("c3_closed_form_rel_err", c3, Comparison::AtMost, 1e-10));
    Ok(checks)
}

/// Latent box covering the RBF centers with one bandwidth of margin.
fn center_box(model: &Model) -> (Vec<f64>, Vec<f64>) {
    let net = precision_net(model);
    let d = model.latent_dim();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for c in net.centers() {
        for k in 0..d {
            lo[k] = lo[k].min(c[k]);
            hi[k] = hi[k].max(c[k]);
        }
    }
    let bw = net.bandwidth();
    (lo.iter().map(|v| v - bw).collect(), hi.iter().map(|v| v + bw).collect())
}

/// Lattice points filling `box` with at least `n` points.
fn lattice(lo: &[f64], hi: &[f64], n: usize) -> Vec<Vec<f64>> {
    let d = lo.len();
    let per = (n as f64).powf(1.0 / d as f64).ceil() as usize;
    let spec = GridSpec::new(lo.to_vec(), hi.to_vec(), vec![per.max(2); d], Connectivity::Axis).expect("valid lattice");
    let grid = Grid::new(spec).expect("valid lattice");
    (0..grid.num_nodes()).map(|i| grid.coords(i)).collect()
}

/// An obstacle at the decoded position of a latent point.
pub fn obstacle_at(model: &Model, z: &[f64], radius: f64, strength: f64) -> Result<Obstacle> {
    let center = match model {
        Model::Task(m) => m.decode(z)?.position,
        Model::Joint(m) => m.decode(z)?.body.ee_position.to_vec(),
    };
    Obstacle::new(center, radius, strength, 0.0)
}

/// Symmetry and positive semi-definiteness of the pullback metric on a
/// lattice of about 1000 points, with and without obstacles.
pub fn metric(model: &Model, seed: u64) -> Result<Vec<Check>> {
    let mut rng = Rng::new(seed);
    let (lo, hi) = center_box(model);
    let pts = lattice(&lo, &hi, 1000);
    let obstacles = vec![obstacle_at(model, &near_data(model, &mut rng), 0.05, 1000.0)?, obstacle_at(model, &near_data(model, &mut rng), 0.1, 10.0)?];
    let mut checks = vec![Check::new("metric_points", pts.len() as f64, Comparison::AtLeast, 1000.0)];
    for (label, obs) in [("free", &[][..]), ("obstacles", &obstacles[..])] {
        let field = MetricField::new(model, obs);
        let (mut asym, mut eig): (f64, f64) = (0.0, f64::INFINITY);
        for z in &pts {
            let g = field.metric(z)?;
            asym = asym.max(g.asymmetry());
            eig = eig.min(min_eigenvalue_sym(&g)?);
        }
        checks.push(Check::new(format!("metric_{label}_asymmetry"), asym, Comparison::AtMost, 0.0));
        checks.push(Check::new(format!("metric_{label}_min_eigenvalue"), eig, Comparison::AtLeast, -1e-9));
    }
    Ok(checks)
}

/// Dijkstra against Bellman–Ford on random weighted 10×10 grids.
pub fn graph_oracle(seed: u64) -> Result<Vec<Check>> {
    let mut rng = Rng::new(seed);
    let mut mismatches = 0usize;
    let mut worst: f64 = 0.0;
    for trial in 0..100 {
        let conn = if trial % 2 == 0 { Connectivity::Full } else { Connectivity::Axis };
        let grid = Grid::new(GridSpec::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![10, 10], conn)?)?;
        let w: Vec<f64> = (0..grid.num_edges()).map(|_| rng.uniform_range(0.01, 1.0)).collect();
        let start = rng.index(grid.num_nodes());
        let goal = rng.index(grid.num_nodes());
        let d = dijkstra(&grid, &w, start, goal)?;
        let bf = bellman_ford(&grid, &w, start);
        if d.cost != bf[goal] {
            mismatches += 1;
            worst = worst.max((d.cost - bf[goal]).abs());
        }
    }
    Ok(vec![Check::new("dijkstra_bellman_ford_mismatches", mismatches as f64, Comparison::Equal, 0.0), Check::new("dijkstra_bellman_ford_max_abs_diff", worst, Comparison::Equal, 0.0)])
}

/// Relative gaps `|w - √(Δzᵀ G(mid) Δz)| / √(Δzᵀ G(mid) Δz)` for every
/// `stride`-th edge of a built graph.
pub fn edge_gaps(model: &Model, graph: &LatentGraph, stride: usize) -> Result<Vec<f64>> {
    use rayon::prelude::*;
    let field = MetricField::new(model, &[]);
    (0..graph.num_edges())
        .into_par_iter()
        .step_by(stride.max(1))
        .map(|e| {
            let (a, b) = graph.grid().edge(e);
            let (za, zb) = (graph.grid().coords(a), graph.grid().coords(b));
            let mid: Vec<f64> = za.iter().zip(&zb).map(|(x, y)| 0.5 * (x + y)).collect();
            let dz: Vec<f64> = zb.iter().zip(&za).map(|(x, y)| x - y).collect();
            let q = field.metric(&mid)?.quad_form(&dz).max(0.0).sqrt();
            Ok((graph.base_weights()[e] - q).abs() / q.max(f64::MIN_POSITIVE))
        })
        .collect()
}

pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    sorted[((sorted.len() - 1) as f64 * p).round() as usize]
}

/// Edge weights against midpoint quadrature on a resolution-100 graph.
pub fn edges(model: &Model, codes: &[Vec<f64>]) -> Result<Vec<Check>> {
    let spec = GridSpec::covering(codes, crate::geodesic::BOUNDS_MARGIN, 100)?;
    let graph = LatentGraph::build(model, spec, codes, &[])?;
    let mut gaps = edge_gaps(model, &graph, 1)?;
    gaps.sort_by(f64::total_cmp);
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    let within = gaps.iter().filter(|g| **g <= 0.05).count() as f64 / gaps.len() as f64;
    Ok(vec![
        Check::new("edge_gap_mean", mean, Comparison::AtMost, 0.05),
        Check::new("edge_gap_p95", quantile(&gaps, 0.95), Comparison::AtMost, 0.05),
        Check::new("edge_fraction_within_5pct", within, Comparison::AtLeast, 1.0).advisory(),
        Check::new("edge_gap_max", *gaps.last().unwrap_or(&0.0), Comparison::AtMost, 0.05).advisory(),
    ])
}

/// Save, load and save again.
pub fn roundtrip(model: &Model) -> Result<Vec<Check>> {
    let a = save_to_string(model)?;
    let back = load_from_str(&a)?;
    let b = save_to_string(&back)?;
    let differing = a.bytes().zip(b.bytes()).filter(|(x, y)| x != y).count() + a.len().abs_diff(b.len());
    Ok(vec![Check::new("model_roundtrip_differing_bytes", differing as f64, Comparison::Equal, 0.0)])
}

/// Obstacle updates on a prebuilt 100×100 graph: per-update wall time
/// and decoder calls.
pub fn replan(model: &Model, codes: &[Vec<f64>], seed: u64) -> Result<Vec<Check>> {
    let mut rng = Rng::new(seed);
    let spec = GridSpec::covering(codes, crate::geodesic::BOUNDS_MARGIN, 100)?;
    let mut graph = LatentGraph::build(model, spec, codes, &[])?;
    let start = codes[rng.index(codes.len())].clone();
    let goal = codes[rng.index(codes.len())].clone();
    let updates = 20;
    let placed: Vec<Obstacle> = (0..updates).map(|_| obstacle_at(model, &codes[rng.index(codes.len())], 0.05, 1000.0)).collect::<Result<_>>()?;
    let calls = model.decode_calls();
    let mut worst: f64 = 0.0;
    let mut total = 0.0;
    for o in &placed {
        let obs = std::slice::from_ref(o);
        let t = Instant::now();
        graph.replan(obs, &start, &goal, None)?;
        let ms = t.elapsed().as_secs_f64() * 1e3;
        worst = worst.max(ms);
        total += ms;
    }
    let extra = model.decode_calls() - calls;
    Ok(vec![
        Check::new("replan_max_ms", worst, Comparison::AtMost, 100.0),
        Check::new("replan_mean_ms_stretch", total / updates as f64, Comparison::AtMost, 10.0).advisory(),
        Check::new("replan_decoder_calls", extra as f64, Comparison::Equal, 0.0),
    ])
}
