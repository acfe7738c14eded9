//! Discrete geodesics: a latent grid whose nodes are decoded once, edge
//! weights from decoded finite differences, Dijkstra search, and a cubic
//! spline through the resulting node path.
//!
//! Obstacles only rescale the cached positional channels of nearby edges,
//! so replanning after an obstacle moves never touches the decoder.

mod cache;
mod grid;
mod spline;

pub use cache::{read_graph, write_graph, GRAPH_FORMAT_VERSION};
pub use grid::{bellman_ford, dijkstra, Connectivity, Grid, GraphPath, GridSpec, BOUNDS_MARGIN};
pub use spline::{default_control_points, GeodesicSpline};

use std::time::Instant;

use rayon::prelude::*;

use crate::datasets::{DemoSet, Demonstration, Space};
use crate::error::{Error, Result};
use crate::kinematics::BodyState;
use crate::metric::{ambient_scale, check_obstacles, sample_velocities, MetricField, Obstacle};
use crate::numerics::{dot, median, norm, sq_dist, Matrix};
use crate::vae::Model;

/// Edges are reweighted when a cached midpoint lies within this many
/// effective radii of an obstacle.
pub const DEFAULT_INFLUENCE: f64 = 4.0;

/// The high-energy flag fires when the largest directional energy density
/// along a plan exceeds this multiple of the graph's reference density.
pub const DEFAULT_ENERGY_THRESHOLD: f64 = 50.0;

/// What a node's decoded values describe.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeLayout {
    /// `[μ_x (p), σ_x (p), μ_q (D), 1/κ]`; one ambient point, the position.
    Task { pos_dim: usize, rot_dim: usize },
    /// `[μ_θ (η), σ_θ (η), p_0..p_η (2 each), ee angle]`; η+1 body points.
    Joint { dof: usize },
}

impl NodeLayout {
    pub fn of(model: &Model) -> Self {
        match model {
            Model::Task(m) => NodeLayout::Task { pos_dim: m.pos_dim(), rot_dim: m.rot_dim() },
            Model::Joint(m) => NodeLayout::Joint { dof: m.chain().dof() },
        }
    }

    pub fn features(&self) -> usize {
        match *self {
            NodeLayout::Task { pos_dim, rot_dim } => 2 * pos_dim + rot_dim + 1,
            NodeLayout::Joint { dof } => 2 * dof + 2 * (dof + 1) + 1,
        }
    }

    /// Ambient points per node.
    pub fn points(&self) -> usize {
        match *self {
            NodeLayout::Task { .. } => 1,
            NodeLayout::Joint { dof } => dof + 1,
        }
    }

    /// Dimension of each ambient point.
    pub fn point_dim(&self) -> usize {
        match *self {
            NodeLayout::Task { pos_dim, .. } => pos_dim,
            NodeLayout::Joint { .. } => 2,
        }
    }
}

/// Latent grid with cached decoded nodes and per-edge channel
/// displacements.
///
/// Edge weight: `√(Σ_m s(p̄_m) c_m + r)` where `c_m` holds the squared
/// displacement of body point `m` plus its uncertainty channel and `r` the
/// unit-weight channels (orientation and κ, or the end-effector angle).
#[derive(Clone, Debug)]
pub struct LatentGraph {
    pub(crate) grid: Grid,
    pub(crate) layout: NodeLayout,
    pub(crate) node_values: Vec<f64>,
    pub(crate) edge_point_sq: Vec<f64>,
    pub(crate) edge_rest: Vec<f64>,
    pub(crate) base: Vec<f64>,
    pub(crate) current: Vec<f64>,
    pub(crate) dirty: Vec<u32>,
    pub(crate) obstacles: Vec<Obstacle>,
    pub(crate) support: Vec<u32>,
    pub(crate) reference_density: f64,
    pub influence: f64,
    /// Free-form provenance (the CLI stores the model hash here).
    pub tag: String,
}

fn node_features(model: &Model, z: &[f64]) -> Result<(Vec<f64>, Option<Matrix>)> {
    match model {
        Model::Task(m) => {
            let d = m.decode(z)?;
            let mut v = d.position;
            v.extend(d.sigma);
            v.extend(d.orientation);
            v.push(1.0 / d.kappa);
            Ok((v, None))
        }
        Model::Joint(m) => {
            let d = m.decode(z)?;
            let jfk = m.chain().fk_jacobian(&d.theta)?;
            let mut v = d.theta;
            v.extend(d.sigma);
            for p in &d.body.points {
                v.extend(p);
            }
            v.push(d.body.ee_angle);
            Ok((v, Some(jfk)))
        }
    }
}

impl LatentGraph {
    /// Decodes every node once and derives base edge weights. `codes` are
    /// the encoded training data: they must lie inside the grid with the
    /// required margin, and their nearest nodes form the support set used
    /// for the reference energy density.
    pub fn build(model: &Model, spec: GridSpec, codes: &[Vec<f64>], obstacles: &[Obstacle]) -> Result<Self> {
        if spec.dim() != model.latent_dim() {
            return Err(Error::Argument(format!("grid is {}-dimensional, model latent space is {}", spec.dim(), model.latent_dim())));
        }
        spec.check_covers(codes)?;
        let grid = Grid::new(spec)?;
        let layout = NodeLayout::of(model);
        let decoded: Vec<(Vec<f64>, Option<Matrix>)> =
            (0..grid.num_nodes()).into_par_iter().map(|n| node_features(model, &grid.coords(n))).collect::<Result<_>>()?;
        let f = layout.features();
        let mut node_values = Vec::with_capacity(f * grid.num_nodes());
        for (v, _) in &decoded {
            node_values.extend(v);
        }
        let jac: Vec<Option<Matrix>> = decoded.into_iter().map(|(_, j)| j).collect();
        let m = layout.points();
        let per_edge: Vec<(Vec<f64>, f64)> = (0..grid.num_edges())
            .into_par_iter()
            .map(|e| {
                let (a, b) = grid.edge(e);
                edge_channels(layout, &node_values[a * f..(a + 1) * f], &node_values[b * f..(b + 1) * f], jac[a].as_ref(), jac[b].as_ref())
            })
            .collect();
        let mut edge_point_sq = Vec::with_capacity(m * per_edge.len());
        let mut edge_rest = Vec::with_capacity(per_edge.len());
        for (c, r) in per_edge {
            edge_point_sq.extend(c);
            edge_rest.push(r);
        }
        let mut graph = Self {
            base: Vec::new(),
            current: Vec::new(),
            grid,
            layout,
            node_values,
            edge_point_sq,
            edge_rest,
            dirty: Vec::new(),
            obstacles: Vec::new(),
            support: Vec::new(),
            reference_density: 0.0,
            influence: DEFAULT_INFLUENCE,
            tag: String::new(),
        };
        graph.base = (0..graph.grid.num_edges()).map(|e| graph.weight_with(e, |_| 1.0)).collect();
        if let Some(e) = graph.base.iter().position(|w| !w.is_finite()) {
            return Err(Error::Build(format!("edge {e} has a non-finite weight")));
        }
        graph.current = graph.base.clone();
        let mut support: Vec<u32> = codes.iter().map(|c| graph.grid.snap(c).map(|n| n as u32)).collect::<Result<_>>()?;
        support.sort_unstable();
        support.dedup();
        graph.support = support;
        graph.reference_density = graph.compute_reference_density();
        graph.reweight(obstacles)?;
        Ok(graph)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn spec(&self) -> &GridSpec {
        self.grid.spec()
    }

    pub fn layout(&self) -> NodeLayout {
        self.layout
    }

    pub fn num_edges(&self) -> usize {
        self.grid.num_edges()
    }

    pub fn base_weights(&self) -> &[f64] {
        &self.base
    }

    pub fn weights(&self) -> &[f64] {
        &self.current
    }

    /// Active obstacle snapshot.
    pub fn obstacles(&self) -> &[Obstacle] {
        &self.obstacles
    }

    /// Cached decoded values of `node` (see [`NodeLayout`]).
    pub fn node_values(&self, node: usize) -> &[f64] {
        let f = self.layout.features();
        &self.node_values[node * f..(node + 1) * f]
    }

    /// Cached ambient point `m` of `node`.
    pub fn node_point(&self, node: usize, m: usize) -> &[f64] {
        let v = self.node_values(node);
        match self.layout {
            NodeLayout::Task { pos_dim, .. } => &v[..pos_dim],
            NodeLayout::Joint { dof } => &v[2 * dof + 2 * m..2 * dof + 2 * m + 2],
        }
    }

    pub fn support_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.support.iter().map(|&n| n as usize)
    }

    /// Median over support nodes of the per-node median of `w² / |Δz|²`
    /// across incident edges (base weights).
    pub fn reference_density(&self) -> f64 {
        self.reference_density
    }

    fn compute_reference_density(&self) -> f64 {
        let mut per_node: Vec<f64> = self
            .support
            .iter()
            .map(|&n| {
                let n = n as usize;
                let z = self.grid.coords(n);
                let mut d: Vec<f64> = self
                    .grid
                    .neighbours(n)
                    .map(|(v, e)| self.base[e] * self.base[e] / sq_dist(&z, &self.grid.coords(v)))
                    .collect();
                median(&mut d)
            })
            .collect();
        median(&mut per_node)
    }

    fn midpoint(&self, e: usize, m: usize) -> Vec<f64> {
        let (a, b) = self.grid.edge(e);
        self.node_point(a, m).iter().zip(self.node_point(b, m)).map(|(x, y)| 0.5 * (x + y)).collect()
    }

    fn weight_with(&self, e: usize, scale: impl Fn(&[f64]) -> f64) -> f64 {
        let m = self.layout.points();
        let mut total = self.edge_rest[e];
        for k in 0..m {
            let c = self.edge_point_sq[e * m + k];
            total += if c == 0.0 { 0.0 } else { scale(&self.midpoint(e, k)) * c };
        }
        total.sqrt()
    }

    fn influenced(&self, e: usize, obstacles: &[Obstacle]) -> bool {
        (0..self.layout.points()).any(|k| {
            let mid = self.midpoint(e, k);
            obstacles.iter().any(|o| o.strength > 0.0 && o.distance(&mid) < self.influence * o.effective_radius())
        })
    }

    /// Installs a new obstacle snapshot: previously rescaled edges return to
    /// their base weights, and edges whose cached midpoints lie within the
    /// influence radius are recomputed. Returns the number of rescaled
    /// edges. No decoder evaluation takes place.
    pub fn reweight(&mut self, obstacles: &[Obstacle]) -> Result<usize> {
        check_obstacles(obstacles, self.layout.point_dim())?;
        for &e in &self.dirty {
            self.current[e as usize] = self.base[e as usize];
        }
        self.dirty.clear();
        self.obstacles = obstacles.to_vec();
        if obstacles.iter().all(|o| o.strength == 0.0) {
            return Ok(0);
        }
        let touched: Vec<(u32, f64)> = (0..self.num_edges())
            .into_par_iter()
            .filter(|&e| self.influenced(e, obstacles))
            .map(|e| (e as u32, self.weight_with(e, |p| ambient_scale(p, obstacles))))
            .collect();
        for &(e, w) in &touched {
            self.current[e as usize] = w;
            self.dirty.push(e);
        }
        Ok(touched.len())
    }

    /// Dijkstra between the nodes nearest to `start` and `goal` under the
    /// current weights.
    pub fn shortest_path(&self, start: &[f64], goal: &[f64]) -> Result<GraphPath> {
        dijkstra(&self.grid, &self.current, self.grid.snap(start)?, self.grid.snap(goal)?)
    }

    /// Reweight, search and spline fit; the part of planning that runs on
    /// every obstacle update. The snapped endpoints are replaced by the
    /// exact requested ones before fitting.
    pub fn replan(
        &mut self,
        obstacles: &[Obstacle],
        start: &[f64],
        goal: &[f64],
        control_points: Option<usize>,
    ) -> Result<(GraphPath, GeodesicSpline)> {
        self.replan_timed(obstacles, start, goal, control_points).map(|(p, s, _)| (p, s))
    }

    /// [`LatentGraph::replan`] with wall-clock times of its phases.
    pub fn replan_timed(
        &mut self,
        obstacles: &[Obstacle],
        start: &[f64],
        goal: &[f64],
        control_points: Option<usize>,
    ) -> Result<(GraphPath, GeodesicSpline, PhaseTimes)> {
        let ms = |t: Instant| t.elapsed().as_secs_f64() * 1e3;
        let t = Instant::now();
        self.reweight(obstacles)?;
        let reweight_ms = ms(t);
        let t = Instant::now();
        let path = self.shortest_path(start, goal)?;
        let search_ms = ms(t);
        let t = Instant::now();
        let mut nodes: Vec<Vec<f64>> = path.nodes.iter().map(|&n| self.grid.coords(n)).collect();
        if nodes.len() == 1 {
            nodes.push(nodes[0].clone());
        }
        nodes[0] = start.to_vec();
        *nodes.last_mut().unwrap() = goal.to_vec();
        let k = control_points.unwrap_or_else(|| default_control_points(nodes.len()));
        let spline = GeodesicSpline::fit(&nodes, k)?;
        let spline_ms = ms(t);
        Ok((path, spline, PhaseTimes { reweight_ms, search_ms, spline_ms }))
    }
}

/// Wall-clock milliseconds of the replanning phases.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PhaseTimes {
    pub reweight_ms: f64,
    pub search_ms: f64,
    pub spline_ms: f64,
}

impl PhaseTimes {
    pub fn total_ms(&self) -> f64 {
        self.reweight_ms + self.search_ms + self.spline_ms
    }

    /// `key=value` lines.
    pub fn to_text(&self) -> String {
        format!(
            "reweight_ms={:.3}\nsearch_ms={:.3}\nspline_ms={:.3}\nreplan_ms={:.3}\n",
            self.reweight_ms,
            self.search_ms,
            self.spline_ms,
            self.total_ms()
        )
    }
}

/// Per-point squared displacements and unit-weight remainder of one edge.
fn edge_channels(layout: NodeLayout, a: &[f64], b: &[f64], ja: Option<&Matrix>, jb: Option<&Matrix>) -> (Vec<f64>, f64) {
    let diff = |r: std::ops::Range<usize>| -> f64 { a[r.clone()].iter().zip(&b[r]).map(|(x, y)| (x - y) * (x - y)).sum() };
    match layout {
        NodeLayout::Task { pos_dim: p, rot_dim: d } => {
            let c = diff(0..p) + diff(p..2 * p);
            let rest = diff(2 * p..2 * p + d) + diff(2 * p + d..2 * p + d + 1);
            (vec![c], rest)
        }
        NodeLayout::Joint { dof: n } => {
            let (ja, jb) = (ja.expect("joint nodes carry FK Jacobians"), jb.expect("joint nodes carry FK Jacobians"));
            let ds: Vec<f64> = (n..2 * n).map(|i| b[i] - a[i]).collect();
            // uncertainty channel J_FK Δσ with the Jacobian averaged over the edge
            let mut v = ja.mat_vec(&ds);
            for (x, y) in v.iter_mut().zip(jb.mat_vec(&ds)) {
                *x = 0.5 * (*x + y);
            }
            let c = (0..=n).map(|m| diff(2 * n + 2 * m..2 * n + 2 * m + 2) + v[2 * m] * v[2 * m] + v[2 * m + 1] * v[2 * m + 1]).collect();
            let ang = 2 * n + 2 * (n + 1);
            let rest = diff(ang..ang + 1) + v[2 * (n + 1)] * v[2 * (n + 1)];
            (c, rest)
        }
    }
}

/// Planning knobs.
#[derive(Clone, Debug, PartialEq)]
pub struct PlanOptions {
    /// Samples of the decoded trajectory.
    pub samples: usize,
    /// Spline control points; `None` uses [`default_control_points`].
    pub control_points: Option<usize>,
    pub energy_threshold: f64,
}

impl Default for PlanOptions {
    fn default() -> Self {
        Self { samples: 100, control_points: None, energy_threshold: DEFAULT_ENERGY_THRESHOLD }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Diagnostics {
    /// Sum of current edge weights along the graph path.
    pub graph_cost: f64,
    pub path_nodes: usize,
    /// Trapezoid energy of the spline under the (reshaped) pullback metric.
    pub energy: f64,
    /// Largest pointwise `ċᵀ G ċ` along the samples.
    pub max_energy_density: f64,
    /// Largest `ċᵀ G ċ / |ċ|²` along the samples.
    pub max_directional_density: f64,
    pub reference_density: f64,
    pub high_energy: bool,
    /// Smallest `|p - o| - r_eff` over samples, body points and obstacles.
    pub min_clearance: Option<f64>,
    pub fit_rms: f64,
    pub edges_reweighted: usize,
}

impl Diagnostics {
    /// `key=value` lines.
    pub fn to_text(&self) -> String {
        let clearance = self.min_clearance.map_or("none".to_string(), |c| format!("{c:e}"));
        format!(
            "graph_cost={:e}\npath_nodes={}\nenergy={:e}\nmax_energy_density={:e}\nmax_directional_density={:e}\nreference_density={:e}\nhigh_energy={}\nmin_clearance={}\nfit_rms={:e}\nedges_reweighted={}\n",
            self.graph_cost,
            self.path_nodes,
            self.energy,
            self.max_energy_density,
            self.max_directional_density,
            self.reference_density,
            self.high_energy,
            clearance,
            self.fit_rms,
            self.edges_reweighted
        )
    }
}

/// Decoded plan samples.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub latent: Vec<Vec<f64>>,
    /// Rows in the trajectory CSV layout: `[x, q]` or `θ`.
    pub rows: Vec<Vec<f64>>,
    pub sigma: Vec<Vec<f64>>,
    /// Body states of joint-space plans.
    pub bodies: Vec<BodyState>,
    pub space: Space,
}

impl Trajectory {
    pub fn to_demo_set(&self, traj_id: &str) -> Result<DemoSet> {
        DemoSet::new(self.space, vec![Demonstration { traj_id: traj_id.to_string(), times: self.times.clone(), rows: self.rows.clone() }])
    }

    /// Ambient points of sample `i`: the position, or every body point.
    pub fn points(&self, i: usize) -> Vec<Vec<f64>> {
        match self.space {
            Space::Task { pos_dim, .. } => vec![self.rows[i][..pos_dim].to_vec()],
            Space::Joint { .. } => self.bodies[i].points.iter().map(|p| p.to_vec()).collect(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Plan {
    pub path: GraphPath,
    pub spline: GeodesicSpline,
    pub trajectory: Trajectory,
    pub diagnostics: Diagnostics,
    pub timings: PhaseTimes,
}

/// Encoder mean of an ambient pose or joint vector.
pub fn encode_endpoint(model: &Model, x: &[f64]) -> Result<Vec<f64>> {
    Ok(model.encode(x)?.0)
}

/// Full plan: [`LatentGraph::replan`] followed by sampling, decoding and
/// energy monitoring.
pub fn plan(model: &Model, graph: &mut LatentGraph, start: &[f64], goal: &[f64], obstacles: &[Obstacle], opts: &PlanOptions) -> Result<Plan> {
    if NodeLayout::of(model) != graph.layout || model.latent_dim() != graph.spec().dim() {
        return Err(Error::Argument("graph was built for a different model layout".into()));
    }
    if opts.samples < 2 {
        return Err(Error::Argument(format!("at least 2 samples are required, got {}", opts.samples)));
    }
    let (path, spline, timings) = graph.replan_timed(obstacles, start, goal, opts.control_points)?;
    let edges_reweighted = graph.dirty.len();
    let latent = spline.sample(opts.samples)?;
    let times: Vec<f64> = (0..opts.samples).map(|i| i as f64 / (opts.samples - 1) as f64).collect();
    let (rows, sigma, bodies, space) = decode_samples(model, &latent)?;
    let trajectory = Trajectory { times, latent, rows, sigma, bodies, space };

    let field = MetricField::new(model, obstacles);
    let vel = sample_velocities(&trajectory.latent)?;
    let metrics: Vec<Matrix> = trajectory.latent.par_iter().map(|z| field.metric(z)).collect::<Result<_>>()?;
    let dens: Vec<f64> = metrics.iter().zip(&vel).map(|(g, v)| g.quad_form(v).max(0.0)).collect();
    let directional = metrics
        .iter()
        .zip(&vel)
        .map(|(g, v)| {
            let n2 = dot(v, v);
            if n2 > 0.0 {
                g.quad_form(v).max(0.0) / n2
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max);
    let h = 1.0 / (dens.len() - 1) as f64;
    let energy = h * (dens.iter().sum::<f64>() - 0.5 * (dens[0] + dens[dens.len() - 1]));
    let min_clearance = if obstacles.is_empty() {
        None
    } else {
        let mut best = f64::INFINITY;
        for i in 0..trajectory.rows.len() {
            for p in trajectory.points(i) {
                for o in obstacles {
                    best = best.min(o.distance(&p) - o.effective_radius());
                }
            }
        }
        Some(best)
    };
    let diagnostics = Diagnostics {
        graph_cost: path.cost,
        path_nodes: path.nodes.len(),
        energy,
        max_energy_density: dens.iter().copied().fold(0.0, f64::max),
        max_directional_density: directional,
        reference_density: graph.reference_density,
        high_energy: directional > opts.energy_threshold * graph.reference_density,
        min_clearance,
        fit_rms: spline.rms,
        edges_reweighted,
    };
    Ok(Plan { path, spline, trajectory, diagnostics, timings })
}

type Decoded = (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<BodyState>, Space);

fn decode_samples(model: &Model, latent: &[Vec<f64>]) -> Result<Decoded> {
    match model {
        Model::Task(m) => {
            let mut rows = Vec::with_capacity(latent.len());
            let mut sigma = Vec::with_capacity(latent.len());
            for z in latent {
                let d = m.decode(z)?;
                let mut r = d.position;
                r.extend(&d.orientation);
                debug_assert!((norm(&d.orientation) - 1.0).abs() < 1e-9);
                rows.push(r);
                sigma.push(d.sigma);
            }
            Ok((rows, sigma, Vec::new(), Space::Task { pos_dim: m.pos_dim(), rot_dim: m.rot_dim() }))
        }
        Model::Joint(m) => {
            let mut rows = Vec::with_capacity(latent.len());
            let mut sigma = Vec::with_capacity(latent.len());
            let mut bodies = Vec::with_capacity(latent.len());
            for z in latent {
                let d = m.decode(z)?;
                rows.push(d.theta);
                sigma.push(d.sigma);
                bodies.push(d.body);
            }
            Ok((rows, sigma, bodies, Space::Joint { dof: m.chain().dof() }))
        }
    }
}

#[cfg(test)]
mod tests;
