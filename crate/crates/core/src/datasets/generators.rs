use std::f64::consts::{FRAC_PI_2, PI};

use super::{DemoSet, Demonstration, Space};
use crate::error::{Error, Result};
use crate::kinematics::PlanarChain;
use crate::numerics::{dot, norm, Rng};

pub const DEFAULT_SAMPLES: usize = 200;

/// Gaussian jitter clipped at 2.5 standard deviations, so generated data
/// stays within a known envelope of its template.
fn jitter(rng: &mut Rng, sd: f64) -> f64 {
    rng.normal().clamp(-2.5, 2.5) * sd
}

fn unit_times(samples: usize) -> Vec<f64> {
    let n = samples.max(2);
    (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
}

fn normalized(v: &[f64]) -> Vec<f64> {
    let n = norm(v);
    v.iter().map(|x| x / n).collect()
}

/// Adds tangent-plane noise of standard deviation `sd` (radians) to a unit
/// vector.
fn perturb_direction(q: &[f64], sd: f64, rng: &mut Rng) -> Vec<f64> {
    if sd == 0.0 {
        return q.to_vec();
    }
    let noise: Vec<f64> = q.iter().map(|_| jitter(rng, sd)).collect();
    let along = dot(&noise, q);
    let moved: Vec<f64> = q.iter().zip(&noise).map(|(a, n)| a + n - along * a).collect();
    normalized(&moved)
}

/// Monotone time warp `s + a sin(πs)` fixing both endpoints.
fn warp(s: f64, a: f64) -> f64 {
    s + a.clamp(-0.2, 0.2) * (PI * s).sin()
}

const J_STEM: f64 = 0.6;
const J_HOOK_RADIUS: f64 = 0.2;

/// Arc-length parameterised J: a vertical stem from (0.4, 1.0) down to
/// (0.4, 0.4), then a half-circle hook ending at (0.0, 0.4).
pub fn j_template(s: f64) -> [f64; 2] {
    let hook = PI * J_HOOK_RADIUS;
    let l = s.clamp(0.0, 1.0) * (J_STEM + hook);
    if l <= J_STEM {
        [0.4, 1.0 - l]
    } else {
        let a = -(l - J_STEM) / J_HOOK_RADIUS;
        [0.2 + J_HOOK_RADIUS * a.cos(), 0.4 + J_HOOK_RADIUS * a.sin()]
    }
}

/// Great-circle arc of 150° on S², symmetric about `(1, 0, 1)/√2`.
fn c_template(s: f64) -> [f64; 3] {
    let phi = (s.clamp(0.0, 1.0) - 0.5) * 150f64.to_radians();
    let h = 1.0 / 2f64.sqrt();
    [phi.cos() * h, phi.sin(), phi.cos() * h]
}

/// J-shaped positions in R² with C-arc directions on S². Trajectory `i`
/// is translated along `(1, 1)/√2` by an offset spaced evenly over
/// `[-spread, spread]`, so the demonstrations sweep a band around the J.
pub fn gen_jc(n_traj: usize, noise: f64, spread: f64, samples: usize, rng: &mut Rng) -> Result<DemoSet> {
    if n_traj == 0 {
        return Err(Error::Argument("gen_jc needs at least one trajectory".into()));
    }
    if !(spread >= 0.0 && spread.is_finite()) {
        return Err(Error::Argument(format!("gen_jc spread must be a finite non-negative number, got {spread}")));
    }
    let times = unit_times(samples);
    let mut demos = Vec::with_capacity(n_traj);
    for i in 0..n_traj {
        let offset = if n_traj > 1 { spread * (2.0 * i as f64 / (n_traj - 1) as f64 - 1.0) } else { 0.0 };
        let shift = offset / 2f64.sqrt();
        let a = jitter(rng, noise);
        let mut rows = Vec::with_capacity(times.len());
        for &t in &times {
            let s = warp(t, a);
            let p = j_template(s);
            let q = perturb_direction(&c_template(s), noise, rng);
            rows.push(vec![p[0] + shift + jitter(rng, noise), p[1] + shift + jitter(rng, noise), q[0], q[1], q[2]]);
        }
        demos.push(Demonstration { traj_id: format!("jc_{i:02}"), times: times.clone(), rows });
    }
    DemoSet::new(Space::Task { pos_dim: 2, rot_dim: 3 }, demos)
}

/// Hamilton product of `(w, x, y, z)` quaternions.
fn quat_mul(a: &[f64; 4], b: &[f64; 4]) -> [f64; 4] {
    [
        a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
        a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
        a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
        a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0],
    ]
}

fn axis_angle(axis: [f64; 3], angle: f64) -> [f64; 4] {
    let (s, c) = (angle / 2.0).sin_cos();
    [c, axis[0] * s, axis[1] * s, axis[2] * s]
}

fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

fn lerp3(a: [f64; 3], b: [f64; 3], t: f64) -> [f64; 3] {
    [a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, a[2] + (b[2] - a[2]) * t]
}

fn bezier(p0: [f64; 3], c: [f64; 3], p2: [f64; 3], t: f64) -> [f64; 3] {
    let u = 1.0 - t;
    [0, 1, 2].map(|i| u * u * p0[i] + 2.0 * u * t * c[i] + t * t * p2[i])
}

/// Gripper pointing down: a half turn about x.
const GRASP_START: [f64; 4] = [0.0, 1.0, 0.0, 0.0];

/// Reach-and-grasp in R³ x S³: a straight approach to a pre-grasp point,
/// then a curved final approach during which the gripper turns 90° about
/// the vertical axis.
pub fn gen_grasp(n_traj: usize, noise: f64, samples: usize, rng: &mut Rng) -> Result<DemoSet> {
    gen_grasp_targets(n_traj, 1, noise, samples, rng)
}

/// [`gen_grasp`] towards `n_targets` grasp points spread on an arc; ids
/// are `t<k>_<i>`, or `grasp_<i>` for a single target.
pub fn gen_grasp_targets(n_traj: usize, n_targets: usize, noise: f64, samples: usize, rng: &mut Rng) -> Result<DemoSet> {
    if n_traj == 0 || n_targets == 0 {
        return Err(Error::Argument("gen_grasp needs at least one trajectory and target".into()));
    }
    let times = unit_times(samples);
    let mut demos = Vec::new();
    for k in 0..n_targets {
        let beta = if n_targets == 1 { 0.0 } else { -0.6 + 1.2 * k as f64 / (n_targets - 1) as f64 };
        let target = [0.45 + 0.25 * beta.cos(), 0.25 * beta.sin(), 0.12];
        for i in 0..n_traj {
            let start = [0.1 + jitter(rng, noise), -0.4 + jitter(rng, noise), 0.55 + jitter(rng, noise)];
            let pre = [0.5 * (start[0] + target[0]), -0.1, 0.4];
            let ctrl = [target[0], 0.5 * (pre[1] + target[1]), pre[2]];
            let mut rows = Vec::with_capacity(times.len());
            for &t in &times {
                let p = if t <= 0.5 { lerp3(start, pre, t / 0.5) } else { bezier(pre, ctrl, target, (t - 0.5) / 0.5) };
                let turn = FRAC_PI_2 * smoothstep((t - 0.5) / 0.5);
                let q = quat_mul(&axis_angle([0.0, 0.0, 1.0], turn), &GRASP_START);
                let q = perturb_direction(&q, noise * 0.2, rng);
                let mut row = vec![p[0] + jitter(rng, noise), p[1] + jitter(rng, noise), p[2] + jitter(rng, noise)];
                row.extend(q);
                rows.push(row);
            }
            let id = if n_targets == 1 { format!("grasp_{i:02}") } else { format!("t{k}_{i:02}") };
            demos.push(Demonstration { traj_id: id, times: times.clone(), rows });
        }
    }
    DemoSet::new(Space::Task { pos_dim: 3, rot_dim: 4 }, demos)
}

/// Closed-form inverse kinematics of the first two links for a target
/// relative to the base. `elbow_up` selects `θ_2 ≤ 0`.
pub fn two_link_ik(l1: f64, l2: f64, target: [f64; 2], elbow_up: bool) -> Result<[f64; 2]> {
    let r2 = target[0] * target[0] + target[1] * target[1];
    let c2 = (r2 - l1 * l1 - l2 * l2) / (2.0 * l1 * l2);
    if !(c2.abs() <= 1.0 + 1e-12) {
        return Err(Error::Argument(format!(
            "target ({:.4}, {:.4}) is outside the reachable annulus [{}, {}]",
            target[0],
            target[1],
            (l1 - l2).abs(),
            l1 + l2
        )));
    }
    let mut t2 = c2.clamp(-1.0, 1.0).acos();
    if elbow_up {
        t2 = -t2;
    }
    let t1 = target[1].atan2(target[0]) - (l2 * t2.sin()).atan2(l1 + l2 * t2.cos());
    Ok([wrap_angle(t1), t2])
}

fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

/// S-shaped end-effector path `(cx + w sin 2πs, cy + h (1/2 - s))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SCurve {
    pub center: [f64; 2],
    pub width: f64,
    pub height: f64,
}

impl Default for SCurve {
    fn default() -> Self {
        Self { center: [1.2, 0.0], width: 0.25, height: 0.8 }
    }
}

impl SCurve {
    pub fn point(&self, s: f64) -> [f64; 2] {
        [self.center[0] + self.width * (2.0 * PI * s).sin(), self.center[1] + self.height * (0.5 - s)]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct S2DofData {
    pub demos: DemoSet,
    /// End-effector waypoints of every demonstration.
    pub waypoints: Vec<Vec<[f64; 2]>>,
}

/// Two-link joint trajectories whose end-effector traces an S, once with
/// the elbow up (`up_<i>`) and once with the elbow down (`down_<i>`).
pub fn gen_s2dof(n_per_branch: usize, chain: &PlanarChain, curve: &SCurve, samples: usize, rng: &mut Rng) -> Result<S2DofData> {
    if chain.dof() != 2 {
        return Err(Error::Argument(format!("gen_s2dof needs a 2-link chain, got {} links", chain.dof())));
    }
    if n_per_branch == 0 {
        return Err(Error::Argument("gen_s2dof needs at least one trajectory per branch".into()));
    }
    let (l1, l2) = (chain.link_lengths()[0], chain.link_lengths()[1]);
    let base = chain.base_position();
    let times = unit_times(samples);
    let mut shifts = Vec::with_capacity(n_per_branch);
    for _ in 0..n_per_branch {
        shifts.push([jitter(rng, 0.01), jitter(rng, 0.01)]);
    }
    let mut demos = Vec::new();
    let mut waypoints = Vec::new();
    for (label, up) in [("up", true), ("down", false)] {
        for (i, shift) in shifts.iter().enumerate() {
            let mut rows = Vec::with_capacity(times.len());
            let mut wps = Vec::with_capacity(times.len());
            for &t in &times {
                let p = curve.point(t);
                let p = [p[0] + shift[0], p[1] + shift[1]];
                let th = two_link_ik(l1, l2, [p[0] - base[0], p[1] - base[1]], up)?;
                if !chain.within_limits(&th) {
                    return Err(Error::Argument(format!("IK solution {th:?} violates the joint limits")));
                }
                rows.push(th.to_vec());
                wps.push(p);
            }
            demos.push(Demonstration { traj_id: format!("{label}_{i:02}"), times: times.clone(), rows });
            waypoints.push(wps);
        }
    }
    Ok(S2DofData { demos: DemoSet::new(Space::Joint { dof: 2 }, demos)?, waypoints })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CircleData {
    pub demos: DemoSet,
    pub waypoints: Vec<Vec<[f64; 2]>>,
}

/// Redundant three-link chain tracing one end-effector circle in several
/// posture families (`b<k>_<i>`): each family fixes the end-effector angle
/// and the elbow sign.
pub fn gen_circle(n_per_branch: usize, n_branches: usize, chain: &PlanarChain, samples: usize, rng: &mut Rng) -> Result<CircleData> {
    if chain.dof() != 3 {
        return Err(Error::Argument(format!("gen_circle needs a 3-link chain, got {} links", chain.dof())));
    }
    if n_per_branch == 0 || !(1..=4).contains(&n_branches) {
        return Err(Error::Argument("gen_circle needs 1..=4 branches and at least one trajectory each".into()));
    }
    let l = chain.link_lengths();
    let base = chain.base_position();
    let (center, radius) = ([1.1 + base[0], 0.2 + base[1]], 0.25);
    let families: [(f64, bool); 4] = [(0.0, true), (0.0, false), (1.2, true), (1.2, false)];
    let times = unit_times(samples);
    let mut demos = Vec::new();
    let mut waypoints = Vec::new();
    for (k, &(phi, up)) in families.iter().take(n_branches).enumerate() {
        for i in 0..n_per_branch {
            let r = radius + jitter(rng, 0.01);
            let phase = jitter(rng, 0.05);
            let mut rows = Vec::with_capacity(times.len());
            let mut wps = Vec::with_capacity(times.len());
            for &t in &times {
                let a = 2.0 * PI * t + phase;
                let p = [center[0] + r * a.cos(), center[1] + r * a.sin()];
                let wrist = [p[0] - l[2] * phi.cos() - base[0], p[1] - l[2] * phi.sin() - base[1]];
                let th = two_link_ik(l[0], l[1], wrist, up)?;
                let th3 = wrap_angle(phi - th[0] - th[1]);
                rows.push(vec![th[0], th[1], th3]);
                wps.push(p);
            }
            demos.push(Demonstration { traj_id: format!("b{k}_{i:02}"), times: times.clone(), rows });
            waypoints.push(wps);
        }
    }
    Ok(CircleData { demos: DemoSet::new(Space::Joint { dof: 3 }, demos)?, waypoints })
}

#[derive(Clone, Debug, PartialEq)]
pub struct MultiSolutionData {
    pub demos: DemoSet,
    /// Center of the region every trajectory passes through.
    pub crossing: [f64; 3],
    /// Demonstrated `(start, goal)` index pairs.
    pub pairs: Vec<(usize, usize)>,
}

/// Task-space trajectories from starts on one arc to goals on another, all
/// passing through a shared crossing region; only pairs with an even index
/// sum are demonstrated, `per_pair` times each (ids `s<i>g<j>_<k>`).
pub fn gen_multisolution(n_starts: usize, n_goals: usize, per_pair: usize, noise: f64, samples: usize, rng: &mut Rng) -> Result<MultiSolutionData> {
    if n_starts < 2 || n_goals < 2 || per_pair == 0 {
        return Err(Error::Argument("gen_multisolution needs at least two starts, two goals and one demo per pair".into()));
    }
    let crossing = [0.6, 0.0, 0.45];
    let spread = |i: usize, n: usize| -1.0 + 2.0 * i as f64 / (n - 1) as f64;
    let times = unit_times(samples);
    let mut pairs = Vec::new();
    let mut demos = Vec::new();
    for i in 0..n_starts {
        for j in 0..n_goals {
            if (i + j) % 2 != 0 {
                continue;
            }
            pairs.push((i, j));
            let (a, b) = (spread(i, n_starts), spread(j, n_goals));
            let q_start = quat_mul(&axis_angle([0.0, 0.0, 1.0], 0.5 * a), &GRASP_START);
            let q_goal = quat_mul(&axis_angle([1.0, 0.0, 0.0], 0.6 + 0.4 * b), &q_start);
            for k in 0..per_pair {
                let start = [0.25 + jitter(rng, noise), 0.4 * a + jitter(rng, noise), 0.3];
                let goal = [0.95 + jitter(rng, noise), 0.4 * b + jitter(rng, noise), 0.3];
                let ctrl = [0, 1, 2].map(|d| 2.0 * crossing[d] - 0.5 * (start[d] + goal[d]));
                let mut rows = Vec::with_capacity(times.len());
                for &t in &times {
                    let p = bezier(start, ctrl, goal, t);
                    let q = slerp(&q_start, &q_goal, smoothstep(t));
                    let q = perturb_direction(&q, noise * 0.2, rng);
                    let mut row = p.to_vec();
                    row.extend(q);
                    rows.push(row);
                }
                demos.push(Demonstration { traj_id: format!("s{i}g{j}_{k:02}"), times: times.clone(), rows });
            }
        }
    }
    Ok(MultiSolutionData { demos: DemoSet::new(Space::Task { pos_dim: 3, rot_dim: 4 }, demos)?, crossing, pairs })
}

fn slerp(a: &[f64; 4], b: &[f64; 4], t: f64) -> Vec<f64> {
    let mut d = dot(a, b);
    let mut b = *b;
    if d < 0.0 {
        d = -d;
        b = b.map(|v| -v);
    }
    if d > 1.0 - 1e-12 {
        return normalized(&[0, 1, 2, 3].map(|i| a[i] + t * (b[i] - a[i])));
    }
    let omega = d.acos();
    let (wa, wb) = (((1.0 - t) * omega).sin() / omega.sin(), (t * omega).sin() / omega.sin());
    normalized(&[0, 1, 2, 3].map(|i| wa * a[i] + wb * b[i]))
}
