use crate::error::{Error, Result};
use crate::numerics::{solve_spd, sq_dist, Matrix};

const DEGREE: usize = 3;

/// Relative ridge pulling interior control points towards the straight
/// segment's control polygon; keeps the normal equations definite when the
/// path has fewer distinct nodes than unknowns.
const RIDGE: f64 = 1e-9;

/// Clamped cubic B-spline on `[0, 1]` with simple interior knots, so it is
/// C² and interpolates its first and last control points.
#[derive(Clone, Debug, PartialEq)]
pub struct GeodesicSpline {
    knots: Vec<f64>,
    control: Vec<Vec<f64>>,
    /// Root-mean-square distance between the fitted nodes and the curve.
    pub rms: f64,
}

/// Default control-point count for a path of `nodes` nodes.
pub fn default_control_points(nodes: usize) -> usize {
    (nodes / 5).max(8)
}

fn clamped_knots(k: usize) -> Vec<f64> {
    let inner = k - DEGREE;
    let mut knots = vec![0.0; DEGREE + 1];
    knots.extend((1..inner).map(|i| i as f64 / inner as f64));
    knots.extend(vec![1.0; DEGREE + 1]);
    knots
}

/// Knot span `s` with `knots[s] ≤ t < knots[s + 1]`, clamped to the last
/// non-empty span at `t = 1`.
fn span(knots: &[f64], n_ctrl: usize, t: f64) -> usize {
    let p = knots.len() - n_ctrl - 1;
    if t >= knots[n_ctrl] {
        return n_ctrl - 1;
    }
    let mut s = p;
    while s < n_ctrl - 1 && knots[s + 1] <= t {
        s += 1;
    }
    s
}

/// Non-zero basis values `N_{s-p..=s}(t)` (Cox–de Boor).
fn basis(knots: &[f64], p: usize, s: usize, t: f64) -> Vec<f64> {
    let mut n = vec![0.0; p + 1];
    let mut left = vec![0.0; p + 1];
    let mut right = vec![0.0; p + 1];
    n[0] = 1.0;
    for j in 1..=p {
        left[j] = t - knots[s + 1 - j];
        right[j] = knots[s + j] - t;
        let mut saved = 0.0;
        for r in 0..j {
            let denom = right[r + 1] + left[j - r];
            let tmp = if denom == 0.0 { 0.0 } else { n[r] / denom };
            n[r] = saved + right[r + 1] * tmp;
            saved = left[j - r] * tmp;
        }
        n[j] = saved;
    }
    n
}

fn eval_bspline(knots: &[f64], control: &[Vec<f64>], t: f64) -> Vec<f64> {
    let p = knots.len() - control.len() - 1;
    let t = t.clamp(0.0, 1.0);
    let s = span(knots, control.len(), t);
    let b = basis(knots, p, s, t);
    let mut out = vec![0.0; control[0].len()];
    for (i, w) in b.iter().enumerate() {
        for (o, c) in out.iter_mut().zip(&control[s - p + i]) {
            *o += w * c;
        }
    }
    out
}

/// Control points and knots of the derivative spline.
fn derivative(knots: &[f64], control: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let p = knots.len() - control.len() - 1;
    let q: Vec<Vec<f64>> = (0..control.len() - 1)
        .map(|i| {
            let h = knots[i + p + 1] - knots[i + 1];
            control[i + 1]
                .iter()
                .zip(&control[i])
                .map(|(a, b)| if h > 0.0 { p as f64 * (a - b) / h } else { 0.0 })
                .collect()
        })
        .collect();
    (knots[1..knots.len() - 1].to_vec(), q)
}

/// Chord-length parameters of `nodes` in `[0, 1]`; `None` when every node
/// coincides.
fn chord_params(nodes: &[Vec<f64>]) -> Option<Vec<f64>> {
    let mut u = vec![0.0];
    for w in nodes.windows(2) {
        let last = *u.last().unwrap();
        u.push(last + sq_dist(&w[0], &w[1]).sqrt());
    }
    let total = *u.last().unwrap();
    if !(total > 0.0) {
        return None;
    }
    u.iter_mut().for_each(|v| *v /= total);
    *u.last_mut().unwrap() = 1.0;
    Some(u)
}

impl GeodesicSpline {
    /// Least-squares fit with `control_points` control points over
    /// chord-length parameters; the first and last nodes are interpolated
    /// exactly. Counts below 4 are raised to 4.
    pub fn fit(nodes: &[Vec<f64>], control_points: usize) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::Argument(format!("spline fit needs at least 2 nodes, got {}", nodes.len())));
        }
        let dim = nodes[0].len();
        if dim == 0 || nodes.iter().any(|n| n.len() != dim || n.iter().any(|v| !v.is_finite())) {
            return Err(Error::Argument("spline nodes must be finite and share one dimension".into()));
        }
        let k = control_points.max(DEGREE + 1);
        let knots = clamped_knots(k);
        let first = nodes[0].clone();
        let last = nodes[nodes.len() - 1].clone();
        let Some(u) = chord_params(nodes) else {
            return Ok(Self { knots, control: vec![first; k], rms: 0.0 });
        };

        // straight-segment control polygon (Greville abscissae)
        let lin: Vec<Vec<f64>> = (0..k)
            .map(|i| {
                let g = (knots[i + 1] + knots[i + 2] + knots[i + 3]) / 3.0;
                first.iter().zip(&last).map(|(a, b)| a + g * (b - a)).collect()
            })
            .collect();

        let m = k - 2;
        let mut ata = Matrix::zeros(m, m);
        let mut atb = vec![vec![0.0; m]; dim];
        for (t, y) in u.iter().zip(nodes) {
            let s = span(&knots, k, *t);
            let b = basis(&knots, DEGREE, s, *t);
            let mut resid = y.clone();
            let mut free = Vec::with_capacity(DEGREE + 1);
            for (i, w) in b.iter().enumerate() {
                let idx = s - DEGREE + i;
                if idx == 0 || idx == k - 1 {
                    let fixed = if idx == 0 { &first } else { &last };
                    for (r, f) in resid.iter_mut().zip(fixed) {
                        *r -= w * f;
                    }
                } else {
                    free.push((idx - 1, *w));
                }
            }
            for &(a, wa) in &free {
                for &(b, wb) in &free {
                    ata[(a, b)] += wa * wb;
                }
                for (c, r) in resid.iter().enumerate() {
                    atb[c][a] += wa * r;
                }
            }
        }
        let scale = (0..m).map(|i| ata[(i, i)]).sum::<f64>() / m as f64;
        let lambda = RIDGE * scale.max(1e-300);
        for i in 0..m {
            ata[(i, i)] += lambda;
            for c in 0..dim {
                atb[c][i] += lambda * lin[i + 1][c];
            }
        }
        let mut control = lin;
        for (c, rhs) in atb.iter().enumerate() {
            let x = solve_spd(&ata, rhs)?;
            for i in 0..m {
                control[i + 1][c] = x[i];
            }
        }
        control[0] = first;
        control[k - 1] = last;
        let mut spline = Self { knots, control, rms: 0.0 };
        let sse: f64 = u.iter().zip(nodes).map(|(t, y)| sq_dist(&spline.eval(*t), y)).sum();
        spline.rms = (sse / nodes.len() as f64).sqrt();
        Ok(spline)
    }

    pub fn dim(&self) -> usize {
        self.control[0].len()
    }

    pub fn control_points(&self) -> &[Vec<f64>] {
        &self.control
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// `ω(t)` for `t ∈ [0, 1]` (clamped outside).
    pub fn eval(&self, t: f64) -> Vec<f64> {
        // a constant polygon stays exactly constant despite basis rounding
        if t <= 0.0 || self.control.iter().all(|c| c == &self.control[0]) {
            return self.control[0].clone();
        }
        if t >= 1.0 {
            return self.control[self.control.len() - 1].clone();
        }
        eval_bspline(&self.knots, &self.control, t)
    }

    /// `ω'(t)`.
    pub fn velocity(&self, t: f64) -> Vec<f64> {
        let (k, q) = derivative(&self.knots, &self.control);
        eval_bspline(&k, &q, t)
    }

    /// `T` samples at `t_i = i / (T - 1)`.
    pub fn sample(&self, t: usize) -> Result<Vec<Vec<f64>>> {
        if t < 2 {
            return Err(Error::Argument(format!("at least 2 samples are required, got {t}")));
        }
        Ok((0..t).map(|i| self.eval(i as f64 / (t - 1) as f64)).collect())
    }

    /// Power-basis coefficients `[a0, a1, a2, a3]` (one vector per
    /// coordinate) of every non-empty knot interval `[t_i, t_{i+1})`, in the
    /// local variable `t - t_i`.
    pub fn segments(&self) -> Vec<(f64, f64, [Vec<f64>; 4])> {
        let (k1, q1) = derivative(&self.knots, &self.control);
        let (k2, q2) = derivative(&k1, &q1);
        let (k3, q3) = derivative(&k2, &q2);
        let mut out = Vec::new();
        for w in self.knots.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b > a {
                let mid = 0.5 * (a + b);
                // third derivative is constant per interval; evaluate inside
                let d3 = eval_bspline(&k3, &q3, mid);
                let a0 = eval_bspline(&self.knots, &self.control, a);
                let a1 = eval_bspline(&k1, &q1, a);
                let a2: Vec<f64> = eval_bspline(&k2, &q2, a).iter().map(|v| v / 2.0).collect();
                let a3: Vec<f64> = d3.iter().map(|v| v / 6.0).collect();
                out.push((a, b, [a0, a1, a2, a3]));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collinear_nodes_give_the_segment() {
        let nodes: Vec<Vec<f64>> = [0.0, 0.1, 0.25, 0.5, 0.6, 0.9, 1.0].iter().map(|&t| vec![1.0 + 2.0 * t, -1.0 + t]).collect();
        let s = GeodesicSpline::fit(&nodes, 8).unwrap();
        assert!(s.rms <= 1e-10, "{}", s.rms);
        assert_eq!(s.eval(0.0), nodes[0]);
        assert_eq!(s.eval(1.0), nodes[6]);
        let mid = s.eval(0.5);
        assert!((mid[0] - 2.0).abs() < 1e-9 && (mid[1] + 0.5).abs() < 1e-9);
    }

    #[test]
    fn circle_arc_fits_within_a_tenth_of_spacing() {
        let spacing = 0.05;
        let nodes: Vec<Vec<f64>> = (0..=60)
            .map(|i| {
                let a = i as f64 / 60.0 * 2.0;
                vec![a.cos(), a.sin()]
            })
            .collect();
        let s = GeodesicSpline::fit(&nodes, 12).unwrap();
        assert!(s.rms <= spacing / 10.0, "{}", s.rms);
    }

    #[test]
    fn degenerate_path_is_constant() {
        let nodes = vec![vec![0.3, 0.4]; 3];
        let s = GeodesicSpline::fit(&nodes, 8).unwrap();
        assert_eq!(s.rms, 0.0);
        assert_eq!(s.sample(5).unwrap(), vec![vec![0.3, 0.4]; 5]);
        assert_eq!(s.velocity(0.5), vec![0.0, 0.0]);
    }

    #[test]
    fn two_nodes_and_few_controls() {
        let s = GeodesicSpline::fit(&[vec![0.0], vec![2.0]], 2).unwrap();
        assert_eq!(s.control_points().len(), 4);
        assert!((s.eval(0.25)[0] - 0.5).abs() < 1e-9);
        assert!(GeodesicSpline::fit(&[vec![0.0]], 8).is_err());
    }

    #[test]
    fn velocity_matches_finite_differences_and_is_c2() {
        let nodes: Vec<Vec<f64>> = (0..40).map(|i| {
            let t = i as f64 / 39.0;
            vec![t, (3.0 * t).sin(), t * t]
        }).collect();
        let s = GeodesicSpline::fit(&nodes, 9).unwrap();
        let h = 1e-6;
        for i in 1..20 {
            let t = i as f64 / 20.0;
            let v = s.velocity(t);
            let (a, b) = (s.eval(t + h), s.eval(t - h));
            for c in 0..3 {
                assert!(((a[c] - b[c]) / (2.0 * h) - v[c]).abs() < 1e-5);
            }
        }
        let segs = s.segments();
        assert_eq!(segs.len(), 6);
        for w in segs.windows(2) {
            let (a0, b0, c0) = &w[0];
            let (a1, _, c1) = &w[1];
            let x = b0 - a0;
            assert_eq!(b0, a1);
            for c in 0..3 {
                let val = c0[0][c] + x * (c0[1][c] + x * (c0[2][c] + x * c0[3][c]));
                let d1 = c0[1][c] + x * (2.0 * c0[2][c] + 3.0 * x * c0[3][c]);
                let d2 = 2.0 * c0[2][c] + 6.0 * x * c0[3][c];
                assert!((val - c1[0][c]).abs() < 1e-9);
                assert!((d1 - c1[1][c]).abs() < 1e-7);
                assert!((d2 - 2.0 * c1[2][c]).abs() < 1e-5);
            }
        }
    }
}
