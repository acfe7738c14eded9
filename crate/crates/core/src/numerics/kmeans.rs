use super::{sq_dist, Rng};
use crate::error::{Error, Result};

const MAX_ITERS: usize = 100;
const REL_TOL: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct KMeans {
    pub centers: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    pub inertia: f64,
    /// Inertia after every Lloyd iteration.
    pub history: Vec<f64>,
}

/// Lloyd's algorithm with k-means++ seeding.
///
/// Stops after 100 iterations or once the relative inertia change drops
/// below 1e-6. Clusters that go empty are re-seeded from the point farthest
/// from its current center.
pub fn kmeans(points: &[Vec<f64>], k: usize, rng: &mut Rng) -> Result<KMeans> {
    if k == 0 {
        return Err(Error::Argument("k-means needs k >= 1".into()));
    }
    if points.len() < k {
        return Err(Error::Argument(format!("k-means needs at least k={k} points, got {}", points.len())));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::Argument("k-means points have inconsistent dimensions".into()));
    }

    let mut centers = seed_plus_plus(points, k, rng);
    let mut assignments = vec![0usize; points.len()];
    let mut history = Vec::new();
    let mut prev = f64::INFINITY;

    for _ in 0..MAX_ITERS {
        let inertia = assign(points, &centers, &mut assignments);
        history.push(inertia);

        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assignments) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(p) {
                *s += v;
            }
        }
        let mut taken = vec![false; points.len()];
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            } else {
                // farthest point from its assigned center that is not already a re-seed
                let mut best = None;
                let mut best_d = -1.0;
                for (i, p) in points.iter().enumerate() {
                    if taken[i] {
                        continue;
                    }
                    let d = sq_dist(p, &centers[assignments[i]]);
                    if d > best_d {
                        best_d = d;
                        best = Some(i);
                    }
                }
                if let Some(i) = best {
                    taken[i] = true;
                    centers[c] = points[i].clone();
                }
            }
        }

        let converged = prev.is_finite() && (prev - inertia).abs() <= REL_TOL * prev.max(f64::MIN_POSITIVE);
        prev = inertia;
        if converged || inertia == 0.0 {
            break;
        }
    }
    let inertia = assign(points, &centers, &mut assignments);
    if history.last() != Some(&inertia) {
        history.push(inertia);
    }
    Ok(KMeans { centers, assignments, inertia, history })
}

fn assign(points: &[Vec<f64>], centers: &[Vec<f64>], assignments: &mut [usize]) -> f64 {
    let mut inertia = 0.0;
    for (p, a) in points.iter().zip(assignments.iter_mut()) {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (c, center) in centers.iter().enumerate() {
            let d = sq_dist(p, center);
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        *a = best;
        inertia += best_d;
    }
    inertia
}

fn seed_plus_plus(points: &[Vec<f64>], k: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    let mut centers = Vec::with_capacity(k);
    let mut chosen = vec![false; points.len()];
    let first = rng.index(points.len());
    chosen[first] = true;
    centers.push(points[first].clone());
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            let mut target = rng.uniform() * total;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                pick = Some(i);
                if target < w {
                    break;
                }
                target -= w;
            }
            pick.unwrap_or(0)
        } else {
            // all remaining points coincide with a center: take the first unused one
            (0..points.len()).find(|&i| !chosen[i]).unwrap_or(0)
        };
        chosen[idx] = true;
        centers.push(points[idx].clone());
        let c = centers.last().unwrap().clone();
        for (p, d) in points.iter().zip(d2.iter_mut()) {
            *d = d.min(sq_dist(p, &c));
        }
    }
    centers
}
