//! Synthetic demonstrations and the trajectory CSV format.

mod csv;
mod generators;

pub use csv::{read_csv, read_csv_str, write_csv, write_csv_string};
pub use generators::{
    gen_circle, gen_grasp, gen_grasp_targets, gen_jc, gen_multisolution, gen_s2dof, j_template, two_link_ik, CircleData,
    MultiSolutionData, S2DofData, SCurve, DEFAULT_SAMPLES,
};

use crate::error::{Error, Result};
use crate::numerics::norm;

/// Layout of one demonstration sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Space {
    /// `[x (pos_dim), q (rot_dim)]`; quaternions are stored `(w, x, y, z)`.
    Task { pos_dim: usize, rot_dim: usize },
    /// Joint angles `θ_1..θ_η`.
    Joint { dof: usize },
}

impl Space {
    pub fn width(&self) -> usize {
        match *self {
            Space::Task { pos_dim, rot_dim } => pos_dim + rot_dim,
            Space::Joint { dof } => dof,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Demonstration {
    pub traj_id: String,
    pub times: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
}

impl Demonstration {
    /// Group label: the id up to its last underscore (`up_03` → `up`).
    pub fn group(&self) -> &str {
        group_of(&self.traj_id)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

pub fn group_of(traj_id: &str) -> &str {
    traj_id.rsplit_once('_').map(|(g, _)| g).unwrap_or(traj_id)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DemoSet {
    pub space: Space,
    pub demos: Vec<Demonstration>,
}

impl DemoSet {
    pub fn new(space: Space, demos: Vec<Demonstration>) -> Result<Self> {
        let set = Self { space, demos };
        set.validate()?;
        Ok(set)
    }

    /// Checks widths, sample/time counts, finiteness and unit quaternions.
    pub fn validate(&self) -> Result<()> {
        let w = self.space.width();
        for d in &self.demos {
            if d.times.len() != d.rows.len() {
                return Err(Error::Validation(format!("{}: {} times for {} samples", d.traj_id, d.times.len(), d.rows.len())));
            }
            for (i, r) in d.rows.iter().enumerate() {
                if r.len() != w {
                    return Err(Error::Validation(format!("{}[{i}]: expected {w} values, got {}", d.traj_id, r.len())));
                }
                if r.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Validation(format!("{}[{i}]: non-finite value", d.traj_id)));
                }
                if let Space::Task { pos_dim, .. } = self.space {
                    let n = norm(&r[pos_dim..]);
                    if (n - 1.0).abs() > 1e-6 {
                        return Err(Error::Validation(format!("{}[{i}]: quaternion norm {n} is not 1", d.traj_id)));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.demos.iter().map(|d| d.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every sample, in trajectory order.
    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.demos.iter().flat_map(|d| d.rows.iter().cloned()).collect()
    }

    /// Distinct group labels in first-seen order.
    pub fn groups(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for d in &self.demos {
            if !out.iter().any(|g| g == d.group()) {
                out.push(d.group().to_string());
            }
        }
        out
    }

    /// Training rows: task samples are doubled with `(x, q)` and `(x, -q)`;
    /// joint samples are returned unchanged.
    pub fn training_rows(&self) -> Vec<Vec<f64>> {
        match self.space {
            Space::Task { pos_dim, .. } => double_antipodal(&self.rows(), pos_dim),
            Space::Joint { .. } => self.rows(),
        }
    }
}

/// Emits `[x, q]` followed by `[x, -q]` for every row.
pub fn double_antipodal(rows: &[Vec<f64>], pos_dim: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(2 * rows.len());
    for r in rows {
        out.push(r.clone());
        out.push(r.iter().enumerate().map(|(i, v)| if i >= pos_dim { -v } else { *v }).collect());
    }
    out
}
