//! Trajectory CSV: `traj_id,t,<sample columns>` with optional `#` comment
//! lines. Task columns are `x,y[,z]` followed by `qx,qy,qz` (S²) or
//! `qw,qx,qy,qz` (S³); joint columns are `theta_1..theta_η`. Reals use the
//! shortest representation that reads back to the same bits.

use std::fmt::Write as _;
use std::path::Path;

use super::{DemoSet, Demonstration, Space};
use crate::error::{Error, Result};

const POSITION: [&str; 3] = ["x", "y", "z"];
const S2: [&str; 3] = ["qx", "qy", "qz"];
const S3: [&str; 4] = ["qw", "qx", "qy", "qz"];

fn header(space: Space) -> String {
    let mut cols = vec!["traj_id".to_string(), "t".to_string()];
    match space {
        Space::Task { pos_dim, rot_dim } => {
            cols.extend(POSITION[..pos_dim].iter().map(|s| s.to_string()));
            let q: &[&str] = if rot_dim == 3 { &S2 } else { &S3 };
            cols.extend(q.iter().map(|s| s.to_string()));
        }
        Space::Joint { dof } => cols.extend((1..=dof).map(|i| format!("theta_{i}"))),
    }
    cols.join(",")
}

fn parse_header(line: &str, line_no: usize) -> Result<Space> {
    let cols: Vec<&str> = line.split(',').map(str::trim).collect();
    let bad = |reason: String| Error::Parse { line: line_no, reason };
    if cols.len() < 3 || cols[0] != "traj_id" || cols[1] != "t" {
        return Err(bad(format!("header must start with `traj_id,t`, found `{line}`")));
    }
    let rest = &cols[2..];
    if rest[0].starts_with("theta_") {
        for (i, c) in rest.iter().enumerate() {
            if *c != format!("theta_{}", i + 1) {
                return Err(bad(format!("expected column `theta_{}`, found `{c}`", i + 1)));
            }
        }
        return Ok(Space::Joint { dof: rest.len() });
    }
    let pos_dim = rest.iter().zip(POSITION).take_while(|(c, p)| **c == *p).count();
    let q = &rest[pos_dim..];
    let rot_dim = if q == S2 {
        3
    } else if q == S3 {
        4
    } else {
        return Err(bad(format!("unrecognised column layout `{line}`")));
    };
    if !(2..=3).contains(&pos_dim) {
        return Err(bad(format!("task data needs 2 or 3 position columns, found {pos_dim}")));
    }
    Ok(Space::Task { pos_dim, rot_dim })
}

pub fn write_csv_string(set: &DemoSet, comments: &[String]) -> Result<String> {
    set.validate()?;
    let mut out = String::new();
    for c in comments {
        for line in c.lines() {
            let _ = writeln!(out, "# {line}");
        }
    }
    out.push_str(&header(set.space));
    out.push('\n');
    for d in &set.demos {
        if d.traj_id.is_empty() || d.traj_id.contains([',', '\n', '#']) {
            return Err(Error::Argument(format!("trajectory id {:?} cannot be written", d.traj_id)));
        }
        for (t, row) in d.times.iter().zip(&d.rows) {
            let _ = write!(out, "{},{t:e}", d.traj_id);
            for v in row {
                let _ = write!(out, ",{v:e}");
            }
            out.push('\n');
        }
    }
    Ok(out)
}

pub fn write_csv(set: &DemoSet, comments: &[String], path: &Path) -> Result<()> {
    std::fs::write(path, write_csv_string(set, comments)?)?;
    Ok(())
}

/// Parses CSV text into demonstrations plus the comment lines (without
/// their `# ` prefix).
pub fn read_csv_str(text: &str) -> Result<(DemoSet, Vec<String>)> {
    let mut comments = Vec::new();
    let mut space = None;
    let mut demos: Vec<Demonstration> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim_end_matches('\r');
        if let Some(c) = line.strip_prefix('#') {
            comments.push(c.strip_prefix(' ').unwrap_or(c).to_string());
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let Some(sp) = space else {
            space = Some(parse_header(line, line_no)?);
            continue;
        };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let width = sp.width();
        if fields.len() != width + 2 {
            return Err(Error::Parse { line: line_no, reason: format!("expected {} fields, found {}", width + 2, fields.len()) });
        }
        let id = fields[0];
        if id.is_empty() {
            return Err(Error::Parse { line: line_no, reason: "empty traj_id".into() });
        }
        let mut values = Vec::with_capacity(width + 1);
        for f in &fields[1..] {
            let v: f64 = f.parse().map_err(|_| Error::Parse { line: line_no, reason: format!("`{f}` is not a number") })?;
            if !v.is_finite() {
                return Err(Error::Parse { line: line_no, reason: format!("non-finite value `{f}`") });
            }
            values.push(v);
        }
        if let Space::Task { pos_dim, .. } = sp {
            let n = crate::numerics::norm(&values[1 + pos_dim..]);
            if (n - 1.0).abs() > 1e-6 {
                return Err(Error::Validation(format!("line {line_no}: quaternion norm {n} differs from 1 by more than 1e-6")));
            }
        }
        let t = values[0];
        let row = values[1..].to_vec();
        match demos.last_mut() {
            Some(d) if d.traj_id == id => {
                d.times.push(t);
                d.rows.push(row);
            }
            _ => {
                if demos.iter().any(|d| d.traj_id == id) {
                    return Err(Error::Parse { line: line_no, reason: format!("trajectory `{id}` is not contiguous") });
                }
                demos.push(Demonstration { traj_id: id.to_string(), times: vec![t], rows: vec![row] });
            }
        }
    }
    let space = space.ok_or(Error::Parse { line: 0, reason: "missing header".into() })?;
    Ok((DemoSet::new(space, demos)?, comments))
}

pub fn read_csv(path: &Path) -> Result<(DemoSet, Vec<String>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Load { path: path.to_path_buf(), reason: e.to_string() })?;
    read_csv_str(&text)
}
