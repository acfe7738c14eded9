//! Latent heatmaps as plain pixmaps and vector text.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::metric::{MetricField, Obstacle};
use crate::vae::Model;

/// Scalar field on a `width × height` pixel grid; row 0 is the top
/// (largest second coordinate).
#[derive(Clone, Debug, PartialEq)]
pub struct Heatmap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
    pub lower: [f64; 2],
    pub upper: [f64; 2],
}

impl Heatmap {
    /// Samples `f` at pixel centres of the box `[lower, upper]`.
    pub fn sample(width: usize, height: usize, lower: [f64; 2], upper: [f64; 2], f: impl Fn([f64; 2]) -> Result<f64> + Sync) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Argument("heatmap resolution must be positive".into()));
        }
        let values = (0..width * height)
            .into_par_iter()
            .map(|i| {
                let (r, c) = (i / width, i % width);
                let x = lower[0] + (c as f64 + 0.5) / width as f64 * (upper[0] - lower[0]);
                let y = upper[1] - (r as f64 + 0.5) / height as f64 * (upper[1] - lower[1]);
                f([x, y])
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(Self { width, height, values, lower, upper })
    }

    fn range(&self) -> (f64, f64) {
        let finite = self.values.iter().copied().filter(|v| v.is_finite());
        let lo = finite.clone().fold(f64::INFINITY, f64::min);
        let hi = finite.fold(f64::NEG_INFINITY, f64::max);
        if lo.is_finite() {
            (lo, hi)
        } else {
            (0.0, 0.0)
        }
    }

    /// Colors in `[0, 1]`; a constant field maps to 0.
    fn normalized(&self) -> Vec<f64> {
        let (lo, hi) = self.range();
        let span = hi - lo;
        self.values
            .iter()
            .map(|v| if span > 1e-12 * hi.abs().max(1.0) && v.is_finite() { ((v - lo) / span).clamp(0.0, 1.0) } else { 0.0 })
            .collect()
    }

    /// Pixel coordinates of a latent point.
    pub fn to_pixel(&self, z: &[f64]) -> (f64, f64) {
        let x = (z[0] - self.lower[0]) / (self.upper[0] - self.lower[0]) * self.width as f64;
        let y = (self.upper[1] - z[1]) / (self.upper[1] - self.lower[1]) * self.height as f64;
        (x, y)
    }

    /// Plain (`P3`) portable pixmap.
    pub fn to_ppm(&self) -> String {
        let mut out = format!("P3\n{} {}\n255\n", self.width, self.height);
        for row in self.normalized().chunks(self.width) {
            let line: Vec<String> = row.iter().map(|&t| colormap(t)).map(|[r, g, b]| format!("{r} {g} {b}")).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    /// Vector rendering: run-length rows of rectangles, then training codes as
    /// dots, graph paths as `geodesic-nodes` polylines and spline samples as
    /// `geodesic` polylines.
    pub fn to_svg(&self, codes: &[Vec<f64>], node_paths: &[Vec<Vec<f64>>], curves: &[Vec<Vec<f64>>]) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" shape-rendering="crispEdges">"#,
            w = self.width,
            h = self.height
        );
        let colors: Vec<[u8; 3]> = self.normalized().into_iter().map(colormap).collect();
        for (r, row) in colors.chunks(self.width).enumerate() {
            let mut c = 0;
            while c < row.len() {
                let mut end = c + 1;
                while end < row.len() && row[end] == row[c] {
                    end += 1;
                }
                let [cr, cg, cb] = row[c];
                let _ = writeln!(out, r##"<rect x="{c}" y="{r}" width="{}" height="1" fill="#{cr:02x}{cg:02x}{cb:02x}"/>"##, end - c);
                c = end;
            }
        }
        for z in codes {
            let (x, y) = self.to_pixel(z);
            let _ = writeln!(out, r#"<circle class="code" cx="{x:.2}" cy="{y:.2}" r="1" fill="white" fill-opacity="0.5"/>"#);
        }
        let poly = |out: &mut String, class: &str, color: &str, pts: &[Vec<f64>]| {
            let p: Vec<String> = pts.iter().map(|z| self.to_pixel(z)).map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
            let _ = writeln!(out, r#"<polyline class="{class}" points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, p.join(" "));
        };
        for path in node_paths {
            poly(&mut out, "geodesic-nodes", "red", path);
        }
        for curve in curves {
            poly(&mut out, "geodesic", "yellow", curve);
        }
        out.push_str("</svg>\n");
        out
    }
}

/// Dark blue through teal and green to yellow.
fn colormap(t: f64) -> [u8; 3] {
    const STOPS: [[f64; 3]; 5] = [[68.0, 1.0, 84.0], [59.0, 82.0, 139.0], [33.0, 145.0, 140.0], [94.0, 201.0, 98.0], [253.0, 231.0, 37.0]];
    let x = t.clamp(0.0, 1.0) * (STOPS.len() - 1) as f64;
    let i = (x.floor() as usize).min(STOPS.len() - 2);
    let f = x - i as f64;
    let mut c = [0u8; 3];
    for k in 0..3 {
        c[k] = (STOPS[i][k] + f * (STOPS[i + 1][k] - STOPS[i][k])).round() as u8;
    }
    c
}

/// Magnification factor and mean predictive σ of a 2-D latent space.
pub fn latent_maps(model: &Model, obstacles: &[Obstacle], lower: [f64; 2], upper: [f64; 2], resolution: usize) -> Result<(Heatmap, Heatmap)> {
    if model.latent_dim() != 2 {
        return Err(Error::Argument(format!("2-D maps need a 2-D latent space, got {}", model.latent_dim())));
    }
    let field = MetricField::new(model, obstacles);
    let mag = Heatmap::sample(resolution, resolution, lower, upper, |z| field.magnification(&z))?;
    let sigma = Heatmap::sample(resolution, resolution, lower, upper, |z| mean_sigma(model, &z))?;
    Ok((mag, sigma))
}

/// Mean decoded standard deviation.
pub fn mean_sigma(model: &Model, z: &[f64]) -> Result<f64> {
    let s = match model {
        Model::Task(m) => m.decode(z)?.sigma,
        Model::Joint(m) => m.decode(z)?.sigma,
    };
    Ok(s.iter().sum::<f64>() / s.len() as f64)
}

/// Axis-aligned slices of a 3-D latent space through the box centre:
/// `(name, free axes, heatmap)` for the planes `z0z1`, `z0z2`, `z1z2`.
pub fn slices_3d(
    model: &Model,
    obstacles: &[Obstacle],
    lower: &[f64],
    upper: &[f64],
    resolution: usize,
) -> Result<Vec<(String, [usize; 2], Heatmap)>> {
    if model.latent_dim() != 3 {
        return Err(Error::Argument(format!("3-D slices need a 3-D latent space, got {}", model.latent_dim())));
    }
    let field = MetricField::new(model, obstacles);
    let centre: Vec<f64> = lower.iter().zip(upper).map(|(a, b)| 0.5 * (a + b)).collect();
    let mut out = Vec::new();
    for (a, b) in [(0usize, 1usize), (0, 2), (1, 2)] {
        let map = Heatmap::sample(resolution, resolution, [lower[a], lower[b]], [upper[a], upper[b]], |p| {
            let mut z = centre.clone();
            z[a] = p[0];
            z[b] = p[1];
            field.magnification(&z)
        })?;
        out.push((format!("slice_z{a}z{b}"), [a, b], map));
    }
    Ok(out)
}

/// Magnification factor on a regular `n³` lattice as CSV.
pub fn volume_csv(model: &Model, obstacles: &[Obstacle], lower: &[f64], upper: &[f64], n: usize) -> Result<String> {
    if model.latent_dim() != 3 || n < 2 {
        return Err(Error::Argument("volume dumps need a 3-D latent space and at least 2 samples per axis".into()));
    }
    let field = MetricField::new(model, obstacles);
    let at = |k: usize, i: usize| lower[k] + i as f64 / (n - 1) as f64 * (upper[k] - lower[k]);
    let rows = (0..n * n * n)
        .into_par_iter()
        .map(|idx| {
            let z = [at(0, idx / (n * n)), at(1, (idx / n) % n), at(2, idx % n)];
            let m = field.magnification(&z)?;
            let s = mean_sigma(model, &z)?;
            Ok(format!("{:e},{:e},{:e},{m:e},{s:e}\n", z[0], z[1], z[2]))
        })
        .collect::<Result<Vec<String>>>()?;
    Ok(format!("z0,z1,z2,magnification,sigma\n{}", rows.concat()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ppm_has_requested_dimensions() {
        let h = Heatmap::sample(7, 5, [0.0, 0.0], [1.0, 1.0], |z| Ok(z[0] + z[1])).unwrap();
        let ppm = h.to_ppm();
        let mut lines = ppm.lines();
        assert_eq!(lines.next(), Some("P3"));
        assert_eq!(lines.next(), Some("7 5"));
        assert_eq!(lines.next(), Some("255"));
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), 5);
        assert!(rows.iter().all(|r| r.split_whitespace().count() == 21));
    }

    #[test]
    fn constant_field_is_one_color() {
        let h = Heatmap::sample(6, 6, [0.0, 0.0], [1.0, 1.0], |_| Ok(3.0)).unwrap();
        let svg = h.to_svg(&[], &[], &[]);
        assert_eq!(svg.matches("<rect").count(), 6);
        assert_eq!(colormap(0.0), [68, 1, 84]);
        assert_eq!(colormap(1.0), [253, 231, 37]);
    }

    #[test]
    fn svg_overlay_keeps_every_node() {
        let h = Heatmap::sample(4, 4, [0.0, 0.0], [1.0, 1.0], |z| Ok(z[0])).unwrap();
        let nodes = vec![vec![0.1, 0.1], vec![0.5, 0.5], vec![0.9, 0.2]];
        let svg = h.to_svg(&[vec![0.5, 0.5]], &[nodes], &[]);
        let line = svg.lines().find(|l| l.contains("geodesic-nodes")).unwrap();
        let pts = line.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
        assert_eq!(pts.split_whitespace().count(), 3);
        assert_eq!(h.to_pixel(&[0.0, 1.0]), (0.0, 0.0));
    }
}
