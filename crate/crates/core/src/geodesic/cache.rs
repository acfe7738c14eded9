//! Graph cache file.
//!
//! A text header of `key value...` lines ending with `data`, then
//! little-endian binary blocks in this order: node values (`N·F` f64),
//! per-point edge displacements (`E·M` f64), edge remainders (`E` f64),
//! base weights (`E` f64), support nodes (`S` u32). Obstacles are not
//! stored; a loaded graph starts at its base weights.

use std::io::{BufRead, Read, Write};

use super::{Connectivity, Grid, GridSpec, LatentGraph, NodeLayout};
use crate::error::{Error, Result};

pub const GRAPH_FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "geoskill-graph";

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

pub fn write_graph<W: Write>(graph: &LatentGraph, mut w: W) -> Result<()> {
    let spec = graph.spec();
    let layout = match graph.layout {
        NodeLayout::Task { pos_dim, rot_dim } => format!("task {pos_dim} {rot_dim}"),
        NodeLayout::Joint { dof } => format!("joint {dof}"),
    };
    let conn = match spec.connectivity {
        Connectivity::Axis => "axis",
        Connectivity::Full => "full",
    };
    let bits = |v: &[f64]| join(&v.iter().map(|x| format!("{:016x}", x.to_bits())).collect::<Vec<_>>());
    writeln!(w, "{MAGIC} {GRAPH_FORMAT_VERSION}")?;
    writeln!(w, "layout {layout}")?;
    writeln!(w, "lower {}", bits(&spec.lower))?;
    writeln!(w, "upper {}", bits(&spec.upper))?;
    writeln!(w, "resolution {}", join(&spec.resolution))?;
    writeln!(w, "connectivity {conn}")?;
    writeln!(w, "counts {} {} {}", graph.grid.num_nodes(), graph.grid.num_edges(), graph.support.len())?;
    writeln!(w, "influence {}", bits(&[graph.influence]))?;
    writeln!(w, "reference {}", bits(&[graph.reference_density]))?;
    writeln!(w, "tag {}", graph.tag)?;
    writeln!(w, "data")?;
    for block in [&graph.node_values, &graph.edge_point_sq, &graph.edge_rest, &graph.base] {
        let mut buf = Vec::with_capacity(8 * block.len());
        for v in block.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    let mut buf = Vec::with_capacity(4 * graph.support.len());
    for s in &graph.support {
        buf.extend_from_slice(&s.to_le_bytes());
    }
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

fn parse_bits(line: usize, tok: &str) -> Result<f64> {
    u64::from_str_radix(tok, 16).map(f64::from_bits).map_err(|_| Error::Parse { line, reason: format!("bad real `{tok}`") })
}

fn parse_num<T: std::str::FromStr>(line: usize, tok: &str) -> Result<T> {
    tok.parse().map_err(|_| Error::Parse { line, reason: format!("bad integer `{tok}`") })
}

fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; 8 * n];
    r.read_exact(&mut buf).map_err(|e| Error::Validation(format!("graph data truncated: {e}")))?;
    Ok(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

pub fn read_graph<R: BufRead>(mut r: R) -> Result<LatentGraph> {
    let mut fields = std::collections::BTreeMap::new();
    let mut line_no = 0;
    loop {
        let mut line = String::new();
        if r.read_line(&mut line)? == 0 {
            return Err(Error::Parse { line: line_no, reason: "missing `data` line".into() });
        }
        line_no += 1;
        let line = line.trim_end_matches('\n');
        if line_no == 1 {
            let want = format!("{MAGIC} {GRAPH_FORMAT_VERSION}");
            if line != want {
                return Err(Error::Parse { line: 1, reason: format!("expected `{want}`, found `{line}`") });
            }
            continue;
        }
        if line == "data" {
            break;
        }
        let (k, v) = line.split_once(' ').unwrap_or((line, ""));
        fields.insert(k.to_string(), (line_no, v.to_string()));
    }
    let get = |k: &str| fields.get(k).cloned().ok_or_else(|| Error::Parse { line: line_no, reason: format!("missing `{k}` line") });

    let (ln, layout) = get("layout")?;
    let toks: Vec<&str> = layout.split_whitespace().collect();
    let layout = match toks.as_slice() {
        ["task", p, d] => NodeLayout::Task { pos_dim: parse_num(ln, p)?, rot_dim: parse_num(ln, d)? },
        ["joint", n] => NodeLayout::Joint { dof: parse_num(ln, n)? },
        _ => return Err(Error::Parse { line: ln, reason: format!("bad layout `{layout}`") }),
    };
    let reals = |k: &str| -> Result<Vec<f64>> {
        let (ln, v) = get(k)?;
        v.split_whitespace().map(|t| parse_bits(ln, t)).collect()
    };
    let (ln, res) = get("resolution")?;
    let resolution: Vec<usize> = res.split_whitespace().map(|t| parse_num(ln, t)).collect::<Result<_>>()?;
    let (ln, conn) = get("connectivity")?;
    let connectivity = match conn.as_str() {
        "axis" => Connectivity::Axis,
        "full" => Connectivity::Full,
        _ => return Err(Error::Parse { line: ln, reason: format!("bad connectivity `{conn}`") }),
    };
    let spec = GridSpec::new(reals("lower")?, reals("upper")?, resolution, connectivity)?;
    let grid = Grid::new(spec)?;
    let (ln, counts) = get("counts")?;
    let counts: Vec<usize> = counts.split_whitespace().map(|t| parse_num(ln, t)).collect::<Result<_>>()?;
    if counts.len() != 3 || counts[0] != grid.num_nodes() || counts[1] != grid.num_edges() {
        return Err(Error::Validation(format!("graph counts {counts:?} do not match the grid")));
    }
    let influence = reals("influence")?.first().copied().unwrap_or(super::DEFAULT_INFLUENCE);
    let reference_density = reals("reference")?.first().copied().unwrap_or(0.0);
    let tag = get("tag").map(|(_, t)| t).unwrap_or_default();

    let (n, e, s) = (counts[0], counts[1], counts[2]);
    let node_values = read_f64s(&mut r, n * layout.features())?;
    let edge_point_sq = read_f64s(&mut r, e * layout.points())?;
    let edge_rest = read_f64s(&mut r, e)?;
    let base = read_f64s(&mut r, e)?;
    let mut buf = vec![0u8; 4 * s];
    r.read_exact(&mut buf).map_err(|e| Error::Validation(format!("graph data truncated: {e}")))?;
    let support: Vec<u32> = buf.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().unwrap())).collect();
    if support.iter().any(|&x| x as usize >= n) {
        return Err(Error::Validation("support node index out of range".into()));
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(Error::Validation(format!("{} trailing bytes after graph data", rest.len())));
    }
    Ok(LatentGraph {
        current: base.clone(),
        grid,
        layout,
        node_values,
        edge_point_sq,
        edge_rest,
        base,
        dirty: Vec::new(),
        obstacles: Vec::new(),
        support,
        reference_density,
        influence,
        tag,
    })
}
