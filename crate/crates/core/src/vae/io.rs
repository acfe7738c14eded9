//! Versioned line-oriented text format for trained models.
//!
//! ```text
//! geoskill-model 1
//! kind task | joint
//! dims <pos_dim> <rot_dim> <latent_dim>        (task)
//! chain <η> <base x> <base y> <eps_reg>        (joint)
//! lengths <η values>                           (joint)
//! limits <2η values>                           (joint)
//! mlp <name> <layers>
//! layer <activation> <out> <in>
//! weight <out*in values, row-major>
//! bias <out values>
//! rbf <name> <kernels> <in> <out>
//! bandwidth <value>
//! centers <kernels*in values>
//! raw <out*kernels values>
//! floor <out values>
//! meta <key> <value>
//! end
//! ```
//!
//! Reals are written with 17 significant digits so loading reproduces
//! every bit and saving again yields identical bytes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{JointVae, Model, TaskVae};
use crate::error::{Error, Result};
use crate::kinematics::PlanarChain;
use crate::nets::{Activation, Layer, Mlp, RbfNet};
use crate::numerics::Matrix;

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "geoskill-model";

fn push_reals(out: &mut String, tag: &str, values: &[f64]) {
    out.push_str(tag);
    for v in values {
        let _ = write!(out, " {v:.16e}");
    }
    out.push('\n');
}

fn write_mlp(out: &mut String, name: &str, mlp: &Mlp) {
    let _ = writeln!(out, "mlp {name} {}", mlp.layers().len());
    for layer in mlp.layers() {
        let _ = writeln!(out, "layer {} {} {}", layer.activation.name(), layer.output_dim(), layer.input_dim());
        push_reals(out, "weight", layer.weight.as_slice());
        push_reals(out, "bias", &layer.bias);
    }
}

fn write_rbf(out: &mut String, name: &str, net: &RbfNet) {
    let _ = writeln!(out, "rbf {name} {} {} {}", net.centers().len(), net.input_dim(), net.output_dim());
    push_reals(out, "bandwidth", &[net.bandwidth()]);
    let centers: Vec<f64> = net.centers().iter().flatten().copied().collect();
    push_reals(out, "centers", &centers);
    push_reals(out, "raw", net.raw_weights().as_slice());
    push_reals(out, "floor", net.floor());
}

fn write_meta(out: &mut String, meta: &BTreeMap<String, String>) -> Result<()> {
    for (k, v) in meta {
        if k.is_empty() || k.contains(char::is_whitespace) || v.contains('\n') {
            return Err(Error::Argument(format!("metadata entry {k:?} cannot be serialised")));
        }
        let _ = writeln!(out, "meta {k} {v}");
    }
    Ok(())
}

pub fn save_to_string(model: &Model) -> Result<String> {
    let mut out = format!("{MAGIC} {FORMAT_VERSION}\n");
    match model {
        Model::Task(m) => {
            out.push_str("kind task\n");
            let _ = writeln!(out, "dims {} {} {}", m.pos_dim, m.rot_dim, m.latent_dim);
            write_mlp(&mut out, "encoder", &m.encoder);
            write_mlp(&mut out, "decoder", &m.decoder);
            write_rbf(&mut out, "precision", &m.precision);
            write_rbf(&mut out, "concentration", &m.concentration);
            write_meta(&mut out, &m.metadata)?;
        }
        Model::Joint(m) => {
            out.push_str("kind joint\n");
            let _ = writeln!(out, "dims {} {}", m.chain.dof(), m.latent_dim);
            let base = m.chain.base_position();
            push_reals(&mut out, "chain", &[base[0], base[1], m.eps_reg]);
            push_reals(&mut out, "lengths", m.chain.link_lengths());
            let limits: Vec<f64> = m.chain.joint_limits().iter().flat_map(|(a, b)| [*a, *b]).collect();
            push_reals(&mut out, "limits", &limits);
            write_mlp(&mut out, "encoder", &m.encoder);
            write_mlp(&mut out, "decoder", &m.decoder);
            write_rbf(&mut out, "precision", &m.precision);
            write_meta(&mut out, &m.metadata)?;
        }
    }
    out.push_str("end\n");
    Ok(out)
}

pub fn save(model: &Model, path: &Path) -> Result<()> {
    std::fs::write(path, save_to_string(model)?)?;
    Ok(())
}

struct Reader<'a> {
    lines: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
}

impl<'a> Reader<'a> {
    fn parse_err(line: usize, reason: impl Into<String>) -> Error {
        Error::Parse { line, reason: reason.into() }
    }

    /// Next line split into its tag and the remainder.
    fn next(&mut self, tag: &str) -> Result<(usize, &'a str)> {
        let (i, line) = self.lines.next().ok_or_else(|| Self::parse_err(0, format!("truncated file: expected `{tag}`")))?;
        let (head, rest) = line.split_once(' ').unwrap_or((line, ""));
        if head != tag {
            return Err(Self::parse_err(i + 1, format!("expected `{tag}`, found `{head}`")));
        }
        Ok((i + 1, rest))
    }

    fn peek_tag(&mut self) -> Option<&'a str> {
        self.lines.peek().map(|(_, l)| l.split(' ').next().unwrap_or(""))
    }

    fn ints(&mut self, tag: &str, n: usize) -> Result<Vec<usize>> {
        let (line, rest) = self.next(tag)?;
        let v: Vec<usize> = rest
            .split_whitespace()
            .map(|t| t.parse::<usize>().map_err(|e| Self::parse_err(line, format!("`{t}`: {e}"))))
            .collect::<Result<_>>()?;
        if v.len() != n {
            return Err(Self::parse_err(line, format!("`{tag}` needs {n} integers, found {}", v.len())));
        }
        Ok(v)
    }

    fn reals(&mut self, tag: &str, n: usize, path: &str) -> Result<Vec<f64>> {
        let (line, rest) = self.next(tag)?;
        let mut out = Vec::with_capacity(n);
        for (i, t) in rest.split_whitespace().enumerate() {
            let v: f64 = t.parse().map_err(|e| Self::parse_err(line, format!("{path}[{i}] `{t}`: {e}")))?;
            if !v.is_finite() {
                return Err(Error::Validation(format!("non-finite value {v} at {path}[{i}] (line {line})")));
            }
            out.push(v);
        }
        if out.len() != n {
            return Err(Self::parse_err(line, format!("{path} needs {n} values, found {}", out.len())));
        }
        Ok(out)
    }

    fn mlp(&mut self, name: &str) -> Result<Mlp> {
        let (line, rest) = self.next("mlp")?;
        let mut parts = rest.split_whitespace();
        if parts.next() != Some(name) {
            return Err(Self::parse_err(line, format!("expected network `{name}`")));
        }
        let count: usize = parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Self::parse_err(line, "missing layer count"))?;
        let mut layers = Vec::with_capacity(count);
        for l in 0..count {
            let (line, rest) = self.next("layer")?;
            let mut parts = rest.split_whitespace();
            let act = parts
                .next()
                .and_then(Activation::from_name)
                .ok_or_else(|| Self::parse_err(line, "unknown activation"))?;
            let dims: Vec<usize> = parts.filter_map(|t| t.parse().ok()).collect();
            if dims.len() != 2 {
                return Err(Self::parse_err(line, "layer needs output and input sizes"));
            }
            let path = format!("{name}.layers[{l}]");
            let w = self.reals("weight", dims[0] * dims[1], &format!("{path}.weight"))?;
            let b = self.reals("bias", dims[0], &format!("{path}.bias"))?;
            layers.push(Layer { weight: Matrix::from_vec(dims[0], dims[1], w), bias: b, activation: act });
        }
        Mlp::from_layers(layers)
    }

    fn rbf(&mut self, name: &str) -> Result<RbfNet> {
        let (line, rest) = self.next("rbf")?;
        let mut parts = rest.split_whitespace();
        if parts.next() != Some(name) {
            return Err(Self::parse_err(line, format!("expected network `{name}`")));
        }
        let dims: Vec<usize> = parts.filter_map(|t| t.parse().ok()).collect();
        if dims.len() != 3 {
            return Err(Self::parse_err(line, "rbf needs kernel, input and output counts"));
        }
        let (k, d, o) = (dims[0], dims[1], dims[2]);
        let bandwidth = self.reals("bandwidth", 1, &format!("{name}.bandwidth"))?[0];
        let centers = self.reals("centers", k * d, &format!("{name}.centers"))?;
        let raw = self.reals("raw", o * k, &format!("{name}.raw_weights"))?;
        let floor = self.reals("floor", o, &format!("{name}.floor"))?;
        let centers: Vec<Vec<f64>> = centers.chunks(d.max(1)).map(|c| c.to_vec()).collect();
        RbfNet::new(centers, bandwidth, Matrix::from_vec(o, k, raw), floor)
    }

    fn meta(&mut self) -> Result<BTreeMap<String, String>> {
        let mut out = BTreeMap::new();
        while self.peek_tag() == Some("meta") {
            let (line, rest) = self.next("meta")?;
            let (k, v) = rest.split_once(' ').unwrap_or((rest, ""));
            if k.is_empty() {
                return Err(Self::parse_err(line, "metadata entry without a key"));
            }
            out.insert(k.to_string(), v.to_string());
        }
        Ok(out)
    }
}

pub fn load_from_str(text: &str) -> Result<Model> {
    let mut r = Reader { lines: text.lines().enumerate().peekable() };
    let (line, version) = r.next(MAGIC)?;
    if version.trim() != FORMAT_VERSION.to_string() {
        return Err(Error::Validation(format!(
            "unsupported model format version `{}` (line {line}); expected {FORMAT_VERSION}",
            version.trim()
        )));
    }
    let (line, kind) = r.next("kind")?;
    let model = match kind.trim() {
        "task" => {
            let dims = r.ints("dims", 3)?;
            let encoder = r.mlp("encoder")?;
            let decoder = r.mlp("decoder")?;
            let precision = r.rbf("precision")?;
            let concentration = r.rbf("concentration")?;
            let mut m = TaskVae::from_parts(dims[0], dims[1], encoder, decoder, precision, concentration)?;
            if m.latent_dim != dims[2] {
                return Err(Error::Validation(format!("latent dimension {} does not match dims {}", m.latent_dim, dims[2])));
            }
            m.metadata = r.meta()?;
            Model::Task(m)
        }
        "joint" => {
            let dims = r.ints("dims", 2)?;
            let c = r.reals("chain", 3, "chain")?;
            let lengths = r.reals("lengths", dims[0], "chain.lengths")?;
            let limits = r.reals("limits", 2 * dims[0], "chain.limits")?;
            let limits = limits.chunks(2).map(|p| (p[0], p[1])).collect();
            let chain = PlanarChain::with_base(lengths, [c[0], c[1]], limits)?;
            let encoder = r.mlp("encoder")?;
            let decoder = r.mlp("decoder")?;
            let precision = r.rbf("precision")?;
            let mut m = JointVae::from_parts(chain, encoder, decoder, precision, c[2])?;
            if m.latent_dim != dims[1] {
                return Err(Error::Validation(format!("latent dimension {} does not match dims {}", m.latent_dim, dims[1])));
            }
            m.metadata = r.meta()?;
            Model::Joint(m)
        }
        other => return Err(Reader::parse_err(line, format!("unknown model kind `{other}`"))),
    };
    r.next("end")?;
    Ok(model)
}

pub fn load(path: &Path) -> Result<Model> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Load { path: path.to_path_buf(), reason: e.to_string() })?;
    load_from_str(&text).map_err(|e| Error::Load { path: path.to_path_buf(), reason: e.to_string() })
}
