//! Command-line verbs `gen`, `train`, `plan`, `render` and `eval`.
//!
//! Exit codes: 0 success, 1 runtime or validation failure, 2 usage error.

pub mod config;
pub mod eval;
pub mod render;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};

pub use config::RunConfig;

use crate::datasets::{gen_circle, gen_grasp_targets, gen_jc, gen_multisolution, gen_s2dof, read_csv, write_csv, DemoSet, SCurve, Space};
use crate::error::Error;
use crate::geodesic::{plan, read_graph, write_graph, GridSpec, LatentGraph, Plan, PlanOptions};
use crate::kinematics::PlanarChain;
use crate::metric::Obstacle;
use crate::numerics::Rng;
use crate::vae::{load, save, train, JointVae, Model, TaskVae};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// A command failure and the exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Runtime(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(Error::Io(e))
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Runtime(_) => EXIT_FAILURE,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Runtime(e) => write!(f, "{e}"),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(e: Error) -> CliError {
    CliError::Usage(e.to_string())
}

#[derive(Parser, Debug)]
#[command(name = "geoskill", version, about = "Learn skill manifolds from demonstrations and plan geodesic motions on them")]
pub struct Cli {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Configuration override, applied after the file; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic demonstration set as trajectory CSV.
    Gen(GenArgs),
    /// Train a task-space or joint-space model.
    Train(TrainArgs),
    /// Plan a geodesic between two endpoints.
    Plan(PlanArgs),
    /// Render magnification and uncertainty maps of the latent space.
    Render(RenderArgs),
    /// Run check suites and write a pass/fail table.
    Eval(EvalArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum GenTask {
    Jc,
    Grasp,
    S2dof,
    Circle,
    Multisol,
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[arg(value_enum)]
    pub task: GenTask,
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
    /// Trajectories (per branch for s2dof and circle); sets `gen.n_traj`.
    #[arg(long)]
    pub n: Option<usize>,
    /// Sets `gen.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SpaceArg {
    Task,
    Joint,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    pub space: SpaceArg,
    /// Trajectory CSV.
    #[arg(long)]
    pub data: PathBuf,
    /// Output directory for the model, loss history and echoed config.
    #[arg(long)]
    pub out: PathBuf,
    /// Sets `model.latent_dim`.
    #[arg(long)]
    pub latent_dim: Option<usize>,
}

#[derive(Args, Debug)]
pub struct GraphArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Training CSV; its codes fix the grid bounds and the support nodes.
    #[arg(long)]
    pub data: PathBuf,
    /// Graph cache directory (default: `graphs/` next to the model).
    #[arg(long)]
    pub cache: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PlanArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    /// Start as comma-separated latent coordinates (or a pose with --ambient).
    #[arg(long, allow_hyphen_values = true)]
    pub start: String,
    #[arg(long, allow_hyphen_values = true)]
    pub goal: String,
    /// Read endpoints as ambient poses or joint vectors and encode them.
    #[arg(long)]
    pub ambient: bool,
    /// `x,y[,z],radius,strength[,inflation]`; repeatable.
    #[arg(long = "obstacle", allow_hyphen_values = true)]
    pub obstacles: Vec<String>,
    /// Sets `plan.samples`.
    #[arg(long = "samples")]
    pub samples: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct RenderArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    /// Optional geodesic overlay endpoints (latent).
    #[arg(long, allow_hyphen_values = true, requires = "goal")]
    pub start: Option<String>,
    #[arg(long, allow_hyphen_values = true, requires = "start")]
    pub goal: Option<String>,
    #[arg(long = "obstacle", allow_hyphen_values = true)]
    pub obstacles: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Suites to run, or `all`.
    #[arg(required = true)]
    pub suites: Vec<String>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Training CSV for suites that need encoded data.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code. Messages go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("geoskill: {e}");
            e.exit_code()
        }
    }
}

fn load_config(cli: &Cli) -> CliResult<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        cfg.merge_file(path).map_err(|e| match e {
            Error::Load { ref reason, .. } if reason.contains("line") => usage(e),
            other => CliError::Runtime(other),
        })?;
    }
    for pair in &cli.set {
        cfg.set_pair(pair).map_err(usage)?;
    }
    Ok(cfg)
}

pub fn execute(cli: &Cli) -> CliResult<()> {
    let mut cfg = load_config(cli)?;
    match &cli.command {
        Command::Gen(a) => cmd_gen(&mut cfg, a),
        Command::Train(a) => cmd_train(&mut cfg, a),
        Command::Plan(a) => cmd_plan(&mut cfg, a),
        Command::Render(a) => cmd_render(&cfg, a),
        Command::Eval(a) => cmd_eval(&cfg, a),
    }
}

fn get<T: std::str::FromStr>(cfg: &RunConfig, key: &str) -> CliResult<T> {
    cfg.get(key).map_err(usage)
}

fn list<T: std::str::FromStr>(cfg: &RunConfig, key: &str) -> CliResult<Vec<T>> {
    cfg.list(key).map_err(usage)
}

fn echo_comments(cfg: &RunConfig, prefixes: &[&str]) -> Vec<String> {
    cfg.echo(prefixes).lines().map(str::to_string).collect()
}

fn write_text(dir: &Path, name: &str, text: &str) -> CliResult<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), text)?;
    Ok(())
}

fn chain_or(cfg: &RunConfig, key: &str, default: &[f64]) -> CliResult<PlanarChain> {
    let mut lengths: Vec<f64> = list(cfg, key)?;
    if lengths.is_empty() {
        lengths = default.to_vec();
    }
    Ok(PlanarChain::new(lengths)?)
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

pub fn cmd_gen(cfg: &mut RunConfig, a: &GenArgs) -> CliResult<()> {
    if let Some(n) = a.n {
        cfg.set("gen.n_traj", &n.to_string()).map_err(usage)?;
    }
    if let Some(s) = a.seed {
        cfg.set("gen.seed", &s.to_string()).map_err(usage)?;
    }
    let mut rng = Rng::new(get(cfg, "gen.seed")?);
    let n: usize = get(cfg, "gen.n_traj")?;
    let noise: f64 = get(cfg, "gen.noise")?;
    let samples: usize = get(cfg, "gen.samples")?;
    let mut chain_line = None;
    let (name, set) = match a.task {
        GenTask::Jc => ("jc", gen_jc(n, noise, get(cfg, "gen.spread")?, samples, &mut rng)?),
        GenTask::Grasp => ("grasp", gen_grasp_targets(n, get(cfg, "gen.targets")?, noise, samples, &mut rng)?),
        GenTask::S2dof => {
            let chain = chain_or(cfg, "gen.chain", &[1.0, 1.0])?;
            chain_line = Some(join(chain.link_lengths()));
            ("s2dof", gen_s2dof(n, &chain, &SCurve::default(), samples, &mut rng)?.demos)
        }
        GenTask::Circle => {
            let chain = chain_or(cfg, "gen.chain", &[1.0, 0.8, 0.4])?;
            chain_line = Some(join(chain.link_lengths()));
            ("circle", gen_circle(n, get(cfg, "gen.branches")?, &chain, samples, &mut rng)?.demos)
        }
        GenTask::Multisol => ("multisol", gen_multisolution(get(cfg, "gen.starts")?, get(cfg, "gen.goals")?, get(cfg, "gen.per_pair")?, noise, samples, &mut rng)?.demos),
    };
    let mut comments = vec![format!("generator = {name}"), format!("version = {}", env!("CARGO_PKG_VERSION"))];
    if let Some(c) = chain_line {
        comments.push(format!("chain = {c}"));
    }
    comments.extend(echo_comments(cfg, &["gen"]));
    if let Some(dir) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    write_csv(&set, &comments, &a.out)?;
    Ok(())
}

fn read_data(path: &Path) -> CliResult<(DemoSet, Vec<String>)> {
    Ok(read_csv(path)?)
}

/// `key = value` from CSV comments.
fn comment_value<'a>(comments: &'a [String], key: &str) -> Option<&'a str> {
    comments.iter().find_map(|c| c.split_once('=').filter(|(k, _)| k.trim() == key).map(|(_, v)| v.trim()))
}

pub fn cmd_train(cfg: &mut RunConfig, a: &TrainArgs) -> CliResult<()> {
    if let Some(d) = a.latent_dim {
        cfg.set("model.latent_dim", &d.to_string()).map_err(usage)?;
    }
    let (set, comments) = read_data(&a.data)?;
    let mcfg = cfg.model_config().map_err(usage)?;
    let tcfg = cfg.train_config().map_err(usage)?;
    let mut rng = Rng::new(tcfg.seed);
    let mut model = match (a.space, set.space) {
        (SpaceArg::Task, Space::Task { pos_dim, rot_dim }) => Model::Task(TaskVae::new(pos_dim, rot_dim, &mcfg, &mut rng)?),
        (SpaceArg::Joint, Space::Joint { dof }) => {
            let mut lengths: Vec<f64> = list(cfg, "model.chain")?;
            if lengths.is_empty() {
                let line = comment_value(&comments, "chain").ok_or_else(|| CliError::Usage("joint training needs model.chain or a `chain` comment in the data".into()))?;
                lengths = line.split(',').map(|t| t.trim().parse()).collect::<std::result::Result<_, _>>().map_err(|_| CliError::Usage(format!("bad chain comment `{line}`")))?;
                cfg.set("model.chain", line).map_err(usage)?;
            }
            if lengths.len() != dof {
                return Err(CliError::Runtime(Error::Validation(format!("chain has {} links but the data has {dof} joints", lengths.len()))));
            }
            Model::Joint(JointVae::new(PlanarChain::new(lengths)?, &mcfg, &mut rng)?)
        }
        (want, got) => return Err(CliError::Runtime(Error::Validation(format!("--space {want:?} does not match the data layout {got:?}")))),
    };
    let report = train(&mut model, &set.training_rows(), &mcfg, &tcfg)?;
    match (report.initial_loss(), report.final_loss()) {
        (Some(i), Some(f)) if f.is_finite() => eprintln!("geoskill: training loss {i:.6e} -> {f:.6e}"),
        (_, last) => return Err(CliError::Runtime(Error::Training(format!("no finite final loss ({last:?})")))),
    }
    fs::create_dir_all(&a.out)?;
    save(&model, &a.out.join("model.txt"))?;
    let mut hist = String::from("phase,epoch,kl_weight,loss\n");
    for e in &report.history {
        let _ = writeln!(hist, "{},{},{},{}", e.phase, e.epoch, e.kl_weight, e.loss);
    }
    write_text(&a.out, "history.csv", &hist)?;
    write_text(&a.out, "config.txt", &cfg.echo(&["model", "train"]))?;
    Ok(())
}

fn parse_reals(s: &str, what: &str) -> CliResult<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().ok().filter(|v| v.is_finite()))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| CliError::Usage(format!("{what}: expected comma-separated reals, got `{s}`")))
}

/// `x,y[,z],radius,strength[,inflation]` for ambient points of `dim`
/// coordinates.
pub fn parse_obstacle(s: &str, dim: usize) -> CliResult<Obstacle> {
    let v = parse_reals(s, "--obstacle")?;
    if v.len() != dim + 2 && v.len() != dim + 3 {
        return Err(CliError::Usage(format!("--obstacle needs {dim} center coordinates, a radius, a strength and an optional inflation; got `{s}`")));
    }
    let inflation = v.get(dim + 2).copied().unwrap_or(0.0);
    Obstacle::new(v[..dim].to_vec(), v[dim], v[dim + 1], inflation).map_err(usage)
}

fn ambient_dim(model: &Model) -> usize {
    match model {
        Model::Task(m) => m.pos_dim(),
        Model::Joint(_) => 2,
    }
}

/// A built or cached graph with its cache bookkeeping.
pub struct LoadedGraph {
    pub model: Model,
    pub codes: Vec<Vec<f64>>,
    pub graph: LatentGraph,
    pub key: String,
    pub cache_hit: bool,
}

fn grid_spec(cfg: &RunConfig, codes: &[Vec<f64>]) -> CliResult<GridSpec> {
    let dim = codes.first().map_or(0, Vec::len);
    let mut res: usize = get(cfg, "grid.resolution")?;
    if res == 0 {
        res = GridSpec::default_resolution(dim);
    }
    let mut spec = GridSpec::covering(codes, get(cfg, "grid.margin")?, res)?;
    spec.connectivity = cfg.connectivity().map_err(usage)?;
    Ok(spec)
}

/// Loads the model, encodes the data and builds the graph, or reads it
/// from the cache keyed by the SHA-256 of model bytes, data bytes and grid
/// settings.
pub fn load_graph(cfg: &RunConfig, g: &GraphArgs) -> CliResult<LoadedGraph> {
    let model_bytes = fs::read(&g.model).map_err(|e| Error::Load { path: g.model.clone(), reason: e.to_string() })?;
    let data_bytes = fs::read(&g.data).map_err(|e| Error::Load { path: g.data.clone(), reason: e.to_string() })?;
    let model = load(&g.model)?;
    let (set, _) = read_data(&g.data)?;
    let codes: Vec<Vec<f64>> = set.training_rows().iter().map(|r| model.encode(r).map(|e| e.0)).collect::<Result<_, _>>()?;
    let spec = grid_spec(cfg, &codes)?;
    let influence: f64 = get(cfg, "grid.influence")?;
    let mut h = Sha256::new();
    h.update(&model_bytes);
    h.update([0u8]);
    h.update(&data_bytes);
    h.update([0u8]);
    h.update(format!("{spec:?} influence={influence:?}").as_bytes());
    let key = hex::encode(h.finalize());
    let dir = g.cache.clone().unwrap_or_else(|| g.model.parent().map_or_else(|| PathBuf::from("graphs"), |p| p.join("graphs")));
    let path = dir.join(format!("graph-{}.bin", &key[..16]));
    if let Ok(bytes) = fs::read(&path) {
        if let Ok(graph) = read_graph(&bytes[..]) {
            if graph.tag == key {
                return Ok(LoadedGraph { model, codes, graph, key, cache_hit: true });
            }
        }
    }
    let mut graph = LatentGraph::build(&model, spec, &codes, &[])?;
    graph.influence = influence;
    graph.tag = key.clone();
    fs::create_dir_all(&dir)?;
    let mut buf = Vec::new();
    write_graph(&graph, &mut buf)?;
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, &buf)?;
    fs::rename(&tmp, &path)?;
    Ok(LoadedGraph { model, codes, graph, key, cache_hit: false })
}

fn endpoint(model: &Model, s: &str, ambient: bool, what: &str) -> CliResult<Vec<f64>> {
    let v = parse_reals(s, what)?;
    if ambient {
        if v.len() != model.input_dim() {
            return Err(CliError::Usage(format!("{what}: expected {} ambient values, got {}", model.input_dim(), v.len())));
        }
        return Ok(model.encode(&v)?.0);
    }
    if v.len() != model.latent_dim() {
        return Err(CliError::Usage(format!("{what}: expected {} latent coordinates, got {}", model.latent_dim(), v.len())));
    }
    Ok(v)
}

fn plan_options(cfg: &RunConfig) -> CliResult<PlanOptions> {
    let cp: usize = get(cfg, "plan.control_points")?;
    Ok(PlanOptions { samples: get(cfg, "plan.samples")?, control_points: (cp > 0).then_some(cp), energy_threshold: get(cfg, "plan.energy_threshold")? })
}

/// Lines of a `diagnostics.txt`.
pub fn diagnostics_text(p: &Plan, key: &str, cache_hit: bool) -> String {
    format!("{}cache_key={key}\ncache_hit={cache_hit}\n{}", p.diagnostics.to_text(), p.timings.to_text())
}

/// Diagnostics keys whose values vary between identical runs.
pub const VOLATILE_KEYS: [&str; 5] = ["cache_hit", "reweight_ms", "search_ms", "spline_ms", "replan_ms"];

pub fn cmd_plan(cfg: &mut RunConfig, a: &PlanArgs) -> CliResult<()> {
    if let Some(s) = a.samples {
        cfg.set("plan.samples", &s.to_string()).map_err(usage)?;
    }
    let opts = plan_options(cfg)?;
    let mut lg = load_graph(cfg, &a.graph)?;
    let dim = ambient_dim(&lg.model);
    let obstacles: Vec<Obstacle> = a.obstacles.iter().map(|s| parse_obstacle(s, dim)).collect::<CliResult<_>>()?;
    let start = endpoint(&lg.model, &a.start, a.ambient, "--start")?;
    let goal = endpoint(&lg.model, &a.goal, a.ambient, "--goal")?;
    let p = plan(&lg.model, &mut lg.graph, &start, &goal, &obstacles, &opts)?;

    let mut comments = vec![format!("plan start = {}", join(&start)), format!("plan goal = {}", join(&goal))];
    comments.extend(a.obstacles.iter().map(|o| format!("obstacle = {o}")));
    comments.extend(echo_comments(cfg, &["grid", "plan"]));
    fs::create_dir_all(&a.out)?;
    write_csv(&p.trajectory.to_demo_set("geodesic")?, &comments, &a.out.join("trajectory.csv"))?;
    let mut latent = String::new();
    let _ = writeln!(latent, "{}", (0..start.len()).map(|k| format!("z{k}")).collect::<Vec<_>>().join(","));
    for z in &p.trajectory.latent {
        let _ = writeln!(latent, "{}", join(z));
    }
    write_text(&a.out, "latent.csv", &latent)?;
    let mut nodes = String::new();
    for &n in &p.path.nodes {
        let _ = writeln!(nodes, "{}", join(&lg.graph.grid().coords(n)));
    }
    write_text(&a.out, "path_nodes.csv", &nodes)?;
    write_text(&a.out, "diagnostics.txt", &diagnostics_text(&p, &lg.key, lg.cache_hit))?;
    write_text(&a.out, "config.txt", &cfg.echo(&["grid", "plan"]))?;
    Ok(())
}

pub fn cmd_render(cfg: &RunConfig, a: &RenderArgs) -> CliResult<()> {
    let res: usize = get(cfg, "render.resolution")?;
    let formats: Vec<String> = list(cfg, "render.format")?;
    if formats.iter().any(|f| f != "ppm" && f != "svg") {
        return Err(CliError::Usage(format!("render.format entries must be `ppm` or `svg`, got {formats:?}")));
    }
    let with_sigma: bool = get(cfg, "render.sigma")?;
    let mut lg = load_graph(cfg, &a.graph)?;
    let d = lg.model.latent_dim();
    if d > 3 {
        return Err(CliError::Runtime(Error::Argument(format!("unsupported render dimension {d}; only 2-D and 3-D latent spaces can be rendered"))));
    }
    let obstacles: Vec<Obstacle> = a.obstacles.iter().map(|s| parse_obstacle(s, ambient_dim(&lg.model))).collect::<CliResult<_>>()?;
    let (lower, upper) = (lg.graph.spec().lower.clone(), lg.graph.spec().upper.clone());
    let mut node_paths = Vec::new();
    let mut curves = Vec::new();
    if let (Some(s), Some(g)) = (&a.start, &a.goal) {
        let start = endpoint(&lg.model, s, false, "--start")?;
        let goal = endpoint(&lg.model, g, false, "--goal")?;
        let p = plan(&lg.model, &mut lg.graph, &start, &goal, &obstacles, &plan_options(cfg)?)?;
        node_paths.push(p.path.nodes.iter().map(|&n| lg.graph.grid().coords(n)).collect());
        curves.push(p.trajectory.latent.clone());
    }
    fs::create_dir_all(&a.out)?;
    let emit = |name: &str, map: &render::Heatmap, codes: &[Vec<f64>], paths: &[Vec<Vec<f64>>], curves: &[Vec<Vec<f64>>]| -> CliResult<()> {
        for f in &formats {
            let text = if f == "ppm" { map.to_ppm() } else { map.to_svg(codes, paths, curves) };
            write_text(&a.out, &format!("{name}.{f}"), &text)?;
        }
        Ok(())
    };
    if d == 2 {
        let (mag, sigma) = render::latent_maps(&lg.model, &obstacles, [lower[0], lower[1]], [upper[0], upper[1]], res)?;
        emit("magnification", &mag, &lg.codes, &node_paths, &curves)?;
        if with_sigma {
            emit("sigma", &sigma, &lg.codes, &node_paths, &curves)?;
        }
    } else {
        for (name, [i, j], map) in render::slices_3d(&lg.model, &obstacles, &lower, &upper, res)? {
            let project = |pts: &[Vec<f64>]| pts.iter().map(|z| vec![z[i], z[j]]).collect::<Vec<_>>();
            let paths: Vec<Vec<Vec<f64>>> = node_paths.iter().map(|p| project(p)).collect();
            let cs: Vec<Vec<Vec<f64>>> = curves.iter().map(|c| project(c)).collect();
            emit(&name, &map, &project(&lg.codes), &paths, &cs)?;
        }
        let n = res.clamp(2, 64);
        write_text(&a.out, "volume.csv", &render::volume_csv(&lg.model, &obstacles, &lower, &upper, n)?)?;
    }
    write_text(&a.out, "config.txt", &cfg.echo(&["grid", "plan", "render"]))?;
    Ok(())
}

pub fn cmd_eval(cfg: &RunConfig, a: &EvalArgs) -> CliResult<()> {
    let mut names: Vec<&str> = Vec::new();
    for s in &a.suites {
        if s == "all" {
            names.extend(eval::SUITES);
        } else if let Some(n) = eval::SUITES.iter().find(|n| **n == s.as_str()) {
            names.push(n);
        } else {
            return Err(CliError::Usage(format!("unknown suite `{s}`; expected one of {} or all", eval::SUITES.join(", "))));
        }
    }
    let model = a.model.as_deref().map(load).transpose()?;
    let codes = match (&model, &a.data) {
        (Some(m), Some(path)) => {
            let (set, _) = read_data(path)?;
            Some(set.training_rows().iter().map(|r| m.encode(r).map(|e| e.0)).collect::<Result<Vec<_>, _>>()?)
        }
        _ => None,
    };
    let ctx = eval::EvalContext { model: model.as_ref(), codes: codes.as_deref(), seed: get(cfg, "eval.seed")?, points: get(cfg, "eval.points")? };
    let mut checks = Vec::new();
    for n in names {
        checks.extend(eval::run_suite(n, &ctx).map_err(|e| match e {
            Error::Argument(m) if m.starts_with("suite") => CliError::Usage(m),
            other => CliError::Runtime(other),
        })?);
    }
    let table = eval::report(&checks);
    print!("{table}");
    write_text(&a.out, "report.tsv", &table)?;
    write_text(&a.out, "config.txt", &cfg.echo(&["eval"]))?;
    if eval::all_required_pass(&checks) {
        Ok(())
    } else {
        let failed: Vec<&str> = checks.iter().filter(|c| c.required && !c.pass).map(|c| c.name.as_str()).collect();
        Err(CliError::Runtime(Error::Validation(format!("failed checks: {}", failed.join(", ")))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn obstacle_flag_parses() {
        let o = parse_obstacle("0.5,0.1,0.05,10", 2).unwrap();
        assert_eq!(o.center, vec![0.5, 0.1]);
        assert_eq!((o.radius, o.strength, o.inflation), (0.05, 10.0, 0.0));
        assert_eq!(parse_obstacle("0,0,0,1,2,0.5", 3).unwrap().inflation, 0.5);
        assert!(matches!(parse_obstacle("1,2,3", 2), Err(CliError::Usage(_))));
        assert!(matches!(parse_obstacle("1,x,3,4", 2), Err(CliError::Usage(_))));
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run(["geoskill", "gen", "nope", "--out", "x.csv"]), EXIT_USAGE);
        assert_eq!(run(["geoskill", "gen", "jc"]), EXIT_USAGE);
        assert_eq!(run(["geoskill", "--set", "gen.bogus=1", "gen", "jc", "--out", "x.csv"]), EXIT_USAGE);
        assert_eq!(run(["geoskill", "--bogus"]), EXIT_USAGE);
    }

    #[test]
    fn comment_lookup() {
        let c = vec!["generator = s2dof".to_string(), "chain = 1,1".to_string()];
        assert_eq!(comment_value(&c, "chain"), Some("1,1"));
        assert_eq!(comment_value(&c, "seed"), None);
    }
}
