//! The `mtdc` command line.
//!
//! Every subcommand computes all of its outputs first and only then creates
//! the output directory and writes them, together with `<command>.meta.json`
//! holding the full configuration. `mtdc --replay <meta>` re-runs that
//! configuration and reproduces the files byte for byte. A JSON summary goes
//! to standard output.
//!
//! Exit codes: 0 on success, 1 when the computation fails (the error name is
//! printed), 2 on usage errors.

use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use mtdc_core::network::generate_lattice;
use mtdc_core::resistance::{kstar, rayleigh_check, EdgeChange, ResistanceMatrix};
use mtdc_core::rng::NormalStream;
use mtdc_core::simulate::{default_step, monte_carlo_h2_with, sample_initial, simulate_sampled, white_noise_variance};
use mtdc_core::systems::{assemble, compare_controllers, compare_controllers_lyapunov};
use mtdc_core::{ControllerParams, Family, InitialMode, ModelKind, StateLabel, StateSpaceModel};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::formats::{export_trajectory, network_to_json, sweep_to_csv, write_edge_list, FormatError};
use crate::genspec::{parse_family, NetworkSpec};
use crate::sweep::parallel_sweep;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{name}: {source}", name = .0.name(), source = .0)]
    Compute(#[from] mtdc_core::Error),
    #[error("{0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        match e {
            FormatError::Core(e) => CliError::Compute(e),
            other => CliError::Usage(other.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "mtdc", version, about = "H2 performance of voltage control in multi-terminal DC grids")]
#[command(args_conflicts_with_subcommands = true, arg_required_else_help = true)]
pub struct Cli {
    /// Re-run the configuration recorded in a metadata file
    #[arg(long, value_name = "META")]
    pub replay: Option<PathBuf>,
    /// Output directory for --replay [default: directory of META]
    #[arg(long, requires = "replay")]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Subcommand, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Generate a network and write it out
    Gen(GenArgs),
    /// Squared H2 norms of the slack, droop and DAPI controllers
    H2(H2Args),
    /// Closed-form norms against the Lyapunov solve
    Compare(CompareArgs),
    /// Norms and Kirchhoff index across a network family
    Sweep(SweepArgs),
    /// Effective resistances and the Kirchhoff index
    Resist(ResistArgs),
    /// Simulate one controller: a trajectory or a Monte Carlo norm estimate
    Sim(SimArgs),
    /// Voltage transients of all three controllers on a radial grid
    Fig2(Fig2Args),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Gen(_) => "gen",
            Command::H2(_) => "h2",
            Command::Compare(_) => "compare",
            Command::Sweep(_) => "sweep",
            Command::Resist(_) => "resist",
            Command::Sim(_) => "sim",
            Command::Fig2(_) => "fig2",
        }
    }

    fn out_dir(&self) -> &Path {
        match self {
            Command::Gen(a) => &a.out.out,
            Command::H2(a) => &a.out.out,
            Command::Compare(a) => &a.out.out,
            Command::Sweep(a) => &a.out.out,
            Command::Resist(a) => &a.out.out,
            Command::Sim(a) => &a.out.out,
            Command::Fig2(a) => &a.out.out,
        }
    }

    fn set_out_dir(&mut self, dir: PathBuf) {
        let slot = match self {
            Command::Gen(a) => &mut a.out,
            Command::H2(a) => &mut a.out,
            Command::Compare(a) => &mut a.out,
            Command::Sweep(a) => &mut a.out,
            Command::Resist(a) => &mut a.out,
            Command::Sim(a) => &mut a.out,
            Command::Fig2(a) => &mut a.out,
        };
        slot.out = dir;
    }

    fn network_mut(&mut self) -> Option<&mut NetworkArgs> {
        match self {
            Command::Gen(a) => Some(&mut a.network),
            Command::H2(a) => Some(&mut a.network),
            Command::Compare(a) => Some(&mut a.network),
            Command::Resist(a) => Some(&mut a.network),
            Command::Sim(a) => Some(&mut a.network),
            Command::Sweep(_) | Command::Fig2(_) => None,
        }
    }

    fn seed(&self) -> Option<u64> {
        match self {
            Command::Sim(a) => Some(a.seed),
            Command::Fig2(a) => Some(a.seed),
            _ => None,
        }
    }
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        Ok(v) => Err(format!("{v} is not a positive finite number")),
        Err(e) => Err(e.to_string()),
    }
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkArgs {
    /// Network: path:N, grid2:MxN, grid3:MxNxP, fuzz:H:<base> or file:<path>
    #[arg(long = "gen", value_name = "SPEC")]
    pub spec: NetworkSpec,
    /// Resistance of generated lines, ohms
    #[arg(long, default_value_t = 1.0, value_parser = positive)]
    pub r: f64,
}

#[derive(Args, Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamArgs {
    /// Terminal capacitance, F
    #[arg(long, default_value_t = 1e-3, value_parser = positive)]
    pub c: f64,
    /// Droop gain
    #[arg(long, default_value_t = 0.1, value_parser = positive)]
    pub kp: f64,
    /// DAPI integrator time constant
    #[arg(long, default_value_t = 100.0, value_parser = positive)]
    pub k: f64,
    /// DAPI communication gain
    #[arg(long, default_value_t = 1000.0, value_parser = positive)]
    pub gamma: f64,
}

impl ParamArgs {
    fn params(&self) -> Result<ControllerParams, CliError> {
        Ok(ControllerParams::new(self.c, self.kp, self.k, self.gamma)?)
    }
}

#[derive(Args, Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OutArgs {
    /// Output directory
    #[arg(long, default_value = "mtdc-out")]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NetworkFormat {
    Json,
    Edges,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenArgs {
    #[command(flatten)]
    pub network: NetworkArgs,
    #[arg(long, value_enum, default_value_t = NetworkFormat::Json)]
    pub format: NetworkFormat,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    ClosedForm,
    Lyapunov,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct H2Args {
    #[command(flatten)]
    pub network: NetworkArgs,
    #[command(flatten)]
    pub params: ParamArgs,
    /// Slack bus index
    #[arg(long, default_value_t = 0)]
    pub ground: usize,
    #[arg(long, value_enum, default_value_t = MethodArg::ClosedForm)]
    pub method: MethodArg,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareArgs {
    #[command(flatten)]
    pub network: NetworkArgs,
    #[command(flatten)]
    pub params: ParamArgs,
    /// Slack bus index
    #[arg(long, default_value_t = 0)]
    pub ground: usize,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepArgs {
    /// path, grid2, grid3 or fuzz:H:<path|grid2|grid3>
    #[arg(long, value_parser = parse_family)]
    pub family: Family,
    /// Side lengths, strictly ascending
    #[arg(long, value_delimiter = ',', required = true)]
    pub sizes: Vec<usize>,
    #[command(flatten)]
    pub params: ParamArgs,
    /// Slack bus index (0 is a path end or grid corner)
    #[arg(long, default_value_t = 0)]
    pub ground: usize,
    /// Line resistance, ohms
    #[arg(long, default_value_t = 1.0, value_parser = positive)]
    pub r: f64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResistArgs {
    #[command(flatten)]
    pub network: NetworkArgs,
    /// Also check that removing this line raises no effective resistance
    #[arg(long, value_name = "EDGE")]
    pub remove_edge: Option<usize>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelArg {
    Slack,
    Droop,
    Dapi,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Slack => ModelKind::Slack,
            ModelArg::Droop => ModelKind::Droop,
            ModelArg::Dapi => ModelKind::Dapi,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimMode {
    /// Free response from one random initial state
    Trajectory,
    /// Mean output energy over random initial states
    InitialCondition,
    /// Stationary output variance under white noise
    WhiteNoise,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitArg {
    /// x0 = B xi
    BbStar,
    /// Unit-normal voltages, zero integrators
    PaperFig2,
}

impl From<InitArg> for InitialMode {
    fn from(m: InitArg) -> Self {
        match m {
            InitArg::BbStar => InitialMode::BbStar,
            InitArg::PaperFig2 => InitialMode::PaperFig2,
        }
    }
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimArgs {
    #[command(flatten)]
    pub network: NetworkArgs,
    #[command(flatten)]
    pub params: ParamArgs,
    /// Slack bus index
    #[arg(long, default_value_t = 0)]
    pub ground: usize,
    #[arg(long, value_enum, default_value_t = ModelArg::Droop)]
    pub model: ModelArg,
    #[arg(long, value_enum, default_value_t = SimMode::Trajectory)]
    pub mode: SimMode,
    #[arg(long, value_enum, default_value_t = InitArg::BbStar)]
    pub init: InitArg,
    /// Horizon, s
    #[arg(long = "T", default_value_t = 1.0, value_parser = positive)]
    pub horizon: f64,
    /// Integration step, s [default: 0.1 / row-sum norm of A]
    #[arg(long, value_parser = positive)]
    pub dt: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Monte Carlo samples
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    /// Buses to export [default: the first ten voltage buses]
    #[arg(long, value_delimiter = ',')]
    pub nodes: Option<Vec<usize>>,
    /// Integration steps between exported rows [default: about 1000 rows]
    #[arg(long)]
    pub record_every: Option<usize>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig2Args {
    /// Number of buses on the radial grid
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Horizon, s
    #[arg(long = "T", default_value_t = 30.0, value_parser = positive)]
    pub horizon: f64,
    /// Buses exported per controller
    #[arg(long, default_value_t = 10)]
    pub buses: usize,
    /// Approximate rows per file
    #[arg(long, default_value_t = 1000)]
    pub points: usize,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
    pub core_version: String,
    pub config: Command,
    pub seed: Option<u64>,
    pub outputs: Vec<String>,
    #[serde(default)]
    pub notes: Vec<String>,
}

/// Everything a command produces, held in memory until it is written.
struct Product {
    files: Vec<(String, String)>,
    summary: serde_json::Map<String, Value>,
    notes: Vec<String>,
}

impl Product {
    fn new(summary: Value) -> Self {
        let Value::Object(summary) = summary else { unreachable!("summaries are objects") };
        Product { files: Vec::new(), summary, notes: Vec::new() }
    }

    fn file(mut self, name: &str, content: String) -> Self {
        self.files.push((name.to_string(), content));
        self
    }
}

fn pretty<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("plain data") + "\n"
}

fn build_network(args: &NetworkArgs) -> Result<mtdc_core::Network, CliError> {
    Ok(args.spec.build(args.r)?)
}

/// Up to `count` voltage buses of `model`, in node order.
fn voltage_nodes(model: &StateSpaceModel, count: usize) -> Vec<usize> {
    let mut nodes: Vec<usize> = model
        .state_labels
        .iter()
        .filter_map(|l| match l {
            StateLabel::Voltage(i) => Some(*i),
            StateLabel::Integrator(_) => None,
        })
        .collect();
    nodes.sort_unstable();
    nodes.truncate(count);
    nodes
}

fn record_interval(horizon: f64, dt: f64, rows: usize) -> usize {
    let steps = (horizon / dt).ceil() as usize;
    steps.div_ceil(rows.max(1)).max(1)
}

fn run_gen(a: &GenArgs) -> Result<Product, CliError> {
    let net = build_network(&a.network)?;
    let (name, content) = match a.format {
        NetworkFormat::Json => ("network.json", network_to_json(&net)),
        NetworkFormat::Edges => ("network.txt", write_edge_list(&net)),
    };
    let summary = json!({"n": net.node_count(), "edges": net.edges().len(), "network": a.network.spec.to_string()});
    Ok(Product::new(summary).file(name, content))
}

fn run_h2(a: &H2Args) -> Result<Product, CliError> {
    let net = build_network(&a.network)?;
    let params = a.params.params()?;
    let report = match a.method {
        MethodArg::ClosedForm => compare_controllers(&net, &params, a.ground)?,
        MethodArg::Lyapunov => compare_controllers_lyapunov(&net, &params, a.ground)?,
    };
    let summary = json!({
        "n": report.n,
        "h2_slack": report.values.slack,
        "h2_droop": report.values.droop,
        "h2_dapi": report.values.dapi,
        "method": report.method,
        "ground": report.ground,
        "ordering_flags": report.ordering_flags,
    });
    Ok(Product::new(summary).file("h2.json", pretty(&report)))
}

fn run_compare(a: &CompareArgs) -> Result<Product, CliError> {
    let net = build_network(&a.network)?;
    let params = a.params.params()?;
    let closed = compare_controllers(&net, &params, a.ground)?;
    let oracle = compare_controllers_lyapunov(&net, &params, a.ground)?;
    let rel = |x: f64, y: f64| (x - y).abs() / y.abs();
    let errors = json!({
        "slack": rel(closed.values.slack, oracle.values.slack),
        "droop": rel(closed.values.droop, oracle.values.droop),
        "dapi": rel(closed.values.dapi, oracle.values.dapi),
    });
    let doc = json!({"closed_form": closed, "lyapunov": oracle, "relative_error": errors});
    let summary = json!({
        "n": closed.n,
        "closed_form": closed.values,
        "lyapunov": oracle.values,
        "relative_error": errors,
        "ordering_flags": closed.ordering_flags,
    });
    Ok(Product::new(summary).file("compare.json", pretty(&doc)))
}

fn run_sweep(a: &SweepArgs) -> Result<Product, CliError> {
    let params = a.params.params()?;
    let result = parallel_sweep(a.family, &a.sizes, &params, a.ground, a.r)?;
    let csv = sweep_to_csv(&result.records).map_err(|e| CliError::Output(e.to_string()))?;
    let max = |f: fn(&mtdc_core::ScalingRecord) -> f64| result.records.iter().map(f).fold(0.0, f64::max);
    let summary = json!({
        "family": a.family.name(),
        "n": result.records.iter().map(|r| r.n).collect::<Vec<_>>(),
        "h2_slack": result.records.iter().map(|r| r.h2_slack).collect::<Vec<_>>(),
        "fit": result.fit,
        "normalized_slack_spread": result.normalized_slack_spread(),
        "max_h2_droop": max(|r| r.h2_droop),
        "max_h2_dapi": max(|r| r.h2_dapi),
    });
    Ok(Product::new(summary).file("sweep.csv", csv))
}

fn run_resist(a: &ResistArgs) -> Result<Product, CliError> {
    let net = build_network(&a.network)?;
    let matrix = ResistanceMatrix::new(&net)?;
    let n = net.node_count();
    let mut csv = String::from("i,j,r_eff\n");
    for i in 0..n {
        for j in i + 1..n {
            csv.push_str(&format!("{i},{j},{}\n", matrix.get(i, j)));
        }
    }
    let rayleigh = match a.remove_edge {
        Some(e) => Some(rayleigh_check(&net, EdgeChange::Remove(e))?),
        None => None,
    };
    let summary = json!({
        "n": n,
        "kirchhoff": matrix.total(),
        "kstar": kstar(&net)?,
        "rayleigh": rayleigh,
    });
    Ok(Product::new(summary).file("resistance.csv", csv))
}

fn run_sim(a: &SimArgs) -> Result<Product, CliError> {
    let net = build_network(&a.network)?;
    let params = a.params.params()?;
    let model = assemble(&net, &params, a.model.into(), a.ground)?;
    let dt = a.dt.unwrap_or_else(|| default_step(&model));
    match a.mode {
        SimMode::Trajectory => {
            let x0 = sample_initial(&model, a.init.into(), a.seed);
            let every = a.record_every.unwrap_or_else(|| record_interval(a.horizon, dt, 1000));
            let mut traj = simulate_sampled(&model, &x0, a.horizon, dt, every)?;
            traj.seed = Some(a.seed);
            let nodes = a.nodes.clone().unwrap_or_else(|| voltage_nodes(&model, 10));
            let csv = export_trajectory(&traj, &nodes)?;
            let summary = json!({
                "model": model.kind,
                "n": net.node_count(),
                "dt": dt,
                "record_every": every,
                "rows": traj.times.len(),
                "nodes": nodes,
                "final_time": traj.times.last(),
            });
            Ok(Product::new(summary).file("trajectory.csv", csv))
        }
        SimMode::InitialCondition | SimMode::WhiteNoise => {
            let estimate = if a.mode == SimMode::WhiteNoise {
                white_noise_variance(&model, a.horizon, dt, a.seed)?
            } else {
                monte_carlo_h2_with(&model, a.samples, a.horizon, dt, a.seed, a.init.into())?
            };
            let report = compare_controllers(&net, &params, a.ground)?;
            let closed = match model.kind {
                ModelKind::Slack => report.values.slack,
                ModelKind::Droop => report.values.droop,
                ModelKind::Dapi => report.values.dapi,
            };
            let summary = json!({
                "model": model.kind,
                "estimate": estimate,
                "closed_form": closed,
                "z_score": (estimate.mean - closed) / estimate.stderr,
            });
            Ok(Product::new(summary).file("mc.json", pretty(&estimate)))
        }
    }
}

/// Same unit-normal bus voltages for every controller; the slack bus stays
/// at zero deviation and integrators start at rest.
fn fig2_initial(model: &StateSpaceModel, v0: &[f64]) -> Vec<f64> {
    model
        .state_labels
        .iter()
        .map(|l| match l {
            StateLabel::Voltage(i) => v0[*i],
            StateLabel::Integrator(_) => 0.0,
        })
        .collect()
}

fn run_fig2(a: &Fig2Args) -> Result<Product, CliError> {
    let net = generate_lattice(&[a.n], 1.0)?;
    let mut v0 = vec![0.0; a.n];
    NormalStream::new(a.seed, 0).fill_normal(&mut v0);
    let mut files = Vec::new();
    let mut runs = Vec::new();
    for (suffix, c) in [("", 1e-3), ("_1F", 1.0)] {
        let params = ControllerParams { c, ..ControllerParams::default() };
        for kind in ModelKind::ALL {
            let model = assemble(&net, &params, kind, 0)?;
            let dt = default_step(&model);
            let every = record_interval(a.horizon, dt, a.points);
            let traj = simulate_sampled(&model, &fig2_initial(&model, &v0), a.horizon, dt, every)?;
            let nodes = voltage_nodes(&model, a.buses);
            let name = format!("fig2_{}{suffix}.csv", kind.as_str());
            runs.push(json!({"file": name, "model": kind, "c": c, "dt": dt, "record_every": every, "rows": traj.times.len(), "nodes": nodes}));
            files.push((name, export_trajectory(&traj, &nodes)?));
        }
    }
    let mut product = Product::new(json!({"n": a.n, "seed": a.seed, "T": a.horizon, "runs": runs}));
    product.files = files;
    product.notes.push(format!(
        "exported buses: the first {} voltage buses by index; bus 0 is the slack bus and is absent from the slack files",
        a.buses
    ));
    product.notes.push("files without suffix use C = 1 mF; *_1F files repeat the run with C = 1 F".into());
    Ok(product)
}

fn execute(command: &Command) -> Result<Product, CliError> {
    match command {
        Command::Gen(a) => run_gen(a),
        Command::H2(a) => run_h2(a),
        Command::Compare(a) => run_compare(a),
        Command::Sweep(a) => run_sweep(a),
        Command::Resist(a) => run_resist(a),
        Command::Sim(a) => run_sim(a),
        Command::Fig2(a) => run_fig2(a),
    }
}

fn write_outputs(command: &Command, product: Product) -> Result<Value, CliError> {
    let dir = command.out_dir();
    let io = |path: &Path, e: std::io::Error| CliError::Output(format!("{}: {e}", path.display()));
    std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let meta_name = format!("{}.meta.json", command.name());
    let meta = Metadata {
        tool: "mtdc".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        core_version: mtdc_core::VERSION.into(),
        config: command.clone(),
        seed: command.seed(),
        outputs: product.files.iter().map(|(name, _)| name.clone()).collect(),
        notes: product.notes,
    };
    let mut written = Vec::new();
    for (name, content) in product.files.iter().chain([(meta_name, pretty(&meta))].iter()) {
        let path = dir.join(name);
        std::fs::write(&path, content).map_err(|e| io(&path, e))?;
        written.push(path.display().to_string());
    }
    let mut summary = serde_json::Map::new();
    summary.insert("command".into(), command.name().into());
    summary.extend(product.summary);
    summary.insert("files".into(), written.into());
    Ok(Value::Object(summary))
}

fn load_replay(meta_path: &Path, out: Option<PathBuf>) -> Result<Command, CliError> {
    let text = std::fs::read_to_string(meta_path).map_err(|e| CliError::Usage(format!("{}: {e}", meta_path.display())))?;
    let meta: Metadata =
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", meta_path.display())))?;
    if meta.tool != "mtdc" {
        return Err(CliError::Usage(format!("{} was not written by mtdc", meta_path.display())));
    }
    if meta.version != env!("CARGO_PKG_VERSION") {
        eprintln!("warning: replaying metadata from mtdc {} with mtdc {}", meta.version, env!("CARGO_PKG_VERSION"));
    }
    let mut command = meta.config;
    let dir = out.unwrap_or_else(|| meta_path.parent().map(Path::to_path_buf).unwrap_or_default());
    command.set_out_dir(if dir.as_os_str().is_empty() { PathBuf::from(".") } else { dir });
    Ok(command)
}

fn resolve(cli: Cli) -> Result<Command, CliError> {
    let mut command = match (cli.replay, cli.command) {
        (Some(meta), None) => load_replay(&meta, cli.out)?,
        (None, Some(command)) => command,
        _ => return Err(CliError::Usage("give a subcommand or --replay".into())),
    };
    if let Some(network) = command.network_mut() {
        network.spec = network.spec.absolutized().map_err(|e| CliError::Usage(e.to_string()))?;
    }
    Ok(command)
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = resolve(cli).and_then(|command| {
        let product = execute(&command)?;
        write_outputs(&command, product)
    });
    match result {
        Ok(summary) => {
            let text = serde_json::to_string_pretty(&summary).expect("plain data");
            // a closed pipe on stdout is not a failure of the run
            let _ = writeln!(std::io::stdout().lock(), "{text}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
