//! File formats, report serialization and the method dispatch behind the command line.
//!
//! Network, sweep and simulation files are TOML documents carrying a
//! `schema_version`. Reports are written either as long-format CSV or as JSON.
//! Index columns in CSV output are one-based.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::closed_form::{closed_form_report, GraphKind, HomogeneousParams};
use crate::error::{Error, Result};
use crate::graph::{Edge, WeightedGraph};
use crate::montecarlo::{simulate_covariance, Scheme, SimConfig};
use crate::report::{CovarianceReport, Method, Quantity};
use crate::swing::{linearize_network, LinearizedSystem, PowerNetwork};
use crate::variance::{asymptotic_variance_numeric, asymptotic_variance_uniform_ratio, first_order_variance};

pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "GRIDFLUCT_THREADS";

/// Trajectories used by the Monte Carlo route when no simulation config is given.
pub const DEFAULT_TRAJECTORIES: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn parse(s: &str) -> Option<Format> {
        match s {
            "csv" => Some(Format::Csv),
            "json" => Some(Format::Json),
            _ => None,
        }
    }
}

fn parse_toml<T: serde::de::DeserializeOwned>(text: &str, context: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| Error::Parse {
        context: context.to_string(),
        message: e.to_string().trim_end().to_string(),
    })
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Parse {
        context: path.display().to_string(),
        message: e.to_string(),
    })
}

fn check_schema(version: u32) -> Result<()> {
    if version == SCHEMA_VERSION {
        Ok(())
    } else {
        Err(Error::validation(
            "schema_version",
            format!("unsupported version {version}, expected {SCHEMA_VERSION}"),
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeRecord {
    pub id: String,
    pub inertia: f64,
    pub damping: f64,
    pub power: f64,
    pub noise: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineRecord {
    pub from: String,
    pub to: String,
    pub capacity: f64,
}

/// On-disk network description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub schema_version: u32,
    pub nodes: Vec<NodeRecord>,
    #[serde(default)]
    pub lines: Vec<LineRecord>,
}

impl NetworkFile {
    pub fn from_network(net: &PowerNetwork) -> Self {
        let nodes = (0..net.node_count())
            .map(|i| NodeRecord {
                id: net.node_ids[i].clone(),
                inertia: net.inertia[i],
                damping: net.damping[i],
                power: net.power[i],
                noise: net.noise[i],
            })
            .collect();
        let lines = net
            .topology
            .edges()
            .iter()
            .map(|e| LineRecord {
                from: net.node_ids[e.from].clone(),
                to: net.node_ids[e.to].clone(),
                capacity: e.weight,
            })
            .collect();
        NetworkFile {
            schema_version: SCHEMA_VERSION,
            nodes,
            lines,
        }
    }

    /// Validates every record, naming the offending field, then builds the network.
    pub fn into_network(self) -> Result<PowerNetwork> {
        check_schema(self.schema_version)?;
        if self.nodes.is_empty() {
            return Err(Error::validation("nodes", "at least one node is required"));
        }
        let mut index = HashMap::new();
        for (k, node) in self.nodes.iter().enumerate() {
            if node.id.trim().is_empty() {
                return Err(Error::validation(format!("nodes[{k}].id"), "must not be empty"));
            }
            if index.insert(node.id.as_str(), k).is_some() {
                return Err(Error::validation(format!("nodes[{k}].id"), format!("duplicate node id `{}`", node.id)));
            }
            for (name, v) in [("inertia", node.inertia), ("damping", node.damping)] {
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::validation(
                        format!("nodes[{k}].{name}"),
                        format!("node `{}` must be positive, got {v}", node.id),
                    ));
                }
            }
            if !(node.noise.is_finite() && node.noise >= 0.0) {
                return Err(Error::validation(
                    format!("nodes[{k}].noise"),
                    format!("node `{}` must be non-negative, got {}", node.id, node.noise),
                ));
            }
            if !node.power.is_finite() {
                return Err(Error::validation(format!("nodes[{k}].power"), format!("node `{}` is not finite", node.id)));
            }
        }
        let mut edges = Vec::with_capacity(self.lines.len());
        for (k, line) in self.lines.iter().enumerate() {
            let endpoint = |field: &str, id: &str| {
                index
                    .get(id)
                    .copied()
                    .ok_or_else(|| Error::validation(format!("lines[{k}].{field}"), format!("unknown node id `{id}`")))
            };
            let from = endpoint("from", &line.from)?;
            let to = endpoint("to", &line.to)?;
            if from == to {
                return Err(Error::validation(format!("lines[{k}].to"), "a line must join two distinct nodes"));
            }
            if !(line.capacity.is_finite() && line.capacity > 0.0) {
                return Err(Error::validation(
                    format!("lines[{k}].capacity"),
                    format!("must be positive, got {}", line.capacity),
                ));
            }
            edges.push(Edge::new(from, to, line.capacity));
        }
        let topology = WeightedGraph::new(self.nodes.len(), edges)?;
        let mut ids = Vec::with_capacity(self.nodes.len());
        let (mut m, mut d, mut p, mut b) = (vec![], vec![], vec![], vec![]);
        for node in self.nodes {
            m.push(node.inertia);
            d.push(node.damping);
            p.push(node.power);
            b.push(node.noise);
            ids.push(node.id);
        }
        PowerNetwork::with_ids(ids, topology, m, d, p, b)
    }
}

pub fn parse_network(text: &str) -> Result<PowerNetwork> {
    parse_network_in(text, "network file")
}

fn parse_network_in(text: &str, context: &str) -> Result<PowerNetwork> {
    parse_toml::<NetworkFile>(text, context)?.into_network()
}

pub fn load_network(path: impl AsRef<Path>) -> Result<PowerNetwork> {
    let path = path.as_ref();
    parse_network_in(&read_text(path)?, &path.display().to_string())
}

/// TOML text of a network; floats are written in shortest round-trip form.
pub fn network_to_toml(net: &PowerNetwork) -> String {
    toml::to_string(&NetworkFile::from_network(net)).expect("network file serializes")
}

pub fn save_network(net: &PowerNetwork, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, network_to_toml(net))?;
    Ok(())
}

/// Float with 17 significant digits.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV is UTF-8")
}

pub const REPORT_COLUMNS: [&str; 6] = ["quantity", "index_i", "index_j", "value", "method", "stderr"];

/// Long-format CSV of one or more reports, one row per covered entry.
pub fn reports_to_csv(reports: &[CovarianceReport]) -> String {
    let rows = reports.iter().flat_map(|r| {
        r.entries().into_iter().map(move |e| {
            vec![
                e.quantity.as_str().to_string(),
                (e.i + 1).to_string(),
                (e.j + 1).to_string(),
                format_float(e.value),
                r.method.as_str().to_string(),
                e.std_error.map(format_float).unwrap_or_default(),
            ]
        })
    });
    csv_string(&REPORT_COLUMNS, rows)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EntryJson {
    pub quantity: Quantity,
    pub index_i: usize,
    pub index_j: usize,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stderr: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ReportJson {
    pub method: Method,
    pub coverage: crate::report::Coverage,
    pub nodes: usize,
    pub lines: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lyapunov_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    pub entries: Vec<EntryJson>,
}

impl From<&CovarianceReport> for ReportJson {
    fn from(r: &CovarianceReport) -> Self {
        ReportJson {
            method: r.method,
            coverage: r.coverage,
            nodes: r.node_count(),
            lines: r.line_count(),
            lyapunov_residual: r.diagnostics.lyapunov_residual,
            samples: r.diagnostics.samples,
            entries: r
                .entries()
                .into_iter()
                .map(|e| EntryJson {
                    quantity: e.quantity,
                    index_i: e.i + 1,
                    index_j: e.j + 1,
                    value: e.value,
                    stderr: e.std_error,
                })
                .collect(),
        }
    }
}

pub fn reports_to_json(reports: &[CovarianceReport]) -> String {
    let docs: Vec<ReportJson> = reports.iter().map(ReportJson::from).collect();
    serde_json::to_string_pretty(&docs).expect("reports serialize") + "\n"
}

pub fn emit(reports: &[CovarianceReport], format: Format) -> String {
    match format {
        Format::Csv => reports_to_csv(reports),
        Format::Json => reports_to_json(reports),
    }
}

/// Runs one route on a linearized system. The Monte Carlo route uses `mc`, or
/// system-derived defaults with [`DEFAULT_TRAJECTORIES`] and seed 0.
pub fn run_method(lin: &LinearizedSystem, method: Method, mc: Option<&SimConfig>) -> Result<CovarianceReport> {
    match method {
        Method::Numeric => asymptotic_variance_numeric(lin),
        Method::UniformRatio => asymptotic_variance_uniform_ratio(lin),
        Method::ClosedForm => closed_form_report(lin),
        Method::FirstOrder => Ok(first_order_variance(lin)?.into_report()),
        Method::MonteCarlo => match mc {
            Some(cfg) => simulate_covariance(lin, cfg),
            None => simulate_covariance(lin, &SimConfig::for_system(lin, DEFAULT_TRAJECTORIES, 0)?),
        },
    }
}

/// Synchronous state, linearization and one route.
pub fn run_variance(net: &PowerNetwork, method: Method) -> Result<CovarianceReport> {
    let (_, lin) = linearize_network(net)?;
    run_method(&lin, method, None)
}

/// Outcome of one route in a comparison.
#[derive(Debug, Clone)]
pub enum RouteOutcome {
    /// Report and its largest relative discrepancy against the numeric route.
    Ran {
        report: CovarianceReport,
        max_relative_discrepancy: f64,
    },
    /// Route not applicable; the error names the violated assumption.
    Skipped(String),
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub reference: CovarianceReport,
    pub routes: Vec<(Method, RouteOutcome)>,
}

impl Comparison {
    /// Largest discrepancy over the routes that ran.
    pub fn max_discrepancy(&self) -> f64 {
        self.routes
            .iter()
            .filter_map(|(_, o)| match o {
                RouteOutcome::Ran {
                    max_relative_discrepancy,
                    ..
                } => Some(*max_relative_discrepancy),
                RouteOutcome::Skipped(_) => None,
            })
            .fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let rows = self.routes.iter().map(|(m, o)| match o {
            RouteOutcome::Ran {
                max_relative_discrepancy,
                ..
            } => vec![m.as_str().to_string(), "ok".to_string(), format_float(*max_relative_discrepancy), String::new()],
            RouteOutcome::Skipped(why) => vec![m.as_str().to_string(), "skipped".to_string(), String::new(), why.clone()],
        });
        csv_string(&["method", "status", "max_relative_discrepancy", "detail"], rows)
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Row<'a> {
            method: Method,
            status: &'a str,
            #[serde(skip_serializing_if = "Option::is_none")]
            max_relative_discrepancy: Option<f64>,
            #[serde(skip_serializing_if = "Option::is_none")]
            detail: Option<&'a str>,
        }
        let rows: Vec<Row> = self
            .routes
            .iter()
            .map(|(m, o)| match o {
                RouteOutcome::Ran {
                    max_relative_discrepancy,
                    ..
                } => Row {
                    method: *m,
                    status: "ok",
                    max_relative_discrepancy: Some(*max_relative_discrepancy),
                    detail: None,
                },
                RouteOutcome::Skipped(why) => Row {
                    method: *m,
                    status: "skipped",
                    max_relative_discrepancy: None,
                    detail: Some(why),
                },
            })
            .collect();
        serde_json::to_string_pretty(&rows).expect("comparison serializes") + "\n"
    }
}

/// Runs the numeric route and every other requested route against it.
///
/// Assumption failures of the other routes are recorded as skipped; any other
/// failure is returned.
pub fn compare(lin: &LinearizedSystem, methods: &[Method], mc: Option<&SimConfig>) -> Result<Comparison> {
    let reference = asymptotic_variance_numeric(lin)?;
    let mut routes = Vec::new();
    for &m in methods.iter().filter(|&&m| m != Method::Numeric) {
        let outcome = match run_method(lin, m, mc) {
            Ok(report) => RouteOutcome::Ran {
                max_relative_discrepancy: report.max_relative_discrepancy(&reference),
                report,
            },
            Err(e @ (Error::AssumptionViolated { .. } | Error::Precondition(_))) => RouteOutcome::Skipped(e.to_string()),
            Err(e) => return Err(e),
        };
        routes.push((m, outcome));
    }
    Ok(Comparison { reference, routes })
}

/// Exact routes compared by default.
pub const EXACT_ROUTES: [Method; 2] = [Method::UniformRatio, Method::ClosedForm];

/// Simulation settings file; omitted fields take system-derived defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfigFile {
    pub schema_version: u32,
    pub trajectories: Option<usize>,
    pub seed: Option<u64>,
    pub dt: Option<f64>,
    pub burn_in: Option<f64>,
    pub horizon: Option<f64>,
    pub sample_stride: Option<usize>,
    pub scheme: Option<Scheme>,
    pub noise_refinement: Option<u32>,
}

impl McConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: McConfigFile = parse_toml(text, "simulation config")?;
        check_schema(cfg.schema_version)?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let cfg: McConfigFile = parse_toml(&read_text(path)?, &path.display().to_string())?;
        check_schema(cfg.schema_version)?;
        Ok(cfg)
    }

    /// Fills the missing fields from [`SimConfig::for_system`]; `seed` overrides the file's seed.
    pub fn resolve(&self, lin: &LinearizedSystem, seed: Option<u64>) -> Result<SimConfig> {
        let trajectories = self.trajectories.unwrap_or(DEFAULT_TRAJECTORIES);
        let master_seed = seed.or(self.seed).unwrap_or(0);
        let mut cfg = SimConfig::for_system(lin, trajectories, master_seed)?;
        if let Some(dt) = self.dt {
            cfg.dt = dt;
            if self.horizon.is_none() {
                cfg.horizon = cfg.horizon.max(100.0 * dt);
            }
        }
        if let Some(v) = self.burn_in {
            cfg.burn_in = v;
        }
        if let Some(v) = self.horizon {
            cfg.horizon = v;
        }
        if let Some(v) = self.sample_stride {
            cfg.sample_stride = v;
        }
        if let Some(v) = self.scheme {
            cfg.scheme = v;
        }
        if let Some(v) = self.noise_refinement {
            cfg.noise_refinement = v;
        }
        Ok(cfg)
    }
}

/// Thread pool honouring [`THREADS_ENV`]; unset or zero means one thread per core.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::validation(THREADS_ENV, format!("expected a non-negative integer, got `{v}`")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Numerical(format!("cannot start thread pool: {e}")))
}

/// Per-node noise of a homogeneous sweep base. Node numbers are one-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "pattern", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NoisePattern {
    /// One disturbed node.
    Single { node: usize, strength: f64 },
    /// The same strength at every node.
    Uniform { strength: f64 },
    /// Explicit strengths, one per node; `n` cannot be swept.
    Values { values: Vec<f64> },
}

impl NoisePattern {
    fn strengths(&self, n: usize, b: Option<f64>) -> Result<Vec<f64>> {
        match self {
            NoisePattern::Single { node, strength } => {
                if *node == 0 || *node > n {
                    return Err(Error::validation("base.noise.node", format!("node {node} outside 1..={n}")));
                }
                let mut v = vec![0.0; n];
                v[node - 1] = b.unwrap_or(*strength);
                Ok(v)
            }
            NoisePattern::Uniform { strength } => Ok(vec![b.unwrap_or(*strength); n]),
            NoisePattern::Values { values } => {
                if values.len() != n {
                    return Err(Error::validation(
                        "base.noise.values",
                        format!("expected {n} entries, got {}", values.len()),
                    ));
                }
                if b.is_some() {
                    return Err(Error::validation("axes", "parameter `b` needs a single or uniform noise pattern"));
                }
                Ok(values.clone())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseKind {
    Complete,
    Star,
    Network,
}

/// Base of a sweep: homogeneous parameters on a complete or star graph, or a network file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBase {
    pub kind: BaseKind,
    pub n: Option<usize>,
    pub gamma: Option<f64>,
    pub eta: Option<f64>,
    pub d: Option<f64>,
    pub noise: Option<NoisePattern>,
    /// Network file, relative to the sweep file.
    pub path: Option<PathBuf>,
}

/// Axis grid given as explicit values or as a generated range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub parameter: String,
    #[serde(default)]
    pub values: Vec<f64>,
    /// `[from, to, count]`, evenly spaced.
    pub linspace: Option<(f64, f64, usize)>,
    /// `[from, to, count]`, geometrically spaced.
    pub logspace: Option<(f64, f64, usize)>,
}

/// Parameters a homogeneous base may sweep.
pub const HOMOGENEOUS_PARAMETERS: [&str; 5] = ["n", "gamma", "eta", "d", "b"];
/// Multipliers a network base may sweep.
pub const NETWORK_PARAMETERS: [&str; 5] = [
    "inertia_scale",
    "damping_scale",
    "capacity_scale",
    "power_scale",
    "noise_scale",
];

impl Axis {
    pub fn grid(&self, k: usize) -> Result<Vec<f64>> {
        let field = format!("axes[{k}]");
        let given = [!self.values.is_empty(), self.linspace.is_some(), self.logspace.is_some()];
        if given.iter().filter(|&&g| g).count() != 1 {
            return Err(Error::validation(
                field,
                "give exactly one non-empty grid: values, linspace or logspace",
            ));
        }
        let grid = if let Some((a, b, c)) = self.linspace {
            match c {
                0 => vec![],
                1 => vec![a],
                _ => (0..c).map(|i| a + (b - a) * i as f64 / (c - 1) as f64).collect(),
            }
        } else if let Some((a, b, c)) = self.logspace {
            if !(a > 0.0 && b > 0.0) {
                return Err(Error::validation(format!("{field}.logspace"), "bounds must be positive"));
            }
            match c {
                0 => vec![],
                1 => vec![a],
                _ => (0..c).map(|i| a * (b / a).powf(i as f64 / (c - 1) as f64)).collect(),
            }
        } else {
            self.values.clone()
        };
        if grid.is_empty() {
            return Err(Error::validation(field, "grid is empty"));
        }
        if let Some(x) = grid.iter().find(|x| !x.is_finite()) {
            return Err(Error::validation(field, format!("grid value {x} is not finite")));
        }
        if self.parameter == "n" {
            if let Some(x) = grid.iter().find(|x| x.fract() != 0.0 || **x < 2.0) {
                return Err(Error::validation(field, format!("n must be an integer ≥ 2, got {x}")));
            }
        }
        Ok(grid)
    }
}

/// Report entry to extract at every grid point; indices are one-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Selection {
    pub quantity: Quantity,
    pub i: usize,
    pub j: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepMc {
    pub trajectories: usize,
}

/// Parameter sweep description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub schema_version: u32,
    pub methods: Vec<String>,
    #[serde(default)]
    pub seed: u64,
    pub base: SweepBase,
    #[serde(default)]
    pub axes: Vec<Axis>,
    /// Entries to report; when empty, every diagonal entry of `Q_ω` and `Q_δ`.
    #[serde(default)]
    pub select: Vec<Selection>,
    pub mc: Option<SweepMc>,
    /// Directory that relative network paths resolve against.
    #[serde(skip)]
    pub root: PathBuf,
}

impl SweepSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let spec: SweepSpec = parse_toml(text, "sweep spec")?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut spec: SweepSpec = parse_toml(&read_text(path)?, &path.display().to_string())?;
        spec.root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        spec.validate()?;
        Ok(spec)
    }

    pub fn method_list(&self) -> Result<Vec<Method>> {
        if self.methods.is_empty() {
            return Err(Error::validation("methods", "at least one method is required"));
        }
        let mut out = Vec::new();
        for (k, name) in self.methods.iter().enumerate() {
            let m = Method::parse(name)
                .ok_or_else(|| Error::validation(format!("methods[{k}]"), format!("unknown method `{name}`")))?;
            if out.contains(&m) {
                return Err(Error::validation(format!("methods[{k}]"), format!("duplicate method `{name}`")));
            }
            out.push(m);
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        check_schema(self.schema_version)?;
        self.method_list()?;
        let b = &self.base;
        let allowed: &[&str] = match b.kind {
            BaseKind::Network => {
                if b.path.is_none() {
                    return Err(Error::validation("base.path", "a network base needs a network file"));
                }
                for (name, set) in [
                    ("n", b.n.is_some()),
                    ("gamma", b.gamma.is_some()),
                    ("eta", b.eta.is_some()),
                    ("d", b.d.is_some()),
                    ("noise", b.noise.is_some()),
                ] {
                    if set {
                        return Err(Error::validation(format!("base.{name}"), "not used by a network base"));
                    }
                }
                &NETWORK_PARAMETERS
            }
            BaseKind::Complete | BaseKind::Star => {
                for (name, set) in [
                    ("n", b.n.is_some()),
                    ("gamma", b.gamma.is_some()),
                    ("eta", b.eta.is_some()),
                    ("d", b.d.is_some()),
                    ("noise", b.noise.is_some()),
                ] {
                    if !set {
                        return Err(Error::validation(format!("base.{name}"), "required for a homogeneous base"));
                    }
                }
                if b.path.is_some() {
                    return Err(Error::validation("base.path", "only used by a network base"));
                }
                &HOMOGENEOUS_PARAMETERS
            }
        };
        for (k, axis) in self.axes.iter().enumerate() {
            if !allowed.contains(&axis.parameter.as_str()) {
                return Err(Error::validation(
                    format!("axes[{k}].parameter"),
                    format!("unknown parameter `{}`; expected one of {}", axis.parameter, allowed.join(", ")),
                ));
            }
            if self.axes[..k].iter().any(|a| a.parameter == axis.parameter) {
                return Err(Error::validation(format!("axes[{k}].parameter"), "parameter swept twice"));
            }
            axis.grid(k)?;
        }
        for (k, s) in self.select.iter().enumerate() {
            if s.i == 0 || s.j == 0 {
                return Err(Error::validation(format!("select[{k}]"), "indices are one-based"));
            }
        }
        if let Some(mc) = &self.mc {
            if mc.trajectories < 2 {
                return Err(Error::validation("mc.trajectories", "at least 2 are needed"));
            }
        }
        Ok(())
    }

    /// Grid points in row-major order, first axis outermost.
    pub fn points(&self) -> Result<Vec<Vec<f64>>> {
        let grids = self.axes.iter().enumerate().map(|(k, a)| a.grid(k)).collect::<Result<Vec<_>>>()?;
        let mut points = vec![vec![]];
        for grid in &grids {
            points = points
                .into_iter()
                .flat_map(|p| {
                    grid.iter().map(move |&x| {
                        let mut q = p.clone();
                        q.push(x);
                        q
                    })
                })
                .collect();
        }
        Ok(points)
    }

    fn system_at(&self, point: &[f64], network: Option<&PowerNetwork>) -> Result<LinearizedSystem> {
        let value = |name: &str| self.axes.iter().position(|a| a.parameter == name).map(|k| point[k]);
        let b = &self.base;
        match b.kind {
            BaseKind::Network => {
                let net = network.expect("network base is loaded");
                let scale = |name| value(name).unwrap_or(1.0);
                let weights: Vec<f64> = net.topology.weights().iter().map(|w| w * scale("capacity_scale")).collect();
                let scaled = PowerNetwork::with_ids(
                    net.node_ids.clone(),
                    net.topology.with_weights(&weights)?,
                    (&net.inertia * scale("inertia_scale")).as_slice().to_vec(),
                    (&net.damping * scale("damping_scale")).as_slice().to_vec(),
                    (&net.power * scale("power_scale")).as_slice().to_vec(),
                    (&net.noise * scale("noise_scale")).as_slice().to_vec(),
                )?;
                Ok(linearize_network(&scaled)?.1)
            }
            BaseKind::Complete | BaseKind::Star => {
                let n = value("n").map(|x| x as usize).or(b.n).expect("validated");
                let noise = b.noise.as_ref().expect("validated").strengths(n, value("b"))?;
                let p = HomogeneousParams::new(
                    n,
                    value("gamma").or(b.gamma).expect("validated"),
                    value("eta").or(b.eta).expect("validated"),
                    value("d").or(b.d).expect("validated"),
                    noise,
                )?;
                let kind = if b.kind == BaseKind::Complete {
                    GraphKind::Complete
                } else {
                    GraphKind::Star
                };
                p.linearized(kind)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    /// Zero-based grid point.
    pub point: usize,
    pub coordinates: Vec<f64>,
    pub method: Method,
    pub quantity: Quantity,
    /// One-based.
    pub index_i: usize,
    pub index_j: usize,
    pub value: f64,
    pub stderr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub axes: Vec<String>,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut header: Vec<&str> = vec!["point"];
        header.extend(self.axes.iter().map(String::as_str));
        header.extend(["method", "quantity", "index_i", "index_j", "value", "stderr"]);
        let rows = self.rows.iter().map(|r| {
            let mut row = vec![r.point.to_string()];
            row.extend(r.coordinates.iter().map(|&x| format_float(x)));
            row.extend([
                r.method.as_str().to_string(),
                r.quantity.as_str().to_string(),
                r.index_i.to_string(),
                r.index_j.to_string(),
                format_float(r.value),
                r.stderr.map(format_float).unwrap_or_default(),
            ]);
            row
        });
        csv_string(&header, rows)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sweep serializes") + "\n"
    }

    pub fn emit(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }

    /// Values of one selected entry and method, in grid order.
    pub fn series(&self, method: Method, quantity: Quantity, i: usize, j: usize) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.method == method && r.quantity == quantity && r.index_i == i && r.index_j == j)
            .map(|r| r.value)
            .collect()
    }
}

fn select_rows(
    spec: &SweepSpec,
    point: usize,
    coordinates: &[f64],
    report: &CovarianceReport,
) -> Result<Vec<SweepRow>> {
    let row = |quantity, i: usize, j: usize, value, stderr| SweepRow {
        point,
        coordinates: coordinates.to_vec(),
        method: report.method,
        quantity,
        index_i: i + 1,
        index_j: j + 1,
        value,
        stderr,
    };
    let se = report.diagnostics.std_errors.as_deref();
    if spec.select.is_empty() {
        let mut rows = Vec::new();
        for q in [Quantity::Omega, Quantity::Delta] {
            let block = report.blocks.block(q);
            for i in 0..block.nrows() {
                if report.covers(q, i, i) {
                    rows.push(row(q, i, i, block[(i, i)], se.map(|s| s.block(q)[(i, i)])));
                }
            }
        }
        return Ok(rows);
    }
    spec.select
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let (i, j) = (s.i - 1, s.j - 1);
            let value = report.value(s.quantity, i, j).ok_or_else(|| {
                Error::validation(
                    format!("select[{k}]"),
                    format!(
                        "entry ({}, {}) of {} not available from {} at grid point {point}",
                        s.i,
                        s.j,
                        s.quantity.as_str(),
                        report.method
                    ),
                )
            })?;
            Ok(row(s.quantity, i, j, value, se.map(|b| b.block(s.quantity)[(i, j)])))
        })
        .collect()
}

/// Evaluates every method at every grid point. Points run concurrently; rows are
/// ordered by grid point, then method in spec order, then selection.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let methods = spec.method_list()?;
    let network = match (&spec.base.kind, &spec.base.path) {
        (BaseKind::Network, Some(p)) => Some(load_network(spec.root.join(p))?),
        _ => None,
    };
    let points = spec.points()?;
    let trajectories = spec.mc.as_ref().map_or(DEFAULT_TRAJECTORIES, |m| m.trajectories);
    let pool = thread_pool()?;
    let per_point: Vec<Result<Vec<SweepRow>>> = pool.install(|| {
        points
            .par_iter()
            .enumerate()
            .map(|(k, point)| {
                let lin = spec.system_at(point, network.as_ref())?;
                let mut rows = Vec::new();
                for &m in &methods {
                    let mc = if m == Method::MonteCarlo {
                        Some(SimConfig::for_system(&lin, trajectories, spec.seed)?)
                    } else {
                        None
                    };
                    let report = run_method(&lin, m, mc.as_ref())?;
                    rows.extend(select_rows(spec, k, point, &report)?);
                }
                Ok(rows)
            })
            .collect()
    });
    let mut rows = Vec::new();
    for r in per_point {
        rows.extend(r?);
    }
    Ok(SweepResult {
        axes: spec.axes.iter().map(|a| a.parameter.clone()).collect(),
        rows,
    })
}

/// Synchronous state summary written by the `solve` command.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateSummary {
    pub sync_frequency: f64,
    pub iterations: usize,
    pub residual_norm: f64,
    pub secure: bool,
    pub nodes: Vec<NodeAngle>,
    pub lines: Vec<LineMargin>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeAngle {
    pub id: String,
    pub angle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LineMargin {
    pub from: String,
    pub to: String,
    pub difference: f64,
    /// `π/2 − |δ_from − δ_to|`.
    pub margin: f64,
}

impl StateSummary {
    pub fn new(net: &PowerNetwork, state: &crate::swing::SynchronousState) -> Self {
        let security = crate::swing::security_check(state, net);
        let diffs = state.line_differences(&net.topology);
        StateSummary {
            sync_frequency: state.sync_frequency,
            iterations: state.iterations,
            residual_norm: state.residual_norm,
            secure: security.secure,
            nodes: net
                .node_ids
                .iter()
                .zip(state.angles.iter())
                .map(|(id, &angle)| NodeAngle { id: id.clone(), angle })
                .collect(),
            lines: net
                .topology
                .edges()
                .iter()
                .zip(diffs.iter().zip(&security.margins))
                .map(|(e, (&difference, &margin))| LineMargin {
                    from: net.node_ids[e.from].clone(),
                    to: net.node_ids[e.to].clone(),
                    difference,
                    margin,
                })
                .collect(),
        }
    }

    /// Long format: `record,from,to,value` with `to` empty for node records.
    pub fn to_csv(&self) -> String {
        let mut rows = vec![
            vec!["sync_frequency".into(), String::new(), String::new(), format_float(self.sync_frequency)],
        ];
        for n in &self.nodes {
            rows.push(vec!["angle".into(), n.id.clone(), String::new(), format_float(n.angle)]);
        }
        for l in &self.lines {
            rows.push(vec!["difference".into(), l.from.clone(), l.to.clone(), format_float(l.difference)]);
            rows.push(vec!["margin".into(), l.from.clone(), l.to.clone(), format_float(l.margin)]);
        }
        csv_string(&["record", "from", "to", "value"], rows)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("state serializes") + "\n"
    }

    pub fn human(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "synchronous frequency {:.6e}, {} Newton iterations, residual {:.2e}",
            self.sync_frequency, self.iterations, self.residual_norm
        );
        for n in &self.nodes {
            let _ = writeln!(s, "  node {:>8}  angle {:+.9}", n.id, n.angle);
        }
        for l in &self.lines {
            let _ = writeln!(
                s,
                "  line {:>8} - {:<8} difference {:+.9}  margin {:.9}",
                l.from, l.to, l.difference, l.margin
            );
        }
        let _ = writeln!(s, "security condition {}", if self.secure { "holds" } else { "VIOLATED" });
        s
    }
}
