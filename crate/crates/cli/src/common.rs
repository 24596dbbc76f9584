use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;
use serde::Serialize;
use serde_json::{json, Value};

use treegm::hiw::{EdgeLogWeights, HiwModel, HiwParams, SuffStats};
use treegm::numerics::{center, Dataset, SymMatrix};
use treegm::priors::GraphPrior;
use treegm::{GraphClass, LabeledGraph};

/// Failure with the process exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    Invalid(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Invalid(m) | CliError::Numerical(m) => f.write_str(m),
        }
    }
}

impl From<treegm::Error> for CliError {
    fn from(e: treegm::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Invalid(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Invalid(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Invalid(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Invalid(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn invalid<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Invalid(msg.into()))
}

fn read_file(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}

pub fn read_graph(path: &Path) -> CliResult<LabeledGraph> {
    Ok(LabeledGraph::parse_text(&read_file(path)?)?)
}

pub fn read_dataset(path: &Path) -> CliResult<Dataset> {
    Ok(Dataset::read_csv(read_file(path)?.as_bytes())?)
}

pub fn read_matrix(path: &Path) -> CliResult<SymMatrix> {
    Ok(SymMatrix::read_csv(read_file(path)?.as_bytes())?)
}

/// Writes to `path`, or to stdout when absent.
pub fn emit(path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| CliError::Invalid(format!("{}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

/// JSON header carried by every run: version, flags, seed and wall time.
pub struct Envelope {
    command: &'static str,
    flags: Value,
    seed: Option<u64>,
    start: Instant,
}

impl Envelope {
    pub fn new<A: Serialize>(command: &'static str, flags: &A, seed: Option<u64>) -> Self {
        Envelope {
            command,
            flags: serde_json::to_value(flags).unwrap_or(Value::Null),
            seed,
            start: Instant::now(),
        }
    }

    pub fn finish(&self, result: Value) -> Value {
        json!({
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "flags": self.flags,
            "seed": self.seed,
            "wall_time_secs": self.start.elapsed().as_secs_f64(),
            "result": result,
        })
    }

    /// One-line comment header for text outputs.
    pub fn comment(&self) -> String {
        format!(
            "# treegm {} {} seed={} flags={}\n",
            env!("CARGO_PKG_VERSION"),
            self.command,
            self.seed.map_or("none".to_string(), |s| s.to_string()),
            self.flags
        )
    }
}

pub fn to_pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

/// Hyperparameters of the hyper inverse Wishart prior.
#[derive(Args, Debug, Clone, Serialize)]
pub struct HiwArgs {
    /// Degrees of freedom δ.
    #[arg(long, default_value_t = 3.0)]
    pub delta: f64,
    /// `D = dscale · I`; defaults to δ + 2.
    #[arg(long)]
    pub dscale: Option<f64>,
    /// CSV file holding the full matrix `D`.
    #[arg(long, conflicts_with = "dscale")]
    pub dfile: Option<PathBuf>,
    /// Subtract column means before forming the statistics.
    #[arg(long)]
    pub center: bool,
}

impl HiwArgs {
    pub fn model(&self, data: &Dataset) -> CliResult<HiwModel> {
        let p = data.p();
        let d = match (&self.dfile, self.dscale) {
            (Some(path), _) => read_matrix(path)?,
            (None, Some(s)) => SymMatrix::scaled_identity(p, s),
            (None, None) => SymMatrix::scaled_identity(p, self.delta + 2.0),
        };
        let params = HiwParams::new(self.delta, d)?;
        let data = if self.center { center(data) } else { data.clone() };
        Ok(HiwModel::new(params, SuffStats::from_dataset(&data))?)
    }
}

/// `uniform | binomial:<beta> | hub[:<chi>,<psi>] | maxdeg | size | factored:<weights.csv>`.
pub fn parse_prior(spec: &str, p: usize, class: GraphClass) -> CliResult<GraphPrior> {
    let (name, arg) = match spec.split_once(':') {
        Some((n, a)) => (n, Some(a)),
        None => (spec, None),
    };
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| CliError::Invalid(format!("bad number '{s}' in prior")));
    match (name, arg) {
        ("uniform", None) => Ok(GraphPrior::Uniform),
        ("binomial", Some(b)) => Ok(GraphPrior::binomial(num(b)?)?),
        ("hub", None) => Ok(GraphPrior::hub(GraphPrior::hub_default_chi(p), 1.0)?),
        ("hub", Some(a)) => {
            let (chi, psi) = a.split_once(',').ok_or_else(|| CliError::Invalid("hub prior needs <chi>,<psi>".into()))?;
            let chi = chi.trim().parse::<usize>().map_err(|_| CliError::Invalid(format!("bad chi '{chi}'")))?;
            Ok(GraphPrior::hub(chi, num(psi)?)?)
        }
        ("maxdeg", None) => Ok(GraphPrior::MaxDegreeExp),
        ("size", None) => Ok(GraphPrior::size_based(class, p)?),
        ("factored", Some(path)) => {
            let w = EdgeLogWeights::from_matrix(&read_matrix(Path::new(path))?)?;
            if w.p() != p {
                return invalid(format!("prior weights are {}x{} but data has {p} columns", w.p(), w.p()));
            }
            Ok(GraphPrior::factored(w))
        }
        _ => invalid(format!("unknown prior '{spec}'")),
    }
}

pub fn parse_class(s: &str) -> CliResult<GraphClass> {
    match s {
        "forest" => Ok(GraphClass::Forest),
        "tree" => Ok(GraphClass::Tree),
        _ => invalid(format!("class must be 'forest' or 'tree', got '{s}'")),
    }
}

pub fn class_name(c: GraphClass) -> &'static str {
    match c {
        GraphClass::Forest => "forest",
        GraphClass::Tree => "tree",
    }
}

pub fn edges_json(g: &LabeledGraph) -> Value {
    Value::Array(g.edges().map(|(u, v)| json!([u, v])).collect())
}

pub fn matrix_json(m: &SymMatrix) -> Value {
    json!(m.rows())
}

/// Partial correlation used when none is given.
pub fn default_r(p: usize) -> f64 {
    0.99 / ((p.max(2) - 1) as f64).sqrt()
}
