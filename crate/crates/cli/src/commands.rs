use std::path::PathBuf;

use clap::{Args, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use treegm::chordal::{count_decomposable, eliminate, min_degree_ordering, recursive_thin_ii, recursive_thin_iii};
use treegm::chowliu::{chow_liu_gaussian_weights, kruskal_max_tree, map_forest as exact_map_forest, map_tree};
use treegm::evalmetrics::{confusion, posterior_expected_metrics, PosteriorSource};
use treegm::explorers::{enumerate_posterior, mcmc_run, sss_run, Budget, McmcConfig, PosteriorRecord, Scorer, SssConfig};
use treegm::graph::prufer_decode;
use treegm::movestore::MoveSystem;
use treegm::mtt::FactoredTreeDist;
use treegm::numerics::{cov_from_graph, sample_mvn, star_validity, Dataset, SymMatrix};
use treegm::randgraph::{monte_carlo_cycles, poisson_params, sample_gnm_with, SampleModel};
use treegm::{GraphClass, LabeledGraph};

use crate::common::{
    default_r, edges_json, emit, invalid, matrix_json, parse_class, parse_prior, read_dataset, read_graph,
    to_pretty, CliResult, Envelope, HiwArgs,
};
use crate::ledger::{parse_record, record_json};

#[derive(ValueEnum, Clone, Copy, Debug, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Star,
    Chain,
    Gnm,
    File,
}

/// Graph and data generation settings shared with `experiment`.
#[derive(Args, Debug, Clone, Serialize)]
pub struct DataSpec {
    #[arg(long, value_enum, default_value = "star")]
    pub shape: Shape,
    /// Number of variables.
    #[arg(long, default_value_t = 30)]
    pub p: usize,
    /// Number of observations.
    #[arg(long, default_value_t = 50)]
    pub n: usize,
    /// Partial correlation on every edge; defaults to 0.99/sqrt(p-1).
    #[arg(long)]
    pub r: Option<f64>,
    /// Edge count for `--shape gnm`.
    #[arg(long)]
    pub m: Option<usize>,
    /// Graph file for `--shape file`.
    #[arg(long)]
    pub graph: Option<PathBuf>,
}

/// Truth graph, covariance and the resulting zero-mean dataset.
pub struct Generated {
    pub truth: LabeledGraph,
    pub r: f64,
    pub sigma: SymMatrix,
    pub data: Dataset,
}

pub fn generate(spec: &DataSpec, seed: u64) -> CliResult<Generated> {
    let truth = match spec.shape {
        Shape::Star => LabeledGraph::star(spec.p, 0),
        Shape::Chain => LabeledGraph::chain(spec.p),
        Shape::Gnm => {
            let m = spec.m.ok_or_else(|| crate::common::CliError::Invalid("--shape gnm needs --m".into()))?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(1);
            sample_gnm_with(spec.p, m, &mut rng)?
        }
        Shape::File => {
            let path = spec.graph.as_ref().ok_or_else(|| crate::common::CliError::Invalid("--shape file needs --graph".into()))?;
            read_graph(path)?
        }
    };
    let p = truth.p();
    if p < 2 {
        return invalid("need at least two variables");
    }
    let r = spec.r.unwrap_or_else(|| default_r(p));
    if spec.shape == Shape::Star && !star_validity(&vec![r; p - 1]) {
        return invalid(format!("partial correlation {r} is too large for a star on {p} nodes"));
    }
    let sigma = cov_from_graph(&truth, r).map_err(|e| {
        crate::common::CliError::Invalid(format!("partial correlation {r} gives no valid covariance for this graph: {e}"))
    })?;
    let data = sample_mvn(&sigma, spec.n, seed)?;
    Ok(Generated { truth, r, sigma, data })
}

#[derive(Args, Debug, Serialize)]
pub struct GenDataArgs {
    #[command(flatten)]
    pub spec: DataSpec,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Dataset CSV destination.
    #[arg(long)]
    pub data_out: PathBuf,
    /// Truth graph destination.
    #[arg(long)]
    pub truth_out: Option<PathBuf>,
    /// Covariance CSV destination.
    #[arg(long)]
    pub cov_out: Option<PathBuf>,
}

pub fn gen_data(a: &GenDataArgs) -> CliResult<()> {
    let env = Envelope::new("gen-data", a, Some(a.seed));
    let g = generate(&a.spec, a.seed)?;
    emit(Some(&a.data_out), &g.data.to_csv())?;
    if let Some(path) = &a.truth_out {
        emit(Some(path), &format!("{}{}", env.comment(), g.truth.to_text()))?;
    }
    if let Some(path) = &a.cov_out {
        emit(Some(path), &g.sigma.to_csv())?;
    }
    let result = json!({
        "p": g.truth.p(),
        "n": g.data.n(),
        "r": g.r,
        "truth_edges": edges_json(&g.truth),
    });
    emit(None, &to_pretty(&env.finish(result)))
}

#[derive(Args, Debug, Serialize)]
pub struct ChowLiuArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn chow_liu(a: &ChowLiuArgs) -> CliResult<()> {
    let env = Envelope::new("chow-liu", a, None);
    let w = chow_liu_gaussian_weights(&read_dataset(&a.data)?)?;
    let t = kruskal_max_tree(&w)?;
    emit(a.out.as_deref(), &format!("{}{}", env.comment(), t.to_text()))
}

#[derive(Args, Debug, Serialize)]
pub struct MapArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// `forest` or `tree`.
    #[arg(long, default_value = "forest")]
    pub class: String,
    /// uniform | binomial:<beta> | factored:<weights.csv>
    #[arg(long, default_value = "uniform")]
    pub prior: String,
    #[command(flatten)]
    pub hiw: HiwArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn map_forest(a: &MapArgs) -> CliResult<()> {
    let env = Envelope::new("map-forest", a, None);
    let data = read_dataset(&a.data)?;
    let class = parse_class(&a.class)?;
    let model = a.hiw.model(&data)?;
    let prior = parse_prior(&a.prior, data.p(), class)?;
    let g = match class {
        GraphClass::Forest => exact_map_forest(&model, &prior)?,
        GraphClass::Tree => map_tree(&model, &prior)?,
    };
    emit(a.out.as_deref(), &format!("{}{}", env.comment(), g.to_text()))
}

#[derive(Args, Debug, Serialize)]
pub struct MttArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// uniform | binomial:<beta> | factored:<weights.csv>
    #[arg(long, default_value = "uniform")]
    pub prior: String,
    #[command(flatten)]
    pub hiw: HiwArgs,
    /// Truth graph for ETP and ETPR.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn mtt_summary(a: &MttArgs) -> CliResult<()> {
    let env = Envelope::new("mtt-summary", a, None);
    let data = read_dataset(&a.data)?;
    let model = a.hiw.model(&data)?;
    let prior = parse_prior(&a.prior, data.p(), GraphClass::Tree)?;
    let s = FactoredTreeDist::posterior(&model, &prior)?.edge_probabilities()?;
    let mut result = json!({
        "p": data.p(),
        "log_z": s.log_z,
        "edge_prob": matrix_json(&s.edge_prob),
        "expected_degree": s.expected_degree,
    });
    if let Some(path) = &a.truth {
        let truth = read_graph(path)?;
        let m = posterior_expected_metrics(PosteriorSource::Exact(&s), &truth)?;
        result["etp"] = json!(m.etp);
        result["etpr"] = json!(m.etpr.ok());
    }
    emit(a.out.as_deref(), &to_pretty(&env.finish(result)))
}

/// Options shared by `sss` and `mcmc`.
#[derive(Args, Debug, Serialize)]
pub struct SearchArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// `forest` or `tree`.
    #[arg(long, default_value = "tree")]
    pub class: String,
    /// uniform | binomial:<beta> | hub[:<chi>,<psi>] | maxdeg | size | factored:<weights.csv>
    #[arg(long, default_value = "uniform")]
    pub prior: String,
    #[command(flatten)]
    pub hiw: HiwArgs,
    /// Iteration budget.
    #[arg(long)]
    pub iters: Option<usize>,
    /// Wall-clock budget in seconds.
    #[arg(long)]
    pub seconds: Option<f64>,
    /// Tree move system: a, b, c or d.
    #[arg(long, default_value = "a")]
    pub system: String,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Number of top graphs reported.
    #[arg(long, default_value_t = 10)]
    pub top: usize,
    /// Start graph: empty, chain, star, random or a graph file.
    #[arg(long)]
    pub start: Option<String>,
    /// Truth graph for ETPR.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Per-iteration score trace CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn budget(iters: Option<usize>, seconds: Option<f64>) -> CliResult<Budget> {
    match (iters, seconds) {
        (Some(i), Some(s)) => Ok(Budget::Both { iterations: i, seconds: s }),
        (Some(i), None) => Ok(Budget::Iterations(i)),
        (None, Some(s)) if s > 0.0 => Ok(Budget::Seconds(s)),
        (None, Some(_)) => invalid("--seconds must be positive"),
        (None, None) => Ok(Budget::Iterations(1000)),
    }
}

/// Which limit ended the run.
pub fn binding(b: Budget, iterations: usize) -> &'static str {
    match b {
        Budget::Iterations(_) => "iterations",
        Budget::Seconds(_) => "seconds",
        Budget::Both { iterations: i, .. } => {
            if iterations >= i {
                "iterations"
            } else {
                "seconds"
            }
        }
    }
}

/// A fixed random tree, unrelated to any generating graph.
pub fn fixed_random_tree(p: usize) -> LabeledGraph {
    if p < 2 {
        return LabeledGraph::new(p);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x7ee5);
    let seq: Vec<usize> = (0..p - 2).map(|_| rng.random_range(0..p)).collect();
    prufer_decode(&seq, p).expect("valid sequence")
}

fn start_graph(spec: Option<&str>, p: usize, class: GraphClass) -> CliResult<LabeledGraph> {
    let g = match spec {
        None => match class {
            GraphClass::Forest => LabeledGraph::new(p),
            GraphClass::Tree => fixed_random_tree(p),
        },
        Some("empty") => LabeledGraph::new(p),
        Some("chain") => LabeledGraph::chain(p),
        Some("star") => LabeledGraph::star(p, 0),
        Some("random") => fixed_random_tree(p),
        Some(path) => read_graph(std::path::Path::new(path))?,
    };
    if g.p() != p {
        return invalid(format!("start graph has {} nodes, data has {p}", g.p()));
    }
    Ok(g)
}

fn write_trace(path: &std::path::Path, rec: &PosteriorRecord) -> CliResult<()> {
    let mut s = String::from("iteration,score\n");
    for (i, x) in rec.trace.iter().enumerate() {
        s.push_str(&format!("{i},{x}\n"));
    }
    emit(Some(path), &s)
}

fn finish_search(env: &Envelope, a: &SearchArgs, rec: &PosteriorRecord, b: Budget) -> CliResult<()> {
    let truth = a.truth.as_ref().map(|p| read_graph(p)).transpose()?;
    let mut result = record_json(rec, truth.as_ref())?;
    result["budget_binding"] = json!(binding(b, rec.stats.iterations));
    if let Some(path) = &a.trace {
        write_trace(path, rec)?;
    }
    emit(a.out.as_deref(), &to_pretty(&env.finish(result)))
}

#[derive(Args, Debug, Serialize)]
pub struct SssArgs {
    #[command(flatten)]
    pub search: SearchArgs,
    /// Neighbours scored per iteration; defaults to p^2/20.
    #[arg(long)]
    pub omega: Option<usize>,
    /// Softmax inverse temperature on scores.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
}

pub fn default_omega(p: usize) -> usize {
    (p * p / 20).max(1)
}

pub fn sss(a: &SssArgs) -> CliResult<()> {
    let s = &a.search;
    let env = Envelope::new("sss", a, Some(s.seed));
    let data = read_dataset(&s.data)?;
    let p = data.p();
    let class = parse_class(&s.class)?;
    let scorer = Scorer::new(&s.hiw.model(&data)?, parse_prior(&s.prior, p, class)?, class)?;
    let b = budget(s.iters, s.seconds)?;
    let mut cfg = SssConfig::new(a.omega.unwrap_or_else(|| default_omega(p)), b, s.seed);
    cfg.system = MoveSystem::parse(&s.system)?;
    cfg.alpha = a.alpha;
    cfg.top_k = s.top;
    let rec = sss_run(&start_graph(s.start.as_deref(), p, class)?, &cfg, &scorer)?;
    finish_search(&env, s, &rec, b)
}

#[derive(Args, Debug, Serialize)]
pub struct McmcArgs {
    #[command(flatten)]
    pub search: SearchArgs,
    /// Graph-move proposal scale.
    #[arg(long, default_value_t = 0.5)]
    pub sigma_g: f64,
    /// Covariance-move proposal scale.
    #[arg(long, default_value_t = 0.01)]
    pub sigma_ij: f64,
}

pub fn mcmc(a: &McmcArgs) -> CliResult<()> {
    let s = &a.search;
    let env = Envelope::new("mcmc", a, Some(s.seed));
    let data = read_dataset(&s.data)?;
    let p = data.p();
    let class = parse_class(&s.class)?;
    let model = s.hiw.model(&data)?;
    let prior = parse_prior(&s.prior, p, class)?;
    let b = budget(s.iters, s.seconds)?;
    let mut cfg = McmcConfig::new(a.sigma_g, a.sigma_ij, b, s.seed);
    cfg.system = MoveSystem::parse(&s.system)?;
    cfg.top_k = s.top;
    let rec = mcmc_run(&start_graph(s.start.as_deref(), p, class)?, &cfg, &model, &prior, class)?;
    finish_search(&env, s, &rec, b)
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Order {
    Natural,
    Mindeg,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ThinAlgorithm {
    Ii,
    Iii,
}

#[derive(Args, Debug, Serialize)]
pub struct ThinArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long, value_enum, default_value = "natural")]
    pub order: Order,
    #[arg(long, value_enum, default_value = "iii")]
    pub algorithm: ThinAlgorithm,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn thin(a: &ThinArgs) -> CliResult<()> {
    let env = Envelope::new("thin", a, None);
    let g = read_graph(&a.graph)?;
    let order: Vec<usize> = match a.order {
        Order::Natural => (0..g.p()).collect(),
        Order::Mindeg => min_degree_ordering(&g),
    };
    let t = eliminate(&g, &order)?;
    let out = match a.algorithm {
        ThinAlgorithm::Ii => recursive_thin_ii(&t),
        ThinAlgorithm::Iii => recursive_thin_iii(&t),
    };
    let fill = LabeledGraph::from_edges(g.p(), out.fill().iter().copied())?;
    let report = format!(
        "# minimal: {}, fill kept {} of {}\n",
        out.is_minimal(),
        out.fill().len(),
        t.fill().len()
    );
    emit(a.out.as_deref(), &format!("{}{}{}", env.comment(), fill.to_text(), report))
}

#[derive(Args, Debug, Serialize)]
pub struct CountCyclesArgs {
    /// G(n, p): node count and edge probability.
    #[arg(long, num_args = 2, value_names = ["N", "P"], conflicts_with = "gnm")]
    pub gnp: Option<Vec<String>>,
    /// G(n, M): node count and edge count.
    #[arg(long, num_args = 2, value_names = ["N", "M"])]
    pub gnm: Option<Vec<String>>,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Longest cycle length reported.
    #[arg(long)]
    pub max_length: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_num<T: std::str::FromStr>(s: &str) -> CliResult<T> {
    s.parse::<T>().map_err(|_| crate::common::CliError::Invalid(format!("bad number '{s}'")))
}

pub fn count_cycles(a: &CountCyclesArgs) -> CliResult<()> {
    let env = Envelope::new("count-cycles", a, Some(a.seed));
    let model = match (&a.gnp, &a.gnm) {
        (Some(v), None) => SampleModel::Gnp { n: parse_num(&v[0])?, prob: parse_num(&v[1])? },
        (None, Some(v)) => SampleModel::Gnm { n: parse_num(&v[0])?, m: parse_num(&v[1])? },
        _ => return invalid("give exactly one of --gnp N P or --gnm N M"),
    };
    let mc = monte_carlo_cycles(&model, a.samples, a.seed)?;
    let max_len = a.max_length.unwrap_or(model.n()).min(model.n());
    let lengths: Vec<usize> = (3..=max_len).collect();
    let lambda = poisson_params(&model.poisson_model(), &lengths).unwrap_or_default();
    let mut s = String::from("length,empirical_mean,lambda\n");
    for l in &lengths {
        let mean = mc.get(l).map_or(0.0, |m| m.mean);
        let lam = lambda.get(l).copied().unwrap_or(f64::NAN);
        s.push_str(&format!("{l},{mean},{lam}\n"));
    }
    emit(a.out.as_deref(), &s)?;
    if a.out.is_some() {
        emit(None, &to_pretty(&env.finish(json!({ "lengths": lengths.len() }))))?;
    }
    Ok(())
}

#[derive(Args, Debug, Serialize)]
pub struct EnumerateArgs {
    /// Dataset to score every graph against.
    #[arg(long, required_unless_present = "decomposable")]
    pub data: Option<PathBuf>,
    /// `forest` (p <= 6) or `tree` (p <= 8).
    #[arg(long, default_value = "tree")]
    pub class: String,
    #[arg(long, default_value = "uniform")]
    pub prior: String,
    #[command(flatten)]
    pub hiw: HiwArgs,
    #[arg(long, default_value_t = 10)]
    pub top: usize,
    /// Count labelled decomposable graphs on this many nodes instead.
    #[arg(long)]
    pub decomposable: Option<usize>,
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn enumerate(a: &EnumerateArgs) -> CliResult<()> {
    let env = Envelope::new("enumerate", a, None);
    if let Some(n) = a.decomposable {
        let count = count_decomposable(n)?;
        return emit(a.out.as_deref(), &to_pretty(&env.finish(json!({ "n": n, "decomposable_graphs": count }))));
    }
    let data = read_dataset(a.data.as_ref().expect("required by clap"))?;
    let class = parse_class(&a.class)?;
    let scorer = Scorer::new(&a.hiw.model(&data)?, parse_prior(&a.prior, data.p(), class)?, class)?;
    let mut rec = enumerate_posterior(&scorer)?;
    rec.top_k = a.top;
    let truth = a.truth.as_ref().map(|p| read_graph(p)).transpose()?;
    emit(a.out.as_deref(), &to_pretty(&env.finish(record_json(&rec, truth.as_ref())?)))
}

#[derive(Args, Debug, Serialize)]
pub struct EvalArgs {
    /// Output of `sss`, `mcmc` or `enumerate`.
    #[arg(long)]
    pub ledger: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn fmt_rate(r: &treegm::Result<f64>) -> String {
    match r {
        Ok(x) => x.to_string(),
        Err(_) => "n/a".to_string(),
    }
}

pub fn eval(a: &EvalArgs) -> CliResult<()> {
    let text = std::fs::read_to_string(&a.ledger)
        .map_err(|e| crate::common::CliError::Invalid(format!("{}: {e}", a.ledger.display())))?;
    let rec = parse_record(&serde_json::from_str::<Value>(&text)?)?;
    let truth = read_graph(&a.truth)?;
    if truth.p() != rec.p {
        return invalid(format!("truth has {} nodes, ledger has {}", truth.p(), rec.p));
    }
    let m = posterior_expected_metrics(PosteriorSource::Ledger(&rec), &truth)?;
    let mut s = String::from("metric,value\n");
    for (k, v) in [("etp", m.etp), ("efp", m.efp), ("efn", m.efn), ("etn", m.etn)] {
        s.push_str(&format!("{k},{v}\n"));
    }
    s.push_str(&format!("etpr,{}\n", fmt_rate(&m.etpr)));
    for (v, d) in m.expected_degree.iter().enumerate() {
        s.push_str(&format!("expected_degree_{v},{d}\n"));
    }
    if let Some(mode) = rec.mode() {
        let c = confusion(&mode, &truth)?;
        for (k, v) in [("mode_tp", c.tp), ("mode_fp", c.fp), ("mode_fn", c.fn_), ("mode_tn", c.tn)] {
            s.push_str(&format!("{k},{v}\n"));
        }
        for (k, r) in c.rates().named() {
            s.push_str(&format!("mode_{k},{}\n", fmt_rate(r)));
        }
    }
    emit(a.out.as_deref(), &s)?;
    if a.out.is_some() {
        let env = Envelope::new("eval", a, None);
        emit(None, &to_pretty(&env.finish(json!({ "p": rec.p, "ledger_entries": rec.ledger.len() }))))?;
    }
    Ok(())
}
