//! Replicated runs of one algorithm on freshly simulated datasets.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use treegm::evalmetrics::{posterior_expected_metrics, PosteriorSource};
use treegm::explorers::{mcmc_run, sss_run, McmcConfig, PosteriorRecord, Scorer, SssConfig};
use treegm::movestore::MoveSystem;
use treegm::GraphClass;

use crate::commands::{budget, default_omega, fixed_random_tree, generate, DataSpec};
use crate::common::{emit, invalid, parse_prior, to_pretty, CliError, CliResult, Envelope, HiwArgs};

pub const METRICS: [&str; 5] = ["distinct_graphs", "etpr", "top_tpr", "top_score", "top10_score_sum"];

#[derive(ValueEnum, Clone, Copy, Debug, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Ssst,
    Sssf,
    Mcmct,
    Mcmcf,
}

impl Algorithm {
    fn class(self) -> GraphClass {
        match self {
            Algorithm::Ssst | Algorithm::Mcmct => GraphClass::Tree,
            Algorithm::Sssf | Algorithm::Mcmcf => GraphClass::Forest,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Algorithm::Ssst => "ssst",
            Algorithm::Sssf => "sssf",
            Algorithm::Mcmct => "mcmct",
            Algorithm::Mcmcf => "mcmcf",
        }
    }
}

#[derive(Args, Debug, Serialize)]
pub struct ExperimentArgs {
    #[command(flatten)]
    pub spec: DataSpec,
    #[arg(long, default_value_t = 10)]
    pub replicates: usize,
    #[arg(long, value_enum, default_value = "ssst")]
    pub algorithm: Algorithm,
    /// Neighbours scored per SSS iteration; defaults to p^2/20.
    #[arg(long)]
    pub omega: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub seconds: Option<f64>,
    #[arg(long, default_value = "a")]
    pub system: String,
    #[arg(long, default_value_t = 0.5)]
    pub sigma_g: f64,
    #[arg(long, default_value_t = 0.01)]
    pub sigma_ij: f64,
    #[arg(long, default_value = "uniform")]
    pub prior: String,
    #[command(flatten)]
    pub hiw: HiwArgs,
    /// Replicate `i` uses seed `seed + i`.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Per-replicate results CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Summary CSV with median and quartiles per metric.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Re-aggregate an existing results CSV instead of running.
    #[arg(long)]
    pub summarize: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub group: String,
    pub replicate: usize,
    pub seed: u64,
    pub values: [f64; 5],
}

fn run_one(a: &ExperimentArgs, replicate: usize) -> CliResult<Row> {
    let seed = a.seed.wrapping_add(replicate as u64);
    let g = generate(&a.spec, seed)?;
    let p = g.truth.p();
    let class = a.algorithm.class();
    let model = a.hiw.model(&g.data)?;
    let prior = parse_prior(&a.prior, p, class)?;
    let b = budget(a.iters, a.seconds)?;
    let system = MoveSystem::parse(&a.system)?;
    let start = match class {
        GraphClass::Tree => fixed_random_tree(p),
        GraphClass::Forest => treegm::LabeledGraph::new(p),
    };
    let rec: PosteriorRecord = match a.algorithm {
        Algorithm::Ssst | Algorithm::Sssf => {
            let mut cfg = SssConfig::new(a.omega.unwrap_or_else(|| default_omega(p)), b, seed);
            cfg.system = system;
            cfg.alpha = a.alpha;
            sss_run(&start, &cfg, &Scorer::new(&model, prior, class)?)?
        }
        Algorithm::Mcmct | Algorithm::Mcmcf => {
            let mut cfg = McmcConfig::new(a.sigma_g, a.sigma_ij, b, seed);
            cfg.system = system;
            mcmc_run(&start, &cfg, &model, &prior, class)?
        }
    };
    let truth_edges = g.truth.num_edges();
    if truth_edges == 0 {
        return invalid("truth graph has no edges");
    }
    let m = posterior_expected_metrics(PosteriorSource::Ledger(&rec), &g.truth)?;
    let mode = rec.mode().ok_or_else(|| CliError::Invalid("run visited no graphs".into()))?;
    let top_tpr = mode.edges().filter(|&(u, v)| g.truth.has_edge(u, v)).count() as f64 / truth_edges as f64;
    let top_score = rec.scores.get(&mode.bit_pattern()).copied().unwrap_or(f64::NAN);
    let top10: f64 = rec.best(10).iter().map(|(_, s)| s).sum();
    Ok(Row {
        group: group_name(a),
        replicate,
        seed,
        values: [rec.ledger.len() as f64, m.etpr?, top_tpr, top_score, top10],
    })
}

fn group_name(a: &ExperimentArgs) -> String {
    let shape = serde_json::to_value(a.spec.shape).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
    format!("{shape}_p{}_n{}_{}_{}", a.spec.p, a.spec.n, a.algorithm.name(), a.system.to_ascii_lowercase())
}

pub fn rows_to_csv(rows: &[Row]) -> String {
    let mut s = format!("group,replicate,seed,{}\n", METRICS.join(","));
    for r in rows {
        let vals: Vec<String> = r.values.iter().map(|x| x.to_string()).collect();
        s.push_str(&format!("{},{},{},{}\n", r.group, r.replicate, r.seed, vals.join(",")));
    }
    s
}

pub fn parse_rows(text: &str) -> CliResult<Vec<Row>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let headers = rdr.headers()?.clone();
    let want: Vec<&str> = ["group", "replicate", "seed"].into_iter().chain(METRICS).collect();
    if headers.iter().collect::<Vec<_>>() != want {
        return invalid("results CSV has unexpected columns");
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let num = |i: usize| rec[i].parse::<f64>().map_err(|_| CliError::Invalid(format!("bad number '{}'", &rec[i])));
        let mut values = [0.0; 5];
        for (k, v) in values.iter_mut().enumerate() {
            *v = num(3 + k)?;
        }
        rows.push(Row {
            group: rec[0].to_string(),
            replicate: rec[1].parse().map_err(|_| CliError::Invalid("bad replicate".into()))?,
            seed: rec[2].parse().map_err(|_| CliError::Invalid("bad seed".into()))?,
            values,
        });
    }
    Ok(rows)
}

/// Linear-interpolation quantile of sorted values.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Median and quartiles of each metric within each group.
pub fn summarize(rows: &[Row]) -> String {
    let mut groups: BTreeMap<&str, Vec<&Row>> = BTreeMap::new();
    for r in rows {
        groups.entry(&r.group).or_default().push(r);
    }
    let mut s = String::from("group,metric,count,median,q25,q75\n");
    for (g, rs) in groups {
        for (k, name) in METRICS.iter().enumerate() {
            let mut v: Vec<f64> = rs.iter().map(|r| r.values[k]).collect();
            v.sort_by(f64::total_cmp);
            s.push_str(&format!(
                "{g},{name},{},{},{},{}\n",
                v.len(),
                quantile(&v, 0.5),
                quantile(&v, 0.25),
                quantile(&v, 0.75)
            ));
        }
    }
    s
}

pub fn run(a: &ExperimentArgs) -> CliResult<()> {
    let env = Envelope::new("experiment", a, Some(a.seed));
    let csv_text = match &a.summarize {
        Some(path) => std::fs::read_to_string(path).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?,
        None => {
            if a.replicates == 0 {
                return invalid("need at least one replicate");
            }
            let rows = (0..a.replicates).into_par_iter().map(|i| run_one(a, i)).collect::<CliResult<Vec<Row>>>()?;
            let text = rows_to_csv(&rows);
            if let Some(path) = &a.out {
                emit(Some(path), &text)?;
            }
            text
        }
    };
    // the summary is always computed from the CSV text so re-aggregation is exact
    let summary = summarize(&parse_rows(&csv_text)?);
    if let Some(path) = &a.summary {
        emit(Some(path), &summary)?;
    }
    let rows = parse_rows(&csv_text)?;
    let result = json!({
        "replicates": rows.len(),
        "rows": rows.iter().map(|r| json!({
            "group": r.group, "replicate": r.replicate, "seed": r.seed,
            "values": METRICS.iter().zip(r.values).map(|(k, v)| (k.to_string(), json!(v))).collect::<serde_json::Map<_, _>>(),
        })).collect::<Vec<_>>(),
        "summary_csv": summary,
    });
    emit(None, &to_pretty(&env.finish(result)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert_eq!(quantile(&v, 0.25), 1.75);
        assert_eq!(quantile(&v, 0.75), 3.25);
        assert_eq!(quantile(&[7.0], 0.25), 7.0);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let rows: Vec<Row> = (0..7)
            .map(|i| Row {
                group: "star_p5_n10_ssst_a".into(),
                replicate: i,
                seed: 10 + i as u64,
                values: [i as f64, 0.1 * i as f64, 1.0 / 3.0, -1234.56789 - i as f64, f64::MIN_POSITIVE],
            })
            .collect();
        let text = rows_to_csv(&rows);
        let back = parse_rows(&text).unwrap();
        assert_eq!(back, rows);
        assert_eq!(summarize(&back), summarize(&rows));
        assert_eq!(rows_to_csv(&back), text);
    }
}
