//! Browser bindings: exact tree posteriors on simulated data, posterior tree
//! draws and random-graph cycle counts.

use wasm_bindgen::prelude::*;

use treegm::chowliu::map_tree;
use treegm::hiw::HiwModel;
use treegm::mtt::FactoredTreeDist;
use treegm::numerics::{cov_from_graph, sample_mvn, Dataset};
use treegm::priors::GraphPrior;
use treegm::randgraph::{enumerate_cycles, poisson_params, sample_gnp, PoissonModel};
use treegm::{Error, LabeledGraph, Result};

fn truth_graph(shape: &str, p: usize) -> Result<LabeledGraph> {
    if !(2..=60).contains(&p) {
        return Err(Error::invalid("p must be between 2 and 60"));
    }
    match shape {
        "star" => Ok(LabeledGraph::star(p, 0)),
        "chain" => Ok(LabeledGraph::chain(p)),
        _ => Err(Error::invalid(format!("unknown shape '{shape}'"))),
    }
}

fn simulate(shape: &str, p: usize, n: usize, seed: u64) -> Result<(LabeledGraph, Dataset)> {
    let truth = truth_graph(shape, p)?;
    let r = 0.99 / ((p - 1) as f64).sqrt();
    let data = sample_mvn(&cov_from_graph(&truth, r)?, n, seed)?;
    Ok((truth, data))
}

fn posterior(shape: &str, p: usize, n: usize, seed: u64) -> Result<(LabeledGraph, HiwModel, FactoredTreeDist)> {
    let (truth, data) = simulate(shape, p, n, seed)?;
    let model = HiwModel::from_dataset(&data)?;
    let dist = FactoredTreeDist::posterior(&model, &GraphPrior::Uniform)?;
    Ok((truth, model, dist))
}

fn flat_edges(g: &LabeledGraph) -> Vec<u32> {
    g.edges().flat_map(|(u, v)| [u as u32, v as u32]).collect()
}

/// Row-major `p × p` edge probabilities followed by the ETPR.
pub fn edge_probabilities_native(shape: &str, p: usize, n: usize, seed: u64) -> Result<Vec<f64>> {
    let (truth, _, dist) = posterior(shape, p, n, seed)?;
    let s = dist.edge_probabilities()?;
    let mut out: Vec<f64> = s.edge_prob.rows().into_iter().flatten().collect();
    out.push(treegm::mtt::expected_true_positive_rate(&s, &truth)?);
    Ok(out)
}

/// Flat `[u0, v0, u1, v1, ...]` edges of one posterior tree draw.
pub fn sample_tree_native(shape: &str, p: usize, n: usize, seed: u64, draw_seed: u64) -> Result<Vec<u32>> {
    let (_, _, dist) = posterior(shape, p, n, seed)?;
    Ok(flat_edges(&dist.sample_tree(draw_seed)?))
}

/// Flat edges of the MAP tree.
pub fn map_tree_native(shape: &str, p: usize, n: usize, seed: u64) -> Result<Vec<u32>> {
    let (_, model, _) = posterior(shape, p, n, seed)?;
    Ok(flat_edges(&map_tree(&model, &GraphPrior::Uniform)?))
}

/// Triples `[length, count, lambda]` for one draw of `G(n, prob)`.
pub fn cycle_census_native(n: usize, prob: f64, seed: u64) -> Result<Vec<f64>> {
    if n > 30 {
        return Err(Error::invalid("at most 30 nodes in the browser"));
    }
    let census = enumerate_cycles(&sample_gnp(n, prob, seed)?)?;
    let lengths: Vec<usize> = (3..=n.max(3)).collect();
    let lambda = poisson_params(&PoissonModel::Gnp { c: n as f64 * prob }, &lengths).unwrap_or_default();
    Ok(lengths
        .iter()
        .flat_map(|&l| [l as f64, census.get(l) as f64, lambda.get(&l).copied().unwrap_or(f64::NAN)])
        .collect())
}

fn js(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub fn edge_probabilities(shape: &str, p: usize, n: usize, seed: u32) -> std::result::Result<Vec<f64>, JsError> {
    edge_probabilities_native(shape, p, n, seed as u64).map_err(js)
}

#[wasm_bindgen]
pub fn sample_tree(shape: &str, p: usize, n: usize, seed: u32, draw_seed: u32) -> std::result::Result<Vec<u32>, JsError> {
    sample_tree_native(shape, p, n, seed as u64, draw_seed as u64).map_err(js)
}

#[wasm_bindgen]
pub fn map_tree_edges(shape: &str, p: usize, n: usize, seed: u32) -> std::result::Result<Vec<u32>, JsError> {
    map_tree_native(shape, p, n, seed as u64).map_err(js)
}

#[wasm_bindgen]
pub fn cycle_census(n: usize, prob: f64, seed: u32) -> std::result::Result<Vec<f64>, JsError> {
    cycle_census_native(n, prob, seed as u64).map_err(js)
}
