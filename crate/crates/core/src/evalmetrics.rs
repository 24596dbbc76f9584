//! Confusion counts and rates for a single estimated graph, and their
//! posterior expectations under an edge-probability matrix.

use crate::error::{Error, Result};
use crate::explorers::PosteriorRecord;
use crate::graph::{num_pairs, LabeledGraph};
use crate::mtt::TreePosteriorSummary;
use crate::numerics::SymMatrix;

/// Four-way classification of all node pairs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn rates(&self) -> Rates {
        rates(self)
    }
}

pub fn confusion(estimate: &LabeledGraph, truth: &LabeledGraph) -> Result<Confusion> {
    let p = truth.p();
    if estimate.p() != p {
        return Err(Error::invalid(format!("estimate has {} nodes, truth has {p}", estimate.p())));
    }
    let tp = estimate.edges().filter(|&(u, v)| truth.has_edge(u, v)).count();
    let fp = estimate.num_edges() - tp;
    let fn_ = truth.num_edges() - tp;
    Ok(Confusion { tp, fp, fn_, tn: num_pairs(p) - tp - fp - fn_ })
}

/// Ratio with a zero denominator reported as an error.
fn ratio(name: &str, num: usize, den: usize) -> Result<f64> {
    if den == 0 {
        Err(Error::invalid(format!("{name} undefined: zero denominator")))
    } else {
        Ok(num as f64 / den as f64)
    }
}

/// The seven standard rates; each is an error when its denominator is zero.
#[derive(Clone, Debug, PartialEq)]
pub struct Rates {
    pub precision: Result<f64>,
    pub recall: Result<f64>,
    pub specificity: Result<f64>,
    pub false_positive_rate: Result<f64>,
    pub false_negative_rate: Result<f64>,
    pub accuracy: Result<f64>,
    pub error_rate: Result<f64>,
}

impl Rates {
    /// Name and value of every rate, in a fixed order.
    pub fn named(&self) -> [(&'static str, &Result<f64>); 7] {
        [
            ("precision", &self.precision),
            ("recall", &self.recall),
            ("specificity", &self.specificity),
            ("false_positive_rate", &self.false_positive_rate),
            ("false_negative_rate", &self.false_negative_rate),
            ("accuracy", &self.accuracy),
            ("error_rate", &self.error_rate),
        ]
    }
}

pub fn rates(c: &Confusion) -> Rates {
    let all = c.total();
    Rates {
        precision: ratio("precision", c.tp, c.tp + c.fp),
        recall: ratio("recall", c.tp, c.tp + c.fn_),
        specificity: ratio("specificity", c.tn, c.tn + c.fp),
        false_positive_rate: ratio("false-positive rate", c.fp, c.tn + c.fp),
        false_negative_rate: ratio("false-negative rate", c.fn_, c.tp + c.fn_),
        accuracy: ratio("accuracy", c.tp + c.tn, all),
        error_rate: ratio("error rate", c.fp + c.fn_, all),
    }
}

/// Posterior expectations of the confusion counts.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpectedMetrics {
    pub etp: f64,
    pub efp: f64,
    pub efn: f64,
    pub etn: f64,
    /// `etp / |E_truth|`; an error when the truth has no edges.
    pub etpr: Result<f64>,
    pub expected_degree: Vec<f64>,
}

/// Expected metrics from a matrix of posterior edge probabilities.
pub fn expected_metrics_from_edge_probs(edge_prob: &SymMatrix, truth: &LabeledGraph) -> Result<ExpectedMetrics> {
    let p = truth.p();
    if edge_prob.dim() != p {
        return Err(Error::invalid(format!("edge probabilities for {} nodes, truth has {p}", edge_prob.dim())));
    }
    let mut etp = 0.0;
    let mut efp = 0.0;
    for v in 0..p {
        for u in 0..v {
            let x = edge_prob.get(u, v);
            if truth.has_edge(u, v) {
                etp += x;
            } else {
                efp += x;
            }
        }
    }
    let true_edges = truth.num_edges();
    let expected_degree = (0..p).map(|v| (0..p).filter(|&u| u != v).map(|u| edge_prob.get(u, v)).sum()).collect();
    Ok(ExpectedMetrics {
        etp,
        efp,
        efn: true_edges as f64 - etp,
        etn: (num_pairs(p) - true_edges) as f64 - efp,
        etpr: if true_edges == 0 {
            Err(Error::invalid("ETPR undefined: truth has no edges"))
        } else {
            Ok(etp / true_edges as f64)
        },
        expected_degree,
    })
}

/// Source of posterior edge probabilities.
#[derive(Clone, Copy, Debug)]
pub enum PosteriorSource<'a> {
    /// Explorer ledger, normalized over the graphs it holds.
    Ledger(&'a PosteriorRecord),
    /// Exact spanning-tree summary.
    Exact(&'a TreePosteriorSummary),
}

pub fn posterior_expected_metrics(src: PosteriorSource<'_>, truth: &LabeledGraph) -> Result<ExpectedMetrics> {
    match src {
        PosteriorSource::Ledger(rec) => expected_metrics_from_edge_probs(&rec.edge_probabilities()?, truth),
        PosteriorSource::Exact(s) => expected_metrics_from_edge_probs(&s.edge_prob, truth),
    }
}
