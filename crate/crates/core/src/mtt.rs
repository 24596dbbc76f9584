//! Factored distributions over spanning trees via the weighted matrix tree
//! theorem: partition function, edge marginals, expected degrees and exact
//! sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{DisjointSets, LabeledGraph};
use crate::hiw::{EdgeLogWeights, HiwModel};
use crate::numerics::SymMatrix;
use crate::priors::GraphPrior;

/// Log weight standing in for a forbidden edge.
pub const FORBIDDEN: f64 = -1e300;

/// `P(T) ∝ Π_{e∈T} w_e` over spanning trees on `p` nodes.
#[derive(Clone, Debug)]
pub struct FactoredTreeDist {
    lw: EdgeLogWeights,
}

#[derive(Clone, Debug)]
pub struct TreePosteriorSummary {
    pub log_z: f64,
    pub edge_prob: SymMatrix,
    pub expected_degree: Vec<f64>,
}

impl FactoredTreeDist {
    pub fn new(lw: EdgeLogWeights) -> Result<Self> {
        let p = lw.p();
        for u in 0..p {
            for v in u + 1..p {
                let x = lw.get(u, v);
                if x.is_nan() || x == f64::INFINITY {
                    return Err(Error::invalid(format!("log weight for ({u}, {v}) is {x}")));
                }
            }
        }
        Ok(FactoredTreeDist { lw })
    }

    /// Tree posterior under HIW likelihood and a factored prior.
    pub fn posterior(model: &HiwModel, prior: &GraphPrior) -> Result<Self> {
        let pw = prior
            .is_factored(model.p())
            .ok_or_else(|| Error::invalid(format!("{} prior does not factor over edges", prior.name())))?;
        Self::new(model.edge_log_weight_matrix()?.add(&pw)?)
    }

    pub fn p(&self) -> usize {
        self.lw.p()
    }

    pub fn log_weights(&self) -> &EdgeLogWeights {
        &self.lw
    }

    /// Weights rescaled by `exp(-max)` together with the max log weight.
    fn scaled(&self) -> Result<(Vec<f64>, f64)> {
        let p = self.p();
        if p < 2 {
            return Err(Error::invalid("tree distributions need p >= 2"));
        }
        let mut m = f64::NEG_INFINITY;
        for u in 0..p {
            for v in u + 1..p {
                let x = self.lw.get(u, v);
                if x > FORBIDDEN {
                    m = m.max(x);
                }
            }
        }
        if !m.is_finite() {
            return Err(Error::invalid("every edge is forbidden"));
        }
        let mut w = vec![0.0; p * p];
        let mut ds = DisjointSets::new(p);
        for u in 0..p {
            for v in u + 1..p {
                let x = self.lw.get(u, v);
                let e = if x > FORBIDDEN { (x - m).exp() } else { 0.0 };
                w[u * p + v] = e;
                w[v * p + u] = e;
                if e > 0.0 {
                    ds.union(u, v);
                }
            }
        }
        if ds.set_size(0) != p {
            return Err(Error::Numerical("edge support does not connect all nodes".into()));
        }
        Ok((w, m))
    }

    /// Laplacian of the scaled weights with node 0's row and column removed.
    fn minor(w: &[f64], p: usize) -> SymMatrix {
        SymMatrix::from_fn(p - 1, |i, j| {
            let (a, b) = (i + 1, j + 1);
            if a == b {
                (0..p).filter(|&k| k != a).map(|k| w[a * p + k]).sum()
            } else {
                -w[a * p + b]
            }
        })
    }

    /// `log Σ_T Π_{e∈T} w_e`.
    pub fn log_partition(&self) -> Result<f64> {
        let p = self.p();
        let (w, m) = self.scaled()?;
        let chol = Self::minor(&w, p).cholesky().map_err(|_| Error::Numerical("singular Laplacian minor".into()))?;
        Ok(chol.logdet() + (p - 1) as f64 * m)
    }

    pub fn edge_probabilities(&self) -> Result<TreePosteriorSummary> {
        let p = self.p();
        let (w, m) = self.scaled()?;
        let chol = Self::minor(&w, p).cholesky().map_err(|_| Error::Numerical("singular Laplacian minor".into()))?;
        let log_z = chol.logdet() + (p - 1) as f64 * m;
        let b = chol.inverse();
        let bget = |u: usize, v: usize| if u == 0 || v == 0 { 0.0 } else { b.get(u - 1, v - 1) };
        let mut prob = SymMatrix::zeros(p);
        let mut deg = vec![0.0; p];
        for u in 0..p {
            for v in u + 1..p {
                let x = w[u * p + v] * (bget(u, u) + bget(v, v) - 2.0 * bget(u, v));
                let x = x.clamp(0.0, 1.0);
                prob.set(u, v, x);
                deg[u] += x;
                deg[v] += x;
            }
        }
        Ok(TreePosteriorSummary { log_z, edge_prob: prob, expected_degree: deg })
    }

    /// Exact draw by Wilson's loop-erased random walk rooted at node 0.
    pub fn sample_tree_with<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<LabeledGraph> {
        let p = self.p();
        let (w, _) = self.scaled()?;
        let row_sum: Vec<f64> = (0..p).map(|u| w[u * p..(u + 1) * p].iter().sum()).collect();
        let mut in_tree = vec![false; p];
        let mut next = vec![usize::MAX; p];
        in_tree[0] = true;
        for start in 1..p {
            let mut u = start;
            while !in_tree[u] {
                let mut t = rng.random::<f64>() * row_sum[u];
                let mut pick = usize::MAX;
                for v in 0..p {
                    let x = w[u * p + v];
                    if x > 0.0 {
                        pick = v;
                        if t < x {
                            break;
                        }
                        t -= x;
                    }
                }
                next[u] = pick;
                u = pick;
            }
            let mut u = start;
            while !in_tree[u] {
                in_tree[u] = true;
                u = next[u];
            }
        }
        let mut g = LabeledGraph::new(p);
        for u in 1..p {
            g.add_edge(u, next[u])?;
        }
        Ok(g)
    }

    pub fn sample_tree(&self, seed: u64) -> Result<LabeledGraph> {
        self.sample_tree_with(&mut ChaCha8Rng::seed_from_u64(seed))
    }
}

/// Expected number of true edges in a tree drawn from the summarized distribution.
pub fn expected_true_positives(s: &TreePosteriorSummary, truth: &LabeledGraph) -> Result<f64> {
    if truth.p() != s.edge_prob.dim() {
        return Err(Error::invalid("truth graph has the wrong number of nodes"));
    }
    Ok(truth.edges().map(|(u, v)| s.edge_prob.get(u, v)).sum())
}

/// Expected true positives divided by the number of true edges.
pub fn expected_true_positive_rate(s: &TreePosteriorSummary, truth: &LabeledGraph) -> Result<f64> {
    let etp = expected_true_positives(s, truth)?;
    if truth.num_edges() == 0 {
        return Err(Error::invalid("true graph has no edges"));
    }
    Ok(etp / truth.num_edges() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::enumerate_trees;
    use crate::hiw::{HiwParams, SuffStats};
    use crate::numerics::{center, sample_mvn};
    use proptest::prelude::*;
    use rand::Rng;

    fn random_lw(p: usize, seed: u64) -> EdgeLogWeights {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        EdgeLogWeights::from_fn(p, |_, _| rng.random_range(-2.0..2.0))
    }

    /// Brute force over Prüfer-enumerated trees: (log Z, edge marginals).
    fn brute(lw: &EdgeLogWeights) -> (f64, SymMatrix, Vec<(LabeledGraph, f64)>) {
        let p = lw.p();
        let trees: Vec<(LabeledGraph, f64)> = enumerate_trees(p).unwrap().map(|t| {
            let s = lw.total(&t);
            (t, s)
        }).collect();
        let mx = trees.iter().map(|t| t.1).fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = trees.iter().map(|t| (t.1 - mx).exp()).sum();
        let log_z = z.ln() + mx;
        let mut prob = SymMatrix::zeros(p);
        let mut out = Vec::new();
        for (t, s) in trees {
            let pt = (s - log_z).exp();
            for (u, v) in t.edges() {
                let x = prob.get(u, v) + pt;
                prob.set(u, v, x);
            }
            out.push((t, pt));
        }
        (log_z, prob, out)
    }

    #[test]
    fn unit_weight_partitions() {
        let d = FactoredTreeDist::new(EdgeLogWeights::zeros(3)).unwrap();
        assert!((d.log_partition().unwrap() - 3f64.ln()).abs() < 1e-12);
        for p in 3..=8 {
            let d = FactoredTreeDist::new(EdgeLogWeights::zeros(p)).unwrap();
            let want = (p as f64 - 2.0) * (p as f64).ln();
            assert!((d.log_partition().unwrap() - want).abs() < 1e-10, "p={p}");
        }
    }

    #[test]
    fn four_cycle_with_chord_has_eight_trees() {
        let mut lw = EdgeLogWeights::constant(4, FORBIDDEN);
        for (u, v) in [(0, 1), (1, 2), (2, 3), (0, 3), (0, 2)] {
            lw.set(u, v, 0.0);
        }
        let d = FactoredTreeDist::new(lw).unwrap();
        assert!((d.log_partition().unwrap() - 8f64.ln()).abs() < 1e-12);
        let s = d.edge_probabilities().unwrap();
        assert_eq!(s.edge_prob.get(1, 3), 0.0);
    }

    #[test]
    fn uniform_edge_probabilities() {
        let s = FactoredTreeDist::new(EdgeLogWeights::zeros(3)).unwrap().edge_probabilities().unwrap();
        for (u, v) in [(0, 1), (0, 2), (1, 2)] {
            assert!((s.edge_prob.get(u, v) - 2.0 / 3.0).abs() < 1e-12);
        }
        let s = FactoredTreeDist::new(EdgeLogWeights::zeros(4)).unwrap().edge_probabilities().unwrap();
        for v in 0..4 {
            for u in 0..v {
                assert!((s.edge_prob.get(u, v) - 0.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn matches_brute_force() {
        for p in 2..=6 {
            for seed in 0..5 {
                let lw = random_lw(p, seed * 7 + p as u64);
                let (log_z, prob, _) = brute(&lw);
                let s = FactoredTreeDist::new(lw).unwrap().edge_probabilities().unwrap();
                assert!((s.log_z - log_z).abs() < 1e-9);
                assert!(s.edge_prob.max_abs_diff(&prob) <= 1e-8, "p={p} seed={seed}");
            }
        }
    }

    #[test]
    fn etp_examples_and_brute_force() {
        let s = FactoredTreeDist::new(EdgeLogWeights::zeros(3)).unwrap().edge_probabilities().unwrap();
        let k3 = LabeledGraph::complete(3);
        assert!((expected_true_positives(&s, &k3).unwrap() - 2.0).abs() < 1e-12);
        assert!((expected_true_positive_rate(&s, &k3).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        let empty = LabeledGraph::new(3);
        assert_eq!(expected_true_positives(&s, &empty).unwrap(), 0.0);
        assert!(expected_true_positive_rate(&s, &empty).is_err());
        assert!(expected_true_positives(&s, &LabeledGraph::new(4)).is_err());

        let lw = random_lw(6, 99);
        let truth = LabeledGraph::from_edges(6, [(0, 1), (1, 2), (2, 5), (3, 4)]).unwrap();
        let (_, _, trees) = brute(&lw);
        let want: f64 = trees
            .iter()
            .map(|(t, pt)| pt * truth.edges().filter(|&(u, v)| t.has_edge(u, v)).count() as f64)
            .sum();
        let s = FactoredTreeDist::new(lw).unwrap().edge_probabilities().unwrap();
        assert!((expected_true_positives(&s, &truth).unwrap() - want).abs() < 1e-8);
    }

    #[test]
    fn finite_difference_sensitivity() {
        let lw = random_lw(5, 3);
        let s = FactoredTreeDist::new(lw.clone()).unwrap().edge_probabilities().unwrap();
        let h = 1e-6;
        for v in 0..5 {
            for u in 0..v {
                let mut up = lw.clone();
                up.set(u, v, lw.get(u, v) + h);
                let mut dn = lw.clone();
                dn.set(u, v, lw.get(u, v) - h);
                let fd = (FactoredTreeDist::new(up).unwrap().log_partition().unwrap()
                    - FactoredTreeDist::new(dn).unwrap().log_partition().unwrap())
                    / (2.0 * h);
                assert!((fd - s.edge_prob.get(u, v)).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn disconnected_support_rejected() {
        let mut lw = EdgeLogWeights::constant(4, FORBIDDEN);
        lw.set(0, 1, 0.0);
        lw.set(2, 3, 0.0);
        let d = FactoredTreeDist::new(lw).unwrap();
        assert!(d.log_partition().is_err());
        assert!(d.sample_tree(1).is_err());
        assert!(FactoredTreeDist::new(EdgeLogWeights::zeros(1)).unwrap().log_partition().is_err());
    }

    #[test]
    fn sampler_two_nodes() {
        let d = FactoredTreeDist::new(EdgeLogWeights::constant(2, 0.3)).unwrap();
        for seed in 0..5 {
            assert_eq!(d.sample_tree(seed).unwrap().edge_vec(), vec![(0, 1)]);
        }
    }

    #[test]
    fn sampler_uniform_p4() {
        let d = FactoredTreeDist::new(EdgeLogWeights::zeros(4)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 100_000;
        let mut counts = std::collections::HashMap::new();
        for _ in 0..n {
            *counts.entry(d.sample_tree_with(&mut rng).unwrap().bit_pattern()).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 16);
        let pi = 1.0 / 16.0;
        let sd = (n as f64 * pi * (1.0 - pi)).sqrt();
        for (_, c) in counts {
            assert!((c as f64 - n as f64 * pi).abs() < 4.0 * sd);
        }
    }

    #[test]
    fn sampler_dominant_edge() {
        let mut lw = EdgeLogWeights::zeros(4);
        lw.set(1, 2, 3.0);
        let d = FactoredTreeDist::new(lw).unwrap();
        let want = d.edge_probabilities().unwrap().edge_prob.get(1, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 40_000;
        let hits = (0..n).filter(|_| d.sample_tree_with(&mut rng).unwrap().has_edge(1, 2)).count();
        let sd = (n as f64 * want * (1.0 - want)).sqrt();
        assert!((hits as f64 - n as f64 * want).abs() < 4.0 * sd);
    }

    #[test]
    fn posterior_chain_matches_tree_posterior() {
        let truth = LabeledGraph::chain(5);
        let sigma = crate::numerics::cov_from_graph(&truth, 0.4).unwrap();
        let data = center(&sample_mvn(&sigma, 30, 8).unwrap());
        let m = HiwModel::new(HiwParams::default_for(5), SuffStats::from_dataset(&data)).unwrap();
        let prior = GraphPrior::binomial(0.2).unwrap();
        let d = FactoredTreeDist::posterior(&m, &prior).unwrap();
        let log_z = d.log_partition().unwrap();
        let trees: Vec<LabeledGraph> = enumerate_trees(5).unwrap().collect();
        let scores: Vec<f64> =
            trees.iter().map(|t| m.log_marginal_forest(t).unwrap() + prior.log_prior_unnorm(t)).collect();
        let mx = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let norm = scores.iter().map(|s| (s - mx).exp()).sum::<f64>().ln() + mx;
        for (t, s) in trees.iter().zip(&scores) {
            let direct = (s - norm).exp();
            let factored = (d.log_weights().total(t) - log_z).exp();
            assert!((direct - factored).abs() < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn conservation_and_shift(seed in 0u64..5000, p in 2usize..10, c in -5.0f64..5.0) {
            let lw = random_lw(p, seed);
            let s = FactoredTreeDist::new(lw.clone()).unwrap().edge_probabilities().unwrap();
            let mut total = 0.0;
            for v in 0..p {
                for u in 0..v {
                    total += s.edge_prob.get(u, v);
                }
                let row: f64 = (0..p).filter(|&u| u != v).map(|u| s.edge_prob.get(u, v)).sum();
                prop_assert!((row - s.expected_degree[v]).abs() < 1e-12);
            }
            prop_assert!((total - (p as f64 - 1.0)).abs() < 1e-9);
            prop_assert!((s.expected_degree.iter().sum::<f64>() - 2.0 * (p as f64 - 1.0)).abs() < 1e-9);
            let shifted = EdgeLogWeights::from_fn(p, |u, v| lw.get(u, v) + c);
            let s2 = FactoredTreeDist::new(shifted).unwrap().edge_probabilities().unwrap();
            prop_assert!((s2.log_z - s.log_z - (p as f64 - 1.0) * c).abs() < 1e-9);
            prop_assert!(s2.edge_prob.max_abs_diff(&s.edge_prob) < 1e-10);
        }
    }
}
