//! Maximum-weight spanning trees and forests, Gaussian Chow–Liu weights and
//! MAP forest/tree selection under factored priors.

use crate::error::{Error, Result};
use crate::graph::{DisjointSets, LabeledGraph};
use crate::hiw::{EdgeLogWeights, HiwModel};
use crate::numerics::Dataset;
use crate::priors::GraphPrior;

const RHO2_MAX: f64 = 1.0 - 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct WeightedEdgeList {
    p: usize,
    items: Vec<(usize, usize, f64)>,
}

impl WeightedEdgeList {
    pub fn new(p: usize, items: Vec<(usize, usize, f64)>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        let mut norm = Vec::with_capacity(items.len());
        for (u, v, w) in items {
            if u >= p || v >= p || u == v {
                return Err(Error::invalid(format!("bad pair ({u}, {v}) for p={p}")));
            }
            if w.is_nan() {
                return Err(Error::invalid("edge weight is NaN"));
            }
            let (a, b) = (u.min(v), u.max(v));
            if !seen.insert((a, b)) {
                return Err(Error::invalid(format!("pair ({a}, {b}) listed twice")));
            }
            norm.push((a, b, w));
        }
        Ok(WeightedEdgeList { p, items: norm })
    }

    /// All `C(p,2)` pairs taken from a weight matrix.
    pub fn from_weights(w: &EdgeLogWeights) -> Self {
        let p = w.p();
        let items = (0..p).flat_map(|u| (u + 1..p).map(move |v| (u, v))).map(|(u, v)| (u, v, w.get(u, v))).collect();
        WeightedEdgeList { p, items }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn items(&self) -> &[(usize, usize, f64)] {
        &self.items
    }

    pub fn weight(&self, u: usize, v: usize) -> Option<f64> {
        let (a, b) = (u.min(v), u.max(v));
        self.items.iter().find(|&&(x, y, _)| x == a && y == b).map(|&(_, _, w)| w)
    }

    pub fn total(&self, g: &LabeledGraph) -> f64 {
        g.edges().map(|(u, v)| self.weight(u, v).unwrap_or(f64::NEG_INFINITY)).sum()
    }

    /// Descending weight, ties in lexicographic pair order.
    fn sorted(&self) -> Vec<(usize, usize, f64)> {
        let mut v = self.items.clone();
        v.sort_by(|a, b| b.2.total_cmp(&a.2).then((a.0, a.1).cmp(&(b.0, b.1))));
        v
    }
}

fn kruskal(p: usize, edges: impl Iterator<Item = (usize, usize, f64)>) -> LabeledGraph {
    let mut g = LabeledGraph::new(p);
    let mut ds = DisjointSets::new(p);
    for (u, v, _) in edges {
        if g.num_edges() + 1 >= p.max(1) {
            break;
        }
        if ds.union(u, v) {
            g.add_edge(u, v).expect("pair validated");
        }
    }
    g
}

/// Greedy maximum-weight spanning tree.
pub fn kruskal_max_tree(w: &WeightedEdgeList) -> Result<LabeledGraph> {
    if w.p == 0 {
        return Err(Error::invalid("spanning tree needs p >= 1"));
    }
    let g = kruskal(w.p, w.sorted().into_iter());
    if !g.is_tree() {
        return Err(Error::invalid("weighted pairs do not connect all nodes"));
    }
    Ok(g)
}

/// Kruskal restricted to strictly positive weights.
pub fn kruskal_max_forest(w: &WeightedEdgeList) -> LabeledGraph {
    kruskal(w.p, w.sorted().into_iter().filter(|e| e.2 > 0.0))
}

/// `-½ log(1 − ρ̂²)` for every pair of columns.
pub fn chow_liu_gaussian_weights(d: &Dataset) -> Result<WeightedEdgeList> {
    if d.n() < 2 {
        return Err(Error::invalid("Chow–Liu weights need n >= 2"));
    }
    let p = d.p();
    let means = d.column_means();
    let mut s = vec![0.0; p * p];
    for r in 0..d.n() {
        let row = d.row(r);
        for i in 0..p {
            let xi = row[i] - means[i];
            for j in i..p {
                s[i * p + j] += xi * (row[j] - means[j]);
            }
        }
    }
    for i in 0..p {
        if s[i * p + i] <= 0.0 {
            return Err(Error::invalid(format!("column {i} has zero variance")));
        }
    }
    let mut items = Vec::with_capacity(p * p.saturating_sub(1) / 2);
    for u in 0..p {
        for v in u + 1..p {
            let rho2 = s[u * p + v].powi(2) / (s[u * p + u] * s[v * p + v]);
            items.push((u, v, -0.5 * (1.0 - rho2.min(RHO2_MAX)).ln()));
        }
    }
    Ok(WeightedEdgeList { p, items })
}

fn posterior_weights(model: &HiwModel, prior: &GraphPrior) -> Result<WeightedEdgeList> {
    let p = model.p();
    let prior_w = prior
        .is_factored(p)
        .ok_or_else(|| Error::invalid(format!("{} prior does not factor over edges", prior.name())))?;
    if prior_w.p() != p {
        return Err(Error::invalid("prior weights have the wrong dimension"));
    }
    Ok(WeightedEdgeList::from_weights(&model.edge_log_weight_matrix()?.add(&prior_w)?))
}

/// Highest-posterior forest.
pub fn map_forest(model: &HiwModel, prior: &GraphPrior) -> Result<LabeledGraph> {
    Ok(kruskal_max_forest(&posterior_weights(model, prior)?))
}

/// Highest-posterior spanning tree.
pub fn map_tree(model: &HiwModel, prior: &GraphPrior) -> Result<LabeledGraph> {
    kruskal_max_tree(&posterior_weights(model, prior)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{enumerate_forests, enumerate_trees};
    use crate::hiw::{HiwParams, SuffStats};
    use crate::numerics::{center, cov_from_graph, sample_mvn, SymMatrix};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_weights(p: usize, seed: u64) -> WeightedEdgeList {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        WeightedEdgeList::from_weights(&EdgeLogWeights::from_fn(p, |_, _| rng.random_range(-1.0..1.0)))
    }

    fn model_for(g: &LabeledGraph, r: f64, n: usize, seed: u64) -> HiwModel {
        let p = g.p();
        let sigma = cov_from_graph(g, r).unwrap();
        let data = center(&sample_mvn(&sigma, n, seed).unwrap());
        HiwModel::new(HiwParams::default_for(p), SuffStats::from_dataset(&data)).unwrap()
    }

    #[test]
    fn small_examples() {
        let w = WeightedEdgeList::new(3, vec![(0, 1, 3.0), (0, 2, 2.0), (1, 2, 1.0)]).unwrap();
        let t = kruskal_max_tree(&w).unwrap();
        assert_eq!(t.edge_vec(), vec![(0, 1), (0, 2)]);
        assert_eq!(w.total(&t), 5.0);
        let w = WeightedEdgeList::new(3, vec![(0, 1, 2.0), (0, 2, -1.0), (1, 2, -0.5)]).unwrap();
        assert_eq!(kruskal_max_forest(&w).edge_vec(), vec![(0, 1)]);
        let neg = WeightedEdgeList::from_weights(&EdgeLogWeights::constant(5, -1.0));
        assert_eq!(kruskal_max_forest(&neg).num_edges(), 0);
        let flat = WeightedEdgeList::from_weights(&EdgeLogWeights::constant(5, 1.0));
        assert_eq!(kruskal_max_tree(&flat).unwrap(), LabeledGraph::star(5, 0));
    }

    #[test]
    fn input_validation() {
        assert!(WeightedEdgeList::new(3, vec![(0, 1, 1.0), (1, 0, 2.0)]).is_err());
        assert!(WeightedEdgeList::new(3, vec![(0, 3, 1.0)]).is_err());
        assert!(kruskal_max_tree(&WeightedEdgeList::new(0, vec![]).unwrap()).is_err());
        let partial = WeightedEdgeList::new(3, vec![(0, 1, 1.0)]).unwrap();
        assert!(kruskal_max_tree(&partial).is_err());
        assert!(chow_liu_gaussian_weights(&Dataset::new(1, 2, vec![1.0, 2.0]).unwrap()).is_err());
        let flat = Dataset::new(3, 2, vec![1.0, 1.0, 2.0, 1.0, 3.0, 1.0]).unwrap();
        assert!(chow_liu_gaussian_weights(&flat).is_err());
    }

    #[test]
    fn tree_matches_exhaustive_max() {
        for p in 2..=6 {
            for seed in 0..10 {
                let w = random_weights(p, seed * 31 + p as u64);
                let best = enumerate_trees(p).unwrap().map(|t| w.total(&t)).fold(f64::NEG_INFINITY, f64::max);
                let got = w.total(&kruskal_max_tree(&w).unwrap());
                assert!((got - best).abs() < 1e-12, "p={p} seed={seed}");
            }
        }
    }

    #[test]
    fn forest_matches_exhaustive_max() {
        for p in 1..=6 {
            for seed in 0..10 {
                let w = random_weights(p, seed * 17 + p as u64);
                let best = enumerate_forests(p).unwrap().iter().map(|f| w.total(f)).fold(f64::NEG_INFINITY, f64::max);
                let got = w.total(&kruskal_max_forest(&w));
                assert!((got - best).abs() < 1e-12, "p={p} seed={seed}");
            }
        }
    }

    #[test]
    fn monotone_transform_invariance() {
        for seed in 0..100 {
            let w = random_weights(7, 1000 + seed);
            let items = w.items().iter().map(|&(u, v, x)| (u, v, 2.0 * x + 7.0)).collect();
            let w2 = WeightedEdgeList::new(7, items).unwrap();
            assert_eq!(kruskal_max_tree(&w).unwrap(), kruskal_max_tree(&w2).unwrap());
        }
    }

    #[test]
    fn gaussian_weights_behave() {
        let sigma = SymMatrix::identity(4);
        let d = sample_mvn(&sigma, 20_000, 5).unwrap();
        let w = chow_liu_gaussian_weights(&d).unwrap();
        assert!(w.items().iter().all(|&(_, _, x)| (0.0..1e-3).contains(&x)));
        let dup = Dataset::new(3, 2, vec![1.0, 2.0, 2.0, 4.0, 3.0, 6.0]).unwrap();
        let x = chow_liu_gaussian_weights(&dup).unwrap().items()[0].2;
        assert!((x - (-0.5 * 1e-12f64.ln())).abs() < 1e-3);
        assert!(x.is_finite());
    }

    #[test]
    fn map_with_no_data() {
        let m = HiwModel::new(HiwParams::default_for(5), SuffStats::new(0, SymMatrix::zeros(5)).unwrap()).unwrap();
        assert_eq!(map_forest(&m, &GraphPrior::Uniform).unwrap().num_edges(), 0);
        assert_eq!(map_tree(&m, &GraphPrior::Uniform).unwrap(), LabeledGraph::star(5, 0));
    }

    #[test]
    fn map_rejects_unfactored_priors() {
        let m = HiwModel::new(HiwParams::default_for(4), SuffStats::new(0, SymMatrix::zeros(4)).unwrap()).unwrap();
        assert!(map_forest(&m, &GraphPrior::hub(2, 1.0).unwrap()).is_err());
        assert!(map_tree(&m, &GraphPrior::MaxDegreeExp).is_err());
    }

    #[test]
    fn map_matches_exhaustive_posterior() {
        let priors = [GraphPrior::Uniform, GraphPrior::binomial(0.3).unwrap()];
        for p in 4..=6 {
            for seed in 0..8 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed + 100 * p as u64);
                let truth = crate::graph::prufer_decode(
                    &(0..p - 2).map(|_| rng.random_range(0..p)).collect::<Vec<_>>(),
                    p,
                )
                .unwrap();
                let m = model_for(&truth, 0.3, 15, seed);
                for pr in &priors {
                    let score = |g: &LabeledGraph| m.log_marginal_forest(g).unwrap() + pr.log_prior_unnorm(g);
                    let forests = enumerate_forests(p).unwrap();
                    let best = forests.iter().max_by(|a, b| score(a).total_cmp(&score(b))).unwrap();
                    let got = map_forest(&m, pr).unwrap();
                    assert!((score(&got) - score(best)).abs() < 1e-9, "p={p} seed={seed}");
                    let best_t = enumerate_trees(p).unwrap().max_by(|a, b| score(a).total_cmp(&score(b))).unwrap();
                    let got_t = map_tree(&m, pr).unwrap();
                    assert!((score(&got_t) - score(&best_t)).abs() < 1e-9);
                    if got.is_tree() {
                        assert_eq!(got, got_t);
                    }
                }
            }
        }
    }

    #[test]
    fn strong_signal_recovers_tree() {
        let truth = LabeledGraph::from_edges(6, [(0, 3), (1, 3), (1, 4), (2, 4), (2, 5)]).unwrap();
        // r = 0.6 is not positive definite on any 6-node tree; shift the diagonal instead
        let mut k0 = SymMatrix::identity(6);
        for (u, v) in truth.edges() {
            k0.set(u, v, -0.6);
        }
        let sigma = crate::numerics::cov_from_graph_eigshift(&truth, &k0, 0.1).unwrap();
        let data = center(&sample_mvn(&sigma, 500, 11).unwrap());
        let m = HiwModel::new(HiwParams::default_for(6), SuffStats::from_dataset(&data)).unwrap();
        assert!(cov_from_graph(&truth, 0.6).is_err());
        assert_eq!(map_forest(&m, &GraphPrior::Uniform).unwrap(), truth);
    }

    proptest! {
        #[test]
        fn forest_is_acyclic_and_positive(seed in 0u64..10_000, p in 1usize..12) {
            let w = random_weights(p, seed);
            let f = kruskal_max_forest(&w);
            prop_assert!(f.is_forest());
            prop_assert!(f.edges().all(|(u, v)| w.weight(u, v).unwrap() > 0.0));
            let t = kruskal_max_tree(&w).unwrap();
            prop_assert!(t.is_tree());
            prop_assert!(w.total(&t) <= w.total(&f) + 1e-12);
        }
    }
}
