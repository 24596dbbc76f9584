//! Graph priors: uniform, binomial, size-based, hub-encouraging,
//! max-degree-exponential and factored.

use crate::error::{Error, Result};
use crate::graph::{num_pairs, GraphClass, LabeledGraph};
use crate::hiw::EdgeLogWeights;

/// Largest node count for which size-based priors are supported.
pub const SIZE_BASED_MAX_P: usize = 7;

#[derive(Clone, Debug)]
pub enum GraphPrior {
    Uniform,
    Binomial { beta: f64 },
    /// Uniform over sizes, then uniform among graphs of the class with that size.
    SizeBased { class: GraphClass, p: usize, log_counts: Vec<f64> },
    /// Mass `psi + sum_v max(0, deg(v) - chi)`.
    HubEncouraging { chi: usize, psi: f64 },
    /// Log mass equal to the maximum degree.
    MaxDegreeExp,
    Factored(EdgeLogWeights),
}

impl GraphPrior {
    pub fn binomial(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::invalid(format!("binomial prior needs 0 < beta < 1, got {beta}")));
        }
        Ok(GraphPrior::Binomial { beta })
    }

    pub fn hub(chi: usize, psi: f64) -> Result<Self> {
        if chi < 1 {
            return Err(Error::invalid("hub prior needs chi >= 1"));
        }
        if !(psi > 0.0 && psi.is_finite()) {
            return Err(Error::invalid(format!("hub prior needs psi > 0, got {psi}")));
        }
        Ok(GraphPrior::HubEncouraging { chi, psi })
    }

    /// Default hub threshold `chi = round(0.9 p)`, at least 1.
    pub fn hub_default_chi(p: usize) -> usize {
        ((0.9 * p as f64).round() as usize).max(1)
    }

    pub fn size_based(class: GraphClass, p: usize) -> Result<Self> {
        if p == 0 || p > SIZE_BASED_MAX_P {
            return Err(Error::invalid(format!(
                "size-based prior supported for 1 <= p <= {SIZE_BASED_MAX_P}, got {p}"
            )));
        }
        let counts = size_counts(class, p);
        let log_counts = counts
            .iter()
            .map(|&c| if c == 0 { f64::NEG_INFINITY } else { (c as f64).ln() })
            .collect();
        Ok(GraphPrior::SizeBased { class, p, log_counts })
    }

    pub fn factored(w: EdgeLogWeights) -> Self {
        GraphPrior::Factored(w)
    }

    /// Log unnormalized prior mass of `g`.
    pub fn log_prior_unnorm(&self, g: &LabeledGraph) -> f64 {
        match self {
            GraphPrior::Uniform => 0.0,
            GraphPrior::Binomial { beta } => {
                let m = g.num_edges() as f64;
                let total = num_pairs(g.p()) as f64;
                m * beta.ln() + (total - m) * (1.0 - beta).ln()
            }
            GraphPrior::SizeBased { class, p, log_counts } => {
                if g.p() != *p || !class.contains(g) {
                    return f64::NEG_INFINITY;
                }
                -log_counts[g.num_edges()]
            }
            GraphPrior::HubEncouraging { chi, psi } => {
                let excess: usize = g.degrees().iter().map(|&d| d.saturating_sub(*chi)).sum();
                (psi + excess as f64).ln()
            }
            GraphPrior::MaxDegreeExp => g.max_degree() as f64,
            GraphPrior::Factored(w) => w.total(g),
        }
    }

    /// `log p(g_new) - log p(g_old)`.
    pub fn log_prior_ratio(&self, g_new: &LabeledGraph, g_old: &LabeledGraph) -> Result<f64> {
        if g_new.p() != g_old.p() {
            return Err(Error::invalid(format!(
                "prior ratio between graphs on {} and {} nodes",
                g_new.p(),
                g_old.p()
            )));
        }
        match self {
            GraphPrior::Uniform => Ok(0.0),
            GraphPrior::Binomial { beta } => {
                let dm = g_new.num_edges() as f64 - g_old.num_edges() as f64;
                Ok(dm * (beta.ln() - (1.0 - beta).ln()))
            }
            GraphPrior::Factored(w) => {
                let mut r = 0.0;
                for (u, v) in g_new.edges() {
                    if !g_old.has_edge(u, v) {
                        r += w.get(u, v);
                    }
                }
                for (u, v) in g_old.edges() {
                    if !g_new.has_edge(u, v) {
                        r -= w.get(u, v);
                    }
                }
                Ok(r)
            }
            _ => Ok(self.log_prior_unnorm(g_new) - self.log_prior_unnorm(g_old)),
        }
    }

    /// Per-edge log weights when the prior factorizes over edges.
    pub fn is_factored(&self, p: usize) -> Option<EdgeLogWeights> {
        match self {
            GraphPrior::Uniform => Some(EdgeLogWeights::zeros(p)),
            GraphPrior::Binomial { beta } => {
                Some(EdgeLogWeights::constant(p, beta.ln() - (1.0 - beta).ln()))
            }
            GraphPrior::Factored(w) => Some(w.clone()),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            GraphPrior::Uniform => "uniform",
            GraphPrior::Binomial { .. } => "binomial",
            GraphPrior::SizeBased { .. } => "size",
            GraphPrior::HubEncouraging { .. } => "hub",
            GraphPrior::MaxDegreeExp => "maxdeg",
            GraphPrior::Factored(_) => "factored",
        }
    }
}

/// Number of graphs of the class on `p` nodes with each edge count `0..=C(p,2)`.
pub fn size_counts(class: GraphClass, p: usize) -> Vec<u64> {
    let mut counts = vec![0u64; num_pairs(p) + 1];
    match class {
        GraphClass::Tree => {
            counts[p.saturating_sub(1)] = if p <= 2 { 1 } else { (p as u64).pow(p as u32 - 2) };
        }
        GraphClass::Forest => {
            let pairs: Vec<(usize, usize)> =
                (0..p).flat_map(|v| (0..v).map(move |u| (u, v))).collect();
            let comp: Vec<usize> = (0..p).collect();
            count_forests(&pairs, 0, comp, 0, &mut counts);
        }
    }
    counts
}

fn count_forests(pairs: &[(usize, usize)], k: usize, comp: Vec<usize>, m: usize, out: &mut [u64]) {
    if k == pairs.len() {
        out[m] += 1;
        return;
    }
    let (u, v) = pairs[k];
    let (cu, cv) = (comp[u], comp[v]);
    if cu != cv {
        let merged: Vec<usize> = comp.iter().map(|&c| if c == cv { cu } else { c }).collect();
        count_forests(pairs, k + 1, merged, m + 1, out);
    }
    count_forests(pairs, k + 1, comp, m, out);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{enumerate_forests, enumerate_trees};
    use proptest::prelude::*;

    #[test]
    fn binomial_half_is_constant() {
        let pr = GraphPrior::binomial(0.5).unwrap();
        let want = 45.0 * 0.5f64.ln();
        for g in [LabeledGraph::new(10), LabeledGraph::chain(10), LabeledGraph::star(10, 3)] {
            assert!((pr.log_prior_unnorm(&g) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn hub_examples() {
        let pr = GraphPrior::hub(5, 1.0).unwrap();
        assert!((pr.log_prior_unnorm(&LabeledGraph::star(10, 0)) - 5f64.ln()).abs() < 1e-15);
        assert_eq!(pr.log_prior_unnorm(&LabeledGraph::chain(10)), 0.0);
    }

    #[test]
    fn constructor_guards() {
        assert!(GraphPrior::binomial(0.0).is_err());
        assert!(GraphPrior::binomial(1.0).is_err());
        assert!(GraphPrior::hub(0, 1.0).is_err());
        assert!(GraphPrior::hub(2, 0.0).is_err());
        assert!(GraphPrior::size_based(GraphClass::Forest, 8).is_err());
        assert!(GraphPrior::size_based(GraphClass::Tree, 7).is_ok());
    }

    #[test]
    fn ratio_examples() {
        let g = LabeledGraph::chain(5);
        let mut h = g.clone();
        h.add_edge(0, 4).unwrap();
        assert_eq!(GraphPrior::Uniform.log_prior_ratio(&h, &g).unwrap(), 0.0);
        let b = GraphPrior::binomial(0.2).unwrap();
        let r = b.log_prior_ratio(&h, &g).unwrap();
        assert!((r - (0.2f64.ln() - 0.8f64.ln())).abs() < 1e-14);
        let w = EdgeLogWeights::from_fn(5, |u, v| (u * 7 + v) as f64 * 0.1);
        let f = GraphPrior::factored(w.clone());
        let mut moved = g.clone();
        moved.remove_edge(1, 2);
        moved.add_edge(0, 3).unwrap();
        let r = f.log_prior_ratio(&moved, &g).unwrap();
        assert!((r - (w.get(0, 3) - w.get(1, 2))).abs() < 1e-14);
        assert!(f.log_prior_ratio(&g, &LabeledGraph::new(4)).is_err());
    }

    #[test]
    fn factored_forms() {
        let z = GraphPrior::Uniform.is_factored(4).unwrap();
        assert!((0..4).all(|v| (0..v).all(|u| z.get(u, v) == 0.0)));
        let b = GraphPrior::binomial(0.25).unwrap().is_factored(4).unwrap();
        assert!((b.get(1, 3) - (1.0f64 / 3.0).ln()).abs() < 1e-15);
        assert!(GraphPrior::hub(2, 1.0).unwrap().is_factored(4).is_none());
        assert!(GraphPrior::MaxDegreeExp.is_factored(4).is_none());
        assert!(GraphPrior::size_based(GraphClass::Forest, 4).unwrap().is_factored(4).is_none());
    }

    #[test]
    fn forest_size_counts_match_enumeration() {
        for p in 1..=6 {
            let counts = size_counts(GraphClass::Forest, p);
            let mut want = vec![0u64; counts.len()];
            for f in enumerate_forests(p).unwrap() {
                want[f.num_edges()] += 1;
            }
            assert_eq!(counts, want, "p={p}");
        }
        // total labeled forests on 7 nodes
        assert_eq!(size_counts(GraphClass::Forest, 7).iter().sum::<u64>(), 36_961);
    }

    #[test]
    fn size_based_mass_uniform_over_sizes() {
        let pr = GraphPrior::size_based(GraphClass::Forest, 5).unwrap();
        let mut per_size = vec![0.0; 11];
        for f in enumerate_forests(5).unwrap() {
            per_size[f.num_edges()] += pr.log_prior_unnorm(&f).exp();
        }
        for m in 0..=4 {
            assert!((per_size[m] - 1.0).abs() < 1e-12);
        }
        assert_eq!(pr.log_prior_unnorm(&LabeledGraph::complete(5)), f64::NEG_INFINITY);
    }

    #[test]
    fn hub_range_over_trees_p7() {
        let (chi, psi) = (3, 0.5);
        let pr = GraphPrior::hub(chi, psi).unwrap();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for t in enumerate_trees(7).unwrap() {
            let m = pr.log_prior_unnorm(&t).exp();
            lo = lo.min(m);
            hi = hi.max(m);
        }
        assert!((lo - psi).abs() < 1e-12);
        assert!((hi - (psi + 3.0)).abs() < 1e-12);
    }

    #[test]
    fn hub_graphs_outrank_hub_free_p6() {
        let chi = 3;
        let pr = GraphPrior::hub(chi, 2.0).unwrap();
        let mut with_hub = f64::INFINITY;
        let mut without = f64::NEG_INFINITY;
        for f in enumerate_forests(6).unwrap() {
            let m = pr.log_prior_unnorm(&f);
            if f.max_degree() > chi {
                with_hub = with_hub.min(m);
            } else {
                without = without.max(m);
            }
        }
        assert!(with_hub > without);
    }

    fn graph_strategy(p: usize) -> impl Strategy<Value = LabeledGraph> {
        proptest::collection::vec(any::<bool>(), num_pairs(p)).prop_map(move |bits| {
            let mut g = LabeledGraph::new(p);
            let mut k = 0;
            for v in 0..p {
                for u in 0..v {
                    if bits[k] {
                        g.add_edge(u, v).unwrap();
                    }
                    k += 1;
                }
            }
            g
        })
    }

    proptest! {
        #[test]
        fn ratio_antisymmetric(a in graph_strategy(6), b in graph_strategy(6), seed in 0u64..1000) {
            let w = EdgeLogWeights::from_fn(6, |u, v| ((u * 31 + v * 17 + seed as usize) % 13) as f64 * 0.37 - 2.0);
            let priors = [
                GraphPrior::Uniform,
                GraphPrior::binomial(0.3).unwrap(),
                GraphPrior::hub(2, 1.5).unwrap(),
                GraphPrior::MaxDegreeExp,
                GraphPrior::factored(w),
            ];
            for pr in &priors {
                prop_assert_eq!(pr.log_prior_ratio(&a, &a).unwrap(), 0.0);
                let ab = pr.log_prior_ratio(&a, &b).unwrap();
                let ba = pr.log_prior_ratio(&b, &a).unwrap();
                prop_assert!((ab + ba).abs() < 1e-12);
                let full = pr.log_prior_unnorm(&a) - pr.log_prior_unnorm(&b);
                prop_assert!((ab - full).abs() < 1e-12);
            }
        }
    }
}
