//! Erdős–Rényi samplers, exhaustive cycle counting and the asymptotic
//! Poisson parameters for short cycles.

use std::collections::{BTreeMap, VecDeque};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{erdos_gallai_check, num_pairs, pair_from_index, DisjointSets, LabeledGraph};

/// Largest node count accepted by [`enumerate_cycles`].
pub const CYCLE_MAX_NODES: usize = 40;
/// Largest cycle-space dimension accepted by [`enumerate_cycles`].
pub const CYCLE_MAX_DIM: usize = 25;

pub fn sample_gnp_with<R: Rng + ?Sized>(n: usize, prob: f64, rng: &mut R) -> Result<LabeledGraph> {
    if !(0.0..=1.0).contains(&prob) {
        return Err(Error::invalid(format!("edge probability {prob} outside [0, 1]")));
    }
    let mut g = LabeledGraph::new(n);
    for v in 0..n {
        for u in 0..v {
            if rng.random::<f64>() < prob {
                g.add_edge(u, v)?;
            }
        }
    }
    Ok(g)
}

pub fn sample_gnp(n: usize, prob: f64, seed: u64) -> Result<LabeledGraph> {
    sample_gnp_with(n, prob, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn sample_gnm_with<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Result<LabeledGraph> {
    let total = num_pairs(n);
    if m > total {
        return Err(Error::invalid(format!("{m} edges requested but only {total} pairs exist")));
    }
    let mut g = LabeledGraph::new(n);
    for k in index::sample(rng, total, m) {
        let (u, v) = pair_from_index(k);
        g.add_edge(u, v)?;
    }
    Ok(g)
}

pub fn sample_gnm(n: usize, m: usize, seed: u64) -> Result<LabeledGraph> {
    sample_gnm_with(n, m, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Number of simple cycles of each length.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CycleCensus {
    pub counts: BTreeMap<usize, u64>,
}

impl CycleCensus {
    pub fn girth(&self) -> Option<usize> {
        self.counts.keys().next().copied()
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn get(&self, len: usize) -> u64 {
        self.counts.get(&len).copied().unwrap_or(0)
    }
}

/// All simple cycles, as ring sums of a fundamental cycle basis.
pub fn enumerate_cycles(g: &LabeledGraph) -> Result<CycleCensus> {
    let p = g.p();
    if p > CYCLE_MAX_NODES {
        return Err(Error::invalid(format!("cycle enumeration limited to {CYCLE_MAX_NODES} nodes")));
    }
    let edges = g.edge_vec();
    let dim = edges.len() + g.num_components() - p;
    if dim > CYCLE_MAX_DIM {
        return Err(Error::invalid(format!("cycle space dimension {dim} exceeds {CYCLE_MAX_DIM}")));
    }
    // at most 39 tree edges plus 25 chords, so edge sets fit one word
    let mut incident = vec![0u64; p];
    for (k, &(u, v)) in edges.iter().enumerate() {
        incident[u] |= 1 << k;
        incident[v] |= 1 << k;
    }
    let mut tree_adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); p];
    let mut chords = Vec::new();
    let mut ds = DisjointSets::new(p);
    for (k, &(u, v)) in edges.iter().enumerate() {
        if ds.union(u, v) {
            tree_adj[u].push((v, k));
            tree_adj[v].push((u, k));
        } else {
            chords.push(k);
        }
    }
    // path-to-root edge masks in the spanning forest
    let mut to_root = vec![0u64; p];
    let mut seen = vec![false; p];
    for r in 0..p {
        if seen[r] {
            continue;
        }
        seen[r] = true;
        let mut queue = VecDeque::from([r]);
        while let Some(u) = queue.pop_front() {
            for &(v, k) in &tree_adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    to_root[v] = to_root[u] | (1 << k);
                    queue.push_back(v);
                }
            }
        }
    }
    let basis: Vec<u64> = chords
        .iter()
        .map(|&k| {
            let (u, v) = edges[k];
            (to_root[u] ^ to_root[v]) | (1 << k)
        })
        .collect();
    let mut census = CycleCensus::default();
    let mut cur = 0u64;
    for i in 1u64..(1u64 << basis.len()) {
        cur ^= basis[i.trailing_zeros() as usize];
        if let Some(len) = simple_cycle_length(cur, &edges, &incident) {
            *census.counts.entry(len).or_insert(0) += 1;
        }
    }
    Ok(census)
}

/// Length of the edge set if it forms one simple cycle.
fn simple_cycle_length(set: u64, edges: &[(usize, usize)], incident: &[u64]) -> Option<usize> {
    let len = set.count_ones() as usize;
    for &inc in incident {
        let d = (set & inc).count_ones();
        if d != 0 && d != 2 {
            return None;
        }
    }
    // walk the cycle from one edge and check it uses every edge
    let first = set.trailing_zeros() as usize;
    let (start, mut cur) = edges[first];
    let mut used = 1u64 << first;
    let mut steps = 1;
    while cur != start {
        let next = set & incident[cur] & !used;
        let k = next.trailing_zeros() as usize;
        used |= 1 << k;
        let (a, b) = edges[k];
        cur = if a == cur { b } else { a };
        steps += 1;
    }
    (steps == len).then_some(len)
}

/// Shortest cycle length by breadth-first search from every node.
pub fn girth(g: &LabeledGraph) -> Option<usize> {
    let p = g.p();
    let mut best = usize::MAX;
    for s in 0..p {
        let mut dist = vec![usize::MAX; p];
        let mut par = vec![usize::MAX; p];
        dist[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &v in g.neighbors(u) {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    par[v] = u;
                    queue.push_back(v);
                } else if par[u] != v {
                    best = best.min(dist[u] + dist[v] + 1);
                }
            }
        }
    }
    (best != usize::MAX).then_some(best)
}

/// Random graph families with known asymptotic short-cycle counts.
#[derive(Clone, Debug, PartialEq)]
pub enum PoissonModel {
    /// `G(n, p)` with `p ~ c/n`.
    Gnp { c: f64 },
    /// `G(n, M)` with `M ~ cn`.
    Gnm { c: f64 },
    /// Uniform `d`-regular graphs.
    Regular { d: usize },
    /// Uniform graphs with a given degree sequence.
    DegreeSequence(Vec<usize>),
}

/// Asymptotic Poisson means `λ_i` for the requested cycle lengths.
pub fn poisson_params(model: &PoissonModel, lengths: &[usize]) -> Result<BTreeMap<usize, f64>> {
    if let Some(&l) = lengths.iter().find(|&&l| l < 3) {
        return Err(Error::invalid(format!("cycle length {l} is below 3")));
    }
    let base = match model {
        PoissonModel::Gnp { c } if *c > 0.0 => *c,
        PoissonModel::Gnm { c } if *c > 0.0 => 2.0 * c,
        PoissonModel::Regular { d } if *d >= 1 => *d as f64 - 1.0,
        PoissonModel::DegreeSequence(ds) => {
            let mut sorted = ds.clone();
            sorted.sort_unstable_by(|a, b| b.cmp(a));
            if !erdos_gallai_check(&sorted)? {
                return Err(Error::invalid("not a graphical degree sequence"));
            }
            let m = ds.iter().sum::<usize>() as f64 / 2.0;
            if m == 0.0 {
                return Err(Error::invalid("degree sequence has no edges"));
            }
            ds.iter().map(|&d| (d * d.saturating_sub(1) / 2) as f64).sum::<f64>() / m
        }
        _ => return Err(Error::invalid(format!("invalid model parameters {model:?}"))),
    };
    Ok(lengths.iter().map(|&i| (i, base.powi(i as i32) / (2.0 * i as f64))).collect())
}

/// Leading-order probability that a random `d`-regular graph has girth above `g`.
pub fn girth_tail_probability(d: usize, g: usize) -> f64 {
    let s: f64 = (3..=g).map(|r| (d as f64 - 1.0).powi(r as i32) / (2.0 * r as f64)).sum();
    (-s).exp()
}

/// Random graph model to sample from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SampleModel {
    Gnp { n: usize, prob: f64 },
    Gnm { n: usize, m: usize },
}

impl SampleModel {
    pub fn n(&self) -> usize {
        match *self {
            SampleModel::Gnp { n, .. } | SampleModel::Gnm { n, .. } => n,
        }
    }

    /// Matching asymptotic model with `c = np` or `c = M/n`.
    pub fn poisson_model(&self) -> PoissonModel {
        match *self {
            SampleModel::Gnp { n, prob } => PoissonModel::Gnp { c: n as f64 * prob },
            SampleModel::Gnm { n, m } => PoissonModel::Gnm { c: m as f64 / n as f64 },
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<LabeledGraph> {
        match *self {
            SampleModel::Gnp { n, prob } => sample_gnp_with(n, prob, rng),
            SampleModel::Gnm { n, m } => sample_gnm_with(n, m, rng),
        }
    }
}

/// Empirical mean and variance of the cycle count at one length.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CycleMoments {
    pub mean: f64,
    pub variance: f64,
}

/// Cycle counts averaged over `samples` draws; draw `i` uses stream `i` of the seeded generator.
pub fn monte_carlo_cycles(model: &SampleModel, samples: usize, seed: u64) -> Result<BTreeMap<usize, CycleMoments>> {
    if samples == 0 {
        return Err(Error::invalid("need at least one sample"));
    }
    let n = model.n();
    let mut sum = BTreeMap::new();
    let mut sum_sq = BTreeMap::new();
    for i in 0..samples {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let census = enumerate_cycles(&model.sample(&mut rng)?)?;
        for (&len, &c) in &census.counts {
            *sum.entry(len).or_insert(0.0) += c as f64;
            *sum_sq.entry(len).or_insert(0.0) += (c as f64) * (c as f64);
        }
    }
    let s = samples as f64;
    Ok((3..=n.max(2))
        .filter(|&l| l >= 3)
        .map(|l| {
            let m = sum.get(&l).copied().unwrap_or(0.0) / s;
            let q = sum_sq.get(&l).copied().unwrap_or(0.0) / s;
            (l, CycleMoments { mean: m, variance: (q - m * m).max(0.0) })
        })
        .collect())
}
