//! Triangulation by elimination, recursive thinning of fill edges,
//! decomposability testing and clique/separator extraction.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::graph::{num_pairs, ordered, pair_from_index, LabeledGraph};

/// A graph plus fill edges whose union is chordal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Triangulation {
    base: LabeledGraph,
    fill: BTreeSet<(usize, usize)>,
}

impl Triangulation {
    pub fn new(base: LabeledGraph, fill: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let fill: BTreeSet<_> = fill.into_iter().map(|(u, v)| ordered(u, v)).collect();
        for &(u, v) in &fill {
            if u == v || v >= base.p() {
                return Err(Error::invalid(format!("fill edge ({u}, {v}) is not a valid pair")));
            }
            if base.has_edge(u, v) {
                return Err(Error::invalid(format!("fill edge ({u}, {v}) is already in the graph")));
            }
        }
        let t = Triangulation { base, fill };
        if !mcs_is_decomposable(&t.graph()) {
            return Err(Error::invalid("graph plus fill is not chordal"));
        }
        Ok(t)
    }

    pub fn base(&self) -> &LabeledGraph {
        &self.base
    }

    pub fn fill(&self) -> &BTreeSet<(usize, usize)> {
        &self.fill
    }

    /// The triangulated graph `(V, E ∪ T)`.
    pub fn graph(&self) -> LabeledGraph {
        let mut g = self.base.clone();
        for &(u, v) in &self.fill {
            g.add_edge(u, v).expect("fill pairs are valid");
        }
        g
    }

    /// Every remaining fill edge is individually non-removable.
    pub fn is_minimal(&self) -> bool {
        let g = self.graph();
        self.fill.iter().all(|&(u, v)| {
            let mut h = g.clone();
            h.remove_edge(u, v);
            !mcs_is_decomposable(&h)
        })
    }
}

/// Elimination game: eliminating a node makes its remaining neighbours a clique.
pub fn eliminate(g: &LabeledGraph, ordering: &[usize]) -> Result<Triangulation> {
    let p = g.p();
    check_permutation(ordering, p)?;
    let mut work = g.clone();
    let mut gone = vec![false; p];
    let mut fill = BTreeSet::new();
    for &x in ordering {
        let nb: Vec<usize> = work.neighbors(x).iter().copied().filter(|&y| !gone[y]).collect();
        for (i, &a) in nb.iter().enumerate() {
            for &b in &nb[i + 1..] {
                if work.add_edge(a, b)? {
                    fill.insert(ordered(a, b));
                }
            }
        }
        gone[x] = true;
    }
    Ok(Triangulation { base: g.clone(), fill })
}

fn check_permutation(ordering: &[usize], p: usize) -> Result<()> {
    let mut seen = vec![false; p];
    if ordering.len() != p {
        return Err(Error::invalid("ordering must list every node once"));
    }
    for &x in ordering {
        if x >= p || std::mem::replace(&mut seen[x], true) {
            return Err(Error::invalid("ordering must be a permutation of the nodes"));
        }
    }
    Ok(())
}

/// Greedy minimum-degree ordering on the elimination graph; ties go to the
/// lowest index.
pub fn min_degree_ordering(g: &LabeledGraph) -> Vec<usize> {
    let p = g.p();
    let mut work = g.clone();
    let mut gone = vec![false; p];
    let mut order = Vec::with_capacity(p);
    for _ in 0..p {
        let x = (0..p)
            .filter(|&v| !gone[v])
            .min_by_key(|&v| (work.neighbors(v).iter().filter(|&&y| !gone[y]).count(), v))
            .expect("a node remains");
        let nb: Vec<usize> = work.neighbors(x).iter().copied().filter(|&y| !gone[y]).collect();
        for (i, &a) in nb.iter().enumerate() {
            for &b in &nb[i + 1..] {
                let _ = work.add_edge(a, b);
            }
        }
        gone[x] = true;
        order.push(x);
    }
    order
}

/// What one pass of a thinning algorithm checked and removed.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ThinRun {
    pub checked: Vec<(usize, usize)>,
    pub removed: Vec<(usize, usize)>,
}

/// Fill edge `(x, y)` can go iff the common neighbourhood is complete.
fn removable(g: &LabeledGraph, x: usize, y: usize) -> bool {
    let common: Vec<usize> = g.neighbors(x).intersection(g.neighbors(y)).copied().collect();
    g.is_clique(&common)
}

pub fn recursive_thin_ii(t: &Triangulation) -> Triangulation {
    recursive_thin_ii_traced(t).0
}

/// Checks every remaining fill edge on every run until a run removes nothing.
pub fn recursive_thin_ii_traced(t: &Triangulation) -> (Triangulation, Vec<ThinRun>) {
    let mut g = t.graph();
    let mut fill = t.fill.clone();
    let mut runs = Vec::new();
    loop {
        let mut run = ThinRun::default();
        let order: Vec<_> = fill.iter().copied().collect();
        for (x, y) in order {
            run.checked.push((x, y));
            if removable(&g, x, y) {
                g.remove_edge(x, y);
                fill.remove(&(x, y));
                run.removed.push((x, y));
            }
        }
        let done = run.removed.is_empty();
        runs.push(run);
        if done {
            break;
        }
    }
    (Triangulation { base: t.base.clone(), fill }, runs)
}

pub fn recursive_thin_iii(t: &Triangulation) -> Triangulation {
    recursive_thin_iii_traced(t).0
}

/// Only re-checks fill edges touching a node whose edge was removed on the
/// previous run.
pub fn recursive_thin_iii_traced(t: &Triangulation) -> (Triangulation, Vec<ThinRun>) {
    let mut g = t.graph();
    let mut fill = t.fill.clone();
    let mut candidates: Vec<_> = fill.iter().copied().collect();
    let mut runs = Vec::new();
    loop {
        let mut run = ThinRun::default();
        let mut touched = BTreeSet::new();
        for &(x, y) in &candidates {
            run.checked.push((x, y));
            if removable(&g, x, y) {
                g.remove_edge(x, y);
                fill.remove(&(x, y));
                run.removed.push((x, y));
                touched.insert(x);
                touched.insert(y);
            }
        }
        candidates = fill
            .iter()
            .copied()
            .filter(|(x, y)| touched.contains(x) || touched.contains(y))
            .collect();
        runs.push(run);
        if touched.is_empty() {
            break;
        }
    }
    (Triangulation { base: t.base.clone(), fill }, runs)
}

/// Maximum cardinality search visit order (ties to the lowest index) together
/// with the number of already-visited neighbours of each node when visited.
fn mcs_order(g: &LabeledGraph) -> (Vec<usize>, Vec<usize>) {
    let p = g.p();
    let mut weight = vec![0usize; p];
    let mut visited = vec![false; p];
    let mut order = Vec::with_capacity(p);
    let mut card = Vec::with_capacity(p);
    for _ in 0..p {
        let mut best = usize::MAX;
        for v in 0..p {
            if !visited[v] && (best == usize::MAX || weight[v] > weight[best]) {
                best = v;
            }
        }
        visited[best] = true;
        order.push(best);
        card.push(weight[best]);
        for &w in g.neighbors(best) {
            if !visited[w] {
                weight[w] += 1;
            }
        }
    }
    (order, card)
}

/// Chordality test: maximum cardinality search followed by the zero-fill check.
pub fn mcs_is_decomposable(g: &LabeledGraph) -> bool {
    let p = g.p();
    let (order, _) = mcs_order(g);
    let mut pos = vec![0usize; p];
    for (i, &v) in order.iter().enumerate() {
        pos[v] = i;
    }
    for &v in &order {
        let earlier: Vec<usize> = g.neighbors(v).iter().copied().filter(|&u| pos[u] < pos[v]).collect();
        if let Some(&parent) = earlier.iter().max_by_key(|&&u| pos[u]) {
            if earlier.iter().any(|&u| u != parent && !g.has_edge(u, parent)) {
                return false;
            }
        }
    }
    true
}

/// Same test on bitmask adjacency (`p <= 64`), used for exhaustive counting.
fn chordal_masks(adj: &[u64]) -> bool {
    let p = adj.len();
    let mut weight = [0u32; 64];
    let mut pos = [0usize; 64];
    let mut visited = 0u64;
    for i in 0..p {
        let mut best = usize::MAX;
        for v in 0..p {
            if visited >> v & 1 == 0 && (best == usize::MAX || weight[v] > weight[best]) {
                best = v;
            }
        }
        let earlier = adj[best] & visited;
        if earlier != 0 {
            let mut parent = 0;
            let mut last = 0;
            let mut bits = earlier;
            while bits != 0 {
                let u = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                if pos[u] >= last {
                    last = pos[u];
                    parent = u;
                }
            }
            let rest = earlier & !(1u64 << parent);
            if rest & !adj[parent] != 0 {
                return false;
            }
        }
        visited |= 1 << best;
        pos[best] = i;
        let mut nb = adj[best] & !visited;
        while nb != 0 {
            let w = nb.trailing_zeros() as usize;
            nb &= nb - 1;
            weight[w] += 1;
        }
    }
    true
}

/// Cliques in perfect-sequence order and separators with multiplicity.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CliqueSeparatorDecomposition {
    pub cliques: Vec<Vec<usize>>,
    pub separators: Vec<Vec<usize>>,
}

pub fn clique_separator_decomposition(g: &LabeledGraph) -> Result<CliqueSeparatorDecomposition> {
    if !mcs_is_decomposable(g) {
        return Err(Error::invalid("graph is not decomposable"));
    }
    let p = g.p();
    let (order, card) = mcs_order(g);
    let mut visited = vec![false; p];
    let mut cliques: Vec<Vec<usize>> = Vec::new();
    let mut separators = Vec::new();
    for (i, &v) in order.iter().enumerate() {
        let earlier: Vec<usize> = g.neighbors(v).iter().copied().filter(|&u| visited[u]).collect();
        if i == 0 {
            cliques.push(vec![v]);
        } else if card[i] <= card[i - 1] {
            let mut c = earlier.clone();
            separators.push(earlier);
            c.push(v);
            cliques.push(c);
        } else {
            cliques.last_mut().expect("a clique is open").push(v);
        }
        visited[v] = true;
    }
    for c in cliques.iter_mut().chain(separators.iter_mut()) {
        c.sort_unstable();
    }
    Ok(CliqueSeparatorDecomposition { cliques, separators })
}

/// Number of labelled decomposable graphs on `n` nodes, by exhaustive scan.
pub fn count_decomposable(n: usize) -> Result<u64> {
    if !(1..=7).contains(&n) {
        return Err(Error::invalid(format!("count_decomposable needs 1 <= n <= 7, got {n}")));
    }
    let np = num_pairs(n);
    let pairs: Vec<(usize, usize)> = (0..np).map(pair_from_index).collect();
    let mut count = 0u64;
    let mut adj = vec![0u64; n];
    for mask in 0u64..(1u64 << np) {
        adj.iter_mut().for_each(|a| *a = 0);
        let mut bits = mask;
        while bits != 0 {
            let k = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            let (u, v) = pairs[k];
            adj[u] |= 1 << v;
            adj[v] |= 1 << u;
        }
        if chordal_masks(&adj) {
            count += 1;
        }
    }
    Ok(count)
}
