//! Undirected simple graphs on nodes `0..p`, structural predicates, Prüfer
//! codes and exhaustive enumeration of small trees and forests.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Disjoint-set forest with path compression and union by size.
#[derive(Clone, Debug)]
pub struct DisjointSets {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl DisjointSets {
    pub fn new(n: usize) -> Self {
        DisjointSets { parent: (0..n).collect(), size: vec![1; n] }
    }

    pub fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    /// Merges the sets of `a` and `b`; returns false if they were already one set.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }

    pub fn set_size(&mut self, x: usize) -> usize {
        let r = self.find(x);
        self.size[r]
    }
}

/// Position of the pair `(u, v)`, `u < v`, in the lower-triangle bit order.
#[inline]
pub fn pair_index(u: usize, v: usize) -> usize {
    debug_assert!(u < v);
    v * (v - 1) / 2 + u
}

/// Inverse of [`pair_index`].
pub fn pair_from_index(k: usize) -> (usize, usize) {
    let mut v = 1;
    while (v + 1) * v / 2 <= k {
        v += 1;
    }
    (k - v * (v - 1) / 2, v)
}

#[inline]
pub fn num_pairs(p: usize) -> usize {
    p * p.saturating_sub(1) / 2
}

/// Orders a pair so that the smaller node comes first.
#[inline]
pub fn ordered(u: usize, v: usize) -> (usize, usize) {
    if u < v {
        (u, v)
    } else {
        (v, u)
    }
}

/// Adjacency fingerprint over the `C(p,2)` lower-triangle positions.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitPattern {
    words: Vec<u64>,
}

impl BitPattern {
    pub fn zeros(p: usize) -> Self {
        BitPattern { words: vec![0; num_pairs(p).div_ceil(64).max(1)] }
    }

    pub fn get(&self, u: usize, v: usize) -> bool {
        let k = pair_index(u.min(v), u.max(v));
        self.words[k / 64] >> (k % 64) & 1 == 1
    }

    pub fn set(&mut self, u: usize, v: usize, on: bool) {
        let k = pair_index(u.min(v), u.max(v));
        if on {
            self.words[k / 64] |= 1 << (k % 64);
        } else {
            self.words[k / 64] &= !(1 << (k % 64));
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Hex string, most significant word first.
    pub fn to_hex(&self) -> String {
        let mut s = String::new();
        for w in self.words.iter().rev() {
            let _ = write!(s, "{w:016x}");
        }
        s
    }

    pub fn from_hex(p: usize, hex: &str) -> Result<Self> {
        let mut bp = BitPattern::zeros(p);
        let n = bp.words.len();
        if hex.len() != 16 * n {
            return Err(Error::Parse(format!("bit pattern for p={p} needs {} hex digits", 16 * n)));
        }
        for (i, chunk) in hex.as_bytes().chunks(16).enumerate() {
            let s = std::str::from_utf8(chunk).map_err(|e| Error::Parse(e.to_string()))?;
            bp.words[n - 1 - i] =
                u64::from_str_radix(s, 16).map_err(|e| Error::Parse(e.to_string()))?;
        }
        Ok(bp)
    }
}

/// The graph family a search or prior ranges over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GraphClass {
    Forest,
    Tree,
}

impl GraphClass {
    pub fn contains(self, g: &LabeledGraph) -> bool {
        match self {
            GraphClass::Forest => g.is_forest(),
            GraphClass::Tree => g.is_tree(),
        }
    }
}

/// Undirected simple graph on nodes `0..p`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LabeledGraph {
    adj: Vec<BTreeSet<usize>>,
    m: usize,
}

impl LabeledGraph {
    /// Empty graph on `p` nodes.
    pub fn new(p: usize) -> Self {
        LabeledGraph { adj: vec![BTreeSet::new(); p], m: 0 }
    }

    pub fn from_edges<I>(p: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut g = LabeledGraph::new(p);
        for (u, v) in edges {
            if !g.add_edge(u, v)? {
                return Err(Error::invalid(format!("duplicate edge ({u}, {v})")));
            }
        }
        Ok(g)
    }

    pub fn complete(p: usize) -> Self {
        let mut g = LabeledGraph::new(p);
        for v in 0..p {
            for u in 0..v {
                g.insert_unchecked(u, v);
            }
        }
        g
    }

    pub fn star(p: usize, center: usize) -> Self {
        let mut g = LabeledGraph::new(p);
        for v in (0..p).filter(|&v| v != center) {
            g.insert_unchecked(center, v);
        }
        g
    }

    /// Path `0-1-...-(p-1)`.
    pub fn chain(p: usize) -> Self {
        let mut g = LabeledGraph::new(p);
        for v in 1..p {
            g.insert_unchecked(v - 1, v);
        }
        g
    }

    pub fn from_bit_pattern(p: usize, bits: &BitPattern) -> Self {
        let mut g = LabeledGraph::new(p);
        for v in 0..p {
            for u in 0..v {
                if bits.get(u, v) {
                    g.insert_unchecked(u, v);
                }
            }
        }
        g
    }

    fn insert_unchecked(&mut self, u: usize, v: usize) {
        if self.adj[u].insert(v) {
            self.adj[v].insert(u);
            self.m += 1;
        }
    }

    pub fn p(&self) -> usize {
        self.adj.len()
    }

    pub fn num_edges(&self) -> usize {
        self.m
    }

    /// Adds `(u, v)`; returns false if it was already present.
    pub fn add_edge(&mut self, u: usize, v: usize) -> Result<bool> {
        let p = self.p();
        if u >= p || v >= p {
            return Err(Error::invalid(format!("edge ({u}, {v}) out of range for p={p}")));
        }
        if u == v {
            return Err(Error::invalid(format!("self-loop at node {u}")));
        }
        let fresh = !self.adj[u].contains(&v);
        self.insert_unchecked(u, v);
        Ok(fresh)
    }

    pub fn remove_edge(&mut self, u: usize, v: usize) -> bool {
        if u < self.p() && self.adj[u].remove(&v) {
            self.adj[v].remove(&u);
            self.m -= 1;
            true
        } else {
            false
        }
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.p() && self.adj[u].contains(&v)
    }

    pub fn neighbors(&self, v: usize) -> &BTreeSet<usize> {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adj.iter().map(|s| s.len()).collect()
    }

    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(|s| s.len()).max().unwrap_or(0)
    }

    /// Edges as `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(u, s)| s.range(u + 1..).map(move |&v| (u, v)))
    }

    pub fn edge_vec(&self) -> Vec<(usize, usize)> {
        self.edges().collect()
    }

    pub fn bit_pattern(&self) -> BitPattern {
        let mut bp = BitPattern::zeros(self.p());
        for (u, v) in self.edges() {
            bp.set(u, v, true);
        }
        bp
    }

    /// Component label per node (labels are the smallest node of each component).
    pub fn component_labels(&self) -> Vec<usize> {
        let p = self.p();
        let mut label = vec![usize::MAX; p];
        let mut stack = Vec::new();
        for s in 0..p {
            if label[s] != usize::MAX {
                continue;
            }
            label[s] = s;
            stack.push(s);
            while let Some(x) = stack.pop() {
                for &y in &self.adj[x] {
                    if label[y] == usize::MAX {
                        label[y] = s;
                        stack.push(y);
                    }
                }
            }
        }
        label
    }

    pub fn num_components(&self) -> usize {
        self.component_labels().iter().enumerate().filter(|&(v, &l)| v == l).count()
    }

    /// Acyclicity by incremental union of components.
    pub fn is_forest(&self) -> bool {
        let mut ds = DisjointSets::new(self.p());
        self.edges().all(|(u, v)| ds.union(u, v))
    }

    pub fn is_tree(&self) -> bool {
        self.p() >= 1 && self.m + 1 == self.p() && self.is_forest()
    }

    /// Subgraph induced by `nodes` is complete.
    pub fn is_clique(&self, nodes: &[usize]) -> bool {
        nodes
            .iter()
            .enumerate()
            .all(|(i, &a)| nodes[i + 1..].iter().all(|&b| self.has_edge(a, b)))
    }

    /// Text format: `p <count>` then one `u v` line per edge.
    pub fn to_text(&self) -> String {
        let mut s = format!("p {}\n", self.p());
        for (u, v) in self.edges() {
            let _ = writeln!(s, "{u} {v}");
        }
        s
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .enumerate()
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (_, header) = lines.next().ok_or_else(|| Error::Parse("empty graph file".into()))?;
        let mut it = header.split_whitespace();
        let p = match (it.next(), it.next(), it.next()) {
            (Some("p"), Some(n), None) => n
                .parse::<usize>()
                .map_err(|_| Error::Parse(format!("bad node count '{n}'")))?,
            _ => return Err(Error::Parse(format!("expected 'p <count>', got '{header}'"))),
        };
        let mut g = LabeledGraph::new(p);
        for (lineno, line) in lines {
            let nums: Vec<&str> = line.split_whitespace().collect();
            let parse = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| Error::Parse(format!("line {}: bad node '{s}'", lineno + 1)))
            };
            if nums.len() != 2 {
                return Err(Error::Parse(format!("line {}: expected 'u v'", lineno + 1)));
            }
            let (u, v) = (parse(nums[0])?, parse(nums[1])?);
            if !g.add_edge(u, v)? {
                return Err(Error::Parse(format!("line {}: duplicate edge", lineno + 1)));
            }
        }
        Ok(g)
    }
}

/// Decodes a Prüfer sequence into a tree on `p` nodes.
pub fn prufer_decode(seq: &[usize], p: usize) -> Result<LabeledGraph> {
    if p < 2 || seq.len() != p - 2 {
        return Err(Error::invalid(format!(
            "Prüfer sequence for p={p} must have length {}",
            p.saturating_sub(2)
        )));
    }
    if let Some(&bad) = seq.iter().find(|&&x| x >= p) {
        return Err(Error::invalid(format!("label {bad} out of range for p={p}")));
    }
    let mut remaining = vec![1usize; p];
    for &x in seq {
        remaining[x] += 1;
    }
    let mut leaves: BTreeSet<usize> = (0..p).filter(|&v| remaining[v] == 1).collect();
    let mut g = LabeledGraph::new(p);
    for &x in seq {
        let leaf = leaves.pop_first().expect("a leaf always exists");
        g.insert_unchecked(leaf, x);
        remaining[x] -= 1;
        if remaining[x] == 1 {
            leaves.insert(x);
        }
    }
    let a = leaves.pop_first().expect("two leaves remain");
    let b = leaves.pop_first().expect("two leaves remain");
    g.insert_unchecked(a, b);
    Ok(g)
}

/// Prüfer sequence of a tree: repeatedly strip the smallest leaf.
pub fn prufer_encode(t: &LabeledGraph) -> Result<Vec<usize>> {
    let p = t.p();
    if p < 2 || !t.is_tree() {
        return Err(Error::invalid("Prüfer encoding needs a tree with at least 2 nodes"));
    }
    let mut deg = t.degrees();
    let mut removed = vec![false; p];
    let mut leaves: BTreeSet<usize> = (0..p).filter(|&v| deg[v] == 1).collect();
    let mut seq = Vec::with_capacity(p - 2);
    for _ in 0..p - 2 {
        let leaf = leaves.pop_first().expect("a leaf always exists");
        removed[leaf] = true;
        let nb = *t.neighbors(leaf).iter().find(|&&x| !removed[x]).expect("leaf has a neighbour");
        seq.push(nb);
        deg[nb] -= 1;
        if deg[nb] == 1 {
            leaves.insert(nb);
        }
    }
    Ok(seq)
}

/// All `p^(p-2)` labelled trees, in lexicographic order of Prüfer code.
pub struct TreeIter {
    p: usize,
    seq: Vec<usize>,
    done: bool,
}

impl Iterator for TreeIter {
    type Item = LabeledGraph;

    fn next(&mut self) -> Option<LabeledGraph> {
        if self.done {
            return None;
        }
        let tree = prufer_decode(&self.seq, self.p).expect("valid sequence");
        // advance the mixed-radix counter
        let mut i = self.seq.len();
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            self.seq[i] += 1;
            if self.seq[i] < self.p {
                break;
            }
            self.seq[i] = 0;
        }
        Some(tree)
    }
}

pub fn enumerate_trees(p: usize) -> Result<TreeIter> {
    if !(2..=8).contains(&p) {
        return Err(Error::invalid(format!("tree enumeration needs 2 <= p <= 8, got {p}")));
    }
    Ok(TreeIter { p, seq: vec![0; p - 2], done: false })
}

/// All forests on `p` nodes. Edge subsets are visited in binary order with
/// branches that would close a cycle pruned.
pub fn enumerate_forests(p: usize) -> Result<Vec<LabeledGraph>> {
    if !(1..=6).contains(&p) {
        return Err(Error::invalid(format!("forest enumeration needs 1 <= p <= 6, got {p}")));
    }
    let pairs: Vec<(usize, usize)> = (0..num_pairs(p)).map(pair_from_index).collect();
    let mut out = Vec::new();
    let mut chosen = Vec::new();
    let mut comp: Vec<usize> = (0..p).collect();
    forest_rec(p, &pairs, 0, &mut comp, &mut chosen, &mut out);
    Ok(out)
}

fn forest_rec(
    p: usize,
    pairs: &[(usize, usize)],
    k: usize,
    comp: &mut Vec<usize>,
    chosen: &mut Vec<(usize, usize)>,
    out: &mut Vec<LabeledGraph>,
) {
    if k == pairs.len() {
        out.push(LabeledGraph::from_edges(p, chosen.iter().copied()).expect("valid edges"));
        return;
    }
    forest_rec(p, pairs, k + 1, comp, chosen, out);
    let (u, v) = pairs[k];
    let (cu, cv) = (comp[u], comp[v]);
    if cu != cv {
        let saved = comp.clone();
        for c in comp.iter_mut() {
            if *c == cv {
                *c = cu;
            }
        }
        chosen.push((u, v));
        forest_rec(p, pairs, k + 1, comp, chosen, out);
        chosen.pop();
        *comp = saved;
    }
}

/// Erdős–Gallai test for a non-increasing degree sequence.
pub fn erdos_gallai_check(degrees: &[usize]) -> Result<bool> {
    if degrees.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::invalid("degree sequence must be non-increasing"));
    }
    let total: usize = degrees.iter().sum();
    if total % 2 != 0 {
        return Ok(false);
    }
    let n = degrees.len();
    let mut left = 0usize;
    for k in 1..=n {
        left += degrees[k - 1];
        let right: usize = k * (k - 1) + degrees[k..].iter().map(|&d| d.min(k)).sum::<usize>();
        if left > right {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn g(p: usize, e: &[(usize, usize)]) -> LabeledGraph {
        LabeledGraph::from_edges(p, e.iter().copied()).unwrap()
    }

    #[test]
    fn forest_and_tree_predicates() {
        assert!(g(3, &[(0, 1), (1, 2)]).is_forest());
        assert!(!g(3, &[(0, 1), (1, 2), (0, 2)]).is_forest());
        assert!(LabeledGraph::new(4).is_forest());
        assert!(g(4, &[(0, 1), (0, 2), (0, 3)]).is_tree());
        assert!(!g(4, &[(0, 1), (2, 3)]).is_tree());
        assert!(LabeledGraph::new(1).is_tree());
    }

    #[test]
    fn rejects_bad_edges() {
        assert!(LabeledGraph::from_edges(3, [(0, 0)]).is_err());
        assert!(LabeledGraph::from_edges(3, [(0, 3)]).is_err());
        assert!(LabeledGraph::from_edges(3, [(0, 1), (1, 0)]).is_err());
    }

    #[test]
    fn prufer_examples() {
        assert_eq!(prufer_decode(&[0], 3).unwrap(), g(3, &[(0, 1), (0, 2)]));
        assert_eq!(prufer_decode(&[], 2).unwrap(), g(2, &[(0, 1)]));
        assert_eq!(prufer_encode(&g(3, &[(0, 1), (0, 2)])).unwrap(), vec![0]);
        assert_eq!(prufer_encode(&LabeledGraph::star(5, 0)).unwrap(), vec![0, 0, 0]);
        assert_eq!(prufer_encode(&LabeledGraph::chain(4)).unwrap(), vec![1, 2]);
        assert!(prufer_decode(&[0, 1], 3).is_err());
        assert!(prufer_decode(&[3], 3).is_err());
        assert!(prufer_encode(&g(3, &[(0, 1)])).is_err());
    }

    #[test]
    fn tree_counts_follow_cayley() {
        for p in 2..=7usize {
            let trees: Vec<_> = enumerate_trees(p).unwrap().collect();
            assert_eq!(trees.len(), p.pow(p as u32 - 2));
            assert!(trees.iter().all(LabeledGraph::is_tree));
            let distinct: HashSet<_> = trees.iter().map(|t| t.bit_pattern()).collect();
            assert_eq!(distinct.len(), trees.len());
            for t in &trees {
                assert_eq!(&prufer_decode(&prufer_encode(t).unwrap(), p).unwrap(), t);
            }
        }
        assert!(enumerate_trees(1).is_err());
        assert!(enumerate_trees(9).is_err());
    }

    #[test]
    fn forest_counts_match_subset_filter() {
        for p in 1..=6usize {
            let forests = enumerate_forests(p).unwrap();
            let np = num_pairs(p);
            let mut brute = 0;
            for mask in 0u64..(1 << np) {
                let mut h = LabeledGraph::new(p);
                for k in 0..np {
                    if mask >> k & 1 == 1 {
                        let (u, v) = pair_from_index(k);
                        h.add_edge(u, v).unwrap();
                    }
                }
                if h.is_forest() {
                    brute += 1;
                }
            }
            assert_eq!(forests.len(), brute, "p={p}");
            let distinct: HashSet<_> = forests.iter().map(|f| f.bit_pattern()).collect();
            assert_eq!(distinct.len(), forests.len());
        }
        assert_eq!(enumerate_forests(2).unwrap().len(), 2);
        assert_eq!(enumerate_forests(3).unwrap().len(), 7);
        assert_eq!(enumerate_forests(4).unwrap().len(), 38);
    }

    #[test]
    fn erdos_gallai_examples() {
        assert!(!erdos_gallai_check(&[2, 2, 0]).unwrap());
        assert!(erdos_gallai_check(&[1, 1]).unwrap());
        assert!(erdos_gallai_check(&[3, 3, 3, 3]).unwrap());
        assert!(erdos_gallai_check(&[0, 1]).is_err());
    }

    #[test]
    fn erdos_gallai_matches_exhaustive_search() {
        for p in 1..=5usize {
            let np = num_pairs(p);
            let mut graphic = HashSet::new();
            for mask in 0u64..(1 << np) {
                let mut d = vec![0usize; p];
                for k in 0..np {
                    if mask >> k & 1 == 1 {
                        let (u, v) = pair_from_index(k);
                        d[u] += 1;
                        d[v] += 1;
                    }
                }
                d.sort_unstable_by(|a, b| b.cmp(a));
                graphic.insert(d);
            }
            // every non-increasing sequence with entries < p
            let mut seq = vec![0usize; p];
            loop {
                if seq.windows(2).all(|w| w[0] >= w[1]) {
                    assert_eq!(erdos_gallai_check(&seq).unwrap(), graphic.contains(&seq), "{seq:?}");
                }
                let mut i = 0;
                while i < p && seq[i] == p - 1 {
                    seq[i] = 0;
                    i += 1;
                }
                if i == p {
                    break;
                }
                seq[i] += 1;
            }
        }
    }

    #[test]
    fn text_round_trip() {
        let t = g(4, &[(2, 3), (0, 1)]);
        let text = t.to_text();
        assert_eq!(text, "p 4\n0 1\n2 3\n");
        assert_eq!(LabeledGraph::parse_text(&text).unwrap(), t);
        let loose = "# comment\n\np 4\n3 2\n\n1 0\n";
        assert_eq!(LabeledGraph::parse_text(loose).unwrap(), t);
        assert!(LabeledGraph::parse_text("p 2\n0 5\n").is_err());
        assert!(LabeledGraph::parse_text("q 2\n").is_err());
    }

    #[test]
    fn bit_pattern_round_trip() {
        let t = LabeledGraph::star(12, 3);
        let bp = t.bit_pattern();
        assert_eq!(bp.count_ones(), 11);
        assert_eq!(LabeledGraph::from_bit_pattern(12, &bp), t);
        assert_eq!(BitPattern::from_hex(12, &bp.to_hex()).unwrap(), bp);
        for k in 0..200 {
            let (u, v) = pair_from_index(k);
            assert!(u < v);
            assert_eq!(pair_index(u, v), k);
        }
    }

    fn arb_tree() -> impl Strategy<Value = LabeledGraph> {
        (3usize..=7).prop_flat_map(|p| {
            proptest::collection::vec(0..p, p - 2).prop_map(move |s| prufer_decode(&s, p).unwrap())
        })
    }

    proptest! {
        #[test]
        fn tree_is_forest_with_p_minus_one_edges(t in arb_tree()) {
            prop_assert!(t.is_forest());
            prop_assert_eq!(t.num_edges(), t.p() - 1);
            prop_assert_eq!(t.num_components(), 1);
        }

        #[test]
        fn removing_a_tree_edge_disconnects(t in arb_tree(), k in 0usize..100) {
            let edges = t.edge_vec();
            let (u, v) = edges[k % edges.len()];
            let mut h = t.clone();
            h.remove_edge(u, v);
            prop_assert!(h.is_forest());
            prop_assert!(!h.is_tree());
            prop_assert_eq!(h.num_components(), 2);
        }
    }
}
