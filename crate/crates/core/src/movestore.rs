//! Stores for rooted forests and trees that keep the set of legal moves
//! current, and proposal systems for tree edge-moves.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{num_pairs, ordered, pair_from_index, pair_index, BitPattern, LabeledGraph};

const ABSENT: usize = usize::MAX;

/// Set of pair indices with O(1) insert, remove and random access.
#[derive(Clone, Debug)]
struct IndexedSet {
    items: Vec<usize>,
    pos: Vec<usize>,
}

impl IndexedSet {
    fn new(universe: usize) -> Self {
        IndexedSet { items: Vec::new(), pos: vec![ABSENT; universe] }
    }

    fn contains(&self, k: usize) -> bool {
        self.pos[k] != ABSENT
    }

    fn insert(&mut self, k: usize) {
        if self.pos[k] == ABSENT {
            self.pos[k] = self.items.len();
            self.items.push(k);
        }
    }

    fn remove(&mut self, k: usize) {
        let i = self.pos[k];
        if i == ABSENT {
            return;
        }
        let last = *self.items.last().expect("non-empty");
        self.items.swap_remove(i);
        if last != k {
            self.pos[last] = i;
        }
        self.pos[k] = ABSENT;
    }

    fn len(&self) -> usize {
        self.items.len()
    }

    fn sorted_pairs(&self) -> Vec<(usize, usize)> {
        let mut v: Vec<(usize, usize)> = self.items.iter().map(|&k| pair_from_index(k)).collect();
        v.sort_unstable();
        v
    }
}

/// Which of the three parts a pair of nodes belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairState {
    Existing,
    Addable,
    NonAddable,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ForestMove {
    Add(usize, usize),
    Remove(usize, usize),
}

/// Rooted forest with node and pair partitions.
#[derive(Clone, Debug)]
pub struct ForestStore {
    graph: LabeledGraph,
    bits: BitPattern,
    parent: Vec<Option<usize>>,
    children: Vec<BTreeSet<usize>>,
    node_part: Vec<usize>,
    part_nodes: HashMap<usize, BTreeSet<usize>>,
    next_label: usize,
    existing: IndexedSet,
    addable: IndexedSet,
    nonaddable: IndexedSet,
}

impl ForestStore {
    /// Roots each component at its smallest node by breadth-first search.
    pub fn init(g: &LabeledGraph) -> Result<Self> {
        let p = g.p();
        let mut parent = vec![None; p];
        let mut children = vec![BTreeSet::new(); p];
        let mut node_part = vec![ABSENT; p];
        let mut part_nodes = HashMap::new();
        let mut label = 0;
        for root in 0..p {
            if node_part[root] != ABSENT {
                continue;
            }
            let mut members = BTreeSet::new();
            let mut queue = VecDeque::from([root]);
            node_part[root] = label;
            members.insert(root);
            while let Some(u) = queue.pop_front() {
                for &v in g.neighbors(u) {
                    if Some(v) == parent[u] {
                        continue;
                    }
                    if node_part[v] != ABSENT {
                        return Err(Error::invalid("graph has a cycle, it is not a forest"));
                    }
                    node_part[v] = label;
                    members.insert(v);
                    parent[v] = Some(u);
                    children[u].insert(v);
                    queue.push_back(v);
                }
            }
            part_nodes.insert(label, members);
            label += 1;
        }
        let np = num_pairs(p);
        let mut store = ForestStore {
            graph: g.clone(),
            bits: g.bit_pattern(),
            parent,
            children,
            node_part,
            part_nodes,
            next_label: label,
            existing: IndexedSet::new(np),
            addable: IndexedSet::new(np),
            nonaddable: IndexedSet::new(np),
        };
        for v in 0..p {
            for u in 0..v {
                let k = pair_index(u, v);
                if g.has_edge(u, v) {
                    store.existing.insert(k);
                } else if store.node_part[u] != store.node_part[v] {
                    store.addable.insert(k);
                } else {
                    store.nonaddable.insert(k);
                }
            }
        }
        Ok(store)
    }

    pub fn p(&self) -> usize {
        self.graph.p()
    }

    pub fn graph(&self) -> &LabeledGraph {
        &self.graph
    }

    pub fn bits(&self) -> &BitPattern {
        &self.bits
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        self.parent[v]
    }

    pub fn children(&self, v: usize) -> &BTreeSet<usize> {
        &self.children[v]
    }

    pub fn num_existing(&self) -> usize {
        self.existing.len()
    }

    pub fn num_addable(&self) -> usize {
        self.addable.len()
    }

    pub fn num_nonaddable(&self) -> usize {
        self.nonaddable.len()
    }

    pub fn existing(&self) -> Vec<(usize, usize)> {
        self.existing.sorted_pairs()
    }

    pub fn addable(&self) -> Vec<(usize, usize)> {
        self.addable.sorted_pairs()
    }

    pub fn nonaddable(&self) -> Vec<(usize, usize)> {
        self.nonaddable.sorted_pairs()
    }

    pub fn pair_state(&self, u: usize, v: usize) -> PairState {
        let (a, b) = ordered(u, v);
        let k = pair_index(a, b);
        if self.existing.contains(k) {
            PairState::Existing
        } else if self.addable.contains(k) {
            PairState::Addable
        } else {
            PairState::NonAddable
        }
    }

    pub fn part_label(&self, v: usize) -> usize {
        self.node_part[v]
    }

    pub fn part_size(&self, v: usize) -> usize {
        self.part_nodes[&self.node_part[v]].len()
    }

    /// Node partition as sorted node sets, independent of labels.
    pub fn parts(&self) -> Vec<Vec<usize>> {
        let mut v: Vec<Vec<usize>> = self.part_nodes.values().map(|s| s.iter().copied().collect()).collect();
        v.sort();
        v
    }

    /// Adds an addable pair; `u` becomes the child of `v`.
    pub fn add_edge(&mut self, u: usize, v: usize) -> Result<()> {
        if u >= self.p() || v >= self.p() || u == v || self.pair_state(u, v) != PairState::Addable {
            return Err(Error::invalid(format!("({u}, {v}) is not addable")));
        }
        // reverse the path from u up to its root
        let mut prev: Option<usize> = Some(v);
        let mut cur = u;
        loop {
            let up = self.parent[cur];
            if let Some(q) = up {
                self.children[q].remove(&cur);
                self.children[cur].insert(q);
            }
            self.parent[cur] = prev;
            match up {
                Some(q) => {
                    prev = Some(cur);
                    cur = q;
                }
                None => break,
            }
        }
        self.children[v].insert(u);

        let (lu, lv) = (self.node_part[u], self.node_part[v]);
        let moved = self.part_nodes.remove(&lu).expect("part exists");
        let keep = self.part_nodes.get(&lv).expect("part exists").clone();
        for &a in &moved {
            for &b in &keep {
                let (x, y) = ordered(a, b);
                let k = pair_index(x, y);
                self.addable.remove(k);
                self.nonaddable.insert(k);
            }
        }
        let (x, y) = ordered(u, v);
        let k = pair_index(x, y);
        self.nonaddable.remove(k);
        self.existing.insert(k);
        for &a in &moved {
            self.node_part[a] = lv;
        }
        self.part_nodes.get_mut(&lv).expect("part exists").extend(moved);
        self.graph.add_edge(u, v)?;
        self.bits.set(u, v, true);
        Ok(())
    }

    /// Nodes in the subtree hanging from `c`, including `c`.
    fn subtree(&self, c: usize) -> Vec<usize> {
        let mut out = vec![c];
        let mut i = 0;
        while i < out.len() {
            out.extend(self.children[out[i]].iter().copied());
            i += 1;
        }
        out
    }

    /// Splits off the child side of an existing edge.
    pub fn remove_edge(&mut self, u: usize, v: usize) -> Result<()> {
        if u >= self.p() || v >= self.p() || u == v || self.pair_state(u, v) != PairState::Existing {
            return Err(Error::invalid(format!("({u}, {v}) is not an edge")));
        }
        let (child, par) = if self.parent[u] == Some(v) { (u, v) } else { (v, u) };
        self.parent[child] = None;
        self.children[par].remove(&child);
        let young = self.subtree(child);
        let old_label = self.node_part[child];
        let label = self.next_label;
        self.next_label += 1;
        let young_set: BTreeSet<usize> = young.iter().copied().collect();
        let rest = self.part_nodes.get_mut(&old_label).expect("part exists");
        for a in &young {
            rest.remove(a);
        }
        let rest = rest.clone();
        for &a in &young {
            self.node_part[a] = label;
            for &b in &rest {
                let (x, y) = ordered(a, b);
                let k = pair_index(x, y);
                self.nonaddable.remove(k);
                self.addable.insert(k);
            }
        }
        self.part_nodes.insert(label, young_set);
        let (x, y) = ordered(u, v);
        let k = pair_index(x, y);
        self.existing.remove(k);
        self.addable.insert(k);
        self.graph.remove_edge(u, v);
        self.bits.set(u, v, false);
        Ok(())
    }

    /// Sizes of the two sides an existing edge would split into: (child side, parent side).
    pub fn split_sizes(&self, u: usize, v: usize) -> Result<(usize, usize)> {
        if self.pair_state(u, v) != PairState::Existing {
            return Err(Error::invalid(format!("({u}, {v}) is not an edge")));
        }
        let child = if self.parent[u] == Some(v) { u } else { v };
        let a = self.subtree(child).len();
        Ok((a, self.part_size(u) - a))
    }

    pub fn apply(&mut self, m: ForestMove) -> Result<()> {
        match m {
            ForestMove::Add(u, v) => self.add_edge(u, v),
            ForestMove::Remove(u, v) => self.remove_edge(u, v),
        }
    }

    /// The `i`-th move in `addable ∪ existing`, addable pairs first.
    pub fn move_at(&self, i: usize) -> Result<ForestMove> {
        let na = self.addable.len();
        if i < na {
            let (u, v) = pair_from_index(self.addable.items[i]);
            Ok(ForestMove::Add(u, v))
        } else if i < na + self.existing.len() {
            let (u, v) = pair_from_index(self.existing.items[i - na]);
            Ok(ForestMove::Remove(u, v))
        } else {
            Err(Error::invalid(format!("move index {i} out of range")))
        }
    }

    /// Uniform draw from `addable ∪ existing`.
    pub fn uniform_move<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ForestMove> {
        let (na, ne) = (self.addable.len(), self.existing.len());
        if na + ne == 0 {
            return Err(Error::invalid("no legal move"));
        }
        self.move_at(rng.random_range(0..na + ne))
    }

    /// Checks the rooted-tree and partition invariants against the graph.
    pub fn check(&self) -> Result<()> {
        let fresh = ForestStore::init(&self.graph)?;
        let ok = fresh.existing() == self.existing()
            && fresh.addable() == self.addable()
            && fresh.nonaddable() == self.nonaddable()
            && fresh.parts() == self.parts()
            && self.bits == self.graph.bit_pattern();
        if !ok {
            return Err(Error::invalid("forest store out of sync with its graph"));
        }
        for (&label, nodes) in &self.part_nodes {
            let roots = nodes.iter().filter(|&&v| self.parent[v].is_none()).count();
            if roots != 1 || nodes.iter().any(|&v| self.node_part[v] != label) {
                return Err(Error::invalid("component is not a rooted tree"));
            }
            for &v in nodes {
                if let Some(q) = self.parent[v] {
                    if !self.graph.has_edge(v, q) || !self.children[q].contains(&v) {
                        return Err(Error::invalid("parent pointer disagrees with edges"));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Remove `(old_child, old_parent)` and insert `(new_child, new_parent)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TreeMove {
    pub old_child: usize,
    pub old_parent: usize,
    pub new_child: usize,
    pub new_parent: usize,
}

impl TreeMove {
    pub fn removed(&self) -> (usize, usize) {
        ordered(self.old_child, self.old_parent)
    }

    pub fn added(&self) -> (usize, usize) {
        ordered(self.new_child, self.new_parent)
    }

    /// The move that undoes this one once it has been applied.
    pub fn inverse(&self) -> TreeMove {
        TreeMove {
            old_child: self.new_child,
            old_parent: self.new_parent,
            new_child: self.old_child,
            new_parent: self.old_parent,
        }
    }

    pub fn apply_to(&self, g: &LabeledGraph) -> LabeledGraph {
        let mut h = g.clone();
        h.remove_edge(self.old_child, self.old_parent);
        h.add_edge(self.new_child, self.new_parent).expect("valid nodes");
        h
    }
}

/// Tree rooted at node 0 with optional descendant-count weights.
#[derive(Clone, Debug)]
pub struct TreeStore {
    graph: LabeledGraph,
    bits: BitPattern,
    parent: Vec<Option<usize>>,
    children: Vec<BTreeSet<usize>>,
    weight: Vec<usize>,
    weighted: bool,
}

impl TreeStore {
    pub fn init(g: &LabeledGraph, weighted: bool) -> Result<Self> {
        let p = g.p();
        if p == 0 {
            return Err(Error::invalid("empty graph is not a tree"));
        }
        let mut parent = vec![None; p];
        let mut children = vec![BTreeSet::new(); p];
        let mut seen = vec![false; p];
        let mut order = vec![0];
        seen[0] = true;
        let mut i = 0;
        while i < order.len() {
            let u = order[i];
            i += 1;
            for &v in g.neighbors(u) {
                if Some(v) == parent[u] {
                    continue;
                }
                if seen[v] {
                    return Err(Error::invalid("graph has a cycle, it is not a tree"));
                }
                seen[v] = true;
                parent[v] = Some(u);
                children[u].insert(v);
                order.push(v);
            }
        }
        if order.len() != p {
            return Err(Error::invalid("graph is disconnected, it is not a tree"));
        }
        let mut s = TreeStore { graph: g.clone(), bits: g.bit_pattern(), parent, children, weight: vec![0; p], weighted };
        if weighted {
            s.weight = s.compute_weights();
        }
        Ok(s)
    }

    fn compute_weights(&self) -> Vec<usize> {
        let p = self.p();
        let mut order = vec![0];
        let mut i = 0;
        while i < order.len() {
            order.extend(self.children[order[i]].iter().copied());
            i += 1;
        }
        let mut w = vec![1; p];
        for &v in order.iter().rev() {
            if let Some(q) = self.parent[v] {
                w[q] += w[v];
            }
        }
        w[0] = 0;
        w
    }

    pub fn p(&self) -> usize {
        self.graph.p()
    }

    pub fn graph(&self) -> &LabeledGraph {
        &self.graph
    }

    pub fn bits(&self) -> &BitPattern {
        &self.bits
    }

    pub fn is_weighted(&self) -> bool {
        self.weighted
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        self.parent[v]
    }

    pub fn children(&self, v: usize) -> &BTreeSet<usize> {
        &self.children[v]
    }

    /// `W(v)` for non-root `v`; `None` at the root or when weights are not kept.
    pub fn weight(&self, v: usize) -> Option<usize> {
        (self.weighted && v != 0).then(|| self.weight[v])
    }

    /// Current weights, computing them when they are not stored.
    pub fn weights(&self) -> Vec<usize> {
        if self.weighted {
            self.weight.clone()
        } else {
            self.compute_weights()
        }
    }

    /// Nodes below `v`, including `v`.
    pub fn subtree(&self, v: usize) -> Vec<usize> {
        let mut out = vec![v];
        let mut i = 0;
        while i < out.len() {
            out.extend(self.children[out[i]].iter().copied());
            i += 1;
        }
        out
    }

    fn moves_at(p: usize, w: usize) -> usize {
        w * (p - w) - 1
    }

    /// Number of edge-moves, not counting the move that reinserts the removed edge.
    pub fn count_moves(&self) -> usize {
        let p = self.p();
        self.weights().iter().skip(1).map(|&w| Self::moves_at(p, w)).sum()
    }

    /// Number of edge-moves including the identity reinsertion for each edge.
    pub fn count_moves_included(&self) -> usize {
        let p = self.p();
        self.weights().iter().skip(1).map(|&w| w * (p - w)).sum()
    }

    /// The `k`-th reinsertion (identity skipped) after cutting above `v`.
    fn reinsertion(&self, v: usize, young: &[usize], k: usize) -> TreeMove {
        let p = self.p();
        let mut in_young = vec![false; p];
        young.iter().for_each(|&a| in_young[a] = true);
        let old: Vec<usize> = (0..p).filter(|&a| !in_young[a]).collect();
        let par = self.parent[v].expect("non-root");
        let id = young.iter().position(|&a| a == v).unwrap() * old.len() + old.iter().position(|&b| b == par).unwrap();
        let k = if k >= id { k + 1 } else { k };
        TreeMove { old_child: v, old_parent: par, new_child: young[k / old.len()], new_parent: old[k % old.len()] }
    }

    /// Uniform draw over all non-identity edge-moves; needs stored weights.
    pub fn uniform_move<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<TreeMove> {
        let p = self.p();
        if p < 3 {
            return Err(Error::invalid("no edge-move exists for p < 3"));
        }
        if !self.weighted {
            return Err(Error::invalid("uniform edge-moves need stored weights"));
        }
        let total = self.count_moves();
        let mut t = rng.random_range(0..total);
        let mut v = 1;
        while v < p {
            let c = Self::moves_at(p, self.weight[v]);
            if t < c {
                break;
            }
            t -= c;
            v += 1;
        }
        let young = self.subtree(v);
        let k = rng.random_range(0..Self::moves_at(p, young.len()));
        Ok(self.reinsertion(v, &young, k))
    }

    /// Uniform edge, then uniform reinsertion.
    pub fn edge_first_move<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<TreeMove> {
        let p = self.p();
        if p < 3 {
            return Err(Error::invalid("no edge-move exists for p < 3"));
        }
        let v = rng.random_range(1..p);
        let young = self.subtree(v);
        let k = rng.random_range(0..Self::moves_at(p, young.len()));
        Ok(self.reinsertion(v, &young, k))
    }

    /// Every legal non-identity move, in a fixed order.
    pub fn all_moves(&self) -> Vec<TreeMove> {
        let p = self.p();
        let mut out = Vec::new();
        for v in 1..p {
            let young = self.subtree(v);
            for k in 0..Self::moves_at(p, young.len()) {
                out.push(self.reinsertion(v, &young, k));
            }
        }
        out
    }

    pub fn is_legal(&self, m: &TreeMove) -> bool {
        let p = self.p();
        if [m.old_child, m.old_parent, m.new_child, m.new_parent].iter().any(|&x| x >= p) {
            return false;
        }
        if m.old_child == 0 || self.parent[m.old_child] != Some(m.old_parent) {
            return false;
        }
        if m.new_child == m.old_child && m.new_parent == m.old_parent {
            return false;
        }
        let young = self.subtree(m.old_child);
        young.contains(&m.new_child) && !young.contains(&m.new_parent)
    }

    pub fn apply_move(&mut self, m: &TreeMove) -> Result<()> {
        if !self.is_legal(m) {
            return Err(Error::invalid(format!("illegal tree move {m:?}")));
        }
        let y = if self.weighted { self.weight[m.old_child] } else { 0 };
        if self.weighted {
            // weights in the old component: meet at the common ancestor
            let mut on_old_path = vec![false; self.p()];
            let mut a = Some(m.old_parent);
            while let Some(x) = a {
                on_old_path[x] = true;
                a = self.parent[x];
            }
            let mut b = m.new_parent;
            while !on_old_path[b] {
                self.weight[b] += y;
                b = self.parent[b].expect("reaches root");
            }
            let common = b;
            let mut a = m.old_parent;
            while a != common {
                self.weight[a] -= y;
                a = self.parent[a].expect("reaches root");
            }
        }
        // cut, then re-root the young component at new_child
        self.children[m.old_parent].remove(&m.old_child);
        self.parent[m.old_child] = None;
        let mut path = vec![m.new_child];
        while let Some(q) = self.parent[*path.last().unwrap()] {
            path.push(q);
        }
        let old_w: Vec<usize> = path.iter().map(|&x| self.weight[x]).collect();
        for i in 1..path.len() {
            let (lo, hi) = (path[i - 1], path[i]);
            self.children[hi].remove(&lo);
            self.children[lo].insert(hi);
            self.parent[hi] = Some(lo);
            if self.weighted {
                self.weight[hi] = y - old_w[i - 1];
            }
        }
        if self.weighted {
            self.weight[m.new_child] = y;
        }
        self.parent[m.new_child] = Some(m.new_parent);
        self.children[m.new_parent].insert(m.new_child);
        self.graph.remove_edge(m.old_child, m.old_parent);
        self.graph.add_edge(m.new_child, m.new_parent)?;
        self.bits.set(m.old_child, m.old_parent, false);
        self.bits.set(m.new_child, m.new_parent, true);
        Ok(())
    }

    /// Checks parent pointers, bit-pattern and weights against a rebuild.
    pub fn check(&self) -> Result<()> {
        if !self.graph.is_tree() || self.bits != self.graph.bit_pattern() {
            return Err(Error::invalid("tree store graph is inconsistent"));
        }
        for v in 1..self.p() {
            let q = self.parent[v].ok_or_else(|| Error::invalid("non-root without parent"))?;
            if !self.graph.has_edge(v, q) || !self.children[q].contains(&v) {
                return Err(Error::invalid("parent pointer disagrees with edges"));
            }
        }
        if self.parent[0].is_some() {
            return Err(Error::invalid("root has a parent"));
        }
        if self.weighted && self.weight != self.compute_weights() {
            return Err(Error::invalid("weights out of date"));
        }
        Ok(())
    }
}

/// Ways of choosing several distinct tree edge-moves.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MoveSystem {
    /// Uniform over moves using stored weights.
    A,
    /// Edge list with `p − 2` copies per edge; weights stored but unused.
    B,
    /// As B without stored weights.
    C,
    /// Uniform edge then uniform reinsertion, duplicates rejected.
    D,
}

impl MoveSystem {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "A" => Ok(MoveSystem::A),
            "B" => Ok(MoveSystem::B),
            "C" => Ok(MoveSystem::C),
            "D" => Ok(MoveSystem::D),
            _ => Err(Error::invalid(format!("unknown move system '{s}'"))),
        }
    }

    /// Whether a store used with this system keeps weights.
    pub fn keeps_weights(self) -> bool {
        matches!(self, MoveSystem::A | MoveSystem::B)
    }
}

/// `omega` distinct legal moves from the current tree.
pub fn propose_moves<R: Rng + ?Sized>(
    s: &TreeStore,
    system: MoveSystem,
    omega: usize,
    rng: &mut R,
) -> Result<Vec<TreeMove>> {
    let p = s.p();
    if p < 3 {
        return Err(Error::invalid("no edge-move exists for p < 3"));
    }
    let total = s.count_moves();
    if omega > total {
        return Err(Error::invalid(format!("omega = {omega} exceeds the {total} available moves")));
    }
    let mut out = Vec::with_capacity(omega);
    match system {
        MoveSystem::A | MoveSystem::D => {
            let mut seen = HashSet::with_capacity(omega);
            while out.len() < omega {
                let m = if system == MoveSystem::A { s.uniform_move(rng)? } else { s.edge_first_move(rng)? };
                if seen.insert(m) {
                    out.push(m);
                }
            }
        }
        MoveSystem::B | MoveSystem::C => {
            let copies = p - 2;
            let list_len = (p - 1) * copies;
            if omega > list_len {
                return Err(Error::invalid(format!("omega = {omega} exceeds the edge list length {list_len}")));
            }
            let mut per_edge = vec![0usize; p];
            for i in index::sample(rng, list_len, omega) {
                per_edge[1 + i / copies] += 1;
            }
            for v in 1..p {
                if per_edge[v] == 0 {
                    continue;
                }
                let young = s.subtree(v);
                let avail = TreeStore::moves_at(p, young.len());
                for k in index::sample(rng, avail, per_edge[v]) {
                    out.push(s.reinsertion(v, &young, k));
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{enumerate_trees, prufer_decode};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tree(p: usize, rng: &mut ChaCha8Rng) -> LabeledGraph {
        let seq: Vec<usize> = (0..p - 2).map(|_| rng.random_range(0..p)).collect();
        prufer_decode(&seq, p).unwrap()
    }

    #[test]
    fn forest_init_examples() {
        let s = ForestStore::init(&LabeledGraph::new(3)).unwrap();
        assert_eq!(s.parts().len(), 3);
        assert_eq!(s.num_addable(), 3);
        assert_eq!(s.num_existing() + s.num_nonaddable(), 0);
        let s = ForestStore::init(&LabeledGraph::chain(4)).unwrap();
        assert_eq!((s.parts().len(), s.num_existing(), s.num_addable(), s.num_nonaddable()), (1, 3, 0, 3));
        assert!(ForestStore::init(&LabeledGraph::complete(3)).is_err());
    }

    #[test]
    fn forest_add_remove_examples() {
        let mut s = ForestStore::init(&LabeledGraph::new(3)).unwrap();
        s.add_edge(0, 1).unwrap();
        assert_eq!(s.parts(), vec![vec![0, 1], vec![2]]);
        assert_eq!(s.num_existing(), 1);
        assert!(s.add_edge(0, 1).is_err());
        s.remove_edge(1, 0).unwrap();
        assert_eq!(s.parts().len(), 3);
        assert!(s.remove_edge(0, 1).is_err());
        s.check().unwrap();
    }

    #[test]
    fn add_reverses_path_to_old_root() {
        // component {0,1,2} rooted at 0 as a path 0-1-2; join 2 to node 3
        let g = LabeledGraph::from_edges(4, [(0, 1), (1, 2)]).unwrap();
        let mut s = ForestStore::init(&g).unwrap();
        assert_eq!(s.parent(2), Some(1));
        s.add_edge(2, 3).unwrap();
        assert_eq!(s.parent(2), Some(3));
        assert_eq!(s.parent(1), Some(2));
        assert_eq!(s.parent(0), Some(1));
        assert_eq!(s.parent(3), None);
        s.check().unwrap();
    }

    #[test]
    fn addable_count_tracks_component_sizes() {
        let g = LabeledGraph::from_edges(7, [(0, 1), (1, 2), (3, 4)]).unwrap();
        let mut s = ForestStore::init(&g).unwrap();
        let before = s.num_addable();
        let (a, b) = (s.part_size(2), s.part_size(4));
        s.add_edge(2, 4).unwrap();
        assert_eq!(before - s.num_addable(), a * b);
        let (x, y) = s.split_sizes(1, 2).unwrap();
        let before = s.num_addable();
        s.remove_edge(1, 2).unwrap();
        assert_eq!(s.num_addable() - before, x * y);
        s.check().unwrap();
    }

    #[test]
    fn forest_uniform_move_frequencies() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = ForestStore::init(&LabeledGraph::from_edges(3, [(0, 1)]).unwrap()).unwrap();
        let n = 30_000;
        let mut counts = HashMap::new();
        for _ in 0..n {
            *counts.entry(s.uniform_move(&mut rng).unwrap()).or_insert(0usize) += 1;
        }
        let want = [ForestMove::Remove(0, 1), ForestMove::Add(0, 2), ForestMove::Add(1, 2)];
        assert_eq!(counts.len(), 3);
        let sd = (n as f64 / 3.0 * (2.0 / 3.0)).sqrt();
        for m in want {
            assert!((counts[&m] as f64 - n as f64 / 3.0).abs() < 4.0 * sd);
        }
        let lone = ForestStore::init(&LabeledGraph::new(1)).unwrap();
        assert!(lone.uniform_move(&mut rng).is_err());
    }

    #[test]
    fn forest_random_walk_stays_coherent() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut s = ForestStore::init(&LabeledGraph::new(12)).unwrap();
        for step in 0..10_000 {
            let m = s.uniform_move(&mut rng).unwrap();
            s.apply(m).unwrap();
            if step % 500 == 0 {
                s.check().unwrap();
            }
        }
        s.check().unwrap();
    }

    #[test]
    fn tree_init_examples() {
        let s = TreeStore::init(&LabeledGraph::chain(4), true).unwrap();
        assert_eq!((s.weight(0), s.weight(1), s.weight(2), s.weight(3)), (None, Some(3), Some(2), Some(1)));
        let s = TreeStore::init(&LabeledGraph::star(5, 0), true).unwrap();
        assert!((1..5).all(|v| s.weight(v) == Some(1)));
        assert!(TreeStore::init(&LabeledGraph::from_edges(4, [(0, 1), (2, 3)]).unwrap(), true).is_err());
        assert!(TreeStore::init(&LabeledGraph::complete(3), true).is_err());
    }

    #[test]
    fn move_counts() {
        assert_eq!(TreeStore::init(&LabeledGraph::star(5, 0), true).unwrap().count_moves(), 12);
        assert_eq!(TreeStore::init(&LabeledGraph::chain(5), true).unwrap().count_moves(), 16);
        let c4 = TreeStore::init(&LabeledGraph::chain(4), false).unwrap();
        assert_eq!(c4.count_moves(), 7);
        // independent enumeration: every (edge, reinsertion) pair yielding a different tree
        let mut seen = HashSet::new();
        for (a, b) in c4.graph().edges() {
            for v in 0..4 {
                for u in 0..v {
                    if (u, v) == (a, b) || c4.graph().has_edge(u, v) {
                        continue;
                    }
                    let mut h = c4.graph().clone();
                    h.remove_edge(a, b);
                    h.add_edge(u, v).unwrap();
                    if h.is_tree() {
                        seen.insert(h.bit_pattern());
                    }
                }
            }
        }
        assert_eq!(seen.len(), 7);
        assert_eq!(c4.all_moves().len(), 7);
    }

    #[test]
    fn move_count_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for p in [10usize, 30] {
            let lo = (p - 1) * (p - 2);
            let hi = (p * p * p - 7 * p) / 6 + 1;
            for _ in 0..100 {
                let m = TreeStore::init(&random_tree(p, &mut rng), true).unwrap().count_moves();
                assert!(lo <= m && m <= hi);
            }
        }
    }

    #[test]
    fn uniform_move_on_star_picks_nodes_equally() {
        let s = TreeStore::init(&LabeledGraph::star(6, 0), true).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 50_000;
        let mut counts = [0usize; 6];
        for _ in 0..n {
            counts[s.uniform_move(&mut rng).unwrap().old_child] += 1;
        }
        let pi = 0.2;
        let sd = (n as f64 * pi * (1.0 - pi)).sqrt();
        assert!(counts[1..].iter().all(|&c| (c as f64 - n as f64 * pi).abs() < 4.0 * sd));
    }

    #[test]
    fn uniform_move_chain4_all_seven() {
        let s = TreeStore::init(&LabeledGraph::chain(4), true).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = 100_000;
        let mut counts = HashMap::new();
        for _ in 0..n {
            let m = s.uniform_move(&mut rng).unwrap();
            assert!(s.is_legal(&m));
            *counts.entry(m).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 7);
        let e = n as f64 / 7.0;
        let chi2: f64 = counts.values().map(|&c| (c as f64 - e).powi(2) / e).sum();
        // 6 degrees of freedom, 99.9% quantile
        assert!(chi2 < 22.46, "chi2 = {chi2}");
    }

    #[test]
    fn uniform_move_random_tree_p6() {
        let mut rng = ChaCha8Rng::seed_from_u64(606);
        let s = TreeStore::init(&random_tree(6, &mut rng), true).unwrap();
        let moves = s.all_moves();
        let n = 1_000_000;
        let mut counts: HashMap<TreeMove, usize> = HashMap::new();
        for _ in 0..n {
            *counts.entry(s.uniform_move(&mut rng).unwrap()).or_default() += 1;
        }
        assert_eq!(counts.len(), moves.len());
        let pi = 1.0 / moves.len() as f64;
        let sd = (n as f64 * pi * (1.0 - pi)).sqrt();
        for m in &moves {
            assert!((counts[m] as f64 - n as f64 * pi).abs() < 4.0 * sd);
        }
    }

    #[test]
    fn moves_are_reversible_and_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for t in enumerate_trees(5).unwrap().take(40) {
            let s = TreeStore::init(&t, true).unwrap();
            for m in s.all_moves() {
                let mut s2 = s.clone();
                s2.apply_move(&m).unwrap();
                s2.check().unwrap();
                assert_eq!(s2.graph(), &m.apply_to(s.graph()));
                let inv = m.inverse();
                assert!(s2.is_legal(&inv));
                s2.apply_move(&inv).unwrap();
                assert_eq!(s2.graph(), s.graph());
                assert_eq!(s2.weights(), s.weights());
            }
        }
        let s = TreeStore::init(&random_tree(8, &mut rng), true).unwrap();
        let bad = TreeMove { old_child: 0, old_parent: 1, new_child: 0, new_parent: 2 };
        assert!(s.clone().apply_move(&bad).is_err());
    }

    #[test]
    fn long_random_walk_keeps_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        let mut s = TreeStore::init(&random_tree(50, &mut rng), true).unwrap();
        for _ in 0..10_000 {
            let m = s.uniform_move(&mut rng).unwrap();
            s.apply_move(&m).unwrap();
        }
        s.check().unwrap();
        assert_eq!(s.weights(), TreeStore::init(s.graph(), true).unwrap().weights());
    }

    #[test]
    fn proposals_full_set_and_limits() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = TreeStore::init(&LabeledGraph::star(5, 2), true).unwrap();
        let all: BTreeSet<TreeMove> = s.all_moves().into_iter().collect();
        for sys in [MoveSystem::A, MoveSystem::B, MoveSystem::C, MoveSystem::D] {
            let got: BTreeSet<TreeMove> = propose_moves(&s, sys, all.len(), &mut rng).unwrap().into_iter().collect();
            assert_eq!(got, all, "{sys:?}");
            assert!(propose_moves(&s, sys, all.len() + 1, &mut rng).is_err());
        }
        let c = TreeStore::init(&LabeledGraph::chain(6), false).unwrap();
        assert!(c.count_moves() > 20);
        assert!(propose_moves(&c, MoveSystem::C, 21, &mut rng).is_err());
        assert_eq!(propose_moves(&c, MoveSystem::C, 20, &mut rng).unwrap().len(), 20);
    }

    #[test]
    fn system_c_uniform_over_edges_on_chain() {
        let s = TreeStore::init(&LabeledGraph::chain(6), false).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 40_000;
        let mut edge_counts = [0usize; 6];
        let mut move_counts: HashMap<TreeMove, usize> = HashMap::new();
        for _ in 0..n {
            let m = propose_moves(&s, MoveSystem::C, 1, &mut rng).unwrap()[0];
            edge_counts[m.old_child] += 1;
            *move_counts.entry(m).or_default() += 1;
        }
        let pi = 0.2;
        let sd = (n as f64 * pi * (1.0 - pi)).sqrt();
        assert!(edge_counts[1..].iter().all(|&c| (c as f64 - n as f64 * pi).abs() < 4.0 * sd));
        // moves behind a leaf edge (4 each) are far more frequent than behind the middle edge (8)
        let leaf = TreeMove { old_child: 5, old_parent: 4, new_child: 5, new_parent: 0 };
        let mid = TreeMove { old_child: 3, old_parent: 2, new_child: 3, new_parent: 0 };
        assert!(move_counts[&leaf] as f64 > 1.5 * move_counts[&mid] as f64);
    }

    proptest! {
        #[test]
        fn tree_moves_keep_invariants(seed in 0u64..10_000, p in 3usize..15, steps in 1usize..60) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut s = TreeStore::init(&random_tree(p, &mut rng), true).unwrap();
            for _ in 0..steps {
                let m = s.edge_first_move(&mut rng).unwrap();
                prop_assert!(s.is_legal(&m));
                s.apply_move(&m).unwrap();
                let w = s.weights();
                let root_sum: usize = s.children(0).iter().map(|&c| w[c]).sum();
                prop_assert_eq!(root_sum, p - 1);
                for v in 1..p {
                    let kids: usize = s.children(v).iter().map(|&c| w[c]).sum();
                    prop_assert_eq!(w[v], 1 + kids);
                }
            }
            s.check().unwrap();
        }

        #[test]
        fn forest_ops_match_rebuild(seed in 0u64..10_000, p in 1usize..10, steps in 0usize..40) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut s = ForestStore::init(&LabeledGraph::new(p)).unwrap();
            for _ in 0..steps {
                if let Ok(m) = s.uniform_move(&mut rng) {
                    s.apply(m).unwrap();
                }
            }
            prop_assert!(s.check().is_ok());
        }
    }
}
