//! Posterior exploration over forests and trees: stochastic shotgun search
//! and reversible-jump MCMC on (graph, incomplete covariance).

use std::collections::{BTreeMap, HashMap};
use std::time::Instant;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::graph::{enumerate_forests, enumerate_trees, ordered, BitPattern, GraphClass, LabeledGraph};
use crate::hiw::{EdgeLogWeights, HiwModel};
use crate::movestore::{propose_moves, ForestMove, ForestStore, MoveSystem, TreeStore};
use crate::numerics::SymMatrix;
use crate::priors::GraphPrior;

/// How long a run lasts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Budget {
    Iterations(usize),
    Seconds(f64),
    /// Whichever limit is reached first.
    Both { iterations: usize, seconds: f64 },
}

struct Clock {
    budget: Budget,
    start: Instant,
    stopped: bool,
}

impl Clock {
    fn new(budget: Budget) -> Self {
        Clock { budget, start: Instant::now(), stopped: false }
    }

    /// Whether iteration `i` may run; the wall clock is read every 64 iterations.
    fn go(&mut self, i: usize) -> bool {
        match self.budget {
            Budget::Iterations(n) => i < n,
            Budget::Seconds(s) => {
                if i % 64 == 0 && !self.stopped {
                    self.stopped = self.start.elapsed().as_secs_f64() >= s;
                }
                !self.stopped
            }
            Budget::Both { iterations, seconds } => {
                if i >= iterations {
                    return false;
                }
                if i % 64 == 0 && !self.stopped {
                    self.stopped = self.start.elapsed().as_secs_f64() >= seconds;
                }
                !self.stopped
            }
        }
    }

    fn elapsed(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }
}

#[derive(Clone, Debug)]
pub struct SssConfig {
    pub omega: usize,
    pub budget: Budget,
    pub system: MoveSystem,
    /// Softmax temperature on scores; 1 selects proportionally to posterior mass.
    pub alpha: f64,
    pub top_k: usize,
    pub seed: u64,
}

impl SssConfig {
    pub fn new(omega: usize, budget: Budget, seed: u64) -> Self {
        SssConfig { omega, budget, system: MoveSystem::A, alpha: 1.0, top_k: 10, seed }
    }

    fn validate(&self) -> Result<()> {
        if self.omega < 1 {
            return Err(Error::invalid("omega must be at least 1"));
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::invalid("alpha must be a non-negative number"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct McmcConfig {
    pub sigma_g: f64,
    pub sigma_ij: f64,
    pub budget: Budget,
    /// `A` proposes uniformly over moves; the others pick an edge first.
    pub system: MoveSystem,
    pub top_k: usize,
    pub seed: u64,
}

impl McmcConfig {
    pub fn new(sigma_g: f64, sigma_ij: f64, budget: Budget, seed: u64) -> Self {
        McmcConfig { sigma_g, sigma_ij, budget, system: MoveSystem::A, top_k: 10, seed }
    }

    fn validate(&self) -> Result<()> {
        if !(self.sigma_g > 0.0 && self.sigma_g.is_finite()) {
            return Err(Error::invalid("sigma_g must be positive"));
        }
        if !(self.sigma_ij > 0.0 && self.sigma_ij.is_finite()) {
            return Err(Error::invalid("sigma_ij must be positive"));
        }
        Ok(())
    }
}

/// Log posterior up to a constant for graphs of one class.
#[derive(Clone, Debug)]
pub struct Scorer {
    class: GraphClass,
    prior: GraphPrior,
    base: f64,
    elw: EdgeLogWeights,
}

impl Scorer {
    pub fn new(model: &HiwModel, prior: GraphPrior, class: GraphClass) -> Result<Self> {
        let p = model.p();
        let base = model.log_marginal_forest(&LabeledGraph::new(p))?;
        Ok(Scorer { class, prior, base, elw: model.edge_log_weight_matrix()? })
    }

    pub fn class(&self) -> GraphClass {
        self.class
    }

    pub fn prior(&self) -> &GraphPrior {
        &self.prior
    }

    pub fn p(&self) -> usize {
        self.elw.p()
    }

    /// `log p(x | g) + log p(g)`.
    pub fn score(&self, g: &LabeledGraph) -> Result<f64> {
        if g.p() != self.p() {
            return Err(Error::invalid("graph has the wrong number of nodes"));
        }
        if !self.class.contains(g) {
            return Err(Error::invalid(format!("graph is not in the {:?} class", self.class)));
        }
        Ok(self.base + self.elw.total(g) + self.prior.log_prior_unnorm(g))
    }
}

/// Convenience wrapper building a one-off [`Scorer`].
pub fn score(g: &LabeledGraph, model: &HiwModel, prior: &GraphPrior, class: GraphClass) -> Result<f64> {
    Scorer::new(model, prior.clone(), class)?.score(g)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LedgerKind {
    LogScore,
    VisitCount,
}

#[derive(Clone, Debug, Default)]
pub struct RunStats {
    pub iterations: usize,
    pub scored: usize,
    pub graph_proposals: usize,
    pub graph_accepted: usize,
    pub cov_proposals: usize,
    pub cov_accepted: usize,
    pub elapsed_secs: f64,
}

/// What an explorer leaves behind.
#[derive(Clone, Debug)]
pub struct PosteriorRecord {
    pub p: usize,
    pub class: GraphClass,
    pub kind: LedgerKind,
    /// Log score (SSS) or visit count (MCMC) per graph.
    pub ledger: HashMap<BitPattern, f64>,
    /// Log score of every graph the run touched.
    pub scores: HashMap<BitPattern, f64>,
    /// Score of the current graph after each iteration.
    pub trace: Vec<f64>,
    pub top_k: usize,
    pub stats: RunStats,
}

impl PosteriorRecord {
    pub fn new(p: usize, class: GraphClass, kind: LedgerKind, top_k: usize) -> Self {
        PosteriorRecord {
            p,
            class,
            kind,
            ledger: HashMap::new(),
            scores: HashMap::new(),
            trace: Vec::new(),
            top_k,
            stats: RunStats::default(),
        }
    }

    /// Log-score ledger holding exactly the given graphs.
    pub fn from_log_scores<I>(p: usize, class: GraphClass, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (LabeledGraph, f64)>,
    {
        let mut rec = PosteriorRecord::new(p, class, LedgerKind::LogScore, 10);
        for (g, s) in entries {
            if g.p() != p {
                return Err(Error::invalid(format!("graph on {} nodes in a ledger for {p}", g.p())));
            }
            let key = g.bit_pattern();
            rec.scores.insert(key.clone(), s);
            rec.ledger.insert(key, s);
        }
        Ok(rec)
    }

    /// Highest-scoring graphs, ties broken by bit-pattern.
    pub fn best(&self, k: usize) -> Vec<(LabeledGraph, f64)> {
        let mut v: Vec<(&BitPattern, f64)> = self.scores.iter().map(|(b, &s)| (b, s)).collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(b.0)));
        v.into_iter().take(k).map(|(b, s)| (LabeledGraph::from_bit_pattern(self.p, b), s)).collect()
    }

    pub fn top(&self) -> Vec<(LabeledGraph, f64)> {
        self.best(self.top_k)
    }

    /// Most visited graph (MCMC) or best-scoring graph (SSS).
    pub fn mode(&self) -> Option<LabeledGraph> {
        let key = match self.kind {
            LedgerKind::LogScore => self.best(1).into_iter().next().map(|(g, _)| g.bit_pattern()),
            LedgerKind::VisitCount => self
                .ledger
                .iter()
                .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(a.0)))
                .map(|(b, _)| b.clone()),
        }?;
        Some(LabeledGraph::from_bit_pattern(self.p, &key))
    }

    /// Normalized posterior mass per ledger entry, sorted by bit-pattern.
    pub fn normalized(&self) -> Result<Vec<(BitPattern, f64)>> {
        if self.ledger.is_empty() {
            return Err(Error::invalid("empty ledger"));
        }
        let mut entries: Vec<(BitPattern, f64)> = self.ledger.iter().map(|(b, &x)| (b.clone(), x)).collect();
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        match self.kind {
            LedgerKind::LogScore => {
                let lse = log_sum_exp(entries.iter().map(|e| e.1));
                if !lse.is_finite() {
                    return Err(Error::Numerical("ledger scores do not normalize".into()));
                }
                entries.iter_mut().for_each(|e| e.1 = (e.1 - lse).exp());
            }
            LedgerKind::VisitCount => {
                let total: f64 = entries.iter().map(|e| e.1).sum();
                if total <= 0.0 {
                    return Err(Error::invalid("no visits recorded"));
                }
                entries.iter_mut().for_each(|e| e.1 /= total);
            }
        }
        Ok(entries)
    }

    /// Posterior edge inclusion probabilities implied by the ledger.
    pub fn edge_probabilities(&self) -> Result<SymMatrix> {
        let mut m = SymMatrix::zeros(self.p);
        for (b, w) in self.normalized()? {
            for (u, v) in LabeledGraph::from_bit_pattern(self.p, &b).edges() {
                let x = m.get(u, v) + w;
                m.set(u, v, x);
            }
        }
        Ok(m)
    }
}

pub fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Scores every graph of the scorer's class; trees need `p <= 8`, forests `p <= 6`.
pub fn enumerate_posterior(scorer: &Scorer) -> Result<PosteriorRecord> {
    let p = scorer.p();
    let graphs: Vec<LabeledGraph> = match scorer.class() {
        GraphClass::Tree => enumerate_trees(p)?.collect(),
        GraphClass::Forest => enumerate_forests(p)?,
    };
    let mut entries = Vec::with_capacity(graphs.len());
    for g in graphs {
        let s = scorer.score(&g)?;
        entries.push((g, s));
    }
    let mut rec = PosteriorRecord::from_log_scores(p, scorer.class(), entries)?;
    rec.stats.scored = rec.scores.len();
    Ok(rec)
}

/// Draws an index with probability proportional to `exp(alpha * score)`.
fn softmax_pick<R: Rng + ?Sized>(scores: &[f64], alpha: f64, rng: &mut R) -> usize {
    let scaled: Vec<f64> = scores.iter().map(|s| alpha * s).collect();
    let lse = log_sum_exp(scaled.iter().copied());
    let mut t = rng.random::<f64>();
    for (i, s) in scaled.iter().enumerate() {
        let w = (s - lse).exp();
        if t < w {
            return i;
        }
        t -= w;
    }
    scores.len() - 1
}

fn score_memo(rec: &mut PosteriorRecord, scorer: &Scorer, g: &LabeledGraph) -> Result<f64> {
    let key = g.bit_pattern();
    if let Some(&s) = rec.scores.get(&key) {
        return Ok(s);
    }
    let s = scorer.score(g)?;
    rec.stats.scored += 1;
    rec.scores.insert(key.clone(), s);
    if rec.kind == LedgerKind::LogScore {
        rec.ledger.insert(key, s);
    }
    Ok(s)
}

fn forest_move_graph(g: &LabeledGraph, m: ForestMove) -> LabeledGraph {
    let mut h = g.clone();
    match m {
        ForestMove::Add(u, v) => {
            h.add_edge(u, v).expect("valid pair");
        }
        ForestMove::Remove(u, v) => {
            h.remove_edge(u, v);
        }
    }
    h
}

/// Stochastic shotgun search from `start`.
pub fn sss_run(start: &LabeledGraph, cfg: &SssConfig, scorer: &Scorer) -> Result<PosteriorRecord> {
    cfg.validate()?;
    let class = scorer.class();
    let p = start.p();
    if !class.contains(start) {
        return Err(Error::invalid(format!("start graph is not in the {class:?} class")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rec = PosteriorRecord::new(p, class, LedgerKind::LogScore, cfg.top_k);
    let mut clock = Clock::new(cfg.budget);
    score_memo(&mut rec, scorer, start)?;
    match class {
        GraphClass::Forest => {
            let mut store = ForestStore::init(start)?;
            let mut i = 0;
            while clock.go(i) {
                let total = store.num_addable() + store.num_existing();
                if total == 0 {
                    break;
                }
                let moves = index::sample(&mut rng, total, cfg.omega.min(total))
                    .into_iter()
                    .map(|k| store.move_at(k))
                    .collect::<Result<Vec<_>>>()?;
                let mut cands: Vec<(BitPattern, ForestMove, f64)> = Vec::with_capacity(moves.len());
                for m in moves {
                    let h = forest_move_graph(store.graph(), m);
                    let s = score_memo(&mut rec, scorer, &h)?;
                    cands.push((h.bit_pattern(), m, s));
                }
                cands.sort_by(|a, b| a.0.cmp(&b.0));
                let scores: Vec<f64> = cands.iter().map(|c| c.2).collect();
                let k = softmax_pick(&scores, cfg.alpha, &mut rng);
                store.apply(cands[k].1)?;
                rec.trace.push(cands[k].2);
                i += 1;
            }
            rec.stats.iterations = i;
        }
        GraphClass::Tree => {
            let mut store = TreeStore::init(start, cfg.system.keeps_weights())?;
            if p < 3 {
                rec.stats.elapsed_secs = clock.elapsed();
                return Ok(rec);
            }
            let mut i = 0;
            while clock.go(i) {
                let omega = cfg.omega.min(store.count_moves());
                let moves = propose_moves(&store, cfg.system, omega, &mut rng)?;
                let mut cands = Vec::with_capacity(moves.len());
                for m in moves {
                    let h = m.apply_to(store.graph());
                    let s = score_memo(&mut rec, scorer, &h)?;
                    cands.push((h.bit_pattern(), m, s));
                }
                cands.sort_by(|a, b| a.0.cmp(&b.0));
                let scores: Vec<f64> = cands.iter().map(|c| c.2).collect();
                let k = softmax_pick(&scores, cfg.alpha, &mut rng);
                store.apply_move(&cands[k].1)?;
                rec.trace.push(cands[k].2);
                i += 1;
            }
            rec.stats.iterations = i;
        }
    }
    rec.stats.elapsed_secs = clock.elapsed();
    Ok(rec)
}

/// Diagonal and edge entries of a covariance matrix restricted to a forest.
#[derive(Clone, Debug, PartialEq)]
pub struct IncompleteCov {
    diag: Vec<f64>,
    edges: BTreeMap<(usize, usize), f64>,
}

impl IncompleteCov {
    pub fn new(diag: Vec<f64>, edges: BTreeMap<(usize, usize), f64>) -> Result<Self> {
        if diag.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(Error::invalid("diagonal entries must be positive"));
        }
        Ok(IncompleteCov { diag, edges })
    }

    /// Sample variances and covariances, shrunk to keep each 2×2 block positive definite.
    pub fn from_model(model: &HiwModel, g: &LabeledGraph) -> Self {
        let n = model.stats().n();
        let u = model.stats().u();
        let p = model.p();
        let diag: Vec<f64> =
            (0..p).map(|v| if n == 0 { 1.0 } else { (u.get(v, v) / n as f64).max(1e-8) }).collect();
        let mut edges = BTreeMap::new();
        for (a, b) in g.edges() {
            let c = if n == 0 { 0.0 } else { u.get(a, b) / n as f64 };
            let lim = 0.99 * (diag[a] * diag[b]).sqrt();
            edges.insert((a, b), c.clamp(-lim, lim));
        }
        IncompleteCov { diag, edges }
    }

    pub fn diag(&self, v: usize) -> f64 {
        self.diag[v]
    }

    pub fn edge(&self, u: usize, v: usize) -> Option<f64> {
        self.edges.get(&ordered(u, v)).copied()
    }

    pub fn edges(&self) -> &BTreeMap<(usize, usize), f64> {
        &self.edges
    }

    fn node_block(&self, v: usize) -> SymMatrix {
        SymMatrix::diag(&[self.diag[v]])
    }

    fn pair_block(&self, u: usize, v: usize, c: f64) -> SymMatrix {
        SymMatrix::from_fn(2, |i, j| match (i, j) {
            (0, 0) => self.diag[u],
            (1, 1) => self.diag[v],
            _ => c,
        })
    }

    /// Whether every edge block is positive definite.
    pub fn is_valid(&self) -> bool {
        self.diag.iter().all(|&x| x > 0.0)
            && self.edges.iter().all(|(&(u, v), &c)| c * c < self.diag[u] * self.diag[v])
    }
}

fn log_h_node(model: &HiwModel, cov: &IncompleteCov, v: usize) -> f64 {
    model.log_h(&[v], &cov.node_block(v))
}

fn log_h_pair(model: &HiwModel, cov: &IncompleteCov, u: usize, v: usize, c: f64) -> f64 {
    let (a, b) = ordered(u, v);
    model.log_h(&[a, b], &cov.pair_block(a, b, c))
}

/// `log p(g) + Σ_edges log h(Σ_uv) − Σ_v (deg v − 1) log h(Σ_v)`.
pub fn log_target(model: &HiwModel, prior: &GraphPrior, g: &LabeledGraph, cov: &IncompleteCov) -> f64 {
    let mut s = prior.log_prior_unnorm(g);
    for (u, v) in g.edges() {
        let Some(c) = cov.edge(u, v) else {
            return f64::NEG_INFINITY;
        };
        s += log_h_pair(model, cov, u, v, c);
    }
    for v in 0..g.p() {
        s -= (g.degree(v) as f64 - 1.0) * log_h_node(model, cov, v);
    }
    s
}

fn log_normal(x: f64, sd: f64) -> f64 {
    -0.5 * (2.0 * std::f64::consts::PI).ln() - sd.ln() - x * x / (2.0 * sd * sd)
}

/// Probability of proposing the removal of a just-added edge.
pub fn forest_reverse_prob_after_add(existing: usize, addable: usize, size_i: usize, size_j: usize) -> f64 {
    1.0 / (existing + 1 + addable - size_i * size_j) as f64
}

/// Probability of proposing the re-addition of a just-removed edge.
pub fn forest_reverse_prob_after_remove(existing: usize, addable: usize, size_i: usize, size_j: usize) -> f64 {
    1.0 / (existing - 1 + addable + size_i * size_j) as f64
}

fn accept<R: Rng + ?Sized>(log_ratio: f64, rng: &mut R) -> bool {
    if log_ratio.is_nan() {
        return false;
    }
    log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio
}

/// One add/remove proposal on a forest; returns whether it was accepted.
pub fn mcmc_forest_step<R: Rng + ?Sized>(
    store: &mut ForestStore,
    cov: &mut IncompleteCov,
    model: &HiwModel,
    prior: &GraphPrior,
    cfg: &McmcConfig,
    rng: &mut R,
) -> Result<bool> {
    let (e, a) = (store.num_existing(), store.num_addable());
    if e + a == 0 {
        return Ok(false);
    }
    let m = store.uniform_move(rng)?;
    let r_fwd = 1.0 / (e + a) as f64;
    let log_ratio = match m {
        ForestMove::Add(u, v) => {
            let (si, sj) = (store.part_size(u), store.part_size(v));
            let gamma = Normal::new(0.0, cfg.sigma_g).expect("positive sd").sample(rng);
            let t = log_h_pair(model, cov, u, v, gamma) - log_h_node(model, cov, u) - log_h_node(model, cov, v);
            let r_rev = forest_reverse_prob_after_add(e, a, si, sj);
            let h = forest_move_graph(store.graph(), m);
            let pr = prior.log_prior_ratio(&h, store.graph())?;
            let lr = t + pr + r_rev.ln() - r_fwd.ln() - log_normal(gamma, cfg.sigma_g);
            if accept(lr, rng) {
                store.apply(m)?;
                cov.edges.insert(ordered(u, v), gamma);
                return Ok(true);
            }
            return Ok(false);
        }
        ForestMove::Remove(u, v) => {
            let (si, sj) = store.split_sizes(u, v)?;
            let gamma = cov.edge(u, v).ok_or_else(|| Error::invalid("covariance missing an edge entry"))?;
            let t = log_h_pair(model, cov, u, v, gamma) - log_h_node(model, cov, u) - log_h_node(model, cov, v);
            let r_rev = forest_reverse_prob_after_remove(e, a, si, sj);
            let h = forest_move_graph(store.graph(), m);
            let pr = prior.log_prior_ratio(&h, store.graph())?;
            -t + pr + r_rev.ln() - r_fwd.ln() + log_normal(gamma, cfg.sigma_g)
        }
    };
    if accept(log_ratio, rng) {
        if let ForestMove::Remove(u, v) = m {
            store.apply(m)?;
            cov.edges.remove(&ordered(u, v));
        }
        Ok(true)
    } else {
        Ok(false)
    }
}

/// One edge-move proposal on a tree; returns whether it was accepted.
pub fn mcmc_tree_step<R: Rng + ?Sized>(
    store: &mut TreeStore,
    cov: &mut IncompleteCov,
    model: &HiwModel,
    prior: &GraphPrior,
    cfg: &McmcConfig,
    rng: &mut R,
) -> Result<bool> {
    if store.p() < 3 {
        return Ok(false);
    }
    let mv = if cfg.system == MoveSystem::A { store.uniform_move(rng)? } else { store.edge_first_move(rng)? };
    let (i, j) = mv.removed();
    let (k, l) = mv.added();
    let gamma_old = cov.edge(i, j).ok_or_else(|| Error::invalid("covariance missing an edge entry"))?;
    let gamma_new = Normal::new(0.0, cfg.sigma_g).expect("positive sd").sample(rng);
    let t = log_h_pair(model, cov, k, l, gamma_new) - log_h_node(model, cov, k) - log_h_node(model, cov, l)
        + log_h_node(model, cov, i)
        + log_h_node(model, cov, j)
        - log_h_pair(model, cov, i, j, gamma_old);
    let h = mv.apply_to(store.graph());
    let pr = prior.log_prior_ratio(&h, store.graph())?;
    let mut log_p = log_normal(gamma_old, cfg.sigma_g) - log_normal(gamma_new, cfg.sigma_g);
    let mut next = None;
    if cfg.system == MoveSystem::A {
        let mut s2 = store.clone();
        s2.apply_move(&mv)?;
        log_p += (store.count_moves() as f64).ln() - (s2.count_moves() as f64).ln();
        next = Some(s2);
    }
    if accept(t + pr + log_p, rng) {
        match next {
            Some(s2) => *store = s2,
            None => store.apply_move(&mv)?,
        }
        cov.edges.remove(&(i, j));
        cov.edges.insert((k, l), gamma_new);
        Ok(true)
    } else {
        Ok(false)
    }
}

/// Perturbs every entry of the incomplete covariance; Metropolis accept/reject.
pub fn mcmc_cov_step<R: Rng + ?Sized>(
    g: &LabeledGraph,
    cov: &mut IncompleteCov,
    model: &HiwModel,
    prior: &GraphPrior,
    cfg: &McmcConfig,
    rng: &mut R,
) -> bool {
    let noise = Normal::new(0.0, cfg.sigma_ij).expect("positive sd");
    let mut prop = cov.clone();
    prop.diag.iter_mut().for_each(|x| *x += noise.sample(rng));
    prop.edges.values_mut().for_each(|x| *x += noise.sample(rng));
    cov_step_with(g, cov, prop, model, prior, rng)
}

fn cov_step_with<R: Rng + ?Sized>(
    g: &LabeledGraph,
    cov: &mut IncompleteCov,
    prop: IncompleteCov,
    model: &HiwModel,
    prior: &GraphPrior,
    rng: &mut R,
) -> bool {
    if !prop.is_valid() {
        return false;
    }
    let lr = log_target(model, prior, g, &prop) - log_target(model, prior, g, cov);
    if accept(lr, rng) {
        *cov = prop;
        true
    } else {
        false
    }
}

/// Alternating structure and covariance moves; the ledger counts visits.
pub fn mcmc_run(
    start: &LabeledGraph,
    cfg: &McmcConfig,
    model: &HiwModel,
    prior: &GraphPrior,
    class: GraphClass,
) -> Result<PosteriorRecord> {
    cfg.validate()?;
    if !class.contains(start) {
        return Err(Error::invalid(format!("start graph is not in the {class:?} class")));
    }
    if start.p() != model.p() {
        return Err(Error::invalid("start graph has the wrong number of nodes"));
    }
    let scorer = Scorer::new(model, prior.clone(), class)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rec = PosteriorRecord::new(start.p(), class, LedgerKind::VisitCount, cfg.top_k);
    let mut cov = IncompleteCov::from_model(model, start);
    let mut clock = Clock::new(cfg.budget);
    let mut i = 0;
    let mut forest = None;
    let mut tree = None;
    match class {
        GraphClass::Forest => forest = Some(ForestStore::init(start)?),
        GraphClass::Tree => tree = Some(TreeStore::init(start, cfg.system == MoveSystem::A)?),
    }
    while clock.go(i) {
        let moved = if let Some(s) = forest.as_mut() {
            mcmc_forest_step(s, &mut cov, model, prior, cfg, &mut rng)?
        } else {
            mcmc_tree_step(tree.as_mut().unwrap(), &mut cov, model, prior, cfg, &mut rng)?
        };
        rec.stats.graph_proposals += 1;
        rec.stats.graph_accepted += moved as usize;
        let g = match (&forest, &tree) {
            (Some(s), _) => s.graph(),
            (_, Some(s)) => s.graph(),
            _ => unreachable!(),
        };
        let ok = mcmc_cov_step(g, &mut cov, model, prior, cfg, &mut rng);
        rec.stats.cov_proposals += 1;
        rec.stats.cov_accepted += ok as usize;
        let key = g.bit_pattern();
        *rec.ledger.entry(key.clone()).or_insert(0.0) += 1.0;
        let s = match rec.scores.get(&key) {
            Some(&s) => s,
            None => {
                let s = scorer.score(g)?;
                rec.scores.insert(key, s);
                rec.stats.scored += 1;
                s
            }
        };
        rec.trace.push(s);
        i += 1;
    }
    rec.stats.iterations = i;
    rec.stats.elapsed_secs = clock.elapsed();
    Ok(rec)
}
