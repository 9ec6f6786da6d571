//! Fast greedy equivalence search.
//!
//! The search keeps a queue of candidate operators ("arrows") ordered by
//! score improvement. The forward phase repeatedly applies the best valid
//! insertion, reverts the graph to its pattern around the changed nodes and
//! rescores only the candidates whose local context changed. The backward
//! phase does the same with deletions. Two steps run in parallel: the initial
//! scan over all variable pairs and each rescoring batch. Workers only
//! evaluate scores; the coordinator merges their results into the queue,
//! whose total order makes the outcome independent of the worker count.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};
use thiserror::Error;

use crate::graph::{EdgeKind, GraphError, MixedGraph};
use crate::score::{CovarianceSource, GaussianBic, ScoreConfig, ScoreError};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("thread count must be at least 1")]
    NoThreads,
    #[error("search needs at least 2 variables, got {0}")]
    TooFewVariables(usize),
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("failed to start worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

/// Which semi-directed paths from `y` back to `x` block inserting `x --> y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CycleCheck {
    /// Every semi-directed path blocks the insert.
    AnyPath,
    /// Paths through a node of `NaYX ∪ S` do not block it.
    #[default]
    ExemptCliqueNodes,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub score: ScoreConfig,
    /// Only score pairs whose single-parent bump is positive.
    pub effect_edge_pruning: bool,
    /// Upper bound on the size of the `T` / `NaYX` subsets enumerated.
    pub max_subset_size: Option<usize>,
    pub threads: usize,
    pub cycle_check: CycleCheck,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            score: ScoreConfig::default(),
            effect_edge_pruning: true,
            max_subset_size: None,
            threads: 1,
            cycle_check: CycleCheck::default(),
        }
    }
}

/// A candidate insertion or deletion of the edge `x --> y`.
///
/// `subset` is `S ⊆ T` for an insertion and `H ⊆ NaYX` for a deletion.
/// `parents` records `Pa(y)` (without `x`) at scoring time, so a stale arrow
/// can be detected when it reaches the head of the queue.
#[derive(Debug, Clone)]
pub struct Arrow {
    pub bump: f64,
    pub x: usize,
    pub y: usize,
    pub na_yx: Vec<usize>,
    pub subset: Vec<usize>,
    pub parents: Vec<usize>,
}

impl Ord for Arrow {
    /// Largest bump first, then `x`, `y` and the sorted subset.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bump
            .total_cmp(&self.bump)
            .then(self.x.cmp(&other.x))
            .then(self.y.cmp(&other.y))
            .then_with(|| self.subset.cmp(&other.subset))
    }
}

impl PartialOrd for Arrow {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Arrow {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Arrow {}

/// Arrows sorted from high to low bump, indexed by ordered pair so every
/// arrow for `(x, y)` can be dropped at once.
#[derive(Debug, Default, Clone)]
pub struct ArrowQueue {
    sorted: BTreeSet<Arrow>,
    by_pair: HashMap<(usize, usize), Vec<Arrow>>,
}

impl ArrowQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Arrow> {
        self.sorted.iter()
    }

    pub fn peek(&self) -> Option<&Arrow> {
        self.sorted.first()
    }

    /// Non-positive bumps are ignored.
    pub fn insert(&mut self, arrow: Arrow) {
        if arrow.bump.is_nan() || arrow.bump <= 0.0 {
            return;
        }
        if self.sorted.insert(arrow.clone()) {
            self.by_pair.entry((arrow.x, arrow.y)).or_default().push(arrow);
        }
    }

    pub fn pop(&mut self) -> Option<Arrow> {
        let arrow = self.sorted.pop_first()?;
        if let Some(list) = self.by_pair.get_mut(&(arrow.x, arrow.y)) {
            list.retain(|a| a != &arrow);
            if list.is_empty() {
                self.by_pair.remove(&(arrow.x, arrow.y));
            }
        }
        Some(arrow)
    }

    /// Drops every arrow for the ordered pair `(x, y)`.
    pub fn remove_pair(&mut self, x: usize, y: usize) {
        if let Some(list) = self.by_pair.remove(&(x, y)) {
            for a in list {
                self.sorted.remove(&a);
            }
        }
    }

    pub fn arrows_for(&self, x: usize, y: usize) -> &[Arrow] {
        self.by_pair.get(&(x, y)).map_or(&[], Vec::as_slice)
    }

    pub fn clear(&mut self) {
        self.sorted.clear();
        self.by_pair.clear();
    }
}

/// Pairs whose single-parent score bump is positive, as sorted neighbor lists.
#[derive(Debug, Clone, Default)]
pub struct EffectEdges {
    neighbors: Vec<Vec<usize>>,
}

impl EffectEdges {
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[v]
    }

    pub fn contains(&self, a: usize, b: usize) -> bool {
        self.neighbors[a].binary_search(&b).is_ok()
    }

    pub fn num_pairs(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }
}

/// Scores `y` with no parents against `y` with `x` as its only parent, once
/// per unordered pair, splitting rows of the lower triangle across workers.
/// Positive pairs seed the queue as `min --> max` and form the effect edges.
pub fn initial_effect_edges(bic: &GaussianBic<'_>, pool: &ThreadPool) -> (Vec<Arrow>, EffectEdges) {
    let p = bic.source().num_vars();
    let hits: Vec<Vec<(usize, usize, f64)>> = pool.install(|| {
        (1..p)
            .into_par_iter()
            .map(|y| {
                (0..y)
                    .filter_map(|x| match bic.score_diff(x, y, &[]) {
                        Ok(d) if d > 0.0 => Some((x, y, d)),
                        _ => None,
                    })
                    .collect()
            })
            .collect()
    });

    let mut neighbors = vec![Vec::new(); p];
    let mut seeds = Vec::new();
    for (x, y, bump) in hits.into_iter().flatten() {
        neighbors[x].push(y);
        neighbors[y].push(x);
        seeds.push(Arrow { bump, x, y, na_yx: Vec::new(), subset: Vec::new(), parents: Vec::new() });
    }
    for list in &mut neighbors {
        list.sort_unstable();
    }
    (seeds, EffectEdges { neighbors })
}

/// Undirected neighbors of `y` that are adjacent to `x`.
pub fn na_yx(g: &MixedGraph, x: usize, y: usize) -> Vec<usize> {
    g.undirected_neighbors(y)
        .iter()
        .copied()
        .filter(|&z| z != x && g.is_adjacent(z, x))
        .collect()
}

/// Undirected neighbors of `y` that are not adjacent to `x`.
pub fn t_neighbors(g: &MixedGraph, x: usize, y: usize) -> Vec<usize> {
    g.undirected_neighbors(y)
        .iter()
        .copied()
        .filter(|&z| z != x && !g.is_adjacent(z, x))
        .collect()
}

/// All subsets of `items` with at most `max` elements, by size then
/// lexicographically.
pub fn subsets(items: &[usize], max: Option<usize>) -> Vec<Vec<usize>> {
    let limit = max.unwrap_or(items.len()).min(items.len());
    let mut out = vec![Vec::new()];
    let mut frontier: Vec<(Vec<usize>, usize)> = vec![(Vec::new(), 0)];
    for _ in 0..limit {
        let mut next = Vec::new();
        for (set, from) in &frontier {
            for k in *from..items.len() {
                let mut s = set.clone();
                s.push(items[k]);
                out.push(s.clone());
                next.push((s, k + 1));
            }
        }
        frontier = next;
    }
    out
}

fn sorted_union(parts: &[&[usize]]) -> Vec<usize> {
    let mut out: Vec<usize> = parts.iter().flat_map(|p| p.iter().copied()).collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Candidate insertions of `x --> y`: one arrow per subset `S` of `T` with a
/// positive bump, conditioning on `Pa(y) ∪ NaYX ∪ S`.
pub fn calc_arrows_forward(
    g: &MixedGraph,
    x: usize,
    y: usize,
    bic: &GaussianBic<'_>,
    max_subset_size: Option<usize>,
) -> Vec<Arrow> {
    if x == y || g.is_adjacent(x, y) {
        return Vec::new();
    }
    let na = na_yx(g, x, y);
    let t = t_neighbors(g, x, y);
    let parents: Vec<usize> = g.parents(y).iter().copied().collect();
    let mut out = Vec::new();
    for s in subsets(&t, max_subset_size) {
        let cond = sorted_union(&[&parents, &na, &s]);
        if let Ok(bump) = bic.score_diff(x, y, &cond) {
            if bump > 0.0 {
                out.push(Arrow { bump, x, y, na_yx: na.clone(), subset: s, parents: parents.clone() });
            }
        }
    }
    out
}

/// Whether the `x`–`y` edge can be removed as `x --> y` (it is `x --> y` or
/// `x --- y`).
pub fn is_deletable(g: &MixedGraph, x: usize, y: usize) -> bool {
    matches!(g.edge(x, y), Some(EdgeKind::Forward | EdgeKind::Undirected))
}

/// Candidate deletions of `x --> y`: one arrow per `H ⊆ NaYX` with
/// `NaYX \ H` a clique and a positive bump. No cycle check is needed.
pub fn calc_arrows_backward(
    g: &MixedGraph,
    x: usize,
    y: usize,
    bic: &GaussianBic<'_>,
    max_subset_size: Option<usize>,
) -> Vec<Arrow> {
    if x == y || !is_deletable(g, x, y) {
        return Vec::new();
    }
    let na = na_yx(g, x, y);
    let parents: Vec<usize> = g.parents(y).iter().copied().filter(|&v| v != x).collect();
    let mut out = Vec::new();
    for h in subsets(&na, max_subset_size) {
        let rest: Vec<usize> = na.iter().copied().filter(|v| !h.contains(v)).collect();
        if !g.is_clique_unchecked(&rest) {
            continue;
        }
        let cond = sorted_union(&[&parents, &rest]);
        if let Ok(diff) = bic.score_diff(x, y, &cond) {
            let bump = -diff;
            if bump > 0.0 {
                out.push(Arrow { bump, x, y, na_yx: na.clone(), subset: h, parents: parents.clone() });
            }
        }
    }
    out
}

/// Validity of an insertion in the current graph: `NaYX ∪ S` is a clique and
/// no blocking semi-directed path runs from `y` to `x`.
pub fn insert_is_valid(g: &MixedGraph, arrow: &Arrow, cycle_check: CycleCheck) -> bool {
    let clique = sorted_union(&[&arrow.na_yx, &arrow.subset]);
    if !g.is_clique_unchecked(&clique) {
        return false;
    }
    let avoid: BTreeSet<usize> = match cycle_check {
        CycleCheck::AnyPath => BTreeSet::new(),
        CycleCheck::ExemptCliqueNodes => clique.into_iter().collect(),
    };
    !g
        .exists_semidirected_path(arrow.y, arrow.x, &avoid)
        .expect("arrow endpoints are graph nodes")
}

/// Adds `x --> y` and orients `s --> y` for each `s` in `subset`, without
/// reverting to a pattern.
pub fn insert_operator(g: &mut MixedGraph, x: usize, y: usize, subset: &[usize]) -> Result<(), GraphError> {
    g.add_directed(x, y)?;
    for &s in subset {
        g.orient(s, y)?;
    }
    Ok(())
}

/// Removes the `x`–`y` edge and, for each `h` in `subset`, orients
/// `y --- h` as `y --> h` and `x --- h` as `x --> h`, without reverting to a
/// pattern.
pub fn delete_operator(g: &mut MixedGraph, x: usize, y: usize, subset: &[usize]) -> Result<(), GraphError> {
    g.remove_edge(x, y)?;
    for &h in subset {
        if g.is_undirected(y, h) {
            g.orient(y, h)?;
        }
        if g.is_undirected(x, h) {
            g.orient(x, h)?;
        }
    }
    Ok(())
}

/// Applies a forward arrow if it is still valid, then reverts locally.
/// Returns the nodes whose incident edges changed, or `None` when rejected.
pub fn apply_insert(
    g: &mut MixedGraph,
    arrow: &Arrow,
    cycle_check: CycleCheck,
) -> Result<Option<BTreeSet<usize>>, GraphError> {
    if g.is_adjacent(arrow.x, arrow.y) || !insert_is_valid(g, arrow, cycle_check) {
        return Ok(None);
    }
    insert_operator(g, arrow.x, arrow.y, &arrow.subset)?;
    let mut seeds = vec![arrow.x, arrow.y];
    seeds.extend_from_slice(&arrow.subset);
    let mut touched = g.revert_local(&seeds)?;
    touched.extend(seeds);
    Ok(Some(touched))
}

/// Applies a backward arrow if `NaYX \ H` is still a clique, then reverts
/// locally. Returns the nodes whose incident edges changed.
pub fn apply_delete(g: &mut MixedGraph, arrow: &Arrow) -> Result<Option<BTreeSet<usize>>, GraphError> {
    if !is_deletable(g, arrow.x, arrow.y) {
        return Ok(None);
    }
    let rest: Vec<usize> = arrow.na_yx.iter().copied().filter(|v| !arrow.subset.contains(v)).collect();
    if !g.is_clique_unchecked(&rest) {
        return Ok(None);
    }
    delete_operator(g, arrow.x, arrow.y, &arrow.subset)?;
    let mut seeds = vec![arrow.x, arrow.y];
    seeds.extend_from_slice(&arrow.subset);
    let mut touched = g.revert_local(&seeds)?;
    touched.extend(seeds);
    Ok(Some(touched))
}

/// An operator the search applied.
#[derive(Debug, Clone, PartialEq)]
pub enum Operation {
    Insert { x: usize, y: usize, subset: Vec<usize>, bump: f64 },
    Delete { x: usize, y: usize, subset: Vec<usize>, bump: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Start,
    Forward,
    Backward,
    Done,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SearchStats {
    pub effect_pairs: usize,
    pub inserts: usize,
    pub deletes: usize,
    /// Ordered pairs evaluated during forward rescoring.
    pub forward_pair_evaluations: usize,
    pub rejected_arrows: usize,
    pub stale_arrows: usize,
}

/// Stepwise driver; [`fgs`] runs it to completion.
pub struct Fgs<'a> {
    bic: GaussianBic<'a>,
    cfg: SearchConfig,
    graph: MixedGraph,
    queue: ArrowQueue,
    effect: Option<EffectEdges>,
    pool: ThreadPool,
    phase: Phase,
    stats: SearchStats,
}

impl<'a> Fgs<'a> {
    pub fn new(src: &'a CovarianceSource, cfg: SearchConfig) -> Result<Self, SearchError> {
        if cfg.threads == 0 {
            return Err(SearchError::NoThreads);
        }
        let p = src.num_vars();
        if p < 2 {
            return Err(SearchError::TooFewVariables(p));
        }
        let bic = GaussianBic::new(src, cfg.score)?;
        let pool = ThreadPoolBuilder::new().num_threads(cfg.threads).build()?;
        let graph = MixedGraph::new(src.names().iter().cloned())?;
        Ok(Self {
            bic,
            cfg,
            graph,
            queue: ArrowQueue::new(),
            effect: None,
            pool,
            phase: Phase::Start,
            stats: SearchStats::default(),
        })
    }

    pub fn graph(&self) -> &MixedGraph {
        &self.graph
    }

    pub fn queue(&self) -> &ArrowQueue {
        &self.queue
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn stats(&self) -> SearchStats {
        self.stats
    }

    pub fn score(&self) -> &GaussianBic<'a> {
        &self.bic
    }

    pub fn effect_edges(&self) -> Option<&EffectEdges> {
        self.effect.as_ref()
    }

    pub fn into_graph(self) -> MixedGraph {
        self.graph
    }

    /// Runs both phases to exhaustion.
    pub fn run(mut self) -> Result<MixedGraph, SearchError> {
        while self.step()?.is_some() {}
        Ok(self.graph)
    }

    /// Applies the next operator, or returns `None` once both phases are
    /// exhausted.
    pub fn step(&mut self) -> Result<Option<Operation>, SearchError> {
        loop {
            match self.phase {
                Phase::Start => {
                    let (seeds, effect) = initial_effect_edges(&self.bic, &self.pool);
                    self.stats.effect_pairs = effect.num_pairs();
                    for a in seeds {
                        self.queue.insert(a);
                    }
                    self.effect = Some(effect);
                    self.phase = Phase::Forward;
                }
                Phase::Forward => {
                    if let Some(op) = self.forward_step()? {
                        return Ok(Some(op));
                    }
                    self.start_backward();
                }
                Phase::Backward => {
                    if let Some(op) = self.backward_step()? {
                        return Ok(Some(op));
                    }
                    self.phase = Phase::Done;
                }
                Phase::Done => return Ok(None),
            }
        }
    }

    fn forward_step(&mut self) -> Result<Option<Operation>, SearchError> {
        while let Some(arrow) = self.queue.pop() {
            let (x, y) = (arrow.x, arrow.y);
            if self.graph.is_adjacent(x, y) {
                continue;
            }
            if !self.forward_context_current(&arrow) {
                self.stats.stale_arrows += 1;
                self.queue.remove_pair(x, y);
                for a in calc_arrows_forward(&self.graph, x, y, &self.bic, self.cfg.max_subset_size) {
                    self.queue.insert(a);
                }
                continue;
            }
            let Some(touched) = apply_insert(&mut self.graph, &arrow, self.cfg.cycle_check)? else {
                self.stats.rejected_arrows += 1;
                continue;
            };
            self.stats.inserts += 1;
            self.queue.remove_pair(x, y);
            self.queue.remove_pair(y, x);
            self.rescore_forward(&touched);
            return Ok(Some(Operation::Insert { x, y, subset: arrow.subset, bump: arrow.bump }));
        }
        Ok(None)
    }

    fn forward_context_current(&self, arrow: &Arrow) -> bool {
        let g = &self.graph;
        let (x, y) = (arrow.x, arrow.y);
        g.parents(y).iter().copied().eq(arrow.parents.iter().copied())
            && na_yx(g, x, y) == arrow.na_yx
            && arrow
                .subset
                .iter()
                .all(|&s| g.is_undirected(s, y) && !g.is_adjacent(s, x))
    }

    fn backward_context_current(&self, arrow: &Arrow) -> bool {
        let g = &self.graph;
        let (x, y) = (arrow.x, arrow.y);
        is_deletable(g, x, y)
            && g.parents(y).iter().copied().filter(|&v| v != x).eq(arrow.parents.iter().copied())
            && na_yx(g, x, y) == arrow.na_yx
    }

    /// Nodes considered as the other end of a rescored pair.
    fn candidates(&self, t: usize) -> Vec<usize> {
        match (&self.effect, self.cfg.effect_edge_pruning) {
            (Some(effect), true) => effect.neighbors(t).to_vec(),
            _ => (0..self.graph.num_nodes()).filter(|&w| w != t).collect(),
        }
    }

    /// Recomputes forward arrows for every ordered pair touching a changed
    /// node.
    pub fn rescore_forward(&mut self, touched: &BTreeSet<usize>) {
        let mut pairs = BTreeSet::new();
        for &t in touched {
            for w in self.candidates(t) {
                pairs.insert((w, t));
                pairs.insert((t, w));
            }
        }
        for &(a, b) in &pairs {
            self.queue.remove_pair(a, b);
        }
        let live: Vec<(usize, usize)> =
            pairs.into_iter().filter(|&(a, b)| !self.graph.is_adjacent(a, b)).collect();
        self.stats.forward_pair_evaluations += live.len();
        let (graph, bic, cap) = (&self.graph, &self.bic, self.cfg.max_subset_size);
        let found: Vec<Vec<Arrow>> = self.pool.install(|| {
            live.par_iter()
                .map(|&(a, b)| calc_arrows_forward(graph, a, b, bic, cap))
                .collect()
        });
        for a in found.into_iter().flatten() {
            self.queue.insert(a);
        }
    }

    fn start_backward(&mut self) {
        self.queue.clear();
        let mut pairs = Vec::new();
        for e in self.graph.edges() {
            match e.kind {
                EdgeKind::Undirected => {
                    pairs.push((e.a, e.b));
                    pairs.push((e.b, e.a));
                }
                EdgeKind::Forward => pairs.push((e.a, e.b)),
                EdgeKind::Backward => pairs.push((e.b, e.a)),
            }
        }
        self.score_backward_pairs(pairs);
        self.phase = Phase::Backward;
    }

    fn score_backward_pairs(&mut self, pairs: Vec<(usize, usize)>) {
        let (graph, bic, cap) = (&self.graph, &self.bic, self.cfg.max_subset_size);
        let found: Vec<Vec<Arrow>> = self.pool.install(|| {
            pairs
                .par_iter()
                .map(|&(a, b)| calc_arrows_backward(graph, a, b, bic, cap))
                .collect()
        });
        for a in found.into_iter().flatten() {
            self.queue.insert(a);
        }
    }

    fn backward_step(&mut self) -> Result<Option<Operation>, SearchError> {
        while let Some(arrow) = self.queue.pop() {
            let (x, y) = (arrow.x, arrow.y);
            if !self.graph.is_adjacent(x, y) {
                continue;
            }
            if !self.backward_context_current(&arrow) {
                self.stats.stale_arrows += 1;
                self.queue.remove_pair(x, y);
                for a in calc_arrows_backward(&self.graph, x, y, &self.bic, self.cfg.max_subset_size) {
                    self.queue.insert(a);
                }
                continue;
            }
            let Some(touched) = apply_delete(&mut self.graph, &arrow)? else {
                self.stats.rejected_arrows += 1;
                continue;
            };
            self.stats.deletes += 1;
            self.queue.remove_pair(x, y);
            self.queue.remove_pair(y, x);
            self.rescore_backward(&touched);
            return Ok(Some(Operation::Delete { x, y, subset: arrow.subset, bump: arrow.bump }));
        }
        Ok(None)
    }

    fn rescore_backward(&mut self, touched: &BTreeSet<usize>) {
        let mut pairs = BTreeSet::new();
        for &t in touched {
            for w in self.graph.adjacent(t) {
                pairs.insert((w, t));
                pairs.insert((t, w));
            }
        }
        for &(a, b) in &pairs {
            self.queue.remove_pair(a, b);
        }
        self.score_backward_pairs(pairs.into_iter().collect());
    }
}

/// Learns a pattern from data: effect-edge scan, forward phase, backward
/// phase.
pub fn fgs(src: &CovarianceSource, cfg: &SearchConfig) -> Result<MixedGraph, SearchError> {
    Fgs::new(src, cfg.clone())?.run()
}

/// Score of a pattern: the summed local scores of any DAG in its class.
pub fn pattern_score(bic: &GaussianBic<'_>, pattern: &MixedGraph) -> Result<f64, SearchError> {
    let dag = pattern.dag_from_pattern()?;
    Ok(bic.dag_score(&dag)?)
}
