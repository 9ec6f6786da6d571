//! Mixed graphs over indexed variables: directed and undirected edges,
//! unshielded-collider detection, Meek orientation rules and reversion of a
//! partially directed graph to its pattern (CPDAG).

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("unknown variable index {0}")]
    UnknownVariable(usize),
    #[error("unknown variable name `{0}`")]
    UnknownName(String),
    #[error("duplicate variable name `{0}`")]
    DuplicateName(String),
    #[error("self loop on `{0}`")]
    SelfLoop(String),
    #[error("`{0}` and `{1}` are already adjacent")]
    AlreadyAdjacent(String, String),
    #[error("`{0}` and `{1}` are not adjacent")]
    NotAdjacent(String, String),
    #[error("graph contains a directed cycle")]
    DirectedCycle,
    #[error("pattern has no consistent DAG extension")]
    NoConsistentExtension,
}

/// Edge type between an ordered pair `(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeKind {
    Undirected,
    /// `a --> b`
    Forward,
    /// `a <-- b`
    Backward,
}

impl EdgeKind {
    pub fn reversed(self) -> Self {
        match self {
            EdgeKind::Undirected => EdgeKind::Undirected,
            EdgeKind::Forward => EdgeKind::Backward,
            EdgeKind::Backward => EdgeKind::Forward,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub kind: EdgeKind,
}

impl Edge {
    /// `(tail, head)` for directed edges.
    pub fn directed(&self) -> Option<(usize, usize)> {
        match self.kind {
            EdgeKind::Undirected => None,
            EdgeKind::Forward => Some((self.a, self.b)),
            EdgeKind::Backward => Some((self.b, self.a)),
        }
    }
}

/// A graph with directed and undirected edges, at most one edge per pair.
///
/// Adjacency is stored per node as three sorted sets (parents, children,
/// undirected neighbors). Every mutation keeps both endpoints' sets in sync.
#[derive(Clone, PartialEq, Eq)]
pub struct MixedGraph {
    names: Vec<String>,
    index: HashMap<String, usize>,
    parents: Vec<BTreeSet<usize>>,
    children: Vec<BTreeSet<usize>>,
    undirected: Vec<BTreeSet<usize>>,
}

impl fmt::Debug for MixedGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MixedGraph")
            .field("nodes", &self.names.len())
            .field("edges", &self.to_string())
            .finish()
    }
}

impl MixedGraph {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self, GraphError> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        let mut index = HashMap::with_capacity(names.len());
        for (i, name) in names.iter().enumerate() {
            if index.insert(name.clone(), i).is_some() {
                return Err(GraphError::DuplicateName(name.clone()));
            }
        }
        let p = names.len();
        Ok(Self {
            names,
            index,
            parents: vec![BTreeSet::new(); p],
            children: vec![BTreeSet::new(); p],
            undirected: vec![BTreeSet::new(); p],
        })
    }

    /// Graph over `X1..Xp` with no edges.
    pub fn with_default_names(p: usize) -> Self {
        Self::new((1..=p).map(|i| format!("X{i}"))).expect("generated names are unique")
    }

    /// Same nodes, no edges.
    pub fn empty_like(&self) -> Self {
        let p = self.num_nodes();
        Self {
            names: self.names.clone(),
            index: self.index.clone(),
            parents: vec![BTreeSet::new(); p],
            children: vec![BTreeSet::new(); p],
            undirected: vec![BTreeSet::new(); p],
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.names.len()
    }

    pub fn num_edges(&self) -> usize {
        let directed: usize = self.children.iter().map(BTreeSet::len).sum();
        let undirected: usize = self.undirected.iter().map(BTreeSet::len).sum();
        directed + undirected / 2
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn index_of(&self, name: &str) -> Result<usize, GraphError> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| GraphError::UnknownName(name.to_string()))
    }

    fn check(&self, i: usize) -> Result<(), GraphError> {
        if i < self.num_nodes() {
            Ok(())
        } else {
            Err(GraphError::UnknownVariable(i))
        }
    }

    pub fn parents(&self, i: usize) -> &BTreeSet<usize> {
        &self.parents[i]
    }

    pub fn children(&self, i: usize) -> &BTreeSet<usize> {
        &self.children[i]
    }

    pub fn undirected_neighbors(&self, i: usize) -> &BTreeSet<usize> {
        &self.undirected[i]
    }

    /// All adjacent nodes, sorted.
    pub fn adjacent(&self, i: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.parents[i]
            .iter()
            .chain(&self.children[i])
            .chain(&self.undirected[i])
            .copied()
            .collect();
        out.sort_unstable();
        out
    }

    pub fn degree(&self, i: usize) -> usize {
        self.parents[i].len() + self.children[i].len() + self.undirected[i].len()
    }

    pub fn is_adjacent(&self, a: usize, b: usize) -> bool {
        self.undirected[a].contains(&b) || self.children[a].contains(&b) || self.parents[a].contains(&b)
    }

    /// `a --> b`
    pub fn is_directed(&self, a: usize, b: usize) -> bool {
        self.children[a].contains(&b)
    }

    pub fn is_undirected(&self, a: usize, b: usize) -> bool {
        self.undirected[a].contains(&b)
    }

    /// Kind of the edge between `a` and `b`, read in the order `(a, b)`.
    pub fn edge(&self, a: usize, b: usize) -> Option<EdgeKind> {
        if self.undirected[a].contains(&b) {
            Some(EdgeKind::Undirected)
        } else if self.children[a].contains(&b) {
            Some(EdgeKind::Forward)
        } else if self.parents[a].contains(&b) {
            Some(EdgeKind::Backward)
        } else {
            None
        }
    }

    /// Edges ordered by (min endpoint, max endpoint), with `a < b`.
    pub fn edges(&self) -> Vec<Edge> {
        let mut out = Vec::new();
        for a in 0..self.num_nodes() {
            for b in self.adjacent(a) {
                if b > a {
                    let kind = self.edge(a, b).expect("adjacent");
                    out.push(Edge { a, b, kind });
                }
            }
        }
        out
    }

    pub fn is_fully_directed(&self) -> bool {
        self.undirected.iter().all(BTreeSet::is_empty)
    }

    fn check_new_pair(&self, a: usize, b: usize) -> Result<(), GraphError> {
        self.check(a)?;
        self.check(b)?;
        if a == b {
            return Err(GraphError::SelfLoop(self.names[a].clone()));
        }
        if self.is_adjacent(a, b) {
            return Err(GraphError::AlreadyAdjacent(self.names[a].clone(), self.names[b].clone()));
        }
        Ok(())
    }

    /// Adds `a --> b`.
    pub fn add_directed(&mut self, a: usize, b: usize) -> Result<(), GraphError> {
        self.check_new_pair(a, b)?;
        self.children[a].insert(b);
        self.parents[b].insert(a);
        Ok(())
    }

    pub fn add_undirected(&mut self, a: usize, b: usize) -> Result<(), GraphError> {
        self.check_new_pair(a, b)?;
        self.undirected[a].insert(b);
        self.undirected[b].insert(a);
        Ok(())
    }

    pub fn add_edge(&mut self, edge: Edge) -> Result<(), GraphError> {
        match edge.kind {
            EdgeKind::Undirected => self.add_undirected(edge.a, edge.b),
            EdgeKind::Forward => self.add_directed(edge.a, edge.b),
            EdgeKind::Backward => self.add_directed(edge.b, edge.a),
        }
    }

    /// Removes whatever edge joins `a` and `b`, returning its kind.
    pub fn remove_edge(&mut self, a: usize, b: usize) -> Result<EdgeKind, GraphError> {
        self.check(a)?;
        self.check(b)?;
        let kind = self
            .edge(a, b)
            .ok_or_else(|| GraphError::NotAdjacent(self.names[a].clone(), self.names[b].clone()))?;
        self.detach(a, b);
        Ok(kind)
    }

    fn detach(&mut self, a: usize, b: usize) {
        self.undirected[a].remove(&b);
        self.undirected[b].remove(&a);
        self.children[a].remove(&b);
        self.parents[b].remove(&a);
        self.children[b].remove(&a);
        self.parents[a].remove(&b);
    }

    /// Replaces the existing `a`–`b` edge with `a --> b`.
    pub fn orient(&mut self, a: usize, b: usize) -> Result<(), GraphError> {
        self.remove_edge(a, b)?;
        self.children[a].insert(b);
        self.parents[b].insert(a);
        Ok(())
    }

    /// Replaces the existing `a`–`b` edge with `a --- b`. Adjacency is kept.
    pub fn undirect(&mut self, a: usize, b: usize) -> Result<(), GraphError> {
        self.remove_edge(a, b)?;
        self.undirected[a].insert(b);
        self.undirected[b].insert(a);
        Ok(())
    }

    /// True iff every pair in `nodes` is adjacent.
    pub fn is_clique(&self, nodes: &[usize]) -> Result<bool, GraphError> {
        for &v in nodes {
            self.check(v)?;
        }
        Ok(self.is_clique_unchecked(nodes))
    }

    pub(crate) fn is_clique_unchecked(&self, nodes: &[usize]) -> bool {
        nodes.iter().enumerate().all(|(k, &a)| {
            nodes[k + 1..]
                .iter()
                .all(|&b| a == b || self.is_adjacent(a, b))
        })
    }

    /// Breadth-first search for a path from `from` to `to` made of undirected
    /// edges and edges directed along the direction of travel, entering no
    /// node in `avoid`.
    pub fn exists_semidirected_path(
        &self,
        from: usize,
        to: usize,
        avoid: &BTreeSet<usize>,
    ) -> Result<bool, GraphError> {
        self.check(from)?;
        self.check(to)?;
        let mut visited = vec![false; self.num_nodes()];
        visited[from] = true;
        let mut queue = VecDeque::from([from]);
        while let Some(u) = queue.pop_front() {
            for &v in self.children[u].iter().chain(&self.undirected[u]) {
                if v == to {
                    return Ok(true);
                }
                if !visited[v] && !avoid.contains(&v) {
                    visited[v] = true;
                    queue.push_back(v);
                }
            }
        }
        Ok(false)
    }

    pub fn has_directed_cycle(&self) -> bool {
        self.topological_order().is_none()
    }

    /// Topological order of the directed part, or `None` if it has a cycle.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let p = self.num_nodes();
        let mut indegree: Vec<usize> = self.parents.iter().map(BTreeSet::len).collect();
        let mut ready: VecDeque<usize> = (0..p).filter(|&i| indegree[i] == 0).collect();
        let mut order = Vec::with_capacity(p);
        while let Some(u) = ready.pop_front() {
            order.push(u);
            for &c in &self.children[u] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    ready.push_back(c);
                }
            }
        }
        (order.len() == p).then_some(order)
    }

    /// Whether `a --> b` is one arm of an unshielded collider `a --> b <-- c`.
    pub fn in_unshielded_collider(&self, a: usize, b: usize) -> bool {
        self.is_directed(a, b)
            && self.parents[b]
                .iter()
                .any(|&c| c != a && !self.is_adjacent(a, c))
    }

    /// Unshielded colliders `(a, b, c)` with `a < c`.
    pub fn unshielded_colliders(&self) -> BTreeSet<(usize, usize, usize)> {
        let mut out = BTreeSet::new();
        for b in 0..self.num_nodes() {
            let pa: Vec<usize> = self.parents[b].iter().copied().collect();
            for (k, &a) in pa.iter().enumerate() {
                for &c in &pa[k + 1..] {
                    if !self.is_adjacent(a, c) {
                        out.insert((a, b, c));
                    }
                }
            }
        }
        out
    }

    /// Skeleton as unordered pairs `(min, max)`.
    pub fn skeleton(&self) -> BTreeSet<(usize, usize)> {
        self.edges().into_iter().map(|e| (e.a, e.b)).collect()
    }

    /// Applies Meek rules R1–R4 to a fixpoint, starting from `focus` (or every
    /// node when `None`) and following any node whose edges change. Returns
    /// the newly directed edges as `(tail, head)`.
    pub fn apply_meek_rules(&mut self, focus: Option<&[usize]>) -> Vec<(usize, usize)> {
        let p = self.num_nodes();
        let mut queued = vec![false; p];
        let mut queue = VecDeque::new();
        let start: Vec<usize> = match focus {
            Some(nodes) => nodes.to_vec(),
            None => (0..p).collect(),
        };
        for v in start {
            if v < p && !queued[v] {
                queued[v] = true;
                queue.push_back(v);
            }
        }

        let mut oriented = Vec::new();
        while let Some(w) = queue.pop_front() {
            queued[w] = false;
            let neighbors: Vec<usize> = self.undirected[w].iter().copied().collect();
            for z in neighbors {
                if !self.is_undirected(w, z) {
                    continue;
                }
                let (tail, head) = if self.meek_forces(w, z) {
                    (w, z)
                } else if self.meek_forces(z, w) {
                    (z, w)
                } else {
                    continue;
                };
                self.orient(tail, head).expect("edge exists");
                oriented.push((tail, head));
                let mut wake = vec![tail, head];
                wake.extend(self.adjacent(tail));
                wake.extend(self.adjacent(head));
                for v in wake {
                    if !queued[v] {
                        queued[v] = true;
                        queue.push_back(v);
                    }
                }
            }
        }
        oriented
    }

    /// Whether some Meek rule forces the undirected edge `a --- b` to `a --> b`.
    fn meek_forces(&self, a: usize, b: usize) -> bool {
        // R1: c --> a --- b, c and b nonadjacent.
        if self.parents[a].iter().any(|&c| !self.is_adjacent(c, b)) {
            return true;
        }
        // R2: a --> c --> b.
        if self.children[a].iter().any(|c| self.parents[b].contains(c)) {
            return true;
        }
        // R3: a --- c --> b, a --- d --> b, c and d nonadjacent.
        let kites: Vec<usize> = self.parents[b]
            .iter()
            .copied()
            .filter(|c| self.undirected[a].contains(c))
            .collect();
        for (k, &c) in kites.iter().enumerate() {
            if kites[k + 1..].iter().any(|&d| !self.is_adjacent(c, d)) {
                return true;
            }
        }
        // R4: c --> d --> b with a adjacent to c and d, c and b nonadjacent.
        for &d in &self.parents[b] {
            if !self.is_adjacent(a, d) {
                continue;
            }
            if self.parents[d]
                .iter()
                .any(|&c| c != a && self.is_adjacent(a, c) && !self.is_adjacent(c, b))
            {
                return true;
            }
        }
        false
    }

    /// The pattern of this graph: keeps unshielded colliders directed,
    /// undirects every other edge, then runs the Meek rules over all nodes.
    pub fn revert_to_cpdag_global(&self) -> Result<MixedGraph, GraphError> {
        if self.has_directed_cycle() {
            return Err(GraphError::DirectedCycle);
        }
        let mut out = self.empty_like();
        for e in self.edges() {
            match e.directed() {
                Some((t, h)) if self.in_unshielded_collider(t, h) => out.add_directed(t, h)?,
                _ => out.add_undirected(e.a, e.b)?,
            }
        }
        out.apply_meek_rules(None);
        Ok(out)
    }

    /// Reverts to the pattern in place, working outward from `x` and `y`.
    pub fn revert_to_cpdag_local(&mut self, x: usize, y: usize) -> Result<BTreeSet<usize>, GraphError> {
        self.revert_local(&[x, y])
    }

    /// Local reversion seeded at the nodes whose edges were just edited.
    ///
    /// Non-collider orientations at the seeds are cleared; whenever an edge
    /// `w --> v` loses its orientation, the same clearing is applied at the
    /// other endpoint. Meek rules then run from every cleared node and its
    /// neighbors. The result equals [`MixedGraph::revert_to_cpdag_global`].
    ///
    /// Returns the nodes whose incident edges differ from the input graph.
    pub fn revert_local(&mut self, seeds: &[usize]) -> Result<BTreeSet<usize>, GraphError> {
        for &s in seeds {
            self.check(s)?;
        }
        if self.has_directed_cycle() {
            return Err(GraphError::DirectedCycle);
        }
        let p = self.num_nodes();
        let mut before: HashMap<(usize, usize), EdgeKind> = HashMap::new();
        let mut visited = vec![false; p];
        let mut region = Vec::new();
        let mut queue: VecDeque<usize> = VecDeque::new();
        for &s in seeds {
            if !visited[s] {
                visited[s] = true;
                queue.push_back(s);
            }
        }
        while let Some(w) = queue.pop_front() {
            region.push(w);
            let incident: Vec<(usize, usize)> = self.parents[w]
                .iter()
                .map(|&u| (u, w))
                .chain(self.children[w].iter().map(|&c| (w, c)))
                .collect();
            for (t, h) in incident {
                if self.in_unshielded_collider(t, h) {
                    continue;
                }
                before.entry(key(t, h)).or_insert_with(|| self.edge_kind_keyed(t, h));
                self.undirect(t, h).expect("edge exists");
                let other = if t == w { h } else { t };
                if !visited[other] {
                    visited[other] = true;
                    queue.push_back(other);
                }
            }
        }

        let mut focus: BTreeSet<usize> = region.iter().copied().collect();
        for &w in &region {
            focus.extend(self.adjacent(w));
        }
        let focus: Vec<usize> = focus.into_iter().collect();
        // Meek only orients undirected edges, so an edge not cleared above
        // was undirected in the input.
        for (t, h) in self.apply_meek_rules(Some(&focus)) {
            before.entry(key(t, h)).or_insert(EdgeKind::Undirected);
        }

        let mut touched = BTreeSet::new();
        for ((a, b), was) in before {
            if self.edge(a, b) != Some(was) {
                touched.insert(a);
                touched.insert(b);
            }
        }
        Ok(touched)
    }

    fn edge_kind_keyed(&self, a: usize, b: usize) -> EdgeKind {
        let (lo, hi) = key(a, b);
        self.edge(lo, hi).expect("adjacent")
    }

    /// A DAG in this pattern's equivalence class. Undirected edges are
    /// directed one at a time (lower index to higher) with Meek propagation
    /// after each choice.
    pub fn dag_from_pattern(&self) -> Result<MixedGraph, GraphError> {
        if self.has_directed_cycle() {
            return Err(GraphError::NoConsistentExtension);
        }
        let mut dag = self.clone();
        dag.apply_meek_rules(None);
        while let Some(e) = dag.edges().into_iter().find(|e| e.kind == EdgeKind::Undirected) {
            dag.orient(e.a, e.b)?;
            dag.apply_meek_rules(Some(&[e.a, e.b]));
        }
        if dag.has_directed_cycle() || dag.unshielded_colliders() != self.unshielded_colliders() {
            return Err(GraphError::NoConsistentExtension);
        }
        Ok(dag)
    }

    /// Parses the edge-list text format. Node names not in the graph are an
    /// error.
    pub fn read_edges(&mut self, text: &str) -> Result<(), EdgeParseError> {
        for (lineno, line) in text.lines().enumerate() {
            let lineno = lineno + 1;
            if line.trim().is_empty() {
                continue;
            }
            let (a, kind, b) = split_edge_line(line).ok_or_else(|| EdgeParseError {
                line: lineno,
                message: format!("malformed edge line `{line}`"),
            })?;
            let wrap = |e: GraphError| EdgeParseError { line: lineno, message: e.to_string() };
            let a = self.index_of(a).map_err(wrap)?;
            let b = self.index_of(b).map_err(wrap)?;
            self.add_edge(Edge { a, b, kind }).map_err(wrap)?;
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct EdgeParseError {
    pub line: usize,
    pub message: String,
}

/// Splits `A --> B` / `A --- B` into its parts.
pub fn split_edge_line(line: &str) -> Option<(&str, EdgeKind, &str)> {
    let mut parts = line.split_whitespace();
    let a = parts.next()?;
    let kind = match parts.next()? {
        "-->" => EdgeKind::Forward,
        "---" => EdgeKind::Undirected,
        _ => return None,
    };
    let b = parts.next()?;
    if parts.next().is_some() {
        return None;
    }
    Some((a, kind, b))
}

fn key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl fmt::Display for MixedGraph {
    /// One edge per line, `A --> B` or `A --- B`, ordered by endpoint indexes.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in self.edges() {
            match e.kind {
                EdgeKind::Undirected => writeln!(f, "{} --- {}", self.names[e.a], self.names[e.b])?,
                EdgeKind::Forward => writeln!(f, "{} --> {}", self.names[e.a], self.names[e.b])?,
                EdgeKind::Backward => writeln!(f, "{} --> {}", self.names[e.b], self.names[e.a])?,
            }
        }
        Ok(())
    }
}
