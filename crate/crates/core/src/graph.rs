//! Directed acyclic multigraphs with boundary, their layer slicing, and the
//! chain, binary-tree and MERA constructors.
//!
//! Edges flow from the single root side (`In` edges) toward the observables
//! (`Out` edges). Vertex and edge ids are dense integers assigned in
//! construction order; constructors allocate them deterministically so the
//! same arguments always produce the same ids.

use std::collections::VecDeque;
use std::fmt;

use crate::error::{arg_err, Error, Result};

pub type VertexId = usize;
pub type EdgeId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EdgeKind {
    Internal,
    In,
    Out,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Edge {
    pub kind: EdgeKind,
    /// Defined for internal and out edges.
    pub source: Option<VertexId>,
    /// Defined for internal and in edges.
    pub target: Option<VertexId>,
}

/// Which constructor produced a quiver.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GraphKind {
    Chain,
    BinaryTree,
    Mera,
    Custom,
}

impl GraphKind {
    pub fn name(self) -> &'static str {
        match self {
            GraphKind::Chain => "chain",
            GraphKind::BinaryTree => "tree",
            GraphKind::Mera => "mera",
            GraphKind::Custom => "custom",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "chain" | "mps" => Ok(GraphKind::Chain),
            "tree" => Ok(GraphKind::BinaryTree),
            "mera" => Ok(GraphKind::Mera),
            "custom" => Ok(GraphKind::Custom),
            other => arg_err(format!("unknown graph kind '{other}'")),
        }
    }
}

impl fmt::Display for GraphKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A validated acyclic quiver with boundary.
///
/// Besides the incidence data every edge carries two pieces of geometry used
/// to pick default bond dimensions: its `depth` (row index counted from the
/// root, 0 for in edges) and its `span` (how many observables it feeds).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Quiver {
    kind: GraphKind,
    n_vertices: usize,
    edges: Vec<Edge>,
    incoming: Vec<Vec<EdgeId>>,
    outgoing: Vec<Vec<EdgeId>>,
    in_boundary: Vec<EdgeId>,
    out_boundary: Vec<EdgeId>,
    internal: Vec<EdgeId>,
    depth: Vec<usize>,
    span: Vec<usize>,
}

#[derive(Clone, Debug, Default)]
pub struct QuiverBuilder {
    n_vertices: usize,
    edges: Vec<Edge>,
}

impl QuiverBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_vertex(&mut self) -> VertexId {
        self.n_vertices += 1;
        self.n_vertices - 1
    }

    pub fn add_edge(&mut self, source: VertexId, target: VertexId) -> EdgeId {
        self.push(Edge { kind: EdgeKind::Internal, source: Some(source), target: Some(target) })
    }

    pub fn add_in_edge(&mut self, target: VertexId) -> EdgeId {
        self.push(Edge { kind: EdgeKind::In, source: None, target: Some(target) })
    }

    pub fn add_out_edge(&mut self, source: VertexId) -> EdgeId {
        self.push(Edge { kind: EdgeKind::Out, source: Some(source), target: None })
    }

    fn push(&mut self, e: Edge) -> EdgeId {
        self.edges.push(e);
        self.edges.len() - 1
    }

    pub fn build(self) -> Result<Quiver> {
        self.build_as(GraphKind::Custom)
    }

    pub fn build_as(self, kind: GraphKind) -> Result<Quiver> {
        Quiver::from_parts(kind, self.n_vertices, self.edges)
    }
}

impl Quiver {
    /// Validate incidence data and derive the per-vertex edge lists.
    pub fn from_parts(kind: GraphKind, n_vertices: usize, edges: Vec<Edge>) -> Result<Self> {
        let mut incoming = vec![Vec::new(); n_vertices];
        let mut outgoing = vec![Vec::new(); n_vertices];
        let (mut in_boundary, mut out_boundary, mut internal) = (Vec::new(), Vec::new(), Vec::new());
        for (id, e) in edges.iter().enumerate() {
            let (needs_source, needs_target) = match e.kind {
                EdgeKind::Internal => (true, true),
                EdgeKind::In => (false, true),
                EdgeKind::Out => (true, false),
            };
            if e.source.is_some() != needs_source || e.target.is_some() != needs_target {
                return arg_err(format!("edge {id} of kind {:?} has wrong endpoints", e.kind));
            }
            for v in e.source.iter().chain(e.target.iter()) {
                if *v >= n_vertices {
                    return arg_err(format!("edge {id} refers to missing vertex {v}"));
                }
            }
            if let Some(s) = e.source {
                outgoing[s].push(id);
            }
            if let Some(t) = e.target {
                incoming[t].push(id);
            }
            match e.kind {
                EdgeKind::Internal => internal.push(id),
                EdgeKind::In => in_boundary.push(id),
                EdgeKind::Out => out_boundary.push(id),
            }
        }
        if let Some(v) = (0..n_vertices).find(|&v| incoming[v].is_empty() && outgoing[v].is_empty()) {
            return arg_err(format!("vertex {v} has no incident edge"));
        }
        let mut q = Self {
            kind,
            n_vertices,
            edges,
            incoming,
            outgoing,
            in_boundary,
            out_boundary,
            internal,
            depth: Vec::new(),
            span: Vec::new(),
        };
        // Rejects cycles.
        let layering = topological_layers(&q)?;
        q.depth = q.longest_path_depths(&layering);
        q.span = q.reachable_out_counts(&layering);
        Ok(q)
    }

    fn longest_path_depths(&self, layering: &Layering) -> Vec<usize> {
        let mut depth = vec![0; self.edges.len()];
        for layer in layering.layers.iter() {
            for &v in layer {
                let d = self.incoming[v].iter().map(|&e| depth[e]).max().unwrap_or(0);
                for &e in &self.outgoing[v] {
                    depth[e] = d + 1;
                }
            }
        }
        depth
    }

    fn reachable_out_counts(&self, layering: &Layering) -> Vec<usize> {
        let n_out = self.out_boundary.len();
        let out_pos: Vec<Option<usize>> = {
            let mut pos = vec![None; self.edges.len()];
            for (k, &e) in self.out_boundary.iter().enumerate() {
                pos[e] = Some(k);
            }
            pos
        };
        let mut reach = vec![vec![false; n_out]; self.n_vertices];
        for layer in layering.layers.iter().rev() {
            for &v in layer {
                let mut r = vec![false; n_out];
                for &e in &self.outgoing[v] {
                    match self.edges[e].target {
                        Some(t) => r.iter_mut().zip(&reach[t]).for_each(|(a, b)| *a |= *b),
                        None => r[out_pos[e].expect("out edge")] = true,
                    }
                }
                reach[v] = r;
            }
        }
        self.edges
            .iter()
            .map(|e| match e.target {
                Some(t) => reach[t].iter().filter(|&&b| b).count(),
                None => 1,
            })
            .collect()
    }

    pub fn kind(&self) -> GraphKind {
        self.kind
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: EdgeId) -> &Edge {
        &self.edges[e]
    }

    /// Boundary in edges, ascending id.
    pub fn in_edges(&self) -> &[EdgeId] {
        &self.in_boundary
    }

    /// Boundary out edges (observables), ascending id. This is the canonical
    /// position order of a sequence.
    pub fn out_edges(&self) -> &[EdgeId] {
        &self.out_boundary
    }

    pub fn internal_edges(&self) -> &[EdgeId] {
        &self.internal
    }

    /// Edges whose target is `v`, ascending id.
    pub fn incoming(&self, v: VertexId) -> &[EdgeId] {
        &self.incoming[v]
    }

    /// Edges whose source is `v`, ascending id.
    pub fn outgoing(&self, v: VertexId) -> &[EdgeId] {
        &self.outgoing[v]
    }

    pub fn edge_depth(&self, e: EdgeId) -> usize {
        self.depth[e]
    }

    pub fn edge_span(&self, e: EdgeId) -> usize {
        self.span[e]
    }

    /// Number of observables (sequence length).
    pub fn n_positions(&self) -> usize {
        self.out_boundary.len()
    }

    /// A directed tree rooted at a single in edge: every vertex has exactly one
    /// incoming edge.
    pub fn is_tree(&self) -> bool {
        self.in_boundary.len() == 1 && self.incoming.iter().all(|inc| inc.len() == 1)
    }

    /// Whether some ordered vertex pair is joined by two distinct directed paths.
    pub fn has_parallel_paths(&self) -> bool {
        let layering = topological_layers(self).expect("validated quiver is acyclic");
        let order: Vec<VertexId> = layering.layers.iter().flatten().copied().collect();
        for &start in &order {
            let mut paths = vec![0u64; self.n_vertices];
            paths[start] = 1;
            for &v in &order {
                if paths[v] == 0 {
                    continue;
                }
                for &e in &self.outgoing[v] {
                    if let Some(t) = self.edges[e].target {
                        paths[t] = paths[t].saturating_add(paths[v]);
                    }
                }
            }
            if paths.iter().enumerate().any(|(v, &p)| v != start && p > 1) {
                return true;
            }
        }
        false
    }

    fn set_geometry(&mut self, depth: Vec<usize>, span: Vec<usize>) {
        debug_assert_eq!(depth.len(), self.edges.len());
        debug_assert_eq!(span.len(), self.edges.len());
        self.depth = depth;
        self.span = span;
    }
}

/// Vertices partitioned into layers. `layers[0]` is the source-side layer
/// (numbered `L`, fed by the in edges) and the last entry is layer `1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layering {
    pub layers: Vec<Vec<VertexId>>,
}

impl Layering {
    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// Vertices of layer `l`, numbered `1..=L` from the target side.
    pub fn layer(&self, l: usize) -> Result<&[VertexId]> {
        let n = self.layers.len();
        if l == 0 || l > n {
            return arg_err(format!("layer {l} outside 1..={n}"));
        }
        Ok(&self.layers[n - l])
    }

    /// Layer number (`1..=L`) of every vertex.
    pub fn layer_numbers(&self, n_vertices: usize) -> Vec<usize> {
        let n = self.layers.len();
        let mut out = vec![0; n_vertices];
        for (k, layer) in self.layers.iter().enumerate() {
            for &v in layer {
                out[v] = n - k;
            }
        }
        out
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.layers.iter().map(Vec::len).collect()
    }
}

/// Longest-path layering from the source side. Vertices with no incoming
/// internal edge land in layer `L`; within a layer vertices are ascending.
pub fn topological_layers(q: &Quiver) -> Result<Layering> {
    let n = q.n_vertices;
    let mut indegree = vec![0usize; n];
    for e in &q.edges {
        if let (Some(_), Some(t)) = (e.source, e.target) {
            indegree[t] += 1;
        }
    }
    let mut level = vec![0usize; n];
    let mut queue: VecDeque<VertexId> = (0..n).filter(|&v| indegree[v] == 0).collect();
    let mut visited = 0;
    while let Some(v) = queue.pop_front() {
        visited += 1;
        for &e in &q.outgoing[v] {
            if let Some(t) = q.edges[e].target {
                level[t] = level[t].max(level[v] + 1);
                indegree[t] -= 1;
                if indegree[t] == 0 {
                    queue.push_back(t);
                }
            }
        }
    }
    if visited < n {
        return Err(Error::Cycle { edges: find_cycle(q, &indegree) });
    }
    let depth = level.iter().copied().max().map_or(0, |d| d + 1);
    let mut layers = vec![Vec::new(); depth];
    for v in 0..n {
        layers[level[v]].push(v);
    }
    Ok(Layering { layers })
}

// Every vertex left with positive indegree after Kahn's pass has a remaining
// predecessor, so walking predecessors must revisit a vertex.
fn find_cycle(q: &Quiver, indegree: &[usize]) -> Vec<EdgeId> {
    let start = (0..q.n_vertices).find(|&v| indegree[v] > 0).expect("cycle exists");
    let mut seen_at = vec![None; q.n_vertices];
    let mut walk: Vec<EdgeId> = Vec::new();
    let mut v = start;
    loop {
        if let Some(pos) = seen_at[v] {
            let mut cycle: Vec<EdgeId> = walk[pos..].to_vec();
            cycle.reverse();
            return cycle;
        }
        seen_at[v] = Some(walk.len());
        let e = *q.incoming[v]
            .iter()
            .find(|&&e| q.edges[e].source.is_some_and(|s| indegree[s] > 0))
            .expect("remaining vertex has a remaining predecessor");
        walk.push(e);
        v = q.edges[e].source.expect("internal edge");
    }
}

/// Matrix-product chain of `n` three-valent vertices. The in edge enters
/// vertex 0; vertex `k` emits observable `k` and a bond to vertex `k + 1`.
pub fn build_chain(n: usize) -> Result<Quiver> {
    if n == 0 {
        return arg_err("chain needs at least one vertex");
    }
    let mut b = QuiverBuilder::new();
    let vertices: Vec<VertexId> = (0..n).map(|_| b.add_vertex()).collect();
    let mut depth = Vec::new();
    let mut span = Vec::new();
    b.add_in_edge(vertices[0]);
    depth.push(0);
    span.push(n);
    for k in 0..n {
        b.add_out_edge(vertices[k]);
        depth.push(k + 1);
        span.push(1);
        if k + 1 < n {
            b.add_edge(vertices[k], vertices[k + 1]);
            depth.push(k + 1);
            span.push(n - k - 1);
        }
    }
    let mut q = b.build_as(GraphKind::Chain)?;
    q.set_geometry(depth, span);
    Ok(q)
}

fn log2_exact(n: usize, what: &str) -> Result<u32> {
    if n == 0 || !n.is_power_of_two() {
        return arg_err(format!("{what} needs a power-of-two number of leaves, got {n}"));
    }
    Ok(n.trailing_zeros())
}

/// Perfect binary tree of type-(2,1) vertices with `n = 2^d` observables.
///
/// Vertices are numbered breadth first from the root; the in edge has id 0,
/// internal edges follow in breadth-first order and the observables come
/// last, left to right. `n = 1` degenerates to a single vertex with one
/// observable.
pub fn build_binary_tree(n: usize) -> Result<Quiver> {
    let d = log2_exact(n, "binary tree")?;
    if d == 0 {
        let mut q = build_chain(1)?;
        q.kind = GraphKind::BinaryTree;
        return Ok(q);
    }
    let mut b = QuiverBuilder::new();
    let n_vertices = n - 1;
    for _ in 0..n_vertices {
        b.add_vertex();
    }
    let mut depth = vec![0];
    let mut span = vec![n];
    b.add_in_edge(0);
    // Heap layout: children of v are 2v+1 and 2v+2; level k holds 2^k vertices.
    let first_leaf_parent: usize = (1 << (d - 1)) - 1;
    for v in 0..first_leaf_parent {
        let level = usize::BITS - (v + 1).leading_zeros() - 1;
        for child in [2 * v + 1, 2 * v + 2] {
            b.add_edge(v, child);
            depth.push(level as usize + 1);
            span.push(n >> (level + 1));
        }
    }
    for v in first_leaf_parent..n_vertices {
        for _ in 0..2 {
            b.add_out_edge(v);
            depth.push(d as usize);
            span.push(1);
        }
    }
    let mut q = b.build_as(GraphKind::BinaryTree)?;
    q.set_geometry(depth, span);
    Ok(q)
}

/// Binary tree with type-(2,2) disentanglers interleaved.
///
/// Starting from the root, each tree layer doubles the row width. After
/// every row of width at least 4 a disentangler joins each adjacent pair of
/// sibling blocks, i.e. row slots `(2j+1, 2j+2)` for `j = 0..width/2-1`. The
/// boundary is open, so a row of width `W` gets `W/2 - 1` disentanglers and
/// the outermost slots are untouched.
pub fn build_mera(n: usize) -> Result<Quiver> {
    let d = log2_exact(n, "MERA")?;
    if d == 0 {
        return arg_err("MERA needs at least two observables");
    }

    struct Slot {
        source: VertexId,
        depth: usize,
        span: usize,
    }

    let mut b = QuiverBuilder::new();
    let mut depth = Vec::new();
    let mut span = Vec::new();
    let mut consume = |b: &mut QuiverBuilder, slot: &Slot, target: VertexId| {
        b.add_edge(slot.source, target);
        depth.push(slot.depth);
        span.push(slot.span);
    };

    let root = b.add_vertex();
    b.add_in_edge(root);
    let mut edge_meta = vec![(0usize, n)];
    let mut row: Vec<Slot> = (0..2).map(|_| Slot { source: root, depth: 1, span: n / 2 }).collect();

    loop {
        let width = row.len();
        if width >= 4 {
            for j in 0..width / 2 - 1 {
                let (l, r) = (2 * j + 1, 2 * j + 2);
                let dis = b.add_vertex();
                consume(&mut b, &row[l], dis);
                consume(&mut b, &row[r], dis);
                row[l].source = dis;
                row[r].source = dis;
            }
        }
        if width == n {
            break;
        }
        let mut next = Vec::with_capacity(2 * width);
        for slot in &row {
            let v = b.add_vertex();
            consume(&mut b, slot, v);
            for _ in 0..2 {
                next.push(Slot { source: v, depth: slot.depth + 1, span: slot.span / 2 });
            }
        }
        row = next;
    }
    edge_meta.extend(depth.iter().copied().zip(span.iter().copied()));
    for slot in &row {
        b.add_out_edge(slot.source);
        edge_meta.push((slot.depth, 1));
    }
    let mut q = b.build_as(GraphKind::Mera)?;
    let (depth, span) = edge_meta.into_iter().unzip();
    q.set_geometry(depth, span);
    Ok(q)
}

/// Rebuild a quiver of the named kind with `n` observables.
pub fn build(kind: GraphKind, n: usize) -> Result<Quiver> {
    match kind {
        GraphKind::Chain => build_chain(n),
        GraphKind::BinaryTree => build_binary_tree(n),
        GraphKind::Mera => build_mera(n),
        GraphKind::Custom => arg_err("custom quivers have no constructor"),
    }
}
