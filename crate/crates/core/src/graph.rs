//! Dependency graphs and the combinatorial constructions built on them:
//! graph distances, balls, dominating-set certificates, the auxiliary graph
//! on a dominating set, and greedy colouring.
//!
//! Vertices are `0..p` inside the library. The edge-list text format is
//! 1-based.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};
use std::fmt::Write as _;

use rand::Rng;

use crate::error::{Error, Result};

/// Shortest-path length. Disconnected pairs are `Infinite`, never a large
/// finite number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Distance {
    Finite(usize),
    Infinite,
}

impl Distance {
    pub fn finite(self) -> Option<usize> {
        match self {
            Distance::Finite(d) => Some(d),
            Distance::Infinite => None,
        }
    }

    pub fn is_within(self, radius: usize) -> bool {
        matches!(self, Distance::Finite(d) if d <= radius)
    }
}

/// Undirected simple graph on `0..p` with sorted adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DependencyGraph {
    adj: Vec<Vec<usize>>,
    edge_count: usize,
}

impl DependencyGraph {
    /// Graph on `p` vertices with no edges.
    pub fn edgeless(p: usize) -> Self {
        Self {
            adj: vec![Vec::new(); p],
            edge_count: 0,
        }
    }

    /// Builds a graph from 0-based edges. Self-loops, duplicates and
    /// out-of-range endpoints are rejected.
    pub fn from_edges<I>(p: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        if p == 0 {
            return Err(Error::invalid("graph needs at least one vertex"));
        }
        let mut g = Self::edgeless(p);
        for (u, v) in edges {
            g.try_add_edge(u, v).map_err(Error::InvalidArgument)?;
        }
        g.finish();
        Ok(g)
    }

    fn try_add_edge(&mut self, u: usize, v: usize) -> std::result::Result<(), String> {
        let p = self.p();
        if u >= p || v >= p {
            return Err(format!("edge ({}, {}) out of range for p = {p}", u + 1, v + 1));
        }
        if u == v {
            return Err(format!("self-loop at vertex {}", u + 1));
        }
        if self.adj[u].contains(&v) {
            return Err(format!("duplicate edge ({}, {})", u + 1, v + 1));
        }
        self.adj[u].push(v);
        self.adj[v].push(u);
        self.edge_count += 1;
        Ok(())
    }

    fn finish(&mut self) {
        for list in &mut self.adj {
            list.sort_unstable();
        }
    }

    /// Path `0 - 1 - ... - p-1`.
    pub fn path(p: usize) -> Self {
        Self::m_dependent(p, 1)
    }

    /// Complete graph `K_p`.
    pub fn complete(p: usize) -> Self {
        Self::m_dependent(p, p.saturating_sub(1))
    }

    /// The m-dependent graph: edges `{i, i+k}` for `1 <= k <= m`.
    pub fn m_dependent(p: usize, m: usize) -> Self {
        let adj = (0..p)
            .map(|i| {
                let lo = i.saturating_sub(m);
                let hi = (i + m).min(p.saturating_sub(1));
                (lo..=hi).filter(|&j| j != i).collect::<Vec<_>>()
            })
            .collect::<Vec<_>>();
        let edge_count = adj.iter().map(Vec::len).sum::<usize>() / 2;
        Self { adj, edge_count }
    }

    /// Disjoint union of cliques over consecutive blocks of the given sizes.
    pub fn blocks(sizes: &[usize]) -> Result<Self> {
        if sizes.contains(&0) {
            return Err(Error::invalid("empty block"));
        }
        let p: usize = sizes.iter().sum();
        if p == 0 {
            return Err(Error::invalid("no blocks"));
        }
        let mut adj = Vec::with_capacity(p);
        let mut start = 0;
        for &size in sizes {
            for i in start..start + size {
                adj.push((start..start + size).filter(|&j| j != i).collect());
            }
            start += size;
        }
        let edge_count = sizes.iter().map(|s| s * (s - 1) / 2).sum();
        Ok(Self { adj, edge_count })
    }

    /// Erdős–Rényi graph `G(p, prob)`.
    pub fn random_gnp<R: Rng + ?Sized>(p: usize, prob: f64, rng: &mut R) -> Self {
        let mut g = Self::edgeless(p);
        for u in 0..p {
            for v in u + 1..p {
                if rng.random::<f64>() < prob {
                    g.adj[u].push(v);
                    g.adj[v].push(u);
                    g.edge_count += 1;
                }
            }
        }
        g.finish();
        g
    }

    /// Graph with an edge between every pair at distance at most 2.
    pub fn square(&self) -> Self {
        let mut scratch = Bfs::new(self.p());
        let adj = (0..self.p())
            .map(|v| {
                let mut ball: Vec<usize> = scratch
                    .run(self, v, 2)
                    .iter()
                    .map(|&(u, _)| u)
                    .filter(|&u| u != v)
                    .collect();
                ball.sort_unstable();
                ball
            })
            .collect::<Vec<_>>();
        let edge_count = adj.iter().map(Vec::len).sum::<usize>() / 2;
        Self { adj, edge_count }
    }

    pub fn p(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adj[u].binary_search(&v).is_ok()
    }

    /// Edges `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(u, list)| list.iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
    }

    fn check_vertex(&self, v: usize) -> Result<()> {
        if v < self.p() {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "vertex {v} out of range for p = {}",
                self.p()
            )))
        }
    }

    pub fn distance(&self, u: usize, v: usize) -> Result<Distance> {
        self.check_vertex(u)?;
        self.check_vertex(v)?;
        if u == v {
            return Ok(Distance::Finite(0));
        }
        let mut seen = vec![false; self.p()];
        let mut queue = VecDeque::from([(u, 0usize)]);
        seen[u] = true;
        while let Some((w, depth)) = queue.pop_front() {
            for &x in &self.adj[w] {
                if x == v {
                    return Ok(Distance::Finite(depth + 1));
                }
                if !seen[x] {
                    seen[x] = true;
                    queue.push_back((x, depth + 1));
                }
            }
        }
        Ok(Distance::Infinite)
    }

    /// All distances from `u`.
    pub fn distances_from(&self, u: usize) -> Result<Vec<Distance>> {
        self.check_vertex(u)?;
        let mut out = vec![Distance::Infinite; self.p()];
        for (w, depth) in Bfs::new(self.p()).run(self, u, usize::MAX) {
            out[*w] = Distance::Finite(*depth);
        }
        Ok(out)
    }

    /// `B_r(v)`: sorted vertices within distance `radius` of `v`.
    pub fn ball(&self, v: usize, radius: usize) -> Result<Vec<usize>> {
        self.check_vertex(v)?;
        Ok(ball_with(self, &mut Bfs::new(self.p()), v, radius))
    }

    /// True iff some `i in I`, `j in J` have `i == j` or `{i, j}` an edge.
    pub fn sets_adjacent(&self, first: &[usize], second: &[usize]) -> Result<bool> {
        for &v in first.iter().chain(second) {
            self.check_vertex(v)?;
        }
        let mut mark = vec![false; self.p()];
        for &j in second {
            mark[j] = true;
        }
        Ok(first
            .iter()
            .any(|&i| mark[i] || self.adj[i].iter().any(|&k| mark[k])))
    }

    /// Parses the edge-list text format: a first line holding `p`, then one
    /// 1-based `u v` pair per line. Blank lines and `#` comments are skipped.
    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut graph: Option<Self> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                line: line_no,
                message,
            };
            let tokens: Vec<&str> = line.split_whitespace().collect();
            match graph.as_mut() {
                None => {
                    if tokens.len() != 1 {
                        return Err(parse_err(format!(
                            "expected the vertex count, found {line:?}"
                        )));
                    }
                    let p: usize = tokens[0]
                        .parse()
                        .map_err(|_| parse_err(format!("invalid vertex count {:?}", tokens[0])))?;
                    if p == 0 {
                        return Err(parse_err("vertex count must be positive".into()));
                    }
                    graph = Some(Self::edgeless(p));
                }
                Some(g) => {
                    if tokens.len() != 2 {
                        return Err(parse_err(format!("expected `u v`, found {line:?}")));
                    }
                    let mut ends = [0usize; 2];
                    for (slot, tok) in ends.iter_mut().zip(&tokens) {
                        let v: usize = tok
                            .parse()
                            .map_err(|_| parse_err(format!("invalid vertex {tok:?}")))?;
                        if v == 0 {
                            return Err(parse_err("vertex ids are 1-based".into()));
                        }
                        *slot = v - 1;
                    }
                    g.try_add_edge(ends[0], ends[1]).map_err(parse_err)?;
                }
            }
        }
        let mut g = graph.ok_or(Error::Parse {
            line: text.lines().count().max(1),
            message: "missing vertex count".into(),
        })?;
        g.finish();
        Ok(g)
    }

    pub fn to_edge_list(&self) -> String {
        let mut out = format!("{}\n", self.p());
        for (u, v) in self.edges() {
            let _ = writeln!(out, "{} {}", u + 1, v + 1);
        }
        out
    }
}

/// Reusable breadth-first search bounded by depth.
pub(crate) struct Bfs {
    depth: Vec<usize>,
    visited: Vec<(usize, usize)>,
}

impl Bfs {
    pub(crate) fn new(p: usize) -> Self {
        Self {
            depth: vec![usize::MAX; p],
            visited: Vec::new(),
        }
    }

    /// Vertices within `max_depth` of `src` with their depths, in BFS order.
    pub(crate) fn run(
        &mut self,
        g: &DependencyGraph,
        src: usize,
        max_depth: usize,
    ) -> &[(usize, usize)] {
        for &(v, _) in &self.visited {
            self.depth[v] = usize::MAX;
        }
        self.visited.clear();
        self.depth[src] = 0;
        self.visited.push((src, 0));
        let mut head = 0;
        while head < self.visited.len() {
            let (w, d) = self.visited[head];
            head += 1;
            if d == max_depth {
                continue;
            }
            for &x in &g.adj[w] {
                if self.depth[x] == usize::MAX {
                    self.depth[x] = d + 1;
                    self.visited.push((x, d + 1));
                }
            }
        }
        &self.visited
    }
}

fn ball_with(g: &DependencyGraph, bfs: &mut Bfs, v: usize, radius: usize) -> Vec<usize> {
    let mut ball: Vec<usize> = bfs.run(g, v, radius).iter().map(|&(u, _)| u).collect();
    ball.sort_unstable();
    ball
}

/// A checked d-dominating set: every vertex outside the set has a neighbour
/// in it, and every vertex has at most `d` members within distance 3, with
/// `d` the smallest such value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DominatingSetCertificate {
    vertices: Vec<usize>,
    d: usize,
    balls2: Vec<Vec<usize>>,
}

impl DominatingSetCertificate {
    /// Members of the set, sorted.
    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// `B_2(v)` for the `k`-th member (sorted).
    pub fn ball2(&self, k: usize) -> &[usize] {
        &self.balls2[k]
    }

    pub fn balls2(&self) -> &[Vec<usize>] {
        &self.balls2
    }

    /// `max |B_2(v)|` over members.
    pub fn max_ball2_size(&self) -> usize {
        self.balls2.iter().map(Vec::len).max().unwrap_or(0)
    }
}

/// Checks that `set` dominates `g` and computes its exact `d`.
pub fn verify_dominating(g: &DependencyGraph, set: &[usize]) -> Result<DominatingSetCertificate> {
    for &v in set {
        g.check_vertex(v)?;
    }
    let mut vertices = set.to_vec();
    vertices.sort_unstable();
    vertices.dedup();
    if vertices.is_empty() {
        return Err(Error::invalid("dominating set must be nonempty"));
    }

    let mut member = vec![false; g.p()];
    for &v in &vertices {
        member[v] = true;
    }
    if let Some(witness) =
        (0..g.p()).find(|&u| !member[u] && !g.neighbors(u).iter().any(|&w| member[w]))
    {
        return Err(Error::NotDominating { witness });
    }

    let mut within3 = vec![0usize; g.p()];
    let mut bfs = Bfs::new(g.p());
    let mut balls2 = Vec::with_capacity(vertices.len());
    for &v in &vertices {
        let mut ball2 = Vec::new();
        for &(u, depth) in bfs.run(g, v, 3) {
            within3[u] += 1;
            if depth <= 2 {
                ball2.push(u);
            }
        }
        ball2.sort_unstable();
        balls2.push(ball2);
    }
    let d = within3.into_iter().max().unwrap_or(0);
    Ok(DominatingSetCertificate {
        vertices,
        d,
        balls2,
    })
}

/// Greedy domination: repeatedly take the vertex whose closed neighbourhood
/// covers the most uncovered vertices, smallest id on ties. Only the
/// resulting `d` is certified; neither `|V|` nor `d` is minimised.
pub fn greedy_dominating_set(g: &DependencyGraph) -> DominatingSetCertificate {
    let p = g.p();
    let mut covered = vec![false; p];
    let mut gain: Vec<usize> = (0..p).map(|v| g.degree(v) + 1).collect();
    let mut heap: BinaryHeap<(usize, Reverse<usize>)> =
        (0..p).map(|v| (gain[v], Reverse(v))).collect();
    let mut uncovered = p;
    let mut chosen = Vec::new();

    while uncovered > 0 {
        let Some((g_top, Reverse(v))) = heap.pop() else {
            break;
        };
        // Gains only decrease, so a stale entry is re-queued with its
        // current value.
        if g_top != gain[v] {
            heap.push((gain[v], Reverse(v)));
            continue;
        }
        if g_top == 0 {
            continue;
        }
        chosen.push(v);
        let closed = std::iter::once(v).chain(g.neighbors(v).iter().copied());
        for u in closed.collect::<Vec<_>>() {
            if covered[u] {
                continue;
            }
            covered[u] = true;
            uncovered -= 1;
            gain[u] -= 1;
            for &w in g.neighbors(u) {
                gain[w] -= 1;
            }
        }
    }
    verify_dominating(g, &chosen).expect("greedy construction dominates by construction")
}

/// Graph on the members of a dominating set with an edge between `u` and
/// `v` whenever `B_2(u)` and `B_2(v)` are adjacent.
#[derive(Debug, Clone)]
pub struct AuxiliaryGraph {
    /// Vertex `k` of `graph` stands for `centers[k]` of the base graph.
    pub centers: Vec<usize>,
    pub graph: DependencyGraph,
}

pub fn auxiliary_graph(g: &DependencyGraph, cert: &DominatingSetCertificate) -> AuxiliaryGraph {
    let centers = cert.vertices().to_vec();
    let mut index = vec![usize::MAX; g.p()];
    for (k, &v) in centers.iter().enumerate() {
        index[v] = k;
    }
    // Two radius-2 balls are adjacent exactly when their centres are within
    // distance 5.
    let mut bfs = Bfs::new(g.p());
    let mut aux = DependencyGraph::edgeless(centers.len());
    for (k, &v) in centers.iter().enumerate() {
        for &(u, _) in bfs.run(g, v, 5) {
            let j = index[u];
            if j != usize::MAX && j > k {
                aux.adj[k].push(j);
                aux.adj[j].push(k);
                aux.edge_count += 1;
            }
        }
    }
    aux.finish();
    AuxiliaryGraph {
        centers,
        graph: aux,
    }
}

/// Greedy colouring in increasing vertex order, smallest free colour first.
/// Returns the colour classes.
pub fn greedy_coloring(g: &DependencyGraph) -> Vec<Vec<usize>> {
    let mut color = vec![usize::MAX; g.p()];
    let mut classes: Vec<Vec<usize>> = Vec::new();
    let mut taken = Vec::new();
    for v in 0..g.p() {
        taken.clear();
        taken.resize(classes.len() + 1, false);
        for &u in g.neighbors(v) {
            if color[u] != usize::MAX {
                taken[color[u]] = true;
            }
        }
        let c = taken.iter().position(|&t| !t).unwrap_or(classes.len());
        if c == classes.len() {
            classes.push(Vec::new());
        }
        classes[c].push(v);
        color[v] = c;
    }
    classes
}
