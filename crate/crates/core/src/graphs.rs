//! Graphs backed by traced stores.
//!
//! [`DenseGraph`] is the adjacency-matrix model (cell `n·u + v`), where a
//! probe reads one matrix entry. [`BoundedDegreeGraph`] is the incidence-list
//! model with degree bound `d` (cell `d·v + i` holds the `i`-th neighbor of
//! `v` or nothing); probing a vertex reads all `d` of its cells, so a probe
//! reveals every edge at that vertex.

use std::collections::{BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::{AccessTrace, TracedStore};

#[derive(Debug, Clone)]
pub struct DenseGraph {
    n: usize,
    adjacency: TracedStore<bool>,
}

impl DenseGraph {
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            adjacency: TracedStore::filled(n * n, false),
        }
    }

    pub fn complete(n: usize) -> Self {
        let mut cells = vec![true; n * n];
        for v in 0..n {
            cells[v * n + v] = false;
        }
        Self {
            n,
            adjacency: TracedStore::from_vec(cells),
        }
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut cells = vec![false; n * n];
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::param(format!("edge ({u},{v}) outside {n} vertices")));
            }
            if u == v {
                return Err(Error::param(format!("self-loop at {u}")));
            }
            cells[u * n + v] = true;
            cells[v * n + u] = true;
        }
        Ok(Self {
            n,
            adjacency: TracedStore::from_vec(cells),
        })
    }

    pub fn cycle(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::param("a cycle needs at least 3 vertices"));
        }
        let edges: Vec<_> = (0..n).map(|v| (v, (v + 1) % n)).collect();
        Self::from_edges(n, &edges)
    }

    /// Random bipartite graph: uniform side assignment, each cross pair an
    /// edge with probability `p`. Returns the graph and the side of each vertex.
    pub fn random_bipartite<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> (Self, Vec<bool>) {
        let sides: Vec<bool> = (0..n).map(|_| rng.gen()).collect();
        let mut cells = vec![false; n * n];
        for u in 0..n {
            for v in (u + 1)..n {
                if sides[u] != sides[v] && rng.gen_bool(p) {
                    cells[u * n + v] = true;
                    cells[v * n + u] = true;
                }
            }
        }
        (
            Self {
                n,
                adjacency: TracedStore::from_vec(cells),
            },
            sides,
        )
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Adjacency without recording an access.
    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency.untraced()[u * self.n + v]
    }

    /// Traced read of matrix entry `(u, v)`.
    pub fn probe(&mut self, u: usize, v: usize) -> bool {
        self.adjacency.read(u * self.n + v)
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for u in 0..self.n {
            for v in (u + 1)..self.n {
                if self.has_edge(u, v) {
                    out.push((u, v));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.untraced().iter().filter(|&&b| b).count() / 2
    }

    pub fn trace(&self) -> &AccessTrace {
        self.adjacency.trace()
    }

    pub fn take_trace(&mut self) -> AccessTrace {
        self.adjacency.take_trace()
    }
}

/// Graph on `V \ removed` with vertices renumbered in increasing order of
/// their original index. The result has a fresh, empty trace.
pub fn induced_subgraph(g: &DenseGraph, removed: &BTreeSet<usize>) -> Result<DenseGraph> {
    if let Some(&v) = removed.iter().find(|&&v| v >= g.n) {
        return Err(Error::param(format!("vertex {v} not in graph of size {}", g.n)));
    }
    let kept: Vec<usize> = (0..g.n).filter(|v| !removed.contains(v)).collect();
    if kept.is_empty() {
        return Err(Error::EmptyGraph);
    }
    let m = kept.len();
    let src = g.adjacency.untraced();
    let mut cells = Vec::with_capacity(m * m);
    for &u in &kept {
        let row = &src[u * g.n..(u + 1) * g.n];
        cells.extend(kept.iter().map(|&v| row[v]));
    }
    Ok(DenseGraph {
        n: m,
        adjacency: TracedStore::from_vec(cells),
    })
}

/// BFS 2-colouring over every component of the graph given by `adjacent`.
#[allow(clippy::needless_range_loop)]
pub fn is_bipartite_with(n: usize, adjacent: impl Fn(usize, usize) -> bool) -> bool {
    let mut colour: Vec<Option<bool>> = vec![None; n];
    let mut queue = VecDeque::new();
    for start in 0..n {
        if colour[start].is_some() {
            continue;
        }
        colour[start] = Some(false);
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            let cu = colour[u].expect("queued vertices are coloured");
            for v in 0..n {
                if v == u || !adjacent(u, v) {
                    continue;
                }
                match colour[v] {
                    None => {
                        colour[v] = Some(!cu);
                        queue.push_back(v);
                    }
                    Some(cv) if cv == cu => return false,
                    Some(_) => {}
                }
            }
        }
    }
    true
}

pub fn is_bipartite(g: &DenseGraph) -> bool {
    is_bipartite_with(g.n, |u, v| g.has_edge(u, v))
}

/// Differing matrix entries over `n²`.
pub fn rel_distance_dense(g1: &DenseGraph, g2: &DenseGraph) -> Result<f64> {
    if g1.n != g2.n {
        return Err(Error::param(format!("graph sizes differ: {} vs {}", g1.n, g2.n)));
    }
    if g1.n == 0 {
        return Ok(0.0);
    }
    let diff = g1
        .adjacency
        .untraced()
        .iter()
        .zip(g2.adjacency.untraced())
        .filter(|(a, b)| a != b)
        .count();
    Ok(diff as f64 / (g1.n * g1.n) as f64)
}

#[derive(Debug, Clone)]
pub struct BoundedDegreeGraph {
    n: usize,
    d: usize,
    incidence: TracedStore<Option<u32>>,
}

impl BoundedDegreeGraph {
    /// Builds from explicit incidence lists; list order is kept.
    pub fn from_lists(d: usize, lists: &[Vec<usize>]) -> Result<Self> {
        let n = lists.len();
        if d == 0 {
            return Err(Error::param("degree bound must be positive"));
        }
        let mut cells = vec![None; n * d];
        for (v, list) in lists.iter().enumerate() {
            if list.len() > d {
                return Err(Error::param(format!("vertex {v} has degree {} > {d}", list.len())));
            }
            for (i, &u) in list.iter().enumerate() {
                if u >= n || u == v {
                    return Err(Error::param(format!("bad neighbor {u} of {v}")));
                }
                if !lists[u].contains(&v) {
                    return Err(Error::param(format!("edge {v}->{u} is not mutual")));
                }
                cells[v * d + i] = Some(u as u32);
            }
        }
        Ok(Self {
            n,
            d,
            incidence: TracedStore::from_vec(cells),
        })
    }

    pub fn from_edges(n: usize, d: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut lists = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::param(format!("edge ({u},{v}) outside {n} vertices")));
            }
            lists[u].push(v);
            lists[v].push(u);
        }
        Self::from_lists(d, &lists)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// The `i`-th incidence cell of `v`, untraced.
    pub fn cell(&self, v: usize, i: usize) -> Option<usize> {
        self.incidence.untraced()[v * self.d + i].map(|u| u as usize)
    }

    pub fn neighbors(&self, v: usize) -> Vec<usize> {
        (0..self.d).filter_map(|i| self.cell(v, i)).collect()
    }

    pub fn degree(&self, v: usize) -> usize {
        (0..self.d).filter(|&i| self.cell(v, i).is_some()).count()
    }

    /// Traced probe of vertex `v`: reads all `d` incidence cells.
    pub fn probe(&mut self, v: usize) -> Vec<usize> {
        (0..self.d)
            .filter_map(|i| self.incidence.read(v * self.d + i))
            .map(|u| u as usize)
            .collect()
    }

    pub fn trace(&self) -> &AccessTrace {
        self.incidence.trace()
    }

    pub fn take_trace(&mut self) -> AccessTrace {
        self.incidence.take_trace()
    }

    /// Edge set as sorted `(min, max)` pairs.
    pub fn edge_set(&self) -> BTreeSet<(usize, usize)> {
        let mut out = BTreeSet::new();
        for v in 0..self.n {
            for u in self.neighbors(v) {
                out.insert((v.min(u), v.max(u)));
            }
        }
        out
    }

    pub fn component_count(&self) -> usize {
        let mut seen = vec![false; self.n];
        let mut count = 0;
        for s in 0..self.n {
            if seen[s] {
                continue;
            }
            count += 1;
            seen[s] = true;
            let mut stack = vec![s];
            while let Some(v) = stack.pop() {
                for u in self.neighbors(v) {
                    if !seen[u] {
                        seen[u] = true;
                        stack.push(u);
                    }
                }
            }
        }
        count
    }

    pub fn is_connected(&self) -> bool {
        self.n > 0 && self.component_count() == 1
    }

    /// Connected with every degree equal to 2.
    pub fn is_single_cycle(&self) -> bool {
        self.is_connected() && (0..self.n).all(|v| self.degree(v) == 2)
    }

    /// Sorted degree sequence.
    pub fn degree_multiset(&self) -> Vec<usize> {
        let mut degs: Vec<usize> = (0..self.n).map(|v| self.degree(v)).collect();
        degs.sort_unstable();
        degs
    }

    /// Vertex `v` becomes `perm[v]`; each list keeps its order.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.n)?;
        let mut cells = vec![None; self.n * self.d];
        for v in 0..self.n {
            for i in 0..self.d {
                cells[perm[v] * self.d + i] = self.cell(v, i).map(|u| perm[u] as u32);
            }
        }
        Ok(Self {
            n: self.n,
            d: self.d,
            incidence: TracedStore::from_vec(cells),
        })
    }

    fn shuffle_lists<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let d = self.d;
        let mut cells = self.incidence.untraced().to_vec();
        for v in 0..self.n {
            let slot = &mut cells[v * d..(v + 1) * d];
            let filled = slot.iter().filter(|c| c.is_some()).count();
            // lists are packed at the front
            slot.sort_by_key(|c| c.is_none());
            slot[..filled].shuffle(rng);
        }
        self.incidence = TracedStore::from_vec(cells);
    }
}

fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    if perm.len() != n {
        return Err(Error::param(format!("permutation has length {} for {n} vertices", perm.len())));
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || std::mem::replace(&mut seen[p], true) {
            return Err(Error::param("not a permutation"));
        }
    }
    Ok(())
}

/// Differing incidence cells over `d·n`.
pub fn rel_distance_bounded(g1: &BoundedDegreeGraph, g2: &BoundedDegreeGraph) -> Result<f64> {
    if g1.n != g2.n || g1.d != g2.d {
        return Err(Error::param(format!(
            "graph shapes differ: (n={}, d={}) vs (n={}, d={})",
            g1.n, g1.d, g2.n, g2.d
        )));
    }
    if g1.n == 0 {
        return Ok(0.0);
    }
    let diff = g1
        .incidence
        .untraced()
        .iter()
        .zip(g2.incidence.untraced())
        .filter(|(a, b)| a != b)
        .count();
    Ok(diff as f64 / (g1.d * g1.n) as f64)
}

/// The `n`-cycle with `f(v,0) = v+1` and `f(v,1) = v-1` (mod `n`).
pub fn cycle_graph(n: usize) -> Result<BoundedDegreeGraph> {
    if n < 3 {
        return Err(Error::param("a cycle needs at least 3 vertices"));
    }
    let lists: Vec<Vec<usize>> = (0..n).map(|v| vec![(v + 1) % n, (v + n - 1) % n]).collect();
    BoundedDegreeGraph::from_lists(2, &lists)
}

/// `n/3` disjoint triangles on consecutive vertex triples, each vertex
/// listing its successor then its predecessor within the triangle.
pub fn triangles_graph(n: usize) -> Result<BoundedDegreeGraph> {
    if n == 0 || !n.is_multiple_of(3) {
        return Err(Error::param(format!("triangles need n divisible by 3, got {n}")));
    }
    let lists: Vec<Vec<usize>> = (0..n)
        .map(|v| {
            let base = v - v % 3;
            vec![base + (v + 1) % 3, base + (v + 2) % 3]
        })
        .collect();
    BoundedDegreeGraph::from_lists(2, &lists)
}

/// Uniformly relabels the vertices and independently shuffles every
/// incidence list. Returns the image and the permutation (`v ↦ perm[v]`).
pub fn random_isomorphism<R: Rng + ?Sized>(
    g: &BoundedDegreeGraph,
    rng: &mut R,
) -> (BoundedDegreeGraph, Vec<usize>) {
    let mut perm: Vec<usize> = (0..g.n).collect();
    perm.shuffle(rng);
    let mut image = g.relabel(&perm).expect("shuffled identity is a permutation");
    image.shuffle_lists(rng);
    (image, perm)
}

/// Rewires a permuted cycle: with `u_t = perm[t]`, removes the edges
/// `(u_i, u_{i+1})`, `(u_j, u_{j+1})` and adds `(u_i, u_j)`, `(u_{i+1}, u_{j+1})`.
/// Each replacement keeps the slot of the removed neighbor.
pub fn make_h2_at(h1: &BoundedDegreeGraph, perm: &[usize], i: usize, j: usize) -> Result<BoundedDegreeGraph> {
    let n = h1.n;
    if n < 8 {
        return Err(Error::param(format!("rewiring needs n >= 8, got {n}")));
    }
    check_permutation(perm, n)?;
    let offset = (j + n - i % n) % n;
    if i >= n || j >= n || !(4..=n - 3).contains(&offset) {
        return Err(Error::param(format!("j={j} not in {{i+4, ..., i-3}} for i={i}, n={n}")));
    }
    let u = |t: usize| perm[t % n];
    let (ui, ui1, uj, uj1) = (u(i), u(i + 1), u(j), u(j + 1));
    let mut g = h1.clone();
    g.incidence.clear_trace();
    let d = g.d;
    let mut cells = g.incidence.untraced().to_vec();
    let mut replace = |v: usize, old: usize, new: usize| -> Result<()> {
        let slot = (0..d)
            .find(|&s| cells[v * d + s] == Some(old as u32))
            .ok_or_else(|| Error::param(format!("{old} is not a neighbor of {v}; h1 is not the permuted cycle")))?;
        cells[v * d + slot] = Some(new as u32);
        Ok(())
    };
    replace(ui, ui1, uj)?;
    replace(ui1, ui, uj1)?;
    replace(uj, uj1, ui)?;
    replace(uj1, uj, ui1)?;
    g.incidence = TracedStore::from_vec(cells);
    Ok(g)
}

/// Draws `i` uniformly and `j` uniformly from `{i+4, ..., i-3}` (mod `n`),
/// then calls [`make_h2_at`].
pub fn make_h2<R: Rng + ?Sized>(
    h1: &BoundedDegreeGraph,
    perm: &[usize],
    rng: &mut R,
) -> Result<(BoundedDegreeGraph, usize, usize)> {
    let n = h1.n;
    if n < 8 {
        return Err(Error::param(format!("rewiring needs n >= 8, got {n}")));
    }
    let i = rng.gen_range(0..n);
    let j = (i + rng.gen_range(4..=n - 3)) % n;
    Ok((make_h2_at(h1, perm, i, j)?, i, j))
}

/// On-disk graph fixture: `{"n": .., "d": .., "edges": [[u, v], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphFixture {
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    pub edges: Vec<[usize; 2]>,
}

impl GraphFixture {
    fn pairs(&self) -> Vec<(usize, usize)> {
        self.edges.iter().map(|e| (e[0], e[1])).collect()
    }

    pub fn to_dense(&self) -> Result<DenseGraph> {
        DenseGraph::from_edges(self.n, &self.pairs())
    }

    pub fn to_bounded(&self) -> Result<BoundedDegreeGraph> {
        let d = self.d.ok_or_else(|| Error::param("fixture has no degree bound `d`"))?;
        BoundedDegreeGraph::from_edges(self.n, d, &self.pairs())
    }

    pub fn from_dense(g: &DenseGraph) -> Self {
        Self {
            n: g.n(),
            d: None,
            edges: g.edges().into_iter().map(|(u, v)| [u, v]).collect(),
        }
    }
}
