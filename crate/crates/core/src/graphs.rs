//! Small graph utilities: trees and forests, edge graphs, chordality and
//! long-cycle detection, plus the cycle-structured operator matrices.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::op_matrix::OpMatrix;
use crate::shift_algebra::{Monomial, ShiftOp};

/// Vertex limit for the exhaustive cycle search.
pub const CYCLE_SEARCH_LIMIT: usize = 12;

/// Simple undirected graph; edge order is significant (it indexes columns).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "UndirectedRepr", into = "UndirectedRepr")]
pub struct UndirectedGraph {
    n_vertices: usize,
    edges: Vec<(usize, usize)>,
}

#[derive(Serialize, Deserialize)]
struct UndirectedRepr {
    vertices: usize,
    edges: Vec<[usize; 2]>,
}

impl TryFrom<UndirectedRepr> for UndirectedGraph {
    type Error = Error;

    fn try_from(r: UndirectedRepr) -> Result<Self> {
        UndirectedGraph::new(r.vertices, r.edges.into_iter().map(|[u, v]| (u, v)).collect())
    }
}

impl From<UndirectedGraph> for UndirectedRepr {
    fn from(g: UndirectedGraph) -> Self {
        UndirectedRepr {
            vertices: g.n_vertices,
            edges: g.edges.into_iter().map(|(u, v)| [u, v]).collect(),
        }
    }
}

impl UndirectedGraph {
    pub fn new(n_vertices: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for &(u, v) in &edges {
            if u >= n_vertices || v >= n_vertices {
                return Err(Error::InvalidGraph(format!("edge ({u}, {v}) out of range")));
            }
            if u == v {
                return Err(Error::InvalidGraph(format!("self-loop at {u}")));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(Error::InvalidGraph(format!("duplicate edge ({u}, {v})")));
            }
        }
        Ok(Self { n_vertices, edges })
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn path(n: usize) -> Self {
        Self::new(n, (1..n).map(|i| (i - 1, i)).collect()).expect("valid path")
    }

    /// Cycle on `n` vertices; edge `j` joins `j` and `(j + 1) mod n`.
    pub fn cycle(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidGraph(format!("cycle needs 3 vertices, got {n}")));
        }
        Self::new(n, (0..n).map(|j| (j, (j + 1) % n)).collect())
    }

    /// Star with vertex 0 at the centre.
    pub fn star(leaves: usize) -> Self {
        Self::new(leaves + 1, (1..=leaves).map(|i| (0, i)).collect()).expect("valid star")
    }

    pub fn degree(&self, v: usize) -> usize {
        self.edges.iter().filter(|&&(a, b)| a == v || b == v).count()
    }

    pub fn adjacency(&self) -> Vec<BTreeSet<usize>> {
        let mut adj = vec![BTreeSet::new(); self.n_vertices];
        for &(u, v) in &self.edges {
            adj[u].insert(v);
            adj[v].insert(u);
        }
        adj
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edges.iter().any(|&(a, b)| (a, b) == (u, v) || (a, b) == (v, u))
    }

    fn components(&self) -> (usize, bool) {
        let mut parent: Vec<usize> = (0..self.n_vertices).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let mut count = self.n_vertices;
        let mut acyclic = true;
        for &(u, v) in &self.edges {
            let (a, b) = (find(&mut parent, u), find(&mut parent, v));
            if a == b {
                acyclic = false;
            } else {
                parent[a] = b;
                count -= 1;
            }
        }
        (count, acyclic)
    }

    pub fn is_connected(&self) -> bool {
        self.components().0 <= 1
    }

    pub fn is_forest(&self) -> bool {
        self.components().1
    }

    pub fn is_tree(&self) -> bool {
        self.n_vertices > 0 && self.edges.len() + 1 == self.n_vertices && self.is_connected()
    }
}

/// Graph with oriented arcs; arc order indexes control inputs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "DirectedRepr", into = "DirectedRepr")]
pub struct DirectedGraph {
    n_vertices: usize,
    arcs: Vec<(usize, usize)>,
}

#[derive(Serialize, Deserialize)]
pub(crate) struct Arc {
    pub from: usize,
    pub to: usize,
}

#[derive(Serialize, Deserialize)]
struct DirectedRepr {
    vertices: usize,
    arcs: Vec<Arc>,
}

impl TryFrom<DirectedRepr> for DirectedGraph {
    type Error = Error;

    fn try_from(r: DirectedRepr) -> Result<Self> {
        DirectedGraph::new(r.vertices, r.arcs.into_iter().map(|a| (a.from, a.to)).collect())
    }
}

impl From<DirectedGraph> for DirectedRepr {
    fn from(g: DirectedGraph) -> Self {
        DirectedRepr {
            vertices: g.n_vertices,
            arcs: g.arcs.into_iter().map(|(from, to)| Arc { from, to }).collect(),
        }
    }
}

impl DirectedGraph {
    pub fn new(n_vertices: usize, arcs: Vec<(usize, usize)>) -> Result<Self> {
        UndirectedGraph::new(n_vertices, arcs.clone())?;
        Ok(Self { n_vertices, arcs })
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn arcs(&self) -> &[(usize, usize)] {
        &self.arcs
    }

    pub fn underlying(&self) -> UndirectedGraph {
        UndirectedGraph {
            n_vertices: self.n_vertices,
            edges: self.arcs.clone(),
        }
    }

    pub fn reversed(&self) -> Self {
        Self {
            n_vertices: self.n_vertices,
            arcs: self.arcs.iter().map(|&(u, v)| (v, u)).collect(),
        }
    }
}

/// Vertices are the edges of `g`; two are adjacent when the edges share
/// exactly one endpoint.
pub fn edge_graph(g: &UndirectedGraph) -> UndirectedGraph {
    let e = g.edges();
    let mut out = Vec::new();
    for a in 0..e.len() {
        for b in (a + 1)..e.len() {
            let (u1, v1) = e[a];
            let (u2, v2) = e[b];
            let shared = [u1 == u2, u1 == v2, v1 == u2, v1 == v2].iter().filter(|&&x| x).count();
            if shared == 1 {
                out.push((a, b));
            }
        }
    }
    UndirectedGraph::new(e.len(), out).expect("edge graph is simple")
}

/// Visit order of maximum-cardinality search, ties to the lowest index.
pub fn mcs_order(g: &UndirectedGraph) -> Vec<usize> {
    let adj = g.adjacency();
    let n = g.n_vertices();
    let mut weight = vec![0usize; n];
    let mut done = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for _ in 0..n {
        let v = (0..n)
            .filter(|&v| !done[v])
            .max_by(|&a, &b| weight[a].cmp(&weight[b]).then(b.cmp(&a)))
            .expect("unvisited vertex remains");
        done[v] = true;
        order.push(v);
        for &u in &adj[v] {
            if !done[u] {
                weight[u] += 1;
            }
        }
    }
    order
}

/// Whether `elimination` is a perfect elimination ordering of `g`.
pub fn is_perfect_elimination_order(g: &UndirectedGraph, elimination: &[usize]) -> bool {
    let adj = g.adjacency();
    let mut pos = vec![0; g.n_vertices()];
    for (i, &v) in elimination.iter().enumerate() {
        pos[v] = i;
    }
    elimination.iter().all(|&v| {
        let later: Vec<usize> = adj[v].iter().copied().filter(|&u| pos[u] > pos[v]).collect();
        match later.iter().min_by_key(|&&u| pos[u]) {
            None => true,
            Some(&first) => later.iter().all(|&u| u == first || adj[first].contains(&u)),
        }
    })
}

/// Chordality via maximum-cardinality search and a PEO check.
pub fn is_chordal(g: &UndirectedGraph) -> bool {
    let mut elimination = mcs_order(g);
    elimination.reverse();
    is_perfect_elimination_order(g, &elimination)
}

/// Whether `g` contains a simple cycle with at least `k` vertices.
pub fn has_cycle_geq(g: &UndirectedGraph, k: usize) -> Result<bool> {
    if k < 3 {
        return Err(Error::InvalidGraph(format!("cycle length bound {k} below 3")));
    }
    if g.is_forest() {
        return Ok(false);
    }
    if g.n_vertices() > CYCLE_SEARCH_LIMIT {
        return Err(Error::TooLarge(format!(
            "exhaustive cycle search limited to {CYCLE_SEARCH_LIMIT} vertices, got {}",
            g.n_vertices()
        )));
    }
    let adj = g.adjacency();
    // Each cycle is found from its smallest vertex.
    fn extend(adj: &[BTreeSet<usize>], start: usize, path: &mut Vec<usize>, used: &mut [bool], k: usize) -> bool {
        let last = *path.last().expect("path is non-empty");
        for &next in &adj[last] {
            if next == start && path.len() >= k {
                return true;
            }
            if next > start && !used[next] {
                used[next] = true;
                path.push(next);
                let found = extend(adj, start, path, used, k);
                path.pop();
                used[next] = false;
                if found {
                    return true;
                }
            }
        }
        false
    }
    let mut used = vec![false; g.n_vertices()];
    for s in 0..g.n_vertices() {
        used[s] = true;
        let found = extend(&adj, s, &mut vec![s], &mut used, k);
        used[s] = false;
        if found {
            return Ok(true);
        }
    }
    Ok(false)
}

/// The `n × n` operator matrix of a cycle: `-1` on the diagonal, `q*` on
/// the subdiagonal and in the top-right corner. Column `j` is the edge
/// joining vertices `j` and `(j + 1) mod n`.
pub fn build_cycle_matrix(n: usize) -> Result<OpMatrix> {
    if n < 3 {
        return Err(Error::InvalidGraph(format!("cycle needs 3 vertices, got {n}")));
    }
    let mut m = OpMatrix::zeros(n, n);
    for j in 0..n {
        m.set(j, j, ShiftOp::constant(-1.0));
        m.set((j + 1) % n, j, ShiftOp::qstar());
    }
    Ok(m)
}

/// Closed-form Schur complement left after eliminating the first `n - 1`
/// columns of the cycle Gram:
/// `(n+1)/n - (q^n + (q*)^n)/n - Σ_{i<n} (q*)^i q^i / (i(i+1))`.
pub fn cycle_schur_closed_form(n: usize) -> Result<ShiftOp> {
    if n < 3 {
        return Err(Error::InvalidGraph(format!("cycle needs 3 vertices, got {n}")));
    }
    let nf = n as f64;
    let k = n as u32;
    let mut terms = vec![
        (Monomial::IDENTITY, (nf + 1.0) / nf),
        (Monomial::new(0, k), -1.0 / nf),
        (Monomial::new(k, 0), -1.0 / nf),
    ];
    for i in 1..n {
        let fi = i as f64;
        terms.push((Monomial::new(i as u32, i as u32), -1.0 / (fi * (fi + 1.0))));
    }
    Ok(ShiftOp::from_terms(terms))
}

/// Residual between the closed form and a numerical Schur complement
/// computed from `T × T` truncations, over the leading `interior` samples.
/// Truncation effects are confined to the trailing band, so `interior`
/// should stay well below `t`.
pub fn cycle_schur_truncation_residual(n: usize, t: usize, interior: usize) -> Result<f64> {
    if interior > t {
        return Err(Error::PreconditionViolated(
            "interior block larger than the window".into(),
        ));
    }
    let m = build_cycle_matrix(n)?.to_truncation(t)?;
    let g = m.transpose() * &m;
    let k = (n - 1) * t;
    let g11 = g.view((0, 0), (k, k)).into_owned();
    let g12 = g.view((0, k), (k, t)).into_owned();
    let g22 = g.view((k, k), (t, t)).into_owned();
    let x = g11.cholesky().ok_or(Error::Indefinite)?.solve(&g12);
    let schur = g22 - g12.transpose() * x;
    let exact = cycle_schur_closed_form(n)?.to_truncation(t)?;
    let diff = (schur - exact).view((0, 0), (interior, interior)).amax();
    Ok(diff)
}

/// All connected labelled graphs on `n` vertices (edge lists in lexicographic order).
pub fn connected_graphs(n: usize) -> Vec<UndirectedGraph> {
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|u| ((u + 1)..n).map(move |v| (u, v))).collect();
    assert!(pairs.len() < 32, "enumeration limited to small graphs");
    (0u32..(1 << pairs.len()))
        .filter_map(|mask| {
            let edges = pairs
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, e)| *e)
                .collect();
            let g = UndirectedGraph::new(n, edges).expect("pairs are distinct");
            g.is_connected().then_some(g)
        })
        .collect()
}
