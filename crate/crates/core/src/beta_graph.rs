//! Interaction graphs whose edges carry 3x3 coefficient matrices, plus the
//! decompositions the basis search needs: rank labels, connected components
//! of the rank>1 subgraph, and BFS spanning trees with fundamental cycles.

use std::collections::VecDeque;
use std::fmt::Write as _;

use thiserror::Error;

use crate::mat3::{rank_eps, svd3, Mat3, Tolerances};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BetaEdge {
    pub u: usize,
    pub v: usize,
    /// Entry `(k, l)` multiplies `sigma_k` on `u` and `sigma_l` on `v`; `u < v`.
    pub beta: Mat3,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("self-loop on vertex {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({0},{1})")]
    DuplicateEdge(usize, usize),
    #[error("vertex {vertex} out of range for {n} vertices")]
    VertexOutOfRange { vertex: usize, n: usize },
    #[error("edge ({0},{1}) has a non-finite entry")]
    NonFinite(usize, usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct BetaGraph {
    n: usize,
    edges: Vec<BetaEdge>,
    /// Per vertex: (neighbor, edge index).
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl BetaGraph {
    /// Edges given as `(a, b, beta)` with rows of `beta` indexed by `a`'s
    /// axes; pairs with `a > b` are stored transposed.
    pub fn new(n: usize, edges: Vec<(usize, usize, Mat3)>) -> Result<BetaGraph, GraphError> {
        let mut adjacency = vec![Vec::new(); n];
        let mut stored = Vec::with_capacity(edges.len());
        for (a, b, beta) in edges {
            for vertex in [a, b] {
                if vertex >= n {
                    return Err(GraphError::VertexOutOfRange { vertex, n });
                }
            }
            if a == b {
                return Err(GraphError::SelfLoop(a));
            }
            let (u, v, beta) = if a < b { (a, b, beta) } else { (b, a, beta.transpose()) };
            if !beta.iter().all(|x| x.is_finite()) {
                return Err(GraphError::NonFinite(u, v));
            }
            if adjacency[u].iter().any(|&(w, _)| w == v) {
                return Err(GraphError::DuplicateEdge(u, v));
            }
            let idx = stored.len();
            adjacency[u].push((v, idx));
            adjacency[v].push((u, idx));
            stored.push(BetaEdge { u, v, beta });
        }
        Ok(BetaGraph {
            n,
            edges: stored,
            adjacency,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[BetaEdge] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[(usize, usize)] {
        &self.adjacency[v]
    }

    pub fn edge_between(&self, a: usize, b: usize) -> Option<usize> {
        self.adjacency[a].iter().find(|&&(w, _)| w == b).map(|&(_, e)| e)
    }

    /// The matrix of edge `e` with rows indexed by the axes of `from`.
    pub fn beta_from(&self, e: usize, from: usize) -> Mat3 {
        let edge = &self.edges[e];
        if edge.u == from {
            edge.beta
        } else {
            debug_assert_eq!(edge.v, from);
            edge.beta.transpose()
        }
    }

    /// Largest singular value over all edges: the scale for rank decisions.
    pub fn max_singular_value(&self) -> f64 {
        self.edges.iter().map(|e| svd3(&e.beta).s[0]).fold(0.0, f64::max)
    }

    /// Same graph with every vertex `q` renamed `perm[q]`.
    pub fn relabeled(&self, perm: &[usize]) -> Result<BetaGraph, GraphError> {
        BetaGraph::new(
            self.n,
            self.edges.iter().map(|e| (perm[e.u], perm[e.v], e.beta)).collect(),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeRank {
    Rank1,
    High,
}

/// A graph with rank-0 edges removed and every remaining edge labeled.
#[derive(Clone, Debug)]
pub struct ClassifiedGraph {
    pub graph: BetaGraph,
    pub ranks: Vec<EdgeRank>,
    /// Global largest singular value used as the rank scale.
    pub scale: f64,
    /// Pairs whose matrix vanished at tolerance.
    pub dropped: Vec<(usize, usize)>,
}

pub fn classify_edges(g: &BetaGraph, tol: &Tolerances) -> ClassifiedGraph {
    let scale = g.max_singular_value();
    let mut kept = Vec::new();
    let mut ranks = Vec::new();
    let mut dropped = Vec::new();
    for e in g.edges() {
        match rank_eps(&e.beta, tol.eps_rank, scale) {
            0 => {
                log::warn!("dropping edge ({},{}) with vanishing interaction", e.u, e.v);
                dropped.push((e.u, e.v));
            }
            r => {
                kept.push((e.u, e.v, e.beta));
                ranks.push(if r == 1 { EdgeRank::Rank1 } else { EdgeRank::High });
            }
        }
    }
    let graph = BetaGraph::new(g.n_vertices(), kept).expect("subgraph of a valid graph");
    ClassifiedGraph {
        graph,
        ranks,
        scale,
        dropped,
    }
}

/// A maximal set of vertices connected through rank>1 edges.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rcc {
    pub id: usize,
    /// Sorted ascending; `vertices[0]` is the root.
    pub vertices: Vec<usize>,
    /// Indices of the rank>1 edges with both ends inside.
    pub edges: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RccDecomposition {
    pub rccs: Vec<Rcc>,
    /// Component id of every vertex.
    pub rcc_of: Vec<usize>,
    /// Position of every vertex inside its component's vertex list.
    pub local: Vec<usize>,
}

/// Components of the rank>1 subgraph; isolated vertices form singletons.
/// Components are numbered by their smallest vertex.
pub fn rcc_decomposition(g: &BetaGraph, ranks: &[EdgeRank]) -> RccDecomposition {
    let n = g.n_vertices();
    let mut rcc_of = vec![usize::MAX; n];
    let mut rccs = Vec::new();
    for start in 0..n {
        if rcc_of[start] != usize::MAX {
            continue;
        }
        let id = rccs.len();
        let mut vertices = vec![start];
        rcc_of[start] = id;
        let mut queue = VecDeque::from([start]);
        while let Some(x) = queue.pop_front() {
            for &(y, e) in g.neighbors(x) {
                if ranks[e] == EdgeRank::High && rcc_of[y] == usize::MAX {
                    rcc_of[y] = id;
                    vertices.push(y);
                    queue.push_back(y);
                }
            }
        }
        vertices.sort_unstable();
        rccs.push(Rcc {
            id,
            vertices,
            edges: Vec::new(),
        });
    }
    for (i, e) in g.edges().iter().enumerate() {
        if ranks[i] == EdgeRank::High {
            rccs[rcc_of[e.u]].edges.push(i);
        }
    }
    let mut local = vec![0; n];
    for r in &rccs {
        for (i, &v) in r.vertices.iter().enumerate() {
            local[v] = i;
        }
    }
    RccDecomposition { rccs, rcc_of, local }
}

/// A closed walk `root -> .. -> a -> b -> .. -> root` closing one non-tree edge.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FundamentalCycle {
    pub closing_edge: usize,
    pub path: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CycleBasis {
    pub root: usize,
    /// Vertices in BFS order, root first.
    pub order: Vec<usize>,
    /// `(parent, edge)` for every non-root vertex, indexed by local position.
    pub parent: Vec<Option<(usize, usize)>>,
    pub cycles: Vec<FundamentalCycle>,
}

impl CycleBasis {
    /// Tree path from the root down to `v` (inclusive).
    pub fn path_from_root(&self, v: usize, d: &RccDecomposition) -> Vec<usize> {
        let mut path = vec![v];
        let mut cur = v;
        while let Some((p, _)) = self.parent[d.local[cur]] {
            path.push(p);
            cur = p;
        }
        path.reverse();
        path
    }
}

/// BFS spanning tree of one component from `root`, with one fundamental
/// cycle per non-tree edge. Non-tree edges are traversed low -> high.
pub fn spanning_tree_and_cycles(g: &BetaGraph, rcc: &Rcc, d: &RccDecomposition, root: usize) -> CycleBasis {
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; rcc.vertices.len()];
    let mut seen = vec![false; rcc.vertices.len()];
    let mut tree_edge = vec![false; g.edges().len()];
    let mut order = vec![root];
    seen[d.local[root]] = true;
    let mut queue = VecDeque::from([root]);
    while let Some(x) = queue.pop_front() {
        let mut nbrs: Vec<(usize, usize)> = g
            .neighbors(x)
            .iter()
            .copied()
            .filter(|&(y, _)| d.rcc_of[y] == rcc.id)
            .collect();
        nbrs.sort_unstable();
        for (y, e) in nbrs {
            if !is_high_inside(rcc, e) {
                continue;
            }
            if !seen[d.local[y]] {
                seen[d.local[y]] = true;
                parent[d.local[y]] = Some((x, e));
                tree_edge[e] = true;
                order.push(y);
                queue.push_back(y);
            }
        }
    }
    let mut basis = CycleBasis {
        root,
        order,
        parent,
        cycles: Vec::new(),
    };
    for &e in &rcc.edges {
        if tree_edge[e] {
            continue;
        }
        let BetaEdge { u, v, .. } = g.edges()[e];
        let mut path = basis.path_from_root(u, d);
        let mut back = basis.path_from_root(v, d);
        back.reverse();
        path.extend(back);
        basis.cycles.push(FundamentalCycle { closing_edge: e, path });
    }
    basis
}

fn is_high_inside(rcc: &Rcc, e: usize) -> bool {
    rcc.edges.binary_search(&e).is_ok()
}

/// Graphviz rendering of a labeled graph, for inspection.
pub fn to_dot(g: &BetaGraph, ranks: &[EdgeRank]) -> String {
    let mut out = String::from("graph beta {\n");
    for v in 0..g.n_vertices() {
        let _ = writeln!(out, "  {v};");
    }
    for (i, e) in g.edges().iter().enumerate() {
        let (label, style) = match ranks.get(i) {
            Some(EdgeRank::Rank1) => ("rank1", "dashed"),
            _ => ("high", "solid"),
        };
        let _ = writeln!(out, "  {} -- {} [label=\"{}\", style={}];", e.u, e.v, label, style);
    }
    out.push_str("}\n");
    out
}
