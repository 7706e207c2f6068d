//! Simultaneous diagonalization of all edge matrices by per-vertex rotations,
//! with every rank-1 edge keeping its nonzero entry out of the middle slot.
//!
//! The search runs in two phases. First a candidate basis is found per
//! vertex: inside each rank>1 component the basis is rigid (transfer
//! operators carry it across edges), so it is fixed by a subspace fixed-point
//! iteration plus a check that every loop of transfer operators has real
//! eigenvalues. Second, each component picks one of two axis permutations so
//! that rank-1 edges land on matching outer slots; that choice is a
//! two-variable XOR system.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};

use crate::beta_graph::{
    classify_edges, rcc_decomposition, spanning_tree_and_cycles, BetaGraph, ClassifiedGraph, CycleBasis, EdgeRank, Rcc,
    RccDecomposition,
};
use crate::mat3::{
    is_orthogonal, ortho_eigen, polar, singular_subspaces, svd3, Mat3, OrthoEigenError, OrthoSubspaceSet, Tolerances,
    Vec3,
};
use crate::xorsat::XorSystem;

/// Loop products are re-orthonormalized after this many factors.
const POLAR_EVERY: usize = 32;

/// Ordered orthonormal triple.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Basis(pub [Vec3; 3]);

impl Basis {
    pub fn standard() -> Basis {
        Basis([Vec3::x(), Vec3::y(), Vec3::z()])
    }

    /// Matrix whose columns are the basis vectors.
    pub fn matrix(&self) -> Mat3 {
        Mat3::from_columns(&self.0)
    }

    pub fn from_matrix(m: &Mat3) -> Basis {
        Basis([m.column(0).into(), m.column(1).into(), m.column(2).into()])
    }

    pub fn transformed(&self, o: &Mat3) -> Basis {
        Basis(self.0.map(|v| o * v))
    }

    /// Same ordered lines, ignoring the sign of each vector.
    pub fn equal_mod_signs(&self, other: &Basis, tol: f64) -> bool {
        self.0
            .iter()
            .zip(other.0.iter())
            .all(|(a, b)| (a - b).norm() <= tol || (a + b).norm() <= tol)
    }

    pub fn permuted(&self, p: &Permutation) -> Basis {
        let mut out = self.0;
        for i in 0..3 {
            out[p.slot_of[i]] = self.0[i];
        }
        Basis(out)
    }
}

/// A permutation of the three basis slots: old vector `i` moves to `slot_of[i]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Permutation {
    pub slot_of: [usize; 3],
}

impl Permutation {
    pub const IDENTITY: Permutation = Permutation { slot_of: [0, 1, 2] };

    pub fn new(slot_of: [usize; 3]) -> Option<Permutation> {
        let mut seen = [false; 3];
        for &s in &slot_of {
            if s > 2 || seen[s] {
                return None;
            }
            seen[s] = true;
        }
        Some(Permutation { slot_of })
    }

    /// The pair of permutations available to a component with sorted outer
    /// labels `labels`: a label at position `p` goes to the first slot under
    /// choice `x` iff `x == p`, and to the last slot otherwise.
    pub fn for_labels(labels: &[usize], x: bool) -> Permutation {
        match *labels {
            [] => Permutation::IDENTITY,
            [a] => {
                let rest: Vec<usize> = (0..3).filter(|&k| k != a).collect();
                let mut slot_of = [0; 3];
                if !x {
                    slot_of[a] = 0;
                    slot_of[rest[0]] = 1;
                    slot_of[rest[1]] = 2;
                } else {
                    slot_of[a] = 2;
                    slot_of[rest[0]] = 0;
                    slot_of[rest[1]] = 1;
                }
                Permutation { slot_of }
            }
            [a, b] => {
                let other = 3 - a - b;
                let mut slot_of = [0; 3];
                slot_of[other] = 1;
                if !x {
                    slot_of[a] = 0;
                    slot_of[b] = 2;
                } else {
                    slot_of[a] = 2;
                    slot_of[b] = 0;
                }
                Permutation { slot_of }
            }
            _ => panic!("a component carries at most two outer labels"),
        }
    }
}

/// Indices (0-based) of the basis vectors carrying a rank-1 edge at each end.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EdgeBilabel {
    pub edge: usize,
    pub at_u: usize,
    pub at_v: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NlyStage {
    /// The rank-1 routine was handed a rank>1 edge.
    NotRank1,
    /// Some vertex's subspace set stopped spanning R^3.
    CandidateBasis,
    /// A loop operator has a non-real eigenvalue.
    LoopEigenvalue,
    /// The root subspaces left after the loop constraints do not span R^3.
    Span,
    /// A rank-1 edge has no unique nonzero direction in the candidate basis.
    Bilabel,
    /// A component sees all three labels on its rank-1 edges.
    LabelCount,
    /// The permutation XOR system is unsatisfiable.
    XorUnsat,
    /// The computed rotations fail the diagonality check (numerical breakdown).
    Residual,
}

impl NlyStage {
    pub fn name(&self) -> &'static str {
        match self {
            NlyStage::NotRank1 => "not-rank1",
            NlyStage::CandidateBasis => "candidate-basis",
            NlyStage::LoopEigenvalue => "loop-eigenvalue",
            NlyStage::Span => "span",
            NlyStage::Bilabel => "bilabel",
            NlyStage::LabelCount => "label-count",
            NlyStage::XorUnsat => "xor-unsat",
            NlyStage::Residual => "residual",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoNly {
    pub stage: NlyStage,
    pub rcc: Option<usize>,
    pub vertex: Option<usize>,
    pub detail: String,
}

impl NoNly {
    fn new(stage: NlyStage, detail: impl Into<String>) -> NoNly {
        NoNly {
            stage,
            rcc: None,
            vertex: None,
            detail: detail.into(),
        }
    }

    fn at(mut self, rcc: Option<usize>, vertex: Option<usize>) -> NoNly {
        self.rcc = rcc;
        self.vertex = vertex;
        self
    }
}

impl fmt::Display for NoNly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "stage={}", self.stage.name())?;
        if let Some(r) = self.rcc {
            write!(f, " rcc={r}")?;
        }
        if let Some(v) = self.vertex {
            write!(f, " vertex={v}")?;
        }
        write!(f, ": {}", self.detail)
    }
}

impl std::error::Error for NoNly {}

/// Rounds used by the fixed-point iteration of one component.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RoundStat {
    pub rcc_size: usize,
    pub rounds: usize,
}

impl RoundStat {
    pub fn within_bound(&self) -> bool {
        self.rounds <= 3 * self.rcc_size
    }
}

static RCC_RUNS: AtomicU64 = AtomicU64::new(0);
static BOUND_VIOLATIONS: AtomicU64 = AtomicU64::new(0);
static MAX_ROUNDS: AtomicU64 = AtomicU64::new(0);

/// Process-wide tally of fixed-point runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IterationCounters {
    pub rcc_runs: u64,
    pub bound_violations: u64,
    pub max_rounds: u64,
}

pub fn iteration_counters() -> IterationCounters {
    IterationCounters {
        rcc_runs: RCC_RUNS.load(AtomicOrdering::Relaxed),
        bound_violations: BOUND_VIOLATIONS.load(AtomicOrdering::Relaxed),
        max_rounds: MAX_ROUNDS.load(AtomicOrdering::Relaxed),
    }
}

fn record_rounds(stat: RoundStat) {
    RCC_RUNS.fetch_add(1, AtomicOrdering::Relaxed);
    MAX_ROUNDS.fetch_max(stat.rounds as u64, AtomicOrdering::Relaxed);
    if !stat.within_bound() {
        BOUND_VIOLATIONS.fetch_add(1, AtomicOrdering::Relaxed);
    }
}

/// Orthogonal `O_{v<-u} = V U^T` from `beta = U S V^T` (rows indexed by `u`),
/// mapping each left singular vector onto the matching right one.
pub fn transfer_operator(beta: &Mat3, tol: &Tolerances, scale: f64) -> Option<Mat3> {
    let svd = svd3(beta);
    if svd.s[1] <= tol.eps_rank * scale {
        return None;
    }
    Some(svd.v * svd.u.transpose())
}

/// Transfer operators of every rank>1 edge, stored `O_{v<-u}` for `u < v`.
pub struct Transfers(Vec<Option<Mat3>>);

impl Transfers {
    pub fn compute(cg: &ClassifiedGraph, tol: &Tolerances) -> Transfers {
        Transfers(
            cg.graph
                .edges()
                .iter()
                .zip(&cg.ranks)
                .map(|(e, r)| match r {
                    EdgeRank::High => transfer_operator(&e.beta, tol, cg.scale),
                    EdgeRank::Rank1 => None,
                })
                .collect(),
        )
    }

    /// Operator carrying `from`'s basis across edge `e` to the other end.
    pub fn across(&self, g: &BetaGraph, e: usize, from: usize) -> Mat3 {
        let o = self.0[e].expect("transfer operator of a rank>1 edge");
        if g.edges()[e].u == from {
            o
        } else {
            o.transpose()
        }
    }
}

/// Subspaces at `v` compatible with every incident edge, before any
/// propagation: intersection of the singular subspaces seen from `v`.
fn local_subspaces(cg: &ClassifiedGraph, v: usize, tol: &Tolerances) -> OrthoSubspaceSet {
    cg.graph
        .neighbors(v)
        .iter()
        .fold(OrthoSubspaceSet::full(), |acc, &(_, e)| {
            let beta = cg.graph.beta_from(e, v);
            acc.intersect(&singular_subspaces(&beta, tol, cg.scale, true), tol.eps_orth)
        })
}

/// Candidate basis of a graph whose edges are all rank-1: each vertex takes
/// a basis adapted to the intersection of its incident edges' subspaces.
pub fn candidate_basis_rank1(cg: &ClassifiedGraph, tol: &Tolerances) -> Result<Vec<Basis>, NoNly> {
    if let Some(i) = cg.ranks.iter().position(|r| *r == EdgeRank::High) {
        let e = cg.graph.edges()[i];
        return Err(NoNly::new(
            NlyStage::NotRank1,
            format!("edge ({},{}) has rank above one", e.u, e.v),
        ));
    }
    (0..cg.graph.n_vertices())
        .map(|v| {
            let s = local_subspaces(cg, v, tol);
            s.choose_basis().map(Basis).map_err(|_| {
                NoNly::new(
                    NlyStage::CandidateBasis,
                    format!("incident eigenspaces span only {} dimensions", s.dim()),
                )
                .at(None, Some(v))
            })
        })
        .collect()
}

/// Result of the subspace analysis of one rank>1 component.
#[derive(Clone, Debug)]
pub struct RccAnalysis {
    pub rcc: usize,
    pub stat: RoundStat,
    /// Root subspaces surviving both the fixed point and the loop constraints.
    pub root_subspaces: OrthoSubspaceSet,
    pub tree: CycleBasis,
}

/// Fixed-point iteration, loop operators and root subspaces for one component.
pub fn analyze_rcc(
    cg: &ClassifiedGraph,
    d: &RccDecomposition,
    rcc: &Rcc,
    transfers: &Transfers,
    tol: &Tolerances,
) -> Result<RccAnalysis, NoNly> {
    let g = &cg.graph;
    let fail = |stage, v: Option<usize>, detail: String| NoNly::new(stage, detail).at(Some(rcc.id), v);
    let mut sets: Vec<OrthoSubspaceSet> = rcc.vertices.iter().map(|&v| local_subspaces(cg, v, tol)).collect();
    for (i, s) in sets.iter().enumerate() {
        if !s.spans_r3() {
            return Err(fail(
                NlyStage::CandidateBasis,
                Some(rcc.vertices[i]),
                format!("incident eigenspaces span only {} dimensions", s.dim()),
            ));
        }
    }

    // Jacobi sweeps: every vertex intersects with the images of its
    // neighbors' previous sets. Each non-final round refines some vertex
    // (adds a subspace or loses a dimension), so a spanning run settles
    // within 2n + 1 rounds.
    let mut rounds = 0;
    if !rcc.edges.is_empty() {
        loop {
            rounds += 1;
            let mut next = Vec::with_capacity(sets.len());
            let mut changed = false;
            for (i, &v) in rcc.vertices.iter().enumerate() {
                let mut s = sets[i].clone();
                for &(w, e) in g.neighbors(v) {
                    if cg.ranks[e] != EdgeRank::High {
                        continue;
                    }
                    let image = sets[d.local[w]].rotated(&transfers.across(g, e, w));
                    s = s.intersect(&image, tol.eps_orth);
                }
                if !s.spans_r3() {
                    let stat = RoundStat {
                        rcc_size: rcc.vertices.len(),
                        rounds,
                    };
                    record_rounds(stat);
                    return Err(fail(
                        NlyStage::CandidateBasis,
                        Some(v),
                        format!("propagated subspaces span only {} dimensions", s.dim()),
                    ));
                }
                if !s.same_as(&sets[i], tol.eps_orth) {
                    changed = true;
                    next.push(s);
                } else {
                    next.push(sets[i].clone());
                }
            }
            sets = next;
            if !changed {
                break;
            }
        }
    }
    let stat = RoundStat {
        rcc_size: rcc.vertices.len(),
        rounds,
    };
    record_rounds(stat);

    let root = rcc.vertices[0];
    let tree = spanning_tree_and_cycles(g, rcc, d, root);
    let mut root_subspaces = sets[0].clone();
    for cycle in &tree.cycles {
        let op = loop_operator(g, transfers, &cycle.path);
        match ortho_eigen(&op, tol) {
            Ok(eig) => root_subspaces = root_subspaces.intersect(&eig.as_set(), tol.eps_orth),
            Err(OrthoEigenError::NonRealEigenvalues { sin_theta }) => {
                return Err(fail(
                    NlyStage::LoopEigenvalue,
                    Some(root),
                    format!(
                        "loop through edge ({},{}) rotates by |sin| = {:.3e}",
                        g.edges()[cycle.closing_edge].u,
                        g.edges()[cycle.closing_edge].v,
                        sin_theta
                    ),
                ))
            }
            Err(OrthoEigenError::NotOrthogonal(err)) => {
                return Err(fail(NlyStage::LoopEigenvalue, Some(root), err.to_string()))
            }
        }
    }
    if !root_subspaces.spans_r3() {
        return Err(fail(
            NlyStage::Span,
            Some(root),
            format!(
                "root subspaces span only {} dimensions after loop constraints",
                root_subspaces.dim()
            ),
        ));
    }
    Ok(RccAnalysis {
        rcc: rcc.id,
        stat,
        root_subspaces,
        tree,
    })
}

/// Product of transfer operators along a closed walk, first step applied first.
pub fn loop_operator(g: &BetaGraph, transfers: &Transfers, path: &[usize]) -> Mat3 {
    let mut op = Mat3::identity();
    for (k, w) in path.windows(2).enumerate() {
        let e = g.edge_between(w[0], w[1]).expect("walk follows edges");
        op = transfers.across(g, e, w[0]) * op;
        if (k + 1) % POLAR_EVERY == 0 {
            op = polar(&op);
        }
    }
    op
}

/// Pushes the root basis down the spanning tree: `b_child = O_{child<-parent} b_parent`.
pub fn propagate_basis(
    g: &BetaGraph,
    d: &RccDecomposition,
    tree: &CycleBasis,
    transfers: &Transfers,
    root_basis: Basis,
    out: &mut [Basis],
) {
    out[tree.root] = root_basis;
    for &v in &tree.order[1..] {
        let (p, e) = tree.parent[d.local[v]].expect("non-root vertex has a parent");
        out[v] = out[p].transformed(&transfers.across(g, e, p));
    }
}

/// Candidate basis for an arbitrary graph, one component at a time.
pub fn candidate_basis_general(
    cg: &ClassifiedGraph,
    d: &RccDecomposition,
    tol: &Tolerances,
) -> Result<(Vec<Basis>, Vec<RoundStat>), NoNly> {
    let transfers = Transfers::compute(cg, tol);
    let mut bases = vec![Basis::standard(); cg.graph.n_vertices()];
    let mut stats = Vec::with_capacity(d.rccs.len());
    for rcc in &d.rccs {
        let a = analyze_rcc(cg, d, rcc, &transfers, tol)?;
        stats.push(a.stat);
        let root_basis = Basis(a.root_subspaces.choose_basis().expect("checked spanning"));
        propagate_basis(&cg.graph, d, &a.tree, &transfers, root_basis, &mut bases);
    }
    Ok((bases, stats))
}

/// For each rank-1 edge, the unique basis vector at either end that the
/// edge does not annihilate.
pub fn bilabel_rank1_edges(cg: &ClassifiedGraph, bases: &[Basis], tol: &Tolerances) -> Result<Vec<EdgeBilabel>, NoNly> {
    let mut out = Vec::new();
    for (i, e) in cg.graph.edges().iter().enumerate() {
        if cg.ranks[i] != EdgeRank::Rank1 {
            continue;
        }
        let threshold = tol.eps_cluster.sqrt() * svd3(&e.beta).s[0];
        let pick = |vectors: [Vec3; 3]| -> Result<usize, usize> {
            let hits: Vec<usize> = (0..3).filter(|&k| vectors[k].norm() > threshold).collect();
            if hits.len() == 1 {
                Ok(hits[0])
            } else {
                Err(hits.len())
            }
        };
        let at_u = pick(bases[e.u].0.map(|b| e.beta.transpose() * b));
        let at_v = pick(bases[e.v].0.map(|b| e.beta * b));
        match (at_u, at_v) {
            (Ok(at_u), Ok(at_v)) => out.push(EdgeBilabel { edge: i, at_u, at_v }),
            (Err(k), _) | (_, Err(k)) => {
                return Err(NoNly::new(
                    NlyStage::Bilabel,
                    format!("rank-1 edge ({},{}) touches {k} basis vectors", e.u, e.v),
                ))
            }
        }
    }
    Ok(out)
}

/// Chooses one of the two label-routing permutations per component so every
/// rank-1 edge lands on the same outer slot at both ends. The permutation is
/// applied uniformly to all vertices of a component.
pub fn permutations_general(
    cg: &ClassifiedGraph,
    d: &RccDecomposition,
    labels: &[EdgeBilabel],
) -> Result<Vec<Permutation>, NoNly> {
    let n_rcc = d.rccs.len();
    let mut label_sets: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n_rcc];
    for l in labels {
        let e = cg.graph.edges()[l.edge];
        label_sets[d.rcc_of[e.u]].insert(l.at_u);
        label_sets[d.rcc_of[e.v]].insert(l.at_v);
    }
    let sorted: Vec<Vec<usize>> = label_sets.iter().map(|s| s.iter().copied().collect()).collect();
    for (id, l) in sorted.iter().enumerate() {
        if l.len() == 3 {
            return Err(
                NoNly::new(NlyStage::LabelCount, "rank-1 edges use all three labels".to_string())
                    .at(Some(id), Some(d.rccs[id].vertices[0])),
            );
        }
    }
    let pos = |id: usize, label: usize| sorted[id].iter().position(|&x| x == label).expect("label recorded") == 1;

    let mut sys = XorSystem::new(n_rcc);
    for l in labels {
        let e = cg.graph.edges()[l.edge];
        let (a, b) = (d.rcc_of[e.u], d.rcc_of[e.v]);
        sys.add(a, b, pos(a, l.at_u) ^ pos(b, l.at_v));
    }
    let x = sys.solve().ok_or_else(|| {
        NoNly::new(
            NlyStage::XorUnsat,
            "no permutation choice aligns every rank-1 edge".to_string(),
        )
    })?;
    Ok((0..cg.graph.n_vertices())
        .map(|v| {
            let id = d.rcc_of[v];
            Permutation::for_labels(&sorted[id], x[id])
        })
        .collect())
}

/// Permutation stage for an all-rank-1 graph: every vertex is its own component.
pub fn permutations_rank1(cg: &ClassifiedGraph, labels: &[EdgeBilabel]) -> Result<Vec<Permutation>, NoNly> {
    let ranks = vec![EdgeRank::Rank1; cg.graph.edges().len()];
    let singletons = rcc_decomposition(&cg.graph, &ranks);
    permutations_general(cg, &singletons, labels)
}

#[derive(Clone, Debug)]
pub struct NlySolution {
    /// Per vertex, the rotation whose columns are the final basis.
    pub rotations: Vec<Mat3>,
    /// The graph after dropping vanishing edges.
    pub classified: ClassifiedGraph,
    /// `O_u^T beta_uv O_v` per edge of `classified.graph`.
    pub sigma: Vec<Mat3>,
    pub stats: Vec<RoundStat>,
}

/// Rotations making every edge matrix diagonal with rank-1 edges off the
/// middle slot, or the stage at which no such rotations can exist.
pub fn solve_nly(g: &BetaGraph, tol: &Tolerances) -> Result<NlySolution, NoNly> {
    let cg = classify_edges(g, tol);
    let d = rcc_decomposition(&cg.graph, &cg.ranks);
    let all_rank1 = cg.ranks.iter().all(|r| *r == EdgeRank::Rank1);
    let (bases, stats) = if all_rank1 {
        (candidate_basis_rank1(&cg, tol)?, Vec::new())
    } else {
        candidate_basis_general(&cg, &d, tol)?
    };
    let labels = bilabel_rank1_edges(&cg, &bases, tol)?;
    let perms = permutations_general(&cg, &d, &labels)?;
    let rotations: Vec<Mat3> = bases.iter().zip(&perms).map(|(b, p)| b.permuted(p).matrix()).collect();
    let sigma = check_nly(&cg, &rotations, tol)?;
    Ok(NlySolution {
        rotations,
        classified: cg,
        sigma,
        stats,
    })
}

/// Literal postcondition: every transformed edge matrix is diagonal, and
/// every rank-1 edge has a zero middle entry, up to `eps_residual * scale`.
pub fn check_nly(cg: &ClassifiedGraph, rotations: &[Mat3], tol: &Tolerances) -> Result<Vec<Mat3>, NoNly> {
    let limit = tol.eps_residual * cg.scale;
    let mut sigma = Vec::with_capacity(cg.graph.edges().len());
    for (i, e) in cg.graph.edges().iter().enumerate() {
        if !is_orthogonal(&rotations[e.u], tol.eps_orth.max(1e-9)) {
            return Err(NoNly::new(NlyStage::Residual, "rotation lost orthogonality").at(None, Some(e.u)));
        }
        let s = rotations[e.u].transpose() * e.beta * rotations[e.v];
        let off = (0..3)
            .flat_map(|r| (0..3).filter(move |&c| c != r).map(move |c| (r, c)))
            .map(|(r, c)| s[(r, c)].abs())
            .fold(0.0, f64::max);
        let middle = if cg.ranks[i] == EdgeRank::Rank1 {
            s[(1, 1)].abs()
        } else {
            0.0
        };
        if off > limit || middle > limit {
            return Err(NoNly::new(
                NlyStage::Residual,
                format!("edge ({},{}) off-diagonal {:.3e}, middle {:.3e}", e.u, e.v, off, middle),
            ));
        }
        sigma.push(s);
    }
    Ok(sigma)
}
