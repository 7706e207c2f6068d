//! Curing of diagonal (XYZ-form) interaction graphs by signed axis
//! permutations, and the Clifford-only variant of the full decision.
//!
//! Only the slot that lands in the X position carries a sign constraint, and
//! only the nonzero axes of an edge pin the permutation. Vertices joined by
//! edges with two or more nonzero axes must share one permutation; edges with
//! a single nonzero axis only require that axis to sit in the X slot at both
//! ends or in the Z slot at both ends. Choosing the X-slot axis per group is
//! then a 2-XOR-SAT problem, and so is choosing the signs.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use crate::beta_graph::{classify_edges, rcc_decomposition, BetaGraph};
use crate::mat3::{Mat3, Tolerances, Vec3};
use crate::nly::{
    analyze_rcc, bilabel_rank1_edges, check_nly, permutations_general, propagate_basis, Basis, Transfers,
};
use crate::xorsat::XorSystem;

/// A graph whose edges carry the diagonal `(c_x, c_y, c_z)` of their coupling matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalGraph {
    pub n_vertices: usize,
    pub edges: Vec<DiagonalEdge>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiagonalEdge {
    pub u: usize,
    pub v: usize,
    pub c: [f64; 3],
}

impl DiagonalGraph {
    pub fn new(n_vertices: usize, edges: Vec<(usize, usize, [f64; 3])>) -> DiagonalGraph {
        let edges = edges
            .into_iter()
            .map(|(u, v, c)| {
                assert!(u != v && u < n_vertices && v < n_vertices, "bad edge ({u},{v})");
                DiagonalEdge { u, v, c }
            })
            .collect();
        DiagonalGraph { n_vertices, edges }
    }

    /// Diagonals of already-diagonalized edge matrices; off-diagonal entries are ignored.
    pub fn from_beta_graph(g: &BetaGraph, matrices: &[Mat3]) -> DiagonalGraph {
        DiagonalGraph::new(
            g.n_vertices(),
            g.edges()
                .iter()
                .zip(matrices)
                .map(|(e, m)| (e.u, e.v, [m[(0, 0)], m[(1, 1)], m[(2, 2)]]))
                .collect(),
        )
    }

    pub fn to_beta_graph(&self) -> BetaGraph {
        BetaGraph::new(
            self.n_vertices,
            self.edges
                .iter()
                .map(|e| (e.u, e.v, Mat3::from_diagonal(&Vec3::from(e.c))))
                .collect(),
        )
        .expect("diagonal graph edges are valid")
    }
}

/// Signed permutation matrix: column `slot` is `sign[slot] * e_{axis_of_slot[slot]}`.
/// Up to a global sign these are the adjoint actions of single-qubit Cliffords.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SignedPermutation {
    pub axis_of_slot: [usize; 3],
    pub negated: [bool; 3],
}

impl SignedPermutation {
    pub const IDENTITY: SignedPermutation = SignedPermutation {
        axis_of_slot: [0, 1, 2],
        negated: [false; 3],
    };

    pub fn matrix(&self) -> Mat3 {
        let mut m = Mat3::zeros();
        for slot in 0..3 {
            m[(self.axis_of_slot[slot], slot)] = if self.negated[slot] { -1.0 } else { 1.0 };
        }
        m
    }

    /// Nearest signed permutation, if every column is within `tol` of one.
    pub fn from_matrix(m: &Mat3, tol: f64) -> Option<SignedPermutation> {
        let mut axis_of_slot = [0; 3];
        let mut negated = [false; 3];
        for slot in 0..3 {
            let col = m.column(slot);
            let axis = col.iamax();
            let mut snapped = Vec3::zeros();
            snapped[axis] = col[axis].signum();
            if (col - snapped).norm() > tol {
                return None;
            }
            axis_of_slot[slot] = axis;
            negated[slot] = col[axis] < 0.0;
        }
        let p = SignedPermutation { axis_of_slot, negated };
        let mut seen = [false; 3];
        for a in axis_of_slot {
            if std::mem::replace(&mut seen[a], true) {
                return None;
            }
        }
        Some(p)
    }

    /// All 48 signed permutations.
    pub fn all() -> Vec<SignedPermutation> {
        const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let mut out = Vec::with_capacity(48);
        for axis_of_slot in PERMS {
            for mask in 0..8u8 {
                let negated = [mask & 1 != 0, mask & 2 != 0, mask & 4 != 0];
                out.push(SignedPermutation { axis_of_slot, negated });
            }
        }
        out
    }

    pub fn det(&self) -> f64 {
        self.matrix().determinant()
    }
}

impl fmt::Display for SignedPermutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for slot in 0..3 {
            if slot > 0 {
                f.write_str(" ")?;
            }
            let sign = if self.negated[slot] { '-' } else { '+' };
            write!(f, "{sign}{}", ['X', 'Y', 'Z'][self.axis_of_slot[slot]])?;
        }
        Ok(())
    }
}

/// An edge with couplings `(c_x, c_y, c_z)` and no fields is stoquastic iff `c_x <= -|c_y|`.
pub fn edge_is_stoquastic(c: [f64; 3], eps: f64) -> bool {
    c[0] <= -c[1].abs() + eps
}

/// `P_u^T diag(c) P_v`.
pub fn transformed_edge(c: [f64; 3], pu: &SignedPermutation, pv: &SignedPermutation) -> Mat3 {
    pu.matrix().transpose() * Mat3::from_diagonal(&Vec3::from(c)) * pv.matrix()
}

/// The transformed edge is diagonal and stoquastic.
pub fn edge_cured(c: [f64; 3], pu: &SignedPermutation, pv: &SignedPermutation, eps: f64) -> bool {
    let m = transformed_edge(c, pu, pv);
    let off_diagonal_zero = (0..3).all(|i| (0..3).all(|j| i == j || m[(i, j)].abs() <= eps));
    off_diagonal_zero && edge_is_stoquastic([m[(0, 0)], m[(1, 1)], m[(2, 2)]], eps)
}

struct Dsu(Vec<usize>);

impl Dsu {
    fn new(n: usize) -> Dsu {
        Dsu((0..n).collect())
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Edge with exactly one nonzero axis.
#[derive(Clone, Copy)]
struct SingleAxisEdge {
    u: usize,
    v: usize,
    axis: usize,
    positive: bool,
}

/// Vertices forced to share one permutation.
#[derive(Default)]
struct Group {
    vertices: Vec<usize>,
    /// Edges with two or more nonzero axes, all inside the group.
    inner: Vec<usize>,
    /// Axes of single-axis edges touching the group.
    labels: BTreeSet<usize>,
}

struct Instance<'a> {
    g: &'a DiagonalGraph,
    eps: f64,
    zero: f64,
    group_of: Vec<usize>,
    groups: Vec<Group>,
    singles: Vec<SingleAxisEdge>,
}

impl Instance<'_> {
    /// Y-slot axes compatible with X-slot axis `k` in group `gi`.
    fn y_slot_options(&self, gi: usize, k: usize) -> Vec<usize> {
        let grp = &self.groups[gi];
        if grp.labels.iter().filter(|&&a| a != k).count() > 1 {
            return Vec::new();
        }
        (0..3)
            .filter(|&m| m != k && !grp.labels.contains(&m))
            .filter(|&m| {
                grp.inner.iter().all(|&e| {
                    let c = self.g.edges[e].c;
                    let (a, b) = (c[k].abs(), c[m].abs());
                    if a <= self.zero {
                        a + b <= self.eps
                    } else {
                        a >= b - self.eps
                    }
                })
            })
            .collect()
    }

    /// Sign clauses (on vertex variables) imposed by group `gi` using X-slot axis `k`.
    fn inner_clauses(&self, gi: usize, k: usize, out: &mut Vec<(usize, usize, bool)>) {
        for &e in &self.groups[gi].inner {
            let edge = self.g.edges[e];
            if edge.c[k].abs() > self.zero {
                out.push((edge.u, edge.v, edge.c[k] > 0.0));
            }
        }
    }

    /// Whether every group in `members` can use X-slot axis `k`, with the
    /// single-axis edges of axis `k` among them all put in the X slot.
    fn block_ok(&self, members: &[usize], k: usize, singles: &[usize]) -> bool {
        if members.iter().any(|&gi| self.y_slot_options(gi, k).is_empty()) {
            return false;
        }
        let mut clauses = Vec::new();
        for &gi in members {
            self.inner_clauses(gi, k, &mut clauses);
        }
        for &s in singles {
            let e = self.singles[s];
            clauses.push((e.u, e.v, e.positive));
        }
        let mut local: HashMap<usize, usize> = HashMap::new();
        for &gi in members {
            for &v in &self.groups[gi].vertices {
                let next = local.len();
                local.entry(v).or_insert(next);
            }
        }
        let mut sys = XorSystem::new(local.len());
        for (a, b, p) in clauses {
            sys.add(local[&a], local[&b], p);
        }
        sys.solve().is_some()
    }
}

/// Signed permutations making every edge diagonal with `c_x <= -|c_y|`, or
/// `None` if no assignment of signed permutations does.
pub fn solve_xyz(g: &DiagonalGraph, eps: f64) -> Option<Vec<SignedPermutation>> {
    let zero = 0.5 * eps;
    let n = g.n_vertices;
    let nonzero = |c: &[f64; 3]| -> Vec<usize> { (0..3).filter(|&k| c[k].abs() > zero).collect() };

    let mut dsu = Dsu::new(n);
    for e in &g.edges {
        if nonzero(&e.c).len() >= 2 {
            dsu.union(e.u, e.v);
        }
    }
    let mut group_of = vec![usize::MAX; n];
    let mut groups: Vec<Group> = Vec::new();
    for v in 0..n {
        let r = dsu.find(v);
        if group_of[r] == usize::MAX {
            group_of[r] = groups.len();
            groups.push(Group::default());
        }
        group_of[v] = group_of[r];
        groups[group_of[v]].vertices.push(v);
    }
    let mut singles = Vec::new();
    for (i, e) in g.edges.iter().enumerate() {
        let nz = nonzero(&e.c);
        match nz.len() {
            0 => {}
            1 => {
                let axis = nz[0];
                groups[group_of[e.u]].labels.insert(axis);
                groups[group_of[e.v]].labels.insert(axis);
                singles.push(SingleAxisEdge {
                    u: e.u,
                    v: e.v,
                    axis,
                    positive: e.c[axis] > 0.0,
                });
            }
            _ => groups[group_of[e.u]].inner.push(i),
        }
    }
    if groups.iter().any(|grp| grp.labels.len() == 3) {
        return None;
    }
    let inst = Instance {
        g,
        eps,
        zero,
        group_of,
        groups,
        singles,
    };
    let n_groups = inst.groups.len();

    // Blocks of groups linked by single-axis edges of axis k: a block puts
    // k in the X slot everywhere or nowhere.
    let mut block_of = vec![vec![0usize; n_groups]; 3];
    let mut block_members: Vec<HashMap<usize, Vec<usize>>> = vec![HashMap::new(); 3];
    let mut block_singles: Vec<HashMap<usize, Vec<usize>>> = vec![HashMap::new(); 3];
    for k in 0..3 {
        let mut d = Dsu::new(n_groups);
        for s in inst.singles.iter().filter(|s| s.axis == k) {
            d.union(inst.group_of[s.u], inst.group_of[s.v]);
        }
        for gi in 0..n_groups {
            let b = d.find(gi);
            block_of[k][gi] = b;
            block_members[k].entry(b).or_default().push(gi);
        }
        for (si, s) in inst.singles.iter().enumerate() {
            if s.axis == k {
                block_singles[k]
                    .entry(block_of[k][inst.group_of[s.u]])
                    .or_default()
                    .push(si);
            }
        }
    }
    let mut ok_cache: HashMap<(usize, usize), bool> = HashMap::new();
    let mut ok = |k: usize, block: usize| -> bool {
        *ok_cache.entry((k, block)).or_insert_with(|| {
            let none = Vec::new();
            inst.block_ok(
                &block_members[k][&block],
                k,
                block_singles[k].get(&block).unwrap_or(&none),
            )
        })
    };

    // y-variables: "block puts its label axis in the X slot"; variable 0 is
    // the constant false.
    let mut sys = XorSystem::new(1);
    let mut var_of: HashMap<(usize, usize), usize> = HashMap::new();
    let mut var = |sys: &mut XorSystem, k: usize, block: usize| -> usize {
        *var_of.entry((k, block)).or_insert_with(|| sys.add_var())
    };
    for gi in 0..n_groups {
        let labels: Vec<usize> = inst.groups[gi].labels.iter().copied().collect();
        let label_vars: Vec<usize> = labels.iter().map(|&k| var(&mut sys, k, block_of[k][gi])).collect();
        for (&k, &y) in labels.iter().zip(&label_vars) {
            if !ok(k, block_of[k][gi]) {
                sys.add(y, 0, false);
            }
        }
        match labels.len() {
            0 => {
                if !(0..3).any(|k| ok(k, block_of[k][gi])) {
                    return None;
                }
            }
            1 => {
                let fallback = (0..3).any(|k| k != labels[0] && ok(k, block_of[k][gi]));
                if !fallback {
                    sys.add(label_vars[0], 0, true);
                }
            }
            _ => sys.add(label_vars[0], label_vars[1], true),
        }
    }
    let y = sys.solve()?;

    let x_axis: Vec<usize> = (0..n_groups)
        .map(|gi| {
            let labels = &inst.groups[gi].labels;
            labels
                .iter()
                .copied()
                .find(|&k| y[var_of[&(k, block_of[k][gi])]])
                .or_else(|| (0..3).find(|&k| !labels.contains(&k) && ok(k, block_of[k][gi])))
                .expect("feasibility checked above")
        })
        .collect();

    let mut signs = XorSystem::new(n);
    let mut clauses = Vec::new();
    for (gi, &k) in x_axis.iter().enumerate() {
        inst.inner_clauses(gi, k, &mut clauses);
    }
    for s in &inst.singles {
        if x_axis[inst.group_of[s.u]] == s.axis && x_axis[inst.group_of[s.v]] == s.axis {
            clauses.push((s.u, s.v, s.positive));
        }
    }
    for (a, b, p) in clauses {
        signs.add(a, b, p);
    }
    let t = signs.solve()?;

    let mut out = Vec::with_capacity(n);
    for v in 0..n {
        let gi = inst.group_of[v];
        let k = x_axis[gi];
        let m = inst.y_slot_options(gi, k)[0];
        out.push(SignedPermutation {
            axis_of_slot: [k, m, 3 - k - m],
            negated: [t[v], false, false],
        });
    }
    if g.edges.iter().all(|e| edge_cured(e.c, &out[e.u], &out[e.v], eps)) {
        Some(out)
    } else {
        debug_assert!(false, "assembled signed permutations fail the edge check");
        None
    }
}

/// At most one entry above `zero` in every row and every column.
pub fn is_quasi_monomial(m: &Mat3, zero: f64) -> bool {
    (0..3).all(|i| (0..3).filter(|&j| m[(i, j)].abs() > zero).count() <= 1)
        && (0..3).all(|j| (0..3).filter(|&i| m[(i, j)].abs() > zero).count() <= 1)
}

/// Signed permutations (single-qubit Cliffords) curing the graph, or `None`.
///
/// The standard basis is tried at the root of every rank>1 component and
/// carried along transfer operators; the rest is the ordinary permutation
/// stage followed by [`solve_xyz`].
pub fn decide_clifford_cure(g: &BetaGraph, tol: &Tolerances) -> Option<Vec<SignedPermutation>> {
    let zero = 0.5 * tol.eps;
    if !g.edges().iter().all(|e| is_quasi_monomial(&e.beta, zero)) {
        return None;
    }
    let cg = classify_edges(g, tol);
    let d = rcc_decomposition(&cg.graph, &cg.ranks);
    let transfers = Transfers::compute(&cg, tol);
    let mut bases = vec![Basis::standard(); g.n_vertices()];
    let axes = [Vec3::x(), Vec3::y(), Vec3::z()];
    for rcc in &d.rccs {
        let a = analyze_rcc(&cg, &d, rcc, &transfers, tol).ok()?;
        if !axes.iter().all(|e| a.root_subspaces.contains_vector(e, tol.eps_orth)) {
            return None;
        }
        propagate_basis(&cg.graph, &d, &a.tree, &transfers, Basis::standard(), &mut bases);
    }
    let snapped: Vec<Basis> = bases
        .iter()
        .map(|b| {
            // Only the lines matter here; sign choices are left to the XYZ stage.
            SignedPermutation::from_matrix(&b.matrix(), 1e-6).map(|p| {
                let unsigned = SignedPermutation {
                    negated: [false; 3],
                    ..p
                };
                Basis::from_matrix(&unsigned.matrix())
            })
        })
        .collect::<Option<_>>()?;
    let labels = bilabel_rank1_edges(&cg, &snapped, tol).ok()?;
    let perms = permutations_general(&cg, &d, &labels).ok()?;
    let rotations: Vec<Mat3> = snapped
        .iter()
        .zip(&perms)
        .map(|(b, p)| b.permuted(p).matrix())
        .collect();
    let sigma = check_nly(&cg, &rotations, tol).ok()?;
    let xyz = solve_xyz(&DiagonalGraph::from_beta_graph(&cg.graph, &sigma), tol.eps)?;
    rotations
        .iter()
        .zip(&xyz)
        .map(|(r, p)| SignedPermutation::from_matrix(&(r * p.matrix()), 1e-9))
        .collect()
}
