//! Brute-force ground truth: dense matrices, matrix-level stoquasticity,
//! exhaustive Clifford search and random-rotation refutation.

use nalgebra::{DMatrix, Matrix2, Quaternion, UnitQuaternion};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::beta_graph::BetaGraph;
use crate::mat3::{Mat3, Vec3};
use crate::pauli::{extract_graph, is_symmetric_z, Hamiltonian, LocalField, PauliAxis};
use crate::xyz::{DiagonalGraph, SignedPermutation};

/// Largest qubit count for which a dense matrix is ever built.
pub const DENSE_CAP: usize = 12;
/// Largest qubit count accepted by the exhaustive Clifford search.
pub const CLIFFORD_SEARCH_CAP: usize = 6;

pub type DenseMatrix = DMatrix<Complex64>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("{n} qubits exceeds the cap of {cap}")]
    CapExceeded { n: usize, cap: usize },
}

fn check_cap(n: usize, cap: usize) -> Result<(), OracleError> {
    if n > cap {
        Err(OracleError::CapExceeded { n, cap })
    } else {
        Ok(())
    }
}

/// Basis index bit of qubit `q`: qubit 0 is the leftmost Kronecker factor.
fn bit(n: usize, q: usize) -> usize {
    1 << (n - 1 - q)
}

/// Action of a Pauli string on computational basis states: column `x` has a
/// single entry at row `x ^ flip`, equal to `i^y_count * (-1)^popcount(x & phase)`.
#[derive(Clone, Copy, Debug)]
struct PauliAction {
    flip: usize,
    phase: usize,
    y_count: usize,
}

impl PauliAction {
    fn new(n: usize, factors: &[(usize, PauliAxis)]) -> PauliAction {
        let mut a = PauliAction {
            flip: 0,
            phase: 0,
            y_count: 0,
        };
        for &(q, axis) in factors {
            let b = bit(n, q);
            match axis {
                PauliAxis::X => a.flip |= b,
                PauliAxis::Y => {
                    a.flip |= b;
                    a.phase |= b;
                    a.y_count += 1;
                }
                PauliAxis::Z => a.phase |= b,
            }
        }
        a
    }

    fn entry(&self, x: usize) -> Complex64 {
        let sign = if (x & self.phase).count_ones().is_multiple_of(2) {
            1.0
        } else {
            -1.0
        };
        let i_pow = match self.y_count % 4 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        };
        i_pow * sign
    }
}

pub fn dense_matrix(h: &Hamiltonian) -> Result<DenseMatrix, OracleError> {
    let n = h.n_qubits();
    check_cap(n, DENSE_CAP)?;
    let dim = 1usize << n;
    let mut m = DenseMatrix::from_diagonal_element(dim, dim, Complex64::new(h.offset(), 0.0));
    for term in h.terms() {
        let action = PauliAction::new(n, &term.string.factors());
        for x in 0..dim {
            m[(x ^ action.flip, x)] += action.entry(x) * term.coefficient;
        }
    }
    Ok(m)
}

/// Largest positive off-diagonal real part or imaginary magnitude; zero or
/// below means the matrix is a symmetric Z-matrix.
pub fn dense_violation_score(m: &DenseMatrix) -> f64 {
    let mut score = f64::NEG_INFINITY;
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            let z = m[(r, c)];
            score = score.max(z.im.abs());
            if r != c {
                score = score.max(z.re);
            }
        }
    }
    score.max(0.0)
}

pub fn is_symmetric_z_dense(m: &DenseMatrix, eps: f64) -> bool {
    dense_violation_score(m) <= eps
}

fn pauli_2x2(axis: PauliAxis) -> Matrix2<Complex64> {
    let (o, l, i) = (
        Complex64::new(0.0, 0.0),
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, 1.0),
    );
    match axis {
        PauliAxis::X => Matrix2::new(o, l, l, o),
        PauliAxis::Y => Matrix2::new(o, -i, i, o),
        PauliAxis::Z => Matrix2::new(l, o, o, -l),
    }
}

/// Literal Kronecker-product construction; exponentially slower than
/// [`dense_matrix`] and used only to cross-check it.
pub fn dense_matrix_kron(h: &Hamiltonian) -> Result<DenseMatrix, OracleError> {
    let n = h.n_qubits();
    check_cap(n, 8)?;
    let dim = 1usize << n;
    let mut m = DenseMatrix::from_diagonal_element(dim, dim, Complex64::new(h.offset(), 0.0));
    for term in h.terms() {
        let factors = term.string.factors();
        let mut k = DenseMatrix::from_element(1, 1, Complex64::new(term.coefficient, 0.0));
        for q in 0..n {
            let f = match factors.iter().find(|(fq, _)| *fq == q) {
                Some(&(_, axis)) => pauli_2x2(axis),
                None => Matrix2::identity(),
            };
            let f = DenseMatrix::from_fn(2, 2, |r, c| f[(r, c)]);
            k = k.kronecker(&f);
        }
        m += k;
    }
    Ok(m)
}

/// `m -> U_q m U_q^dagger` for a single-qubit unitary on qubit `q`.
pub fn conjugate_single_qubit(m: &mut DenseMatrix, n: usize, q: usize, u: &Matrix2<Complex64>) {
    let b = bit(n, q);
    let dim = m.nrows();
    // Left multiplication mixes row pairs, right multiplication by U^dagger
    // mixes column pairs.
    for c in 0..dim {
        for r in (0..dim).filter(|r| r & b == 0) {
            let (a0, a1) = (m[(r, c)], m[(r | b, c)]);
            m[(r, c)] = u[(0, 0)] * a0 + u[(0, 1)] * a1;
            m[(r | b, c)] = u[(1, 0)] * a0 + u[(1, 1)] * a1;
        }
    }
    for r in 0..dim {
        for c in (0..dim).filter(|c| c & b == 0) {
            let (a0, a1) = (m[(r, c)], m[(r, c | b)]);
            m[(r, c)] = a0 * u[(0, 0)].conj() + a1 * u[(0, 1)].conj();
            m[(r, c | b)] = a0 * u[(1, 0)].conj() + a1 * u[(1, 1)].conj();
        }
    }
}

/// The 24 proper signed permutation matrices, i.e. the rotation group of the
/// cube, generated by closing two quarter turns under multiplication.
pub fn clifford_rotations() -> Vec<Mat3> {
    let gens = [
        Mat3::new(1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0),
        Mat3::new(0.0, 0.0, 1.0, 0.0, 1.0, 0.0, -1.0, 0.0, 0.0),
    ];
    let mut group = vec![Mat3::identity()];
    let mut i = 0;
    while i < group.len() {
        for g in &gens {
            let next = g * group[i];
            if !group.iter().any(|m| (m - next).abs().max() < 0.5) {
                group.push(next);
            }
        }
        i += 1;
    }
    group.sort_by(|a, b| a.as_slice().partial_cmp(b.as_slice()).expect("finite"));
    group.reverse();
    group
}

fn edge_prunable(beta: &Mat3, eps: f64) -> bool {
    // Odd-Y couplings must vanish and each edge's XX must dominate its YY.
    let odd_y = [(0, 1), (1, 0), (1, 2), (2, 1)];
    odd_y.iter().any(|&(r, c)| beta[(r, c)].abs() > eps) || beta[(0, 0)] > -beta[(1, 1)].abs() + eps
}

/// Exhaustive search over 24 Clifford rotations per qubit; returns indices
/// into [`clifford_rotations`] for the first curing assignment found.
pub fn clifford_cure_search(h: &Hamiltonian, eps: f64) -> Result<Option<Vec<usize>>, OracleError> {
    let n = h.n_qubits();
    check_cap(n, CLIFFORD_SEARCH_CAP)?;
    let (g, fields) = extract_graph(h);
    let table = clifford_rotations();
    let mut choice = vec![0usize; n];
    let found = search_cliffords(h, &g, &fields, &table, eps, 0, &mut choice);
    Ok(found.then_some(choice))
}

fn search_cliffords(
    h: &Hamiltonian,
    g: &BetaGraph,
    fields: &LocalField,
    table: &[Mat3],
    eps: f64,
    q: usize,
    choice: &mut Vec<usize>,
) -> bool {
    let n = g.n_vertices();
    if q == n {
        let rots: Vec<Mat3> = choice.iter().map(|&c| table[c]).collect();
        let rotated = h.rotated(&rots).expect("rotations match qubit count");
        return is_symmetric_z(&rotated, eps).holds();
    }
    for c in 0..table.len() {
        choice[q] = c;
        let o = table[c];
        if (o.transpose() * fields.0[q])[1].abs() > eps {
            continue;
        }
        let bad_edge = g.neighbors(q).iter().any(|&(w, e)| {
            w < q && {
                let edge = g.edges()[e];
                let beta = table[choice[edge.u]].transpose() * edge.beta * table[choice[edge.v]];
                edge_prunable(&beta, eps)
            }
        });
        if !bad_edge && search_cliffords(h, g, fields, table, eps, q + 1, choice) {
            return true;
        }
    }
    false
}

/// Exhaustive search over all 48 signed permutations per vertex of a
/// diagonal graph.
pub fn signed_permutation_search(g: &DiagonalGraph, eps: f64) -> Option<Vec<SignedPermutation>> {
    let all = SignedPermutation::all();
    let mats: Vec<Mat3> = all.iter().map(|p| p.matrix()).collect();
    let mut choice = vec![0usize; g.n_vertices];
    fn rec(g: &DiagonalGraph, mats: &[Mat3], eps: f64, v: usize, choice: &mut Vec<usize>) -> bool {
        if v == g.n_vertices {
            return true;
        }
        for c in 0..mats.len() {
            choice[v] = c;
            let ok = g.edges.iter().filter(|e| e.u.max(e.v) == v).all(|e| {
                let m = mats[choice[e.u]].transpose() * Mat3::from_diagonal(&Vec3::from(e.c)) * mats[choice[e.v]];
                let diagonal = (0..3).all(|i| (0..3).all(|j| i == j || m[(i, j)].abs() <= eps));
                diagonal && m[(0, 0)] <= -m[(1, 1)].abs() + eps
            });
            if ok && rec(g, mats, eps, v + 1, choice) {
                return true;
            }
        }
        false
    }
    rec(g, &mats, eps, 0, &mut choice).then(|| choice.iter().map(|&c| all[c]).collect())
}

/// Uniform random rotation from a uniform random unit quaternion.
pub fn random_rotation<R: Rng>(rng: &mut R) -> Mat3 {
    let (u1, u2, u3): (f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen());
    let tau = std::f64::consts::TAU;
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    let q = Quaternion::new(
        b * (tau * u3).cos(),
        a * (tau * u2).sin(),
        a * (tau * u2).cos(),
        b * (tau * u3).sin(),
    );
    UnitQuaternion::from_quaternion(q).to_rotation_matrix().into_inner()
}

/// Evaluates the dense violation score of `h` under per-qubit rotations
/// without materializing the matrix.
pub struct ViolationScorer {
    n: usize,
    graph: BetaGraph,
    fields: LocalField,
    /// Pauli actions of the 9 couplings of every edge, then the 3 fields of every qubit.
    actions: Vec<PauliAction>,
    /// Term indices grouped by shared flip mask (non-diagonal masks only).
    groups: Vec<Vec<usize>>,
}

impl ViolationScorer {
    pub fn new(h: &Hamiltonian) -> Result<ViolationScorer, OracleError> {
        let n = h.n_qubits();
        check_cap(n, DENSE_CAP)?;
        let (graph, fields) = extract_graph(h);
        let mut actions = Vec::new();
        for e in graph.edges() {
            for k in PauliAxis::ALL {
                for l in PauliAxis::ALL {
                    actions.push(PauliAction::new(n, &[(e.u, k), (e.v, l)]));
                }
            }
        }
        for q in 0..n {
            for k in PauliAxis::ALL {
                actions.push(PauliAction::new(n, &[(q, k)]));
            }
        }
        let mut by_mask: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for (i, a) in actions.iter().enumerate() {
            if a.flip != 0 {
                by_mask.entry(a.flip).or_default().push(i);
            }
        }
        Ok(ViolationScorer {
            n,
            graph,
            fields,
            actions,
            groups: by_mask.into_values().collect(),
        })
    }

    pub fn score(&self, rotations: &[Mat3]) -> f64 {
        let mut coef = Vec::with_capacity(self.actions.len());
        for e in self.graph.edges() {
            let b = rotations[e.u].transpose() * e.beta * rotations[e.v];
            for k in 0..3 {
                for l in 0..3 {
                    coef.push(b[(k, l)]);
                }
            }
        }
        for q in 0..self.n {
            let f = rotations[q].transpose() * self.fields.0[q];
            coef.extend(f.iter());
        }
        let mut score: f64 = 0.0;
        for group in &self.groups {
            for x in 0..1usize << self.n {
                let z: Complex64 = group.iter().map(|&t| self.actions[t].entry(x) * coef[t]).sum();
                score = score.max(z.re).max(z.im.abs());
            }
        }
        score
    }
}

/// Minimum violation score over `samples` uniform random per-qubit
/// rotations; `+inf` when no samples are drawn.
pub fn random_rotation_refute(h: &Hamiltonian, samples: usize, seed: u64) -> Result<f64, OracleError> {
    let scorer = ViolationScorer::new(h)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::INFINITY;
    let mut rots = vec![Mat3::identity(); h.n_qubits()];
    for _ in 0..samples {
        for r in rots.iter_mut() {
            *r = random_rotation(&mut rng);
        }
        best = best.min(scorer.score(&rots));
    }
    Ok(best)
}
