//! Reductions from 3-SAT to Hadamard curing with one-local fields, and the
//! brute-force deciders used to check them at small sizes.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::pauli::{is_symmetric_z, Hamiltonian, PauliAxis, PauliString, DEFAULT_EPS};

/// Largest number of qubits enumerated by [`decide_hadamard_cure`].
pub const DEFAULT_HADAMARD_CAP: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Literal {
    pub var: usize,
    pub negated: bool,
}

impl Literal {
    pub fn holds(&self, x: &[bool]) -> bool {
        x[self.var] != self.negated
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CnfFormula {
    pub n_vars: usize,
    pub clauses: Vec<[Literal; 3]>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HardnessError {
    #[error("line {line}: {message}")]
    Dimacs { line: usize, message: String },
    #[error("{count} qubits exceeds the enumeration cap of {cap}")]
    CapExceeded { count: usize, cap: usize },
    #[error("qubit ids must be distinct, got {0:?}")]
    IdCollision(Vec<usize>),
    #[error("pattern covers {got} qubits, Hamiltonian has {expected}")]
    PatternLength { expected: usize, got: usize },
}

impl CnfFormula {
    pub fn new(n_vars: usize, clauses: Vec<[Literal; 3]>) -> CnfFormula {
        assert!(
            clauses.iter().flatten().all(|l| l.var < n_vars),
            "literal refers to a variable out of range"
        );
        CnfFormula { n_vars, clauses }
    }

    pub fn evaluate(&self, x: &[bool]) -> bool {
        self.clauses.iter().all(|c| c.iter().any(|l| l.holds(x)))
    }

    /// First satisfying assignment in counting order, if any.
    pub fn brute_force_solve(&self) -> Option<Vec<bool>> {
        (0u64..1 << self.n_vars)
            .map(|mask| (0..self.n_vars).map(|i| mask >> i & 1 == 1).collect::<Vec<_>>())
            .find(|x| self.evaluate(x))
    }

    /// Uniform random clauses over three distinct variables.
    pub fn random<R: Rng>(n_vars: usize, n_clauses: usize, rng: &mut R) -> CnfFormula {
        assert!(n_vars >= 3, "need three distinct variables per clause");
        let clauses = (0..n_clauses)
            .map(|_| {
                let vars = rand::seq::index::sample(rng, n_vars, 3);
                let mut lits = [Literal { var: 0, negated: false }; 3];
                for (slot, var) in lits.iter_mut().zip(vars.iter()) {
                    *slot = Literal {
                        var,
                        negated: rng.gen_bool(0.5),
                    };
                }
                lits
            })
            .collect();
        CnfFormula { n_vars, clauses }
    }

    pub fn to_dimacs(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for CnfFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "p cnf {} {}", self.n_vars, self.clauses.len())?;
        for c in &self.clauses {
            for l in c {
                let v = l.var as i64 + 1;
                write!(f, "{} ", if l.negated { -v } else { v })?;
            }
            writeln!(f, "0")?;
        }
        Ok(())
    }
}

/// Reads DIMACS CNF where every clause has exactly three literals. Clauses
/// may span lines; `c` lines are comments and a `%` line ends the input.
pub fn parse_dimacs(text: &str) -> Result<CnfFormula, HardnessError> {
    let mut header: Option<(usize, usize)> = None;
    let mut clauses = Vec::new();
    let mut current: Vec<Literal> = Vec::new();
    let mut last_line = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        last_line = line;
        let err = |message: String| HardnessError::Dimacs { line, message };
        let content = raw.trim();
        if content.is_empty() || content.starts_with('c') {
            continue;
        }
        if content.starts_with('%') {
            break;
        }
        if content.starts_with('p') {
            if header.is_some() {
                return Err(err("duplicate problem line".into()));
            }
            let t: Vec<&str> = content.split_whitespace().collect();
            let parsed = match t.as_slice() {
                ["p", "cnf", n, m] => n.parse().ok().zip(m.parse().ok()),
                _ => None,
            };
            header = Some(parsed.ok_or_else(|| err("expected 'p cnf <vars> <clauses>'".into()))?);
            continue;
        }
        let (n_vars, _) = header.ok_or_else(|| err("clause before the problem line".into()))?;
        for tok in content.split_whitespace() {
            let lit: i64 = tok.parse().map_err(|_| err(format!("'{tok}' is not a literal")))?;
            if lit == 0 {
                let Ok(clause) = <[Literal; 3]>::try_from(current.as_slice()) else {
                    return Err(err(format!("clause has {} literals, expected 3", current.len())));
                };
                clauses.push(clause);
                current.clear();
                continue;
            }
            let var = lit.unsigned_abs() as usize - 1;
            if var >= n_vars {
                return Err(err(format!("variable {} exceeds declared count {n_vars}", var + 1)));
            }
            current.push(Literal { var, negated: lit < 0 });
        }
    }
    let err = |message: String| HardnessError::Dimacs {
        line: last_line,
        message,
    };
    let (n_vars, n_clauses) = header.ok_or_else(|| err("missing problem line".into()))?;
    if !current.is_empty() {
        return Err(err("last clause is not terminated by 0".into()));
    }
    if clauses.len() != n_clauses {
        return Err(err(format!("declared {n_clauses} clauses, found {}", clauses.len())));
    }
    Ok(CnfFormula { n_vars, clauses })
}

fn distinct(ids: &[usize]) -> Result<(), HardnessError> {
    let mut sorted = ids.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() == ids.len() {
        Ok(())
    } else {
        Err(HardnessError::IdCollision(ids.to_vec()))
    }
}

fn hamiltonian_for(ids: &[usize]) -> Hamiltonian {
    Hamiltonian::new(ids.iter().max().map_or(1, |m| m + 1)).expect("positive")
}

/// The ancilla gadget attached to qubit `u`: it is stoquastic as is and
/// under Hadamards on all four qubits, but under no mixed pattern.
pub fn gadget(u: usize, a: usize, b: usize, c: usize) -> Result<Hamiltonian, HardnessError> {
    use PauliAxis::*;
    distinct(&[u, a, b, c])?;
    let mut h = hamiltonian_for(&[u, a, b, c]);
    let mut add = |coef: f64, f: &[(usize, PauliAxis)]| h.add(coef, f).expect("valid ids");
    add(-1.0, &[(c, X)]);
    add(-1.0, &[(c, Z)]);
    for (p, q, w) in [
        (u, a, [1.0, 1.0, 1.0]),
        (a, b, [3.0, 1.0, 2.0]),
        (b, c, [1.0, 1.0, 1.0]),
    ] {
        for (k, axis) in PauliAxis::ALL.into_iter().enumerate() {
            add(-w[k], &[(p, axis), (q, axis)]);
        }
    }
    Ok(h)
}

/// Adds `-(X_d + Z_d + I) (s1 + s2 + s3 + 2I)` where each `s` is a single
/// Pauli factor; the identity part goes to the offset.
fn add_or_block(h: &mut Hamiltonian, d: usize, s: [(usize, PauliAxis); 3]) {
    let left = [Some((d, PauliAxis::X)), Some((d, PauliAxis::Z)), None];
    let right = [Some(s[0]), Some(s[1]), Some(s[2]), None];
    for l in left {
        for r in right {
            let coef = if r.is_none() { -2.0 } else { -1.0 };
            let factors: Vec<_> = l.into_iter().chain(r).collect();
            h.add_string(coef, PauliString::from_factors(&factors).expect("distinct qubits"))
                .expect("ids within range");
        }
    }
}

/// `-(X_d + Z_d + I)(Z_1 + Z_2 + Z_3 + 2I)`.
pub fn clause_hamiltonian(d: usize, q1: usize, q2: usize, q3: usize) -> Result<Hamiltonian, HardnessError> {
    distinct(&[d, q1, q2, q3])?;
    let mut h = hamiltonian_for(&[d, q1, q2, q3]);
    add_or_block(&mut h, d, [(q1, PauliAxis::Z), (q2, PauliAxis::Z), (q3, PauliAxis::Z)]);
    Ok(h)
}

/// Encodes a formula on `n + m` qubits: variables first, then one ancilla
/// per clause. A positive literal couples through Z, a negated one through X.
pub fn encode_formula(cnf: &CnfFormula) -> Hamiltonian {
    let n = cnf.n_vars + cnf.clauses.len();
    let mut h = Hamiltonian::new(n.max(1)).expect("positive");
    for (k, clause) in cnf.clauses.iter().enumerate() {
        let s = clause.map(|l| (l.var, if l.negated { PauliAxis::X } else { PauliAxis::Z }));
        add_or_block(&mut h, cnf.n_vars + k, s);
    }
    h
}

/// [`encode_formula`] plus one gadget per qubit; qubit `u`'s ancillas are
/// `N + 3u, N + 3u + 1, N + 3u + 2` with `N = n + m`.
pub fn encode_formula_with_gadgets(cnf: &CnfFormula) -> Hamiltonian {
    let mut h = encode_formula(cnf);
    let n = cnf.n_vars + cnf.clauses.len();
    for u in 0..n {
        let g = gadget(u, n + 3 * u, n + 3 * u + 1, n + 3 * u + 2).expect("distinct ids");
        h.add_hamiltonian(&g);
    }
    h
}

fn hadamard_image(axis: PauliAxis) -> (PauliAxis, f64) {
    match axis {
        PauliAxis::X => (PauliAxis::Z, 1.0),
        PauliAxis::Y => (PauliAxis::Y, -1.0),
        PauliAxis::Z => (PauliAxis::X, 1.0),
    }
}

/// Conjugates by a Hadamard on every qubit with `pattern[q]` set.
pub fn conjugate_by_hadamards(h: &Hamiltonian, pattern: &[bool]) -> Result<Hamiltonian, HardnessError> {
    if pattern.len() != h.n_qubits() {
        return Err(HardnessError::PatternLength {
            expected: h.n_qubits(),
            got: pattern.len(),
        });
    }
    let mut out = Hamiltonian::new(h.n_qubits()).expect("positive");
    out.add(h.offset(), &[]).expect("identity");
    for t in h.terms() {
        let mut coef = t.coefficient;
        let factors: Vec<_> = t
            .string
            .factors()
            .into_iter()
            .map(|(q, a)| {
                if pattern[q] {
                    let (image, sign) = hadamard_image(a);
                    coef *= sign;
                    (q, image)
                } else {
                    (q, a)
                }
            })
            .collect();
        out.add(coef, &factors).expect("same qubits");
    }
    Ok(out)
}

/// Enumerates Hadamard patterns on `qubits` in Gray-code order and returns
/// the first (aligned with `qubits`) under which `h` is stoquastic.
pub fn decide_hadamard_cure(h: &Hamiltonian, qubits: &[usize], cap: usize) -> Result<Option<Vec<bool>>, HardnessError> {
    if qubits.len() > cap {
        return Err(HardnessError::CapExceeded {
            count: qubits.len(),
            cap,
        });
    }
    distinct(qubits)?;
    let mut bits = vec![false; qubits.len()];
    let mut current = h.clone();
    for step in 0u64..1 << qubits.len() {
        if step > 0 {
            let i = step.trailing_zeros() as usize;
            bits[i] = !bits[i];
            // A single Hadamard is its own inverse, so toggling one qubit
            // moves between neighboring patterns.
            let mut single = vec![false; h.n_qubits()];
            single[qubits[i]] = true;
            current = conjugate_by_hadamards(&current, &single)?;
        }
        if is_symmetric_z(&current, DEFAULT_EPS).holds() {
            return Ok(Some(bits));
        }
    }
    Ok(None)
}

/// For every assignment `x`, checks that the formula holds exactly when the
/// encoded Hamiltonian conjugated by Hadamards on `(x, y)` is stoquastic, for
/// a sample of ancilla patterns `y` (all zeros, all ones, and pseudo-random).
pub fn check_hadamard_equivalence(cnf: &CnfFormula, cap: usize) -> Result<bool, HardnessError> {
    if cnf.n_vars > cap {
        return Err(HardnessError::CapExceeded { count: cnf.n_vars, cap });
    }
    let h = encode_formula(cnf);
    let m = cnf.clauses.len();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0054);
    for mask in 0u64..1 << cnf.n_vars {
        let x: Vec<bool> = (0..cnf.n_vars).map(|i| mask >> i & 1 == 1).collect();
        let expected = cnf.evaluate(&x);
        let mut ys = vec![vec![false; m], vec![true; m]];
        ys.extend((0..3).map(|_| (0..m).map(|_| rng.gen_bool(0.5)).collect::<Vec<_>>()));
        for y in ys {
            let pattern: Vec<bool> = x.iter().chain(&y).copied().collect();
            let conj = conjugate_by_hadamards(&h, &pattern)?;
            if is_symmetric_z(&conj, DEFAULT_EPS).holds() != expected {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{conjugate_single_qubit, dense_matrix, is_symmetric_z_dense};
    use nalgebra::Matrix2;
    use num_complex::Complex64;
    use proptest::prelude::*;
    use PauliAxis::*;

    fn lit(v: i64) -> Literal {
        Literal {
            var: v.unsigned_abs() as usize - 1,
            negated: v < 0,
        }
    }

    fn cnf(n: usize, clauses: &[[i64; 3]]) -> CnfFormula {
        CnfFormula::new(n, clauses.iter().map(|c| c.map(lit)).collect())
    }

    fn stoq(h: &Hamiltonian) -> bool {
        let coefficient = is_symmetric_z(h, 1e-9).holds();
        assert_eq!(coefficient, is_symmetric_z_dense(&dense_matrix(h).unwrap(), 1e-9));
        coefficient
    }

    fn hadamard_on(h: &Hamiltonian, qubits: &[usize]) -> Hamiltonian {
        let mut p = vec![false; h.n_qubits()];
        for &q in qubits {
            p[q] = true;
        }
        conjugate_by_hadamards(h, &p).unwrap()
    }

    #[test]
    fn dimacs_examples() {
        let f = parse_dimacs("p cnf 3 1\n1 2 3 0").unwrap();
        assert_eq!(f, cnf(3, &[[1, 2, 3]]));
        let f = parse_dimacs("c comment\np cnf 3 1\n-1 2\n 3 0\n").unwrap();
        assert!(f.clauses[0][0].negated);
        assert!(matches!(
            parse_dimacs("p cnf 3 1\n1 2 0"),
            Err(HardnessError::Dimacs { line: 2, .. })
        ));
        assert!(parse_dimacs("p cnf x 1\n1 2 3 0").is_err());
        assert!(parse_dimacs("1 2 3 0").is_err());
        assert!(parse_dimacs("p cnf 2 1\n1 2 3 0").is_err());
        assert!(parse_dimacs("p cnf 3 2\n1 2 3 0").is_err());
        let f = cnf(4, &[[1, -2, 3], [-4, 2, 1]]);
        assert_eq!(parse_dimacs(&f.to_dimacs()).unwrap(), f);
    }

    #[test]
    fn gadget_examples() {
        let g = gadget(0, 1, 2, 3).unwrap();
        assert_eq!(g.len(), 11);
        assert!(stoq(&g));
        assert!(stoq(&hadamard_on(&g, &[0, 1, 2, 3])));
        assert!(!stoq(&hadamard_on(&g, &[0])));
        assert!(gadget(0, 1, 1, 2).is_err());
    }

    #[test]
    fn or_examples() {
        let h = clause_hamiltonian(0, 1, 2, 3).unwrap();
        assert_eq!(h.offset(), -2.0);
        for mask in 0..8u32 {
            let qs: Vec<usize> = (0..3).filter(|i| mask >> i & 1 == 1).map(|i| i + 1).collect();
            assert_eq!(stoq(&hadamard_on(&h, &qs)), mask != 0);
        }
        assert_eq!(hadamard_on(&h, &[0]), h);
        assert!(clause_hamiltonian(0, 1, 1, 2).is_err());
    }

    #[test]
    fn hadamard_rewrites() {
        let mut h = Hamiltonian::new(2).unwrap();
        h.add(1.0, &[(0, X)]).unwrap();
        let w = hadamard_on(&h, &[0]);
        assert_eq!(w.coefficient(&PauliString::One(0, Z)), 1.0);
        let mut h = Hamiltonian::new(2).unwrap();
        h.add(1.0, &[(0, X), (1, Y)]).unwrap();
        let w = hadamard_on(&h, &[0, 1]);
        assert_eq!(w.coefficient(&PauliString::Two((0, Z), (1, Y))), -1.0);
        assert!(conjugate_by_hadamards(&h, &[true]).is_err());
    }

    #[test]
    fn encoding_examples() {
        let single = encode_formula(&cnf(3, &[[1, 2, 3]]));
        assert_eq!(single, clause_hamiltonian(3, 0, 1, 2).unwrap());
        let negated = encode_formula(&cnf(3, &[[-1, 2, 3]]));
        assert_eq!(negated.coefficient(&PauliString::Two((0, X), (3, X))), -1.0);
        let two = encode_formula(&cnf(5, &[[1, 2, 3], [-3, 4, 5]]));
        assert_eq!(two.n_qubits(), 7);
        assert_eq!(encode_formula_with_gadgets(&cnf(3, &[[1, 2, 3]])).n_qubits(), 16);
        let empty = encode_formula_with_gadgets(&cnf(2, &[]));
        assert_eq!(empty.n_qubits(), 8);
        assert_eq!(empty.len(), 22);
        let text = encode_formula_with_gadgets(&cnf(3, &[[1, -2, 3]])).to_text();
        assert_eq!(
            text.parse::<Hamiltonian>().unwrap(),
            encode_formula_with_gadgets(&cnf(3, &[[1, -2, 3]]))
        );
    }

    #[test]
    fn hadamard_decision_examples() {
        let h = clause_hamiltonian(0, 1, 2, 3).unwrap();
        let x = decide_hadamard_cure(&h, &[1, 2, 3], 20).unwrap().unwrap();
        assert!(x.iter().any(|&b| b));

        let all8: Vec<[i64; 3]> = (0..8)
            .map(|m| [1, 2, 3].map(|v| if m >> (v - 1) & 1 == 1 { -v } else { v }))
            .collect();
        let unsat = cnf(3, &all8);
        assert_eq!(unsat.brute_force_solve(), None);
        assert_eq!(
            decide_hadamard_cure(&encode_formula(&unsat), &[0, 1, 2], 20).unwrap(),
            None
        );

        let mut stoq = Hamiltonian::new(2).unwrap();
        stoq.add(-1.0, &[(0, X), (1, X)]).unwrap();
        assert_eq!(
            decide_hadamard_cure(&stoq, &[0, 1], 20).unwrap(),
            Some(vec![false, false])
        );
        assert!(decide_hadamard_cure(&stoq, &[0, 1], 1).is_err());
    }

    #[test]
    fn lemma_examples() {
        assert!(check_hadamard_equivalence(&cnf(3, &[[1, 2, 3]]), 20).unwrap());
        assert!(check_hadamard_equivalence(&cnf(3, &[[1, -2, 3], [1, -2, 3]]), 20).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            assert!(check_hadamard_equivalence(&CnfFormula::random(5, 6, &mut rng), 20).unwrap());
        }
        assert!(check_hadamard_equivalence(&cnf(3, &[[1, 2, 3]]), 2).is_err());
    }

    fn gate(name: &str) -> Matrix2<Complex64> {
        let r = |x: f64| Complex64::new(x, 0.0);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let w = Matrix2::new(r(s), r(s), r(s), r(-s));
        let x = Matrix2::new(r(0.0), r(1.0), r(1.0), r(0.0));
        match name {
            "I" => Matrix2::identity(),
            "W" => w,
            "X" => x,
            _ => x * w,
        }
    }

    #[test]
    fn hadamard_pattern_cures_the_gadget_extended_hamiltonian() {
        // +X on the data qubit is cured by one Hadamard; the gadget forces
        // the same Hadamard onto its three ancillas.
        let mut h = Hamiltonian::new(4).unwrap();
        h.add(1.0, &[(0, X)]).unwrap();
        h.add_hamiltonian(&gadget(0, 1, 2, 3).unwrap());
        assert!(!stoq(&h));
        let mut m = dense_matrix(&h).unwrap();
        for q in 0..4 {
            conjugate_single_qubit(&mut m, 4, q, &gate("W"));
        }
        assert!(is_symmetric_z_dense(&m, 1e-9));
    }

    #[test]
    fn gadget_admits_only_uniform_patterns_modulo_x() {
        let g = gadget(0, 1, 2, 3).unwrap();
        let base = dense_matrix(&g).unwrap();
        let names = ["I", "W", "X", "XW"];
        let mut curing = 0;
        for code in 0..256usize {
            let choice: Vec<usize> = (0..4).map(|q| code >> (2 * q) & 3).collect();
            let mut m = base.clone();
            for (q, &c) in choice.iter().enumerate() {
                conjugate_single_qubit(&mut m, 4, q, &gate(names[c]));
            }
            if is_symmetric_z_dense(&m, 1e-9) {
                curing += 1;
                let has_w: Vec<bool> = choice.iter().map(|&c| c % 2 == 1).collect();
                assert!(has_w.iter().all(|&b| b == has_w[0]), "{choice:?}");
            }
        }
        assert!(curing >= 2);
    }

    proptest! {
        #[test]
        fn hadamard_conjugation_is_an_involution(seed in any::<u64>(), mask in 0u32..64) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = encode_formula(&CnfFormula::random(4, 2, &mut rng));
            let p: Vec<bool> = (0..h.n_qubits()).map(|q| mask >> q & 1 == 1).collect();
            let once = conjugate_by_hadamards(&h, &p).unwrap();
            prop_assert_eq!(conjugate_by_hadamards(&once, &p).unwrap(), h.clone());
            let mut a: Vec<f64> = h.terms().map(|t| t.coefficient.abs()).collect();
            let mut b: Vec<f64> = once.terms().map(|t| t.coefficient.abs()).collect();
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            prop_assert_eq!(a, b);
        }

        #[test]
        fn ancilla_hadamards_never_matter(seed in any::<u64>(), xmask in 0u32..32, ymask in 0u32..8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = CnfFormula::random(5, 3, &mut rng);
            let h = encode_formula(&f);
            let x: Vec<bool> = (0..5).map(|i| xmask >> i & 1 == 1).collect();
            let with_y: Vec<bool> = x.iter().copied().chain((0..3).map(|k| ymask >> k & 1 == 1)).collect();
            let without: Vec<bool> = x.iter().copied().chain([false; 3]).collect();
            prop_assert_eq!(
                is_symmetric_z(&conjugate_by_hadamards(&h, &with_y).unwrap(), 1e-9).holds(),
                is_symmetric_z(&conjugate_by_hadamards(&h, &without).unwrap(), 1e-9).holds()
            );
        }
    }
}
