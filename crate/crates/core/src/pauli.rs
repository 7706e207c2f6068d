//! Two-local Pauli Hamiltonians: storage, the line-oriented text format, and
//! the coefficient-level test for being a symmetric Z-matrix.
//!
//! A [`Hamiltonian`] is a sparse map from Pauli strings of weight at most two
//! to real coefficients, plus a scalar energy offset for the identity
//! component. Coefficients are merged on insertion and exact zeros are never
//! stored.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::beta_graph::BetaGraph;
use crate::mat3::{Mat3, Vec3};

/// Default absolute tolerance on coefficient comparisons.
pub const DEFAULT_EPS: f64 = 1e-9;

/// Slack below `BORDERLINE_FACTOR * eps` marks a decision as borderline.
pub const BORDERLINE_FACTOR: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PauliAxis {
    X,
    Y,
    Z,
}

impl PauliAxis {
    pub const ALL: [PauliAxis; 3] = [PauliAxis::X, PauliAxis::Y, PauliAxis::Z];

    /// Zero-based index: X = 0, Y = 1, Z = 2.
    pub fn index(self) -> usize {
        match self {
            PauliAxis::X => 0,
            PauliAxis::Y => 1,
            PauliAxis::Z => 2,
        }
    }

    /// One-based label used when talking about basis slots: X = 1, Y = 2, Z = 3.
    pub fn label(self) -> u8 {
        self.index() as u8 + 1
    }

    pub fn from_index(i: usize) -> PauliAxis {
        PauliAxis::ALL[i]
    }

    pub fn symbol(self) -> char {
        match self {
            PauliAxis::X => 'X',
            PauliAxis::Y => 'Y',
            PauliAxis::Z => 'Z',
        }
    }

    fn from_symbol(c: char) -> Option<PauliAxis> {
        match c {
            'X' | 'x' => Some(PauliAxis::X),
            'Y' | 'y' => Some(PauliAxis::Y),
            'Z' | 'z' => Some(PauliAxis::Z),
            _ => None,
        }
    }
}

/// A Pauli string acting on at most two qubits, with strictly increasing
/// qubit indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PauliString {
    Identity,
    One(usize, PauliAxis),
    Two((usize, PauliAxis), (usize, PauliAxis)),
}

impl PauliString {
    /// Builds a string from unordered factors. Fails on a repeated qubit or
    /// more than two factors.
    pub fn from_factors(factors: &[(usize, PauliAxis)]) -> Result<PauliString, PauliError> {
        match *factors {
            [] => Ok(PauliString::Identity),
            [(q, a)] => Ok(PauliString::One(q, a)),
            [f0, f1] => {
                if f0.0 == f1.0 {
                    return Err(PauliError::RepeatedQubit(f0.0));
                }
                let (lo, hi) = if f0.0 < f1.0 { (f0, f1) } else { (f1, f0) };
                Ok(PauliString::Two(lo, hi))
            }
            _ => Err(PauliError::TooManyFactors(factors.len())),
        }
    }

    pub fn weight(&self) -> usize {
        match self {
            PauliString::Identity => 0,
            PauliString::One(..) => 1,
            PauliString::Two(..) => 2,
        }
    }

    pub fn factors(&self) -> Vec<(usize, PauliAxis)> {
        match *self {
            PauliString::Identity => vec![],
            PauliString::One(q, a) => vec![(q, a)],
            PauliString::Two(f0, f1) => vec![f0, f1],
        }
    }

    pub fn max_qubit(&self) -> Option<usize> {
        match *self {
            PauliString::Identity => None,
            PauliString::One(q, _) => Some(q),
            PauliString::Two(_, (q, _)) => Some(q),
        }
    }

    pub fn y_count(&self) -> usize {
        self.factors().iter().filter(|(_, a)| *a == PauliAxis::Y).count()
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            PauliString::Identity => write!(f, "I"),
            PauliString::One(q, a) => write!(f, "{}{}", a.symbol(), q),
            PauliString::Two((q0, a0), (q1, a1)) => {
                write!(f, "{}{} {}{}", a0.symbol(), q0, a1.symbol(), q1)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PauliTerm {
    pub coefficient: f64,
    pub string: PauliString,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PauliError {
    #[error("qubit {0} appears twice in one Pauli string")]
    RepeatedQubit(usize),
    #[error("Pauli string has {0} factors; at most two are supported")]
    TooManyFactors(usize),
    #[error("qubit index {index} out of range for {n_qubits} qubits")]
    QubitOutOfRange { index: usize, n_qubits: usize },
    #[error("coefficient {0} is not finite")]
    NonFinite(f64),
    #[error("Hamiltonian must have at least one qubit")]
    NoQubits,
    #[error("expected {expected} local fields/rotations, got {got}")]
    LengthMismatch { expected: usize, got: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: duplicate 'qubits' header")]
    DuplicateHeader { line: usize },
    #[error("line {line}: qubit index {index} >= declared qubit count {declared}")]
    IndexOutOfRange { line: usize, index: usize, declared: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Hamiltonian {
    n_qubits: usize,
    offset: f64,
    terms: BTreeMap<PauliString, f64>,
}

impl Hamiltonian {
    pub fn new(n_qubits: usize) -> Result<Hamiltonian, PauliError> {
        if n_qubits == 0 {
            return Err(PauliError::NoQubits);
        }
        Ok(Hamiltonian {
            n_qubits,
            offset: 0.0,
            terms: BTreeMap::new(),
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// Coefficient of the identity component. Excluded from every
    /// stoquasticity test since diagonal shifts do not affect signs.
    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Adds `coefficient * P` where `P` is the product of `factors`.
    pub fn add(&mut self, coefficient: f64, factors: &[(usize, PauliAxis)]) -> Result<(), PauliError> {
        let string = PauliString::from_factors(factors)?;
        self.add_string(coefficient, string)
    }

    pub fn add_string(&mut self, coefficient: f64, string: PauliString) -> Result<(), PauliError> {
        if !coefficient.is_finite() {
            return Err(PauliError::NonFinite(coefficient));
        }
        if let Some(q) = string.max_qubit() {
            if q >= self.n_qubits {
                return Err(PauliError::QubitOutOfRange {
                    index: q,
                    n_qubits: self.n_qubits,
                });
            }
        }
        if string == PauliString::Identity {
            self.offset += coefficient;
            return Ok(());
        }
        let entry = self.terms.entry(string).or_insert(0.0);
        *entry += coefficient;
        if *entry == 0.0 {
            self.terms.remove(&string);
        }
        Ok(())
    }

    /// Adds every term of `other`, growing the qubit count if needed.
    pub fn add_hamiltonian(&mut self, other: &Hamiltonian) {
        self.n_qubits = self.n_qubits.max(other.n_qubits);
        self.offset += other.offset;
        for (s, c) in &other.terms {
            self.add_string(*c, *s).expect("qubit count already grown");
        }
    }

    pub fn coefficient(&self, string: &PauliString) -> f64 {
        match string {
            PauliString::Identity => self.offset,
            s => self.terms.get(s).copied().unwrap_or(0.0),
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = PauliTerm> + '_ {
        self.terms.iter().map(|(s, c)| PauliTerm {
            coefficient: *c,
            string: *s,
        })
    }

    pub fn is_exactly_two_local(&self) -> bool {
        self.terms.keys().all(|s| s.weight() == 2)
    }

    /// Relabels qubit `q` as `perm[q]`.
    pub fn relabeled(&self, perm: &[usize]) -> Result<Hamiltonian, PauliError> {
        if perm.len() != self.n_qubits {
            return Err(PauliError::LengthMismatch {
                expected: self.n_qubits,
                got: perm.len(),
            });
        }
        let mut out = Hamiltonian::new(self.n_qubits)?;
        out.offset = self.offset;
        for (s, c) in &self.terms {
            let factors: Vec<_> = s.factors().into_iter().map(|(q, a)| (perm[q], a)).collect();
            out.add(*c, &factors)?;
        }
        Ok(out)
    }

    /// Rewrites the Hamiltonian in rotated local frames: every interaction
    /// matrix becomes `O_u^T beta_uv O_v` and every local field `O_u^T h_u`.
    /// This is the coefficient picture of conjugating by a product of
    /// single-qubit unitaries.
    pub fn rotated(&self, rotations: &[Mat3]) -> Result<Hamiltonian, PauliError> {
        if rotations.len() != self.n_qubits {
            return Err(PauliError::LengthMismatch {
                expected: self.n_qubits,
                got: rotations.len(),
            });
        }
        let (graph, fields) = extract_graph(self);
        let mut out = Hamiltonian::new(self.n_qubits)?;
        out.offset = self.offset;
        for e in graph.edges() {
            let beta = rotations[e.u].transpose() * e.beta * rotations[e.v];
            add_beta(&mut out, e.u, e.v, &beta)?;
        }
        for (u, h) in fields.0.iter().enumerate() {
            let h = rotations[u].transpose() * h;
            for k in 0..3 {
                if h[k] != 0.0 {
                    out.add(h[k], &[(u, PauliAxis::from_index(k))])?;
                }
            }
        }
        Ok(out)
    }

    /// Serializes to the text format. Parsing the output reproduces `self`.
    pub fn to_text(&self) -> String {
        self.to_string()
    }
}

fn add_beta(h: &mut Hamiltonian, u: usize, v: usize, beta: &Mat3) -> Result<(), PauliError> {
    for k in 0..3 {
        for l in 0..3 {
            let c = beta[(k, l)];
            if c != 0.0 {
                h.add(c, &[(u, PauliAxis::from_index(k)), (v, PauliAxis::from_index(l))])?;
            }
        }
    }
    Ok(())
}

impl fmt::Display for Hamiltonian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "qubits {}", self.n_qubits)?;
        if self.offset != 0.0 {
            writeln!(f, "{:?}", self.offset)?;
        }
        for (s, c) in &self.terms {
            writeln!(f, "{:?} {}", c, s)?;
        }
        Ok(())
    }
}

impl FromStr for Hamiltonian {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_hamiltonian(s)
    }
}

/// Parses the line format: an optional `qubits N` header, then one term per
/// line as `<coef> [<axis><index> [<axis><index>]]`. `#` starts a comment. A
/// line holding only a coefficient contributes to the identity offset.
pub fn parse_hamiltonian(text: &str) -> Result<Hamiltonian, ParseError> {
    let mut declared: Option<usize> = None;
    let mut parsed: Vec<(usize, f64, PauliString)> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let first = tokens.next().expect("non-empty line");

        if first.eq_ignore_ascii_case("qubits") {
            if declared.is_some() {
                return Err(ParseError::DuplicateHeader { line: line_no });
            }
            let malformed = |message: &str| ParseError::Malformed {
                line: line_no,
                message: message.to_string(),
            };
            let n: usize = tokens
                .next()
                .ok_or_else(|| malformed("'qubits' header needs a count"))?
                .parse()
                .map_err(|_| malformed("qubit count is not a nonnegative integer"))?;
            if n == 0 {
                return Err(malformed("qubit count must be positive"));
            }
            if tokens.next().is_some() {
                return Err(malformed("trailing tokens after qubit count"));
            }
            declared = Some(n);
            continue;
        }

        let coefficient: f64 = first.parse().map_err(|_| ParseError::Malformed {
            line: line_no,
            message: format!("'{first}' is not a number"),
        })?;
        if !coefficient.is_finite() {
            return Err(ParseError::Malformed {
                line: line_no,
                message: "coefficient must be finite".into(),
            });
        }
        let mut factors = Vec::new();
        for tok in tokens {
            factors.push(parse_factor(tok).ok_or_else(|| ParseError::Malformed {
                line: line_no,
                message: format!("'{tok}' is not a Pauli factor like X3"),
            })?);
        }
        let string = PauliString::from_factors(&factors).map_err(|e| ParseError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        parsed.push((line_no, coefficient, string));
    }

    let max_index = parsed.iter().filter_map(|(_, _, s)| s.max_qubit()).max();
    let n_qubits = match declared {
        Some(n) => {
            for (line, _, s) in &parsed {
                if let Some(q) = s.max_qubit() {
                    if q >= n {
                        return Err(ParseError::IndexOutOfRange {
                            line: *line,
                            index: q,
                            declared: n,
                        });
                    }
                }
            }
            n
        }
        None => max_index.map_or(1, |m| m + 1),
    };

    let mut h = Hamiltonian::new(n_qubits).expect("positive qubit count");
    for (_, c, s) in parsed {
        h.add_string(c, s).expect("validated above");
    }
    Ok(h)
}

fn parse_factor(tok: &str) -> Option<(usize, PauliAxis)> {
    let mut chars = tok.chars();
    let axis = PauliAxis::from_symbol(chars.next()?)?;
    let rest = chars.as_str();
    if rest.is_empty() || !rest.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    Some((rest.parse().ok()?, axis))
}

/// Per-qubit vector of one-local coefficients; component `k` multiplies
/// `sigma_k` on that qubit.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalField(pub Vec<Vec3>);

impl LocalField {
    pub fn zeros(n: usize) -> LocalField {
        LocalField(vec![Vec3::zeros(); n])
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|h| h.iter().all(|&x| x == 0.0))
    }
}

/// Splits a Hamiltonian into its interaction graph (one 3x3 matrix per
/// interacting pair, stored with `u < v`) and its local fields.
pub fn extract_graph(h: &Hamiltonian) -> (BetaGraph, LocalField) {
    let mut fields = LocalField::zeros(h.n_qubits);
    let mut betas: BTreeMap<(usize, usize), Mat3> = BTreeMap::new();
    for t in h.terms() {
        match t.string {
            PauliString::Identity => {}
            PauliString::One(q, a) => fields.0[q][a.index()] += t.coefficient,
            PauliString::Two((u, a), (v, b)) => {
                betas.entry((u, v)).or_insert_with(Mat3::zeros)[(a.index(), b.index())] += t.coefficient;
            }
        }
    }
    let edges = betas.into_iter().map(|((u, v), b)| (u, v, b)).collect();
    let graph = BetaGraph::new(h.n_qubits, edges).expect("pairs come from valid Pauli strings");
    (graph, fields)
}

/// Rebuilds a Hamiltonian from its graph, fields and offset.
pub fn hamiltonian_from_graph(graph: &BetaGraph, fields: &LocalField, offset: f64) -> Result<Hamiltonian, PauliError> {
    let mut h = Hamiltonian::new(graph.n_vertices())?;
    if fields.0.len() != graph.n_vertices() {
        return Err(PauliError::LengthMismatch {
            expected: graph.n_vertices(),
            got: fields.0.len(),
        });
    }
    h.offset = offset;
    for e in graph.edges() {
        add_beta(&mut h, e.u, e.v, &e.beta)?;
    }
    for (u, f) in fields.0.iter().enumerate() {
        for k in 0..3 {
            if f[k] != 0.0 {
                h.add(f[k], &[(u, PauliAxis::from_index(k))])?;
            }
        }
    }
    Ok(h)
}

/// One failed condition of the symmetric Z-matrix test.
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    /// A Pauli string with an odd number of Y factors makes the matrix complex.
    NonReal { string: PauliString, coefficient: f64 },
    /// `a_XX > -|a_YY|` on an edge.
    PairFlip { u: usize, v: usize, a_xx: f64, a_yy: f64 },
    /// The X field on a qubit does not dominate its XZ/ZX partners.
    SingleFlip { qubit: usize, a_x: f64, partner_sum: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonReal { string, coefficient } => {
                write!(f, "imaginary term {coefficient:?} {string}")
            }
            Violation::PairFlip { u, v, a_xx, a_yy } => {
                write!(f, "a_XX > -|a_YY| on edge ({u},{v}) (a_XX={a_xx:?}, a_YY={a_yy:?})")
            }
            Violation::SingleFlip {
                qubit,
                a_x,
                partner_sum,
            } => write!(
                f,
                "a_X > -sum|a_XZ| on qubit {qubit} (a_X={a_x:?}, sum={partner_sum:?})"
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SymZReport {
    pub violations: Vec<Violation>,
    /// Smallest slack over the conditions that involve a nonzero coefficient;
    /// negative when a condition fails. `+inf` if no such condition exists.
    pub min_slack: f64,
    /// True when some condition holds or fails by less than `10 * eps`.
    pub borderline: bool,
}

impl SymZReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Decides whether `h` is a symmetric Z-matrix in the computational basis,
/// at coefficient level and in time linear in the number of terms.
///
/// The conditions are: no string with an odd number of Y factors; on every
/// pair `a_XX <= -|a_YY|`; on every qubit `a_X^u <= -sum_v |a_XZ^{uv}|`, where
/// the sum runs over every two-local term with X on `u` and Z on the partner.
/// For a two-local Hamiltonian these are equivalent to the dense matrix being
/// real with non-positive off-diagonal entries.
pub fn is_symmetric_z(h: &Hamiltonian, eps: f64) -> SymZReport {
    let mut violations = Vec::new();
    let mut min_slack = f64::INFINITY;
    let mut borderline = false;
    let mut record = |slack: f64, active: bool| {
        if active {
            min_slack = min_slack.min(slack);
            if slack.abs() < BORDERLINE_FACTOR * eps {
                borderline = true;
            }
        }
    };

    let mut pair: BTreeMap<(usize, usize), (f64, f64)> = BTreeMap::new();
    let mut a_x = vec![0.0; h.n_qubits];
    let mut partners = vec![0.0; h.n_qubits];

    for t in h.terms() {
        if t.string.y_count() % 2 == 1 {
            let slack = eps - t.coefficient.abs();
            record(slack, true);
            if slack < 0.0 {
                violations.push(Violation::NonReal {
                    string: t.string,
                    coefficient: t.coefficient,
                });
            }
            continue;
        }
        match t.string {
            PauliString::One(q, PauliAxis::X) => a_x[q] += t.coefficient,
            PauliString::Two((u, a), (v, b)) => match (a, b) {
                (PauliAxis::X, PauliAxis::X) => pair.entry((u, v)).or_default().0 += t.coefficient,
                (PauliAxis::Y, PauliAxis::Y) => pair.entry((u, v)).or_default().1 += t.coefficient,
                (PauliAxis::X, PauliAxis::Z) => partners[u] += t.coefficient.abs(),
                (PauliAxis::Z, PauliAxis::X) => partners[v] += t.coefficient.abs(),
                _ => {}
            },
            _ => {}
        }
    }

    for (&(u, v), &(a_xx, a_yy)) in &pair {
        let slack = -a_yy.abs() - a_xx + eps;
        record(slack - eps, true);
        if slack < 0.0 {
            violations.push(Violation::PairFlip { u, v, a_xx, a_yy });
        }
    }
    for q in 0..h.n_qubits {
        let active = a_x[q] != 0.0 || partners[q] != 0.0;
        let slack = -partners[q] - a_x[q] + eps;
        record(slack - eps, active);
        if slack < 0.0 {
            violations.push(Violation::SingleFlip {
                qubit: q,
                a_x: a_x[q],
                partner_sum: partners[q],
            });
        }
    }

    SymZReport {
        violations,
        min_slack,
        borderline,
    }
}
