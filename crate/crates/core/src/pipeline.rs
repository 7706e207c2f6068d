//! End-to-end decision for exactly two-local Hamiltonians, curing
//! certificates and their verification.

use std::fmt;

use nalgebra::Matrix2;
use num_complex::Complex64;
use thiserror::Error;

use crate::mat3::{is_orthogonal, orthogonality_defect, Mat3, Mat3Error, Tolerances, Vec3};
use crate::nly::{solve_nly, NlyStage};
use crate::oracle::{conjugate_single_qubit, dense_matrix, is_symmetric_z_dense};
use crate::pauli::{extract_graph, is_symmetric_z, Hamiltonian};
use crate::xyz::{decide_clifford_cure, solve_xyz, DiagonalGraph};

/// Dense verification is skipped above this many qubits.
pub const DENSE_VERIFY_CAP: usize = 10;

/// Per-qubit orthogonal frames. Applying the certificate means rewriting
/// every interaction matrix as `O_u^T beta_uv O_v` (see [`Hamiltonian::rotated`]).
#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    pub rotations: Vec<Mat3>,
}

/// Rotation by `angle` in `[0, pi]` about the unit vector `axis`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AxisAngle {
    pub axis: Vec3,
    pub angle: f64,
}

impl AxisAngle {
    /// `exp(-i angle/2 axis.sigma)`, the SU(2) element whose adjoint action
    /// `U sigma_k U^dagger = sum_j O_jk sigma_j` is this rotation.
    pub fn su2(&self) -> Matrix2<Complex64> {
        let (c, s) = ((self.angle / 2.0).cos(), (self.angle / 2.0).sin());
        let n = self.axis;
        Matrix2::new(
            Complex64::new(c, -s * n.z),
            Complex64::new(-s * n.y, -s * n.x),
            Complex64::new(s * n.y, -s * n.x),
            Complex64::new(c, s * n.z),
        )
    }
}

/// Axis-angle form of a rotation. Improper inputs are first made proper by
/// negating their last column.
pub fn rotation_to_unitary(o: &Mat3, tol: &Tolerances) -> Result<AxisAngle, Mat3Error> {
    if !is_orthogonal(o, tol.eps_orth.max(1e-9)) {
        return Err(Mat3Error::NotOrthogonal {
            defect: orthogonality_defect(o),
        });
    }
    let o = proper(o);
    let w = Vec3::new(o[(2, 1)] - o[(1, 2)], o[(0, 2)] - o[(2, 0)], o[(1, 0)] - o[(0, 1)]);
    // atan2 keeps full precision near 0 and pi, where acos of the trace does not.
    let angle = (w.norm() / 2.0).atan2((o.trace() - 1.0) / 2.0);
    if angle < 1e-12 {
        return Ok(AxisAngle {
            axis: Vec3::z(),
            angle: 0.0,
        });
    }
    if angle.sin() > 1e-6 {
        return Ok(AxisAngle {
            axis: w / (2.0 * angle.sin()),
            angle,
        });
    }
    // Near a half turn the antisymmetric part vanishes; read the axis off
    // (O + I) / 2 = n n^T instead.
    let b = (o + Mat3::identity()) / 2.0;
    let j = (0..3)
        .max_by(|&a, &c| b[(a, a)].total_cmp(&b[(c, c)]))
        .expect("three entries");
    let mut axis: Vec3 = b.column(j).into_owned() / b[(j, j)].sqrt();
    if axis.dot(&w) < 0.0 || (w.norm() < 1e-15 && axis[axis.iamax()] < 0.0) {
        axis = -axis;
    }
    Ok(AxisAngle {
        axis: axis.normalize(),
        angle,
    })
}

/// Negates the last column of an improper orthogonal matrix.
fn proper(o: &Mat3) -> Mat3 {
    let mut o = *o;
    if o.determinant() < 0.0 {
        let c = -o.column(2);
        o.set_column(2, &c);
    }
    o
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CertificateError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("certificate covers {got} qubits, Hamiltonian has {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("rotation of qubit {qubit} is not orthogonal (defect {defect:.3e})")]
    NotOrthogonal { qubit: usize, defect: f64 },
    #[error("rotation of qubit {qubit} has determinant -1")]
    Improper { qubit: usize },
}

impl Certificate {
    pub fn identity(n: usize) -> Certificate {
        Certificate {
            rotations: vec![Mat3::identity(); n],
        }
    }

    /// One line `u r11 r12 r13 r21 ... r33` per qubit, followed by
    /// `axis ax ay az angle t` for the equivalent single-qubit rotation.
    pub fn to_text(&self) -> String {
        let tol = Tolerances::default();
        let mut out = String::new();
        for (u, o) in self.rotations.iter().enumerate() {
            out.push_str(&u.to_string());
            for r in 0..3 {
                for c in 0..3 {
                    out.push_str(&format!(" {:.16e}", o[(r, c)]));
                }
            }
            out.push('\n');
            if o.determinant() > 0.0 {
                if let Ok(aa) = rotation_to_unitary(o, &tol) {
                    out.push_str(&format!(
                        "axis {:.16e} {:.16e} {:.16e} angle {:.16e}\n",
                        aa.axis.x, aa.axis.y, aa.axis.z, aa.angle
                    ));
                }
            }
        }
        out
    }

    /// Parses [`Certificate::to_text`] output. Axis lines are checked for
    /// shape only; the matrices are authoritative.
    pub fn parse(text: &str) -> Result<Certificate, CertificateError> {
        let mut rotations: Vec<Mat3> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let malformed = |message: String| CertificateError::Malformed { line, message };
            let tokens: Vec<&str> = content.split_whitespace().collect();
            if tokens[0] == "axis" {
                if rotations.is_empty() {
                    return Err(malformed("axis line before any rotation".into()));
                }
                let ok = tokens.len() == 6
                    && tokens[4] == "angle"
                    && [1, 2, 3, 5].iter().all(|&k| tokens[k].parse::<f64>().is_ok());
                if !ok {
                    return Err(malformed("expected 'axis ax ay az angle t'".into()));
                }
                continue;
            }
            let u: usize = tokens[0]
                .parse()
                .map_err(|_| malformed(format!("'{}' is not a qubit index", tokens[0])))?;
            if u != rotations.len() {
                return Err(malformed(format!("expected qubit {}, found {u}", rotations.len())));
            }
            if tokens.len() != 10 {
                return Err(malformed(format!(
                    "expected 9 matrix entries, found {}",
                    tokens.len() - 1
                )));
            }
            let mut entries = [0.0; 9];
            for (k, t) in tokens[1..].iter().enumerate() {
                entries[k] = t
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| malformed(format!("'{t}' is not a finite number")))?;
            }
            rotations.push(Mat3::from_row_slice(&entries));
        }
        Ok(Certificate { rotations })
    }

    /// Structural checks: one proper orthogonal matrix per qubit.
    pub fn validate(&self, n_qubits: usize, eps_orth: f64) -> Result<(), CertificateError> {
        if self.rotations.len() != n_qubits {
            return Err(CertificateError::LengthMismatch {
                expected: n_qubits,
                got: self.rotations.len(),
            });
        }
        for (qubit, o) in self.rotations.iter().enumerate() {
            if !is_orthogonal(o, eps_orth) {
                return Err(CertificateError::NotOrthogonal {
                    qubit,
                    defect: orthogonality_defect(o),
                });
            }
            if o.determinant() < 0.0 {
                return Err(CertificateError::Improper { qubit });
            }
        }
        Ok(())
    }
}

/// Outcome of checking a certificate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Verification {
    pub coefficient_level: bool,
    /// `None` when the qubit count exceeds the dense cap.
    pub dense: Option<bool>,
}

impl Verification {
    pub fn passed(&self) -> bool {
        self.coefficient_level && self.dense != Some(false)
    }
}

/// Applies the certificate and tests the result. The coefficient-level test
/// always runs; up to `dense_cap` qubits the dense matrix is also conjugated
/// by the corresponding single-qubit unitaries and tested entry by entry.
pub fn verify_certificate(
    h: &Hamiltonian,
    cert: &Certificate,
    eps: f64,
    dense_cap: usize,
) -> Result<Verification, CertificateError> {
    let tol = Tolerances::default();
    cert.validate(h.n_qubits(), tol.eps_orth.max(1e-9))?;
    let rotated = h.rotated(&cert.rotations).expect("lengths validated");
    let coefficient_level = is_symmetric_z(&rotated, eps).holds();
    let n = h.n_qubits();
    let dense = (n <= dense_cap.min(crate::oracle::DENSE_CAP)).then(|| {
        let mut m = dense_matrix(h).expect("within cap");
        for (q, o) in cert.rotations.iter().enumerate() {
            let u = rotation_to_unitary(o, &tol).expect("validated orthogonal").su2();
            conjugate_single_qubit(&mut m, n, q, &u.adjoint());
        }
        is_symmetric_z_dense(&m, eps)
    });
    Ok(Verification {
        coefficient_level,
        dense,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CureStage {
    Nly(NlyStage),
    /// No signed permutations cure the diagonalized graph.
    Xyz,
    /// Clifford-only mode: no signed permutation frame diagonalizes every edge.
    Clifford,
    /// The assembled certificate failed its own check (numerical breakdown).
    Verification,
}

impl fmt::Display for CureStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CureStage::Nly(s) => write!(f, "nly/{}", s.name()),
            CureStage::Xyz => f.write_str("xyz"),
            CureStage::Clifford => f.write_str("clifford"),
            CureStage::Verification => f.write_str("verification"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Verdict {
    AlreadyStoquastic,
    Curable(Certificate),
    NotCurable { stage: CureStage, detail: String },
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::AlreadyStoquastic => "already-stoquastic",
            Verdict::Curable(_) => "curable",
            Verdict::NotCurable { .. } => "not-curable",
        }
    }

    pub fn is_curable(&self) -> bool {
        !matches!(self, Verdict::NotCurable { .. })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Decision {
    pub verdict: Verdict,
    /// Some binding inequality of the final check held by less than `10 * eps`.
    pub borderline: bool,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PipelineError {
    #[error("Hamiltonian has {count} term(s) that are not two-local, e.g. {example}")]
    NotExactlyTwoLocal { count: usize, example: String },
}

fn require_two_local(h: &Hamiltonian) -> Result<(), PipelineError> {
    let bad: Vec<_> = h.terms().filter(|t| t.string.weight() != 2).collect();
    match bad.first() {
        None => Ok(()),
        Some(t) => Err(PipelineError::NotExactlyTwoLocal {
            count: bad.len(),
            example: t.string.to_string(),
        }),
    }
}

/// Makes every rotation proper and checks the result; the last column only
/// touches Z-slot couplings, which carry no sign constraint once the
/// interaction matrices are diagonal.
fn finish(h: &Hamiltonian, rotations: Vec<Mat3>, tol: &Tolerances) -> Decision {
    let cert = Certificate {
        rotations: rotations.iter().map(proper).collect(),
    };
    let report = h.rotated(&cert.rotations).map(|r| is_symmetric_z(&r, tol.eps));
    match report {
        Ok(r) if r.holds() => Decision {
            borderline: r.borderline,
            verdict: Verdict::Curable(cert),
        },
        Ok(r) => Decision {
            borderline: true,
            verdict: Verdict::NotCurable {
                stage: CureStage::Verification,
                detail: r.violations.first().map(|v| v.to_string()).unwrap_or_default(),
            },
        },
        Err(e) => Decision {
            borderline: true,
            verdict: Verdict::NotCurable {
                stage: CureStage::Verification,
                detail: e.to_string(),
            },
        },
    }
}

/// Whether single-qubit unitaries can make `h` stoquastic, with a certificate
/// when they can.
pub fn decide(h: &Hamiltonian, tol: &Tolerances) -> Result<Decision, PipelineError> {
    require_two_local(h)?;
    let report = is_symmetric_z(h, tol.eps);
    if report.holds() {
        return Ok(Decision {
            verdict: Verdict::AlreadyStoquastic,
            borderline: report.borderline,
        });
    }
    let (g, _) = extract_graph(h);
    let nly = match solve_nly(&g, tol) {
        Ok(s) => s,
        Err(e) => {
            return Ok(Decision {
                verdict: Verdict::NotCurable {
                    stage: CureStage::Nly(e.stage),
                    detail: e.to_string(),
                },
                borderline: false,
            })
        }
    };
    let diagonal = DiagonalGraph::from_beta_graph(&nly.classified.graph, &nly.sigma);
    let Some(perms) = solve_xyz(&diagonal, tol.eps) else {
        return Ok(Decision {
            verdict: Verdict::NotCurable {
                stage: CureStage::Xyz,
                detail: "no signed permutations cure the diagonalized couplings".into(),
            },
            borderline: false,
        });
    };
    let rotations = nly.rotations.iter().zip(&perms).map(|(o, p)| o * p.matrix()).collect();
    Ok(finish(h, rotations, tol))
}

/// Like [`decide`], restricted to single-qubit Clifford transformations.
pub fn decide_clifford(h: &Hamiltonian, tol: &Tolerances) -> Result<Decision, PipelineError> {
    require_two_local(h)?;
    let report = is_symmetric_z(h, tol.eps);
    if report.holds() {
        return Ok(Decision {
            verdict: Verdict::AlreadyStoquastic,
            borderline: report.borderline,
        });
    }
    let (g, _) = extract_graph(h);
    match decide_clifford_cure(&g, tol) {
        Some(perms) => Ok(finish(h, perms.iter().map(|p| p.matrix()).collect(), tol)),
        None => Ok(Decision {
            verdict: Verdict::NotCurable {
                stage: CureStage::Clifford,
                detail: "no single-qubit Clifford frame cures the couplings".into(),
            },
            borderline: false,
        }),
    }
}
