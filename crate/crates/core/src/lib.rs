//! Deciding whether single-qubit unitaries can make a two-local qubit
//! Hamiltonian stoquastic, with certificates, brute-force oracles and the
//! 3-SAT constructions that make the problem hard once fields are allowed.

pub mod beta_graph;
pub mod hardness;
pub mod mat3;
pub mod nly;
pub mod oracle;
pub mod pauli;
pub mod pipeline;
pub mod xorsat;
pub mod xyz;

pub use mat3::{Mat3, Tolerances, Vec3};
pub use pauli::{parse_hamiltonian, Hamiltonian};
pub use pipeline::{decide, decide_clifford, verify_certificate, Certificate, Decision, Verdict};
