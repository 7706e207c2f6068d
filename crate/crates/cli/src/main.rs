use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand};
use sha2::{Digest, Sha256};
use stoqcure::hardness::{
    check_hadamard_equivalence, decide_hadamard_cure, encode_formula, encode_formula_with_gadgets, parse_dimacs,
    HardnessError, DEFAULT_HADAMARD_CAP,
};
use stoqcure::oracle::{clifford_cure_search, clifford_rotations, random_rotation_refute, OracleError};
use stoqcure::pauli::is_symmetric_z;
use stoqcure::pipeline::{CertificateError, PipelineError, DENSE_VERIFY_CAP};
use stoqcure::{
    decide, decide_clifford, parse_hamiltonian, verify_certificate, Certificate, Hamiltonian, Tolerances, Verdict,
};

/// Decide and certify whether single-qubit rotations make a two-local
/// Hamiltonian stoquastic.
///
/// Exit codes: 0 yes, 1 no, 2 I/O or parse error, 3 precondition violated.
#[derive(Parser)]
#[command(name = "stoqcure", version)]
struct Cli {
    /// Absolute slack on coefficient comparisons.
    #[arg(long, global = true, env = "STOQCURE_EPS", default_value_t = Tolerances::default().eps)]
    eps: f64,
    /// Seed for every randomized step, echoed in the report.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test whether a Hamiltonian is already a symmetric Z-matrix.
    Check { path: PathBuf },
    /// Search for per-qubit rotations that make the Hamiltonian stoquastic.
    Cure {
        path: PathBuf,
        /// Write the certificate here when one is found.
        #[arg(long)]
        emit: Option<PathBuf>,
        /// Only consider single-qubit Clifford frames.
        #[arg(long)]
        clifford_only: bool,
    },
    /// Check a certificate against a Hamiltonian.
    Verify {
        hamiltonian: PathBuf,
        certificate: PathBuf,
        /// Largest qubit count for the dense-matrix cross-check.
        #[arg(long, default_value_t = DENSE_VERIFY_CAP)]
        dense_cap: usize,
    },
    /// Encode a 3-CNF formula as a Hamiltonian.
    Gen3sat {
        cnf: PathBuf,
        /// Attach the Hadamard gadgets to every qubit.
        #[arg(long)]
        gadgets: bool,
        /// Output file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Brute-force search for a Hadamard pattern that makes the input stoquastic.
    HadamardDecide {
        /// Hamiltonian to search; optional when only checking the lemma.
        path: Option<PathBuf>,
        /// Largest number of qubits to enumerate.
        #[arg(long, default_value_t = DEFAULT_HADAMARD_CAP)]
        cap: usize,
        /// Restrict the search to these qubits (comma separated).
        #[arg(long, value_delimiter = ',')]
        qubits: Option<Vec<usize>>,
        /// Also check the formula/stoquasticity correspondence on this CNF.
        #[arg(long)]
        check_lemma: Option<PathBuf>,
    },
    /// Brute-force ground truth.
    #[command(subcommand)]
    Oracle(OracleCommand),
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Exhaustive search over single-qubit Clifford frames.
    Clifford { path: PathBuf },
    /// Smallest violation score over random per-qubit rotations.
    Refute {
        path: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Outcome {
    Yes = 0,
    No = 1,
    Error = 2,
    Precondition = 3,
}

/// Failure that maps onto a specific exit code.
#[derive(Debug)]
struct Failure {
    outcome: Outcome,
    error: anyhow::Error,
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure {
            outcome: Outcome::Error,
            error: e.into(),
        }
    }
}

fn precondition(error: impl Display) -> Failure {
    Failure {
        outcome: Outcome::Precondition,
        error: anyhow!("{error}"),
    }
}

/// Line-oriented `key=value` report. Everything except the trailing timing
/// line is a function of the inputs, flags and seed.
struct Report {
    lines: Vec<(String, String)>,
    started: Instant,
}

impl Report {
    fn new(command: &str, cli: &Cli, tol: &Tolerances) -> Report {
        let mut r = Report {
            lines: Vec::new(),
            started: Instant::now(),
        };
        r.put("command", command);
        r.put("seed", cli.seed);
        for (key, value) in [
            ("tol.eps", tol.eps),
            ("tol.eps_rank", tol.eps_rank),
            ("tol.eps_cluster", tol.eps_cluster),
            ("tol.eps_orth", tol.eps_orth),
            ("tol.eps_imag", tol.eps_imag),
            ("tol.eps_residual", tol.eps_residual),
        ] {
            r.put(key, format!("{value:e}"));
        }
        r
    }

    fn put(&mut self, key: &str, value: impl Display) {
        self.lines.push((key.to_string(), value.to_string()));
    }

    fn print(&self) {
        for (k, v) in &self.lines {
            println!("{k}={v}");
        }
        println!("elapsed_ms={:.3}", self.started.elapsed().as_secs_f64() * 1e3);
    }
}

fn read(path: &Path) -> Result<(String, String)> {
    let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    let digest = hex::encode(Sha256::digest(&bytes));
    let text = String::from_utf8(bytes).with_context(|| format!("{} is not UTF-8", path.display()))?;
    Ok((text, digest))
}

fn load_hamiltonian(path: &Path, report: &mut Report, key: &str) -> Result<Hamiltonian> {
    let (text, digest) = read(path)?;
    report.put(&format!("{key}_sha256"), digest);
    let h = parse_hamiltonian(&text).with_context(|| format!("parsing {}", path.display()))?;
    report.put("qubits", h.n_qubits());
    report.put("terms", h.len());
    Ok(h)
}

fn bits(x: &[bool]) -> String {
    x.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

fn check(cli: &Cli, tol: &Tolerances, path: &Path) -> Result<Outcome, Failure> {
    let mut report = Report::new("check", cli, tol);
    let h = load_hamiltonian(path, &mut report, "input")?;
    let r = is_symmetric_z(&h, tol.eps);
    report.put("symmetric_z", r.holds());
    report.put("borderline", r.borderline);
    report.put("min_slack", format!("{:e}", r.min_slack));
    report.put("violations", r.violations.len());
    for v in &r.violations {
        report.put("violation", v);
    }
    report.print();
    Ok(if r.holds() { Outcome::Yes } else { Outcome::No })
}

fn cure(
    cli: &Cli,
    tol: &Tolerances,
    path: &Path,
    emit: Option<&Path>,
    clifford_only: bool,
) -> Result<Outcome, Failure> {
    let mut report = Report::new("cure", cli, tol);
    let h = load_hamiltonian(path, &mut report, "input")?;
    report.put("mode", if clifford_only { "clifford" } else { "general" });
    let decided = if clifford_only {
        decide_clifford(&h, tol)
    } else {
        decide(&h, tol)
    };
    let d = decided.map_err(|e| match e {
        PipelineError::NotExactlyTwoLocal { .. } => precondition(format!(
            "{e}; terms acting on a single qubit make the problem hard in general, \
             use `stoqcure hadamard-decide` for brute-force searches on such inputs"
        )),
    })?;
    report.put("verdict", d.verdict.name());
    report.put("borderline", d.borderline);
    let cert = match &d.verdict {
        Verdict::AlreadyStoquastic => Some(Certificate::identity(h.n_qubits())),
        Verdict::Curable(c) => Some(c.clone()),
        Verdict::NotCurable { stage, detail } => {
            report.put("stage", stage);
            report.put("detail", detail);
            None
        }
    };
    if let (Some(cert), Some(out)) = (&cert, emit) {
        fs::write(out, cert.to_text()).with_context(|| format!("cannot write {}", out.display()))?;
        report.put("certificate", out.display());
    }
    report.print();
    Ok(if cert.is_some() { Outcome::Yes } else { Outcome::No })
}

fn verify(
    cli: &Cli,
    tol: &Tolerances,
    hamiltonian: &Path,
    certificate: &Path,
    dense_cap: usize,
) -> Result<Outcome, Failure> {
    let mut report = Report::new("verify", cli, tol);
    let h = load_hamiltonian(hamiltonian, &mut report, "input")?;
    let (text, digest) = read(certificate)?;
    report.put("certificate_sha256", digest);
    let cert = Certificate::parse(&text).with_context(|| format!("parsing {}", certificate.display()))?;
    let v = verify_certificate(&h, &cert, tol.eps, dense_cap).map_err(|e: CertificateError| anyhow!(e))?;
    report.put("coefficient_level", v.coefficient_level);
    report.put("dense", v.dense.map_or("skipped".to_string(), |d| d.to_string()));
    report.put("verified", v.passed());
    report.print();
    Ok(if v.passed() { Outcome::Yes } else { Outcome::No })
}

fn gen3sat(cli: &Cli, tol: &Tolerances, cnf: &Path, gadgets: bool, out: Option<&Path>) -> Result<Outcome, Failure> {
    let (text, digest) = read(cnf)?;
    let formula = parse_dimacs(&text).with_context(|| format!("parsing {}", cnf.display()))?;
    let h = if gadgets {
        encode_formula_with_gadgets(&formula)
    } else {
        encode_formula(&formula)
    };
    match out {
        Some(path) => {
            fs::write(path, h.to_text()).with_context(|| format!("cannot write {}", path.display()))?;
            let mut report = Report::new("gen3sat", cli, tol);
            report.put("input_sha256", digest);
            report.put("variables", formula.n_vars);
            report.put("clauses", formula.clauses.len());
            report.put("gadgets", gadgets);
            report.put("qubits", h.n_qubits());
            report.put("terms", h.len());
            report.put("output", path.display());
            report.print();
        }
        None => print!("{}", h.to_text()),
    }
    Ok(Outcome::Yes)
}

fn hardness_failure(e: HardnessError) -> Failure {
    match e {
        HardnessError::CapExceeded { .. } => precondition(e),
        other => other.into(),
    }
}

fn hadamard_decide(
    cli: &Cli,
    tol: &Tolerances,
    path: Option<&Path>,
    cap: usize,
    qubits: Option<&[usize]>,
    check_lemma: Option<&Path>,
) -> Result<Outcome, Failure> {
    if path.is_none() && check_lemma.is_none() {
        return Err(anyhow!("give a Hamiltonian, --check-lemma, or both").into());
    }
    let mut report = Report::new("hadamard-decide", cli, tol);
    report.put("cap", cap);
    let mut outcome = Outcome::Yes;
    if let Some(path) = path {
        let h = load_hamiltonian(path, &mut report, "input")?;
        let qubits: Vec<usize> = qubits.map_or_else(|| (0..h.n_qubits()).collect(), <[usize]>::to_vec);
        if let Some(&q) = qubits.iter().find(|&&q| q >= h.n_qubits()) {
            return Err(anyhow!("qubit {q} is outside the {}-qubit Hamiltonian", h.n_qubits()).into());
        }
        let found = decide_hadamard_cure(&h, &qubits, cap).map_err(hardness_failure)?;
        report.put(
            "searched",
            qubits.iter().map(|q| q.to_string()).collect::<Vec<_>>().join(","),
        );
        report.put("witness", found.as_deref().map_or("none".to_string(), bits));
        if found.is_none() {
            outcome = Outcome::No;
        }
    }
    if let Some(cnf) = check_lemma {
        let (text, digest) = read(cnf)?;
        report.put("cnf_sha256", digest);
        let formula = parse_dimacs(&text).with_context(|| format!("parsing {}", cnf.display()))?;
        let ok = check_hadamard_equivalence(&formula, cap).map_err(hardness_failure)?;
        report.put("satisfiable", formula.brute_force_solve().is_some());
        report.put("lemma", if ok { "pass" } else { "fail" });
        if !ok {
            outcome = Outcome::No;
        }
    }
    report.print();
    Ok(outcome)
}

fn oracle_failure(e: OracleError) -> Failure {
    precondition(e)
}

fn oracle(cli: &Cli, tol: &Tolerances, cmd: &OracleCommand) -> Result<Outcome, Failure> {
    match cmd {
        OracleCommand::Clifford { path } => {
            let mut report = Report::new("oracle-clifford", cli, tol);
            let h = load_hamiltonian(path, &mut report, "input")?;
            let found = clifford_cure_search(&h, tol.eps).map_err(oracle_failure)?;
            match &found {
                Some(labels) => {
                    let table = clifford_rotations();
                    report.put(
                        "labels",
                        labels.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(","),
                    );
                    let cert = Certificate {
                        rotations: labels.iter().map(|&l| table[l]).collect(),
                    };
                    let v = verify_certificate(&h, &cert, tol.eps, DENSE_VERIFY_CAP)?;
                    report.put("verified", v.passed());
                }
                None => report.put("labels", "none"),
            }
            report.print();
            Ok(if found.is_some() { Outcome::Yes } else { Outcome::No })
        }
        OracleCommand::Refute { path, samples } => {
            let mut report = Report::new("oracle-refute", cli, tol);
            let h = load_hamiltonian(path, &mut report, "input")?;
            let min = random_rotation_refute(&h, *samples, cli.seed).map_err(oracle_failure)?;
            report.put("samples", samples);
            report.put("min_violation", format!("{min:e}"));
            // Refuted means no sampled frame came within tolerance.
            let refuted = min > tol.eps;
            report.put("refuted", refuted);
            report.print();
            Ok(if refuted { Outcome::Yes } else { Outcome::No })
        }
    }
}

fn run(cli: &Cli) -> Result<Outcome, Failure> {
    let tol = Tolerances::with_eps(cli.eps);
    tol.validate()?;
    match &cli.command {
        Command::Check { path } => check(cli, &tol, path),
        Command::Cure {
            path,
            emit,
            clifford_only,
        } => cure(cli, &tol, path, emit.as_deref(), *clifford_only),
        Command::Verify {
            hamiltonian,
            certificate,
            dense_cap,
        } => verify(cli, &tol, hamiltonian, certificate, *dense_cap),
        Command::Gen3sat { cnf, gadgets, out } => gen3sat(cli, &tol, cnf, *gadgets, out.as_deref()),
        Command::HadamardDecide {
            path,
            cap,
            qubits,
            check_lemma,
        } => hadamard_decide(
            cli,
            &tol,
            path.as_deref(),
            *cap,
            qubits.as_deref(),
            check_lemma.as_deref(),
        ),
        Command::Oracle(cmd) => oracle(cli, &tol, cmd),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => ExitCode::from(outcome as u8),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.outcome as u8)
        }
    }
}
