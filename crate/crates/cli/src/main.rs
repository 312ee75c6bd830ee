//! `qcorr`: correlation coefficients, separability verdicts, positive maps
//! and GNS intertwiners from JSON inputs.
//!
//! Exit codes: 0 success, 2 unreadable or malformed input, 3 domain or range
//! error, 4 construction failure.

mod render;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qcorr::bipartite::{make_random_state, validate_density, BipartiteSpace, BipartiteState};
use qcorr::correlation::{
    minimize_d0, minimize_d_simple, separability_verdict, werner_sweep, Execution, OptimizerConfig, DEFAULT_PROBES,
};
use qcorr::gns::{build_self_adjoint, build_direct_sum, LocalDecomposition};
use qcorr::io::{ensemble_to_json, matrix_to_json, parse_ensemble, parse_map, parse_matrix, parse_state};
use qcorr::measures::{boxtimes, evaluate_boxtimes, Ensemble};
use qcorr::posmaps::{kadison_scan, map_by_name, ppt_min_eigenvalue, PositiveMapSpec};
use qcorr::{ComplexMatrix, Error};
use render::{record, rows, Cell, Format};

const EXIT_PARSE: u8 = 2;
const EXIT_DOMAIN: u8 = 3;
const EXIT_CONSTRUCTION: u8 = 4;

/// Kadison defects above this count as satisfied.
const KADISON_TOL: f64 = 1e-10;

#[derive(Parser)]
#[command(name = "qcorr", version, about = "Quantum correlation coefficients and positive-map diagnostics")]
struct Cli {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Table, global = true)]
    format: Format,

    /// Base seed for every randomised step.
    #[arg(long, env = "QCORR_SEED", default_value_t = 0, global = true)]
    seed: u64,

    #[command(flatten)]
    optimizer: OptimizerArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct OptimizerArgs {
    /// Independent optimizer starts.
    #[arg(long, global = true)]
    starts: Option<usize>,

    /// Ensemble cardinality (default: (d1·d2)²).
    #[arg(long, global = true)]
    m: Option<usize>,

    /// Iteration cap per start.
    #[arg(long, global = true)]
    max_iters: Option<usize>,

    /// Objective tolerance, relative to the observable's Frobenius norm.
    #[arg(long, global = true)]
    tol: Option<f64>,

    /// Values of d₀ above ten times this certify entanglement.
    #[arg(long, global = true)]
    threshold: Option<f64>,

    /// Search only the singleton partition.
    #[arg(long, global = true)]
    no_partitions: bool,

    /// Run starts on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Minimise d₀(ρ, A) over decompositions of ρ.
    D0 {
        state: PathBuf,
        observable: PathBuf,
        /// Write the best decomposition as ensemble JSON.
        #[arg(long)]
        dump_ensemble: Option<PathBuf>,
    },
    /// Minimise d(ρ, A ⊗ B) over decompositions of ρ.
    D { state: PathBuf, a: PathBuf, b: PathBuf },
    /// Separable / Entangled / Inconclusive from PPT and d₀ probes.
    Verdict {
        state: PathBuf,
        /// Number of d₀ probe observables.
        #[arg(long, default_value_t = DEFAULT_PROBES)]
        observables: usize,
    },
    /// Smallest eigenvalue of the partial transpose.
    Ppt { state: PathBuf },
    /// Barycenter and ⊠ terms of an ensemble against an observable.
    Boxtimes { ensemble: PathBuf, observable: PathBuf },
    /// Build and check the local decomposition intertwiner of a unital positive map.
    GnsVerify {
        /// Builtin map name or map JSON path.
        map: String,
        /// Density matrix JSON path or `random:<d>:<seed>`.
        state: String,
        #[arg(long, value_enum, default_value_t = ConstructionArg::DirectSum)]
        construction: ConstructionArg,
    },
    /// Minimum of α(a†a + aa†) - α(a)†α(a) - α(a)α(a)† over random a.
    Kadison {
        /// Builtin map name or map JSON path.
        map: String,
        /// Matrix size for builtin maps.
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 200)]
        samples: usize,
    },
    /// Werner states on a grid of p with d₀, PPT and verdict per point.
    WernerSweep {
        #[arg(long, default_value_t = 0.0)]
        p_min: f64,
        #[arg(long, default_value_t = 1.0)]
        p_max: f64,
        #[arg(long, default_value_t = 11)]
        steps: usize,
        #[arg(long, default_value_t = DEFAULT_PROBES)]
        observables: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ConstructionArg {
    DirectSum,
    SelfAdjoint,
}

/// An error with its exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn parse(message: String) -> Self {
        Failure { code: EXIT_PARSE, message }
    }

    fn from_core(context: Option<&Path>, e: Error) -> Self {
        let code = match &e {
            Error::Parse { .. } => EXIT_PARSE,
            Error::MapNotUnital { .. } | Error::WellDefinednessFailure { .. } | Error::ConvergenceFailure(_) => {
                EXIT_CONSTRUCTION
            }
            _ => EXIT_DOMAIN,
        };
        let mut message = match context {
            Some(p) => format!("{}: {e}", p.display()),
            None => e.to_string(),
        };
        if let Error::WellDefinednessFailure { element, .. } = &e {
            message.push_str(&format!("\noffending element: {}", matrix_to_json(element)));
        }
        Failure { code, message }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::from_core(None, e)
    }
}

type Outcome = Result<(String, u8), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok((out, code)) => {
            print!("{out}");
            ExitCode::from(code)
        }
        Err(f) => {
            eprintln!("error: {}", f.message.trim_end());
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: &Cli) -> Outcome {
    let fmt = cli.format;
    match &cli.command {
        Command::D0 { state, observable, dump_ensemble } => {
            let rho = load(state, parse_state)?;
            let a = load(observable, parse_matrix)?;
            let r = minimize_d0(&rho, &a, &optimizer(cli)?)?;
            if let Some(path) = dump_ensemble {
                write(path, &render::pretty(&ensemble_to_json(&r.ensemble)))?;
            }
            let fields = [("value", Cell::Num(r.value)), ("converged", Cell::Bool(r.converged)), ("starts_used", Cell::Int(r.starts_used))];
            ok(record(fmt, &fields, None))
        }
        Command::D { state, a, b } => {
            let rho = load(state, parse_state)?;
            let a = load(a, parse_matrix)?;
            let b = load(b, parse_matrix)?;
            let r = minimize_d_simple(&rho, &a, &b, &optimizer(cli)?)?;
            let fields = [
                ("value", Cell::Num(r.result.value)),
                ("converged", Cell::Bool(r.result.converged)),
                ("starts_used", Cell::Int(r.result.starts_used)),
                ("boxtimes_value", Cell::Complex(r.boxtimes_value)),
                ("factored_boxtimes", Cell::Complex(r.factored_boxtimes)),
            ];
            ok(record(fmt, &fields, None))
        }
        Command::Verdict { state, observables } => {
            let rho = load(state, parse_state)?;
            let r = separability_verdict(&rho, &optimizer(cli)?, *observables)?;
            let mut fields = vec![
                ("verdict".to_string(), Cell::text(r.verdict.as_str())),
                ("max_d0".to_string(), Cell::Num(r.max_d0)),
                ("ppt_min_eig".to_string(), Cell::Num(r.ppt_min_eigenvalue)),
                ("ppt_exact".to_string(), Cell::Bool(r.ppt_exact)),
            ];
            if fmt == Format::Table {
                for p in &r.probes {
                    fields.push((format!("d0[{}]", p.label), Cell::Num(p.value)));
                }
            }
            let fields: Vec<(&str, Cell)> = fields.iter().map(|(k, v)| (k.as_str(), v.clone())).collect();
            let probes: Vec<serde_json::Value> = r
                .probes
                .iter()
                .map(|p| serde_json::json!({ "label": p.label, "value": p.value, "converged": p.converged, "starts_used": p.starts_used }))
                .collect();
            ok(record(fmt, &fields, Some(("probes", probes.into()))))
        }
        Command::Ppt { state } => {
            let rho = load(state, parse_state)?;
            let min = ppt_min_eigenvalue(&rho);
            let psd = if min >= -qcorr::linalg::PSD_TOL { "PSD" } else { "NOT PSD" };
            ok(record(fmt, &[("ppt_min_eig", Cell::Num(min)), ("partial_transpose", Cell::text(psd))], None))
        }
        Command::Boxtimes { ensemble, observable } => {
            let e: Ensemble = load(ensemble, parse_ensemble)?;
            let a = load(observable, parse_matrix)?;
            let bary = e.barycenter().expect(&a).map_err(|err| Failure::from_core(Some(observable), err))?;
            let boxed = evaluate_boxtimes(&boxtimes(&e), &a)?;
            let fields = [
                ("barycenter_term", Cell::Complex(bary)),
                ("boxtimes_term", Cell::Complex(boxed)),
                ("difference", Cell::Num((bary - boxed).norm())),
            ];
            ok(record(fmt, &fields, None))
        }
        Command::GnsVerify { map, state, construction } => gns_verify(fmt, map, state, *construction),
        Command::Kadison { map, dim, samples } => {
            let alpha = resolve_map(map, *dim)?;
            let r = kadison_scan(&alpha, *samples, cli.seed)?;
            let status = if r.min_defect >= -KADISON_TOL { "OK" } else { "VIOLATED" };
            let fields = [
                ("map", Cell::text(alpha.label())),
                ("samples", Cell::Int(r.samples)),
                ("min_defect", Cell::Num(r.min_defect)),
                ("worst_sample", Cell::Int(r.worst_sample)),
                ("status", Cell::text(status)),
            ];
            ok(record(fmt, &fields, None))
        }
        Command::WernerSweep { p_min, p_max, steps, observables } => {
            let table = werner_sweep(*p_min, *p_max, *steps, &optimizer(cli)?, *observables)?;
            let body: Vec<Vec<Cell>> = table
                .iter()
                .map(|r| vec![Cell::Num(r.p), Cell::Num(r.d0_witness), Cell::Num(r.ppt_min_eig), Cell::text(r.verdict.as_str())])
                .collect();
            ok(rows(fmt, &["p", "d0_witness", "ppt_min_eig", "verdict"], &body))
        }
    }
}

fn ok(out: String) -> Outcome {
    Ok((out, 0))
}

fn optimizer(cli: &Cli) -> Result<OptimizerConfig, Failure> {
    let o = &cli.optimizer;
    let mut cfg = OptimizerConfig::default().with_seed(cli.seed);
    cfg.m = o.m.or(cfg.m);
    cfg.starts = o.starts.unwrap_or(cfg.starts);
    cfg.max_iters = o.max_iters.unwrap_or(cfg.max_iters);
    cfg.tol = o.tol.unwrap_or(cfg.tol);
    cfg.decision_threshold = o.threshold.unwrap_or(cfg.decision_threshold);
    cfg.use_partitions = !o.no_partitions;
    if o.sequential {
        cfg.execution = Execution::Sequential;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::parse(format!("{}: cannot read: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure { code: EXIT_DOMAIN, message: format!("{}: cannot write: {e}", path.display()) })
}

fn load<T>(path: &Path, parse: fn(&str) -> qcorr::Result<T>) -> Result<T, Failure> {
    parse(&read(path)?).map_err(|e| Failure::from_core(Some(path), e))
}

/// A map JSON file if `spec` names an existing file, otherwise a builtin.
fn resolve_map(spec: &str, d: usize) -> Result<PositiveMapSpec, Failure> {
    let path = Path::new(spec);
    if path.is_file() || spec.ends_with(".json") {
        return load(path, parse_map);
    }
    Ok(map_by_name(spec, d)?)
}

/// Density matrix from a matrix JSON file or `random:<d>:<seed>`.
fn resolve_density(spec: &str) -> Result<ComplexMatrix, Failure> {
    if let Some(rest) = spec.strip_prefix("random:") {
        let bad = || Failure::parse(format!("{spec}: expected random:<d>:<seed>"));
        let (d, seed) = rest.split_once(':').ok_or_else(bad)?;
        let d: usize = d.parse().map_err(|_| bad())?;
        let seed: u64 = seed.parse().map_err(|_| bad())?;
        let state: BipartiteState = make_random_state(BipartiteSpace::new(d, 1)?, d, seed)?;
        return Ok(state.into_rho());
    }
    let path = Path::new(spec);
    let rho = load(path, parse_matrix)?;
    validate_density(&rho).map_err(|e| Failure::from_core(Some(path), e))?;
    Ok(rho)
}

fn gns_verify(fmt: Format, map: &str, state: &str, construction: ConstructionArg) -> Outcome {
    let rho = resolve_density(state)?;
    let alpha = resolve_map(map, rho.rows())?;
    if alpha.d != rho.rows() {
        return Err(Error::DimensionMismatch { expected: alpha.d, found: rho.rows() }.into());
    }
    let dec: LocalDecomposition = match construction {
        ConstructionArg::DirectSum => build_direct_sum(&alpha, &rho)?,
        ConstructionArg::SelfAdjoint => build_self_adjoint(&alpha, &rho)?,
    };
    let r = dec.verify()?;
    let fields = [
        ("map", Cell::text(alpha.label())),
        ("dim_gns", Cell::Int(r.dim_gns)),
        ("residual_max", Cell::Num(r.residual_max)),
        ("omega_residual", Cell::Num(r.omega_residual)),
        ("v_norm", Cell::Num(r.v_norm)),
        ("bound", Cell::Num(r.bound)),
        ("status", Cell::text(if r.passed { "PASS" } else { "FAIL" })),
    ];
    let code = if r.passed { 0 } else { EXIT_CONSTRUCTION };
    Ok((record(fmt, &fields, None), code))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn core_errors_map_to_exit_codes() {
        let code = |e| Failure::from(e).code;
        assert_eq!(code(Error::Parse { path: "re".into(), message: "x".into() }), EXIT_PARSE);
        assert_eq!(code(Error::DimensionMismatch { expected: 4, found: 2 }), EXIT_DOMAIN);
        assert_eq!(code(Error::OutOfRange("p".into())), EXIT_DOMAIN);
        assert_eq!(code(Error::MapNotUnital { deviation: 0.5 }), EXIT_CONSTRUCTION);
        let element = Box::new(ComplexMatrix::identity(2));
        assert_eq!(code(Error::WellDefinednessFailure { detail: "x".into(), element }), EXIT_CONSTRUCTION);
    }

    #[test]
    fn random_density_specs_are_validated() {
        assert_eq!(resolve_density("random:3:7").unwrap().rows(), 3);
        assert_eq!(resolve_density("random:3").unwrap_err().code, EXIT_PARSE);
        assert_eq!(resolve_density("random:x:1").unwrap_err().code, EXIT_PARSE);
    }

    #[test]
    fn seed_flag_reaches_the_optimizer() {
        let cli = Cli::parse_from(["qcorr", "--seed", "9", "--starts", "4", "ppt", "s.json"]);
        let cfg = optimizer(&cli).unwrap();
        assert_eq!((cfg.seed, cfg.starts), (9, 4));
        let cli = Cli::parse_from(["qcorr", "--tol=-1", "ppt", "s.json"]);
        assert_eq!(optimizer(&cli).unwrap_err().code, EXIT_DOMAIN);
    }
}
