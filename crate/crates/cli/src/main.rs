//! `boundent`: state checks, strategy evaluation, seesaw search and certified
//! bounds from the command line.
//!
//! Exit codes: 0 on success, 1 on bad input, 2 when a numerical step fails.

mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use boundent::game::{
    classical_exact_max, noise_threshold, noise_tolerance, paper_strategy_d3, score_quantum,
    score_with_state_operator, state_operator, GameSpec, QuantumStrategy,
};
use boundent::qobjects::{bound_entangled_state, isotropic_mix};
use boundent::relaxation::{
    reduced_program, solve_full, solve_reduced, verify_certificate, DualCertificate, FullMomentModel,
    RelaxationOptions,
};
use boundent::seesaw::{read_bundle, seesaw, write_bundle, SeesawConfig};
use boundent::witness::{witness_report, PPT_TOL};
use boundent::Error;
use boundent_linalg::{eigh, partial_transpose, Subsystem};
use boundent_sdp::write_sdpa;
use clap::{Parser, Subcommand};
use serde_json::{json, Map, Value};

use report::RunReport;

/// Eigenvalues below this count as zero when reporting ranks.
const RANK_TOL: f64 = 1e-10;
/// Margin a score must clear before it counts as a violation.
const VIOLATION_TOL: f64 = 1e-12;

#[derive(Parser)]
#[command(name = "boundent", version, about = "Bound entanglement in a prepare-and-measure game")]
struct Cli {
    /// Print the report as JSON.
    #[arg(long, global = true)]
    json: bool,
    /// Cap on worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Spectrum, partial transpose, rank and realignment norm of the 3⊗3 state.
    VerifyState,
    /// Score of a strategy, optionally mixed with isotropic noise.
    Eval {
        #[arg(long, default_value_t = 3)]
        d: usize,
        /// `paper`, a strategy JSON file, or a bundle directory.
        #[arg(long, default_value = "paper")]
        strategy: String,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
    },
    /// Scores on an even grid of noise rates and the threshold of violation.
    NoiseSweep {
        #[arg(long, default_value_t = 3)]
        d: usize,
        #[arg(long, default_value = "paper")]
        strategy: String,
        #[arg(long, default_value_t = 11)]
        steps: usize,
        /// Write the grid as CSV here instead of printing it.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Alternating optimization over PPT states and measurements.
    Seesaw {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        restarts: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        max_rounds: Option<usize>,
        /// Bundle directory for the best strategy.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Upper bound for unentangled strategies from the moment relaxation.
    Bound {
        #[arg(long)]
        d: usize,
        /// Solve the full moment matrix instead of the symmetrized minor (d = 3).
        #[arg(long)]
        no_symmetrize: bool,
        /// Block-diagonalize even where the default solves the minor whole.
        #[arg(long)]
        blocks: bool,
        /// Seed of the block diagonalization.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        /// Write the dual certificate as JSON.
        #[arg(long)]
        certificate: Option<PathBuf>,
        /// Export the program in SDPA sparse format.
        #[arg(long)]
        sdpa: Option<PathBuf>,
    },
    /// Recheck a stored dual certificate.
    VerifyCertificate {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        certificate: PathBuf,
    },
    /// Exact optimum over deterministic strategies (d = 3).
    Classical {
        #[arg(long, default_value_t = 3)]
        d: usize,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Linalg(_) | Error::Sdp(_) | Error::Solver(_) | Error::Certificate(_) => 2,
            _ => 1,
        };
        Failure { code, message: e.to_string() }
    }
}

fn user_error(message: impl Into<String>) -> Failure {
    Failure { code: 1, message: message.into() }
}

type Outcome = Result<(Map<String, Value>, Value, Option<String>), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let start = Instant::now();
    let (name, outcome) = run(&cli.command);
    match outcome {
        Ok((parameters, results, extra)) => {
            let report = RunReport {
                command: name.into(),
                parameters,
                results,
                wall_time: start.elapsed().as_secs_f64(),
                version: env!("CARGO_PKG_VERSION").into(),
            };
            if cli.json {
                println!("{}", report.to_json());
            } else {
                print!("{}", report.to_text());
                if let Some(text) = extra {
                    print!("{text}");
                }
            }
            ExitCode::SUCCESS
        }
        Err(f) => {
            if cli.json {
                println!("{}", json!({ "command": name, "error": f.message, "exit_code": f.code }));
            } else {
                eprintln!("error: {}", f.message);
            }
            ExitCode::from(f.code)
        }
    }
}

fn run(command: &Command) -> (&'static str, Outcome) {
    match command {
        Command::VerifyState => ("verify-state", verify_state()),
        Command::Eval { d, strategy, noise } => ("eval", eval(*d, strategy, *noise)),
        Command::NoiseSweep { d, strategy, steps, csv } => {
            ("noise-sweep", noise_sweep(*d, strategy, *steps, csv.as_deref()))
        }
        Command::Seesaw { d, restarts, seed, max_rounds, out } => {
            ("seesaw", run_seesaw(*d, *restarts, *seed, *max_rounds, out.as_deref()))
        }
        Command::Bound { d, no_symmetrize, blocks, seed, tol, certificate, sdpa } => (
            "bound",
            bound(*d, *no_symmetrize, *blocks, *seed, *tol, certificate.as_deref(), sdpa.as_deref()),
        ),
        Command::VerifyCertificate { d, certificate } => ("verify-certificate", check_certificate(*d, certificate)),
        Command::Classical { d } => ("classical", classical(*d)),
    }
}

fn params(pairs: &[(&str, Value)]) -> Map<String, Value> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

fn verify_state() -> Outcome {
    let rho = bound_entangled_state();
    let spectrum = eigh(&rho.matrix).map_err(Error::from)?;
    let pt = partial_transpose(&rho.matrix, rho.dim_a, rho.dim_b, Subsystem::A).map_err(Error::from)?;
    let pt_spectrum = eigh(&pt).map_err(Error::from)?;
    let w = witness_report(&rho)?;
    let desc = |v: &[f64]| {
        let mut v = v.to_vec();
        v.sort_by(|a, b| b.total_cmp(a));
        v
    };
    let results = json!({
        "trace": rho.matrix.trace().re,
        "rank": spectrum.rank(RANK_TOL),
        "rank_tol": RANK_TOL,
        "spectrum": desc(spectrum.eigenvalues.as_slice()),
        "pt_spectrum": desc(pt_spectrum.eigenvalues.as_slice()),
        "ppt": w.ppt,
        "min_pt_eigenvalue": w.min_pt_eigenvalue,
        "ppt_tol": PPT_TOL,
        "ccnr": w.ccnr_value,
        "entangled_by_ccnr": w.entangled_by_ccnr,
    });
    Ok((Map::new(), results, None))
}

fn load_strategy(d: usize, source: &str) -> Result<(GameSpec, QuantumStrategy), Failure> {
    let spec = GameSpec::new(d)?;
    let strategy = if source == "paper" {
        if d != 3 {
            return Err(user_error("the built-in strategy is for d = 3; pass a strategy file or bundle"));
        }
        paper_strategy_d3()
    } else {
        let path = Path::new(source);
        if path.is_dir() {
            let (manifest, s) = read_bundle(path)?;
            if manifest.d != d {
                return Err(user_error(format!("bundle is for d = {}, asked for d = {d}", manifest.d)));
            }
            s
        } else {
            let text = std::fs::read_to_string(path).map_err(|e| user_error(format!("{source}: {e}")))?;
            serde_json::from_str(&text).map_err(|e| user_error(format!("{source}: malformed strategy: {e}")))?
        }
    };
    strategy.validate(&spec)?;
    Ok((spec, strategy))
}

fn check_noise(nu: f64) -> Result<(), Failure> {
    if (0.0..=1.0).contains(&nu) {
        Ok(())
    } else {
        Err(user_error(format!("noise rate {nu} is outside [0, 1]")))
    }
}

fn eval(d: usize, source: &str, nu: f64) -> Outcome {
    check_noise(nu)?;
    let (spec, strategy) = load_strategy(d, source)?;
    let noisy = strategy.with_state(isotropic_mix(&strategy.state, nu)?);
    let value = score_quantum(&spec, &noisy)?;
    let bound = spec.bound();
    let results = json!({
        "value": value,
        "bound": bound,
        "uniform_score": 1.0 / d as f64,
        "violation": value > bound + VIOLATION_TOL,
        "violation_tol": VIOLATION_TOL,
    });
    Ok((params(&[("d", json!(d)), ("strategy", json!(source)), ("noise", json!(nu))]), results, None))
}

fn noise_sweep(d: usize, source: &str, steps: usize, csv: Option<&Path>) -> Outcome {
    if steps < 2 {
        return Err(user_error("need at least two grid points"));
    }
    let (spec, strategy) = load_strategy(d, source)?;
    let bound = spec.bound();
    let w = state_operator(&spec, &strategy.alice, &strategy.bob, &strategy.measurements)?;
    let mut text = String::from("nu,value,violated\n");
    let mut rows = Vec::with_capacity(steps);
    for i in 0..steps {
        let nu = i as f64 / (steps - 1) as f64;
        let value = score_with_state_operator(&w, &isotropic_mix(&strategy.state, nu)?.matrix);
        let violated = value > bound + VIOLATION_TOL;
        text.push_str(&format!("{nu},{value},{violated}\n"));
        rows.push(json!({ "nu": nu, "value": value, "violated": violated }));
    }
    let threshold = match noise_threshold(&spec, &strategy, bound) {
        Ok(t) => Some(t),
        Err(Error::NoViolation { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    let extra = match csv {
        Some(path) => {
            std::fs::write(path, &text).map_err(|e| user_error(format!("{}: {e}", path.display())))?;
            None
        }
        None => Some(text),
    };
    let results = json!({
        "bound": bound,
        "threshold": threshold,
        "threshold_tol": 1e-12,
        "rows": rows,
        "csv": csv.map(|p| p.display().to_string()),
    });
    Ok((params(&[("d", json!(d)), ("strategy", json!(source)), ("steps", json!(steps))]), results, extra))
}

fn run_seesaw(d: usize, restarts: Option<usize>, seed: u64, max_rounds: Option<usize>, out: Option<&Path>) -> Outcome {
    if ![3, 5, 7].contains(&d) {
        return Err(user_error("seesaw runs for d = 3, 5, 7"));
    }
    let mut config = SeesawConfig::new(d);
    config.seed = seed;
    if let Some(r) = restarts {
        config.restarts = r;
    }
    if let Some(m) = max_rounds {
        config.max_rounds = m;
    }
    config.validate()?;
    let result = seesaw(&config)?;
    let dir = out.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(format!("seesaw-d{d}")));
    write_bundle(&dir, d, result.best_value, &result.state, &result.measurements)?;
    let spec = GameSpec::new(d)?;
    let tolerance = match result.noise_tolerance() {
        Ok(t) => Some(t),
        Err(Error::NoViolation { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    let results = json!({
        "best_value": result.best_value,
        "bound": spec.bound(),
        "violation": result.best_value > spec.bound() + VIOLATION_TOL,
        "noise_tolerance": tolerance,
        "noise_tolerance_affine": noise_tolerance(result.best_value, 1.0 / d as f64, spec.bound()),
        "best_restart": result.best_restart,
        "rounds": result.rounds,
        "restart_values": result.restarts.iter().map(|r| r.best()).collect::<Vec<_>>(),
        "failed_restarts": result.restarts.iter().filter(|r| r.failure.is_some()).count(),
        "conv_tol": config.conv_tol,
        "solver_tol": config.solver_tol,
        "bundle": dir.display().to_string(),
    });
    let p = params(&[
        ("d", json!(d)),
        ("restarts", json!(config.restarts)),
        ("seed", json!(seed)),
        ("max_rounds", json!(config.max_rounds)),
    ]);
    Ok((p, results, None))
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| user_error(format!("{}: {e}", path.display())))
}

fn bound(
    d: usize,
    no_symmetrize: bool,
    force_blocks: bool,
    seed: u64,
    tol: f64,
    certificate: Option<&Path>,
    sdpa: Option<&Path>,
) -> Outcome {
    if ![3, 5, 7].contains(&d) {
        return Err(user_error("bounds are computed for d = 3, 5, 7"));
    }
    if !(tol > 0.0) {
        return Err(user_error("--tol must be positive"));
    }
    let p = params(&[
        ("d", json!(d)),
        ("symmetrize", json!(!no_symmetrize)),
        ("seed", json!(seed)),
        ("tol", json!(tol)),
    ]);
    let bound = 2.0 / (d as f64 + 1.0);
    if no_symmetrize {
        if d != 3 {
            return Err(user_error("--no-symmetrize is only available for d = 3"));
        }
        if certificate.is_some() {
            return Err(user_error("certificates are produced for the symmetrized minor only"));
        }
        if let Some(path) = sdpa {
            write_file(path, &write_sdpa(&FullMomentModel::new(d)?.program()))?;
        }
        let s = solve_full(d, tol)?;
        let results = json!({
            "primal_value": s.value,
            "dual_value": s.dual_value,
            "certified_bound": Value::Null,
            "bound": bound,
            "gap": s.gap,
            "solver_tol": tol,
            "iterations": s.iterations,
            "size": s.size,
            "unknowns": s.unknowns,
        });
        return Ok((p, results, None));
    }

    let opts = RelaxationOptions { use_blocks: force_blocks || d > 3, seed, solver_tol: tol };
    if let Some(path) = sdpa {
        write_file(path, &write_sdpa(&reduced_program(d, &opts)?.program))?;
    }
    let sol = solve_reduced(d, &opts)?;
    let report = verify_certificate(&sol.certificate, d)?;
    if let Some(path) = certificate {
        write_file(path, &sol.certificate.to_json()?)?;
    }
    let results = json!({
        "primal_value": sol.primal.value,
        "dual_value": sol.certificate.objective,
        "certified_bound": report.certified_bound,
        "bound": bound,
        "gap": sol.primal.gap,
        "solver_tol": tol,
        "primal_infeasibility": sol.primal.primal_infeasibility,
        "dual_infeasibility": sol.primal.dual_infeasibility,
        "max_dual_residual": report.max_residual,
        "min_minor_eigenvalue": sol.primal.min_eigenvalue,
        "iterations": sol.primal.iterations,
        "blocks": sol.primal.blocks.block_sizes.len(),
        "largest_block": sol.primal.blocks.block_sizes.iter().max(),
        "block_leakage": sol.primal.blocks.leakage,
        "certificate": certificate.map(|c| c.display().to_string()),
    });
    Ok((p, results, None))
}

fn check_certificate(d: usize, path: &Path) -> Outcome {
    let text = std::fs::read_to_string(path).map_err(|e| user_error(format!("{}: {e}", path.display())))?;
    let cert = DualCertificate::from_json(&text).map_err(|e| user_error(format!("malformed certificate: {e}")))?;
    let report = verify_certificate(&cert, d)?;
    let results = json!({
        "objective": report.objective,
        "certified_bound": report.certified_bound,
        "bound": 2.0 / (d as f64 + 1.0),
        "max_residual": report.max_residual,
        "min_block_eigenvalue": report.min_eigenvalues.iter().copied().fold(f64::INFINITY, f64::min),
        "orthogonality_error": report.orthogonality_error,
        "blocks": report.block_sizes.len(),
    });
    Ok((params(&[("d", json!(d)), ("certificate", json!(path.display().to_string()))]), results, None))
}

fn classical(d: usize) -> Outcome {
    if d != 3 {
        return Err(user_error("exact classical enumeration is limited to d = 3"));
    }
    let m = classical_exact_max(d)?;
    let results = json!({
        "value": m.value,
        "wins": m.wins,
        "total": m.total,
        "ratio": format!("{}/{}", m.wins, m.total),
        "classes": m.classes,
        "maximizing_pairs": m.maximizing_pairs,
        "first_digit_optimal": m.first_digit_optimal,
        "witness": m.witness,
    });
    Ok((params(&[("d", json!(d))]), results, None))
}
