use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ligme::config::SolveConfig;
use ligme::design::design_b;
use ligme::error::{LigmeError, Result};
use ligme::harness::{
    log_grid, run_experiment, sweep_csv, sweep_mu, ExperimentSpec, Scenario, Side, Variant, Weights,
};
use ligme::io::{read_matrix, write_matrix, write_vector};
use ligme::linops::LinOp;
use ligme::penalty::{certify_convexity, Problem, CERTIFICATE_TOL};
use ligme::prox::Penalty;
use ligme::solver::{LigmeSolver, SolverConfig, SolverState};

/// Convex-nonconvex regularized least squares.
#[derive(Parser)]
#[command(name = "ligme", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a reference experiment for both penalties.
    Experiment {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Weights for the convex and enhanced penalty, e.g. `--mu 60 900`
        /// or `--mu 0.015:0.1 0.035:0.1`.
        #[arg(long, num_args = 2, value_names = ["CONVEX", "LIGME"])]
        mu: Option<Vec<Weights>>,
    },
    /// Mean squared error over a grid of weights for one penalty.
    Sweep {
        #[command(flatten)]
        exp: ExperimentArgs,
        #[arg(long, default_value = "ligme", value_parser = parse_side)]
        side: Side,
        /// Explicit grid, e.g. `--grid 10 20 40` or `--grid 0.01:0.1 0.02:0.1`.
        #[arg(long, num_args = 1.., conflicts_with = "log_grid")]
        grid: Option<Vec<Weights>>,
        /// Log-spaced grid `LO HI COUNT`.
        #[arg(long, num_args = 3, value_names = ["LO", "HI", "COUNT"])]
        log_grid: Option<Vec<f64>>,
    },
    /// Design an enhancement matrix B and certify overall convexity.
    DesignB {
        #[arg(long)]
        a: PathBuf,
        /// Penalty map; identity when omitted.
        #[arg(long)]
        l: Option<PathBuf>,
        #[arg(long)]
        mu: f64,
        #[arg(long, default_value_t = ligme::design::DEFAULT_THETA)]
        theta: f64,
        /// Square completion of L whose last rows equal L.
        #[arg(long)]
        tilde: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Solve a problem described by a TOML file.
    Solve {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(value_parser = parse_scenario)]
    scenario: Scenario,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    snr: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    kappa: Option<f64>,
    /// Enhanced variant of the mixed completion penalty (I, II, III, IV).
    #[arg(long, value_parser = parse_variant)]
    variant: Option<Variant>,
    #[arg(long)]
    out: PathBuf,
    /// Write results and exit 0 even if a convexity certificate fails.
    #[arg(long)]
    force: bool,
}

fn parse_scenario(s: &str) -> std::result::Result<Scenario, String> {
    s.parse().map_err(|e: LigmeError| e.to_string())
}

fn parse_variant(s: &str) -> std::result::Result<Variant, String> {
    s.parse().map_err(|e: LigmeError| e.to_string())
}

fn parse_side(s: &str) -> std::result::Result<Side, String> {
    match s {
        "convex" => Ok(Side::Convex),
        "ligme" => Ok(Side::Ligme),
        _ => Err(format!("expected convex or ligme, got {s:?}")),
    }
}

impl ExperimentArgs {
    fn spec(&self) -> ExperimentSpec {
        let mut spec = ExperimentSpec::new(self.scenario);
        if let Some(v) = self.variant {
            spec.variant = v;
            spec.mu_ligme = v.default_weights();
        }
        macro_rules! set {
            ($($field:ident <- $arg:ident),*) => {
                $(if let Some(v) = self.$arg { spec.$field = v; })*
            };
        }
        set!(theta <- theta, snr_db <- snr, seed <- seed, iters <- iters,
             replications <- reps, n <- n, m <- m, kappa <- kappa);
        spec
    }
}

fn write(dir: &Path, name: &str, text: &str) -> Result<()> {
    fs::write(dir.join(name), text)?;
    Ok(())
}

/// Exit status for a certificate outcome.
fn certificate_status(holds: bool, force: bool) -> ExitCode {
    if holds || force {
        ExitCode::SUCCESS
    } else {
        eprintln!("convexity certificate failed (use --force to accept)");
        ExitCode::from(2)
    }
}

fn experiment(exp: &ExperimentArgs, mu: Option<&[Weights]>) -> Result<ExitCode> {
    let mut spec = exp.spec();
    if let Some([c, l]) = mu {
        spec.mu_convex = *c;
        spec.mu_ligme = *l;
    }
    let rep = run_experiment(&spec)?;
    fs::create_dir_all(&exp.out)?;
    write(&exp.out, "trace.csv", &rep.trace_csv())?;
    write(&exp.out, "mse.csv", &rep.mse_csv())?;
    if let Some(sv) = rep.singvals_csv() {
        write(&exp.out, "singvals.csv", &sv)?;
    }
    write_matrix(
        exp.out.join("estimate.mat.txt"),
        &rep.estimate_matrix(Side::Ligme),
    )?;
    write_matrix(
        exp.out.join("estimate_convex.mat.txt"),
        &rep.estimate_matrix(Side::Convex),
    )?;
    println!(
        "{} reps={} iters={}: MSE convex({}) = {:.6}, ligme({}) = {:.6}, ratio {:.4}",
        spec.scenario,
        spec.replications,
        spec.iters,
        spec.mu_convex,
        rep.convex.mse,
        spec.mu_ligme,
        rep.ligme.mse,
        rep.ligme.mse / rep.convex.mse
    );
    if let (Some(c), Some(l)) = (rep.convex.num_rank, rep.ligme.num_rank) {
        println!("num-rank (first replication): convex {c}, ligme {l}");
    }
    println!(
        "certificate min eigenvalue: {:.3e}",
        rep.ligme.certificate.min_eig
    );
    Ok(certificate_status(rep.certificates_hold(), exp.force))
}

fn sweep(
    exp: &ExperimentArgs,
    side: Side,
    grid: Option<&[Weights]>,
    log: Option<&[f64]>,
) -> Result<ExitCode> {
    let spec = exp.spec();
    let grid: Vec<Weights> = match (grid, log) {
        (Some(g), _) => g.to_vec(),
        (None, Some(&[lo, hi, count])) => log_grid(lo, hi, count as usize)?
            .into_iter()
            .map(Weights::Single)
            .collect(),
        _ => {
            return Err(LigmeError::InvalidArgument(
                "give --grid or --log-grid".into(),
            ))
        }
    };
    let points = sweep_mu(&spec, side, &grid)?;
    fs::create_dir_all(&exp.out)?;
    let csv = sweep_csv(&points);
    write(&exp.out, "mse.csv", &csv)?;
    print!("{csv}");
    Ok(certificate_status(
        points.iter().all(|p| p.certificate_holds),
        exp.force,
    ))
}

fn design(
    a: &Path,
    l: Option<&Path>,
    mu: f64,
    theta: f64,
    tilde: Option<&Path>,
    out: &Path,
    force: bool,
) -> Result<ExitCode> {
    let a = read_matrix(a)?;
    let l = match l {
        Some(p) => read_matrix(p)?,
        None => nalgebra::DMatrix::identity(a.ncols(), a.ncols()),
    };
    let tilde = tilde.map(read_matrix).transpose()?;
    let d = design_b(&a, &l, mu, theta, tilde.as_ref())?;
    let rows = l.nrows();
    let p = Problem::new(
        LinOp::dense(a.clone()),
        nalgebra::DVector::zeros(a.nrows()),
        LinOp::dense(l),
        d.op(),
        mu,
        Penalty::l1(rows),
    )?;
    let cert = certify_convexity(&p, CERTIFICATE_TOL)?;
    write_matrix(out, &d.b)?;
    println!(
        "B: {}x{}, theta {theta}, certificate min eigenvalue {:.3e} ({})",
        d.b.nrows(),
        d.b.ncols(),
        cert.min_eig,
        if cert.holds {
            "convex"
        } else {
            "NOT certified"
        }
    );
    Ok(certificate_status(cert.holds, force))
}

fn solve(config: &Path, out: &Path, force: bool) -> Result<ExitCode> {
    let cfg = SolveConfig::read(config)?;
    let base = config.parent().unwrap_or(Path::new("."));
    let loaded = cfg.load(base)?;
    let cert = certify_convexity(&loaded.problem, CERTIFICATE_TOL)?;
    if !cert.holds && !force {
        eprintln!(
            "convexity certificate failed: min eigenvalue {:.3e}",
            cert.min_eig
        );
        return Ok(ExitCode::from(2));
    }
    // a forced run on an uncertified problem has no positive-definite metric
    let solver_cfg = SolverConfig {
        verify_metric: !force,
        ..loaded.solver
    };
    let solver = LigmeSolver::new(&loaded.problem, solver_cfg)?;
    let rep = solver.solve(
        SolverState::for_problem(&loaded.problem),
        loaded.truth.as_ref(),
    )?;
    fs::create_dir_all(out)?;
    write_vector(out.join("estimate.mat.txt"), &rep.x)?;
    write(out, "trace.csv", &rep.trace_csv())?;
    println!(
        "iterations {} (converged: {}), objective {:.10e}, sigma {:.4e}, tau {:.4e}, certificate min eigenvalue {:.3e}",
        rep.iterations,
        rep.converged,
        rep.final_objective().unwrap_or(f64::NAN),
        rep.steps.sigma,
        rep.steps.tau,
        cert.min_eig
    );
    Ok(certificate_status(cert.holds, force))
}

fn run(cli: Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Experiment { exp, mu } => experiment(exp, mu.as_deref()),
        Command::Sweep {
            exp,
            side,
            grid,
            log_grid,
        } => sweep(exp, *side, grid.as_deref(), log_grid.as_deref()),
        Command::DesignB {
            a,
            l,
            mu,
            theta,
            tilde,
            out,
            force,
        } => design(a, l.as_deref(), *mu, *theta, tilde.as_deref(), out, *force),
        Command::Solve { config, out, force } => solve(config, out, *force),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
