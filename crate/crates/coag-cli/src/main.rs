use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use coag_cli::config::RunConfig;
use coag_cli::{commands, CliError};

/// Self-similar profiles of the perturbed constant-kernel coagulation equation.
#[derive(Parser)]
#[command(name = "coag", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; omitted fields take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Node count of the Laplace-variable grid the command works on.
    #[arg(long, global = true)]
    grid_nodes: Option<usize>,
    /// Seed for the randomly drawn verification samples.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Halve every verification threshold.
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Exact constant-kernel profile: transform, density and moment table.
    Exact {
        #[arg(long)]
        rho: Option<f64>,
    },
    /// Laplace representation of the perturbation kernel.
    VerifyKernel {
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Round trips through the linearized operator and its inverse.
    VerifyInverse,
    /// Fixed-point solve; writes profile.csv and report.json.
    Solve {
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Moments, kernel averages and asymptotics of a solved profile.
    Diagnose {
        /// profile.csv written by `solve`.
        profile: PathBuf,
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Solve along the configured epsilon ladder and tabulate the trends.
    Sweep,
}

fn run(cli: Cli) -> Result<String, CliError> {
    let c = &cli.common;
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    cfg.strict |= c.strict;
    if let Some(n) = c.grid_nodes {
        cfg.solver.grid.nodes = n;
        cfg.inverse_check.grid.nodes = n;
    }
    let out = &c.out;
    let msg = match cli.cmd {
        Cmd::Exact { rho } => {
            if let Some(r) = rho {
                cfg.solver.rho = r;
            }
            let s = commands::exact(&cfg, out)?;
            format!("exact rho={} m0={}", s.rho, s.m0)
        }
        Cmd::VerifyKernel { alpha } => {
            let a = alpha.unwrap_or(cfg.solver.alpha);
            let r = commands::verify_kernel(&cfg, a, out)?;
            format!("kernel alpha={} max_residual={:.3e} pass", r.alpha, r.max_residual)
        }
        Cmd::VerifyInverse => {
            let r = commands::verify_inverse(&cfg, out)?;
            format!("inverse max_error={:.3e} pass", r.max_error)
        }
        Cmd::Solve { epsilon } => {
            if let Some(e) = epsilon {
                cfg.solver.epsilon = e;
            }
            let r = commands::solve(&cfg, out)?;
            format!(
                "solve epsilon={} iterations={} residual_qode={:.3e} kappa={:.6e}",
                r.epsilon, r.iterations, r.residual_qode, r.kappa
            )
        }
        Cmd::Diagnose { profile, epsilon } => {
            if let Some(e) = epsilon {
                cfg.solver.epsilon = e;
            }
            let r = commands::diagnose(&cfg, &profile, out)?;
            format!("diagnose kappa={:.6e}", r.kappa)
        }
        Cmd::Sweep => {
            let r = commands::sweep(&cfg, out)?;
            format!(
                "sweep rows={} norm_distance_decreasing={} sup_diff_decreasing={} kappa_decreasing={}",
                r.rows.len(),
                r.norm_distance_decreasing,
                r.sup_diff_decreasing,
                r.kappa_decreasing
            )
        }
    };
    Ok(msg)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error code=usage reason={first}");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(msg) => {
            println!("{msg}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.line());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
