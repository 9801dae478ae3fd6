//! One function per subcommand. Each writes its files into `out` and
//! returns the summary it wrote.

use std::fs;
use std::path::Path;

use coag_core::diagnostics::{
    beta_w_laplace, boundary_layer_report, kappa, moments, norm_distance, phi_big_laplace,
    tail_normalization_check, BoundaryLayerPrediction, Moment,
};
use coag_core::error::CoagError;
use coag_core::kernels::KernelSpec;
use coag_core::operators::LaplaceProfile;
use coag_core::solver::{a_priori_bounds, solve_profile, SolverConfig, SolverReport};
use coag_core::special::{
    exact_moment, fbar_density, fbar_laplace, fbar_laplace_deriv, qbar, small_x_coefficient,
    tail_coefficient, ExactProfileParams,
};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::io::{profile_rows, read_profile, write_csv, write_json, PROFILE_HEADER};
use crate::verify::{inverse_report, kernel_report, InverseReport, KernelReport};
use crate::CliError;

fn ensure_dir(out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub gamma: f64,
    pub closed_form: f64,
    /// `-(1/Gamma(1-gamma)) int q^{-gamma} F'(q) dq` on the Laplace grid.
    pub quadrature: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactSummary {
    pub rho: f64,
    pub m0: f64,
    pub moments: Vec<MomentRow>,
    /// `f(x) ~ c x^{rho-1}` at 0.
    pub small_x_coefficient: f64,
    /// `f(x) ~ c x^{-1-rho}` at infinity.
    pub tail_coefficient: f64,
    /// Sup over the grid of `|q F' + rho Q - Q^2|`.
    pub qode_identity_residual: f64,
}

pub fn exact(cfg: &RunConfig, out: &Path) -> Result<ExactSummary, CliError> {
    let p = ExactProfileParams::new(cfg.solver.rho)?;
    cfg.validate_common()?;
    let grid = cfg.solver.grid.build()?;
    ensure_dir(out)?;
    let rho = p.rho;
    let mut rows = Vec::with_capacity(grid.len());
    let mut identity: f64 = 0.0;
    for &q in &grid.nodes {
        let f = fbar_laplace(q, &p);
        let d1 = fbar_laplace_deriv(q, 1, &p)?;
        let d2 = fbar_laplace_deriv(q, 2, &p)?;
        let qq = qbar(q, &p);
        identity = identity.max((q * d1 + rho * qq - qq * qq).abs());
        rows.push(vec![q, f, d1, d2, qq]);
    }
    write_csv(&out.join("exact_laplace.csv"), &["q", "Fbar", "Fbar_d1", "Fbar_d2", "Qbar"], &rows)?;

    let d = &cfg.density_grid;
    let dgrid = coag_core::grids::QuadratureGrid::log_spaced(d.x_min, d.x_max, d.nodes)?;
    let rows = dgrid
        .nodes
        .iter()
        .map(|&x| Ok(vec![x, fbar_density(x, &p)?]))
        .collect::<Result<Vec<_>, CoagError>>()?;
    write_csv(&out.join("exact_density.csv"), &["x", "fbar"], &rows)?;

    let fbar = LaplaceProfile::fbar(grid, rho)?;
    let moments = cfg
        .moment_orders()?
        .into_iter()
        .map(|g| {
            Ok(MomentRow {
                gamma: g,
                closed_form: exact_moment(g, &p)?,
                quadrature: moments(&fbar, g)?.value,
            })
        })
        .collect::<Result<Vec<_>, CoagError>>()?;
    let summary = ExactSummary {
        rho,
        m0: exact_moment(0.0, &p)?,
        moments,
        small_x_coefficient: small_x_coefficient(&p),
        tail_coefficient: tail_coefficient(&p),
        qode_identity_residual: identity,
    };
    write_json(&out.join("exact_summary.json"), &summary)?;
    Ok(summary)
}

pub fn verify_kernel(cfg: &RunConfig, alpha: f64, out: &Path) -> Result<KernelReport, CliError> {
    let report = kernel_report(alpha, &cfg.kernel_check, cfg.threshold_scale(), cfg.seed)?;
    ensure_dir(out)?;
    write_json(&out.join("kernel_report.json"), &report)?;
    if !report.pass {
        return Err(CliError::Verification(format!(
            "kernel check failed for alpha {alpha}: identity residual {:.3e}, plemelj deviation {:.3e}, bounds change {:.3e}",
            report.max_residual, report.plemelj_max_deviation, report.bounds.relative_change
        )));
    }
    Ok(report)
}

pub fn verify_inverse(cfg: &RunConfig, out: &Path) -> Result<InverseReport, CliError> {
    let report = inverse_report(&cfg.inverse_check, cfg.solver.rho, cfg.threshold_scale(), cfg.seed)?;
    ensure_dir(out)?;
    write_json(&out.join("inverse_report.json"), &report)?;
    if !report.pass {
        return Err(CliError::Verification(format!(
            "inverse round trip error {:.3e} (threshold {:.1e}), boundary error {:.3e}",
            report.max_error, report.error_threshold, report.max_boundary_error
        )));
    }
    Ok(report)
}

/// Solves, writes `profile.csv` and `report.json`.
pub fn solve(cfg: &RunConfig, out: &Path) -> Result<SolverReport, CliError> {
    cfg.validate_common()?;
    let (f, report) = solve_profile(&cfg.solver)?;
    ensure_dir(out)?;
    let fbar = LaplaceProfile::fbar(f.grid.clone(), f.rho)?;
    write_csv(&out.join("profile.csv"), &PROFILE_HEADER, &profile_rows(&f, &fbar))?;
    write_json(&out.join("report.json"), &report)?;
    if !report.converged {
        return Err(CliError::NotConverged(format!(
            "no convergence after {} iterations: step ratio {:.4}, self-similar residual {:.3e}",
            report.iterations, report.contraction_ratio, report.residual_selfsim
        )));
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelAverage {
    pub x: f64,
    pub beta_w: f64,
    /// `x^alpha beta_W(x)`, tending to `m_alpha` as `x -> 0`.
    pub scaled_beta_w: f64,
    pub phi: f64,
    /// `x^alpha Phi(x)`, tending to `eps m_alpha / alpha`.
    pub scaled_phi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub rho: f64,
    pub alpha: f64,
    pub epsilon: f64,
    pub f0: f64,
    pub kappa: f64,
    pub moments: Vec<Moment>,
    /// Fitted `lim q^{1-rho} (-F'(q))`; `rho^2` for a normalized profile.
    pub tail_normalization: Option<f64>,
    pub tail_fit_error: Option<String>,
    pub boundary_layer: BoundaryLayerPrediction,
    pub norm_distance: f64,
    pub q_bound_excess: f64,
    pub q_slope_sup: f64,
    pub kernel_averages: Vec<KernelAverage>,
}

pub fn diagnostics_report(
    f: &LaplaceProfile,
    cfg: &RunConfig,
) -> Result<DiagnosticsReport, CliError> {
    let s: &SolverConfig = &cfg.solver;
    let spec = KernelSpec::power_law(s.alpha)?;
    let eps = s.epsilon;
    let mut orders = cfg.moment_orders()?;
    if !orders.contains(&s.alpha) {
        orders.push(s.alpha);
    }
    let moments = orders
        .iter()
        .map(|&g| moments(f, g))
        .collect::<Result<Vec<_>, CoagError>>()?;
    let (tail_normalization, tail_fit_error) = match tail_normalization_check(f) {
        Ok(c) => (Some(c), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let a = s.alpha;
    let kernel_averages = cfg
        .diagnose_x
        .iter()
        .map(|&x| {
            let b = beta_w_laplace(x, f, &spec)?;
            let p = phi_big_laplace(x, f, &spec, eps)?;
            Ok(KernelAverage {
                x,
                beta_w: b,
                scaled_beta_w: x.powf(a) * b,
                phi: p,
                scaled_phi: x.powf(a) * p,
            })
        })
        .collect::<Result<Vec<_>, CoagError>>()?;
    let (q_bound_excess, q_slope_sup) = a_priori_bounds(f);
    Ok(DiagnosticsReport {
        rho: f.rho,
        alpha: a,
        epsilon: eps,
        f0: f.v0,
        kappa: kappa(f),
        moments,
        tail_normalization,
        tail_fit_error,
        boundary_layer: boundary_layer_report(f, &spec, eps)?,
        norm_distance: norm_distance(f, s.mu(), s.theta())?,
        q_bound_excess,
        q_slope_sup,
        kernel_averages,
    })
}

pub fn diagnose(cfg: &RunConfig, profile: &Path, out: &Path) -> Result<DiagnosticsReport, CliError> {
    cfg.validate_common()?;
    cfg.solver.validate()?;
    let f = read_profile(profile, cfg.solver.rho)?;
    let report = diagnostics_report(&f, cfg)?;
    ensure_dir(out)?;
    write_json(&out.join("diagnostics.json"), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub converged: bool,
    pub iterations: usize,
    pub contraction_ratio: f64,
    pub residual_qode: f64,
    pub norm_distance: f64,
    pub sup_diff: f64,
    pub kappa: f64,
    pub tail_normalization: Option<f64>,
    /// Set when the solve at this `epsilon` failed.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// Each flag: strictly decreasing along the ladder.
    pub norm_distance_decreasing: bool,
    pub sup_diff_decreasing: bool,
    pub kappa_decreasing: bool,
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

pub fn sweep(cfg: &RunConfig, out: &Path) -> Result<SweepReport, CliError> {
    cfg.validate_common()?;
    let mut rows = Vec::new();
    for &eps in &cfg.ladder {
        let sc = SolverConfig { epsilon: eps, ..cfg.solver.clone() };
        let row = match solve_profile(&sc) {
            Ok((f, r)) => SweepRow {
                epsilon: eps,
                converged: r.converged,
                iterations: r.iterations,
                contraction_ratio: r.contraction_ratio,
                residual_qode: r.residual_qode,
                norm_distance: r.norm_distance,
                sup_diff: r.sup_diff,
                kappa: r.kappa,
                tail_normalization: tail_normalization_check(&f).ok(),
                error: None,
            },
            Err(CoagError::Config(m)) => return Err(CoagError::Config(m).into()),
            Err(e) => SweepRow {
                epsilon: eps,
                converged: false,
                iterations: 0,
                contraction_ratio: f64::NAN,
                residual_qode: f64::NAN,
                norm_distance: f64::NAN,
                sup_diff: f64::NAN,
                kappa: f64::NAN,
                tail_normalization: None,
                error: Some(e.to_string()),
            },
        };
        rows.push(row);
    }
    let col = |f: fn(&SweepRow) -> f64| rows.iter().map(f).collect::<Vec<_>>();
    let report = SweepReport {
        norm_distance_decreasing: strictly_decreasing(&col(|r| r.norm_distance)),
        sup_diff_decreasing: strictly_decreasing(&col(|r| r.sup_diff)),
        kappa_decreasing: strictly_decreasing(&col(|r| r.kappa.abs())),
        rows,
    };
    ensure_dir(out)?;
    let table: Vec<Vec<f64>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.epsilon,
                if r.converged { 1.0 } else { 0.0 },
                r.iterations as f64,
                r.contraction_ratio,
                r.residual_qode,
                r.norm_distance,
                r.sup_diff,
                r.kappa,
                r.tail_normalization.unwrap_or(f64::NAN),
            ]
        })
        .collect();
    write_csv(
        &out.join("sweep.csv"),
        &[
            "epsilon", "converged", "iterations", "contraction_ratio", "residual_qode",
            "norm_distance", "sup_diff", "kappa", "tail_normalization",
        ],
        &table,
    )?;
    write_json(&out.join("sweep.json"), &report)?;
    if let Some(bad) = report.rows.iter().find(|r| !r.converged) {
        return Err(CliError::NotConverged(format!(
            "sweep: epsilon {} did not converge ({})",
            bad.epsilon,
            bad.error.as_deref().unwrap_or("tolerances not met")
        )));
    }
    Ok(report)
}
