//! Fixed-point computation of the perturbed self-similar profile.
//!
//! The unknown is `M = F - Fbar`. Each step applies
//! `M <- (1 - d) M + d LL^{-1}[B2(M, M) + eps B_W(Fbar + M, Fbar + M)]`.
//! When the step norms stop shrinking the damping `d` is halved and the
//! iteration restarts from the best iterate seen so far.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{CoagError, Result};
use crate::grids::QuadratureGrid;
use crate::kernels::{KernelQuadrature, KernelSpec};
use crate::linop::apply_llinv;
use crate::norms::{default_mu, default_theta, full_norm_grid, mu_star, theta_window};
use crate::operators::{
    op_a_with, op_b2_with, op_bw_with, op_p, LaplaceProfile, TailCompletion,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub q_min: f64,
    pub q_max: f64,
    pub nodes: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            q_min: 1e-8,
            q_max: 1e6,
            nodes: 600,
        }
    }
}

impl GridConfig {
    pub fn build(&self) -> Result<Arc<QuadratureGrid>> {
        Ok(Arc::new(QuadratureGrid::log_spaced(self.q_min, self.q_max, self.nodes)?))
    }
}

/// Log-spaced quadrature for the kernel double integrals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelGridConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub h: f64,
}

impl Default for KernelGridConfig {
    fn default() -> Self {
        KernelGridConfig {
            x_min: KernelQuadrature::DEFAULT_X_MIN,
            x_max: KernelQuadrature::DEFAULT_X_MAX,
            h: KernelQuadrature::DEFAULT_H,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub rho: f64,
    pub alpha: f64,
    pub epsilon: f64,
    /// Largest accepted `epsilon`; raise it deliberately to probe the
    /// non-contracting regime.
    pub epsilon_cap: f64,
    /// Decay parameter of the convergence norm; midpoint of its window if unset.
    pub theta: Option<f64>,
    /// Head regularity order; `min(rho, 1 - rho) / 2` if unset.
    pub mu: Option<f64>,
    pub damping: f64,
    /// Smallest damping tried before giving up.
    pub min_damping: f64,
    /// Required sup of the self-similar residual at convergence.
    pub tol: f64,
    /// Iteration stops once the step norm falls below this.
    pub step_tol: f64,
    pub max_iter: usize,
    pub grid: GridConfig,
    pub kernel_grid: KernelGridConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            rho: 0.7,
            alpha: 1.0 / 3.0,
            epsilon: 0.02,
            epsilon_cap: 0.1,
            theta: None,
            mu: None,
            damping: 0.7,
            min_damping: 0.1,
            tol: 1e-5,
            step_tol: 1e-10,
            max_iter: 300,
            grid: GridConfig::default(),
            kernel_grid: KernelGridConfig::default(),
        }
    }
}

impl SolverConfig {
    pub fn theta(&self) -> f64 {
        self.theta.unwrap_or_else(|| default_theta(self.rho, self.alpha))
    }

    pub fn mu(&self) -> f64 {
        self.mu.unwrap_or_else(|| default_mu(self.rho))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CoagError::Config(m));
        if !(self.rho > 0.5 && self.rho < 1.0) {
            return bad(format!("rho out of (1/2,1): {}", self.rho));
        }
        let spec = KernelSpec::power_law(self.alpha)?;
        spec.check_solver_range()?;
        if !(self.alpha < self.rho) {
            return bad(format!("alpha {} must be below rho {}", self.alpha, self.rho));
        }
        if !(self.epsilon >= 0.0) {
            return bad(format!("epsilon must be nonnegative: {}", self.epsilon));
        }
        if self.epsilon > self.epsilon_cap {
            return bad(format!(
                "epsilon {} above epsilon_cap {}",
                self.epsilon, self.epsilon_cap
            ));
        }
        let (lo, hi) = theta_window(self.rho, self.alpha);
        let theta = self.theta();
        if !(theta > lo && theta < hi) {
            return bad(format!("theta {theta} outside ({lo}, {hi})"));
        }
        let mu = self.mu();
        if !(mu > 0.0 && mu < mu_star(self.rho)) {
            return bad(format!("mu {mu} outside (0, {})", mu_star(self.rho)));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return bad(format!("damping out of (0,1]: {}", self.damping));
        }
        if !(self.min_damping > 0.0 && self.min_damping <= self.damping) {
            return bad(format!("min_damping out of (0, damping]: {}", self.min_damping));
        }
        if !(self.tol > 0.0 && self.step_tol > 0.0) || self.max_iter == 0 {
            return bad("tol, step_tol and max_iter must be positive".into());
        }
        let k = &self.kernel_grid;
        if !(k.x_min > 0.0 && k.x_max > k.x_min && k.h > 0.0) {
            return bad("kernel grid needs 0 < x_min < x_max and h > 0".into());
        }
        Ok(())
    }

    pub fn kernel(&self) -> Result<(KernelSpec, KernelQuadrature)> {
        let spec = KernelSpec::power_law(self.alpha)?;
        let k = &self.kernel_grid;
        Ok((spec, KernelQuadrature::with_range(&spec, k.x_min, k.x_max, k.h)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `|M_{n+1} - M_n|_{2,0,theta}`.
    pub step_norm: f64,
    pub ratio: Option<f64>,
    pub damping: f64,
    /// Self-similar residual of the iterate entering this step.
    pub residual_selfsim: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub rho: f64,
    pub alpha: f64,
    pub epsilon: f64,
    pub theta: f64,
    pub mu: f64,
    pub iterations: usize,
    pub iterates: Vec<IterationRecord>,
    pub converged: bool,
    pub final_damping: f64,
    pub restarts: usize,
    /// Largest of the last three step ratios.
    pub contraction_ratio: f64,
    pub residual_selfsim: f64,
    pub residual_qode: f64,
    pub kappa: f64,
    /// `|F - Fbar|_{2,mu,theta}` over the grid.
    pub norm_distance: f64,
    pub sup_diff: f64,
    /// `max (Q - Qbar)`, nonpositive when the a-priori bound holds.
    pub q_bound_excess: f64,
    /// `sup q^{1-rho} Q'`, bounded by `rho^2`.
    pub q_slope_sup: f64,
}

fn report_ratio(iterates: &[IterationRecord]) -> f64 {
    let tail = &iterates[iterates.len().saturating_sub(3)..];
    let ratios: Vec<f64> = tail.iter().filter_map(|r| r.ratio).collect();
    if ratios.is_empty() {
        0.0
    } else {
        ratios.into_iter().fold(0.0, f64::max)
    }
}

/// Intermediate iterates of the truncated problem may carry a slowly
/// decaying or sign-changing tail at `q_max`.
const TRUNC: TailCompletion = TailCompletion::Truncate;

/// Step norms above this multiple of `step_tol` count toward non-contraction;
/// below it ratios are dominated by rounding.
const NOISE_FACTOR: f64 = 100.0;

pub fn solve_profile(cfg: &SolverConfig) -> Result<(LaplaceProfile, SolverReport)> {
    cfg.validate()?;
    let grid = cfg.grid.build()?;
    let (_, kq) = cfg.kernel()?;
    let rho = cfg.rho;
    let eps = cfg.epsilon;
    let theta = cfg.theta();
    let mu = cfg.mu();
    let fbar = LaplaceProfile::fbar(grid.clone(), rho)?;

    let mut m = LaplaceProfile::zeros(grid.clone(), rho);
    let mut damping = cfg.damping;
    let mut iterates = Vec::new();
    let mut prev_step: Option<f64> = None;
    let mut growing = 0usize;
    let mut restarts = 0usize;
    let mut best: Option<(f64, LaplaceProfile)> = None;
    let mut converged_step = false;

    for it in 1..=cfg.max_iter {
        let f = fbar.add(&m);
        let attempt = (|| -> Result<(LaplaceProfile, f64)> {
            let bw = if eps != 0.0 {
                Some(op_bw_with(&f, &f, &kq, TRUNC)?)
            } else {
                None
            };
            let mut rhs = op_b2_with(&m, &m, TRUNC)?;
            let mut resid = f.sub(&op_a_with(&f, TRUNC)?).sub(&op_b2_with(&f, &f, TRUNC)?);
            if let Some(bw) = &bw {
                rhs = rhs.lincomb(1.0, bw, eps);
                resid = resid.lincomb(1.0, bw, -eps);
            }
            let update = apply_llinv(&rhs, mu, theta)?;
            Ok((update, resid.sup_abs()))
        })();
        let (step, next, resid) = match attempt {
            Ok((update, resid)) => {
                let next = m.lincomb(1.0 - damping, &update, damping);
                let step = full_norm_grid(&next.sub(&m), 2, 0.0, theta)?;
                (step, Some(next), resid)
            }
            Err(CoagError::Config(e)) => return Err(CoagError::Config(e)),
            // an operator failing mid-iteration is read as a blow-up
            Err(_) => (f64::INFINITY, None, f64::NAN),
        };
        let ratio = prev_step.map(|p| if p > 0.0 { step / p } else { 0.0 });
        iterates.push(IterationRecord {
            iteration: it,
            step_norm: step,
            ratio,
            damping,
            residual_selfsim: resid,
        });

        let finite = step.is_finite() && next.is_some();
        if finite && best.as_ref().map_or(true, |(s, _)| step < *s) {
            best = Some((step, m.clone()));
        }
        let increasing = !finite
            || (ratio.map_or(false, |r| r >= 1.0) && step > NOISE_FACTOR * cfg.step_tol);
        growing = if increasing { growing + 1 } else { 0 };
        if growing >= 3 || !finite {
            let observed = ratio.unwrap_or(f64::INFINITY);
            if damping / 2.0 < cfg.min_damping {
                return Err(CoagError::NonContraction {
                    iterations: it,
                    ratio: observed,
                });
            }
            damping /= 2.0;
            restarts += 1;
            growing = 0;
            prev_step = None;
            m = best
                .as_ref()
                .map(|(_, b)| b.clone())
                .unwrap_or_else(|| LaplaceProfile::zeros(grid.clone(), rho));
            continue;
        }
        m = next.expect("finite step carries an iterate");
        prev_step = Some(step);
        if step < cfg.step_tol {
            converged_step = true;
            break;
        }
    }

    let f = fbar.add(&m);
    // the converged profile must pass the strict completion
    let resid = {
        let strict = TailCompletion::Strict;
        let mut r = f.sub(&op_a_with(&f, strict)?).sub(&op_b2_with(&f, &f, strict)?);
        if eps != 0.0 {
            r = r.lincomb(1.0, &op_bw_with(&f, &f, &kq, strict)?, -eps);
        }
        r.sup_abs()
    };
    let qode = residual_qode(&f, &kq, eps)?;
    let contraction_ratio = report_ratio(&iterates);
    let (q_bound_excess, q_slope_sup) = a_priori_bounds(&f);
    let report = SolverReport {
        rho,
        alpha: cfg.alpha,
        epsilon: eps,
        theta,
        mu,
        iterations: iterates.len(),
        converged: converged_step && resid < cfg.tol && contraction_ratio < 1.0,
        iterates,
        final_damping: damping,
        restarts,
        contraction_ratio,
        residual_selfsim: resid,
        residual_qode: qode,
        kappa: 2.0 * (f.v0 - rho),
        norm_distance: full_norm_grid(&m, 2, mu, theta)?,
        sup_diff: m.sup_abs(),
        q_bound_excess,
        q_slope_sup,
    };
    Ok((f, report))
}

/// `(max (Q - Qbar), sup q^{1-rho} Q')` over the grid, with `Q = F(0) - F`.
/// The a-priori bounds ask for a nonpositive first entry and a second at
/// most `rho^2`.
pub fn a_priori_bounds(f: &LaplaceProfile) -> (f64, f64) {
    let rho = f.rho;
    let excess = f
        .values
        .iter()
        .zip(f.q())
        .map(|(fv, &q)| {
            let s = q.powf(rho);
            (f.v0 - fv) - rho * s / (1.0 + s)
        })
        .fold(f64::NEG_INFINITY, f64::max);
    let slope = f
        .d1
        .iter()
        .zip(f.q())
        .map(|(d, q)| -d * q.powf(1.0 - rho))
        .fold(f64::NEG_INFINITY, f64::max);
    (excess, slope)
}

/// `-q Q' + rho Q - Q^2 - eps P(q)` on the grid, `Q = F(0) - F`.
pub fn qode_residual_profile(
    f: &LaplaceProfile,
    kq: &KernelQuadrature,
    eps: f64,
) -> Result<Vec<f64>> {
    let p = if eps != 0.0 {
        op_p(f, kq, f.q())?
    } else {
        vec![0.0; f.len()]
    };
    Ok(f.q()
        .iter()
        .enumerate()
        .map(|(i, &q)| {
            let qq = f.v0 - f.values[i];
            q * f.d1[i] + f.rho * qq - qq * qq - eps * p[i]
        })
        .collect())
}

/// Sup of [`qode_residual_profile`].
pub fn residual_qode(f: &LaplaceProfile, kq: &KernelQuadrature, eps: f64) -> Result<f64> {
    Ok(qode_residual_profile(f, kq, eps)?
        .into_iter()
        .fold(0.0, |m, v| m.max(v.abs())))
}

/// `F_a(q) = F(q / a)`, the transform of `a f(a x)`, on the same grid.
pub fn rescale_profile(f: &LaplaceProfile, a: f64) -> Result<LaplaceProfile> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(CoagError::Domain(format!("rescale factor must be positive, got {a}")));
    }
    if a == 1.0 {
        return Ok(f.clone());
    }
    let g = &f.grid;
    let span = (g.x_max / g.x_min).ln();
    if a.ln().abs() > 0.5 * span {
        return Err(CoagError::Coverage(format!(
            "rescaling by {a} moves more than half the grid off its range"
        )));
    }
    let e: Vec<_> = (0..3).map(|k| f.evaluator(k)).collect();
    let col = |k: usize| -> Vec<f64> {
        g.nodes
            .iter()
            .map(|&q| e[k].eval(q / a) / a.powi(k as i32))
            .collect()
    };
    LaplaceProfile::new(g.clone(), f.rho, f.v0, col(0), col(1), col(2))
}
