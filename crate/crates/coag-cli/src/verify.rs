//! Kernel and inverse-operator verification reports.

use std::sync::Arc;

use coag_core::error::Result;
use coag_core::grids::QuadratureGrid;
use coag_core::kernels::{
    ker_integral_bounds_probe, phi_plemelj, verify_laplace_identity, KerExponents,
    KernelQuadrature, KernelSpec,
};
use coag_core::linop::{apply_ll_with, apply_llinv};
use coag_core::operators::LaplaceProfile;
use coag_core::solver::GridConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{InverseCheckConfig, KernelCheckConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityRow {
    pub x: f64,
    pub y: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsProbe {
    pub exponents: KerExponents,
    pub h: f64,
    pub value: f64,
    pub value_refined: f64,
    pub relative_change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelReport {
    pub alpha: f64,
    pub identity: Vec<IdentityRow>,
    pub max_residual: f64,
    pub residual_threshold: f64,
    /// Largest `|phi_plemelj - phi|` over the s-grid.
    pub plemelj_max_deviation: f64,
    pub plemelj_threshold: f64,
    pub bounds: BoundsProbe,
    pub bounds_threshold: f64,
    pub pass: bool,
}

/// `n` log-spaced points covering `[1e-3, 1e3]`.
pub fn s_grid(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| 10f64.powf(-3.0 + 6.0 * i as f64 / (n - 1) as f64))
        .collect()
}

pub fn kernel_report(
    alpha: f64,
    cfg: &KernelCheckConfig,
    threshold_scale: f64,
    seed: u64,
) -> Result<KernelReport> {
    let spec = KernelSpec::power_law(alpha)?;
    let quad = KernelQuadrature::new(&spec);
    let mut pairs: Vec<(f64, f64)> = cfg
        .points
        .iter()
        .flat_map(|&x| cfg.points.iter().map(move |&y| (x, y)))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..cfg.random_points {
        let x = 10f64.powf(rng.gen_range(-1.0..1.0));
        let y = 10f64.powf(rng.gen_range(-1.0..1.0));
        pairs.push((x, y));
    }
    let identity = pairs
        .into_iter()
        .map(|(x, y)| {
            Ok(IdentityRow { x, y, residual: verify_laplace_identity(x, y, &spec, &quad)? })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_residual = identity.iter().fold(0.0f64, |m, r| m.max(r.residual.abs()));
    let plemelj_max_deviation = s_grid(cfg.plemelj_points)
        .into_iter()
        .map(|s| (phi_plemelj(&spec, s) - spec.phi(s)).abs())
        .fold(0.0, f64::max);
    let e = cfg.bounds_exponents;
    let value = ker_integral_bounds_probe(&spec, &e, cfg.bounds_h)?;
    let value_refined = ker_integral_bounds_probe(&spec, &e, cfg.bounds_h / 2.0)?;
    let relative_change = (value_refined / value - 1.0).abs();
    let residual_threshold = cfg.max_residual * threshold_scale;
    let plemelj_threshold = cfg.max_plemelj_deviation * threshold_scale;
    let bounds_threshold = cfg.max_bounds_change * threshold_scale;
    let pass = max_residual <= residual_threshold
        && plemelj_max_deviation <= plemelj_threshold
        && value.is_finite()
        && relative_change < bounds_threshold;
    Ok(KernelReport {
        alpha,
        identity,
        max_residual,
        residual_threshold,
        plemelj_max_deviation,
        plemelj_threshold,
        bounds: BoundsProbe { exponents: e, h: cfg.bounds_h, value, value_refined, relative_change },
        bounds_threshold,
        pass,
    })
}

/// Closed-form test profile for the inverse round trips.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestProfile {
    /// `e^{-q} - e^{-2q}`, vanishing at 0.
    ExpDifference,
    /// `(1 + q)^{-1/2}`, algebraic tail.
    Algebraic,
    /// `e^{-q}`.
    Exponential,
    /// `c (1 + q)^{-s} + e^{-l q}` with drawn parameters.
    Mixed { c: f64, s: f64, l: f64 },
}

impl TestProfile {
    pub fn build(&self, grid: Arc<QuadratureGrid>, rho: f64) -> Result<LaplaceProfile> {
        match *self {
            TestProfile::ExpDifference => LaplaceProfile::from_fns(
                grid,
                rho,
                |q| (-q).exp() - (-2.0 * q).exp(),
                |q| -(-q).exp() + 2.0 * (-2.0 * q).exp(),
                |q| (-q).exp() - 4.0 * (-2.0 * q).exp(),
            ),
            TestProfile::Algebraic => LaplaceProfile::from_fns(
                grid,
                rho,
                |q| (1.0 + q).powf(-0.5),
                |q| -0.5 * (1.0 + q).powf(-1.5),
                |q| 0.75 * (1.0 + q).powf(-2.5),
            ),
            TestProfile::Exponential => {
                LaplaceProfile::from_fns(grid, rho, |q| (-q).exp(), |q| -(-q).exp(), |q| (-q).exp())
            }
            TestProfile::Mixed { c, s, l } => LaplaceProfile::from_fns(
                grid,
                rho,
                move |q| c * (1.0 + q).powf(-s) + (-l * q).exp(),
                move |q| -c * s * (1.0 + q).powf(-s - 1.0) - l * (-l * q).exp(),
                move |q| c * s * (s + 1.0) * (1.0 + q).powf(-s - 2.0) + l * l * (-l * q).exp(),
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundTrip {
    pub profile: TestProfile,
    pub nodes: usize,
    /// `sup |LL(LL^{-1} H) - H|`, `F(0)` included.
    pub ll_of_inverse: f64,
    /// `sup |LL^{-1}(LL H) - H|`.
    pub inverse_of_ll: f64,
    /// `|LL^{-1}(H)(0) + H(0) / rho|`.
    pub boundary_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InverseReport {
    pub rho: f64,
    pub mu: f64,
    pub chi: f64,
    /// Each profile at the configured node count and at twice that.
    pub round_trips: Vec<RoundTrip>,
    pub max_error: f64,
    pub error_threshold: f64,
    pub max_boundary_error: f64,
    pub boundary_threshold: f64,
    pub pass: bool,
}

pub fn round_trip(
    profile: TestProfile,
    grid: &GridConfig,
    rho: f64,
    mu: f64,
    chi: f64,
) -> Result<RoundTrip> {
    let g = grid.build()?;
    let fbar = LaplaceProfile::fbar(g.clone(), rho)?;
    let h = profile.build(g, rho)?;
    let inv = apply_llinv(&h, mu, chi)?;
    let ll_of_inverse = apply_ll_with(&inv, &fbar)?.max_abs_diff(&h);
    let inverse_of_ll = apply_llinv(&apply_ll_with(&h, &fbar)?, mu, chi)?.max_abs_diff(&h);
    Ok(RoundTrip {
        profile,
        nodes: grid.nodes,
        ll_of_inverse,
        inverse_of_ll,
        boundary_error: (inv.v0 + h.v0 / rho).abs(),
    })
}

pub fn inverse_report(
    cfg: &InverseCheckConfig,
    rho: f64,
    threshold_scale: f64,
    seed: u64,
) -> Result<InverseReport> {
    let mut profiles = vec![TestProfile::ExpDifference, TestProfile::Algebraic, TestProfile::Exponential];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..cfg.random_profiles {
        let c = rng.gen_range(0.2..2.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        profiles.push(TestProfile::Mixed {
            c,
            s: rng.gen_range(0.5..1.5),
            l: rng.gen_range(0.5..3.0),
        });
    }
    let fine = GridConfig { nodes: 2 * cfg.grid.nodes, ..cfg.grid.clone() };
    let mut round_trips = Vec::new();
    for p in profiles {
        round_trips.push(round_trip(p, &cfg.grid, rho, cfg.mu, cfg.chi)?);
        round_trips.push(round_trip(p, &fine, rho, cfg.mu, cfg.chi)?);
    }
    let max_error = round_trips
        .iter()
        .fold(0.0f64, |m, r| m.max(r.ll_of_inverse).max(r.inverse_of_ll));
    let max_boundary_error = round_trips.iter().fold(0.0f64, |m, r| m.max(r.boundary_error));
    let error_threshold = cfg.max_error * threshold_scale;
    let boundary_threshold = cfg.max_boundary_error * threshold_scale;
    Ok(InverseReport {
        rho,
        mu: cfg.mu,
        chi: cfg.chi,
        round_trips,
        max_error,
        error_threshold,
        max_boundary_error,
        boundary_threshold,
        pass: max_error < error_threshold && max_boundary_error < boundary_threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_report_passes_for_one_third() {
        let r = kernel_report(1.0 / 3.0, &KernelCheckConfig::default(), 1.0, 0).unwrap();
        assert!(r.pass, "{r:?}");
        assert_eq!(r.identity.len(), 25 + 8);
    }

    #[test]
    fn zero_alpha_is_a_config_error() {
        let e = kernel_report(0.0, &KernelCheckConfig::default(), 1.0, 0).unwrap_err();
        assert_eq!(e.code(), "config");
    }

    #[test]
    fn seed_changes_only_the_random_rows() {
        let c = KernelCheckConfig::default();
        let a = kernel_report(0.45, &c, 1.0, 1).unwrap();
        let b = kernel_report(0.45, &c, 1.0, 2).unwrap();
        assert_eq!(a.identity[..25], b.identity[..25]);
        assert_ne!(a.identity[25..], b.identity[25..]);
    }
}
