use std::sync::Arc;

use crate::error::{CoagError, Result};
use crate::grids::{log_slope, QuadratureGrid};
use crate::kernels::KernelQuadrature;

use super::profile::LaplaceProfile;
use super::wforms::op_bw;

/// End samples below this fraction of the peak are treated as negligible
/// when the local decay rate cannot be read off.
const NEGLIGIBLE_END: f64 = 1e-9;
const MIN_RATE: f64 = 1e-3;

fn peak(psi: &[f64]) -> f64 {
    psi.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// How a running integral is continued past the last node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TailCompletion {
    /// Power-law continuation; an integrand that does not decay is an error.
    #[default]
    Strict,
    /// As `Strict`, but a non-decaying end is cut off after one unit of
    /// `ln q`. Meant for intermediate iterates of a truncated problem.
    Truncate,
}

/// Decay rate in `u` of `psi` past the last node. A sign change across
/// the last samples leaves the rate undefined; the default rate is used then.
fn tail_rate(grid: &QuadratureGrid, psi: &[f64], completion: TailCompletion) -> Result<f64> {
    let n = psi.len();
    match log_slope(psi[n - 4], psi[n - 1], 3.0 * grid.h()) {
        Some(s) if s < -MIN_RATE => Ok(-s),
        None => Ok(1.0),
        _ if psi[n - 1].abs() <= NEGLIGIBLE_END * peak(psi) => Ok(1.0),
        _ if completion == TailCompletion::Truncate => Ok(1.0),
        _ => Err(CoagError::Divergence(format!(
            "integrand does not decay past q = {:.3e}",
            grid.x_max
        ))),
    }
}

/// Growth rate in `u` of `psi` above the first node.
fn head_rate(grid: &QuadratureGrid, psi: &[f64]) -> Result<f64> {
    match log_slope(psi[0], psi[3], 3.0 * grid.h()) {
        Some(s) if s > MIN_RATE => Ok(s),
        None => Ok(1.0),
        _ if psi[0].abs() <= NEGLIGIBLE_END * peak(psi) => Ok(1.0),
        _ => Err(CoagError::Divergence(format!(
            "integrand is not integrable at 0 (first node {:.3e})",
            grid.x_min
        ))),
    }
}

/// `G(q) = int_q^inf (r - q) g(r) dr` from node samples of `g`, with
/// `G' = -int_q^inf g` and `G'' = g`. Power-law completion at both ends.
pub fn second_antideriv(
    grid: Arc<QuadratureGrid>,
    rho: f64,
    inner: Vec<f64>,
) -> Result<LaplaceProfile> {
    second_antideriv_with(grid, rho, inner, TailCompletion::Strict)
}

pub fn second_antideriv_with(
    grid: Arc<QuadratureGrid>,
    rho: f64,
    inner: Vec<f64>,
    completion: TailCompletion,
) -> Result<LaplaceProfile> {
    let q = &grid.nodes;
    let psi0: Vec<f64> = inner.iter().zip(q).map(|(g, r)| g * r).collect();
    let psi1: Vec<f64> = psi0.iter().zip(q).map(|(g, r)| g * r).collect();
    let i0 = grid.tail_cumulative(&psi0, tail_rate(&grid, &psi0, completion)?);
    let i1 = grid.tail_cumulative(&psi1, tail_rate(&grid, &psi1, completion)?);
    let values = i1.iter().zip(&i0).zip(q).map(|((a, b), r)| a - r * b).collect();
    let v0 = i1[0] + psi1[0] / head_rate(&grid, &psi1)?;
    let d1 = i0.iter().map(|v| -v).collect();
    LaplaceProfile::new(grid, rho, v0, values, d1, inner)
}

/// `A(G)(q) = -(1 - rho) int_q^inf (r - q) G'(r) / r dr`.
pub fn op_a(g: &LaplaceProfile) -> Result<LaplaceProfile> {
    op_a_with(g, TailCompletion::Strict)
}

pub fn op_a_with(g: &LaplaceProfile, completion: TailCompletion) -> Result<LaplaceProfile> {
    let c = -(1.0 - g.rho);
    let inner = g.d1.iter().zip(g.q()).map(|(d, r)| c * d / r).collect();
    second_antideriv_with(g.grid.clone(), g.rho, inner, completion)
}

/// `B2(G, H)(q) = -2 int_q^inf (r - q) G'(r) (H(0) - H(r)) / r dr`.
pub fn op_b2(g: &LaplaceProfile, h: &LaplaceProfile) -> Result<LaplaceProfile> {
    op_b2_with(g, h, TailCompletion::Strict)
}

pub fn op_b2_with(
    g: &LaplaceProfile,
    h: &LaplaceProfile,
    completion: TailCompletion,
) -> Result<LaplaceProfile> {
    let inner = g
        .d1
        .iter()
        .zip(&h.values)
        .zip(g.q())
        .map(|((d, hv), r)| -2.0 * d * (h.v0 - hv) / r)
        .collect();
    second_antideriv_with(g.grid.clone(), g.rho, inner, completion)
}

/// `F - A(F) - B2(F, F) - eps B_W(F, F)`.
pub fn selfsim_residual(
    f: &LaplaceProfile,
    eps: f64,
    kq: &KernelQuadrature,
) -> Result<LaplaceProfile> {
    let mut r = f.sub(&op_a(f)?).sub(&op_b2(f, f)?);
    if eps != 0.0 {
        r = r.lincomb(1.0, &op_bw(f, f, kq)?, -eps);
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Arc<QuadratureGrid> {
        Arc::new(QuadratureGrid::log_spaced(1e-8, 1e6, n).unwrap())
    }

    #[test]
    fn exponential_second_antiderivative() {
        // e^{-r} needs a fine log step around r ~ 10
        let g = Arc::new(QuadratureGrid::log_spaced(1e-8, 1e3, 1200).unwrap());
        let inner = g.nodes.iter().map(|r| (-r).exp()).collect();
        let p = second_antideriv(g.clone(), 0.7, inner).unwrap();
        for (i, &q) in g.nodes.iter().enumerate() {
            assert!((p.values[i] - (-q).exp()).abs() < 1e-9, "q {q}");
            assert!((p.d1[i] + (-q).exp()).abs() < 1e-9);
        }
        assert!((p.v0 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn nondecaying_integrand_rejected() {
        let g = grid(100);
        let inner = g.nodes.iter().map(|r| 1.0 / r).collect();
        assert!(matches!(
            second_antideriv(g, 0.7, inner),
            Err(CoagError::Divergence(_))
        ));
    }

    #[test]
    fn a_of_fbar_second_derivative_at_one() {
        // grid with a node at q = 1
        let g = Arc::new(QuadratureGrid::log_spaced(1e-4, 1e4, 81).unwrap());
        let f = LaplaceProfile::fbar(g.clone(), 0.7).unwrap();
        let a = op_a(&f).unwrap();
        let i = g.nodes.iter().position(|q| (q - 1.0).abs() < 1e-12).unwrap();
        assert!((a.d2[i] - 0.03675).abs() < 1e-14);
    }

    #[test]
    fn constant_inputs_give_zero() {
        let g = grid(200);
        let c = LaplaceProfile::from_fns(g.clone(), 0.7, |_| 0.3, |_| 0.0, |_| 0.0).unwrap();
        let f = LaplaceProfile::fbar(g, 0.7).unwrap();
        assert_eq!(op_a(&c).unwrap().sup_abs(), 0.0);
        assert_eq!(op_b2(&f, &c).unwrap().sup_abs(), 0.0);
    }
}
