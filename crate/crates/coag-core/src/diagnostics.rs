//! Moments, kappa, the kernel averages `beta_W` and `Phi`, tail
//! normalization and boundary-layer predictions for computed profiles.

use serde::{Deserialize, Serialize};

use crate::error::{CoagError, Result};
use crate::grids::{GriddedFunction, QuadratureGrid};
use crate::kernels::KernelSpec;
use crate::norms::full_norm_grid;
use crate::operators::LaplaceProfile;
use crate::special::{gamma_fn, upper_incomplete_gamma};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moment {
    pub gamma: f64,
    pub value: f64,
    /// Negative orders are computed by the same quadrature but lie outside
    /// the range where the representation is established.
    pub extension: bool,
}

/// `m_gamma = -(1 / Gamma(1 - gamma)) int_0^inf xi^{-gamma} F'(xi) dxi`.
pub fn moments(f: &LaplaceProfile, gamma: f64) -> Result<Moment> {
    let rho = f.rho;
    if !(gamma.abs() < rho) {
        return Err(CoagError::Divergence(format!(
            "moment of order {gamma} needs |gamma| < rho = {rho}"
        )));
    }
    if gamma == 0.0 {
        return Ok(Moment { gamma, value: f.v0, extension: false });
    }
    // F' ~ q^{rho-1} (c1 + c2 q^rho) at 0 and q^{-rho-1} (c1 + c2 q^{-rho}) at infinity
    let grid = QuadratureGrid::clone(&f.grid)
        .with_exponents(Some(rho - 1.0 - gamma), Some(rho + 1.0 + gamma))
        .with_corrections(Some(rho), Some(rho));
    let values = f
        .q()
        .iter()
        .zip(&f.d1)
        .map(|(&x, &d)| x.powf(-gamma) * d)
        .collect();
    let integral = GriddedFunction::new(grid.into(), values)?.integrate()?;
    Ok(Moment {
        gamma,
        value: -integral / gamma_fn(1.0 - gamma)?,
        extension: gamma < 0.0,
    })
}

/// `kappa = 2 (F(0) - rho)`.
pub fn kappa(f: &LaplaceProfile) -> f64 {
    2.0 * (f.v0 - f.rho)
}

/// `beta_W(x) = int W(x, z) f(z) dz`, split into the two power moments of `f`.
pub fn beta_w(x: f64, f: &GriddedFunction, spec: &KernelSpec) -> Result<f64> {
    check_x(x)?;
    let a = spec.alpha;
    Ok(x.powf(a) * f.power_moment(-a)? + x.powf(-a) * f.power_moment(a)?)
}

/// `beta_W` through the homogeneity rewrite `int W(x / z, 1) f(z) dz`,
/// one pointwise quadrature.
pub fn beta_w_homogeneous(x: f64, f: &GriddedFunction, spec: &KernelSpec) -> Result<f64> {
    check_x(x)?;
    let a = spec.alpha;
    // leading end laws: (x/z)^a dominates at 0, (z/x)^a at infinity
    f.reweighted(|z| spec.eval_w(x / z, 1.0), -a, -a)?.integrate()
}

/// `Phi(x) = eps int_x^inf beta_W(y) e^{-y} / y dy`
/// `= eps [m_{-a} Gamma(a, x) + m_a Gamma(-a, x)]`.
pub fn phi_big(x: f64, f: &GriddedFunction, spec: &KernelSpec, eps: f64) -> Result<f64> {
    check_x(x)?;
    let a = spec.alpha;
    Ok(eps
        * (f.power_moment(-a)? * upper_incomplete_gamma(a, x)?
            + f.power_moment(a)? * upper_incomplete_gamma(-a, x)?))
}

/// [`beta_w`] for a profile known only through its transform, the two
/// power moments taken from [`moments`].
pub fn beta_w_laplace(x: f64, f: &LaplaceProfile, spec: &KernelSpec) -> Result<f64> {
    check_x(x)?;
    let a = spec.alpha;
    Ok(x.powf(a) * moments(f, -a)?.value + x.powf(-a) * moments(f, a)?.value)
}

/// [`phi_big`] from the transform.
pub fn phi_big_laplace(x: f64, f: &LaplaceProfile, spec: &KernelSpec, eps: f64) -> Result<f64> {
    check_x(x)?;
    let a = spec.alpha;
    Ok(eps
        * (moments(f, -a)?.value * upper_incomplete_gamma(a, x)?
            + moments(f, a)?.value * upper_incomplete_gamma(-a, x)?))
}

fn check_x(x: f64) -> Result<()> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(CoagError::Domain(format!("x must be positive, got {x}")));
    }
    Ok(())
}

/// Largest relative spread accepted in the tail fit.
const FIT_SPREAD: f64 = 0.1;

/// Fitted limit of `q^{1-rho} (-F'(q))` over the first grid decade.
pub fn tail_normalization_check(f: &LaplaceProfile) -> Result<f64> {
    let q0 = f.grid.x_min;
    let c: Vec<f64> = f
        .q()
        .iter()
        .zip(&f.d1)
        .take_while(|(q, _)| **q <= 10.0 * q0 * (1.0 + 1e-12))
        .map(|(q, d)| -d * q.powf(1.0 - f.rho))
        .collect();
    if c.len() < 3 {
        return Err(CoagError::FitInstability("fewer than three nodes in the first decade".into()));
    }
    let n = c.len() as f64;
    let mean = c.iter().sum::<f64>() / n;
    let sd = (c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    if !(mean.abs() > 0.0) || sd / mean.abs() > FIT_SPREAD {
        return Err(CoagError::FitInstability(format!(
            "relative spread {:.3e} over the first decade",
            sd / mean.abs()
        )));
    }
    Ok(mean)
}

/// Small-x behaviour predicted for the density,
/// `f(x) ~ C x^{2 m0 - 1 - rho} exp(-(eps / alpha) m_alpha x^{-alpha})`.
/// The bounded remainder in the exponent is not modelled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryLayerPrediction {
    pub m0: f64,
    pub m_alpha: f64,
    pub exponent: f64,
    /// `eps^{1/alpha}`; absent when `eps = 0`.
    pub layer_scale: Option<f64>,
    pub epsilon: f64,
    pub alpha: f64,
}

impl BoundaryLayerPrediction {
    /// Predicted shape, up to the constant `C`.
    pub fn predictor(&self, x: f64) -> f64 {
        let power = x.powf(self.exponent);
        if self.epsilon == 0.0 {
            return power;
        }
        power * (-(self.epsilon / self.alpha) * self.m_alpha * x.powf(-self.alpha)).exp()
    }
}

pub fn boundary_layer_report(
    f: &LaplaceProfile,
    spec: &KernelSpec,
    eps: f64,
) -> Result<BoundaryLayerPrediction> {
    if !(eps >= 0.0) {
        return Err(CoagError::Domain(format!("epsilon must be nonnegative, got {eps}")));
    }
    let m0 = moments(f, 0.0)?.value;
    let m_alpha = moments(f, spec.alpha)?.value;
    Ok(BoundaryLayerPrediction {
        m0,
        m_alpha,
        exponent: 2.0 * m0 - 1.0 - f.rho,
        layer_scale: (eps > 0.0).then(|| eps.powf(1.0 / spec.alpha)),
        epsilon: eps,
        alpha: spec.alpha,
    })
}

/// `|F - Fbar|_{2,mu,theta}` over the grid nodes.
///
/// Iterates inherit a slower tail from the perturbation before the layer
/// scale is reached, so the weighted sequence may still rise at `q_max`;
/// the end-law test of [`crate::norms::seminorm`] is not applied here.
pub fn norm_distance(f: &LaplaceProfile, mu: f64, theta: f64) -> Result<f64> {
    let fbar = LaplaceProfile::fbar(f.grid.clone(), f.rho)?;
    full_norm_grid(&f.sub(&fbar), 2, mu, theta)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::special::{exact_moment, ExactProfileParams};

    fn fbar() -> LaplaceProfile {
        let g = Arc::new(QuadratureGrid::log_spaced(1e-8, 1e6, 600).unwrap());
        LaplaceProfile::fbar(g, 0.7).unwrap()
    }

    #[test]
    fn fbar_moments_match_closed_form() {
        let f = fbar();
        let p = ExactProfileParams::new(0.7).unwrap();
        for &g in &[-0.5, -0.21, 0.0, 0.21, 0.35, 0.6] {
            let m = moments(&f, g).unwrap();
            let exact = exact_moment(g, &p).unwrap();
            assert!((m.value - exact).abs() < 1e-6 * exact, "gamma {g}: {} vs {exact}", m.value);
            assert_eq!(m.extension, g < 0.0);
        }
        assert!(moments(&f, 0.7).is_err());
    }

    #[test]
    fn laplace_side_averages_match_density_side() {
        let f = fbar();
        let p = ExactProfileParams::new(0.7).unwrap();
        let dg = QuadratureGrid::log_spaced(1e-12, 1e12, 1200)
            .unwrap()
            .with_exponents(Some(-0.3), Some(1.7))
            .with_corrections(Some(0.7), Some(0.7));
        let d = GriddedFunction::from_fallible(Arc::new(dg), |x| {
            crate::special::fbar_density(x, &p)
        })
        .unwrap();
        let spec = KernelSpec::power_law(1.0 / 3.0).unwrap();
        for x in [1e-4, 1.0, 30.0] {
            let a = beta_w_laplace(x, &f, &spec).unwrap();
            let b = beta_w(x, &d, &spec).unwrap();
            assert!((a / b - 1.0).abs() < 1e-7, "{a} {b}");
            let a = phi_big_laplace(x, &f, &spec, 0.02).unwrap();
            let b = phi_big(x, &d, &spec, 0.02).unwrap();
            assert!((a / b - 1.0).abs() < 1e-7, "{a} {b}");
        }
    }

    #[test]
    fn kappa_zero_for_fbar() {
        assert_eq!(kappa(&fbar()), 0.0);
    }

    #[test]
    fn tail_fit_on_fbar() {
        let c = tail_normalization_check(&fbar()).unwrap();
        assert!((c - 0.49).abs() < 1e-4);
    }

    #[test]
    fn layer_scale_arithmetic() {
        let spec = KernelSpec::power_law(1.0 / 3.0).unwrap();
        let r = boundary_layer_report(&fbar(), &spec, 0.02).unwrap();
        assert!((r.layer_scale.unwrap() - 8e-6).abs() < 1e-15);
        let r0 = boundary_layer_report(&fbar(), &spec, 0.0).unwrap();
        assert!(r0.layer_scale.is_none());
        assert!((r0.exponent - (0.7 - 1.0)).abs() < 1e-14);
        assert_eq!(r0.predictor(0.01), 0.01f64.powf(r0.exponent));
    }
}
