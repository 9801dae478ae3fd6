//! Weighted sup-norms of Laplace-side functions,
//! `|G|_{k,mu,chi} = sup_q (1+q)^{chi+mu+rho} q^{k-rho-mu} |d^k G(q)|`.

use serde::{Deserialize, Serialize};

use crate::error::{CoagError, Result};
use crate::grids::log_slope;
use crate::operators::LaplaceProfile;

/// `omega_{a,b}(q) = q^a` for `q <= 1`, `q^{-b}` for `q >= 1`.
pub fn weight(a: f64, b: f64, q: f64) -> f64 {
    if q <= 1.0 {
        q.powf(a)
    } else {
        q.powf(-b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormSpec {
    pub k: u8,
    pub mu: f64,
    pub chi: f64,
    pub rho: f64,
}

impl NormSpec {
    pub fn new(k: u8, mu: f64, chi: f64, rho: f64) -> Result<Self> {
        if k > 2 {
            return Err(CoagError::Domain(format!("derivative order {k} > 2")));
        }
        if !(chi > 0.0) && !(k == 0 && chi == 0.0) {
            return Err(CoagError::Domain(format!("chi must be positive, got {chi}")));
        }
        Ok(NormSpec { k, mu, chi, rho })
    }

    fn factor(&self, q: f64) -> f64 {
        (1.0 + q).powf(self.chi + self.mu + self.rho) * q.powf(self.k as f64 - self.rho - self.mu)
    }
}

/// `mu* = min(rho, 1 - rho)`.
pub fn mu_star(rho: f64) -> f64 {
    rho.min(1.0 - rho)
}

/// Default decay parameter, the midpoint of `(max(alpha, 1 - rho), 1/2)`.
pub fn default_theta(rho: f64, alpha: f64) -> f64 {
    0.5 * (alpha.max(1.0 - rho) + 0.5)
}

pub fn default_mu(rho: f64) -> f64 {
    0.5 * mu_star(rho)
}

/// Admissible window for theta; empty when `max(alpha, 1 - rho) >= 1/2`.
pub fn theta_window(rho: f64, alpha: f64) -> (f64, f64) {
    (alpha.max(1.0 - rho), 0.5)
}

/// Slope past which an end of the weighted sequence is read as growing.
const GROWTH_SLOPE: f64 = 0.02;

/// Weighted sup over the grid, plus the end limits implied by the local
/// power law of the weighted samples: a growing end makes the norm infinite.
pub fn seminorm(g: &LaplaceProfile, spec: &NormSpec) -> Result<f64> {
    weighted_sup(g, spec, true)
}

/// Weighted sup over the grid nodes only, the norm of the truncated problem.
pub fn seminorm_grid(g: &LaplaceProfile, spec: &NormSpec) -> Result<f64> {
    weighted_sup(g, spec, false)
}

fn weighted_sup(g: &LaplaceProfile, spec: &NormSpec, ends: bool) -> Result<f64> {
    let grid = &g.grid;
    let data = match spec.k {
        0 => &g.values,
        1 => &g.d1,
        2 => &g.d2,
        k => return Err(CoagError::Domain(format!("missing derivative of order {k}"))),
    };
    let w: Vec<f64> = grid
        .nodes
        .iter()
        .zip(data)
        .map(|(&q, &v)| spec.factor(q) * v.abs())
        .collect();
    let mut sup = w.iter().cloned().fold(0.0, f64::max);
    if spec.k == 0 && spec.mu + spec.rho == 0.0 {
        // the base norm includes q = 0 itself
        sup = sup.max(g.v0.abs());
    }
    if sup == 0.0 || !ends {
        return Ok(sup);
    }
    let n = w.len();
    let h3 = 3.0 * grid.h();
    let floor = 1e-12 * sup;
    if w[0] > floor {
        if let Some(s) = log_slope(w[0], w[3], h3) {
            if s < -GROWTH_SLOPE {
                return Ok(f64::INFINITY);
            }
        }
    }
    if w[n - 1] > floor {
        if let Some(s) = log_slope(w[n - 4], w[n - 1], h3) {
            if s > GROWTH_SLOPE {
                return Ok(f64::INFINITY);
            }
        }
    }
    Ok(sup)
}

/// `|G|_{0,-rho,chi} + sum_{j=1..k} |G|_{j,mu,chi}`.
pub fn full_norm(g: &LaplaceProfile, k: u8, mu: f64, chi: f64) -> Result<f64> {
    full(g, k, mu, chi, seminorm)
}

/// [`full_norm`] from [`seminorm_grid`].
pub fn full_norm_grid(g: &LaplaceProfile, k: u8, mu: f64, chi: f64) -> Result<f64> {
    full(g, k, mu, chi, seminorm_grid)
}

fn full(
    g: &LaplaceProfile,
    k: u8,
    mu: f64,
    chi: f64,
    semi: fn(&LaplaceProfile, &NormSpec) -> Result<f64>,
) -> Result<f64> {
    if k > 2 {
        return Err(CoagError::Domain(format!("derivative order {k} > 2")));
    }
    let rho = g.rho;
    let mut total = semi(g, &NormSpec::new(0, -rho, chi, rho)?)?;
    for j in 1..=k {
        total += semi(g, &NormSpec::new(j, mu, chi, rho)?)?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn weight_examples() {
        assert_relative_eq!(weight(2.0, 3.0, 0.5), 0.25);
        assert_relative_eq!(weight(2.0, 3.0, 2.0), 0.125);
        assert_eq!(weight(2.0, 3.0, 1.0), 1.0);
        for &q in &[0.3, 1.0, 4.0] {
            assert_relative_eq!(
                weight(0.5, 1.5, q) * weight(-0.2, 0.4, q),
                weight(0.3, 1.9, q),
                max_relative = 1e-14
            );
        }
    }

    #[test]
    fn theta_defaults() {
        let t = default_theta(0.7, 1.0 / 3.0);
        assert!(t > 1.0 / 3.0 && t < 0.5);
        assert_relative_eq!(default_mu(0.7), 0.15, max_relative = 1e-14);
    }
}
