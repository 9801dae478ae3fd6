//! The linearization `LL(G) = G - A(G) - B2(Fbar, G) - B2(G, Fbar)` and
//! its closed-form inverse.

use crate::error::{CoagError, Result};
use crate::grids::log_slope;
use crate::operators::{op_a, op_b2, LaplaceProfile};

pub fn apply_ll(g: &LaplaceProfile) -> Result<LaplaceProfile> {
    let fbar = LaplaceProfile::fbar(g.grid.clone(), g.rho)?;
    apply_ll_with(g, &fbar)
}

/// [`apply_ll`] with a precomputed exact profile on the same grid.
pub fn apply_ll_with(g: &LaplaceProfile, fbar: &LaplaceProfile) -> Result<LaplaceProfile> {
    Ok(g
        .sub(&op_a(g)?)
        .sub(&op_b2(fbar, g)?)
        .sub(&op_b2(g, fbar)?))
}

/// `H(0) - H(r)` below this fraction of its peak at the first node counts
/// as already vanished.
const HEAD_NEGLIGIBLE: f64 = 1e-9;

/// Exponent of `H(0) - H(q)` at the first node, if it is not negligible.
fn head_exponent(h: &LaplaceProfile) -> Option<f64> {
    let d: Vec<f64> = h.values.iter().map(|v| h.v0 - v).collect();
    let peak = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if d[0].abs() <= HEAD_NEGLIGIBLE * peak {
        return None;
    }
    Some(log_slope(d[0], d[3], 3.0 * h.grid.h()).unwrap_or(0.0))
}

/// `LL^{-1}(H)` for `H` in the weighted class of order `mu`.
///
/// `G(q) = -(H(0)/rho) A(q) + B(q) int_0^q J(r) dr` with
/// `A = (2s+1)/(1+s)^2`, `B = s/(1+s)^2`, `s = q^rho` and
/// `J = H'/B - r^{rho-1} H + (2s+1) r^{-1-rho} (H(0) - H)`.
/// Derivatives come from differentiating this closed form.
pub fn apply_llinv(h: &LaplaceProfile, mu: f64, chi: f64) -> Result<LaplaceProfile> {
    let rho = h.rho;
    if !(mu > 0.0 && mu < rho.min(1.0 - rho)) {
        return Err(CoagError::Domain(format!("mu = {mu} outside (0, min(rho, 1 - rho))")));
    }
    if !(chi > 0.0 && chi < rho) {
        return Err(CoagError::Domain(format!("chi = {chi} outside (0, rho)")));
    }
    if let Some(e) = head_exponent(h) {
        if e < rho + 0.25 * mu {
            return Err(CoagError::HeadSingular(format!(
                "H(0) - H(q) ~ q^{e:.3} near 0, needs q^(rho + mu) with rho + mu = {:.3}",
                rho + mu
            )));
        }
    }
    let grid = &h.grid;
    let n = grid.len();
    let mut j = vec![0.0; n];
    let mut j1 = vec![0.0; n];
    let mut pre = Vec::with_capacity(n);
    for i in 0..n {
        let q = grid.nodes[i];
        let s = q.powf(rho);
        let t = 1.0 + s;
        let b = s / (t * t);
        let binv = t * t / s;
        let c = (2.0 * s + 1.0) / q.powf(1.0 + rho);
        let dd = h.v0 - h.values[i];
        j[i] = binv * h.d1[i] - q.powf(rho - 1.0) * h.values[i] + c * dd;

        let ds = rho * q.powf(rho - 1.0);
        let dds = rho * (rho - 1.0) * q.powf(rho - 2.0);
        let a = (2.0 * s + 1.0) / (t * t);
        let ap = -2.0 * s / t.powi(3);
        let app = (-2.0 * t + 6.0 * s) / t.powi(4);
        let bp = (1.0 - s) / t.powi(3);
        let bpp = (-t - 3.0 * (1.0 - s)) / t.powi(4);
        let binv1 = (2.0 * t * s - t * t) / (s * s) * ds;
        let c1 = (2.0 * rho * q.powf(rho - 1.0) * q.powf(1.0 + rho)
            - (2.0 * s + 1.0) * (1.0 + rho) * s)
            / q.powf(2.0 + 2.0 * rho);
        j1[i] = binv1 * h.d1[i] + binv * h.d2[i]
            - (rho - 1.0) * q.powf(rho - 2.0) * h.values[i]
            - q.powf(rho - 1.0) * h.d1[i]
            + c1 * dd
            - c * h.d1[i];
        pre.push([
            a,
            ap * ds,
            app * ds * ds + ap * dds,
            b,
            bp * ds,
            bpp * ds * ds + bp * dds,
        ]);
    }
    let psi: Vec<f64> = j.iter().zip(&grid.nodes).map(|(v, q)| v * q).collect();
    let lambda = match log_slope(psi[0], psi[3], 3.0 * grid.h()) {
        Some(s) if s > 1e-3 => s,
        // cancellation noise at the head: the head piece is negligible anyway
        _ => 1.0,
    };
    let integral = grid.head_cumulative(&psi, lambda);
    let h0 = h.v0 / rho;
    let mut values = Vec::with_capacity(n);
    let mut d1 = Vec::with_capacity(n);
    let mut d2 = Vec::with_capacity(n);
    for i in 0..n {
        let [a, a1, a2, b, b1, b2] = pre[i];
        let ii = integral[i];
        values.push(-h0 * a + b * ii);
        d1.push(-h0 * a1 + b1 * ii + b * j[i]);
        d2.push(-h0 * a2 + b2 * ii + 2.0 * b1 * j[i] + b * j1[i]);
    }
    LaplaceProfile::new(grid.clone(), rho, -h0, values, d1, d2)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::grids::QuadratureGrid;

    #[test]
    fn zero_maps_to_zero() {
        let g = Arc::new(QuadratureGrid::log_spaced(1e-8, 1e6, 200).unwrap());
        let z = LaplaceProfile::zeros(g, 0.7);
        assert_eq!(apply_ll(&z).unwrap().sup_abs(), 0.0);
        assert_eq!(apply_llinv(&z, 0.15, 0.3).unwrap().sup_abs(), 0.0);
    }

    #[test]
    fn boundary_value() {
        let g = Arc::new(QuadratureGrid::log_spaced(1e-8, 1e6, 200).unwrap());
        let h = LaplaceProfile::from_fns(g, 0.7, |q| (-q).exp(), |q| -(-q).exp(), |q| (-q).exp())
            .unwrap();
        let inv = apply_llinv(&h, 0.15, 0.3).unwrap();
        assert!((inv.v0 + 1.0 / 0.7).abs() < 1e-14);
    }

    #[test]
    fn rough_head_rejected() {
        let g = Arc::new(QuadratureGrid::log_spaced(1e-8, 1e6, 200).unwrap());
        // H(0) - H ~ q^{0.3}
        let h = LaplaceProfile::from_fns(
            g,
            0.7,
            |q| 1.0 / (1.0 + q.powf(0.3)),
            |q| -0.3 * q.powf(-0.7) / (1.0 + q.powf(0.3)).powi(2),
            |_| 0.0,
        )
        .unwrap();
        assert!(matches!(
            apply_llinv(&h, 0.15, 0.3),
            Err(CoagError::HeadSingular(_))
        ));
    }
}
