//! Forms built on the perturbation kernel `W` through its representation
//! `W(x,y)/(x+y) = int int Ker(xi, eta) e^{-xi x - eta y}`.
//!
//! Every double integral is rescaled by the outer variable (`xi = r x`)
//! so one fixed log-spaced kernel quadrature serves all `r`.

use rayon::prelude::*;

use crate::error::{CoagError, Result};
use crate::grids::GriddedFunction;
use crate::kernels::{KernelQuadrature, KernelSpec};

use super::forms::{second_antideriv_with, TailCompletion};
use super::profile::LaplaceProfile;

/// `N[G, H](r)` at each `r`.
///
/// `N = (1/r) int int Ker(xi, eta) [G''(r + xi)(H(eta) - H(eta + r))
///   + G'(r + xi)(H'(eta) - H'(eta + r))]`, the delta line included.
pub fn op_n(
    g: &LaplaceProfile,
    h: &LaplaceProfile,
    kq: &KernelQuadrature,
    r: &[f64],
) -> Result<Vec<f64>> {
    if let Some(&bad) = r.iter().find(|&&r| !(r > 0.0)) {
        return Err(CoagError::Domain(format!("N needs r > 0, got {bad}")));
    }
    let g2 = g.evaluator(2);
    let g1 = g.evaluator(1);
    let h0 = h.evaluator(0);
    let h1 = h.evaluator(1);
    let out = r
        .par_iter()
        .map(|&r| {
            let n = kq.len();
            let mut a = Vec::with_capacity(n);
            let mut b = Vec::with_capacity(n);
            let mut c = Vec::with_capacity(n);
            let mut d = Vec::with_capacity(n);
            for &x in &kq.x {
                let near = r * x;
                let far = r * (1.0 + x);
                a.push(g2.eval(far));
                c.push(g1.eval(far));
                b.push(h0.eval(near) - h0.eval(far));
                d.push(h1.eval(near) - h1.eval(far));
            }
            kq.pair2(&a, &b, &c, &d)
        })
        .collect();
    Ok(out)
}

/// `B_W(G, H)(q) = int_q^inf (r - q) N[G, H](r) dr`.
pub fn op_bw(
    g: &LaplaceProfile,
    h: &LaplaceProfile,
    kq: &KernelQuadrature,
) -> Result<LaplaceProfile> {
    op_bw_with(g, h, kq, TailCompletion::Strict)
}

pub fn op_bw_with(
    g: &LaplaceProfile,
    h: &LaplaceProfile,
    kq: &KernelQuadrature,
    completion: TailCompletion,
) -> Result<LaplaceProfile> {
    let n = op_n(g, h, kq, g.q())?;
    second_antideriv_with(g.grid.clone(), g.rho, n, completion)
}

/// Laplace-side perturbation functional
/// `P(q) = int int Ker(xi, eta) [F'(xi + q) - F'(xi)][F(eta) - F(eta + q)]`.
pub fn op_p(f: &LaplaceProfile, kq: &KernelQuadrature, q: &[f64]) -> Result<Vec<f64>> {
    if let Some(&bad) = q.iter().find(|&&q| !(q >= 0.0)) {
        return Err(CoagError::Domain(format!("P needs q >= 0, got {bad}")));
    }
    let f0 = f.evaluator(0);
    let f1 = f.evaluator(1);
    let out = q
        .par_iter()
        .map(|&q| {
            if q == 0.0 {
                return 0.0;
            }
            let (a, b): (Vec<f64>, Vec<f64>) = kq
                .x
                .iter()
                .map(|&x| {
                    let near = q * x;
                    let far = q * (1.0 + x);
                    (f1.eval(far) - f1.eval(near), f0.eval(near) - f0.eval(far))
                })
                .unzip();
            q * kq.pair(&a, &b)
        })
        .collect();
    Ok(out)
}

/// Physical-space `P(f,f)(q) = 1/2 int int W(x,y) f(x) f(y) (1 - e^{-qx})(1 - e^{-qy})`.
///
/// For the power-law `W` the double integral factors into
/// `g_alpha(q) g_{-alpha}(q)` with `g_s(q) = int x^s f(x) (1 - e^{-qx}) dx`,
/// each evaluated on the density grid with its declared end laws.
pub fn op_p_physical(f: &GriddedFunction, spec: &KernelSpec, q: f64) -> Result<f64> {
    if !(q >= 0.0) {
        return Err(CoagError::Domain(format!("P needs q >= 0, got {q}")));
    }
    if q == 0.0 {
        return Ok(0.0);
    }
    let moment = |s: f64| -> Result<f64> {
        f.reweighted(|x| x.powf(s) * -(-q * x).exp_m1(), s + 1.0, -s)?
            .integrate()
    };
    Ok(moment(spec.alpha)? * moment(-spec.alpha)?)
}
