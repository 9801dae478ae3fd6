//! The perturbation `W(x, y) = (x/y)^alpha + (y/x)^alpha`, its jump
//! function `phi` and the Laplace representation kernel
//! `Ker = Ker~ + W(-1) delta(xi - eta)` with
//! `W(x, y) / (x + y) = int int Ker(xi, eta) e^{-xi x - eta y}`.
//!
//! The regular part is `Ker~(xi, eta) = phi(eta / xi) / xi`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CoagError, Result};
use crate::norms::weight;

/// Boundary values of the analytic continuation `z -> W(z, 1)` on the
/// negative real axis, `W_+(-s) = W(-s + i0)` and `W_-(-s) = W(-s - i0)`.
pub trait BoundaryValues {
    fn boundary_plus(&self, s: f64) -> Complex64;

    fn boundary_minus(&self, s: f64) -> Complex64 {
        self.boundary_plus(s).conj()
    }

    /// Value of the jump function at `s = 1`, where the quotient below is 0/0.
    fn jump_at_one(&self) -> f64;
}

/// `phi(s) = (W_-(-s) - W_+(-s)) / (2 pi i (1 - s))`.
pub fn phi_plemelj<K: BoundaryValues + ?Sized>(kernel: &K, s: f64) -> f64 {
    if s == 1.0 {
        return kernel.jump_at_one();
    }
    let jump = kernel.boundary_minus(s) - kernel.boundary_plus(s);
    let den = Complex64::new(0.0, 2.0 * PI * (1.0 - s));
    (jump / den).re
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub alpha: f64,
}

impl KernelSpec {
    /// The power-law family. Kernel-only operations accept `alpha` in `(0, 1)`.
    pub fn power_law(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(CoagError::Config(format!(
                "alpha out of (0,1): {alpha}"
            )));
        }
        Ok(KernelSpec { alpha })
    }

    /// The solver works with `alpha < 1/2`.
    pub fn check_solver_range(&self) -> Result<()> {
        if self.alpha >= 0.5 {
            return Err(CoagError::Config(format!(
                "alpha out of (0,1/2): {}",
                self.alpha
            )));
        }
        Ok(())
    }

    pub fn eval_w(&self, x: f64, y: f64) -> f64 {
        let r = (x / y).powf(self.alpha);
        r + 1.0 / r
    }

    /// Leading small-argument coefficient of `W(xi, 1)`.
    pub fn c_w(&self) -> f64 {
        1.0
    }

    /// `W(-1) = 2 cos(pi alpha)`, the weight of the diagonal line.
    pub fn w_minus_one(&self) -> f64 {
        2.0 * (PI * self.alpha).cos()
    }

    pub fn delta_coeff(&self) -> f64 {
        self.w_minus_one()
    }

    /// Closed-form jump function `(sin(pi a) / pi) (s^a - s^-a) / (s - 1)`.
    pub fn phi(&self, s: f64) -> f64 {
        let a = self.alpha;
        let c = (PI * a).sin() / PI;
        let e = s - 1.0;
        if e.abs() < 1e-3 {
            // Taylor expansion around the removable point
            return c * (2.0 * a - a * e + a * (a * a + 2.0) / 3.0 * e * e
                - a * (a * a + 1.0) / 2.0 * e * e * e);
        }
        c * (s.powf(a) - s.powf(-a)) / e
    }

    /// `Ker~(xi, eta) = (sin(pi a)/pi) ((xi/eta)^a - (eta/xi)^a) / (xi - eta)`.
    pub fn ker_regular(&self, xi: f64, eta: f64) -> f64 {
        if (xi - eta).abs() < 1e-6 * (xi + eta) {
            return self.phi(eta / xi) / xi;
        }
        let a = self.alpha;
        let c = (PI * a).sin() / PI;
        let r = (xi / eta).powf(a);
        c * (r - 1.0 / r) / (xi - eta)
    }

    /// `Ker~` assembled from the Plemelj jump function.
    pub fn ker_from_phi(&self, xi: f64, eta: f64) -> f64 {
        phi_plemelj(self, eta / xi) / xi
    }

    /// Fitted constant in `|phi(s)| <= C omega_{-a, 1-a}(s)` over samples.
    pub fn phi_decay_constant(&self, s_samples: &[f64]) -> f64 {
        s_samples
            .iter()
            .map(|&s| self.phi(s).abs() / weight(-self.alpha, 1.0 - self.alpha, s))
            .fold(0.0, f64::max)
    }
}

impl BoundaryValues for KernelSpec {
    fn boundary_plus(&self, s: f64) -> Complex64 {
        let a = self.alpha;
        Complex64::from_polar(s.powf(a), PI * a) + Complex64::from_polar(s.powf(-a), -PI * a)
    }

    fn jump_at_one(&self) -> f64 {
        2.0 * self.alpha * (PI * self.alpha).sin() / PI
    }
}

/// Tensor trapezoid rule in log coordinates for integrals against the
/// regular kernel part. Node ratios `x_j / x_i` depend only on `j - i`,
/// so `phi` is tabulated once.
#[derive(Debug, Clone)]
pub struct KernelQuadrature {
    pub x: Vec<f64>,
    pub h: f64,
    /// Row-major `Ker~(x_i, x_j) x_i x_j h^2`.
    pub kw: Vec<f64>,
    /// One-dimensional weights `x_j h` for the diagonal line.
    pub dw: Vec<f64>,
    pub w_minus_one: f64,
}

impl KernelQuadrature {
    pub const DEFAULT_X_MIN: f64 = 1e-40;
    pub const DEFAULT_X_MAX: f64 = 1e20;
    pub const DEFAULT_H: f64 = 0.25;

    pub fn new(spec: &KernelSpec) -> Self {
        Self::with_range(spec, Self::DEFAULT_X_MIN, Self::DEFAULT_X_MAX, Self::DEFAULT_H)
    }

    pub fn with_range(spec: &KernelSpec, x_min: f64, x_max: f64, h: f64) -> Self {
        let u0 = x_min.ln();
        let n = ((x_max.ln() - u0) / h).round() as usize + 1;
        let x: Vec<f64> = (0..n).map(|i| (u0 + i as f64 * h).exp()).collect();
        // phi at ratio e^{(j - i) h}, index j - i + n - 1
        let phis: Vec<f64> = (0..2 * n - 1)
            .map(|k| spec.phi(((k as f64 - (n - 1) as f64) * h).exp()))
            .collect();
        let mut kw = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                kw[i * n + j] = phis[j + n - 1 - i] * x[j] * h * h;
            }
        }
        let dw = x.iter().map(|v| v * h).collect();
        KernelQuadrature {
            x,
            h,
            kw,
            dw,
            w_minus_one: spec.w_minus_one(),
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// `int int Ker(xi, eta) a(xi) b(eta)` for node samples `a`, `b`,
    /// the diagonal line handled in one dimension.
    pub fn pair(&self, a: &[f64], b: &[f64]) -> f64 {
        let n = self.len();
        let mut reg = 0.0;
        for i in 0..n {
            if a[i] == 0.0 {
                continue;
            }
            let row = &self.kw[i * n..(i + 1) * n];
            let s: f64 = row.iter().zip(b).map(|(k, v)| k * v).sum();
            reg += a[i] * s;
        }
        let diag: f64 = (0..n).map(|i| a[i] * b[i] * self.dw[i]).sum();
        reg + self.w_minus_one * diag
    }

    /// `sum_pairs (a_k, b_k)` of [`Self::pair`] sharing one pass over the matrix.
    pub fn pair2(&self, a1: &[f64], b1: &[f64], a2: &[f64], b2: &[f64]) -> f64 {
        let n = self.len();
        let mut reg = 0.0;
        for i in 0..n {
            let row = &self.kw[i * n..(i + 1) * n];
            let mut s1 = 0.0;
            let mut s2 = 0.0;
            for j in 0..n {
                s1 += row[j] * b1[j];
                s2 += row[j] * b2[j];
            }
            reg += a1[i] * s1 + a2[i] * s2;
        }
        let diag: f64 = (0..n)
            .map(|i| (a1[i] * b1[i] + a2[i] * b2[i]) * self.dw[i])
            .sum();
        reg + self.w_minus_one * diag
    }
}

/// Residual of `W(x,y)/(x+y) = int int Ker e^{-xi x - eta y}`.
pub fn verify_laplace_identity(
    x: f64,
    y: f64,
    spec: &KernelSpec,
    quad: &KernelQuadrature,
) -> Result<f64> {
    if !(x > 0.0 && y > 0.0) {
        return Err(CoagError::Domain(format!("need x, y > 0, got ({x}, {y})")));
    }
    let lo = quad.x[0];
    let hi = *quad.x.last().unwrap();
    if hi * x.min(y) < 50.0 || lo * x.max(y) > 1e-14 {
        return Err(CoagError::Coverage(format!(
            "kernel quadrature [{lo:e}, {hi:e}] does not resolve ({x}, {y})"
        )));
    }
    let ex: Vec<f64> = quad.x.iter().map(|xi| (-xi * x).exp()).collect();
    let ey: Vec<f64> = quad.x.iter().map(|eta| (-eta * y).exp()).collect();
    let n = quad.len();
    let mut reg = 0.0;
    for i in 0..n {
        if ex[i] == 0.0 {
            continue;
        }
        let row = &quad.kw[i * n..(i + 1) * n];
        let s: f64 = row.iter().zip(&ey).map(|(k, v)| k * v).sum();
        reg += ex[i] * s;
    }
    let rhs = reg + spec.w_minus_one() / (x + y);
    Ok(rhs - spec.eval_w(x, y) / (x + y))
}

/// Exponents of the weighted kernel integral
/// `int int |Ker| xi^{-a1} (xi+1)^{-b1} eta^{-a2} (eta+1)^{-b2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KerExponents {
    pub a1: f64,
    pub b1: f64,
    pub a2: f64,
    pub b2: f64,
}

impl KerExponents {
    pub fn check(&self, alpha: f64) -> Result<()> {
        let KerExponents { a1, b1, a2, b2 } = *self;
        if !(a1 + a2 < 1.0) {
            return Err(CoagError::Hypothesis(format!("a1 + a2 = {} >= 1", a1 + a2)));
        }
        if !(a1 + b1 > alpha && a2 + b2 > alpha) {
            return Err(CoagError::Hypothesis(format!(
                "a_k + b_k must exceed alpha = {alpha}"
            )));
        }
        if !(a1 + b1 + a2 + b2 > 1.0) {
            return Err(CoagError::Hypothesis(format!(
                "a1 + b1 + a2 + b2 = {} <= 1",
                a1 + b1 + a2 + b2
            )));
        }
        Ok(())
    }

    /// Slowest algebraic decay rate (in `u = ln xi`) over the corners of
    /// the quarter plane.
    fn slowest_rate(&self, alpha: f64) -> f64 {
        let KerExponents { a1, b1, a2, b2 } = *self;
        [
            a1 + b1 - alpha,
            a2 + b2 - alpha,
            1.0 - a1 - a2,
            1.0 - alpha - a1,
            1.0 - alpha - a2,
            a1 + b1 + a2 + b2 - 1.0,
        ]
        .into_iter()
        .fold(f64::INFINITY, f64::min)
    }
}

/// Numerical value of the weighted kernel integral on a log tensor grid
/// of step `h`. Finiteness and stability under `h -> h/2` is the check.
pub fn ker_integral_bounds_probe(spec: &KernelSpec, e: &KerExponents, h: f64) -> Result<f64> {
    e.check(spec.alpha)?;
    let rate = e.slowest_rate(spec.alpha);
    if !(rate > 0.0) {
        return Err(CoagError::Hypothesis(format!(
            "integrand not decaying at some corner (rate {rate})"
        )));
    }
    let half = (40.0 / rate).min(700.0);
    let n = (2.0 * half / h).round() as usize + 1;
    let u: Vec<f64> = (0..n).map(|i| -half + i as f64 * h).collect();
    let x: Vec<f64> = u.iter().map(|v| v.exp()).collect();
    let g1: Vec<f64> = x
        .iter()
        .map(|&v| v.powf(-e.a1) * (1.0 + v).powf(-e.b1) * v)
        .collect();
    let g2: Vec<f64> = x
        .iter()
        .map(|&v| v.powf(-e.a2) * (1.0 + v).powf(-e.b2) * v)
        .collect();
    let phis: Vec<f64> = (0..2 * n - 1)
        .map(|k| spec.phi(((k as f64 - (n - 1) as f64) * h).exp()).abs())
        .collect();
    let mut reg = 0.0;
    for i in 0..n {
        let mut s = 0.0;
        for j in 0..n {
            // |Ker~(x_i, x_j)| x_i x_j = |phi(x_j / x_i)| x_j
            s += phis[j + n - 1 - i] * g2[j];
        }
        reg += g1[i] / x[i] * s;
    }
    reg *= h * h;
    let diag: f64 = (0..n).map(|i| g1[i] * g2[i] / x[i]).sum::<f64>() * h;
    Ok(reg + spec.w_minus_one().abs() * diag)
}
