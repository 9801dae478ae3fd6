//! Log-spaced grids on `(0, inf)`, power-law end completion and the
//! numerical Laplace transform of gridded densities.
//!
//! Two quadratures live on the same nodes. Whole-line integrals use the
//! trapezoid rule in `u = ln x` with an Euler-Maclaurin end correction,
//! which is exact to `O(h^4)` for power-law ends. Running integrals
//! (`int_q^inf`, `int_0^q`) need interior accuracy as well and use
//! six-point Lagrange interval weights in `u`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CoagError, Result};
use crate::operators::LaplaceProfile;
use crate::special::{lower_incomplete_gamma, upper_incomplete_gamma};

/// Stencil width of the running-integral rule.
pub const STENCIL: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureGrid {
    pub nodes: Vec<f64>,
    /// Trapezoid weights in `u = ln x`, already multiplied by the node.
    pub weights: Vec<f64>,
    pub x_min: f64,
    pub x_max: f64,
    /// Integrand `~ c x^a` below `x_min`.
    pub head_exponent: Option<f64>,
    /// Integrand `~ c x^{-b}` above `x_max`.
    pub tail_exponent: Option<f64>,
    /// Optional second end term `x^{a + d}` at the head, resp. `x^{-b - d}`
    /// at the tail, fitted together with the leading one.
    #[serde(default)]
    pub head_correction: Option<f64>,
    #[serde(default)]
    pub tail_correction: Option<f64>,
    u0: f64,
    h: f64,
    #[serde(skip)]
    interval_w: Vec<[f64; STENCIL]>,
}

impl QuadratureGrid {
    pub fn log_spaced(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        if !(x_min > 0.0 && x_max > x_min && x_max.is_finite()) {
            return Err(CoagError::Config(format!(
                "grid bounds must satisfy 0 < x_min < x_max, got [{x_min}, {x_max}]"
            )));
        }
        if n < 2 * STENCIL {
            return Err(CoagError::Config(format!(
                "grid needs at least {} nodes, got {n}",
                2 * STENCIL
            )));
        }
        let u0 = x_min.ln();
        let h = (x_max.ln() - u0) / (n - 1) as f64;
        let nodes: Vec<f64> = (0..n)
            .map(|i| {
                if i == n - 1 {
                    x_max
                } else if i == 0 {
                    x_min
                } else {
                    (u0 + i as f64 * h).exp()
                }
            })
            .collect();
        let weights = nodes
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let end = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
                end * h * x
            })
            .collect();
        let interval_w = (0..STENCIL - 1)
            .map(|off| lagrange_interval_weights(off as f64, off as f64 + 1.0))
            .collect();
        Ok(QuadratureGrid {
            nodes,
            weights,
            x_min,
            x_max,
            head_exponent: None,
            tail_exponent: None,
            head_correction: None,
            tail_correction: None,
            u0,
            h,
            interval_w,
        })
    }

    pub fn with_exponents(mut self, head: Option<f64>, tail: Option<f64>) -> Self {
        self.head_exponent = head;
        self.tail_exponent = tail;
        self
    }

    /// Steps `d` of the second end terms; see [`Self::head_correction`].
    pub fn with_corrections(mut self, head: Option<f64>, tail: Option<f64>) -> Self {
        self.head_correction = head;
        self.tail_correction = tail;
        self
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Log step.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn u0(&self) -> f64 {
        self.u0
    }

    /// Fractional node index of `x`.
    pub fn position(&self, x: f64) -> f64 {
        (x.ln() - self.u0) / self.h
    }

    fn stencil_start(&self, interval: usize) -> usize {
        interval.saturating_sub(2).min(self.len() - STENCIL)
    }

    fn interval_weights(&self, interval: usize) -> (usize, &[f64; STENCIL]) {
        let start = self.stencil_start(interval);
        (start, &self.interval_w[interval - start])
    }

    /// `int` of `psi` (sampled in `u`) over each grid interval.
    pub fn interval_integrals(&self, psi: &[f64]) -> Vec<f64> {
        (0..self.len() - 1)
            .map(|i| {
                let (start, w) = self.interval_weights(i);
                self.h * dot(w, &psi[start..start + STENCIL])
            })
            .collect()
    }

    /// `int_{u_i}^inf psi du`, with `psi ~ psi_end e^{-lambda (u - u_end)}` past the grid.
    pub fn tail_cumulative(&self, psi: &[f64], lambda: f64) -> Vec<f64> {
        let ii = self.interval_integrals(psi);
        let n = self.len();
        let mut out = vec![0.0; n];
        out[n - 1] = psi[n - 1] / lambda;
        for i in (0..n - 1).rev() {
            out[i] = out[i + 1] + ii[i];
        }
        out
    }

    /// `int_{-inf}^{u_i} psi du`, with `psi ~ psi_0 e^{lambda (u - u_0)}` before the grid.
    pub fn head_cumulative(&self, psi: &[f64], lambda: f64) -> Vec<f64> {
        let ii = self.interval_integrals(psi);
        let n = self.len();
        let mut out = vec![0.0; n];
        out[0] = psi[0] / lambda;
        for i in 1..n {
            out[i] = out[i - 1] + ii[i - 1];
        }
        out
    }

    /// `int psi du` from fractional position `t` to the last node.
    pub fn integral_from_position(&self, psi: &[f64], t: f64) -> f64 {
        let n = self.len();
        let t = t.clamp(0.0, (n - 1) as f64);
        let i = (t.floor() as usize).min(n - 2);
        let (start, _) = self.interval_weights(i);
        let local = t - start as f64;
        let w = lagrange_interval_weights(local, (i + 1 - start) as f64);
        let mut acc = self.h * dot(&w, &psi[start..start + STENCIL]);
        let ii = self.interval_integrals(psi);
        acc += ii[i + 1..].iter().sum::<f64>();
        acc
    }

    /// Six-point Lagrange interpolation of node samples `w` at fractional position `t`.
    pub fn interpolate(&self, w: &[f64], t: f64) -> f64 {
        let n = self.len();
        let i = (t.floor().max(0.0) as usize).min(n - 2);
        let start = self.stencil_start(i);
        let xs = t - start as f64;
        let mut acc = 0.0;
        for j in 0..STENCIL {
            let mut l = 1.0;
            for m in 0..STENCIL {
                if m != j {
                    l *= (xs - m as f64) / (j as f64 - m as f64);
                }
            }
            acc += l * w[start + j];
        }
        acc
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Integrals over `[a, b]` of the Lagrange basis on nodes `0..STENCIL`.
fn lagrange_interval_weights(a: f64, b: f64) -> [f64; STENCIL] {
    let mut out = [0.0; STENCIL];
    for (j, o) in out.iter_mut().enumerate() {
        // expand prod_{m != j} (x - m) / (j - m) into monomial coefficients
        let mut c = vec![1.0];
        for m in 0..STENCIL {
            if m == j {
                continue;
            }
            let d = j as f64 - m as f64;
            let mut next = vec![0.0; c.len() + 1];
            for (k, ck) in c.iter().enumerate() {
                next[k + 1] += ck / d;
                next[k] -= ck * m as f64 / d;
            }
            c = next;
        }
        *o = c
            .iter()
            .enumerate()
            .map(|(k, ck)| ck * (b.powi(k as i32 + 1) - a.powi(k as i32 + 1)) / (k as f64 + 1.0))
            .sum();
    }
    out
}

/// Node offset of the second sample in a two-term end fit.
const FIT_GAP: usize = 8;

/// Coefficients of `c1 x^e1 + c2 x^e2` through `(xa, ya)` and `(xb, yb)`.
fn fit_two_terms(e1: f64, e2: f64, xa: f64, ya: f64, xb: f64, yb: f64) -> Vec<(f64, f64)> {
    let (a11, a12, a21, a22) = (xa.powf(e1), xa.powf(e2), xb.powf(e1), xb.powf(e2));
    let det = a11 * a22 - a12 * a21;
    let c1 = (ya * a22 - a12 * yb) / det;
    let c2 = (a11 * yb - a21 * ya) / det;
    vec![(e1, c1), (e2, c2)]
}

/// Local logarithmic slope `d ln|y| / du` between two samples, if defined.
pub fn log_slope(y0: f64, y1: f64, du: f64) -> Option<f64> {
    if y0 == 0.0 || y1 == 0.0 || y0.signum() != y1.signum() {
        return None;
    }
    Some((y1.abs().ln() - y0.abs().ln()) / du)
}

/// `int_lo^hi x^a dx`; `hi` may be infinite.
pub fn power_integral(a: f64, lo: f64, hi: f64) -> Result<f64> {
    if hi.is_infinite() {
        if a >= -1.0 {
            return Err(CoagError::Divergence(format!(
                "x^{a} is not integrable at infinity"
            )));
        }
        return Ok(-lo.powf(a + 1.0) / (a + 1.0));
    }
    if lo == 0.0 {
        if a <= -1.0 {
            return Err(CoagError::Divergence(format!("x^{a} is not integrable at 0")));
        }
        return Ok(hi.powf(a + 1.0) / (a + 1.0));
    }
    if (a + 1.0).abs() < 1e-14 {
        return Ok((hi / lo).ln());
    }
    Ok((hi.powf(a + 1.0) - lo.powf(a + 1.0)) / (a + 1.0))
}

/// Weight attached to a running integral `int_q^inf w(r, q) f(r) dr`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Weight {
    One,
    RMinusQ,
    RMinusQOverR,
    InvR,
}

impl Weight {
    fn at(self, r: f64, q: f64) -> f64 {
        match self {
            Weight::One => 1.0,
            Weight::RMinusQ => r - q,
            Weight::RMinusQOverR => (r - q) / r,
            Weight::InvR => 1.0 / r,
        }
    }

    /// `int_lo^hi w(r, q) r^a dr`.
    fn power_integral(self, a: f64, q: f64, lo: f64, hi: f64) -> Result<f64> {
        Ok(match self {
            Weight::One => power_integral(a, lo, hi)?,
            Weight::InvR => power_integral(a - 1.0, lo, hi)?,
            Weight::RMinusQ => {
                let mut v = power_integral(a + 1.0, lo, hi)?;
                if q != 0.0 {
                    v -= q * power_integral(a, lo, hi)?;
                }
                v
            }
            Weight::RMinusQOverR => {
                let mut v = power_integral(a, lo, hi)?;
                if q != 0.0 {
                    v -= q * power_integral(a - 1.0, lo, hi)?;
                }
                v
            }
        })
    }
}

/// Samples of a function on a [`QuadratureGrid`], completed beyond the
/// grid by the grid's declared power laws.
#[derive(Debug, Clone, PartialEq)]
pub struct GriddedFunction {
    pub grid: Arc<QuadratureGrid>,
    pub values: Vec<f64>,
    pub head_coeff: Option<f64>,
    pub tail_coeff: Option<f64>,
}

impl GriddedFunction {
    pub fn new(grid: Arc<QuadratureGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(CoagError::Domain(format!(
                "{} values for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(CoagError::Domain(format!(
                "non-finite value at node {bad}"
            )));
        }
        Ok(GriddedFunction {
            grid,
            values,
            head_coeff: None,
            tail_coeff: None,
        })
    }

    pub fn from_fn(grid: Arc<QuadratureGrid>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.nodes.iter().map(|&x| f(x)).collect();
        Self::new(grid, values)
    }

    pub fn from_fallible(
        grid: Arc<QuadratureGrid>,
        f: impl Fn(f64) -> Result<f64>,
    ) -> Result<Self> {
        let values = grid.nodes.iter().map(|&x| f(x)).collect::<Result<Vec<_>>>()?;
        Self::new(grid, values)
    }

    pub fn with_coeffs(mut self, head: Option<f64>, tail: Option<f64>) -> Self {
        self.head_coeff = head;
        self.tail_coeff = tail;
        self
    }

    /// Head law as `(exponent, coeff)` terms, empty if undeclared.
    fn head(&self) -> Vec<(f64, f64)> {
        let g = &self.grid;
        match g.head_exponent {
            None => vec![],
            Some(a) => match (self.head_coeff, g.head_correction) {
                (Some(c), _) => vec![(a, c)],
                (None, None) => vec![(a, self.values[0] / g.x_min.powf(a))],
                (None, Some(d)) => fit_two_terms(a, a + d, g.nodes[0], self.values[0], g.nodes[FIT_GAP], self.values[FIT_GAP]),
            },
        }
    }

    /// Tail law as `(exponent, coeff)` terms with `f ~ sum c x^exponent`.
    fn tail(&self) -> Vec<(f64, f64)> {
        let g = &self.grid;
        let n = g.len();
        match g.tail_exponent {
            None => vec![],
            Some(b) => match (self.tail_coeff, g.tail_correction) {
                (Some(c), _) => vec![(-b, c)],
                (None, None) => vec![(-b, self.values[n - 1] * g.x_max.powf(b))],
                (None, Some(d)) => fit_two_terms(-b, -b - d, g.nodes[n - 1], self.values[n - 1], g.nodes[n - 1 - FIT_GAP], self.values[n - 1 - FIT_GAP]),
            },
        }
    }

    /// `w(x) f(x)` where `w ~ x^head_shift` at 0 and `w ~ x^{-tail_shift}`
    /// at infinity, end laws moved accordingly.
    pub fn reweighted(
        &self,
        w: impl Fn(f64) -> f64,
        head_shift: f64,
        tail_shift: f64,
    ) -> Result<GriddedFunction> {
        let mut grid = QuadratureGrid::clone(&self.grid);
        grid.head_exponent = grid.head_exponent.map(|a| a + head_shift);
        grid.tail_exponent = grid.tail_exponent.map(|b| b + tail_shift);
        let values = self
            .grid
            .nodes
            .iter()
            .zip(&self.values)
            .map(|(&x, &v)| w(x) * v)
            .collect();
        GriddedFunction::new(Arc::new(grid), values)
    }

    /// `int_0^inf x^s f(x) dx`.
    pub fn power_moment(&self, s: f64) -> Result<f64> {
        self.reweighted(|x| x.powf(s), s, -s)?.integrate()
    }

    /// Relative mismatch between the last node and the declared tail law.
    pub fn tail_mismatch(&self) -> Option<f64> {
        let (b, c) = (self.grid.tail_exponent?, self.tail_coeff?);
        let last = *self.values.last().unwrap();
        Some((last - c * self.grid.x_max.powf(-b)).abs() / last.abs())
    }

    /// `int_0^inf f`.
    pub fn integrate(&self) -> Result<f64> {
        self.laplace_moment(0.0, 0)
    }

    /// `int_0^inf x^k f(x) e^{-q x} dx` on the trapezoid path.
    fn laplace_moment(&self, q: f64, k: i32) -> Result<f64> {
        let g = &self.grid;
        let n = g.len();
        let kf = k as f64;
        let mut sum = 0.0;
        for i in 0..n {
            let x = g.nodes[i];
            sum += g.weights[i] * x.powi(k) * self.values[i] * (-q * x).exp();
        }
        let h = g.h();
        let x0 = g.x_min;
        let x1 = g.x_max;
        for (a, c) in self.head() {
            let s = a + kf + 1.0;
            if s <= 0.0 {
                return Err(CoagError::Divergence(format!(
                    "head exponent {a} with weight x^{k} is not integrable at 0"
                )));
            }
            sum += if q == 0.0 {
                c * x0.powf(s) / s
            } else {
                c * q.powf(-s) * lower_incomplete_gamma(s, q * x0)?
            };
            // Euler-Maclaurin end correction, d/du of the u-integrand
            sum += h * h / 12.0 * c * x0.powf(s) * (-q * x0).exp() * (s - q * x0);
        }
        for (e, c) in self.tail() {
            let s = kf + 1.0 + e;
            if q == 0.0 {
                if s >= 0.0 {
                    return Err(CoagError::Divergence(format!(
                        "tail exponent {} with weight x^{k} is not integrable at infinity",
                        -e
                    )));
                }
                sum += -c * x1.powf(s) / s;
            } else {
                sum += c * q.powf(-s) * upper_incomplete_gamma(s, q * x1)?;
            }
            sum -= h * h / 12.0 * c * x1.powf(s) * (-q * x1).exp() * (s - q * x1);
        }
        Ok(sum)
    }

    /// `int_q^inf w(r, q) f(r) dr` with the declared end completions.
    pub fn integrate_from(&self, q: f64, weight: Weight) -> Result<f64> {
        let g = &self.grid;
        if q > g.x_max {
            return Err(CoagError::Coverage(format!(
                "lower limit {q} beyond grid end {}",
                g.x_max
            )));
        }
        if q < 0.0 {
            return Err(CoagError::Domain(format!("negative lower limit {q}")));
        }
        let psi: Vec<f64> = g
            .nodes
            .iter()
            .zip(&self.values)
            .map(|(&r, &f)| r * weight.at(r, q) * f)
            .collect();
        let t = if q <= g.x_min { 0.0 } else { g.position(q) };
        let mut sum = g.integral_from_position(&psi, t);
        if q < g.x_min {
            for (a, c) in self.head() {
                sum += c * weight.power_integral(a, q, q, g.x_min)?;
            }
        }
        for (e, c) in self.tail() {
            sum += c * weight.power_integral(e, q, g.x_max, f64::INFINITY)?;
        }
        Ok(sum)
    }
}

/// Laplace transform `F(q) = int f(x) e^{-q x} dx` of a density on the
/// nodes of `q_grid`, with `F'` and `F''` from the same quadrature against
/// `-x e^{-qx}` and `x^2 e^{-qx}`.
pub fn laplace_of_density(
    f: &GriddedFunction,
    q_grid: Arc<QuadratureGrid>,
    rho: f64,
) -> Result<LaplaceProfile> {
    if let Some(a) = f.grid.head_exponent {
        if a <= -1.0 {
            return Err(CoagError::Divergence(format!(
                "head exponent {a} is not integrable"
            )));
        }
    }
    if let Some(b) = f.grid.tail_exponent {
        if b <= 1.0 {
            return Err(CoagError::Divergence(format!(
                "tail exponent {b} is not integrable"
            )));
        }
    }
    let v0 = f.integrate()?;
    let rows: Vec<(f64, f64, f64)> = q_grid
        .nodes
        .par_iter()
        .map(|&q| {
            Ok((
                f.laplace_moment(q, 0)?,
                -f.laplace_moment(q, 1)?,
                f.laplace_moment(q, 2)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let values = rows.iter().map(|r| r.0).collect();
    let d1 = rows.iter().map(|r| r.1).collect();
    let d2 = rows.iter().map(|r| r.2).collect();
    LaplaceProfile::new(q_grid, rho, v0, values, d1, d2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn interval_weights_reproduce_polynomials() {
        let w = lagrange_interval_weights(2.0, 3.0);
        // int_2^3 x^3 dx = 65/4
        let v: f64 = (0..STENCIL).map(|j| w[j] * (j as f64).powi(3)).sum();
        assert_relative_eq!(v, 65.0 / 4.0, max_relative = 1e-13);
    }

    #[test]
    fn exponential_integral() {
        let g = Arc::new(
            QuadratureGrid::log_spaced(1e-6, 50.0, 1000)
                .unwrap()
                .with_exponents(Some(0.0), None),
        );
        let f = GriddedFunction::from_fn(g, |x| (-x).exp()).unwrap();
        assert!((f.integrate().unwrap() - 1.0).abs() < 1e-8);
        assert!((f.integrate_from(0.0, Weight::RMinusQ).unwrap() - 1.0).abs() < 1e-8);
        let e2 = f.integrate_from(2.0, Weight::RMinusQ).unwrap();
        assert!((e2 - (-2.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn power_tail_completion() {
        let g = Arc::new(
            QuadratureGrid::log_spaced(1.0, 100.0, 200)
                .unwrap()
                .with_exponents(None, Some(2.5)),
        );
        let f = GriddedFunction::from_fn(g, |x| x.powf(-2.5))
            .unwrap()
            .with_coeffs(None, Some(1.0));
        let v = f.integrate_from(10.0, Weight::One).unwrap();
        assert_relative_eq!(v, 2.0 / 3.0 * 10f64.powf(-1.5), max_relative = 1e-10);
        assert!(matches!(
            f.integrate_from(200.0, Weight::One),
            Err(CoagError::Coverage(_))
        ));
    }

    #[test]
    fn zero_function() {
        let g = Arc::new(QuadratureGrid::log_spaced(1e-3, 1e3, 40).unwrap());
        let f = GriddedFunction::from_fn(g, |_| 0.0).unwrap();
        assert_eq!(f.integrate().unwrap(), 0.0);
        assert_eq!(f.integrate_from(1.0, Weight::InvR).unwrap(), 0.0);
    }

    #[test]
    fn bad_grids_rejected() {
        assert!(QuadratureGrid::log_spaced(0.0, 1.0, 50).is_err());
        assert!(QuadratureGrid::log_spaced(1.0, 0.5, 50).is_err());
        assert!(QuadratureGrid::log_spaced(1.0, 2.0, 5).is_err());
    }

    #[test]
    fn interpolation_is_exact_for_quintics_in_u() {
        let g = QuadratureGrid::log_spaced(1e-2, 1e2, 30).unwrap();
        let w: Vec<f64> = (0..30).map(|i| (i as f64).powi(5) - 3.0 * i as f64).collect();
        let t = 17.3;
        assert_relative_eq!(g.interpolate(&w, t), t.powi(5) - 3.0 * t, max_relative = 1e-12);
    }
}
