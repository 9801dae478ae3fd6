use std::sync::Arc;

use crate::error::{CoagError, Result};
use crate::grids::{log_slope, QuadratureGrid};
use crate::special::{fbar_laplace, fbar_laplace_deriv, ExactProfileParams};

/// Decay imposed on tail extrapolation when the fitted slope is flatter.
const MIN_TAIL_DECAY: f64 = 0.05;

/// A function of `q >= 0` sampled with its first two derivatives on a log
/// grid, plus its value at `q = 0`.
///
/// Off-grid evaluation interpolates `w_k = q^k d^k G` (with `G - G(0)` for
/// `k = 0`) and continues it by local power laws outside the grid. Past the
/// last node `G` itself is continued and forced to decay, so profiles are
/// treated as vanishing at infinity; only an exactly flat tail stays flat.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplaceProfile {
    pub grid: Arc<QuadratureGrid>,
    pub rho: f64,
    pub v0: f64,
    pub values: Vec<f64>,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
}

impl LaplaceProfile {
    pub fn new(
        grid: Arc<QuadratureGrid>,
        rho: f64,
        v0: f64,
        values: Vec<f64>,
        d1: Vec<f64>,
        d2: Vec<f64>,
    ) -> Result<Self> {
        let n = grid.len();
        if values.len() != n || d1.len() != n || d2.len() != n {
            return Err(CoagError::Domain("profile arrays do not match the grid".into()));
        }
        let finite = v0.is_finite()
            && values.iter().chain(&d1).chain(&d2).all(|v| v.is_finite());
        if !finite {
            return Err(CoagError::Divergence("non-finite profile samples".into()));
        }
        Ok(LaplaceProfile { grid, rho, v0, values, d1, d2 })
    }

    pub fn zeros(grid: Arc<QuadratureGrid>, rho: f64) -> Self {
        let n = grid.len();
        LaplaceProfile {
            grid,
            rho,
            v0: 0.0,
            values: vec![0.0; n],
            d1: vec![0.0; n],
            d2: vec![0.0; n],
        }
    }

    /// The exact constant-kernel profile `rho / (1 + q^rho)`.
    pub fn fbar(grid: Arc<QuadratureGrid>, rho: f64) -> Result<Self> {
        let p = ExactProfileParams::new(rho)?;
        let values = grid.nodes.iter().map(|&q| fbar_laplace(q, &p)).collect();
        let d1 = grid
            .nodes
            .iter()
            .map(|&q| fbar_laplace_deriv(q, 1, &p))
            .collect::<Result<Vec<_>>>()?;
        let d2 = grid
            .nodes
            .iter()
            .map(|&q| fbar_laplace_deriv(q, 2, &p))
            .collect::<Result<Vec<_>>>()?;
        Self::new(grid, rho, rho, values, d1, d2)
    }

    /// Profile from closed forms of `G`, `G'`, `G''`.
    pub fn from_fns(
        grid: Arc<QuadratureGrid>,
        rho: f64,
        g: impl Fn(f64) -> f64,
        g1: impl Fn(f64) -> f64,
        g2: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        let values = grid.nodes.iter().map(|&q| g(q)).collect();
        let d1 = grid.nodes.iter().map(|&q| g1(q)).collect();
        let d2 = grid.nodes.iter().map(|&q| g2(q)).collect();
        Self::new(grid.clone(), rho, g(0.0), values, d1, d2)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn q(&self) -> &[f64] {
        &self.grid.nodes
    }

    pub fn deriv(&self, k: u8) -> &[f64] {
        match k {
            0 => &self.values,
            1 => &self.d1,
            _ => &self.d2,
        }
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        let m = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| f(*x, *y)).collect();
        LaplaceProfile {
            grid: self.grid.clone(),
            rho: self.rho,
            v0: f(self.v0, other.v0),
            values: m(&self.values, &other.values),
            d1: m(&self.d1, &other.d1),
            d2: m(&self.d2, &other.d2),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.zip_with(self, |a, _| c * a)
    }

    /// `a * self + b * other`.
    pub fn lincomb(&self, a: f64, other: &Self, b: f64) -> Self {
        self.zip_with(other, |x, y| a * x + b * y)
    }

    /// Largest absolute difference over `q = 0` and the nodes, values only.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold((self.v0 - other.v0).abs(), f64::max)
    }

    /// Largest absolute value over `q = 0` and the nodes.
    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(self.v0.abs(), |m, v| m.max(v.abs()))
    }

    fn scaled_samples(&self, k: u8) -> Vec<f64> {
        let q = &self.grid.nodes;
        match k {
            0 => self.values.iter().map(|v| v - self.v0).collect(),
            1 => self.d1.iter().zip(q).map(|(d, q)| d * q).collect(),
            _ => self.d2.iter().zip(q).map(|(d, q)| d * q * q).collect(),
        }
    }

    /// `d^k G (x)` for `x >= 0` (`x > 0` when `k > 0`).
    pub fn eval(&self, k: u8, x: f64) -> f64 {
        self.evaluator(k).eval(x)
    }

    /// Reusable evaluator for many points.
    pub fn evaluator(&self, k: u8) -> Evaluator<'_> {
        let g = &*self.grid;
        let n = g.len();
        let w = self.scaled_samples(k);
        let h3 = 3.0 * g.h();
        let head = log_slope(w[0], w[3], h3).unwrap_or(0.0);
        let tail_src: &[f64] = if k == 0 { &self.values } else { &w };
        let flat = k == 0 && self.d1[n - 1] == 0.0 && self.values[n - 4] == self.values[n - 1];
        let tail = if flat {
            0.0
        } else {
            log_slope(tail_src[n - 4], tail_src[n - 1], h3)
                .unwrap_or(-0.5)
                .min(-MIN_TAIL_DECAY)
        };
        Evaluator {
            p: self,
            k,
            w,
            head,
            tail,
        }
    }
}

/// Off-grid evaluation state for one derivative order.
pub struct Evaluator<'a> {
    p: &'a LaplaceProfile,
    k: u8,
    w: Vec<f64>,
    head: f64,
    tail: f64,
}

impl Evaluator<'_> {
    pub fn eval(&self, x: f64) -> f64 {
        let p = self.p;
        let g = &*p.grid;
        let n = g.len();
        if x == 0.0 && self.k == 0 {
            return p.v0;
        }
        let u = x.ln();
        let t = (u - g.u0()) / g.h();
        let last = (n - 1) as f64;
        if t > last {
            let src = if self.k == 0 { p.values[n - 1] } else { self.w[n - 1] };
            let v = src * (self.tail * (u - g.u0() - last * g.h())).exp();
            return if self.k == 0 { v } else { v / x.powi(self.k as i32) };
        }
        let w = if t < 0.0 {
            self.w[0] * (self.head * (u - g.u0())).exp()
        } else {
            g.interpolate(&self.w, t)
        };
        match self.k {
            0 => w + p.v0,
            k => w / x.powi(k as i32),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_reproduces_fbar_on_and_off_grid() {
        let grid = Arc::new(QuadratureGrid::log_spaced(1e-8, 1e6, 600).unwrap());
        let rho = 0.7;
        let f = LaplaceProfile::fbar(grid, rho).unwrap();
        let p = ExactProfileParams::new(rho).unwrap();
        for i in 0..200 {
            let x = 10f64.powf(-14.0 + 0.14 * i as f64);
            let e0 = (f.eval(0, x) - fbar_laplace(x, &p)).abs();
            let e1 = x * (f.eval(1, x) - fbar_laplace_deriv(x, 1, &p).unwrap()).abs();
            assert!(e0 < 1e-9, "x {x} e0 {e0}");
            assert!(e1 < 1e-9, "x {x} e1 {e1}");
        }
        assert_eq!(f.eval(0, 0.0), rho);
    }
}
