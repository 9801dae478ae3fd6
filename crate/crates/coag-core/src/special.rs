//! Exact objects of the constant kernel `K = 2` and the special functions
//! they need.
//!
//! With `s = q^rho` the Laplace profile is `F(q) = rho / (1 + s)` and the
//! desingularized transform is `Q(q) = F(0) - F(q) = rho s / (1 + s)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::gamma as sg;

use crate::error::{CoagError, Result};

/// Euler Gamma with an explicit pole check.
pub fn gamma_fn(z: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(CoagError::Domain(format!("gamma of non-finite {z}")));
    }
    if z <= 0.0 && z == z.round() {
        return Err(CoagError::Pole(z));
    }
    Ok(sg::gamma(z))
}

/// `ln |Gamma(z)|`.
pub fn ln_gamma_abs(z: f64) -> f64 {
    if z >= 0.5 {
        sg::ln_gamma(z)
    } else {
        // reflection keeps the sign out of the logarithm
        (PI / (PI * z).sin().abs()).ln() - sg::ln_gamma(1.0 - z)
    }
}

/// Reciprocal Gamma, zero at the poles.
pub fn rgamma(z: f64) -> f64 {
    if z <= 0.0 && z == z.round() {
        return 0.0;
    }
    if z > 170.0 {
        return (-sg::ln_gamma(z)).exp();
    }
    1.0 / sg::gamma(z)
}

/// Upper incomplete Gamma `Gamma(s, z)` for `z > 0` and any real `s` that
/// is not a non-positive integer. Negative orders use the downward
/// recurrence `Gamma(s, z) = (Gamma(s + 1, z) - z^s e^{-z}) / s`.
pub fn upper_incomplete_gamma(s: f64, z: f64) -> Result<f64> {
    if z <= 0.0 || !z.is_finite() {
        return Err(CoagError::Domain(format!(
            "upper incomplete gamma needs z > 0, got {z}"
        )));
    }
    if s > 0.0 {
        return Ok(sg::gamma_ur(s, z) * sg::gamma(s));
    }
    if s == s.round() {
        return Err(CoagError::Pole(s));
    }
    let steps = (-s).floor() as usize + 1;
    let mut order = s + steps as f64;
    let mut val = sg::gamma_ur(order, z) * sg::gamma(order);
    for _ in 0..steps {
        order -= 1.0;
        val = (val - z.powf(order) * (-z).exp()) / order;
    }
    Ok(val)
}

/// Lower incomplete Gamma `gamma(s, z)` for `s > 0`, `z >= 0`.
pub fn lower_incomplete_gamma(s: f64, z: f64) -> Result<f64> {
    if s <= 0.0 {
        return Err(CoagError::Domain(format!(
            "lower incomplete gamma needs s > 0, got {s}"
        )));
    }
    if z < 0.0 {
        return Err(CoagError::Domain(format!("negative argument {z}")));
    }
    if z == 0.0 {
        return Ok(0.0);
    }
    if z < 1.0 {
        // power series; the regularized form loses digits for tiny z
        let mut term = 1.0 / s;
        let mut sum = term;
        let mut n = 0.0;
        while term.abs() > 1e-17 * sum.abs() {
            n += 1.0;
            term *= -z / n * (s + n - 1.0) / (s + n);
            sum += term;
        }
        return Ok(z.powf(s) * sum);
    }
    Ok(sg::gamma_lr(s, z) * sg::gamma(s))
}

/// Parameters of the explicit constant-kernel profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactProfileParams {
    pub rho: f64,
    /// Relative accuracy demanded from the series and asymptotic routes.
    pub series_tol: f64,
    /// Below this point the small-x series is tried first.
    pub crossover_x: f64,
    /// Fall back to the spectral integral where neither expansion reaches
    /// `series_tol`. Without it such points raise [`CoagError::SeriesGap`].
    pub allow_bridge: bool,
}

impl ExactProfileParams {
    pub fn new(rho: f64) -> Result<Self> {
        let p = ExactProfileParams {
            rho,
            series_tol: 1e-12,
            crossover_x: 1.0,
            allow_bridge: true,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(CoagError::Config(format!(
                "rho out of (0,1): {}",
                self.rho
            )));
        }
        if !(self.series_tol > 0.0) || !(self.crossover_x > 0.0) {
            return Err(CoagError::Config(
                "series_tol and crossover_x must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// `F(q) = rho / (1 + q^rho)`.
pub fn fbar_laplace(q: f64, p: &ExactProfileParams) -> f64 {
    if q == 0.0 {
        return p.rho;
    }
    p.rho / (1.0 + q.powf(p.rho))
}

/// First or second derivative of [`fbar_laplace`].
pub fn fbar_laplace_deriv(q: f64, order: u8, p: &ExactProfileParams) -> Result<f64> {
    if !(q > 0.0) {
        return Err(CoagError::Domain(format!(
            "derivative of F needs q > 0, got {q}"
        )));
    }
    let rho = p.rho;
    let s = q.powf(rho);
    match order {
        1 => Ok(-rho * rho * q.powf(rho - 1.0) / ((1.0 + s) * (1.0 + s))),
        2 => Ok(rho * rho * q.powf(rho - 2.0) * ((1.0 - rho) + (1.0 + rho) * s)
            / (1.0 + s).powi(3)),
        _ => Err(CoagError::Domain(format!("derivative order {order}"))),
    }
}

/// `Q(q) = rho q^rho / (1 + q^rho)`.
pub fn qbar(q: f64, p: &ExactProfileParams) -> f64 {
    if q == 0.0 {
        return 0.0;
    }
    let s = q.powf(p.rho);
    p.rho * s / (1.0 + s)
}

/// Which evaluation route produced a density value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DensityRoute {
    Series,
    Asymptotic,
    Spectral,
}

/// Physical-space profile, `rho x^{rho-1} E_{rho,rho}(-x^rho)`.
pub fn fbar_density(x: f64, p: &ExactProfileParams) -> Result<f64> {
    fbar_density_routed(x, p).map(|(v, _)| v)
}

/// Like [`fbar_density`] but also reports the route taken.
pub fn fbar_density_routed(x: f64, p: &ExactProfileParams) -> Result<(f64, DensityRoute)> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(CoagError::Domain(format!("density needs x > 0, got {x}")));
    }
    let tries: [DensityRoute; 2] = if x <= p.crossover_x {
        [DensityRoute::Series, DensityRoute::Asymptotic]
    } else {
        [DensityRoute::Asymptotic, DensityRoute::Series]
    };
    let mut best = f64::INFINITY;
    for route in tries {
        let (v, err) = match route {
            DensityRoute::Series => density_series(x, p.rho),
            _ => density_asymptotic(x, p.rho),
        };
        if err <= p.series_tol && v.is_finite() {
            return Ok((v.max(0.0), route));
        }
        best = best.min(err);
    }
    if p.allow_bridge {
        return Ok((density_spectral(x, p.rho), DensityRoute::Spectral));
    }
    Err(CoagError::SeriesGap { x, estimate: best })
}

/// Small-x series with an a-posteriori relative error estimate covering
/// truncation and cancellation.
pub fn density_series(x: f64, rho: f64) -> (f64, f64) {
    let lx = x.ln();
    let mut sum = 0.0;
    let mut abs_sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut last = 0.0;
    for n in 1..4000 {
        let a = n as f64 * rho;
        let t = ((a - 1.0) * lx - sg::ln_gamma(a)).exp();
        let signed = if n % 2 == 1 { t } else { -t };
        sum += signed;
        abs_sum += t;
        last = t;
        if n > 2 && t < prev && t <= 1e-17 * sum.abs() {
            break;
        }
        prev = t;
    }
    let val = rho * sum;
    let err = (4.0 * f64::EPSILON * abs_sum + last) / sum.abs();
    (val, err)
}

/// Large-x expansion `rho x^{rho-1} sum_{k>=2} (-1)^{k+1} z^{-k} / Gamma(rho - rho k)`
/// with `z = x^rho`, truncated at its smallest term.
pub fn density_asymptotic(x: f64, rho: f64) -> (f64, f64) {
    let lz = rho * x.ln();
    let mut sum = 0.0;
    // truncation is judged on the envelope Gamma(1-w) z^{-k}: the sine
    // factor can be small without the series having converged
    let mut prev_env = f64::INFINITY;
    let mut err = f64::INFINITY;
    for k in 2..400 {
        let w = rho - rho * k as f64;
        let env = (sg::ln_gamma(1.0 - w) - k as f64 * lz).exp() / PI;
        if env > prev_env {
            err = prev_env;
            break;
        }
        prev_env = env;
        // sin(pi w) with the argument reduced first; integer w gives a zero term
        let frac = w - w.round();
        if frac.abs() < 1e-12 {
            continue;
        }
        let sin = (PI * frac).sin() * if (w.round() as i64) % 2 == 0 { 1.0 } else { -1.0 };
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        sum += sign * sin * env;
        if env <= 1e-17 * sum.abs() {
            err = env;
            break;
        }
    }
    let val = rho * x.powf(rho - 1.0) * sum;
    (val, err / sum.abs() + 4.0 * f64::EPSILON)
}

/// Spectral form of the density,
/// `f(x) = (rho sin(pi rho) / pi) int_0^inf e^{-r x} r^rho / (r^{2rho} + 2 r^rho cos(pi rho) + 1) dr`,
/// evaluated by the trapezoid rule in `t = ln r`, which converges
/// geometrically because the integrand is analytic in a strip.
pub fn density_spectral(x: f64, rho: f64) -> f64 {
    let strip = (PI * (1.0 - rho) / rho).min(PI / 2.0);
    let h = (2.0 * PI * strip / 46.0).min(0.1);
    let t_lo = (-x.ln()).min(0.0) - 42.0 / rho.min(1.0 - rho).max(0.5);
    let t_hi = (60.0 / x).ln();
    let n = ((t_hi - t_lo) / h).ceil() as usize;
    let c = (PI * rho).cos();
    let mut sum = 0.0;
    for i in 0..=n {
        let t = t_lo + i as f64 * h;
        let r = t.exp();
        let rr = (rho * t).exp();
        sum += (-r * x).exp() * r * rr / (rr * rr + 2.0 * rr * c + 1.0);
    }
    rho * (PI * rho).sin() / PI * sum * h
}

/// Closed-form moment `int x^gamma f(x) dx = rho Gamma(1 - g/rho) Gamma(1 + g/rho) / Gamma(1 - g)`.
pub fn exact_moment(gamma: f64, p: &ExactProfileParams) -> Result<f64> {
    let rho = p.rho;
    if !(gamma.abs() < rho) {
        return Err(CoagError::Domain(format!(
            "moment order {gamma} outside (-{rho}, {rho})"
        )));
    }
    if gamma == 0.0 {
        return Ok(rho);
    }
    let g = gamma / rho;
    Ok(rho * sg::gamma(1.0 - g) * sg::gamma(1.0 + g) / sg::gamma(1.0 - gamma))
}

/// Leading small-x coefficient of the density, `lim x^{1-rho} f(x) = rho / Gamma(rho)`.
pub fn small_x_coefficient(p: &ExactProfileParams) -> f64 {
    p.rho / sg::gamma(p.rho)
}

/// Tail coefficient `lim x^{1+rho} f(x) = rho^2 / Gamma(1 - rho)`.
pub fn tail_coefficient(p: &ExactProfileParams) -> f64 {
    p.rho * p.rho / sg::gamma(1.0 - p.rho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p(rho: f64) -> ExactProfileParams {
        ExactProfileParams::new(rho).unwrap()
    }

    #[test]
    fn gamma_reference_points() {
        assert_relative_eq!(gamma_fn(0.5).unwrap(), PI.sqrt(), max_relative = 1e-13);
        assert_relative_eq!(gamma_fn(1.0).unwrap(), 1.0, max_relative = 1e-14);
        assert_relative_eq!(gamma_fn(1.5).unwrap(), PI.sqrt() / 2.0, max_relative = 1e-13);
        assert!(matches!(gamma_fn(-2.0), Err(CoagError::Pole(_))));
        assert!(matches!(gamma_fn(0.0), Err(CoagError::Pole(_))));
    }

    #[test]
    fn fbar_values() {
        assert_eq!(fbar_laplace(0.0, &p(0.7)), 0.7);
        assert_relative_eq!(fbar_laplace(1.0, &p(0.7)), 0.35, max_relative = 1e-15);
        assert_relative_eq!(fbar_laplace(1.0, &p(0.5)), 0.25, max_relative = 1e-15);
        assert_relative_eq!(
            fbar_laplace_deriv(1.0, 1, &p(0.5)).unwrap(),
            -0.0625,
            max_relative = 1e-15
        );
        assert!(fbar_laplace_deriv(0.0, 1, &p(0.7)).is_err());
    }

    #[test]
    fn second_derivative_against_central_difference() {
        let pp = p(0.5);
        let h = 1e-5;
        let fd = (fbar_laplace_deriv(1.0 + h, 1, &pp).unwrap()
            - fbar_laplace_deriv(1.0 - h, 1, &pp).unwrap())
            / (2.0 * h);
        let an = fbar_laplace_deriv(1.0, 2, &pp).unwrap();
        assert!((fd - an).abs() < 1e-7);
    }

    #[test]
    fn small_q_derivative_limit() {
        let pp = p(0.7);
        let q: f64 = 1e-8;
        let v = q.powf(0.3) * -fbar_laplace_deriv(q, 1, &pp).unwrap();
        // 0.49 (1 - 2 q^rho) to leading order
        assert!((v - 0.49).abs() < 3e-6);
        assert!((v - 0.49 * (1.0 - 2.0 * q.powf(0.7))).abs() < 1e-10);
    }

    #[test]
    fn qbar_complements_fbar() {
        let pp = p(0.7);
        assert_eq!(qbar(0.0, &pp), 0.0);
        assert_relative_eq!(qbar(1.0, &pp), 0.35, max_relative = 1e-15);
        for i in 0..50 {
            let q = 10f64.powf(-8.0 + 0.3 * i as f64);
            assert!((qbar(q, &pp) + fbar_laplace(q, &pp) - 0.7).abs() < 1e-14);
        }
    }

    #[test]
    fn series_and_asymptotic_overlap_with_spectral() {
        for &rho in &[0.55, 0.7, 0.9] {
            for &x in &[1e-4, 0.1, 0.5, 1.0, 3.0] {
                let (s, e) = density_series(x, rho);
                assert!(e < 1e-12);
                let b = density_spectral(x, rho);
                assert_relative_eq!(s, b, max_relative = 1e-11);
            }
            for &x in &[1e3, 1e4, 1e6] {
                let (a, e) = density_asymptotic(x, rho);
                assert!(e < 1e-12, "rho {rho} x {x} err {e}");
                let b = density_spectral(x, rho);
                assert_relative_eq!(a, b, max_relative = 1e-11);
            }
        }
    }

    #[test]
    fn routed_density_agrees_with_spectral_everywhere() {
        for rho in [0.5, 0.55, 0.7, 0.9] {
            let p = ExactProfileParams::new(rho).unwrap();
            for i in 0..=64 {
                let x = 10f64.powf(-3.0 + 8.0 * i as f64 / 64.0);
                let v = fbar_density(x, &p).unwrap();
                let s = density_spectral(x, rho);
                assert!((v / s - 1.0).abs() < 1e-10, "rho {rho} x {x}: {v} vs {s}");
            }
        }
    }

    #[test]
    fn gap_is_reported_without_bridge() {
        let mut pp = p(0.7);
        pp.allow_bridge = false;
        assert!(matches!(
            fbar_density(12.0, &pp),
            Err(CoagError::SeriesGap { .. })
        ));
        pp.series_tol = 1e-4;
        assert!(fbar_density(12.0, &pp).is_ok());
    }

    #[test]
    fn moment_domain() {
        let pp = p(0.7);
        assert_relative_eq!(exact_moment(0.0, &pp).unwrap(), 0.7, max_relative = 1e-14);
        assert!(exact_moment(0.7, &pp).is_err());
        assert!(exact_moment(-0.75, &pp).is_err());
    }

    #[test]
    fn incomplete_gamma_recurrence() {
        // Gamma(s, z) + gamma(s, z) = Gamma(s)
        for &(s, z) in &[(0.3, 0.2), (1.7, 3.0), (0.5, 10.0)] {
            let tot = upper_incomplete_gamma(s, z).unwrap() + lower_incomplete_gamma(s, z).unwrap();
            assert_relative_eq!(tot, sg::gamma(s), max_relative = 1e-13);
        }
        // Gamma(-a, z) against the defining integral tail for a = 1/3, z = 2
        let a = 1.0 / 3.0;
        let z = 2.0;
        let direct = {
            let n = 200000;
            let h = 40.0 / n as f64;
            (0..n)
                .map(|i| {
                    let t = z + (i as f64 + 0.5) * h;
                    t.powf(-a - 1.0) * (-t).exp()
                })
                .sum::<f64>()
                * h
        };
        assert_relative_eq!(upper_incomplete_gamma(-a, z).unwrap(), direct, max_relative = 1e-8);
    }
}
