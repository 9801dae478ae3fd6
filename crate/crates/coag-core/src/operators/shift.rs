use crate::error::{CoagError, Result};

use super::profile::LaplaceProfile;

/// `G(. + tau)` resampled on the same grid.
pub fn shift(g: &LaplaceProfile, tau: f64) -> Result<LaplaceProfile> {
    if !(tau >= 0.0) {
        return Err(CoagError::Domain(format!("shift needs tau >= 0, got {tau}")));
    }
    if tau == 0.0 {
        return Ok(g.clone());
    }
    if tau >= g.grid.x_max {
        return Err(CoagError::Coverage(format!(
            "shift {tau} leaves the grid ending at {}",
            g.grid.x_max
        )));
    }
    let e: Vec<_> = (0..3).map(|k| g.evaluator(k)).collect();
    let col = |k: usize| g.q().iter().map(|&q| e[k].eval(q + tau)).collect();
    LaplaceProfile::new(g.grid.clone(), g.rho, e[0].eval(tau), col(0), col(1), col(2))
}

/// `G - G(. + 1)`, the transform of `(1 - e^{-x}) g`.
pub fn one_minus_zeta(g: &LaplaceProfile) -> Result<LaplaceProfile> {
    Ok(g.sub(&shift(g, 1.0)?))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::grids::QuadratureGrid;

    #[test]
    fn shifts_compose() {
        let g = Arc::new(QuadratureGrid::log_spaced(1e-6, 1e5, 600).unwrap());
        let f = LaplaceProfile::fbar(g, 0.7).unwrap();
        assert_eq!(shift(&f, 0.0).unwrap(), f);
        let a = shift(&shift(&f, 1.0).unwrap(), 1.0).unwrap();
        let b = shift(&f, 2.0).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-10);
        assert!(shift(&f, 1e6).is_err());
    }
}
