//! Fat-tailed self-similar profiles of the coagulation equation with kernel
//! `K = 2 + eps * W`, computed in Laplace variables by a damped contraction
//! around the explicit constant-kernel profile.
//!
//! Module layout follows the computation:
//! [`special`] exact `eps = 0` objects, [`grids`] log-spaced quadrature,
//! [`norms`] weighted sup-norms, [`kernels`] the perturbation `W` and its
//! Laplace representation kernel, [`operators`] the Laplace-side forms,
//! [`linop`] the linearized operator and its explicit inverse, [`solver`]
//! the fixed-point iteration and [`diagnostics`] moments and asymptotics.

pub mod diagnostics;
pub mod error;
pub mod grids;
pub mod kernels;
pub mod linop;
pub mod norms;
pub mod operators;
pub mod solver;
pub mod special;

pub use error::{CoagError, Result};
