//! Laplace-side forms of the self-similar coagulation equation.
//!
//! Every double integral `int_q^inf int_p^inf g(r) dr dp` is evaluated as
//! `int_q^inf (r - q) g(r) dr`; the first derivative is `-int_q^inf g` and
//! the second derivative is the inner function itself.

mod forms;
mod profile;
mod shift;
mod wforms;

pub use forms::{
    op_a, op_a_with, op_b2, op_b2_with, second_antideriv, second_antideriv_with,
    selfsim_residual, TailCompletion,
};
pub use profile::LaplaceProfile;
pub use shift::{one_minus_zeta, shift};
pub use wforms::{op_bw, op_bw_with, op_n, op_p, op_p_physical};
