//! Reference values computed independently at 30 digits and frozen here.

use std::sync::Arc;

use approx::assert_relative_eq;
use coag_core::grids::QuadratureGrid;
use coag_core::kernels::{phi_plemelj, KernelQuadrature, KernelSpec};
use coag_core::operators::{op_bw, op_p, LaplaceProfile};
use coag_core::special::{
    exact_moment, fbar_density, gamma_fn, upper_incomplete_gamma, ExactProfileParams,
};

#[test]
fn gamma_at_seven_tenths() {
    assert_relative_eq!(gamma_fn(0.7).unwrap(), 1.29805533264755778568, max_relative = 1e-14);
}

#[test]
fn closed_form_moments() {
    let cases = [
        (0.35, 0.7, 0.794021748883524),
        (0.25, 0.5, 0.640923338010212),
        (1.0 / 3.0, 0.7, 0.775511429322689),
        (-1.0 / 3.0, 0.7, 1.175988838568807),
        (-0.21, 0.7, 0.890670132420825),
        (0.21, 0.7, 0.693635973808155),
    ];
    for (g, rho, want) in cases {
        let p = ExactProfileParams::new(rho).unwrap();
        assert_relative_eq!(exact_moment(g, &p).unwrap(), want, max_relative = 1e-13);
    }
}

#[test]
fn density_at_seven_tenths() {
    let p = ExactProfileParams::new(0.7).unwrap();
    let cases = [
        (1e-3, 4.23411449580938),
        (0.5, 0.287448546101661),
        (1.0, 0.147275342472317),
        (5.0, 0.0146509746509607),
        (20.0, 0.00120747663196550),
        (100.0, 6.94566249919755e-5),
        (1e4, 2.60257241112718e-8),
    ];
    for (x, want) in cases {
        assert_relative_eq!(fbar_density(x, &p).unwrap(), want, max_relative = 1e-10);
    }
}

#[test]
fn density_at_one_half_matches_erfc_form() {
    let p = ExactProfileParams::new(0.5).unwrap();
    let cases = [
        (1e-3, 8.43797347076183),
        (0.5, 0.137363988536309),
        (1.0, 0.0683030036959746),
        (5.0, 0.00999347891277547),
        (20.0, 0.00147134300655789),
        (100.0, 1.38982805476521e-4),
    ];
    for (x, want) in cases {
        assert_relative_eq!(fbar_density(x, &p).unwrap(), want, max_relative = 1e-10);
    }
}

#[test]
fn kernel_reference_values() {
    let s = KernelSpec::power_law(1.0 / 3.0).unwrap();
    assert_relative_eq!(s.phi(2.0), 0.128520423235348, max_relative = 1e-13);
    assert_relative_eq!(s.phi(1.0), 0.183776298473931, max_relative = 1e-13);
    assert_relative_eq!(phi_plemelj(&s, 2.0), 0.128520423235348, max_relative = 1e-13);
    // homogeneity of degree -1: Ker~(2, 1) = phi(1/2) / 2 = phi(2)
    assert_relative_eq!(s.ker_regular(2.0, 1.0), 0.128520423235348, max_relative = 1e-12);
    assert_relative_eq!(s.eval_w(2.0, 1.0) / 3.0, 0.684540525292991, max_relative = 1e-14);
}

#[test]
fn incomplete_gamma_negative_order() {
    // Gamma(-a, x) = (x^{-a} e^{-x} - Gamma(1-a, x)) / a
    let (a, x) = (1.0 / 3.0, 0.3_f64);
    let want = (x.powf(-a) * (-x).exp() - upper_incomplete_gamma(1.0 - a, x).unwrap()) / a;
    assert_relative_eq!(upper_incomplete_gamma(-a, x).unwrap(), want, max_relative = 1e-12);
}

fn fbar_setup() -> (LaplaceProfile, KernelQuadrature) {
    let g = Arc::new(QuadratureGrid::log_spaced(1e-8, 1e6, 600).unwrap());
    let f = LaplaceProfile::fbar(g, 0.7).unwrap();
    let kq = KernelQuadrature::new(&KernelSpec::power_law(1.0 / 3.0).unwrap());
    (f, kq)
}

#[test]
fn perturbation_functional_of_fbar() {
    let (f, kq) = fbar_setup();
    let p = op_p(&f, &kq, &[0.1, 1.0, 10.0]).unwrap();
    let want = [0.0204245801298238, 0.169793784090144, 0.493905625276721];
    for (a, b) in p.iter().zip(want) {
        assert_relative_eq!(*a, b, max_relative = 1e-7);
    }
}

#[test]
fn perturbation_form_of_fbar() {
    let (f, kq) = fbar_setup();
    let bw = op_bw(&f, &f, &kq).unwrap();
    for (q, want) in [(0.1, 0.83513083278044), (1.0, 0.60837220970767), (10.0, 0.31203265235166)] {
        assert_relative_eq!(bw.eval(0, q), want, max_relative = 1e-6);
    }
    // at q = 0 the form equals m_alpha m_{-alpha}
    assert_relative_eq!(bw.v0, 0.911992785066025, max_relative = 1e-6);
}
