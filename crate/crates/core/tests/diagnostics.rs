//! Diagnostics that are reported rather than asserted against a tolerance.

use std::f64::consts::FRAC_PI_2;

use nalgebra::DMatrix;
use num_complex::Complex64;

use dicke_squeeze::hamiltonian::HamiltonianCoefficients;
use dicke_squeeze::open_dynamics::propagate_pure;
use dicke_squeeze::{build_collective_ops, css_state, StateVector};

fn expect(state: &StateVector, op: &DMatrix<Complex64>) -> f64 {
    state.expect(op).re
}

/// Relative error of the Kubo (second-order cumulant) factorization of the
/// third moments entering the moment equations, on the exact N = 6 state.
#[test]
fn third_moment_factorization_error_for_six_spins() {
    let ops = build_collective_ops(3.0).unwrap();
    let k = HamiltonianCoefficients { chi_tilde: 1.0, tanh2r: 1.0 / 3.0, omega_tilde: 0.0 };
    let css = css_state(3.0, FRAC_PI_2, 0.0).unwrap();
    let ops3 = [(&ops.sx, &ops.sy, &ops.sz, "Sx Sy Sz"), (&ops.sx, &ops.sy, &ops.sy, "Sx Sy Sy"), (&ops.sx, &ops.sz, &ops.sz, "Sx Sz Sz")];
    for t in [0.02, 0.05, 0.1] {
        let psi = propagate_pure(&css, &k, t);
        for (a, b, c, label) in ops3 {
            // Fully symmetrized products keep every term real and ordering-free.
            let sym = |x: &DMatrix<Complex64>, y: &DMatrix<Complex64>| (x * y + y * x) * Complex64::new(0.5, 0.0);
            let abc = (a * b * c + a * c * b + b * a * c + b * c * a + c * a * b + c * b * a) * Complex64::new(1.0 / 6.0, 0.0);
            let exact = expect(&psi, &abc);
            let (ea, eb, ec) = (expect(&psi, a), expect(&psi, b), expect(&psi, c));
            let kubo = ea * expect(&psi, &sym(b, c)) + eb * expect(&psi, &sym(c, a)) + ec * expect(&psi, &sym(a, b)) - 2.0 * ea * eb * ec;
            let rel = (exact - kubo).abs() / exact.abs().max(1e-12);
            eprintln!("N = 6, chi t = {t}: <{label}> exact {exact:.6}, factorized {kubo:.6}, relative error {rel:.3e}");
            assert!(rel.is_finite());
        }
    }
}
