//! Effective spin Hamiltonian family, Bogoliubov spin operator and the
//! phonon-induced collective jump operator.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::dicke::{ladder_up, SpinOps};
use crate::params::{DerivedParams, Scheme};

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Coefficients of `H = −χ̃[(S² − Sz²) − tanh2r (Sx² − Sy²)] + Ω̃ Sz`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HamiltonianCoefficients {
    pub chi_tilde: f64,
    pub tanh2r: f64,
    pub omega_tilde: f64,
}

impl HamiltonianCoefficients {
    pub fn from_params(p: &DerivedParams) -> Self {
        HamiltonianCoefficients { chi_tilde: p.chi_tilde, tanh2r: p.tanh2r, omega_tilde: p.omega_tilde }
    }

    /// ⟨j,m|H|j,m⟩.
    #[inline]
    pub fn diagonal(&self, j: f64, m: f64) -> f64 {
        -self.chi_tilde * (j * (j + 1.0) - m * m) + self.omega_tilde * m
    }

    /// ⟨j,m+2|H|j,m⟩, equal to ⟨j,m|H|j,m+2⟩. Uses Sx² − Sy² = (S₊² + S₋²)/2.
    #[inline]
    pub fn second_off_diagonal(&self, j: f64, m: f64) -> f64 {
        0.5 * self.chi_tilde * self.tanh2r * ladder_up(j, m) * ladder_up(j, m + 1.0)
    }
}

#[derive(Debug, Clone)]
pub struct SpinHamiltonian {
    pub matrix: DMatrix<Complex64>,
    pub scheme: Scheme,
    pub coefficients: HamiltonianCoefficients,
}

pub fn build_spin_hamiltonian(params: &DerivedParams, ops: &SpinOps) -> SpinHamiltonian {
    let k = HamiltonianCoefficients::from_params(params);
    let sx2 = &ops.sx * &ops.sx;
    let sy2 = &ops.sy * &ops.sy;
    let sz2 = &ops.sz * &ops.sz;
    let matrix = (&ops.s2 - &sz2 - (sx2 - sy2) * re(k.tanh2r)) * re(-k.chi_tilde) + &ops.sz * re(k.omega_tilde);
    SpinHamiltonian { matrix, scheme: params.scheme, coefficients: k }
}

/// `Ξ = S₋ cosh r − S₊ sinh r`.
pub fn build_bogoliubov_operator(ops: &SpinOps, r: f64) -> DMatrix<Complex64> {
    &ops.sm * re(r.cosh()) - &ops.sp * re(r.sinh())
}

/// `Z = e^{−2r} Sx − i e^{2r} Sy`, equivalently `cosh 2r · S₋ − sinh 2r · S₊`.
pub fn build_jump_operator(ops: &SpinOps, r: f64) -> DMatrix<Complex64> {
    &ops.sx * re((-2.0 * r).exp()) - &ops.sy * Complex64::new(0.0, (2.0 * r).exp())
}

/// Real tridiagonal entries of Z on block j: `(lower, upper)` with
/// `lower = ⟨m−1|Z|m⟩ = cosh2r·√(j(j+1)−m(m−1))` and
/// `upper = ⟨m+1|Z|m⟩ = −sinh2r·√(j(j+1)−m(m+1))`.
#[inline]
pub fn jump_entries(j: f64, m: f64, r: f64) -> (f64, f64) {
    let lower = (2.0 * r).cosh() * ladder_up(j, m - 1.0);
    let upper = -(2.0 * r).sinh() * ladder_up(j, m);
    (lower, upper)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dicke::build_collective_ops;
    use crate::params::{derive, RawParams};
    use nalgebra::SymmetricEigen;

    fn max_abs(m: &DMatrix<Complex64>) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn params(scheme: Scheme) -> DerivedParams {
        derive(&RawParams::with_defaults(10).with_scheme(scheme).unwrap()).unwrap()
    }

    #[test]
    fn tat_form() {
        let p = params(Scheme::TatYz);
        let ops = build_collective_ops(5.0).unwrap();
        let h = build_spin_hamiltonian(&p, &ops);
        let sy2 = &ops.sy * &ops.sy;
        let sz2 = &ops.sz * &ops.sz;
        let target = (&ops.s2 + sy2 - sz2) * re(-std::f64::consts::FRAC_1_SQRT_2 * p.chi);
        let scale = max_abs(&target);
        assert!(max_abs(&(&h.matrix - &target)) < 1e-12 * scale);

        let ev = |m: &DMatrix<Complex64>| {
            let mut v = SymmetricEigen::new(m.map(|z| z.re)).eigenvalues.as_slice().to_vec();
            v.sort_by(f64::total_cmp);
            v
        };
        for (a, b) in ev(&h.matrix).iter().zip(ev(&target)) {
            assert!((a - b).abs() < 1e-10 * scale);
        }
    }

    #[test]
    fn oat_form() {
        let p = params(Scheme::Oat);
        let ops = build_collective_ops(2.5).unwrap();
        let h = build_spin_hamiltonian(&p, &ops);
        let target = (&ops.s2 - &ops.sz * &ops.sz) * re(-p.chi);
        assert!(max_abs(&(&h.matrix - &target)) < 1e-12 * max_abs(&target));
    }

    #[test]
    fn hermitian_and_banded_entries() {
        let mut p = params(Scheme::TatXz);
        p.omega_tilde = 0.37 * p.chi;
        let ops = build_collective_ops(3.5).unwrap();
        let h = build_spin_hamiltonian(&p, &ops);
        assert!(max_abs(&(&h.matrix - h.matrix.adjoint())) < 1e-12 * max_abs(&h.matrix));
        let k = h.coefficients;
        for a in 0..ops.dim {
            let m = ops.m(a);
            assert!((h.matrix[(a, a)].re - k.diagonal(ops.j, m)).abs() < 1e-12 * max_abs(&h.matrix));
            if a >= 2 {
                let off = k.second_off_diagonal(ops.j, m);
                assert!((h.matrix[(a - 2, a)].re - off).abs() < 1e-12 * max_abs(&h.matrix));
            }
        }
    }

    #[test]
    fn bogoliubov_limits() {
        let ops = build_collective_ops(2.0).unwrap();
        assert_eq!(build_bogoliubov_operator(&ops, 0.0), ops.sm);
        let r = 0.3;
        let neg = build_bogoliubov_operator(&ops, -r);
        let expect = &ops.sm * re(r.cosh()) + &ops.sp * re(r.sinh());
        assert!(max_abs(&(neg - expect)) < 1e-14);
    }

    #[test]
    fn bogoliubov_quadratic_form_at_tat() {
        // Ξ†Ξ = cosh2r (S² − Sz²) + Sz − sinh2r (Sx² − Sy²); the ratio of the
        // two quadratic coefficients is tanh2r = 1/3 at the TAT point.
        let r = 0.25 * 2f64.ln();
        let ops = build_collective_ops(3.0).unwrap();
        let xi = build_bogoliubov_operator(&ops, r);
        let lhs = xi.adjoint() * &xi;
        let sx2 = &ops.sx * &ops.sx;
        let sy2 = &ops.sy * &ops.sy;
        let sz2 = &ops.sz * &ops.sz;
        let rhs = (&ops.s2 - sz2) * re((2.0 * r).cosh()) + &ops.sz - (sx2 - sy2) * re((2.0 * r).sinh());
        assert!(max_abs(&(lhs - rhs)) < 1e-12);
        assert!(((2.0 * r).sinh() / (2.0 * r).cosh() - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn jump_operator_identities() {
        let ops = build_collective_ops(2.5).unwrap();
        assert!(max_abs(&(build_jump_operator(&ops, 0.0) - &ops.sm)) < 1e-15);
        let r = 0.25 * 2f64.ln();
        let z = build_jump_operator(&ops, r);
        let target = &ops.sx * re(2f64.powf(-0.5)) - &ops.sy * Complex64::new(0.0, 2f64.sqrt());
        assert!(max_abs(&(&z - target)) < 1e-14);
        for r in [-0.4, 0.1, 0.7] {
            let z = build_jump_operator(&ops, r);
            let herm = &z + z.adjoint() - &ops.sx * re(2.0 * (-2.0 * r).exp());
            assert!(max_abs(&herm) < 1e-12);
            // cosh r·Ξ − sinh r·Ξ† reproduces Z.
            let xi = build_bogoliubov_operator(&ops, r);
            let combo = &xi * re(r.cosh()) - xi.adjoint() * re(r.sinh());
            assert!(max_abs(&(&combo - &z)) < 1e-12);
            for a in 0..ops.dim {
                let (lo, up) = jump_entries(ops.j, ops.m(a), r);
                if a + 1 < ops.dim {
                    assert!((z[(a + 1, a)].re - lo).abs() < 1e-12);
                }
                if a > 0 {
                    assert!((z[(a - 1, a)].re - up).abs() < 1e-12);
                }
            }
        }
    }
}
