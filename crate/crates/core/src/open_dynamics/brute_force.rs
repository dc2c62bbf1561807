//! Full 2^N product-space Lindblad oracle for small N.

use std::ops::ControlFlow;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::dicke::{css_state, max_abs};
use crate::error::{Error, Result};
use crate::hamiltonian::HamiltonianCoefficients;
use crate::metrics::Moments;

use super::block::BlockDensityMatrix;
use super::integrator::integrate;
use super::liouvillian::Rates;
use super::{EvolveOptions, Trajectory, TrajectoryRecord};

pub const MAX_BRUTE_FORCE_SPINS: usize = 6;

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Collective and single-site operators on the product space. Bit k of a basis
/// index is spin k, with 0 meaning up.
#[derive(Debug, Clone)]
pub struct ProductSpace {
    pub n_spins: usize,
    pub dim: usize,
    pub sx: DMatrix<Complex64>,
    pub sy: DMatrix<Complex64>,
    pub sz: DMatrix<Complex64>,
    pub sp: DMatrix<Complex64>,
    pub sm: DMatrix<Complex64>,
    pub sigma_z: Vec<DMatrix<Complex64>>,
}

impl ProductSpace {
    pub fn new(n_spins: usize) -> Result<Self> {
        if n_spins == 0 || n_spins > MAX_BRUTE_FORCE_SPINS {
            return Err(Error::Resource(format!(
                "brute-force oracle supports 1 ≤ N ≤ {MAX_BRUTE_FORCE_SPINS}, got {n_spins}"
            )));
        }
        let dim = 1usize << n_spins;
        let zero = DMatrix::from_element(dim, dim, c(0.0));
        let mut sp = zero.clone();
        let mut sz = zero.clone();
        let mut sigma_z = vec![zero.clone(); n_spins];
        for x in 0..dim {
            for (k, sig) in sigma_z.iter_mut().enumerate() {
                let up = x & (1 << k) == 0;
                sig[(x, x)] = c(if up { 1.0 } else { -1.0 });
                sz[(x, x)] += c(if up { 0.5 } else { -0.5 });
                if !up {
                    // σ₊ on spin k flips down to up.
                    sp[(x ^ (1 << k), x)] += c(1.0);
                }
            }
        }
        let sm = sp.adjoint();
        let sx = (&sp + &sm) * c(0.5);
        let sy = (&sp - &sm) * Complex64::new(0.0, -0.5);
        Ok(ProductSpace { n_spins, dim, sx, sy, sz, sp, sm, sigma_z })
    }

    pub fn casimir(&self) -> DMatrix<Complex64> {
        &self.sx * &self.sx + &self.sy * &self.sy + &self.sz * &self.sz
    }

    pub fn hamiltonian(&self, k: &HamiltonianCoefficients) -> DMatrix<Complex64> {
        let sx2 = &self.sx * &self.sx;
        let sy2 = &self.sy * &self.sy;
        let sz2 = &self.sz * &self.sz;
        (self.casimir() - &sz2 - (sx2 - sy2) * c(k.tanh2r)) * c(-k.chi_tilde) + &self.sz * c(k.omega_tilde)
    }

    /// `Z = e^{−2r} Sx − i e^{2r} Sy`.
    pub fn jump(&self, r: f64) -> DMatrix<Complex64> {
        &self.sx * c((-2.0 * r).exp()) - &self.sy * Complex64::new(0.0, (2.0 * r).exp())
    }

    /// Product of identical single-spin coherent states.
    pub fn product_css(&self, theta: f64, phi: f64) -> DMatrix<Complex64> {
        let one = css_state(0.5, theta, phi).expect("spin 1/2").amplitudes;
        let psi: Vec<Complex64> = (0..self.dim)
            .map(|x| (0..self.n_spins).map(|k| one[(x >> k) & 1]).product())
            .collect();
        DMatrix::from_fn(self.dim, self.dim, |a, b| psi[a] * psi[b].conj())
    }

    pub fn moments(&self, rho: &DMatrix<Complex64>) -> Moments {
        let e = |o: &DMatrix<Complex64>| (rho * o).trace().re;
        let anti = |a: &DMatrix<Complex64>, b: &DMatrix<Complex64>| 0.5 * e(&(a * b + b * a));
        Moments {
            sx: e(&self.sx),
            sy: e(&self.sy),
            sz: e(&self.sz),
            sx2: e(&(&self.sx * &self.sx)),
            sy2: e(&(&self.sy * &self.sy)),
            sz2: e(&(&self.sz * &self.sz)),
            cyz: anti(&self.sy, &self.sz),
            cxy: anti(&self.sx, &self.sy),
            cxz: anti(&self.sx, &self.sz),
        }
    }

    /// Map a block state onto the product space, `ρ = ⊕_j ρ_j ⊗ 1_{d_j}`.
    ///
    /// Copies of each irrep are generated from an orthonormal basis of its
    /// highest-weight vectors by repeated, normalized application of S₋.
    pub fn embed(&self, rho: &BlockDensityMatrix) -> Result<DMatrix<Complex64>> {
        if rho.n_spins() != self.n_spins {
            return Err(Error::Domain("spin count mismatch".into()));
        }
        let s2 = self.casimir();
        let js: Vec<f64> = rho.layout.blocks.iter().map(|b| b.j).collect();
        let mut out = DMatrix::from_element(self.dim, self.dim, c(0.0));
        for (k, blk) in rho.layout.blocks.iter().enumerate() {
            let j = blk.j;
            let mut proj = DMatrix::<Complex64>::identity(self.dim, self.dim);
            for &jp in js.iter().filter(|&&jp| jp != j) {
                let shift = DMatrix::<Complex64>::identity(self.dim, self.dim) * c(jp * (jp + 1.0));
                proj = proj * (&s2 - shift) * c(1.0 / (j * (j + 1.0) - jp * (jp + 1.0)));
            }
            let top: Vec<usize> = (0..self.dim).filter(|&x| (self.sz[(x, x)].re - j).abs() < 1e-9).collect();
            let sub = DMatrix::from_fn(top.len(), top.len(), |a, b| proj[(top[a], top[b])]);
            let eig = SymmetricEigen::new(sub);
            let block = rho.block_matrix(k);
            for (col, &val) in eig.eigenvalues.iter().enumerate() {
                if val < 0.5 {
                    continue;
                }
                let mut v = nalgebra::DVector::from_element(self.dim, c(0.0));
                for (a, &x) in top.iter().enumerate() {
                    v[x] = eig.eigenvectors[(a, col)];
                }
                let mut kets = vec![v.clone()];
                for _ in 1..blk.dim {
                    let next = &self.sm * kets.last().expect("non-empty");
                    let norm = next.norm();
                    kets.push(next / c(norm));
                }
                for a in 0..blk.dim {
                    for b in 0..blk.dim {
                        out += &kets[a] * kets[b].adjoint() * block[(a, b)];
                    }
                }
            }
        }
        Ok(out)
    }
}

/// ½‖a − b‖₁ for Hermitian arguments.
pub fn trace_distance(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    let d = a - b;
    let h = (&d + d.adjoint()) * c(0.5);
    0.5 * SymmetricEigen::new(h).eigenvalues.iter().map(|x| x.abs()).sum::<f64>()
}

/// Right-hand side of the same master equation on the product space.
pub fn product_rhs(
    space: &ProductSpace,
    h: &DMatrix<Complex64>,
    z: &DMatrix<Complex64>,
    rates: &Rates,
    rho: &DMatrix<Complex64>,
) -> DMatrix<Complex64> {
    let mi = Complex64::new(0.0, -1.0);
    let mut d = (h * rho - rho * h) * mi;
    if rates.dephasing > 0.0 {
        // σ_z^k is diagonal, so Σ_k (σ_z^k ρ σ_z^k − ρ) acts elementwise.
        for x in 0..space.dim {
            for y in 0..space.dim {
                let agree: f64 = space.sigma_z.iter().map(|s| s[(x, x)].re * s[(y, y)].re - 1.0).sum();
                d[(x, y)] += rho[(x, y)] * (rates.dephasing * agree);
            }
        }
    }
    let mut dissipate = |a: &DMatrix<Complex64>, g: f64| {
        if g > 0.0 {
            let ad = a.adjoint();
            let ada = &ad * a;
            d += (a * rho * &ad - (&ada * rho + rho * &ada) * c(0.5)) * c(g);
        }
    };
    dissipate(z, rates.emission);
    dissipate(&z.adjoint(), rates.absorption);
    d
}

/// Evolve a product-space density matrix with the same integrator contract as
/// [`super::evolve`]. Optionally returns the final state.
pub fn brute_force_evolve(
    n_spins: usize,
    coefficients: &HamiltonianCoefficients,
    rates: &Rates,
    rho0: &DMatrix<Complex64>,
    t_grid: &[f64],
    opts: &EvolveOptions,
) -> Result<(Trajectory, Vec<DMatrix<Complex64>>)> {
    let space = ProductSpace::new(n_spins)?;
    if rho0.nrows() != space.dim || rho0.ncols() != space.dim {
        return Err(Error::Domain("initial state dimension mismatch".into()));
    }
    let h = space.hamiltonian(coefficients);
    let z = space.jump(rates.r);
    let dim = space.dim;
    let y0: Vec<Complex64> = rho0.transpose().as_slice().to_vec();
    let mut records = Vec::with_capacity(t_grid.len());
    let mut states = Vec::with_capacity(t_grid.len());
    let to_matrix = |y: &[Complex64]| DMatrix::from_row_slice(dim, dim, y);
    let stats = integrate(
        |_, y, dy| {
            let rho = to_matrix(y);
            let d = product_rhs(&space, &h, &z, rates, &rho);
            dy.copy_from_slice(d.transpose().as_slice());
        },
        0.0,
        &y0,
        t_grid,
        &opts.control,
        |_, t, y| {
            let rho = to_matrix(y);
            let herm = max_abs(&(&rho - rho.adjoint()));
            let min_eig = SymmetricEigen::new((&rho + rho.adjoint()) * c(0.5)).eigenvalues.min();
            records.push(TrajectoryRecord::new(
                t,
                space.moments(&rho),
                n_spins,
                rho.trace().re,
                (&rho * &rho).trace().re,
                herm,
                Some(min_eig),
            ));
            states.push(rho);
            ControlFlow::Continue(())
        },
    )?;
    Ok((Trajectory { n_spins, records, warnings: Vec::new(), stats, checkpoint: None }, states))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dicke::dicke_block_structure;

    #[test]
    fn operators_satisfy_algebra() {
        let s = ProductSpace::new(3).unwrap();
        let comm = &s.sx * &s.sy - &s.sy * &s.sx - &s.sz * Complex64::new(0.0, 1.0);
        assert!(max_abs(&comm) < 1e-12);
    }

    #[test]
    fn cap() {
        assert!(matches!(ProductSpace::new(7), Err(Error::Resource(_))));
    }

    #[test]
    fn embedding_preserves_trace_and_moments() {
        for n in 1..=5 {
            let space = ProductSpace::new(n).unwrap();
            let mut rho = BlockDensityMatrix::maximally_mixed(n).unwrap();
            let css = css_state(n as f64 / 2.0, 0.8, 0.3).unwrap();
            let top = BlockDensityMatrix::from_top_state(n, &css).unwrap();
            for (x, y) in rho.data.iter_mut().zip(&top.data) {
                *x = *x * 0.3 + y * 0.7;
            }
            let full = space.embed(&rho).unwrap();
            assert!((full.trace().re - 1.0).abs() < 1e-12);
            let a = space.moments(&full);
            let b = rho.moments();
            for (x, y) in [(a.sx, b.sx), (a.sy2, b.sy2), (a.cyz, b.cyz), (a.cxz, b.cxz), (a.sz2, b.sz2)] {
                assert!((x - y).abs() < 1e-12, "N={n}: {x} vs {y}");
            }
            let mm = space.embed(&BlockDensityMatrix::maximally_mixed(n).unwrap()).unwrap();
            let id = DMatrix::<Complex64>::identity(space.dim, space.dim) * c(1.0 / space.dim as f64);
            assert!(max_abs(&(mm - id)) < 1e-12);
        }
        assert_eq!(dicke_block_structure(4).unwrap().blocks.len(), 3);
    }

    #[test]
    fn product_css_matches_top_block() {
        let space = ProductSpace::new(4).unwrap();
        let css = css_state(2.0, 1.2, -0.5).unwrap();
        let block = BlockDensityMatrix::from_top_state(4, &css).unwrap();
        let embedded = space.embed(&block).unwrap();
        assert!(trace_distance(&embedded, &space.product_css(1.2, -0.5)) < 1e-12);
    }
}
