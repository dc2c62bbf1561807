//! Matrix-free Liouvillian in the permutation-invariant block representation.
//!
//! Per block the collective part is written as
//! `−i(H_eff ρ − ρ H_eff†) + γ₁ Z ρ Zᵀ + γ₂ Zᵀ ρ Z` with `H_eff = H − iK/2`,
//! `K = γ₁ ZᵀZ + γ₂ ZZᵀ`. H and K have offsets {0, ±2}; Z is real tridiagonal.
//!
//! Local dephasing `κ Σ_k (σ_z^k ρ σ_z^k − ρ)` maps block J at fixed (m, m′) onto
//! blocks J and J±1:
//! `Φ(ρ)_J(m,m′) = α_J m m′ ρ_J + w₊ u(m)u(m′) ρ_{J+1} + w₋ v(m)v(m′) ρ_{J−1}`,
//! with `u(m) = √((J+1)² − m²)/(J+1)`, `v(m) = √(J² − m²)/J`,
//! `w± = N d_{N−1}(J ± 1/2)/d_N(J)` and `α_J = w₋/J² + w₊/(J+1)²`.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::dicke::{degeneracy, BlockLayout};
use crate::error::{Error, Result};
use crate::hamiltonian::{jump_entries, HamiltonianCoefficients};
use crate::params::DerivedParams;

use super::block::{offsets_for, BlockDensityMatrix};

pub const DEFAULT_MAX_SPINS: usize = 512;

/// Dissipation rates entering the master equation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Rates {
    /// κ = 1/(2T₂) multiplying Σ_k D[σ_z^k].
    pub dephasing: f64,
    /// Γ_γ(n̄+1), rate of D[Z].
    pub emission: f64,
    /// Γ_γ n̄, rate of D[Z†].
    pub absorption: f64,
    /// Squeeze parameter entering Z.
    pub r: f64,
}

impl Rates {
    pub fn from_params(p: &DerivedParams) -> Self {
        Rates { dephasing: p.dephasing_rate(), emission: p.emission_rate(), absorption: p.absorption_rate(), r: p.r }
    }

    pub fn is_closed(&self) -> bool {
        self.dephasing == 0.0 && self.emission == 0.0 && self.absorption == 0.0
    }
}

#[derive(Debug, Clone)]
struct BlockOps {
    dim: usize,
    m: Vec<f64>,
    /// H_eff(a, a).
    h0: Vec<Complex64>,
    /// H_eff(a, a+2) = H_eff(a+2, a).
    h2: Vec<Complex64>,
    /// √γ₁ Z(a, a−1) and √γ₁ Z(a, a+1); zero outside the block.
    p_lo: Vec<f64>,
    p_hi: Vec<f64>,
    /// √γ₂ Z(a−1, a) and √γ₂ Z(a+1, a).
    q_lo: Vec<f64>,
    q_hi: Vec<f64>,
    /// κ α_J.
    deph_same: f64,
    /// √(κ w₊) u(m), transfer from J+1.
    from_above: Vec<f64>,
    /// √(κ w₋) v(m), transfer from J−1.
    from_below: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Liouvillian {
    pub layout: BlockLayout,
    pub coefficients: HamiltonianCoefficients,
    pub rates: Rates,
    offsets: Vec<usize>,
    blocks: Vec<BlockOps>,
}

pub fn build_liouvillian(n_spins: usize, params: &DerivedParams) -> Result<Liouvillian> {
    build_liouvillian_with(n_spins, HamiltonianCoefficients::from_params(params), Rates::from_params(params), DEFAULT_MAX_SPINS)
}

pub fn build_liouvillian_with(
    n_spins: usize,
    coefficients: HamiltonianCoefficients,
    rates: Rates,
    max_spins: usize,
) -> Result<Liouvillian> {
    if n_spins > max_spins {
        return Err(Error::Resource(format!("N = {n_spins} exceeds the configured maximum {max_spins}")));
    }
    if n_spins > 1000 {
        return Err(Error::Resource("degeneracy ratios overflow beyond N = 1000".into()));
    }
    if rates.dephasing < 0.0 || rates.emission < 0.0 || rates.absorption < 0.0 {
        return Err(Error::Domain("rates must be non-negative".into()));
    }
    let layout = crate::dicke::dicke_block_structure(n_spins)?;
    let offsets = offsets_for(&layout);
    let n = n_spins as f64;
    let (g1, g2) = (rates.emission.sqrt(), rates.absorption.sqrt());
    let kappa = rates.dephasing;

    let blocks = layout
        .blocks
        .iter()
        .map(|blk| {
            let j = blk.j;
            let dim = blk.dim;
            let m: Vec<f64> = (0..dim).map(|a| j - a as f64).collect();
            let mut h0 = vec![Complex64::new(0.0, 0.0); dim];
            let mut h2 = vec![Complex64::new(0.0, 0.0); dim.saturating_sub(2)];
            // z_dn[a] = Z(a+1, a), z_up[a] = Z(a, a+1).
            let mut z_dn = vec![0.0; dim.saturating_sub(1)];
            let mut z_up = vec![0.0; dim.saturating_sub(1)];
            for a in 0..dim.saturating_sub(1) {
                z_dn[a] = jump_entries(j, m[a], rates.r).0;
                z_up[a] = jump_entries(j, m[a + 1], rates.r).1;
            }
            let g1s = rates.emission;
            let g2s = rates.absorption;
            for a in 0..dim {
                let zdn = |i: usize| z_dn.get(i).copied().unwrap_or(0.0);
                let zup = |i: usize| z_up.get(i).copied().unwrap_or(0.0);
                let (zup_prev, zdn_prev) = if a == 0 { (0.0, 0.0) } else { (zup(a - 1), zdn(a - 1)) };
                // (ZᵀZ)(a,a) = Z(a+1,a)² + Z(a−1,a)²; (ZZᵀ)(a,a) = Z(a,a+1)² + Z(a,a−1)².
                let ztz = zdn(a).powi(2) + zup_prev.powi(2);
                let zzt = zup(a).powi(2) + zdn_prev.powi(2);
                let k0 = g1s * ztz + g2s * zzt;
                h0[a] = Complex64::new(coefficients.diagonal(j, m[a]), -0.5 * k0);
                if a + 2 < dim {
                    // (ZᵀZ)(a,a+2) = Z(a+1,a)Z(a+1,a+2); (ZZᵀ)(a,a+2) = Z(a,a+1)Z(a+2,a+1).
                    let k2 = g1s * z_dn[a] * z_up[a + 1] + g2s * z_up[a] * z_dn[a + 1];
                    // H(a, a+2) couples m_a = m_{a+2} + 2.
                    h2[a] = Complex64::new(coefficients.second_off_diagonal(j, m[a + 2]), -0.5 * k2);
                }
            }
            let p_lo = (0..dim).map(|a| if a == 0 { 0.0 } else { g1 * z_dn[a - 1] }).collect();
            let p_hi = (0..dim).map(|a| if a + 1 < dim { g1 * z_up[a] } else { 0.0 }).collect();
            let q_lo = (0..dim).map(|a| if a == 0 { 0.0 } else { g2 * z_up[a - 1] }).collect();
            let q_hi = (0..dim).map(|a| if a + 1 < dim { g2 * z_dn[a] } else { 0.0 }).collect();

            let d_j = degeneracy(n_spins, j);
            let w_minus = if j >= 0.5 { n * degeneracy(n_spins - 1, j - 0.5) / d_j } else { 0.0 };
            let w_plus = n * degeneracy(n_spins - 1, j + 0.5) / d_j;
            let mut alpha = w_plus / ((j + 1.0) * (j + 1.0));
            if j > 0.0 {
                alpha += w_minus / (j * j);
            }
            let from_above = m
                .iter()
                .map(|&mm| (kappa * w_plus).sqrt() * ((j + 1.0).powi(2) - mm * mm).max(0.0).sqrt() / (j + 1.0))
                .collect();
            let from_below = m
                .iter()
                .map(|&mm| if j > 0.0 { (kappa * w_minus).sqrt() * (j * j - mm * mm).max(0.0).sqrt() / j } else { 0.0 })
                .collect();
            BlockOps {
                dim,
                m,
                h0,
                h2,
                p_lo,
                p_hi,
                q_lo,
                q_hi,
                deph_same: kappa * alpha,
                from_above,
                from_below,
            }
        })
        .collect();
    Ok(Liouvillian { layout, coefficients, rates, offsets, blocks })
}

const MI: Complex64 = Complex64 { re: 0.0, im: -1.0 };

impl Liouvillian {
    pub fn n_spins(&self) -> usize {
        self.layout.n_spins
    }

    pub fn len(&self) -> usize {
        self.offsets[self.blocks.len()]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `out = L(rho)` on flat block storage.
    pub fn apply(&self, rho: &[Complex64], out: &mut [Complex64]) {
        let mut chunks = Vec::with_capacity(self.blocks.len());
        let mut rest = out;
        for k in 0..self.blocks.len() {
            let (head, tail) = rest.split_at_mut(self.offsets[k + 1] - self.offsets[k]);
            chunks.push(head);
            rest = tail;
        }
        chunks.into_par_iter().enumerate().for_each(|(k, o)| self.apply_block(k, rho, o));
    }

    pub fn apply_state(&self, rho: &BlockDensityMatrix) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.len()];
        self.apply(&rho.data, &mut out);
        out
    }

    fn apply_block(&self, k: usize, rho: &[Complex64], out: &mut [Complex64]) {
        let op = &self.blocks[k];
        let n = op.dim;
        let r = &rho[self.offsets[k]..self.offsets[k + 1]];
        let above = (k > 0).then(|| &rho[self.offsets[k - 1]..self.offsets[k]]);
        let below = (k + 1 < self.blocks.len()).then(|| &rho[self.offsets[k + 1]..self.offsets[k + 2]]);
        let n_spins = self.layout.n_spins as f64;
        let kappa_n = self.rates.dephasing * n_spins;
        let dissipative_z = self.rates.emission > 0.0 || self.rates.absorption > 0.0;
        let zero = Complex64::new(0.0, 0.0);
        let at = |a: usize, b: usize| r[a * n + b];

        for a in 0..n {
            for b in 0..n {
                let x = at(a, b);
                // H_eff ρ
                let mut hr = op.h0[a] * x;
                if a >= 2 {
                    hr += op.h2[a - 2] * at(a - 2, b);
                }
                if a + 2 < n {
                    hr += op.h2[a] * at(a + 2, b);
                }
                // ρ H_eff†
                let mut rh = x * op.h0[b].conj();
                if b >= 2 {
                    rh += at(a, b - 2) * op.h2[b - 2].conj();
                }
                if b + 2 < n {
                    rh += at(a, b + 2) * op.h2[b].conj();
                }
                let mut d = MI * (hr - rh);

                if dissipative_z {
                    let mut acc = zero;
                    if a >= 1 {
                        if b >= 1 {
                            acc += at(a - 1, b - 1) * (op.p_lo[a] * op.p_lo[b] + op.q_lo[a] * op.q_lo[b]);
                        }
                        if b + 1 < n {
                            acc += at(a - 1, b + 1) * (op.p_lo[a] * op.p_hi[b] + op.q_lo[a] * op.q_hi[b]);
                        }
                    }
                    if a + 1 < n {
                        if b >= 1 {
                            acc += at(a + 1, b - 1) * (op.p_hi[a] * op.p_lo[b] + op.q_hi[a] * op.q_lo[b]);
                        }
                        if b + 1 < n {
                            acc += at(a + 1, b + 1) * (op.p_hi[a] * op.p_hi[b] + op.q_hi[a] * op.q_hi[b]);
                        }
                    }
                    d += acc;
                }

                if kappa_n > 0.0 {
                    d += x * (op.deph_same * op.m[a] * op.m[b] - kappa_n);
                    if let Some(up) = above {
                        d += up[(a + 1) * (n + 2) + b + 1] * (op.from_above[a] * op.from_above[b]);
                    }
                    if let Some(dn) = below {
                        if a >= 1 && b >= 1 && a + 1 < n && b + 1 < n {
                            d += dn[(a - 1) * (n - 2) + b - 1] * (op.from_below[a] * op.from_below[b]);
                        }
                    }
                }
                out[a * n + b] = d;
            }
        }
    }

    /// d/dt of the global trace for state `rho`.
    pub fn trace_derivative(&self, rho: &BlockDensityMatrix) -> f64 {
        let d = self.apply_state(rho);
        self.layout
            .blocks
            .iter()
            .enumerate()
            .map(|(k, b)| b.degeneracy * (0..b.dim).map(|a| d[self.offsets[k] + a * b.dim + a].re).sum::<f64>())
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dicke::{build_collective_ops, css_state, max_abs};
    use crate::hamiltonian::build_jump_operator;
    use nalgebra::DMatrix;

    fn coeffs() -> HamiltonianCoefficients {
        HamiltonianCoefficients { chi_tilde: 1.3, tanh2r: 0.4, omega_tilde: 0.2 }
    }

    #[test]
    fn closed_system_matches_dense_commutator() {
        let j = 2.5;
        let l = build_liouvillian_with(5, coeffs(), Rates::default(), 16).unwrap();
        let ops = build_collective_ops(j).unwrap();
        let p = coeffs();
        let sx2 = &ops.sx * &ops.sx;
        let sy2 = &ops.sy * &ops.sy;
        let sz2 = &ops.sz * &ops.sz;
        let c = |x: f64| Complex64::new(x, 0.0);
        let h = (&ops.s2 - sz2 - (sx2 - sy2) * c(p.tanh2r)) * c(-p.chi_tilde) + &ops.sz * c(p.omega_tilde);
        let s = css_state(j, 0.7, 0.2).unwrap();
        let rho = BlockDensityMatrix::from_top_state(5, &s).unwrap();
        let out = l.apply_state(&rho);
        let r0 = rho.block_matrix(0);
        let expect = (&h * &r0 - &r0 * &h) * Complex64::new(0.0, -1.0);
        let got = DMatrix::from_row_slice(6, 6, &out[..36]);
        assert!(max_abs(&(got - expect)) < 1e-12);
    }

    #[test]
    fn collective_dissipator_matches_dense() {
        let (j, r) = (2.0, 0.3);
        let rates = Rates { dephasing: 0.0, emission: 0.7, absorption: 0.25, r };
        let l = build_liouvillian_with(4, coeffs(), rates, 16).unwrap();
        let ops = build_collective_ops(j).unwrap();
        let z = build_jump_operator(&ops, r);
        let s = css_state(j, 1.1, -0.4).unwrap();
        let rho = BlockDensityMatrix::from_top_state(4, &s).unwrap();
        let r0 = rho.block_matrix(0);
        let dis = |a: &DMatrix<Complex64>, g: f64| {
            let ad = a.adjoint();
            (a * &r0 * &ad - (&ad * a * &r0 + &r0 * &ad * a) * Complex64::new(0.5, 0.0)) * Complex64::new(g, 0.0)
        };
        let zd = z.adjoint();
        let expect_diss = dis(&z, 0.7) + dis(&zd, 0.25);
        let l_h = build_liouvillian_with(4, coeffs(), Rates::default(), 16).unwrap();
        let full = DMatrix::from_row_slice(5, 5, &l.apply_state(&rho)[..25]);
        let ham = DMatrix::from_row_slice(5, 5, &l_h.apply_state(&rho)[..25]);
        assert!(max_abs(&(full - ham - expect_diss)) < 1e-12);
    }

    #[test]
    fn single_spin_dephasing_is_sigma_z_conjugation() {
        let rates = Rates { dephasing: 1.0, ..Default::default() };
        let zero = HamiltonianCoefficients { chi_tilde: 0.0, tanh2r: 0.0, omega_tilde: 0.0 };
        let l = build_liouvillian_with(1, zero, rates, 4).unwrap();
        let mut rho = BlockDensityMatrix::zeros(1).unwrap();
        rho.data.copy_from_slice(&[
            Complex64::new(0.6, 0.0),
            Complex64::new(0.1, 0.2),
            Complex64::new(0.1, -0.2),
            Complex64::new(0.4, 0.0),
        ]);
        let d = l.apply_state(&rho);
        // σzρσz − ρ flips the sign of the coherences.
        assert!(d[0].norm() < 1e-15 && d[3].norm() < 1e-15);
        assert!((d[1] + rho.data[1] * 2.0).norm() < 1e-15);
    }

    #[test]
    fn trace_preserving_with_everything_on() {
        for n in 1..12 {
            let rates = Rates { dephasing: 0.8, emission: 0.3, absorption: 0.1, r: 0.2 };
            let l = build_liouvillian_with(n, coeffs(), rates, 16).unwrap();
            let mut rho = BlockDensityMatrix::maximally_mixed(n).unwrap();
            // Mix in coherences and unequal populations.
            let s = css_state(n as f64 / 2.0, 0.9, 0.3).unwrap();
            let top = BlockDensityMatrix::from_top_state(n, &s).unwrap();
            for (x, y) in rho.data.iter_mut().zip(&top.data) {
                *x = *x * 0.5 + y * 0.5;
            }
            assert!(l.trace_derivative(&rho).abs() < 1e-12, "N={n}");
        }
    }

    #[test]
    fn resource_cap() {
        assert!(matches!(
            build_liouvillian_with(600, coeffs(), Rates::default(), DEFAULT_MAX_SPINS),
            Err(Error::Resource(_))
        ));
    }
}
