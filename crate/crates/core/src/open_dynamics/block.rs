//! Permutation-invariant density matrix `ρ = ⊕_j ρ_j ⊗ 1_{d_j}`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::dicke::{dicke_block_structure, BlockLayout, StateVector};
use crate::error::{Error, Result};
use crate::metrics::{LadderSums, Moments};

/// Blocks are stored row-major and contiguously, top j first. Element `(a, b)`
/// of block `k` is `data[offsets[k] + a * dim_k + b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDensityMatrix {
    pub layout: BlockLayout,
    pub offsets: Vec<usize>,
    pub data: Vec<Complex64>,
}

pub(crate) fn offsets_for(layout: &BlockLayout) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(layout.blocks.len() + 1);
    let mut acc = 0;
    for b in &layout.blocks {
        offsets.push(acc);
        acc += b.dim * b.dim;
    }
    offsets.push(acc);
    offsets
}

impl BlockDensityMatrix {
    pub fn zeros(n_spins: usize) -> Result<Self> {
        let layout = dicke_block_structure(n_spins)?;
        let offsets = offsets_for(&layout);
        let data = vec![Complex64::new(0.0, 0.0); offsets[layout.blocks.len()]];
        Ok(BlockDensityMatrix { layout, offsets, data })
    }

    /// Pure state supported on the maximal-j block; lower blocks start empty.
    pub fn from_top_state(n_spins: usize, state: &StateVector) -> Result<Self> {
        let mut rho = Self::zeros(n_spins)?;
        let dim = rho.layout.blocks[0].dim;
        if state.amplitudes.len() != dim {
            return Err(Error::Domain(format!("state has dimension {} but the top block has {dim}", state.amplitudes.len())));
        }
        let v = &state.amplitudes;
        for a in 0..dim {
            for b in 0..dim {
                rho.data[a * dim + b] = v[a] * v[b].conj();
            }
        }
        Ok(rho)
    }

    /// The identity on 2^N, normalized.
    pub fn maximally_mixed(n_spins: usize) -> Result<Self> {
        let mut rho = Self::zeros(n_spins)?;
        let total = rho.layout.total_dimension();
        for k in 0..rho.layout.blocks.len() {
            let dim = rho.layout.blocks[k].dim;
            let off = rho.offsets[k];
            for a in 0..dim {
                rho.data[off + a * dim + a] = Complex64::new(1.0 / total, 0.0);
            }
        }
        Ok(rho)
    }

    pub fn n_spins(&self) -> usize {
        self.layout.n_spins
    }

    pub fn n_blocks(&self) -> usize {
        self.layout.blocks.len()
    }

    pub fn block_slice(&self, k: usize) -> &[Complex64] {
        &self.data[self.offsets[k]..self.offsets[k + 1]]
    }

    pub fn block_matrix(&self, k: usize) -> DMatrix<Complex64> {
        let dim = self.layout.blocks[k].dim;
        DMatrix::from_row_slice(dim, dim, self.block_slice(k))
    }

    pub fn set_block(&mut self, k: usize, m: &DMatrix<Complex64>) {
        let dim = self.layout.blocks[k].dim;
        let off = self.offsets[k];
        for a in 0..dim {
            for b in 0..dim {
                self.data[off + a * dim + b] = m[(a, b)];
            }
        }
    }

    /// Global trace Σ_j d_j tr ρ_j.
    pub fn trace(&self) -> f64 {
        self.layout
            .blocks
            .iter()
            .enumerate()
            .map(|(k, b)| {
                let s = self.block_slice(k);
                b.degeneracy * (0..b.dim).map(|a| s[a * b.dim + a].re).sum::<f64>()
            })
            .sum()
    }

    /// Trace weight Σ d_j tr ρ_j carried by each block.
    pub fn block_weights(&self) -> Vec<f64> {
        (0..self.n_blocks())
            .map(|k| {
                let b = self.layout.blocks[k];
                let s = self.block_slice(k);
                b.degeneracy * (0..b.dim).map(|a| s[a * b.dim + a].re).sum::<f64>()
            })
            .collect()
    }

    /// tr ρ² = Σ_j d_j tr ρ_j².
    pub fn purity(&self) -> f64 {
        self.layout
            .blocks
            .iter()
            .enumerate()
            .map(|(k, b)| b.degeneracy * self.block_slice(k).iter().map(|z| z.norm_sqr()).sum::<f64>())
            .sum()
    }

    /// Largest |ρ_j(a,b) − conj ρ_j(b,a)| over all blocks.
    pub fn hermiticity_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (k, b) in self.layout.blocks.iter().enumerate() {
            let s = self.block_slice(k);
            for a in 0..b.dim {
                for c in a..b.dim {
                    worst = worst.max((s[a * b.dim + c] - s[c * b.dim + a].conj()).norm());
                }
            }
        }
        worst
    }

    /// Smallest eigenvalue over all blocks (blocks are Hermitized first).
    pub fn min_eigenvalue(&self) -> f64 {
        (0..self.n_blocks())
            .map(|k| {
                let m = self.block_matrix(k);
                let h = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
                SymmetricEigen::new(h).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Clip negative eigenvalues of every block and restore unit trace.
    pub fn project_psd(&mut self) {
        for k in 0..self.n_blocks() {
            let m = self.block_matrix(k);
            let h = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
            let eig = SymmetricEigen::new(h);
            let vals = eig.eigenvalues.map(|x| Complex64::new(x.max(0.0), 0.0));
            let v = &eig.eigenvectors;
            let fixed = v * DMatrix::from_diagonal(&vals) * v.adjoint();
            self.set_block(k, &fixed);
        }
        let tr = self.trace();
        if tr > 0.0 {
            for z in &mut self.data {
                *z /= tr;
            }
        }
    }

    pub fn moments(&self) -> Moments {
        let mut sums = LadderSums::default();
        for (k, b) in self.layout.blocks.iter().enumerate() {
            let s = self.block_slice(k);
            let dim = b.dim;
            sums.add_block(b.j, b.degeneracy, |a, c| s[a * dim + c], dim);
        }
        sums.moments()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dicke::css_state;

    #[test]
    fn css_block_state() {
        let s = css_state(2.0, 1.0, 0.3).unwrap();
        let rho = BlockDensityMatrix::from_top_state(4, &s).unwrap();
        assert!((rho.trace() - 1.0).abs() < 1e-14);
        assert!((rho.purity() - 1.0).abs() < 1e-14);
        assert_eq!(rho.hermiticity_error(), 0.0);
        assert!(rho.min_eigenvalue() > -1e-14);
        let m = rho.moments();
        let direct = Moments::from_state(&s);
        assert!((m.sx - direct.sx).abs() < 1e-14 && (m.cyz - direct.cyz).abs() < 1e-14);
    }

    #[test]
    fn maximally_mixed_state() {
        let rho = BlockDensityMatrix::maximally_mixed(5).unwrap();
        assert!((rho.trace() - 1.0).abs() < 1e-14);
        assert!((rho.purity() - 1.0 / 32.0).abs() < 1e-15);
        let m = rho.moments();
        assert!(m.sx.abs() < 1e-15 && m.sz.abs() < 1e-15);
        // ⟨Sz²⟩ = N/4 for the maximally mixed state.
        assert!((m.sz2 - 1.25).abs() < 1e-14);
    }

    #[test]
    fn projection_restores_positivity() {
        let mut rho = BlockDensityMatrix::maximally_mixed(2).unwrap();
        rho.data[0] = Complex64::new(-0.05, 0.0);
        rho.project_psd();
        assert!(rho.min_eigenvalue() >= -1e-15);
        assert!((rho.trace() - 1.0).abs() < 1e-14);
    }
}
