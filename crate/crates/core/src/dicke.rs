//! Collective spin operators on fixed-j blocks, coherent spin states, and the
//! block layout of the permutation-symmetric decomposition of N spin-1/2s.
//!
//! Basis ordering is fixed as m = j, j-1, ..., -j; index `a` maps to `m = j - a`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Largest entry modulus of a complex matrix.
pub fn max_abs(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Validate a spin quantum number and return `2j`.
pub fn twice_j(j: f64) -> Result<usize> {
    let tj = (2.0 * j).round();
    if !(j >= 0.0) || (2.0 * j - tj).abs() > 1e-12 || !j.is_finite() {
        return Err(Error::Domain(format!("j = {j} is not a non-negative half-integer")));
    }
    Ok(tj as usize)
}

/// `√(j(j+1) − m(m+1))`, the matrix element ⟨j,m+1|S₊|j,m⟩.
#[inline]
pub fn ladder_up(j: f64, m: f64) -> f64 {
    (j * (j + 1.0) - m * (m + 1.0)).max(0.0).sqrt()
}

#[derive(Debug, Clone)]
pub struct SpinOps {
    pub j: f64,
    pub dim: usize,
    pub sx: DMatrix<Complex64>,
    pub sy: DMatrix<Complex64>,
    pub sz: DMatrix<Complex64>,
    pub sp: DMatrix<Complex64>,
    pub sm: DMatrix<Complex64>,
    pub s2: DMatrix<Complex64>,
}

impl SpinOps {
    /// m value of basis index `a`.
    #[inline]
    pub fn m(&self, a: usize) -> f64 {
        self.j - a as f64
    }

    pub fn identity(&self) -> DMatrix<Complex64> {
        DMatrix::identity(self.dim, self.dim)
    }
}

pub fn build_collective_ops(j: f64) -> Result<SpinOps> {
    let dim = twice_j(j)? + 1;
    let zero = Complex64::new(0.0, 0.0);
    let mut sz = DMatrix::from_element(dim, dim, zero);
    let mut sp = DMatrix::from_element(dim, dim, zero);
    for a in 0..dim {
        let m = j - a as f64;
        sz[(a, a)] = Complex64::new(m, 0.0);
        if a > 0 {
            // S₊|m⟩ lands on index a-1.
            sp[(a - 1, a)] = Complex64::new(ladder_up(j, m), 0.0);
        }
    }
    let sm = sp.adjoint();
    let sx = (&sp + &sm) * Complex64::new(0.5, 0.0);
    let sy = (&sp - &sm) * (-0.5 * I);
    let s2 = DMatrix::identity(dim, dim) * Complex64::new(j * (j + 1.0), 0.0);
    Ok(SpinOps { j, dim, sx, sy, sz, sp, sm, s2 })
}

/// Normalized state on a single j block.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub j: f64,
    pub amplitudes: DVector<Complex64>,
}

impl StateVector {
    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn expect(&self, op: &DMatrix<Complex64>) -> Complex64 {
        self.amplitudes.dotc(&(op * &self.amplitudes))
    }
}

impl Serialize for StateVector {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr {
            j: f64,
            amplitudes: Vec<f64>,
        }
        let amplitudes = self.amplitudes.iter().flat_map(|z| [z.re, z.im]).collect();
        Repr { j: self.j, amplitudes }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for StateVector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            j: f64,
            amplitudes: Vec<f64>,
        }
        let r = Repr::deserialize(d)?;
        let dim = twice_j(r.j).map_err(D::Error::custom)? + 1;
        if r.amplitudes.len() != 2 * dim {
            return Err(D::Error::custom(format!(
                "expected {} interleaved re/im values, got {}",
                2 * dim,
                r.amplitudes.len()
            )));
        }
        let amps = r.amplitudes.chunks(2).map(|c| Complex64::new(c[0], c[1]));
        Ok(StateVector { j: r.j, amplitudes: DVector::from_iterator(dim, amps) })
    }
}

fn ln_binomial(n: usize, k: usize) -> f64 {
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Coherent spin state `exp(−iφSz) exp(−iθSy)|j,j⟩`.
///
/// Amplitudes use the closed-form rotation column
/// `√C(2j, j−m) cos^{j+m}(θ/2) sin^{j−m}(θ/2) e^{−imφ}`, evaluated in log space.
pub fn css_state(j: f64, theta: f64, phi: f64) -> Result<StateVector> {
    let tj = twice_j(j)?;
    let dim = tj + 1;
    let (s, c) = (0.5 * theta).sin_cos();
    let (ls, lc) = (s.abs().ln(), c.abs().ln());
    let mut amps = DVector::from_element(dim, Complex64::new(0.0, 0.0));
    let ln_fact: Vec<f64> = {
        let mut v = vec![0.0; tj + 1];
        for k in 1..=tj {
            v[k] = v[k - 1] + (k as f64).ln();
        }
        v
    };
    for a in 0..dim {
        // a = j − m counts sin powers, tj − a = j + m counts cos powers.
        let p_sin = a;
        let p_cos = tj - a;
        if (p_sin > 0 && s == 0.0) || (p_cos > 0 && c == 0.0) {
            continue;
        }
        let mut ln_mag = 0.5 * (ln_fact[tj] - ln_fact[a] - ln_fact[tj - a]);
        if p_sin > 0 {
            ln_mag += p_sin as f64 * ls;
        }
        if p_cos > 0 {
            ln_mag += p_cos as f64 * lc;
        }
        let sign = if (s < 0.0 && p_sin % 2 == 1) ^ (c < 0.0 && p_cos % 2 == 1) { -1.0 } else { 1.0 };
        let m = j - a as f64;
        amps[a] = Complex64::from_polar(sign * ln_mag.exp(), -m * phi);
    }
    Ok(StateVector { j, amplitudes: amps })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Block {
    pub j: f64,
    /// Number of identical copies of this irrep in the N-spin space.
    pub degeneracy: f64,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockLayout {
    pub n_spins: usize,
    /// Sorted by descending j.
    pub blocks: Vec<Block>,
}

impl BlockLayout {
    pub fn total_dimension(&self) -> f64 {
        self.blocks.iter().map(|b| b.degeneracy * b.dim as f64).sum()
    }

    /// Number of stored density-matrix elements, Σ (2j+1)².
    pub fn stored_elements(&self) -> usize {
        self.blocks.iter().map(|b| b.dim * b.dim).sum()
    }

    /// Index of the block with total spin `j`.
    pub fn index_of(&self, j: f64) -> Option<usize> {
        let top = self.n_spins as f64 / 2.0;
        let k = top - j;
        if k < -1e-9 || (k - k.round()).abs() > 1e-9 {
            return None;
        }
        let k = k.round() as usize;
        (k < self.blocks.len()).then_some(k)
    }
}

/// Multiplicity of total spin `j` among `n` spin-1/2s,
/// `C(n, n/2−j) − C(n, n/2−j−1)`. Zero when `j` is not allowed.
pub fn degeneracy(n: usize, j: f64) -> f64 {
    let k2 = n as f64 - 2.0 * j;
    if j < 0.0 || k2 < -1e-9 || (k2 / 2.0 - (k2 / 2.0).round()).abs() > 1e-9 {
        return 0.0;
    }
    let k = (k2 / 2.0).round() as usize;
    if k > n / 2 {
        return 0.0;
    }
    // C(n,k)·(n−2k+1)/(n−k+1).
    let factor = (n - 2 * k + 1) as f64 / (n - k + 1) as f64;
    if n <= 60 {
        let mut c = 1.0f64;
        for i in 0..k {
            c = c * (n - i) as f64 / (i + 1) as f64;
        }
        (c * factor).round()
    } else {
        (ln_binomial(n, k)).exp() * factor
    }
}

pub fn dicke_block_structure(n_spins: usize) -> Result<BlockLayout> {
    if n_spins == 0 {
        return Err(Error::Domain("N must be at least 1".into()));
    }
    let blocks = (0..=n_spins / 2)
        .map(|k| {
            let tj = n_spins - 2 * k;
            let j = tj as f64 / 2.0;
            Block { j, degeneracy: degeneracy(n_spins, j), dim: tj + 1 }
        })
        .collect();
    Ok(BlockLayout { n_spins, blocks })
}
