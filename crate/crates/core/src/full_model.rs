//! Truncated cavity ⊗ phonon ⊗ spin model used to check the effective spin
//! reduction, and the classical mean-field steady state that sets the
//! linearized couplings.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dicke::{css_state, ladder_up, twice_j};
use crate::error::{Error, Result};
use crate::hamiltonian::HamiltonianCoefficients;
use crate::metrics::{squeezing_parameter, LadderSums, Moments};
use crate::open_dynamics::evolve_pure;
use crate::params::{DerivedParams, RawParams};

pub const DEFAULT_MAX_DIMENSION: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanField {
    pub alpha: Complex64,
    pub beta: Complex64,
    pub residual: f64,
    pub iterations: usize,
}

fn mean_field_residual(raw: &RawParams, s_minus: Complex64, alpha: Complex64, beta: Complex64) -> f64 {
    let i = Complex64::i();
    let cavity = -(i * raw.delta_a + 0.5 * raw.kappa_a) * alpha - i * raw.g0 * alpha * (2.0 * beta.re) - i * raw.omega_p;
    let phonon = -(i * raw.omega_b + 0.5 * raw.kappa_b) * beta - i * raw.g0 * alpha.norm_sqr() - i * raw.g * s_minus;
    (cavity.norm_sqr() + phonon.norm_sqr()).sqrt()
}

/// Classical steady state of the driven cavity and phonon, by damped fixed-point
/// iteration that solves each linear equation for its own amplitude.
pub fn mean_field_steady_state(raw: &RawParams, s_minus: Complex64) -> Result<MeanField> {
    mean_field_steady_state_with(raw, s_minus, 10_000, 0.5)
}

pub fn mean_field_steady_state_with(raw: &RawParams, s_minus: Complex64, max_iter: usize, mixing: f64) -> Result<MeanField> {
    if raw.kappa_a <= 0.0 && raw.delta_a == 0.0 {
        return Err(Error::Domain("mean field needs kappa_a > 0 or a nonzero cavity detuning".into()));
    }
    if raw.kappa_b <= 0.0 && raw.omega_b == 0.0 {
        return Err(Error::Domain("mean field needs kappa_b > 0 or a nonzero phonon frequency".into()));
    }
    let i = Complex64::i();
    let scale = raw.omega_p.abs() + (raw.g * s_minus).norm();
    let tol = if scale > 0.0 { 1e-10 * scale } else { 1e-12 };
    let phonon_den = i * raw.omega_b + 0.5 * raw.kappa_b;
    let (mut alpha, mut beta) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
    let mut residual = mean_field_residual(raw, s_minus, alpha, beta);
    for it in 0..=max_iter {
        if residual < tol {
            return Ok(MeanField { alpha, beta, residual, iterations: it });
        }
        let cavity_den = i * raw.delta_a + 0.5 * raw.kappa_a + i * raw.g0 * 2.0 * beta.re;
        if cavity_den.norm() == 0.0 {
            return Err(Error::Convergence { iterations: it, residual });
        }
        let alpha_new = -i * raw.omega_p / cavity_den;
        let beta_new = -i * (raw.g0 * alpha_new.norm_sqr() + raw.g * s_minus) / phonon_den;
        alpha = alpha * (1.0 - mixing) + alpha_new * mixing;
        beta = beta * (1.0 - mixing) + beta_new * mixing;
        residual = mean_field_residual(raw, s_minus, alpha, beta);
        if !residual.is_finite() {
            break;
        }
    }
    Err(Error::Convergence { iterations: max_iter, residual })
}

/// Real symmetric matrix in compressed sparse row form.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub dim: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl CsrMatrix {
    /// Build from triplets; duplicate entries are summed.
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *vals.last_mut().expect("previous entry") += v;
                continue;
            }
            cols.push(c);
            vals.push(v);
            row_ptr[r + 1] += 1;
            last = Some((r, c));
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        CsrMatrix { dim, row_ptr, cols, vals }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn matvec(&self, x: &[Complex64], y: &mut [Complex64]) {
        for r in 0..self.dim {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += x[self.cols[k]] * self.vals[k];
            }
            y[r] = acc;
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for r in 0..self.dim {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                m[(r, self.cols[k])] += self.vals[k];
            }
        }
        m
    }

    /// Largest absolute row sum, an upper bound on the spectral radius.
    pub fn norm_inf(&self) -> f64 {
        (0..self.dim)
            .map(|r| self.vals[self.row_ptr[r]..self.row_ptr[r + 1]].iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Frequencies and cutoffs of the linearized three-mode Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelSpec {
    pub n_spins: usize,
    /// Photon Fock cutoff (number of levels).
    pub n_a: usize,
    /// Phonon Fock cutoff (number of levels).
    pub n_b: usize,
    pub delta: f64,
    pub omega_b: f64,
    pub coupling_g: f64,
    pub omega: f64,
    pub g: f64,
    pub max_dimension: usize,
}

impl ModelSpec {
    pub fn from_params(p: &DerivedParams, n_spins: usize, n_a: usize, n_b: usize) -> Self {
        ModelSpec {
            n_spins,
            n_a,
            n_b,
            delta: p.delta,
            omega_b: p.omega_b,
            coupling_g: p.coupling_g,
            omega: p.omega,
            g: p.g,
            max_dimension: DEFAULT_MAX_DIMENSION,
        }
    }
}

/// `H = Δa†a + ω_b b†b + G(a+a†)(b+b†) + ΩSz + g(bS₊ + b†S₋)` on the maximal-j
/// block. Basis index is `(n_a_level · n_b + n_b_level) · (2j+1) + a`, m = j − a.
#[derive(Debug, Clone)]
pub struct TruncatedModel {
    pub spec: ModelSpec,
    pub j: f64,
    pub spin_dim: usize,
    pub hamiltonian: CsrMatrix,
}

impl TruncatedModel {
    pub fn dimension(&self) -> usize {
        self.hamiltonian.dim
    }

    pub fn index(&self, na: usize, nb: usize, a: usize) -> usize {
        (na * self.spec.n_b + nb) * self.spin_dim + a
    }

    /// Reduced spin density matrix of a pure state.
    pub fn reduced_spin(&self, psi: &[Complex64]) -> DMatrix<Complex64> {
        let ds = self.spin_dim;
        let mut rho = DMatrix::from_element(ds, ds, Complex64::new(0.0, 0.0));
        for f in 0..psi.len() / ds {
            let chunk = &psi[f * ds..(f + 1) * ds];
            for a in 0..ds {
                for c in 0..ds {
                    rho[(a, c)] += chunk[a] * chunk[c].conj();
                }
            }
        }
        rho
    }

    pub fn spin_moments(&self, psi: &[Complex64]) -> Moments {
        let rho = self.reduced_spin(psi);
        let mut s = LadderSums::default();
        s.add_block(self.j, 1.0, |a, c| rho[(a, c)], self.spin_dim);
        s.moments()
    }

    /// Population in the top two Fock levels of either mode.
    pub fn leakage(&self, psi: &[Complex64]) -> f64 {
        let (n_a, n_b, ds) = (self.spec.n_a, self.spec.n_b, self.spin_dim);
        let mut p = 0.0;
        for na in 0..n_a {
            for nb in 0..n_b {
                if na + 2 >= n_a || nb + 2 >= n_b {
                    let start = self.index(na, nb, 0);
                    p += psi[start..start + ds].iter().map(|z| z.norm_sqr()).sum::<f64>();
                }
            }
        }
        p
    }
}

pub fn build_linearized_hamiltonian(spec: &ModelSpec) -> Result<TruncatedModel> {
    if spec.n_a < 2 || spec.n_b < 2 {
        return Err(Error::Domain(format!("Fock cutoffs must be at least 2, got ({}, {})", spec.n_a, spec.n_b)));
    }
    let j = spec.n_spins as f64 / 2.0;
    let ds = twice_j(j)? + 1;
    let dim = spec
        .n_a
        .checked_mul(spec.n_b)
        .and_then(|x| x.checked_mul(ds))
        .ok_or_else(|| Error::Resource("Hilbert space dimension overflows".into()))?;
    if dim > spec.max_dimension {
        return Err(Error::Resource(format!("dimension {dim} exceeds the configured bound {}", spec.max_dimension)));
    }
    let idx = |na: usize, nb: usize, a: usize| (na * spec.n_b + nb) * ds + a;
    let mut t = Vec::with_capacity(dim * 7);
    let mut push = |r: usize, c: usize, v: f64| {
        if v != 0.0 {
            t.push((r, c, v));
            if r != c {
                t.push((c, r, v));
            }
        }
    };
    for na in 0..spec.n_a {
        for nb in 0..spec.n_b {
            for a in 0..ds {
                let m = j - a as f64;
                let here = idx(na, nb, a);
                push(here, here, spec.delta * na as f64 + spec.omega_b * nb as f64 + spec.omega * m);
                // Upper-triangle partners only; `push` mirrors them.
                if na + 1 < spec.n_a {
                    let amp = spec.coupling_g * ((na + 1) as f64).sqrt();
                    if nb + 1 < spec.n_b {
                        push(idx(na + 1, nb + 1, a), here, amp * ((nb + 1) as f64).sqrt());
                    }
                    if nb >= 1 {
                        push(idx(na + 1, nb - 1, a), here, amp * (nb as f64).sqrt());
                    }
                }
                // b S₊ lowers the phonon and raises m.
                if nb >= 1 && a >= 1 {
                    push(idx(na, nb - 1, a - 1), here, spec.g * (nb as f64).sqrt() * ladder_up(j, m));
                }
            }
        }
    }
    let hamiltonian = CsrMatrix::from_triplets(dim, t);
    Ok(TruncatedModel { spec: *spec, j, spin_dim: ds, hamiltonian })
}

/// `exp(−iHt)v` by restarted Lanczos with full reorthogonalization. Each
/// restart takes the longest step whose a posteriori error estimate is below `tol`.
pub fn expm_multiply(h: &CsrMatrix, v: &[Complex64], t: f64, tol: f64, max_krylov: usize) -> Result<Vec<Complex64>> {
    let dim = h.dim;
    let mut w = v.to_vec();
    let mut remaining = t;
    let mut restarts = 0usize;
    let m_max = max_krylov.clamp(2, dim.max(2));
    // Work with H/‖H‖ so the error estimate's roundoff floor stays near machine epsilon.
    let scale = h.norm_inf().max(f64::MIN_POSITIVE);
    let dot = |a: &[Complex64], b: &[Complex64]| a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<Complex64>();
    while remaining.abs() > 0.0 {
        restarts += 1;
        if restarts > 1_000_000 {
            return Err(Error::Convergence { iterations: restarts, residual: remaining.abs() });
        }
        let beta0 = dot(&w, &w).re.sqrt();
        if beta0 == 0.0 {
            return Ok(w);
        }
        let mut basis: Vec<Vec<Complex64>> = vec![w.iter().map(|x| x / beta0).collect()];
        let mut alphas = Vec::new();
        let mut betas = Vec::new();
        let mut hv = vec![Complex64::new(0.0, 0.0); dim];
        let mut breakdown = false;
        for k in 0..m_max {
            h.matvec(&basis[k], &mut hv);
            let alpha = dot(&basis[k], &hv).re;
            alphas.push(alpha);
            let mut next = hv.clone();
            for q in &basis {
                let proj = dot(q, &next);
                for (x, y) in next.iter_mut().zip(q) {
                    *x -= proj * y;
                }
            }
            let b = dot(&next, &next).re.sqrt();
            betas.push(b);
            if b <= 1e-13 * (alpha.abs() + 1.0) || k + 1 == dim {
                breakdown = true;
                break;
            }
            if k + 1 < m_max {
                basis.push(next.iter().map(|x| x / b).collect());
            }
        }
        let m = alphas.len();
        let tri = DMatrix::from_fn(m, m, |a, b| {
            if a == b {
                alphas[a] / scale
            } else if a + 1 == b || b + 1 == a {
                betas[a.min(b)] / scale
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(tri);
        let coeffs = |dt: f64| -> DVector<Complex64> {
            DVector::from_fn(m, |a, _| {
                (0..m)
                    .map(|k| Complex64::from_polar(1.0, -eig.eigenvalues[k] * dt * scale) * eig.eigenvectors[(a, k)] * eig.eigenvectors[(0, k)])
                    .sum::<Complex64>()
            })
        };
        let mut dt = remaining;
        let mut y = coeffs(dt);
        if !breakdown {
            let residual_beta = betas[m - 1] / scale;
            while beta0 * residual_beta * y[m - 1].norm() > tol * beta0 {
                dt *= 0.5;
                if dt.abs() < 1e-300 {
                    return Err(Error::Convergence { iterations: restarts, residual: remaining.abs() });
                }
                y = coeffs(dt);
            }
        }
        let mut out = vec![Complex64::new(0.0, 0.0); dim];
        for (k, q) in basis.iter().enumerate().take(m) {
            let s = y[k] * beta0;
            for (o, x) in out.iter_mut().zip(q) {
                *o += s * x;
            }
        }
        w = out;
        remaining -= dt;
        if remaining.abs() <= 1e-14 * t.abs() {
            break;
        }
    }
    Ok(w)
}

/// First-order dispersive generator `S = (g/ω_r)(b'†Ξ − b'Ξ†)` with the squeezed
/// phonon `b' = cosh r b + sinh r b†`, so that `e^S H e^{−S}` has no linear
/// spin-phonon term. In lab operators it is
/// `(g/ω_r)[cosh 2r (b†S₋ − bS₊) + sinh 2r (bS₋ − b†S₊)]`. Real antisymmetric.
pub fn dispersive_generator(model: &TruncatedModel, r: f64, omega_r: f64) -> CsrMatrix {
    let (n_a, n_b, ds, j) = (model.spec.n_a, model.spec.n_b, model.spin_dim, model.j);
    let scale = -model.spec.g / omega_r;
    let (ch, sh) = ((2.0 * r).cosh(), (2.0 * r).sinh());
    let mut t = Vec::new();
    for na in 0..n_a {
        for nb in 0..n_b {
            for a in 0..ds {
                let m = j - a as f64;
                let here = model.index(na, nb, a);
                // Raising m (a → a−1) with b lowers, with b† raises the phonon.
                if a >= 1 {
                    let up = ladder_up(j, m);
                    if nb >= 1 {
                        let v = scale * ch * (nb as f64).sqrt() * up;
                        t.push((model.index(na, nb - 1, a - 1), here, v));
                        t.push((here, model.index(na, nb - 1, a - 1), -v));
                    }
                    if nb + 1 < n_b {
                        let v = scale * sh * ((nb + 1) as f64).sqrt() * up;
                        t.push((model.index(na, nb + 1, a - 1), here, v));
                        t.push((here, model.index(na, nb + 1, a - 1), -v));
                    }
                }
            }
        }
    }
    CsrMatrix::from_triplets(model.dimension(), t)
}

/// `exp(sign·S)v` for a small-norm real generator by a truncated Taylor series.
pub fn apply_generator_exp(s: &CsrMatrix, v: &[Complex64], sign: f64) -> Vec<Complex64> {
    let mut out = v.to_vec();
    let mut term = v.to_vec();
    let mut next = vec![Complex64::new(0.0, 0.0); v.len()];
    for k in 1..200 {
        s.matvec(&term, &mut next);
        let f = sign / k as f64;
        for (t, n) in term.iter_mut().zip(next.iter()) {
            *t = n * f;
        }
        let size: f64 = term.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for (o, t) in out.iter_mut().zip(term.iter()) {
            *o += t;
        }
        if size < 1e-16 {
            break;
        }
    }
    out
}

/// Squeezed vacuum `exp(r/2 (b² − b†²))|0⟩` in a truncated Fock basis, renormalized.
pub fn squeezed_vacuum(r: f64, levels: usize) -> Vec<f64> {
    let mut amp = vec![0.0; levels];
    let th = r.tanh();
    let mut a = 1.0 / r.cosh().sqrt();
    for k in 0..levels.div_ceil(2) {
        let n = 2 * k;
        if n >= levels {
            break;
        }
        amp[n] = a;
        // c_{2k+2}/c_{2k} = −tanh r · √((2k+1)(2k+2)) / (2(k+1)).
        a *= -th * (((n + 1) * (n + 2)) as f64).sqrt() / (2.0 * (k + 1) as f64);
    }
    let norm = amp.iter().map(|x| x * x).sum::<f64>().sqrt();
    amp.iter().map(|x| x / norm).collect()
}

/// Frame in which the full-model spin is prepared and measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComparisonFrame {
    /// Product initial state, bare spin operators.
    Lab,
    /// Initial state and measurement mapped through the first-order dispersive
    /// generator, which removes the phonon-frequency micromotion.
    Dressed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyOptions {
    pub n_a: usize,
    pub n_b: usize,
    /// Hierarchy bound on G/|Δ−ω_b| and g/|ω_r−Ω|.
    pub dispersive_factor: f64,
    /// Start the phonon in the lab vacuum instead of the squeezed-frame vacuum.
    pub plain_vacuum: bool,
    pub leakage_threshold: f64,
    pub krylov_tol: f64,
    pub max_dimension: usize,
    /// Return `RegimeError` instead of a flagged report.
    pub strict: bool,
    pub frame: ComparisonFrame,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            n_a: 6,
            n_b: 10,
            dispersive_factor: 0.1,
            plain_vacuum: false,
            leakage_threshold: 1e-6,
            krylov_tol: 1e-10,
            max_dimension: DEFAULT_MAX_DIMENSION,
            strict: false,
            frame: ComparisonFrame::Lab,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub n_spins: usize,
    pub n_a: usize,
    pub n_b: usize,
    pub dimension: usize,
    /// G/|Δ−ω_b|.
    pub photon_ratio: f64,
    /// g/|ω_r−Ω|.
    pub phonon_ratio: f64,
    pub phonon_initial: String,
    pub frame: ComparisonFrame,
    pub times: Vec<f64>,
    pub xi2_full: Vec<f64>,
    pub xi2_effective: Vec<f64>,
    /// Grid points compared: up to and including the effective minimum.
    pub compared_points: usize,
    pub t_minimum_effective: f64,
    pub max_abs_deviation: f64,
    pub max_relative_deviation: f64,
    pub max_leakage: f64,
    pub norm_drift: f64,
    pub flags: Vec<String>,
}

impl ComparisonReport {
    pub fn regime_ok(&self) -> bool {
        !self.flags.iter().any(|f| f.starts_with("regime"))
    }
}

/// Evolve the CSS along x under the truncated linearized Hamiltonian and under
/// the effective spin Hamiltonian, and compare ξ²(t) up to the effective minimum.
pub fn verify_effective_reduction(
    params: &DerivedParams,
    n_spins: usize,
    t_grid: &[f64],
    opts: &VerifyOptions,
) -> Result<ComparisonReport> {
    let photon_ratio = params.coupling_g.abs() / (params.delta - params.omega_b).abs();
    let phonon_ratio = params.g.abs() / (params.omega_r - params.omega).abs();
    let mut flags = Vec::new();
    if !(photon_ratio <= opts.dispersive_factor) {
        flags.push(format!("regime: G/|Delta-omega_b| = {photon_ratio:.4} exceeds {}", opts.dispersive_factor));
    }
    if !(phonon_ratio <= opts.dispersive_factor) {
        flags.push(format!("regime: g/|omega_r-Omega| = {phonon_ratio:.4} exceeds {}", opts.dispersive_factor));
    }
    if opts.strict && !flags.is_empty() {
        return Err(Error::Regime(flags.join("; ")));
    }
    for f in &flags {
        log::warn!("{f}");
    }

    let mut spec = ModelSpec::from_params(params, n_spins, opts.n_a, opts.n_b);
    spec.max_dimension = opts.max_dimension;
    let model = build_linearized_hamiltonian(&spec)?;
    let j = model.j;
    let css = css_state(j, std::f64::consts::FRAC_PI_2, 0.0)?;
    let phonon = if opts.plain_vacuum {
        let mut v = vec![0.0; opts.n_b];
        v[0] = 1.0;
        v
    } else {
        squeezed_vacuum(params.r, opts.n_b)
    };
    let mut psi = vec![Complex64::new(0.0, 0.0); model.dimension()];
    for (nb, &pb) in phonon.iter().enumerate() {
        for a in 0..model.spin_dim {
            psi[model.index(0, nb, a)] = css.amplitudes[a] * pb;
        }
    }

    let generator = match opts.frame {
        ComparisonFrame::Lab => None,
        ComparisonFrame::Dressed => Some(dispersive_generator(&model, params.r, params.omega_r)),
    };
    if let Some(s) = &generator {
        psi = apply_generator_exp(s, &psi, -1.0);
    }

    let effective = evolve_pure(&css, n_spins, &HamiltonianCoefficients::from_params(params), t_grid)?;
    let xi2_effective = effective.xi2();

    let mut xi2_full = Vec::with_capacity(t_grid.len());
    let (mut max_leakage, mut norm_drift) = (0.0f64, 0.0f64);
    let mut t_prev = 0.0;
    for &t in t_grid {
        if t != t_prev {
            psi = expm_multiply(&model.hamiltonian, &psi, t - t_prev, opts.krylov_tol, 40)?;
            t_prev = t;
        }
        let norm2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        norm_drift = norm_drift.max((norm2 - 1.0).abs());
        max_leakage = max_leakage.max(model.leakage(&psi));
        let mom = match &generator {
            None => model.spin_moments(&psi),
            Some(s) => model.spin_moments(&apply_generator_exp(s, &psi, 1.0)),
        };
        xi2_full.push(squeezing_parameter(&mom, n_spins).map(|s| s.xi2).unwrap_or(f64::NAN));
    }
    if max_leakage > opts.leakage_threshold {
        let msg = format!("cutoff: leakage {max_leakage:e} into the top Fock levels exceeds {:e}", opts.leakage_threshold);
        log::warn!("{msg}");
        flags.push(msg);
    }

    let argmin = xi2_effective
        .iter()
        .enumerate()
        .filter(|(_, x)| x.is_finite())
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let compared_points = if t_grid.is_empty() { 0 } else { argmin + 1 };
    let (mut max_abs, mut max_rel) = (0.0f64, 0.0f64);
    for i in 0..compared_points {
        let d = (xi2_full[i] - xi2_effective[i]).abs();
        max_abs = max_abs.max(d);
        max_rel = max_rel.max(d / xi2_effective[i].abs());
    }
    Ok(ComparisonReport {
        n_spins,
        n_a: opts.n_a,
        n_b: opts.n_b,
        dimension: model.dimension(),
        photon_ratio,
        phonon_ratio,
        phonon_initial: if opts.plain_vacuum { "vacuum" } else { "squeezed_vacuum" }.into(),
        frame: opts.frame,
        times: t_grid.to_vec(),
        xi2_full,
        xi2_effective,
        compared_points,
        t_minimum_effective: t_grid.get(argmin).copied().unwrap_or(0.0),
        max_abs_deviation: max_abs,
        max_relative_deviation: max_rel,
        max_leakage,
        norm_drift,
        flags,
    })
}
