//! Master-equation dynamics in the permutation-invariant block representation,
//! a closed-system fast path for pure states, and a product-space oracle.

mod block;
pub mod brute_force;
pub mod integrator;
mod liouvillian;

use std::ops::ControlFlow;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;

use crate::dicke::StateVector;
use crate::error::{Error, Result};
use crate::hamiltonian::HamiltonianCoefficients;
use crate::metrics::{squeezing_parameter, Moments};

pub use block::BlockDensityMatrix;
pub use brute_force::{brute_force_evolve, trace_distance, ProductSpace};
pub use integrator::{IntegrationStats, StepControl};
pub use liouvillian::{build_liouvillian, build_liouvillian_with, Liouvillian, Rates, DEFAULT_MAX_SPINS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryRecord {
    pub t: f64,
    pub moments: Moments,
    /// NaN when the mean spin vanishes.
    pub xi2: f64,
    pub xi2_db: f64,
    pub trace: f64,
    pub purity: f64,
    pub hermiticity_error: f64,
    /// Smallest block eigenvalue, when it was checked at this record.
    pub min_eigenvalue: Option<f64>,
}

impl TrajectoryRecord {
    pub fn new(
        t: f64,
        moments: Moments,
        n_spins: usize,
        trace: f64,
        purity: f64,
        hermiticity_error: f64,
        min_eigenvalue: Option<f64>,
    ) -> Self {
        let xi2 = squeezing_parameter(&moments, n_spins).map(|r| r.xi2).unwrap_or(f64::NAN);
        TrajectoryRecord { t, moments, xi2, xi2_db: 10.0 * xi2.log10(), trace, purity, hermiticity_error, min_eigenvalue }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Trajectory {
    pub n_spins: usize,
    pub records: Vec<TrajectoryRecord>,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub stats: IntegrationStats,
    /// State one record before the lowest ξ², when requested.
    #[serde(skip)]
    pub checkpoint: Option<(f64, BlockDensityMatrix)>,
}

pub const CSV_HEADER: &str = "t,Sx,Sy,Sz,Sy2,Sz2,Sx2,Cyz,Cxy,Cxz,xi2,xi2_dB,trace,purity";

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }

    pub fn xi2(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.xi2).collect()
    }

    pub fn csv_rows(&self, extra: &str) -> String {
        let mut out = String::new();
        for r in &self.records {
            let m = &r.moments;
            out.push_str(&format!(
                "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}{extra}\n",
                r.t, m.sx, m.sy, m.sz, m.sy2, m.sz2, m.sx2, m.cyz, m.cxy, m.cxz, r.xi2, r.xi2_db, r.trace, r.purity
            ));
        }
        out
    }

    pub fn to_csv(&self) -> String {
        format!("{CSV_HEADER}\n{}", self.csv_rows(""))
    }

    /// Largest |trace − 1| over the records.
    pub fn max_trace_drift(&self) -> f64 {
        self.records.iter().map(|r| (r.trace - 1.0).abs()).fold(0.0, f64::max)
    }
}

/// Stop once ξ² has climbed back by `rise` of the way from its running minimum to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EarlyStop {
    pub rise: f64,
    /// Records required past the running minimum before stopping.
    pub min_records_after: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolveOptions {
    pub control: StepControl,
    /// Check block eigenvalues every this many records (0: only at the last record).
    pub positivity_every: usize,
    /// Clip negative eigenvalues at every output time.
    pub project_psd: bool,
    pub early_stop: Option<EarlyStop>,
    /// Keep the state one record before the running ξ² minimum.
    pub checkpoint_before_min: bool,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions { control: StepControl::default(), positivity_every: 10, project_psd: false, early_stop: None, checkpoint_before_min: false }
    }
}

struct Recorder<'a> {
    opts: &'a EvolveOptions,
    n_spins: usize,
    best: f64,
    best_index: usize,
    records: Vec<TrajectoryRecord>,
    warnings: Vec<String>,
    previous: Option<(f64, Vec<Complex64>)>,
    checkpoint: Option<(f64, Vec<Complex64>)>,
}

impl Recorder<'_> {
    fn record(&mut self, index: usize, last: bool, t: f64, rho: &BlockDensityMatrix) -> ControlFlow<()> {
        let check = last || (self.opts.positivity_every > 0 && index % self.opts.positivity_every == 0);
        let min_eig = check.then(|| rho.min_eigenvalue());
        if let Some(e) = min_eig {
            if e < -10.0 * self.opts.control.rtol {
                let msg = format!("positivity: block eigenvalue {e:e} at t = {t:e}");
                log::warn!("{msg}");
                self.warnings.push(msg);
            }
        }
        let rec = TrajectoryRecord::new(t, rho.moments(), self.n_spins, rho.trace(), rho.purity(), rho.hermiticity_error(), min_eig);
        let xi2 = rec.xi2;
        self.records.push(rec);
        let k = self.records.len() - 1;
        if xi2 < self.best {
            self.best = xi2;
            self.best_index = k;
            if self.opts.checkpoint_before_min {
                std::mem::swap(&mut self.checkpoint, &mut self.previous);
            }
        }
        if self.opts.checkpoint_before_min {
            match &mut self.previous {
                Some((tp, buf)) => {
                    *tp = t;
                    buf.copy_from_slice(&rho.data);
                }
                None => self.previous = Some((t, rho.data.clone())),
            }
        }
        if let Some(stop) = self.opts.early_stop {
            let past = k - self.best_index;
            let climbed = xi2.is_nan() || xi2 > self.best + stop.rise * (1.0 - self.best).max(0.0);
            if past >= stop.min_records_after && climbed && self.best < 1.0 {
                return ControlFlow::Break(());
            }
        }
        ControlFlow::Continue(())
    }
}

/// Integrate the master equation from `rho0` and record moments at `t_grid`.
pub fn evolve(rho0: &BlockDensityMatrix, l: &Liouvillian, t_grid: &[f64], opts: &EvolveOptions) -> Result<Trajectory> {
    evolve_from(rho0, 0.0, l, t_grid, opts)
}

/// As [`evolve`], with `rho0` given at time `t0 ≤ t_grid[0]`.
pub fn evolve_from(rho0: &BlockDensityMatrix, t0: f64, l: &Liouvillian, t_grid: &[f64], opts: &EvolveOptions) -> Result<Trajectory> {
    if rho0.layout != l.layout {
        return Err(Error::Domain("state and Liouvillian have different block layouts".into()));
    }
    if t_grid.first().is_some_and(|&t| t < t0) {
        return Err(Error::Domain(format!("output grid starts before t0 = {t0:e}")));
    }
    let n_spins = l.n_spins();
    let mut rec = Recorder {
        opts,
        n_spins,
        best: f64::INFINITY,
        best_index: 0,
        records: Vec::new(),
        warnings: Vec::new(),
        previous: None,
        checkpoint: None,
    };
    let last = t_grid.len().saturating_sub(1);
    let mut scratch = rho0.clone();
    let mut stats = IntegrationStats::default();

    if !opts.project_psd {
        stats = integrator::integrate(
            |_, y, dy| l.apply(y, dy),
            t0,
            &rho0.data,
            t_grid,
            &opts.control,
            |i, t, y| {
                scratch.data.copy_from_slice(y);
                rec.record(i, i == last, t, &scratch)
            },
        )?;
    } else {
        // Restart at each output time from the projected state.
        let mut t_prev = t0;
        for (i, &t) in t_grid.iter().enumerate() {
            if t > t_prev {
                let mut out = None;
                let s = integrator::integrate(|_, y, dy| l.apply(y, dy), t_prev, &scratch.data, &[t], &opts.control, |_, _, y| {
                    out = Some(y.to_vec());
                    ControlFlow::Continue(())
                })?;
                stats.accepted += s.accepted;
                stats.rejected += s.rejected;
                stats.rhs_evaluations += s.rhs_evaluations;
                scratch.data = out.expect("endpoint recorded");
                t_prev = t;
            }
            scratch.project_psd();
            if rec.record(i, i == last, t, &scratch).is_break() {
                stats.stopped_early = true;
                break;
            }
        }
    }
    let checkpoint = rec.checkpoint.map(|(t, data)| {
        let mut state = rho0.clone();
        state.data = data;
        (t, state)
    });
    Ok(Trajectory { n_spins, records: rec.records, warnings: rec.warnings, stats, checkpoint })
}

/// Integrate from `rho0` at t = 0 to a single time and return the state.
pub fn evolve_state(rho0: &BlockDensityMatrix, l: &Liouvillian, t: f64, control: &StepControl) -> Result<BlockDensityMatrix> {
    if rho0.layout != l.layout {
        return Err(Error::Domain("state and Liouvillian have different block layouts".into()));
    }
    let mut out = rho0.clone();
    integrator::integrate(|_, y, dy| l.apply(y, dy), 0.0, &rho0.data, &[t], control, |_, _, y| {
        out.data.copy_from_slice(y);
        ControlFlow::Continue(())
    })?;
    Ok(out)
}

/// Dense real symmetric Hamiltonian on a single j block.
pub fn dense_block_hamiltonian(j: f64, k: &HamiltonianCoefficients) -> DMatrix<f64> {
    let dim = (2.0 * j).round() as usize + 1;
    let mut h = DMatrix::zeros(dim, dim);
    for a in 0..dim {
        h[(a, a)] = k.diagonal(j, j - a as f64);
        if a + 2 < dim {
            let off = k.second_off_diagonal(j, j - (a + 2) as f64);
            h[(a, a + 2)] = off;
            h[(a + 2, a)] = off;
        }
    }
    h
}

/// Closed-system evolution of a pure block state by exact diagonalization.
pub fn evolve_pure(state: &StateVector, n_spins: usize, k: &HamiltonianCoefficients, t_grid: &[f64]) -> Result<Trajectory> {
    if (state.j - n_spins as f64 / 2.0).abs() > 1e-9 {
        return Err(Error::Domain("pure-state evolution expects a state on the maximal-j block".into()));
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("time grid must be strictly increasing".into()));
    }
    let eig = SymmetricEigen::new(dense_block_hamiltonian(state.j, k));
    let v = eig.eigenvectors.map(|x| Complex64::new(x, 0.0));
    let coeff = v.transpose() * &state.amplitudes;
    let records = t_grid
        .iter()
        .map(|&t| {
            let phased = DVector::from_fn(coeff.len(), |i, _| coeff[i] * Complex64::from_polar(1.0, -eig.eigenvalues[i] * t));
            let psi = StateVector { j: state.j, amplitudes: &v * phased };
            let norm = psi.amplitudes.norm_squared();
            TrajectoryRecord::new(t, Moments::from_state(&psi), n_spins, norm, norm * norm, 0.0, None)
        })
        .collect();
    Ok(Trajectory { n_spins, records, warnings: Vec::new(), stats: IntegrationStats::default(), checkpoint: None })
}

/// Amplitudes of a pure block state at a single time.
pub fn propagate_pure(state: &StateVector, k: &HamiltonianCoefficients, t: f64) -> StateVector {
    let eig = SymmetricEigen::new(dense_block_hamiltonian(state.j, k));
    let v = eig.eigenvectors.map(|x| Complex64::new(x, 0.0));
    let coeff = v.transpose() * &state.amplitudes;
    let phased = DVector::from_fn(coeff.len(), |i, _| coeff[i] * Complex64::from_polar(1.0, -eig.eigenvalues[i] * t));
    StateVector { j: state.j, amplitudes: &v * phased }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dicke::css_state;
    use std::f64::consts::FRAC_PI_2;

    fn oat() -> HamiltonianCoefficients {
        HamiltonianCoefficients { chi_tilde: 1.0, tanh2r: 0.0, omega_tilde: 0.0 }
    }

    #[test]
    fn zero_time_is_initial_state() {
        let s = css_state(3.0, FRAC_PI_2, 0.0).unwrap();
        let rho = BlockDensityMatrix::from_top_state(6, &s).unwrap();
        let l = build_liouvillian_with(6, oat(), Rates { dephasing: 1.0, emission: 0.5, absorption: 0.1, r: 0.1 }, 64).unwrap();
        let tr = evolve(&rho, &l, &[0.0], &EvolveOptions::default()).unwrap();
        assert_eq!(tr.records.len(), 1);
        assert_eq!(tr.records[0].moments, rho.moments());
        assert_eq!(tr.records[0].xi2, squeezing_parameter(&rho.moments(), 6).unwrap().xi2);
    }

    #[test]
    fn closed_system_matches_diagonalization() {
        let n = 20;
        let k = HamiltonianCoefficients { chi_tilde: 1.0, tanh2r: 1.0 / 3.0, omega_tilde: 0.3 };
        let s = css_state(n as f64 / 2.0, FRAC_PI_2, 0.0).unwrap();
        let rho = BlockDensityMatrix::from_top_state(n, &s).unwrap();
        let l = build_liouvillian_with(n, k, Rates::default(), 64).unwrap();
        let grid: Vec<f64> = (0..=10).map(|i| 0.02 * i as f64).collect();
        let opts = EvolveOptions { control: StepControl { rtol: 1e-11, atol: 1e-14, ..Default::default() }, ..Default::default() };
        let a = evolve(&rho, &l, &grid, &opts).unwrap();
        let b = evolve_pure(&s, n, &k, &grid).unwrap();
        for (x, y) in a.records.iter().zip(&b.records) {
            assert!((x.xi2 - y.xi2).abs() < 1e-9, "{} vs {}", x.xi2, y.xi2);
            assert!((x.moments.sy2 - y.moments.sy2).abs() < 1e-8);
        }
    }

    #[test]
    fn single_spin_dephasing_decay() {
        let t2 = 0.5;
        let zero = HamiltonianCoefficients { chi_tilde: 0.0, tanh2r: 0.0, omega_tilde: 0.0 };
        let l = build_liouvillian_with(1, zero, Rates { dephasing: 0.5 / t2, ..Default::default() }, 4).unwrap();
        let s = css_state(0.5, FRAC_PI_2, 0.0).unwrap();
        let rho = BlockDensityMatrix::from_top_state(1, &s).unwrap();
        let grid: Vec<f64> = (0..=8).map(|i| 0.25 * i as f64).collect();
        let tr = evolve(&rho, &l, &grid, &EvolveOptions::default()).unwrap();
        for r in &tr.records {
            // ⟨σx⟩ = 2⟨Sx⟩.
            assert!((2.0 * r.moments.sx - (-r.t / t2).exp()).abs() < 1e-9);
        }
    }

    #[test]
    fn early_stop_after_minimum() {
        let n = 10;
        let s = css_state(5.0, FRAC_PI_2, 0.0).unwrap();
        let grid: Vec<f64> = (0..200).map(|i| 0.01 * i as f64).collect();
        let rho = BlockDensityMatrix::from_top_state(n, &s).unwrap();
        let l = build_liouvillian_with(n, oat(), Rates::default(), 64).unwrap();
        let opts = EvolveOptions { early_stop: Some(EarlyStop { rise: 0.2, min_records_after: 3 }), ..Default::default() };
        let tr = evolve(&rho, &l, &grid, &opts).unwrap();
        assert!(tr.stats.stopped_early);
        assert!(tr.records.len() < 200);
    }
}
