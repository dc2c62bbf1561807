//! Linearized second-moment equations for the two-axis scheme, their
//! closed-form short-time solution and optimum, and the large-N floor.
//!
//! Valid only while the mean spin stays near `N/2 x̂`; ξ² here uses
//! `|⟨S⟩|² = N²/4` throughout.

use std::f64::consts::SQRT_2;

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::optim::golden_section;
use crate::params::{DerivedParams, Scheme};

#[derive(Debug, Clone, PartialEq)]
pub struct MomentSystem {
    /// Rows/cols ordered as (⟨Sy²⟩, ⟨Sz²⟩, ⟨{Sy,Sz}⟩/2).
    pub a: Matrix3<f64>,
    pub m: Vector3<f64>,
    pub x0: Vector3<f64>,
    pub chi: f64,
    pub c: f64,
    pub t2: f64,
    pub n_spins: usize,
}

/// Assemble `dX/dt = A X + M` for the two-axis (y–z) Hamiltonian.
pub fn build_moment_system(params: &DerivedParams, n_spins: usize) -> Result<MomentSystem> {
    if params.scheme != Scheme::TatYz {
        return Err(Error::Scheme(format!(
            "moment equations are derived for the TAT_yz scheme, got {}",
            params.scheme
        )));
    }
    Ok(moment_system_raw(params.chi, params.c, params.t2, n_spins))
}

/// Same as [`build_moment_system`] without the scheme check.
pub fn moment_system_raw(chi: f64, c: f64, t2: f64, n_spins: usize) -> MomentSystem {
    let n = n_spins as f64;
    let inv_t2 = if t2.is_finite() { 1.0 / t2 } else { 0.0 };
    let k = SQRT_2 * chi * n;
    let a = Matrix3::new(
        -(c + 2.0 * inv_t2), c, k, //
        c, -5.0 * c, k, //
        0.5 * k, 0.5 * k, -(4.0 * c + inv_t2),
    );
    let m = Vector3::new(0.5 * n * inv_t2, c * n * (n + 2.0), 0.0);
    let x0 = Vector3::new(0.25 * n, 0.25 * n, 0.0);
    MomentSystem { a, m, x0, chi, c, t2, n_spins }
}

/// `ξ² = (4/N)(V₊ − √(V₋² + 4C²))/2` with `V± = ⟨Sy²⟩ ± ⟨Sz²⟩`.
pub fn xi2_from_moments(x: &Vector3<f64>, n_spins: usize) -> f64 {
    let vp = x[0] + x[1];
    let vm = x[0] - x[1];
    (2.0 / n_spins as f64) * (vp - (vm * vm + 4.0 * x[2] * x[2]).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentTrajectory {
    pub n_spins: usize,
    pub times: Vec<f64>,
    pub x: Vec<[f64; 3]>,
    pub xi2: Vec<f64>,
}

impl MomentSystem {
    /// `X(t)` from the exponential of the augmented generator `[[A, M], [0, 0]]`,
    /// which needs no inverse of A.
    pub fn state_at(&self, t: f64) -> Vector3<f64> {
        let mut g = Matrix4::zeros();
        g.fixed_view_mut::<3, 3>(0, 0).copy_from(&(self.a * t));
        g.fixed_view_mut::<3, 1>(0, 3).copy_from(&(self.m * t));
        let e = g.exp();
        let y = e * Vector4::new(self.x0[0], self.x0[1], self.x0[2], 1.0);
        Vector3::new(y[0], y[1], y[2])
    }

    pub fn xi2_at(&self, t: f64) -> f64 {
        xi2_from_moments(&self.state_at(t), self.n_spins)
    }

    /// Numerical minimum of ξ²(t): log-spaced scan, then golden-section refinement.
    pub fn numerical_minimum(&self) -> Result<(f64, f64)> {
        let n = self.n_spins as f64;
        let scale = 1.0 / (SQRT_2 * n * self.chi);
        let grid: Vec<f64> = (0..=400).map(|k| scale * 10f64.powf(-3.0 + 6.0 * k as f64 / 400.0)).collect();
        let vals: Vec<f64> = grid.iter().map(|&t| self.xi2_at(t)).collect();
        let (idx, _) = vals
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_finite())
            .min_by(|a, b| a.1.total_cmp(b.1))
            .ok_or_else(|| Error::Domain("moment solution not finite".into()))?;
        if idx == 0 || idx + 1 == grid.len() {
            return Err(Error::Domain("no interior minimum of the moment solution".into()));
        }
        let (t, v, _) = golden_section(|t| self.xi2_at(t), grid[idx - 1], grid[idx + 1], 1e-12, 300);
        Ok((t, v))
    }
}

pub fn solve_moments(sys: &MomentSystem, t_grid: &[f64]) -> Result<MomentTrajectory> {
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("time grid must be strictly increasing".into()));
    }
    let x: Vec<[f64; 3]> = t_grid.iter().map(|&t| sys.state_at(t).into()).collect();
    let xi2 = x.iter().map(|v| xi2_from_moments(&Vector3::from(*v), sys.n_spins)).collect();
    Ok(MomentTrajectory { n_spins: sys.n_spins, times: t_grid.to_vec(), x, xi2 })
}

impl MomentTrajectory {
    /// Rows in the trajectory CSV schema with a trailing `source` column.
    pub fn to_csv(&self, source: &str) -> String {
        let n = self.n_spins as f64;
        let mut out = format!("{},source\n", crate::open_dynamics::CSV_HEADER);
        for ((t, x), xi2) in self.times.iter().zip(&self.x).zip(&self.xi2) {
            out.push_str(&format!(
                "{t:.12e},{:.12e},0,0,{:.12e},{:.12e},{:.12e},{:.12e},0,0,{xi2:.12e},{:.12e},1,nan,{source}\n",
                0.5 * n,
                x[0],
                x[1],
                0.25 * n * n,
                x[2],
                10.0 * xi2.log10()
            ));
        }
        out
    }
}

/// Closed-form moments `(⟨Sy²−Sz²⟩, ⟨Sy²+Sz²⟩, C_yz)` valid for `Nχt ≫ 1` and weak dissipation.
pub fn closed_form_moments(params_chi: f64, c: f64, t2: f64, n_spins: usize, t: f64) -> [f64; 3] {
    let opt = coefficients(params_chi, c, t2, n_spins);
    let lam = SQRT_2 * n_spins as f64 * params_chi;
    let (ep, em) = ((lam * t).exp(), (-lam * t).exp());
    [
        -opt.p * t,
        2.0 * opt.a_plus * ep + 2.0 * opt.a_minus * em,
        opt.a_plus * (ep - 1.0) - opt.a_minus * (em - 1.0),
    ]
}

struct Coefficients {
    a_plus: f64,
    a_minus: f64,
    p: f64,
}

fn coefficients(chi: f64, c: f64, t2: f64, n_spins: usize) -> Coefficients {
    let n = n_spins as f64;
    let inv_t2 = if t2.is_finite() { 1.0 / t2 } else { 0.0 };
    let common = SQRT_2 / (4.0 * chi) * (c + 0.25 * inv_t2);
    Coefficients {
        a_plus: n / 8.0 * (1.0 + SQRT_2 * c / chi) + common,
        a_minus: n / 8.0 * (1.0 - SQRT_2 * c / chi) - common,
        p: n * (c * n + 2.0 * c - 0.5 * inv_t2),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalyticOptimum {
    pub t_min: f64,
    pub xi2_min: f64,
    /// Signed as printed; negative in the physical regime.
    pub theta: f64,
    pub m_factor: f64,
    pub a_plus: f64,
    pub a_minus: f64,
    pub p: f64,
    pub log_argument: f64,
    pub warnings: Vec<String>,
}

/// Closed-form optimum time and squeezing. `t_min = |Θ|/(√2Nχ)`.
pub fn analytic_optimum(params: &DerivedParams, n_spins: usize) -> Result<AnalyticOptimum> {
    analytic_optimum_raw(params.chi, params.c, params.t2, n_spins)
}

pub fn analytic_optimum_raw(chi: f64, c: f64, t2: f64, n_spins: usize) -> Result<AnalyticOptimum> {
    let mut warnings = Vec::new();
    if n_spins < 20 {
        let msg = format!("N = {n_spins} is outside the large-N regime of the closed form");
        log::warn!("{msg}");
        warnings.push(msg);
    }
    let n = n_spins as f64;
    let inv_t2 = if t2.is_finite() { 1.0 / t2 } else { 0.0 };
    let Coefficients { a_plus, a_minus, p } = coefficients(chi, c, t2, n_spins);
    let log_argument = 1.0 - (2.0 * chi * a_minus + SQRT_2 * 0.5 * inv_t2) / (2.0 * chi * a_plus);
    if !(log_argument > 0.0) {
        return Err(Error::Domain(format!("log argument {log_argument:e} of the optimum time is not positive")));
    }
    let theta = log_argument.ln();
    let ratio = a_minus / a_plus;
    let m_factor = 1.0 + ratio / (2.0 * theta).exp()
        - (theta * theta + (1.0 - (-theta).exp()).powi(2) * (1.0 + ratio / theta.exp()).powi(2)).sqrt();
    let prefactor = SQRT_2 * c / chi + (2.0 * SQRT_2 * c / chi - SQRT_2 / (2.0 * chi) * inv_t2) / n;
    Ok(AnalyticOptimum {
        t_min: theta.abs() / (SQRT_2 * n * chi),
        xi2_min: prefactor * m_factor,
        theta,
        m_factor,
        a_plus,
        a_minus,
        p,
        log_argument,
        warnings,
    })
}

/// Large-N squeezing floor as a function of ε; 0 at ε = 0 by continuity.
pub fn bound_from_epsilon(eps: f64) -> Result<f64> {
    if !(0.0..2.0).contains(&eps) {
        return Err(Error::Domain(format!("epsilon = {eps} outside [0, 2)")));
    }
    if eps == 0.0 {
        return Ok(0.0);
    }
    let l = eps.ln();
    let x = (1.0 - eps) / (eps * eps);
    // 1 + x − √(l² + x²), rewritten to avoid cancellation when x ≫ |l|.
    let bracket = if x > 0.0 { 1.0 - l * l / (x + (x * x + l * l).sqrt()) } else { 1.0 + x - (x * x + l * l).sqrt() };
    Ok(eps / (2.0 - eps) * bracket)
}

pub fn asymptotic_bound(params: &DerivedParams) -> Result<f64> {
    bound_from_epsilon(params.epsilon)
}
