//! Time scans, N-scaling fits, ω_r optimization and asymptote extraction.
//!
//! Every scan is deterministic: grids are fixed by the configuration, parallel
//! work is collected in input order, and nothing is sampled.

mod fit;

use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dicke::css_state;
use crate::error::{Error, Result};
use crate::full_model::{verify_effective_reduction, ComparisonReport, VerifyOptions};
use crate::hamiltonian::HamiltonianCoefficients;
use crate::metrics::{find_minimum, husimi_q, husimi_q_pure, HusimiField, MinimumReport};
use crate::moments::{analytic_optimum, asymptotic_bound, build_moment_system, solve_moments, AnalyticOptimum, MomentTrajectory};
use crate::open_dynamics::{
    build_liouvillian, evolve, evolve_from, evolve_pure, evolve_state, propagate_pure, BlockDensityMatrix, EarlyStop, EvolveOptions, Rates,
    StepControl, Trajectory, CSV_HEADER,
};
use crate::optim::golden_section;
use crate::params::{derive, DerivedParams, ParamsV1, RawParams, Scheme, TWO_PI};

pub use fit::{fit_power_law, FitOptions, FitResult};

/// Default N grid for scaling fits.
pub const DEFAULT_N_GRID: [usize; 8] = [20, 30, 40, 60, 80, 100, 140, 200];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    /// Master equation (pure-state propagation when dissipation is off).
    Exact,
    /// Linearized moment equations, TAT_yz only.
    Cumulant,
    /// Closed-form optimum of the moment equations, TAT_yz only.
    Analytic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScanAxis {
    #[serde(rename = "t")]
    Time,
    N,
    #[serde(rename = "omega_r")]
    OmegaR,
    #[serde(rename = "n_th")]
    NTh,
}

/// Per-N time grid for locating the squeezing minimum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub points: usize,
    /// Grid end as a multiple of the unitary pilot t_min.
    pub span: f64,
    /// Fixed grid end in units of 1/χ; overrides the pilot.
    pub t_max_chi: Option<f64>,
    /// Re-evaluate on a fine grid around the located minimum.
    pub refine: bool,
    pub refine_points: usize,
    pub early_stop: bool,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { points: 400, span: 5.0, t_max_chi: None, refine: true, refine_points: 41, early_stop: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    #[serde(default)]
    pub schema: Option<String>,
    pub params: ParamsV1,
    #[serde(default = "default_axis")]
    pub axis: ScanAxis,
    #[serde(default)]
    pub schemes: Vec<Scheme>,
    /// Extra Hamiltonians given by Γ/ω_b instead of a named scheme.
    #[serde(default)]
    pub gamma_ratios: Vec<f64>,
    #[serde(default)]
    pub n_values: Vec<usize>,
    #[serde(default)]
    pub n_th_values: Vec<f64>,
    #[serde(default)]
    pub omega_r_hz_values: Vec<f64>,
    #[serde(default)]
    pub omega_r_bracket_hz: Option<[f64; 2]>,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default = "default_solver")]
    pub solver: Solver,
    /// Switch off every dissipation channel.
    #[serde(default)]
    pub unitary: bool,
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_atol")]
    pub atol: f64,
    #[serde(default)]
    pub log_space_fit: bool,
    #[serde(default)]
    pub husimi: Option<HusimiSpec>,
    #[serde(default)]
    pub verify: Option<VerifySpec>,
}

/// Snapshot time and sphere grid for Husimi output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HusimiSpec {
    /// Snapshot time in units of 1/χ; `None` takes the squeezing minimum.
    pub t_chi: Option<f64>,
    pub n_theta: Option<usize>,
    pub n_phi: Option<usize>,
}

impl Default for HusimiSpec {
    fn default() -> Self {
        HusimiSpec { t_chi: None, n_theta: None, n_phi: None }
    }
}

/// Time grid and options for the full-model comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySpec {
    /// Grid end in units of 1/χ; `None` runs to 1.2× the unitary minimum.
    pub t_max_chi: Option<f64>,
    pub points: usize,
    pub options: VerifyOptions,
}

impl Default for VerifySpec {
    fn default() -> Self {
        VerifySpec { t_max_chi: None, points: 60, options: VerifyOptions::default() }
    }
}

fn default_axis() -> ScanAxis {
    ScanAxis::Time
}
fn default_solver() -> Solver {
    Solver::Exact
}
fn default_rtol() -> f64 {
    1e-9
}
fn default_atol() -> f64 {
    1e-12
}

impl ScanConfig {
    pub fn new(params: ParamsV1) -> Self {
        ScanConfig {
            schema: None,
            params,
            axis: ScanAxis::Time,
            schemes: Vec::new(),
            gamma_ratios: Vec::new(),
            n_values: Vec::new(),
            n_th_values: Vec::new(),
            omega_r_hz_values: Vec::new(),
            omega_r_bracket_hz: None,
            grid: GridSpec::default(),
            solver: Solver::Exact,
            unitary: false,
            rtol: default_rtol(),
            atol: default_atol(),
            log_space_fit: false,
            husimi: None,
            verify: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(s) = &self.schema {
            if s != "scan.v1" {
                return Err(Error::Config(format!("unsupported scan schema {s:?}")));
            }
        }
        self.params.to_raw()?;
        let bad = |what: &str| Err(Error::Config(what.to_string()));
        if self.grid.points < 3 || !(self.grid.span > 0.0) {
            return bad("grid needs at least 3 points and a positive span");
        }
        if self.grid.t_max_chi.is_some_and(|t| !(t > 0.0)) {
            return bad("t_max_chi must be positive");
        }
        if self.n_values.contains(&0) {
            return bad("N values must be positive");
        }
        if self.n_th_values.iter().any(|&n| !(n >= 0.0) || !n.is_finite()) {
            return bad("n_th values must be finite and non-negative");
        }
        if self.omega_r_hz_values.iter().any(|&w| !(w > 0.0)) {
            return bad("omega_r values must be positive");
        }
        if let Some([lo, hi]) = self.omega_r_bracket_hz {
            if !(lo > 0.0 && hi > lo) {
                return bad("omega_r bracket must satisfy 0 < lo < hi");
            }
        }
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return bad("tolerances must be positive");
        }
        Ok(())
    }

    pub fn evolve_options(&self) -> EvolveOptions {
        EvolveOptions {
            control: StepControl { rtol: self.rtol, atol: self.atol, ..StepControl::default() },
            positivity_every: 50,
            ..EvolveOptions::default()
        }
    }

    /// Hamiltonian variants in configuration order: named schemes, then Γ/ω_b values.
    /// An empty list of both means the base parameters as given.
    pub fn variants(&self) -> Result<Vec<(String, RawParams)>> {
        let base = self.params.to_raw()?;
        let mut out = Vec::new();
        for &s in &self.schemes {
            let raw = match s {
                Scheme::Mixed => base.clone(),
                _ => base.clone().with_scheme(s)?,
            };
            out.push((s.label().to_string(), raw));
        }
        for &ratio in &self.gamma_ratios {
            let mut raw = base.clone();
            raw.gamma_source = crate::params::GammaSource::Direct(ratio * base.omega_b);
            out.push((format!("gamma/omega_b={ratio}"), raw));
        }
        Ok(out)
    }

    pub fn n_th_list(&self, raw: &RawParams) -> Vec<f64> {
        if self.n_th_values.is_empty() {
            vec![raw.n_th]
        } else {
            self.n_th_values.clone()
        }
    }

    pub fn n_list(&self) -> Vec<usize> {
        if self.n_values.is_empty() {
            DEFAULT_N_GRID.to_vec()
        } else {
            self.n_values.clone()
        }
    }

    /// Derived parameters for one point, honoring `unitary`.
    pub fn point(&self, raw: &RawParams, n_spins: usize, n_th: f64, omega_r: Option<f64>) -> Result<DerivedParams> {
        let mut raw = raw.clone();
        raw.n_spins = n_spins;
        raw.n_th = n_th;
        if let Some(w) = omega_r {
            raw.omega_r_override = Some(w);
        }
        let p = derive(&raw)?;
        Ok(if self.unitary { p.without_dissipation() } else { p })
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
}

/// Time of the first dissipation-free squeezing minimum, from a dense
/// log-spaced grid evaluated by exact diagonalization.
pub fn unitary_pilot(params: &DerivedParams, n_spins: usize) -> Result<f64> {
    let k = HamiltonianCoefficients::from_params(params);
    let scale = 1.0 / (params.chi_tilde.abs().max(f64::MIN_POSITIVE) * n_spins as f64);
    let grid: Vec<f64> = (0..=1200).map(|i| scale * 10f64.powf(-3.0 + 3.0 * i as f64 / 1200.0) * n_spins as f64).collect();
    let css = css_state(n_spins as f64 / 2.0, FRAC_PI_2, 0.0)?;
    let traj = evolve_pure(&css, n_spins, &k, &grid)?;
    let xi2 = traj.xi2();
    // First local minimum below 1; the CSS only improves at short times.
    let mut best = 0;
    for i in 1..xi2.len() {
        if xi2[i].is_finite() && xi2[i] < xi2[best] {
            best = i;
        } else if xi2[best] < 1.0 && xi2[i] > xi2[best] + 0.5 * (1.0 - xi2[best]) {
            break;
        }
    }
    if best == 0 || !(xi2[best] < 1.0) {
        return Err(Error::Domain(format!("no unitary squeezing for N = {n_spins}")));
    }
    Ok(grid[best])
}

/// Trajectory of the x-polarized CSS under the full master equation, or under
/// pure-state propagation when every dissipation channel is off.
pub fn exact_trajectory(params: &DerivedParams, n_spins: usize, t_grid: &[f64], opts: &EvolveOptions) -> Result<Trajectory> {
    let css = css_state(n_spins as f64 / 2.0, FRAC_PI_2, 0.0)?;
    if Rates::from_params(params).is_closed() {
        return evolve_pure(&css, n_spins, &HamiltonianCoefficients::from_params(params), t_grid);
    }
    let rho0 = BlockDensityMatrix::from_top_state(n_spins, &css)?;
    let l = build_liouvillian(n_spins, params)?;
    evolve(&rho0, &l, t_grid, opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NMinimum {
    pub n_spins: usize,
    pub omega_r: f64,
    pub n_th: f64,
    pub chi: f64,
    pub t_min: f64,
    pub xi2_min: f64,
    /// The minimum sat on the edge of the searched time window.
    pub boundary: bool,
    pub solver: Solver,
}

/// Locate the squeezing minimum for one parameter point.
pub fn locate_minimum(params: &DerivedParams, n_spins: usize, solver: Solver, grid: &GridSpec, opts: &EvolveOptions) -> Result<NMinimum> {
    let done = |t_min: f64, xi2_min: f64, boundary: bool| NMinimum {
        n_spins,
        omega_r: params.omega_r,
        n_th: params.n_th,
        chi: params.chi,
        t_min,
        xi2_min,
        boundary,
        solver,
    };
    match solver {
        Solver::Analytic => {
            let o = analytic_optimum(params, n_spins)?;
            Ok(done(o.t_min, o.xi2_min, false))
        }
        Solver::Cumulant => {
            let sys = build_moment_system(params, n_spins)?;
            let (t, x) = sys.numerical_minimum()?;
            Ok(done(t, x, false))
        }
        Solver::Exact => {
            let mut t_end = match grid.t_max_chi {
                Some(t) => t / params.chi,
                None => grid.span * unitary_pilot(params, n_spins)?,
            };
            let mut run_opts = opts.clone();
            if grid.early_stop {
                run_opts.early_stop = Some(EarlyStop { rise: 0.3, min_records_after: 10 });
            }
            run_opts.checkpoint_before_min = grid.refine;
            for _attempt in 0..4 {
                let times = linspace(0.0, t_end, grid.points);
                let traj = exact_trajectory(params, n_spins, &times, &run_opts)?;
                let m = find_minimum(&traj.times(), &traj.xi2())?;
                let ran_to_end = traj.records.len() == times.len();
                if m.boundary && m.index > 0 && ran_to_end && grid.t_max_chi.is_none() {
                    t_end *= 2.0;
                    continue;
                }
                if m.boundary || !grid.refine {
                    return Ok(done(m.t_min, m.value_min, m.boundary));
                }
                let fine = linspace(times[m.index - 1], times[m.index + 1], grid.refine_points.max(5));
                let traj = match &traj.checkpoint {
                    Some((t0, state)) if *t0 == fine[0] => {
                        evolve_from(state, *t0, &build_liouvillian(n_spins, params)?, &fine, opts)?
                    }
                    _ => exact_trajectory(params, n_spins, &fine, opts)?,
                };
                let r = find_minimum(&traj.times(), &traj.xi2())?;
                // The coarse vertex is kept if refinement lands on its own boundary.
                let best = if r.boundary && m.value_min < r.value_min { m } else { r };
                return Ok(done(best.t_min, best.value_min, false));
            }
            Err(Error::Domain(format!("no squeezing minimum found for N = {n_spins} within {t_end:e} s")))
        }
    }
}

/// One trajectory of a time scan.
#[derive(Debug, Clone, Serialize)]
pub struct ScanEntry {
    pub label: String,
    pub scheme: Scheme,
    pub n_spins: usize,
    pub n_th: f64,
    pub omega_r: f64,
    pub chi: f64,
    pub trajectory: Trajectory,
    pub minimum: Option<MinimumReport>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct TimeScan {
    pub entries: Vec<ScanEntry>,
}

impl TimeScan {
    pub fn to_csv(&self) -> String {
        let mut out = format!("label,scheme,N,n_th,omega_r,{CSV_HEADER}\n");
        for e in &self.entries {
            let prefix = format!("{},{},{},{},{}", e.label, e.scheme.label(), e.n_spins, e.n_th, e.omega_r);
            out.push_str(&e.trajectory.csv_rows(&prefix));
        }
        out
    }
}

/// One trajectory per (Hamiltonian variant, n̄, N) on a common grid in units of 1/χ.
pub fn scan_time(cfg: &ScanConfig) -> Result<TimeScan> {
    cfg.validate()?;
    let variants = cfg.variants()?;
    let omega_r = cfg.omega_r_hz_values.first().map(|w| TWO_PI * w);
    let mut jobs = Vec::new();
    for (label, raw) in &variants {
        for n_th in cfg.n_th_list(raw) {
            for &n in &cfg.n_values.clone().into_iter().chain((cfg.n_values.is_empty()).then_some(raw.n_spins)).collect::<Vec<_>>() {
                jobs.push((label.clone(), raw.clone(), n_th, n));
            }
        }
    }
    let opts = cfg.evolve_options();
    let entries: Vec<Result<ScanEntry>> = jobs
        .par_iter()
        .map(|(label, raw, n_th, n)| {
            let p = cfg.point(raw, *n, *n_th, omega_r)?;
            let t_end = match cfg.grid.t_max_chi {
                Some(t) => t / p.chi,
                None => cfg.grid.span * unitary_pilot(&p, *n)?,
            };
            let times = linspace(0.0, t_end, cfg.grid.points);
            let trajectory = exact_trajectory(&p, *n, &times, &opts)?;
            let minimum = find_minimum(&trajectory.times(), &trajectory.xi2()).ok();
            Ok(ScanEntry {
                label: label.clone(),
                scheme: p.scheme,
                n_spins: *n,
                n_th: *n_th,
                omega_r: p.omega_r,
                chi: p.chi,
                trajectory,
                minimum,
            })
        })
        .collect();
    Ok(TimeScan { entries: entries.into_iter().collect::<Result<_>>()? })
}

#[derive(Debug, Clone, Serialize)]
pub struct NScan {
    pub label: String,
    pub scheme: Scheme,
    pub n_th: f64,
    pub points: Vec<NMinimum>,
    pub fit: FitResult,
}

impl NScan {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("label,scheme,n_th,N,omega_r,chi,t_min,xi2_min,boundary\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                self.label,
                self.scheme.label(),
                self.n_th,
                p.n_spins,
                p.omega_r,
                p.chi,
                p.t_min,
                p.xi2_min,
                p.boundary
            ));
        }
        out
    }
}

/// Squeezing minima over the N grid at fixed parameters, for one variant and n̄.
pub fn scan_n_minima(cfg: &ScanConfig, raw: &RawParams, n_th: f64) -> Result<Vec<NMinimum>> {
    let omega_r = cfg.omega_r_hz_values.first().map(|w| TWO_PI * w);
    let opts = cfg.evolve_options();
    cfg.n_list()
        .par_iter()
        .map(|&n| {
            let p = cfg.point(raw, n, n_th, omega_r)?;
            locate_minimum(&p, n, cfg.solver, &cfg.grid, &opts)
        })
        .collect()
}

fn fit_minima(points: &[NMinimum], log_space: bool) -> Result<FitResult> {
    let n: Vec<f64> = points.iter().map(|p| p.n_spins as f64).collect();
    let y: Vec<f64> = points.iter().map(|p| p.xi2_min).collect();
    fit_power_law(&n, &y, &FitOptions { log_space, ..FitOptions::default() })
}

/// Minima over N and the fit `ξ²_min = aN^b + const`, per (variant, n̄).
pub fn scan_n_fit(cfg: &ScanConfig) -> Result<Vec<NScan>> {
    cfg.validate()?;
    if cfg.n_list().len() < 5 {
        return Err(Error::Config("an N scan needs at least 5 N values".into()));
    }
    let mut out = Vec::new();
    for (label, raw) in cfg.variants()? {
        for n_th in cfg.n_th_list(&raw) {
            let points = scan_n_minima(cfg, &raw, n_th)?;
            let fit = fit_minima(&points, cfg.log_space_fit)?;
            let scheme = cfg.point(&raw, points[0].n_spins, n_th, None)?.scheme;
            out.push(NScan { label: label.clone(), scheme, n_th, points, fit });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct OmegaROptimum {
    pub n_spins: usize,
    pub omega_r: f64,
    pub xi2_opt: f64,
    pub t_opt: f64,
    /// (ω_r, ξ²_min) on the log-spaced pre-grid.
    pub pre_grid: Vec<(f64, f64)>,
    pub evaluations: usize,
    /// More than one local minimum on the pre-grid.
    pub non_unimodal: bool,
    /// ξ²_min varies by less than 1e-6 relative over the pre-grid.
    pub flat: bool,
    /// The best pre-grid point is an end of the bracket.
    pub at_bracket_edge: bool,
}

/// Minimize ξ²_min over ω_r in `[lo, hi]` (rad/s): an 8-point log pre-grid
/// locates the basin, golden-section search in ln ω_r refines it.
pub fn optimize_omega_r(cfg: &ScanConfig, raw: &RawParams, n_spins: usize, n_th: f64, bracket: [f64; 2]) -> Result<OmegaROptimum> {
    let [lo, hi] = bracket;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::Domain("omega_r bracket must satisfy 0 < lo < hi".into()));
    }
    let opts = cfg.evolve_options();
    let eval = |w: f64| -> Result<NMinimum> {
        let p = cfg.point(raw, n_spins, n_th, Some(w))?;
        locate_minimum(&p, n_spins, cfg.solver, &cfg.grid, &opts)
    };
    let (ln_lo, ln_hi) = (lo.ln(), hi.ln());
    let pre: Vec<f64> = linspace(ln_lo, ln_hi, 8).into_iter().map(f64::exp).collect();
    let pre_min: Vec<NMinimum> = pre.par_iter().map(|&w| eval(w)).collect::<Result<_>>()?;
    let values: Vec<f64> = pre_min.iter().map(|m| m.xi2_min).collect();
    let pre_grid: Vec<(f64, f64)> = pre.iter().copied().zip(values.iter().copied()).collect();

    let local_minima = (0..values.len())
        .filter(|&i| (i == 0 || values[i] < values[i - 1]) && (i + 1 == values.len() || values[i] < values[i + 1]))
        .count();
    let non_unimodal = local_minima > 1;
    if non_unimodal {
        log::warn!("NonUnimodalWarning: xi2_min(omega_r) pre-grid for N = {n_spins} has {local_minima} local minima: {pre_grid:?}");
    }
    let vmax = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let vmin = values.iter().copied().fold(f64::INFINITY, f64::min);
    let flat = (vmax - vmin) <= 1e-6 * vmin.abs();
    let best = values.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).expect("8 points");
    let at_bracket_edge = best == 0 || best + 1 == values.len();

    let mut best_min = pre_min[best];
    let mut evaluations = pre.len();
    if !flat {
        let a = pre[best.saturating_sub(1)].ln();
        let b = pre[(best + 1).min(pre.len() - 1)].ln();
        let mut failure = None;
        let mut seen: Vec<NMinimum> = Vec::new();
        let (_, _, evals) = golden_section(
            |x| match eval(x.exp()) {
                Ok(m) => {
                    seen.push(m);
                    m.xi2_min
                }
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::INFINITY
                }
            },
            a,
            b,
            1e-3,
            40,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        evaluations += evals;
        // Never report worse than the best pre-grid point.
        for m in seen {
            if m.xi2_min < best_min.xi2_min {
                best_min = m;
            }
        }
    }
    Ok(OmegaROptimum {
        n_spins,
        omega_r: best_min.omega_r,
        xi2_opt: best_min.xi2_min,
        t_opt: best_min.t_min,
        pre_grid,
        evaluations,
        non_unimodal,
        flat,
        at_bracket_edge,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimizedScan {
    pub label: String,
    pub scheme: Scheme,
    pub n_th: f64,
    pub optima: Vec<OmegaROptimum>,
    pub fit: FitResult,
}

/// Per-N ω_r optimization followed by the power-law fit of the optimized minima.
pub fn scan_n_optimized(cfg: &ScanConfig) -> Result<Vec<OptimizedScan>> {
    cfg.validate()?;
    let [lo, hi] = cfg.omega_r_bracket_hz.ok_or_else(|| Error::Config("omega_r_bracket_hz is required".into()))?;
    let bracket = [TWO_PI * lo, TWO_PI * hi];
    let mut out = Vec::new();
    for (label, raw) in cfg.variants()? {
        for n_th in cfg.n_th_list(&raw) {
            let optima: Vec<OmegaROptimum> =
                cfg.n_list().iter().map(|&n| optimize_omega_r(cfg, &raw, n, n_th, bracket)).collect::<Result<_>>()?;
            let n: Vec<f64> = optima.iter().map(|o| o.n_spins as f64).collect();
            let y: Vec<f64> = optima.iter().map(|o| o.xi2_opt).collect();
            let fit = fit_power_law(&n, &y, &FitOptions { log_space: cfg.log_space_fit, ..FitOptions::default() })?;
            let scheme = cfg.point(&raw, optima[0].n_spins, n_th, None)?.scheme;
            out.push(OptimizedScan { label: label.clone(), scheme, n_th, optima, fit });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoteRow {
    pub n_th: f64,
    pub fitted_const: f64,
    pub xi2_lb: f64,
    /// |const − ξ²_lb| / ξ²_lb.
    pub relative_gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AsymptoteReport {
    pub label: String,
    pub scheme: Scheme,
    pub rows: Vec<AsymptoteRow>,
    pub scans: Vec<NScan>,
}

impl AsymptoteReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("label,scheme,n_th,fitted_const,xi2_lb,relative_gap\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{},{},{},{}\n", self.label, self.scheme.label(), r.n_th, r.fitted_const, r.xi2_lb, r.relative_gap));
        }
        out
    }
}

/// Fitted asymptotic constant against the analytic floor, per n̄.
pub fn asymptote_report(cfg: &ScanConfig) -> Result<Vec<AsymptoteReport>> {
    let scans = scan_n_fit(cfg)?;
    let omega_r = cfg.omega_r_hz_values.first().map(|w| TWO_PI * w);
    let mut out: Vec<AsymptoteReport> = Vec::new();
    for (label, raw) in cfg.variants()? {
        let mine: Vec<NScan> = scans.iter().filter(|s| s.label == label).cloned().collect();
        let mut rows = Vec::new();
        for s in &mine {
            let p = cfg.point(&raw, s.points[0].n_spins, s.n_th, omega_r)?;
            let lb = asymptotic_bound(&p)?;
            rows.push(AsymptoteRow { n_th: s.n_th, fitted_const: s.fit.constant, xi2_lb: lb, relative_gap: (s.fit.constant - lb).abs() / lb });
        }
        let scheme = mine.first().map(|s| s.scheme).unwrap_or(Scheme::Mixed);
        out.push(AsymptoteReport { label, scheme, rows, scans: mine });
    }
    Ok(out)
}

/// Husimi Q of the maximal-j block at the configured time, per variant.
#[derive(Debug, Clone, Serialize)]
pub struct HusimiSnapshot {
    pub label: String,
    pub n_spins: usize,
    pub t: f64,
    pub xi2: f64,
    pub field: HusimiField,
}

pub fn husimi_snapshots(cfg: &ScanConfig) -> Result<Vec<HusimiSnapshot>> {
    cfg.validate()?;
    let spec = cfg.husimi.unwrap_or_default();
    let n = cfg.params.n_spins;
    let j = n as f64 / 2.0;
    let omega_r = cfg.omega_r_hz_values.first().map(|w| TWO_PI * w);
    let default_grid = crate::metrics::GridSpec::for_spin(j);
    let grid = crate::metrics::GridSpec {
        n_theta: spec.n_theta.unwrap_or(default_grid.n_theta),
        n_phi: spec.n_phi.unwrap_or(default_grid.n_phi),
    };
    let opts = cfg.evolve_options();
    let mut out = Vec::new();
    for (label, raw) in cfg.variants()? {
        for n_th in cfg.n_th_list(&raw) {
            let p = cfg.point(&raw, n, n_th, omega_r)?;
            let (t, xi2) = match spec.t_chi {
                Some(tc) => (tc / p.chi, f64::NAN),
                None => {
                    let m = locate_minimum(&p, n, Solver::Exact, &cfg.grid, &opts)?;
                    (m.t_min, m.xi2_min)
                }
            };
            let css = css_state(j, FRAC_PI_2, 0.0)?;
            let field = if Rates::from_params(&p).is_closed() {
                husimi_q_pure(&propagate_pure(&css, &HamiltonianCoefficients::from_params(&p), t), grid)?
            } else {
                let rho0 = BlockDensityMatrix::from_top_state(n, &css)?;
                let l = build_liouvillian(n, &p)?;
                let rho = evolve_state(&rho0, &l, t, &opts.control)?;
                husimi_q(j, &rho.block_matrix(0), grid)?
            };
            out.push(HusimiSnapshot { label: format!("{label},n_th={n_th}"), n_spins: n, t, xi2, field });
        }
    }
    Ok(out)
}

/// Moment-equation trajectory with its closed-form and numerical optima.
#[derive(Debug, Clone, Serialize)]
pub struct MomentRun {
    pub n_spins: usize,
    pub n_th: f64,
    #[serde(skip)]
    pub trajectory: MomentTrajectory,
    pub analytic: Option<AnalyticOptimum>,
    pub analytic_error: Option<String>,
    pub numerical_t_min: f64,
    pub numerical_xi2_min: f64,
    pub xi2_lb: f64,
}

/// TAT_yz moment equations for every (n̄, N) in the configuration.
pub fn moment_runs(cfg: &ScanConfig) -> Result<Vec<MomentRun>> {
    cfg.validate()?;
    let raw = cfg.params.to_raw()?.with_scheme(Scheme::TatYz)?;
    let omega_r = cfg.omega_r_hz_values.first().map(|w| TWO_PI * w);
    let ns = if cfg.n_values.is_empty() { vec![raw.n_spins] } else { cfg.n_values.clone() };
    let mut out = Vec::new();
    for n_th in cfg.n_th_list(&raw) {
        for &n in &ns {
            let p = cfg.point(&raw, n, n_th, omega_r)?;
            let sys = build_moment_system(&p, n)?;
            let (t_num, x_num) = sys.numerical_minimum()?;
            let t_end = match cfg.grid.t_max_chi {
                Some(t) => t / p.chi,
                None => cfg.grid.span * t_num,
            };
            let times = linspace(0.0, t_end, cfg.grid.points);
            let trajectory = solve_moments(&sys, &times)?;
            let (analytic, analytic_error) = match analytic_optimum(&p, n) {
                Ok(a) => (Some(a), None),
                Err(e) => (None, Some(e.to_string())),
            };
            out.push(MomentRun {
                n_spins: n,
                n_th,
                trajectory,
                analytic,
                analytic_error,
                numerical_t_min: t_num,
                numerical_xi2_min: x_num,
                xi2_lb: asymptotic_bound(&p)?,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundRow {
    pub n_th: f64,
    pub omega_r: f64,
    pub chi: f64,
    pub c: f64,
    pub epsilon: f64,
    pub xi2_lb: f64,
}

/// Asymptotic floor over the configured n̄ and ω_r values.
pub fn bound_table(cfg: &ScanConfig) -> Result<Vec<BoundRow>> {
    cfg.validate()?;
    let raw = cfg.params.to_raw()?;
    let omegas: Vec<Option<f64>> =
        if cfg.omega_r_hz_values.is_empty() { vec![None] } else { cfg.omega_r_hz_values.iter().map(|w| Some(TWO_PI * w)).collect() };
    let mut out = Vec::new();
    for n_th in cfg.n_th_list(&raw) {
        for &w in &omegas {
            let p = cfg.point(&raw, raw.n_spins, n_th, w)?;
            out.push(BoundRow { n_th, omega_r: p.omega_r, chi: p.chi, c: p.c, epsilon: p.epsilon, xi2_lb: asymptotic_bound(&p)? });
        }
    }
    Ok(out)
}

/// Full-model comparison for the configured parameters (needs Δ and G).
pub fn verify_run(cfg: &ScanConfig) -> Result<ComparisonReport> {
    cfg.validate()?;
    let spec = cfg.verify.unwrap_or_default();
    let raw = cfg.params.to_raw()?;
    let n = raw.n_spins;
    let p = derive(&raw)?;
    if p.coupling_g == 0.0 && p.delta == 0.0 {
        return Err(Error::Config("verify needs delta_hz and G_hz".into()));
    }
    let t_end = match spec.t_max_chi {
        Some(t) => t / p.chi,
        None => 1.2 * unitary_pilot(&p, n)?,
    };
    verify_effective_reduction(&p, n, &linspace(0.0, t_end, spec.points.max(3)), &spec.options)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn base_params(n: usize) -> ParamsV1 {
        ParamsV1 {
            schema: None,
            omega_b_hz: 1e9,
            g_hz: 1e3,
            gamma_knob_hz: None,
            delta_hz: None,
            coupling_hz: None,
            omega_r_hz: Some(53e3),
            omega_hz: None,
            q_m: 1e6,
            t2_s: 0.01,
            n_th: Some(20.0),
            temperature_k: None,
            n_spins: n,
            scheme_override: None,
        }
    }

    #[test]
    fn empty_scheme_list_is_vacuous() {
        let cfg = ScanConfig::new(base_params(10));
        assert!(scan_time(&cfg).unwrap().entries.is_empty());
        assert!(scan_time(&cfg).unwrap().to_csv().lines().count() == 1);
    }

    #[test]
    fn config_rejects_bad_grids() {
        let mut cfg = ScanConfig::new(base_params(10));
        cfg.grid.points = 1;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let mut cfg = ScanConfig::new(base_params(10));
        cfg.omega_r_bracket_hz = Some([5.0, 1.0]);
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn config_json_round_trip() {
        let mut cfg = ScanConfig::new(base_params(10));
        cfg.schemes = vec![Scheme::Oat, Scheme::TatYz];
        cfg.axis = ScanAxis::N;
        let text = serde_json::to_string(&cfg).unwrap();
        let back: ScanConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unitary_pilot_scales_with_chi() {
        let raw = base_params(30).to_raw().unwrap().with_scheme(Scheme::TatYz).unwrap();
        let p = derive(&raw).unwrap().without_dissipation();
        let t1 = unitary_pilot(&p, 30).unwrap();
        let t2 = unitary_pilot(&p.with_omega_r(p.omega_r * 2.0), 30).unwrap();
        assert!((t2 / t1 - 2.0).abs() < 0.02, "{t1} {t2}");
    }

    #[test]
    fn tat_squeezes_deepest_among_four_hamiltonians() {
        let mut cfg = ScanConfig::new(base_params(100));
        cfg.unitary = true;
        cfg.gamma_ratios = vec![0.0, -0.25, -0.05, -2.0];
        cfg.grid.t_max_chi = Some(0.3);
        cfg.grid.points = 300;
        let scan = scan_time(&cfg).unwrap();
        let mins: Vec<f64> = scan.entries.iter().map(|e| e.minimum.unwrap().value_min).collect();
        let tat = mins[1];
        assert!(mins.iter().all(|&m| m >= tat), "{mins:?}");
    }

    #[test]
    fn cumulant_and_analytic_solvers_locate_minima() {
        let raw = base_params(1000).to_raw().unwrap().with_scheme(Scheme::TatYz).unwrap();
        let cfg = ScanConfig::new(base_params(1000));
        let p = cfg.point(&raw, 1000, 20.0, None).unwrap();
        let g = GridSpec::default();
        let o = EvolveOptions::default();
        let c = locate_minimum(&p, 1000, Solver::Cumulant, &g, &o).unwrap();
        let a = locate_minimum(&p, 1000, Solver::Analytic, &g, &o).unwrap();
        assert!(c.xi2_min > 0.0 && c.xi2_min < 1.0 && a.xi2_min > 0.0);
        let mut oat = cfg.point(&base_params(1000).to_raw().unwrap(), 1000, 20.0, None).unwrap();
        oat.scheme = Scheme::Oat;
        assert!(matches!(locate_minimum(&oat, 1000, Solver::Cumulant, &g, &o), Err(Error::Scheme(_))));
    }

    #[test]
    fn exact_minimum_refines_the_coarse_grid() {
        let raw = base_params(40).to_raw().unwrap();
        let cfg = ScanConfig::new(base_params(40));
        let p = cfg.point(&raw, 40, 0.0, None).unwrap().without_dissipation();
        let coarse = GridSpec { points: 40, refine: false, ..GridSpec::default() };
        let fine = GridSpec { points: 40, refine: true, ..GridSpec::default() };
        let o = EvolveOptions::default();
        let a = locate_minimum(&p, 40, Solver::Exact, &coarse, &o).unwrap();
        let b = locate_minimum(&p, 40, Solver::Exact, &fine, &o).unwrap();
        assert!(!b.boundary);
        // Reference from a dense grid around the minimum.
        let dense = linspace(0.5 * b.t_min, 1.5 * b.t_min, 20001);
        let tr = exact_trajectory(&p, 40, &dense, &o).unwrap();
        let truth = tr.xi2().into_iter().fold(f64::INFINITY, f64::min);
        assert!((b.xi2_min - truth).abs() <= (a.xi2_min - truth).abs());
        assert!((b.xi2_min - truth).abs() < 1e-7 * truth, "{} vs {truth}", b.xi2_min);
    }

    #[test]
    fn unitary_optimum_is_flat_in_omega_r() {
        let mut cfg = ScanConfig::new(base_params(30));
        cfg.unitary = true;
        let raw = cfg.params.to_raw().unwrap().with_scheme(Scheme::Oat).unwrap();
        let o = optimize_omega_r(&cfg, &raw, 30, 0.0, [TWO_PI * 1e4, TWO_PI * 1e6]).unwrap();
        assert!(o.flat, "{:?}", o.pre_grid);
        assert_eq!(o.evaluations, 8);
    }

    #[test]
    fn optimizer_dominates_pre_grid() {
        let mut cfg = ScanConfig::new(base_params(20));
        cfg.solver = Solver::Analytic;
        let raw = cfg.params.to_raw().unwrap().with_scheme(Scheme::TatYz).unwrap();
        let o = optimize_omega_r(&cfg, &raw, 20, 1.0, [TWO_PI * 2e4, TWO_PI * 2e6]);
        if let Ok(o) = o {
            assert!(o.pre_grid.iter().all(|&(_, v)| o.xi2_opt <= v));
        }
    }
}
