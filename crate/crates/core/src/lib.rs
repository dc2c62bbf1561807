//! Collective spin squeezing driven by a squeezed phonon mode.
//!
//! The crate covers the parameter chain from hardware inputs to effective
//! couplings, collective spin algebra on Dicke blocks, the effective spin
//! Hamiltonians and jump operators, a truncated cavity-phonon-spin model for
//! checking the effective reduction, exact permutation-invariant Lindblad
//! dynamics, squeezing metrics, linearized moment equations with closed-form
//! optima, and the scan/fit/optimization experiments built on top.

pub mod dicke;
pub mod error;
pub mod experiments;
pub mod full_model;
pub mod hamiltonian;
pub mod metrics;
pub mod moments;
pub mod open_dynamics;
pub mod optim;
pub mod params;

pub use dicke::{build_collective_ops, css_state, dicke_block_structure, BlockLayout, SpinOps, StateVector};
pub use error::{Error, Result};
pub use hamiltonian::{build_bogoliubov_operator, build_jump_operator, build_spin_hamiltonian, SpinHamiltonian};
pub use metrics::{find_minimum, husimi_q, squeezing_parameter, HusimiField, MinimumReport, Moments, SqueezingRecord};
pub use moments::{analytic_optimum, asymptotic_bound, build_moment_system, solve_moments, AnalyticOptimum, MomentSystem};
pub use open_dynamics::{
    brute_force_evolve, build_liouvillian, evolve, evolve_from, evolve_pure, evolve_state, BlockDensityMatrix, EvolveOptions,
    Liouvillian, Trajectory,
};
pub use full_model::{verify_effective_reduction, ComparisonReport, VerifyOptions};
pub use experiments::{fit_power_law, FitResult, ScanConfig};
pub use params::{classify_scheme, derive, derive_chain, thermal_occupation, DerivedParams, RawParams, Scheme};
