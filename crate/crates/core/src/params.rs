//! Physical parameters and the derivation chain from hardware-style inputs to
//! the effective spin-model couplings and dissipation rates.
//!
//! All frequencies stored here are angular (rad/s). Configuration files carry
//! ordinary frequencies `f = ω/2π` in Hz; [`ParamsV1`] converts them once.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TWO_PI: f64 = 2.0 * PI;
/// Reduced Planck constant (J s).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant (J/K).
pub const K_B: f64 = 1.380_649e-23;

/// Relative tolerance used when matching Γ against the special scheme points.
pub const SCHEME_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "OAT")]
    Oat,
    #[serde(rename = "TAT_yz")]
    TatYz,
    #[serde(rename = "TAT_xz")]
    TatXz,
    Mixed,
}

impl Scheme {
    /// The Γ value realizing this scheme, or `None` for [`Scheme::Mixed`].
    pub fn gamma_knob(self, omega_b: f64) -> Option<f64> {
        match self {
            Scheme::Oat => Some(0.0),
            Scheme::TatYz => Some(-omega_b / 4.0),
            Scheme::TatXz => Some(omega_b / 8.0),
            Scheme::Mixed => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Scheme::Oat => "OAT",
            Scheme::TatYz => "TAT_yz",
            Scheme::TatXz => "TAT_xz",
            Scheme::Mixed => "Mixed",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Classify the squeezing scheme realized by the control parameter Γ.
///
/// Equality with the special points is tested with relative tolerance
/// [`SCHEME_RTOL`] against the scale `ω_b`.
pub fn classify_scheme(gamma: f64, omega_b: f64) -> Scheme {
    let scale = omega_b.abs() * SCHEME_RTOL;
    if gamma.abs() <= scale {
        Scheme::Oat
    } else if (gamma + omega_b / 4.0).abs() <= scale {
        Scheme::TatYz
    } else if (gamma - omega_b / 8.0).abs() <= scale {
        Scheme::TatXz
    } else {
        Scheme::Mixed
    }
}

/// Bose occupation of a mode of angular frequency `omega_b` at temperature `temperature` (K).
pub fn thermal_occupation(omega_b: f64, temperature: f64) -> f64 {
    if temperature <= 0.0 {
        return 0.0;
    }
    let x = HBAR * omega_b / (K_B * temperature);
    1.0 / x.exp_m1()
}

/// How the squeezing-control parameter Γ is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaSource {
    /// Γ given directly (rad/s).
    Direct(f64),
    /// Γ from linearized detuning Δ and coupling G (both rad/s).
    Detuning { delta: f64, coupling: f64 },
    /// Γ from the mean-field amplitudes passed to [`derive_chain`]
    /// together with `g0` and `delta_a`.
    MeanField,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawParams {
    pub omega_b: f64,
    pub g: f64,
    pub g0: f64,
    pub delta_a: f64,
    /// Spin transition frequency. `None` tunes it to χ so that Ω̃ = 0.
    pub omega: Option<f64>,
    pub omega_p: f64,
    pub kappa_a: f64,
    pub kappa_b: f64,
    pub q_m: f64,
    pub t2: f64,
    pub n_th: f64,
    pub n_spins: usize,
    pub gamma_source: GammaSource,
    /// Renormalized phonon frequency supplied independently of the chain.
    pub omega_r_override: Option<f64>,
}

impl RawParams {
    /// Representative hardware values: ω_b/2π = 1 GHz, g/2π = 1 kHz,
    /// Q_m = 10⁶, T₂ = 10 ms, no thermal phonons, OAT.
    pub fn with_defaults(n_spins: usize) -> Self {
        RawParams {
            omega_b: TWO_PI * 1e9,
            g: TWO_PI * 1e3,
            g0: 0.0,
            delta_a: 0.0,
            omega: None,
            omega_p: 0.0,
            kappa_a: 0.0,
            kappa_b: 0.0,
            q_m: 1e6,
            t2: 0.01,
            n_th: 0.0,
            n_spins,
            gamma_source: GammaSource::Direct(0.0),
            omega_r_override: None,
        }
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Result<Self> {
        let gamma = scheme
            .gamma_knob(self.omega_b)
            .ok_or_else(|| Error::Scheme("a Mixed scheme has no canonical Γ".into()))?;
        self.gamma_source = GammaSource::Direct(gamma);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Domain(what.to_string()))
            }
        };
        check(self.omega_b > 0.0, "omega_b must be positive")?;
        check(self.g > 0.0, "g must be positive")?;
        check(self.n_spins >= 1, "N must be at least 1")?;
        check(self.t2 > 0.0, "T2 must be positive")?;
        check(self.q_m > 0.0, "Q_m must be positive")?;
        check(self.n_th >= 0.0 && self.n_th.is_finite(), "n_th must be finite and non-negative")?;
        if let Some(w) = self.omega_r_override {
            check(w > 0.0, "omega_r override must be positive")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivedParams {
    /// Linearized optomechanical coupling g₀α.
    pub coupling_g: f64,
    /// Shifted cavity detuning Δ_a + 2g₀β.
    pub delta: f64,
    /// Squeezing control parameter Γ.
    pub gamma: f64,
    pub r: f64,
    pub omega_r: f64,
    pub chi: f64,
    pub chi_tilde: f64,
    pub tanh2r: f64,
    pub omega: f64,
    pub omega_tilde: f64,
    /// Ω was left unset and follows χ, keeping Ω̃ = 0 when ω_r changes.
    pub omega_tracks_chi: bool,
    /// Mechanical damping ω_b/Q_m.
    pub damping: f64,
    /// Collective dissipation rate γg²/ω_r².
    pub gamma_gamma: f64,
    /// Thermal-weighted rate Γ_γ(n̄ + 1/2).
    pub c: f64,
    pub epsilon: f64,
    pub n_th: f64,
    pub t2: f64,
    pub n_spins: usize,
    pub omega_b: f64,
    pub g: f64,
    pub scheme: Scheme,
    pub warnings: Vec<String>,
}

impl DerivedParams {
    /// Rate of the D[Z] channel.
    pub fn emission_rate(&self) -> f64 {
        self.gamma_gamma * (self.n_th + 1.0)
    }

    /// Rate of the D[Z†] channel.
    pub fn absorption_rate(&self) -> f64 {
        self.gamma_gamma * self.n_th
    }

    pub fn dephasing_rate(&self) -> f64 {
        if self.t2.is_finite() {
            0.5 / self.t2
        } else {
            0.0
        }
    }

    /// Copy with all dissipation switched off (T₂ → ∞, γ → 0).
    pub fn without_dissipation(&self) -> Self {
        let mut p = self.clone();
        p.t2 = f64::INFINITY;
        p.damping = 0.0;
        p.gamma_gamma = 0.0;
        p.c = 0.0;
        p.epsilon = 0.0;
        p
    }

    /// Copy with the renormalized phonon frequency replaced and every
    /// quantity depending on it recomputed.
    pub fn with_omega_r(&self, omega_r: f64) -> Self {
        let mut p = self.clone();
        p.omega_r = omega_r;
        p.chi = p.g * p.g / omega_r;
        p.chi_tilde = p.chi * (2.0 * p.r).cosh();
        p.gamma_gamma = p.damping * p.g * p.g / (omega_r * omega_r);
        p.c = p.gamma_gamma * (p.n_th + 0.5);
        p.epsilon = epsilon(p.c, p.chi);
        if p.omega_tracks_chi {
            p.omega = p.chi;
        }
        p.omega_tilde = p.omega - p.chi;
        p
    }

    pub fn with_n_th(&self, n_th: f64) -> Self {
        let mut p = self.clone();
        p.n_th = n_th;
        p.c = p.gamma_gamma * (n_th + 0.5);
        p.epsilon = epsilon(p.c, p.chi);
        p
    }
}

/// Dimensionless dissipation ratio ε = 4c/(√2χ + 2c).
pub fn epsilon(c: f64, chi: f64) -> f64 {
    if c == 0.0 {
        0.0
    } else {
        4.0 * c / (SQRT_2 * chi + 2.0 * c)
    }
}

/// Run the derivation chain.
///
/// `alpha` and `beta` are the mean-field cavity and phonon amplitudes; they
/// only matter for [`GammaSource::MeanField`].
pub fn derive_chain(raw: &RawParams, alpha: Complex64, beta: Complex64) -> Result<DerivedParams> {
    raw.validate()?;
    let mut warnings = Vec::new();
    let omega_b = raw.omega_b;

    let (coupling_g, delta) = match raw.gamma_source {
        GammaSource::Direct(_) => (0.0, 0.0),
        GammaSource::Detuning { delta, coupling } => (coupling, delta),
        GammaSource::MeanField => {
            if alpha.im != 0.0 || beta.im != 0.0 {
                let msg = "complex mean-field amplitudes: using |alpha| and Re(beta)".to_string();
                log::warn!("{msg}");
                warnings.push(msg);
            }
            (raw.g0 * alpha.norm(), raw.delta_a + 2.0 * raw.g0 * beta.re)
        }
    };

    let gamma = match raw.gamma_source {
        GammaSource::Direct(gamma) => gamma,
        _ => {
            let denom = delta * delta - omega_b * omega_b;
            if denom.abs() <= 1e-12 * omega_b * omega_b {
                return Err(Error::Domain(format!(
                    "|Delta| = omega_b is a pole of Gamma (Delta = {delta:e})"
                )));
            }
            delta * coupling_g * coupling_g / denom
        }
    };

    let arg = 1.0 - 4.0 * gamma / omega_b;
    if arg <= 0.0 {
        return Err(Error::Domain(format!(
            "1 - 4 Gamma/omega_b = {arg:e} must be positive"
        )));
    }
    let r = 0.25 * arg.ln();
    let tanh2r = 2.0 * gamma / (2.0 * gamma - omega_b);
    let omega_r = match raw.omega_r_override {
        Some(w) => w,
        None => (2.0 * r).exp() * omega_b,
    };
    let chi = raw.g * raw.g / omega_r;
    let chi_tilde = chi * (2.0 * r).cosh();
    let omega = raw.omega.unwrap_or(chi);
    let damping = omega_b / raw.q_m;
    let gamma_gamma = damping * raw.g * raw.g / (omega_r * omega_r);
    let c = gamma_gamma * (raw.n_th + 0.5);

    Ok(DerivedParams {
        coupling_g,
        delta,
        gamma,
        r,
        omega_r,
        chi,
        chi_tilde,
        tanh2r,
        omega,
        omega_tilde: omega - chi,
        omega_tracks_chi: raw.omega.is_none(),
        damping,
        gamma_gamma,
        c,
        epsilon: epsilon(c, chi),
        n_th: raw.n_th,
        t2: raw.t2,
        n_spins: raw.n_spins,
        omega_b,
        g: raw.g,
        scheme: classify_scheme(gamma, omega_b),
        warnings,
    })
}

/// `derive_chain` with real, zero mean-field amplitudes.
pub fn derive(raw: &RawParams) -> Result<DerivedParams> {
    derive_chain(raw, Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0))
}

/// JSON parameter file, schema `params.v1`. Frequencies in Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsV1 {
    #[serde(default)]
    pub schema: Option<String>,
    pub omega_b_hz: f64,
    pub g_hz: f64,
    #[serde(default)]
    pub gamma_knob_hz: Option<f64>,
    #[serde(default)]
    pub delta_hz: Option<f64>,
    #[serde(default, rename = "G_hz")]
    pub coupling_hz: Option<f64>,
    #[serde(default)]
    pub omega_r_hz: Option<f64>,
    /// Spin transition frequency; omitted means Ω̃ = 0.
    #[serde(default)]
    pub omega_hz: Option<f64>,
    #[serde(rename = "Q_m")]
    pub q_m: f64,
    #[serde(rename = "T2_s")]
    pub t2_s: f64,
    #[serde(default)]
    pub n_th: Option<f64>,
    #[serde(default, rename = "temperature_K")]
    pub temperature_k: Option<f64>,
    #[serde(rename = "N")]
    pub n_spins: usize,
    #[serde(default)]
    pub scheme_override: Option<Scheme>,
}

impl ParamsV1 {
    pub fn to_raw(&self) -> Result<RawParams> {
        if let Some(s) = &self.schema {
            if s != "params.v1" {
                return Err(Error::Config(format!("unsupported schema {s:?}")));
            }
        }
        let omega_b = TWO_PI * self.omega_b_hz;
        let n_th = match (self.n_th, self.temperature_k) {
            (Some(_), Some(_)) => {
                return Err(Error::Config("give either n_th or temperature_K, not both".into()))
            }
            (Some(n), None) => n,
            (None, Some(t)) => thermal_occupation(omega_b, t),
            (None, None) => 0.0,
        };
        let gamma_source = match (self.gamma_knob_hz, self.delta_hz, self.coupling_hz) {
            (Some(g), None, None) => GammaSource::Direct(TWO_PI * g),
            (None, Some(d), Some(c)) => GammaSource::Detuning {
                delta: TWO_PI * d,
                coupling: TWO_PI * c,
            },
            (None, None, None) => GammaSource::Direct(0.0),
            _ => {
                return Err(Error::Config(
                    "give either gamma_knob_hz or both delta_hz and G_hz".into(),
                ))
            }
        };
        let mut raw = RawParams {
            omega_b,
            g: TWO_PI * self.g_hz,
            omega: self.omega_hz.map(|w| TWO_PI * w),
            q_m: self.q_m,
            t2: self.t2_s,
            n_th,
            n_spins: self.n_spins,
            gamma_source,
            omega_r_override: self.omega_r_hz.map(|w| TWO_PI * w),
            ..RawParams::with_defaults(self.n_spins)
        };
        if let Some(scheme) = self.scheme_override {
            raw = raw.with_scheme(scheme)?;
        }
        raw.validate()?;
        Ok(raw)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn base() -> RawParams {
        RawParams::with_defaults(100)
    }

    #[test]
    fn oat_point() {
        let p = derive(&base()).unwrap();
        assert_eq!(p.r, 0.0);
        assert_eq!(p.omega_r, p.omega_b);
        assert_eq!(p.tanh2r, 0.0);
        assert_eq!(p.scheme, Scheme::Oat);
    }

    #[test]
    fn tat_point() {
        let raw = base().with_scheme(Scheme::TatYz).unwrap();
        let p = derive(&raw).unwrap();
        assert_relative_eq!(p.tanh2r, 1.0 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(p.tanh2r, (2.0 * p.r).tanh(), max_relative = 1e-12);
        assert_relative_eq!(p.chi_tilde, 3.0 * p.chi / (2.0 * SQRT_2), max_relative = 1e-12);
        assert_eq!(p.scheme, Scheme::TatYz);
    }

    #[test]
    fn chi_hand_value() {
        let mut raw = base();
        raw.omega_r_override = Some(TWO_PI * 200e3);
        let p = derive(&raw).unwrap();
        assert_relative_eq!(p.chi / TWO_PI, 5.0, max_relative = 1e-12);
    }

    #[test]
    fn classification() {
        let wb = 1.0e9;
        assert_eq!(classify_scheme(0.0, wb), Scheme::Oat);
        assert_eq!(classify_scheme(-wb / 4.0, wb), Scheme::TatYz);
        assert_eq!(classify_scheme(wb / 8.0, wb), Scheme::TatXz);
        assert_eq!(classify_scheme(-0.05 * wb, wb), Scheme::Mixed);
        assert_eq!(classify_scheme(-wb / 4.0 * (1.0 + 1e-11), wb), Scheme::TatYz);
    }

    #[test]
    fn tat_xz_has_negative_tanh() {
        let raw = base().with_scheme(Scheme::TatXz).unwrap();
        let p = derive(&raw).unwrap();
        assert_relative_eq!(p.tanh2r, -1.0 / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn domain_errors() {
        let mut raw = base();
        raw.gamma_source = GammaSource::Direct(raw.omega_b / 4.0);
        assert!(matches!(derive(&raw), Err(Error::Domain(_))));
        raw.gamma_source = GammaSource::Detuning {
            delta: raw.omega_b,
            coupling: 1.0,
        };
        assert!(matches!(derive(&raw), Err(Error::Domain(_))));
    }

    #[test]
    fn gamma_from_detuning() {
        let mut raw = base();
        let wb = raw.omega_b;
        raw.gamma_source = GammaSource::Detuning {
            delta: 3.0 * wb,
            coupling: 0.1 * wb,
        };
        let p = derive(&raw).unwrap();
        assert_relative_eq!(p.gamma, 3.0 * 0.01 * wb / 8.0, max_relative = 1e-12);
    }

    #[test]
    fn thermal_occupation_limits() {
        let wb = TWO_PI * 1e9;
        assert_eq!(thermal_occupation(wb, 0.0), 0.0);
        let t = HBAR * wb / (K_B * std::f64::consts::LN_2);
        assert_relative_eq!(thermal_occupation(wb, t), 1.0, max_relative = 1e-12);
        let t_hot = 60.0 * HBAR * wb / K_B;
        let classical = K_B * t_hot / (HBAR * wb);
        assert_relative_eq!(thermal_occupation(wb, t_hot), classical, max_relative = 0.01);
    }

    #[test]
    fn omega_r_decreases_with_gamma() {
        let mut prev = f64::INFINITY;
        for k in 0..40 {
            let gamma = -2.0 + 0.056 * k as f64; // up to 0.184 < 1/4, in units of omega_b
            let mut raw = base();
            raw.gamma_source = GammaSource::Direct(gamma * raw.omega_b);
            let p = derive(&raw).unwrap();
            assert_relative_eq!(
                p.omega_r,
                p.omega_b * (1.0 - 4.0 * gamma).sqrt(),
                max_relative = 1e-12
            );
            assert!(p.omega_r < prev);
            prev = p.omega_r;
        }
    }

    #[test]
    fn epsilon_bounds() {
        let chi = 3.0;
        let mut prev = 0.0;
        assert_eq!(epsilon(0.0, chi), 0.0);
        for k in 1..200 {
            let c = 1e-3 * 1.1f64.powi(k);
            let e = epsilon(c, chi);
            assert!(e > prev && e < 2.0);
            prev = e;
        }
    }

    #[test]
    fn config_round_trip() {
        let json = r#"{"schema":"params.v1","omega_b_hz":1e9,"g_hz":1e3,"omega_r_hz":53e3,
            "Q_m":1e6,"T2_s":0.01,"n_th":20,"N":100,"scheme_override":"TAT_yz"}"#;
        let cfg: ParamsV1 = serde_json::from_str(json).unwrap();
        let raw = cfg.to_raw().unwrap();
        let p = derive(&raw).unwrap();
        assert_eq!(p.scheme, Scheme::TatYz);
        assert_relative_eq!(p.omega_r, TWO_PI * 53e3);
        assert_eq!(p.omega_tilde, 0.0);

        let bad = r#"{"omega_b_hz":1e9,"g_hz":1e3,"gamma_knob_hz":0,"delta_hz":1,"G_hz":1,
            "Q_m":1e6,"T2_s":0.01,"N":10}"#;
        let cfg: ParamsV1 = serde_json::from_str(bad).unwrap();
        assert!(matches!(cfg.to_raw(), Err(Error::Config(_))));
    }
}
