//! Squeezing parameter, Husimi Q function and trajectory minimum location.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix2, Vector3};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::dicke::{css_state, ladder_up, StateVector};
use crate::error::{Error, Result};

/// First and symmetrized second moments of the collective spin.
/// `cxy = ⟨{Sx,Sy}⟩/2` and likewise for the other pairs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Moments {
    pub sx: f64,
    pub sy: f64,
    pub sz: f64,
    pub sx2: f64,
    pub sy2: f64,
    pub sz2: f64,
    pub cyz: f64,
    pub cxy: f64,
    pub cxz: f64,
}

/// Ladder-basis expectation values from which [`Moments`] are assembled.
#[derive(Debug, Clone, Copy, Default)]
pub struct LadderSums {
    pub trace: f64,
    pub sz: f64,
    pub sz2: f64,
    /// ⟨S²⟩.
    pub casimir: f64,
    pub sp: Complex64,
    pub sp2: Complex64,
    /// ⟨{S₊, Sz}⟩.
    pub sp_sz: Complex64,
}

impl LadderSums {
    /// Add `weight·tr(ρ O)` for a single j block, with `rho[(a, c)]` in the m = j − a basis.
    pub fn add_block(&mut self, j: f64, weight: f64, rho: impl Fn(usize, usize) -> Complex64, dim: usize) {
        let mut s = LadderSums::default();
        for a in 0..dim {
            let m = j - a as f64;
            let p = rho(a, a).re;
            s.trace += p;
            s.sz += m * p;
            s.sz2 += m * m * p;
            if a >= 1 {
                let up = ladder_up(j, m);
                let x = rho(a, a - 1);
                s.sp += x * up;
                s.sp_sz += x * (up * (2.0 * m + 1.0));
                if a >= 2 {
                    s.sp2 += rho(a, a - 2) * (up * ladder_up(j, m + 1.0));
                }
            }
        }
        s.casimir = j * (j + 1.0) * s.trace;
        self.trace += weight * s.trace;
        self.sz += weight * s.sz;
        self.sz2 += weight * s.sz2;
        self.casimir += weight * s.casimir;
        self.sp += s.sp * weight;
        self.sp2 += s.sp2 * weight;
        self.sp_sz += s.sp_sz * weight;
    }

    pub fn moments(&self) -> Moments {
        let transverse = self.casimir - self.sz2;
        Moments {
            sx: self.sp.re,
            sy: self.sp.im,
            sz: self.sz,
            sx2: 0.5 * (transverse + self.sp2.re),
            sy2: 0.5 * (transverse - self.sp2.re),
            sz2: self.sz2,
            cyz: 0.5 * self.sp_sz.im,
            cxy: 0.5 * self.sp2.im,
            cxz: 0.5 * self.sp_sz.re,
        }
    }
}

impl Moments {
    pub fn from_state(state: &StateVector) -> Moments {
        let psi = &state.amplitudes;
        let mut s = LadderSums::default();
        s.add_block(state.j, 1.0, |a, c| psi[a] * psi[c].conj(), psi.len());
        s.moments()
    }

    /// Values in trajectory column order: Sx, Sy, Sz, Sy2, Sz2, Sx2, Cyz, Cxy, Cxz.
    pub fn to_array(&self) -> [f64; 9] {
        [self.sx, self.sy, self.sz, self.sy2, self.sz2, self.sx2, self.cyz, self.cxy, self.cxz]
    }

    pub fn mean(&self) -> Vector3<f64> {
        Vector3::new(self.sx, self.sy, self.sz)
    }

    /// Symmetrized covariance matrix `⟨{Sk,Sl}⟩/2 − ⟨Sk⟩⟨Sl⟩`.
    pub fn covariance(&self) -> nalgebra::Matrix3<f64> {
        let mu = self.mean();
        let second = nalgebra::Matrix3::new(
            self.sx2, self.cxy, self.cxz, self.cxy, self.sy2, self.cyz, self.cxz, self.cyz, self.sz2,
        );
        second - mu * mu.transpose()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SqueezingRecord {
    pub xi2: f64,
    pub xi2_db: f64,
    pub mean_spin: [f64; 3],
    pub var_perp_min: f64,
    /// Angle of the minimal-variance axis measured from `ẑ × n` toward `n × (ẑ × n)`.
    pub optimal_quadrature_angle: f64,
}

/// Orthonormal pair spanning the plane perpendicular to unit vector `n`.
fn perpendicular_basis(n: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let z = Vector3::z();
    let mut e1 = z.cross(n);
    if e1.norm() < 1e-8 {
        e1 = n.cross(&Vector3::x());
    }
    let e1 = e1.normalize();
    let e2 = n.cross(&e1);
    (e1, e2)
}

/// Ramsey parameter `ξ² = N var_min⊥ / |⟨S⟩|²`, minimizing over the plane
/// perpendicular to the mean spin.
pub fn squeezing_parameter(m: &Moments, n_spins: usize) -> Result<SqueezingRecord> {
    let mean = m.mean();
    let len = mean.norm();
    let threshold = 1e-12 * n_spins as f64;
    if !(len > threshold) {
        return Err(Error::DegenerateSpin { mean_spin: len, threshold });
    }
    let n = mean / len;
    let (e1, e2) = perpendicular_basis(&n);
    let cov = m.covariance();
    let a = e1.dot(&(cov * e1));
    let d = e2.dot(&(cov * e2));
    let b = e1.dot(&(cov * e2));
    let cov2 = Matrix2::new(a, b, b, d);
    let half_diff = 0.5 * (cov2[(0, 0)] - cov2[(1, 1)]);
    let var = 0.5 * (a + d) - (half_diff * half_diff + b * b).sqrt();
    let angle = 0.5 * (2.0 * b).atan2(a - d) + 0.5 * PI;
    let xi2 = n_spins as f64 * var / (len * len);
    Ok(SqueezingRecord {
        xi2,
        xi2_db: 10.0 * xi2.log10(),
        mean_spin: [mean.x, mean.y, mean.z],
        var_perp_min: var,
        optimal_quadrature_angle: angle.rem_euclid(PI),
    })
}

/// Gauss–Legendre nodes and weights on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub n_theta: usize,
    pub n_phi: usize,
}

impl GridSpec {
    /// Smallest grid on which the normalization quadrature is exact for spin `j`,
    /// never below 16×16.
    pub fn for_spin(j: f64) -> Self {
        let tj = (2.0 * j).round() as usize;
        GridSpec { n_theta: (tj / 2 + 2).max(16), n_phi: (2 * tj + 2).max(16) }
    }
}

/// Q(θ, φ) on a Gauss–Legendre (in cos θ) × uniform (in φ) grid.
#[derive(Debug, Clone, Serialize)]
pub struct HusimiField {
    pub j: f64,
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
    /// Row-major, `values[i * phi.len() + k]` at `(theta[i], phi[k])`.
    pub values: Vec<f64>,
    /// Quadrature weights in cos θ for each `theta[i]`.
    pub theta_weights: Vec<f64>,
    /// Trace weight of the block the field was computed from.
    pub block_weight: f64,
}

impl HusimiField {
    pub fn value(&self, i: usize, k: usize) -> f64 {
        self.values[i * self.phi.len() + k]
    }

    /// ∫ Q sin θ dθ dφ. Exact when `n_phi > 4j` and `n_theta > j`.
    pub fn normalization(&self) -> f64 {
        let dphi = 2.0 * PI / self.phi.len() as f64;
        (0..self.theta.len())
            .map(|i| {
                let row: f64 = (0..self.phi.len()).map(|k| self.value(i, k)).sum();
                self.theta_weights[i] * row * dphi
            })
            .sum()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Ratio of the two principal second moments of the Q distribution in the
    /// plane perpendicular to its mean direction; 1 for an isotropic blob.
    pub fn anisotropy(&self) -> f64 {
        let dphi = 2.0 * PI / self.phi.len() as f64;
        let mut mean = Vector3::zeros();
        let mut second = nalgebra::Matrix3::zeros();
        for (i, &th) in self.theta.iter().enumerate() {
            for (k, &ph) in self.phi.iter().enumerate() {
                let w = self.theta_weights[i] * dphi * self.value(i, k);
                let u = Vector3::new(th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos());
                mean += u * w;
                second += u * u.transpose() * w;
            }
        }
        let n = mean.normalize();
        let (e1, e2) = perpendicular_basis(&n);
        let a = e1.dot(&(second * e1));
        let d = e2.dot(&(second * e2));
        let b = e1.dot(&(second * e2));
        let disc = (0.25 * (a - d) * (a - d) + b * b).sqrt();
        (0.5 * (a + d) + disc) / (0.5 * (a + d) - disc)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("theta,phi,Q\n");
        for (i, th) in self.theta.iter().enumerate() {
            for (k, ph) in self.phi.iter().enumerate() {
                out.push_str(&format!("{th:.12e},{ph:.12e},{:.12e}\n", self.value(i, k)));
            }
        }
        out
    }

    pub fn header_json(&self) -> serde_json::Value {
        serde_json::json!({
            "schema": "husimi.v1",
            "j": self.j,
            "n_theta": self.theta.len(),
            "n_phi": self.phi.len(),
            "block_weight": self.block_weight,
            "normalization": self.normalization(),
            "max": self.max(),
            "anisotropy": self.anisotropy(),
        })
    }
}

/// Husimi Q of a density block `rho` (2j+1 square, m = j..−j), normalized by its trace.
pub fn husimi_q(j: f64, rho: &DMatrix<Complex64>, grid: GridSpec) -> Result<HusimiField> {
    if grid.n_theta < 16 || grid.n_phi < 16 {
        return Err(Error::Domain("Husimi grid must be at least 16×16".into()));
    }
    let dim = rho.nrows();
    let trace: f64 = (0..dim).map(|a| rho[(a, a)].re).sum();
    if !(trace > 0.0) {
        return Err(Error::Domain("block has zero trace".into()));
    }
    let (x, w) = gauss_legendre(grid.n_theta);
    let theta: Vec<f64> = x.iter().map(|c| c.acos()).collect();
    let phi: Vec<f64> = (0..grid.n_phi).map(|k| 2.0 * PI * k as f64 / grid.n_phi as f64).collect();
    let pref = (2.0 * j + 1.0) / (4.0 * PI) / trace;
    let values: Vec<f64> = theta
        .par_iter()
        .flat_map_iter(|&th| {
            let phi = &phi;
            phi.iter().map(move |&ph| {
                let v = css_state(j, th, ph).expect("validated j").amplitudes;
                let rv = rho * &v;
                pref * v.dotc(&rv).re
            })
        })
        .collect();
    Ok(HusimiField { j, theta, phi, values, theta_weights: w, block_weight: trace })
}

pub fn husimi_q_pure(state: &StateVector, grid: GridSpec) -> Result<HusimiField> {
    let v = &state.amplitudes;
    husimi_q(state.j, &(v * v.adjoint()), grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MinimumReport {
    pub index: usize,
    pub t_raw: f64,
    pub value_raw: f64,
    pub t_min: f64,
    pub value_min: f64,
    /// The grid minimum sits on the first or last point.
    pub boundary: bool,
}

/// Grid minimum of `values`, refined by the vertex of the parabola through
/// the three bracketing points.
pub fn find_minimum(times: &[f64], values: &[f64]) -> Result<MinimumReport> {
    if times.len() < 3 || times.len() != values.len() {
        return Err(Error::Domain("find_minimum needs at least 3 matching points".into()));
    }
    let (index, &value_raw) = values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .min_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::Domain("no finite values".into()))?;
    let t_raw = times[index];
    if index == 0 || index == times.len() - 1 {
        log::warn!("minimum on grid boundary at t = {t_raw:e}; grid too short");
        return Ok(MinimumReport { index, t_raw, value_raw, t_min: t_raw, value_min: value_raw, boundary: true });
    }
    let (x0, x1, x2) = (times[index - 1], t_raw, times[index + 1]);
    let (y0, y1, y2) = (values[index - 1], value_raw, values[index + 1]);
    if !(y0.is_finite() && y2.is_finite()) {
        return Ok(MinimumReport { index, t_raw, value_raw, t_min: t_raw, value_min: value_raw, boundary: false });
    }
    // Newton divided differences.
    let d01 = (y1 - y0) / (x1 - x0);
    let d12 = (y2 - y1) / (x2 - x1);
    let curv = (d12 - d01) / (x2 - x0);
    let (t_min, value_min) = if curv > 0.0 {
        let t = 0.5 * (x0 + x1) - d01 / (2.0 * curv);
        let t = t.clamp(x0, x2);
        (t, y0 + d01 * (t - x0) + curv * (t - x0) * (t - x1))
    } else {
        (t_raw, value_raw)
    };
    Ok(MinimumReport { index, t_raw, value_raw, t_min, value_min, boundary: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dicke::build_collective_ops;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn css_is_unsqueezed() {
        for n in [1usize, 2, 10, 100, 301] {
            let s = css_state(n as f64 / 2.0, FRAC_PI_2, 0.0).unwrap();
            let r = squeezing_parameter(&Moments::from_state(&s), n).unwrap();
            assert!((r.xi2 - 1.0).abs() < 1e-9, "N={n}: {}", r.xi2);
        }
        // Any direction.
        let s = css_state(7.5, 0.3, 2.1).unwrap();
        let r = squeezing_parameter(&Moments::from_state(&s), 15).unwrap();
        assert!((r.xi2 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn db_convention() {
        assert_relative_eq!(10.0 * 0.5f64.log10(), -3.010299956639812, epsilon = 1e-12);
    }

    #[test]
    fn moments_match_dense_operators() {
        let j = 3.5;
        let ops = build_collective_ops(j).unwrap();
        let mut s = css_state(j, 0.9, 0.4).unwrap();
        // Make it non-coherent.
        let sq = (&ops.sy * &ops.sz + &ops.sz * &ops.sy) * Complex64::new(0.0, -0.07);
        s.amplitudes = sq.exp() * &s.amplitudes;
        let m = Moments::from_state(&s);
        let e = |op: &DMatrix<Complex64>| s.expect(op).re;
        let anti = |a: &DMatrix<Complex64>, b: &DMatrix<Complex64>| 0.5 * e(&(a * b + b * a));
        assert_relative_eq!(m.sx, e(&ops.sx), epsilon = 1e-12);
        assert_relative_eq!(m.sy, e(&ops.sy), epsilon = 1e-12);
        assert_relative_eq!(m.sz, e(&ops.sz), epsilon = 1e-12);
        assert_relative_eq!(m.sx2, e(&(&ops.sx * &ops.sx)), epsilon = 1e-12);
        assert_relative_eq!(m.sy2, e(&(&ops.sy * &ops.sy)), epsilon = 1e-12);
        assert_relative_eq!(m.sz2, e(&(&ops.sz * &ops.sz)), epsilon = 1e-12);
        assert_relative_eq!(m.cxy, anti(&ops.sx, &ops.sy), epsilon = 1e-12);
        assert_relative_eq!(m.cyz, anti(&ops.sy, &ops.sz), epsilon = 1e-12);
        assert_relative_eq!(m.cxz, anti(&ops.sx, &ops.sz), epsilon = 1e-12);
    }

    #[test]
    fn x_aligned_reduces_to_plane_formula() {
        // Synthetic bundle with mean along x.
        let m = Moments { sx: 40.0, sy: 0.0, sz: 0.0, sx2: 1700.0, sy2: 12.0, sz2: 30.0, cyz: -9.0, cxy: 0.0, cxz: 0.0 };
        let vp = m.sy2 + m.sz2;
        let vm = m.sy2 - m.sz2;
        let expect = 100.0 * 0.5 * (vp - (vm * vm + 4.0 * m.cyz * m.cyz).sqrt()) / 1600.0;
        let r = squeezing_parameter(&m, 100).unwrap();
        assert_relative_eq!(r.xi2, expect, max_relative = 1e-12);
    }

    #[test]
    fn degenerate_spin() {
        let m = Moments { sx2: 1.0, sy2: 1.0, sz2: 1.0, ..Default::default() };
        assert!(matches!(squeezing_parameter(&m, 4), Err(Error::DegenerateSpin { .. })));
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(7);
        for deg in 0..14 {
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg)).sum();
            let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
            assert!((q - exact).abs() < 1e-13, "deg {deg}");
        }
    }

    #[test]
    fn husimi_css_peak_and_norm() {
        let j = 5.0;
        let s = css_state(j, FRAC_PI_2, 0.0).unwrap();
        let field = husimi_q_pure(&s, GridSpec::for_spin(j)).unwrap();
        assert!((field.normalization() - 1.0).abs() < 1e-10);
        let peak = (2.0 * j + 1.0) / (4.0 * PI);
        assert!(field.max() <= peak + 1e-12);
        let v = css_state(j, FRAC_PI_2, 0.0).unwrap().amplitudes;
        let q = peak * (v.dotc(&s.amplitudes)).norm_sqr();
        assert_relative_eq!(q, peak, max_relative = 1e-12);
        assert!((field.anisotropy() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn husimi_maximally_mixed() {
        let j = 2.0;
        let rho = DMatrix::<Complex64>::identity(5, 5) * Complex64::new(0.2, 0.0);
        let field = husimi_q(j, &rho, GridSpec { n_theta: 16, n_phi: 16 }).unwrap();
        for q in &field.values {
            assert!((q - 1.0 / (4.0 * PI)).abs() < 1e-12);
        }
    }

    #[test]
    fn minimum_on_parabola() {
        let t: Vec<f64> = (0..11).map(|k| 0.1 * k as f64).collect();
        let v: Vec<f64> = t.iter().map(|t| 2.0 * (t - 0.537).powi(2) + 0.25).collect();
        let r = find_minimum(&t, &v).unwrap();
        assert!(!r.boundary);
        assert_relative_eq!(r.t_min, 0.537, epsilon = 1e-12);
        assert_relative_eq!(r.value_min, 0.25, epsilon = 1e-12);
    }

    #[test]
    fn minimum_on_boundary() {
        let t = [0.0, 1.0, 2.0, 3.0];
        let v = [4.0, 3.0, 2.0, 1.0];
        assert!(find_minimum(&t, &v).unwrap().boundary);
    }
}
