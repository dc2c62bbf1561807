//! Least-squares fit of `y = a·N^b + const` by Levenberg–Marquardt.

use nalgebra::{Matrix3, Vector3};
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub a: f64,
    pub b: f64,
    #[serde(rename = "const")]
    pub constant: f64,
    /// Euclidean norm of the residual vector in the fitted space.
    pub residual_norm: f64,
    /// Standard errors of (a, b, const) from the Gauss-Newton covariance.
    pub std_errors: [f64; 3],
    pub n_range: [usize; 2],
    pub n_points: usize,
    pub iterations: usize,
    pub log_space: bool,
}

impl FitResult {
    pub fn eval(&self, n: f64) -> f64 {
        self.a * n.powf(self.b) + self.constant
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Fit `ln y` against `ln f` instead of `y` against `f`.
    pub log_space: bool,
    pub max_iter: usize,
    /// Converged once `|δp| < step_tol · |p|`.
    pub step_tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { log_space: false, max_iter: 2000, step_tol: 1e-10 }
    }
}

struct Problem<'a> {
    x: &'a [f64],
    y: &'a [f64],
    log_space: bool,
}

impl Problem<'_> {
    /// Residuals and Jacobian of the model (not of the residual).
    fn linearize(&self, p: &Vector3<f64>) -> Option<(Vec<f64>, Vec<Vector3<f64>>)> {
        let mut r = Vec::with_capacity(self.x.len());
        let mut jac = Vec::with_capacity(self.x.len());
        for (&x, &y) in self.x.iter().zip(self.y) {
            let xb = x.powf(p[1]);
            let f = p[0] * xb + p[2];
            let row = Vector3::new(xb, p[0] * xb * x.ln(), 1.0);
            if self.log_space {
                if !(f > 0.0) {
                    return None;
                }
                r.push(y.ln() - f.ln());
                jac.push(row / f);
            } else {
                r.push(y - f);
                jac.push(row);
            }
        }
        r.iter().all(|v| v.is_finite()).then_some((r, jac))
    }

    fn cost(&self, p: &Vector3<f64>) -> f64 {
        self.linearize(p).map(|(r, _)| r.iter().map(|v| v * v).sum()).unwrap_or(f64::INFINITY)
    }
}

fn normal_equations(r: &[f64], jac: &[Vector3<f64>]) -> (Matrix3<f64>, Vector3<f64>) {
    let mut jtj = Matrix3::zeros();
    let mut jtr = Vector3::zeros();
    for (ri, row) in r.iter().zip(jac) {
        jtj += row * row.transpose();
        jtr += row * *ri;
    }
    (jtj, jtr)
}

fn levenberg_marquardt(prob: &Problem, p0: Vector3<f64>, opts: &FitOptions) -> Result<(Vector3<f64>, usize)> {
    let mut p = p0;
    let mut trace = vec![[p[0], p[1], p[2]]];
    let diverge = |reason: &str, iterations: usize, trace: Vec<[f64; 3]>| Error::FitDivergence { iterations, reason: reason.to_string(), trace };
    let mut cost = prob.cost(&p);
    if !cost.is_finite() {
        return Err(diverge("initial guess gives non-finite residuals", 0, trace));
    }
    let mut lambda = 1e-3;
    for it in 1..=opts.max_iter {
        let (r, jac) = prob.linearize(&p).ok_or_else(|| diverge("non-finite residuals", it, trace.clone()))?;
        let (jtj, jtr) = normal_equations(&r, &jac);
        loop {
            let mut lhs = jtj;
            for k in 0..3 {
                lhs[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
            }
            let Some(delta) = lhs.lu().solve(&jtr) else {
                lambda *= 10.0;
                if lambda > 1e30 {
                    return Err(diverge("singular normal equations", it, trace));
                }
                continue;
            };
            let small = delta.norm() <= opts.step_tol * p.norm().max(f64::MIN_POSITIVE);
            let trial = p + delta;
            let trial_cost = prob.cost(&trial);
            if trial_cost <= cost {
                p = trial;
                cost = trial_cost;
                trace.push([p[0], p[1], p[2]]);
                lambda = (lambda / 3.0).max(1e-12);
                if small {
                    return Ok((p, it));
                }
                break;
            }
            if small {
                return Ok((p, it));
            }
            lambda *= 4.0;
            if lambda > 1e30 {
                return Err(diverge("damping exhausted without a descent step", it, trace));
            }
        }
    }
    Err(diverge("iteration limit", opts.max_iter, trace))
}

/// Ordinary least squares of `ln(y − c0)` on `ln x`, giving `(a, b)`.
fn log_log_guess(x: &[f64], y: &[f64], c0: f64) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = x.iter().zip(y).map(|(&x, &y)| (x.ln(), (y - c0).ln())).collect();
    if pts.iter().any(|(u, v)| !u.is_finite() || !v.is_finite()) {
        return None;
    }
    let n = pts.len() as f64;
    let (mu, mv) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let sxx: f64 = pts.iter().map(|p| (p.0 - mu).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mu) * (p.1 - mv)).sum();
    if sxx == 0.0 {
        return None;
    }
    let b = sxy / sxx;
    Some(((mv - b * mu).exp(), b))
}

/// Fit `y = a·N^b + const` to at least five points.
///
/// Starts are generated from log-log fits of `y − c0` for a few offsets below
/// `min y`; the lowest-cost converged run wins.
pub fn fit_power_law(n: &[f64], y: &[f64], opts: &FitOptions) -> Result<FitResult> {
    if n.len() != y.len() || n.len() < 5 {
        return Err(Error::Domain(format!("power-law fit needs at least 5 matching points, got {}", n.len().min(y.len()))));
    }
    if n.iter().any(|&v| !(v > 0.0)) || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("power-law fit needs positive N and finite values".into()));
    }
    if opts.log_space && y.iter().any(|&v| v <= 0.0) {
        return Err(Error::Domain("log-space fit needs positive values".into()));
    }
    let prob = Problem { x: n, y, log_space: opts.log_space };
    let y_min = y.iter().copied().fold(f64::INFINITY, f64::min);
    let y_max = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = (y_max - y_min).max(f64::EPSILON * y_max.abs().max(1.0));
    let offsets = [y_min - span, y_min - 0.1 * span, 0.0, 0.5 * y_min, 0.9 * y_min];

    let mut best: Option<(Vector3<f64>, usize, f64)> = None;
    let mut last_err = None;
    for &c0 in &offsets {
        let Some((a, b)) = log_log_guess(n, y, c0) else { continue };
        match levenberg_marquardt(&prob, Vector3::new(a, b, c0), opts) {
            Ok((p, it)) => {
                let cost = prob.cost(&p);
                if best.as_ref().is_none_or(|(_, _, c)| cost < *c) {
                    best = Some((p, it, cost));
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    let (p, iterations, cost) = match best {
        Some(b) => b,
        None => {
            return Err(last_err.unwrap_or_else(|| Error::FitDivergence {
                iterations: 0,
                reason: "no admissible starting point".into(),
                trace: Vec::new(),
            }))
        }
    };
    let (r, jac) = prob.linearize(&p).expect("converged point is admissible");
    let (jtj, _) = normal_equations(&r, &jac);
    let dof = n.len().saturating_sub(3).max(1) as f64;
    let cov = jtj.try_inverse().map(|inv| inv * (cost / dof));
    let std_errors = match cov {
        Some(c) => [c[(0, 0)].max(0.0).sqrt(), c[(1, 1)].max(0.0).sqrt(), c[(2, 2)].max(0.0).sqrt()],
        None => [f64::NAN; 3],
    };
    let lo = n.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = n.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(FitResult {
        a: p[0],
        b: p[1],
        constant: p[2],
        residual_norm: cost.sqrt(),
        std_errors,
        n_range: [lo.round() as usize, hi.round() as usize],
        n_points: n.len(),
        iterations,
        log_space: opts.log_space,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(a: f64, b: f64, c: f64, ns: &[f64]) -> Vec<f64> {
        ns.iter().map(|&n| a * n.powf(b) + c).collect()
    }

    #[test]
    fn recovers_synthetic_parameters() {
        let ns = [20.0, 30.0, 40.0, 60.0, 80.0, 100.0, 140.0, 200.0];
        let y = synthetic(2.0, -0.7, 0.05, &ns);
        for log_space in [false, true] {
            let f = fit_power_law(&ns, &y, &FitOptions { log_space, ..FitOptions::default() }).unwrap();
            assert!((f.a - 2.0).abs() < 1e-6, "{f:?}");
            assert!((f.b + 0.7).abs() < 1e-6, "{f:?}");
            assert!((f.constant - 0.05).abs() < 1e-6, "{f:?}");
            assert_eq!(f.n_range, [20, 200]);
        }
    }

    #[test]
    fn recovers_zero_constant() {
        let ns = [20.0, 30.0, 40.0, 60.0, 80.0, 100.0, 140.0, 200.0];
        let y = synthetic(1.3, -2.0 / 3.0, 0.0, &ns);
        let f = fit_power_law(&ns, &y, &FitOptions::default()).unwrap();
        assert!((f.b + 2.0 / 3.0).abs() < 1e-6 && f.constant.abs() < 1e-6, "{f:?}");
    }

    #[test]
    fn noisy_data_has_standard_errors() {
        let ns = [20.0, 30.0, 40.0, 60.0, 80.0, 100.0, 140.0, 200.0];
        let mut y = synthetic(2.0, -0.7, 0.05, &ns);
        for (k, v) in y.iter_mut().enumerate() {
            *v *= 1.0 + 1e-3 * if k % 2 == 0 { 1.0 } else { -1.0 };
        }
        let f = fit_power_law(&ns, &y, &FitOptions::default()).unwrap();
        assert!(f.std_errors.iter().all(|s| s.is_finite() && *s > 0.0));
        assert!((f.b + 0.7).abs() < 5.0 * f.std_errors[1] + 0.05);
    }

    #[test]
    fn too_few_points() {
        assert!(matches!(fit_power_law(&[1.0, 2.0, 3.0, 4.0], &[1.0, 0.5, 0.3, 0.2], &FitOptions::default()), Err(Error::Domain(_))));
    }

    #[test]
    fn divergence_reports_trace() {
        let ns = [20.0, 30.0, 40.0, 60.0, 80.0];
        let y = synthetic(2.0, -0.7, 0.05, &ns);
        let opts = FitOptions { max_iter: 1, ..FitOptions::default() };
        match fit_power_law(&ns, &y, &opts) {
            Err(Error::FitDivergence { trace, .. }) => assert!(!trace.is_empty()),
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
