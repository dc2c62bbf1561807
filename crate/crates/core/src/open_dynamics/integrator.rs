//! Dormand–Prince 5(4) with dense output on flat complex state vectors.

use std::ops::ControlFlow;

use num_complex::Complex64;

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Initial step; chosen automatically when `None`.
    pub h0: Option<f64>,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl { rtol: 1e-9, atol: 1e-12, max_steps: 1_000_000, h0: None }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct IntegrationStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evaluations: usize,
    /// Integration stopped early at the observer's request.
    pub stopped_early: bool,
}

fn axpy_into(out: &mut [Complex64], y: &[Complex64], h: f64, terms: &[(f64, &[Complex64])]) {
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for &(c, k) in terms {
            acc += k[i] * c;
        }
        *o = y[i] + acc * h;
    }
}

/// Integrate `dy/dt = f(t, y)` from `t0`, calling `observe(index, t, y)` at each
/// time in `t_out` (sorted, all ≥ `t0`). The observer may break to stop early.
pub fn integrate<F, O>(
    mut f: F,
    t0: f64,
    y0: &[Complex64],
    t_out: &[f64],
    ctl: &StepControl,
    mut observe: O,
) -> Result<IntegrationStats>
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]),
    O: FnMut(usize, f64, &[Complex64]) -> ControlFlow<()>,
{
    let n = y0.len();
    let mut stats = IntegrationStats::default();
    if t_out.windows(2).any(|w| w[1] <= w[0]) || t_out.first().is_some_and(|&t| t < t0) {
        return Err(Error::Domain("output times must be strictly increasing and ≥ t0".into()));
    }
    let mut next = 0;
    while next < t_out.len() && t_out[next] == t0 {
        if observe(next, t0, y0).is_break() {
            stats.stopped_early = true;
            return Ok(stats);
        }
        next += 1;
    }
    let Some(&t_end) = t_out.last() else { return Ok(stats) };
    if next == t_out.len() {
        return Ok(stats);
    }

    let zero = Complex64::new(0.0, 0.0);
    let mut y = y0.to_vec();
    let mut k: Vec<Vec<Complex64>> = (0..7).map(|_| vec![zero; n]).collect();
    let mut ytmp = vec![zero; n];
    let mut ynew = vec![zero; n];
    let mut dense = vec![zero; n];
    let mut cont: Vec<Vec<Complex64>> = (0..5).map(|_| vec![zero; n]).collect();

    let weight = |a: &[Complex64], b: &[Complex64], i: usize| ctl.atol + ctl.rtol * a[i].norm().max(b[i].norm());
    let rms = |v: &[Complex64], a: &[Complex64], b: &[Complex64]| {
        let s: f64 = v.iter().enumerate().map(|(i, x)| (x.norm() / weight(a, b, i)).powi(2)).sum();
        (s / n.max(1) as f64).sqrt()
    };

    let mut t = t0;
    f(t, &y, &mut k[0]);
    stats.rhs_evaluations += 1;

    let span = t_end - t0;
    let mut h = match ctl.h0 {
        Some(h) => h,
        None => {
            // Hairer's starting-step heuristic.
            let d0 = rms(&y, &y, &y);
            let d1 = rms(&k[0], &y, &y);
            let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 * span } else { 0.01 * d0 / d1 };
            let h0 = h0.min(span);
            axpy_into(&mut ytmp, &y, h0, &[(1.0, &k[0])]);
            f(t + h0, &ytmp, &mut k[1]);
            stats.rhs_evaluations += 1;
            let diff: Vec<Complex64> = k[1].iter().zip(&k[0]).map(|(a, b)| (a - b) / h0).collect();
            let d2 = rms(&diff, &y, &y);
            let h1 = if d1.max(d2) <= 1e-15 { (1e-6f64).max(h0 * 1e-3) } else { (0.01 / d1.max(d2)).powf(0.2) };
            (100.0 * h0).min(h1).min(span)
        }
    };
    let h_floor = 1e-14 * t_end.abs().max(span);

    while next < t_out.len() {
        if stats.accepted + stats.rejected >= ctl.max_steps {
            return Err(Error::Integrator { t, reason: format!("exceeded {} steps", ctl.max_steps) });
        }
        if h < h_floor {
            return Err(Error::Integrator { t, reason: format!("step size underflow (h = {h:e})") });
        }
        if t + h > t_end {
            h = t_end - t;
        }
        let (k1, rest) = k.split_first_mut().expect("seven stages");
        let (k2, rest) = rest.split_first_mut().expect("seven stages");
        let (k3, rest) = rest.split_first_mut().expect("seven stages");
        let (k4, rest) = rest.split_first_mut().expect("seven stages");
        let (k5, rest) = rest.split_first_mut().expect("seven stages");
        let (k6, rest) = rest.split_first_mut().expect("seven stages");
        let k7 = &mut rest[0];

        axpy_into(&mut ytmp, &y, h, &[(A21, k1)]);
        f(t + C2 * h, &ytmp, k2);
        axpy_into(&mut ytmp, &y, h, &[(A31, k1), (A32, k2)]);
        f(t + C3 * h, &ytmp, k3);
        axpy_into(&mut ytmp, &y, h, &[(A41, k1), (A42, k2), (A43, k3)]);
        f(t + C4 * h, &ytmp, k4);
        axpy_into(&mut ytmp, &y, h, &[(A51, k1), (A52, k2), (A53, k3), (A54, k4)]);
        f(t + C5 * h, &ytmp, k5);
        axpy_into(&mut ytmp, &y, h, &[(A61, k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)]);
        f(t + h, &ytmp, k6);
        axpy_into(&mut ynew, &y, h, &[(A71, k1), (A73, k3), (A74, k4), (A75, k5), (A76, k6)]);
        f(t + h, &ynew, k7);
        stats.rhs_evaluations += 6;

        for i in 0..n {
            ytmp[i] = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * h;
        }
        let err = rms(&ytmp, &y, &ynew);
        if !err.is_finite() {
            stats.rejected += 1;
            h *= 0.1;
            continue;
        }
        if err <= 1.0 {
            stats.accepted += 1;
            let t_new = t + h;
            let need_dense = next < t_out.len() && t_out[next] <= t_new;
            if need_dense {
                for i in 0..n {
                    let ydiff = ynew[i] - y[i];
                    let bspl = k1[i] * h - ydiff;
                    cont[0][i] = y[i];
                    cont[1][i] = ydiff;
                    cont[2][i] = bspl;
                    cont[3][i] = ydiff - k7[i] * h - bspl;
                    cont[4][i] = (k1[i] * D1 + k3[i] * D3 + k4[i] * D4 + k5[i] * D5 + k6[i] * D6 + k7[i] * D7) * h;
                }
            }
            while next < t_out.len() && t_out[next] <= t_new {
                let to = t_out[next];
                let out: &[Complex64] = if to == t_new {
                    &ynew
                } else {
                    let s = (to - t) / h;
                    let s1 = 1.0 - s;
                    for i in 0..n {
                        dense[i] = cont[0][i]
                            + (cont[1][i] + (cont[2][i] + (cont[3][i] + cont[4][i] * s1) * s) * s1) * s;
                    }
                    &dense
                };
                if observe(next, to, out).is_break() {
                    stats.stopped_early = true;
                    return Ok(stats);
                }
                next += 1;
            }
            std::mem::swap(&mut y, &mut ynew);
            std::mem::swap(k1, k7);
            t = t_new;
            let fac = if err == 0.0 { 10.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 10.0) };
            h *= fac;
        } else {
            stats.rejected += 1;
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
        }
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_and_rotation() {
        let lam = Complex64::new(-0.7, 3.0);
        let y0 = [Complex64::new(1.0, 0.5)];
        let t_out: Vec<f64> = (0..=20).map(|k| 0.1 * k as f64).collect();
        let ctl = StepControl { rtol: 1e-10, atol: 1e-13, ..Default::default() };
        let mut max_err: f64 = 0.0;
        let stats = integrate(
            |_, y, dy| dy[0] = lam * y[0],
            0.0,
            &y0,
            &t_out,
            &ctl,
            |_, t, y| {
                let exact = y0[0] * (lam * t).exp();
                max_err = max_err.max((y[0] - exact).norm());
                ControlFlow::Continue(())
            },
        )
        .unwrap();
        assert!(max_err < 1e-8, "{max_err}");
        assert!(stats.accepted > 0);
    }

    #[test]
    fn dense_output_is_fifth_order_accurate() {
        // One big step forced by loose tolerance; dense output must still track a polynomial of degree ≤ 4.
        let y0 = [Complex64::new(0.0, 0.0)];
        let t_out = [0.13, 0.5, 0.77, 1.0];
        let ctl = StepControl { rtol: 1e-3, atol: 1e-3, h0: Some(1.0), ..Default::default() };
        integrate(
            |t, _, dy| dy[0] = Complex64::new(4.0 * t.powi(3), 0.0),
            0.0,
            &y0,
            &t_out,
            &ctl,
            |_, t, y| {
                assert!((y[0].re - t.powi(4)).abs() < 1e-12, "t={t} y={}", y[0].re);
                ControlFlow::Continue(())
            },
        )
        .unwrap();
    }

    #[test]
    fn early_stop_and_zero_time() {
        let y0 = [Complex64::new(1.0, 0.0)];
        let mut seen = vec![];
        let stats = integrate(
            |_, y, dy| dy[0] = -y[0],
            0.0,
            &y0,
            &[0.0, 1.0, 2.0, 3.0],
            &StepControl::default(),
            |i, _, y| {
                seen.push((i, y[0].re));
                if i == 1 {
                    ControlFlow::Break(())
                } else {
                    ControlFlow::Continue(())
                }
            },
        )
        .unwrap();
        assert!(stats.stopped_early);
        assert_eq!(seen.len(), 2);
        assert_eq!(seen[0], (0, 1.0));
    }

    #[test]
    fn rejects_unsorted_grid() {
        let y0 = [Complex64::new(1.0, 0.0)];
        let r = integrate(|_, _, _| {}, 0.0, &y0, &[1.0, 0.5], &StepControl::default(), |_, _, _| ControlFlow::Continue(()));
        assert!(r.is_err());
    }
}
