//! Explicit Runge-Kutta integrators for complex-valued linear ODE systems.
//!
//! [`integrate`] is the adaptive Dormand-Prince 5(4) pair with PI step-size
//! control and Shampine's 4th-order continuous extension. [`rk4_fixed`] is the
//! classical fixed-step scheme, kept separate so that reference computations
//! do not share code paths with the production integrator.

use serde::{Deserialize, Serialize};

use crate::error::{FloquetError, Result};
use crate::linalg::C64;

/// Relative and absolute local-error tolerances of the adaptive integrator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrationTolerances {
    pub relative: f64,
    pub absolute: f64,
}

impl Default for IntegrationTolerances {
    fn default() -> Self {
        Self { relative: 1e-10, absolute: 1e-12 }
    }
}

impl IntegrationTolerances {
    pub fn new(relative: f64, absolute: f64) -> Result<Self> {
        let tol = Self { relative, absolute };
        tol.validate()?;
        Ok(tol)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        if !ok(self.relative) || !ok(self.absolute) {
            return Err(FloquetError::InvalidArgument(format!(
                "tolerances must be positive and finite (relative = {}, absolute = {})",
                self.relative, self.absolute
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorOptions {
    pub tolerances: IntegrationTolerances,
    pub max_steps: usize,
    /// Upper bound on |h|; `None` leaves the step unbounded.
    pub max_step: Option<f64>,
    pub initial_step: Option<f64>,
}

impl IntegratorOptions {
    pub fn new(tolerances: IntegrationTolerances) -> Self {
        Self { tolerances, max_steps: 500_000, max_step: None, initial_step: None }
    }

    pub fn with_max_step(mut self, h: f64) -> Self {
        self.max_step = Some(h);
        self
    }
}

// Dormand-Prince 5(4) tableau.
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
// Continuous extension.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Piecewise-polynomial continuous output of an adaptive run.
#[derive(Debug, Clone, Default)]
pub struct DenseOutput {
    dim: usize,
    forward: bool,
    starts: Vec<f64>,
    steps: Vec<f64>,
    coeffs: Vec<C64>,
}

impl DenseOutput {
    fn new(dim: usize, forward: bool) -> Self {
        Self { dim, forward, ..Default::default() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn segments(&self) -> usize {
        self.starts.len()
    }

    /// Time span covered, as (lower, upper).
    pub fn span(&self) -> (f64, f64) {
        let a = self.starts[0];
        let last = self.starts.len() - 1;
        let b = self.starts[last] + self.steps[last];
        if a <= b {
            (a, b)
        } else {
            (b, a)
        }
    }

    fn segment(&self, t: f64) -> usize {
        let n = self.starts.len();
        let idx = if self.forward {
            self.starts.partition_point(|&s| s <= t)
        } else {
            self.starts.partition_point(|&s| s >= t)
        };
        idx.saturating_sub(1).min(n - 1)
    }

    /// Evaluate components `range` of the interpolant at `t` into `out`.
    pub fn eval_range(&self, t: f64, range: std::ops::Range<usize>, out: &mut [C64]) {
        let seg = self.segment(t);
        let theta = (t - self.starts[seg]) / self.steps[seg];
        let theta1 = 1.0 - theta;
        let base = seg * 5 * self.dim;
        let r = |k: usize, i: usize| self.coeffs[base + k * self.dim + i];
        for (o, i) in out.iter_mut().zip(range) {
            *o = r(0, i) + (r(1, i) + (r(2, i) + (r(3, i) + r(4, i) * theta1) * theta) * theta1) * theta;
        }
    }

    pub fn eval(&self, t: f64, out: &mut [C64]) {
        self.eval_range(t, 0..self.dim, out)
    }

    pub fn eval_vec(&self, t: f64) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.dim];
        self.eval(t, &mut out);
        out
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub t_end: f64,
    pub y_end: Vec<C64>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub evaluations: usize,
    pub dense: Option<DenseOutput>,
}

fn weighted_rms(err: &[C64], y0: &[C64], y1: &[C64], tol: &IntegrationTolerances) -> f64 {
    let n = err.len().max(1) as f64;
    let sum: f64 = err
        .iter()
        .zip(y0.iter().zip(y1))
        .map(|(e, (a, b))| {
            let sc = tol.absolute + tol.relative * a.norm().max(b.norm());
            (e.norm() / sc).powi(2)
        })
        .sum();
    (sum / n).sqrt()
}

fn initial_step<F>(rhs: &mut F, t0: f64, y0: &[C64], f0: &[C64], dir: f64, opts: &IntegratorOptions) -> f64
where
    F: FnMut(f64, &[C64], &mut [C64]),
{
    let tol = &opts.tolerances;
    let n = y0.len().max(1) as f64;
    let sc = |a: &C64| tol.absolute + tol.relative * a.norm();
    let d0 = (y0.iter().map(|y| (y.norm() / sc(y)).powi(2)).sum::<f64>() / n).sqrt();
    let d1 = (f0.iter().zip(y0).map(|(f, y)| (f.norm() / sc(y)).powi(2)).sum::<f64>() / n).sqrt();
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    if let Some(hmax) = opts.max_step {
        h0 = h0.min(hmax);
    }
    let y1: Vec<C64> = y0.iter().zip(f0).map(|(y, f)| y + f * (dir * h0)).collect();
    let mut f1 = vec![C64::new(0.0, 0.0); y0.len()];
    rhs(t0 + dir * h0, &y1, &mut f1);
    let d2 = (f1.iter().zip(f0).zip(y0).map(|((a, b), y)| ((a - b).norm() / sc(y)).powi(2)).sum::<f64>() / n).sqrt() / h0;
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
    let mut h = (100.0 * h0).min(h1);
    if let Some(hmax) = opts.max_step {
        h = h.min(hmax);
    }
    h
}

/// Integrate `y' = rhs(t, y)` from `t0` to `t1` (either direction).
pub fn integrate<F>(mut rhs: F, t0: f64, t1: f64, y0: &[C64], opts: &IntegratorOptions, keep_dense: bool) -> Result<Solution>
where
    F: FnMut(f64, &[C64], &mut [C64]),
{
    opts.tolerances.validate()?;
    if !t0.is_finite() || !t1.is_finite() {
        return Err(FloquetError::InvalidArgument("integration bounds must be finite".into()));
    }
    let n = y0.len();
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let mut dense = keep_dense.then(|| DenseOutput::new(n, dir > 0.0));
    if t1 == t0 {
        if let Some(d) = dense.as_mut() {
            d.starts.push(t0);
            d.steps.push(1.0);
            d.coeffs.extend_from_slice(y0);
            d.coeffs.extend(std::iter::repeat_n(C64::new(0.0, 0.0), 4 * n));
        }
        return Ok(Solution { t_end: t1, y_end: y0.to_vec(), accepted_steps: 0, rejected_steps: 0, evaluations: 0, dense });
    }

    let zero = C64::new(0.0, 0.0);
    let mut y = y0.to_vec();
    let mut ynew = vec![zero; n];
    let mut ytmp = vec![zero; n];
    let mut k1 = vec![zero; n];
    let mut k2 = vec![zero; n];
    let mut k3 = vec![zero; n];
    let mut k4 = vec![zero; n];
    let mut k5 = vec![zero; n];
    let mut k6 = vec![zero; n];
    let mut k7 = vec![zero; n];
    let mut err = vec![zero; n];

    let mut t = t0;
    rhs(t, &y, &mut k1);
    let mut evaluations = 1;
    let mut h = match opts.initial_step {
        Some(h) => h.abs(),
        None => {
            evaluations += 1;
            initial_step(&mut rhs, t0, &y, &k1, dir, opts)
        }
    };
    let hmax = opts.max_step.unwrap_or(f64::INFINITY).min((t1 - t0).abs());
    h = h.min(hmax);

    const SAFE: f64 = 0.9;
    const BETA: f64 = 0.04;
    const EXPO1: f64 = 0.2 - BETA * 0.75;
    const FACC1: f64 = 5.0;
    const FACC2: f64 = 0.1;
    let mut facold: f64 = 1e-4;
    let mut last_rejected = false;
    let (mut accepted, mut rejected) = (0usize, 0usize);

    loop {
        if accepted + rejected >= opts.max_steps {
            return Err(FloquetError::Integration { time: t, reason: format!("exceeded {} steps", opts.max_steps) });
        }
        if h < 16.0 * f64::EPSILON * t.abs().max(1e-300) || !h.is_finite() {
            return Err(FloquetError::Integration { time: t, reason: format!("step size underflow (h = {h:e})") });
        }
        let last = (t + dir * h - t1) * dir >= 0.0;
        if last {
            h = (t1 - t).abs();
        }
        let hs = dir * h;

        for i in 0..n {
            ytmp[i] = y[i] + k1[i] * (hs * A21);
        }
        rhs(t + C2 * hs, &ytmp, &mut k2);
        for i in 0..n {
            ytmp[i] = y[i] + (k1[i] * A31 + k2[i] * A32) * hs;
        }
        rhs(t + C3 * hs, &ytmp, &mut k3);
        for i in 0..n {
            ytmp[i] = y[i] + (k1[i] * A41 + k2[i] * A42 + k3[i] * A43) * hs;
        }
        rhs(t + C4 * hs, &ytmp, &mut k4);
        for i in 0..n {
            ytmp[i] = y[i] + (k1[i] * A51 + k2[i] * A52 + k3[i] * A53 + k4[i] * A54) * hs;
        }
        rhs(t + C5 * hs, &ytmp, &mut k5);
        for i in 0..n {
            ytmp[i] = y[i] + (k1[i] * A61 + k2[i] * A62 + k3[i] * A63 + k4[i] * A64 + k5[i] * A65) * hs;
        }
        let t_new = if last { t1 } else { t + hs };
        rhs(t_new, &ytmp, &mut k6);
        for i in 0..n {
            ynew[i] = y[i] + (k1[i] * A71 + k3[i] * A73 + k4[i] * A74 + k5[i] * A75 + k6[i] * A76) * hs;
        }
        rhs(t_new, &ynew, &mut k7);
        evaluations += 6;
        for i in 0..n {
            err[i] = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * hs;
        }
        let e = weighted_rms(&err, &y, &ynew, &opts.tolerances);
        if !e.is_finite() {
            return Err(FloquetError::Integration { time: t, reason: "non-finite error estimate".into() });
        }
        let fac11 = e.powf(EXPO1);

        if e <= 1.0 {
            accepted += 1;
            if let Some(d) = dense.as_mut() {
                d.starts.push(t);
                d.steps.push(t_new - t);
                let base = d.coeffs.len();
                d.coeffs.resize(base + 5 * n, zero);
                let (r1, rest) = d.coeffs[base..].split_at_mut(n);
                let (r2, rest) = rest.split_at_mut(n);
                let (r3, rest) = rest.split_at_mut(n);
                let (r4, r5) = rest.split_at_mut(n);
                for i in 0..n {
                    let dy = ynew[i] - y[i];
                    let bspl = k1[i] * hs - dy;
                    r1[i] = y[i];
                    r2[i] = dy;
                    r3[i] = bspl;
                    r4[i] = dy - k7[i] * hs - bspl;
                    r5[i] = (k1[i] * D1 + k3[i] * D3 + k4[i] * D4 + k5[i] * D5 + k6[i] * D6 + k7[i] * D7) * hs;
                }
            }
            let fac = fac11 / facold.powf(BETA);
            facold = e.max(1e-4);
            std::mem::swap(&mut y, &mut ynew);
            std::mem::swap(&mut k1, &mut k7);
            t = t_new;
            if last {
                break;
            }
            let fac = (fac / SAFE).clamp(FACC2, FACC1);
            let mut hnew = h / fac;
            if last_rejected {
                hnew = hnew.min(h);
            }
            h = hnew.min(hmax);
            last_rejected = false;
        } else {
            rejected += 1;
            h /= FACC1.min(fac11 / SAFE);
            last_rejected = true;
        }
    }

    Ok(Solution { t_end: t, y_end: y, accepted_steps: accepted, rejected_steps: rejected, evaluations, dense })
}

/// Classical fixed-step RK4 from `t0` to `t1` with `steps` equal steps.
pub fn rk4_fixed<F>(mut rhs: F, t0: f64, t1: f64, y0: &[C64], steps: usize) -> Vec<C64>
where
    F: FnMut(f64, &[C64], &mut [C64]),
{
    let n = y0.len();
    let zero = C64::new(0.0, 0.0);
    let mut y = y0.to_vec();
    if steps == 0 || t0 == t1 {
        return y;
    }
    let h = (t1 - t0) / steps as f64;
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (vec![zero; n], vec![zero; n], vec![zero; n], vec![zero; n], vec![zero; n]);
    for s in 0..steps {
        let t = t0 + s as f64 * h;
        rhs(t, &y, &mut k1);
        for i in 0..n {
            tmp[i] = y[i] + k1[i] * (0.5 * h);
        }
        rhs(t + 0.5 * h, &tmp, &mut k2);
        for i in 0..n {
            tmp[i] = y[i] + k2[i] * (0.5 * h);
        }
        rhs(t + 0.5 * h, &tmp, &mut k3);
        for i in 0..n {
            tmp[i] = y[i] + k3[i] * h;
        }
        let t_next = if s + 1 == steps { t1 } else { t + h };
        rhs(t_next, &tmp, &mut k4);
        for i in 0..n {
            y[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0);
        }
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decay(_t: f64, y: &[C64], dy: &mut [C64]) {
        dy[0] = -y[0];
        dy[1] = C64::new(0.0, 3.0) * y[1];
    }

    #[test]
    fn dopri5_matches_exponential() {
        let opts = IntegratorOptions::new(IntegrationTolerances::default());
        let y0 = [C64::new(1.0, 0.0), C64::new(1.0, 0.0)];
        let sol = integrate(decay, 0.0, 2.0, &y0, &opts, true).unwrap();
        assert!((sol.y_end[0] - C64::new((-2.0f64).exp(), 0.0)).norm() < 1e-10);
        assert!((sol.y_end[1] - C64::new(0.0, 6.0).exp()).norm() < 1e-9);
        let dense = sol.dense.unwrap();
        for k in 0..=40 {
            let t = 2.0 * k as f64 / 40.0;
            let v = dense.eval_vec(t);
            assert!((v[0] - C64::new((-t).exp(), 0.0)).norm() < 1e-9, "t = {t}");
            assert!((v[1] - C64::new(0.0, 3.0 * t).exp()).norm() < 1e-9, "t = {t}");
        }
    }

    #[test]
    fn dopri5_backward() {
        let opts = IntegratorOptions::new(IntegrationTolerances::default());
        let y0 = [C64::new(1.0, 0.0), C64::new(1.0, 0.0)];
        let sol = integrate(decay, 1.0, 0.0, &y0, &opts, true).unwrap();
        assert!((sol.y_end[0] - C64::new(1.0f64.exp(), 0.0)).norm() < 1e-9);
        let dense = sol.dense.unwrap();
        assert_eq!(dense.span(), (0.0, 1.0));
        let v = dense.eval_vec(0.25);
        assert!((v[0] - C64::new(0.75f64.exp(), 0.0)).norm() < 1e-9);
    }

    #[test]
    fn rk4_fourth_order_convergence() {
        let y0 = [C64::new(1.0, 0.0), C64::new(1.0, 0.0)];
        let exact = (-1.0f64).exp();
        let e1 = (rk4_fixed(decay, 0.0, 1.0, &y0, 20)[0].re - exact).abs();
        let e2 = (rk4_fixed(decay, 0.0, 1.0, &y0, 40)[0].re - exact).abs();
        let ratio = e1 / e2;
        assert!((ratio - 16.0).abs() < 1.0, "ratio {ratio}");
    }

    #[test]
    fn invalid_tolerances_rejected() {
        assert!(IntegrationTolerances::new(0.0, 1e-12).is_err());
        assert!(IntegrationTolerances::new(1e-8, f64::NAN).is_err());
    }

    #[test]
    fn step_underflow_reports_time() {
        // Finite-time blow-up at t = 1.
        let rhs = |_t: f64, y: &[C64], dy: &mut [C64]| dy[0] = y[0] * y[0];
        let opts = IntegratorOptions::new(IntegrationTolerances::default());
        match integrate(rhs, 0.0, 2.0, &[C64::new(1.0, 0.0)], &opts, false) {
            Err(FloquetError::Integration { time, .. }) => assert!(time < 1.0 && time > 0.9),
            other => panic!("expected integration failure, got {other:?}"),
        }
    }
}
