//! Periodic cubic-spline interpolation of uniformly sampled complex channels.

use crate::error::{FloquetError, Result};
use crate::linalg::C64;

/// Interpolation order reported in output metadata.
pub const SPLINE_ORDER: usize = 3;

#[derive(Debug, Clone)]
pub struct PeriodicSpline {
    period: f64,
    spacing: f64,
    samples: usize,
    channels: usize,
    // [sample][channel]
    values: Vec<C64>,
    second: Vec<C64>,
}

/// Solve the cyclic system m_{k-1} + 4 m_k + m_{k+1} = r_k (Sherman-Morrison).
fn solve_cyclic(rhs: &[C64]) -> Vec<C64> {
    let n = rhs.len();
    let (a, b, c) = (1.0, 4.0, 1.0);
    let (alpha, beta) = (c, a); // corner entries
    let gamma = -b;
    // Modified diagonal for the Sherman-Morrison split.
    let mut diag = vec![b; n];
    diag[0] = b - gamma;
    diag[n - 1] = b - alpha * beta / gamma;

    let thomas = |d: &[C64]| -> Vec<C64> {
        let mut cp = vec![0.0; n];
        let mut dp = vec![C64::new(0.0, 0.0); n];
        cp[0] = c / diag[0];
        dp[0] = d[0] / diag[0];
        for i in 1..n {
            let m = diag[i] - a * cp[i - 1];
            cp[i] = c / m;
            dp[i] = (d[i] - dp[i - 1] * a) / m;
        }
        let mut x = vec![C64::new(0.0, 0.0); n];
        x[n - 1] = dp[n - 1];
        for i in (0..n - 1).rev() {
            x[i] = dp[i] - x[i + 1] * cp[i];
        }
        x
    };

    let x = thomas(rhs);
    let mut u = vec![C64::new(0.0, 0.0); n];
    u[0] = C64::new(gamma, 0.0);
    u[n - 1] = C64::new(alpha, 0.0);
    let z = thomas(&u);
    let fact = (x[0] + x[n - 1] * (beta / gamma)) / (C64::new(1.0, 0.0) + z[0] + z[n - 1] * (beta / gamma));
    x.iter().zip(&z).map(|(xi, zi)| xi - fact * zi).collect()
}

impl PeriodicSpline {
    /// `values` holds `samples` rows of `channels` entries, sampled at `t_k = k * period / samples`.
    pub fn new(period: f64, channels: usize, values: Vec<C64>) -> Result<Self> {
        if !(period.is_finite() && period > 0.0) {
            return Err(FloquetError::InvalidArgument(format!("spline period must be positive, got {period}")));
        }
        if channels == 0 || !values.len().is_multiple_of(channels) {
            return Err(FloquetError::InvalidArgument("spline data length is not a multiple of the channel count".into()));
        }
        let samples = values.len() / channels;
        if samples < 3 {
            return Err(FloquetError::InvalidArgument(format!("periodic spline needs at least 3 samples, got {samples}")));
        }
        let spacing = period / samples as f64;
        let mut second = vec![C64::new(0.0, 0.0); values.len()];
        let scale = 6.0 / (spacing * spacing);
        for ch in 0..channels {
            let y = |k: usize| values[(k % samples) * channels + ch];
            let rhs: Vec<C64> = (0..samples)
                .map(|k| (y(k + 1) - y(k) * 2.0 + y(k + samples - 1)) * scale)
                .collect();
            for (k, m) in solve_cyclic(&rhs).into_iter().enumerate() {
                second[k * channels + ch] = m;
            }
        }
        Ok(Self { period, spacing, samples, channels, values, second })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn eval(&self, t: f64, out: &mut [C64]) {
        let mut u = (t - (t / self.period).floor() * self.period) / self.spacing;
        if !(u >= 0.0) {
            u = 0.0;
        }
        let mut k = u.floor() as usize;
        let mut s = u - k as f64;
        if k >= self.samples {
            k = self.samples - 1;
            s = 1.0;
        }
        let k1 = (k + 1) % self.samples;
        let h2 = self.spacing * self.spacing / 6.0;
        let w0 = 1.0 - s;
        let c0 = (w0 * w0 * w0 - w0) * h2;
        let c1 = (s * s * s - s) * h2;
        for (ch, o) in out.iter_mut().enumerate().take(self.channels) {
            let (y0, y1) = (self.values[k * self.channels + ch], self.values[k1 * self.channels + ch]);
            let (m0, m1) = (self.second[k * self.channels + ch], self.second[k1 * self.channels + ch]);
            *o = y0 * w0 + y1 * s + m0 * c0 + m1 * c1;
        }
    }

    pub fn eval_vec(&self, t: f64) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.channels];
        self.eval(t, &mut out);
        out
    }
}
