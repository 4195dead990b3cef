//! Spectral densities from one-period integrals, for infinite and finite
//! detection times.
//!
//! Every spectral term is a double integral of a kernel with a lower branch
//! `exp(a (t - t')) g_low(t')` for `t' <= t` and an upper branch
//! `exp(b (t' - t)) g_up(t)` for `t < t'`. With `xa = a + i w` and `xb = b - i w`
//! the one-period pieces are
//!
//! * below: `[int P_a exp(xa t)] [int P_b g_low exp(-xa t')]`
//! * above: `[int P_b exp(xb t')] [int P_a g_up exp(-xb t)]`
//! * diagonal lower / upper: the same integrands restricted to the triangle.
//!
//! The product integrals and the nested triangle integrals are obtained from one
//! backward pass (the inner integrals, kept as dense output) and one forward
//! pass (outer and nested accumulators), batched over all requested terms.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::correlations::{one_minus_exp, upsilon, NoiseKernel};
use crate::error::{FloquetError, Result};
use crate::exec::Execution;
use crate::floquet::periodic_options;
use crate::interp::PeriodicSpline;
use crate::linalg::{self, CMatrix, C64};
use crate::ode::{integrate, IntegrationTolerances};

/// Below this `|1 - exp(xT)|` the geometric period sums are added up term by term.
pub const SERIES_FALLBACK_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone)]
pub enum WeightKind {
    ConstantOne,
    /// `K_{row, mode}(t)`.
    FrameComponent { row: usize, mode: usize },
    Sampled(Arc<PeriodicSpline>),
}

/// T-periodic weight `P(t)`, times a constant factor.
#[derive(Debug, Clone)]
pub struct WeightFunction {
    pub kind: WeightKind,
    pub factor: C64,
}

impl WeightFunction {
    pub fn one() -> Self {
        Self { kind: WeightKind::ConstantOne, factor: linalg::ONE }
    }

    pub fn zero() -> Self {
        Self { kind: WeightKind::ConstantOne, factor: linalg::ZERO }
    }

    pub fn frame_component(row: usize, mode: usize) -> Self {
        Self { kind: WeightKind::FrameComponent { row, mode }, factor: linalg::ONE }
    }

    /// Periodic cubic spline through `values[k]` at `t_k = k T / n`.
    pub fn sampled(period: f64, values: Vec<C64>) -> Result<Self> {
        Ok(Self { kind: WeightKind::Sampled(Arc::new(PeriodicSpline::new(period, 1, values)?)), factor: linalg::ONE })
    }

    pub fn scaled(mut self, a: C64) -> Self {
        self.factor *= a;
        self
    }

    pub fn is_zero(&self) -> bool {
        self.factor == linalg::ZERO
    }

    /// `P(t)` given the frame `K(t)` at the same time.
    pub fn evaluate(&self, t: f64, frame: &CMatrix) -> C64 {
        let base = match &self.kind {
            WeightKind::ConstantOne => linalg::ONE,
            WeightKind::FrameComponent { row, mode } => frame[(*row, *mode)],
            WeightKind::Sampled(s) => {
                let mut v = [linalg::ZERO];
                s.eval(t, &mut v);
                v[0]
            }
        };
        base * self.factor
    }

    fn validate(&self, dimension: usize, period: f64) -> Result<()> {
        match &self.kind {
            WeightKind::FrameComponent { row, mode } if *row >= dimension || *mode >= dimension => Err(
                FloquetError::InvalidArgument(format!("frame component ({row}, {mode}) out of range for dimension {dimension}")),
            ),
            WeightKind::Sampled(s) if (s.period() - period).abs() > 1e-12 * period => Err(FloquetError::InvalidArgument(
                format!("sampled weight period {} differs from system period {period}", s.period()),
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DetectionMode {
    Infinite,
    /// `T_d = periods * T + remainder`, `0 <= remainder < T`.
    Finite { periods: u32, remainder: f64 },
}

impl DetectionMode {
    pub fn validate(&self, period: f64) -> Result<()> {
        match *self {
            DetectionMode::Infinite => Ok(()),
            DetectionMode::Finite { periods, remainder } => {
                if periods == 0 {
                    return Err(FloquetError::InvalidArgument("finite detection needs at least one period".into()));
                }
                if !(remainder >= 0.0 && remainder < period) {
                    return Err(FloquetError::InvalidArgument(format!("remainder {remainder} outside [0, {period})")));
                }
                Ok(())
            }
        }
    }

    pub fn detection_time(&self, period: f64) -> Option<f64> {
        match *self {
            DetectionMode::Infinite => None,
            DetectionMode::Finite { periods, remainder } => Some(periods as f64 * period + remainder),
        }
    }
}

/// Which correlator a spectral term integrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationKind {
    /// `<c_a(t) c_b(t')>`; both indices are modes.
    Modes,
    /// `<c_a(t) xi_b(t')>`; `a` is a mode, `b` a noise channel.
    ModeNoise,
    /// `<xi_a(t) c_b(t')>`; `a` is a noise channel, `b` a mode.
    NoiseMode,
}

#[derive(Debug, Clone)]
pub struct SpectralTerm {
    pub kind: CorrelationKind,
    pub alpha: usize,
    pub beta: usize,
    pub p_alpha: WeightFunction,
    pub p_beta: WeightFunction,
}

impl SpectralTerm {
    pub fn new(kind: CorrelationKind, alpha: usize, beta: usize, p_alpha: WeightFunction, p_beta: WeightFunction) -> Self {
        Self { kind, alpha, beta, p_alpha, p_beta }
    }

    fn has_lower(&self) -> bool {
        self.kind != CorrelationKind::NoiseMode
    }

    fn has_upper(&self) -> bool {
        self.kind != CorrelationKind::ModeNoise
    }
}

#[derive(Debug, Clone)]
pub struct SpectralDensityRequest {
    pub kind: CorrelationKind,
    pub alpha: usize,
    pub beta: usize,
    pub p_alpha: WeightFunction,
    pub p_beta: WeightFunction,
    pub omegas: Vec<f64>,
    pub mode: DetectionMode,
}

impl SpectralDensityRequest {
    pub fn term(&self) -> SpectralTerm {
        SpectralTerm::new(self.kind, self.alpha, self.beta, self.p_alpha.clone(), self.p_beta.clone())
    }
}

/// The four one-period integrals of a term (without the `Upsilon` prefactor).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OnePeriodIntegrals {
    pub below: C64,
    pub above: C64,
    pub diagonal_lower: C64,
    pub diagonal_upper: C64,
}

#[derive(Debug, Clone, Copy, Default)]
struct PassIntegrals {
    first_lower: C64,
    first_upper: C64,
    second_lower: C64,
    second_upper: C64,
    nested_lower: C64,
    nested_upper: C64,
}

/// `1 - (1/kd) (1 - q^kd) / (1 - q)` with `q = exp(xT)`.
pub fn epsilon_factor(x: C64, period: f64, periods: u32) -> C64 {
    let kd = periods as f64;
    linalg::ONE - geometric_sum(x, period, periods, 0) / kd
}

/// `sum_{j=first}^{first+kd-1} q^j` with `q = exp(xT)`.
fn geometric_sum(x: C64, period: f64, periods: u32, first: u32) -> C64 {
    let z = x * period;
    let den = one_minus_exp(z);
    if den.norm() < SERIES_FALLBACK_THRESHOLD {
        let q = z.exp();
        let mut term = (z * first as f64).exp();
        let mut acc = linalg::ZERO;
        for _ in 0..periods {
            acc += term;
            term *= q;
        }
        acc
    } else {
        (z * first as f64).exp() * one_minus_exp(z * periods as f64) / den
    }
}

/// `sum_{m=1}^{kd-1} (kd - m) q^m = kd Upsilon(x) epsilon(x)`.
fn pair_sum(x: C64, period: f64, periods: u32) -> C64 {
    let z = x * period;
    let den = one_minus_exp(z);
    if den.norm() < SERIES_FALLBACK_THRESHOLD {
        let q = z.exp();
        let mut term = q;
        let mut acc = linalg::ZERO;
        for m in 1..periods {
            acc += term * (periods - m) as f64;
            term *= q;
        }
        acc
    } else {
        let q = z.exp();
        q / den * (C64::new(periods as f64, 0.0) - geometric_sum(x, period, periods, 0))
    }
}

/// Evaluates batches of spectral terms against one noise kernel.
#[derive(Debug, Clone)]
pub struct SpectralEngine<'a> {
    kernel: &'a NoiseKernel,
    tolerances: IntegrationTolerances,
    execution: Execution,
}

impl<'a> SpectralEngine<'a> {
    pub fn new(kernel: &'a NoiseKernel, tolerances: IntegrationTolerances) -> Self {
        Self { kernel, tolerances, execution: Execution::default() }
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn kernel(&self) -> &NoiseKernel {
        self.kernel
    }

    pub fn validate_terms(&self, terms: &[SpectralTerm]) -> Result<()> {
        let (d, n, period) = (self.kernel.dimension(), self.kernel.noise_count(), self.kernel.period());
        for term in terms {
            let (amax, bmax) = match term.kind {
                CorrelationKind::Modes => (d, d),
                CorrelationKind::ModeNoise => (d, n),
                CorrelationKind::NoiseMode => (n, d),
            };
            if term.alpha >= amax || term.beta >= bmax {
                return Err(FloquetError::InvalidArgument(format!(
                    "{:?} index pair ({}, {}) out of range",
                    term.kind, term.alpha, term.beta
                )));
            }
            term.p_alpha.validate(d, period)?;
            term.p_beta.validate(d, period)?;
        }
        Ok(())
    }

    fn rates(&self, term: &SpectralTerm, omega: f64) -> (C64, C64) {
        let mu = self.kernel.decomposition().exponents();
        let i_omega = C64::new(0.0, omega);
        let xa = if term.has_lower() { mu[term.alpha] + i_omega } else { linalg::ZERO };
        let xb = if term.has_upper() { mu[term.beta] - i_omega } else { linalg::ZERO };
        (xa, xb)
    }

    fn prefactor(&self, term: &SpectralTerm) -> C64 {
        match term.kind {
            CorrelationKind::Modes => self.kernel.pair_upsilon()[(term.alpha, term.beta)],
            _ => linalg::ONE,
        }
    }

    /// Backward pass for the inner integrals, then forward pass for the outer and
    /// nested ones, both over `[0, end]`.
    fn pass(&self, terms: &[SpectralTerm], omega: f64, end: f64) -> Result<Vec<PassIntegrals>> {
        if end <= 0.0 {
            return Ok(vec![PassIntegrals::default(); terms.len()]);
        }
        let kernel = self.kernel;
        let system = kernel.system();
        let dec = kernel.decomposition();
        let d = system.dimension();
        let dd = d * d;
        let nt = terms.len();
        let mu = dec.exponents().to_vec();
        let rates: Vec<(C64, C64)> = terms.iter().map(|t| self.rates(t, omega)).collect();
        let opts = periodic_options(system, &self.tolerances);
        let need_gamma = terms.iter().any(|t| t.kind == CorrelationKind::Modes);
        let need_cxi = terms.iter().any(|t| t.kind == CorrelationKind::ModeNoise);
        let need_xic = terms.iter().any(|t| t.kind == CorrelationKind::NoiseMode);

        // Inner integrals H_l(t) = int_t^end P_a exp(xa s) ds and H_u likewise.
        let mut y0 = vec![linalg::ZERO; dd + 2 * nt];
        linalg::write_slice(&dec.fundamental().at(end), &mut y0);
        let backward_rhs = |t: f64, y: &[C64], dy: &mut [C64]| {
            let f = linalg::from_slice(d, d, y);
            linalg::write_slice(&(system.drift(t) * &f), &mut dy[..dd]);
            let k = dec.frame_from_fundamental(&f, t);
            for (j, term) in terms.iter().enumerate() {
                let (xa, xb) = rates[j];
                dy[dd + 2 * j] = if term.has_lower() { -term.p_alpha.evaluate(t, &k) * (xa * t).exp() } else { linalg::ZERO };
                dy[dd + 2 * j + 1] = if term.has_upper() { -term.p_beta.evaluate(t, &k) * (xb * t).exp() } else { linalg::ZERO };
            }
        };
        let back = integrate(backward_rhs, end, 0.0, &y0, &opts, true)?;
        let inner = back.dense.expect("dense output requested");

        let nu_end = kernel.nu_end().clone();
        let pair_upsilon = kernel.pair_upsilon().clone();
        let sinv = dec.modes_inverse().clone();
        let g = system.noise_correlation().clone();
        let base = 2 * dd;
        let mut y0 = vec![linalg::ZERO; base + 4 * nt];
        linalg::write_slice(&linalg::identity(d), &mut y0);
        let forward_rhs = |t: f64, y: &[C64], dy: &mut [C64]| {
            let f = linalg::from_slice(d, d, y);
            linalg::write_slice(&(system.drift(t) * &f), &mut dy[..dd]);
            let finv = match linalg::inverse(&f) {
                Ok(m) => m,
                Err(_) => {
                    dy[dd..].fill(C64::new(f64::NAN, 0.0));
                    return;
                }
            };
            let m = &sinv * &finv;
            let b = system.noise_matrix(t);
            let bgbt = &b * &g * b.transpose();
            linalg::write_slice(&(&m * &bgbt * m.transpose()), &mut dy[dd..base]);
            let k = dec.frame_from_fundamental(&f, t);
            let gamma = if need_gamma {
                let nu = linalg::from_slice(d, d, &y[dd..base]);
                Some(crate::correlations::gamma_from_nu(&nu, &nu_end, &pair_upsilon, &mu, t))
            } else {
                None
            };
            let kinv = if need_cxi || need_xic { Some(dec.frame_inverse_from_fundamental_inverse(&finv, t)) } else { None };
            let chi_cxi = if need_cxi { Some(kinv.as_ref().unwrap() * &b * &g) } else { None };
            let chi_xic = if need_xic { Some(&g * b.transpose() * kinv.as_ref().unwrap().transpose()) } else { None };
            let mut h = vec![linalg::ZERO; 2 * nt];
            inner.eval_range(t, dd..dd + 2 * nt, &mut h);
            for (j, term) in terms.iter().enumerate() {
                let (xa, xb) = rates[j];
                let (a, bb) = (term.alpha, term.beta);
                let (g_low, g_up) = match term.kind {
                    CorrelationKind::Modes => {
                        let v = gamma.as_ref().unwrap()[(a, bb)];
                        (v, v)
                    }
                    CorrelationKind::ModeNoise => (chi_cxi.as_ref().unwrap()[(a, bb)], linalg::ZERO),
                    CorrelationKind::NoiseMode => (linalg::ZERO, chi_xic.as_ref().unwrap()[(a, bb)]),
                };
                let o = base + 4 * j;
                let lower = if term.has_lower() { term.p_beta.evaluate(t, &k) * g_low * (-xa * t).exp() } else { linalg::ZERO };
                let upper = if term.has_upper() { term.p_alpha.evaluate(t, &k) * g_up * (-xb * t).exp() } else { linalg::ZERO };
                dy[o] = lower;
                dy[o + 1] = upper;
                dy[o + 2] = lower * h[2 * j];
                dy[o + 3] = upper * h[2 * j + 1];
            }
        };
        let fwd = integrate(forward_rhs, 0.0, end, &y0, &opts, false)?;
        Ok((0..nt)
            .map(|j| {
                let o = base + 4 * j;
                PassIntegrals {
                    first_lower: back.y_end[dd + 2 * j],
                    first_upper: back.y_end[dd + 2 * j + 1],
                    second_lower: fwd.y_end[o],
                    second_upper: fwd.y_end[o + 1],
                    nested_lower: fwd.y_end[o + 2],
                    nested_upper: fwd.y_end[o + 3],
                }
            })
            .collect())
    }

    /// The four one-period integrals of each term at one frequency.
    pub fn one_period_integrals(&self, terms: &[SpectralTerm], omega: f64) -> Result<Vec<OnePeriodIntegrals>> {
        self.validate_terms(terms)?;
        Ok(self
            .pass(terms, omega, self.kernel.period())?
            .into_iter()
            .map(|p| OnePeriodIntegrals {
                below: p.first_lower * p.second_lower,
                above: p.first_upper * p.second_upper,
                diagonal_lower: p.nested_lower,
                diagonal_upper: p.nested_upper,
            })
            .collect())
    }

    /// Spectral density of every term at one frequency.
    pub fn evaluate(&self, terms: &[SpectralTerm], omega: f64, mode: DetectionMode) -> Result<Vec<C64>> {
        self.validate_terms(terms)?;
        let period = self.kernel.period();
        mode.validate(period)?;
        if !omega.is_finite() {
            return Err(FloquetError::InvalidArgument(format!("frequency must be finite, got {omega}")));
        }
        let full = self.pass(terms, omega, period)?;
        match mode {
            DetectionMode::Infinite => terms
                .iter()
                .zip(&full)
                .map(|(term, p)| {
                    let (xa, xb) = self.rates(term, omega);
                    let mut s = p.nested_lower + p.nested_upper;
                    if term.has_lower() {
                        s += upsilon(xa, period)? * p.first_lower * p.second_lower;
                    }
                    if term.has_upper() {
                        s += upsilon(xb, period)? * p.first_upper * p.second_upper;
                    }
                    Ok(self.prefactor(term) * s / period)
                })
                .collect(),
            DetectionMode::Finite { periods, remainder } => {
                let rest = self.pass(terms, omega, remainder)?;
                let kd = periods as f64;
                let td = kd * period + remainder;
                Ok(terms
                    .iter()
                    .zip(full.iter().zip(&rest))
                    .map(|(term, (p, r))| {
                        let (xa, xb) = self.rates(term, omega);
                        let mut s = (p.nested_lower + p.nested_upper) * kd + r.nested_lower + r.nested_upper;
                        if term.has_lower() {
                            s += pair_sum(xa, period, periods) * p.first_lower * p.second_lower;
                            s += geometric_sum(xa, period, periods, 1) * r.first_lower * p.second_lower;
                        }
                        if term.has_upper() {
                            s += pair_sum(xb, period, periods) * p.first_upper * p.second_upper;
                            s += geometric_sum(xb, period, periods, 1) * r.first_upper * p.second_upper;
                        }
                        self.prefactor(term) * s / td
                    })
                    .collect())
            }
        }
    }

    /// Spectral densities of every term over a frequency grid, `[omega][term]`.
    pub fn sweep(&self, terms: &[SpectralTerm], omegas: &[f64], mode: DetectionMode) -> Result<Vec<Vec<C64>>> {
        self.validate_terms(terms)?;
        self.execution.try_map(omegas.len(), |i| self.evaluate(terms, omegas[i], mode))
    }

    pub fn spectral_density(&self, request: &SpectralDensityRequest) -> Result<Vec<C64>> {
        let terms = [request.term()];
        Ok(self.sweep(&terms, &request.omegas, request.mode)?.into_iter().map(|v| v[0]).collect())
    }

    /// `S^{c xi}_{ab}(w; P_a, P_b)` and `S^{xi c}_{ba}(w; P_b, P_a)` over a frequency grid.
    pub fn cross_spectral_densities(
        &self,
        mode_index: usize,
        noise_index: usize,
        p_mode: WeightFunction,
        p_noise: WeightFunction,
        omegas: &[f64],
        detection: DetectionMode,
    ) -> Result<(Vec<C64>, Vec<C64>)> {
        let terms = [
            SpectralTerm::new(CorrelationKind::ModeNoise, mode_index, noise_index, p_mode.clone(), p_noise.clone()),
            SpectralTerm::new(CorrelationKind::NoiseMode, noise_index, mode_index, p_noise, p_mode),
        ];
        let rows = self.sweep(&terms, omegas, detection)?;
        Ok(rows.into_iter().map(|v| (v[0], v[1])).unzip())
    }

    /// Spectrum of the physical fluctuations,
    /// `S^X_{mn}(w) = sum_{ab} S_{ab}(w; K_{ma}, K_{nb})`.
    pub fn fluctuation_spectrum(&self, omega: f64, mode: DetectionMode) -> Result<CMatrix> {
        let d = self.kernel.dimension();
        let mut terms = Vec::with_capacity(d * d * d * d);
        for m in 0..d {
            for n in 0..d {
                for a in 0..d {
                    for b in 0..d {
                        terms.push(SpectralTerm::new(
                            CorrelationKind::Modes,
                            a,
                            b,
                            WeightFunction::frame_component(m, a),
                            WeightFunction::frame_component(n, b),
                        ));
                    }
                }
            }
        }
        let values = self.evaluate(&terms, omega, mode)?;
        Ok(CMatrix::from_fn(d, d, |m, n| values[(m * d + n) * d * d..(m * d + n + 1) * d * d].iter().sum()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlations::build_noise_kernel;
    use crate::floquet::{FloquetDecomposition, PeriodicLinearSystem};
    use crate::linalg::identity;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn ou_kernel(period: f64) -> NoiseKernel {
        let sys = PeriodicLinearSystem::constant(identity(1) * c(-1.0), identity(1) * c(2f64.sqrt()), identity(1), period).unwrap();
        let tol = IntegrationTolerances::default();
        let dec = FloquetDecomposition::compute(&sys, &tol).unwrap();
        build_noise_kernel(&sys, &dec, &tol).unwrap()
    }

    #[test]
    fn lorentzian_for_constant_system() {
        let k = ou_kernel(0.8);
        let engine = SpectralEngine::new(&k, IntegrationTolerances::default());
        let term = [SpectralTerm::new(CorrelationKind::Modes, 0, 0, WeightFunction::one(), WeightFunction::one())];
        for &w in &[0.0, 0.7, 3.0, 12.0] {
            let s = engine.evaluate(&term, w, DetectionMode::Infinite).unwrap()[0];
            let exact = 2.0 / (1.0 + w * w);
            assert!((s - c(exact)).norm() < 1e-9 * exact, "w = {w}: {s} vs {exact}");
        }
    }

    #[test]
    fn single_period_detection_is_diagonal_square() {
        let k = ou_kernel(1.0);
        let engine = SpectralEngine::new(&k, IntegrationTolerances::default());
        let term = [SpectralTerm::new(CorrelationKind::Modes, 0, 0, WeightFunction::one(), WeightFunction::one())];
        let w = 0.9;
        let s = engine.evaluate(&term, w, DetectionMode::Finite { periods: 1, remainder: 0.0 }).unwrap()[0];
        let i = engine.one_period_integrals(&term, w).unwrap()[0];
        let expected = k.pair_upsilon()[(0, 0)] * (i.diagonal_lower + i.diagonal_upper);
        assert!((s - expected).norm() < 1e-14 * expected.norm());
        // Stationary OU over a window of length 1: (1/T) int int exp(-|t-t'|) exp(i w (t-t')).
        let x = C64::new(1.0, -w);
        let exact = (2.0 * (C64::new(1.0, 0.0) / x).re) - 2.0 * ((C64::new(1.0, 0.0) - (-x).exp()) / (x * x)).re;
        assert!((s - c(exact)).norm() < 1e-9, "{s} vs {exact}");
    }

    #[test]
    fn epsilon_limits() {
        let x = C64::new(-0.3, 0.2);
        assert!(epsilon_factor(x, 1.0, 1).norm() < 1e-15);
        let near = C64::new(-1e-10, 0.0);
        let direct: C64 = (0..4).map(|j| (near * j as f64).exp()).sum();
        let e = epsilon_factor(near, 1.0, 4);
        assert!((e - (c(1.0) - direct / 4.0)).norm() < 1e-15);
        let direct: C64 = (1..5u32).map(|m| (x * m as f64).exp() * (5 - m) as f64).sum();
        assert!((pair_sum(x, 1.0, 5) - direct).norm() < 1e-14);
        let tail: C64 = (1..=5u32).map(|m| (x * m as f64).exp()).sum();
        assert!((geometric_sum(x, 1.0, 5, 1) - tail).norm() < 1e-14);
    }

    #[test]
    fn zero_weights_give_zero_integrals() {
        let k = ou_kernel(1.0);
        let engine = SpectralEngine::new(&k, IntegrationTolerances::default());
        let term = [SpectralTerm::new(CorrelationKind::Modes, 0, 0, WeightFunction::zero(), WeightFunction::zero())];
        let i = engine.one_period_integrals(&term, 1.3).unwrap()[0];
        assert_eq!(i.below + i.above + i.diagonal_lower + i.diagonal_upper, c(0.0));
    }

    #[test]
    fn out_of_range_terms_rejected() {
        let k = ou_kernel(1.0);
        let engine = SpectralEngine::new(&k, IntegrationTolerances::default());
        let term = [SpectralTerm::new(CorrelationKind::ModeNoise, 0, 1, WeightFunction::one(), WeightFunction::one())];
        assert!(engine.evaluate(&term, 0.0, DetectionMode::Infinite).is_err());
        let term = [SpectralTerm::new(CorrelationKind::Modes, 0, 0, WeightFunction::frame_component(1, 0), WeightFunction::one())];
        assert!(engine.evaluate(&term, 0.0, DetectionMode::Infinite).is_err());
        let term = [SpectralTerm::new(CorrelationKind::Modes, 0, 0, WeightFunction::one(), WeightFunction::one())];
        assert!(engine.evaluate(&term, 0.0, DetectionMode::Finite { periods: 0, remainder: 0.0 }).is_err());
        assert!(engine.evaluate(&term, 0.0, DetectionMode::Finite { periods: 2, remainder: 1.0 }).is_err());
    }
}
