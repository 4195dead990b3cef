//! Floquet decomposition of a linear T-periodic system `x' = L(t) x + B(t) xi(t)`.
//!
//! The principal fundamental matrix `F(t)` is integrated once over `[0, T]`
//! with dense output. The Floquet exponents and mode matrix come straight from
//! the eigensystem of the monodromy `F(T)`, and the periodic frame is
//! `K(t) = F(t) S exp(-D t)`; the logarithm of the monodromy is never formed.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{FloquetError, Result};
use crate::linalg::{self, CMatrix, C64};
use crate::ode::{integrate, DenseOutput, IntegrationTolerances, IntegratorOptions};

pub type MatrixFn = Arc<dyn Fn(f64) -> CMatrix + Send + Sync>;

/// Eigenvector matrices with a larger 2-norm condition number are rejected.
pub const MAX_MODE_CONDITION: f64 = 1e8;

/// Reduce `t` into `[0, period)`. Results within a few ulps of `period` map to 0
/// so that period boundaries always land on the same branch.
pub fn reduce_to_period(t: f64, period: f64) -> f64 {
    let r = t - (t / period).floor() * period;
    let guard = 4.0 * f64::EPSILON * period.max(t.abs());
    if !(r >= 0.0) || r >= period - guard {
        0.0
    } else {
        r
    }
}

/// Linearized fluctuation dynamics with T-periodic drift `L(t)`, noise matrix
/// `B(t)` and constant noise correlation `G`.
#[derive(Clone)]
pub struct PeriodicLinearSystem {
    dimension: usize,
    noise_count: usize,
    period: f64,
    drift: MatrixFn,
    noise_matrix: MatrixFn,
    noise_correlation: CMatrix,
}

impl fmt::Debug for PeriodicLinearSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PeriodicLinearSystem")
            .field("dimension", &self.dimension)
            .field("noise_count", &self.noise_count)
            .field("period", &self.period)
            .finish_non_exhaustive()
    }
}

impl PeriodicLinearSystem {
    pub fn new(period: f64, drift: MatrixFn, noise_matrix: MatrixFn, noise_correlation: CMatrix) -> Result<Self> {
        if !(period.is_finite() && period > 0.0) {
            return Err(FloquetError::InvalidSystem(format!("period must be positive and finite, got {period}")));
        }
        let l0 = drift(0.0);
        let b0 = noise_matrix(0.0);
        let dimension = l0.nrows();
        let noise_count = noise_correlation.nrows();
        if dimension == 0 || l0.ncols() != dimension {
            return Err(FloquetError::InvalidSystem(format!("drift must be square and non-empty, got {}x{}", l0.nrows(), l0.ncols())));
        }
        if noise_count == 0 || noise_correlation.ncols() != noise_count {
            return Err(FloquetError::InvalidSystem("noise correlation must be square and non-empty".into()));
        }
        if b0.nrows() != dimension || b0.ncols() != noise_count {
            return Err(FloquetError::InvalidSystem(format!(
                "noise matrix must be {dimension}x{noise_count}, got {}x{}",
                b0.nrows(),
                b0.ncols()
            )));
        }
        let finite = |m: &CMatrix| m.iter().all(|z| z.re.is_finite() && z.im.is_finite());
        if !finite(&l0) || !finite(&b0) || !finite(&noise_correlation) {
            return Err(FloquetError::InvalidSystem("non-finite coefficients".into()));
        }
        Ok(Self { dimension, noise_count, period, drift, noise_matrix, noise_correlation })
    }

    /// Time-independent system, viewed as periodic with the given period.
    pub fn constant(drift: CMatrix, noise_matrix: CMatrix, noise_correlation: CMatrix, period: f64) -> Result<Self> {
        Self::new(period, Arc::new(move |_| drift.clone()), Arc::new(move |_| noise_matrix.clone()), noise_correlation)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn noise_count(&self) -> usize {
        self.noise_count
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn drift(&self, t: f64) -> CMatrix {
        (self.drift)(t)
    }

    pub fn noise_matrix(&self, t: f64) -> CMatrix {
        (self.noise_matrix)(t)
    }

    pub fn noise_correlation(&self) -> &CMatrix {
        &self.noise_correlation
    }

    /// `B(t) G B(t)^T`.
    pub fn diffusion(&self, t: f64) -> CMatrix {
        let b = self.noise_matrix(t);
        &b * &self.noise_correlation * b.transpose()
    }

    /// Largest relative mismatch of `L` and `B` between `t` and `t + T` over
    /// `samples` uniformly spaced points of one period.
    pub fn periodicity_defect(&self, samples: usize) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 0..samples.max(1) {
            let t = self.period * k as f64 / samples.max(1) as f64;
            let dl = linalg::relative_difference(&self.drift(t + self.period), &self.drift(t));
            let db = linalg::relative_difference(&self.noise_matrix(t + self.period), &self.noise_matrix(t));
            worst = worst.max(dl).max(db);
        }
        worst
    }
}

/// Dense record of the principal fundamental matrix on `[0, span]`.
#[derive(Debug, Clone)]
pub struct FundamentalMatrix {
    dimension: usize,
    span: f64,
    dense: DenseOutput,
    end_value: CMatrix,
    steps: usize,
}

impl FundamentalMatrix {
    pub fn span(&self) -> f64 {
        self.span
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// `F(t)` for `t` in `[0, span]` (clamped).
    pub fn at(&self, t: f64) -> CMatrix {
        let t = t.clamp(0.0, self.span);
        if t == self.span {
            return self.end_value.clone();
        }
        let d = self.dimension;
        let mut buf = vec![linalg::ZERO; d * d];
        self.dense.eval(t, &mut buf);
        linalg::from_slice(d, d, &buf)
    }

    pub fn end_value(&self) -> &CMatrix {
        &self.end_value
    }
}

pub(crate) fn periodic_options(system: &PeriodicLinearSystem, tolerances: &IntegrationTolerances) -> IntegratorOptions {
    IntegratorOptions::new(*tolerances).with_max_step(system.period() / 8.0)
}

/// Integrate `F' = L(t) F`, `F(0) = I` over one period.
pub fn integrate_fundamental(system: &PeriodicLinearSystem, tolerances: &IntegrationTolerances) -> Result<FundamentalMatrix> {
    integrate_fundamental_span(system, system.period(), tolerances)
}

/// Integrate the fundamental matrix over `[0, span]`; spans longer than one
/// period are only used to validate `F(t + T) = F(t) F(T)`.
pub fn integrate_fundamental_span(system: &PeriodicLinearSystem, span: f64, tolerances: &IntegrationTolerances) -> Result<FundamentalMatrix> {
    tolerances.validate()?;
    if !(span.is_finite() && span > 0.0) {
        return Err(FloquetError::InvalidArgument(format!("span must be positive, got {span}")));
    }
    let d = system.dimension();
    let y0 = linalg::identity(d);
    let rhs = |t: f64, y: &[C64], dy: &mut [C64]| {
        let f = linalg::from_slice(d, d, y);
        linalg::write_slice(&(system.drift(t) * f), dy);
    };
    let sol = integrate(rhs, 0.0, span, y0.as_slice(), &periodic_options(system, tolerances), true)?;
    Ok(FundamentalMatrix {
        dimension: d,
        span,
        end_value: linalg::from_slice(d, d, &sol.y_end),
        dense: sol.dense.expect("dense output requested"),
        steps: sol.accepted_steps,
    })
}

/// Floquet exponents and mode matrices obtained from a monodromy matrix.
#[derive(Debug, Clone)]
pub struct ModalData {
    pub exponents: Vec<C64>,
    pub modes: CMatrix,
    pub modes_inverse: CMatrix,
    pub condition: f64,
}

fn ordering(a: &C64, b: &C64) -> std::cmp::Ordering {
    let scale = 1e-12 * a.re.abs().max(b.re.abs()).max(1.0);
    if (a.re - b.re).abs() <= scale {
        a.im.partial_cmp(&b.im).unwrap_or(std::cmp::Ordering::Equal)
    } else {
        b.re.partial_cmp(&a.re).unwrap_or(std::cmp::Ordering::Equal)
    }
}

/// Diagonalize the monodromy: `mu = ln(phi) / T` on the principal branch,
/// unit-norm eigenvector columns, sorted by descending `Re(mu)` then ascending `Im(mu)`.
pub fn decompose(monodromy: &CMatrix, period: f64) -> Result<ModalData> {
    if !(period.is_finite() && period > 0.0) {
        return Err(FloquetError::InvalidArgument(format!("period must be positive, got {period}")));
    }
    let (values, vectors) = linalg::eigen(monodromy)?;
    if let Some(z) = values.iter().find(|z| z.norm() == 0.0) {
        return Err(FloquetError::Singular(format!("zero Floquet multiplier {z}")));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    let exps: Vec<C64> = values.iter().map(|&phi| linalg::principal_log(phi) / period).collect();
    order.sort_by(|&i, &j| ordering(&exps[i], &exps[j]));
    let exponents: Vec<C64> = order.iter().map(|&i| exps[i]).collect();
    let modes = CMatrix::from_fn(vectors.nrows(), vectors.ncols(), |r, c| vectors[(r, order[c])]);
    let condition = linalg::condition_number(&modes);
    if !(condition <= MAX_MODE_CONDITION) {
        return Err(FloquetError::NonDiagonalizable { condition, threshold: MAX_MODE_CONDITION });
    }
    let modes_inverse = linalg::inverse(&modes)?;
    Ok(ModalData { exponents, modes, modes_inverse, condition })
}

/// Stability classification from the Floquet exponents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stability {
    pub max_growth_rate: f64,
    pub stable: bool,
}

#[derive(Debug, Clone)]
pub struct FloquetDecomposition {
    period: f64,
    monodromy: CMatrix,
    exponents: Vec<C64>,
    modes: CMatrix,
    modes_inverse: CMatrix,
    condition: f64,
    fundamental: Arc<FundamentalMatrix>,
}

impl FloquetDecomposition {
    pub fn compute(system: &PeriodicLinearSystem, tolerances: &IntegrationTolerances) -> Result<Self> {
        let fundamental = integrate_fundamental(system, tolerances)?;
        Self::from_fundamental(fundamental, system.period())
    }

    pub fn from_fundamental(fundamental: FundamentalMatrix, period: f64) -> Result<Self> {
        let monodromy = fundamental.end_value().clone();
        let modal = decompose(&monodromy, period)?;
        Ok(Self {
            period,
            monodromy,
            exponents: modal.exponents,
            modes: modal.modes,
            modes_inverse: modal.modes_inverse,
            condition: modal.condition,
            fundamental: Arc::new(fundamental),
        })
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn dimension(&self) -> usize {
        self.exponents.len()
    }

    pub fn monodromy(&self) -> &CMatrix {
        &self.monodromy
    }

    pub fn exponents(&self) -> &[C64] {
        &self.exponents
    }

    pub fn multipliers(&self) -> Vec<C64> {
        self.exponents.iter().map(|mu| (mu * self.period).exp()).collect()
    }

    pub fn modes(&self) -> &CMatrix {
        &self.modes
    }

    pub fn modes_inverse(&self) -> &CMatrix {
        &self.modes_inverse
    }

    pub fn mode_condition(&self) -> f64 {
        self.condition
    }

    pub fn fundamental(&self) -> &FundamentalMatrix {
        &self.fundamental
    }

    pub fn max_growth_rate(&self) -> f64 {
        self.exponents.iter().map(|m| m.re).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Periodic frame `K(t)` and its inverse, for any `t` (reduced mod T).
    pub fn frame(&self, t: f64) -> Result<(CMatrix, CMatrix)> {
        let tau = reduce_to_period(t, self.period);
        let f = self.fundamental.at(tau);
        let finv = linalg::inverse(&f)
            .map_err(|_| FloquetError::Singular(format!("fundamental matrix singular at t = {tau}")))?;
        Ok((self.frame_from_fundamental(&f, tau), self.frame_inverse_from_fundamental_inverse(&finv, tau)))
    }

    /// `K(t) = F(t) S exp(-D t)` for a given `F(t)`.
    pub fn frame_from_fundamental(&self, f: &CMatrix, t: f64) -> CMatrix {
        let mut k = f * &self.modes;
        for (a, mut col) in k.column_iter_mut().enumerate() {
            col *= (-self.exponents[a] * t).exp();
        }
        k
    }

    /// `K^{-1}(t) = exp(D t) S^{-1} F^{-1}(t)` for a given `F^{-1}(t)`.
    pub fn frame_inverse_from_fundamental_inverse(&self, finv: &CMatrix, t: f64) -> CMatrix {
        let mut k = &self.modes_inverse * finv;
        for (a, mut row) in k.row_iter_mut().enumerate() {
            row *= (self.exponents[a] * t).exp();
        }
        k
    }

    /// Same decomposition with `mu_alpha` moved by `branches * 2 pi i / T`.
    /// Every downstream correlation and spectrum is invariant under this shift.
    pub fn with_branch_shift(&self, alpha: usize, branches: i32) -> Self {
        let mut out = self.clone();
        out.exponents[alpha] += C64::new(0.0, 2.0 * PI * branches as f64 / self.period);
        out
    }

    pub fn stability(&self) -> Stability {
        stability_check(self)
    }
}

pub fn stability_check(decomposition: &FloquetDecomposition) -> Stability {
    let max_growth_rate = decomposition.max_growth_rate();
    Stability { max_growth_rate, stable: max_growth_rate < 0.0 }
}

/// Stability from a bare list of exponents.
pub fn stability_of(exponents: &[C64]) -> Stability {
    let max_growth_rate = exponents.iter().map(|m| m.re).fold(f64::NEG_INFINITY, f64::max);
    Stability { max_growth_rate, stable: max_growth_rate < 0.0 }
}
