//! Degenerate parametric oscillator beyond the rotating-wave approximation:
//! system construction, output spectral covariance, closed forms and sweeps.
//!
//! Time is in units of the damping rate; `Q` is the quality factor and `sigma`
//! the normalized modulation amplitude. The drift has period `T = pi / Q`.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::correlations::{build_noise_kernel, NoiseKernel};
use crate::error::{FloquetError, Result};
use crate::exec::Execution;
use crate::floquet::{integrate_fundamental, FloquetDecomposition, PeriodicLinearSystem};
use crate::linalg::{self, CMatrix, C64};
use crate::ode::IntegrationTolerances;
use crate::spectra::{CorrelationKind, DetectionMode, SpectralEngine, SpectralTerm, WeightFunction};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpoParameters {
    pub q: f64,
    pub sigma: f64,
}

impl DpoParameters {
    pub fn new(q: f64, sigma: f64) -> Result<Self> {
        if !(q.is_finite() && q > 0.0) {
            return Err(FloquetError::InvalidArgument(format!("Q must be positive and finite, got {q}")));
        }
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(FloquetError::InvalidArgument(format!("sigma must be non-negative and finite, got {sigma}")));
        }
        Ok(Self { q, sigma })
    }

    pub fn period(&self) -> f64 {
        PI / self.q
    }

    /// Modulation depth `epsilon = 4 sigma / Q`.
    pub fn epsilon(&self) -> f64 {
        4.0 * self.sigma / self.q
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DpoMode {
    #[default]
    Full,
    Rwa,
}

impl std::str::FromStr for DpoMode {
    type Err = FloquetError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(DpoMode::Full),
            "rwa" => Ok(DpoMode::Rwa),
            other => Err(FloquetError::InvalidArgument(format!("mode must be `full` or `rwa`, got `{other}`"))),
        }
    }
}

/// Quadrature-basis drift `L(t)`.
pub fn drift_matrix(params: &DpoParameters, mode: DpoMode, t: f64) -> CMatrix {
    let s = params.sigma;
    let (mut a, mut b, mut c, mut d) = (-1.0 + s, 0.0, 0.0, -1.0 - s);
    if mode == DpoMode::Full {
        let (sn, cs) = (params.q * t).sin_cos();
        let c4 = (4.0 * params.q * t).cos();
        a -= s * c4;
        b += s * 8.0 * cs * sn * sn * sn;
        c -= s * 8.0 * cs * cs * cs * sn;
        d += s * c4;
    }
    CMatrix::from_row_slice(2, 2, &[C64::new(a, 0.0), C64::new(b, 0.0), C64::new(c, 0.0), C64::new(d, 0.0)])
}

/// Input-noise correlation matrix in the quadrature basis.
pub fn noise_correlation() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[linalg::ONE, C64::new(0.0, 1.0), C64::new(0.0, -1.0), linalg::ONE])
}

pub fn build_dpo_system(params: &DpoParameters, mode: DpoMode) -> Result<PeriodicLinearSystem> {
    let p = *params;
    let b = linalg::identity(2) * C64::new(2f64.sqrt(), 0.0);
    PeriodicLinearSystem::new(p.period(), Arc::new(move |t| drift_matrix(&p, mode, t)), Arc::new(move |_| b.clone()), noise_correlation())
}

/// RWA eigenvalues of the spectral covariance, `(V1, V2)`.
pub fn rwa_closed_form(sigma: f64, omega: f64) -> Result<(f64, f64)> {
    if !(sigma >= 0.0) {
        return Err(FloquetError::InvalidArgument(format!("sigma must be non-negative, got {sigma}")));
    }
    if sigma > 1.0 {
        return Err(FloquetError::BeyondRwaThreshold { sigma });
    }
    let w2 = omega * omega;
    let lo = (1.0 - sigma) * (1.0 - sigma) + w2;
    let v1 = if lo == 0.0 { f64::INFINITY } else { 1.0 + 4.0 * sigma / lo };
    let v2 = 1.0 - 4.0 * sigma / ((1.0 + sigma) * (1.0 + sigma) + w2);
    Ok((v1, v2))
}

/// One frequency of the spectral covariance table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralCovariancePoint {
    pub omega: f64,
    /// Row-major real part of `V`.
    pub v: [[f64; 2]; 2],
    pub v1: f64,
    pub v2: f64,
    pub det: f64,
    /// `-10 log10 V2`.
    pub v2_db: f64,
    /// Largest imaginary part left in `V` after symmetrization.
    pub imaginary_residue: f64,
}

impl SpectralCovariancePoint {
    /// Build from the output spectra at `omega` and `-omega`.
    pub fn from_output_spectra(omega: f64, a_plus: &CMatrix, a_minus: &CMatrix) -> Self {
        let v = (a_plus + a_minus + a_plus.transpose() + a_minus.transpose()) * C64::new(0.25, 0.0);
        let imaginary_residue = v.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        let (p, r, s) = (v[(0, 0)].re, 0.5 * (v[(0, 1)].re + v[(1, 0)].re), v[(1, 1)].re);
        let mean = 0.5 * (p + s);
        let radius = (0.25 * (p - s) * (p - s) + r * r).sqrt();
        let (v1, v2) = (mean + radius, mean - radius);
        Self { omega, v: [[p, r], [r, s]], v1, v2, det: p * s - r * r, v2_db: -10.0 * v2.log10(), imaginary_residue }
    }
}

/// Full Floquet pipeline for one `(Q, sigma, mode)` point.
#[derive(Debug, Clone)]
pub struct DpoModel {
    params: DpoParameters,
    mode: DpoMode,
    tolerances: IntegrationTolerances,
    kernel: NoiseKernel,
}

impl DpoModel {
    pub fn new(params: DpoParameters, mode: DpoMode, tolerances: IntegrationTolerances) -> Result<Self> {
        let system = build_dpo_system(&params, mode)?;
        let decomposition = FloquetDecomposition::compute(&system, &tolerances)?;
        if !decomposition.stability().stable {
            let sigma_ins = find_instability(params.q, mode, &tolerances).unwrap_or(f64::NAN);
            return Err(FloquetError::UnstableParameters { sigma: params.sigma, sigma_ins });
        }
        let kernel = build_noise_kernel(&system, &decomposition, &tolerances)?;
        Ok(Self { params, mode, tolerances, kernel })
    }

    pub fn params(&self) -> &DpoParameters {
        &self.params
    }

    pub fn mode(&self) -> DpoMode {
        self.mode
    }

    pub fn kernel(&self) -> &NoiseKernel {
        &self.kernel
    }

    pub fn decomposition(&self) -> &FloquetDecomposition {
        self.kernel.decomposition()
    }

    pub fn engine(&self) -> SpectralEngine<'_> {
        SpectralEngine::new(&self.kernel, self.tolerances).with_execution(Execution::Sequential)
    }

    /// Terms of the output spectrum in the order consumed by [`DpoModel::output_spectrum`].
    fn output_terms() -> Vec<SpectralTerm> {
        let mut terms = Vec::with_capacity(32);
        for m in 0..2 {
            for n in 0..2 {
                for a in 0..2 {
                    for b in 0..2 {
                        terms.push(SpectralTerm::new(
                            CorrelationKind::Modes,
                            a,
                            b,
                            WeightFunction::frame_component(m, a),
                            WeightFunction::frame_component(n, b),
                        ));
                    }
                    terms.push(SpectralTerm::new(
                        CorrelationKind::ModeNoise,
                        a,
                        n,
                        WeightFunction::frame_component(m, a),
                        WeightFunction::one(),
                    ));
                    terms.push(SpectralTerm::new(
                        CorrelationKind::NoiseMode,
                        m,
                        a,
                        WeightFunction::one(),
                        WeightFunction::frame_component(n, a),
                    ));
                }
            }
        }
        terms
    }

    /// Output-quadrature spectrum `A(omega)`, built from
    /// `x_out = sqrt(2) x - x_in`.
    pub fn output_spectrum(&self, omega: f64, detection: DetectionMode) -> Result<CMatrix> {
        let values = self.engine().evaluate(&Self::output_terms(), omega, detection)?;
        let g = noise_correlation();
        let r2 = 2f64.sqrt();
        let mut a = g.clone();
        let mut it = values.into_iter();
        for m in 0..2 {
            for n in 0..2 {
                for _ in 0..2 {
                    for _ in 0..2 {
                        a[(m, n)] += 2.0 * it.next().unwrap();
                    }
                    a[(m, n)] -= r2 * it.next().unwrap();
                    a[(m, n)] -= r2 * it.next().unwrap();
                }
            }
        }
        Ok(a)
    }

    pub fn spectral_covariance_at(&self, omega: f64, detection: DetectionMode) -> Result<SpectralCovariancePoint> {
        let a_plus = self.output_spectrum(omega, detection)?;
        let a_minus = if omega == 0.0 { a_plus.clone() } else { self.output_spectrum(-omega, detection)? };
        Ok(SpectralCovariancePoint::from_output_spectra(omega, &a_plus, &a_minus))
    }

    /// Spectral covariance over a frequency grid, in grid order.
    pub fn spectral_covariance(&self, omegas: &[f64], detection: DetectionMode, execution: Execution) -> Result<Vec<SpectralCovariancePoint>> {
        execution.try_map(omegas.len(), |i| self.spectral_covariance_at(omegas[i], detection))
    }
}

/// Convenience wrapper: build the model and tabulate `V(omega)`.
pub fn spectral_covariance(
    params: &DpoParameters,
    mode: DpoMode,
    omegas: &[f64],
    detection: DetectionMode,
    tolerances: &IntegrationTolerances,
    execution: Execution,
) -> Result<Vec<SpectralCovariancePoint>> {
    DpoModel::new(*params, mode, *tolerances)?.spectral_covariance(omegas, detection, execution)
}

/// `max Re mu` from the monodromy eigenvalues alone (no eigenvector conditioning involved).
pub fn max_growth_rate(params: &DpoParameters, mode: DpoMode, tolerances: &IntegrationTolerances) -> Result<f64> {
    let system = build_dpo_system(params, mode)?;
    let f = integrate_fundamental(&system, tolerances)?;
    let (values, _) = linalg::eigen(f.end_value())?;
    Ok(values.iter().map(|phi| phi.norm().ln() / params.period()).fold(f64::NEG_INFINITY, f64::max))
}

/// Bisection of `max Re mu(sigma) = 0` inside `[lower, upper]` to `|d sigma| < 1e-6`.
pub fn find_instability_in(q: f64, mode: DpoMode, lower: f64, upper: f64, tolerances: &IntegrationTolerances) -> Result<f64> {
    let growth = |s: f64| max_growth_rate(&DpoParameters::new(q, s)?, mode, tolerances);
    let (mut lo, mut hi) = (lower, upper);
    if !(growth(lo)? < 0.0 && growth(hi)? >= 0.0) {
        return Err(FloquetError::NoSignChange { lower, upper });
    }
    while hi - lo > 1e-7 {
        let mid = 0.5 * (lo + hi);
        if growth(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Instability threshold, expanding the bracket `[0, 1]` upwards until it contains a sign change.
pub fn find_instability(q: f64, mode: DpoMode, tolerances: &IntegrationTolerances) -> Result<f64> {
    let mut upper = 1.0;
    for _ in 0..40 {
        if max_growth_rate(&DpoParameters::new(q, upper)?, mode, tolerances)? >= 0.0 {
            return find_instability_in(q, mode, 0.0, upper, tolerances);
        }
        upper *= 1.5;
    }
    Err(FloquetError::NoSignChange { lower: 0.0, upper })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimalSqueezing {
    pub q: f64,
    pub sigma_ins: f64,
    pub sigma_opt: f64,
    /// `V2(0)` at the optimum.
    pub v2_opt: f64,
    /// `-10 log10 V2(0)` at the optimum.
    pub v2_opt_db: f64,
}

/// `V2(omega = 0)` for the infinite detection time.
pub fn zero_frequency_squeezing(params: &DpoParameters, mode: DpoMode, tolerances: &IntegrationTolerances) -> Result<f64> {
    Ok(DpoModel::new(*params, mode, *tolerances)?.spectral_covariance_at(0.0, DetectionMode::Infinite)?.v2)
}

/// Golden-section minimization of `V2(0; sigma)` over `(0, 0.999 sigma_ins)` to `|d sigma| < 1e-4`.
pub fn find_optimal_squeezing(q: f64, mode: DpoMode, tolerances: &IntegrationTolerances) -> Result<OptimalSqueezing> {
    let sigma_ins = find_instability(q, mode, tolerances)?;
    let v2 = |s: f64| zero_frequency_squeezing(&DpoParameters::new(q, s)?, mode, tolerances);
    let invphi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0, 0.999 * sigma_ins);
    let mut c = b - invphi * (b - a);
    let mut d = a + invphi * (b - a);
    let (mut fc, mut fd) = (v2(c)?, v2(d)?);
    while b - a > 1e-4 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = v2(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = v2(d)?;
        }
    }
    let (sigma_opt, v2_opt) = if fc < fd { (c, fc) } else { (d, fd) };
    if !(v2_opt.is_finite() && v2_opt > 0.0) {
        return Err(FloquetError::Optimization(format!("V2 at the optimum is {v2_opt}")));
    }
    Ok(OptimalSqueezing { q, sigma_ins, sigma_opt, v2_opt, v2_opt_db: -10.0 * v2_opt.log10() })
}

/// Uniform grid of `count` points on `[min, max]`.
pub fn uniform_grid(min: f64, max: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![min],
        _ => (0..count).map(|i| min + (max - min) * i as f64 / (count - 1) as f64).collect(),
    }
}
