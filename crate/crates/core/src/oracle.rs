//! Brute-force references for validation.
//!
//! Time-domain references integrate `L(t)` directly with fixed-step RK4:
//! the Lyapunov equation `X' = L X + X L^T + B G B^T` from zero covariance up
//! to the periodic steady state, and the propagator `Phi(t, t')` for two-time
//! correlations. Spectral references integrate the defining double integral
//! over `[0, T_d]^2`, either from that propagation (physical correlators) or
//! from pointwise mode correlations (chessboard cells with the diagonal cells
//! split along `t = t'`).

use crate::correlations::NoiseKernel;
use crate::error::{FloquetError, Result};
use crate::exec::Execution;
use crate::floquet::{reduce_to_period, PeriodicLinearSystem};
use crate::linalg::{self, CMatrix, C64};
use crate::ode::rk4_fixed;
use crate::quadrature::gauss_legendre;
use crate::spectra::{CorrelationKind, WeightFunction};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    /// RK4 steps per period.
    pub steps_per_period: usize,
    /// Periods integrated from zero covariance; chosen automatically when `None`.
    pub settle_periods: Option<usize>,
    /// Required bound on the oracle's own `|M^n|` after settling.
    pub settle_threshold: f64,
    pub max_settle_periods: usize,
    /// Initial Gauss-Legendre order per cell and axis.
    pub quadrature_order: usize,
    pub max_quadrature_order: usize,
    /// Relative error target of the spectral quadratures.
    pub quadrature_tolerance: f64,
    /// Outer cells per period for the physical spectral reference.
    pub cells_per_period: usize,
    pub execution: Execution,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            steps_per_period: 512,
            settle_periods: None,
            settle_threshold: 1e-10,
            max_settle_periods: 100_000,
            quadrature_order: 12,
            max_quadrature_order: 96,
            quadrature_tolerance: 1e-8,
            cells_per_period: 4,
            execution: Execution::default(),
        }
    }
}

/// A quadrature value with the difference to the next coarser order as error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureEstimate<T> {
    pub value: T,
    pub error_estimate: f64,
    pub order: usize,
}

/// Spectra of the physical fluctuations and their noise cross terms over `[0, T_d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalSpectra {
    /// `(1/T_d) int int <x(t) x^T(t')> exp(i w (t - t'))`.
    pub fluctuations: CMatrix,
    /// The same for `<x(t) xi^T(t')>`.
    pub state_noise: CMatrix,
    /// The same for `<xi(t) x^T(t')>`.
    pub noise_state: CMatrix,
    pub error_estimate: f64,
    pub order: usize,
}

/// Periodic steady state of the covariance, computed independently of any Floquet data.
#[derive(Debug, Clone)]
pub struct Oracle {
    system: PeriodicLinearSystem,
    config: OracleConfig,
    settle_periods: usize,
    steady_start: CMatrix,
}

fn frobenius(m: &CMatrix) -> f64 {
    m.norm()
}

impl Oracle {
    pub fn new(system: &PeriodicLinearSystem, config: OracleConfig) -> Result<Self> {
        if config.steps_per_period == 0 || config.quadrature_order == 0 || config.cells_per_period == 0 {
            return Err(FloquetError::InvalidArgument("oracle step and order counts must be positive".into()));
        }
        let d = system.dimension();
        let period = system.period();
        let mut oracle = Self { system: system.clone(), config, settle_periods: 0, steady_start: CMatrix::zeros(d, d) };
        let monodromy = oracle.propagator(0.0, period);
        let settle = match config.settle_periods {
            Some(n) => {
                let norm = frobenius(&matrix_power(&monodromy, n));
                if !(norm < config.settle_threshold) {
                    return Err(FloquetError::NotSettled(format!(
                        "|M^{n}| = {norm:e} is not below {:e}",
                        config.settle_threshold
                    )));
                }
                n
            }
            None => {
                let mut power = monodromy.clone();
                let mut n = 1;
                while !(frobenius(&power) < config.settle_threshold) {
                    if n >= config.max_settle_periods || !frobenius(&power).is_finite() {
                        return Err(FloquetError::NotSettled(format!(
                            "|M^n| did not fall below {:e} within {n} periods",
                            config.settle_threshold
                        )));
                    }
                    power = &power * &monodromy;
                    n += 1;
                }
                n
            }
        };
        let mut x = vec![linalg::ZERO; d * d];
        for k in 0..settle {
            let t0 = k as f64 * period;
            x = oracle.lyapunov(t0, t0 + period, &x, config.steps_per_period);
        }
        oracle.settle_periods = settle;
        oracle.steady_start = linalg::from_slice(d, d, &x);
        Ok(oracle)
    }

    pub fn settle_periods(&self) -> usize {
        self.settle_periods
    }

    fn step_count(&self, span: f64) -> usize {
        ((span.abs() / self.system.period() * self.config.steps_per_period as f64).ceil() as usize).max(1)
    }

    fn lyapunov(&self, t0: f64, t1: f64, x0: &[C64], steps: usize) -> Vec<C64> {
        let d = self.system.dimension();
        let sys = &self.system;
        rk4_fixed(
            |t, y, dy| {
                let x = linalg::from_slice(d, d, y);
                let l = sys.drift(t);
                let rhs = &l * &x + &x * l.transpose() + sys.diffusion(t);
                linalg::write_slice(&rhs, dy);
            },
            t0,
            t1,
            x0,
            steps,
        )
    }

    /// `Phi(t1, t0)` from `dPhi/dt = L(t) Phi`, `Phi(t0, t0) = I`.
    pub fn propagator(&self, t0: f64, t1: f64) -> CMatrix {
        let d = self.system.dimension();
        if t1 == t0 {
            return linalg::identity(d);
        }
        let sys = &self.system;
        let y = rk4_fixed(
            |t, y, dy| linalg::write_slice(&(sys.drift(t) * linalg::from_slice(d, d, y)), dy),
            t0,
            t1,
            linalg::identity(d).as_slice(),
            self.step_count(t1 - t0),
        );
        linalg::from_slice(d, d, &y)
    }

    /// Steady-state `<x(t) x^T(t)>`.
    pub fn equal_time_covariance(&self, t: f64) -> Result<CMatrix> {
        check_time(t)?;
        let tau = reduce_to_period(t, self.system.period());
        if tau == 0.0 {
            return Ok(self.steady_start.clone());
        }
        let d = self.system.dimension();
        Ok(linalg::from_slice(d, d, &self.lyapunov(0.0, tau, self.steady_start.as_slice(), self.step_count(tau))))
    }

    /// Steady-state `<x(t) x^T(t')>`.
    pub fn two_time(&self, t: f64, t_prime: f64) -> Result<CMatrix> {
        check_time(t)?;
        check_time(t_prime)?;
        if t_prime <= t {
            Ok(self.propagator(t_prime, t) * self.equal_time_covariance(t_prime)?)
        } else {
            Ok(self.equal_time_covariance(t)? * self.propagator(t, t_prime).transpose())
        }
    }

    /// Physical spectra over `[0, T_d]`. The outer variable runs over Gauss-Legendre
    /// cells; for each node an RK4 pass carries `Phi(s, tau)` to `T_d` and accumulates
    /// `int Phi exp(+-i w s) ds`.
    pub fn physical_spectra(&self, omega: f64, detection_time: f64) -> Result<PhysicalSpectra> {
        if !(detection_time.is_finite() && detection_time > 0.0 && omega.is_finite()) {
            return Err(FloquetError::InvalidArgument("detection time must be positive and frequency finite".into()));
        }
        let period = self.system.period();
        let cells = ((detection_time / period) * self.config.cells_per_period as f64).ceil().max(1.0) as usize;
        let width = detection_time / cells as f64;
        let mut order = self.config.quadrature_order;
        let mut previous = self.physical_at_order(omega, detection_time, cells, width, order)?;
        loop {
            let next_order = (order * 3).div_ceil(2);
            let current = self.physical_at_order(omega, detection_time, cells, width, next_order)?;
            let scale = frobenius(&current.0).max(frobenius(&current.1)).max(frobenius(&current.2)).max(1e-300);
            let err = [frobenius(&(&current.0 - &previous.0)), frobenius(&(&current.1 - &previous.1)), frobenius(&(&current.2 - &previous.2))]
                .into_iter()
                .fold(0.0, f64::max)
                / scale;
            order = next_order;
            if err < self.config.quadrature_tolerance {
                return Ok(PhysicalSpectra {
                    fluctuations: current.0,
                    state_noise: current.1,
                    noise_state: current.2,
                    error_estimate: err,
                    order,
                });
            }
            if order > self.config.max_quadrature_order {
                return Err(FloquetError::QuadratureNonConvergence { estimate: err, requested: self.config.quadrature_tolerance });
            }
            previous = current;
        }
    }

    fn physical_at_order(&self, omega: f64, td: f64, cells: usize, width: f64, order: usize) -> Result<(CMatrix, CMatrix, CMatrix)> {
        let (x, w) = gauss_legendre(order);
        let d = self.system.dimension();
        let n_nodes = cells * order;
        let sys = &self.system;
        let g = sys.noise_correlation();
        let contributions = self.config.execution.try_map(n_nodes, |idx| -> Result<[CMatrix; 3]> {
            let (cell, k) = (idx / order, idx % order);
            let tau = (cell as f64 + 0.5 * (1.0 + x[k])) * width;
            let weight = 0.5 * width * w[k];
            let mut y0 = vec![linalg::ZERO; 3 * d * d];
            linalg::write_slice(&linalg::identity(d), &mut y0);
            let y = rk4_fixed(
                |s, y, dy| {
                    let phi = linalg::from_slice(d, d, &y[..d * d]);
                    linalg::write_slice(&(sys.drift(s) * &phi), &mut dy[..d * d]);
                    let (plus, minus) = (C64::new(0.0, omega * s).exp(), C64::new(0.0, -omega * s).exp());
                    for i in 0..d * d {
                        dy[d * d + i] = y[i] * plus;
                        dy[2 * d * d + i] = y[i] * minus;
                    }
                },
                tau,
                td,
                &y0,
                self.step_count(td - tau),
            );
            let acc_plus = linalg::from_slice(d, d, &y[d * d..2 * d * d]);
            let acc_minus = linalg::from_slice(d, d, &y[2 * d * d..]);
            let cov = self.equal_time_covariance(tau)?;
            let (ep, em) = (C64::new(0.0, omega * tau).exp(), C64::new(0.0, -omega * tau).exp());
            let b = sys.noise_matrix(tau);
            let wt = C64::new(weight / td, 0.0);
            let fluct = (&acc_plus * &cov * em + &cov * acc_minus.transpose() * ep) * wt;
            let state_noise = &acc_plus * &b * g * (em * wt);
            let noise_state = g * b.transpose() * acc_minus.transpose() * (ep * wt);
            Ok([fluct, state_noise, noise_state])
        })?;
        let mut out = (CMatrix::zeros(d, d), CMatrix::zeros(d, sys.noise_count()), CMatrix::zeros(sys.noise_count(), d));
        for [a, b, c] in contributions {
            out.0 += a;
            out.1 += b;
            out.2 += c;
        }
        Ok(out)
    }
}

fn matrix_power(m: &CMatrix, n: usize) -> CMatrix {
    let mut out = linalg::identity(m.nrows());
    for _ in 0..n {
        out = &out * m;
    }
    out
}

fn check_time(t: f64) -> Result<()> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(FloquetError::InvalidArgument(format!("time must be finite and non-negative, got {t}")));
    }
    Ok(())
}

pub fn oracle_equal_time_covariance(system: &PeriodicLinearSystem, t: f64, config: &OracleConfig) -> Result<CMatrix> {
    Oracle::new(system, *config)?.equal_time_covariance(t)
}

pub fn oracle_two_time(system: &PeriodicLinearSystem, t: f64, t_prime: f64, config: &OracleConfig) -> Result<CMatrix> {
    Oracle::new(system, *config)?.two_time(t, t_prime)
}

/// Direct quadrature of `(1/T_d) int int P_a(t) P_b(t') <.>_{ab}(t, t') exp(i w (t - t'))`
/// over `[0, T_d]^2`, with the correlator evaluated pointwise from its closed form.
/// Cells follow the period grid; cells on the diagonal are split into two
/// triangles, each mapped to the unit square with a Duffy transform.
#[allow(clippy::too_many_arguments)]
pub fn oracle_spectral_density(
    kernel: &NoiseKernel,
    kind: CorrelationKind,
    alpha: usize,
    beta: usize,
    p_alpha: &WeightFunction,
    p_beta: &WeightFunction,
    omega: f64,
    detection_time: f64,
    config: &OracleConfig,
) -> Result<QuadratureEstimate<C64>> {
    if !(detection_time.is_finite() && detection_time > 0.0 && omega.is_finite()) {
        return Err(FloquetError::InvalidArgument("detection time must be positive and frequency finite".into()));
    }
    let period = kernel.period();
    let mut edges = vec![0.0];
    let mut k = 1;
    while (k as f64) * period < detection_time * (1.0 - 1e-14) {
        edges.push(k as f64 * period);
        k += 1;
    }
    edges.push(detection_time);

    let integrand = |t: f64, tp: f64| -> Result<C64> {
        let corr = match kind {
            CorrelationKind::Modes => kernel.elementary_correlation(t, tp)?,
            CorrelationKind::ModeNoise => kernel.cross_correlation_c_xi(t, tp)?,
            CorrelationKind::NoiseMode => kernel.cross_correlation_xi_c(t, tp)?,
        };
        let (kt, _) = kernel.decomposition().frame(t)?;
        let (ktp, _) = kernel.decomposition().frame(tp)?;
        Ok(p_alpha.evaluate(reduce_to_period(t, period), &kt)
            * p_beta.evaluate(reduce_to_period(tp, period), &ktp)
            * corr[(alpha, beta)]
            * C64::new(0.0, omega * (t - tp)).exp())
    };

    let at_order = |n: usize| -> Result<C64> {
        let (x, w) = gauss_legendre(n);
        let u: Vec<f64> = x.iter().map(|xi| 0.5 * (1.0 + xi)).collect();
        let wu: Vec<f64> = w.iter().map(|wi| 0.5 * wi).collect();
        let cells: Vec<(usize, usize)> = (0..edges.len() - 1).flat_map(|i| (0..edges.len() - 1).map(move |j| (i, j))).collect();
        let parts = config.execution.try_map(cells.len(), |c| -> Result<C64> {
            let (i, j) = cells[c];
            let (a, la) = (edges[i], edges[i + 1] - edges[i]);
            let (b, lb) = (edges[j], edges[j + 1] - edges[j]);
            let mut acc = linalg::ZERO;
            if i != j {
                for (p, wp) in u.iter().zip(&wu) {
                    for (q, wq) in u.iter().zip(&wu) {
                        acc += integrand(a + la * p, b + lb * q)? * (wp * wq * la * lb);
                    }
                }
            } else {
                // Lower triangle t' <= t, then upper triangle t < t'.
                for (p, wp) in u.iter().zip(&wu) {
                    for (q, wq) in u.iter().zip(&wu) {
                        let jac = wp * wq * la * la * p;
                        let (s, r) = (a + la * p, a + la * p * q);
                        acc += integrand(s, r)? * jac;
                        acc += integrand(r, s)? * jac;
                    }
                }
            }
            Ok(acc)
        })?;
        let total: C64 = parts.into_iter().sum();
        Ok(total / detection_time)
    };

    let mut order = config.quadrature_order;
    let mut previous = at_order(order)?;
    loop {
        let next = (order * 3).div_ceil(2);
        let current = at_order(next)?;
        let err = (current - previous).norm() / current.norm().max(1e-300);
        order = next;
        if err < config.quadrature_tolerance {
            return Ok(QuadratureEstimate { value: current, error_estimate: err, order });
        }
        if order > config.max_quadrature_order {
            return Err(FloquetError::QuadratureNonConvergence { estimate: err, requested: config.quadrature_tolerance });
        }
        previous = current;
    }
}
