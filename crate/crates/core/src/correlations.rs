//! Two-time correlations of the Floquet-mode amplitudes and of the physical
//! fluctuations, valid at arbitrary times and built from one period of data.

use crate::error::{FloquetError, Result};
use crate::floquet::{periodic_options, reduce_to_period, FloquetDecomposition, PeriodicLinearSystem};
use crate::linalg::{self, CMatrix, C64};
use crate::ode::{integrate, DenseOutput, IntegrationTolerances};

/// `|1 - exp(xT)|` below this value is treated as a resonant denominator.
pub const RESONANCE_THRESHOLD: f64 = 1e-12;

/// `1 - exp(z)` without cancellation for small `|z|`.
pub fn one_minus_exp(z: C64) -> C64 {
    let half = (0.5 * z.im).sin();
    let re = -(z.re.exp_m1() * z.im.cos() - 2.0 * half * half);
    let im = -(z.re.exp() * z.im.sin());
    C64::new(re, im)
}

/// `exp(xT) / (1 - exp(xT))`, the sum of `exp((n+1) x T)` over `n >= 0`.
pub fn upsilon(x: C64, period: f64) -> Result<C64> {
    let z = x * period;
    let den = one_minus_exp(z);
    if !(den.norm() >= RESONANCE_THRESHOLD) {
        return Err(FloquetError::ResonantDenominator { re: x.re, im: x.im, magnitude: den.norm() });
    }
    Ok(z.exp() / den)
}

/// One-period noise data: the initial-value solution `nu(t)`, co-integrated with `F(t)`,
/// and everything needed to evaluate the projected noise and the cross kernels.
#[derive(Debug, Clone)]
pub struct NoiseKernel {
    system: PeriodicLinearSystem,
    decomposition: FloquetDecomposition,
    pair_upsilon: CMatrix,
    nu_end: CMatrix,
    record: DenseOutput,
}

/// Build the noise kernel. Refuses unstable decompositions.
pub fn build_noise_kernel(
    system: &PeriodicLinearSystem,
    decomposition: &FloquetDecomposition,
    tolerances: &IntegrationTolerances,
) -> Result<NoiseKernel> {
    let stability = decomposition.stability();
    if !stability.stable {
        return Err(FloquetError::Unstable { max_growth_rate: stability.max_growth_rate });
    }
    let d = system.dimension();
    if decomposition.dimension() != d || decomposition.period() != system.period() {
        return Err(FloquetError::InvalidArgument("decomposition does not belong to this system".into()));
    }
    let mu = decomposition.exponents();
    let mut pair_upsilon = CMatrix::zeros(d, d);
    for a in 0..d {
        for b in 0..d {
            pair_upsilon[(a, b)] = upsilon(mu[a] + mu[b], system.period())?;
        }
    }

    let sinv = decomposition.modes_inverse().clone();
    let mut y0 = vec![linalg::ZERO; 2 * d * d];
    linalg::write_slice(&linalg::identity(d), &mut y0);
    // The factors exp(-(mu_a + mu_b) t) in the nu equation cancel against those of K^{-1}.
    let rhs = |t: f64, y: &[C64], dy: &mut [C64]| {
        let f = linalg::from_slice(d, d, y);
        linalg::write_slice(&(system.drift(t) * &f), &mut dy[..d * d]);
        let m = match linalg::inverse(&f) {
            Ok(finv) => &sinv * finv,
            Err(_) => {
                dy[d * d..].fill(C64::new(f64::NAN, 0.0));
                return;
            }
        };
        let dnu = &m * system.diffusion(t) * m.transpose();
        linalg::write_slice(&dnu, &mut dy[d * d..]);
    };
    let sol = integrate(rhs, 0.0, system.period(), &y0, &periodic_options(system, tolerances), true)?;
    Ok(NoiseKernel {
        system: system.clone(),
        decomposition: decomposition.clone(),
        pair_upsilon,
        nu_end: linalg::from_slice(d, d, &sol.y_end[d * d..]),
        record: sol.dense.expect("dense output requested"),
    })
}

impl NoiseKernel {
    pub fn system(&self) -> &PeriodicLinearSystem {
        &self.system
    }

    pub fn decomposition(&self) -> &FloquetDecomposition {
        &self.decomposition
    }

    pub fn period(&self) -> f64 {
        self.system.period()
    }

    pub fn dimension(&self) -> usize {
        self.system.dimension()
    }

    pub fn noise_count(&self) -> usize {
        self.system.noise_count()
    }

    /// `Upsilon(mu_a + mu_b)` for every mode pair.
    pub fn pair_upsilon(&self) -> &CMatrix {
        &self.pair_upsilon
    }

    pub fn nu_end(&self) -> &CMatrix {
        &self.nu_end
    }

    /// `nu(tau)` for `tau` in `[0, T]` (clamped).
    pub fn nu(&self, tau: f64) -> CMatrix {
        let t = tau.clamp(0.0, self.period());
        if t == self.period() {
            return self.nu_end.clone();
        }
        let d = self.dimension();
        let mut buf = vec![linalg::ZERO; d * d];
        self.record.eval_range(t, d * d..2 * d * d, &mut buf);
        linalg::from_slice(d, d, &buf)
    }

    /// `Gamma(tau) = exp((mu_a + mu_b) tau) [nu(T) + nu(tau) / Upsilon(mu_a + mu_b)]`.
    pub fn gamma(&self, tau: f64) -> CMatrix {
        gamma_from_nu(&self.nu(tau), &self.nu_end, &self.pair_upsilon, self.decomposition.exponents(), tau)
    }

    /// `N(t) = K^{-1} B G B^T K^{-T}` at `t` (reduced mod T).
    pub fn projected_noise(&self, t: f64) -> Result<CMatrix> {
        let tau = reduce_to_period(t, self.period());
        let (_, kinv) = self.decomposition.frame(tau)?;
        Ok(&kinv * self.system.diffusion(tau) * kinv.transpose())
    }

    /// `K^{-1}(t) B(t) G`, D x N.
    pub fn chi_c_xi(&self, t: f64) -> Result<CMatrix> {
        let tau = reduce_to_period(t, self.period());
        let (_, kinv) = self.decomposition.frame(tau)?;
        Ok(kinv * self.system.noise_matrix(tau) * self.system.noise_correlation())
    }

    /// `G B^T(t) K^{-T}(t)`, N x D.
    pub fn chi_xi_c(&self, t: f64) -> Result<CMatrix> {
        let tau = reduce_to_period(t, self.period());
        let (_, kinv) = self.decomposition.frame(tau)?;
        Ok(self.system.noise_correlation() * self.system.noise_matrix(tau).transpose() * kinv.transpose())
    }

    /// Mode-amplitude correlation `C(t, t')`; the `t' <= t` branch is used on the diagonal.
    pub fn elementary_correlation(&self, t: f64, t_prime: f64) -> Result<CMatrix> {
        check_times(t, t_prime)?;
        let mu = self.decomposition.exponents();
        let lower = t_prime <= t;
        let gamma = self.gamma(reduce_to_period(if lower { t_prime } else { t }, self.period()));
        let d = self.dimension();
        Ok(CMatrix::from_fn(d, d, |a, b| {
            let decay = if lower { (mu[a] * (t - t_prime)).exp() } else { (mu[b] * (t_prime - t)).exp() };
            self.pair_upsilon[(a, b)] * gamma[(a, b)] * decay
        }))
    }

    /// Physical correlation `X(t, t') = K(t) C(t, t') K^T(t')`.
    pub fn fluctuation_correlation(&self, t: f64, t_prime: f64) -> Result<CMatrix> {
        let c = self.elementary_correlation(t, t_prime)?;
        let (k, _) = self.decomposition.frame(t)?;
        let (kp, _) = self.decomposition.frame(t_prime)?;
        Ok(k * c * kp.transpose())
    }

    /// `<c_a(t) xi_b(t')>`, D x N; zero for `t < t'`.
    pub fn cross_correlation_c_xi(&self, t: f64, t_prime: f64) -> Result<CMatrix> {
        check_times(t, t_prime)?;
        let (d, n) = (self.dimension(), self.noise_count());
        if t < t_prime {
            return Ok(CMatrix::zeros(d, n));
        }
        let mut chi = self.chi_c_xi(t_prime)?;
        let mu = self.decomposition.exponents();
        for (a, mut row) in chi.row_iter_mut().enumerate() {
            row *= (mu[a] * (t - t_prime)).exp();
        }
        Ok(chi)
    }

    /// `<xi_a(t) c_b(t')>`, N x D; zero for `t' < t`.
    pub fn cross_correlation_xi_c(&self, t: f64, t_prime: f64) -> Result<CMatrix> {
        check_times(t, t_prime)?;
        let (d, n) = (self.dimension(), self.noise_count());
        if t_prime < t {
            return Ok(CMatrix::zeros(n, d));
        }
        let mut chi = self.chi_xi_c(t)?;
        let mu = self.decomposition.exponents();
        for (b, mut col) in chi.column_iter_mut().enumerate() {
            col *= (mu[b] * (t_prime - t)).exp();
        }
        Ok(chi)
    }
}

pub(crate) fn gamma_from_nu(nu: &CMatrix, nu_end: &CMatrix, pair_upsilon: &CMatrix, mu: &[C64], tau: f64) -> CMatrix {
    CMatrix::from_fn(nu.nrows(), nu.ncols(), |a, b| {
        ((mu[a] + mu[b]) * tau).exp() * (nu_end[(a, b)] + nu[(a, b)] / pair_upsilon[(a, b)])
    })
}

fn check_times(t: f64, t_prime: f64) -> Result<()> {
    if !(t.is_finite() && t_prime.is_finite() && t >= 0.0 && t_prime >= 0.0) {
        return Err(FloquetError::InvalidArgument(format!("times must be finite and non-negative, got ({t}, {t_prime})")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{identity, relative_difference};

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn upsilon_values() {
        assert!((upsilon(c(0.5f64.ln()), 1.0).unwrap() - c(1.0)).norm() < 1e-15);
        assert!(upsilon(c(-800.0), 1.0).unwrap().norm() < 1e-300);
        let v = upsilon(c(-0.1), 1.0).unwrap();
        assert!((v.re - 9.508_331_944_775_049_624).abs() < 1e-13);
        assert!(matches!(upsilon(C64::new(0.0, 2.0 * std::f64::consts::PI), 1.0), Err(FloquetError::ResonantDenominator { .. })));
    }

    #[test]
    fn one_minus_exp_small_argument() {
        let z = C64::new(1e-12, -2e-12);
        assert!((one_minus_exp(z) + z + z * z * 0.5).norm() < 1e-14 * z.norm());
    }

    #[test]
    fn ornstein_uhlenbeck_kernel() {
        let sys = PeriodicLinearSystem::constant(identity(1) * c(-1.0), identity(1) * c(2f64.sqrt()), identity(1), 1.0).unwrap();
        let tol = IntegrationTolerances::default();
        let dec = FloquetDecomposition::compute(&sys, &tol).unwrap();
        let k = build_noise_kernel(&sys, &dec, &tol).unwrap();
        for &tau in &[0.0, 0.25, 0.7, 1.0] {
            let nu = k.nu(tau)[(0, 0)];
            assert!((nu - c((2.0 * tau).exp() - 1.0)).norm() < 1e-9, "tau = {tau}: {nu}");
            assert!((k.projected_noise(tau).unwrap()[(0, 0)] - c(2.0)).norm() < 1e-10);
        }
        assert!(relative_difference(&k.gamma(0.0), k.nu_end()) < 1e-14);
        for &(t, tp) in &[(3.3, 1.2), (0.5, 0.5), (1.0, 4.25)] {
            let x = k.fluctuation_correlation(t, tp).unwrap()[(0, 0)];
            assert!((x - c((-(t - tp).abs()).exp())).norm() < 1e-9, "({t}, {tp}): {x}");
        }
        assert_eq!(k.cross_correlation_c_xi(1.0, 2.0).unwrap()[(0, 0)], c(0.0));
        assert_eq!(k.cross_correlation_xi_c(2.0, 1.0).unwrap()[(0, 0)], c(0.0));
        let cx = k.cross_correlation_c_xi(2.0, 1.5).unwrap()[(0, 0)];
        assert!((cx - c(2f64.sqrt() * (-0.5f64).exp())).norm() < 1e-10);
    }

    #[test]
    fn unstable_system_refused() {
        let sys = PeriodicLinearSystem::constant(identity(1) * c(0.1), identity(1), identity(1), 1.0).unwrap();
        let tol = IntegrationTolerances::default();
        let dec = FloquetDecomposition::compute(&sys, &tol).unwrap();
        assert!(matches!(build_noise_kernel(&sys, &dec, &tol), Err(FloquetError::Unstable { .. })));
    }
}
