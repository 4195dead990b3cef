//! Frozen reference values from independent high-precision computations
//! (Taylor-series ODE solver at 25 digits, DOP853 at rtol 1e-13, and a
//! Floquet-Fourier harmonic-balance solve of the output spectrum).

use std::f64::consts::PI;

use floquet_spectra::correlations::{build_noise_kernel, upsilon};
use floquet_spectra::dpo::{self, DpoMode, DpoModel, DpoParameters};
use floquet_spectra::floquet::{integrate_fundamental_span, FloquetDecomposition};
use floquet_spectra::linalg::{self, relative_difference, CMatrix, C64};
use floquet_spectra::oracle::{Oracle, OracleConfig};
use floquet_spectra::spectra::DetectionMode;
use floquet_spectra::IntegrationTolerances;

fn real2(v: [f64; 4]) -> CMatrix {
    CMatrix::from_row_slice(2, 2, &v.map(|x| C64::new(x, 0.0)))
}

fn complex2(v: [(f64, f64); 4]) -> CMatrix {
    CMatrix::from_row_slice(2, 2, &v.map(|(re, im)| C64::new(re, im)))
}

fn dpo_model() -> DpoModel {
    DpoModel::new(DpoParameters::new(3.0, 0.5).unwrap(), DpoMode::Full, IntegrationTolerances::default()).unwrap()
}

#[test]
fn fundamental_matrix_values() {
    let params = DpoParameters::new(3.0, 0.5).unwrap();
    let system = dpo::build_dpo_system(&params, DpoMode::Full).unwrap();
    let t = params.period();
    let f = integrate_fundamental_span(&system, t, &IntegrationTolerances::default()).unwrap();
    let half = real2([0.71456595030810407563, 0.17873637387265567593, -0.17873637387265567593, 0.44638723087173618037]);
    let full = real2([0.57984370973016692312, 0.038209064186941355213, 0.08376238247760748034, 0.21789525556372167418]);
    assert!(relative_difference(&f.at(t / 2.0), &half) < 1e-9);
    assert!(relative_difference(f.end_value(), &full) < 1e-9);
}

#[test]
fn exponents_and_multipliers() {
    let m = dpo_model();
    let d = m.decomposition();
    let mu = [-0.50631546582104670906, -1.4936845341789532909];
    let phi = [0.58848001272612493631, 0.20925895256776366099];
    for k in 0..2 {
        assert!((d.exponents()[k] - C64::new(mu[k], 0.0)).norm() < 1e-9);
        assert!((d.multipliers()[k] - C64::new(phi[k], 0.0)).norm() < 1e-9);
    }
}

#[test]
fn frame_at_half_period_matches_refined_oracle() {
    let m = dpo_model();
    let d = m.decomposition();
    let t = d.period() / 2.0;
    let oracle = Oracle::new(m.kernel().system(), OracleConfig { steps_per_period: 5120, ..OracleConfig::default() }).unwrap();
    let f = oracle.propagator(0.0, t);
    let expected = d.frame_from_fundamental(&f, t);
    let (k, kinv) = d.frame(t).unwrap();
    assert!(relative_difference(&k, &expected) < 1e-9);
    assert!(relative_difference(&(&k * &kinv), &linalg::identity(2)) < 1e-12);
}

#[test]
fn upsilon_scalar() {
    let v = upsilon(C64::new(-0.1, 0.0), 1.0).unwrap();
    assert!((v.re - 9.508331944775049624).abs() < 1e-13);
    assert!(v.im.abs() < 1e-15);
}

#[test]
fn equal_time_covariances() {
    let m = dpo_model();
    let t = m.params().period();
    let at_03 = complex2([(2.0757106575216127, 0.0), (-0.17046117135142716, 1.0), (-0.17046117135142716, -1.0), (0.6540082195346422, 0.0)]);
    let at_5 = complex2([(1.972112579239331, 0.0), (0.3269591185357493, 1.0), (0.3269591185357494, -1.0), (0.741733026227243, 0.0)]);
    let fast = m.kernel().fluctuation_correlation(0.3 * t, 0.3 * t).unwrap();
    let sym = |x: &CMatrix| (x + x.transpose()) * C64::new(0.5, 0.0);
    // Only the symmetric part is ordering independent at equal times.
    assert!(relative_difference(&sym(&fast), &sym(&at_03)) < 1e-8);
    let fast = m.kernel().fluctuation_correlation(5.0 * t, 5.0 * t).unwrap();
    assert!(relative_difference(&sym(&fast), &sym(&at_5)) < 1e-8);
    let oracle = Oracle::new(m.kernel().system(), OracleConfig::default()).unwrap();
    assert!(relative_difference(&oracle.equal_time_covariance(0.3 * t).unwrap(), &at_03) < 1e-8);
    assert!(relative_difference(&oracle.equal_time_covariance(5.0 * t).unwrap(), &at_5) < 1e-8);
}

#[test]
fn two_time_correlation() {
    let m = dpo_model();
    let t = m.params().period();
    let later_first = complex2([
        (0.8532323990009762, 0.0227100321463853),
        (-0.06114435587459295, 0.44827664558079405),
        (-0.0658951323476966, -0.07972743228051407),
        (0.058411763558770924, -0.030461688345612917),
    ]);
    let fast = m.kernel().fluctuation_correlation(2.3 * t, 0.7 * t).unwrap();
    assert!(relative_difference(&fast, &later_first) < 1e-8);
    let swapped = m.kernel().fluctuation_correlation(0.7 * t, 2.3 * t).unwrap();
    let expected = complex2([
        (0.8532323990009762, -0.0227100321463853),
        (-0.0658951323476966, 0.07972743228051407),
        (-0.06114435587459295, -0.44827664558079405),
        (0.058411763558770924, 0.030461688345612917),
    ]);
    assert!(relative_difference(&swapped, &expected) < 1e-8);
}

#[test]
fn output_spectral_covariance() {
    let m = dpo_model();
    let cases = [
        (0.0, [8.684595992348731, 0.14982406638515167, 0.1346759366371847], 8.687220620654987, 0.13205130833092985),
        (3.0, [1.2102968221244452, 0.0022709577967579267, 0.8311398323361501], 1.2103104235203197, 0.8311262309402756),
        (6.0, [1.0500575353358608, 0.006239012686229261, 1.0005681505564634], 1.0508319550145657, 0.9997937308777585),
    ];
    for (w, v, v1, v2) in cases {
        let p = m.spectral_covariance_at(w, DetectionMode::Infinite).unwrap();
        assert!((p.v[0][0] - v[0]).abs() < 1e-8 * v[0], "w = {w}");
        assert!((p.v[0][1] - v[1]).abs() < 1e-8);
        assert!((p.v[1][1] - v[2]).abs() < 1e-8 * v[2]);
        assert!((p.v1 - v1).abs() < 1e-8 * v1);
        assert!((p.v2 - v2).abs() < 1e-8 * v2);
    }
}

#[test]
fn instability_threshold_and_optimum() {
    let tol = IntegrationTolerances::default();
    let sigma_ins = dpo::find_instability(3.0, DpoMode::Full, &tol).unwrap();
    assert!((sigma_ins - 1.0538170438135919).abs() < 1e-6);
    let opt = dpo::find_optimal_squeezing(2.0, DpoMode::Full, &tol).unwrap();
    assert!((opt.sigma_ins - 1.1266995302980711).abs() < 1e-6);
    assert!((opt.sigma_opt - 0.7346731036407391).abs() < 1e-3);
    assert!((opt.v2_opt - 0.11620539263434794).abs() < 1e-7);
    assert!((opt.v2_opt_db - 9.347737175825374).abs() < 1e-5);
}

#[test]
fn unstable_slightly_above_threshold() {
    let tol = IntegrationTolerances::default();
    let sigma_ins = dpo::find_instability(3.0, DpoMode::Full, &tol).unwrap();
    let params = DpoParameters::new(3.0, sigma_ins + 1e-4).unwrap();
    let system = dpo::build_dpo_system(&params, DpoMode::Full).unwrap();
    let d = FloquetDecomposition::compute(&system, &tol).unwrap();
    assert!(!d.stability().stable);
    assert!(build_noise_kernel(&system, &d, &tol).is_err());
    assert!(DpoModel::new(params, DpoMode::Full, tol).is_err());
}

#[test]
fn finite_window_converges_like_inverse_window() {
    let m = dpo_model();
    for w in [0.0, 2.0 * 3.0] {
        let inf = m.output_spectrum(w, DetectionMode::Infinite).unwrap();
        let finite = |kd: u32| m.output_spectrum(w, DetectionMode::Finite { periods: kd, remainder: 0.0 }).unwrap();
        let errors: Vec<f64> = [8, 16, 32, 64].iter().map(|&kd| (&finite(kd) - &inf).norm() / inf.norm()).collect();
        assert!(errors.windows(2).all(|e| e[1] < e[0]), "w = {w}: {errors:?}");
        for e in errors.windows(2) {
            assert!((e[0] / e[1] - 2.0).abs() < 0.05, "w = {w}: {errors:?}");
        }
        let richardson = finite(128) * C64::new(2.0, 0.0) - finite(64);
        assert!(relative_difference(&richardson, &inf) < 1e-5, "w = {w}");
    }
}

#[test]
fn period_constant_is_pi_over_q() {
    assert!((DpoParameters::new(3.0, 0.5).unwrap().period() - PI / 3.0).abs() < 1e-16);
}
