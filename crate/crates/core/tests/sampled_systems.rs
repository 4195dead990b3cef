use floquet_spectra::correlations::build_noise_kernel;
use floquet_spectra::dpo::{self, DpoMode, DpoModel, DpoParameters};
use floquet_spectra::linalg::relative_difference;
use floquet_spectra::sampled::SampledSystem;
use floquet_spectra::spectra::{DetectionMode, SpectralEngine};
use floquet_spectra::{FloquetDecomposition, IntegrationTolerances};

#[test]
fn sampled_dpo_reproduces_builtin_spectra() {
    let tol = IntegrationTolerances::default();
    let params = DpoParameters::new(3.0, 0.5).unwrap();
    let builtin = DpoModel::new(params, DpoMode::Full, tol).unwrap();
    let file = SampledSystem::from_system(builtin.kernel().system(), 256).to_text();
    let system = SampledSystem::parse(&file).unwrap().to_system().unwrap();
    assert!(system.periodicity_defect(64) < 1e-14);
    let d = FloquetDecomposition::compute(&system, &tol).unwrap();
    for (a, b) in d.exponents().iter().zip(builtin.decomposition().exponents()) {
        assert!((a - b).norm() < 1e-6);
    }
    let kernel = build_noise_kernel(&system, &d, &tol).unwrap();
    let engine = SpectralEngine::new(&kernel, tol);
    for w in [0.0, 6.0] {
        let sampled = engine.fluctuation_spectrum(w, DetectionMode::Infinite).unwrap();
        let reference = builtin.engine().fluctuation_spectrum(w, DetectionMode::Infinite).unwrap();
        assert!(relative_difference(&sampled, &reference) < 1e-6, "w = {w}");
    }
}

#[test]
fn drift_is_interpolated_between_samples() {
    let params = DpoParameters::new(3.0, 0.5).unwrap();
    let system = dpo::build_dpo_system(&params, DpoMode::Full).unwrap();
    let sampled = SampledSystem::from_system(&system, 512).to_system().unwrap();
    let t = 0.2371 * params.period();
    assert!(relative_difference(&sampled.drift(t), &system.drift(t)) < 1e-8);
}
