use std::path::{Path, PathBuf};

use floquet_spectra::correlations::{build_noise_kernel, NoiseKernel};
use floquet_spectra::dpo::{self, DpoModel};
use floquet_spectra::floquet::integrate_fundamental_span;
use floquet_spectra::interp::SPLINE_ORDER;
use floquet_spectra::linalg::{self, relative_difference};
use floquet_spectra::oracle::{Oracle, OracleConfig};
use floquet_spectra::sampled::SampledSystem;
use floquet_spectra::spectra::{DetectionMode, SpectralEngine};
use floquet_spectra::{Execution, FloquetDecomposition, PeriodicLinearSystem};
use serde_json::{json, Value};

use crate::config::{default_omega_grid, Command, RunConfig, SystemSpec};
use crate::error::{CliError, CliResult};
use crate::output::{complex, complex_columns, complex_matrix, flatten_complex, OutputDir, Table};

struct LoadedSystem {
    system: PeriodicLinearSystem,
    metadata: Value,
}

fn load_system(config: &RunConfig) -> CliResult<LoadedSystem> {
    match &config.system {
        SystemSpec::Dpo { q, sigma, .. } => {
            let (params, mode) = config.dpo()?;
            Ok(LoadedSystem {
                system: dpo::build_dpo_system(&params, mode)?,
                metadata: json!({ "kind": "dpo", "q": q, "sigma": sigma, "mode": mode }),
            })
        }
        SystemSpec::File { path } => {
            if !path.exists() {
                return Err(CliError::config("system-file", format!("{} does not exist", path.display())));
            }
            let sampled = SampledSystem::load(path)?;
            Ok(LoadedSystem {
                system: sampled.to_system()?,
                metadata: json!({
                    "kind": "file",
                    "path": path.display().to_string(),
                    "samples": sampled.samples.len(),
                    "interpolation": "periodic cubic spline",
                    "interpolation_order": SPLINE_ORDER,
                }),
            })
        }
    }
}

fn metadata(config: &RunConfig, system: &LoadedSystem) -> Value {
    json!({
        "generator": concat!("floquet-spectra ", env!("CARGO_PKG_VERSION")),
        "system": system.metadata,
        "period": system.system.period(),
        "tolerances": config.tolerances,
        "units": "dimensionless; time in units of the inverse damping rate, frequencies in units of the damping rate",
    })
}

fn detection(config: &RunConfig, period: f64) -> CliResult<DetectionMode> {
    let mode = config.detection.unwrap_or(DetectionMode::Infinite);
    if let DetectionMode::Finite { remainder, .. } = mode {
        if remainder >= period {
            return Err(CliError::config("tr", format!("must be below the period {period}, got {remainder}")));
        }
    }
    Ok(mode)
}

fn omega_grid(config: &RunConfig, period: f64) -> Vec<f64> {
    let g = config.omega.unwrap_or_else(|| default_omega_grid(period));
    dpo::uniform_grid(g.min, g.max, g.count)
}

fn kernel_for(config: &RunConfig, system: &PeriodicLinearSystem) -> CliResult<NoiseKernel> {
    let d = FloquetDecomposition::compute(system, &config.tolerances)?;
    Ok(build_noise_kernel(system, &d, &config.tolerances)?)
}

/// Fill in defaults that depend on the system so the emitted config is complete.
pub fn resolve(mut config: RunConfig) -> CliResult<RunConfig> {
    config.validate()?;
    let period = match &config.system {
        SystemSpec::Dpo { .. } => config.dpo()?.0.period(),
        SystemSpec::File { .. } => load_system(&config)?.system.period(),
    };
    match config.command {
        Command::Spectrum | Command::DpoSpectrum => {
            config.omega.get_or_insert_with(|| default_omega_grid(period));
            config.detection.get_or_insert(DetectionMode::Infinite);
        }
        Command::Correlate if config.pairs.is_empty() => config.pairs = vec![[0.0, 0.0], [period, 0.0]],
        _ => {}
    }
    Ok(config)
}

pub struct Report {
    pub lines: Vec<String>,
    pub files: Vec<PathBuf>,
}

pub fn run(config: &RunConfig, out: &Path) -> CliResult<Report> {
    config.validate()?;
    let mut dir = OutputDir::create(out)?;
    dir.text("config.json", &config.to_json())?;
    let lines = match config.command {
        Command::Decompose => decompose(config, &mut dir)?,
        Command::Correlate => correlate(config, &mut dir)?,
        Command::Spectrum => spectrum(config, &mut dir)?,
        Command::DpoSpectrum => dpo_spectrum(config, &mut dir)?,
        Command::DpoSweep => dpo_sweep(config, &mut dir)?,
        Command::Verify => verify(config, &mut dir)?,
    };
    Ok(Report { lines, files: dir.written().to_vec() })
}

fn decompose(config: &RunConfig, dir: &mut OutputDir) -> CliResult<Vec<String>> {
    let loaded = load_system(config)?;
    let d = FloquetDecomposition::compute(&loaded.system, &config.tolerances)?;
    let stability = d.stability();
    let mut table = Table::new(&["index", "mu_re", "mu_im", "multiplier_re", "multiplier_im"]);
    for (i, (mu, phi)) in d.exponents().iter().zip(d.multipliers()).enumerate() {
        let mut row = vec![(i + 1).to_string()];
        row.extend([mu.re, mu.im, phi.re, phi.im].map(crate::output::fmt_float));
        table.push(row);
    }
    dir.table("exponents.csv", &table)?;
    dir.summary(
        "decompose",
        metadata(config, &loaded),
        json!({
            "dimension": d.dimension(),
            "exponents": d.exponents().iter().map(|&z| complex(z)).collect::<Vec<_>>(),
            "multipliers": d.multipliers().into_iter().map(complex).collect::<Vec<_>>(),
            "max_growth_rate": stability.max_growth_rate,
            "stable": stability.stable,
            "mode_condition": d.mode_condition(),
            "monodromy": complex_matrix(d.monodromy()),
        }),
    )?;
    Ok(vec![format!("max Re mu = {:.6e} ({})", stability.max_growth_rate, if stability.stable { "stable" } else { "unstable" })])
}

fn correlate(config: &RunConfig, dir: &mut OutputDir) -> CliResult<Vec<String>> {
    let loaded = load_system(config)?;
    let kernel = kernel_for(config, &loaded.system)?;
    let n = kernel.dimension();
    let pairs = &config.pairs;
    let values = Execution::Parallel.try_map(pairs.len(), |i| kernel.fluctuation_correlation(pairs[i][0], pairs[i][1]))?;
    let mut header = vec!["t".to_string(), "t_prime".to_string()];
    header.extend(complex_columns("X", n, n));
    let mut table = Table::new(&header);
    for (p, x) in pairs.iter().zip(&values) {
        let mut row = vec![p[0], p[1]];
        row.extend(flatten_complex(x));
        table.push_floats(&row);
    }
    dir.table("correlations.csv", &table)?;
    dir.summary("correlate", metadata(config, &loaded), json!({ "pairs": pairs.len(), "dimension": n }))?;
    Ok(vec![format!("{} correlation matrices", pairs.len())])
}

fn spectrum(config: &RunConfig, dir: &mut OutputDir) -> CliResult<Vec<String>> {
    let loaded = load_system(config)?;
    let period = loaded.system.period();
    let mode = detection(config, period)?;
    let kernel = kernel_for(config, &loaded.system)?;
    let engine = SpectralEngine::new(&kernel, config.tolerances).with_execution(Execution::Sequential);
    let omegas = omega_grid(config, period);
    let values = Execution::Parallel.try_map(omegas.len(), |i| engine.fluctuation_spectrum(omegas[i], mode))?;
    let n = kernel.dimension();
    let mut header = vec!["omega".to_string()];
    header.extend(complex_columns("S", n, n));
    let mut table = Table::new(&header);
    for (w, s) in omegas.iter().zip(&values) {
        let mut row = vec![*w];
        row.extend(flatten_complex(s));
        table.push_floats(&row);
    }
    dir.table("spectrum.csv", &table)?;
    dir.summary(
        "spectrum",
        metadata(config, &loaded),
        json!({ "points": omegas.len(), "detection": mode, "exponents": kernel.decomposition().exponents().iter().map(|&z| complex(z)).collect::<Vec<_>>() }),
    )?;
    Ok(vec![format!("{} frequencies", omegas.len())])
}

fn dpo_spectrum(config: &RunConfig, dir: &mut OutputDir) -> CliResult<Vec<String>> {
    let (params, mode) = config.dpo()?;
    let loaded = load_system(config)?;
    let det_mode = detection(config, params.period())?;
    let model = DpoModel::new(params, mode, config.tolerances)?;
    let omegas = omega_grid(config, params.period());
    let points = model.spectral_covariance(&omegas, det_mode, Execution::Parallel)?;
    let mut table = Table::new(&["omega", "V11", "V12", "V22", "V1", "V2", "detV", "V2_dB"]);
    for p in &points {
        table.push_floats(&[p.omega, p.v[0][0], p.v[0][1], p.v[1][1], p.v1, p.v2, p.det, p.v2_db]);
    }
    dir.table("dpo_spectrum.csv", &table)?;
    let best = points.iter().min_by(|a, b| a.v2.total_cmp(&b.v2)).expect("grid is non-empty");
    let min_det = points.iter().map(|p| p.det).fold(f64::INFINITY, f64::min);
    let residue = points.iter().map(|p| p.imaginary_residue).fold(0.0, f64::max);
    let zero = model.spectral_covariance_at(0.0, det_mode)?;
    let sigma_ins = dpo::find_instability(params.q, mode, &config.tolerances)?;
    dir.summary(
        "dpo-spectrum",
        metadata(config, &loaded),
        json!({
            "points": points.len(),
            "detection": det_mode,
            "exponents": model.decomposition().exponents().iter().map(|&z| complex(z)).collect::<Vec<_>>(),
            "sigma_ins": sigma_ins,
            "v1_at_zero": zero.v1,
            "v2_at_zero": zero.v2,
            "v2_db_at_zero": zero.v2_db,
            "min_v2": { "omega": best.omega, "v2": best.v2, "v2_db": best.v2_db },
            "min_det_v": min_det,
            "max_imaginary_residue": residue,
        }),
    )?;
    Ok(vec![
        format!("{} frequencies, V2(0) = {:.6} ({:.3} dB), sigma_ins = {sigma_ins:.6}", points.len(), zero.v2, zero.v2_db),
    ])
}

fn dpo_sweep(config: &RunConfig, dir: &mut OutputDir) -> CliResult<Vec<String>> {
    let SystemSpec::Dpo { mode, .. } = config.system else {
        return Err(CliError::config("system-file", "dpo-sweep uses the built-in oscillator"));
    };
    let sweep = config.q_sweep.ok_or_else(|| CliError::config("q-min", "missing Q range"))?;
    let qs = dpo::uniform_grid(sweep.min, sweep.max, sweep.count);
    let rows = Execution::Parallel.try_map(qs.len(), |i| dpo::find_optimal_squeezing(qs[i], mode, &config.tolerances))?;
    let mut table = Table::new(&["Q", "sigma_ins", "sigma_opt", "V2opt_dB"]);
    for r in &rows {
        table.push_floats(&[r.q, r.sigma_ins, r.sigma_opt, r.v2_opt_db]);
    }
    dir.table("dpo_sweep.csv", &table)?;
    let meta = json!({
        "generator": concat!("floquet-spectra ", env!("CARGO_PKG_VERSION")),
        "system": { "kind": "dpo", "mode": mode },
        "tolerances": config.tolerances,
        "units": "dimensionless; sigma normalized to the rotating-wave threshold, V2opt_dB = -10 log10 V2(0)",
    });
    dir.summary("dpo-sweep", meta, json!({ "rows": rows }))?;
    Ok(rows.iter().map(|r| format!("Q = {:.4}: sigma_ins = {:.6}, sigma_opt = {:.5}, {:.3} dB", r.q, r.sigma_ins, r.sigma_opt, r.v2_opt_db)).collect())
}

struct Check {
    name: &'static str,
    value: f64,
    tolerance: f64,
}

impl Check {
    fn passed(&self) -> bool {
        self.value <= self.tolerance
    }
}

fn verify(config: &RunConfig, dir: &mut OutputDir) -> CliResult<Vec<String>> {
    let loaded = load_system(config)?;
    let system = &loaded.system;
    let tol = config.tolerances;
    let period = system.period();
    let kernel = kernel_for(config, system)?;
    let dec = kernel.decomposition();
    let mut checks = Vec::new();

    let long = integrate_fundamental_span(system, 2.0 * period, &tol)?;
    let f_t = dec.fundamental().end_value();
    checks.push(Check { name: "group property F(2T) = F(T)^2", value: relative_difference(long.end_value(), &(f_t * f_t)), tolerance: 1e-7 });
    let abel_trace: f64 = {
        let (x, w) = floquet_spectra::quadrature::gauss_legendre_on(64, 0.0, period);
        x.iter().zip(&w).map(|(t, wi)| wi * system.drift(*t).trace().re).sum()
    };
    let det = linalg::determinant(f_t);
    checks.push(Check { name: "Abel identity det F(T)", value: ((det.norm().ln() - abel_trace) / abel_trace.abs().max(1.0)).abs(), tolerance: 1e-7 });
    checks.push(Check { name: "Gamma(T) = Gamma(0)", value: relative_difference(&kernel.gamma(period), &kernel.gamma(0.0)), tolerance: 1e-8 });

    let oracle = Oracle::new(system, OracleConfig::default())?;
    let pairs = [[2.3, 0.7], [0.7, 2.3], [1.0, 1.0], [4.1, 0.2], [0.15, 3.6]];
    let mut worst: f64 = 0.0;
    for [a, b] in pairs {
        let fast = kernel.fluctuation_correlation(a * period, b * period)?;
        let reference = oracle.two_time(a * period, b * period)?;
        worst = worst.max(relative_difference(&fast, &reference));
    }
    checks.push(Check { name: "two-time correlations vs covariance propagation", value: worst, tolerance: 1e-6 });

    let engine = SpectralEngine::new(&kernel, tol);
    let mode = DetectionMode::Finite { periods: 4, remainder: 0.3 * period };
    let td = 4.3 * period;
    let base = std::f64::consts::PI / period;
    let mut worst: f64 = 0.0;
    for w in [0.0, base, 2.0 * base] {
        let fast = engine.fluctuation_spectrum(w, mode)?;
        let reference = oracle.physical_spectra(w, td)?;
        worst = worst.max(relative_difference(&fast, &reference.fluctuations));
    }
    checks.push(Check { name: "finite-window spectrum vs double quadrature", value: worst, tolerance: 1e-6 });

    let mut table = Table::new(&["check", "value", "tolerance", "status"]);
    let mut lines = vec![format!("{:<50} {:>12} {:>10}  status", "check", "value", "tolerance")];
    for c in &checks {
        let status = if c.passed() { "PASS" } else { "FAIL" };
        table.push(vec![c.name.to_string(), crate::output::fmt_float(c.value), crate::output::fmt_float(c.tolerance), status.to_string()]);
        lines.push(format!("{:<50} {:>12.3e} {:>10.1e}  {status}", c.name, c.value, c.tolerance));
    }
    dir.table("verify.csv", &table)?;
    let failed = checks.iter().filter(|c| !c.passed()).count();
    dir.summary(
        "verify",
        metadata(config, &loaded),
        json!({
            "checks": checks.iter().map(|c| json!({ "name": c.name, "value": c.value, "tolerance": c.tolerance, "passed": c.passed() })).collect::<Vec<_>>(),
            "failed": failed,
            "oracle_settle_periods": oracle.settle_periods(),
        }),
    )?;
    if failed > 0 {
        for l in &lines {
            println!("{l}");
        }
        return Err(CliError::VerificationFailed { failed, total: checks.len() });
    }
    Ok(lines)
}
