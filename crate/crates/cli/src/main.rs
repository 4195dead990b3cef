mod config;
mod error;
mod output;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use floquet_spectra::dpo::DpoMode;
use floquet_spectra::spectra::DetectionMode;
use floquet_spectra::IntegrationTolerances;

use config::{parse_pairs, Command, OmegaGrid, QSweep, RunConfig, SystemSpec, SCHEMA_VERSION};
use error::{CliError, CliResult};

/// Two-time correlations and spectra of linear time-periodic open systems.
///
/// Every run writes `config.json` next to its outputs; `--config` on that
/// file repeats the run.
#[derive(Debug, Parser)]
#[command(name = "floquet-spectra", version)]
struct Cli {
    /// Re-run a previously emitted `config.json`.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    output: PathBuf,

    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Option<Sub>,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Floquet exponents, multipliers and stability.
    Decompose {
        #[command(flatten)]
        system: SystemArgs,
        #[command(flatten)]
        tol: TolArgs,
    },
    /// Steady-state two-time correlation matrices X(t, t').
    Correlate {
        #[command(flatten)]
        system: SystemArgs,
        #[command(flatten)]
        tol: TolArgs,
        /// Comma-separated `t:t'` pairs; a `T` suffix counts periods (e.g. `2.3T:0.7T`).
        #[arg(long)]
        pairs: Option<String>,
    },
    /// Fluctuation spectrum S(omega) on a frequency grid.
    Spectrum {
        #[command(flatten)]
        system: SystemArgs,
        #[command(flatten)]
        tol: TolArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        detection: DetectionArgs,
    },
    /// Output spectral covariance V(omega) of the parametric oscillator.
    DpoSpectrum {
        #[command(flatten)]
        system: SystemArgs,
        #[command(flatten)]
        tol: TolArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        detection: DetectionArgs,
    },
    /// Instability threshold and optimal squeezing over a range of Q.
    DpoSweep {
        #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
        q_min: f64,
        #[arg(long, default_value_t = 10.0, allow_negative_numbers = true)]
        q_max: f64,
        #[arg(long, default_value_t = 9)]
        q_count: usize,
        #[arg(long, default_value = "full")]
        mode: DpoMode,
        #[command(flatten)]
        tol: TolArgs,
    },
    /// Cross-check the fast pipeline against brute-force oracles.
    Verify {
        #[command(flatten)]
        system: SystemArgs,
        #[command(flatten)]
        tol: TolArgs,
    },
}

#[derive(Debug, Args)]
struct SystemArgs {
    /// Quality factor Q of the built-in oscillator.
    #[arg(long, default_value_t = 3.0, allow_negative_numbers = true)]
    q: f64,
    /// Normalized modulation amplitude sigma.
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    sigma: f64,
    #[arg(long, default_value = "full")]
    mode: DpoMode,
    /// Sampled-system file replacing the built-in oscillator.
    #[arg(long)]
    system_file: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TolArgs {
    #[arg(long, default_value_t = 1e-10, allow_negative_numbers = true)]
    tol_rel: f64,
    #[arg(long, default_value_t = 1e-12, allow_negative_numbers = true)]
    tol_abs: f64,
}

#[derive(Debug, Args)]
struct GridArgs {
    /// Defaults to -3 pi / T.
    #[arg(long, allow_negative_numbers = true)]
    omega_min: Option<f64>,
    /// Defaults to 3 pi / T.
    #[arg(long, allow_negative_numbers = true)]
    omega_max: Option<f64>,
    #[arg(long)]
    omega_count: Option<usize>,
}

#[derive(Debug, Args)]
struct DetectionArgs {
    /// Whole periods in a finite detection window; omitted means infinite detection.
    #[arg(long, allow_negative_numbers = true)]
    kd: Option<i64>,
    /// Remainder of the detection window, `0 <= tr < T`.
    #[arg(long, allow_negative_numbers = true)]
    tr: Option<f64>,
}

impl SystemArgs {
    fn spec(&self) -> SystemSpec {
        match &self.system_file {
            Some(path) => SystemSpec::File { path: path.clone() },
            None => SystemSpec::Dpo { q: self.q, sigma: self.sigma, mode: self.mode },
        }
    }
}

impl TolArgs {
    fn tolerances(&self) -> IntegrationTolerances {
        IntegrationTolerances { relative: self.tol_rel, absolute: self.tol_abs }
    }
}

fn grid(args: &GridArgs, period: f64) -> CliResult<Option<OmegaGrid>> {
    if args.omega_min.is_none() && args.omega_max.is_none() && args.omega_count.is_none() {
        return Ok(None);
    }
    let d = config::default_omega_grid(period);
    Ok(Some(OmegaGrid {
        min: args.omega_min.unwrap_or(d.min),
        max: args.omega_max.unwrap_or(d.max),
        count: args.omega_count.unwrap_or(d.count),
    }))
}

fn detection(args: &DetectionArgs) -> CliResult<DetectionMode> {
    match (args.kd, args.tr) {
        (None, None) => Ok(DetectionMode::Infinite),
        (None, Some(_)) => Err(CliError::config("tr", "needs --kd")),
        (Some(kd), tr) => {
            let periods = u32::try_from(kd).ok().filter(|&k| k > 0).ok_or_else(|| CliError::config("kd", format!("must be a positive integer, got {kd}")))?;
            Ok(DetectionMode::Finite { periods, remainder: tr.unwrap_or(0.0) })
        }
    }
}

/// Period of the selected system, for defaults given in units of `T`.
fn period_of(spec: &SystemSpec) -> CliResult<f64> {
    match spec {
        SystemSpec::Dpo { q, .. } => {
            if !(q.is_finite() && *q > 0.0) {
                return Err(CliError::config("q", format!("must be positive, got {q}")));
            }
            Ok(std::f64::consts::PI / q)
        }
        SystemSpec::File { path } => {
            if !path.exists() {
                return Err(CliError::config("system-file", format!("{} does not exist", path.display())));
            }
            Ok(floquet_spectra::sampled::SampledSystem::load(path)?.period)
        }
    }
}

fn build_config(sub: &Sub) -> CliResult<RunConfig> {
    let base = |command, system: &SystemArgs, tol: &TolArgs| RunConfig {
        schema_version: SCHEMA_VERSION,
        command,
        system: system.spec(),
        tolerances: tol.tolerances(),
        omega: None,
        detection: None,
        pairs: Vec::new(),
        q_sweep: None,
    };
    let config = match sub {
        Sub::Decompose { system, tol } => base(Command::Decompose, system, tol),
        Sub::Verify { system, tol } => base(Command::Verify, system, tol),
        Sub::Correlate { system, tol, pairs } => {
            let mut c = base(Command::Correlate, system, tol);
            c.validate()?;
            if let Some(p) = pairs {
                c.pairs = parse_pairs(p, period_of(&c.system)?)?;
                if c.pairs.is_empty() {
                    return Err(CliError::config("pairs", "no time pairs given"));
                }
            }
            c
        }
        Sub::Spectrum { system, tol, grid: g, detection: d } | Sub::DpoSpectrum { system, tol, grid: g, detection: d } => {
            let command = if matches!(sub, Sub::Spectrum { .. }) { Command::Spectrum } else { Command::DpoSpectrum };
            let mut c = base(command, system, tol);
            c.validate()?;
            c.detection = Some(detection(d)?);
            c.omega = grid(g, period_of(&c.system)?)?;
            c
        }
        Sub::DpoSweep { q_min, q_max, q_count, mode, tol } => RunConfig {
            schema_version: SCHEMA_VERSION,
            command: Command::DpoSweep,
            system: SystemSpec::Dpo { q: *q_min, sigma: 0.0, mode: *mode },
            tolerances: tol.tolerances(),
            omega: None,
            detection: None,
            pairs: Vec::new(),
            q_sweep: Some(QSweep { min: *q_min, max: *q_max, count: *q_count }),
        },
    };
    run::resolve(config)
}

fn execute(cli: &Cli) -> CliResult<run::Report> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::config("threads", "must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::config("threads", e.to_string()))?;
    }
    let config = match (&cli.config, &cli.command) {
        (Some(_), Some(_)) => return Err(CliError::config("config", "cannot be combined with a subcommand")),
        (Some(path), None) => run::resolve(RunConfig::load(path)?)?,
        (None, Some(sub)) => build_config(sub)?,
        (None, None) => return Err(CliError::config("command", "give a subcommand or --config")),
    };
    run::run(&config, &cli.output)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(report) => {
            for line in &report.lines {
                println!("{line}");
            }
            for file in &report.files {
                println!("wrote {}", file.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.report());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
