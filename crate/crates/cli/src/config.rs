//! Resolved run configuration. Every run writes it back as `config.json`;
//! passing that file to `--config` repeats the run.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use floquet_spectra::dpo::{DpoMode, DpoParameters};
use floquet_spectra::spectra::DetectionMode;
use floquet_spectra::IntegrationTolerances;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_OMEGA_COUNT: usize = 601;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Decompose,
    Correlate,
    Spectrum,
    DpoSpectrum,
    DpoSweep,
    Verify,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SystemSpec {
    Dpo { q: f64, sigma: f64, mode: DpoMode },
    File { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmegaGrid {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QSweep {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub schema_version: u32,
    pub command: Command,
    pub system: SystemSpec,
    pub tolerances: IntegrationTolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<OmegaGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detection: Option<DetectionMode>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pairs: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_sweep: Option<QSweep>,
}

fn finite(field: &str, x: f64) -> CliResult<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(CliError::config(field, format!("must be finite, got {x}")))
    }
}

fn positive(field: &str, x: f64) -> CliResult<f64> {
    if finite(field, x)? > 0.0 {
        Ok(x)
    } else {
        Err(CliError::config(field, format!("must be positive, got {x}")))
    }
}

/// Default frequency window `[-3 pi / T, 3 pi / T]`, which is `[-3Q, 3Q]` for the oscillator.
pub fn default_omega_grid(period: f64) -> OmegaGrid {
    let w = 3.0 * PI / period;
    OmegaGrid { min: -w, max: w, count: DEFAULT_OMEGA_COUNT }
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let config: RunConfig =
            serde_json::from_str(&text).map_err(|e| CliError::config("config", format!("{}: {e}", path.display())))?;
        if config.schema_version != SCHEMA_VERSION {
            return Err(CliError::config(
                "schema_version",
                format!("unsupported version {} (expected {SCHEMA_VERSION})", config.schema_version),
            ));
        }
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn validate(&self) -> CliResult<()> {
        let tol = self.tolerances;
        positive("tol-rel", tol.relative)?;
        positive("tol-abs", tol.absolute)?;
        if let Some(s) = self.q_sweep {
            positive("q-min", s.min)?;
            positive("q-max", s.max)?;
            if s.count == 0 {
                return Err(CliError::config("q-count", "must be at least 1"));
            }
            if s.max < s.min {
                return Err(CliError::config("q-max", format!("{} is below q-min {}", s.max, s.min)));
            }
        }
        match &self.system {
            SystemSpec::Dpo { q, sigma, .. } => {
                positive("q", *q)?;
                if !(finite("sigma", *sigma)? >= 0.0) {
                    return Err(CliError::config("sigma", format!("must be non-negative, got {sigma}")));
                }
            }
            SystemSpec::File { path } => {
                if matches!(self.command, Command::DpoSpectrum) {
                    return Err(CliError::config("system-file", "dpo-spectrum uses the built-in oscillator"));
                }
                if path.as_os_str().is_empty() {
                    return Err(CliError::config("system-file", "empty path"));
                }
            }
        }
        if let Some(g) = self.omega {
            finite("omega-min", g.min)?;
            finite("omega-max", g.max)?;
            if g.count == 0 {
                return Err(CliError::config("omega-count", "must be at least 1"));
            }
            if g.max < g.min {
                return Err(CliError::config("omega-max", format!("{} is below omega-min {}", g.max, g.min)));
            }
            if g.count > 1 && g.max == g.min {
                return Err(CliError::config("omega-max", "equals omega-min with more than one point"));
            }
        }
        if let Some(DetectionMode::Finite { periods, remainder }) = self.detection {
            if periods == 0 {
                return Err(CliError::config("kd", "must be at least 1"));
            }
            if !(finite("tr", remainder)? >= 0.0) {
                return Err(CliError::config("tr", format!("must be non-negative, got {remainder}")));
            }
        }
        for (i, [t, tp]) in self.pairs.iter().enumerate() {
            if !(t.is_finite() && tp.is_finite() && *t >= 0.0 && *tp >= 0.0) {
                return Err(CliError::config("pairs", format!("pair {} has a negative or non-finite time", i + 1)));
            }
        }
        Ok(())
    }

    pub fn dpo(&self) -> CliResult<(DpoParameters, DpoMode)> {
        match self.system {
            SystemSpec::Dpo { q, sigma, mode } => Ok((DpoParameters::new(q, sigma)?, mode)),
            SystemSpec::File { .. } => Err(CliError::config("system-file", "this command needs the built-in oscillator")),
        }
    }
}

/// Parse `a:b,c:d` time pairs; a trailing `T` means multiples of the period.
pub fn parse_pairs(text: &str, period: f64) -> CliResult<Vec<[f64; 2]>> {
    let time = |s: &str| -> CliResult<f64> {
        let s = s.trim();
        let (num, scale) = match s.strip_suffix('T') {
            Some("") => ("1", period),
            Some(n) => (n, period),
            None => (s, 1.0),
        };
        num.trim()
            .parse::<f64>()
            .map(|v| v * scale)
            .map_err(|_| CliError::config("pairs", format!("cannot parse time `{s}`")))
    };
    text.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let (a, b) = p.split_once(':').ok_or_else(|| CliError::config("pairs", format!("`{p}` is not of the form t:t'")))?;
            Ok([time(a)?, time(b)?])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> RunConfig {
        RunConfig {
            schema_version: SCHEMA_VERSION,
            command: Command::DpoSpectrum,
            system: SystemSpec::Dpo { q: 3.0, sigma: 0.5, mode: DpoMode::Full },
            tolerances: IntegrationTolerances::default(),
            omega: Some(OmegaGrid { min: -1.0, max: 1.0, count: 3 }),
            detection: Some(DetectionMode::Infinite),
            pairs: Vec::new(),
            q_sweep: None,
        }
    }

    #[test]
    fn json_round_trip() {
        let c = base();
        assert_eq!(serde_json::from_str::<RunConfig>(&c.to_json()).unwrap(), c);
    }

    #[test]
    fn negative_sigma_names_field() {
        let mut c = base();
        c.system = SystemSpec::Dpo { q: 3.0, sigma: -0.1, mode: DpoMode::Full };
        match c.validate() {
            Err(CliError::Config { field, .. }) => assert_eq!(field, "sigma"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn pairs_in_periods() {
        let p = parse_pairs("2.3T:0.7T, 0:1.5, T:0", 2.0).unwrap();
        assert_eq!(p, vec![[4.6, 1.4], [0.0, 1.5], [2.0, 0.0]]);
        assert!(parse_pairs("1;2", 1.0).is_err());
    }
}
