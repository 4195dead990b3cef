//! Externally supplied systems: `L(t)` and `B(t)` sampled on a uniform grid
//! over one period, interpolated with periodic cubic splines.
//!
//! File layout (text, `,` separated, `#` starts a comment line):
//!
//! ```text
//! # period = 3.14159
//! # dimension = 2
//! # noise_count = 2
//! # G = 1,0, 0,0, 0,0, 1,0
//! t, L11re, L11im, L12re, L12im, ..., B11re, B11im, ...
//! 0.0, ...
//! ```
//!
//! `G` lists the noise correlation row-major as re,im pairs. Each data row
//! holds `t`, then `L` row-major as re,im pairs, then `B` (dimension x
//! noise_count) row-major as re,im pairs. Rows must sit at `t_k = k T / N`;
//! a closing row at `t = T` is accepted and dropped. A single non-numeric
//! row is treated as a column header.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use crate::error::{FloquetError, Result};
use crate::floquet::PeriodicLinearSystem;
use crate::interp::{PeriodicSpline, SPLINE_ORDER};
use crate::linalg::{CMatrix, C64};

/// Relative tolerance on the time grid spacing.
const GRID_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SampledSystem {
    pub period: f64,
    pub dimension: usize,
    pub noise_count: usize,
    pub noise_correlation: CMatrix,
    /// One row per sample: `L` row-major, then `B` row-major.
    pub samples: Vec<Vec<C64>>,
}

fn invalid(line: usize, msg: impl std::fmt::Display) -> FloquetError {
    FloquetError::InvalidSystem(format!("sampled system, line {line}: {msg}"))
}

fn parse_numbers(line: usize, text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| invalid(line, format!("cannot parse number {s:?}"))))
        .collect()
}

fn pairs(values: &[f64]) -> Vec<C64> {
    values.chunks_exact(2).map(|p| C64::new(p[0], p[1])).collect()
}

impl SampledSystem {
    pub fn parse(text: &str) -> Result<Self> {
        let mut period = None;
        let mut dimension = None;
        let mut noise_count = None;
        let mut g_values = None;
        let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
        let mut header_seen = false;

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(comment) = trimmed.strip_prefix('#') {
                let Some((key, value)) = comment.split_once('=') else { continue };
                let value = value.trim();
                match key.trim() {
                    "period" => period = Some(value.parse::<f64>().map_err(|_| invalid(line, "period is not a number"))?),
                    "dimension" => dimension = Some(value.parse::<usize>().map_err(|_| invalid(line, "dimension is not a positive integer"))?),
                    "noise_count" => {
                        noise_count = Some(value.parse::<usize>().map_err(|_| invalid(line, "noise_count is not a positive integer"))?)
                    }
                    "G" => g_values = Some(parse_numbers(line, value)?),
                    _ => {}
                }
                continue;
            }
            match parse_numbers(line, trimmed) {
                Ok(v) => rows.push((line, v)),
                Err(_) if !header_seen && rows.is_empty() => header_seen = true,
                Err(e) => return Err(e),
            }
        }

        let period = period.ok_or_else(|| invalid(0, "missing `# period = ...`"))?;
        let n = dimension.ok_or_else(|| invalid(0, "missing `# dimension = ...`"))?;
        let m = noise_count.ok_or_else(|| invalid(0, "missing `# noise_count = ...`"))?;
        if !(period.is_finite() && period > 0.0) {
            return Err(invalid(0, format!("period must be positive, got {period}")));
        }
        if n == 0 || m == 0 {
            return Err(invalid(0, "dimension and noise_count must be positive"));
        }
        let g_values = g_values.ok_or_else(|| invalid(0, "missing `# G = ...`"))?;
        if g_values.len() != 2 * m * m {
            return Err(invalid(0, format!("G needs {} numbers, got {}", 2 * m * m, g_values.len())));
        }
        let noise_correlation = CMatrix::from_row_slice(m, m, &pairs(&g_values));

        let width = 1 + 2 * (n * n + n * m);
        for (line, row) in &rows {
            if row.len() != width {
                return Err(invalid(*line, format!("expected {width} columns, got {}", row.len())));
            }
        }
        if let Some((_, last)) = rows.last() {
            if rows.len() > 1 && (last[0] - period).abs() <= GRID_TOLERANCE * period {
                rows.pop();
            }
        }
        if rows.len() < 3 {
            return Err(invalid(0, format!("need at least 3 samples per period, got {}", rows.len())));
        }
        let count = rows.len() as f64;
        for (k, (line, row)) in rows.iter().enumerate() {
            let expected = k as f64 * period / count;
            if (row[0] - expected).abs() > GRID_TOLERANCE * period {
                return Err(invalid(*line, format!("time {} off the uniform grid (expected {expected})", row[0])));
            }
        }
        let samples = rows.into_iter().map(|(_, row)| pairs(&row[1..])).collect();
        Ok(Self { period, dimension: n, noise_count: m, noise_correlation, samples })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| FloquetError::InvalidArgument(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Sample `system` at `count` uniform points of one period.
    pub fn from_system(system: &PeriodicLinearSystem, count: usize) -> Self {
        let period = system.period();
        let samples = (0..count)
            .map(|k| {
                let t = k as f64 * period / count as f64;
                let l = system.drift(t);
                let b = system.noise_matrix(t);
                let mut row: Vec<C64> = l.transpose().iter().copied().collect();
                row.extend(b.transpose().iter().copied());
                row
            })
            .collect();
        Self {
            period,
            dimension: system.dimension(),
            noise_count: system.noise_count(),
            noise_correlation: system.noise_correlation().clone(),
            samples,
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# period = {:.16e}", self.period);
        let _ = writeln!(out, "# dimension = {}", self.dimension);
        let _ = writeln!(out, "# noise_count = {}", self.noise_count);
        let g: Vec<String> = self
            .noise_correlation
            .transpose()
            .iter()
            .map(|z| format!("{:.16e},{:.16e}", z.re, z.im))
            .collect();
        let _ = writeln!(out, "# G = {}", g.join(","));
        let mut header = vec!["t".to_string()];
        for (name, rows, cols) in [("L", self.dimension, self.dimension), ("B", self.dimension, self.noise_count)] {
            for i in 1..=rows {
                for j in 1..=cols {
                    header.push(format!("{name}{i}_{j}_re"));
                    header.push(format!("{name}{i}_{j}_im"));
                }
            }
        }
        let _ = writeln!(out, "{}", header.join(","));
        let count = self.samples.len() as f64;
        for (k, row) in self.samples.iter().enumerate() {
            let mut fields = vec![format!("{:.16e}", k as f64 * self.period / count)];
            fields.extend(row.iter().map(|z| format!("{:.16e},{:.16e}", z.re, z.im)));
            let _ = writeln!(out, "{}", fields.join(","));
        }
        out
    }

    pub fn interpolation_order(&self) -> usize {
        SPLINE_ORDER
    }

    /// Continuous-time system through periodic cubic-spline interpolation.
    pub fn to_system(&self) -> Result<PeriodicLinearSystem> {
        let (n, m) = (self.dimension, self.noise_count);
        let channels = n * n + n * m;
        let values: Vec<C64> = self.samples.iter().flatten().copied().collect();
        let spline = Arc::new(PeriodicSpline::new(self.period, channels, values)?);
        let drift_spline = Arc::clone(&spline);
        PeriodicLinearSystem::new(
            self.period,
            Arc::new(move |t| {
                let v = drift_spline.eval_vec(t);
                CMatrix::from_row_slice(n, n, &v[..n * n])
            }),
            Arc::new(move |t| {
                let v = spline.eval_vec(t);
                CMatrix::from_row_slice(n, m, &v[n * n..])
            }),
            self.noise_correlation.clone(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "\
# period = 2.0
# dimension = 1
# noise_count = 1
# G = 1,0
t, L_re, L_im, B_re, B_im
0.0, -1, 0, 1, 0
0.5, -1.5, 0, 1, 0
1.0, -1, 0, 1, 0
1.5, -0.5, 0, 1, 0
2.0, -1, 0, 1, 0
";

    #[test]
    fn parses_and_drops_closing_row() {
        let s = SampledSystem::parse(SMALL).unwrap();
        assert_eq!(s.samples.len(), 4);
        assert_eq!(s.samples[1], vec![C64::new(-1.5, 0.0), C64::new(1.0, 0.0)]);
        let sys = s.to_system().unwrap();
        assert!((sys.drift(0.5)[(0, 0)].re + 1.5).abs() < 1e-14);
        assert!((sys.drift(2.5)[(0, 0)].re + 1.5).abs() < 1e-14);
    }

    #[test]
    fn text_round_trip() {
        let s = SampledSystem::parse(SMALL).unwrap();
        assert_eq!(SampledSystem::parse(&s.to_text()).unwrap(), s);
    }

    #[test]
    fn rejects_bad_grid_and_width() {
        let off_grid = SMALL.replace("1.5, -0.5", "1.4, -0.5");
        assert!(SampledSystem::parse(&off_grid).unwrap_err().to_string().contains("line 9"));
        let short = SMALL.replace("0.5, -1.5, 0, 1, 0", "0.5, -1.5, 0, 1");
        assert!(SampledSystem::parse(&short).unwrap_err().to_string().contains("columns"));
        assert!(SampledSystem::parse(&SMALL.replace("# G = 1,0\n", "")).is_err());
    }
}
