//! Line-oriented `key = value` configuration files.
//!
//! Keys mirror the [`SimConfig`] field names, plus the sweep keys
//! `sweep_variable`, `sweep_values` and `schemes` consumed by the experiment
//! harness. Lines starting with `#` and blank lines are ignored; unknown
//! keys are an error. `--set key=value` overrides reuse the same grammar and
//! are applied after the file, last writer wins.

use std::path::Path;

use thiserror::Error;

use crate::experiment::{SweepSpec, SweepVariable};
use crate::model::{validate_config, ConfigViolation, SchemeKind, SimConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value for `{key}`: {msg}")]
    BadValue {
        line: usize,
        key: String,
        msg: String,
    },
    #[error("invalid configuration: {}", format_violations(.0))]
    Invalid(Vec<ConfigViolation>),
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
}

fn format_violations(v: &[ConfigViolation]) -> String {
    v.iter()
        .map(|e| e.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// A parsed run description: scenario parameters plus the sweep design.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub cfg: SimConfig,
    pub sweep: SweepSpec,
}

impl Default for RunSpec {
    fn default() -> Self {
        let cfg = SimConfig::default();
        let sweep = SweepSpec::single_point(&cfg);
        RunSpec { cfg, sweep }
    }
}

impl RunSpec {
    /// Check every invariant of the assembled spec; called once after the
    /// file and all overrides are applied.
    pub fn validate(&self) -> Result<(), ConfigError> {
        validate_config(&self.cfg).map_err(ConfigError::Invalid)?;
        self.sweep.validate().map_err(ConfigError::InvalidSweep)
    }
}

fn parse_f64(line: usize, key: &str, value: &str) -> Result<f64, ConfigError> {
    value.parse::<f64>().map_err(|e| ConfigError::BadValue {
        line,
        key: key.to_string(),
        msg: e.to_string(),
    })
}

fn parse_usize(line: usize, key: &str, value: &str) -> Result<usize, ConfigError> {
    value.parse::<usize>().map_err(|e| ConfigError::BadValue {
        line,
        key: key.to_string(),
        msg: e.to_string(),
    })
}

fn parse_bool(line: usize, key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" | "on" | "1" => Ok(true),
        "false" | "off" | "0" => Ok(false),
        _ => Err(ConfigError::BadValue {
            line,
            key: key.to_string(),
            msg: format!("expected true/false/on/off, got `{value}`"),
        }),
    }
}

fn parse_scheme(line: usize, key: &str, value: &str) -> Result<SchemeKind, ConfigError> {
    SchemeKind::parse(value).ok_or_else(|| ConfigError::BadValue {
        line,
        key: key.to_string(),
        msg: format!(
            "unknown scheme `{value}` (expected one of {})",
            SchemeKind::ALL
                .iter()
                .map(|k| k.name())
                .collect::<Vec<_>>()
                .join(", ")
        ),
    })
}

/// Apply one `key = value` assignment. `line` is only used in error messages.
pub fn apply_kv(spec: &mut RunSpec, key: &str, value: &str, line: usize) -> Result<(), ConfigError> {
    // Keep the single-scheme default in sync unless `schemes` was given.
    match key {
        "area_radius_m" => spec.cfg.area_radius_m = parse_f64(line, key, value)?,
        "pathloss_exponent" => spec.cfg.pathloss_exponent = parse_f64(line, key, value)?,
        "min_distance_m" => spec.cfg.min_distance_m = parse_f64(line, key, value)?,
        "n_cells" => spec.cfg.n_cells = parse_usize(line, key, value)?,
        "n_dl_users" => spec.cfg.n_dl_users = parse_usize(line, key, value)?,
        "n_ul_users" => spec.cfg.n_ul_users = parse_usize(line, key, value)?,
        "p_dl_max_dbm" => spec.cfg.p_dl_max_dbm = parse_f64(line, key, value)?,
        "p_ul_max_dbm" => spec.cfg.p_ul_max_dbm = parse_f64(line, key, value)?,
        "si_channel_gain_db" => spec.cfg.si_channel_gain_db = parse_f64(line, key, value)?,
        "kappa_si_db" => spec.cfg.kappa_si_db = parse_f64(line, key, value)?,
        "kappa_du_db" => spec.cfg.kappa_du_db = parse_f64(line, key, value)?,
        "snr_ratio_db" => spec.cfg.snr_ratio_db = parse_f64(line, key, value)?,
        "r_min_bps_hz" => spec.cfg.r_min_bps_hz = parse_f64(line, key, value)?,
        "solver_tol" => spec.cfg.solver_tol = parse_f64(line, key, value)?,
        "n_drops" => {
            spec.cfg.n_drops = parse_usize(line, key, value)?;
            spec.sweep.n_drops = spec.cfg.n_drops;
        }
        "base_seed" => {
            spec.cfg.base_seed = value.parse::<u64>().map_err(|e| ConfigError::BadValue {
                line,
                key: key.to_string(),
                msg: e.to_string(),
            })?
        }
        "strict_decodability" => spec.cfg.strict_decodability = parse_bool(line, key, value)?,
        "vertex_budget" => spec.cfg.vertex_budget = parse_usize(line, key, value)?,
        "sca_restarts" => spec.cfg.sca_restarts = parse_usize(line, key, value)?,
        "scheme" => {
            spec.cfg.scheme = parse_scheme(line, key, value)?;
            if spec.sweep.schemes.len() <= 1 {
                spec.sweep.schemes = vec![spec.cfg.scheme];
            }
        }
        "schemes" => {
            let mut schemes = Vec::new();
            for part in value.split(',') {
                let part = part.trim();
                if part.is_empty() {
                    return Err(ConfigError::BadValue {
                        line,
                        key: key.to_string(),
                        msg: "empty scheme entry".into(),
                    });
                }
                schemes.push(parse_scheme(line, key, part)?);
            }
            if schemes.is_empty() {
                return Err(ConfigError::BadValue {
                    line,
                    key: key.to_string(),
                    msg: "expected at least one scheme".into(),
                });
            }
            spec.sweep.schemes = schemes;
        }
        "sweep_variable" => {
            if value == "none" {
                spec.sweep.variable = None;
            } else {
                spec.sweep.variable =
                    Some(SweepVariable::parse(value).ok_or_else(|| ConfigError::BadValue {
                        line,
                        key: key.to_string(),
                        msg: format!(
                            "unknown sweep variable `{value}` (expected snr_ratio_db, kappa_si_db or none)"
                        ),
                    })?);
            }
        }
        "sweep_values" => {
            let mut vals = Vec::new();
            for part in value.split(',') {
                let part = part.trim();
                if part.is_empty() {
                    return Err(ConfigError::BadValue {
                        line,
                        key: key.to_string(),
                        msg: "empty sweep value".into(),
                    });
                }
                vals.push(parse_f64(line, key, part)?);
            }
            spec.sweep.values = vals;
        }
        _ => {
            return Err(ConfigError::UnknownKey {
                line,
                key: key.to_string(),
            })
        }
    }
    Ok(())
}

/// Parse a whole config file body. Does not run final validation; call
/// [`RunSpec::validate`] after applying any overrides.
pub fn parse_config_str(text: &str) -> Result<RunSpec, ConfigError> {
    let mut spec = RunSpec::default();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::Syntax {
                line: line_no,
                text: line.to_string(),
            });
        };
        apply_kv(&mut spec, key.trim(), value.trim(), line_no)?;
    }
    Ok(spec)
}

/// Parse one `--set key=value` override expression.
pub fn apply_set_override(spec: &mut RunSpec, expr: &str) -> Result<(), ConfigError> {
    let Some((key, value)) = expr.split_once('=') else {
        return Err(ConfigError::Syntax {
            line: 0,
            text: expr.to_string(),
        });
    };
    apply_kv(spec, key.trim(), value.trim(), 0)
}

/// Load, parse and return a run spec from a file (unvalidated).
pub fn load_config(path: &Path) -> Result<RunSpec, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config_str(&text)
}
