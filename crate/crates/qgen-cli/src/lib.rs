//! Config parsing, report assembly and output for the `qgen` binary.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use qgen::bounds::BoundName;
use qgen::scenarios::{self, PointResult, ScenarioConfig, ScenarioKind};
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

pub mod selftest;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Io { path: PathBuf, message: String },

    #[error("{path}:{line}:{column}: {message}")]
    Syntax {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Invalid {
        path: PathBuf,
        #[source]
        source: qgen::Error,
    },
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error(transparent)]
    Core(#[from] qgen::Error),

    #[error("cannot write {path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => EXIT_CONFIG,
            RunError::Core(e) if e.is_numerical() => EXIT_NUMERICAL,
            RunError::Core(qgen::Error::InvalidMgfBound(_)) => EXIT_FAILED,
            RunError::Core(_) => EXIT_CONFIG,
            RunError::Io { .. } => EXIT_CONFIG,
        }
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(before.len(), |p| before.len() - p - 1) + 1;
    (line, column)
}

/// Parses TOML text, fills defaults and validates sizes against the enumeration cap.
pub fn parse_config_str(text: &str, path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
        ConfigError::Syntax {
            path: path.to_path_buf(),
            line,
            column,
            message: e.message().trim().to_string(),
        }
    })?;
    let invalid = |source| ConfigError::Invalid {
        path: path.to_path_buf(),
        source,
    };
    let cfg = cfg.with_defaults().map_err(invalid)?;
    cfg.validate().map_err(invalid)?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    parse_config_str(&text, path)
}

/// Compact JSON with sorted keys.
pub fn canonical_json(cfg: &ScenarioConfig) -> String {
    let value = serde_json::to_value(cfg).expect("config serializes");
    serde_json::to_string(&value).expect("value serializes")
}

pub fn config_hash(cfg: &ScenarioConfig) -> String {
    hex::encode(Sha256::digest(canonical_json(cfg).as_bytes()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
    Both,
}

impl Format {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "json" => Some(Format::Json),
            "csv" => Some(Format::Csv),
            "both" => Some(Format::Both),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RunReport {
    pub tool_version: String,
    pub config_hash: String,
    pub seed: u64,
    pub kind: ScenarioKind,
    pub command: String,
    pub bound: BoundName,
    pub axis: Option<String>,
    pub config: serde_json::Value,
    pub points: Vec<PointResult>,
}

impl RunReport {
    /// Points whose certificate fails.
    pub fn failing(&self) -> Vec<&PointResult> {
        self.points
            .iter()
            .filter(|p| p.certificate.as_ref().is_some_and(|c| !c.holds))
            .collect()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("axis,gen,qmiTerm,holevoTerm,miTerm,rhs,slack\n");
        for p in &self.points {
            let c = p.certificate.as_ref();
            let cells = [
                p.value,
                p.risks.map(|r| r.gen),
                c.map(|c| c.qmi_term),
                c.map(|c| c.holevo_term),
                c.map(|c| c.mi_term),
                c.map(|c| c.rhs),
                c.map(|c| c.slack),
            ];
            let row: Vec<String> = cells.iter().map(|v| v.map(fmt17).unwrap_or_default()).collect();
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }
}

/// 17 significant digits, '.' decimal point.
pub fn fmt17(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn chosen_bound(cfg: &ScenarioConfig, bound: Option<BoundName>) -> BoundName {
    bound.or(cfg.bound.name).unwrap_or(BoundName::Thm21)
}

fn report(cfg: &ScenarioConfig, command: &str, bound: BoundName, axis: Option<String>, points: Vec<PointResult>) -> RunReport {
    RunReport {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: config_hash(cfg),
        seed: cfg.seed,
        kind: cfg.kind,
        command: command.to_string(),
        bound,
        axis,
        config: serde_json::to_value(cfg).expect("config serializes"),
        points,
    }
}

/// One point at the configured parameters.
pub fn run_certify(cfg: &ScenarioConfig, bound: Option<BoundName>) -> Result<RunReport, RunError> {
    let bound = chosen_bound(cfg, bound);
    let point = scenarios::run_point(cfg, bound)?;
    Ok(report(cfg, "certify", bound, None, vec![point]))
}

/// Every (value, seed) point of the `[sweep]` section.
pub fn run_sweep(cfg: &ScenarioConfig, bound: Option<BoundName>) -> Result<RunReport, RunError> {
    let bound = chosen_bound(cfg, bound);
    let sweep = cfg.sweep.as_ref().ok_or_else(|| {
        RunError::Core(qgen::Error::InvalidConfig("the sweep command needs a [sweep] section".into()))
    })?;
    let seeds = sweep.seeds.clone().unwrap_or_else(|| vec![cfg.seed]);
    let result = scenarios::run_sweep(cfg, &sweep.axis, &sweep.values, &seeds, bound)?;
    Ok(report(cfg, "sweep", bound, Some(result.axis), result.points))
}

/// Writes report.json and/or report.csv under `dir`; returns the written paths.
pub fn emit_report(report: &RunReport, dir: &Path, format: Format) -> Result<Vec<PathBuf>, RunError> {
    let io = |path: &Path, e: std::io::Error| RunError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let mut written = Vec::new();
    if matches!(format, Format::Json | Format::Both) {
        let p = dir.join("report.json");
        fs::write(&p, report.to_json()).map_err(|e| io(&p, e))?;
        written.push(p);
    }
    if matches!(format, Format::Csv | Format::Both) {
        let p = dir.join("report.csv");
        fs::write(&p, report.to_csv()).map_err(|e| io(&p, e))?;
        written.push(p);
    }
    Ok(written)
}

/// Human-readable decomposition of a failing point.
pub fn describe_failure(p: &PointResult) -> String {
    let Some(c) = &p.certificate else {
        return "no certificate".into();
    };
    format!(
        "value={:?} seed={} gen={:.6e} qmiTerm={:.6e} holevoTerm={:.6e} miTerm={:.6e} alpha={:?} beta={:?} rhs+={:.6e} rhs-={:.6e} slack={:.6e}",
        p.value, p.seed, c.gen, c.qmi_term, c.holevo_term, c.mi_term, c.alpha, c.beta, c.rhs_plus, c.rhs_minus, c.slack
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_and_column_are_one_based() {
        assert_eq!(line_col("a\nbc\n", 3), (2, 2));
        assert_eq!(line_col("abc", 0), (1, 1));
    }

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(fmt17(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt17(-2.0), "-2.0000000000000000e0");
        assert_eq!(fmt17(0.1).parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn canonical_json_sorts_keys() {
        let cfg = parse_config_str("kind = \"random\"\nseed = 3\n", Path::new("x.toml")).unwrap();
        let s = canonical_json(&cfg);
        assert!(s.find("\"bound\"").unwrap() < s.find("\"kind\"").unwrap());
        assert_eq!(config_hash(&cfg).len(), 64);
    }
}
