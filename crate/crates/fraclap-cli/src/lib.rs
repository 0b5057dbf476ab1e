//! Configuration-driven experiment runner behind the `fraclap` binary.
//!
//! A run is described by an [`ExperimentConfig`] — read from a JSON file
//! or assembled from command-line flags, with flags overriding file
//! fields — and produces a [`Report`]: the resolved config echoed back,
//! one result row per requested point (input order), the build version,
//! and the wall time. Reports serialize to JSON; the CSV form keeps one
//! row per point with 17-significant-digit decimals, enough to
//! round-trip IEEE-754 doubles.

// Guards are written as !(x > 0.0) so NaN falls into the error branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use fraclap::bessel::PathConfig;
use fraclap::boundary::parse_function;
use fraclap::checks::{run_validation_suite, ValidationConfig};
use fraclap::fractional::{consistency_report, frac_laplacian_pv, neumann_trace, ConsistencyConfig};
use fraclap::kernel::extension_quadrature;
use fraclap::mc::{mc_extension, mc_extension_pathwise, McConfig};
use fraclap::{FracError, FracParams, HalfSpacePoint};

pub const BUILD_VERSION: &str = env!("FRACLAP_BUILD_VERSION");

/// How a run can fail, mapped to process exit codes by `main`.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad configuration: exit code 1.
    #[error("config error: {0}")]
    Config(String),
    /// Numerical failure (tolerance, budget, failed checks): exit 2.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl From<FracError> for CliError {
    fn from(e: FracError) -> Self {
        match e {
            FracError::InvalidInput(_) | FracError::GammaPole { .. } => {
                CliError::Config(e.to_string())
            }
            other => CliError::Numerical(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    ExtendQuad,
    ExtendMc,
    ExtendPath,
    Pv,
    Trace,
    Consistency,
    Validate,
}

impl Mode {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        serde_json::from_value(Value::String(s.to_string())).map_err(|_| {
            CliError::Config(format!(
                "unknown mode '{s}'; expected one of extend-quad, extend-mc, extend-path, \
                 pv, trace, consistency, validate"
            ))
        })
    }

    fn needs_interior_points(self) -> bool {
        matches!(self, Mode::ExtendQuad | Mode::ExtendMc | Mode::ExtendPath)
    }

    fn needs_boundary_points(self) -> bool {
        matches!(self, Mode::Pv | Mode::Trace | Mode::Consistency)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

/// One experiment, fully resolved. Serialized back into every report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub mode: Mode,
    #[serde(default = "default_n")]
    pub n: usize,
    pub s: f64,
    /// Registry expression, e.g. "cos:xi=2".
    #[serde(default = "default_function")]
    pub function: String,
    /// Extension modes: n horizontal coordinates plus the height y.
    /// Boundary modes (pv/trace/consistency): n coordinates.
    #[serde(default)]
    pub points: Vec<Vec<f64>>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_samples")]
    pub n_samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Time horizon for pathwise simulation budgets.
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    /// Trace heights; defaults to {0.2, 0.1, 0.05, 0.025}.
    #[serde(default = "default_y_seq")]
    pub y_seq: Vec<f64>,
    /// Full-strength validation when false.
    #[serde(default = "default_quick")]
    pub quick: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

fn default_n() -> usize {
    1
}
fn default_function() -> String {
    "const:c=1".to_string()
}
fn default_tol() -> f64 {
    1e-8
}
fn default_samples() -> usize {
    1_000_000
}
fn default_dt() -> f64 {
    1e-3
}
fn default_horizon() -> f64 {
    400.0
}
fn default_y_seq() -> Vec<f64> {
    vec![0.2, 0.1, 0.05, 0.025]
}
fn default_quick() -> bool {
    true
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| {
            // serde_json reports line and column of the offending field
            CliError::Config(format!("config JSON: {e}"))
        })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        FracParams::new(self.n, self.s).map_err(|e| CliError::Config(e.to_string()))?;
        if self.mode != Mode::Validate {
            parse_function(&self.function).map_err(|e| CliError::Config(e.to_string()))?;
            if self.points.is_empty() {
                return Err(CliError::Config(format!(
                    "mode {:?} needs at least one --point",
                    self.mode
                )));
            }
        }
        let want = if self.mode.needs_interior_points() {
            self.n + 1
        } else {
            self.n
        };
        if self.mode.needs_interior_points() || self.mode.needs_boundary_points() {
            for (i, pt) in self.points.iter().enumerate() {
                if pt.len() != want {
                    return Err(CliError::Config(format!(
                        "point #{i} has {} coordinates; mode {:?} with n = {} needs {want} \
                         (horizontal coordinates{})",
                        pt.len(),
                        self.mode,
                        self.n,
                        if self.mode.needs_interior_points() {
                            " plus the height y"
                        } else {
                            ""
                        }
                    )));
                }
                if pt.iter().any(|v| !v.is_finite()) {
                    return Err(CliError::Config(format!("point #{i} has non-finite entries")));
                }
            }
        }
        if !(self.tol > 0.0) {
            return Err(CliError::Config("tol must be > 0".into()));
        }
        if self.mode == Mode::ExtendMc && self.n_samples < 2 {
            return Err(CliError::Config("n_samples must be >= 2".into()));
        }
        Ok(())
    }
}

/// One row of a report, in input-point order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PointResult {
    /// Echo of the input point (coordinates as given).
    pub point: Vec<f64>,
    pub value: f64,
    /// Deterministic error bound where the route provides one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub err: Option<f64>,
    /// Monte Carlo standard error where applicable.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stderr: Option<f64>,
    pub diagnostics: Value,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub config: ExperimentConfig,
    pub results: Vec<PointResult>,
    pub version: String,
    pub wall_time_s: f64,
}

/// Executes the experiment and assembles the report (points processed
/// and emitted in input order).
pub fn run(config: &ExperimentConfig) -> Result<Report, CliError> {
    config.validate()?;
    let started = Instant::now();
    let params =
        FracParams::new(config.n, config.s).map_err(|e| CliError::Config(e.to_string()))?;
    let threads = threads_from_env()?;

    let mut results = Vec::new();
    match config.mode {
        Mode::Validate => {
            let vcfg = ValidationConfig {
                quick: config.quick,
                seed: config.seed.max(1),
                threads,
            };
            let outcomes = run_validation_suite(&vcfg);
            let failed = outcomes.iter().filter(|c| !c.passed).count();
            for c in &outcomes {
                results.push(PointResult {
                    point: vec![],
                    value: if c.passed { 1.0 } else { 0.0 },
                    err: None,
                    stderr: None,
                    diagnostics: json!({"name": c.name, "passed": c.passed, "detail": c.detail}),
                });
            }
            if failed > 0 {
                // Report still gets written by main before exiting 2.
                return Ok(Report {
                    config: config.clone(),
                    results,
                    version: BUILD_VERSION.to_string(),
                    wall_time_s: started.elapsed().as_secs_f64(),
                });
            }
        }
        mode => {
            let u = parse_function(&config.function).map_err(|e| CliError::Config(e.to_string()))?;
            for pt in &config.points {
                let row = match mode {
                    Mode::ExtendQuad => {
                        let at = split_point(pt, config.n)?;
                        let r = extension_quadrature(&u, &at, &params, config.tol)?;
                        PointResult {
                            point: pt.clone(),
                            value: r.value,
                            err: Some(r.err_estimate),
                            stderr: None,
                            diagnostics: json!({"evaluations": r.evaluations}),
                        }
                    }
                    Mode::ExtendMc => {
                        let at = split_point(pt, config.n)?;
                        let mc = McConfig::new(config.n_samples, config.seed).with_threads(threads);
                        let est = mc_extension(&u, &at, &params, &mc)?;
                        PointResult {
                            point: pt.clone(),
                            value: est.mean,
                            err: None,
                            stderr: Some(est.stderr),
                            diagnostics: json!({"n_samples": est.n_samples, "seed": est.seed}),
                        }
                    }
                    Mode::ExtendPath => {
                        let at = split_point(pt, config.n)?;
                        let path_cfg = PathConfig::standard(at.y(), config.dt, config.horizon)?;
                        let mc = McConfig::new(config.n_samples, config.seed).with_threads(threads);
                        let est = mc_extension_pathwise(&u, &at, &params, &path_cfg, &mc)?;
                        PointResult {
                            point: pt.clone(),
                            value: est.estimate.mean,
                            err: None,
                            stderr: Some(est.estimate.stderr),
                            diagnostics: json!({
                                "n_samples": est.estimate.n_samples,
                                "rejected_paths": est.rejected_paths,
                                "dt": config.dt,
                                "seed": est.estimate.seed,
                            }),
                        }
                    }
                    Mode::Pv => {
                        let r = frac_laplacian_pv(&u, pt, &params, config.tol)?;
                        PointResult {
                            point: pt.clone(),
                            value: r.value,
                            err: Some(r.err_estimate),
                            stderr: None,
                            diagnostics: json!({"evaluations": r.evaluations}),
                        }
                    }
                    Mode::Trace => {
                        let t =
                            neumann_trace(&u, pt, &params, &config.y_seq, config.tol.max(1e-4))?;
                        PointResult {
                            point: pt.clone(),
                            value: t.value,
                            err: Some(t.extrapolation_residual),
                            stderr: None,
                            diagnostics: json!({
                                "raw_sequence": t.raw_sequence,
                                "fitted_exponent": t.fitted_exponent,
                                "non_monotone": t.non_monotone,
                            }),
                        }
                    }
                    Mode::Consistency => {
                        let ccfg = ConsistencyConfig {
                            pv_tol: config.tol,
                            trace_tol: 1e-3,
                            y_seq: config.y_seq.clone(),
                            mc_samples: Some(config.n_samples),
                            seed: config.seed,
                        };
                        let rep = consistency_report(&u, pt, &params, &ccfg)?;
                        PointResult {
                            point: pt.clone(),
                            value: rep.pv_value,
                            err: Some(rep.abs_discrepancy),
                            stderr: None,
                            diagnostics: serde_json::to_value(&rep)
                                .map_err(|e| CliError::Numerical(e.to_string()))?,
                        }
                    }
                    Mode::Validate => unreachable!(),
                };
                results.push(row);
            }
        }
    }

    Ok(Report {
        config: config.clone(),
        results,
        version: BUILD_VERSION.to_string(),
        wall_time_s: started.elapsed().as_secs_f64(),
    })
}

/// Splits an extension-mode point row into (x, y).
fn split_point(pt: &[f64], n: usize) -> Result<HalfSpacePoint, CliError> {
    let (x, y) = pt.split_at(n);
    HalfSpacePoint::new(x.to_vec(), y[0]).map_err(|e| CliError::Config(e.to_string()))
}

/// Worker cap from FRACLAP_THREADS (unset or empty means all cores).
pub fn threads_from_env() -> Result<Option<usize>, CliError> {
    match std::env::var("FRACLAP_THREADS") {
        Ok(v) if !v.trim().is_empty() => {
            let k: usize = v.trim().parse().map_err(|_| {
                CliError::Config(format!("FRACLAP_THREADS must be a positive integer, got '{v}'"))
            })?;
            if k == 0 {
                return Err(CliError::Config("FRACLAP_THREADS must be >= 1".into()));
            }
            Ok(Some(k))
        }
        _ => Ok(None),
    }
}

/// Parses a `--point` flag: comma-separated coordinates.
pub fn parse_point(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Config(format!("bad coordinate '{p}' in point '{text}'")))
        })
        .collect()
}

/// CSV form: one row per result, 17 significant digits (round-trip safe
/// for f64). Multi-coordinate points are ';'-joined in the x column.
pub fn to_csv(report: &Report) -> String {
    let mut out = String::from("x,y,value,err\n");
    let n = report.config.n;
    for row in &report.results {
        let (x, y) = if row.point.len() > n {
            (&row.point[..n], row.point[n])
        } else {
            (&row.point[..], 0.0)
        };
        let xs = x
            .iter()
            .map(|v| format!("{v:.16e}"))
            .collect::<Vec<_>>()
            .join(";");
        let err = row.err.or(row.stderr).unwrap_or(0.0);
        let _ = writeln!(out, "{xs},{y:.16e},{:.16e},{err:.16e}", row.value);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_parsing() {
        assert_eq!(Mode::parse("extend-quad").unwrap(), Mode::ExtendQuad);
        assert_eq!(Mode::parse("validate").unwrap(), Mode::Validate);
        assert!(Mode::parse("extendquad").is_err());
    }

    #[test]
    fn point_parsing() {
        assert_eq!(parse_point("0,1").unwrap(), vec![0.0, 1.0]);
        assert_eq!(parse_point("0.5, -0.25, 2").unwrap(), vec![0.5, -0.25, 2.0]);
        assert!(parse_point("a,b").is_err());
    }

    #[test]
    fn config_validation_messages() {
        let cfg = ExperimentConfig {
            mode: Mode::ExtendQuad,
            n: 1,
            s: 0.5,
            function: "cos:xi=1".into(),
            points: vec![vec![0.0]],
            tol: 1e-8,
            n_samples: 100,
            seed: 0,
            dt: 1e-3,
            horizon: 100.0,
            y_seq: default_y_seq(),
            quick: true,
            out: None,
            format: None,
        };
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("point #0"), "{err}");

        let bad_json = r#"{"mode": "pv", "s": 2.0, "points": [[0.0]]}"#;
        let cfg = ExperimentConfig::from_json(bad_json).unwrap();
        assert!(cfg.validate().is_err());

        let malformed = r#"{"mode": "pv", s: }"#;
        let err = ExperimentConfig::from_json(malformed).unwrap_err().to_string();
        assert!(err.contains("line"), "{err}");
    }

    #[test]
    fn run_extend_quad_constant() {
        let cfg = ExperimentConfig {
            mode: Mode::ExtendQuad,
            n: 1,
            s: 0.3,
            function: "const:c=3".into(),
            points: vec![vec![0.0, 1.0]],
            tol: 1e-8,
            n_samples: 2,
            seed: 0,
            dt: 1e-3,
            horizon: 100.0,
            y_seq: default_y_seq(),
            quick: true,
            out: None,
            format: None,
        };
        let report = run(&cfg).unwrap();
        assert_eq!(report.results.len(), 1);
        assert!((report.results[0].value - 3.0).abs() < 1e-8);
        assert_eq!(report.version, BUILD_VERSION);
    }

    #[test]
    fn report_json_round_trip() {
        let cfg = ExperimentConfig {
            mode: Mode::Pv,
            n: 1,
            s: 0.5,
            function: "cos:xi=1".into(),
            points: vec![vec![0.0], vec![0.5]],
            tol: 1e-6,
            n_samples: 2,
            seed: 7,
            dt: 1e-3,
            horizon: 100.0,
            y_seq: default_y_seq(),
            quick: true,
            out: None,
            format: None,
        };
        let report = run(&cfg).unwrap();
        let text = serde_json::to_string_pretty(&report).unwrap();
        let back: Report = serde_json::from_str(&text).unwrap();
        back.config.validate().unwrap();
        assert_eq!(back.results.len(), 2);
        assert_eq!(back.results[0].value, report.results[0].value);
    }

    #[test]
    fn csv_round_trip_precision() {
        let cfg = ExperimentConfig {
            mode: Mode::ExtendQuad,
            n: 1,
            s: 0.5,
            function: "gauss".into(),
            points: vec![vec![0.3, 1.0]],
            tol: 1e-9,
            n_samples: 2,
            seed: 0,
            dt: 1e-3,
            horizon: 100.0,
            y_seq: default_y_seq(),
            quick: true,
            out: None,
            format: None,
        };
        let report = run(&cfg).unwrap();
        let csv = to_csv(&report);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "x,y,value,err");
        let fields: Vec<&str> = lines.next().unwrap().split(',').collect();
        let value: f64 = fields[2].parse().unwrap();
        assert_eq!(value, report.results[0].value, "17 digits round-trip");
    }
}
