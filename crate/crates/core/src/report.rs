//! Run configuration, command dispatch and report rendering for the CLI.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::fredholm_galerkin::{
    fredholm_det, fredholm_det_deflated, fredholm_det_piecewise, DeterminantEstimate, Level, Partition,
    DEFAULT_KERNEL_TOL,
};
use crate::gelfand_yaglom::{
    gy_degenerate_ratio_with_kernel, gy_ratio, solve_jacobi_ode, zeta_det_dirichlet_laplacian,
    zeta_det_dirichlet_power, zeta_det_jacobi, DEFAULT_STEPS,
};
use crate::heat_asymptotics::{heat_limit_validation, HeatCase};
use crate::model_geometry::JacobiSystem;
use crate::validation::{curvature_system, evaluation_jacobian_deviations, run_suite, ValidationRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    DetFredholm,
    DetGy,
    DetZeta,
    HeatLimit,
    EvalJacobian,
    Validate,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::DetFredholm,
        Command::DetGy,
        Command::DetZeta,
        Command::HeatLimit,
        Command::EvalJacobian,
        Command::Validate,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Command::DetFredholm => "det-fredholm",
            Command::DetGy => "det-gy",
            Command::DetZeta => "det-zeta",
            Command::HeatLimit => "heat-limit",
            Command::EvalJacobian => "eval-jacobian",
            Command::Validate => "validate",
        }
    }

    /// Parameter keys the command understands.
    pub fn known_parameters(self) -> &'static [&'static str] {
        match self {
            Command::DetFredholm => &["kappa", "r", "n", "modes", "filtration", "partition-n", "deflate", "kernel-tol"],
            Command::DetGy => &["kappa", "r", "n", "steps"],
            Command::DetZeta => &["kind", "t", "n", "m", "kappa", "r"],
            Command::HeatLimit => &["n", "radius", "case", "d"],
            Command::EvalJacobian => &["kappa", "r", "n", "partition-n"],
            Command::Validate => &[],
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown command '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
    Text,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "text" => Ok(Format::Text),
            other => Err(Error::Config(format!("unknown format '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    /// Normalized keys (lowercase, `-` separated) to raw values.
    pub parameters: BTreeMap<String, String>,
    pub output_path: Option<PathBuf>,
    pub format: Format,
    /// Adds wall-clock runtimes to the report, which makes it run-dependent.
    pub timings: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    command: Option<String>,
    format: Option<String>,
    out: Option<PathBuf>,
    timings: Option<bool>,
    #[serde(default)]
    parameters: BTreeMap<String, toml::Value>,
}

fn normalize_key(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('_', "-")
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        Self {
            command,
            parameters: BTreeMap::new(),
            output_path: None,
            format: Format::Json,
            timings: false,
        }
    }

    /// Parses a TOML file with top-level `command`, `format`, `out`, `timings`
    /// and a `[parameters]` table. `command` may be left out when `fallback`
    /// supplies one.
    pub fn from_toml_str(text: &str, fallback: Option<Command>) -> Result<Self> {
        let file: FileConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let command = match (file.command, fallback) {
            (_, Some(c)) => c,
            (Some(c), None) => c.parse()?,
            (None, None) => return Err(Error::Config("no command given".into())),
        };
        let mut config = Self::new(command);
        if let Some(f) = file.format {
            config.format = f.parse()?;
        }
        config.output_path = file.out;
        config.timings = file.timings.unwrap_or(false);
        for (key, value) in file.parameters {
            let raw = match value {
                toml::Value::String(s) => s,
                toml::Value::Array(items) => items
                    .iter()
                    .map(|v| match v {
                        toml::Value::String(s) => s.clone(),
                        other => other.to_string(),
                    })
                    .collect::<Vec<_>>()
                    .join(","),
                other => other.to_string(),
            };
            config.set(&key, &raw);
        }
        Ok(config)
    }

    /// Sets or overrides one parameter.
    pub fn set(&mut self, key: &str, value: &str) -> &mut Self {
        self.parameters.insert(normalize_key(key), value.trim().to_string());
        self
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.parameters.get(key).map(String::as_str)
    }

    fn require(&self, key: &str) -> Result<&str> {
        self.raw(key)
            .ok_or_else(|| Error::Config(format!("{} requires parameter '{key}'", self.command)))
    }

    pub fn real(&self, key: &str) -> Result<f64> {
        parse_real(key, self.require(key)?)
    }

    pub fn real_or(&self, key: &str, default: f64) -> Result<f64> {
        self.raw(key).map_or(Ok(default), |v| parse_real(key, v))
    }

    pub fn count(&self, key: &str) -> Result<usize> {
        parse_count(key, self.require(key)?)
    }

    pub fn count_or(&self, key: &str, default: usize) -> Result<usize> {
        self.raw(key).map_or(Ok(default), |v| parse_count(key, v))
    }

    pub fn counts_or(&self, key: &str, default: &[usize]) -> Result<Vec<usize>> {
        match self.raw(key) {
            None => Ok(default.to_vec()),
            Some(v) => v.split(',').map(|x| parse_count(key, x)).collect(),
        }
    }

    pub fn text_or<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.raw(key).unwrap_or(default)
    }

    /// Rejects unknown keys and malformed or non-finite numbers.
    pub fn validate(&self) -> Result<()> {
        let known = self.command.known_parameters();
        for (key, value) in &self.parameters {
            if !known.contains(&key.as_str()) {
                return Err(Error::Config(format!("{} does not take parameter '{key}'", self.command)));
            }
            match key.as_str() {
                "kappa" | "r" | "t" | "radius" | "d" | "kernel-tol" => {
                    parse_real(key, value)?;
                }
                "n" | "steps" | "m" => {
                    parse_count(key, value)?;
                }
                "modes" | "partition-n" => {
                    for part in value.split(',') {
                        parse_count(key, part)?;
                    }
                }
                "deflate" => {
                    parse_flag(key, value)?;
                }
                _ => {}
            }
        }
        let needs: &[&str] = match self.command {
            Command::DetFredholm | Command::DetGy | Command::EvalJacobian => &["kappa", "r", "n"],
            Command::DetZeta => match self.text_or("kind", "laplacian") {
                "laplacian" => &["t", "n"],
                "power" => &["t", "n", "m"],
                "jacobi" => &["kappa", "r", "n"],
                other => return Err(Error::Config(format!("unknown zeta kind '{other}'"))),
            },
            Command::HeatLimit => match self.text_or("case", "antipodal") {
                "antipodal" => &["n"],
                "nondegenerate" => &["n", "d"],
                other => return Err(Error::Config(format!("unknown heat case '{other}'"))),
            },
            Command::Validate => &[],
        };
        for key in needs {
            self.require(key)?;
        }
        Ok(())
    }
}

fn parse_real(key: &str, v: &str) -> Result<f64> {
    let x: f64 = v
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("parameter '{key}' = '{v}' is not a number")))?;
    if !x.is_finite() {
        return Err(Error::Config(format!("parameter '{key}' must be finite, got {v}")));
    }
    Ok(x)
}

fn parse_count(key: &str, v: &str) -> Result<usize> {
    v.trim()
        .parse()
        .map_err(|_| Error::Config(format!("parameter '{key}' = '{v}' is not a non-negative integer")))
}

fn parse_flag(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("parameter '{key}' = '{v}' is not a boolean"))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatPoint {
    pub t: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementPoint {
    pub segments: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Series {
    Determinant(Vec<Level>),
    Heat(Vec<HeatPoint>),
    Refinement(Vec<RefinementPoint>),
    Validation(Vec<ValidationRecord>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportError {
    pub name: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: Command,
    pub inputs: BTreeMap<String, Value>,
    pub value: Option<f64>,
    pub error_estimate: Option<f64>,
    pub route: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series: Option<Series>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub details: Option<BTreeMap<String, Value>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ReportError>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime_ms: Option<f64>,
}

impl Report {
    fn empty(config: &RunConfig) -> Self {
        let inputs = config
            .parameters
            .iter()
            .map(|(k, v)| {
                let value = v
                    .parse::<i64>()
                    .map(Value::from)
                    .or_else(|_| v.parse::<f64>().map(Value::from))
                    .unwrap_or_else(|_| Value::from(v.as_str()));
                (k.clone(), value)
            })
            .collect();
        Self {
            command: config.command,
            inputs,
            value: None,
            error_estimate: None,
            route: None,
            series: None,
            details: None,
            error: None,
            runtime_ms: None,
        }
    }

    /// True when the command produced a value and, for `validate`, every record passed.
    pub fn succeeded(&self) -> bool {
        if self.error.is_some() {
            return false;
        }
        match &self.series {
            Some(Series::Validation(records)) => records.iter().all(|r| r.passed),
            _ => true,
        }
    }

    /// 0 on success, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.succeeded() {
            0
        } else {
            1
        }
    }
}

struct Outcome {
    value: f64,
    error_estimate: Option<f64>,
    route: &'static str,
    series: Option<Series>,
    details: BTreeMap<String, Value>,
}

impl Outcome {
    fn new(value: f64, route: &'static str) -> Self {
        Self {
            value,
            error_estimate: None,
            route,
            series: None,
            details: BTreeMap::new(),
        }
    }

    fn detail(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.details.insert(key.to_string(), value.into());
        self
    }

    fn from_estimate(est: DeterminantEstimate, route: &'static str) -> Self {
        Self {
            value: est.extrapolated,
            error_estimate: Some(est.error_estimate),
            route,
            series: Some(Series::Determinant(est.levels)),
            details: BTreeMap::new(),
        }
        .detail("tail_correction", est.tail_correction)
    }
}

const DEFAULT_MODES: [usize; 4] = [64, 128, 256, 512];
const DEFAULT_SEGMENTS: [usize; 4] = [32, 64, 128, 256];
const DEFAULT_EVAL_SEGMENTS: [usize; 5] = [4, 8, 16, 32, 64];

fn geometry(config: &RunConfig) -> Result<JacobiSystem> {
    curvature_system(config.real("kappa")?, config.real("r")?, config.count("n")?)
}

fn det_fredholm(config: &RunConfig) -> Result<Outcome> {
    let sys = geometry(config)?;
    let deflate = config.raw("deflate").map_or(Ok(false), |v| parse_flag("deflate", v))?;
    match config.text_or("filtration", "fourier") {
        "fourier" if deflate => {
            let tol = config.real_or("kernel-tol", DEFAULT_KERNEL_TOL)?;
            let (est, dim) = fredholm_det_deflated(&sys, tol, &config.counts_or("modes", &DEFAULT_MODES)?)?;
            Ok(Outcome::from_estimate(est, "fourier-deflated").detail("kernel_dimension", dim))
        }
        "fourier" => Ok(Outcome::from_estimate(
            fredholm_det(&sys, &config.counts_or("modes", &DEFAULT_MODES)?)?,
            "fourier",
        )),
        "piecewise" if deflate => Err(Error::OutOfScope("deflation is only available in the Fourier filtration".into())),
        "piecewise" => {
            let partitions = config
                .counts_or("partition-n", &DEFAULT_SEGMENTS)?
                .into_iter()
                .map(Partition::uniform)
                .collect::<Result<Vec<_>>>()?;
            Ok(Outcome::from_estimate(fredholm_det_piecewise(&sys, &partitions)?, "piecewise-linear"))
        }
        other => Err(Error::Config(format!("unknown filtration '{other}'"))),
    }
}

fn det_gy(config: &RunConfig) -> Result<Outcome> {
    let sys = geometry(config)?;
    let steps = config.count_or("steps", DEFAULT_STEPS)?;
    let free = JacobiSystem::free(sys.n(), sys.length())?;
    let prop = solve_jacobi_ode(&sys, steps)?;
    match gy_ratio(&free, &sys) {
        Ok(v) => {
            let mut out = Outcome::new(v, "gelfand-yaglom");
            out.error_estimate = Some(prop.error_estimate);
            Ok(out.detail("wronskian_drift", prop.wronskian_drift()))
        }
        Err(Error::DegenerateRoute(_)) => {
            let (v, dim) = gy_degenerate_ratio_with_kernel(&sys, &free)?;
            let mut out = Outcome::new(v, "gelfand-yaglom-degenerate");
            out.error_estimate = Some(prop.error_estimate);
            Ok(out.detail("kernel_dimension", dim))
        }
        Err(e) => Err(e),
    }
}

fn det_zeta(config: &RunConfig) -> Result<Outcome> {
    match config.text_or("kind", "laplacian") {
        "laplacian" => {
            let z = zeta_det_dirichlet_laplacian(config.real("t")?, config.count("n")?)?;
            Ok(Outcome::new(z.value, "closed-form"))
        }
        "power" => {
            let m = config.count("m")?;
            let m = u32::try_from(m).map_err(|_| Error::Config(format!("power m = {m} is too large")))?;
            let v = zeta_det_dirichlet_power(config.real("t")?, config.count("n")?, m)?;
            Ok(Outcome::new(v, "zeta-function"))
        }
        "jacobi" => {
            let z = zeta_det_jacobi(&geometry(config)?)?;
            let route = match z.route {
                crate::gelfand_yaglom::ZetaRoute::ClosedForm => "closed-form",
                crate::gelfand_yaglom::ZetaRoute::GyRatio => "gy-ratio",
                crate::gelfand_yaglom::ZetaRoute::Deflated => "deflated",
            };
            Ok(Outcome::new(z.value, route).detail("excluded_zero_modes", z.excluded_zero_modes))
        }
        other => Err(Error::Config(format!("unknown zeta kind '{other}'"))),
    }
}

fn heat_limit(config: &RunConfig) -> Result<Outcome> {
    let n = config.count("n")?;
    let radius = config.real_or("radius", 1.0)?;
    let case = match config.text_or("case", "antipodal") {
        "antipodal" => HeatCase::Antipodal,
        "nondegenerate" => HeatCase::Nondegenerate {
            distance: config.real("d")?,
        },
        other => return Err(Error::Config(format!("unknown heat case '{other}'"))),
    };
    let rep = heat_limit_validation(n, radius, case)?;
    let rows = rep.richardson.len();
    let spread = if rows >= 2 {
        let row = &rep.richardson[rows.min(3) - 1];
        let prev = &rep.richardson[rows.min(3) - 2];
        (row.last().unwrap() - prev.last().unwrap()).abs()
    } else {
        f64::NAN
    };
    let mut out = Outcome::new(rep.extrapolated_oracle, "spectral-sum-richardson")
        .detail("predicted", rep.predicted)
        .detail("relative_deviation", rep.rel_deviation)
        .detail("k", rep.k);
    out.error_estimate = Some(spread);
    out.series = Some(Series::Heat(
        rep.oracle_values.iter().map(|&(t, ratio)| HeatPoint { t, ratio }).collect(),
    ));
    Ok(out)
}

fn eval_jacobian(config: &RunConfig) -> Result<Outcome> {
    let segments = config.counts_or("partition-n", &DEFAULT_EVAL_SEGMENTS)?;
    let deviations = evaluation_jacobian_deviations(config.real("kappa")?, config.real("r")?, config.count("n")?, &segments)?;
    let series: Vec<RefinementPoint> = segments
        .iter()
        .zip(&deviations)
        .map(|(&segments, d)| RefinementPoint { segments, value: 1.0 + d })
        .collect();
    let mut out = Outcome::new(series.last().map_or(f64::NAN, |p| p.value), "gram-determinant");
    if deviations.len() >= 2 && deviations.iter().all(|d| *d != 0.0) {
        let x: Vec<f64> = segments.iter().map(|&m| (1.0 / m as f64).ln()).collect();
        let y: Vec<f64> = deviations.iter().map(|d| d.abs().ln()).collect();
        out = out.detail("fitted_order", crate::series::fitted_slope(&x, &y));
    }
    out.series = Some(Series::Refinement(series));
    Ok(out)
}

fn validate(config: &RunConfig) -> Outcome {
    let records = run_suite(config.timings);
    let passed = records.iter().filter(|r| r.passed).count();
    let mut out = Outcome::new(passed as f64, "validation-suite")
        .detail("passed", passed)
        .detail("failed", records.len() - passed)
        .detail("total", records.len());
    out.series = Some(Series::Validation(records));
    out
}

/// Dispatches the configured command. Module errors are captured in the
/// report rather than returned.
pub fn run(config: &RunConfig) -> Report {
    let start = config.timings.then(Instant::now);
    let mut report = Report::empty(config);
    let outcome = config.validate().and_then(|()| match config.command {
        Command::DetFredholm => det_fredholm(config),
        Command::DetGy => det_gy(config),
        Command::DetZeta => det_zeta(config),
        Command::HeatLimit => heat_limit(config),
        Command::EvalJacobian => eval_jacobian(config),
        Command::Validate => Ok(validate(config)),
    });
    match outcome {
        Ok(o) => {
            report.value = Some(o.value);
            report.error_estimate = o.error_estimate;
            report.route = Some(o.route.to_string());
            report.series = o.series;
            report.details = (!o.details.is_empty()).then_some(o.details);
        }
        Err(e) => {
            report.error = Some(ReportError {
                name: e.name().to_string(),
                message: e.to_string(),
            });
        }
    }
    report.runtime_ms = start.map(|s| s.elapsed().as_secs_f64() * 1e3);
    report
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

fn render_csv(report: &Report) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let f = |x: f64| format!("{x:.17e}");
    match &report.series {
        Some(Series::Determinant(levels)) => {
            // same columns as DeterminantEstimate::write_csv
            w.write_record(["level", "value", "tail_correction", "extrapolated"]).map_err(csv_error)?;
            for l in levels {
                w.write_record([l.refinement.to_string(), f(l.value), f(l.tail_correction), f(l.corrected)])
                    .map_err(csv_error)?;
            }
        }
        Some(Series::Heat(points)) => {
            w.write_record(["t", "ratio"]).map_err(csv_error)?;
            for p in points {
                w.write_record([f(p.t), f(p.ratio)]).map_err(csv_error)?;
            }
        }
        Some(Series::Refinement(points)) => {
            w.write_record(["segments", "value"]).map_err(csv_error)?;
            for p in points {
                w.write_record([p.segments.to_string(), f(p.value)]).map_err(csv_error)?;
            }
        }
        Some(Series::Validation(records)) => {
            w.write_record(["check_name", "expected", "computed", "tolerance", "passed"]).map_err(csv_error)?;
            for r in records {
                w.write_record([
                    r.check_name.clone(),
                    f(r.expected),
                    f(r.computed),
                    f(r.tolerance),
                    r.passed.to_string(),
                ])
                .map_err(csv_error)?;
            }
        }
        None => {
            w.write_record(["command", "value", "error_estimate", "route", "error"]).map_err(csv_error)?;
            w.write_record([
                report.command.to_string(),
                report.value.map(f).unwrap_or_default(),
                report.error_estimate.map(f).unwrap_or_default(),
                report.route.clone().unwrap_or_default(),
                report.error.as_ref().map(|e| e.name.clone()).unwrap_or_default(),
            ])
            .map_err(csv_error)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

fn render_text(report: &Report) -> String {
    let mut out = String::new();
    let mut line = |s: String| {
        out.push_str(&s);
        out.push('\n');
    };
    if let Some(Series::Validation(records)) = &report.series {
        for r in records {
            let status = if r.passed { "PASS" } else { "FAIL" };
            let mut s = format!(
                "{status} {:<40} expected {:>14.8e} computed {:>14.8e} tol {:.0e}",
                r.check_name, r.expected, r.computed, r.tolerance
            );
            if let Some(note) = &r.note {
                s.push_str(&format!(" ({note})"));
            }
            line(s);
        }
        let passed = records.iter().filter(|r| r.passed).count();
        line(format!("validate: {passed} passed, {} failed", records.len() - passed));
        return out;
    }
    line(format!("command: {}", report.command));
    for (k, v) in &report.inputs {
        line(format!("  {k} = {v}"));
    }
    if let Some(e) = &report.error {
        line(format!("error: {}: {}", e.name, e.message));
        return out;
    }
    if let Some(v) = report.value {
        line(format!("value: {v:.12}"));
    }
    if let Some(e) = report.error_estimate {
        line(format!("error estimate: {e:.3e}"));
    }
    if let Some(r) = &report.route {
        line(format!("route: {r}"));
    }
    if let Some(details) = &report.details {
        for (k, v) in details {
            line(format!("  {k}: {v}"));
        }
    }
    if let Some(ms) = report.runtime_ms {
        line(format!("runtime: {ms:.1} ms"));
    }
    out
}

pub fn render(report: &Report, format: Format) -> Result<String> {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(report).map_err(|e| Error::Io(e.to_string()))?;
            s.push('\n');
            Ok(s)
        }
        Format::Csv => render_csv(report),
        Format::Text => Ok(render_text(report)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(cmd: Command, params: &[(&str, &str)]) -> RunConfig {
        let mut c = RunConfig::new(cmd);
        for (k, v) in params {
            c.set(k, v);
        }
        c
    }

    #[test]
    fn det_fredholm_sphere_quarter() {
        let r = run(&config(Command::DetFredholm, &[("kappa", "1"), ("r", "1.5707963"), ("n", "3")]));
        assert!(r.error.is_none(), "{:?}", r.error);
        assert!((r.value.unwrap() - 0.4052847).abs() < 1e-6);
        assert_eq!(r.route.as_deref(), Some("fourier"));
    }

    #[test]
    fn det_zeta_laplacian() {
        let r = run(&config(Command::DetZeta, &[("kind", "laplacian"), ("t", "1"), ("n", "3")]));
        assert_eq!(r.value, Some(8.0));
    }

    #[test]
    fn module_errors_are_named() {
        let r = run(&config(Command::DetFredholm, &[("kappa", "1"), ("r", "3.14159265358979"), ("n", "2")]));
        assert_eq!(r.error.as_ref().unwrap().name, "DegenerateOperator");
        assert_eq!(r.exit_code(), 1);
        let r = run(&config(Command::DetGy, &[("kappa", "1"), ("n", "2")]));
        assert_eq!(r.error.unwrap().name, "Config");
        let r = run(&config(Command::DetGy, &[("kappa", "inf"), ("r", "1"), ("n", "2")]));
        assert_eq!(r.error.unwrap().name, "Config");
        let r = run(&config(Command::DetGy, &[("kappa", "1"), ("r", "1"), ("n", "2"), ("bogus", "1")]));
        assert_eq!(r.error.unwrap().name, "Config");
    }

    #[test]
    fn flags_override_file() {
        let text = "command = \"det-gy\"\nformat = \"csv\"\n[parameters]\nkappa = 1.0\nr = 0.5\nn = 2\n";
        let mut c = RunConfig::from_toml_str(text, None).unwrap();
        assert_eq!(c.command, Command::DetGy);
        assert_eq!(c.format, Format::Csv);
        c.set("r", "1.0");
        assert_eq!(c.real("r").unwrap(), 1.0);
        assert_eq!(c.count("n").unwrap(), 2);
        let c = RunConfig::from_toml_str("[parameters]\nmodes = [8, 16]\n", Some(Command::DetFredholm)).unwrap();
        assert_eq!(c.counts_or("modes", &[]).unwrap(), vec![8, 16]);
        assert!(RunConfig::from_toml_str("[parameters]\n", None).is_err());
    }

    #[test]
    fn json_is_deterministic_and_round_trips() {
        let c = config(Command::DetGy, &[("kappa", "-1"), ("r", "1"), ("n", "2")]);
        let a = render(&run(&c), Format::Json).unwrap();
        let b = render(&run(&c), Format::Json).unwrap();
        assert_eq!(a, b);
        let back: Report = serde_json::from_str(&a).unwrap();
        assert!((back.value.unwrap() - 1f64.sinh()).abs() < 1e-9);
        assert!(!a.contains("runtime_ms"));
    }

    #[test]
    fn csv_columns() {
        let c = config(Command::DetFredholm, &[("kappa", "1"), ("r", "1"), ("n", "2"), ("modes", "8,16")]);
        let s = render(&run(&c), Format::Csv).unwrap();
        assert!(s.starts_with("level,value,tail_correction,extrapolated\n8,"));
        assert_eq!(s.lines().count(), 3);
    }

    #[test]
    fn command_names_round_trip() {
        for c in Command::ALL {
            assert_eq!(c.as_str().parse::<Command>().unwrap(), c);
            assert_eq!(serde_json::to_value(c).unwrap(), Value::from(c.as_str()));
        }
        assert!("nope".parse::<Command>().is_err());
    }
}
