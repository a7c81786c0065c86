//! Experiment orchestration for the `kklab` binary: flat TOML configs with
//! `--set key=value` overrides, the six stock experiments, CSV tables and
//! SVG plots.

pub mod plot;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use kklab::iteration::{self, IterationTrace};
use kklab::ledger::{self, ClassWeight, ConstantSet};
use kklab::par::{self, Execution};
use kklab::problem::{BoundClass, ClassKind, IterationParams, ProblemConfig};
use kklab::verify::{self, AuditParams, BoundReport, DecayFit};
use serde::Deserialize;
use thiserror::Error;
use toml::{Table, Value};

use crate::plot::Series;

/// Keys owned by the problem definition.
pub const PROBLEM_KEYS: &[&str] = &[
    "kind",
    "lambda",
    "ell",
    "k0",
    "k1",
    "C_F",
    "amplitude",
    "drift",
    "r5_strength",
    "n_points",
    "n_steps",
    "seed",
];

/// Keys owned by the experiment runner.
pub const RUN_KEYS: &[&str] = &[
    "experiment",
    "output_dir",
    "plot",
    "C",
    "C_err",
    "C_r",
    "lambda_ell",
    "n_samples",
    "audit_ell",
    "audit_lambdas",
    "audit_k_max",
    "fit_from",
    "decay_band",
    "r5_factor",
    "expect_escape",
];

/// The self-interaction comparison fits from this step on.
pub const R5_FIT_FROM: usize = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] kklab::Error),
    #[error("acceptance band missed: {0}")]
    Band(String),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl CliError {
    /// 1 for validation errors, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        use kklab::Error as E;
        match self {
            CliError::Config(_) => 1,
            CliError::Band(_) => 2,
            CliError::Core(e) => match e {
                E::DomainEscape { .. } | E::InsufficientSteps { .. } | E::Io(_) => 2,
                _ => 1,
            },
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Run,
    Decay,
    RemainderAudit,
    Ledger,
    R5Demo,
    Sweep,
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Experiment::Run => "run",
            Experiment::Decay => "decay",
            Experiment::RemainderAudit => "remainder-audit",
            Experiment::Ledger => "ledger",
            Experiment::R5Demo => "r5-demo",
            Experiment::Sweep => "sweep",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}
fn one() -> f64 {
    1.0
}
fn default_n_samples() -> usize {
    20
}
fn default_audit_ell() -> f64 {
    0.125
}
fn default_audit_lambdas() -> Vec<u32> {
    vec![16, 32, 64]
}
fn default_audit_k_max() -> usize {
    2
}
fn default_fit_from() -> usize {
    1
}
fn default_decay_band() -> f64 {
    0.15
}
fn default_r5_factor() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunKeys {
    #[serde(default)]
    experiment: Option<Experiment>,
    #[serde(default = "default_output_dir")]
    output_dir: PathBuf,
    #[serde(default)]
    plot: bool,
    #[serde(rename = "C", default = "one")]
    c: f64,
    #[serde(rename = "C_err", default = "one")]
    c_err: f64,
    #[serde(rename = "C_r", default = "one")]
    c_r: f64,
    #[serde(default)]
    lambda_ell: Option<OneOrMany>,
    #[serde(default = "default_n_samples")]
    n_samples: usize,
    #[serde(default = "default_audit_ell")]
    audit_ell: f64,
    #[serde(default = "default_audit_lambdas")]
    audit_lambdas: Vec<u32>,
    #[serde(default = "default_audit_k_max")]
    audit_k_max: usize,
    #[serde(default = "default_fit_from")]
    fit_from: usize,
    #[serde(default = "default_decay_band")]
    decay_band: f64,
    #[serde(default = "default_r5_factor")]
    r5_factor: f64,
    #[serde(default)]
    expect_escape: bool,
}

/// A fully parsed and validated experiment configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub experiment: Option<Experiment>,
    pub output_dir: PathBuf,
    pub plot: bool,
    /// ledger seed constants `C`, `C_err`, `C_r`
    pub c: f64,
    pub c_err: f64,
    pub c_r: f64,
    pub lambda_ell: Vec<f64>,
    pub n_samples: usize,
    pub audit: AuditParams,
    pub fit_from: usize,
    /// relative half-width of the accepted slope band around `-ln(λℓ)`
    pub decay_band: f64,
    /// largest accepted `|slope with r5| / |clean slope|`
    pub r5_factor: f64,
    pub expect_escape: bool,
}

/// Split `key=value`, reading the value as a TOML literal, a bare list
/// `a,b,c`, or failing both, a string.
pub fn parse_override(text: &str) -> CliResult<(String, Value)> {
    let (key, raw) = text
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{text}` is not of the form key=value")))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(CliError::Config(format!("override `{text}` has an empty key")));
    }
    let raw = raw.trim();
    let literal = |s: &str| s.parse::<Table>().ok().and_then(|mut t| t.remove("v"));
    let value = literal(&format!("v = {raw}"))
        .or_else(|| literal(&format!("v = [{raw}]")))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    Ok((key.to_string(), value))
}

fn deserialize_part<T: serde::de::DeserializeOwned>(table: Table) -> CliResult<T> {
    let text = toml::to_string(&table).map_err(|e| CliError::Config(e.to_string()))?;
    toml::from_str(&text).map_err(|e| CliError::Config(e.to_string()))
}

impl ExperimentConfig {
    /// Read `path` (if any), apply overrides in order, then validate.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> CliResult<Self> {
        let mut table = match path {
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
                text.parse::<Table>()
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => Table::new(),
        };
        for o in overrides {
            let (k, v) = parse_override(o)?;
            table.insert(k, v);
        }
        Self::from_table(table)
    }

    pub fn from_toml_str(text: &str) -> CliResult<Self> {
        let table = text.parse::<Table>().map_err(|e| CliError::Config(e.to_string()))?;
        Self::from_table(table)
    }

    pub fn from_table(table: Table) -> CliResult<Self> {
        let mut problem = Table::new();
        let mut run = Table::new();
        for (k, v) in table {
            if PROBLEM_KEYS.contains(&k.as_str()) {
                problem.insert(k, v);
            } else if RUN_KEYS.contains(&k.as_str()) {
                run.insert(k, v);
            } else {
                return Err(CliError::Config(format!("unknown key `{k}`")));
            }
        }
        let problem: ProblemConfig = deserialize_part(problem)?;
        let run: RunKeys = deserialize_part(run)?;
        let cfg = ExperimentConfig {
            problem,
            experiment: run.experiment,
            output_dir: run.output_dir,
            plot: run.plot,
            c: run.c,
            c_err: run.c_err,
            c_r: run.c_r,
            lambda_ell: match run.lambda_ell {
                None => Vec::new(),
                Some(OneOrMany::One(x)) => vec![x],
                Some(OneOrMany::Many(v)) => v,
            },
            n_samples: run.n_samples,
            audit: AuditParams {
                ell: run.audit_ell,
                lambdas: run.audit_lambdas,
                k_max: run.audit_k_max,
            },
            fit_from: run.fit_from,
            decay_band: run.decay_band,
            r5_factor: run.r5_factor,
            expect_escape: run.expect_escape,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> CliResult<()> {
        let bad = |key: &str, why: String| Err(CliError::Config(format!("`{key}`: {why}")));
        if let Err(e) = self.problem.params().validate() {
            return Err(CliError::Config(e.to_string()));
        }
        for (key, v) in [("C", self.c), ("C_err", self.c_err), ("C_r", self.c_r)] {
            if !(v.is_finite() && v > 0.0) {
                return bad(key, format!("must be positive, got {v}"));
            }
        }
        if !(self.problem.amplitude.is_finite() && self.problem.amplitude >= 0.0) {
            return bad("amplitude", format!("must be >= 0, got {}", self.problem.amplitude));
        }
        if !(self.problem.drift.is_finite() && self.problem.drift >= 0.0) {
            return bad("drift", format!("must be >= 0, got {}", self.problem.drift));
        }
        if !(self.problem.r5_strength.is_finite() && self.problem.r5_strength >= 0.0) {
            return bad("r5_strength", format!("must be >= 0, got {}", self.problem.r5_strength));
        }
        if self.n_samples < 10 {
            return bad("n_samples", format!("must be >= 10, got {}", self.n_samples));
        }
        if !(self.audit.ell > 0.0 && self.audit.ell < std::f64::consts::TAU) {
            return bad("audit_ell", format!("must lie in (0, 2π), got {}", self.audit.ell));
        }
        if self.audit.lambdas.is_empty() || self.audit.lambdas.contains(&0) {
            return bad("audit_lambdas", "needs positive frequencies".into());
        }
        if self.audit.k_max > kklab::gridfield::MAX_NORM_ORDER - 1 {
            return bad("audit_k_max", format!("must be < {}", kklab::gridfield::MAX_NORM_ORDER));
        }
        if self.fit_from == 0 {
            return bad("fit_from", "the first fitted step is at least 1".into());
        }
        if !(self.decay_band > 0.0 && self.decay_band < 1.0) {
            return bad("decay_band", format!("must lie in (0, 1), got {}", self.decay_band));
        }
        if !(self.r5_factor > 0.0 && self.r5_factor <= 1.0) {
            return bad("r5_factor", format!("must lie in (0, 1], got {}", self.r5_factor));
        }
        for &l in &self.lambda_ell {
            self.sweep_lambda(l)?;
        }
        Ok(())
    }

    /// `λ = λℓ / ℓ` at the configured `ℓ`; must be a positive integer.
    fn sweep_lambda(&self, lambda_ell: f64) -> CliResult<u32> {
        let lam = lambda_ell / self.problem.ell;
        let rounded = lam.round();
        if lambda_ell.is_nan() || lambda_ell <= 1.0 || rounded < 1.0 || (lam - rounded).abs() > 1e-9 * lam.max(1.0) {
            return Err(CliError::Config(format!(
                "`lambda_ell`: {lambda_ell} / ell = {lam} is not a positive integer frequency"
            )));
        }
        Ok(rounded as u32)
    }

    fn params(&self) -> IterationParams {
        self.problem.params()
    }
}

/// Write `bytes` to `path` through a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

/// Render `series` and write the SVG atomically.
pub fn emit_plot(series: &[Series], path: &Path) -> CliResult<()> {
    let svg = plot::render_svg(series)?;
    write_atomic(path, svg.as_bytes())?;
    Ok(())
}

/// What an experiment wrote and printed.
#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub summary: String,
}

impl Outcome {
    fn line(&mut self, text: impl AsRef<str>) {
        self.summary.push_str(text.as_ref());
        self.summary.push('\n');
    }

    fn write(&mut self, path: PathBuf, bytes: &[u8]) -> CliResult<()> {
        write_atomic(&path, bytes)?;
        self.files.push(path);
        Ok(())
    }

    fn plot(&mut self, path: PathBuf, series: &[Series]) -> CliResult<()> {
        emit_plot(series, &path)?;
        self.files.push(path);
        Ok(())
    }
}

fn to_bytes(f: impl FnOnce(&mut Vec<u8>) -> kklab::Result<()>) -> CliResult<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn error_series(trace: &IterationTrace, ks: impl IntoIterator<Item = usize>) -> Vec<Series> {
    ks.into_iter()
        .map(|k| Series::from_norms(format!("k={k}"), &trace.error_norms(k)))
        .collect()
}

fn escape_error(trace: &IterationTrace) -> Option<CliError> {
    match trace.stop {
        iteration::StopReason::Diverged { step, distance, radius } => {
            Some(CliError::Core(kklab::Error::DomainEscape { step, distance, radius }))
        }
        _ => None,
    }
}

fn slope_in_band(fit: &DecayFit, lambda_ell: f64, band: f64) -> bool {
    (fit.slope / -lambda_ell.ln() - 1.0).abs() <= band
}

/// Run `experiment` under `cfg`, writing into `cfg.output_dir`.
pub fn execute(experiment: Experiment, cfg: &ExperimentConfig) -> CliResult<Outcome> {
    let mut out = Outcome::default();
    match experiment {
        Experiment::Run => run_trace(cfg, &mut out)?,
        Experiment::Decay => run_decay(cfg, &mut out)?,
        Experiment::RemainderAudit => run_audit(cfg, &mut out)?,
        Experiment::Ledger => run_ledger(cfg, &mut out)?,
        Experiment::R5Demo => run_r5(cfg, &mut out)?,
        Experiment::Sweep => run_sweep(cfg, &mut out)?,
    }
    Ok(out)
}

fn check_escape(cfg: &ExperimentConfig, trace: &IterationTrace) -> CliResult<()> {
    match escape_error(trace) {
        Some(e) if !cfg.expect_escape => Err(e),
        _ => Ok(()),
    }
}

fn run_trace(cfg: &ExperimentConfig, out: &mut Outcome) -> CliResult<()> {
    let instance = cfg.problem.build()?;
    let trace = iteration::run(&instance, cfg.problem.n_steps)?;
    let dir = &cfg.output_dir;
    out.write(dir.join("trace.csv"), &to_bytes(|b| trace.write_csv(b))?)?;
    if cfg.plot {
        let ks = 0..=cfg.problem.k1;
        out.plot(dir.join("trace.svg"), &error_series(&trace, ks))?;
    }
    out.line(format!("steps completed {}", trace.last_step()));
    out.line(format!("stop {:?}", trace.stop));
    out.line(format!("max identity residual {:.3e}", trace.max_identity_residual()));
    out.line(format!(
        "hypotheses {} (max margin {:.6})",
        if trace.report.passes() { "pass" } else { "fail" },
        trace.report.max_margin()
    ));
    if let Some(note) = &trace.report.note {
        out.line(format!("ledger note: {note}"));
    }
    check_escape(cfg, &trace)
}

fn decay_fits(trace: &IterationTrace, k1: usize, fit_from: usize) -> CliResult<Vec<DecayFit>> {
    (0..=k1)
        .map(|k| verify::fit_decay(trace, k, fit_from).map_err(CliError::from))
        .collect()
}

fn run_decay(cfg: &ExperimentConfig, out: &mut Outcome) -> CliResult<()> {
    let instance = cfg.problem.build()?;
    let trace = iteration::run(&instance, cfg.problem.n_steps)?;
    check_escape(cfg, &trace)?;
    let dir = &cfg.output_dir;
    out.write(dir.join("trace.csv"), &to_bytes(|b| trace.write_csv(b))?)?;
    let fits = decay_fits(&trace, cfg.problem.k1, cfg.fit_from)?;
    out.write(dir.join("decay.csv"), &to_bytes(|b| verify::write_decay_fits_csv(&fits, b))?)?;
    if cfg.plot {
        out.plot(dir.join("decay.svg"), &error_series(&trace, 0..=cfg.problem.k1))?;
    }
    let big_l = cfg.params().lambda_ell();
    out.line(format!("lambda_ell {big_l}, reference slope {:.6}", -big_l.ln()));
    for f in &fits {
        out.line(format!("k={} slope {:.6} r^2 {:.6}", f.k, f.slope, f.r_squared));
    }
    if !slope_in_band(&fits[0], big_l, cfg.decay_band) {
        return Err(CliError::Band(format!(
            "k=0 slope {:.6} outside ±{} of {:.6}",
            fits[0].slope,
            cfg.decay_band,
            -big_l.ln()
        )));
    }
    Ok(())
}

fn audit_classes() -> Vec<BoundClass> {
    [ClassKind::R1, ClassKind::R2, ClassKind::R3, ClassKind::R4, ClassKind::R5]
        .into_iter()
        .map(|k| BoundClass::new(k).expect("R1-R5 need no orders"))
        .collect()
}

fn run_audit(cfg: &ExperimentConfig, out: &mut Outcome) -> CliResult<()> {
    let exec = Execution::default();
    let seed = cfg.problem.seed;
    let reports: Vec<BoundReport> = audit_classes()
        .into_iter()
        .map(|c| verify::verify_remainder_class(verify::stock_evaluator(c), c, &cfg.audit, cfg.n_samples, seed, exec))
        .collect::<kklab::Result<_>>()?;
    let r5 = BoundClass::new(ClassKind::R5)?;
    let r2 = BoundClass::new(ClassKind::R2)?;
    let control =
        verify::verify_remainder_class(verify::stock_evaluator(r5), r2, &cfg.audit, cfg.n_samples, seed, exec)?;
    let dir = &cfg.output_dir;
    out.write(dir.join("audit.csv"), &to_bytes(|b| verify::write_bound_reports_csv(&reports, b))?)?;
    out.write(dir.join("audit_control.csv"), &to_bytes(|b| control.write_csv(b))?)?;
    for r in &reports {
        let cs: Vec<String> = r.per_k_constants.iter().map(|c| format!("{c:.4}")).collect();
        out.line(format!("{} constants [{}] stable {}", r.class, cs.join(", "), r.stable()));
    }
    out.line(format!("control (r5 declared as R2) stable {}", control.stable()));
    let unstable: Vec<String> = reports.iter().filter(|r| !r.stable()).map(|r| r.class.to_string()).collect();
    if !unstable.is_empty() {
        return Err(CliError::Band(format!("unstable constants for {}", unstable.join(", "))));
    }
    if control.stable() {
        return Err(CliError::Band("misdeclared control reported stable".into()));
    }
    Ok(())
}

fn run_ledger(cfg: &ExperimentConfig, out: &mut Outcome) -> CliResult<()> {
    let params = cfg.params();
    let p = &cfg.problem;
    let mut classes: Vec<ClassWeight> = audit_classes()
        .into_iter()
        .take(4)
        .map(|class| ClassWeight { class, weight: 1.0 })
        .collect();
    if p.r5_strength > 0.0 {
        classes.push(ClassWeight {
            class: BoundClass::new(ClassKind::R5)?,
            weight: p.r5_strength,
        });
    }
    let loss = classes.iter().map(|c| c.class.derivative_loss()).max().unwrap_or(0);
    let cs = ConstantSet::new(cfg.c, cfg.c_err, cfg.c_r, p.c_f, ledger::leibniz_constants(p.k0 + 1), 1)?
        .with_classes(classes)
        .with_drift(p.drift);
    let rows = ledger::ledger_table(&cs, &params, p.n_steps)?;
    out.write(cfg.output_dir.join("ledger.csv"), &to_bytes(|b| ledger::write_table_csv(&rows, b))?)?;
    out.line(format!("threshold {}", ledger::threshold(&cs)));
    out.line(format!("lambda_ell {}", params.lambda_ell()));
    out.line(format!("derivative budget k0 >= {}", ledger::predict_budget(p.k1, p.n_steps, loss)?));
    out.summary.push_str(&ledger::format_table(&rows));
    Ok(())
}

fn run_r5(cfg: &ExperimentConfig, out: &mut Outcome) -> CliResult<()> {
    let p = &cfg.problem;
    let cmp = verify::demonstrate_r5_failure(&cfg.params(), p.amplitude, p.r5_strength, R5_FIT_FROM)?;
    check_escape(cfg, &cmp.clean_trace)?;
    let dir = &cfg.output_dir;
    out.write(dir.join("r5_clean_trace.csv"), &to_bytes(|b| cmp.clean_trace.write_csv(b))?)?;
    out.write(dir.join("r5_trace.csv"), &to_bytes(|b| cmp.r5_trace.write_csv(b))?)?;
    out.write(dir.join("r5_clean_decay.csv"), &to_bytes(|b| verify::write_decay_fits_csv(&[cmp.clean], b))?)?;
    out.write(dir.join("r5_decay.csv"), &to_bytes(|b| verify::write_decay_fits_csv(&[cmp.with_r5], b))?)?;
    if cfg.plot {
        let series = [
            Series::from_norms("clean k=0", &cmp.clean_trace.error_norms(0)),
            Series::from_norms("r5 k=0", &cmp.r5_trace.error_norms(0)),
        ];
        out.plot(dir.join("r5_demo.svg"), &series)?;
    }
    out.line(format!("clean slope {:.6}", cmp.clean.slope));
    out.line(format!("r5 slope {:.6}", cmp.with_r5.slope));
    if cmp.no_effect {
        out.line("no effect");
        return Ok(());
    }
    out.line(format!("slope ratio {:.6}", cmp.slope_ratio()));
    if cmp.slope_ratio() >= cfg.r5_factor {
        return Err(CliError::Band(format!(
            "slope ratio {:.6} not below {}",
            cmp.slope_ratio(),
            cfg.r5_factor
        )));
    }
    Ok(())
}

fn run_sweep(cfg: &ExperimentConfig, out: &mut Outcome) -> CliResult<()> {
    if cfg.lambda_ell.is_empty() {
        return Err(CliError::Config("`lambda_ell`: sweep needs at least one value".into()));
    }
    let problems: Vec<ProblemConfig> = cfg
        .lambda_ell
        .iter()
        .map(|&l| {
            let mut p = cfg.problem.clone();
            p.lambda = cfg.sweep_lambda(l)?;
            Ok(p)
        })
        .collect::<CliResult<_>>()?;
    let traces = par::try_map_indexed(Execution::default(), problems.len(), |i| {
        let p = &problems[i];
        iteration::run(&p.build()?, p.n_steps)
    })?;
    let mut missed = Vec::new();
    for ((l, p), trace) in cfg.lambda_ell.iter().zip(&problems).zip(&traces) {
        check_escape(cfg, trace)?;
        let dir = &cfg.output_dir;
        out.write(dir.join(format!("trace_lambda_ell_{l}.csv")), &to_bytes(|b| trace.write_csv(b))?)?;
        let fits = decay_fits(trace, p.k1, cfg.fit_from)?;
        out.write(
            dir.join(format!("decay_lambda_ell_{l}.csv")),
            &to_bytes(|b| verify::write_decay_fits_csv(&fits, b))?,
        )?;
        if cfg.plot {
            out.plot(dir.join(format!("decay_lambda_ell_{l}.svg")), &error_series(trace, 0..=p.k1))?;
        }
        let ok = slope_in_band(&fits[0], *l, cfg.decay_band);
        out.line(format!(
            "lambda_ell {l} (lambda {}) k=0 slope {:.6} reference {:.6} {}",
            p.lambda,
            fits[0].slope,
            -l.ln(),
            if ok { "ok" } else { "outside band" }
        ));
        if !ok {
            missed.push(l.to_string());
        }
    }
    if !missed.is_empty() {
        return Err(CliError::Band(format!("slopes outside band at lambda_ell {}", missed.join(", "))));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn override_values() {
        assert_eq!(parse_override("C_F=1").unwrap(), ("C_F".into(), Value::Integer(1)));
        assert_eq!(parse_override("ell = 0.5").unwrap().1, Value::Float(0.5));
        assert_eq!(
            parse_override("lambda_ell=64,128").unwrap().1,
            Value::Array(vec![Value::Integer(64), Value::Integer(128)])
        );
        assert_eq!(parse_override("kind=scalar").unwrap().1, Value::String("scalar".into()));
        assert!(parse_override("novalue").is_err());
    }

    #[test]
    fn unknown_key_is_named() {
        let err = ExperimentConfig::from_toml_str("lamda = 3\n").unwrap_err();
        assert!(err.to_string().contains("lamda"));
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn validation_happens_before_work() {
        for text in ["C_r = 0\n", "n_samples = 3\n", "lambda_ell = [63]\n", "ell = 7.0\n", "decay_band = 2\n"] {
            let err = ExperimentConfig::from_toml_str(text).unwrap_err();
            assert_eq!(err.exit_code(), 1, "{text}: {err}");
        }
    }

    #[test]
    fn defaults() {
        let cfg = ExperimentConfig::from_toml_str("").unwrap();
        assert_eq!(cfg.output_dir, PathBuf::from("out"));
        assert_eq!(cfg.problem, ProblemConfig::default());
        assert_eq!(cfg.audit, AuditParams::default());
        assert!(cfg.lambda_ell.is_empty());
    }

    #[test]
    fn single_sweep_value() {
        let cfg = ExperimentConfig::from_toml_str("lambda_ell = 64\n").unwrap();
        assert_eq!(cfg.lambda_ell, vec![64.0]);
    }

    #[test]
    fn exit_codes() {
        let escape = CliError::Core(kklab::Error::DomainEscape { step: 2, distance: 1.0, radius: 0.5 });
        assert_eq!(escape.exit_code(), 2);
        assert_eq!(CliError::Band("x".into()).exit_code(), 2);
        assert_eq!(CliError::Core(kklab::Error::InvalidArgument("x".into())).exit_code(), 1);
    }
}
