//! Building, running and checking one experiment.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use resolvent_core::iterate::{self, RunOptions, StopReason};
use resolvent_core::linalg;
use resolvent_core::rates::{self, Tolerance};
use resolvent_core::resolvent::{self, InequalityReport};
use resolvent_core::sampling;
use resolvent_core::splitting::{self, generate, kkt_residual, twin_deviation};
use resolvent_core::{
    Error as CoreError, MonotoneBlockOperator, NativeAlgorithm, RateBound, RateFormula,
    ResolventScheme, SplittingProblem, Vector,
};

use crate::config::{CheckName, ExperimentConfig, ProblemSpec, PropertyCheck, ReferenceSpec};

/// Distance constants are multiplied by this factor under `--negative-control`.
pub const NEGATIVE_CONTROL_FACTOR: f64 = 0.1;
/// KKT residual accepted for a reference point.
pub const KKT_TOL: f64 = 1e-7;
/// Relative scheme/native gap accepted by the twin check.
pub const TWIN_TOL: f64 = 1e-10;
/// Steps compared by the twin check.
pub const TWIN_STEPS: usize = 200;

#[derive(Debug)]
pub enum ExperimentError {
    Config(String),
    Core(CoreError),
    Io(String),
}

impl fmt::Display for ExperimentError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExperimentError::Config(m) => write!(f, "configuration error: {m}"),
            ExperimentError::Core(e) => write!(f, "{e}"),
            ExperimentError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl std::error::Error for ExperimentError {}

impl From<CoreError> for ExperimentError {
    fn from(e: CoreError) -> Self {
        ExperimentError::Core(e)
    }
}

type Result<T> = std::result::Result<T, ExperimentError>;

fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(ExperimentError::Config(msg.into()))
}

/// A validated experiment ready to run.
#[derive(Debug)]
pub struct Prepared {
    pub config: ExperimentConfig,
    pub scheme: ResolventScheme,
    pub problem: Option<SplittingProblem>,
    pub b0: Vector,
}

fn build_operator_scheme(spec: &crate::config::OperatorSpec) -> Result<ResolventScheme> {
    let op = if spec.certify_modulus {
        MonotoneBlockOperator::with_certified_modulus(
            spec.blocks.clone(),
            spec.linear_part.clone(),
            spec.shift.clone(),
        )?
    } else {
        MonotoneBlockOperator::new(spec.blocks.clone(), spec.linear_part.clone(), spec.shift.clone())?
    };
    let q = spec.metric.clone();
    Ok(match (&spec.correction, spec.gamma) {
        (Some(_), Some(_)) => return config_err("at `problem.operator`: give `correction` or `gamma`, not both"),
        (Some(m), None) => ResolventScheme::new(op, q, m.clone())?,
        (None, Some(g)) => ResolventScheme::relaxed(op, q, g)?,
        (None, None) => ResolventScheme::plain(op, q)?,
    })
}

/// `Some(c)` when `M = c I`.
fn correction_scalar(scheme: &ResolventScheme) -> Option<f64> {
    scheme.gamma().or_else(|| linalg::as_scaled_identity(scheme.correction()))
}

fn is_unit_correction(scheme: &ResolventScheme) -> bool {
    correction_scalar(scheme).is_some_and(|c| (c - 1.0).abs() <= 1e-12)
}

fn has_objective(scheme: &ResolventScheme) -> bool {
    scheme.op().objective_value(&Vector::zeros(scheme.dim())).is_some()
}

/// Constants of `formula` for this scheme with the given distance and optimal value.
fn rate_constants(formula: RateFormula, scheme: &ResolventScheme, d0: f64, h_star: f64) -> Vec<(&'static str, f64)> {
    let (_, s_max) = scheme.s_metric().sym_eigen_bounds();
    let (mgm_min, _) = scheme.corrected_g_metric().sym_eigen_bounds();
    let all = [
        ("d0", d0),
        ("gamma", correction_scalar(scheme).unwrap_or(f64::NAN)),
        ("lambda_max_s", s_max),
        ("lambda_min_mgm", mgm_min),
        ("h_star", h_star),
        ("q_norm", scheme.metric().op_norm()),
        ("mu", scheme.op().mu()),
    ];
    all.into_iter()
        .filter(|(n, _)| formula.required_constants().contains(n))
        .collect()
}

fn check_rate_applicable(formula: RateFormula, scheme: &ResolventScheme) -> Result<()> {
    let name = formula.name();
    match formula {
        RateFormula::GeneralizedSequential => {
            if !(scheme.s_metric().is_symmetric_pd() && scheme.corrected_g_metric().is_symmetric_pd()) {
                return config_err(format!(
                    "{name} needs S = Q M^-1 and M^-T G M^-1 symmetric positive definite"
                ));
            }
        }
        RateFormula::KmSequential | RateFormula::KmMuSequential | RateFormula::KmQLinear | RateFormula::KmRLinear => {
            if correction_scalar(scheme).is_none() {
                return config_err(format!("{name} needs a scalar relaxation M = gamma I"));
            }
        }
        _ => {
            if !is_unit_correction(scheme) {
                return config_err(format!("{name} needs the plain iteration M = I"));
            }
        }
    }
    if formula != RateFormula::GeneralizedSequential && !scheme.metric().is_symmetric_psd() {
        return config_err(format!("{name} needs Q symmetric positive semidefinite"));
    }
    if matches!(
        formula.channel(),
        rates::Channel::Objective | rates::Channel::ErgodicObjective
    ) && !has_objective(scheme)
    {
        return config_err(format!("{name} needs an objective (symmetric PSD linear part)"));
    }
    RateBound::new(formula, &rate_constants(formula, scheme, 1.0, 0.0))
        .map(|_| ())
        .map_err(|e| ExperimentError::Config(e.to_string()))
}

fn check_property_applicable(check: PropertyCheck, scheme: &ResolventScheme, splitting: bool) -> Result<()> {
    let name = check.name();
    let q = scheme.metric();
    let ok = match check {
        PropertyCheck::FirmNonexpansive => true,
        PropertyCheck::Averagedness => q.is_symmetric_psd() && correction_scalar(scheme).is_some(),
        PropertyCheck::StrongComplement => q.is_symmetric_pd() && scheme.op().mu() > 0.0,
        PropertyCheck::Fejer | PropertyCheck::ResidualDecrease => scheme.s_metric().is_symmetric(),
        PropertyCheck::DecreaseBracket => {
            is_unit_correction(scheme) && q.is_symmetric_psd() && has_objective(scheme)
        }
        PropertyCheck::Kkt | PropertyCheck::Twin => splitting,
    };
    if ok {
        Ok(())
    } else {
        config_err(format!("check `{name}` does not apply to this scheme ({})", check.describe()))
    }
}

/// Build the scheme and validate every requested check against it.
pub fn prepare(config: &ExperimentConfig) -> Result<Prepared> {
    let (scheme, problem) = match &config.problem {
        ProblemSpec::Generated { generator, form, dim, seed } => {
            let p = generate(*generator, *form, *dim, *seed)?;
            let alg = config.algorithm.as_ref().expect("checked at parse time");
            (splitting::build(&p, alg)?, Some(p))
        }
        ProblemSpec::Inline(p) => {
            let alg = config.algorithm.as_ref().expect("checked at parse time");
            (splitting::build(p, alg)?, Some(p.clone()))
        }
        ProblemSpec::Operator(spec) => (build_operator_scheme(spec)?, None),
    };
    for check in &config.checks {
        match check {
            CheckName::Rate(f) => check_rate_applicable(*f, &scheme)?,
            CheckName::Property(p) => check_property_applicable(*p, &scheme, problem.is_some())?,
        }
    }
    let mut rng = sampling::rng(config.run.seed);
    let b0 = sampling::normal_vector(&mut rng, scheme.dim()) * config.run.init_scale;
    Ok(Prepared {
        config: config.clone(),
        scheme,
        problem,
        b0,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// Smallest `allowed - observed` over everything the check inspected.
    pub worst_slack: f64,
    pub checked: usize,
    pub detail: serde_json::Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReferenceInfo {
    pub source: String,
    pub norm: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub name: String,
    pub algorithm: Option<String>,
    pub strategy: String,
    pub negative_control: bool,
    pub steps: usize,
    pub stop_reason: StopReason,
    pub final_residual: Option<f64>,
    pub reference: Option<ReferenceInfo>,
    pub checks: Vec<CheckResult>,
    pub passed: bool,
}

fn needs_reference(checks: &[CheckName]) -> bool {
    checks.iter().any(|c| {
        matches!(
            c,
            CheckName::Rate(_) | CheckName::Property(PropertyCheck::Fejer | PropertyCheck::Kkt)
        )
    })
}

fn load_reference(spec: &ReferenceSpec, p: &Prepared) -> Result<(Vector, String)> {
    match spec {
        ReferenceSpec::Analytic => {
            if p.scheme.op().as_affine().is_none() {
                return config_err("analytic reference needs an affine operator");
            }
            Ok((iterate::compute_reference(&p.scheme, &p.b0, p.config.run.max_iter)?, "analytic".into()))
        }
        ReferenceSpec::LongRun => Ok((
            iterate::compute_reference(&p.scheme, &p.b0, p.config.run.max_iter)?,
            "long_run".into(),
        )),
        ReferenceSpec::External(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| ExperimentError::Io(format!("{}: {e}", path.display())))?;
            let values: Vec<f64> = serde_json::from_str(&text)
                .map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))?;
            let v = Vector::from_vec(values);
            linalg::ensure_len("external reference", &v, p.scheme.dim())?;
            Ok((v, format!("external:{}", path.display())))
        }
    }
}

fn inequality_result(name: &str, reports: &[InequalityReport]) -> CheckResult {
    CheckResult {
        name: name.into(),
        passed: reports.iter().all(InequalityReport::passed),
        worst_slack: reports.iter().map(|r| r.worst_margin).fold(f64::INFINITY, f64::min),
        checked: reports.iter().map(|r| r.samples).sum(),
        detail: serde_json::to_value(reports).unwrap_or_default(),
    }
}

fn step_result(name: &str, audit: &rates::StepAudit) -> CheckResult {
    CheckResult {
        name: name.into(),
        passed: audit.passed(),
        worst_slack: audit.worst_margin,
        checked: audit.checked,
        detail: serde_json::to_value(audit).unwrap_or_default(),
    }
}

/// Run a prepared experiment and evaluate its checks.
pub fn execute(p: &Prepared, negative_control: bool) -> Result<(Report, iterate::IterationTrace)> {
    let cfg = &p.config;
    if negative_control && !cfg.checks.iter().any(|c| matches!(c, CheckName::Rate(_))) {
        return config_err("--negative-control needs at least one rate check");
    }
    let reference = if needs_reference(&cfg.checks) {
        Some(load_reference(&cfg.run.reference, p)?)
    } else {
        None
    };
    let mut opts = RunOptions::new(cfg.run.max_iter, cfg.run.eps);
    if let Some((r, _)) = &reference {
        opts = opts.with_reference(r.clone());
    }
    let trace = iterate::run(&p.scheme, &p.b0, &opts)?;
    let mut rng = sampling::rng(cfg.run.seed.wrapping_add(1));
    let samples = cfg.run.samples;
    let mut results = Vec::with_capacity(cfg.checks.len());
    for check in &cfg.checks {
        let result = match check {
            CheckName::Rate(formula) => {
                let (r, _) = reference.as_ref().expect("rate checks load a reference");
                let diff = &p.b0 - r;
                let d0 = if *formula == RateFormula::GeneralizedSequential {
                    p.scheme.s_metric().norm(&diff)?
                } else {
                    p.scheme.metric().norm(&diff)?
                };
                let h_star = p.scheme.op().objective_value(r).unwrap_or(0.0);
                let mut bound = RateBound::new(*formula, &rate_constants(*formula, &p.scheme, d0, h_star))?;
                if negative_control {
                    bound = bound.with_scaled_distance(NEGATIVE_CONTROL_FACTOR);
                }
                let rep = rates::check_trace(&bound, &trace, &p.scheme, Tolerance::default())?;
                CheckResult {
                    name: formula.name().into(),
                    passed: rep.passed(),
                    worst_slack: rep.worst_slack,
                    checked: rep.checked,
                    detail: serde_json::json!({
                        "validity": bound.validity,
                        "first_valid_k": bound.first_valid_k,
                        "report": rep,
                    }),
                }
            }
            CheckName::Property(prop) => match prop {
                PropertyCheck::FirmNonexpansive => inequality_result(
                    prop.name(),
                    &resolvent::check_partial_nonexpansive(&p.scheme, samples, &mut rng)?,
                ),
                PropertyCheck::Averagedness => inequality_result(
                    prop.name(),
                    &[resolvent::check_averagedness(&p.scheme, samples, &mut rng)?],
                ),
                PropertyCheck::StrongComplement => inequality_result(
                    prop.name(),
                    &[resolvent::check_strong_complement(&p.scheme, samples, &mut rng)?],
                ),
                PropertyCheck::Fejer => step_result(prop.name(), &rates::check_fejer(&trace, &p.scheme)?),
                PropertyCheck::ResidualDecrease => {
                    step_result(prop.name(), &rates::check_residual_decrease(&trace, &p.scheme)?)
                }
                PropertyCheck::DecreaseBracket => {
                    step_result(prop.name(), &rates::check_decrease_bracket(&trace, &p.scheme)?)
                }
                PropertyCheck::Kkt => {
                    let (r, _) = reference.as_ref().expect("kkt loads a reference");
                    let problem = p.problem.as_ref().expect("validated");
                    let alg = cfg.algorithm.as_ref().expect("validated");
                    let res = kkt_residual(problem, alg, r)?;
                    CheckResult {
                        name: prop.name().into(),
                        passed: res <= KKT_TOL,
                        worst_slack: KKT_TOL - res,
                        checked: 1,
                        detail: serde_json::json!({ "residual": res, "tolerance": KKT_TOL }),
                    }
                }
                PropertyCheck::Twin => {
                    let problem = p.problem.as_ref().expect("validated");
                    let alg = cfg.algorithm.as_ref().expect("validated");
                    let native = NativeAlgorithm::new(problem, alg)?;
                    let steps = cfg.run.max_iter.min(TWIN_STEPS);
                    let dev = twin_deviation(&p.scheme, &native, &p.b0, steps)?;
                    CheckResult {
                        name: prop.name().into(),
                        passed: dev <= TWIN_TOL,
                        worst_slack: TWIN_TOL - dev,
                        checked: steps,
                        detail: serde_json::json!({ "max_relative_gap": dev, "tolerance": TWIN_TOL }),
                    }
                }
            },
        };
        results.push(result);
    }
    let report = Report {
        name: cfg.name.clone(),
        algorithm: cfg.algorithm.as_ref().map(|a| a.name().to_string()),
        strategy: p.scheme.strategy().name().into(),
        negative_control,
        steps: trace.steps(),
        stop_reason: trace.stop_reason,
        final_residual: trace.final_residual(),
        reference: reference.map(|(r, source)| ReferenceInfo { source, norm: r.norm() }),
        passed: results.iter().all(|r| r.passed),
        checks: results,
    };
    Ok((report, trace))
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| ExperimentError::Io(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, contents).map_err(|e| ExperimentError::Io(format!("{}: {e}", path.display())))
}

/// Files written by an experiment.
#[derive(Debug, Clone)]
pub struct Outputs {
    pub trace: PathBuf,
    pub sidecar: PathBuf,
    pub report: PathBuf,
}

/// Prepare, run and write outputs under `root`.
pub fn run_experiment(config: &ExperimentConfig, root: &Path, negative_control: bool) -> Result<(Report, Outputs)> {
    let prepared = prepare(config)?;
    let (report, trace) = execute(&prepared, negative_control)?;
    let (trace_path, sidecar, report_path) = config.output_paths(root);
    write_file(&trace_path, trace.to_csv().as_bytes())?;
    let meta = serde_json::json!({ "name": config.name, "trace": trace.sidecar() });
    let json = |v: &serde_json::Value| serde_json::to_vec_pretty(v).expect("json values serialize");
    write_file(&sidecar, &json(&meta))?;
    let report_json = serde_json::to_value(&report).expect("report serializes");
    write_file(&report_path, &json(&report_json))?;
    Ok((
        report,
        Outputs {
            trace: trace_path,
            sidecar,
            report: report_path,
        },
    ))
}
