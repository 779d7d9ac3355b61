//! Evaluatable convergence-rate bounds and comparators against iteration traces.
//!
//! Every empirical value a comparator uses is recomputed from the stored iterates.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::iterate::{IterationTrace, PairwiseSum};
use crate::linalg::{self, Vector};
use crate::metric::Metric;
use crate::resolvent::ResolventScheme;

/// Golden ratio `(1 + sqrt 5) / 2`.
pub const GOLDEN: f64 = 1.618_033_988_749_895;
/// Largest relaxation accepted by `km_r_linear`; the prefactor blows up as `gamma -> 1`.
pub const KM_R_LINEAR_GAMMA_CAP: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateFormula {
    PicardSequential,
    KmSequential,
    GeneralizedSequential,
    ObjectiveErgodic,
    ObjectiveNonergodic,
    QLinearDistance,
    RLinearResidual,
    StrongObjective,
    StrongObjectiveRlinear,
    KmMuSequential,
    KmQLinear,
    KmRLinear,
}

/// Trace quantity a bound constrains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    /// `||b^{k+1} - b^k||_Q`, `k >= 0`.
    ResidualQ,
    /// `||b^{k+1} - b^k||_S`, `k >= 0`.
    ResidualS,
    /// `h(b^k) - h*`, `k >= 1`.
    Objective,
    /// `h(mean(b^1..b^k)) - h*`, `k >= 1`.
    ErgodicObjective,
    /// `||b^k - b*||_Q`, `k >= 0`.
    DistanceQ,
}

impl RateFormula {
    pub const ALL: [RateFormula; 12] = [
        RateFormula::PicardSequential,
        RateFormula::KmSequential,
        RateFormula::GeneralizedSequential,
        RateFormula::ObjectiveErgodic,
        RateFormula::ObjectiveNonergodic,
        RateFormula::QLinearDistance,
        RateFormula::RLinearResidual,
        RateFormula::StrongObjective,
        RateFormula::StrongObjectiveRlinear,
        RateFormula::KmMuSequential,
        RateFormula::KmQLinear,
        RateFormula::KmRLinear,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RateFormula::PicardSequential => "picard_sequential",
            RateFormula::KmSequential => "km_sequential",
            RateFormula::GeneralizedSequential => "generalized_sequential",
            RateFormula::ObjectiveErgodic => "objective_ergodic",
            RateFormula::ObjectiveNonergodic => "objective_nonergodic",
            RateFormula::QLinearDistance => "q_linear_distance",
            RateFormula::RLinearResidual => "r_linear_residual",
            RateFormula::StrongObjective => "strong_objective",
            RateFormula::StrongObjectiveRlinear => "strong_objective_rlinear",
            RateFormula::KmMuSequential => "km_mu_sequential",
            RateFormula::KmQLinear => "km_q_linear",
            RateFormula::KmRLinear => "km_r_linear",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name() == name)
    }

    /// Constant names the formula reads.
    pub fn required_constants(self) -> &'static [&'static str] {
        match self {
            RateFormula::PicardSequential => &["d0"],
            RateFormula::KmSequential => &["gamma", "d0"],
            RateFormula::GeneralizedSequential => &["lambda_max_s", "lambda_min_mgm", "d0"],
            RateFormula::ObjectiveErgodic | RateFormula::ObjectiveNonergodic => &["d0", "h_star"],
            RateFormula::QLinearDistance | RateFormula::RLinearResidual => &["q_norm", "mu", "d0"],
            RateFormula::StrongObjective | RateFormula::StrongObjectiveRlinear => {
                &["q_norm", "mu", "d0", "h_star"]
            }
            RateFormula::KmMuSequential | RateFormula::KmQLinear | RateFormula::KmRLinear => {
                &["q_norm", "mu", "gamma", "d0"]
            }
        }
    }

    pub fn channel(self) -> Channel {
        match self {
            RateFormula::PicardSequential
            | RateFormula::KmSequential
            | RateFormula::RLinearResidual
            | RateFormula::KmMuSequential
            | RateFormula::KmRLinear => Channel::ResidualQ,
            RateFormula::GeneralizedSequential => Channel::ResidualS,
            RateFormula::ObjectiveErgodic => Channel::ErgodicObjective,
            RateFormula::ObjectiveNonergodic
            | RateFormula::StrongObjective
            | RateFormula::StrongObjectiveRlinear => Channel::Objective,
            RateFormula::QLinearDistance | RateFormula::KmQLinear => Channel::DistanceQ,
        }
    }

    /// Short description of the formula.
    pub fn describe(self) -> &'static str {
        match self {
            RateFormula::PicardSequential => "||b^{k+1}-b^k||_Q <= d0 / sqrt(k+1)",
            RateFormula::KmSequential => "||b^{k+1}-b^k||_Q <= sqrt(gamma/(2-gamma)) d0 / sqrt(k+1)",
            RateFormula::GeneralizedSequential => {
                "||b^{k+1}-b^k||_S <= sqrt(lmax(S)/lmin(M^-T G M^-1)) d0_S / sqrt(k+1)"
            }
            RateFormula::ObjectiveErgodic => "h(mean b^1..b^k) - h* <= d0^2 / (2k)",
            RateFormula::ObjectiveNonergodic => "h(b^k) - h* <= d0^2 / (2k)",
            RateFormula::QLinearDistance => "||b^k-b*||_Q <= (|Q|/(|Q|+2mu))^{k/2} d0",
            RateFormula::RLinearResidual => {
                "||b^k-b^{k+1}||_Q <= sqrt(2mu/(2mu+|Q|)) (1+2mu/|Q|)^{-(k+1)/4} d0"
            }
            RateFormula::StrongObjective => {
                "h(b^k) - h* <= mu/(2|Q|) / ((1+mu/|Q|)^k - 1) d0^2"
            }
            RateFormula::StrongObjectiveRlinear => {
                "h(b^k) - h* <= mu/(2|Q|) (1+mu/|Q|)^{-k/2} d0^2"
            }
            RateFormula::KmMuSequential => {
                "||b^{k+1}-b^k||_Q <= sqrt(gamma(2mu+|Q|)/(2mu(1-gamma)+(2-gamma)|Q|)) d0 / sqrt(k+1)"
            }
            RateFormula::KmQLinear => "||b^k-b*||_Q <= (1 - 2 gamma mu/(2mu+|Q|))^{k/2} d0",
            RateFormula::KmRLinear => {
                "||b^k-b^{k+1}||_Q <= gamma/(1-gamma) sqrt(1+|Q|/(2mu)) (1-2 gamma mu/(2mu+|Q|))^{(k+1)/4} d0"
            }
        }
    }
}

/// A rate formula with its constants and the first index at which it is asserted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateBound {
    pub formula: RateFormula,
    pub constants: BTreeMap<String, f64>,
    pub validity: String,
    /// Smallest `k` where the bound holds (local r-linear thresholds, `k >= 1` for objectives).
    pub first_valid_k: usize,
}

fn not_applicable(formula: RateFormula, predicate: impl Into<String>) -> Error {
    Error::BoundNotApplicable {
        formula: formula.name().into(),
        predicate: predicate.into(),
    }
}

/// `ceil(x)` clamped to `[0, usize::MAX]`, tolerant of `x` landing a hair above an integer.
fn ceil_index(x: f64) -> usize {
    if !(x > 0.0) {
        return 0;
    }
    let r = x.round();
    let c = if (x - r).abs() <= 1e-12 * r.max(1.0) { r } else { x.ceil() };
    if c >= usize::MAX as f64 {
        usize::MAX
    } else {
        c as usize
    }
}

impl RateBound {
    /// Build a bound, checking every required constant and the formula's parameter ranges.
    pub fn new(formula: RateFormula, constants: &[(&str, f64)]) -> Result<Self> {
        let constants: BTreeMap<String, f64> =
            constants.iter().map(|(k, v)| ((*k).to_string(), *v)).collect();
        for &name in formula.required_constants() {
            match constants.get(name) {
                None => return Err(Error::param(name, format!("required by {}", formula.name()))),
                Some(v) if !v.is_finite() => return Err(Error::param(name, "must be finite")),
                Some(v) if name != "h_star" && *v < 0.0 => {
                    return Err(Error::param(name, "must be nonnegative"))
                }
                _ => {}
            }
        }
        let c = |k: &str| constants[k];
        let (validity, first_valid_k) = match formula {
            RateFormula::PicardSequential => ("any k >= 0".to_string(), 0),
            RateFormula::KmSequential => {
                let g = c("gamma");
                if !(g > 0.0 && g < 2.0) {
                    return Err(not_applicable(formula, "gamma in ]0, 2["));
                }
                ("gamma in ]0, 2[".to_string(), 0)
            }
            RateFormula::GeneralizedSequential => {
                if !(c("lambda_min_mgm") > 0.0 && c("lambda_max_s") > 0.0) {
                    return Err(not_applicable(
                        formula,
                        "S and M^-T G M^-1 symmetric positive definite",
                    ));
                }
                ("S, G symmetric positive definite".to_string(), 0)
            }
            RateFormula::ObjectiveErgodic | RateFormula::ObjectiveNonergodic => {
                ("k >= 1".to_string(), 1)
            }
            RateFormula::QLinearDistance => {
                if !(c("q_norm") > 0.0) {
                    return Err(not_applicable(formula, "||Q|| > 0"));
                }
                ("mu >= 0".to_string(), 0)
            }
            RateFormula::RLinearResidual => {
                let (q, mu) = (c("q_norm"), c("mu"));
                if !(q > 0.0 && mu > 0.0) {
                    return Err(not_applicable(formula, "mu > 0 and ||Q|| > 0"));
                }
                if mu >= (5f64.sqrt() - 1.0) / 4.0 * q {
                    ("mu >= (sqrt5-1)/4 ||Q||: global".to_string(), 0)
                } else {
                    let t = GOLDEN.ln() / (1.0 + 2.0 * mu / q).sqrt().ln() - 1.0;
                    (format!("k >= ln(golden)/ln sqrt(1+2mu/||Q||) - 1 = {t}"), ceil_index(t))
                }
            }
            RateFormula::StrongObjective => {
                if !(c("q_norm") > 0.0 && c("mu") > 0.0) {
                    return Err(not_applicable(formula, "mu > 0 and ||Q|| > 0"));
                }
                ("mu > 0, k >= 1".to_string(), 1)
            }
            RateFormula::StrongObjectiveRlinear => {
                let (q, mu) = (c("q_norm"), c("mu"));
                if !(q > 0.0 && mu > 0.0) {
                    return Err(not_applicable(formula, "mu > 0 and ||Q|| > 0"));
                }
                if mu >= GOLDEN * q {
                    ("mu >= golden ||Q||: global".to_string(), 0)
                } else {
                    let t = GOLDEN.ln() / (1.0 + mu / q).sqrt().ln();
                    (format!("k >= ln(golden)/ln sqrt(1+mu/||Q||) = {t}"), ceil_index(t))
                }
            }
            RateFormula::KmMuSequential | RateFormula::KmQLinear => {
                let (q, mu, g) = (c("q_norm"), c("mu"), c("gamma"));
                if !(q > 0.0) {
                    return Err(not_applicable(formula, "||Q|| > 0"));
                }
                let upper = 1.0 + q / (2.0 * mu + q);
                if !(g > 0.0 && g < upper) {
                    return Err(not_applicable(
                        formula,
                        format!("gamma in ]0, 1 + ||Q||/(2mu+||Q||)[ = ]0, {upper}["),
                    ));
                }
                (format!("gamma in ]0, {upper}["), 0)
            }
            RateFormula::KmRLinear => {
                let (q, mu, g) = (c("q_norm"), c("mu"), c("gamma"));
                if !(q > 0.0 && mu > 0.0) {
                    return Err(not_applicable(formula, "mu > 0 and ||Q|| > 0"));
                }
                if !(g > 0.0 && g <= KM_R_LINEAR_GAMMA_CAP) {
                    return Err(not_applicable(
                        formula,
                        format!("gamma in ]0, {KM_R_LINEAR_GAMMA_CAP}]"),
                    ));
                }
                let lower = (3.0 - 5f64.sqrt()) / 4.0 * (2.0 + q / mu);
                if q < (5f64.sqrt() + 1.0) * mu && g > lower {
                    (format!("gamma in ]{lower}, 1[ and ||Q|| < (sqrt5+1) mu: global"), 0)
                } else {
                    let ratio = (2.0 * mu + q) / (2.0 * (1.0 - g) * mu + q);
                    let t = GOLDEN.ln() / ratio.sqrt().ln() - 1.0;
                    (format!("k >= ln(golden)/ln sqrt((2mu+|Q|)/(2(1-gamma)mu+|Q|)) - 1 = {t}"), ceil_index(t))
                }
            }
        };
        Ok(RateBound {
            formula,
            constants,
            validity,
            first_valid_k,
        })
    }

    pub fn constant(&self, name: &str) -> f64 {
        self.constants.get(name).copied().unwrap_or(f64::NAN)
    }

    /// Same bound with the distance constant scaled by `factor` (negative controls).
    pub fn with_scaled_distance(&self, factor: f64) -> Self {
        let mut out = self.clone();
        if let Some(d) = out.constants.get_mut("d0") {
            *d *= factor;
        }
        out
    }

    /// Bound value at iteration `k`.
    pub fn bound_at(&self, k: usize) -> Result<f64> {
        if k < self.first_valid_k {
            return Err(not_applicable(
                self.formula,
                format!("k = {k} below validity threshold ({})", self.validity),
            ));
        }
        let c = |n: &str| self.constants[n];
        let kf = k as f64;
        let d0 = c("d0");
        let value = match self.formula {
            RateFormula::PicardSequential => d0 / (kf + 1.0).sqrt(),
            RateFormula::KmSequential => {
                let g = c("gamma");
                (g / (2.0 - g)).sqrt() * d0 / (kf + 1.0).sqrt()
            }
            RateFormula::GeneralizedSequential => {
                (c("lambda_max_s") / c("lambda_min_mgm")).sqrt() * d0 / (kf + 1.0).sqrt()
            }
            RateFormula::ObjectiveErgodic | RateFormula::ObjectiveNonergodic => {
                d0 * d0 / (2.0 * kf)
            }
            RateFormula::QLinearDistance => {
                let q = c("q_norm");
                (q / (q + 2.0 * c("mu"))).powf(kf / 2.0) * d0
            }
            RateFormula::RLinearResidual => {
                let (q, mu) = (c("q_norm"), c("mu"));
                (2.0 * mu / (2.0 * mu + q)).sqrt() * (1.0 + 2.0 * mu / q).powf(-(kf + 1.0) / 4.0) * d0
            }
            RateFormula::StrongObjective => {
                let (q, mu) = (c("q_norm"), c("mu"));
                // (1+x)^k - 1 via exp_m1 keeps precision for small mu/||Q||
                let denom = (kf * (mu / q).ln_1p()).exp_m1();
                mu / (2.0 * q) / denom * d0 * d0
            }
            RateFormula::StrongObjectiveRlinear => {
                let (q, mu) = (c("q_norm"), c("mu"));
                mu / (2.0 * q) * (1.0 + mu / q).powf(-kf / 2.0) * d0 * d0
            }
            RateFormula::KmMuSequential => {
                let (q, mu, g) = (c("q_norm"), c("mu"), c("gamma"));
                (g * (2.0 * mu + q) / (2.0 * mu * (1.0 - g) + (2.0 - g) * q)).sqrt() * d0
                    / (kf + 1.0).sqrt()
            }
            RateFormula::KmQLinear => {
                let (q, mu, g) = (c("q_norm"), c("mu"), c("gamma"));
                (1.0 - 2.0 * g * mu / (2.0 * mu + q)).powf(kf / 2.0) * d0
            }
            RateFormula::KmRLinear => {
                let (q, mu, g) = (c("q_norm"), c("mu"), c("gamma"));
                g / (1.0 - g)
                    * (1.0 + q / (2.0 * mu)).sqrt()
                    * (1.0 - 2.0 * g * mu / (2.0 * mu + q)).powf((kf + 1.0) / 4.0)
                    * d0
            }
        };
        Ok(value)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub k: usize,
    pub bound: f64,
    pub empirical: f64,
}

/// Comparison of a trace against a bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub formula: RateFormula,
    pub constants: BTreeMap<String, f64>,
    pub checked: usize,
    pub worst_slack: f64,
    pub violations: Vec<Violation>,
}

impl RateReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            rtol: 1e-6,
            atol: 1e-10,
        }
    }
}

fn stored_iterates(trace: &IterationTrace) -> Result<&[Vector]> {
    if trace.truncated || trace.iterates.len() != trace.steps() + 1 {
        return Err(Error::MissingChannel("iterates".into()));
    }
    Ok(&trace.iterates)
}

fn objective_of(scheme: &ResolventScheme, b: &Vector) -> Result<f64> {
    scheme
        .op()
        .objective_value(b)
        .ok_or_else(|| Error::MissingChannel("objective".into()))
}

/// Empirical values `(k, value)` of `channel`, recomputed from iterates.
pub fn empirical(
    channel: Channel,
    trace: &IterationTrace,
    scheme: &ResolventScheme,
    h_star: f64,
) -> Result<Vec<(usize, f64)>> {
    let it = stored_iterates(trace)?;
    let q = scheme.metric();
    let need_psd = |m: &Metric, what: &str| {
        if m.is_symmetric_psd() {
            Ok(())
        } else {
            Err(Error::MissingChannel(format!("{what} (metric not symmetric PSD)")))
        }
    };
    match channel {
        Channel::ResidualQ => {
            need_psd(q, "residual_q")?;
            (0..trace.steps()).map(|k| Ok((k, q.norm(&(&it[k + 1] - &it[k]))?))).collect()
        }
        Channel::ResidualS => {
            let s = scheme.s_metric();
            need_psd(s, "residual_s")?;
            (0..trace.steps()).map(|k| Ok((k, s.norm(&(&it[k + 1] - &it[k]))?))).collect()
        }
        Channel::Objective => {
            (1..it.len()).map(|k| Ok((k, objective_of(scheme, &it[k])? - h_star))).collect()
        }
        Channel::ErgodicObjective => {
            let mut acc = PairwiseSum::default();
            let mut out = Vec::with_capacity(it.len());
            for (k, b) in it.iter().enumerate().skip(1) {
                acc.push(b);
                let mean = acc.mean().expect("non-empty");
                out.push((k, objective_of(scheme, &mean)? - h_star));
            }
            Ok(out)
        }
        Channel::DistanceQ => {
            need_psd(q, "dist_ref")?;
            let r = trace
                .reference
                .as_ref()
                .ok_or_else(|| Error::MissingChannel("dist_ref".into()))?;
            it.iter().enumerate().map(|(k, b)| Ok((k, q.norm(&(b - r))?))).collect()
        }
    }
}

/// Compare a trace with a bound at every index inside the bound's validity range.
///
/// A violation is recorded when `bound - empirical < -rtol * bound - atol`. Non-finite empirical
/// values (points outside an indicator's domain) are skipped.
pub fn check_trace(
    bound: &RateBound,
    trace: &IterationTrace,
    scheme: &ResolventScheme,
    tol: Tolerance,
) -> Result<RateReport> {
    let h_star = bound.constants.get("h_star").copied().unwrap_or(0.0);
    let values = empirical(bound.formula.channel(), trace, scheme, h_star)?;
    let mut report = RateReport {
        formula: bound.formula,
        constants: bound.constants.clone(),
        checked: 0,
        worst_slack: f64::INFINITY,
        violations: Vec::new(),
    };
    for (k, emp) in values {
        if k < bound.first_valid_k || !emp.is_finite() {
            continue;
        }
        let b = bound.bound_at(k)?;
        let slack = b - emp;
        report.checked += 1;
        report.worst_slack = report.worst_slack.min(slack);
        if slack < -tol.rtol * b.abs() - tol.atol {
            report.violations.push(Violation {
                k,
                bound: b,
                empirical: emp,
            });
        }
    }
    Ok(report)
}

/// Per-step inequality audit of a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepAudit {
    pub name: String,
    pub checked: usize,
    pub worst_margin: f64,
    pub violating_steps: Vec<usize>,
}

impl StepAudit {
    fn new(name: &str) -> Self {
        StepAudit {
            name: name.into(),
            checked: 0,
            worst_margin: f64::INFINITY,
            violating_steps: Vec::new(),
        }
    }

    fn record(&mut self, k: usize, margin: f64, tol: f64) {
        self.checked += 1;
        self.worst_margin = self.worst_margin.min(margin);
        if !(margin >= -tol) {
            self.violating_steps.push(k);
        }
    }

    pub fn passed(&self) -> bool {
        self.violating_steps.is_empty()
    }
}

/// Absolute slack of the per-step audits.
pub const STEP_TOL: f64 = 1e-8;

/// `||b^{k+1}-b^k||_Q^2 <= h(b^k)-h(b^{k+1}) <= 1.5 ||b^{k-1}-b^k||_Q^2 - 0.5 ||b^{k+1}-b^k||_Q^2`
/// for `k >= 1`. Requires `M = I`, symmetric PSD `Q` and an objective.
pub fn check_decrease_bracket(trace: &IterationTrace, scheme: &ResolventScheme) -> Result<StepAudit> {
    let unit = linalg::as_scaled_identity(scheme.correction()).is_some_and(|c| (c - 1.0).abs() <= 1e-12);
    if !unit {
        return Err(Error::BoundNotApplicable {
            formula: "decrease_bracket".into(),
            predicate: "M = I".into(),
        });
    }
    let q = scheme.metric();
    if !q.is_symmetric_psd() {
        return Err(Error::BoundNotApplicable {
            formula: "decrease_bracket".into(),
            predicate: "Q symmetric positive semidefinite".into(),
        });
    }
    let it = stored_iterates(trace)?;
    let h: Vec<f64> = it.iter().map(|b| objective_of(scheme, b)).collect::<Result<_>>()?;
    let mut audit = StepAudit::new("decrease_bracket");
    for k in 1..trace.steps() {
        let fwd = q.norm_sq(&(&it[k + 1] - &it[k]))?;
        let back = q.norm_sq(&(&it[k] - &it[k - 1]))?;
        let drop = h[k] - h[k + 1];
        let margin = (drop - fwd).min(1.5 * back - 0.5 * fwd - drop);
        audit.record(k, margin, STEP_TOL);
    }
    Ok(audit)
}

fn require_symmetric_s(scheme: &ResolventScheme, name: &str) -> Result<()> {
    if scheme.s_metric().is_symmetric() {
        Ok(())
    } else {
        Err(Error::BoundNotApplicable {
            formula: name.into(),
            predicate: "S = Q M^-1 symmetric".into(),
        })
    }
}

/// `||b^{k+1}-b*||_S^2 <= ||b^k-b*||_S^2 - ||b^k-b^{k+1}||^2_{M^-T G M^-1}` along the trace.
pub fn check_fejer(trace: &IterationTrace, scheme: &ResolventScheme) -> Result<StepAudit> {
    require_symmetric_s(scheme, "fejer")?;
    let it = stored_iterates(trace)?;
    let r = trace
        .reference
        .as_ref()
        .ok_or_else(|| Error::MissingChannel("reference".into()))?;
    let s = scheme.s_metric();
    let mgm = scheme.corrected_g_metric();
    let mut audit = StepAudit::new("fejer");
    for k in 0..trace.steps() {
        let lhs = s.norm_sq(&(&it[k + 1] - r))?;
        let rhs = s.norm_sq(&(&it[k] - r))? - mgm.norm_sq(&(&it[k] - &it[k + 1]))?;
        audit.record(k, rhs - lhs, STEP_TOL);
    }
    Ok(audit)
}

/// `||b^k-b^{k+1}||_S^2 - ||b^{k+1}-b^{k+2}||_S^2 >= ||R b^k - R b^{k+1}||_G^2` along the trace.
pub fn check_residual_decrease(trace: &IterationTrace, scheme: &ResolventScheme) -> Result<StepAudit> {
    require_symmetric_s(scheme, "residual_decrease")?;
    let it = stored_iterates(trace)?;
    if trace.tildes.len() != trace.steps() {
        return Err(Error::MissingChannel("tildes".into()));
    }
    let s = scheme.s_metric();
    let g = scheme.g_metric();
    let mut audit = StepAudit::new("residual_decrease");
    for k in 0..trace.steps().saturating_sub(1) {
        let lhs = s.norm_sq(&(&it[k] - &it[k + 1]))? - s.norm_sq(&(&it[k + 1] - &it[k + 2]))?;
        let rk = &it[k] - &trace.tildes[k];
        let rk1 = &it[k + 1] - &trace.tildes[k + 1];
        audit.record(k, lhs - g.norm_sq(&(rk - rk1))?, STEP_TOL);
    }
    Ok(audit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn bound(f: RateFormula, c: &[(&str, f64)]) -> RateBound {
        RateBound::new(f, c).unwrap()
    }

    #[test]
    fn picard_at_zero_is_distance() {
        let b = bound(RateFormula::PicardSequential, &[("d0", 3.5)]);
        assert_eq!(b.bound_at(0).unwrap(), 3.5);
        assert_relative_eq!(b.bound_at(3).unwrap(), 1.75);
    }

    #[test]
    fn km_gamma_one_is_picard() {
        let km = bound(RateFormula::KmSequential, &[("gamma", 1.0), ("d0", 2.0)]);
        let p = bound(RateFormula::PicardSequential, &[("d0", 2.0)]);
        for k in 0..50 {
            assert_eq!(km.bound_at(k).unwrap(), p.bound_at(k).unwrap());
        }
        assert!(RateBound::new(RateFormula::KmSequential, &[("gamma", 2.0), ("d0", 1.0)]).is_err());
    }

    #[test]
    fn q_linear_vacuous_without_strong_monotonicity() {
        let b = bound(RateFormula::QLinearDistance, &[("q_norm", 3.0), ("mu", 0.0), ("d0", 1.5)]);
        for k in 0..10 {
            assert_eq!(b.bound_at(k).unwrap(), 1.5);
        }
    }

    #[test]
    fn strong_objective_meets_nonergodic_at_one() {
        let d0 = 1.7;
        let s = bound(
            RateFormula::StrongObjective,
            &[("q_norm", 2.0), ("mu", 0.3), ("d0", d0), ("h_star", 0.0)],
        );
        let n = bound(RateFormula::ObjectiveNonergodic, &[("d0", d0), ("h_star", 0.0)]);
        assert_relative_eq!(s.bound_at(1).unwrap(), d0 * d0 / 2.0, max_relative = 1e-14);
        assert_relative_eq!(s.bound_at(1).unwrap(), n.bound_at(1).unwrap(), max_relative = 1e-14);
        assert!(n.bound_at(0).is_err());
    }

    #[test]
    fn local_thresholds() {
        // mu/||Q|| = 0.1 < (sqrt5-1)/4: threshold ln(golden)/ln sqrt(1.2) - 1
        let b = bound(RateFormula::RLinearResidual, &[("q_norm", 1.0), ("mu", 0.1), ("d0", 1.0)]);
        let t = GOLDEN.ln() / 1.2f64.sqrt().ln() - 1.0;
        assert_eq!(b.first_valid_k, t.ceil() as usize);
        assert!(matches!(b.bound_at(0), Err(Error::BoundNotApplicable { .. })));
        let g = bound(RateFormula::RLinearResidual, &[("q_norm", 1.0), ("mu", 0.5), ("d0", 1.0)]);
        assert_eq!(g.first_valid_k, 0);
        let so = bound(
            RateFormula::StrongObjectiveRlinear,
            &[("q_norm", 1.0), ("mu", 2.0), ("d0", 1.0), ("h_star", 0.0)],
        );
        assert_eq!(so.first_valid_k, 0);
    }

    #[test]
    fn km_r_linear_ranges() {
        // q = mu: global interval ](3-sqrt5)/4 * 3, 1[ = ]0.573, 1[
        let glob = bound(
            RateFormula::KmRLinear,
            &[("q_norm", 1.0), ("mu", 1.0), ("gamma", 0.8), ("d0", 1.0)],
        );
        assert_eq!(glob.first_valid_k, 0);
        let local = bound(
            RateFormula::KmRLinear,
            &[("q_norm", 1.0), ("mu", 1.0), ("gamma", 0.3), ("d0", 1.0)],
        );
        let t = GOLDEN.ln() / (3.0f64 / 2.4).sqrt().ln() - 1.0;
        assert_eq!(local.first_valid_k, t.ceil() as usize);
        assert!(RateBound::new(
            RateFormula::KmRLinear,
            &[("q_norm", 1.0), ("mu", 1.0), ("gamma", 0.97), ("d0", 1.0)]
        )
        .is_err());
    }

    #[test]
    fn missing_constant_is_error() {
        assert!(RateBound::new(RateFormula::KmQLinear, &[("q_norm", 1.0)]).is_err());
    }

    #[test]
    fn names_round_trip() {
        for f in RateFormula::ALL {
            assert_eq!(RateFormula::from_name(f.name()), Some(f));
            assert_eq!(serde_json::to_value(f).unwrap(), f.name());
        }
    }
}
