//! Experiment configuration files.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use resolvent_core::linalg::serde_repr;
use resolvent_core::splitting::{Generator, ProblemForm};
use resolvent_core::{Algorithm, Matrix, ProxFn, RateFormula, SplittingProblem, Vector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Base name of the output files.
    pub name: String,
    pub problem: ProblemSpec,
    /// Required for splitting problems; absent for raw operators.
    #[serde(default)]
    pub algorithm: Option<Algorithm>,
    pub run: RunSpec,
    #[serde(default)]
    pub checks: Vec<CheckName>,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemSpec {
    Generated {
        generator: Generator,
        form: ProblemForm,
        dim: usize,
        seed: u64,
    },
    Inline(SplittingProblem),
    /// `A = blockdiag(dh_i) + L + shift` iterated with metric `Q` and correction `M`
    /// (`M = I` when omitted, `gamma I` when `gamma` is given).
    Operator(OperatorSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSpec {
    pub blocks: Vec<ProxFn>,
    #[serde(with = "serde_repr::matrix")]
    pub linear_part: Matrix,
    #[serde(with = "serde_repr::vector")]
    pub shift: Vector,
    #[serde(with = "serde_repr::matrix")]
    pub metric: Matrix,
    #[serde(default, with = "optional_matrix")]
    pub correction: Option<Matrix>,
    #[serde(default)]
    pub gamma: Option<f64>,
    /// Certify the strong-monotonicity modulus from the operator data.
    #[serde(default)]
    pub certify_modulus: bool,
}

mod optional_matrix {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use resolvent_core::linalg::serde_repr;
    use resolvent_core::Matrix;

    #[derive(Serialize, Deserialize)]
    struct Wrapped(#[serde(with = "serde_repr::matrix")] Matrix);

    pub fn serialize<S: Serializer>(m: &Option<Matrix>, s: S) -> Result<S::Ok, S::Error> {
        m.clone().map(Wrapped).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Matrix>, D::Error> {
        Ok(Option::<Wrapped>::deserialize(d)?.map(|w| w.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub max_iter: usize,
    #[serde(default)]
    pub eps: f64,
    /// Seeds the initial point and the sampled property checks.
    pub seed: u64,
    /// `b0` is Gaussian scaled by this factor; `0` starts at the origin.
    #[serde(default = "one")]
    pub init_scale: f64,
    #[serde(default)]
    pub reference: ReferenceSpec,
    /// Sampled pairs per property check.
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn one() -> f64 {
    1.0
}

fn default_samples() -> usize {
    resolvent_core::sampling::DEFAULT_PAIRS
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceSpec {
    /// Direct solve; the operator must be affine.
    Analytic,
    /// Certified long run.
    #[default]
    LongRun,
    /// JSON array with the zero of the operator.
    External(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub trace_path: Option<PathBuf>,
    #[serde(default)]
    pub report_path: Option<PathBuf>,
}

/// Sampled or per-step property checks other than rate bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PropertyCheck {
    FirmNonexpansive,
    Averagedness,
    StrongComplement,
    Fejer,
    ResidualDecrease,
    DecreaseBracket,
    Kkt,
    Twin,
}

impl PropertyCheck {
    pub const ALL: [PropertyCheck; 8] = [
        PropertyCheck::FirmNonexpansive,
        PropertyCheck::Averagedness,
        PropertyCheck::StrongComplement,
        PropertyCheck::Fejer,
        PropertyCheck::ResidualDecrease,
        PropertyCheck::DecreaseBracket,
        PropertyCheck::Kkt,
        PropertyCheck::Twin,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PropertyCheck::FirmNonexpansive => "firm_nonexpansive",
            PropertyCheck::Averagedness => "averagedness",
            PropertyCheck::StrongComplement => "strong_complement",
            PropertyCheck::Fejer => "fejer",
            PropertyCheck::ResidualDecrease => "residual_decrease",
            PropertyCheck::DecreaseBracket => "decrease_bracket",
            PropertyCheck::Kkt => "kkt",
            PropertyCheck::Twin => "twin",
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            PropertyCheck::FirmNonexpansive => {
                "sampled <d, T d>_Q >= c ||T d||_Q^2 (c = 1 + mu/||Q|| for mu > 0, SPD Q) and <Q^T d, R d> >= ||R d||_Q^2"
            }
            PropertyCheck::Averagedness => "sampled Lipschitz bound of the averaged part of T_gamma",
            PropertyCheck::StrongComplement => "sampled strong cocoercivity of R = I - T for mu > 0",
            PropertyCheck::Fejer => "||b^{k+1}-b*||_S^2 <= ||b^k-b*||_S^2 - ||b^k-b^{k+1}||^2_{M^-T G M^-1}",
            PropertyCheck::ResidualDecrease => {
                "||b^k-b^{k+1}||_S^2 - ||b^{k+1}-b^{k+2}||_S^2 >= ||R b^k - R b^{k+1}||_G^2"
            }
            PropertyCheck::DecreaseBracket => "per-step objective decrease bracket for M = I",
            PropertyCheck::Kkt => "reference satisfies feasibility and stationarity within 1e-7",
            PropertyCheck::Twin => "scheme iterates equal native iterates within 1e-10 relative for 200 steps",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum CheckName {
    Rate(RateFormula),
    Property(PropertyCheck),
}

impl CheckName {
    pub fn name(self) -> &'static str {
        match self {
            CheckName::Rate(f) => f.name(),
            CheckName::Property(p) => p.name(),
        }
    }
}

impl fmt::Display for CheckName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl TryFrom<String> for CheckName {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        if let Some(f) = RateFormula::from_name(&s) {
            return Ok(CheckName::Rate(f));
        }
        PropertyCheck::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .map(CheckName::Property)
            .ok_or_else(|| format!("unknown check `{s}`"))
    }
}

impl From<CheckName> for String {
    fn from(c: CheckName) -> String {
        c.name().to_string()
    }
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

impl ExperimentConfig {
    /// Parse JSON; errors carry the path of the offending field.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            ConfigError(format!("at `{path}`: {}", e.into_inner()))
        })?;
        cfg.check_fields()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))
    }

    fn check_fields(&self) -> Result<(), ConfigError> {
        let err = |m: String| Err(ConfigError(m));
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return err(format!("at `name`: `{}` is not a plain file stem", self.name));
        }
        if !(self.run.eps >= 0.0 && self.run.eps.is_finite()) {
            return err(format!("at `run.eps`: must be finite and nonnegative, got {}", self.run.eps));
        }
        if !(self.run.init_scale.is_finite() && self.run.init_scale >= 0.0) {
            return err("at `run.init_scale`: must be finite and nonnegative".into());
        }
        if self.run.max_iter == 0 {
            return err("at `run.max_iter`: must be positive".into());
        }
        match (&self.problem, &self.algorithm) {
            (ProblemSpec::Operator(_), Some(_)) => {
                return err("at `algorithm`: not allowed with an operator problem".into())
            }
            (ProblemSpec::Generated { .. } | ProblemSpec::Inline(_), None) => {
                return err("at `algorithm`: required for splitting problems".into())
            }
            _ => {}
        }
        let mut seen = std::collections::HashSet::new();
        for (i, c) in self.checks.iter().enumerate() {
            if !seen.insert(*c) {
                return err(format!("at `checks[{i}]`: `{c}` listed twice"));
            }
        }
        Ok(())
    }

    /// Trace CSV, trace sidecar and report paths under `root`.
    pub fn output_paths(&self, root: &Path) -> (PathBuf, PathBuf, PathBuf) {
        let resolve = |p: &Option<PathBuf>, default: String| match p {
            Some(p) if p.is_absolute() => p.clone(),
            Some(p) => root.join(p),
            None => root.join(default),
        };
        let trace = resolve(&self.output.trace_path, format!("{}.csv", self.name));
        let sidecar = trace.with_extension("meta.json");
        let report = resolve(&self.output.report_path, format!("{}.report.json", self.name));
        (trace, sidecar, report)
    }
}
