//! ADMM, PDHG, ALM and linearized Bregman written as `(A, Q, M)` resolvent schemes, with
//! independent implementations of each algorithm's own update equations.
//!
//! State layouts: two-block problems use `(x, u, s)`, composite problems `(s, x)`,
//! equality-constrained problems `(x, s)` and single-function problems `x`.

mod generators;
mod kkt;
mod native;

pub use generators::{generate, Generator, ProblemForm};
pub use kkt::kkt_residual;
pub use native::{twin_deviation, NativeAlgorithm};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, serde_repr, Matrix, Vector};
use crate::operators::{MonotoneBlockOperator, ProxFn};
use crate::resolvent::ResolventScheme;

/// Margin required in strict step-size conditions.
pub const STEP_MARGIN: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SplittingProblem {
    /// `min f(x) + g(u)  s.t.  A x + B u = c`.
    TwoBlockConstrained {
        f: ProxFn,
        g: ProxFn,
        #[serde(with = "serde_repr::matrix")]
        a: Matrix,
        #[serde(with = "serde_repr::matrix")]
        b: Matrix,
        #[serde(with = "serde_repr::vector")]
        c: Vector,
    },
    /// `min f(x) + g(A x)`.
    Composite {
        f: ProxFn,
        g: ProxFn,
        #[serde(with = "serde_repr::matrix")]
        a: Matrix,
    },
    /// `min h(x)  s.t.  A x = c`.
    LinearEquality {
        h: ProxFn,
        #[serde(with = "serde_repr::matrix")]
        a: Matrix,
        #[serde(with = "serde_repr::vector")]
        c: Vector,
    },
    /// `min h(x) + x^T L x / 2 + <shift, x>` with `L` symmetric PSD.
    SingleFunction {
        h: ProxFn,
        #[serde(with = "serde_repr::matrix")]
        l: Matrix,
        #[serde(with = "serde_repr::vector")]
        shift: Vector,
    },
}

/// Proximal term `P` of proximal ADMM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ProximalTerm {
    /// `value * I`.
    Scalar { value: f64 },
    /// `rho I - tau K^T K` for the block's constraint matrix `K`.
    Linearized { rho: f64 },
    Matrix {
        #[serde(with = "serde_repr::matrix")]
        matrix: Matrix,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Algorithm {
    RelaxedAdmm { tau: f64, gamma: f64 },
    ProximalAdmm { tau: f64, p1: ProximalTerm, p2: ProximalTerm },
    PdhgMp { sigma: f64, tau: f64 },
    PdhgMu { sigma: f64, tau: f64 },
    Alm { tau: f64 },
    LinearizedAlm { tau: f64, rho: f64 },
    LinearizedBregman { tau: f64, rho: f64 },
    /// Relaxed resolvent iteration on a single function with `Q = rho I`, or `Q = rho I - L`
    /// when `linearize` (forward-backward form).
    ProximalPoint {
        rho: f64,
        #[serde(default = "one")]
        gamma: f64,
        #[serde(default)]
        linearize: bool,
    },
}

fn one() -> f64 {
    1.0
}

impl Algorithm {
    pub const NAMES: [&'static str; 8] = [
        "relaxed_admm",
        "proximal_admm",
        "pdhg_mp",
        "pdhg_mu",
        "alm",
        "linearized_alm",
        "linearized_bregman",
        "proximal_point",
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::RelaxedAdmm { .. } => "relaxed_admm",
            Algorithm::ProximalAdmm { .. } => "proximal_admm",
            Algorithm::PdhgMp { .. } => "pdhg_mp",
            Algorithm::PdhgMu { .. } => "pdhg_mu",
            Algorithm::Alm { .. } => "alm",
            Algorithm::LinearizedAlm { .. } => "linearized_alm",
            Algorithm::LinearizedBregman { .. } => "linearized_bregman",
            Algorithm::ProximalPoint { .. } => "proximal_point",
        }
    }

    /// Problem kind the algorithm consumes.
    pub fn problem_kind(&self) -> &'static str {
        match self {
            Algorithm::RelaxedAdmm { .. } | Algorithm::ProximalAdmm { .. } => "two_block_constrained",
            Algorithm::PdhgMp { .. } | Algorithm::PdhgMu { .. } => "composite",
            Algorithm::Alm { .. }
            | Algorithm::LinearizedAlm { .. }
            | Algorithm::LinearizedBregman { .. } => "linear_equality",
            Algorithm::ProximalPoint { .. } => "single_function",
        }
    }
}

impl SplittingProblem {
    pub fn kind_name(&self) -> &'static str {
        match self {
            SplittingProblem::TwoBlockConstrained { .. } => "two_block_constrained",
            SplittingProblem::Composite { .. } => "composite",
            SplittingProblem::LinearEquality { .. } => "linear_equality",
            SplittingProblem::SingleFunction { .. } => "single_function",
        }
    }

    /// Check every dimension and function.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInstance(msg));
        match self {
            SplittingProblem::TwoBlockConstrained { f, g, a, b, c } => {
                f.validate()?;
                g.validate()?;
                if a.nrows() != c.len() || b.nrows() != c.len() {
                    return bad(format!(
                        "constraint rows: A has {}, B has {}, c has {}",
                        a.nrows(),
                        b.nrows(),
                        c.len()
                    ));
                }
                if a.ncols() != f.dim() || b.ncols() != g.dim() {
                    return bad(format!(
                        "A has {} columns for f of dim {}; B has {} columns for g of dim {}",
                        a.ncols(),
                        f.dim(),
                        b.ncols(),
                        g.dim()
                    ));
                }
            }
            SplittingProblem::Composite { f, g, a } => {
                f.validate()?;
                g.validate()?;
                if a.ncols() != f.dim() || a.nrows() != g.dim() {
                    return bad(format!(
                        "A is {}x{} but f has dim {} and g has dim {}",
                        a.nrows(),
                        a.ncols(),
                        f.dim(),
                        g.dim()
                    ));
                }
            }
            SplittingProblem::LinearEquality { h, a, c } => {
                h.validate()?;
                if a.ncols() != h.dim() || a.nrows() != c.len() {
                    return bad(format!(
                        "A is {}x{} but h has dim {} and c has length {}",
                        a.nrows(),
                        a.ncols(),
                        h.dim(),
                        c.len()
                    ));
                }
            }
            SplittingProblem::SingleFunction { h, l, shift } => {
                h.validate()?;
                if l.nrows() != h.dim() || l.ncols() != h.dim() || shift.len() != h.dim() {
                    return bad(format!(
                        "L is {}x{} and shift has length {} for h of dim {}",
                        l.nrows(),
                        l.ncols(),
                        shift.len(),
                        h.dim()
                    ));
                }
                if !linalg::is_symmetric(l) {
                    return bad("L must be symmetric".into());
                }
            }
        }
        if self.matrices().iter().any(|m| !m.iter().all(|x| x.is_finite())) {
            return bad("matrices must be finite".into());
        }
        Ok(())
    }

    fn matrices(&self) -> Vec<&Matrix> {
        match self {
            SplittingProblem::TwoBlockConstrained { a, b, .. } => vec![a, b],
            SplittingProblem::Composite { a, .. } | SplittingProblem::LinearEquality { a, .. } => {
                vec![a]
            }
            SplittingProblem::SingleFunction { l, .. } => vec![l],
        }
    }

    /// Named lengths of the scheme state.
    pub fn layout(&self) -> Vec<(&'static str, usize)> {
        match self {
            SplittingProblem::TwoBlockConstrained { f, g, c, .. } => {
                vec![("x", f.dim()), ("u", g.dim()), ("s", c.len())]
            }
            SplittingProblem::Composite { f, g, .. } => vec![("s", g.dim()), ("x", f.dim())],
            SplittingProblem::LinearEquality { h, c, .. } => vec![("x", h.dim()), ("s", c.len())],
            SplittingProblem::SingleFunction { h, .. } => vec![("x", h.dim())],
        }
    }

    pub fn state_dim(&self) -> usize {
        self.layout().iter().map(|(_, n)| n).sum()
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be positive, got {v}")))
    }
}

fn kind_mismatch(alg: &Algorithm, problem: &SplittingProblem) -> Error {
    Error::InvalidInstance(format!(
        "{} needs a {} problem, got {}",
        alg.name(),
        alg.problem_kind(),
        problem.kind_name()
    ))
}

fn check_psd(name: &str, m: &Matrix) -> Result<()> {
    if !linalg::is_symmetric(m) {
        return Err(Error::param(name, "must be symmetric"));
    }
    let (vals, _) = linalg::sym_eigen(m)?;
    let tol = linalg::scaled_tol(vals.last().map_or(0.0, |v| v.abs()));
    if vals.first().is_some_and(|&v| v < -tol) {
        return Err(Error::param(name, format!("must be positive semidefinite (lambda_min = {})", vals[0])));
    }
    Ok(())
}

pub(crate) fn proximal_term(name: &str, term: &ProximalTerm, tau: f64, k: &Matrix) -> Result<Matrix> {
    let n = k.ncols();
    let p = match term {
        ProximalTerm::Scalar { value } => Matrix::identity(n, n) * *value,
        ProximalTerm::Linearized { rho } => {
            Matrix::identity(n, n) * *rho - k.transpose() * k * tau
        }
        ProximalTerm::Matrix { matrix } => {
            if matrix.shape() != (n, n) {
                return Err(Error::dims(format!("{name} size"), n, matrix.nrows()));
            }
            matrix.clone()
        }
    };
    check_psd(name, &p)?;
    Ok(p)
}

/// `[[0, -K^T], [K, 0]]`.
fn skew_coupling(k: &Matrix) -> Matrix {
    let (m, n) = k.shape();
    linalg::from_blocks(
        &[n, m],
        &[n, m],
        &[&[None, Some(-k.transpose())], &[Some(k.clone()), None]],
    )
}

/// `sigma tau ||A||^2 < 1`.
fn check_pdhg_steps(sigma: f64, tau: f64, a: &Matrix) -> Result<()> {
    positive("sigma", sigma)?;
    positive("tau", tau)?;
    let prod = sigma * tau * linalg::spectral_norm(a).powi(2);
    if prod >= 1.0 - STEP_MARGIN {
        return Err(Error::MetricNotPd(format!(
            "sigma * tau * ||A||^2 = {prod} must be < 1"
        )));
    }
    Ok(())
}

/// Build the resolvent scheme of `alg` on `problem`.
pub fn build(problem: &SplittingProblem, alg: &Algorithm) -> Result<ResolventScheme> {
    problem.validate()?;
    match (alg, problem) {
        (Algorithm::RelaxedAdmm { tau, gamma }, SplittingProblem::TwoBlockConstrained { f, g, a, b, c }) => {
            positive("tau", *tau)?;
            if !(*gamma > 0.0 && *gamma < 2.0) {
                return Err(Error::param("gamma", format!("must lie in (0, 2), got {gamma}")));
            }
            let (n, l, m) = (f.dim(), g.dim(), c.len());
            let op = admm_operator(f, g, a, b, c)?;
            let btb = b.transpose() * b;
            let q = linalg::from_blocks(
                &[n, l, m],
                &[n, l, m],
                &[
                    &[None, None, None],
                    &[None, Some(&btb * *tau), Some(b.transpose() * (1.0 - gamma))],
                    &[None, Some(-b.clone()), Some(Matrix::identity(m, m) / *tau)],
                ],
            );
            let mm = admm_correction(n, l, m, b, *tau, *gamma);
            ResolventScheme::new(op, q, mm)
        }
        (Algorithm::ProximalAdmm { tau, p1, p2 }, SplittingProblem::TwoBlockConstrained { f, g, a, b, c }) => {
            positive("tau", *tau)?;
            let (n, l, m) = (f.dim(), g.dim(), c.len());
            let p1 = proximal_term("p1", p1, *tau, a)?;
            let p2 = proximal_term("p2", p2, *tau, b)?;
            let op = admm_operator(f, g, a, b, c)?;
            let q = linalg::from_blocks(
                &[n, l, m],
                &[n, l, m],
                &[
                    &[Some(p1), None, None],
                    &[None, Some(p2 + b.transpose() * b * *tau), None],
                    &[None, Some(-b.clone()), Some(Matrix::identity(m, m) / *tau)],
                ],
            );
            let mm = admm_correction(n, l, m, b, *tau, 1.0);
            ResolventScheme::new(op, q, mm)
        }
        (Algorithm::PdhgMp { sigma, tau }, SplittingProblem::Composite { f, g, a })
        | (Algorithm::PdhgMu { sigma, tau }, SplittingProblem::Composite { f, g, a }) => {
            check_pdhg_steps(*sigma, *tau, a)?;
            let (l, n) = a.shape();
            let g_conj = g.conjugate()?;
            // blocks over (s, x): [[dg*, -A], [A^T, df]]
            let coupling = linalg::from_blocks(
                &[l, n],
                &[l, n],
                &[&[None, Some(-a.clone())], &[Some(a.transpose()), None]],
            );
            let op = MonotoneBlockOperator::new(vec![g_conj, f.clone()], coupling, Vector::zeros(l + n))?;
            let sign = if matches!(alg, Algorithm::PdhgMp { .. }) { 1.0 } else { -1.0 };
            let q = linalg::from_blocks(
                &[l, n],
                &[l, n],
                &[
                    &[Some(Matrix::identity(l, l) / *sigma), Some(a * sign)],
                    &[Some(a.transpose() * sign), Some(Matrix::identity(n, n) / *tau)],
                ],
            );
            ResolventScheme::plain(op, q)
        }
        (Algorithm::Alm { tau }, SplittingProblem::LinearEquality { h, a, c }) => {
            positive("tau", *tau)?;
            let (m, n) = a.shape();
            let op = equality_operator(h.clone(), a, c, None)?;
            let q = linalg::block_diag(&[Matrix::zeros(n, n), Matrix::identity(m, m) / *tau]);
            ResolventScheme::plain(op, q)
        }
        (Algorithm::LinearizedAlm { tau, rho }, SplittingProblem::LinearEquality { h, a, c }) => {
            positive("tau", *tau)?;
            positive("rho", *rho)?;
            let (m, n) = a.shape();
            let ata = a.transpose() * a;
            let need = tau * linalg::spectral_norm(&ata);
            if *rho <= need + STEP_MARGIN {
                return Err(Error::MetricNotPd(format!(
                    "rho = {rho} must exceed tau * ||A^T A|| = {need}"
                )));
            }
            let op = equality_operator(h.clone(), a, c, None)?;
            let q = linalg::block_diag(&[
                Matrix::identity(n, n) * *rho - ata * *tau,
                Matrix::identity(m, m) / *tau,
            ]);
            ResolventScheme::plain(op, q)
        }
        (Algorithm::LinearizedBregman { tau, rho }, SplittingProblem::LinearEquality { h, a, c }) => {
            positive("tau", *tau)?;
            positive("rho", *rho)?;
            let (m, n) = a.shape();
            let ata = a.transpose() * a;
            let norm = linalg::spectral_norm(&ata);
            if 1.0 / rho < norm * (1.0 - 1e-12) {
                return Err(Error::NotMonotone(format!(
                    "1/rho = {} is below ||A^T A|| = {norm}",
                    1.0 / rho
                )));
            }
            let op = equality_operator(h.scaled(*tau)?, a, c, Some(*rho))?;
            let q = linalg::block_diag(&[Matrix::zeros(n, n), Matrix::identity(m, m)]);
            ResolventScheme::plain(op, q)
        }
        (Algorithm::ProximalPoint { rho, gamma, linearize }, SplittingProblem::SingleFunction { h, l, shift }) => {
            positive("rho", *rho)?;
            let n = h.dim();
            let op = MonotoneBlockOperator::with_certified_modulus(vec![h.clone()], l.clone(), shift.clone())?;
            let q = if *linearize {
                let lmax = linalg::spectral_norm(l);
                if *rho <= lmax + STEP_MARGIN {
                    return Err(Error::MetricNotPd(format!(
                        "rho = {rho} must exceed ||L|| = {lmax}"
                    )));
                }
                Matrix::identity(n, n) * *rho - l
            } else {
                Matrix::identity(n, n) * *rho
            };
            ResolventScheme::relaxed(op, q, *gamma)
        }
        _ => Err(kind_mismatch(alg, problem)),
    }
}

/// `A: (x, u, s) -> (df(x) - A^T s, dg(u) - B^T s, A x + B u - c)`.
fn admm_operator(f: &ProxFn, g: &ProxFn, a: &Matrix, b: &Matrix, c: &Vector) -> Result<MonotoneBlockOperator> {
    let (n, l, m) = (f.dim(), g.dim(), c.len());
    let coupling = linalg::from_blocks(
        &[n, l, m],
        &[n, l, m],
        &[
            &[None, None, Some(-a.transpose())],
            &[None, None, Some(-b.transpose())],
            &[Some(a.clone()), Some(b.clone()), None],
        ],
    );
    let shift = linalg::concat(&[&Vector::zeros(n), &Vector::zeros(l), &(-c)]);
    MonotoneBlockOperator::new(vec![f.clone(), g.clone(), ProxFn::zero(m)], coupling, shift)
}

/// `[[I, 0, 0], [0, I, 0], [0, -tau B, gamma I]]`.
fn admm_correction(n: usize, l: usize, m: usize, b: &Matrix, tau: f64, gamma: f64) -> Matrix {
    linalg::from_blocks(
        &[n, l, m],
        &[n, l, m],
        &[
            &[Some(Matrix::identity(n, n)), None, None],
            &[None, Some(Matrix::identity(l, l)), None],
            &[None, Some(-b * tau), Some(Matrix::identity(m, m) * gamma)],
        ],
    )
}

/// `A: (x, s) -> (dh(x) - A^T s, A x - c)`; with `bregman = Some(rho)` the x-row gains
/// `(1/rho) x - A^T A x + A^T c`.
fn equality_operator(
    h: ProxFn,
    a: &Matrix,
    c: &Vector,
    bregman: Option<f64>,
) -> Result<MonotoneBlockOperator> {
    let (m, n) = a.shape();
    let mut coupling = skew_coupling(a);
    let mut top = Vector::zeros(n);
    if let Some(rho) = bregman {
        let extra = Matrix::identity(n, n) / rho - a.transpose() * a;
        let mut view = coupling.view_mut((0, 0), (n, n));
        view += extra;
        top = a.transpose() * c;
    }
    let shift = linalg::concat(&[&top, &(-c)]);
    MonotoneBlockOperator::new(vec![h, ProxFn::zero(m)], coupling, shift)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling;
    use approx::assert_relative_eq;

    fn v(d: &[f64]) -> Vector {
        Vector::from_row_slice(d)
    }

    #[test]
    fn relaxed_admm_gamma_one_correction() {
        let b = Matrix::from_row_slice(1, 1, &[-2.0]);
        let m = admm_correction(1, 1, 1, &b, 0.5, 1.0);
        assert_eq!(m.row(2).iter().copied().collect::<Vec<_>>(), vec![0.0, 1.0, 1.0]);
    }

    #[test]
    fn zero_problem_is_stationary() {
        let problem = SplittingProblem::TwoBlockConstrained {
            f: ProxFn::l1(1.0, 2).unwrap(),
            g: ProxFn::l1(1.0, 2).unwrap(),
            a: Matrix::identity(2, 2),
            b: -Matrix::identity(2, 2),
            c: Vector::zeros(2),
        };
        for alg in [
            Algorithm::RelaxedAdmm { tau: 1.0, gamma: 1.5 },
            Algorithm::ProximalAdmm {
                tau: 1.0,
                p1: ProximalTerm::Scalar { value: 0.5 },
                p2: ProximalTerm::Scalar { value: 0.0 },
            },
        ] {
            let s = build(&problem, &alg).unwrap();
            let (next, _) = s.apply_generalized(&Vector::zeros(6)).unwrap();
            assert_eq!(next, Vector::zeros(6));
        }
    }

    #[test]
    fn pdhg_step_condition() {
        let problem = SplittingProblem::Composite {
            f: ProxFn::zero(2),
            g: ProxFn::l1(1.0, 2).unwrap(),
            a: Matrix::identity(2, 2),
        };
        let err = build(&problem, &Algorithm::PdhgMp { sigma: 1.2, tau: 1.0 }).unwrap_err();
        assert!(matches!(err, Error::MetricNotPd(_)), "{err}");
        let s = build(&problem, &Algorithm::PdhgMu { sigma: 0.5, tau: 0.5 }).unwrap();
        assert!(s.metric().is_symmetric_pd());
    }

    #[test]
    fn pdhg_decouples_without_coupling() {
        let mut rng = sampling::rng(11);
        let problem = SplittingProblem::Composite {
            f: ProxFn::l1(0.3, 3).unwrap(),
            g: ProxFn::l1(1.0, 2).unwrap(),
            a: Matrix::zeros(2, 3),
        };
        let s = build(&problem, &Algorithm::PdhgMp { sigma: 0.7, tau: 1.3 }).unwrap();
        let b = sampling::normal_vector(&mut rng, 5) * 2.0;
        let t = s.apply_t(&b).unwrap();
        let s_part = b.rows(0, 2).map(|x| x.clamp(-1.0, 1.0));
        let x_part = ProxFn::l1(0.3, 3).unwrap().prox(&b.rows(2, 3).into_owned(), 1.3).unwrap();
        assert_relative_eq!(t.rows(0, 2).into_owned(), s_part, epsilon = 1e-14);
        assert_relative_eq!(t.rows(2, 3).into_owned(), x_part, epsilon = 1e-14);
    }

    #[test]
    fn lalm_and_bregman_conditions() {
        let a = Matrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let problem = SplittingProblem::LinearEquality {
            h: ProxFn::l1(1.0, 2).unwrap(),
            a,
            c: v(&[1.0]),
        };
        let err = build(&problem, &Algorithm::LinearizedAlm { tau: 1.0, rho: 2.0 }).unwrap_err();
        assert!(matches!(err, Error::MetricNotPd(_)));
        assert!(build(&problem, &Algorithm::LinearizedAlm { tau: 1.0, rho: 2.1 }).is_ok());
        let err = build(&problem, &Algorithm::LinearizedBregman { tau: 1.0, rho: 0.6 }).unwrap_err();
        assert!(matches!(err, Error::NotMonotone(_)));
        assert!(build(&problem, &Algorithm::LinearizedBregman { tau: 1.0, rho: 0.5 }).is_ok());
        assert!(matches!(
            build(&problem, &Algorithm::PdhgMp { sigma: 0.1, tau: 0.1 }),
            Err(Error::InvalidInstance(_))
        ));
    }

    #[test]
    fn validation_names_dimensions() {
        let p = SplittingProblem::Composite {
            f: ProxFn::zero(3),
            g: ProxFn::zero(2),
            a: Matrix::zeros(3, 3),
        };
        let err = p.validate().unwrap_err();
        assert!(err.to_string().contains("3x3"), "{err}");
    }

    #[test]
    fn problem_json_round_trip() {
        let p = SplittingProblem::LinearEquality {
            h: ProxFn::l1(1.0, 2).unwrap(),
            a: Matrix::from_row_slice(1, 2, &[1.0, 2.0]),
            c: v(&[3.0]),
        };
        let json = serde_json::to_string(&p).unwrap();
        assert!(json.contains("\"kind\":\"linear_equality\""));
        let back: SplittingProblem = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p);
        let alg: Algorithm = serde_json::from_str(r#"{"name":"proximal_point","rho":2.0}"#).unwrap();
        assert_eq!(alg, Algorithm::ProximalPoint { rho: 2.0, gamma: 1.0, linearize: false });
    }
}
