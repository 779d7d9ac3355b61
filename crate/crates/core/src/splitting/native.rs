//! Each algorithm's own update equations, sharing only the prox operators with the
//! resolvent path.

use crate::error::{Error, Result};
use crate::linalg::{self, DenseSolver, Matrix, Vector};
use crate::operators::ProxFn;
use crate::resolvent::ResolventScheme;

use super::{proximal_term, Algorithm, SplittingProblem};

/// Minimizer of `phi(x) + x^T W x / 2 - <r, x>` for a fixed `phi` and `W`.
#[derive(Debug, Clone)]
enum Subproblem {
    Linear(DenseSolver, Vector),
    Scalar(f64),
    Diagonal(Vector),
}

#[derive(Debug, Clone)]
struct Penalized {
    phi: ProxFn,
    kind: Subproblem,
}

impl Penalized {
    fn new(phi: &ProxFn, w: &Matrix, what: &str) -> Result<Self> {
        let kind = if let Some((h, q)) = phi.as_quadratic() {
            Subproblem::Linear(DenseSolver::new(&(h + w), what)?, q)
        } else if let Some(c) = linalg::as_scaled_identity(w).filter(|&c| c > 0.0) {
            Subproblem::Scalar(c)
        } else if let Some(d) = linalg::as_diagonal(w).filter(|d| d.iter().all(|&x| x > 0.0) && phi.is_separable()) {
            Subproblem::Diagonal(d)
        } else {
            return Err(Error::UnsupportedMetricProx(format!(
                "{what}: {} with a non-diagonal penalty",
                phi.kind_name()
            )));
        };
        Ok(Penalized { phi: phi.clone(), kind })
    }

    fn solve(&self, r: &Vector) -> Result<Vector> {
        match &self.kind {
            Subproblem::Linear(solver, q) => Ok(solver.solve(&(r - q))),
            Subproblem::Scalar(c) => self.phi.prox(&(r / *c), 1.0 / c),
            Subproblem::Diagonal(d) => {
                self.phi.prox_diagonal(&r.component_div(d), &d.map(|x| 1.0 / x))
            }
        }
    }
}

// One per algorithm instance; boxing the large variant buys nothing.
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone)]
enum Updates {
    Admm {
        a: Matrix,
        b: Matrix,
        c: Vector,
        tau: f64,
        gamma: f64,
        p1: Matrix,
        p2: Matrix,
        x_step: Penalized,
        u_step: Penalized,
        relaxed: bool,
    },
    Pdhg {
        a: Matrix,
        sigma: f64,
        tau: f64,
        f: ProxFn,
        g_conj: ProxFn,
        /// x-step comes second (`Mp`) or first (`Mu`).
        primal_extrapolation: bool,
    },
    Alm {
        a: Matrix,
        c: Vector,
        tau: f64,
        x_step: Penalized,
    },
    Lalm {
        a: Matrix,
        c: Vector,
        tau: f64,
        rho: f64,
        h: ProxFn,
    },
    Bregman {
        a: Matrix,
        c: Vector,
        prox_weight: f64,
        rho: f64,
        h: ProxFn,
    },
    ProximalPoint {
        l: Matrix,
        shift: Vector,
        rho: f64,
        gamma: f64,
        h: ProxFn,
        step: Option<Penalized>,
    },
}

/// Direct implementation of a splitting algorithm.
///
/// The native state equals the scheme state except for `pdhg_mu`, whose native state is
/// `(s^k, x^k, x^{k-1})` while the scheme carries `(s^k, x^{k-1})`.
#[derive(Debug, Clone)]
pub struct NativeAlgorithm {
    updates: Updates,
    scheme_dim: usize,
}

impl NativeAlgorithm {
    pub fn new(problem: &SplittingProblem, alg: &Algorithm) -> Result<Self> {
        problem.validate()?;
        let scheme_dim = problem.state_dim();
        let updates = match (alg, problem) {
            (Algorithm::RelaxedAdmm { tau, gamma }, SplittingProblem::TwoBlockConstrained { f, g, a, b, c }) => {
                let (n, l) = (f.dim(), g.dim());
                admm_updates(f, g, a, b, c, *tau, *gamma, Matrix::zeros(n, n), Matrix::zeros(l, l), true)?
            }
            (Algorithm::ProximalAdmm { tau, p1, p2 }, SplittingProblem::TwoBlockConstrained { f, g, a, b, c }) => {
                let p1 = proximal_term("p1", p1, *tau, a)?;
                let p2 = proximal_term("p2", p2, *tau, b)?;
                admm_updates(f, g, a, b, c, *tau, 1.0, p1, p2, false)?
            }
            (Algorithm::PdhgMp { sigma, tau }, SplittingProblem::Composite { f, g, a }) => Updates::Pdhg {
                a: a.clone(),
                sigma: *sigma,
                tau: *tau,
                f: f.clone(),
                g_conj: g.conjugate()?,
                primal_extrapolation: false,
            },
            (Algorithm::PdhgMu { sigma, tau }, SplittingProblem::Composite { f, g, a }) => Updates::Pdhg {
                a: a.clone(),
                sigma: *sigma,
                tau: *tau,
                f: f.clone(),
                g_conj: g.conjugate()?,
                primal_extrapolation: true,
            },
            (Algorithm::Alm { tau }, SplittingProblem::LinearEquality { h, a, c }) => Updates::Alm {
                x_step: Penalized::new(h, &(a.transpose() * a * *tau), "alm x-step")?,
                a: a.clone(),
                c: c.clone(),
                tau: *tau,
            },
            (Algorithm::LinearizedAlm { tau, rho }, SplittingProblem::LinearEquality { h, a, c }) => Updates::Lalm {
                a: a.clone(),
                c: c.clone(),
                tau: *tau,
                rho: *rho,
                h: h.clone(),
            },
            (Algorithm::LinearizedBregman { tau, rho }, SplittingProblem::LinearEquality { h, a, c }) => {
                Updates::Bregman {
                    a: a.clone(),
                    c: c.clone(),
                    prox_weight: rho * tau,
                    rho: *rho,
                    h: h.clone(),
                }
            }
            (Algorithm::ProximalPoint { rho, gamma, linearize }, SplittingProblem::SingleFunction { h, l, shift }) => {
                let n = h.dim();
                let step = if *linearize {
                    None
                } else {
                    Some(Penalized::new(h, &(l + Matrix::identity(n, n) * *rho), "proximal step")?)
                };
                Updates::ProximalPoint {
                    l: l.clone(),
                    shift: shift.clone(),
                    rho: *rho,
                    gamma: *gamma,
                    h: h.clone(),
                    step,
                }
            }
            _ => return Err(super::kind_mismatch(alg, problem)),
        };
        Ok(NativeAlgorithm { updates, scheme_dim })
    }

    /// Native state matching the scheme state `b0`.
    pub fn initial_state(&self, b0: &Vector) -> Result<Vector> {
        linalg::ensure_len("initial state", b0, self.scheme_dim)?;
        match &self.updates {
            Updates::Pdhg { a, tau, f, primal_extrapolation: true, .. } => {
                let m = a.nrows();
                let s0 = b0.rows(0, m).into_owned();
                let x_prev = b0.rows(m, a.ncols()).into_owned();
                let x0 = f.prox(&(&x_prev - a.transpose() * &s0 * *tau), *tau)?;
                Ok(linalg::concat(&[&s0, &x0, &x_prev]))
            }
            _ => Ok(b0.clone()),
        }
    }

    /// Scheme state corresponding to a native state.
    pub fn scheme_state(&self, state: &Vector) -> Vector {
        match &self.updates {
            Updates::Pdhg { a, primal_extrapolation: true, .. } => {
                let (m, n) = a.shape();
                linalg::concat(&[&state.rows(0, m).into_owned(), &state.rows(m + n, n).into_owned()])
            }
            _ => state.clone(),
        }
    }

    pub fn step(&self, state: &Vector) -> Result<Vector> {
        match &self.updates {
            Updates::Admm { a, b, c, tau, gamma, p1, p2, x_step, u_step, relaxed } => {
                let (n, l, m) = (a.ncols(), b.ncols(), c.len());
                let x = state.rows(0, n).into_owned();
                let u = state.rows(n, l).into_owned();
                let s = state.rows(n + l, m).into_owned();
                let s_scaled = &s / *tau;
                let z = c - b * &u + &s_scaled;
                let x_new = x_step.solve(&(a.transpose() * z * *tau + p1 * &x))?;
                let ax = a * &x_new;
                let (u_new, s_new) = if *relaxed {
                    let bu = b * &u;
                    let z = &bu - (&ax + &bu - c) * *gamma + &s_scaled;
                    let u_new = u_step.solve(&(b.transpose() * z * *tau))?;
                    let s_new = &s - b * (&u_new - &u) * *tau - (&ax + &bu - c) * (tau * gamma);
                    (u_new, s_new)
                } else {
                    let z = c - &ax + &s_scaled;
                    let u_new = u_step.solve(&(b.transpose() * z * *tau + p2 * &u))?;
                    let s_new = &s - (&ax + b * &u_new - c) * *tau;
                    (u_new, s_new)
                };
                Ok(linalg::concat(&[&x_new, &u_new, &s_new]))
            }
            Updates::Pdhg { a, sigma, tau, f, g_conj, primal_extrapolation } => {
                let (m, n) = a.shape();
                let s = state.rows(0, m).into_owned();
                let x = state.rows(m, n).into_owned();
                if *primal_extrapolation {
                    let x_prev = state.rows(m + n, n).into_owned();
                    let s_new = g_conj.prox(&(&s + a * (&x * 2.0 - &x_prev) * *sigma), *sigma)?;
                    let x_new = f.prox(&(&x - a.transpose() * &s_new * *tau), *tau)?;
                    Ok(linalg::concat(&[&s_new, &x_new, &x]))
                } else {
                    let s_new = g_conj.prox(&(&s + a * &x * *sigma), *sigma)?;
                    let x_new = f.prox(&(&x - a.transpose() * (&s_new * 2.0 - &s) * *tau), *tau)?;
                    Ok(linalg::concat(&[&s_new, &x_new]))
                }
            }
            Updates::Alm { a, c, tau, x_step } => {
                let (m, n) = a.shape();
                let s = state.rows(n, m).into_owned();
                let x_new = x_step.solve(&(a.transpose() * (c * *tau + &s)))?;
                let s_new = &s - (a * &x_new - c) * *tau;
                Ok(linalg::concat(&[&x_new, &s_new]))
            }
            Updates::Lalm { a, c, tau, rho, h } => {
                let (m, n) = a.shape();
                let x = state.rows(0, n).into_owned();
                let s = state.rows(n, m).into_owned();
                let grad = a.transpose() * ((a * &x - c) * *tau - &s);
                let x_new = h.prox(&(&x - grad / *rho), 1.0 / rho)?;
                let s_new = &s - (a * &x_new - c) * *tau;
                Ok(linalg::concat(&[&x_new, &s_new]))
            }
            Updates::Bregman { a, c, prox_weight, rho, h } => {
                let (m, n) = a.shape();
                let s = state.rows(n, m).into_owned();
                let x_new = h.prox(&(a.transpose() * &s * *rho), *prox_weight)?;
                let s_new = &s - (a * &x_new - c);
                Ok(linalg::concat(&[&x_new, &s_new]))
            }
            Updates::ProximalPoint { l, shift, rho, gamma, h, step } => {
                let x_tilde = match step {
                    Some(p) => p.solve(&(state * *rho - shift))?,
                    None => h.prox(&(state - (l * state + shift) / *rho), 1.0 / rho)?,
                };
                Ok(state + (x_tilde - state) * *gamma)
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn admm_updates(
    f: &ProxFn,
    g: &ProxFn,
    a: &Matrix,
    b: &Matrix,
    c: &Vector,
    tau: f64,
    gamma: f64,
    p1: Matrix,
    p2: Matrix,
    relaxed: bool,
) -> Result<Updates> {
    let x_step = Penalized::new(f, &(a.transpose() * a * tau + &p1), "admm x-step")?;
    let u_step = Penalized::new(g, &(b.transpose() * b * tau + &p2), "admm u-step")?;
    Ok(Updates::Admm {
        a: a.clone(),
        b: b.clone(),
        c: c.clone(),
        tau,
        gamma,
        p1,
        p2,
        x_step,
        u_step,
        relaxed,
    })
}

/// Largest relative gap `||b_k - native_k|| / max(1, ||native_k||)` over `steps` iterations of
/// the scheme and the native algorithm started from `b0`.
pub fn twin_deviation(
    scheme: &ResolventScheme,
    native: &NativeAlgorithm,
    b0: &Vector,
    steps: usize,
) -> Result<f64> {
    let mut b = b0.clone();
    let mut state = native.initial_state(b0)?;
    let mut worst = 0.0_f64;
    for _ in 0..steps {
        b = scheme.apply_generalized(&b)?.0;
        state = native.step(&state)?;
        worst = worst.max(linalg::rel_diff(&b, &native.scheme_state(&state)));
    }
    Ok(worst)
}
