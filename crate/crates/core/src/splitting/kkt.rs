use crate::error::Result;
use crate::linalg::{self, Vector};

use super::{Algorithm, SplittingProblem};

/// Largest violation among the optimality conditions of `problem` at scheme state `b`:
/// primal feasibility and one subgradient distance per function.
///
/// For linearized Bregman the conditions are those of `min tau h(x) + ||x||^2 / (2 rho)`
/// subject to the same constraints.
pub fn kkt_residual(problem: &SplittingProblem, alg: &Algorithm, b: &Vector) -> Result<f64> {
    linalg::ensure_len("kkt state", b, problem.state_dim())?;
    let part = |start: usize, len: usize| b.rows(start, len).into_owned();
    let worst = match problem {
        SplittingProblem::TwoBlockConstrained { f, g, a, b: bm, c } => {
            let (n, l, m) = (f.dim(), g.dim(), c.len());
            let (x, u, s) = (part(0, n), part(n, l), part(n + l, m));
            let feas = (a * &x + bm * &u - c).norm();
            let fx = f.subgradient_distance(&x, &(a.transpose() * &s))?;
            let gu = g.subgradient_distance(&u, &(bm.transpose() * &s))?;
            feas.max(fx).max(gu)
        }
        SplittingProblem::Composite { f, g, a } => {
            let (m, n) = a.shape();
            let (s, x) = (part(0, m), part(m, n));
            let fx = f.subgradient_distance(&x, &-(a.transpose() * &s))?;
            let gs = g.conjugate()?.subgradient_distance(&s, &(a * &x))?;
            fx.max(gs)
        }
        SplittingProblem::LinearEquality { h, a, c } => {
            let (m, n) = a.shape();
            let (x, s) = (part(0, n), part(n, m));
            let feas = (a * &x - c).norm();
            let stat = match alg {
                Algorithm::LinearizedBregman { tau, rho } => {
                    h.scaled(*tau)?.subgradient_distance(&x, &(a.transpose() * &s - &x / *rho))?
                }
                _ => h.subgradient_distance(&x, &(a.transpose() * &s))?,
            };
            feas.max(stat)
        }
        SplittingProblem::SingleFunction { h, l, shift } => {
            h.subgradient_distance(b, &-(l * b + shift))?
        }
    };
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::operators::ProxFn;

    #[test]
    fn basis_pursuit_optimum() {
        // min |x1| + |x2| s.t. x1 + 2 x2 = 2: x = (0, 1), multiplier 1/2.
        let problem = SplittingProblem::LinearEquality {
            h: ProxFn::l1(1.0, 2).unwrap(),
            a: Matrix::from_row_slice(1, 2, &[1.0, 2.0]),
            c: Vector::from_row_slice(&[2.0]),
        };
        let alg = Algorithm::Alm { tau: 1.0 };
        let opt = Vector::from_row_slice(&[0.0, 1.0, 0.5]);
        assert!(kkt_residual(&problem, &alg, &opt).unwrap() < 1e-15);
        let off = Vector::from_row_slice(&[0.0, 1.0, 0.6]);
        assert!(kkt_residual(&problem, &alg, &off).unwrap() > 0.1);
    }
}
