//! Seeded random instances.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::operators::ProxFn;
use crate::sampling::{self, Rng};

use super::SplittingProblem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    /// `min lambda ||x||_1 + ||D x - y||^2 / 2` with square Gaussian `D`.
    Lasso,
    /// Strongly convex quadratic `x^T H x / 2 + q^T x` with `n/2` equality constraints.
    EqualityQp,
    /// `min ||x||_1  s.t.  A x = c` with a sparse planted solution.
    BasisPursuit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemForm {
    Composite,
    TwoBlock,
    LinearEquality,
    SingleFunction,
}

impl Generator {
    pub const ALL: [Generator; 3] = [Generator::Lasso, Generator::EqualityQp, Generator::BasisPursuit];

    pub fn name(self) -> &'static str {
        match self {
            Generator::Lasso => "lasso",
            Generator::EqualityQp => "equality_qp",
            Generator::BasisPursuit => "basis_pursuit",
        }
    }

    pub fn forms(self) -> &'static [ProblemForm] {
        match self {
            Generator::Lasso => &[ProblemForm::Composite, ProblemForm::TwoBlock, ProblemForm::SingleFunction],
            Generator::EqualityQp => &[
                ProblemForm::LinearEquality,
                ProblemForm::TwoBlock,
                ProblemForm::SingleFunction,
            ],
            Generator::BasisPursuit => &[ProblemForm::LinearEquality],
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            Generator::Lasso => "l1-regularized least squares; forms composite, two_block, single_function",
            Generator::EqualityQp => {
                "strongly convex QP; linear_equality adds n/2 constraints, two_block adds a box [-1, 1], \
                 single_function adds 0.1 ||x||_1"
            }
            Generator::BasisPursuit => "min ||x||_1 subject to A x = c; form linear_equality",
        }
    }
}

fn sparse_vector(rng: &mut Rng, n: usize) -> Vector {
    let mut x = Vector::zeros(n);
    for _ in 0..(n / 5).max(1) {
        let i = sampling::index(rng, n);
        x[i] = sampling::uniform(rng, 1.0, 2.0) * if sampling::uniform(rng, 0.0, 1.0) < 0.5 { -1.0 } else { 1.0 };
    }
    x
}

/// Draw an instance of `generator` in `form` with `dim` primal variables.
pub fn generate(generator: Generator, form: ProblemForm, dim: usize, seed: u64) -> Result<SplittingProblem> {
    if dim < 2 {
        return Err(Error::param("dim", format!("must be at least 2, got {dim}")));
    }
    if !generator.forms().contains(&form) {
        return Err(Error::InvalidInstance(format!(
            "generator {} has no {form:?} form",
            generator.name()
        )));
    }
    let mut rng = sampling::rng(seed);
    let n = dim;
    let problem = match generator {
        Generator::Lasso => {
            let d = sampling::normal_matrix(&mut rng, n, n) / (n as f64).sqrt();
            let x_true = sparse_vector(&mut rng, n);
            let y = &d * x_true + sampling::normal_vector(&mut rng, n) * 0.01;
            let lambda = 0.1 * (d.transpose() * &y).amax();
            match form {
                ProblemForm::Composite => SplittingProblem::Composite {
                    f: ProxFn::l1(lambda, n)?,
                    g: ProxFn::squared_l2(1.0, y)?,
                    a: d,
                },
                ProblemForm::TwoBlock => SplittingProblem::TwoBlockConstrained {
                    f: ProxFn::quadratic(d.transpose() * &d, -(d.transpose() * &y))?,
                    g: ProxFn::l1(lambda, n)?,
                    a: Matrix::identity(n, n),
                    b: -Matrix::identity(n, n),
                    c: Vector::zeros(n),
                },
                _ => SplittingProblem::SingleFunction {
                    h: ProxFn::l1(lambda, n)?,
                    l: d.transpose() * &d,
                    shift: -(d.transpose() * &y),
                },
            }
        }
        Generator::EqualityQp => {
            let h = sampling::spd_matrix(&mut rng, n, 0.1);
            let q = sampling::normal_vector(&mut rng, n);
            match form {
                ProblemForm::LinearEquality => {
                    let m = (n / 2).max(1);
                    let a = sampling::normal_matrix(&mut rng, m, n) / (n as f64).sqrt();
                    let c = &a * sampling::normal_vector(&mut rng, n);
                    SplittingProblem::LinearEquality { h: ProxFn::quadratic(h, q)?, a, c }
                }
                ProblemForm::TwoBlock => SplittingProblem::TwoBlockConstrained {
                    f: ProxFn::quadratic(h, q * 3.0)?,
                    g: ProxFn::box_indicator(Vector::from_element(n, -1.0), Vector::from_element(n, 1.0))?,
                    a: Matrix::identity(n, n),
                    b: -Matrix::identity(n, n),
                    c: Vector::zeros(n),
                },
                _ => SplittingProblem::SingleFunction { h: ProxFn::l1(0.1, n)?, l: h, shift: q },
            }
        }
        Generator::BasisPursuit => {
            let m = (n / 2).max(1);
            let a = sampling::normal_matrix(&mut rng, m, n) / (m as f64).sqrt();
            let c = &a * sparse_vector(&mut rng, n);
            SplittingProblem::LinearEquality { h: ProxFn::l1(1.0, n)?, a, c }
        }
    };
    problem.validate()?;
    Ok(problem)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_seeded() {
        for g in Generator::ALL {
            for &form in g.forms() {
                let a = generate(g, form, 10, 3).unwrap();
                let b = generate(g, form, 10, 3).unwrap();
                assert_eq!(a, b);
                assert_ne!(a, generate(g, form, 10, 4).unwrap());
            }
        }
    }

    #[test]
    fn unsupported_form_and_dim() {
        assert!(generate(Generator::BasisPursuit, ProblemForm::Composite, 10, 0).is_err());
        assert!(generate(Generator::Lasso, ProblemForm::Composite, 1, 0).is_err());
    }
}
