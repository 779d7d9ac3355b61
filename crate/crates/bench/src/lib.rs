//! Fixtures shared by the benchmarks in `benches/`.

use resolvent_core::splitting::{self, generate, Generator, ProblemForm};
use resolvent_core::{sampling, Algorithm, MonotoneBlockOperator, ProxFn, ResolventScheme, SplittingProblem, Vector};

/// Dense affine operator `L x + c` with `L = PSD + skew`, in an SPD metric: the `dense_linear` path.
pub fn dense_linear_scheme(n: usize, seed: u64) -> ResolventScheme {
    let mut rng = sampling::rng(seed);
    let l = sampling::spd_matrix(&mut rng, n, 0.0) + sampling::skew_matrix(&mut rng, n, 1.0);
    let op = MonotoneBlockOperator::new(vec![ProxFn::zero(n)], l, sampling::normal_vector(&mut rng, n))
        .expect("valid operator");
    ResolventScheme::plain(op, sampling::spd_matrix(&mut rng, n, 0.5)).expect("valid scheme")
}

/// Scaled-identity metric over an `l1` block: the `scalar_prox` path.
pub fn scalar_prox_scheme(n: usize) -> ResolventScheme {
    let op = MonotoneBlockOperator::new(
        vec![ProxFn::l1(0.1, n).expect("positive weight")],
        resolvent_core::Matrix::zeros(n, n),
        Vector::zeros(n),
    )
    .expect("valid operator");
    ResolventScheme::plain(op, resolvent_core::Matrix::identity(n, n) * 2.0).expect("valid scheme")
}

/// Lasso in composite form with PDHG steps at `0.9 / ||A||`.
pub fn pdhg_lasso(n: usize, seed: u64) -> (SplittingProblem, Algorithm) {
    let problem = generate(Generator::Lasso, ProblemForm::Composite, n, seed).expect("generator");
    let SplittingProblem::Composite { a, .. } = &problem else { unreachable!("composite form") };
    let step = 0.9 / resolvent_core::linalg::spectral_norm(a);
    (problem, Algorithm::PdhgMp { sigma: step, tau: step })
}

/// Lasso in two-block form with over-relaxed ADMM.
pub fn admm_lasso(n: usize, seed: u64) -> (SplittingProblem, Algorithm) {
    let problem = generate(Generator::Lasso, ProblemForm::TwoBlock, n, seed).expect("generator");
    (problem, Algorithm::RelaxedAdmm { tau: 1.0, gamma: 1.5 })
}

pub fn start(scheme: &ResolventScheme, seed: u64) -> Vector {
    sampling::normal_vector(&mut sampling::rng(seed), scheme.dim())
}

pub fn build(case: &(SplittingProblem, Algorithm)) -> ResolventScheme {
    splitting::build(&case.0, &case.1).expect("admissible parameters")
}
