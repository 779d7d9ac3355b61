//! `Q`-based geometry: `<a|b>_Q = <Qa, b>` and `||a||_Q^2 = <Qa, a>` for an arbitrary square `Q`.
//!
//! No symmetry or definiteness is assumed by the raw forms; [`Metric`] caches the structural
//! facts (symmetry, definiteness, spectral norm, square roots) that downstream checks gate on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Symmetry {
    Symmetric,
    Nonsymmetric,
}

/// Definiteness of the symmetric part `(Q + Q^T) / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Definiteness {
    Indefinite,
    Psd,
    Pd,
}

#[derive(Debug, Clone)]
pub struct Metric {
    matrix: Matrix,
    symmetry: Symmetry,
    definiteness: Definiteness,
    op_norm: f64,
    lambda_min: f64,
    lambda_max: f64,
    sqrt_pair: Option<(Matrix, Matrix)>,
}

impl Metric {
    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    pub fn definiteness(&self) -> Definiteness {
        self.definiteness
    }

    /// Spectral norm `||Q||`.
    pub fn op_norm(&self) -> f64 {
        self.op_norm
    }

    /// Extreme eigenvalues of the symmetric part, after clamping near-zero values to zero.
    pub fn sym_eigen_bounds(&self) -> (f64, f64) {
        (self.lambda_min, self.lambda_max)
    }

    pub fn sqrt_pair(&self) -> Option<(&Matrix, &Matrix)> {
        self.sqrt_pair.as_ref().map(|(a, b)| (a, b))
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetry == Symmetry::Symmetric
    }

    pub fn is_symmetric_psd(&self) -> bool {
        self.is_symmetric() && self.definiteness != Definiteness::Indefinite
    }

    pub fn is_symmetric_pd(&self) -> bool {
        self.is_symmetric() && self.definiteness == Definiteness::Pd
    }

    pub fn inner(&self, a: &Vector, b: &Vector) -> Result<f64> {
        q_inner(a, b, self)
    }

    pub fn norm_sq(&self, a: &Vector) -> Result<f64> {
        q_norm_sq(a, self)
    }

    /// `||a||_Q`, clamping tiny negative rounding of a PSD form to zero.
    pub fn norm(&self, a: &Vector) -> Result<f64> {
        Ok(self.norm_sq(a)?.max(0.0).sqrt())
    }

    /// Scalar `c` when `Q = c I`.
    pub fn as_scalar(&self) -> Option<f64> {
        linalg::as_scaled_identity(&self.matrix)
    }

    pub fn as_diagonal(&self) -> Option<Vector> {
        linalg::as_diagonal(&self.matrix)
    }
}

fn check_operands(a: &Vector, b: &Vector, q: &Metric) -> Result<()> {
    let n = q.dim();
    if a.len() != n {
        return Err(Error::dims("q_inner operand `a` vs metric", n, a.len()));
    }
    if b.len() != n {
        return Err(Error::dims("q_inner operand `b` vs metric", n, b.len()));
    }
    Ok(())
}

/// `<Qa, b>` as a bilinear form; no symmetrization.
pub fn q_inner(a: &Vector, b: &Vector, q: &Metric) -> Result<f64> {
    check_operands(a, b, q)?;
    Ok((q.matrix() * a).dot(b))
}

/// `<Qa, a>`; may be negative when `Q` is indefinite.
pub fn q_norm_sq(a: &Vector, q: &Metric) -> Result<f64> {
    q_inner(a, a, q)
}

/// Build a [`Metric`] from a square matrix, classifying symmetry and definiteness.
///
/// Tolerances are absolute `1e-9` scaled by `max(1, ||Q||)`; eigenvalues of the symmetric part
/// inside `[-tol, tol]` count as zero.
pub fn classify_metric(matrix: Matrix) -> Result<Metric> {
    linalg::ensure_square(&matrix)?;
    if !matrix.iter().all(|x| x.is_finite()) {
        return Err(Error::Eigen("metric has non-finite entries".into()));
    }
    let op_norm = linalg::spectral_norm(&matrix);
    let tol = linalg::scaled_tol(op_norm);
    let symmetry = if linalg::max_asymmetry(&matrix) <= tol {
        Symmetry::Symmetric
    } else {
        Symmetry::Nonsymmetric
    };
    let (values, _) = linalg::sym_eigen(&matrix)?;
    let clamp = |v: f64| if v.abs() <= tol { 0.0 } else { v };
    let lambda_min = values.first().copied().map(clamp).unwrap_or(0.0);
    let lambda_max = values.last().copied().map(clamp).unwrap_or(0.0);
    let definiteness = if lambda_min > 0.0 {
        Definiteness::Pd
    } else if lambda_min == 0.0 {
        Definiteness::Psd
    } else {
        Definiteness::Indefinite
    };
    let sqrt_pair = if symmetry == Symmetry::Symmetric && definiteness == Definiteness::Pd {
        Some(linalg::sqrt_pair(&matrix)?)
    } else {
        None
    };
    Ok(Metric {
        matrix,
        symmetry,
        definiteness,
        op_norm,
        lambda_min,
        lambda_max,
        sqrt_pair,
    })
}

/// Extreme eigenvalues of a symmetric matrix.
pub fn spectral_bounds(matrix: &Matrix) -> Result<(f64, f64)> {
    linalg::ensure_square(matrix)?;
    let asym = linalg::max_asymmetry(matrix);
    if asym > linalg::scaled_tol(linalg::max_abs(matrix)) {
        return Err(Error::NotSymmetric { asymmetry: asym });
    }
    let (values, _) = linalg::sym_eigen(matrix)?;
    match (values.first(), values.last()) {
        (Some(&lo), Some(&hi)) => Ok((lo, hi)),
        _ => Err(Error::Eigen("empty matrix has no spectrum".into())),
    }
}
