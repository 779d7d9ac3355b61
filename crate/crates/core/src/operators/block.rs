use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::ProxFn;
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::sampling::{self, Rng};

/// `A(b) = blockdiag(dh_1, ..., dh_m)(b) + L b + shift`.
///
/// Invariant: `sum(block dims) == dim(L) == dim(shift)` and the declared `mu` is certified by
/// `lambda_min(diag(mu_i I) + sym(L))`, where `mu_i` are the block strong-convexity moduli.
#[derive(Debug, Clone)]
pub struct MonotoneBlockOperator {
    blocks: Vec<ProxFn>,
    offsets: Vec<usize>,
    linear_part: Matrix,
    shift: Vector,
    mu: f64,
    certificate: f64,
}

/// Outcome of a sampled strong-monotonicity audit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub samples: usize,
    pub min_ratio: f64,
    pub declared_mu: f64,
    pub violated: bool,
}

const AUDIT_TOL: f64 = 1e-8;

impl MonotoneBlockOperator {
    /// Operator with `mu = 0`.
    pub fn new(blocks: Vec<ProxFn>, linear_part: Matrix, shift: Vector) -> Result<Self> {
        Self::with_modulus(blocks, linear_part, shift, 0.0)
    }

    /// Operator with a declared strong-monotonicity modulus, rejected unless certified.
    pub fn with_modulus(
        blocks: Vec<ProxFn>,
        linear_part: Matrix,
        shift: Vector,
        mu: f64,
    ) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::param("blocks", "at least one block is required"));
        }
        for b in &blocks {
            b.validate()?;
        }
        let mut offsets = Vec::with_capacity(blocks.len() + 1);
        offsets.push(0);
        for b in &blocks {
            offsets.push(offsets.last().copied().unwrap_or(0) + b.dim());
        }
        let n = *offsets.last().expect("offsets non-empty");
        let ln = linalg::ensure_square(&linear_part)?;
        if ln != n {
            return Err(Error::dims("linear part vs block dims", n, ln));
        }
        linalg::ensure_len("shift", &shift, n)?;
        if !(mu.is_finite() && mu >= 0.0) {
            return Err(Error::param("mu", format!("must be finite and nonnegative, got {mu}")));
        }
        let moduli: Vec<Matrix> = blocks
            .iter()
            .map(|b| Matrix::identity(b.dim(), b.dim()) * b.strong_convexity())
            .collect();
        let lifted = linalg::block_diag(&moduli) + linalg::sym_part(&linear_part);
        let (vals, _) = linalg::sym_eigen(&lifted)?;
        let certificate = vals[0];
        let tol = linalg::scaled_tol(linalg::spectral_norm(&lifted));
        if certificate < -tol {
            return Err(Error::NotMonotone(format!(
                "lambda_min(block moduli + sym(L)) = {certificate:e} is negative"
            )));
        }
        if mu > certificate + tol {
            return Err(Error::NotMonotone(format!(
                "declared mu = {mu} exceeds certified modulus {certificate}"
            )));
        }
        Ok(MonotoneBlockOperator {
            blocks,
            offsets,
            linear_part,
            shift,
            mu,
            certificate: certificate.max(0.0),
        })
    }

    /// Operator with `mu` set to its certified modulus.
    pub fn with_certified_modulus(
        blocks: Vec<ProxFn>,
        linear_part: Matrix,
        shift: Vector,
    ) -> Result<Self> {
        let op = Self::new(blocks, linear_part, shift)?;
        let mu = op.certificate;
        Ok(MonotoneBlockOperator { mu, ..op })
    }

    pub fn blocks(&self) -> &[ProxFn] {
        &self.blocks
    }

    pub fn block_range(&self, i: usize) -> Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    pub fn linear_part(&self) -> &Matrix {
        &self.linear_part
    }

    pub fn shift(&self) -> &Vector {
        &self.shift
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn total_dim(&self) -> usize {
        self.shift.len()
    }

    /// `lambda_min(diag(mu_i I) + sym(L))`, clamped at zero.
    pub fn modulus_certificate(&self) -> f64 {
        self.certificate
    }

    /// Every block is affine in its subgradient (zero, squared-l2, quadratic).
    pub fn is_linear(&self) -> bool {
        self.blocks.iter().all(|b| b.as_quadratic().is_some())
    }

    /// `(K, c)` with `A(b) = K b + c` when the operator is affine.
    pub fn as_affine(&self) -> Option<(Matrix, Vector)> {
        let mut k = self.linear_part.clone();
        let mut c = self.shift.clone();
        for (i, b) in self.blocks.iter().enumerate() {
            let (h, q) = b.as_quadratic()?;
            let r = self.block_range(i);
            let mut view = k.view_mut((r.start, r.start), (r.len(), r.len()));
            view += h;
            let mut cv = c.rows_mut(r.start, r.len());
            cv += q;
        }
        Some((k, c))
    }

    /// `sum_i h_i(x_i) + x^T L x / 2 + <shift, x>` when `L` is symmetric PSD; `None` otherwise.
    pub fn objective_value(&self, x: &Vector) -> Option<f64> {
        if x.len() != self.total_dim() || !linalg::is_symmetric(&self.linear_part) {
            return None;
        }
        let (vals, _) = linalg::sym_eigen(&self.linear_part).ok()?;
        let tol = linalg::scaled_tol(vals.last().map_or(0.0, |v| v.abs()));
        if vals.first().is_some_and(|&v| v < -tol) {
            return None;
        }
        let mut total = 0.0;
        for (i, b) in self.blocks.iter().enumerate() {
            let r = self.block_range(i);
            total += b.value(&x.rows(r.start, r.len()).into_owned()).ok()?;
        }
        Some(total + 0.5 * x.dot(&(&self.linear_part * x)) + self.shift.dot(x))
    }

    /// `A(x)` using the given block subgradient selections `g`.
    pub fn apply_with_selection(&self, x: &Vector, g: &Vector) -> Vector {
        g + &self.linear_part * x + &self.shift
    }

    /// Random graph point `(x, a)` with `a in A(x)`: each block draws `z`, sets
    /// `x_i = prox_{h_i}(z_i)` and selects `z_i - x_i in dh_i(x_i)`.
    pub fn graph_sample(&self, rng: &mut Rng, scale: f64) -> (Vector, Vector) {
        let n = self.total_dim();
        let z = sampling::normal_vector(rng, n) * scale;
        let mut x = Vector::zeros(n);
        for (i, b) in self.blocks.iter().enumerate() {
            let r = self.block_range(i);
            let zi = z.rows(r.start, r.len()).into_owned();
            let p = b.prox(&zi, 1.0).expect("validated block and matching dims");
            x.rows_mut(r.start, r.len()).copy_from(&p);
        }
        let g = &z - &x;
        let a = self.apply_with_selection(&x, &g);
        (x, a)
    }
}

/// Minimum of `<Ax - Ay, x - y> / ||x - y||^2` over sampled graph pairs.
pub fn strong_monotonicity_audit(
    op: &MonotoneBlockOperator,
    samples: usize,
    rng: &mut Rng,
) -> MonotonicityReport {
    let mut min_ratio = f64::INFINITY;
    let mut used = 0;
    for s in 0..samples.max(1) {
        let scale = [0.1, 1.0, 10.0][s % 3];
        let (x, ax) = op.graph_sample(rng, scale);
        let (y, ay) = op.graph_sample(rng, scale);
        let d = &x - &y;
        let dd = d.norm_squared();
        if dd <= f64::MIN_POSITIVE {
            continue;
        }
        used += 1;
        min_ratio = min_ratio.min((&ax - &ay).dot(&d) / dd);
    }
    MonotonicityReport {
        samples: used,
        min_ratio,
        declared_mu: op.mu(),
        violated: min_ratio < op.mu() - AUDIT_TOL,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn v(d: &[f64]) -> Vector {
        Vector::from_row_slice(d)
    }

    #[test]
    fn dims_must_agree() {
        let err = MonotoneBlockOperator::new(
            vec![ProxFn::zero(2)],
            Matrix::zeros(3, 3),
            Vector::zeros(3),
        );
        assert!(matches!(err, Err(Error::DimensionMismatch { .. })));
        let err = MonotoneBlockOperator::new(vec![ProxFn::zero(2)], Matrix::zeros(2, 2), Vector::zeros(1));
        assert!(matches!(err, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn overclaimed_modulus_rejected() {
        let err = MonotoneBlockOperator::with_modulus(
            vec![ProxFn::l1(1.0, 2).unwrap()],
            Matrix::zeros(2, 2),
            Vector::zeros(2),
            0.5,
        );
        assert!(matches!(err, Err(Error::NotMonotone(_))));
        let neg = MonotoneBlockOperator::new(
            vec![ProxFn::zero(1)],
            Matrix::from_element(1, 1, -1.0),
            Vector::zeros(1),
        );
        assert!(matches!(neg, Err(Error::NotMonotone(_))));
    }

    #[test]
    fn objective_examples() {
        let l1 = MonotoneBlockOperator::new(
            vec![ProxFn::l1(1.0, 2).unwrap()],
            Matrix::zeros(2, 2),
            Vector::zeros(2),
        )
        .unwrap();
        assert_eq!(l1.objective_value(&v(&[-2.0, 3.0])), Some(5.0));

        let quad = MonotoneBlockOperator::new(
            vec![ProxFn::zero(2)],
            Matrix::identity(2, 2),
            v(&[-1.0, -1.0]),
        )
        .unwrap();
        let x = v(&[1.0, 1.0]);
        let h = |p: &Vector| quad.objective_value(p).unwrap();
        assert_relative_eq!(h(&x), -1.0, epsilon = 1e-15);
        // central differences against the gradient L x + shift, which vanishes at x
        let eps = 1e-5;
        for i in 0..2 {
            let mut e = Vector::zeros(2);
            e[i] = eps;
            let fd = (h(&(&x + &e)) - h(&(&x - &e))) / (2.0 * eps);
            assert!(fd.abs() < 1e-8);
        }

        let skew = MonotoneBlockOperator::new(
            vec![ProxFn::zero(1), ProxFn::zero(1)],
            Matrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]),
            Vector::zeros(2),
        )
        .unwrap();
        assert_eq!(skew.objective_value(&v(&[1.0, 1.0])), None);
    }

    #[test]
    fn audit_examples() {
        let mut rng = sampling::rng(7);
        let ident = MonotoneBlockOperator::with_modulus(
            vec![ProxFn::squared_l2(1.0, Vector::zeros(3)).unwrap()],
            Matrix::zeros(3, 3),
            Vector::zeros(3),
            1.0,
        )
        .unwrap();
        let r = strong_monotonicity_audit(&ident, 200, &mut rng);
        assert!(!r.violated && r.min_ratio >= 1.0 - 1e-8, "{r:?}");

        let skew = MonotoneBlockOperator::new(
            vec![ProxFn::zero(4)],
            sampling::skew_matrix(&mut rng, 4, 1.0),
            Vector::zeros(4),
        )
        .unwrap();
        let r = strong_monotonicity_audit(&skew, 200, &mut rng);
        assert!(!r.violated && r.min_ratio.abs() < 1e-8, "{r:?}");

        let diag = MonotoneBlockOperator::with_modulus(
            vec![ProxFn::quadratic(Matrix::from_diagonal(&v(&[2.0, 5.0])), Vector::zeros(2)).unwrap()],
            Matrix::zeros(2, 2),
            Vector::zeros(2),
            2.0,
        )
        .unwrap();
        let r = strong_monotonicity_audit(&diag, 200, &mut rng);
        assert!(r.min_ratio >= 2.0 - 1e-8 && r.min_ratio <= 5.0 + 1e-8, "{r:?}");
        assert!(!r.violated);
    }

    #[test]
    fn affine_form_matches_selection() {
        let op = MonotoneBlockOperator::new(
            vec![
                ProxFn::squared_l2(2.0, v(&[1.0])).unwrap(),
                ProxFn::zero(1),
            ],
            Matrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]),
            v(&[0.0, -3.0]),
        )
        .unwrap();
        let (k, c) = op.as_affine().unwrap();
        let x = v(&[0.5, 2.0]);
        // h_1'(x) = 2 (x - 1) = -1, h_2' = 0
        let expect = op.apply_with_selection(&x, &v(&[-1.0, 0.0]));
        assert_relative_eq!(&k * &x + c, expect, epsilon = 1e-15);
    }
}
