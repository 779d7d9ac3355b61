//! Dense linear-algebra helpers shared by every module.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Relative tolerance used for structural tests (symmetry, definiteness, diagonal form).
pub const STRUCTURE_TOL: f64 = 1e-9;

pub fn ensure_square(m: &Matrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

pub fn ensure_len(context: &str, v: &Vector, expected: usize) -> Result<()> {
    if v.len() != expected {
        return Err(Error::dims(context, expected, v.len()));
    }
    Ok(())
}

pub fn sym_part(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

pub fn max_asymmetry(m: &Matrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Tolerance scaled by the magnitude of `m`: `STRUCTURE_TOL * max(1, scale)`.
pub fn scaled_tol(scale: f64) -> f64 {
    STRUCTURE_TOL * scale.max(1.0)
}

pub fn is_symmetric(m: &Matrix) -> bool {
    max_asymmetry(m) <= scaled_tol(max_abs(m))
}

/// Largest singular value.
pub fn spectral_norm(m: &Matrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

/// Ascending eigenvalues and matching eigenvectors of the symmetric part of `m`.
pub fn sym_eigen(m: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    ensure_square(m)?;
    let s = sym_part(m);
    let n = s.nrows();
    if n == 0 {
        return Ok((Vec::new(), Matrix::zeros(0, 0)));
    }
    if !s.iter().all(|x| x.is_finite()) {
        return Err(Error::Eigen("matrix has non-finite entries".into()));
    }
    let eig = SymmetricEigen::try_new(s, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Eigen("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = Matrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((values, vectors))
}

/// `Some(c)` when `m` equals `c * I` within the structural tolerance.
pub fn as_scaled_identity(m: &Matrix) -> Option<f64> {
    let n = m.nrows();
    if n == 0 || m.ncols() != n {
        return None;
    }
    let tol = scaled_tol(max_abs(m)) * 1e-3;
    let c = m.diagonal().mean();
    for i in 0..n {
        for j in 0..n {
            let expect = if i == j { c } else { 0.0 };
            if (m[(i, j)] - expect).abs() > tol {
                return None;
            }
        }
    }
    Some(c)
}

/// `Some(diag)` when `m` is diagonal within the structural tolerance.
pub fn as_diagonal(m: &Matrix) -> Option<Vector> {
    let n = m.nrows();
    if m.ncols() != n {
        return None;
    }
    let tol = scaled_tol(max_abs(m)) * 1e-3;
    for i in 0..n {
        for j in 0..n {
            if i != j && m[(i, j)].abs() > tol {
                return None;
            }
        }
    }
    Some(m.diagonal())
}

pub fn block_diag(blocks: &[Matrix]) -> Matrix {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = Matrix::zeros(n, n);
    let mut off = 0;
    for b in blocks {
        out.view_mut((off, off), (b.nrows(), b.ncols())).copy_from(b);
        off += b.nrows();
    }
    out
}

/// Assemble a dense matrix from a grid of blocks. `None` entries are zero blocks; row heights
/// and column widths come from `rows` / `cols`.
pub fn from_blocks(rows: &[usize], cols: &[usize], blocks: &[&[Option<Matrix>]]) -> Matrix {
    let n: usize = rows.iter().sum();
    let m: usize = cols.iter().sum();
    let mut out = Matrix::zeros(n, m);
    let mut r0 = 0;
    for (bi, &h) in rows.iter().enumerate() {
        let mut c0 = 0;
        for (bj, &w) in cols.iter().enumerate() {
            if let Some(b) = &blocks[bi][bj] {
                assert_eq!((b.nrows(), b.ncols()), (h, w), "block ({bi},{bj}) has wrong shape");
                out.view_mut((r0, c0), (h, w)).copy_from(b);
            }
            c0 += w;
        }
        r0 += h;
    }
    out
}

pub fn concat(parts: &[&Vector]) -> Vector {
    let n: usize = parts.iter().map(|p| p.len()).sum();
    let mut out = Vector::zeros(n);
    let mut off = 0;
    for p in parts {
        out.rows_mut(off, p.len()).copy_from(p);
        off += p.len();
    }
    out
}

/// Relative distance `|a - b| / max(1, |b|)`.
pub fn rel_diff(a: &Vector, b: &Vector) -> f64 {
    (a - b).norm() / b.norm().max(1.0)
}

/// Square-root pair `(Q^{1/2}, Q^{-1/2})` of a symmetric positive definite matrix.
pub fn sqrt_pair(m: &Matrix) -> Result<(Matrix, Matrix)> {
    let (values, vectors) = sym_eigen(m)?;
    if values.first().is_some_and(|&v| v <= 0.0) {
        return Err(Error::MetricNotPd("square root requires a positive definite matrix".into()));
    }
    let n = values.len();
    let root = Vector::from_iterator(n, values.iter().map(|v| v.sqrt()));
    let inv_root = root.map(|r| 1.0 / r);
    let half = &vectors * Matrix::from_diagonal(&root) * vectors.transpose();
    let neg_half = &vectors * Matrix::from_diagonal(&inv_root) * vectors.transpose();
    Ok((half, neg_half))
}

/// LU-backed solve that reports singularity instead of returning garbage.
#[derive(Debug, Clone)]
pub struct DenseSolver {
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    n: usize,
}

impl DenseSolver {
    pub fn new(m: &Matrix, what: &str) -> Result<Self> {
        let n = ensure_square(m)?;
        let lu = m.clone().lu();
        // Reject numerically singular systems using the pivot ratio of U.
        let u = lu.u();
        let diag = u.diagonal().map(f64::abs);
        let (lo, hi) = (diag.min(), diag.max());
        if n > 0 && (hi == 0.0 || lo <= hi * 1e-13 || !lo.is_finite()) {
            return Err(Error::Singular(format!("{what} is singular to working precision")));
        }
        Ok(DenseSolver { lu, n })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, rhs: &Vector) -> Vector {
        self.lu.solve(rhs).expect("factorization checked nonsingular at construction")
    }

    pub fn solve_mat(&self, rhs: &Matrix) -> Matrix {
        self.lu.solve(rhs).expect("factorization checked nonsingular at construction")
    }
}

pub fn inverse(m: &Matrix, what: &str) -> Result<Matrix> {
    let n = ensure_square(m)?;
    Ok(DenseSolver::new(m, what)?.solve_mat(&Matrix::identity(n, n)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaled_identity_detection() {
        let m = Matrix::identity(3, 3) * 2.5;
        assert_eq!(as_scaled_identity(&m), Some(2.5));
        let mut d = m.clone();
        d[(1, 1)] = 3.0;
        assert!(as_scaled_identity(&d).is_none());
        assert!(as_diagonal(&d).is_some());
        d[(0, 2)] = 0.1;
        assert!(as_diagonal(&d).is_none());
    }

    #[test]
    fn eigen_sorted_ascending() {
        let m = Matrix::from_row_slice(3, 3, &[5.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 2.0]);
        let (vals, _) = sym_eigen(&m).unwrap();
        assert_eq!(vals, vec![1.0, 2.0, 5.0]);
    }

    #[test]
    fn singular_solver_rejected() {
        let m = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(DenseSolver::new(&m, "test"), Err(Error::Singular(_))));
    }

    #[test]
    fn blocks_assemble() {
        let a = Matrix::identity(2, 2);
        let b = Matrix::from_element(2, 1, 3.0);
        let m = from_blocks(&[2, 1], &[2, 1], &[&[Some(a), Some(b)], &[None, None]]);
        assert_eq!(m[(0, 2)], 3.0);
        assert_eq!(m[(2, 2)], 0.0);
        assert_eq!(m[(1, 1)], 1.0);
    }
}

/// Serde adapters: matrices as `{ "shape": [rows, cols], "data": [row-major...] }`,
/// vectors as flat arrays.
pub mod serde_repr {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::{Matrix, Vector};

    #[derive(Serialize, Deserialize)]
    struct MatrixRepr {
        shape: [usize; 2],
        data: Vec<f64>,
    }

    pub fn matrix_to_repr(m: &Matrix) -> serde_json::Value {
        let data: Vec<f64> = (0..m.nrows())
            .flat_map(|i| (0..m.ncols()).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)])
            .collect();
        serde_json::to_value(MatrixRepr {
            shape: [m.nrows(), m.ncols()],
            data,
        })
        .expect("matrix repr serializes")
    }

    pub mod matrix {
        use super::*;

        pub fn serialize<S: Serializer>(m: &Matrix, s: S) -> Result<S::Ok, S::Error> {
            matrix_to_repr(m).serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Matrix, D::Error> {
            let repr = MatrixRepr::deserialize(d)?;
            let [r, c] = repr.shape;
            if repr.data.len() != r * c {
                return Err(serde::de::Error::custom(format!(
                    "matrix shape {r}x{c} needs {} entries, found {}",
                    r * c,
                    repr.data.len()
                )));
            }
            Ok(Matrix::from_row_slice(r, c, &repr.data))
        }
    }

    pub mod vector {
        use super::*;

        pub fn serialize<S: Serializer>(v: &Vector, s: S) -> Result<S::Ok, S::Error> {
            v.as_slice().serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vector, D::Error> {
            Ok(Vector::from_vec(Vec::<f64>::deserialize(d)?))
        }
    }
}
