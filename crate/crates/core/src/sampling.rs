//! Seeded random draws for property checks and problem generators.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::{Matrix, Vector};

pub type Rng = ChaCha8Rng;

/// Default number of sampled pairs in property checks.
pub const DEFAULT_PAIRS: usize = 200;

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_vector(rng: &mut Rng, n: usize) -> Vector {
    Vector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(rng)))
}

pub fn normal_matrix(rng: &mut Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_iterator(rows, cols, (0..rows * cols).map(|_| StandardNormal.sample(rng)))
}

/// `G G^T / n + shift I` with Gaussian `G`.
pub fn spd_matrix(rng: &mut Rng, n: usize, shift: f64) -> Matrix {
    let g = normal_matrix(rng, n, n);
    &g * g.transpose() / n as f64 + Matrix::identity(n, n) * shift
}

/// `G - G^T` with Gaussian `G`, scaled by `scale / sqrt(n)`.
pub fn skew_matrix(rng: &mut Rng, n: usize, scale: f64) -> Matrix {
    let g = normal_matrix(rng, n, n);
    (&g - g.transpose()) * (scale / (n as f64).sqrt())
}

pub fn uniform(rng: &mut Rng, lo: f64, hi: f64) -> f64 {
    use rand::Rng as _;
    rng.random_range(lo..hi)
}

pub fn uniform_vector(rng: &mut Rng, n: usize, lo: f64, hi: f64) -> Vector {
    Vector::from_iterator(n, (0..n).map(|_| uniform(rng, lo, hi)))
}

pub fn index(rng: &mut Rng, n: usize) -> usize {
    use rand::Rng as _;
    rng.random_range(0..n)
}
