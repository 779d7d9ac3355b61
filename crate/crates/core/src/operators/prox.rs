use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, serde_repr, DenseSolver, Matrix, Vector};

/// A closed proper convex function with a closed-form proximity operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProxFn {
    /// `h = 0`.
    Zero { dim: usize },
    /// `h(x) = weight * ||x||_1`.
    L1 { weight: f64, dim: usize },
    /// `h(x) = (weight / 2) * ||x - center||^2`.
    SquaredL2 {
        weight: f64,
        #[serde(with = "serde_repr::vector")]
        center: Vector,
    },
    /// Indicator of the box `[lower, upper]`.
    BoxIndicator {
        #[serde(with = "serde_repr::vector")]
        lower: Vector,
        #[serde(with = "serde_repr::vector")]
        upper: Vector,
    },
    /// `h(x) = x^T H x / 2 + q^T x` with `H` symmetric PSD.
    Quadratic {
        #[serde(with = "serde_repr::matrix")]
        hessian: Matrix,
        #[serde(with = "serde_repr::vector")]
        linear: Vector,
    },
}

const ZERO_TOL: f64 = 1e-12;

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

impl ProxFn {
    pub fn zero(dim: usize) -> Self {
        ProxFn::Zero { dim }
    }

    pub fn l1(weight: f64, dim: usize) -> Result<Self> {
        let f = ProxFn::L1 { weight, dim };
        f.validate()?;
        Ok(f)
    }

    pub fn squared_l2(weight: f64, center: Vector) -> Result<Self> {
        let f = ProxFn::SquaredL2 { weight, center };
        f.validate()?;
        Ok(f)
    }

    pub fn box_indicator(lower: Vector, upper: Vector) -> Result<Self> {
        let f = ProxFn::BoxIndicator { lower, upper };
        f.validate()?;
        Ok(f)
    }

    pub fn quadratic(hessian: Matrix, linear: Vector) -> Result<Self> {
        let f = ProxFn::Quadratic { hessian, linear };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ProxFn::Zero { dim } | ProxFn::L1 { dim, .. } if *dim == 0 => {
                Err(Error::param("dim", "must be positive"))
            }
            ProxFn::Zero { .. } => Ok(()),
            ProxFn::L1 { weight, .. } | ProxFn::SquaredL2 { weight, .. }
                if !(weight.is_finite() && *weight > 0.0) =>
            {
                Err(Error::param("weight", format!("must be positive, got {weight}")))
            }
            ProxFn::L1 { .. } => Ok(()),
            ProxFn::SquaredL2 { center, .. } if center.is_empty() => {
                Err(Error::param("center", "must be non-empty"))
            }
            ProxFn::SquaredL2 { .. } => Ok(()),
            ProxFn::BoxIndicator { lower, upper } => {
                if lower.len() != upper.len() {
                    return Err(Error::dims("box bounds", lower.len(), upper.len()));
                }
                if lower.is_empty() {
                    return Err(Error::param("lower", "must be non-empty"));
                }
                if lower.iter().zip(upper.iter()).any(|(l, u)| !(l <= u)) {
                    return Err(Error::param("lower", "every lower bound must be <= upper bound"));
                }
                Ok(())
            }
            ProxFn::Quadratic { hessian, linear } => {
                let n = linalg::ensure_square(hessian)?;
                linalg::ensure_len("quadratic linear term", linear, n)?;
                if n == 0 {
                    return Err(Error::param("hessian", "must be non-empty"));
                }
                if !linalg::is_symmetric(hessian) {
                    return Err(Error::NotSymmetric {
                        asymmetry: linalg::max_asymmetry(hessian),
                    });
                }
                let (vals, _) = linalg::sym_eigen(hessian)?;
                if vals[0] < -linalg::scaled_tol(vals[n - 1].abs()) {
                    return Err(Error::param("hessian", "must be positive semidefinite"));
                }
                Ok(())
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ProxFn::Zero { dim } | ProxFn::L1 { dim, .. } => *dim,
            ProxFn::SquaredL2 { center, .. } => center.len(),
            ProxFn::BoxIndicator { lower, .. } => lower.len(),
            ProxFn::Quadratic { linear, .. } => linear.len(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            ProxFn::Zero { .. } => "zero",
            ProxFn::L1 { .. } => "l1",
            ProxFn::SquaredL2 { .. } => "squared_l2",
            ProxFn::BoxIndicator { .. } => "box_indicator",
            ProxFn::Quadratic { .. } => "quadratic",
        }
    }

    /// Strong-convexity modulus `mu_h >= 0`.
    pub fn strong_convexity(&self) -> f64 {
        match self {
            ProxFn::SquaredL2 { weight, .. } => *weight,
            ProxFn::Quadratic { hessian, .. } => linalg::sym_eigen(hessian)
                .map(|(v, _)| v[0].max(0.0))
                .unwrap_or(0.0),
            _ => 0.0,
        }
    }

    /// Coordinate-separable functions admit per-coordinate (diagonal metric) proximal steps.
    pub fn is_separable(&self) -> bool {
        match self {
            ProxFn::Quadratic { hessian, .. } => linalg::as_diagonal(hessian).is_some(),
            _ => true,
        }
    }

    /// `(H, q)` when `h(x) = x^T H x / 2 + q^T x` up to a constant.
    pub fn as_quadratic(&self) -> Option<(Matrix, Vector)> {
        let n = self.dim();
        match self {
            ProxFn::Zero { .. } => Some((Matrix::zeros(n, n), Vector::zeros(n))),
            ProxFn::SquaredL2 { weight, center } => {
                Some((Matrix::identity(n, n) * *weight, center * -*weight))
            }
            ProxFn::Quadratic { hessian, linear } => Some((hessian.clone(), linear.clone())),
            _ => None,
        }
    }

    /// `h(x)`, `+inf` outside the domain of an indicator.
    pub fn value(&self, x: &Vector) -> Result<f64> {
        linalg::ensure_len("function argument", x, self.dim())?;
        Ok(match self {
            ProxFn::Zero { .. } => 0.0,
            ProxFn::L1 { weight, .. } => weight * x.lp_norm(1),
            ProxFn::SquaredL2 { weight, center } => 0.5 * weight * (x - center).norm_squared(),
            ProxFn::BoxIndicator { lower, upper } => {
                let inside = (0..x.len()).all(|i| lower[i] <= x[i] && x[i] <= upper[i]);
                if inside {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            ProxFn::Quadratic { hessian, linear } => 0.5 * x.dot(&(hessian * x)) + linear.dot(x),
        })
    }

    /// `prox_{tau h}(b) = argmin_x h(x) + ||x - b||^2 / (2 tau)`.
    pub fn prox(&self, b: &Vector, tau: f64) -> Result<Vector> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::param("tau", format!("must be positive, got {tau}")));
        }
        linalg::ensure_len("prox argument", b, self.dim())?;
        match self {
            ProxFn::Quadratic { hessian, linear } => {
                let n = b.len();
                let sys = Matrix::identity(n, n) + hessian * tau;
                let solver = DenseSolver::new(&sys, "I + tau H")?;
                Ok(solver.solve(&(b - linear * tau)))
            }
            _ => Ok(self.prox_separable_unchecked(b, |_| tau)),
        }
    }

    /// Per-coordinate proximal step with steps `taus[i] > 0`:
    /// `argmin_x h(x) + sum_i (x_i - b_i)^2 / (2 taus[i])`.
    pub fn prox_diagonal(&self, b: &Vector, taus: &Vector) -> Result<Vector> {
        linalg::ensure_len("prox argument", b, self.dim())?;
        linalg::ensure_len("prox steps", taus, self.dim())?;
        if taus.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::param("taus", "every step must be positive"));
        }
        if let ProxFn::Quadratic { hessian, linear } = self {
            let d = linalg::as_diagonal(hessian).ok_or_else(|| {
                Error::UnsupportedMetricProx("non-diagonal quadratic with a diagonal metric".into())
            })?;
            return Ok(Vector::from_iterator(
                b.len(),
                (0..b.len()).map(|i| (b[i] - taus[i] * linear[i]) / (1.0 + taus[i] * d[i])),
            ));
        }
        Ok(self.prox_separable_unchecked(b, |i| taus[i]))
    }

    fn prox_separable_unchecked(&self, b: &Vector, tau: impl Fn(usize) -> f64) -> Vector {
        let n = b.len();
        match self {
            ProxFn::Zero { .. } => b.clone(),
            ProxFn::L1 { weight, .. } => {
                Vector::from_iterator(n, (0..n).map(|i| soft_threshold(b[i], tau(i) * weight)))
            }
            ProxFn::SquaredL2 { weight, center } => Vector::from_iterator(
                n,
                (0..n).map(|i| {
                    let tw = tau(i) * weight;
                    (b[i] + tw * center[i]) / (1.0 + tw)
                }),
            ),
            ProxFn::BoxIndicator { lower, upper } => {
                Vector::from_iterator(n, (0..n).map(|i| b[i].clamp(lower[i], upper[i])))
            }
            ProxFn::Quadratic { .. } => unreachable!("quadratic prox handled by caller"),
        }
    }

    /// Euclidean distance from `g` to the subdifferential `dh(x)`; `+inf` when `x` is outside
    /// the domain.
    pub fn subgradient_distance(&self, x: &Vector, g: &Vector) -> Result<f64> {
        let n = self.dim();
        linalg::ensure_len("subgradient point", x, n)?;
        linalg::ensure_len("subgradient", g, n)?;
        let scale = 1.0 + x.amax();
        Ok(match self {
            ProxFn::Zero { .. } => g.norm(),
            ProxFn::L1 { weight, .. } => {
                let w = *weight;
                (0..n)
                    .map(|i| {
                        let off = (g[i] - w * x[i].signum()).abs();
                        let on = (g[i].abs() - w).max(0.0);
                        let d = if x[i] == 0.0 {
                            on
                        } else if x[i].abs() <= ZERO_TOL * scale {
                            on.min(off)
                        } else {
                            off
                        };
                        d * d
                    })
                    .sum::<f64>()
                    .sqrt()
            }
            ProxFn::SquaredL2 { weight, center } => (g - (x - center) * *weight).norm(),
            ProxFn::BoxIndicator { lower, upper } => {
                let mut acc = 0.0;
                for i in 0..n {
                    let tol = ZERO_TOL * (1.0 + lower[i].abs().max(upper[i].abs()));
                    if x[i] < lower[i] - tol || x[i] > upper[i] + tol {
                        return Ok(f64::INFINITY);
                    }
                    let at_lo = (x[i] - lower[i]).abs() <= tol;
                    let at_hi = (x[i] - upper[i]).abs() <= tol;
                    let d = match (at_lo, at_hi) {
                        (true, true) => 0.0,
                        (true, false) => g[i].max(0.0),
                        (false, true) => (-g[i]).max(0.0),
                        (false, false) => g[i].abs(),
                    };
                    acc += d * d;
                }
                acc.sqrt()
            }
            ProxFn::Quadratic { hessian, linear } => (g - hessian * x - linear).norm(),
        })
    }

    /// `t * h` for `t > 0`.
    pub fn scaled(&self, t: f64) -> Result<Self> {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::param("scale", format!("must be positive, got {t}")));
        }
        Ok(match self {
            ProxFn::Zero { .. } | ProxFn::BoxIndicator { .. } => self.clone(),
            ProxFn::L1 { weight, dim } => ProxFn::L1 {
                weight: weight * t,
                dim: *dim,
            },
            ProxFn::SquaredL2 { weight, center } => ProxFn::SquaredL2 {
                weight: weight * t,
                center: center.clone(),
            },
            ProxFn::Quadratic { hessian, linear } => ProxFn::Quadratic {
                hessian: hessian * t,
                linear: linear * t,
            },
        })
    }

    /// Fenchel conjugate `h*` when it is again one of the supported kinds.
    pub fn conjugate(&self) -> Result<Self> {
        let n = self.dim();
        match self {
            ProxFn::Zero { .. } => Ok(ProxFn::BoxIndicator {
                lower: Vector::zeros(n),
                upper: Vector::zeros(n),
            }),
            ProxFn::L1 { weight, .. } => Ok(ProxFn::BoxIndicator {
                lower: Vector::from_element(n, -weight),
                upper: Vector::from_element(n, *weight),
            }),
            ProxFn::BoxIndicator { lower, upper } => {
                let symmetric = (0..n).all(|i| lower[i] == -upper[i]);
                let w = upper[0];
                if symmetric && upper.iter().all(|&u| u == w) {
                    if w == 0.0 {
                        Ok(ProxFn::Zero { dim: n })
                    } else {
                        Ok(ProxFn::L1 { weight: w, dim: n })
                    }
                } else {
                    Err(Error::UnsupportedConjugate(
                        "box indicator that is not a uniform symmetric box".into(),
                    ))
                }
            }
            ProxFn::SquaredL2 { weight, center } => Ok(ProxFn::Quadratic {
                hessian: Matrix::identity(n, n) / *weight,
                linear: center.clone(),
            }),
            ProxFn::Quadratic { hessian, linear } => {
                let inv = linalg::inverse(hessian, "quadratic Hessian").map_err(|_| {
                    Error::UnsupportedConjugate("quadratic with singular Hessian".into())
                })?;
                let inv = linalg::sym_part(&inv);
                let lin = -(&inv * linear);
                Ok(ProxFn::Quadratic {
                    hessian: inv,
                    linear: lin,
                })
            }
        }
    }
}
