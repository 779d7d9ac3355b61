//! Fixed-point iteration `b^{k+1} = b^k + M (T b^k - b^k)` with full traces.

use std::fmt::Write as _;
use std::io;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Vector};
use crate::metric::{Definiteness, Metric};
use crate::resolvent::ResolventScheme;

/// Default cap on stored iterate scalars.
pub const DEFAULT_STORE_CAP: usize = 10_000_000;
/// `||b^k||` beyond `DIVERGENCE_FACTOR * (1 + ||b^0||)` stops the run.
pub const DIVERGENCE_FACTOR: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StopReason {
    MaxIter,
    ResidualBelow { eps: f64 },
    DivergenceGuard,
}

/// Which norm a trace channel was measured in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    Q,
    S,
    Euclidean,
}

impl NormKind {
    pub fn norm(self, scheme: &ResolventScheme, v: &Vector) -> f64 {
        match self {
            NormKind::Q => scheme.metric().norm(v).unwrap_or(f64::NAN),
            NormKind::S => scheme.s_metric().norm(v).unwrap_or(f64::NAN),
            NormKind::Euclidean => v.norm(),
        }
    }
}

fn psd_form(m: &Metric) -> bool {
    m.definiteness() != Definiteness::Indefinite
}

/// Norm for the stopping residual: `S` when its symmetric part is PSD, else Euclidean.
pub fn residual_norm_kind(scheme: &ResolventScheme) -> NormKind {
    if psd_form(scheme.s_metric()) {
        NormKind::S
    } else {
        NormKind::Euclidean
    }
}

/// Norm for reference distances: `Q` if symmetric PSD, else `S` if PSD, else Euclidean.
pub fn distance_norm_kind(scheme: &ResolventScheme) -> NormKind {
    if scheme.metric().is_symmetric_psd() {
        NormKind::Q
    } else {
        residual_norm_kind(scheme)
    }
}

/// Scheme facts recorded alongside a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMetadata {
    pub dim: usize,
    pub gamma: Option<f64>,
    pub mu: f64,
    pub q_norm: f64,
    pub strategy: String,
    pub s_spectral_bounds: (f64, f64),
    pub corrected_g_spectral_bounds: (f64, f64),
    pub residual_norm: NormKind,
    pub distance_norm: NormKind,
}

impl TraceMetadata {
    pub fn of(scheme: &ResolventScheme) -> Self {
        TraceMetadata {
            dim: scheme.dim(),
            gamma: scheme.gamma(),
            mu: scheme.op().mu(),
            q_norm: scheme.metric().op_norm(),
            strategy: scheme.strategy().name().into(),
            s_spectral_bounds: scheme.s_metric().sym_eigen_bounds(),
            corrected_g_spectral_bounds: scheme.corrected_g_metric().sym_eigen_bounds(),
            residual_norm: residual_norm_kind(scheme),
            distance_norm: distance_norm_kind(scheme),
        }
    }
}

/// Record of a run of `K` steps.
///
/// Per-step channels have length `K` (`k = 0..K`); per-point channels have length `K + 1`;
/// `ergodic_objective[k - 1]` is `h` at the mean of `b^1..b^k`.
#[derive(Debug, Clone)]
pub struct IterationTrace {
    pub iterates: Vec<Vector>,
    pub tildes: Vec<Vector>,
    /// Iterates were dropped once the store cap was reached.
    pub truncated: bool,
    pub final_iterate: Vector,
    pub residual_s: Vec<f64>,
    pub residual_q: Option<Vec<f64>>,
    pub objective: Option<Vec<f64>>,
    pub ergodic_objective: Option<Vec<f64>>,
    pub dist_to_ref: Option<Vec<f64>>,
    pub reference: Option<Vector>,
    pub stop_reason: StopReason,
    /// Steps `k` where `residual_q[k] > residual_q[k - 1]` although non-increase is expected.
    pub defects: Vec<usize>,
    pub metadata: TraceMetadata,
}

impl IterationTrace {
    pub fn steps(&self) -> usize {
        self.residual_s.len()
    }

    pub fn final_residual(&self) -> Option<f64> {
        self.residual_s.last().copied()
    }

    /// CSV with header `k,res_S,res_Q,objective,ergodic_objective,dist_ref`.
    pub fn to_csv(&self) -> String {
        fn cell(out: &mut String, v: Option<f64>) {
            out.push(',');
            if let Some(x) = v {
                let _ = write!(out, "{x:?}");
            }
        }
        let mut out = String::from("k,res_S,res_Q,objective,ergodic_objective,dist_ref\n");
        for k in 0..=self.steps() {
            let _ = write!(out, "{k}");
            cell(&mut out, self.residual_s.get(k).copied());
            cell(&mut out, self.residual_q.as_ref().and_then(|r| r.get(k).copied()));
            cell(&mut out, self.objective.as_ref().and_then(|r| r.get(k).copied()));
            cell(
                &mut out,
                k.checked_sub(1)
                    .and_then(|i| self.ergodic_objective.as_ref().and_then(|r| r.get(i).copied())),
            );
            cell(&mut out, self.dist_to_ref.as_ref().and_then(|r| r.get(k).copied()));
            out.push('\n');
        }
        out
    }

    pub fn sidecar(&self) -> serde_json::Value {
        serde_json::json!({
            "metadata": self.metadata,
            "steps": self.steps(),
            "stop_reason": self.stop_reason,
            "truncated": self.truncated,
            "defects": self.defects,
        })
    }

    pub fn write_csv<W: io::Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(self.to_csv().as_bytes())
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub max_iter: usize,
    pub eps: f64,
    pub reference: Option<Vector>,
    pub store_cap: usize,
}

impl RunOptions {
    pub fn new(max_iter: usize, eps: f64) -> Self {
        RunOptions {
            max_iter,
            eps,
            reference: None,
            store_cap: DEFAULT_STORE_CAP,
        }
    }

    pub fn with_reference(mut self, reference: Vector) -> Self {
        self.reference = Some(reference);
        self
    }

    pub fn with_store_cap(mut self, cap: usize) -> Self {
        self.store_cap = cap;
        self
    }
}

/// Pairwise (binary-counter) summation of vectors.
#[derive(Debug, Clone, Default)]
pub struct PairwiseSum {
    stack: Vec<(usize, Vector)>,
    count: usize,
}

impl PairwiseSum {
    pub fn push(&mut self, v: &Vector) {
        self.count += 1;
        let mut item = (1usize, v.clone());
        while let Some((n, _)) = self.stack.last() {
            if *n != item.0 {
                break;
            }
            let (n, top) = self.stack.pop().expect("checked non-empty");
            item = (n + item.0, top + item.1);
        }
        self.stack.push(item);
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn sum(&self) -> Option<Vector> {
        let mut it = self.stack.iter().rev();
        let (_, first) = it.next()?;
        Some(it.fold(first.clone(), |acc, (_, v)| acc + v))
    }

    pub fn mean(&self) -> Option<Vector> {
        self.sum().map(|s| s / self.count as f64)
    }
}

struct Recorder<'a> {
    scheme: &'a ResolventScheme,
    opts: &'a RunOptions,
    trace: IterationTrace,
    stored: usize,
    ergodic: PairwiseSum,
    dist_kind: NormKind,
    res_kind: NormKind,
    track_monotone: bool,
}

impl<'a> Recorder<'a> {
    fn new(scheme: &'a ResolventScheme, opts: &'a RunOptions, b0: &Vector) -> Self {
        let q_psd = scheme.metric().is_symmetric_psd();
        let has_objective = scheme.op().objective_value(b0).is_some();
        let metadata = TraceMetadata::of(scheme);
        let track_monotone = q_psd && linalg::as_scaled_identity(scheme.correction()).is_some();
        let mut rec = Recorder {
            scheme,
            opts,
            trace: IterationTrace {
                iterates: Vec::new(),
                tildes: Vec::new(),
                truncated: false,
                final_iterate: b0.clone(),
                residual_s: Vec::new(),
                residual_q: q_psd.then(Vec::new),
                objective: has_objective.then(Vec::new),
                ergodic_objective: has_objective.then(Vec::new),
                dist_to_ref: opts.reference.as_ref().map(|_| Vec::new()),
                reference: opts.reference.clone(),
                stop_reason: StopReason::MaxIter,
                defects: Vec::new(),
                metadata,
            },
            stored: 0,
            ergodic: PairwiseSum::default(),
            dist_kind: distance_norm_kind(scheme),
            res_kind: residual_norm_kind(scheme),
            track_monotone,
        };
        rec.point(b0, false);
        rec
    }

    fn point(&mut self, b: &Vector, ergodic: bool) {
        let t = &mut self.trace;
        if !t.truncated && self.stored + b.len() <= self.opts.store_cap {
            t.iterates.push(b.clone());
            self.stored += b.len();
        } else {
            t.truncated = true;
        }
        t.final_iterate = b.clone();
        if let Some(obj) = t.objective.as_mut() {
            obj.push(self.scheme.op().objective_value(b).unwrap_or(f64::NAN));
        }
        if ergodic {
            if let Some(erg) = t.ergodic_objective.as_mut() {
                self.ergodic.push(b);
                let mean = self.ergodic.mean().expect("just pushed");
                erg.push(self.scheme.op().objective_value(&mean).unwrap_or(f64::NAN));
            }
        }
        if let (Some(dist), Some(r)) = (t.dist_to_ref.as_mut(), self.opts.reference.as_ref()) {
            dist.push(self.dist_kind.norm(self.scheme, &(b - r)));
        }
    }

    fn step(&mut self, prev: &Vector, next: &Vector, tilde: Vector) -> f64 {
        let diff = next - prev;
        let res = self.res_kind.norm(self.scheme, &diff);
        self.trace.residual_s.push(res);
        if let Some(rq) = self.trace.residual_q.as_mut() {
            let r = self.scheme.metric().norm(&diff).unwrap_or(f64::NAN);
            if self.track_monotone {
                if let Some(&last) = rq.last() {
                    if r > last * (1.0 + 1e-9) + 1e-12 {
                        self.trace.defects.push(rq.len());
                    }
                }
            }
            rq.push(r);
        }
        if !self.trace.truncated {
            self.trace.tildes.push(tilde);
        }
        self.point(next, true);
        res
    }
}

/// Run the corrected fixed-point iteration from `b0`.
///
/// Stops at `max_iter` steps, at the first step with `||b^{k+1} - b^k|| <= eps` in the
/// residual norm, or when the divergence guard trips. `eps = 0` disables the residual stop.
pub fn run(scheme: &ResolventScheme, b0: &Vector, opts: &RunOptions) -> Result<IterationTrace> {
    linalg::ensure_len("initial point", b0, scheme.dim())?;
    if opts.max_iter == 0 {
        return Err(Error::param("max_iter", "must be at least 1"));
    }
    if !(opts.eps >= 0.0) {
        return Err(Error::param("eps", "must be nonnegative"));
    }
    if let Some(r) = &opts.reference {
        linalg::ensure_len("reference", r, scheme.dim())?;
    }
    let limit = DIVERGENCE_FACTOR * (1.0 + b0.norm());
    let mut rec = Recorder::new(scheme, opts, b0);
    let mut b = b0.clone();
    for k in 0..opts.max_iter {
        let (next, tilde) = match scheme.apply_generalized(&b) {
            Ok(pair) => pair,
            Err(source) => {
                return Err(Error::IterationAborted {
                    step: k,
                    source: Box::new(source),
                    partial: Box::new(rec.trace),
                })
            }
        };
        if !next.iter().all(|x| x.is_finite()) || next.norm() > limit {
            rec.trace.stop_reason = StopReason::DivergenceGuard;
            return Ok(rec.trace);
        }
        let res = rec.step(&b, &next, tilde);
        b = next;
        if opts.eps > 0.0 && res <= opts.eps {
            rec.trace.stop_reason = StopReason::ResidualBelow { eps: opts.eps };
            break;
        }
    }
    Ok(rec.trace)
}

/// Tolerance of the reference certificate: `1e-10 * (1 + ||b*||)`.
pub const REFERENCE_TOL: f64 = 1e-10;

/// Inclusion residual of `b*` as a zero of `A`: `||K b* + c||` for affine `A`, otherwise
/// `||Q (b - T b)|| + certificate(T b)` measured at `T b`.
fn zero_certificate(scheme: &ResolventScheme, b: &Vector) -> Result<(Vector, f64)> {
    if let Some((k, c)) = scheme.op().as_affine() {
        return Ok((b.clone(), (k * b + c).norm()));
    }
    let e = scheme.evaluate(b)?;
    let gap = (scheme.metric().matrix() * (b - &e.b_tilde)).norm();
    Ok((e.b_tilde, gap + e.residual))
}

/// A zero of `A`: direct solve for affine operators, otherwise a long run of
/// `10 * max_iter` steps to `eps = 1e-13`. The result is certified.
pub fn compute_reference(scheme: &ResolventScheme, b0: &Vector, max_iter: usize) -> Result<Vector> {
    linalg::ensure_len("initial point", b0, scheme.dim())?;
    if let Some((k, c)) = scheme.op().as_affine() {
        if linalg::max_abs(&k) == 0.0 && c.iter().all(|&x| x == 0.0) {
            return Ok(b0.clone());
        }
        if let Ok(solver) = linalg::DenseSolver::new(&k, "affine operator") {
            let x = solver.solve(&(-c));
            return certify(scheme, &x);
        }
    }
    let opts = RunOptions::new(max_iter.saturating_mul(10).max(1), 1e-13).with_store_cap(0);
    let trace = run(scheme, b0, &opts).map_err(|e| Error::ReferenceFailed(e.to_string()))?;
    if trace.stop_reason == StopReason::DivergenceGuard {
        return Err(Error::ReferenceFailed("long run diverged".into()));
    }
    certify(scheme, &trace.final_iterate)
}

fn certify(scheme: &ResolventScheme, b: &Vector) -> Result<Vector> {
    let (point, residual) = zero_certificate(scheme, b)?;
    let tol = REFERENCE_TOL * (1.0 + point.norm());
    if residual <= tol {
        Ok(point)
    } else {
        Err(Error::ReferenceFailed(format!(
            "inclusion residual {residual:e} exceeds {tol:e}"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::operators::{MonotoneBlockOperator, ProxFn};
    use crate::sampling;
    use approx::assert_relative_eq;

    fn quad_scheme(h: Matrix, v: Vector) -> ResolventScheme {
        let n = h.nrows();
        let op = MonotoneBlockOperator::with_certified_modulus(
            vec![ProxFn::quadratic(h, -v).unwrap()],
            Matrix::zeros(n, n),
            Vector::zeros(n),
        )
        .unwrap();
        ResolventScheme::plain(op, Matrix::identity(n, n)).unwrap()
    }

    #[test]
    fn zero_operator_stops_immediately() {
        let op = MonotoneBlockOperator::new(vec![ProxFn::zero(2)], Matrix::zeros(2, 2), Vector::zeros(2))
            .unwrap();
        let s = ResolventScheme::plain(op, Matrix::identity(2, 2)).unwrap();
        let b0 = Vector::from_row_slice(&[1.0, -1.0]);
        let t = run(&s, &b0, &RunOptions::new(100, 1e-12)).unwrap();
        assert_eq!(t.steps(), 1);
        assert_eq!(t.iterates[1], b0);
        assert_eq!(t.stop_reason, StopReason::ResidualBelow { eps: 1e-12 });
        assert_eq!(compute_reference(&s, &b0, 10).unwrap(), b0);
    }

    #[test]
    fn geometric_halving() {
        let s = quad_scheme(Matrix::identity(1, 1), Vector::zeros(1));
        let t = run(&s, &Vector::from_element(1, 2.0), &RunOptions::new(5, 0.0)).unwrap();
        let xs: Vec<f64> = t.iterates.iter().map(|b| b[0]).collect();
        assert_eq!(xs, vec![2.0, 1.0, 0.5, 0.25, 0.125, 0.0625]);
        assert_eq!(t.stop_reason, StopReason::MaxIter);
        assert_eq!(t.objective.as_ref().unwrap().len(), 6);
        assert_eq!(t.ergodic_objective.as_ref().unwrap().len(), 5);
        assert!(t.defects.is_empty());
    }

    #[test]
    fn reference_is_linear_zero() {
        let mut rng = sampling::rng(2);
        let h = sampling::spd_matrix(&mut rng, 4, 0.5);
        let v = sampling::normal_vector(&mut rng, 4);
        let s = quad_scheme(h.clone(), v.clone());
        let r = compute_reference(&s, &Vector::zeros(4), 100).unwrap();
        assert!((h * &r - v).norm() < 1e-10);
    }

    #[test]
    fn reference_by_long_run() {
        // l1 block is nonlinear, so the long-run path is taken
        let op = MonotoneBlockOperator::new(
            vec![ProxFn::l1(0.5, 2).unwrap()],
            Matrix::from_diagonal(&Vector::from_row_slice(&[1.0, 2.0])),
            Vector::from_row_slice(&[-2.0, 0.2]),
        )
        .unwrap();
        let s = ResolventScheme::plain(op, Matrix::identity(2, 2) * 2.0).unwrap();
        let r = compute_reference(&s, &Vector::zeros(2), 1000).unwrap();
        assert_relative_eq!(r, Vector::from_row_slice(&[1.5, 0.0]), epsilon = 1e-10);
    }

    #[test]
    fn divergence_guard() {
        // M = 5 I overshoots: b <- b + 5 (b/2 - b) = -1.5 b
        let op = MonotoneBlockOperator::new(vec![ProxFn::zero(1)], Matrix::identity(1, 1), Vector::zeros(1))
            .unwrap();
        let s = ResolventScheme::new(op, Matrix::identity(1, 1), Matrix::identity(1, 1) * 5.0).unwrap();
        let t = run(&s, &Vector::from_element(1, 1.0), &RunOptions::new(10_000, 0.0)).unwrap();
        assert_eq!(t.stop_reason, StopReason::DivergenceGuard);
        assert!(t.steps() < 100);
    }

    #[test]
    fn store_cap_truncates() {
        let s = quad_scheme(Matrix::identity(2, 2), Vector::zeros(2));
        let t = run(&s, &Vector::from_element(2, 1.0), &RunOptions::new(10, 0.0).with_store_cap(6)).unwrap();
        assert!(t.truncated);
        assert_eq!(t.iterates.len(), 3);
        assert_eq!(t.residual_s.len(), 10);
    }

    #[test]
    fn pairwise_mean() {
        let mut acc = PairwiseSum::default();
        for i in 1..=7 {
            acc.push(&Vector::from_element(1, i as f64));
        }
        assert_eq!(acc.mean().unwrap()[0], 4.0);
        assert_eq!(acc.count(), 7);
    }

    #[test]
    fn csv_layout() {
        let s = quad_scheme(Matrix::identity(1, 1), Vector::zeros(1));
        let t = run(&s, &Vector::from_element(1, 2.0), &RunOptions::new(2, 0.0)).unwrap();
        let csv = t.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "k,res_S,res_Q,objective,ergodic_objective,dist_ref");
        assert_eq!(lines[1], "0,1.0,1.0,2.0,,");
        assert_eq!(lines[3], "2,,,0.125,0.28125,");
    }
}
