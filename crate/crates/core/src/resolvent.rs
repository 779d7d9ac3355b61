//! Metric resolvent `T = (A + Q)^{-1} Q`, its complement `R = I - T`, the relaxed map
//! `T_gamma = I + gamma (T - I)` and the corrected map `I + M (T - I)`.
//!
//! Every evaluation solves `0 in A(bt) + Q (bt - b)` by one of three exact strategies and carries
//! a residual certificate built from the subgradient selections the solve produced.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, DenseSolver, Matrix, Vector};
use crate::metric::{classify_metric, Metric};
use crate::operators::{MonotoneBlockOperator, ProxFn};
use crate::sampling::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStrategy {
    BlockTriangular,
    DenseLinear,
    ScalarProx,
}

impl SolveStrategy {
    pub fn name(self) -> &'static str {
        match self {
            SolveStrategy::BlockTriangular => "block_triangular",
            SolveStrategy::DenseLinear => "dense_linear",
            SolveStrategy::ScalarProx => "scalar_prox",
        }
    }
}

/// Relative tolerance of the inclusion certificate: `residual <= CERT_TOL * (1 + ||b||)`.
pub const CERT_TOL: f64 = 1e-8;
/// Absolute slack of sampled inequality checks.
pub const CHECK_TOL: f64 = 1e-8;

/// Result of one resolvent evaluation.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub b_tilde: Vector,
    /// Block subgradient selection `g` with `g + L bt + shift + Q (bt - b) ~ 0`.
    pub selection: Vector,
    pub residual: f64,
}

#[derive(Debug, Clone)]
enum LocalSolve {
    Scalar(f64),
    Diagonal(Vector),
}

#[derive(Debug, Clone)]
struct NonlinearBlock {
    block: usize,
    /// Coordinates in the reduced (nonlinear-only) ordering.
    start: usize,
    len: usize,
    local: LocalSolve,
}

#[derive(Debug, Clone)]
struct TriangularPlan {
    lin_idx: Vec<usize>,
    non_idx: Vec<usize>,
    ll: Option<DenseSolver>,
    k_nl: Matrix,
    k_ln: Matrix,
    reduced: Matrix,
    order: Vec<NonlinearBlock>,
}

#[derive(Debug, Clone)]
enum Plan {
    Scalar(f64),
    Dense(DenseSolver),
    Triangular(Box<TriangularPlan>),
}

#[derive(Debug, Clone)]
pub struct ResolventScheme {
    op: MonotoneBlockOperator,
    q: Metric,
    m: Matrix,
    gamma: Option<f64>,
    strategy: SolveStrategy,
    plan: Plan,
    k_full: Matrix,
    c0: Vector,
    s: Metric,
    g: Metric,
    mgm: Metric,
}

fn select(m: &Matrix, rows: &[usize], cols: &[usize]) -> Matrix {
    Matrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

fn gather(v: &Vector, idx: &[usize]) -> Vector {
    Vector::from_iterator(idx.len(), idx.iter().map(|&i| v[i]))
}

fn inapplicable(strategy: SolveStrategy, reason: impl Into<String>) -> Error {
    Error::StrategyInapplicable {
        strategy: strategy.name().into(),
        reason: reason.into(),
    }
}

impl ResolventScheme {
    /// Scheme `(A, Q, M)` with automatically selected solve strategy.
    pub fn new(op: MonotoneBlockOperator, q: Matrix, m: Matrix) -> Result<Self> {
        Self::build(op, q, m, None, None)
    }

    /// `M = I`: the plain resolvent iteration.
    pub fn plain(op: MonotoneBlockOperator, q: Matrix) -> Result<Self> {
        let n = op.total_dim();
        Self::build(op, q, Matrix::identity(n, n), None, None)
    }

    /// `M = gamma I` with `gamma in (0, 2)`.
    pub fn relaxed(op: MonotoneBlockOperator, q: Matrix, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 2.0) {
            return Err(Error::param("gamma", format!("must lie in (0, 2), got {gamma}")));
        }
        let n = op.total_dim();
        Self::build(op, q, Matrix::identity(n, n) * gamma, Some(gamma), None)
    }

    /// Same scheme forced onto `strategy`; fails when the strategy cannot solve the inclusion.
    pub fn with_strategy(self, strategy: SolveStrategy) -> Result<Self> {
        let plan = Self::plan_for(&self.op, &self.q, &self.k_full, strategy)?;
        Ok(ResolventScheme {
            strategy,
            plan,
            ..self
        })
    }

    fn build(
        op: MonotoneBlockOperator,
        q: Matrix,
        m: Matrix,
        gamma: Option<f64>,
        strategy: Option<SolveStrategy>,
    ) -> Result<Self> {
        let n = op.total_dim();
        let qn = linalg::ensure_square(&q)?;
        if qn != n {
            return Err(Error::dims("metric vs operator", n, qn));
        }
        let mn = linalg::ensure_square(&m)?;
        if mn != n {
            return Err(Error::dims("correction matrix vs operator", n, mn));
        }
        let q = classify_metric(q)?;
        let m_inv = linalg::inverse(&m, "correction matrix M")?;
        let s = classify_metric(q.matrix() * &m_inv)?;
        let g_mat = q.matrix() + q.matrix().transpose() - m.transpose() * q.matrix();
        let mgm = classify_metric(m_inv.transpose() * &g_mat * &m_inv)?;
        let g = classify_metric(g_mat)?;

        let mut k_full = op.linear_part() + q.matrix();
        let mut c0 = op.shift().clone();
        for (i, b) in op.blocks().iter().enumerate() {
            if let Some((h, lin)) = b.as_quadratic() {
                let r = op.block_range(i);
                let mut kv = k_full.view_mut((r.start, r.start), (r.len(), r.len()));
                kv += h;
                let mut cv = c0.rows_mut(r.start, r.len());
                cv += lin;
            }
        }

        let (strategy, plan) = match strategy {
            Some(s) => (s, Self::plan_for(&op, &q, &k_full, s)?),
            None => Self::auto_plan(&op, &q, &k_full)?,
        };
        Ok(ResolventScheme {
            op,
            q,
            m,
            gamma,
            strategy,
            plan,
            k_full,
            c0,
            s,
            g,
            mgm,
        })
    }

    fn auto_plan(
        op: &MonotoneBlockOperator,
        q: &Metric,
        k_full: &Matrix,
    ) -> Result<(SolveStrategy, Plan)> {
        let mut last = None;
        for s in [
            SolveStrategy::ScalarProx,
            SolveStrategy::DenseLinear,
            SolveStrategy::BlockTriangular,
        ] {
            match Self::plan_for(op, q, k_full, s) {
                Ok(p) => return Ok((s, p)),
                Err(e) => last = Some(e),
            }
        }
        Err(last.expect("at least one strategy tried"))
    }

    fn plan_for(
        op: &MonotoneBlockOperator,
        q: &Metric,
        k_full: &Matrix,
        strategy: SolveStrategy,
    ) -> Result<Plan> {
        match strategy {
            SolveStrategy::ScalarProx => {
                if op.blocks().len() != 1 {
                    return Err(inapplicable(strategy, "operator has more than one block"));
                }
                let l = op.linear_part();
                if linalg::max_abs(l) > linalg::scaled_tol(q.op_norm()) * 1e-3 {
                    return Err(inapplicable(strategy, "linear part is nonzero"));
                }
                match q.as_scalar() {
                    Some(c) if c > 0.0 => Ok(Plan::Scalar(c)),
                    _ => Err(inapplicable(strategy, "metric is not a positive multiple of I")),
                }
            }
            SolveStrategy::DenseLinear => {
                if !op.is_linear() {
                    return Err(inapplicable(strategy, "operator has nonlinear blocks"));
                }
                DenseSolver::new(k_full, "A + Q")
                    .map(Plan::Dense)
                    .map_err(|e| inapplicable(strategy, e.to_string()))
            }
            SolveStrategy::BlockTriangular => Self::triangular_plan(op, k_full)
                .map(|p| Plan::Triangular(Box::new(p))),
        }
    }

    fn triangular_plan(op: &MonotoneBlockOperator, k_full: &Matrix) -> Result<TriangularPlan> {
        let strategy = SolveStrategy::BlockTriangular;
        let mut lin_idx = Vec::new();
        let mut non_idx = Vec::new();
        let mut non_blocks = Vec::new();
        for (i, b) in op.blocks().iter().enumerate() {
            let r = op.block_range(i);
            if b.as_quadratic().is_some() {
                lin_idx.extend(r);
            } else {
                non_blocks.push((i, non_idx.len(), r.len()));
                non_idx.extend(r);
            }
        }
        let k_nn = select(k_full, &non_idx, &non_idx);
        let k_nl = select(k_full, &non_idx, &lin_idx);
        let k_ln = select(k_full, &lin_idx, &non_idx);
        let (ll, reduced) = if lin_idx.is_empty() {
            (None, k_nn)
        } else {
            let k_ll = select(k_full, &lin_idx, &lin_idx);
            let solver = DenseSolver::new(&k_ll, "linear-block system")
                .map_err(|e| inapplicable(strategy, e.to_string()))?;
            let w = solver.solve_mat(&k_ln);
            let reduced = &k_nn - &k_nl * w;
            (Some(solver), reduced)
        };

        let zero_tol = linalg::scaled_tol(linalg::max_abs(&reduced).max(linalg::max_abs(k_full)))
            * 1e-3;
        let nb = non_blocks.len();
        // deps[a] holds blocks that block a reads
        let mut deps = vec![Vec::new(); nb];
        for a in 0..nb {
            for b in 0..nb {
                if a == b {
                    continue;
                }
                let (_, sa, la) = non_blocks[a];
                let (_, sb, lb) = non_blocks[b];
                let coupled = reduced.view((sa, sb), (la, lb)).iter().any(|x| x.abs() > zero_tol);
                if coupled {
                    deps[a].push(b);
                }
            }
        }
        let mut indegree: Vec<usize> = deps.iter().map(Vec::len).collect();
        let mut ready: VecDeque<usize> = (0..nb).filter(|&a| indegree[a] == 0).collect();
        let mut topo = Vec::with_capacity(nb);
        while let Some(b) = ready.pop_front() {
            topo.push(b);
            for a in 0..nb {
                if deps[a].contains(&b) {
                    indegree[a] -= 1;
                    if indegree[a] == 0 {
                        ready.push_back(a);
                    }
                }
            }
        }
        if topo.len() != nb {
            return Err(inapplicable(
                strategy,
                "nonlinear blocks are cyclically coupled after eliminating linear blocks",
            ));
        }

        let mut order = Vec::with_capacity(nb);
        for a in topo {
            let (block, start, len) = non_blocks[a];
            let diag = reduced.view((start, start), (len, len)).into_owned();
            let local = if let Some(c) = linalg::as_scaled_identity(&diag) {
                if c <= 0.0 {
                    return Err(inapplicable(strategy, format!("block {block} has nonpositive step")));
                }
                LocalSolve::Scalar(c)
            } else if let Some(d) = linalg::as_diagonal(&diag) {
                if !op.blocks()[block].is_separable() {
                    return Err(Error::UnsupportedMetricProx(format!(
                        "block {block} is not separable under a diagonal metric"
                    )));
                }
                if d.iter().any(|&x| x <= 0.0) {
                    return Err(inapplicable(strategy, format!("block {block} has nonpositive step")));
                }
                LocalSolve::Diagonal(d)
            } else {
                return Err(Error::UnsupportedMetricProx(format!(
                    "block {block} sees a non-diagonal metric"
                )));
            };
            order.push(NonlinearBlock {
                block,
                start,
                len,
                local,
            });
        }

        Ok(TriangularPlan {
            lin_idx,
            non_idx,
            ll,
            k_nl,
            k_ln,
            reduced,
            order,
        })
    }

    pub fn op(&self) -> &MonotoneBlockOperator {
        &self.op
    }

    pub fn metric(&self) -> &Metric {
        &self.q
    }

    pub fn correction(&self) -> &Matrix {
        &self.m
    }

    pub fn gamma(&self) -> Option<f64> {
        self.gamma
    }

    pub fn strategy(&self) -> SolveStrategy {
        self.strategy
    }

    pub fn dim(&self) -> usize {
        self.op.total_dim()
    }

    /// `S = Q M^{-1}`.
    pub fn s_metric(&self) -> &Metric {
        &self.s
    }

    /// `G = Q + Q^T - M^T Q`.
    pub fn g_metric(&self) -> &Metric {
        &self.g
    }

    /// `M^{-T} G M^{-1}`.
    pub fn corrected_g_metric(&self) -> &Metric {
        &self.mgm
    }

    /// Solve `0 in A(bt) + Q (bt - b)` and certify the result.
    pub fn evaluate(&self, b: &Vector) -> Result<Evaluation> {
        linalg::ensure_len("resolvent argument", b, self.dim())?;
        let qb = self.q.matrix() * b;
        let (b_tilde, selection) = match &self.plan {
            Plan::Scalar(c) => {
                let block = &self.op.blocks()[0];
                let arg = b - self.op.shift() / *c;
                let bt = block.prox(&arg, 1.0 / c)?;
                let g = (b - &bt) * *c - self.op.shift();
                (bt, g)
            }
            Plan::Dense(solver) => {
                let bt = solver.solve(&(&qb - &self.c0));
                let g = self.linear_selection(&bt);
                (bt, g)
            }
            Plan::Triangular(plan) => self.sweep(plan, &(&qb - &self.c0))?,
        };
        let residual = self.certificate(b, &b_tilde, &selection)?;
        let tolerance = CERT_TOL * (1.0 + b.norm());
        if !(residual <= tolerance) {
            return Err(Error::ResidualTooLarge {
                residual,
                tolerance,
            });
        }
        Ok(Evaluation {
            b_tilde,
            selection,
            residual,
        })
    }

    fn linear_selection(&self, x: &Vector) -> Vector {
        let mut g = Vector::zeros(x.len());
        for (i, b) in self.op.blocks().iter().enumerate() {
            if let Some((h, q)) = b.as_quadratic() {
                let r = self.op.block_range(i);
                let xi = x.rows(r.start, r.len());
                g.rows_mut(r.start, r.len()).copy_from(&(h * xi + q));
            }
        }
        g
    }

    fn sweep(&self, plan: &TriangularPlan, r: &Vector) -> Result<(Vector, Vector)> {
        let r_l = gather(r, &plan.lin_idx);
        let mut r_n = gather(r, &plan.non_idx);
        if let Some(ll) = &plan.ll {
            r_n -= &plan.k_nl * ll.solve(&r_l);
        }
        let mut x_n = Vector::zeros(plan.non_idx.len());
        let mut g_n = Vector::zeros(plan.non_idx.len());
        for nb in &plan.order {
            let mut v = r_n.rows(nb.start, nb.len).into_owned();
            // blocks not yet solved are zero in x_n and decoupled by the topological order
            v -= plan.reduced.view((nb.start, 0), (nb.len, x_n.len())) * &x_n;
            let block = &self.op.blocks()[nb.block];
            let (x, g) = match &nb.local {
                LocalSolve::Scalar(c) => {
                    let x = block.prox(&(&v / *c), 1.0 / c)?;
                    let g = &v - &x * *c;
                    (x, g)
                }
                LocalSolve::Diagonal(d) => {
                    let taus = d.map(|x| 1.0 / x);
                    let x = block.prox_diagonal(&v.component_mul(&taus), &taus)?;
                    let g = &v - d.component_mul(&x);
                    (x, g)
                }
            };
            x_n.rows_mut(nb.start, nb.len).copy_from(&x);
            g_n.rows_mut(nb.start, nb.len).copy_from(&g);
        }
        let n = self.dim();
        let mut bt = Vector::zeros(n);
        let mut g = Vector::zeros(n);
        for (k, &i) in plan.non_idx.iter().enumerate() {
            bt[i] = x_n[k];
            g[i] = g_n[k];
        }
        if let Some(ll) = &plan.ll {
            let x_l = ll.solve(&(r_l - &plan.k_ln * &x_n));
            for (k, &i) in plan.lin_idx.iter().enumerate() {
                bt[i] = x_l[k];
            }
            let lin_g = self.linear_selection(&bt);
            for &i in &plan.lin_idx {
                g[i] = lin_g[i];
            }
        }
        Ok((bt, g))
    }

    /// `||g + L bt + shift + Q (bt - b)|| + sum_i dist(g_i, dh_i(bt_i))`.
    fn certificate(&self, b: &Vector, bt: &Vector, g: &Vector) -> Result<f64> {
        let inclusion = self.op.apply_with_selection(bt, g) + self.q.matrix() * (bt - b);
        let mut total = inclusion.norm();
        for (i, block) in self.op.blocks().iter().enumerate() {
            let r = self.op.block_range(i);
            let xi = bt.rows(r.start, r.len()).into_owned();
            let gi = g.rows(r.start, r.len()).into_owned();
            total += block.subgradient_distance(&xi, &gi)?;
        }
        Ok(total)
    }

    pub fn apply_t(&self, b: &Vector) -> Result<Vector> {
        Ok(self.evaluate(b)?.b_tilde)
    }

    pub fn apply_r(&self, b: &Vector) -> Result<Vector> {
        Ok(b - self.apply_t(b)?)
    }

    /// `(b + M (T b - b), T b)`.
    pub fn apply_generalized(&self, b: &Vector) -> Result<(Vector, Vector)> {
        let bt = self.apply_t(b)?;
        let next = b + &self.m * (&bt - b);
        Ok((next, bt))
    }
}

/// `argmin_x h(x) + ||x - b||_Q^2 / 2` for symmetric positive definite `Q`.
///
/// Supported: any `h` with `Q = c I`, separable `h` with diagonal `Q`, quadratic `h` with any `Q`.
pub fn generalized_prox(h: &ProxFn, q: &Metric, b: &Vector) -> Result<Vector> {
    if q.dim() != h.dim() {
        return Err(Error::dims("metric vs function", h.dim(), q.dim()));
    }
    linalg::ensure_len("prox argument", b, h.dim())?;
    if !q.is_symmetric_pd() {
        return Err(Error::MetricNotPd("generalized prox needs a symmetric PD metric".into()));
    }
    if let Some(c) = q.as_scalar() {
        return h.prox(b, 1.0 / c);
    }
    if let Some((hess, lin)) = h.as_quadratic() {
        let solver = DenseSolver::new(&(hess + q.matrix()), "H + Q")?;
        return Ok(solver.solve(&(q.matrix() * b - lin)));
    }
    if let Some(d) = q.as_diagonal() {
        if h.is_separable() {
            return h.prox_diagonal(b, &d.map(|x| 1.0 / x));
        }
    }
    Err(Error::UnsupportedMetricProx(format!(
        "{} with a non-diagonal metric",
        h.kind_name()
    )))
}

/// `(prox_h^Q(b), Q^{-1} prox_{h*}^{Q^{-1}}(Q b))`; the two parts sum to `b`.
pub fn moreau_decompose(h: &ProxFn, q: &Metric, b: &Vector) -> Result<(Vector, Vector)> {
    let p = generalized_prox(h, q, b)?;
    let conj = h.conjugate()?;
    let q_inv = classify_metric(linalg::sym_part(&linalg::inverse(q.matrix(), "metric")?))?;
    let y = generalized_prox(&conj, &q_inv, &(q.matrix() * b))?;
    let d = q_inv.matrix() * y;
    Ok((p, d))
}

/// Worst margin of a sampled inequality `lhs >= rhs`; margins below `-CHECK_TOL` are violations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub name: String,
    pub samples: usize,
    pub worst_margin: f64,
    pub violations: usize,
}

impl InequalityReport {
    fn new(name: &str) -> Self {
        InequalityReport {
            name: name.into(),
            samples: 0,
            worst_margin: f64::INFINITY,
            violations: 0,
        }
    }

    fn record(&mut self, margin: f64) {
        self.samples += 1;
        self.worst_margin = self.worst_margin.min(margin);
        if !(margin >= -CHECK_TOL) {
            self.violations += 1;
        }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0 && self.samples > 0
    }
}

fn sample_pair(rng: &mut Rng, n: usize) -> (Vector, Vector) {
    (sampling::normal_vector(rng, n), sampling::normal_vector(rng, n))
}

/// Partial nonexpansiveness of `T` and the twin cocoercivity of `R`:
///
/// - `<Q d, T d> >= ||T d||_Q^2`, with factor `1 + mu/||Q||` when `mu > 0` and `Q` is PD;
/// - `<Q^T d, R d> >= ||R d||_Q^2`,
///
/// where `d = b1 - b2`, `T d = T b1 - T b2`, `R d = R b1 - R b2`.
pub fn check_partial_nonexpansive(
    scheme: &ResolventScheme,
    samples: usize,
    rng: &mut Rng,
) -> Result<Vec<InequalityReport>> {
    let q = scheme.metric();
    let mu = scheme.op().mu();
    let strengthen = mu > 0.0 && q.definiteness() == crate::metric::Definiteness::Pd;
    let factor = if strengthen { 1.0 + mu / q.op_norm() } else { 1.0 };
    let mut t_rep = InequalityReport::new(if strengthen {
        "t_strong_cocoercive"
    } else {
        "t_partly_nonexpansive"
    });
    let mut r_rep = InequalityReport::new("r_cocoercive");
    for _ in 0..samples.max(1) {
        let (b1, b2) = sample_pair(rng, scheme.dim());
        let d = &b1 - &b2;
        let td = scheme.apply_t(&b1)? - scheme.apply_t(&b2)?;
        let rd = &d - &td;
        let qd = q.matrix() * &d;
        t_rep.record(qd.dot(&td) - factor * q.norm_sq(&td)?);
        let qtd = q.matrix().transpose() * &d;
        r_rep.record(qtd.dot(&rd) - q.norm_sq(&rd)?);
    }
    Ok(vec![t_rep, r_rep])
}

/// Averagedness constants `(xi, alpha)` of `T_gamma`.
pub fn averagedness_constants(gamma: f64, mu: f64, q_norm: f64) -> (f64, f64) {
    if mu > 0.0 {
        (
            q_norm / (2.0 * mu + q_norm),
            gamma * (2.0 * mu + q_norm) / (2.0 * mu + 2.0 * q_norm),
        )
    } else {
        (1.0, gamma / 2.0)
    }
}

/// Samples `||K d||_Q <= xi ||d||_Q` for `K = I + (T_gamma - I)/alpha`.
pub fn check_averagedness(
    scheme: &ResolventScheme,
    samples: usize,
    rng: &mut Rng,
) -> Result<InequalityReport> {
    let q = scheme.metric();
    if !q.is_symmetric_psd() {
        return Err(Error::BoundNotApplicable {
            formula: "averagedness".into(),
            predicate: "Q symmetric positive semidefinite".into(),
        });
    }
    let gamma = scheme.gamma().unwrap_or_else(|| {
        linalg::as_scaled_identity(scheme.correction()).unwrap_or(f64::NAN)
    });
    let mu = scheme.op().mu();
    let upper = if mu > 0.0 {
        1.0 + q.op_norm() / (2.0 * mu + q.op_norm())
    } else {
        2.0
    };
    if !(gamma > 0.0 && gamma < upper) {
        return Err(Error::BoundNotApplicable {
            formula: "averagedness".into(),
            predicate: format!("relaxation gamma in (0, {upper})"),
        });
    }
    let (xi, alpha) = averagedness_constants(gamma, mu, q.op_norm());
    let mut rep = InequalityReport::new("averaged_lipschitz");
    for _ in 0..samples.max(1) {
        let (b1, b2) = sample_pair(rng, scheme.dim());
        let d = &b1 - &b2;
        let td = scheme.apply_t(&b1)? - scheme.apply_t(&b2)?;
        let tgd = &d + (&td - &d) * gamma;
        let kd = &d + (&tgd - &d) / alpha;
        rep.record(xi * q.norm(&d)? - q.norm(&kd)?);
    }
    Ok(rep)
}

/// `<d, R d>_Q >= (q+mu)/(q+2mu) ||R d||_Q^2 + mu/(q+2mu) ||d||_Q^2` for SPD `Q` and `mu > 0`.
pub fn check_strong_complement(
    scheme: &ResolventScheme,
    samples: usize,
    rng: &mut Rng,
) -> Result<InequalityReport> {
    let q = scheme.metric();
    let mu = scheme.op().mu();
    if !q.is_symmetric_pd() || mu <= 0.0 {
        return Err(Error::BoundNotApplicable {
            formula: "strong_complement".into(),
            predicate: "Q symmetric positive definite and mu > 0".into(),
        });
    }
    let qn = q.op_norm();
    let mut rep = InequalityReport::new("r_strong_cocoercive");
    for _ in 0..samples.max(1) {
        let (b1, b2) = sample_pair(rng, scheme.dim());
        let d = &b1 - &b2;
        let rd = scheme.apply_r(&b1)? - scheme.apply_r(&b2)?;
        let lhs = q.inner(&d, &rd)?;
        let rhs = (qn + mu) / (qn + 2.0 * mu) * q.norm_sq(&rd)?
            + mu / (qn + 2.0 * mu) * q.norm_sq(&d)?;
        rep.record(lhs - rhs);
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn v(d: &[f64]) -> Vector {
        Vector::from_row_slice(d)
    }

    fn linear_op(k: Matrix) -> MonotoneBlockOperator {
        let n = k.nrows();
        MonotoneBlockOperator::new(vec![ProxFn::zero(n)], k, Vector::zeros(n)).unwrap()
    }

    #[test]
    fn zero_operator_is_identity() {
        let mut rng = sampling::rng(1);
        let q = sampling::spd_matrix(&mut rng, 4, 0.5);
        let s = ResolventScheme::plain(linear_op(Matrix::zeros(4, 4)), q).unwrap();
        let b = sampling::normal_vector(&mut rng, 4);
        assert_relative_eq!(s.apply_t(&b).unwrap(), b.clone(), epsilon = 1e-12);
        assert!(s.apply_r(&b).unwrap().norm() < 1e-12);
    }

    #[test]
    fn quadratic_halves() {
        let op = MonotoneBlockOperator::new(
            vec![ProxFn::quadratic(Matrix::identity(2, 2), Vector::zeros(2)).unwrap()],
            Matrix::zeros(2, 2),
            Vector::zeros(2),
        )
        .unwrap();
        let s = ResolventScheme::plain(op, Matrix::identity(2, 2)).unwrap();
        assert_eq!(s.strategy(), SolveStrategy::ScalarProx);
        let b = v(&[2.0, -4.0]);
        assert_relative_eq!(s.apply_t(&b).unwrap(), v(&[1.0, -2.0]), epsilon = 1e-15);
        assert_relative_eq!(s.apply_r(&b).unwrap(), v(&[1.0, -2.0]), epsilon = 1e-15);
    }

    #[test]
    fn dense_linear_example() {
        let s = ResolventScheme::plain(
            linear_op(Matrix::from_diagonal(&v(&[2.0, 3.0]))),
            Matrix::identity(2, 2),
        )
        .unwrap();
        assert_eq!(s.strategy(), SolveStrategy::DenseLinear);
        assert_relative_eq!(s.apply_t(&v(&[3.0, 4.0])).unwrap(), v(&[1.0, 1.0]), epsilon = 1e-14);
    }

    #[test]
    fn strategies_agree_on_linear_operator() {
        let mut rng = sampling::rng(3);
        let k = sampling::spd_matrix(&mut rng, 5, 0.1) + sampling::skew_matrix(&mut rng, 5, 1.0);
        let q = sampling::spd_matrix(&mut rng, 5, 1.0);
        let dense = ResolventScheme::plain(linear_op(k), q).unwrap();
        let tri = dense.clone().with_strategy(SolveStrategy::BlockTriangular).unwrap();
        assert!(dense.clone().with_strategy(SolveStrategy::ScalarProx).is_err());
        let b = sampling::normal_vector(&mut rng, 5);
        assert!(linalg::rel_diff(&dense.apply_t(&b).unwrap(), &tri.apply_t(&b).unwrap()) < 1e-12);
    }

    #[test]
    fn generalized_step_matches_relaxation() {
        let op = linear_op(Matrix::from_diagonal(&v(&[1.0, 2.0])));
        let s = ResolventScheme::relaxed(op, Matrix::identity(2, 2), 1.5).unwrap();
        let b = v(&[1.0, 3.0]);
        let (next, bt) = s.apply_generalized(&b).unwrap();
        assert_relative_eq!(bt, v(&[0.5, 1.0]), epsilon = 1e-15);
        assert_relative_eq!(next, &b + (&bt - &b) * 1.5, epsilon = 1e-15);
        let inert = ResolventScheme::new(
            linear_op(Matrix::zeros(2, 2)),
            Matrix::identity(2, 2),
            Matrix::identity(2, 2) * 2.0,
        )
        .unwrap();
        assert_relative_eq!(inert.apply_generalized(&b).unwrap().0, b, epsilon = 1e-15);
        assert!(ResolventScheme::relaxed(linear_op(Matrix::zeros(2, 2)), Matrix::identity(2, 2), 2.0).is_err());
    }

    #[test]
    fn cyclic_coupling_rejected() {
        // two l1 blocks coupled in both directions through a symmetric metric
        let op = MonotoneBlockOperator::new(
            vec![ProxFn::l1(1.0, 1).unwrap(), ProxFn::l1(1.0, 1).unwrap()],
            Matrix::zeros(2, 2),
            Vector::zeros(2),
        )
        .unwrap();
        let q = Matrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        assert!(matches!(
            ResolventScheme::plain(op, q),
            Err(Error::StrategyInapplicable { .. })
        ));
    }

    #[test]
    fn lower_triangular_sweep_certifies() {
        let op = MonotoneBlockOperator::new(
            vec![ProxFn::l1(0.5, 2).unwrap(), ProxFn::box_indicator(v(&[-1.0]), v(&[1.0])).unwrap()],
            Matrix::from_row_slice(3, 3, &[0.0, 0.0, -1.0, 0.0, 0.0, -1.0, 1.0, 1.0, 0.0]),
            Vector::zeros(3),
        )
        .unwrap();
        // Q = [[I, A^T],[-A, I]] style: L + Q is block lower triangular
        let q = Matrix::from_row_slice(3, 3, &[1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0]);
        let s = ResolventScheme::plain(op, q).unwrap();
        assert_eq!(s.strategy(), SolveStrategy::BlockTriangular);
        let mut rng = sampling::rng(4);
        for _ in 0..20 {
            let b = sampling::normal_vector(&mut rng, 3) * 3.0;
            let e = s.evaluate(&b).unwrap();
            assert!(e.residual <= 1e-12 * (1.0 + b.norm()));
        }
    }

    #[test]
    fn generalized_prox_examples() {
        let q = classify_metric(Matrix::from_diagonal(&v(&[2.0, 4.0]))).unwrap();
        let l1 = ProxFn::l1(1.0, 2).unwrap();
        let p = generalized_prox(&l1, &q, &v(&[2.0, 0.1])).unwrap();
        // grid-search oracle on each coordinate: argmin |x| + q_i (x - b_i)^2 / 2
        let grid = |b: f64, qi: f64| {
            (-40000..=40000)
                .map(|k| k as f64 * 1e-4)
                .min_by(|x, y| {
                    let f = |x: f64| x.abs() + 0.5 * qi * (x - b) * (x - b);
                    f(*x).total_cmp(&f(*y))
                })
                .unwrap()
        };
        assert!((p[0] - grid(2.0, 2.0)).abs() <= 1e-4);
        assert!((p[1] - grid(0.1, 4.0)).abs() <= 1e-4);
        assert_relative_eq!(p, v(&[1.5, 0.0]), epsilon = 1e-15);

        let b = v(&[0.3, -2.0]);
        assert_eq!(generalized_prox(&ProxFn::zero(2), &q, &b).unwrap(), b);

        let mut rng = sampling::rng(5);
        let qm = classify_metric(sampling::spd_matrix(&mut rng, 3, 0.5)).unwrap();
        let h = sampling::spd_matrix(&mut rng, 3, 0.0);
        let lin = sampling::normal_vector(&mut rng, 3);
        let quad = ProxFn::quadratic(linalg::sym_part(&h), lin.clone()).unwrap();
        let b = sampling::normal_vector(&mut rng, 3);
        let x = generalized_prox(&quad, &qm, &b).unwrap();
        // first-order condition H x + q + Q (x - b) = 0
        let foc = linalg::sym_part(&h) * &x + lin + qm.matrix() * (&x - &b);
        assert!(foc.norm() < 1e-10);

        let full = classify_metric(Matrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0])).unwrap();
        assert!(matches!(
            generalized_prox(&l1, &full, &v(&[1.0, 1.0])),
            Err(Error::UnsupportedMetricProx(_))
        ));
    }

    #[test]
    fn moreau_examples() {
        let id = classify_metric(Matrix::identity(1, 1)).unwrap();
        let (p, d) = moreau_decompose(&ProxFn::l1(1.0, 1).unwrap(), &id, &v(&[2.5])).unwrap();
        assert_relative_eq!(p[0], 1.5);
        assert_relative_eq!(d[0], 1.0);
        let (p, d) = moreau_decompose(&ProxFn::zero(2), &classify_metric(Matrix::identity(2, 2)).unwrap(), &v(&[1.0, 2.0])).unwrap();
        assert_eq!(p, v(&[1.0, 2.0]));
        assert_eq!(d, Vector::zeros(2));
        let q = classify_metric(Matrix::from_diagonal(&v(&[2.0, 4.0]))).unwrap();
        let mut rng = sampling::rng(6);
        for _ in 0..50 {
            let b = sampling::normal_vector(&mut rng, 2) * 2.0;
            let (p, d) = moreau_decompose(&ProxFn::l1(1.0, 2).unwrap(), &q, &b).unwrap();
            assert!((p + d - &b).norm() <= 1e-12);
        }
    }

    #[test]
    fn nonexpansive_margin_zero_for_zero_operator() {
        let mut rng = sampling::rng(8);
        let s = ResolventScheme::plain(linear_op(Matrix::zeros(3, 3)), Matrix::identity(3, 3)).unwrap();
        for r in check_partial_nonexpansive(&s, 30, &mut rng).unwrap() {
            assert!(r.passed());
            assert!(r.worst_margin.abs() < 1e-12, "{r:?}");
        }
        let avg = check_averagedness(&s, 30, &mut rng).unwrap();
        assert!(avg.passed(), "{avg:?}");
    }
}
