//! Cost matrices and transport plans.
//!
//! Both entropic solvers run the same stabilized scaling loop: the Gibbs kernel
//! is kept as `exp((f_i + g_j - C_ij) / eps)` for absorbed dual potentials
//! `f, g`, and the multiplicative scalings `u, v` are folded back into the
//! potentials (with an exact log-sum-exp update) whenever they drift out of a
//! safe range. Small `eps` therefore never underflows the kernel.

use nalgebra::{DMatrix, DVector};

use crate::linalg::{self, log_sum_exp};

/// Largest `k_a * k_b` accepted by [`exact_ot`].
pub const EXACT_OT_MAX_ENTRIES: usize = 10_000;
/// Largest side accepted by [`exact_assignment`].
pub const ASSIGNMENT_MAX_SIZE: usize = 5_000;

const SCALING_BOUND: f64 = 1e50;
const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;
const MASS_EPS: f64 = 1e-15;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum OtError {
    #[error("dimension mismatch: {left} vs {right}")]
    Dimension { left: usize, right: usize },
    #[error("shape mismatch: {left:?} vs {right:?}")]
    Shape {
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("{side} weight {index} is not strictly positive ({value})")]
    NonPositiveWeight {
        side: &'static str,
        index: usize,
        value: f64,
    },
    #[error("{side} weights sum to {sum}, expected 1")]
    WeightSum { side: &'static str, sum: f64 },
    #[error("cost entry ({row}, {col}) = {value} is negative or not finite")]
    InvalidCost { row: usize, col: usize, value: f64 },
    #[error("NaN encountered at iteration {iteration}")]
    NaN { iteration: usize },
    #[error("problem of {entries} entries exceeds the exact solver cap of {cap}")]
    SizeCap { entries: usize, cap: usize },
    #[error("entropic coefficient must be positive, got {0}")]
    Epsilon(f64),
    #[error("marginal penalty must be positive, got {0}")]
    Tau(f64),
}

/// Nonnegative, finite pairwise costs.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix(DMatrix<f64>);

impl CostMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self, OtError> {
        for j in 0..entries.ncols() {
            for i in 0..entries.nrows() {
                let value = entries[(i, j)];
                if !(value.is_finite() && value >= 0.0) {
                    return Err(OtError::InvalidCost { row: i, col: j, value });
                }
            }
        }
        Ok(Self(entries))
    }

    pub fn from_row_slice(rows: usize, cols: usize, data: &[f64]) -> Result<Self, OtError> {
        Self::new(DMatrix::from_row_slice(rows, cols, data))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    pub fn transpose(&self) -> CostMatrix {
        CostMatrix(self.0.transpose())
    }
}

/// Squared Euclidean distances between the rows of `a` and `b`.
pub fn cost_matrix(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<CostMatrix, OtError> {
    if a.ncols() != b.ncols() {
        return Err(OtError::Dimension {
            left: a.ncols(),
            right: b.ncols(),
        });
    }
    Ok(CostMatrix(linalg::pairwise_sq_distances(a, b)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SinkhornConfig {
    pub epsilon: f64,
    pub max_iters: usize,
    /// Balanced: L1 marginal violation. Unbalanced: L-inf change of the log scalings.
    pub tol: f64,
    /// KL relaxation strength of the unbalanced solver.
    pub tau: f64,
}

impl Default for SinkhornConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.05,
            max_iters: 5000,
            tol: 1e-9,
            tau: 1.0,
        }
    }
}

impl SinkhornConfig {
    pub fn with_epsilon(epsilon: f64) -> Self {
        Self {
            epsilon,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    pub matrix: DMatrix<f64>,
    /// `|P 1 - a|_1` at termination.
    pub src_marginal_error: f64,
    /// `|P^T 1 - b|_1` at termination.
    pub tgt_marginal_error: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl TransportPlan {
    fn from_matrix(matrix: DMatrix<f64>, a: &[f64], b: &[f64], converged: bool, iterations: usize) -> Self {
        let (src, tgt) = marginal_errors(&matrix, a, b);
        Self {
            matrix,
            src_marginal_error: src,
            tgt_marginal_error: tgt,
            converged,
            iterations,
        }
    }

    pub fn mass(&self) -> f64 {
        self.matrix.sum()
    }

    pub fn transpose(&self) -> TransportPlan {
        TransportPlan {
            matrix: self.matrix.transpose(),
            src_marginal_error: self.tgt_marginal_error,
            tgt_marginal_error: self.src_marginal_error,
            converged: self.converged,
            iterations: self.iterations,
        }
    }

    /// For every row, the column holding its largest entry (ties go low).
    pub fn row_argmax(&self) -> Vec<usize> {
        self.matrix
            .row_iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |b, (j, &v)| if v > b.1 { (j, v) } else { b })
                    .0
            })
            .collect()
    }
}

fn marginal_errors(p: &DMatrix<f64>, a: &[f64], b: &[f64]) -> (f64, f64) {
    let rows = p.column_sum();
    let cols = p.row_sum();
    let src = rows.iter().zip(a).map(|(r, a)| (r - a).abs()).sum();
    let tgt = cols.iter().zip(b).map(|(c, b)| (c - b).abs()).sum();
    (src, tgt)
}

fn check_weights(side: &'static str, w: &[f64], normalized: bool) -> Result<(), OtError> {
    for (index, &value) in w.iter().enumerate() {
        if !(value > 0.0 && value.is_finite()) {
            return Err(OtError::NonPositiveWeight { side, index, value });
        }
    }
    if normalized {
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(OtError::WeightSum { side, sum });
        }
    }
    Ok(())
}

fn check_shape(c: &CostMatrix, a: &[f64], b: &[f64]) -> Result<(), OtError> {
    if c.shape() != (a.len(), b.len()) {
        return Err(OtError::Shape {
            left: c.shape(),
            right: (a.len(), b.len()),
        });
    }
    Ok(())
}

#[derive(Clone, Copy, PartialEq)]
enum Stop {
    /// Row marginal L1 violation (columns are exact after each update).
    Marginal,
    /// Change of the log plan entries between sweeps.
    FixedPoint,
}

/// Over-relaxation schedule for the balanced loop.
///
/// Plain alternating scaling contracts the marginal error by a roughly constant
/// factor `r` per sweep once it is near the solution, and `r` gets close to 1 for
/// small epsilon. The relaxed update `u <- u^(1-w) * (a / Kv)^w` has the same
/// fixed point and, with `w = 2 / (1 + sqrt(1 - r))`, a much smaller factor. `r` is
/// measured on plain sweeps first. Whenever a relaxed window fails to shrink the
/// error, `w - 1` is halved, and after a few failures the loop stays plain.
struct Relaxation {
    enabled: bool,
    omega: f64,
    window_start: Option<f64>,
    seen: usize,
    failures: u32,
}

impl Relaxation {
    const WINDOW: usize = 20;
    const MAX_OMEGA: f64 = 1.9;
    const MAX_FAILURES: u32 = 4;

    fn new(enabled: bool) -> Self {
        Self { enabled, omega: 1.0, window_start: None, seen: 0, failures: 0 }
    }

    fn observe(&mut self, err: f64) {
        if !self.enabled {
            return;
        }
        let Some(start) = self.window_start else {
            self.window_start = Some(err);
            self.seen = 0;
            return;
        };
        self.seen += 1;
        if self.seen < Self::WINDOW {
            return;
        }
        if self.omega == 1.0 {
            let rate = (err / start).powf(1.0 / Self::WINDOW as f64);
            if rate.is_finite() && rate > 0.5 && rate < 1.0 {
                self.omega = (2.0 / (1.0 + (1.0 - rate).sqrt())).min(Self::MAX_OMEGA);
            }
        } else if !(err < start) {
            self.failures += 1;
            self.omega = if self.failures >= Self::MAX_FAILURES { 1.0 } else { 1.0 + (self.omega - 1.0) / 2.0 };
            if self.omega == 1.0 {
                self.enabled = false;
            }
        }
        self.window_start = Some(err);
        self.seen = 0;
    }
}

struct Scaling<'a> {
    cost: &'a DMatrix<f64>,
    log_a: Vec<f64>,
    log_b: Vec<f64>,
    eps: f64,
    /// Exponent on the marginal ratios: 1 for balanced, `tau / (tau + eps)` otherwise.
    lambda: f64,
    f: Vec<f64>,
    g: Vec<f64>,
    kernel: DMatrix<f64>,
    u: DVector<f64>,
    v: DVector<f64>,
}

impl<'a> Scaling<'a> {
    fn new(cost: &'a DMatrix<f64>, a: &[f64], b: &[f64], eps: f64, lambda: f64) -> Self {
        let (na, nb) = cost.shape();
        Self {
            cost,
            log_a: a.iter().map(|x| x.ln()).collect(),
            log_b: b.iter().map(|x| x.ln()).collect(),
            eps,
            lambda,
            f: vec![0.0; na],
            g: vec![0.0; nb],
            kernel: DMatrix::zeros(na, nb),
            u: DVector::from_element(na, 1.0),
            v: DVector::from_element(nb, 1.0),
        }
    }

    /// Folds `u, v` into the potentials, runs one exact log-domain sweep and
    /// rebuilds the kernel.
    fn absorb(&mut self, iteration: usize) -> Result<(), OtError> {
        let eps = self.eps;
        for (f, u) in self.f.iter_mut().zip(self.u.iter()) {
            *f += eps * u.ln();
        }
        for (g, v) in self.g.iter_mut().zip(self.v.iter()) {
            *g += eps * v.ln();
        }
        let (na, nb) = self.cost.shape();
        for i in 0..na {
            let lse = log_sum_exp((0..nb).map(|j| (self.g[j] - self.cost[(i, j)]) / eps));
            self.f[i] = self.lambda * (eps * self.log_a[i] - eps * lse);
        }
        for j in 0..nb {
            let col = self.cost.column(j);
            let lse = log_sum_exp((0..na).map(|i| (self.f[i] - col[i]) / eps));
            self.g[j] = self.lambda * (eps * self.log_b[j] - eps * lse);
        }
        if self.f.iter().chain(&self.g).any(|x| x.is_nan()) {
            return Err(OtError::NaN { iteration });
        }
        for j in 0..nb {
            for i in 0..na {
                self.kernel[(i, j)] = ((self.f[i] + self.g[j] - self.cost[(i, j)]) / eps).exp();
            }
        }
        self.u.fill(1.0);
        self.v.fill(1.0);
        Ok(())
    }

    fn ratio_update(&self, log_marginal: &[f64], kernel_product: &DVector<f64>, potential: &[f64]) -> DVector<f64> {
        let lambda = self.lambda;
        DVector::from_iterator(
            kernel_product.len(),
            kernel_product.iter().enumerate().map(|(i, &kv)| {
                if lambda == 1.0 {
                    log_marginal[i].exp() / kv
                } else {
                    (lambda * (log_marginal[i] - kv.ln()) + (lambda - 1.0) * potential[i] / self.eps).exp()
                }
            }),
        )
    }

    fn in_range(x: &DVector<f64>) -> bool {
        x.iter().all(|&s| s.is_finite() && s < SCALING_BOUND && s > 1.0 / SCALING_BOUND)
    }

    fn run(&mut self, a: &[f64], b: &[f64], max_iters: usize, tol: f64, stop: Stop) -> Result<(usize, bool), OtError> {
        self.absorb(1)?;
        let mut relax = Relaxation::new(self.lambda == 1.0 && stop == Stop::Marginal);
        // Columns match `b` after every plain update but not after a relaxed one.
        let mut cols_exact = true;
        let mut iteration = 1;
        while iteration < max_iters {
            iteration += 1;
            let kv = &self.kernel * &self.v;
            if stop == Stop::Marginal {
                let mut err: f64 = self
                    .u
                    .iter()
                    .zip(kv.iter())
                    .zip(a)
                    .map(|((u, kv), a)| (u * kv - a).abs())
                    .sum();
                if !cols_exact {
                    let ktu = self.kernel.tr_mul(&self.u);
                    err = err.max(self.v.iter().zip(ktu.iter()).zip(b).map(|((v, k), b)| (v * k - b).abs()).sum());
                }
                if err.is_nan() {
                    return Err(OtError::NaN { iteration });
                }
                if err <= tol {
                    return Ok((iteration, true));
                }
                relax.observe(err);
            }
            let omega = relax.omega;
            let mut u = self.ratio_update(&self.log_a, &kv, &self.f);
            if omega != 1.0 {
                u.zip_apply(&self.u, |n, o| *n = o.powf(1.0 - omega) * n.powf(omega));
            }
            if !Self::in_range(&u) {
                self.absorb(iteration)?;
                cols_exact = true;
                continue;
            }
            let ktu = self.kernel.tr_mul(&u);
            let mut v = self.ratio_update(&self.log_b, &ktu, &self.g);
            if omega != 1.0 {
                v.zip_apply(&self.v, |n, o| *n = o.powf(1.0 - omega) * n.powf(omega));
            }
            if !Self::in_range(&v) {
                self.u = u;
                self.absorb(iteration)?;
                cols_exact = true;
                continue;
            }
            cols_exact = omega == 1.0;
            let change = if stop == Stop::FixedPoint {
                // Largest change of any log plan entry, |du_i + dv_j|. This ignores the
                // shift f + c, g - c, which leaves the plan fixed but decays slowly
                // when lambda is close to 1.
                let range = |n: &DVector<f64>, o: &DVector<f64>| {
                    n.iter().zip(o.iter()).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (n, o)| {
                        let d = n.ln() - o.ln();
                        (lo.min(d), hi.max(d))
                    })
                };
                let (ulo, uhi) = range(&u, &self.u);
                let (vlo, vhi) = range(&v, &self.v);
                (uhi + vhi).max(-(ulo + vlo))
            } else {
                f64::INFINITY
            };
            if change.is_nan() {
                return Err(OtError::NaN { iteration });
            }
            self.u = u;
            self.v = v;
            if change <= tol {
                return Ok((iteration, true));
            }
        }
        Ok((iteration, false))
    }

    fn potentials(&self) -> DualPotentials {
        let eps = self.eps;
        DualPotentials {
            f: self.f.iter().zip(self.u.iter()).map(|(f, u)| f + eps * u.ln()).collect(),
            g: self.g.iter().zip(self.v.iter()).map(|(g, v)| g + eps * v.ln()).collect(),
        }
    }

    fn plan(&self) -> DMatrix<f64> {
        let mut p = self.kernel.clone();
        for j in 0..p.ncols() {
            for i in 0..p.nrows() {
                p[(i, j)] *= self.u[i] * self.v[j];
            }
        }
        p
    }
}

/// Dual potentials `(f, g)` of an entropic solve, with `P_ij = exp((f_i + g_j - C_ij) / eps)`.
/// Passing them back into a nearby problem warm-starts the iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPotentials {
    pub f: Vec<f64>,
    pub g: Vec<f64>,
}

fn validate_entropic(
    c: &CostMatrix,
    a: &[f64],
    b: &[f64],
    cfg: &SinkhornConfig,
    normalized: bool,
    warm: Option<&DualPotentials>,
) -> Result<(), OtError> {
    check_shape(c, a, b)?;
    check_weights("source", a, normalized)?;
    check_weights("target", b, normalized)?;
    if !(cfg.epsilon > 0.0) {
        return Err(OtError::Epsilon(cfg.epsilon));
    }
    if let Some(w) = warm {
        if (w.f.len(), w.g.len()) != c.shape() {
            return Err(OtError::Shape {
                left: (w.f.len(), w.g.len()),
                right: c.shape(),
            });
        }
    }
    Ok(())
}

/// Whether `(C, a, b)` should be solved as `(C^T, b, a)`. The alternating loop
/// updates rows first, so the two orientations stop at slightly different
/// plans. Solving one fixed orientation makes the transposed problem return
/// exactly the transposed plan.
fn solve_transposed(c: &DMatrix<f64>, a: &[f64], b: &[f64]) -> bool {
    use std::cmp::Ordering;
    let (na, nb) = c.shape();
    let by_weights = na.cmp(&nb).then_with(|| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    });
    let order = by_weights.then_with(|| {
        // Square, equal weights: compare C with C^T in row-major order.
        (0..na)
            .flat_map(|i| (0..nb).map(move |j| (i, j)))
            .map(|(i, j)| c[(i, j)].total_cmp(&c[(j, i)]))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    });
    order == Ordering::Greater
}

fn solve(
    c: &CostMatrix,
    a: &[f64],
    b: &[f64],
    cfg: &SinkhornConfig,
    lambda: f64,
    stop: Stop,
    warm: Option<&DualPotentials>,
) -> Result<(TransportPlan, DualPotentials), OtError> {
    if solve_transposed(c.matrix(), a, b) {
        let swapped = warm.map(|w| DualPotentials { f: w.g.clone(), g: w.f.clone() });
        let (plan, pot) = solve_oriented(&c.transpose(), b, a, cfg, lambda, stop, swapped.as_ref())?;
        return Ok((plan.transpose(), DualPotentials { f: pot.g, g: pot.f }));
    }
    solve_oriented(c, a, b, cfg, lambda, stop, warm)
}

fn solve_oriented(
    c: &CostMatrix,
    a: &[f64],
    b: &[f64],
    cfg: &SinkhornConfig,
    lambda: f64,
    stop: Stop,
    warm: Option<&DualPotentials>,
) -> Result<(TransportPlan, DualPotentials), OtError> {
    let mut s = Scaling::new(c.matrix(), a, b, cfg.epsilon, lambda);
    if let Some(w) = warm {
        if w.f.iter().chain(&w.g).all(|x| x.is_finite()) {
            s.f.clone_from(&w.f);
            s.g.clone_from(&w.g);
        }
    }
    let (iterations, converged) = s.run(a, b, cfg.max_iters, cfg.tol, stop)?;
    let plan = TransportPlan::from_matrix(s.plan(), a, b, converged, iterations);
    Ok((plan, s.potentials()))
}

/// Entropic optimal transport between weight vectors `a` and `b`.
pub fn sinkhorn(c: &CostMatrix, a: &[f64], b: &[f64], cfg: &SinkhornConfig) -> Result<TransportPlan, OtError> {
    sinkhorn_warm(c, a, b, cfg, None).map(|(p, _)| p)
}

/// [`sinkhorn`] started from the given potentials, also returning the final ones.
pub fn sinkhorn_warm(
    c: &CostMatrix,
    a: &[f64],
    b: &[f64],
    cfg: &SinkhornConfig,
    warm: Option<&DualPotentials>,
) -> Result<(TransportPlan, DualPotentials), OtError> {
    validate_entropic(c, a, b, cfg, true, warm)?;
    let (plan, pot) = solve(c, a, b, cfg, 1.0, Stop::Marginal, warm)?;
    if !plan.converged {
        log::debug!(
            "sinkhorn stopped after {} iterations with violation {:.3e}",
            plan.iterations,
            plan.src_marginal_error + plan.tgt_marginal_error
        );
    }
    Ok((plan, pot))
}

/// Entropic transport with both marginal constraints replaced by KL penalties
/// of strength `cfg.tau`.
pub fn sinkhorn_unbalanced(
    c: &CostMatrix,
    a: &[f64],
    b: &[f64],
    cfg: &SinkhornConfig,
) -> Result<TransportPlan, OtError> {
    sinkhorn_unbalanced_warm(c, a, b, cfg, None).map(|(p, _)| p)
}

pub fn sinkhorn_unbalanced_warm(
    c: &CostMatrix,
    a: &[f64],
    b: &[f64],
    cfg: &SinkhornConfig,
    warm: Option<&DualPotentials>,
) -> Result<(TransportPlan, DualPotentials), OtError> {
    validate_entropic(c, a, b, cfg, false, warm)?;
    if !(cfg.tau > 0.0) {
        return Err(OtError::Tau(cfg.tau));
    }
    let lambda = cfg.tau / (cfg.tau + cfg.epsilon);
    solve(c, a, b, cfg, lambda, Stop::FixedPoint, warm)
}

pub fn transport_cost(c: &CostMatrix, p: &DMatrix<f64>) -> Result<f64, OtError> {
    if c.shape() != p.shape() {
        return Err(OtError::Shape {
            left: c.shape(),
            right: p.shape(),
        });
    }
    Ok(c.matrix().dot(p))
}

/// An optimal one-to-one matching of rows to columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// `rows_to_cols[i]` is the column matched to row `i`.
    pub rows_to_cols: Vec<usize>,
    /// `sum_i C[i, rows_to_cols[i]]`, accumulated in row order.
    pub total: f64,
}

/// Minimum-cost perfect matching on a square matrix of finite (possibly
/// negative) costs. An epsilon-scaling auction produces near-optimal column
/// prices and a matching; rows whose matched column is not exactly their
/// cheapest under those prices are released and re-matched along Dijkstra
/// shortest augmenting paths (the Jonker-Volgenant augmentation), which makes
/// the result exactly optimal. `O(n^3)` worst case.
pub fn exact_assignment(cost: &DMatrix<f64>) -> Result<Assignment, OtError> {
    let (n, m) = cost.shape();
    if n != m {
        return Err(OtError::Shape {
            left: (n, m),
            right: (n, n),
        });
    }
    if n > ASSIGNMENT_MAX_SIZE {
        return Err(OtError::SizeCap {
            entries: n,
            cap: ASSIGNMENT_MAX_SIZE,
        });
    }
    for i in 0..n {
        for j in 0..n {
            let value = cost[(i, j)];
            if !value.is_finite() {
                return Err(OtError::InvalidCost { row: i, col: j, value });
            }
        }
    }
    let rows_to_cols = if n == 0 {
        Vec::new()
    } else {
        // Row-major copy: every scan below walks one row at a time.
        Lapjv::new(n, cost.transpose().as_slice().to_vec()).solve()
    };
    let total = rows_to_cols.iter().enumerate().map(|(i, &j)| cost[(i, j)]).sum();
    Ok(Assignment { rows_to_cols, total })
}

const FREE: usize = usize::MAX;

/// Auction step factor between successive epsilon phases.
const AUCTION_SCALING: f64 = 7.0;

struct Lapjv {
    n: usize,
    c: Vec<f64>,
    /// Column prices: row `i` prefers the column minimizing `c[i][j] - v[j]`.
    v: Vec<f64>,
    row_col: Vec<usize>,
    col_row: Vec<usize>,
}

impl Lapjv {
    fn new(n: usize, c: Vec<f64>) -> Self {
        Self {
            n,
            c,
            v: vec![0.0; n],
            row_col: vec![FREE; n],
            col_row: vec![FREE; n],
        }
    }

    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        &self.c[i * self.n..(i + 1) * self.n]
    }

    fn solve(mut self) -> Vec<usize> {
        self.auction();
        let free = self.release_slack_rows();
        let mut pred = vec![0usize; self.n];
        for i in free {
            let mut j = self.shortest_path(i, &mut pred);
            loop {
                let r = pred[j];
                self.col_row[j] = r;
                let next = std::mem::replace(&mut self.row_col[r], j);
                if r == i {
                    break;
                }
                j = next;
            }
        }
        self.row_col
    }

    /// Gauss-Seidel forward auction with epsilon scaling. Leaves a complete
    /// matching in which every row is within the final epsilon of its cheapest
    /// column.
    fn auction(&mut self) {
        let n = self.n;
        let (lo, hi) = self.c.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
        let range = hi - lo;
        if !(range > 0.0) {
            // Every matching is optimal.
            for i in 0..n {
                self.row_col[i] = i;
                self.col_row[i] = i;
            }
            return;
        }
        // Prices are kept as p = -v while bidding, on costs shifted to start at
        // zero so that increments of size eps_final stay representable.
        let mut p = vec![0.0; n];
        let eps_final = range * 1e-9 / n as f64;
        let mut eps = range / 4.0;
        let mut stack: Vec<usize> = Vec::with_capacity(n);
        loop {
            self.row_col.fill(FREE);
            self.col_row.fill(FREE);
            stack.extend((0..n).rev());
            while let Some(i) = stack.pop() {
                let row = &self.c[i * n..(i + 1) * n];
                let (mut j1, mut r1, mut r2) = (0, f64::INFINITY, f64::INFINITY);
                for (j, (&cij, &pj)) in row.iter().zip(&p).enumerate() {
                    let r = (cij - lo) + pj;
                    if r < r2 {
                        if r < r1 {
                            r2 = r1;
                            r1 = r;
                            j1 = j;
                        } else {
                            r2 = r;
                        }
                    }
                }
                let raise = if r2.is_finite() { r2 - r1 } else { 0.0 };
                let bid = p[j1] + raise + eps;
                p[j1] = if bid > p[j1] { bid } else { p[j1].next_up() };
                let evicted = std::mem::replace(&mut self.col_row[j1], i);
                if evicted != FREE {
                    self.row_col[evicted] = FREE;
                    stack.push(evicted);
                }
                self.row_col[i] = j1;
            }
            if !(eps > eps_final) {
                break;
            }
            eps = (eps / AUCTION_SCALING).max(eps_final);
        }
        for (v, p) in self.v.iter_mut().zip(&p) {
            *v = -p;
        }
    }

    /// Unmatches every row whose column is not an exact minimizer of its reduced
    /// cost, so the kept rows satisfy complementary slackness. Returns the
    /// released rows.
    fn release_slack_rows(&mut self) -> Vec<usize> {
        let mut free = Vec::new();
        for i in 0..self.n {
            let j = self.row_col[i];
            let row = self.row(i);
            let best = row.iter().zip(&self.v).map(|(c, v)| c - v).fold(f64::INFINITY, f64::min);
            if row[j] - self.v[j] > best {
                self.row_col[i] = FREE;
                self.col_row[j] = FREE;
                free.push(i);
            }
        }
        free
    }

    /// Dijkstra from free row `start` over reduced costs until an unmatched
    /// column is reached. Updates column prices and returns that column; the
    /// path is left in `pred`.
    fn shortest_path(&mut self, start: usize, pred: &mut [usize]) -> usize {
        let n = self.n;
        // cols[..lo] are settled, cols[lo..hi] are at the current minimum distance.
        let mut cols: Vec<usize> = (0..n).collect();
        let mut d: Vec<f64> = {
            let row = self.row(start);
            (0..n).map(|j| row[j] - self.v[j]).collect()
        };
        pred.fill(start);
        let (mut lo, mut hi) = (0, 0);
        let mut settled = 0;
        let end = 'search: loop {
            if lo == hi {
                settled = lo;
                hi = lo + 1;
                let mut mind = d[cols[lo]];
                for k in hi..n {
                    let j = cols[k];
                    if d[j] <= mind {
                        if d[j] < mind {
                            hi = lo;
                            mind = d[j];
                        }
                        cols[k] = cols[hi];
                        cols[hi] = j;
                        hi += 1;
                    }
                }
                if let Some(&j) = cols[lo..hi].iter().find(|&&j| self.col_row[j] == FREE) {
                    break 'search j;
                }
            }
            while lo != hi {
                let j = cols[lo];
                let i = self.col_row[j];
                let mind = d[j];
                let row = &self.c[i * n..(i + 1) * n];
                let h = row[j] - self.v[j] - mind;
                for k in hi..n {
                    let j = cols[k];
                    let reduced = row[j] - self.v[j] - h;
                    if reduced < d[j] {
                        d[j] = reduced;
                        pred[j] = i;
                        if reduced == mind {
                            if self.col_row[j] == FREE {
                                break 'search j;
                            }
                            cols[k] = cols[hi];
                            cols[hi] = j;
                            hi += 1;
                        }
                    }
                }
                lo += 1;
            }
        };
        // cols[lo] is at the final search distance in both exits above.
        let mind = d[cols[lo]];
        for &j in &cols[..settled] {
            self.v[j] += d[j] - mind;
        }
        end
    }
}

/// Unregularized optimal transport. Uniform square instances are solved as an
/// assignment; anything else by successive shortest paths on the bipartite
/// transport network.
pub fn exact_ot(c: &CostMatrix, a: &[f64], b: &[f64]) -> Result<TransportPlan, OtError> {
    check_shape(c, a, b)?;
    let (na, nb) = c.shape();
    if na * nb > EXACT_OT_MAX_ENTRIES {
        return Err(OtError::SizeCap {
            entries: na * nb,
            cap: EXACT_OT_MAX_ENTRIES,
        });
    }
    check_weights("source", a, true)?;
    check_weights("target", b, true)?;
    let uniform = |w: &[f64]| w.iter().all(|&x| (x - 1.0 / w.len() as f64).abs() <= 1e-15);
    if na == nb && uniform(a) && uniform(b) {
        let assignment = exact_assignment(c.matrix())?;
        let mut p = DMatrix::zeros(na, nb);
        for (i, &j) in assignment.rows_to_cols.iter().enumerate() {
            p[(i, j)] = 1.0 / na as f64;
        }
        return Ok(TransportPlan::from_matrix(p, a, b, true, na));
    }
    let (p, augmentations) = successive_shortest_paths(c.matrix(), a, b);
    Ok(TransportPlan::from_matrix(p, a, b, true, augmentations))
}

fn successive_shortest_paths(cost: &DMatrix<f64>, a: &[f64], b: &[f64]) -> (DMatrix<f64>, usize) {
    let (na, nb) = cost.shape();
    let nodes = na + nb;
    let mut supply = a.to_vec();
    let mut demand = b.to_vec();
    let mut flow = DMatrix::<f64>::zeros(na, nb);
    let mut potential = vec![0.0; nodes];
    let mut dist = vec![0.0; nodes];
    let mut prev = vec![usize::MAX; nodes];
    let mut done = vec![false; nodes];
    let mut augmentations = 0;
    loop {
        let remaining_supply: f64 = supply.iter().sum();
        let remaining_demand: f64 = demand.iter().sum();
        if remaining_supply <= MASS_EPS * na as f64 || remaining_demand <= MASS_EPS * nb as f64 {
            break;
        }
        dist.fill(f64::INFINITY);
        prev.fill(usize::MAX);
        done.fill(false);
        for i in 0..na {
            if supply[i] > MASS_EPS {
                dist[i] = 0.0;
            }
        }
        let mut target = None;
        loop {
            let mut best = usize::MAX;
            for node in 0..nodes {
                if !done[node] && dist[node].is_finite() && (best == usize::MAX || dist[node] < dist[best]) {
                    best = node;
                }
            }
            if best == usize::MAX {
                break;
            }
            done[best] = true;
            if best >= na && demand[best - na] > MASS_EPS {
                target = Some(best);
                break;
            }
            if best < na {
                for j in 0..nb {
                    let node = na + j;
                    if done[node] {
                        continue;
                    }
                    let rc = (cost[(best, j)] + potential[best] - potential[node]).max(0.0);
                    if dist[best] + rc < dist[node] {
                        dist[node] = dist[best] + rc;
                        prev[node] = best;
                    }
                }
            } else {
                let j = best - na;
                for i in 0..na {
                    if done[i] || flow[(i, j)] <= MASS_EPS {
                        continue;
                    }
                    let rc = (-cost[(i, j)] + potential[best] - potential[i]).max(0.0);
                    if dist[best] + rc < dist[i] {
                        dist[i] = dist[best] + rc;
                        prev[i] = best;
                    }
                }
            }
        }
        let Some(target) = target else { break };
        let reach = dist[target];
        for node in 0..nodes {
            potential[node] += dist[node].min(reach);
        }
        // Walk back to the originating source, collecting the bottleneck.
        let mut bottleneck = demand[target - na];
        let mut node = target;
        while prev[node] != usize::MAX {
            let p = prev[node];
            if p >= na {
                bottleneck = bottleneck.min(flow[(node, p - na)]);
            }
            node = p;
        }
        bottleneck = bottleneck.min(supply[node]);
        supply[node] -= bottleneck;
        demand[target - na] -= bottleneck;
        let mut node = target;
        while prev[node] != usize::MAX {
            let p = prev[node];
            if p < na {
                flow[(p, node - na)] += bottleneck;
            } else {
                flow[(node, p - na)] -= bottleneck;
            }
            node = p;
        }
        augmentations += 1;
    }
    (flow, augmentations)
}
