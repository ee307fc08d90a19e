//! Joint estimation of an orthogonal map and a transport plan between two
//! embedding spaces.
//!
//! The driver starts from a Frank–Wolfe solution of a convex relaxation on the
//! most frequent words, then alternates for `epochs x iters_per_epoch` steps:
//! estimate a plan between quantized anchor sets under the current map, and move
//! the map toward the polar factor of the coupling cross-covariance.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::embedding_io::EmbeddingMatrix;
use crate::ot::{self, DualPotentials, OtError, SinkhornConfig, TransportPlan};
use crate::procrustes::{self, OrthogonalMap, ProcrustesError, UpdateMode};
use crate::quantize::{self, QuantizeConfig, QuantizeError, QuantizedDistribution};

#[derive(Debug, thiserror::Error)]
pub enum AlignError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{side} space has {len} words, fewer than the {required} required")]
    VocabTooSmall {
        side: &'static str,
        len: usize,
        required: usize,
    },
    #[error("dimension mismatch: source {src}, target {tgt}")]
    Dimension { src: usize, tgt: usize },
    #[error("non-finite objective at epoch {epoch}, iteration {iteration}")]
    NonFinite { epoch: usize, iteration: usize },
    #[error(transparent)]
    Quantize(#[from] QuantizeError),
    #[error(transparent)]
    Ot(#[from] OtError),
    #[error(transparent)]
    Procrustes(#[from] ProcrustesError),
}

/// How anchor sets are drawn each round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SamplingMode {
    /// `k` rows drawn uniformly, equal weights, redrawn every iteration.
    Random,
    /// k-means++ anchors with Voronoi weights, drawn once per epoch.
    KMeansPP,
}

/// Which entropic solver estimates the plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OtKind {
    Balanced,
    Unbalanced,
}

macro_rules! keyword_enum {
    ($ty:ty, $what:literal, $($variant:path => $name:literal),+) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($variant => $name),+ })
            }
        }

        impl FromStr for $ty {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s.to_ascii_lowercase().as_str() {
                    $($name => Ok($variant),)+
                    other => Err(format!(concat!("unknown ", $what, " {:?}"), other)),
                }
            }
        }
    };
}

keyword_enum!(SamplingMode, "sampling mode", SamplingMode::Random => "random", SamplingMode::KMeansPP => "kmeanspp");
keyword_enum!(OtKind, "transport kind", OtKind::Balanced => "balanced", OtKind::Unbalanced => "unbalanced");

#[derive(Debug, Clone, PartialEq)]
pub struct AlignConfig {
    pub epochs: usize,
    pub iters_per_epoch: usize,
    pub k: usize,
    pub train_vocab: usize,
    pub init_vocab: usize,
    /// Frank–Wolfe iterations of the convex initialization.
    pub init_iters: usize,
    pub sampling: SamplingMode,
    pub lloyd_steps: usize,
    pub ot: OtKind,
    pub sinkhorn: SinkhornConfig,
    /// Initial gradient step; iteration `t` of an epoch uses `lr0 / (1 + t)`.
    pub lr0: f64,
    /// Re-quantize every iteration instead of once per epoch.
    pub requantize: bool,
    pub seed: u64,
}

/// Per-plan Sinkhorn budget inside the alignment loop. Each solve is warm-started
/// from the previous plan's potentials, so a short budget suffices and keeps a
/// k=2000 run within minutes.
pub const ALIGN_SINKHORN_ITERS: usize = 100;

impl Default for AlignConfig {
    fn default() -> Self {
        Self {
            epochs: 5,
            iters_per_epoch: 200,
            k: 2000,
            train_vocab: 20_000,
            init_vocab: 2500,
            init_iters: 50,
            sampling: SamplingMode::KMeansPP,
            lloyd_steps: 0,
            ot: OtKind::Balanced,
            sinkhorn: SinkhornConfig {
                max_iters: ALIGN_SINKHORN_ITERS,
                ..SinkhornConfig::default()
            },
            lr0: 0.5,
            requantize: false,
            seed: 0,
        }
    }
}

impl AlignConfig {
    pub fn validate(&self) -> Result<(), AlignError> {
        let fail = |msg: String| Err(AlignError::Config(msg));
        if self.k == 0 || self.train_vocab == 0 || self.init_vocab == 0 || self.iters_per_epoch == 0 {
            return fail("k, train_vocab, init_vocab and iters_per_epoch must be positive".into());
        }
        if self.k > self.train_vocab {
            return fail(format!("k = {} exceeds train_vocab = {}", self.k, self.train_vocab));
        }
        if self.init_vocab > self.train_vocab {
            return fail(format!(
                "init_vocab = {} exceeds train_vocab = {}",
                self.init_vocab, self.train_vocab
            ));
        }
        if self.lloyd_steps > 1 {
            return fail(format!("lloyd_steps must be 0 or 1, got {}", self.lloyd_steps));
        }
        if !(self.lr0 >= 0.0 && self.lr0.is_finite()) {
            return fail(format!("lr0 must be a finite nonnegative number, got {}", self.lr0));
        }
        if !(self.sinkhorn.epsilon > 0.0) {
            return fail(format!("epsilon must be positive, got {}", self.sinkhorn.epsilon));
        }
        if self.ot == OtKind::Unbalanced && !(self.sinkhorn.tau > 0.0) {
            return fail(format!("tau must be positive, got {}", self.sinkhorn.tau));
        }
        Ok(())
    }

    fn quantize_config(&self) -> QuantizeConfig {
        QuantizeConfig {
            k: self.k,
            lloyd_steps: self.lloyd_steps,
            seed: self.seed,
            oversample_cap: None,
        }
    }
}

/// `||K_X P - P K_Y||_F^2` with `K = X X^T`, evaluated in factored form.
fn relaxation_residual(x: &DMatrix<f64>, y: &DMatrix<f64>, p: &DMatrix<f64>) -> DMatrix<f64> {
    x * (x.tr_mul(p)) - (p * y) * y.transpose()
}

/// Residual at the vertex `Pi / n` where `Pi[i, sigma[i]] = 1`.
fn vertex_residual(x: &DMatrix<f64>, y: &DMatrix<f64>, sigma: &[usize]) -> DMatrix<f64> {
    let n = sigma.len();
    let mut x_inv = DMatrix::zeros(n, x.ncols());
    let mut y_fwd = DMatrix::zeros(n, y.ncols());
    for (i, &j) in sigma.iter().enumerate() {
        x_inv.row_mut(j).copy_from(&x.row(i));
        y_fwd.row_mut(i).copy_from(&y.row(j));
    }
    (x * x_inv.transpose() - y_fwd * y.transpose()) / n as f64
}

/// Result of the convex initialization.
#[derive(Debug, Clone)]
pub struct ConvexInit {
    pub map: OrthogonalMap,
    /// Coupling with uniform marginals `1/n` whose cross-covariance produced `map`.
    pub coupling: DMatrix<f64>,
    pub objective: f64,
    pub iterations: usize,
}

/// Frank–Wolfe on `min ||K_X P - P K_Y||_F^2` over couplings with uniform
/// marginals, returning the polar factor of `X^T P* Y` for the best coupling seen.
pub fn convex_init(x_head: &DMatrix<f64>, y_head: &DMatrix<f64>, iters: usize) -> Result<ConvexInit, AlignError> {
    if x_head.shape() != y_head.shape() {
        return Err(AlignError::Dimension {
            src: x_head.ncols(),
            tgt: y_head.ncols(),
        });
    }
    let n = x_head.nrows();
    if n == 0 {
        return Err(AlignError::Config("empty initialization vocabulary".into()));
    }
    let mut p = DMatrix::from_element(n, n, 1.0 / (n * n) as f64);
    let mut best: Option<(f64, DMatrix<f64>)> = None;
    let mut consider = |value: f64, candidate: &dyn Fn() -> DMatrix<f64>| {
        if value.is_finite() && best.as_ref().is_none_or(|(b, _)| value < *b) {
            best = Some((value, candidate()));
        }
    };
    for s in 1..=iters {
        let r = relaxation_residual(x_head, y_head, &p);
        consider(r.norm_squared(), &|| p.clone());
        let grad = x_head * x_head.tr_mul(&r) - (&r * y_head) * y_head.transpose();
        if grad.iter().any(|v| !v.is_finite()) {
            return Err(AlignError::NonFinite { epoch: 0, iteration: s });
        }
        let sigma = ot::exact_assignment(&grad)?.rows_to_cols;
        let vertex_value = vertex_residual(x_head, y_head, &sigma).norm_squared();
        let vertex = || {
            let mut v = DMatrix::zeros(n, n);
            for (i, &j) in sigma.iter().enumerate() {
                v[(i, j)] = 1.0 / n as f64;
            }
            v
        };
        consider(vertex_value, &vertex);
        let gamma = 2.0 / (2.0 + s as f64);
        p *= 1.0 - gamma;
        for (i, &j) in sigma.iter().enumerate() {
            p[(i, j)] += gamma / n as f64;
        }
    }
    let last = relaxation_residual(x_head, y_head, &p).norm_squared();
    consider(last, &|| p.clone());
    let (objective, coupling) = best.unwrap_or((last, p));
    let map = procrustes::nearest_orthogonal(&x_head.tr_mul(&(&coupling * y_head)))?;
    Ok(ConvexInit {
        map,
        coupling,
        objective,
        iterations: iters,
    })
}

/// Instrumentation counters for one alignment run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AlignStats {
    pub quantize_calls: usize,
    pub subsample_calls: usize,
    pub sinkhorn_calls: usize,
    pub sinkhorn_unconverged: usize,
    pub gradient_updates: usize,
    pub closed_form_updates: usize,
}

/// One plan estimate together with the anchors it couples.
#[derive(Debug, Clone)]
pub struct PlanStep {
    pub plan: TransportPlan,
    /// Source anchors in source coordinates (not yet mapped).
    pub src: QuantizedDistribution,
    pub tgt: QuantizedDistribution,
    /// `<C, P>` for the mapped anchors.
    pub cost: f64,
    pub cost_matrix: ot::CostMatrix,
}

/// Anchor sets for the current epoch plus the warm-start state of the solver.
pub struct PlanEstimator<'a> {
    x: &'a DMatrix<f64>,
    y: &'a DMatrix<f64>,
    cfg: AlignConfig,
    anchors: Option<(QuantizedDistribution, QuantizedDistribution)>,
    warm: Option<DualPotentials>,
    pub stats: AlignStats,
    /// Largest `|sum(weights) - 1|` over every anchor set drawn so far.
    pub max_weight_sum_error: f64,
}

impl<'a> PlanEstimator<'a> {
    pub fn new(x: &'a DMatrix<f64>, y: &'a DMatrix<f64>, cfg: &AlignConfig) -> Self {
        Self {
            x,
            y,
            cfg: cfg.clone(),
            anchors: None,
            warm: None,
            stats: AlignStats::default(),
            max_weight_sum_error: 0.0,
        }
    }

    /// Drops cached anchors so the next plan draws fresh ones.
    pub fn begin_epoch(&mut self) {
        self.anchors = None;
        self.warm = None;
    }

    fn draw(&mut self, rng: &mut ChaCha8Rng) -> Result<(QuantizedDistribution, QuantizedDistribution), AlignError> {
        match self.cfg.sampling {
            SamplingMode::KMeansPP => {
                self.stats.quantize_calls += 2;
                let qc = self.cfg.quantize_config();
                let qx = quantize::quantize(self.x, &qc, rng)?;
                let qy = quantize::quantize(self.y, &qc, rng)?;
                Ok((qx, qy))
            }
            SamplingMode::Random => {
                self.stats.subsample_calls += 2;
                let qx = quantize::random_subsample(self.x, self.cfg.k, rng)?;
                let qy = quantize::random_subsample(self.y, self.cfg.k, rng)?;
                Ok((qx, qy))
            }
        }
    }

    /// Plan between the anchor sets under map `w`, drawing anchors if needed.
    pub fn plan(&mut self, w: &OrthogonalMap, rng: &mut ChaCha8Rng) -> Result<PlanStep, AlignError> {
        let fresh = self.anchors.is_none() || self.cfg.requantize || self.cfg.sampling == SamplingMode::Random;
        if fresh {
            let (qx, qy) = self.draw(rng)?;
            for w in [&qx.weights, &qy.weights] {
                let err = (w.iter().sum::<f64>() - 1.0).abs();
                self.max_weight_sum_error = self.max_weight_sum_error.max(err);
            }
            self.anchors = Some((qx, qy));
            self.warm = None;
        }
        let (qx, qy) = self.anchors.as_ref().expect("anchors drawn above");
        let cost_matrix = ot::cost_matrix(&w.apply(&qx.centers), &qy.centers)?;
        let warm = self.warm.as_ref();
        let (plan, potentials) = match self.cfg.ot {
            OtKind::Balanced => ot::sinkhorn_warm(&cost_matrix, &qx.weights, &qy.weights, &self.cfg.sinkhorn, warm)?,
            OtKind::Unbalanced => {
                ot::sinkhorn_unbalanced_warm(&cost_matrix, &qx.weights, &qy.weights, &self.cfg.sinkhorn, warm)?
            }
        };
        self.stats.sinkhorn_calls += 1;
        if !plan.converged {
            self.stats.sinkhorn_unconverged += 1;
        }
        self.warm = Some(potentials);
        let cost = ot::transport_cost(&cost_matrix, &plan.matrix)?;
        Ok(PlanStep {
            plan,
            src: qx.clone(),
            tgt: qy.clone(),
            cost,
            cost_matrix,
        })
    }
}

/// A single quantized plan estimate with freshly drawn anchors.
pub fn quantized_wasserstein_plan(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    w: &OrthogonalMap,
    cfg: &AlignConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(TransportPlan, QuantizedDistribution, QuantizedDistribution), AlignError> {
    let mut est = PlanEstimator::new(x, y, cfg);
    let step = est.plan(w, rng)?;
    Ok((step.plan, step.src, step.tgt))
}

#[derive(Debug, Clone, Default)]
pub struct AlignReport {
    pub stats: AlignStats,
    /// Mean `<C, P>` over the iterations of each epoch.
    pub epoch_costs: Vec<f64>,
    /// Largest `||W^T W - I||_F` observed after any update.
    pub max_orthogonality_error: f64,
    /// Largest deviation of an anchor weight vector's sum from one.
    pub max_weight_sum_error: f64,
    pub init_objective: f64,
}

#[derive(Debug, Clone)]
pub struct Alignment {
    pub map: OrthogonalMap,
    pub init_map: OrthogonalMap,
    pub report: AlignReport,
}

fn require_rows(side: &'static str, m: &DMatrix<f64>, required: usize) -> Result<(), AlignError> {
    if m.nrows() < required {
        return Err(AlignError::VocabTooSmall {
            side,
            len: m.nrows(),
            required,
        });
    }
    Ok(())
}

/// Aligns two normalized spaces given as matrices whose rows are sorted by frequency.
pub fn align_matrices(x: &DMatrix<f64>, y: &DMatrix<f64>, cfg: &AlignConfig) -> Result<Alignment, AlignError> {
    cfg.validate()?;
    if x.ncols() != y.ncols() {
        return Err(AlignError::Dimension {
            src: x.ncols(),
            tgt: y.ncols(),
        });
    }
    require_rows("source", x, cfg.train_vocab)?;
    require_rows("target", y, cfg.train_vocab)?;
    let x = x.rows(0, cfg.train_vocab).into_owned();
    let y = y.rows(0, cfg.train_vocab).into_owned();

    let init = convex_init(
        &x.rows(0, cfg.init_vocab).into_owned(),
        &y.rows(0, cfg.init_vocab).into_owned(),
        cfg.init_iters,
    )?;
    log::info!("convex initialization objective {:.6e}", init.objective);
    let mut out = run_epochs(&x, &y, init.map.clone(), cfg)?;
    out.report.init_objective = init.objective;
    out.init_map = init.map;
    Ok(out)
}

/// Runs the alternating loop from a given initial map, skipping the convex
/// initialization. Inputs are used whole (no vocabulary truncation).
pub fn align_from(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    w0: &OrthogonalMap,
    cfg: &AlignConfig,
) -> Result<Alignment, AlignError> {
    cfg.validate()?;
    if x.ncols() != y.ncols() || x.ncols() != w0.dim() {
        return Err(AlignError::Dimension {
            src: x.ncols(),
            tgt: y.ncols(),
        });
    }
    require_rows("source", x, cfg.k)?;
    require_rows("target", y, cfg.k)?;
    run_epochs(x, y, w0.clone(), cfg)
}

fn run_epochs(x: &DMatrix<f64>, y: &DMatrix<f64>, w0: OrthogonalMap, cfg: &AlignConfig) -> Result<Alignment, AlignError> {
    let mut report = AlignReport {
        max_orthogonality_error: w0.orthogonality_error(),
        ..AlignReport::default()
    };
    let mut w = w0.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut est = PlanEstimator::new(x, y, cfg);

    for epoch in 1..=cfg.epochs {
        est.begin_epoch();
        let mode = if epoch == cfg.epochs {
            UpdateMode::ClosedForm
        } else {
            UpdateMode::Gradient
        };
        let mut total = 0.0;
        for t in 1..=cfg.iters_per_epoch {
            let step = est.plan(&w, &mut rng)?;
            let lr = cfg.lr0 / (1.0 + t as f64);
            let next =
                procrustes::coupling_procrustes_update(&w, &step.src.centers, &step.tgt.centers, &step.plan, lr, mode)
                    .map_err(|e| match e {
                        ProcrustesError::NonFinite(_) => AlignError::NonFinite { epoch, iteration: t },
                        other => other.into(),
                    })?;
            let objective = procrustes::alignment_objective(
                &next,
                &procrustes::coupling_cross_covariance(&step.src.centers, &step.tgt.centers, &step.plan.matrix)?,
            );
            if !(step.cost.is_finite() && objective.is_finite()) {
                return Err(AlignError::NonFinite { epoch, iteration: t });
            }
            match mode {
                UpdateMode::Gradient => est.stats.gradient_updates += 1,
                UpdateMode::ClosedForm => est.stats.closed_form_updates += 1,
            }
            report.max_orthogonality_error = report.max_orthogonality_error.max(next.orthogonality_error());
            total += step.cost;
            w = next;
        }
        let mean = total / cfg.iters_per_epoch as f64;
        log::info!("epoch {epoch}: mean transport cost {mean:.6}");
        report.epoch_costs.push(mean);
    }
    report.stats = est.stats;
    report.max_weight_sum_error = est.max_weight_sum_error;
    Ok(Alignment {
        map: w,
        init_map: w0,
        report,
    })
}

/// Aligns the first `cfg.train_vocab` words of two normalized spaces.
pub fn align(src: &EmbeddingMatrix, tgt: &EmbeddingMatrix, cfg: &AlignConfig) -> Result<Alignment, AlignError> {
    align_matrices(src.vectors(), tgt.vectors(), cfg)
}
