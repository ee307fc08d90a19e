//! Paired comparison of two cheap estimators of the optimal transport cost
//! between point clouds: k-means++ quantization and uniform k-subsampling.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::ot::{self, OtError};
use crate::quantize::{self, QuantizeConfig, QuantizeError, QuantizedDistribution};
use crate::synthetic;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("invalid benchmark setting: {0}")]
    Config(String),
    #[error(transparent)]
    Quantize(#[from] QuantizeError),
    #[error(transparent)]
    Ot(#[from] OtError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub trials: usize,
    pub seed: u64,
    pub components: usize,
    pub separation: f64,
    pub lloyd_steps: usize,
}

impl BenchConfig {
    pub fn new(n: usize, d: usize, k: usize, trials: usize) -> Self {
        Self {
            n,
            d,
            k,
            trials,
            seed: 0,
            components: 10,
            separation: 1.0,
            lloyd_steps: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchTrial {
    pub exact: f64,
    pub quantized: f64,
    pub random: f64,
}

impl BenchTrial {
    pub fn quantized_error(&self) -> f64 {
        (self.quantized - self.exact).abs()
    }

    pub fn random_error(&self) -> f64 {
        (self.random - self.exact).abs()
    }

    /// Quantization strictly beats subsampling on this trial.
    pub fn quantized_wins(&self) -> bool {
        self.quantized_error() < self.random_error()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub config: BenchConfig,
    pub trials: Vec<BenchTrial>,
}

impl BenchReport {
    pub fn win_rate(&self) -> f64 {
        let wins = self.trials.iter().filter(|t| t.quantized_wins()).count();
        wins as f64 / self.trials.len().max(1) as f64
    }

    pub fn mean_quantized_error(&self) -> f64 {
        mean(self.trials.iter().map(BenchTrial::quantized_error))
    }

    pub fn mean_random_error(&self) -> f64 {
        mean(self.trials.iter().map(BenchTrial::random_error))
    }

    pub fn to_table(&self) -> String {
        let mut out = String::from("trial\texact\tquantized\trandom\terr_quantized\terr_random\n");
        for (i, t) in self.trials.iter().enumerate() {
            out.push_str(&format!(
                "{i}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\n",
                t.exact,
                t.quantized,
                t.random,
                t.quantized_error(),
                t.random_error()
            ));
        }
        out.push_str(&format!(
            "win_rate={:.4}\nmean_err_quantized={:.6}\nmean_err_random={:.6}\n",
            self.win_rate(),
            self.mean_quantized_error(),
            self.mean_random_error()
        ));
        out
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Exact squared-Euclidean transport cost between two weighted point sets.
/// Equal-size, equally weighted sets go to the assignment solver.
pub fn exact_cost(src: &QuantizedDistribution, tgt: &QuantizedDistribution) -> Result<f64, OtError> {
    let cost = ot::cost_matrix(&src.centers, &tgt.centers)?;
    let uniform = |w: &[f64]| w.iter().all(|&v| v == w[0]);
    if src.k() == tgt.k() && uniform(&src.weights) && uniform(&tgt.weights) {
        let assignment = ot::exact_assignment(cost.matrix())?;
        return Ok(assignment.total / src.k() as f64);
    }
    let plan = ot::exact_ot(&cost, &src.weights, &tgt.weights)?;
    ot::transport_cost(&cost, &plan.matrix)
}

/// One paired trial on two independent mixtures drawn from `rng`.
pub fn bench_trial(cfg: &BenchConfig, rng: &mut ChaCha8Rng) -> Result<BenchTrial, BenchError> {
    let x = synthetic::gaussian_mixture(cfg.n, cfg.d, cfg.components, cfg.separation, rng);
    let y = synthetic::gaussian_mixture(cfg.n, cfg.d, cfg.components, cfg.separation, rng);
    trial_on(&x, &y, cfg, rng)
}

pub fn trial_on(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    cfg: &BenchConfig,
    rng: &mut ChaCha8Rng,
) -> Result<BenchTrial, BenchError> {
    let exact = exact_cost(
        &QuantizedDistribution::uniform(x.clone()),
        &QuantizedDistribution::uniform(y.clone()),
    )?;
    let qc = QuantizeConfig {
        k: cfg.k,
        lloyd_steps: cfg.lloyd_steps,
        seed: cfg.seed,
        oversample_cap: None,
    };
    let quantized = exact_cost(&quantize::quantize(x, &qc, rng)?, &quantize::quantize(y, &qc, rng)?)?;
    let random = exact_cost(
        &quantize::random_subsample(x, cfg.k, rng)?,
        &quantize::random_subsample(y, cfg.k, rng)?,
    )?;
    Ok(BenchTrial {
        exact,
        quantized,
        random,
    })
}

pub fn bench_quantize(cfg: &BenchConfig) -> Result<BenchReport, BenchError> {
    if cfg.n == 0 || cfg.d == 0 || cfg.k == 0 || cfg.trials == 0 {
        return Err(BenchError::Config("n, d, k and trials must be positive".into()));
    }
    if cfg.k > cfg.n {
        return Err(BenchError::Config(format!("k = {} exceeds n = {}", cfg.k, cfg.n)));
    }
    if cfg.n > ot::ASSIGNMENT_MAX_SIZE {
        return Err(OtError::SizeCap {
            entries: cfg.n * cfg.n,
            cap: ot::ASSIGNMENT_MAX_SIZE * ot::ASSIGNMENT_MAX_SIZE,
        }
        .into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let trials = (0..cfg.trials)
        .map(|_| bench_trial(cfg, &mut rng))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(BenchReport {
        config: cfg.clone(),
        trials,
    })
}
