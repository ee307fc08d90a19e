//! Browser bindings for three small interactive views of `qwp-core`:
//! an entropic transport plan between two 2-D clouds, k-means++ quantization of
//! a 2-D cloud, and recovery of a planted 2-D rotation by the alignment loop.
//!
//! Each view has a plain Rust builder returning `Result<_, String>` so it can be
//! tested natively. The `#[wasm_bindgen]` wrappers only convert errors.

use nalgebra::DMatrix;
use qwp_core::align::{align_matrices, AlignConfig, SamplingMode};
use qwp_core::ot::{self, SinkhornConfig};
use qwp_core::quantize::{self, QuantizeConfig};
use qwp_core::synthetic::{self, HarnessConfig};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wasm_bindgen::prelude::*;

const MAX_POINTS: usize = 2000;

fn flatten(m: &DMatrix<f64>) -> Vec<f64> {
    m.row_iter().flat_map(|r| r.iter().copied().collect::<Vec<_>>()).collect()
}

fn check_count(what: &str, n: usize, lo: usize) -> Result<(), String> {
    if n < lo || n > MAX_POINTS {
        return Err(format!("{what} must be between {lo} and {MAX_POINTS}, got {n}"));
    }
    Ok(())
}

fn cloud(n: usize, clusters: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let cfg = HarnessConfig {
        clusters,
        head_bias: None,
        ..HarnessConfig::new(n, 2, 0.0)
    };
    synthetic::clustered_sphere(&cfg, rng)
}

/// Entropic plan between two clouds with uniform weights. Points are stored
/// row-major as `x0, y0, x1, y1, ...` and the plan as `rows x cols` row-major.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct PlanView {
    source: Vec<f64>,
    target: Vec<f64>,
    plan: Vec<f64>,
    rows: usize,
    cols: usize,
    iterations: usize,
    converged: bool,
    entropic_cost: f64,
    exact_cost: f64,
}

#[wasm_bindgen]
impl PlanView {
    pub fn source(&self) -> Vec<f64> {
        self.source.clone()
    }
    pub fn target(&self) -> Vec<f64> {
        self.target.clone()
    }
    pub fn plan(&self) -> Vec<f64> {
        self.plan.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn rows(&self) -> usize {
        self.rows
    }
    #[wasm_bindgen(getter)]
    pub fn cols(&self) -> usize {
        self.cols
    }
    #[wasm_bindgen(getter)]
    pub fn iterations(&self) -> usize {
        self.iterations
    }
    #[wasm_bindgen(getter)]
    pub fn converged(&self) -> bool {
        self.converged
    }
    #[wasm_bindgen(getter, js_name = entropicCost)]
    pub fn entropic_cost(&self) -> f64 {
        self.entropic_cost
    }
    /// Unregularized optimum, or NaN when the instance exceeds the exact solver cap.
    #[wasm_bindgen(getter, js_name = exactCost)]
    pub fn exact_cost(&self) -> f64 {
        self.exact_cost
    }
}

pub fn build_plan(rows: usize, cols: usize, epsilon: f64, seed: u64) -> Result<PlanView, String> {
    check_count("source size", rows, 1)?;
    check_count("target size", cols, 1)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = cloud(rows, 3, &mut rng);
    let y = cloud(cols, 4, &mut rng);
    let c = ot::cost_matrix(&x, &y).map_err(|e| e.to_string())?;
    let a = vec![1.0 / rows as f64; rows];
    let b = vec![1.0 / cols as f64; cols];
    let cfg = SinkhornConfig::with_epsilon(epsilon);
    let p = ot::sinkhorn(&c, &a, &b, &cfg).map_err(|e| e.to_string())?;
    let entropic_cost = ot::transport_cost(&c, &p.matrix).map_err(|e| e.to_string())?;
    let exact_cost = match ot::exact_ot(&c, &a, &b) {
        Ok(e) => ot::transport_cost(&c, &e.matrix).map_err(|e| e.to_string())?,
        Err(ot::OtError::SizeCap { .. }) => f64::NAN,
        Err(e) => return Err(e.to_string()),
    };
    Ok(PlanView {
        source: flatten(&x),
        target: flatten(&y),
        plan: flatten(&p.matrix),
        rows,
        cols,
        iterations: p.iterations,
        converged: p.converged,
        entropic_cost,
        exact_cost,
    })
}

#[wasm_bindgen(js_name = transportPlan)]
pub fn transport_plan(rows: usize, cols: usize, epsilon: f64, seed: u64) -> Result<PlanView, JsError> {
    build_plan(rows, cols, epsilon, seed).map_err(|e| JsError::new(&e))
}

/// Anchors summarizing a cloud, with their Voronoi weights.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct QuantizeView {
    points: Vec<f64>,
    centers: Vec<f64>,
    weights: Vec<f64>,
    cost: f64,
}

#[wasm_bindgen]
impl QuantizeView {
    pub fn points(&self) -> Vec<f64> {
        self.points.clone()
    }
    pub fn centers(&self) -> Vec<f64> {
        self.centers.clone()
    }
    pub fn weights(&self) -> Vec<f64> {
        self.weights.clone()
    }
    /// Mean squared distance from each point to its nearest anchor.
    #[wasm_bindgen(getter)]
    pub fn cost(&self) -> f64 {
        self.cost
    }
}

/// `kmeanspp = false` draws the anchors uniformly instead, for comparison.
pub fn build_quantization(n: usize, k: usize, kmeanspp: bool, lloyd: bool, seed: u64) -> Result<QuantizeView, String> {
    check_count("cloud size", n, 1)?;
    if k == 0 || k > n {
        return Err(format!("anchor count must be between 1 and {n}, got {k}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = cloud(n, 6, &mut rng);
    let q = if kmeanspp {
        let cfg = QuantizeConfig {
            lloyd_steps: usize::from(lloyd),
            seed,
            ..QuantizeConfig::new(k)
        };
        quantize::quantize(&x, &cfg, &mut rng)
    } else {
        quantize::random_subsample(&x, k, &mut rng)
    }
    .map_err(|e| e.to_string())?;
    let weights = if kmeanspp {
        q.weights.clone()
    } else {
        quantize::voronoi_weights(&x, &q.centers)
    };
    Ok(QuantizeView {
        cost: quantize::quantization_cost(&x, &q.centers) / n as f64,
        points: flatten(&x),
        centers: flatten(&q.centers),
        weights,
    })
}

#[wasm_bindgen(js_name = quantizeCloud)]
pub fn quantize_cloud(n: usize, k: usize, kmeanspp: bool, lloyd: bool, seed: u64) -> Result<QuantizeView, JsError> {
    build_quantization(n, k, kmeanspp, lloyd, seed).map_err(|e| JsError::new(&e))
}

/// Source, shuffled rotated target and the source mapped by the recovered map.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct AlignView {
    source: Vec<f64>,
    target: Vec<f64>,
    mapped: Vec<f64>,
    map: Vec<f64>,
    planted_degrees: f64,
    recovered_degrees: f64,
    reflection: bool,
    matched: f64,
}

#[wasm_bindgen]
impl AlignView {
    pub fn source(&self) -> Vec<f64> {
        self.source.clone()
    }
    pub fn target(&self) -> Vec<f64> {
        self.target.clone()
    }
    pub fn mapped(&self) -> Vec<f64> {
        self.mapped.clone()
    }
    /// Recovered 2x2 map, row-major.
    pub fn map(&self) -> Vec<f64> {
        self.map.clone()
    }
    #[wasm_bindgen(getter, js_name = plantedDegrees)]
    pub fn planted_degrees(&self) -> f64 {
        self.planted_degrees
    }
    /// Rotation angle of the recovered map (of its rotation part when it reflects).
    #[wasm_bindgen(getter, js_name = recoveredDegrees)]
    pub fn recovered_degrees(&self) -> f64 {
        self.recovered_degrees
    }
    #[wasm_bindgen(getter)]
    pub fn reflection(&self) -> bool {
        self.reflection
    }
    /// Fraction of source points whose nearest mapped target is their planted partner.
    #[wasm_bindgen(getter)]
    pub fn matched(&self) -> f64 {
        self.matched
    }
}

/// Row-vector rotation: `[x y] * R` turns the point counter-clockwise by `degrees`.
fn rotation(degrees: f64) -> DMatrix<f64> {
    let (s, c) = degrees.to_radians().sin_cos();
    DMatrix::from_row_slice(2, 2, &[c, s, -s, c])
}

pub fn build_alignment(n: usize, degrees: f64, noise: f64, k: usize, seed: u64) -> Result<AlignView, String> {
    check_count("cloud size", n, 2)?;
    if !degrees.is_finite() || !(noise >= 0.0) {
        return Err("angle must be finite and noise non-negative".into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = cloud(n, 5, &mut rng);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    let rotated = &x * rotation(degrees);
    let jitter = synthetic::gaussian(n, 2, &mut rng) * noise;
    let mut y = DMatrix::zeros(n, 2);
    for (i, &j) in perm.iter().enumerate() {
        y.set_row(j, &(rotated.row(i) + jitter.row(i)));
    }
    let cfg = AlignConfig {
        epochs: 3,
        iters_per_epoch: 30,
        k: k.clamp(1, n),
        train_vocab: n,
        init_vocab: n.min(300),
        sampling: SamplingMode::KMeansPP,
        seed,
        ..AlignConfig::default()
    };
    let out = align_matrices(&x, &y, &cfg).map_err(|e| e.to_string())?;
    let w = out.map.matrix();
    let mapped = &x * w;
    let reflection = w.determinant() < 0.0;
    let recovered_degrees = w[(0, 1)].atan2(w[(0, 0)]).to_degrees();
    let mut hits = 0;
    for (i, &j) in perm.iter().enumerate() {
        let nearest = (0..n)
            .min_by(|&a, &b| {
                let da = (mapped.row(i) - y.row(a)).norm_squared();
                let db = (mapped.row(i) - y.row(b)).norm_squared();
                da.total_cmp(&db)
            })
            .unwrap_or(0);
        hits += usize::from(nearest == j);
    }
    Ok(AlignView {
        source: flatten(&x),
        target: flatten(&y),
        mapped: flatten(&mapped),
        map: flatten(w),
        planted_degrees: degrees,
        recovered_degrees,
        reflection,
        matched: hits as f64 / n as f64,
    })
}

#[wasm_bindgen(js_name = alignRotation)]
pub fn align_rotation(n: usize, degrees: f64, noise: f64, k: usize, seed: u64) -> Result<AlignView, JsError> {
    build_alignment(n, degrees, noise, k, seed).map_err(|e| JsError::new(&e))
}
