//! Synthetic point clouds with a planted correspondence, for tests, benchmarks
//! and the demo.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::embedding_io::{EmbeddingMatrix, Lexicon};
use crate::linalg;
use crate::preprocess::{self, PreprocessError};

/// `n x d` matrix of independent standard normal entries.
pub fn gaussian<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(n, d, |_, _| StandardNormal.sample(rng))
}

/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix with the sign of
/// R's diagonal folded into Q).
pub fn random_orthogonal<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DMatrix<f64> {
    let qr = gaussian(d, d, rng).qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            let mut col = q.column_mut(j);
            col *= -1.0;
        }
    }
    q
}

/// `n` points from an equal-weight mixture of `components` isotropic Gaussians
/// with standard-normal means scaled by `separation` and unit spread.
pub fn gaussian_mixture<R: Rng + ?Sized>(
    n: usize,
    d: usize,
    components: usize,
    separation: f64,
    rng: &mut R,
) -> DMatrix<f64> {
    let components = components.max(1);
    let means = gaussian(components, d, rng) * separation;
    DMatrix::from_fn(n, d, |i, j| {
        let c = i % components;
        let z: f64 = StandardNormal.sample(rng);
        means[(c, j)] + z
    })
}

/// Shape of the clustered cloud used by the alignment harness.
#[derive(Debug, Clone, PartialEq)]
pub struct HarnessConfig {
    pub n: usize,
    pub d: usize,
    pub clusters: usize,
    /// Within-cluster standard deviation relative to unit-length cluster directions.
    pub spread: f64,
    /// Standard deviation of the Gaussian noise added to the rotated target.
    pub noise: f64,
    /// Exponent of the power-law cluster sizes (0 gives equal sizes).
    pub size_skew: f64,
    /// Rows are shuffled only within consecutive blocks of this many rows, so
    /// frequency ranks stay roughly comparable across the two spaces. `None`
    /// shuffles globally.
    pub shuffle_window: Option<usize>,
    /// Rows are ordered by `cluster rank + head_bias * clusters * U(0,1)`, so small
    /// values put the largest clusters first, like frequent words. `None` keeps
    /// the draw order.
    pub head_bias: Option<f64>,
}

impl HarnessConfig {
    pub fn new(n: usize, d: usize, noise: f64) -> Self {
        Self {
            n,
            d,
            clusters: 200,
            spread: 0.35,
            noise,
            size_skew: 1.0,
            shuffle_window: Some(100),
            head_bias: Some(0.3),
        }
    }
}

/// A normalized source space, a normalized target space that is a noisy rotated
/// permutation of it, and the planted answer key.
#[derive(Debug, Clone)]
pub struct Harness {
    pub src: EmbeddingMatrix,
    pub tgt: EmbeddingMatrix,
    /// Row `i` of the source corresponds to row `perm[i]` of the target.
    pub perm: Vec<usize>,
    pub rotation: DMatrix<f64>,
    pub gold: Lexicon,
}

impl Harness {
    /// Fraction of source rows whose best target under the planted key is `guess[i]`.
    pub fn accuracy(&self, guess: &[usize]) -> f64 {
        let hits = guess.iter().zip(&self.perm).filter(|(g, p)| g == p).count();
        hits as f64 / guess.len().max(1) as f64
    }
}

/// Clustered directions on the sphere with power-law cluster sizes. Clusters give
/// the cloud an orientation that a rotation cannot hide, unlike an isotropic
/// Gaussian.
pub fn clustered_sphere<R: Rng + ?Sized>(cfg: &HarnessConfig, rng: &mut R) -> DMatrix<f64> {
    let centers = {
        let mut c = gaussian(cfg.clusters.max(1), cfg.d, rng);
        linalg::normalize_rows(&mut c, f64::MIN_POSITIVE);
        c
    };
    let sizes: Vec<f64> = (1..=centers.nrows()).map(|r| (r as f64).powf(-cfg.size_skew)).collect();
    let total: f64 = sizes.iter().sum();
    let mut labels: Vec<usize> = (0..cfg.n)
        .map(|_| {
            let mut u = rng.random::<f64>() * total;
            let mut c = 0;
            while c + 1 < sizes.len() && u >= sizes[c] {
                u -= sizes[c];
                c += 1;
            }
            c
        })
        .collect();
    if let Some(bias) = cfg.head_bias {
        let spread = bias * sizes.len() as f64;
        let mut keyed: Vec<(f64, usize)> = labels.iter().map(|&c| (c as f64 + spread * rng.random::<f64>(), c)).collect();
        keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
        labels = keyed.into_iter().map(|(_, c)| c).collect();
    }
    let scale = cfg.spread / (cfg.d as f64).sqrt();
    let mut m = DMatrix::zeros(cfg.n, cfg.d);
    for (i, &c) in labels.iter().enumerate() {
        for j in 0..cfg.d {
            let z: f64 = StandardNormal.sample(rng);
            m[(i, j)] = centers[(c, j)] + scale * z;
        }
    }
    m
}

/// Builds the planted-correspondence harness. Tokens are `s<i>` and `t<j>`, and
/// the gold lexicon maps `s<i>` to `t<perm[i]>`.
pub fn harness<R: Rng + ?Sized>(cfg: &HarnessConfig, rng: &mut R) -> Result<Harness, PreprocessError> {
    let x = clustered_sphere(cfg, rng);
    let src = preprocess::normalize(&EmbeddingMatrix::from_matrix("s", x))?;
    let rotation = random_orthogonal(cfg.d, rng);
    let mut moved = src.vectors() * &rotation;
    for v in moved.iter_mut() {
        let z: f64 = StandardNormal.sample(rng);
        *v += cfg.noise * z;
    }
    let mut perm: Vec<usize> = (0..cfg.n).collect();
    match cfg.shuffle_window {
        Some(w) if w > 0 => perm.chunks_mut(w).for_each(|c| c.shuffle(rng)),
        _ => perm.shuffle(rng),
    }
    let mut y = DMatrix::zeros(cfg.n, cfg.d);
    for (i, &p) in perm.iter().enumerate() {
        y.row_mut(p).copy_from(&moved.row(i));
    }
    let tgt = preprocess::normalize(&EmbeddingMatrix::from_matrix("t", y))?;
    let mut gold = Lexicon::new();
    for (i, &p) in perm.iter().enumerate() {
        gold.insert(src.vocab()[i].clone(), tgt.vocab()[p].clone());
    }
    Ok(Harness {
        src,
        tgt,
        perm,
        rotation,
        gold,
    })
}
