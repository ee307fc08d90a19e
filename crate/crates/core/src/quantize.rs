//! k-anchor compression of a point cloud: oversample, seed with k-means++,
//! optionally take Lloyd steps, and weight each anchor by its Voronoi cell.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::linalg;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum QuantizeError {
    #[error("cannot draw {requested} rows from {available}")]
    TooFewPoints { requested: usize, available: usize },
    #[error("anchor count must be positive")]
    ZeroAnchors,
    #[error("oversampling cap {cap} is below the anchor count {k}")]
    CapBelowK { cap: usize, k: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizeConfig {
    pub k: usize,
    /// 0 keeps the k-means++ seeds, 1 moves each seed to its cell mean once.
    pub lloyd_steps: usize,
    pub seed: u64,
    /// Upper bound on the oversampled support; `None` means the whole cloud.
    pub oversample_cap: Option<usize>,
}

impl QuantizeConfig {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            lloyd_steps: 0,
            seed: 0,
            oversample_cap: None,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

/// Weighted anchors. Weights are strictly positive and sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedDistribution {
    pub centers: DMatrix<f64>,
    pub weights: Vec<f64>,
    /// Seeding ran out of distinct points and duplicated some.
    pub padded: bool,
    /// Number of empty cells whose center was relocated.
    pub repaired: usize,
}

impl QuantizedDistribution {
    pub fn k(&self) -> usize {
        self.weights.len()
    }

    /// Uniform weights over the given points.
    pub fn uniform(centers: DMatrix<f64>) -> Self {
        let k = centers.nrows();
        Self {
            centers,
            weights: vec![1.0 / k as f64; k],
            padded: false,
            repaired: 0,
        }
    }
}

/// `min(n, ceil(k^2 ln k))`, with `k = 1` giving 1.
pub fn oversample_size(k: usize, n: usize) -> usize {
    assert!(k >= 1 && n >= 1, "oversample_size needs positive arguments");
    if k == 1 {
        return 1;
    }
    let kf = k as f64;
    let m = (kf * kf * kf.ln()).ceil();
    if m >= n as f64 {
        n
    } else {
        m as usize
    }
}

/// `m` distinct row indices drawn uniformly; `0..n` in order when `m == n`.
pub fn sample_indices<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Result<Vec<usize>, QuantizeError> {
    if m > n {
        return Err(QuantizeError::TooFewPoints {
            requested: m,
            available: n,
        });
    }
    if m == n {
        return Ok((0..n).collect());
    }
    Ok(rand::seq::index::sample(rng, n, m).into_vec())
}

pub fn sample_support<R: Rng + ?Sized>(
    points: &DMatrix<f64>,
    m: usize,
    rng: &mut R,
) -> Result<DMatrix<f64>, QuantizeError> {
    if m == points.nrows() {
        return Ok(points.clone());
    }
    let idx = sample_indices(points.nrows(), m, rng)?;
    Ok(linalg::select_rows(points, &idx))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Seeding {
    pub centers: DMatrix<f64>,
    /// Row of `points` each center was copied from.
    pub rows: Vec<usize>,
    pub padded: bool,
}

/// k-means++ (D^2) seeding: the first center uniformly, every further one with
/// probability proportional to the squared distance to the nearest chosen center.
pub fn kmeanspp_seed<R: Rng + ?Sized>(
    points: &DMatrix<f64>,
    k: usize,
    rng: &mut R,
) -> Result<Seeding, QuantizeError> {
    let m = points.nrows();
    if k == 0 {
        return Err(QuantizeError::ZeroAnchors);
    }
    if k > m {
        return Err(QuantizeError::TooFewPoints {
            requested: k,
            available: m,
        });
    }
    let mut rows = Vec::with_capacity(k);
    rows.push(rng.random_range(0..m));
    let mut nearest = linalg::sq_dist_to_row(points, points, rows[0]);
    let mut padded = false;
    while rows.len() < k {
        let total: f64 = nearest.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            let mut last_positive = 0;
            for (i, &d) in nearest.iter().enumerate() {
                if d <= 0.0 {
                    continue;
                }
                last_positive = i;
                acc += d;
                if acc > target {
                    pick = Some(i);
                    break;
                }
            }
            pick.unwrap_or(last_positive)
        } else {
            padded = true;
            rng.random_range(0..m)
        };
        rows.push(next);
        let d = linalg::sq_dist_to_row(points, points, next);
        for (cur, new) in nearest.iter_mut().zip(d) {
            if new < *cur {
                *cur = new;
            }
        }
    }
    if padded {
        log::warn!("k-means++ found fewer than {k} distinct points; duplicated some centers");
    }
    Ok(Seeding {
        centers: linalg::select_rows(points, &rows),
        rows,
        padded,
    })
}

/// Lloyd iterations: assign to the nearest center, move each center to the mean
/// of its cell. Empty cells keep their center.
pub fn lloyd_step(points: &DMatrix<f64>, centers: &DMatrix<f64>, steps: usize) -> DMatrix<f64> {
    let mut centers = centers.clone();
    let (k, d) = centers.shape();
    for _ in 0..steps {
        let (assign, _) = linalg::nearest_centers(points, &centers);
        let mut sums = DMatrix::<f64>::zeros(k, d);
        let mut counts = vec![0usize; k];
        for (i, &c) in assign.iter().enumerate() {
            counts[c] += 1;
            let mut row = sums.row_mut(c);
            row += points.row(i);
        }
        for (c, &count) in counts.iter().enumerate() {
            if count > 0 {
                let mean = sums.row(c) / count as f64;
                centers.row_mut(c).copy_from(&mean);
            }
        }
    }
    centers
}

fn cell_counts(points: &DMatrix<f64>, centers: &DMatrix<f64>) -> (Vec<usize>, Vec<f64>) {
    let (assign, dist) = linalg::nearest_centers(points, centers);
    let mut counts = vec![0usize; centers.nrows()];
    for c in assign {
        counts[c] += 1;
    }
    (counts, dist)
}

/// Fraction of points whose nearest center is each center. Empty cells get 0.
pub fn voronoi_weights(points: &DMatrix<f64>, centers: &DMatrix<f64>) -> Vec<f64> {
    let (counts, _) = cell_counts(points, centers);
    let m = points.nrows() as f64;
    counts.into_iter().map(|c| c as f64 / m).collect()
}

/// Sum over points of the squared distance to the nearest center.
pub fn quantization_cost(points: &DMatrix<f64>, centers: &DMatrix<f64>) -> f64 {
    linalg::nearest_centers(points, centers).1.iter().sum()
}

/// Voronoi weights with every cell made non-empty.
///
/// An empty cell's center is moved onto the point farthest from its nearest
/// center, for at most `k` rounds. Cells that still end up empty can only sit on
/// top of other centers; coincident centers share their cell's mass evenly.
pub fn repaired_weights(points: &DMatrix<f64>, centers: &mut DMatrix<f64>) -> (Vec<f64>, usize) {
    let k = centers.nrows();
    let mut repaired = 0;
    let mut counts;
    loop {
        let (c, dist) = cell_counts(points, centers);
        counts = c;
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            break;
        };
        if repaired >= k {
            break;
        }
        let (far, far_d) = dist
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &d)| if d > best.1 { (i, d) } else { best });
        if far_d <= 0.0 {
            break;
        }
        centers.row_mut(empty).copy_from(&points.row(far));
        repaired += 1;
    }

    let mut mass: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    if mass.contains(&0.0) {
        // Remaining empty centers are parked on the heaviest cell's center.
        let heaviest = (0..k).fold(0, |b, i| if mass[i] > mass[b] { i } else { b });
        for i in 0..k {
            if mass[i] == 0.0 && centers.row(i) != centers.row(heaviest) {
                let src = centers.row(heaviest).clone_owned();
                centers.row_mut(i).copy_from(&src);
                repaired += 1;
            }
        }
        let mut done = vec![false; k];
        for i in 0..k {
            if done[i] {
                continue;
            }
            let group: Vec<usize> = (i..k).filter(|&j| !done[j] && centers.row(j) == centers.row(i)).collect();
            let share = group.iter().map(|&j| mass[j]).sum::<f64>() / group.len() as f64;
            for &j in &group {
                mass[j] = share;
                done[j] = true;
            }
        }
    }
    let m = points.nrows() as f64;
    (mass.into_iter().map(|c| c / m).collect(), repaired)
}

/// Oversample, seed, refine and weight. Deterministic for a given RNG state.
pub fn quantize<R: Rng + ?Sized>(
    points: &DMatrix<f64>,
    cfg: &QuantizeConfig,
    rng: &mut R,
) -> Result<QuantizedDistribution, QuantizeError> {
    let n = points.nrows();
    if cfg.k == 0 {
        return Err(QuantizeError::ZeroAnchors);
    }
    if n < cfg.k {
        return Err(QuantizeError::TooFewPoints {
            requested: cfg.k,
            available: n,
        });
    }
    let mut m = oversample_size(cfg.k, n);
    if let Some(cap) = cfg.oversample_cap {
        if cap < cfg.k {
            return Err(QuantizeError::CapBelowK { cap, k: cfg.k });
        }
        m = m.min(cap);
    }
    let support = sample_support(points, m, rng)?;
    let seeding = kmeanspp_seed(&support, cfg.k, rng)?;
    let mut centers = lloyd_step(&support, &seeding.centers, cfg.lloyd_steps);
    let (weights, repaired) = repaired_weights(&support, &mut centers);
    Ok(QuantizedDistribution {
        centers,
        weights,
        padded: seeding.padded,
        repaired,
    })
}

/// `k` rows drawn uniformly without replacement, equally weighted.
pub fn random_subsample<R: Rng + ?Sized>(
    points: &DMatrix<f64>,
    k: usize,
    rng: &mut R,
) -> Result<QuantizedDistribution, QuantizeError> {
    if k == 0 {
        return Err(QuantizeError::ZeroAnchors);
    }
    let idx = if k == points.nrows() {
        (0..k).collect()
    } else {
        sample_indices(points.nrows(), k, rng)?
    };
    Ok(QuantizedDistribution::uniform(linalg::select_rows(points, &idx)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand_distr::{Distribution, StandardNormal};

    fn line(values: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(values.len(), 1, values)
    }

    fn gaussian(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, d, |_, _| StandardNormal.sample(&mut rng))
    }

    #[test]
    fn oversample_formula() {
        // 100 * ln 10 = 230.258...
        assert_eq!(oversample_size(10, 1_000_000), 231);
        assert_eq!(oversample_size(200, 20_000), 20_000);
        assert_eq!(oversample_size(1, 50), 1);
        // 4 * ln 2 = 2.77...
        assert_eq!(oversample_size(2, 100), 3);
    }

    #[test]
    fn full_support_is_identity() {
        let x = gaussian(7, 3, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        assert_eq!(sample_support(&x, 7, &mut rng).unwrap(), x);
    }

    #[test]
    fn support_sampling_is_reproducible() {
        let x = gaussian(50, 2, 2);
        let a = sample_support(&x, 1, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = sample_support(&x, 1, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a.nrows(), 1);
        assert_eq!(a, b);
        let a = sample_support(&x, 20, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = sample_support(&x, 20, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
        assert!(matches!(
            sample_support(&x, 51, &mut ChaCha8Rng::seed_from_u64(5)),
            Err(QuantizeError::TooFewPoints { .. })
        ));
    }

    #[test]
    fn seeding_k_distinct_points_takes_all() {
        let x = line(&[0.0, 3.0, 7.0, 20.0]);
        let s = kmeanspp_seed(&x, 4, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let mut rows = s.rows.clone();
        rows.sort();
        assert_eq!(rows, vec![0, 1, 2, 3]);
        assert!(!s.padded);
    }

    #[test]
    fn seeding_identical_points_pads() {
        let x = line(&[1.0, 1.0, 1.0]);
        let s = kmeanspp_seed(&x, 2, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert!(s.padded);
        assert_eq!(s.centers.nrows(), 2);
        assert!(matches!(
            kmeanspp_seed(&x, 4, &mut ChaCha8Rng::seed_from_u64(3)),
            Err(QuantizeError::TooFewPoints { .. })
        ));
    }

    /// Probability that D^2 seeding with k = 2 lands one center in each cluster,
    /// enumerated over the first (uniform) draw.
    fn two_cluster_split_probability(points: &[f64]) -> f64 {
        let n = points.len();
        let left = |x: f64| x < 5.0;
        let mut p = 0.0;
        for &first in points {
            let d2: Vec<f64> = points.iter().map(|&x| (x - first) * (x - first)).collect();
            let total: f64 = d2.iter().sum();
            let other: f64 = points
                .iter()
                .zip(&d2)
                .filter(|(&x, _)| left(x) != left(first))
                .map(|(_, &d)| d)
                .sum();
            p += other / total / n as f64;
        }
        p
    }

    #[test]
    fn seeding_splits_far_clusters_at_enumerated_rate() {
        let pts = [0.0, 1.0, 10.0, 11.0];
        let expected = two_cluster_split_probability(&pts);
        // Enumeration: from an endpoint the other cluster holds (100+121)/(1+100+121),
        // from an inner point (81+100)/(1+81+100).
        let hand = 0.5 * (221.0 / 222.0) + 0.5 * (181.0 / 182.0);
        assert!((expected - hand).abs() < 1e-12);
        let x = line(&pts);
        let trials = 1000;
        let split = (0..trials)
            .filter(|&s| {
                let seeds = kmeanspp_seed(&x, 2, &mut ChaCha8Rng::seed_from_u64(s)).unwrap();
                (seeds.centers[(0, 0)] < 5.0) != (seeds.centers[(1, 0)] < 5.0)
            })
            .count() as f64
            / trials as f64;
        // Binomial standard error at p ~ 0.995, n = 1000 is ~0.0022.
        assert!((split - expected).abs() < 0.01, "{split} vs {expected}");
    }

    #[test]
    fn lloyd_moves_to_cell_means() {
        let x = line(&[0.0, 1.0, 9.0, 10.0]);
        let c = line(&[1.0, 9.0]);
        assert_eq!(lloyd_step(&x, &c, 0), c);
        assert_eq!(lloyd_step(&x, &c, 1), line(&[0.5, 9.5]));
        assert_eq!(lloyd_step(&x, &line(&[0.5, 9.5]), 1), line(&[0.5, 9.5]));
    }

    #[test]
    fn lloyd_keeps_empty_centers() {
        let x = line(&[0.0, 1.0]);
        let c = line(&[0.0, 100.0]);
        assert_eq!(lloyd_step(&x, &c, 1), line(&[0.5, 100.0]));
    }

    #[test]
    fn voronoi_counts() {
        let x = line(&[0.0, 1.0, 2.0, 10.0]);
        assert_eq!(voronoi_weights(&x, &x), vec![0.25; 4]);
        assert_eq!(voronoi_weights(&x, &line(&[1.0, 10.0])), vec![0.75, 0.25]);
        assert_eq!(voronoi_weights(&x, &line(&[1.0, 10.0, 50.0])), vec![0.75, 0.25, 0.0]);
    }

    #[test]
    fn empty_cell_is_repaired() {
        let x = line(&[0.0, 1.0, 2.0, 10.0]);
        let mut c = line(&[1.0, 10.0, 50.0]);
        let (w, repaired) = repaired_weights(&x, &mut c);
        assert_eq!(repaired, 1);
        assert!(w.iter().all(|&v| v > 0.0));
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // The farthest point from its center was 0.0 (or 2.0, distance 1); ties go low.
        assert_eq!(c[(2, 0)], 0.0);
    }

    #[test]
    fn coincident_centers_share_mass() {
        let x = line(&[1.0, 1.0, 1.0]);
        let mut c = line(&[1.0, 1.0]);
        let (w, _) = repaired_weights(&x, &mut c);
        assert_eq!(w, vec![0.5, 0.5]);
    }

    #[test]
    fn quantize_with_k_equal_n_returns_the_points() {
        let x = gaussian(6, 2, 4);
        let mut cfg = QuantizeConfig::new(6);
        cfg.seed = 11;
        let q = quantize(&x, &cfg, &mut cfg.rng()).unwrap();
        assert_eq!(q.weights, vec![1.0 / 6.0; 6]);
        let mut got: Vec<Vec<f64>> = q.centers.row_iter().map(|r| r.iter().copied().collect()).collect();
        let mut want: Vec<Vec<f64>> = x.row_iter().map(|r| r.iter().copied().collect()).collect();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        want.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(got, want);
    }

    #[test]
    fn kmeanspp_beats_uniform_centers_on_gaussian_cloud() {
        let x = gaussian(2000, 2, 77);
        let mut wins = 0;
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let seeds = kmeanspp_seed(&x, 32, &mut rng).unwrap();
            let random = random_subsample(&x, 32, &mut rng).unwrap();
            if quantization_cost(&x, &seeds.centers) <= quantization_cost(&x, &random.centers) {
                wins += 1;
            }
        }
        assert!(wins >= 90, "k-means++ won {wins}/100");
    }

    #[test]
    fn quantize_rejects_bad_sizes() {
        let x = gaussian(3, 2, 0);
        let cfg = QuantizeConfig::new(4);
        assert!(matches!(quantize(&x, &cfg, &mut cfg.rng()), Err(QuantizeError::TooFewPoints { .. })));
        let cfg = QuantizeConfig::new(0);
        assert_eq!(quantize(&x, &cfg, &mut cfg.rng()), Err(QuantizeError::ZeroAnchors));
        let mut cfg = QuantizeConfig::new(2);
        cfg.oversample_cap = Some(1);
        assert_eq!(quantize(&x, &cfg, &mut cfg.rng()), Err(QuantizeError::CapBelowK { cap: 1, k: 2 }));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn weights_are_positive_and_normalized(seed in 0u64..1000, k in 1usize..12, lloyd in 0usize..2) {
            let x = gaussian(60, 3, seed);
            let cfg = QuantizeConfig { k, lloyd_steps: lloyd, seed, oversample_cap: None };
            let q = quantize(&x, &cfg, &mut cfg.rng()).unwrap();
            prop_assert_eq!(q.k(), k);
            prop_assert!(q.weights.iter().all(|&w| w > 0.0));
            prop_assert!((q.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn lloyd_never_increases_cost(seed in 0u64..1000, k in 1usize..10) {
            let x = gaussian(40, 2, seed);
            let seeds = kmeanspp_seed(&x, k, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let before = quantization_cost(&x, &seeds.centers);
            let after = quantization_cost(&x, &lloyd_step(&x, &seeds.centers, 1));
            prop_assert!(after <= before + 1e-9);
        }

        #[test]
        fn same_seed_same_output(seed in 0u64..1000) {
            let x = gaussian(80, 3, seed);
            let cfg = QuantizeConfig { k: 5, lloyd_steps: 1, seed, oversample_cap: Some(40) };
            let a = quantize(&x, &cfg, &mut cfg.rng()).unwrap();
            let b = quantize(&x, &cfg, &mut cfg.rng()).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
