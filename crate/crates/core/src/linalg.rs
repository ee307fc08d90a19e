//! Small dense helpers shared by the solvers. Points are rows.

use nalgebra::{DMatrix, DVector};

/// Rows processed per block when forming point-to-center inner products.
const BLOCK_ROWS: usize = 512;

/// Squared Euclidean norm of every row.
pub fn row_sq_norms(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = vec![0.0; m.nrows()];
    for col in m.column_iter() {
        for (acc, v) in out.iter_mut().zip(col.iter()) {
            *acc += v * v;
        }
    }
    out
}

/// Copies the selected rows, in the given order.
pub fn select_rows(m: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), m.ncols(), |i, j| m[(rows[i], j)])
}

/// Exact squared distance from every row of `points` to the row `center` of `centers`.
pub fn sq_dist_to_row(points: &DMatrix<f64>, centers: &DMatrix<f64>, center: usize) -> Vec<f64> {
    let mut out = vec![0.0; points.nrows()];
    for (j, col) in points.column_iter().enumerate() {
        let c = centers[(center, j)];
        for (acc, v) in out.iter_mut().zip(col.iter()) {
            let diff = v - c;
            *acc += diff * diff;
        }
    }
    out
}

/// Pairwise squared distances `|a_i - b_j|^2` through the expanded form, clamped at zero.
pub fn pairwise_sq_distances(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let an = row_sq_norms(a);
    let bn = row_sq_norms(b);
    let mut d = a * b.transpose();
    for j in 0..d.ncols() {
        for i in 0..d.nrows() {
            let v = an[i] + bn[j] - 2.0 * d[(i, j)];
            d[(i, j)] = v.max(0.0);
        }
    }
    d
}

/// Index of the nearest center for every point (ties go to the lowest index)
/// together with the squared distance to it.
pub fn nearest_centers(points: &DMatrix<f64>, centers: &DMatrix<f64>) -> (Vec<usize>, Vec<f64>) {
    assert_eq!(points.ncols(), centers.ncols(), "dimension mismatch");
    let n = points.nrows();
    let cn = row_sq_norms(centers);
    let ct = centers.transpose();
    let mut idx = vec![0usize; n];
    let mut dist = vec![f64::INFINITY; n];
    let mut start = 0;
    while start < n {
        let len = BLOCK_ROWS.min(n - start);
        let block = points.rows(start, len);
        let xn = row_sq_norms(&block.clone_owned());
        let g = block * &ct;
        for i in 0..len {
            let (mut best, mut best_d) = (0usize, f64::INFINITY);
            for (j, &c) in cn.iter().enumerate() {
                let v = (xn[i] + c - 2.0 * g[(i, j)]).max(0.0);
                if v < best_d {
                    best = j;
                    best_d = v;
                }
            }
            idx[start + i] = best;
            dist[start + i] = best_d;
        }
        start += len;
    }
    (idx, dist)
}

/// Frobenius norm of `W^T W - I`.
pub fn orthogonality_error(w: &DMatrix<f64>) -> f64 {
    let mut g = w.transpose() * w;
    for i in 0..g.nrows().min(g.ncols()) {
        g[(i, i)] -= 1.0;
    }
    g.norm()
}

/// Numerically stable `ln(sum(exp(x)))`. Returns `-inf` for empty or all `-inf` input.
pub fn log_sum_exp<I: IntoIterator<Item = f64> + Clone>(values: I) -> f64 {
    let max = values.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = values.into_iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Scales every row to unit Euclidean norm. Rows with norm below `floor` are left as is.
pub fn normalize_rows(m: &mut DMatrix<f64>, floor: f64) {
    let norms = row_sq_norms(m);
    for (i, sq) in norms.into_iter().enumerate() {
        let norm = sq.sqrt();
        if norm >= floor {
            let mut row = m.row_mut(i);
            row /= norm;
        }
    }
}

pub fn column_mean(m: &DMatrix<f64>) -> DVector<f64> {
    let n = m.nrows().max(1) as f64;
    DVector::from_iterator(m.ncols(), m.column_iter().map(|c| c.sum() / n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_prefers_lowest_index_on_ties() {
        let points = DMatrix::from_row_slice(1, 1, &[5.0]);
        let centers = DMatrix::from_row_slice(2, 1, &[4.0, 6.0]);
        let (idx, d) = nearest_centers(&points, &centers);
        assert_eq!(idx, vec![0]);
        assert_eq!(d, vec![1.0]);
    }

    #[test]
    fn pairwise_matches_direct_difference() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]);
        let b = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]);
        let d = pairwise_sq_distances(&a, &b);
        assert_eq!(d, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 2.0]));
        assert_eq!(sq_dist_to_row(&a, &b, 1), vec![1.0, 2.0]);
    }

    #[test]
    fn log_sum_exp_handles_large_magnitudes() {
        let v = [-1000.0, -1000.0];
        assert!((log_sum_exp(v) - (-1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp(std::iter::empty::<f64>()), f64::NEG_INFINITY);
    }
}
