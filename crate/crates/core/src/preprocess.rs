//! Unit-normalize, center, unit-normalize.

use crate::embedding_io::EmbeddingMatrix;
use crate::linalg;

/// Rows shorter than this cannot be normalized.
pub const MIN_ROW_NORM: f64 = 1e-12;

/// Largest column mean (absolute) accepted as centered.
const CENTERED_TOLERANCE: f64 = 1e-12;
const MAX_RECENTER_ROUNDS: usize = 100;

#[derive(Debug, thiserror::Error)]
pub enum PreprocessError {
    #[error("token {token:?} (row {row}) has near-zero norm {norm:.3e} at normalization step {step}")]
    ZeroRow {
        token: String,
        row: usize,
        step: u8,
        norm: f64,
    },
}

fn check_rows(emb: &EmbeddingMatrix, m: &nalgebra::DMatrix<f64>, step: u8) -> Result<(), PreprocessError> {
    for (row, sq) in linalg::row_sq_norms(m).into_iter().enumerate() {
        let norm = sq.sqrt();
        if norm < MIN_ROW_NORM {
            return Err(PreprocessError::ZeroRow {
                token: emb.vocab()[row].clone(),
                row,
                step,
                norm,
            });
        }
    }
    Ok(())
}

/// Scales rows to unit length, subtracts the column mean and rescales rows to
/// unit length again.
///
/// The final rescaling shifts the mean slightly off zero, so the center and
/// rescale pair is repeated until the mean vanishes. The output is then a fixed
/// point: normalizing it again changes nothing beyond rounding.
pub fn normalize(emb: &EmbeddingMatrix) -> Result<EmbeddingMatrix, PreprocessError> {
    let mut m = emb.vectors().clone();
    check_rows(emb, &m, 1)?;
    linalg::normalize_rows(&mut m, MIN_ROW_NORM);
    for round in 0..MAX_RECENTER_ROUNDS {
        let mean = linalg::column_mean(&m);
        if round > 0 && mean.amax() <= CENTERED_TOLERANCE {
            break;
        }
        for mut row in m.row_iter_mut() {
            row -= mean.transpose();
        }
        check_rows(emb, &m, 3)?;
        linalg::normalize_rows(&mut m, MIN_ROW_NORM);
        if round + 1 == MAX_RECENTER_ROUNDS {
            log::warn!("column mean still {:.3e} after {MAX_RECENTER_ROUNDS} rounds", mean.amax());
        }
    }
    Ok(emb.with_vectors(m))
}
