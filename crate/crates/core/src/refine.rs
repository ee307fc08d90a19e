//! Post-alignment refinement: translate under the current map, keep confident
//! pairs, and refit the map by Procrustes on them.

use nalgebra::DMatrix;

use crate::eval::{Retrieval, SimilarityIndex, DEFAULT_CSLS_KNN};
use crate::linalg;
use crate::procrustes::{self, OrthogonalMap, ProcrustesError};

#[derive(Debug, thiserror::Error)]
pub enum RefineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("epoch {epoch} produced no mutual pairs; try --retrieval nn or disable the mutual filter")]
    EmptyDictionary { epoch: usize },
    #[error("dimension mismatch: source {src}, target {tgt}, map {map}")]
    Dimension { src: usize, tgt: usize, map: usize },
    #[error(transparent)]
    Procrustes(#[from] ProcrustesError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineConfig {
    pub epochs: usize,
    pub retrieval: Retrieval,
    pub csls_knn: usize,
    /// Frequency-ranked window size per epoch.
    pub dict_vocab_schedule: Vec<usize>,
    pub mutual_only: bool,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            epochs: 5,
            retrieval: Retrieval::Csls,
            csls_knn: DEFAULT_CSLS_KNN,
            dict_vocab_schedule: vec![5000, 7500, 10_000, 12_500, 15_000],
            mutual_only: true,
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<(), RefineError> {
        if self.dict_vocab_schedule.len() < self.epochs {
            return Err(RefineError::Config(format!(
                "schedule has {} entries for {} epochs",
                self.dict_vocab_schedule.len(),
                self.epochs
            )));
        }
        if self.dict_vocab_schedule.windows(2).any(|w| w[0] > w[1]) {
            return Err(RefineError::Config("schedule must be non-decreasing".into()));
        }
        if self.dict_vocab_schedule.contains(&0) || self.csls_knn == 0 {
            return Err(RefineError::Config("schedule entries and csls_knn must be positive".into()));
        }
        Ok(())
    }
}

fn check_dims(x: &DMatrix<f64>, y: &DMatrix<f64>, w: &OrthogonalMap) -> Result<(), RefineError> {
    if x.ncols() != w.dim() || y.ncols() != w.dim() {
        return Err(RefineError::Dimension {
            src: x.ncols(),
            tgt: y.ncols(),
            map: w.dim(),
        });
    }
    Ok(())
}

/// Source/target row pairs retrieved under `w` within the window of the given
/// (zero-based) epoch. Windows larger than a space are clipped to its size.
pub fn induce_dictionary(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    w: &OrthogonalMap,
    cfg: &RefineConfig,
    epoch: usize,
) -> Result<Vec<(usize, usize)>, RefineError> {
    cfg.validate()?;
    check_dims(x, y, w)?;
    let window = *cfg
        .dict_vocab_schedule
        .get(epoch)
        .ok_or_else(|| RefineError::Config(format!("no schedule entry for epoch {epoch}")))?;
    let xs = x.rows(0, window.min(x.nrows())).into_owned();
    let ys = y.rows(0, window.min(y.nrows())).into_owned();
    if xs.nrows() == 0 || ys.nrows() == 0 {
        return Err(RefineError::EmptyDictionary { epoch });
    }
    let index = SimilarityIndex::new(&w.apply(&xs), &ys, cfg.retrieval, cfg.csls_knn);
    let (row_best, col_best) = index.mutual_best();
    let pairs: Vec<(usize, usize)> = row_best
        .into_iter()
        .enumerate()
        .filter(|&(i, j)| !cfg.mutual_only || col_best[j] == i)
        .collect();
    if pairs.is_empty() {
        return Err(RefineError::EmptyDictionary { epoch });
    }
    Ok(pairs)
}

#[derive(Debug, Clone)]
pub struct Refinement {
    pub map: OrthogonalMap,
    /// Number of pairs kept in each epoch.
    pub dictionary_sizes: Vec<usize>,
}

pub fn refine(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    w0: &OrthogonalMap,
    cfg: &RefineConfig,
) -> Result<Refinement, RefineError> {
    cfg.validate()?;
    check_dims(x, y, w0)?;
    let mut w = w0.clone();
    let mut sizes = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let pairs = induce_dictionary(x, y, &w, cfg, epoch)?;
        let (src, tgt): (Vec<usize>, Vec<usize>) = pairs.iter().copied().unzip();
        w = procrustes::procrustes_closed_form(&linalg::select_rows(x, &src), &linalg::select_rows(y, &tgt), None)?;
        log::info!("refine epoch {}: {} pairs", epoch + 1, pairs.len());
        sizes.push(pairs.len());
    }
    Ok(Refinement {
        map: w,
        dictionary_sizes: sizes,
    })
}
