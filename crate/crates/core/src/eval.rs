//! Bilingual lexicon induction: nearest-neighbor and CSLS retrieval, precision
//! at 1 and mean reciprocal rank.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::embedding_io::{EmbeddingMatrix, Lexicon};
use crate::linalg;
use crate::procrustes::OrthogonalMap;

/// Neighborhood size for the CSLS penalty terms.
pub const DEFAULT_CSLS_KNN: usize = 10;
/// Depth of the ranking used for reciprocal ranks.
pub const DEFAULT_RANK_CAP: usize = 10;

const BLOCK_ROWS: usize = 256;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum EvalError {
    #[error("no queries to score")]
    EmptyQuerySet,
    #[error("dimension mismatch: source {src}, target {tgt}, map {map}")]
    Dimension { src: usize, tgt: usize, map: usize },
    #[error("query row {row} out of range for {len} source rows")]
    QueryRow { row: usize, len: usize },
    #[error("unknown retrieval method {0:?} (expected nn or csls)")]
    UnknownRetrieval(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Retrieval {
    /// Plain cosine similarity.
    Nn,
    /// Cross-domain similarity local scaling.
    Csls,
}

impl fmt::Display for Retrieval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Retrieval::Nn => "nn",
            Retrieval::Csls => "csls",
        })
    }
}

impl FromStr for Retrieval {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "nn" => Ok(Retrieval::Nn),
            "csls" => Ok(Retrieval::Csls),
            other => Err(EvalError::UnknownRetrieval(other.to_string())),
        }
    }
}

/// Copy of `m` with unit-length rows (zero rows stay zero).
pub fn unit_rows(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    linalg::normalize_rows(&mut out, f64::MIN_POSITIVE);
    out
}

#[cfg(feature = "parallel")]
fn map_blocks<T: Send>(n: usize, f: impl Fn(usize, usize) -> Vec<T> + Sync) -> Vec<T> {
    use rayon::prelude::*;
    let starts: Vec<usize> = (0..n).step_by(BLOCK_ROWS).collect();
    starts
        .into_par_iter()
        .map(|s| f(s, BLOCK_ROWS.min(n - s)))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

#[cfg(not(feature = "parallel"))]
fn map_blocks<T: Send>(n: usize, f: impl Fn(usize, usize) -> Vec<T> + Sync) -> Vec<T> {
    (0..n)
        .step_by(BLOCK_ROWS)
        .flat_map(|s| f(s, BLOCK_ROWS.min(n - s)))
        .collect()
}

/// For every row of `queries`, the mean of its `knn` largest inner products
/// with the rows of `base`. Rows are expected to be unit length.
pub fn mean_top_similarity(queries: &DMatrix<f64>, base: &DMatrix<f64>, knn: usize) -> Vec<f64> {
    let knn = knn.min(base.nrows()).max(1);
    let base_t = base.transpose();
    map_blocks(queries.nrows(), |start, len| {
        let sims = queries.rows(start, len) * &base_t;
        let mut out = Vec::with_capacity(len);
        let mut row = Vec::with_capacity(base.nrows());
        for i in 0..len {
            row.clear();
            row.extend(sims.row(i).iter().copied());
            row.select_nth_unstable_by(knn - 1, |a, b| b.total_cmp(a));
            out.push(row[..knn].iter().sum::<f64>() / knn as f64);
        }
        out
    })
}

/// Keeps the best `k` `(score, index)` pairs seen so far, visited in ascending
/// index order; equal scores rank the lower index first.
struct TopK {
    k: usize,
    items: Vec<(f64, usize)>,
}

impl TopK {
    fn new(k: usize) -> Self {
        Self {
            k,
            items: Vec::with_capacity(k + 1),
        }
    }

    fn push(&mut self, score: f64, index: usize) {
        if self.items.len() == self.k {
            if score <= self.items[self.k - 1].0 {
                return;
            }
            self.items.pop();
        }
        let pos = self.items.partition_point(|&(s, _)| s >= score);
        self.items.insert(pos, (score, index));
    }

    fn into_indices(self) -> Vec<usize> {
        self.items.into_iter().map(|(_, j)| j).collect()
    }
}

/// Unit-normalized mapped sources, unit-normalized targets and (for CSLS) the
/// two neighborhood penalty vectors.
pub struct SimilarityIndex {
    pub sources: DMatrix<f64>,
    pub targets: DMatrix<f64>,
    pub method: Retrieval,
    /// Mean similarity of each mapped source to its target neighborhood.
    pub src_penalty: Vec<f64>,
    /// Mean similarity of each target to its mapped-source neighborhood.
    pub tgt_penalty: Vec<f64>,
}

impl SimilarityIndex {
    pub fn new(mapped_sources: &DMatrix<f64>, targets: &DMatrix<f64>, method: Retrieval, knn: usize) -> Self {
        let sources = unit_rows(mapped_sources);
        let targets = unit_rows(targets);
        let (src_penalty, tgt_penalty) = match method {
            Retrieval::Nn => (vec![0.0; sources.nrows()], vec![0.0; targets.nrows()]),
            Retrieval::Csls => (
                mean_top_similarity(&sources, &targets, knn),
                mean_top_similarity(&targets, &sources, knn),
            ),
        };
        Self {
            sources,
            targets,
            method,
            src_penalty,
            tgt_penalty,
        }
    }

    fn score(&self, cos: f64, i: usize, j: usize) -> f64 {
        match self.method {
            Retrieval::Nn => cos,
            Retrieval::Csls => 2.0 * cos - self.src_penalty[i] - self.tgt_penalty[j],
        }
    }

    /// The `top_k` best targets for each listed source row, best first.
    pub fn rank(&self, rows: &[usize], top_k: usize) -> Vec<Vec<usize>> {
        let top_k = top_k.min(self.targets.nrows());
        let queries = linalg::select_rows(&self.sources, rows);
        let targets_t = self.targets.transpose();
        map_blocks(rows.len(), |start, len| {
            let sims = queries.rows(start, len) * &targets_t;
            (0..len)
                .map(|i| {
                    let src = rows[start + i];
                    let mut best = TopK::new(top_k);
                    for (j, &c) in sims.row(i).iter().enumerate() {
                        best.push(self.score(c, src, j), j);
                    }
                    best.into_indices()
                })
                .collect()
        })
    }

    /// Best target for every source row and best source for every target column.
    pub fn mutual_best(&self) -> (Vec<usize>, Vec<usize>) {
        let (ns, nt) = (self.sources.nrows(), self.targets.nrows());
        let targets_t = self.targets.transpose();
        let mut row_best = vec![(f64::NEG_INFINITY, 0usize); ns];
        let mut col_best = vec![(f64::NEG_INFINITY, 0usize); nt];
        let mut start = 0;
        while start < ns {
            let len = BLOCK_ROWS.min(ns - start);
            let sims = self.sources.rows(start, len) * &targets_t;
            for i in 0..len {
                let src = start + i;
                for j in 0..nt {
                    let s = self.score(sims[(i, j)], src, j);
                    if s > row_best[src].0 {
                        row_best[src] = (s, j);
                    }
                    if s > col_best[j].0 {
                        col_best[j] = (s, src);
                    }
                }
            }
            start += len;
        }
        (
            row_best.into_iter().map(|(_, j)| j).collect(),
            col_best.into_iter().map(|(_, i)| i).collect(),
        )
    }
}

fn check_dims(x: &DMatrix<f64>, y: &DMatrix<f64>, w: &OrthogonalMap) -> Result<(), EvalError> {
    if x.ncols() != w.dim() || y.ncols() != w.dim() {
        return Err(EvalError::Dimension {
            src: x.ncols(),
            tgt: y.ncols(),
            map: w.dim(),
        });
    }
    Ok(())
}

/// Ranks target rows for the given source rows after mapping the sources by `w`.
/// CSLS neighborhoods span all rows of both spaces.
pub fn retrieve(
    query_rows: &[usize],
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    w: &OrthogonalMap,
    method: Retrieval,
    top_k: usize,
) -> Result<Vec<Vec<usize>>, EvalError> {
    retrieve_with_knn(query_rows, x, y, w, method, top_k, DEFAULT_CSLS_KNN)
}

pub fn retrieve_with_knn(
    query_rows: &[usize],
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    w: &OrthogonalMap,
    method: Retrieval,
    top_k: usize,
    knn: usize,
) -> Result<Vec<Vec<usize>>, EvalError> {
    check_dims(x, y, w)?;
    if let Some(&row) = query_rows.iter().find(|&&r| r >= x.nrows()) {
        return Err(EvalError::QueryRow { row, len: x.nrows() });
    }
    let index = SimilarityIndex::new(&w.apply(x), y, method, knn);
    Ok(index.rank(query_rows, top_k.max(1)))
}

/// A query's ranked candidate tokens, or `None` when it cannot be answered.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedQuery {
    pub source: String,
    pub candidates: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub p_at_1: f64,
    pub map_mrr: f64,
    pub n_queries: usize,
    pub n_skipped: usize,
    pub retrieval: Retrieval,
    /// 1-based rank of the best gold translation, `None` when absent within the cap or skipped.
    pub ranks: Vec<Option<usize>>,
}

impl EvalReport {
    pub fn n_scored(&self) -> usize {
        self.n_queries - self.n_skipped
    }

    pub fn to_text(&self) -> String {
        format!(
            "retrieval: {}\nqueries: {} ({} skipped)\nP@1: {:.2}%\nMRR: {:.4}\n",
            self.retrieval,
            self.n_queries,
            self.n_skipped,
            100.0 * self.p_at_1,
            self.map_mrr
        )
    }

    pub fn to_key_values(&self) -> String {
        format!(
            "p_at_1={}\nmrr={}\nn_queries={}\nn_skipped={}\nretrieval={}\n",
            self.p_at_1, self.map_mrr, self.n_queries, self.n_skipped, self.retrieval
        )
    }
}

/// P@1 and MRR of ranked candidates against gold translations. A hit is any gold
/// translation; reciprocal ranks beyond `cap` count as 0.
pub fn score(queries: &[RankedQuery], gold: &Lexicon, retrieval: Retrieval, cap: usize) -> Result<EvalReport, EvalError> {
    if queries.is_empty() {
        return Err(EvalError::EmptyQuerySet);
    }
    let mut ranks = Vec::with_capacity(queries.len());
    let (mut hits, mut rr, mut skipped) = (0.0, 0.0, 0);
    for q in queries {
        let (Some(cands), Some(golds)) = (&q.candidates, gold.translations(&q.source)) else {
            skipped += 1;
            ranks.push(None);
            continue;
        };
        let rank = cands.iter().take(cap).position(|c| golds.contains(c)).map(|p| p + 1);
        if rank == Some(1) {
            hits += 1.0;
        }
        if let Some(r) = rank {
            rr += 1.0 / r as f64;
        }
        ranks.push(rank);
    }
    let scored = queries.len() - skipped;
    if scored == 0 {
        log::warn!("all {} queries were skipped; reporting zero scores", queries.len());
    }
    let denom = scored.max(1) as f64;
    Ok(EvalReport {
        p_at_1: hits / denom,
        map_mrr: rr / denom,
        n_queries: queries.len(),
        n_skipped: skipped,
        retrieval,
        ranks,
    })
}

/// Scores `w` on every source word of `lexicon`. Queries whose source is out of
/// vocabulary, or whose gold translations are all out of vocabulary, are skipped.
pub fn evaluate(
    src: &EmbeddingMatrix,
    tgt: &EmbeddingMatrix,
    w: &OrthogonalMap,
    lexicon: &Lexicon,
    retrieval: Retrieval,
    cap: usize,
) -> Result<EvalReport, EvalError> {
    evaluate_with_knn(src, tgt, w, lexicon, retrieval, cap, DEFAULT_CSLS_KNN)
}

/// [`evaluate`] with an explicit CSLS neighborhood size.
pub fn evaluate_with_knn(
    src: &EmbeddingMatrix,
    tgt: &EmbeddingMatrix,
    w: &OrthogonalMap,
    lexicon: &Lexicon,
    retrieval: Retrieval,
    cap: usize,
    knn: usize,
) -> Result<EvalReport, EvalError> {
    let cap = cap.max(1);
    let mut rows = Vec::new();
    let mut slots = Vec::new();
    let mut queries: Vec<RankedQuery> = lexicon
        .iter()
        .map(|(s, golds)| {
            let answerable = golds.iter().any(|g| tgt.contains(g));
            if let (Some(row), true) = (src.index_of(s), answerable) {
                rows.push(row);
                slots.push(true);
            } else {
                slots.push(false);
            }
            RankedQuery {
                source: s.clone(),
                candidates: None,
            }
        })
        .collect();
    if queries.is_empty() {
        return Err(EvalError::EmptyQuerySet);
    }
    let ranked = if rows.is_empty() {
        Vec::new()
    } else {
        retrieve_with_knn(&rows, src.vectors(), tgt.vectors(), w, retrieval, cap, knn)?
    };
    let mut ranked = ranked.into_iter();
    for (q, answerable) in queries.iter_mut().zip(slots) {
        if answerable {
            let idx = ranked.next().expect("one ranking per answerable query");
            q.candidates = Some(idx.into_iter().map(|j| tgt.vocab()[j].clone()).collect());
        }
    }
    score(&queries, lexicon, retrieval, cap)
}
