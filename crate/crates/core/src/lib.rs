//! Unsupervised alignment of two word-embedding spaces.
//!
//! The pipeline estimates an orthogonal map `W` and a transport plan between
//! the two spaces by alternating between an entropic optimal-transport solve on
//! k-means++ quantized anchor sets and an orthogonal Procrustes update. The map
//! can then be refined on an induced dictionary and scored on bilingual lexicon
//! induction.
//!
//! Row-major conventions: every point cloud is an `n x d` [`nalgebra::DMatrix`]
//! with one point per row, and maps act on the right (`X * W`).

pub mod align;
pub mod bench;
#[cfg(feature = "cli")]
pub mod cli;
pub mod embedding_io;
pub mod eval;
pub mod linalg;
pub mod ot;
pub mod preprocess;
pub mod procrustes;
pub mod quantize;
pub mod refine;
pub mod synthetic;

pub use align::{align, AlignConfig, Alignment, OtKind, SamplingMode};
pub use embedding_io::{EmbeddingMatrix, Lexicon};
pub use eval::{EvalReport, Retrieval};
pub use ot::{CostMatrix, SinkhornConfig, TransportPlan};
pub use procrustes::OrthogonalMap;
pub use quantize::{QuantizeConfig, QuantizedDistribution};
pub use refine::RefineConfig;

/// Top-level error for pipelines that cross module boundaries.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Io(#[from] embedding_io::IoError),
    #[error(transparent)]
    Preprocess(#[from] preprocess::PreprocessError),
    #[error(transparent)]
    Quantize(#[from] quantize::QuantizeError),
    #[error(transparent)]
    Ot(#[from] ot::OtError),
    #[error(transparent)]
    Procrustes(#[from] procrustes::ProcrustesError),
    #[error(transparent)]
    Align(#[from] align::AlignError),
    #[error(transparent)]
    Refine(#[from] refine::RefineError),
    #[error(transparent)]
    Eval(#[from] eval::EvalError),
    #[error(transparent)]
    Bench(#[from] bench::BenchError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
