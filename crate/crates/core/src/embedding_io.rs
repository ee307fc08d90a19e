//! Text formats: fastText-style `.vec` embeddings, two-column translation
//! dictionaries, and learned maps.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use crate::linalg;
use crate::procrustes::OrthogonalMap;

/// Orthogonality tolerance applied when reading a map back from disk.
pub const MAP_ORTHOGONALITY_TOLERANCE: f64 = 1e-4;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed header: {reason}")]
    MalformedHeader { line: usize, reason: String },
    #[error("line {line}: expected {expected} fields, found {found}")]
    FieldCount {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: cannot parse {text:?} as a number")]
    BadNumber { line: usize, text: String },
    #[error("line {line}: non-finite value {text:?}")]
    NonFinite { line: usize, text: String },
    #[error("line {line}: empty vocabulary")]
    EmptyVocabulary { line: usize },
    #[error("duplicate token {0:?}")]
    DuplicateToken(String),
    #[error("vocabulary has {vocab} tokens but matrix has {rows} rows")]
    RowCount { vocab: usize, rows: usize },
    #[error("line {line}: map dimension mismatch: expected {expected}, found {found}")]
    MapDimension {
        line: usize,
        expected: usize,
        found: usize,
    },
}

impl IoError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        IoError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// An ordered vocabulary and one row vector per token.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    vocab: Vec<String>,
    vectors: DMatrix<f64>,
    index: HashMap<String, usize>,
}

impl EmbeddingMatrix {
    pub fn new(vocab: Vec<String>, vectors: DMatrix<f64>) -> Result<Self, IoError> {
        if vocab.len() != vectors.nrows() {
            return Err(IoError::RowCount {
                vocab: vocab.len(),
                rows: vectors.nrows(),
            });
        }
        let mut index = HashMap::with_capacity(vocab.len());
        for (i, tok) in vocab.iter().enumerate() {
            if index.insert(tok.clone(), i).is_some() {
                return Err(IoError::DuplicateToken(tok.clone()));
            }
        }
        Ok(Self {
            vocab,
            vectors,
            index,
        })
    }

    /// Synthetic vocabulary `w0, w1, ...` for generated point clouds.
    pub fn from_matrix(prefix: &str, vectors: DMatrix<f64>) -> Self {
        let vocab = (0..vectors.nrows()).map(|i| format!("{prefix}{i}")).collect();
        Self::new(vocab, vectors).expect("generated tokens are unique")
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    /// The first `n` rows (or all of them when `n` exceeds the length).
    pub fn head(&self, n: usize) -> EmbeddingMatrix {
        let n = n.min(self.len());
        Self::new(
            self.vocab[..n].to_vec(),
            self.vectors.rows(0, n).clone_owned(),
        )
        .expect("prefix of a valid matrix")
    }

    /// Same vocabulary, new vectors of the same shape.
    pub fn with_vectors(&self, vectors: DMatrix<f64>) -> EmbeddingMatrix {
        assert_eq!(vectors.shape(), self.vectors.shape());
        Self {
            vocab: self.vocab.clone(),
            vectors,
            index: self.index.clone(),
        }
    }
}

/// Source token to its set of gold translations.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicon {
    pairs: BTreeMap<String, BTreeSet<String>>,
}

impl Lexicon {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a pair. Empty tokens are ignored.
    pub fn insert(&mut self, src: impl Into<String>, tgt: impl Into<String>) {
        let (src, tgt) = (src.into(), tgt.into());
        if src.is_empty() || tgt.is_empty() {
            return;
        }
        self.pairs.entry(src).or_default().insert(tgt);
    }

    pub fn translations(&self, src: &str) -> Option<&BTreeSet<String>> {
        self.pairs.get(src)
    }

    pub fn sources(&self) -> impl Iterator<Item = &String> {
        self.pairs.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &BTreeSet<String>)> {
        self.pairs.iter()
    }

    /// Number of distinct source tokens.
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn n_pairs(&self) -> usize {
        self.pairs.values().map(BTreeSet::len).sum()
    }
}

/// A filtered lexicon plus bookkeeping on what was discarded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexiconLoad {
    pub lexicon: Lexicon,
    pub kept: usize,
    pub dropped: usize,
}

fn open(path: &Path) -> Result<BufReader<File>, IoError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| IoError::io(path, e))
}

pub fn load_embeddings(path: impl AsRef<Path>, max_vocab: usize) -> Result<EmbeddingMatrix, IoError> {
    let path = path.as_ref();
    read_embeddings(open(path)?, max_vocab).map_err(|e| match e {
        IoError::Io { source, .. } => IoError::io(path, source),
        other => other,
    })
}

/// Parses the `.vec` layout: a `n d` header, then `token v1 ... vd` lines.
///
/// Keeps the first `max_vocab` distinct tokens in file order. Repeated tokens
/// are skipped and do not count toward the limit.
pub fn read_embeddings<R: BufRead>(reader: R, max_vocab: usize) -> Result<EmbeddingMatrix, IoError> {
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(line) => line.map_err(|e| IoError::io(Path::new("<reader>"), e))?,
        None => {
            return Err(IoError::MalformedHeader {
                line: 1,
                reason: "missing header".into(),
            })
        }
    };
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 2 {
        return Err(IoError::MalformedHeader {
            line: 1,
            reason: format!("expected \"n d\", found {} fields", fields.len()),
        });
    }
    let parse_usize = |s: &str| {
        s.parse::<usize>().map_err(|_| IoError::MalformedHeader {
            line: 1,
            reason: format!("{s:?} is not a non-negative integer"),
        })
    };
    let n = parse_usize(fields[0])?;
    let dim = parse_usize(fields[1])?;
    if dim == 0 {
        return Err(IoError::MalformedHeader {
            line: 1,
            reason: "dimension must be positive".into(),
        });
    }

    let limit = n.min(max_vocab);
    let mut vocab: Vec<String> = Vec::with_capacity(limit.min(1 << 20));
    let mut seen: HashMap<String, ()> = HashMap::new();
    let mut data: Vec<f64> = Vec::with_capacity(limit.min(1 << 20) * dim);
    let mut last_line = 1;
    for (offset, line) in lines.enumerate() {
        if vocab.len() >= limit || offset >= n {
            break;
        }
        let lineno = offset + 2;
        last_line = lineno;
        let line = line.map_err(|e| IoError::io(Path::new("<reader>"), e))?;
        let line = line.trim_end_matches(['\r', '\n', ' ']);
        let mut parts = line.split(' ');
        let token = parts.next().unwrap_or_default();
        let values: Vec<&str> = parts.collect();
        if token.is_empty() || values.len() != dim {
            return Err(IoError::FieldCount {
                line: lineno,
                expected: dim + 1,
                found: usize::from(!token.is_empty()) + values.len(),
            });
        }
        let mut row = Vec::with_capacity(dim);
        for text in values {
            let v: f64 = text.parse().map_err(|_| IoError::BadNumber {
                line: lineno,
                text: text.to_string(),
            })?;
            if !v.is_finite() {
                return Err(IoError::NonFinite {
                    line: lineno,
                    text: text.to_string(),
                });
            }
            row.push(v);
        }
        if seen.insert(token.to_string(), ()).is_some() {
            continue;
        }
        vocab.push(token.to_string());
        data.extend(row);
    }
    if vocab.is_empty() {
        return Err(IoError::EmptyVocabulary { line: last_line });
    }
    if vocab.len() < limit {
        log::warn!("header announces {n} rows but only {} were read", vocab.len());
    }
    let vectors = DMatrix::from_row_slice(vocab.len(), dim, &data);
    EmbeddingMatrix::new(vocab, vectors)
}

pub fn save_embeddings(emb: &EmbeddingMatrix, path: impl AsRef<Path>) -> Result<(), IoError> {
    let path = path.as_ref();
    let mut out = BufWriter::new(File::create(path).map_err(|e| IoError::io(path, e))?);
    let mut write = || -> std::io::Result<()> {
        writeln!(out, "{} {}", emb.len(), emb.dim())?;
        for (i, tok) in emb.vocab().iter().enumerate() {
            write!(out, "{tok}")?;
            for v in emb.vectors().row(i).iter() {
                write!(out, " {v}")?;
            }
            writeln!(out)?;
        }
        out.flush()
    };
    write().map_err(|e| IoError::io(path, e))
}

/// Reads every `src tgt` pair without vocabulary filtering.
pub fn read_lexicon<R: BufRead>(reader: R) -> Result<Lexicon, IoError> {
    let mut lex = Lexicon::new();
    for (offset, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| IoError::io(Path::new("<reader>"), e))?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.as_slice() {
            [] => continue,
            [src, tgt] => lex.insert(*src, *tgt),
            _ => {
                return Err(IoError::FieldCount {
                    line: offset + 1,
                    expected: 2,
                    found: fields.len(),
                })
            }
        }
    }
    Ok(lex)
}

pub fn read_lexicon_file(path: impl AsRef<Path>) -> Result<Lexicon, IoError> {
    let path = path.as_ref();
    read_lexicon(open(path)?)
}

/// Keeps pairs whose source is in `src` and target in `tgt`.
pub fn filter_lexicon(raw: &Lexicon, src: &EmbeddingMatrix, tgt: &EmbeddingMatrix) -> LexiconLoad {
    let (mut kept, mut dropped) = (0, 0);
    let mut lexicon = Lexicon::new();
    for (s, targets) in raw.iter() {
        for t in targets {
            if src.contains(s) && tgt.contains(t) {
                lexicon.insert(s.clone(), t.clone());
                kept += 1;
            } else {
                dropped += 1;
            }
        }
    }
    LexiconLoad {
        lexicon,
        kept,
        dropped,
    }
}

pub fn load_lexicon(
    path: impl AsRef<Path>,
    src: &EmbeddingMatrix,
    tgt: &EmbeddingMatrix,
) -> Result<LexiconLoad, IoError> {
    let raw = read_lexicon_file(path)?;
    let load = filter_lexicon(&raw, src, tgt);
    log::info!("lexicon: kept {} pairs, dropped {}", load.kept, load.dropped);
    Ok(load)
}

/// Formats a value with 17 significant digits, enough to round-trip any `f64`.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_map<W: Write>(map: &OrthogonalMap, mut out: W) -> std::io::Result<()> {
    let m = map.matrix();
    writeln!(out, "{}", m.nrows())?;
    for row in m.row_iter() {
        let line: Vec<String> = row.iter().map(|&v| format_f64(v)).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    out.flush()
}

pub fn save_map(map: &OrthogonalMap, path: impl AsRef<Path>) -> Result<(), IoError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| IoError::io(path, e))?;
    write_map(map, BufWriter::new(file)).map_err(|e| IoError::io(path, e))
}

/// A map read from disk with its measured deviation from orthogonality.
#[derive(Debug, Clone)]
pub struct LoadedMap {
    pub map: OrthogonalMap,
    pub orthogonality_error: f64,
}

impl LoadedMap {
    pub fn is_orthogonal(&self) -> bool {
        self.orthogonality_error <= MAP_ORTHOGONALITY_TOLERANCE
    }
}

pub fn read_map<R: BufRead>(reader: R) -> Result<LoadedMap, IoError> {
    let mut lines = reader.lines();
    let header = lines
        .next()
        .transpose()
        .map_err(|e| IoError::io(Path::new("<reader>"), e))?
        .ok_or_else(|| IoError::MalformedHeader {
            line: 1,
            reason: "missing dimension".into(),
        })?;
    let dim: usize = header.trim().parse().map_err(|_| IoError::MalformedHeader {
        line: 1,
        reason: format!("{:?} is not a dimension", header.trim()),
    })?;
    if dim == 0 {
        return Err(IoError::MalformedHeader {
            line: 1,
            reason: "dimension must be positive".into(),
        });
    }
    let mut data = Vec::with_capacity(dim * dim);
    let mut rows = 0;
    for (offset, line) in lines.enumerate() {
        let lineno = offset + 2;
        let line = line.map_err(|e| IoError::io(Path::new("<reader>"), e))?;
        if line.trim().is_empty() {
            continue;
        }
        if rows == dim {
            return Err(IoError::MapDimension {
                line: lineno,
                expected: dim,
                found: rows + 1,
            });
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != dim {
            return Err(IoError::MapDimension {
                line: lineno,
                expected: dim,
                found: fields.len(),
            });
        }
        for text in fields {
            let v: f64 = text.parse().map_err(|_| IoError::BadNumber {
                line: lineno,
                text: text.to_string(),
            })?;
            if !v.is_finite() {
                return Err(IoError::NonFinite {
                    line: lineno,
                    text: text.to_string(),
                });
            }
            data.push(v);
        }
        rows += 1;
    }
    if rows != dim {
        return Err(IoError::MapDimension {
            line: rows + 1,
            expected: dim,
            found: rows,
        });
    }
    let matrix = DMatrix::from_row_slice(dim, dim, &data);
    let orthogonality_error = linalg::orthogonality_error(&matrix);
    if orthogonality_error > MAP_ORTHOGONALITY_TOLERANCE {
        log::warn!("loaded map deviates from orthogonality: |W^T W - I|_F = {orthogonality_error:.3e}");
    }
    Ok(LoadedMap {
        map: OrthogonalMap::from_matrix_unchecked(matrix),
        orthogonality_error,
    })
}

pub fn load_map(path: impl AsRef<Path>) -> Result<LoadedMap, IoError> {
    let path = path.as_ref();
    read_map(open(path)?)
}
