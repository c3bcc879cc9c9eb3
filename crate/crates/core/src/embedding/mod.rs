//! Id-aligned embedding matrices and their on-disk formats.
//!
//! Vectors are stored as `f32`. Anything that reduces over rows or columns
//! accumulates in `f64`.

mod binary;
mod jsonl;

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use binary::{decode_binary, encode_binary, read_binary, write_binary, ACTE_MAGIC, ACTE_VERSION};
pub(crate) use binary::{ByteReader, ByteWriter};
pub use jsonl::{encode_jsonl, parse_jsonl, read_jsonl, write_jsonl, EmbeddingRecord};

#[derive(Debug, thiserror::Error)]
pub enum EmbeddingError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("dimension mismatch: `{first_id}` has {first_dim}, `{id}` has {dim}")]
    DimMismatch {
        first_id: String,
        first_dim: usize,
        id: String,
        dim: usize,
    },
    #[error("matrix dimensions differ: {left} vs {right}")]
    MatrixDimMismatch { left: usize, right: usize },
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("non-finite component in `{0}`")]
    NonFinite(String),
    #[error("zero vector `{0}` cannot be normalized")]
    ZeroVector(String),
    #[error("dimension must be positive")]
    ZeroDim,
    #[error("data length {len} is not {rows} x {dim}")]
    Shape { len: usize, rows: usize, dim: usize },
    #[error("no ids in common between the two matrices")]
    EmptyIntersection,
    #[error("bad magic {found:?}, expected {expected:?}")]
    BadMagic { found: [u8; 4], expected: [u8; 4] },
    #[error("unsupported format version {0}")]
    VersionUnsupported(u32),
    #[error("truncated at byte {offset}: needed {needed} more bytes")]
    Truncated { offset: usize, needed: usize },
    #[error("{0} trailing bytes after payload")]
    TrailingBytes(usize),
    #[error("invalid UTF-8 in id table at byte {0}")]
    InvalidUtf8(usize),
    #[error("no `{0}` records in input")]
    MissingKind(EmbeddingKind),
    #[error("input holds several kinds ({0}); choose one")]
    AmbiguousKind(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingKind {
    Abstract,
    Concrete,
    Image,
    Query,
}

impl fmt::Display for EmbeddingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Abstract => "abstract",
            Self::Concrete => "concrete",
            Self::Image => "image",
            Self::Query => "query",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for EmbeddingKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "abstract" => Ok(Self::Abstract),
            "concrete" => Ok(Self::Concrete),
            "image" => Ok(Self::Image),
            "query" => Ok(Self::Query),
            other => Err(format!("unknown embedding kind `{other}`")),
        }
    }
}

/// Dense row-major matrix whose rows are keyed by distinct string ids.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    dim: usize,
    ids: Vec<String>,
    data: Vec<f32>,
}

impl EmbeddingMatrix {
    pub fn new(dim: usize, ids: Vec<String>, data: Vec<f32>) -> Result<Self, EmbeddingError> {
        if dim == 0 {
            return Err(EmbeddingError::ZeroDim);
        }
        if data.len() != ids.len() * dim {
            return Err(EmbeddingError::Shape {
                len: data.len(),
                rows: ids.len(),
                dim,
            });
        }
        let mut seen = HashSet::with_capacity(ids.len());
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(EmbeddingError::DuplicateId(id.clone()));
            }
        }
        for (id, row) in ids.iter().zip(data.chunks_exact(dim)) {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(EmbeddingError::NonFinite(id.clone()));
            }
        }
        Ok(Self { dim, ids, data })
    }

    pub fn from_rows(ids: Vec<String>, rows: Vec<Vec<f32>>) -> Result<Self, EmbeddingError> {
        let dim = rows.first().map_or(0, Vec::len);
        for (id, row) in ids.iter().zip(&rows) {
            if row.len() != dim {
                return Err(EmbeddingError::DimMismatch {
                    first_id: ids[0].clone(),
                    first_dim: dim,
                    id: id.clone(),
                    dim: row.len(),
                });
            }
        }
        let data = rows.into_iter().flatten().collect();
        Self::new(dim, ids, data)
    }

    /// Builds from `f64` rows, rounding to `f32`.
    pub fn from_f64_rows(dim: usize, ids: Vec<String>, data: &[f64]) -> Result<Self, EmbeddingError> {
        Self::new(dim, ids, data.iter().map(|&v| v as f32).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn index(&self) -> HashMap<&str, usize> {
        self.ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect()
    }

    /// Rows widened to `f64`, row-major.
    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(|&v| f64::from(v)).collect()
    }

    /// Sub-matrix with the given ids, in the given order.
    pub fn select(&self, ids: &[String]) -> Option<Self> {
        let index = self.index();
        let mut data = Vec::with_capacity(ids.len() * self.dim);
        for id in ids {
            data.extend_from_slice(self.row(*index.get(id.as_str())?));
        }
        Some(Self {
            dim: self.dim,
            ids: ids.to_vec(),
            data,
        })
    }
}

/// Scales every row to unit Euclidean norm.
pub fn l2_normalize(matrix: &EmbeddingMatrix) -> Result<EmbeddingMatrix, EmbeddingError> {
    let mut data = Vec::with_capacity(matrix.data.len());
    for (id, row) in matrix.ids.iter().zip(matrix.rows()) {
        let norm = row.iter().map(|&v| f64::from(v) * f64::from(v)).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(EmbeddingError::ZeroVector(id.clone()));
        }
        data.extend(row.iter().map(|&v| (f64::from(v) / norm) as f32));
    }
    Ok(EmbeddingMatrix {
        dim: matrix.dim,
        ids: matrix.ids.clone(),
        data,
    })
}

/// Abstract and concrete matrices restricted to their shared ids, same row order.
#[derive(Debug, Clone)]
pub struct AlignedPairs {
    pub abstract_side: EmbeddingMatrix,
    pub concrete_side: EmbeddingMatrix,
    pub dropped_abstract: usize,
    pub dropped_concrete: usize,
}

impl AlignedPairs {
    pub fn dropped(&self) -> usize {
        self.dropped_abstract + self.dropped_concrete
    }
}

/// Intersects ids, keeping the abstract matrix's order.
pub fn align_pairs(
    abstract_side: &EmbeddingMatrix,
    concrete_side: &EmbeddingMatrix,
) -> Result<AlignedPairs, EmbeddingError> {
    if abstract_side.dim != concrete_side.dim {
        return Err(EmbeddingError::MatrixDimMismatch {
            left: abstract_side.dim,
            right: concrete_side.dim,
        });
    }
    let concrete_index = concrete_side.index();
    let shared: Vec<String> = abstract_side
        .ids
        .iter()
        .filter(|id| concrete_index.contains_key(id.as_str()))
        .cloned()
        .collect();
    if shared.is_empty() {
        return Err(EmbeddingError::EmptyIntersection);
    }
    let a = abstract_side.select(&shared).expect("ids drawn from abstract side");
    let c = concrete_side.select(&shared).expect("ids present in concrete side");
    Ok(AlignedPairs {
        dropped_abstract: abstract_side.len() - shared.len(),
        dropped_concrete: concrete_side.len() - shared.len(),
        abstract_side: a,
        concrete_side: c,
    })
}

/// Loads a matrix from `.jsonl` (selecting `kind`, or the only kind present)
/// or from an ACTE binary file (any other extension).
pub fn load_matrix(path: impl AsRef<Path>, kind: Option<EmbeddingKind>) -> Result<EmbeddingMatrix, EmbeddingError> {
    let path = path.as_ref();
    if path.extension().is_some_and(|e| e == "jsonl") {
        let mut by_kind = read_jsonl(path)?;
        match kind {
            Some(k) => by_kind.remove(&k).ok_or(EmbeddingError::MissingKind(k)),
            None if by_kind.len() == 1 => Ok(by_kind.into_values().next().expect("one entry")),
            None => {
                let kinds: Vec<String> = by_kind.keys().map(ToString::to_string).collect();
                Err(EmbeddingError::AmbiguousKind(kinds.join(", ")))
            }
        }
    } else {
        read_binary(path)
    }
}

/// Writes `.jsonl` (records tagged with `kind`) or ACTE binary, by extension.
pub fn save_matrix(
    matrix: &EmbeddingMatrix,
    kind: EmbeddingKind,
    path: impl AsRef<Path>,
) -> Result<(), EmbeddingError> {
    let path = path.as_ref();
    if path.extension().is_some_and(|e| e == "jsonl") {
        write_jsonl(matrix, kind, path)
    } else {
        write_binary(matrix, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(ids: &[&str], rows: &[&[f32]]) -> EmbeddingMatrix {
        EmbeddingMatrix::from_rows(
            ids.iter().map(|s| s.to_string()).collect(),
            rows.iter().map(|r| r.to_vec()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn normalize_three_four_five() {
        let n = l2_normalize(&m(&["a"], &[&[3.0, 4.0]])).unwrap();
        assert!((n.row(0)[0] - 0.6).abs() < 1e-7);
        assert!((n.row(0)[1] - 0.8).abs() < 1e-7);
    }

    #[test]
    fn normalize_unit_row_unchanged() {
        let unit = [0.6f32, 0.8];
        let n = l2_normalize(&m(&["a"], &[&unit])).unwrap();
        for (x, y) in n.row(0).iter().zip(unit) {
            assert!((x - y).abs() < 1e-7);
        }
    }

    #[test]
    fn normalize_zero_row_reports_id() {
        let err = l2_normalize(&m(&["a", "z"], &[&[1.0, 0.0], &[0.0, 0.0]])).unwrap_err();
        assert!(matches!(err, EmbeddingError::ZeroVector(id) if id == "z"));
    }

    #[test]
    fn align_intersects_in_order() {
        let a = m(&["a", "b", "c"], &[&[1.0], &[2.0], &[3.0]]);
        let c = m(&["d", "c", "b"], &[&[4.0], &[5.0], &[6.0]]);
        let p = align_pairs(&a, &c).unwrap();
        assert_eq!(p.abstract_side.ids(), ["b", "c"]);
        assert_eq!(p.concrete_side.ids(), ["b", "c"]);
        assert_eq!(p.abstract_side.data(), [2.0, 3.0]);
        assert_eq!(p.concrete_side.data(), [6.0, 5.0]);
        assert_eq!(p.dropped(), 2);
    }

    #[test]
    fn align_disjoint_and_identical() {
        let a = m(&["a"], &[&[1.0]]);
        let c = m(&["b"], &[&[1.0]]);
        assert!(matches!(align_pairs(&a, &c), Err(EmbeddingError::EmptyIntersection)));
        let p = align_pairs(&a, &a).unwrap();
        assert_eq!(p.dropped(), 0);
    }

    #[test]
    fn align_dim_mismatch() {
        let a = m(&["a"], &[&[1.0]]);
        let c = m(&["a"], &[&[1.0, 2.0]]);
        assert!(matches!(
            align_pairs(&a, &c),
            Err(EmbeddingError::MatrixDimMismatch { .. })
        ));
    }

    #[test]
    fn matrix_rejects_non_finite_and_duplicates() {
        let e = EmbeddingMatrix::new(1, vec!["a".into()], vec![f32::NAN]).unwrap_err();
        assert!(matches!(e, EmbeddingError::NonFinite(_)));
        let e = EmbeddingMatrix::new(1, vec!["a".into(), "a".into()], vec![1.0, 2.0]).unwrap_err();
        assert!(matches!(e, EmbeddingError::DuplicateId(_)));
    }
}
