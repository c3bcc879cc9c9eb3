use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EmbeddingError, EmbeddingKind, EmbeddingMatrix};

/// One line of an embedding JSONL file: `{"id","kind","vector":[...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub id: String,
    pub kind: EmbeddingKind,
    pub vector: Vec<f32>,
}

struct Group {
    first_id: String,
    dim: usize,
    ids: Vec<String>,
    seen: HashSet<String>,
    data: Vec<f32>,
}

/// Groups records by kind. Each kind must have a uniform dimension.
pub fn parse_jsonl<R: BufRead>(reader: R) -> Result<BTreeMap<EmbeddingKind, EmbeddingMatrix>, EmbeddingError> {
    let mut groups: BTreeMap<EmbeddingKind, Group> = BTreeMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| EmbeddingError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        // serde_json rejects NaN literals, so anything parsed here is finite
        // unless it overflowed f32.
        let record: EmbeddingRecord = serde_json::from_str(&line).map_err(|e| EmbeddingError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if record.vector.is_empty() {
            return Err(EmbeddingError::ZeroDim);
        }
        if record.vector.iter().any(|v| !v.is_finite()) {
            return Err(EmbeddingError::NonFinite(record.id));
        }
        let group = groups.entry(record.kind).or_insert_with(|| Group {
            first_id: record.id.clone(),
            dim: record.vector.len(),
            ids: Vec::new(),
            seen: HashSet::new(),
            data: Vec::new(),
        });
        if record.vector.len() != group.dim {
            return Err(EmbeddingError::DimMismatch {
                first_id: group.first_id.clone(),
                first_dim: group.dim,
                id: record.id,
                dim: record.vector.len(),
            });
        }
        if !group.seen.insert(record.id.clone()) {
            return Err(EmbeddingError::DuplicateId(record.id));
        }
        group.ids.push(record.id);
        group.data.extend_from_slice(&record.vector);
    }
    groups
        .into_iter()
        .map(|(kind, g)| EmbeddingMatrix::new(g.dim, g.ids, g.data).map(|m| (kind, m)))
        .collect()
}

pub fn read_jsonl(path: impl AsRef<Path>) -> Result<BTreeMap<EmbeddingKind, EmbeddingMatrix>, EmbeddingError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| EmbeddingError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_jsonl(BufReader::new(file))
}

/// One `{"id","kind","vector"}` line per row.
pub fn encode_jsonl(matrix: &EmbeddingMatrix, kind: EmbeddingKind) -> String {
    let mut out = String::new();
    for (id, row) in matrix.ids().iter().zip(matrix.rows()) {
        let record = EmbeddingRecord {
            id: id.clone(),
            kind,
            vector: row.to_vec(),
        };
        out.push_str(&serde_json::to_string(&record).expect("record serializes"));
        out.push('\n');
    }
    out
}

pub fn write_jsonl(
    matrix: &EmbeddingMatrix,
    kind: EmbeddingKind,
    path: impl AsRef<Path>,
) -> Result<(), EmbeddingError> {
    let path = path.as_ref();
    let io = |source| EmbeddingError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    out.write_all(encode_jsonl(matrix, kind).as_bytes()).map_err(io)?;
    out.flush().map_err(io)
}
