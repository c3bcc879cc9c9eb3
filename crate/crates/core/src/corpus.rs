//! Multimodal item collections and the query sets derived from them.
//!
//! Items are read from JSONL, one object per line:
//!
//! ```text
//! {"id":"a1","class":"dress","description":"chic maxi dress","images":["i1","i2"]}
//! ```
//!
//! Unknown fields are ignored so that richer crawls can be fed in unchanged.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("item `{0}` has no images")]
    EmptyImages(String),
    #[error("item `{0}` has an empty description")]
    EmptyDescription(String),
    #[error("query `{0}` has no relevant images")]
    EmptyRelevant(String),
    #[error("dataset is empty")]
    EmptyDataset,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// One catalogue entry: an abstract-oriented description and the images of the item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Item {
    pub id: String,
    #[serde(rename = "class")]
    pub class_label: String,
    #[serde(rename = "description")]
    pub abstract_description: String,
    #[serde(rename = "images")]
    pub image_ids: Vec<String>,
}

impl Item {
    /// The image sent to the captioner. Always the first image of the item.
    pub fn caption_image(&self) -> &str {
        &self.image_ids[0]
    }

    fn validate(&self) -> Result<(), CorpusError> {
        if self.image_ids.is_empty() {
            return Err(CorpusError::EmptyImages(self.id.clone()));
        }
        if self.abstract_description.trim().is_empty() {
            return Err(CorpusError::EmptyDescription(self.id.clone()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Dataset {
    pub name: String,
    pub items: Vec<Item>,
}

impl Dataset {
    /// Builds a dataset, enforcing id uniqueness and per-item invariants.
    pub fn new(name: impl Into<String>, items: Vec<Item>) -> Result<Self, CorpusError> {
        let mut seen = HashSet::with_capacity(items.len());
        for item in &items {
            item.validate()?;
            if !seen.insert(item.id.as_str()) {
                return Err(CorpusError::DuplicateId(item.id.clone()));
            }
        }
        Ok(Self {
            name: name.into(),
            items,
        })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Item> {
        self.items.iter().find(|item| item.id == id)
    }
}

/// Parses a dataset from any JSONL reader. `name` is recorded for provenance.
pub fn parse_dataset<R: BufRead>(reader: R, name: &str) -> Result<Dataset, CorpusError> {
    let mut items = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| CorpusError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let item: Item = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        item.validate()?;
        if !seen.insert(item.id.clone()) {
            return Err(CorpusError::DuplicateId(item.id));
        }
        items.push(item);
    }
    Ok(Dataset {
        name: name.to_string(),
        items,
    })
}

/// Loads a JSONL dataset. The dataset name is the file stem.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset, CorpusError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(io_err(path))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_dataset(BufReader::new(file), &name)
}

pub fn write_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    for item in &dataset.items {
        let line = serde_json::to_string(item).expect("item serializes");
        writeln!(out, "{line}").map_err(io_err(path))?;
    }
    out.flush().map_err(io_err(path))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub id: String,
    pub text: String,
    #[serde(rename = "relevant")]
    pub relevant_image_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct QuerySet {
    pub queries: Vec<Query>,
}

impl QuerySet {
    pub fn new(queries: Vec<Query>) -> Result<Self, CorpusError> {
        let mut seen = HashSet::with_capacity(queries.len());
        for q in &queries {
            if q.relevant_image_ids.is_empty() {
                return Err(CorpusError::EmptyRelevant(q.id.clone()));
            }
            if !seen.insert(q.id.as_str()) {
                return Err(CorpusError::DuplicateId(q.id.clone()));
            }
        }
        Ok(Self { queries })
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    pub fn ids(&self) -> Vec<String> {
        self.queries.iter().map(|q| q.id.clone()).collect()
    }

    pub fn texts(&self) -> Vec<String> {
        self.queries.iter().map(|q| q.text.clone()).collect()
    }
}

/// Every item queries for its own images using its original description.
pub fn derive_queryset(dataset: &Dataset) -> Result<QuerySet, CorpusError> {
    if dataset.is_empty() {
        return Err(CorpusError::EmptyDataset);
    }
    let queries = dataset
        .items
        .iter()
        .map(|item| Query {
            id: item.id.clone(),
            text: item.abstract_description.clone(),
            relevant_image_ids: item.image_ids.clone(),
        })
        .collect();
    QuerySet::new(queries)
}

/// Query files use `{"id","text","relevant":[...]}` per line.
pub fn load_queryset(path: impl AsRef<Path>) -> Result<QuerySet, CorpusError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(io_err(path))?;
    let mut queries = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let query: Query = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            line: idx + 1,
            message: e.to_string(),
        })?;
        queries.push(query);
    }
    QuerySet::new(queries)
}

pub fn encode_queryset(queries: &QuerySet) -> String {
    let mut out = String::new();
    for q in &queries.queries {
        out.push_str(&serde_json::to_string(q).expect("query serializes"));
        out.push('\n');
    }
    out
}

pub fn write_queryset(queries: &QuerySet, path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let path = path.as_ref();
    std::fs::write(path, encode_queryset(queries)).map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Dataset, CorpusError> {
        parse_dataset(text.as_bytes(), "t")
    }

    #[test]
    fn maps_fields() {
        let ds = parse(r#"{"id":"a1","class":"dress","description":"chic maxi dress","images":["i1","i2"]}"#).unwrap();
        let item = &ds.items[0];
        assert_eq!(item.id, "a1");
        assert_eq!(item.class_label, "dress");
        assert_eq!(item.abstract_description, "chic maxi dress");
        assert_eq!(item.image_ids, vec!["i1", "i2"]);
    }

    #[test]
    fn duplicate_id_rejected() {
        let text = concat!(
            r#"{"id":"a1","class":"dress","description":"x","images":["i1"]}"#,
            "\n",
            r#"{"id":"a1","class":"top","description":"y","images":["i2"]}"#
        );
        assert!(matches!(parse(text), Err(CorpusError::DuplicateId(id)) if id == "a1"));
    }

    #[test]
    fn preserves_order_and_ignores_unknown_fields() {
        let text = concat!(
            r#"{"id":"c","class":"dress","description":"x","images":["i1"],"price":10}"#,
            "\n\n",
            r#"{"id":"a","class":"top","description":"y","images":["i2"]}"#,
            "\n",
            r#"{"id":"b","class":"skirt","description":"z","images":["i3"]}"#,
        );
        let ds = parse(text).unwrap();
        let ids: Vec<_> = ds.items.iter().map(|i| i.id.as_str()).collect();
        assert_eq!(ids, ["c", "a", "b"]);
    }

    #[test]
    fn empty_images_and_description() {
        let text = r#"{"id":"a","class":"top","description":"y","images":[]}"#;
        assert!(matches!(parse(text), Err(CorpusError::EmptyImages(_))));
        let text = r#"{"id":"a","class":"top","description":"   ","images":["i"]}"#;
        assert!(matches!(parse(text), Err(CorpusError::EmptyDescription(_))));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let text = concat!(
            r#"{"id":"a","class":"top","description":"y","images":["i"]}"#,
            "\n",
            "{not json"
        );
        assert!(matches!(parse(text), Err(CorpusError::Parse { line: 2, .. })));
    }

    #[test]
    fn queryset_from_dataset() {
        let ds = parse(r#"{"id":"a","class":"top","description":"y","images":["i1","i2"]}"#).unwrap();
        let qs = derive_queryset(&ds).unwrap();
        assert_eq!(qs.len(), 1);
        assert_eq!(qs.queries[0].relevant_image_ids.len(), 2);
        assert!(matches!(
            derive_queryset(&Dataset::default()),
            Err(CorpusError::EmptyDataset)
        ));
    }

    #[test]
    fn write_then_load_round_trips() {
        let ds = Dataset::new(
            "shop",
            vec![
                Item {
                    id: "x\"1".into(),
                    class_label: "coat".into(),
                    abstract_description: "cozy, über-warm coat".into(),
                    image_ids: vec!["p/1.jpg".into(), "p/2.jpg".into()],
                },
                Item {
                    id: "x2".into(),
                    class_label: "tee".into(),
                    abstract_description: "sporty tee".into(),
                    image_ids: vec!["p/3.jpg".into()],
                },
            ],
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("shop.jsonl");
        write_dataset(&ds, &path).unwrap();
        assert_eq!(load_dataset(&path).unwrap(), ds);
    }
}
