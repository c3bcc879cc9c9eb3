//! The two phases end to end: preparation (caption, embed both sides, fit)
//! and inference (optionally rewrite, embed, shift).

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusError, Dataset, QuerySet};
use crate::embedding::{EmbeddingError, EmbeddingMatrix};
use crate::providers::{bounded_map, Captioner, ProviderError, Rewriter, TextEmbedder};
use crate::shift::{
    apply_shift, fit_shift, Provenance, ShiftCharacterization, ShiftError, ShiftFit, ShiftOptions, StatsMode,
};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Shift(#[from] ShiftError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("all {total} items failed to caption")]
    AllItemsFailed { total: usize },
    #[error("need at least 2 pairs to fit a shift, got {0}")]
    PairCountTooSmall(usize),
    #[error("shift was fitted with encoder `{fitted}` but queries use `{provider}`")]
    EncoderMismatch { fitted: String, provider: String },
    #[error("provider returned {found} vectors for {expected} texts")]
    CountMismatch { expected: usize, found: usize },
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcPair {
    pub item_id: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    #[serde(rename = "concrete")]
    pub concrete_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct AcProvenance {
    pub dataset: String,
    pub captioner: String,
    pub prompt: String,
    pub created_unix: u64,
}

/// Paired abstract descriptions and generated concrete captions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AcDatabase {
    pairs: Vec<AcPair>,
    pub provenance: AcProvenance,
}

impl AcDatabase {
    pub fn new(pairs: Vec<AcPair>, provenance: AcProvenance) -> Result<Self, PipelineError> {
        let mut seen = HashSet::with_capacity(pairs.len());
        for p in &pairs {
            if !seen.insert(p.item_id.as_str()) {
                return Err(CorpusError::DuplicateId(p.item_id.clone()).into());
            }
            if p.abstract_text.trim().is_empty() || p.concrete_text.trim().is_empty() {
                return Err(CorpusError::EmptyDescription(p.item_id.clone()).into());
            }
        }
        Ok(Self { pairs, provenance })
    }

    pub fn pairs(&self) -> &[AcPair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    provenance: AcProvenance,
}

/// JSONL: an optional `{"provenance": {...}}` first line, then one
/// `{"item_id","abstract","concrete"}` object per line.
pub fn encode_ac_database(db: &AcDatabase) -> String {
    let header = Header {
        provenance: db.provenance.clone(),
    };
    let mut out = serde_json::to_string(&header).expect("serializes");
    out.push('\n');
    for p in &db.pairs {
        out.push_str(&serde_json::to_string(p).expect("serializes"));
        out.push('\n');
    }
    out
}

pub fn write_ac_database(db: &AcDatabase, path: impl AsRef<Path>) -> Result<(), PipelineError> {
    let path = path.as_ref();
    std::fs::write(path, encode_ac_database(db)).map_err(|e| PipelineError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn parse_ac_database(reader: impl BufRead, source: &str) -> Result<AcDatabase, PipelineError> {
    let mut provenance = AcProvenance::default();
    let mut pairs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| PipelineError::Io {
            path: source.to_string(),
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |e: serde_json::Error| PipelineError::Parse {
            path: source.to_string(),
            line: i + 1,
            message: e.to_string(),
        };
        let value: serde_json::Value = serde_json::from_str(&line).map_err(parse_err)?;
        if pairs.is_empty() && value.get("provenance").is_some() {
            provenance = serde_json::from_value::<Header>(value).map_err(parse_err)?.provenance;
        } else {
            pairs.push(serde_json::from_value(value).map_err(parse_err)?);
        }
    }
    AcDatabase::new(pairs, provenance)
}

pub fn load_ac_database(path: impl AsRef<Path>) -> Result<AcDatabase, PipelineError> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    let file = File::open(path).map_err(|e| PipelineError::Io {
        path: shown.clone(),
        message: e.to_string(),
    })?;
    parse_ac_database(BufReader::new(file), &shown)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Captioned,
    Embedded,
    Fitted,
    Rephrased,
    Shifted,
}

/// Outcome counters of one stage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PipelineRun {
    pub stage: Stage,
    pub items_total: usize,
    pub items_failed: usize,
    pub failed_ids: Vec<String>,
}

impl PipelineRun {
    fn new(stage: Stage, items_total: usize, failed_ids: Vec<String>) -> Self {
        Self {
            stage,
            items_total,
            items_failed: failed_ids.len(),
            failed_ids,
        }
    }
}

/// Captions the first image of every item. Items whose caption fails are
/// logged and skipped.
pub fn build_ac_database(
    dataset: &Dataset,
    captioner: &dyn Captioner,
    created_unix: u64,
) -> Result<(AcDatabase, PipelineRun), PipelineError> {
    let results = bounded_map(&dataset.items, captioner.concurrency(), |item| {
        captioner.caption(item.caption_image(), &item.class_label)
    });
    let mut pairs = Vec::with_capacity(dataset.len());
    let mut failed = Vec::new();
    for (item, result) in dataset.items.iter().zip(results) {
        match result {
            Ok(caption) => pairs.push(AcPair {
                item_id: item.id.clone(),
                abstract_text: item.abstract_description.clone(),
                concrete_text: caption,
            }),
            Err(e) => {
                log::warn!("caption failed for {}: {e}", item.id);
                failed.push(item.id.clone());
            }
        }
    }
    if pairs.is_empty() {
        return Err(PipelineError::AllItemsFailed { total: dataset.len() });
    }
    let identity = captioner.identity();
    let (endpoint, prompt) = identity.split_once('|').unwrap_or((identity.as_str(), ""));
    let provenance = AcProvenance {
        dataset: dataset.name.clone(),
        captioner: endpoint.to_string(),
        prompt: prompt.to_string(),
        created_unix,
    };
    let run = PipelineRun::new(Stage::Captioned, dataset.len(), failed);
    Ok((AcDatabase::new(pairs, provenance)?, run))
}

/// Embeds `texts` into a matrix with the given row ids.
pub fn embed_matrix(
    ids: Vec<String>,
    texts: &[String],
    embedder: &dyn TextEmbedder,
) -> Result<EmbeddingMatrix, PipelineError> {
    let vectors = embedder.embed(texts)?;
    if vectors.len() != texts.len() {
        return Err(PipelineError::CountMismatch {
            expected: texts.len(),
            found: vectors.len(),
        });
    }
    Ok(EmbeddingMatrix::from_rows(ids, vectors)?)
}

/// Abstract and concrete embeddings of every pair, in pair order.
pub fn embed_pairs(
    db: &AcDatabase,
    embedder: &dyn TextEmbedder,
) -> Result<(EmbeddingMatrix, EmbeddingMatrix), PipelineError> {
    let ids: Vec<String> = db.pairs.iter().map(|p| p.item_id.clone()).collect();
    let abstract_texts: Vec<String> = db.pairs.iter().map(|p| p.abstract_text.clone()).collect();
    let concrete_texts: Vec<String> = db.pairs.iter().map(|p| p.concrete_text.clone()).collect();
    let h_a = embed_matrix(ids.clone(), &abstract_texts, embedder)?;
    let h_c = embed_matrix(ids, &concrete_texts, embedder)?;
    Ok((h_a, h_c))
}

/// Embeds both sides with one encoder and fits the shift. The encoder's
/// identity is stamped into the result.
pub fn prepare(
    db: &AcDatabase,
    embedder: &dyn TextEmbedder,
    options: ShiftOptions,
    created_unix: u64,
) -> Result<ShiftFit, PipelineError> {
    if db.len() < 2 {
        return Err(PipelineError::PairCountTooSmall(db.len()));
    }
    let (h_a, h_c) = embed_pairs(db, embedder)?;
    let provenance = Provenance {
        source: db.provenance.dataset.clone(),
        pair_count: db.len() as u64,
        encoder: embedder.identity(),
        created_unix,
    };
    Ok(fit_shift(&h_c, &h_a, options, provenance)?)
}

/// Rewrites every query; a failed rewrite keeps the original text.
pub fn rewrite_queries(queries: &QuerySet, rewriter: &dyn Rewriter) -> (Vec<String>, PipelineRun) {
    let results = bounded_map(&queries.queries, rewriter.concurrency(), |q| rewriter.rephrase(&q.text));
    let mut failed = Vec::new();
    let texts = queries
        .queries
        .iter()
        .zip(results)
        .map(|(q, r)| match r {
            Ok(t) => t,
            Err(e) => {
                log::warn!("rewrite failed for {}, keeping original text: {e}", q.id);
                failed.push(q.id.clone());
                q.text.clone()
            }
        })
        .collect();
    (texts, PipelineRun::new(Stage::Rephrased, queries.len(), failed))
}

/// Fails when the shift was fitted in a different embedding space. A
/// characterization without an encoder stamp is accepted with a warning.
pub fn check_encoder(ch: &ShiftCharacterization, embedder: &dyn TextEmbedder) -> Result<(), PipelineError> {
    let provider = embedder.identity();
    let fitted = &ch.provenance.encoder;
    if fitted.is_empty() {
        log::warn!("shift carries no encoder identity; cannot check it against `{provider}`");
        return Ok(());
    }
    if *fitted != provider {
        return Err(PipelineError::EncoderMismatch {
            fitted: fitted.clone(),
            provider,
        });
    }
    Ok(())
}

/// Query embeddings, after optional rewriting, shifted towards the concrete
/// side. Rows follow the query order and carry the query ids.
pub fn infer(
    queries: &QuerySet,
    characterization: &ShiftCharacterization,
    embedder: &dyn TextEmbedder,
    rewriter: Option<&dyn Rewriter>,
    mode: StatsMode,
) -> Result<(EmbeddingMatrix, Option<PipelineRun>), PipelineError> {
    check_encoder(characterization, embedder)?;
    if mode == StatsMode::Batch && queries.len() < 2 {
        return Err(ShiftError::SingleQueryInBatchMode.into());
    }
    let (texts, run) = match rewriter {
        Some(r) => {
            let (t, run) = rewrite_queries(queries, r);
            (t, Some(run))
        }
        None => (queries.texts(), None),
    };
    let embedded = embed_matrix(queries.ids(), &texts, embedder)?;
    Ok((apply_shift(&embedded, characterization, mode)?, run))
}
