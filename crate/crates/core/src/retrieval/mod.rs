//! Exact cosine retrieval over an image gallery and the Recall@K / Hit-Rate@K
//! evaluation protocol.

mod report;

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};

use rayon::prelude::*;
use serde::Serialize;

use crate::corpus::QuerySet;
use crate::embedding::{l2_normalize, EmbeddingError, EmbeddingMatrix};

pub use report::{
    emit_report, plot_data_path, EvalConfig, EvalReport, MetricsAtK, QueryDetail, ReportFormat, REPORT_VERSION,
};

pub const DEFAULT_KS: [usize; 3] = [1, 5, 10];

#[derive(Debug, thiserror::Error)]
pub enum RetrievalError {
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error("query has dimension {found}, gallery has {expected}")]
    DimMismatch { expected: usize, found: usize },
    #[error("K must be at least 1")]
    ZeroK,
    #[error("no query vectors for: {}", .0.join(", "))]
    MissingQueryVector(Vec<String>),
    #[error("relevant ids not in gallery: {}", .0.join(", "))]
    UnknownRelevantId(Vec<String>),
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
}

/// L2-normalized image embeddings; immutable once built.
#[derive(Debug, Clone)]
pub struct RetrievalGallery {
    matrix: EmbeddingMatrix,
}

impl RetrievalGallery {
    pub fn ids(&self) -> &[String] {
        self.matrix.ids()
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn len(&self) -> usize {
        self.matrix.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.is_empty()
    }

    /// The normalized rows.
    pub fn matrix(&self) -> &EmbeddingMatrix {
        &self.matrix
    }

    /// Cosine similarity of `query` against every gallery row, in gallery order.
    pub fn scores(&self, query: &[f32]) -> Result<Vec<f64>, RetrievalError> {
        if query.len() != self.dim() {
            return Err(RetrievalError::DimMismatch {
                expected: self.dim(),
                found: query.len(),
            });
        }
        let norm = query.iter().map(|&v| f64::from(v) * f64::from(v)).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(EmbeddingError::ZeroVector("<query>".into()).into());
        }
        let q: Vec<f64> = query.iter().map(|&v| f64::from(v) / norm).collect();
        Ok(self
            .matrix
            .rows()
            .map(|row| row.iter().zip(&q).map(|(&g, &x)| f64::from(g) * x).sum())
            .collect())
    }
}

pub fn build_gallery(images: &EmbeddingMatrix) -> Result<RetrievalGallery, RetrievalError> {
    Ok(RetrievalGallery {
        matrix: l2_normalize(images)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedResult {
    pub query_id: String,
    pub ranked_ids: Vec<String>,
    pub scores: Vec<f64>,
}

/// Descending score, then ascending id.
fn rank_order<'a>(scores: &'a [f64], ids: &'a [String]) -> impl Fn(&usize, &usize) -> Ordering + 'a {
    move |&a, &b| scores[b].total_cmp(&scores[a]).then_with(|| ids[a].cmp(&ids[b]))
}

fn top_indices(scores: &[f64], ids: &[String], k: usize) -> Vec<usize> {
    let cmp = rank_order(scores, ids);
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    let k = k.min(idx.len());
    if k == 0 {
        return Vec::new();
    }
    if k < idx.len() {
        idx.select_nth_unstable_by(k - 1, &cmp);
        idx.truncate(k);
    }
    idx.sort_unstable_by(&cmp);
    idx
}

/// Exact top-`k` by cosine similarity.
pub fn topk(
    query_id: &str,
    query: &[f32],
    gallery: &RetrievalGallery,
    k: usize,
) -> Result<RankedResult, RetrievalError> {
    if k == 0 {
        return Err(RetrievalError::ZeroK);
    }
    let scores = gallery.scores(query)?;
    let top = top_indices(&scores, gallery.ids(), k);
    Ok(RankedResult {
        query_id: query_id.to_string(),
        ranked_ids: top.iter().map(|&i| gallery.ids()[i].clone()).collect(),
        scores: top.iter().map(|&i| scores[i]).collect(),
    })
}

fn hits_in_prefix(ranked: &RankedResult, relevant: &HashSet<&str>, k: usize) -> usize {
    ranked
        .ranked_ids
        .iter()
        .take(k)
        .filter(|id| relevant.contains(id.as_str()))
        .count()
}

/// Fraction of the relevant images found among the first `k` results.
pub fn recall_at_k(ranked: &RankedResult, relevant: &HashSet<&str>, k: usize) -> f64 {
    if relevant.is_empty() {
        return 0.0;
    }
    hits_in_prefix(ranked, relevant, k) as f64 / relevant.len() as f64
}

/// 1 if any relevant image is among the first `k` results.
pub fn hit_rate_at_k(ranked: &RankedResult, relevant: &HashSet<&str>, k: usize) -> u8 {
    u8::from(hits_in_prefix(ranked, relevant, k) > 0)
}

/// Mean that does not depend on input order.
pub(crate) fn order_free_mean(mut values: Vec<f64>) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    values.iter().sum::<f64>() / values.len() as f64
}

/// Runs every query of `queries` against `gallery` and averages R@K and H@K.
///
/// `vectors` must hold a row for every query id; every relevant id must exist
/// in the gallery.
pub fn evaluate(
    vectors: &EmbeddingMatrix,
    queries: &QuerySet,
    gallery: &RetrievalGallery,
    ks: &[usize],
) -> Result<EvalReport, RetrievalError> {
    if ks.is_empty() || ks.contains(&0) {
        return Err(RetrievalError::ZeroK);
    }
    if vectors.dim() != gallery.dim() {
        return Err(RetrievalError::DimMismatch {
            expected: gallery.dim(),
            found: vectors.dim(),
        });
    }
    let vector_index = vectors.index();
    let missing: Vec<String> = queries
        .queries
        .iter()
        .filter(|q| !vector_index.contains_key(q.id.as_str()))
        .map(|q| q.id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(RetrievalError::MissingQueryVector(missing));
    }
    let gallery_index: HashMap<&str, usize> = gallery
        .ids()
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let mut unknown: Vec<String> = queries
        .queries
        .iter()
        .flat_map(|q| &q.relevant_image_ids)
        .filter(|id| !gallery_index.contains_key(id.as_str()))
        .cloned()
        .collect();
    if !unknown.is_empty() {
        unknown.sort();
        unknown.dedup();
        return Err(RetrievalError::UnknownRelevantId(unknown));
    }

    let k_max = *ks.iter().max().expect("non-empty");
    let details = queries
        .queries
        .par_iter()
        .map(|q| {
            let row = vectors.row(vector_index[q.id.as_str()]);
            let scores = gallery.scores(row)?;
            let top = top_indices(&scores, gallery.ids(), k_max);
            let ranked = RankedResult {
                query_id: q.id.clone(),
                ranked_ids: top.iter().map(|&i| gallery.ids()[i].clone()).collect(),
                scores: top.iter().map(|&i| scores[i]).collect(),
            };
            let relevant: HashSet<&str> = q.relevant_image_ids.iter().map(String::as_str).collect();
            let best_rank = best_relevant_rank(&scores, gallery.ids(), &relevant, &gallery_index);
            Ok(QueryDetail {
                query_id: q.id.clone(),
                best_rank,
                relevant_count: relevant.len(),
                recall: ks.iter().map(|&k| recall_at_k(&ranked, &relevant, k)).collect(),
                hit: ks.iter().map(|&k| hit_rate_at_k(&ranked, &relevant, k)).collect(),
            })
        })
        .collect::<Result<Vec<_>, RetrievalError>>()?;

    let metrics = ks
        .iter()
        .enumerate()
        .map(|(slot, &k)| MetricsAtK {
            k,
            recall: order_free_mean(details.iter().map(|d| d.recall[slot]).collect()),
            hit_rate: order_free_mean(details.iter().map(|d| f64::from(d.hit[slot])).collect()),
        })
        .collect();

    Ok(EvalReport {
        format_version: REPORT_VERSION,
        config: EvalConfig {
            ks: ks.to_vec(),
            gallery_size: gallery.len(),
            query_count: queries.len(),
            dim: gallery.dim(),
            labels: Default::default(),
        },
        metrics,
        per_query: details,
    })
}

/// 1-based rank of the best-placed relevant image under the same ordering as
/// `topk`.
fn best_relevant_rank(
    scores: &[f64],
    ids: &[String],
    relevant: &HashSet<&str>,
    gallery_index: &HashMap<&str, usize>,
) -> usize {
    let cmp = rank_order(scores, ids);
    let best = relevant
        .iter()
        .map(|id| gallery_index[id])
        .min_by(|a, b| cmp(a, b))
        .expect("relevant set is non-empty");
    1 + (0..scores.len()).filter(|i| cmp(i, &best) == Ordering::Less).count()
}
