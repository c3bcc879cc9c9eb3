//! Abstract-to-concrete shift: characterization and application.
//!
//! Preparation takes row-aligned concrete (`H_C`) and abstract (`H_A`) text
//! embeddings of the same items and produces:
//!
//! * the per-dimension mean `mu` and population std `sigma` of `H_C - H_A`,
//! * an orthonormal basis `W` (`dim x k`) of the top principal directions of
//!   the standardized difference.
//!
//! At inference each query `h` is standardized with query statistics into
//! `n`, projected with `W W^T`, rescaled elementwise by `sigma`, offset by `mu`
//! and added back:
//!
//! ```text
//! h_hat = h + (n W W^T) * sigma + mu
//! ```

mod format;
mod pca;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::embedding::{EmbeddingError, EmbeddingMatrix};

pub use format::{
    decode_characterization, encode_characterization, load_characterization, save_characterization, ACTS_MAGIC,
    ACTS_VERSION,
};
pub use pca::{fit_pca, max_components, PcaFit};

pub const DEFAULT_K: usize = 600;
pub const DEFAULT_EPSILON: f64 = 1e-8;

const ORTHONORMAL_TOL: f64 = 1e-5;

#[derive(Debug, thiserror::Error)]
pub enum ShiftError {
    #[error("abstract and concrete matrices are not row-aligned: {0}")]
    Misaligned(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("need at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("k must be at least 1, got {0}")]
    InvalidK(usize),
    #[error("epsilon must be positive and finite, got {0}")]
    InvalidEpsilon(f64),
    #[error("batch statistics need at least 2 queries; use fallback mode for single queries")]
    SingleQueryInBatchMode,
    #[error("characterization invariant violated: {0}")]
    InvariantViolation(String),
    #[error(transparent)]
    Format(#[from] EmbeddingError),
}

/// Where query standardization statistics come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StatsMode {
    /// Column mean and std of the query batch being shifted.
    #[default]
    Batch,
    /// Column mean and std of the abstract embeddings seen at fit time.
    Fallback,
}

impl std::str::FromStr for StatsMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "batch" => Ok(Self::Batch),
            "fallback" => Ok(Self::Fallback),
            other => Err(format!("unknown stats mode `{other}` (batch|fallback)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, serde::Serialize)]
pub struct Provenance {
    pub source: String,
    pub pair_count: u64,
    pub encoder: String,
    /// Seconds since the Unix epoch; 0 when the caller did not stamp one.
    pub created_unix: u64,
}

/// Everything the inference phase needs; the paired database is not kept.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftCharacterization {
    pub components: DMatrix<f64>,
    pub mu_delta: Vec<f64>,
    pub sigma_delta: Vec<f64>,
    pub fallback_query_mean: Vec<f64>,
    pub fallback_query_std: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
    pub epsilon: f64,
    pub provenance: Provenance,
}

impl ShiftCharacterization {
    pub fn dim(&self) -> usize {
        self.components.nrows()
    }

    pub fn k(&self) -> usize {
        self.components.ncols()
    }

    /// Checks shapes, finiteness, the variance floor and `W^T W = I`.
    pub fn validate(&self) -> Result<(), ShiftError> {
        let violation = |m: String| Err(ShiftError::InvariantViolation(m));
        let (dim, k) = (self.dim(), self.k());
        if k == 0 || k > dim {
            return violation(format!("k = {k} outside 1..={dim}"));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return violation(format!("epsilon {} not positive", self.epsilon));
        }
        for (name, v) in [
            ("mu_delta", &self.mu_delta),
            ("sigma_delta", &self.sigma_delta),
            ("fallback_query_mean", &self.fallback_query_mean),
            ("fallback_query_std", &self.fallback_query_std),
        ] {
            if v.len() != dim {
                return violation(format!("{name} has length {}, expected {dim}", v.len()));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return violation(format!("{name} has non-finite entries"));
            }
        }
        if self.explained_variance_ratio.len() != k {
            return violation(format!(
                "{} explained-variance ratios for k = {k}",
                self.explained_variance_ratio.len()
            ));
        }
        if let Some(s) = self.sigma_delta.iter().find(|&&s| s < self.epsilon) {
            return violation(format!("sigma_delta entry {s} below epsilon {}", self.epsilon));
        }
        if self.components.iter().any(|x| !x.is_finite()) {
            return violation("W has non-finite entries".into());
        }
        let err = orthonormality_error(&self.components);
        if err >= ORTHONORMAL_TOL {
            return violation(format!("max |W^T W - I| = {err:e}"));
        }
        Ok(())
    }
}

/// `max |W^T W - I|`.
pub fn orthonormality_error(w: &DMatrix<f64>) -> f64 {
    let gram = w.transpose() * w;
    (gram - DMatrix::identity(w.ncols(), w.ncols())).amax()
}

/// Row-wise `H_C - H_A`. Both sides must list the same ids in the same order.
pub fn compute_delta(concrete: &EmbeddingMatrix, abstract_side: &EmbeddingMatrix) -> Result<DMatrix<f64>, ShiftError> {
    if concrete.dim() != abstract_side.dim() {
        return Err(ShiftError::DimMismatch {
            expected: concrete.dim(),
            found: abstract_side.dim(),
        });
    }
    if concrete.ids() != abstract_side.ids() {
        let at = concrete
            .ids()
            .iter()
            .zip(abstract_side.ids())
            .position(|(a, b)| a != b)
            .unwrap_or(concrete.len().min(abstract_side.len()));
        return Err(ShiftError::Misaligned(format!("ids diverge at row {at}")));
    }
    let (rows, dim) = (concrete.len(), concrete.dim());
    Ok(DMatrix::from_fn(rows, dim, |i, j| {
        f64::from(concrete.row(i)[j]) - f64::from(abstract_side.row(i)[j])
    }))
}

/// Column mean and population std, std floored at `epsilon`.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Column means and population standard deviations (two-pass, unfloored).
pub fn column_stats(data: &DMatrix<f64>) -> ColumnStats {
    let rows = data.nrows() as f64;
    let mut mean = Vec::with_capacity(data.ncols());
    let mut std = Vec::with_capacity(data.ncols());
    for col in data.column_iter() {
        let m = col.iter().sum::<f64>() / rows;
        let var = col.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / rows;
        mean.push(m);
        std.push(var.sqrt());
    }
    ColumnStats { mean, std }
}

#[derive(Debug, Clone)]
pub struct Standardized {
    pub data: DMatrix<f64>,
    pub mean: Vec<f64>,
    /// Floored at epsilon.
    pub std: Vec<f64>,
}

/// Zero-mean, unit-variance columns. Constant columns have their std floored
/// at `epsilon` and standardize to zero.
pub fn standardize(delta: &DMatrix<f64>, epsilon: f64) -> Result<Standardized, ShiftError> {
    if delta.nrows() < 2 {
        return Err(ShiftError::TooFewRows(delta.nrows()));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(ShiftError::InvalidEpsilon(epsilon));
    }
    let ColumnStats { mean, std } = column_stats(delta);
    let std: Vec<f64> = std.into_iter().map(|s| s.max(epsilon)).collect();
    let data = DMatrix::from_fn(delta.nrows(), delta.ncols(), |i, j| (delta[(i, j)] - mean[j]) / std[j]);
    Ok(Standardized { data, mean, std })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftOptions {
    pub k: usize,
    pub epsilon: f64,
}

impl Default for ShiftOptions {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ShiftFit {
    pub characterization: ShiftCharacterization,
    pub pca: PcaFit,
}

/// Composes delta, standardization and PCA; also records the abstract-side
/// column statistics for single-query standardization.
pub fn fit_shift(
    concrete: &EmbeddingMatrix,
    abstract_side: &EmbeddingMatrix,
    options: ShiftOptions,
    provenance: Provenance,
) -> Result<ShiftFit, ShiftError> {
    let delta = compute_delta(concrete, abstract_side)?;
    let standardized = standardize(&delta, options.epsilon)?;
    let pca = fit_pca(&standardized.data, options.k)?;
    let abstract_stats = column_stats(&DMatrix::from_row_slice(
        abstract_side.len(),
        abstract_side.dim(),
        &abstract_side.to_f64(),
    ));
    let characterization = ShiftCharacterization {
        components: pca.components.clone(),
        mu_delta: standardized.mean,
        sigma_delta: standardized.std,
        fallback_query_mean: abstract_stats.mean,
        fallback_query_std: abstract_stats.std,
        explained_variance_ratio: pca.explained_variance_ratio.clone(),
        epsilon: options.epsilon,
        provenance: Provenance {
            pair_count: concrete.len() as u64,
            ..provenance
        },
    };
    characterization.validate()?;
    Ok(ShiftFit { characterization, pca })
}

/// Shifts every query row towards the concrete side.
///
/// Rows are independent given the standardization statistics, so the output
/// does not depend on thread scheduling.
pub fn apply_shift(
    queries: &EmbeddingMatrix,
    characterization: &ShiftCharacterization,
    mode: StatsMode,
) -> Result<EmbeddingMatrix, ShiftError> {
    let ch = characterization;
    let dim = ch.dim();
    if queries.dim() != dim {
        return Err(ShiftError::DimMismatch {
            expected: dim,
            found: queries.dim(),
        });
    }
    let (mean, std) = match mode {
        StatsMode::Batch => {
            if queries.len() < 2 {
                return Err(ShiftError::SingleQueryInBatchMode);
            }
            let stats = column_stats(&DMatrix::from_row_slice(queries.len(), dim, &queries.to_f64()));
            (stats.mean, stats.std)
        }
        StatsMode::Fallback => (ch.fallback_query_mean.clone(), ch.fallback_query_std.clone()),
    };
    let scale: Vec<f64> = std.iter().map(|s| s.max(ch.epsilon)).collect();
    let k = ch.k();
    let w = &ch.components;

    let mut out = vec![0f32; queries.len() * dim];
    out.par_chunks_mut(dim)
        .zip(queries.data().par_chunks(dim))
        .for_each(|(dst, h)| {
            let n: Vec<f64> = (0..dim).map(|j| (f64::from(h[j]) - mean[j]) / scale[j]).collect();
            let mut coords = vec![0f64; k];
            for (c, coord) in coords.iter_mut().enumerate() {
                *coord = (0..dim).map(|j| n[j] * w[(j, c)]).sum();
            }
            for j in 0..dim {
                let p: f64 = (0..k).map(|c| coords[c] * w[(j, c)]).sum();
                let shift = p * ch.sigma_delta[j] + ch.mu_delta[j];
                dst[j] = (f64::from(h[j]) + shift) as f32;
            }
        });
    Ok(EmbeddingMatrix::new(dim, queries.ids().to_vec(), out)?)
}
