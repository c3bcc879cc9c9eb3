//! ACTS characterization layout (little-endian):
//!
//! ```text
//! magic        "ACTS"
//! version      u32 = 1
//! dim          u32
//! k            u32
//! epsilon      f64
//! pair_count   u64
//! created_unix u64
//! source       u32 length + UTF-8
//! encoder      u32 length + UTF-8
//! W            dim rows of k f64 (row-major)
//! mu_delta, sigma_delta, fallback_query_mean, fallback_query_std   dim f64 each
//! explained_variance_ratio                                          k f64
//! ```
//!
//! Float blocks use the same row-major little-endian encoding as ACTE rows,
//! widened to f64.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use super::{Provenance, ShiftCharacterization, ShiftError};
use crate::embedding::{ByteReader, ByteWriter, EmbeddingError};

pub const ACTS_MAGIC: [u8; 4] = *b"ACTS";
pub const ACTS_VERSION: u32 = 1;

pub fn encode_characterization(ch: &ShiftCharacterization) -> Vec<u8> {
    let mut w = ByteWriter::default();
    w.bytes(&ACTS_MAGIC);
    w.u32(ACTS_VERSION);
    w.u32(u32::try_from(ch.dim()).expect("dim fits u32"));
    w.u32(u32::try_from(ch.k()).expect("k fits u32"));
    w.f64s(&[ch.epsilon]);
    w.u64(ch.provenance.pair_count);
    w.u64(ch.provenance.created_unix);
    w.str(&ch.provenance.source);
    w.str(&ch.provenance.encoder);
    for row in ch.components.row_iter() {
        w.f64s(&row.iter().copied().collect::<Vec<_>>());
    }
    w.f64s(&ch.mu_delta);
    w.f64s(&ch.sigma_delta);
    w.f64s(&ch.fallback_query_mean);
    w.f64s(&ch.fallback_query_std);
    w.f64s(&ch.explained_variance_ratio);
    w.buf
}

/// Decodes and validates; a structurally sound file with a broken invariant
/// yields `InvariantViolation`.
pub fn decode_characterization(bytes: &[u8]) -> Result<ShiftCharacterization, ShiftError> {
    let mut r = ByteReader::new(bytes);
    r.magic(ACTS_MAGIC)?;
    let version = r.u32()?;
    if version != ACTS_VERSION {
        return Err(EmbeddingError::VersionUnsupported(version).into());
    }
    let dim = r.u32()? as usize;
    let k = r.u32()? as usize;
    let epsilon = r.f64s(1)?[0];
    let pair_count = r.u64()?;
    let created_unix = r.u64()?;
    let source = r.str()?;
    let encoder = r.str()?;
    let w = r.f64s(
        dim.checked_mul(k)
            .ok_or_else(|| ShiftError::InvariantViolation(format!("dim {dim} x k {k} overflows")))?,
    )?;
    let mu_delta = r.f64s(dim)?;
    let sigma_delta = r.f64s(dim)?;
    let fallback_query_mean = r.f64s(dim)?;
    let fallback_query_std = r.f64s(dim)?;
    let explained_variance_ratio = r.f64s(k)?;
    r.finish()?;
    let ch = ShiftCharacterization {
        components: DMatrix::from_row_slice(dim, k, &w),
        mu_delta,
        sigma_delta,
        fallback_query_mean,
        fallback_query_std,
        explained_variance_ratio,
        epsilon,
        provenance: Provenance {
            source,
            pair_count,
            encoder,
            created_unix,
        },
    };
    ch.validate()?;
    Ok(ch)
}

pub fn save_characterization(ch: &ShiftCharacterization, path: impl AsRef<Path>) -> Result<(), ShiftError> {
    let path = path.as_ref();
    fs::write(path, encode_characterization(ch)).map_err(|source| {
        ShiftError::Format(EmbeddingError::Io {
            path: path.display().to_string(),
            source,
        })
    })
}

pub fn load_characterization(path: impl AsRef<Path>) -> Result<ShiftCharacterization, ShiftError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| {
        ShiftError::Format(EmbeddingError::Io {
            path: path.display().to_string(),
            source,
        })
    })?;
    decode_characterization(&bytes)
}
