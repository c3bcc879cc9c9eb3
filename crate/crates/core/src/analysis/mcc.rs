use serde::Serialize;

use super::AnalysisError;

/// 2x2 contingency counts of two binary vectors `a` (rows) and `b` (columns).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ContingencyTable {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl ContingencyTable {
    pub fn from_vectors(a: &[bool], b: &[bool]) -> Result<Self, AnalysisError> {
        if a.len() != b.len() {
            return Err(AnalysisError::LengthMismatch {
                left: a.len(),
                right: b.len(),
            });
        }
        let mut t = Self::default();
        for (&x, &y) in a.iter().zip(b) {
            match (x, y) {
                (true, true) => t.tp += 1,
                (false, true) => t.fp += 1,
                (true, false) => t.fn_ += 1,
                (false, false) => t.tn += 1,
            }
        }
        Ok(t)
    }

    /// Counts from bitsets of `n` positions (bits past `n` must be zero).
    pub fn from_bits(a: &[u64], b: &[u64], n: usize) -> Self {
        let ones = |v: &[u64]| v.iter().map(|w| u64::from(w.count_ones())).sum::<u64>();
        let tp: u64 = a.iter().zip(b).map(|(x, y)| u64::from((x & y).count_ones())).sum();
        let (pa, pb) = (ones(a), ones(b));
        let fn_ = pa - tp;
        let fp = pb - tp;
        Self {
            tp,
            fp,
            fn_,
            tn: n as u64 - tp - fp - fn_,
        }
    }

    /// Matthews correlation; 0 when any marginal is empty.
    pub fn phi(&self) -> f64 {
        let Self { tp, fp, fn_, tn } = *self;
        let marginals = [tp + fp, tp + fn_, tn + fp, tn + fn_];
        if marginals.contains(&0) {
            return 0.0;
        }
        let num = i128::from(tp) * i128::from(tn) - i128::from(fp) * i128::from(fn_);
        let den = marginals.iter().map(|&m| m as f64).product::<f64>().sqrt();
        (num as f64 / den).clamp(-1.0, 1.0)
    }
}

pub fn mcc(a: &[bool], b: &[bool]) -> Result<f64, AnalysisError> {
    Ok(ContingencyTable::from_vectors(a, b)?.phi())
}

/// `max_j |mcc(a, c_j)|` and the first `j` attaining it.
pub fn max_abs_mcc(a: &[bool], concrete: &[Vec<bool>]) -> Result<(f64, usize), AnalysisError> {
    let mut best = (f64::NEG_INFINITY, 0);
    for (j, c) in concrete.iter().enumerate() {
        let phi = mcc(a, c)?.abs();
        if phi > best.0 {
            best = (phi, j);
        }
    }
    if concrete.is_empty() {
        return Err(AnalysisError::NoConcreteColumns);
    }
    Ok(best)
}

pub const HISTOGRAM_BINS: usize = 20;

/// Counts of values in `[i/20, (i+1)/20)`; the last bin also takes 1.0.
pub fn phi_histogram(values: &[f64]) -> [usize; HISTOGRAM_BINS] {
    let mut bins = [0; HISTOGRAM_BINS];
    for &v in values {
        let b = ((v.clamp(0.0, 1.0) * HISTOGRAM_BINS as f64).floor() as usize).min(HISTOGRAM_BINS - 1);
        bins[b] += 1;
    }
    bins
}

pub fn histogram_edges(bin: usize) -> (f64, f64) {
    (
        bin as f64 / HISTOGRAM_BINS as f64,
        (bin + 1) as f64 / HISTOGRAM_BINS as f64,
    )
}
