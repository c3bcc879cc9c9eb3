use nalgebra::DMatrix;

use super::ShiftError;

/// Principal directions of an already-centred matrix.
#[derive(Debug, Clone)]
pub struct PcaFit {
    /// `dim x k`, orthonormal columns, decreasing singular value.
    pub components: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
    pub requested_k: usize,
    /// Numerical rank of the input.
    pub rank: usize,
}

impl PcaFit {
    pub fn k(&self) -> usize {
        self.components.ncols()
    }

    pub fn was_clamped(&self) -> bool {
        self.k() < self.requested_k
    }

    pub fn rank_deficient(&self) -> bool {
        self.rank < self.k()
    }
}

/// Largest usable component count for `rows` samples in `dim` dimensions.
pub fn max_components(rows: usize, dim: usize) -> usize {
    rows.saturating_sub(1).min(dim)
}

/// Top-`k` right singular vectors of `data` (rows are samples).
///
/// No centring happens here. `k` is clamped to `min(rows - 1, dim)`; a clamp or
/// a rank below the returned `k` is logged as a warning, not an error. Each
/// column is sign-flipped so that its largest-magnitude entry is positive
/// (earliest index on ties).
pub fn fit_pca(data: &DMatrix<f64>, k: usize) -> Result<PcaFit, ShiftError> {
    let (rows, dim) = data.shape();
    if rows < 2 {
        return Err(ShiftError::TooFewRows(rows));
    }
    if k == 0 {
        return Err(ShiftError::InvalidK(k));
    }
    let limit = max_components(rows, dim);
    let k_eff = k.min(limit);
    if k_eff < k {
        log::warn!("k clamped to {k_eff} (requested {k}, {rows} rows, dim {dim})");
    }

    let (singular, v_t) = right_singular_vectors(data);
    let mut order: Vec<usize> = (0..singular.len()).collect();
    order.sort_by(|&a, &b| singular[b].total_cmp(&singular[a]).then(a.cmp(&b)));

    let mut components = DMatrix::<f64>::zeros(dim, k_eff);
    let mut values = Vec::with_capacity(k_eff);
    for (col, &src) in order.iter().take(k_eff).enumerate() {
        let mut v: Vec<f64> = v_t.row(src).iter().copied().collect();
        let mut pivot = 0;
        for (i, x) in v.iter().enumerate() {
            if x.abs() > v[pivot].abs() {
                pivot = i;
            }
        }
        if v[pivot] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        for (i, x) in v.into_iter().enumerate() {
            components[(i, col)] = x;
        }
        values.push(singular[src]);
    }

    let total: f64 = data.iter().map(|x| x * x).sum();
    let explained_variance_ratio = values
        .iter()
        .map(|s| if total > 0.0 { s * s / total } else { 0.0 })
        .collect();

    let s_max = singular.iter().copied().fold(0.0, f64::max);
    let tol = rows.max(dim) as f64 * s_max * f64::EPSILON;
    let rank = singular.iter().filter(|&&s| s > tol).count();
    if rank < k_eff {
        log::warn!("effective rank {rank} is below k = {k_eff}; trailing components are arbitrary");
    }

    Ok(PcaFit {
        components,
        singular_values: values,
        explained_variance_ratio,
        requested_k: k,
        rank,
    })
}

/// Singular values and `V^T` rows. Tall inputs are reduced to their `R` factor
/// first, which has the same right singular vectors and is much cheaper.
fn right_singular_vectors(data: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let (rows, dim) = data.shape();
    let reduced;
    let target = if rows > dim {
        reduced = data.clone().qr().r();
        &reduced
    } else {
        data
    };
    let svd = target.clone().svd(false, true);
    let v_t = svd.v_t.expect("v_t requested");
    (svd.singular_values.iter().copied().collect(), v_t)
}
