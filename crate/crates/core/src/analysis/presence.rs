use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::Serialize;

use super::{AnalysisError, AttributeKey, AttributeOccurrence, Category};

/// Binary attribute presence per description; every row has a set bit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PresenceMatrix {
    row_ids: Vec<String>,
    columns: Vec<AttributeKey>,
    words: usize,
    bits: Vec<u64>,
}

impl PresenceMatrix {
    /// `sets[r]` lists the column indices present in row `r`.
    pub fn from_sets(
        row_ids: Vec<String>,
        columns: Vec<AttributeKey>,
        sets: &[Vec<usize>],
    ) -> Result<Self, AnalysisError> {
        if row_ids.len() != sets.len() {
            return Err(AnalysisError::LengthMismatch {
                left: row_ids.len(),
                right: sets.len(),
            });
        }
        let words = columns.len().div_ceil(64).max(1);
        let mut bits = vec![0u64; words * sets.len()];
        for (r, set) in sets.iter().enumerate() {
            if set.is_empty() {
                return Err(AnalysisError::EmptyPresenceRow(row_ids[r].clone()));
            }
            for &c in set {
                if c >= columns.len() {
                    return Err(AnalysisError::LengthMismatch {
                        left: c,
                        right: columns.len(),
                    });
                }
                bits[r * words + c / 64] |= 1 << (c % 64);
            }
        }
        Ok(Self {
            row_ids,
            columns,
            words,
            bits,
        })
    }

    /// Rows are descriptions that contain at least one of `columns`; the rest
    /// are dropped.
    pub fn build(descriptions: &[(String, Vec<AttributeOccurrence>)], columns: Vec<AttributeKey>) -> Self {
        let index: HashMap<&AttributeKey, usize> = columns.iter().enumerate().map(|(i, k)| (k, i)).collect();
        let mut ids = Vec::new();
        let mut sets = Vec::new();
        for (id, occ) in descriptions {
            let mut set: Vec<usize> = occ.iter().filter_map(|o| index.get(&o.key).copied()).collect();
            set.sort_unstable();
            set.dedup();
            if !set.is_empty() {
                ids.push(id.clone());
                sets.push(set);
            }
        }
        drop(index);
        Self::from_sets(ids, columns, &sets).expect("rows are non-empty and in range")
    }

    pub fn rows(&self) -> usize {
        self.row_ids.len()
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    pub fn columns(&self) -> &[AttributeKey] {
        &self.columns
    }

    pub fn is_empty(&self) -> bool {
        self.row_ids.is_empty()
    }

    pub fn row_bits(&self, r: usize) -> &[u64] {
        &self.bits[r * self.words..(r + 1) * self.words]
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        self.row_bits(r)[c / 64] >> (c % 64) & 1 == 1
    }

    /// Column indices set in row `r`.
    pub fn row_set(&self, r: usize) -> Vec<usize> {
        (0..self.columns.len()).filter(|&c| self.get(r, c)).collect()
    }

    /// Column `c` as a bitset over rows.
    pub fn column_bits(&self, c: usize) -> Vec<u64> {
        let mut out = vec![0u64; self.rows().div_ceil(64)];
        for r in 0..self.rows() {
            if self.get(r, c) {
                out[r / 64] |= 1 << (r % 64);
            }
        }
        out
    }

    pub fn column(&self, c: usize) -> Vec<bool> {
        (0..self.rows()).map(|r| self.get(r, c)).collect()
    }

    fn is_superset(&self, r: usize, q: usize) -> bool {
        self.row_bits(r).iter().zip(self.row_bits(q)).all(|(x, y)| x & y == *y)
    }
}

/// `N_q`: rows whose attribute set contains row `q`'s set, for every `q`.
pub fn superset_counts(p: &PresenceMatrix) -> Vec<usize> {
    let cols = p.columns().len();
    let mut postings: Vec<Vec<usize>> = vec![Vec::new(); cols];
    for r in 0..p.rows() {
        for c in p.row_set(r) {
            postings[c].push(r);
        }
    }
    // identical rows share one computation
    let mut first_of: HashMap<&[u64], usize> = HashMap::new();
    let canonical: Vec<usize> = (0..p.rows())
        .map(|r| *first_of.entry(p.row_bits(r)).or_insert(r))
        .collect();
    let unique: Vec<usize> = (0..p.rows()).filter(|&r| canonical[r] == r).collect();
    let counts: HashMap<usize, usize> = unique
        .par_iter()
        .map(|&q| {
            let rarest = p
                .row_set(q)
                .into_iter()
                .min_by_key(|&c| (postings[c].len(), c))
                .expect("rows are non-empty");
            let n = postings[rarest].iter().filter(|&&r| p.is_superset(r, q)).count();
            (q, n)
        })
        .collect();
    canonical.iter().map(|c| counts[c]).collect()
}

/// `p_q = 1 / N_q` per row.
pub fn oracle_precision(p: &PresenceMatrix) -> Vec<f64> {
    superset_counts(p).into_iter().map(|n| 1.0 / n as f64).collect()
}

pub const MIXED_LOW: f64 = 0.33;
pub const MIXED_HIGH: f64 = 0.66;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MixtureLabel {
    Abstract,
    Concrete,
    Mixed,
}

impl std::fmt::Display for MixtureLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Abstract => "abstract",
            Self::Concrete => "concrete",
            Self::Mixed => "mixed",
        })
    }
}

/// `ratio` is abstract / (abstract + concrete); the mixed band is closed.
pub fn mixture_label(ratio: f64) -> MixtureLabel {
    if (MIXED_LOW..=MIXED_HIGH).contains(&ratio) {
        MixtureLabel::Mixed
    } else if ratio > MIXED_HIGH {
        MixtureLabel::Abstract
    } else {
        MixtureLabel::Concrete
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupCell {
    pub attr_count: usize,
    pub label: MixtureLabel,
    pub rows: usize,
    pub mean_precision: f64,
}

/// Mean `p_q` by attribute count and abstract/concrete mixture. Rows with more
/// than `max_attrs` attributes are left out.
pub fn group_precision(
    p: &PresenceMatrix,
    categories: &[Category],
    max_attrs: usize,
) -> Result<Vec<GroupCell>, AnalysisError> {
    if categories.len() != p.columns().len() {
        return Err(AnalysisError::LengthMismatch {
            left: categories.len(),
            right: p.columns().len(),
        });
    }
    if let Some(c) = categories.iter().position(|c| *c == Category::Unknown) {
        return Err(AnalysisError::UnknownCategory(p.columns()[c].to_string()));
    }
    let precision = oracle_precision(p);
    let mut cells: BTreeMap<(usize, MixtureLabel), Vec<f64>> = BTreeMap::new();
    for (r, &pq) in precision.iter().enumerate() {
        let set = p.row_set(r);
        if set.len() > max_attrs {
            continue;
        }
        let abstract_n = set.iter().filter(|&&c| categories[c] == Category::Abstract).count();
        let ratio = abstract_n as f64 / set.len() as f64;
        cells.entry((set.len(), mixture_label(ratio))).or_default().push(pq);
    }
    Ok(cells
        .into_iter()
        .map(|((attr_count, label), mut values)| {
            values.sort_by(f64::total_cmp);
            GroupCell {
                attr_count,
                label,
                rows: values.len(),
                mean_precision: values.iter().sum::<f64>() / values.len() as f64,
            }
        })
        .collect())
}

/// Most frequent `per_category` abstract and concrete attributes; count ties
/// go to the lexicographically smaller attribute.
pub fn select_top_attributes(
    occurrences: &[AttributeOccurrence],
    per_category: usize,
) -> (Vec<AttributeKey>, Vec<AttributeKey>) {
    let mut counts: BTreeMap<(Category, &AttributeKey), usize> = BTreeMap::new();
    for o in occurrences {
        *counts.entry((o.category, &o.key)).or_default() += 1;
    }
    let top = |cat: Category| {
        let mut ranked: Vec<(&AttributeKey, usize)> = counts
            .iter()
            .filter(|((c, _), _)| *c == cat)
            .map(|((_, k), &n)| (*k, n))
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        ranked
            .into_iter()
            .take(per_category)
            .map(|(k, _)| k.clone())
            .collect::<Vec<_>>()
    };
    (top(Category::Abstract), top(Category::Concrete))
}
