use std::collections::HashMap;
use std::path::Path;

use super::{AnalysisError, Category};

pub const DEFAULT_THRESHOLD: f64 = 3.0;

/// Word concreteness ratings in [1, 5] plus domain overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcretenessLexicon {
    ratings: HashMap<String, f64>,
    overrides: HashMap<String, Category>,
    threshold: f64,
}

impl ConcretenessLexicon {
    pub fn new(
        ratings: HashMap<String, f64>,
        overrides: HashMap<String, Category>,
        threshold: f64,
    ) -> Result<Self, AnalysisError> {
        if !(threshold > 1.0 && threshold < 5.0) {
            return Err(AnalysisError::InvalidThreshold(threshold));
        }
        if let Some((word, &rating)) = ratings.iter().find(|(_, r)| !(1.0..=5.0).contains(*r)) {
            return Err(AnalysisError::InvalidRating {
                word: word.clone(),
                rating,
            });
        }
        if let Some((word, _)) = overrides.iter().find(|(_, c)| **c == Category::Unknown) {
            return Err(AnalysisError::Parse {
                path: "<overrides>".into(),
                line: 0,
                message: format!("override for `{word}` must be abstract or concrete"),
            });
        }
        Ok(Self {
            ratings: ratings.into_iter().map(|(w, r)| (w.to_lowercase(), r)).collect(),
            overrides: overrides.into_iter().map(|(w, c)| (w.to_lowercase(), c)).collect(),
            threshold,
        })
    }

    pub fn rating(&self, word: &str) -> Option<f64> {
        self.ratings.get(word).copied()
    }

    pub fn override_for(&self, word: &str) -> Option<Category> {
        self.overrides.get(word).copied()
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn contains(&self, word: &str) -> bool {
        self.ratings.contains_key(word) || self.overrides.contains_key(word)
    }

    pub fn override_words(&self) -> impl Iterator<Item = &str> {
        self.overrides.keys().map(String::as_str)
    }

    pub fn rated_words(&self) -> impl Iterator<Item = &str> {
        self.ratings.keys().map(String::as_str)
    }
}

/// Override first, then the rating threshold; words in neither table are
/// `Unknown`.
pub fn classify_adjective(word: &str, lexicon: &ConcretenessLexicon) -> Category {
    if let Some(c) = lexicon.override_for(word) {
        return c;
    }
    match lexicon.rating(word) {
        Some(r) if r < lexicon.threshold => Category::Abstract,
        Some(_) => Category::Concrete,
        None => Category::Unknown,
    }
}

fn tsv_rows(path: &Path, columns: [&str; 2]) -> Result<Vec<(usize, String, String)>, AnalysisError> {
    let shown = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .flexible(true)
        .from_path(path)
        .map_err(|e| AnalysisError::Io {
            path: shown.clone(),
            message: e.to_string(),
        })?;
    let headers = reader.headers().map_err(|e| AnalysisError::Parse {
        path: shown.clone(),
        line: 1,
        message: e.to_string(),
    })?;
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim().eq_ignore_ascii_case(name))
            .ok_or_else(|| AnalysisError::Parse {
                path: shown.clone(),
                line: 1,
                message: format!("missing `{name}` column"),
            })
    };
    let (a, b) = (find(columns[0])?, find(columns[1])?);
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| AnalysisError::Parse {
            path: shown.clone(),
            line,
            message: e.to_string(),
        })?;
        let (Some(x), Some(y)) = (record.get(a), record.get(b)) else {
            return Err(AnalysisError::Parse {
                path: shown.clone(),
                line,
                message: "short row".into(),
            });
        };
        out.push((line, x.trim().to_lowercase(), y.trim().to_string()));
    }
    Ok(out)
}

/// TSV with a header containing `word` and `rating` columns.
pub fn load_ratings(path: impl AsRef<Path>) -> Result<HashMap<String, f64>, AnalysisError> {
    let path = path.as_ref();
    tsv_rows(path, ["word", "rating"])?
        .into_iter()
        .map(|(line, word, rating)| {
            let value = rating.parse::<f64>().map_err(|_| AnalysisError::Parse {
                path: path.display().to_string(),
                line,
                message: format!("bad rating `{rating}`"),
            })?;
            Ok((word, value))
        })
        .collect()
}

/// TSV with a header containing `word` and `category` columns.
pub fn load_overrides(path: impl AsRef<Path>) -> Result<HashMap<String, Category>, AnalysisError> {
    let path = path.as_ref();
    tsv_rows(path, ["word", "category"])?
        .into_iter()
        .map(|(line, word, category)| {
            let value = match category.parse::<Category>() {
                Ok(c @ (Category::Abstract | Category::Concrete)) => c,
                _ => {
                    return Err(AnalysisError::Parse {
                        path: path.display().to_string(),
                        line,
                        message: format!("bad category `{category}`"),
                    })
                }
            };
            Ok((word, value))
        })
        .collect()
}

pub fn load_lexicon(
    ratings: impl AsRef<Path>,
    overrides: Option<&Path>,
    threshold: f64,
) -> Result<ConcretenessLexicon, AnalysisError> {
    let ratings = load_ratings(ratings)?;
    let overrides = match overrides {
        Some(p) => load_overrides(p)?,
        None => HashMap::new(),
    };
    ConcretenessLexicon::new(ratings, overrides, threshold)
}
