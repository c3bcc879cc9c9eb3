//! Adjective and attribute statistics over description corpora: extraction,
//! concreteness classification, frequency tables, MCC correlation and the
//! oracle retrieval-precision study.

mod lexicon;
mod mcc;
mod presence;
mod tagged;
mod text;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Dataset;

pub use lexicon::{
    classify_adjective, load_lexicon, load_overrides, load_ratings, ConcretenessLexicon, DEFAULT_THRESHOLD,
};
pub use mcc::{histogram_edges, max_abs_mcc, mcc, phi_histogram, ContingencyTable, HISTOGRAM_BINS};
pub use presence::{
    group_precision, mixture_label, oracle_precision, select_top_attributes, superset_counts, GroupCell, MixtureLabel,
    PresenceMatrix, MIXED_HIGH, MIXED_LOW,
};
pub use tagged::{
    extract_adjectives, extract_attributes, load_tagged, parse_tagged, validate_tokens, LabelMapping, Pos, Relation,
    TaggedDescription, TaggedToken,
};
pub use text::{heuristic_tag, lemmatize, tokenize_hyphen_aware, HEAD_WINDOW};

pub const DEFAULT_TOP_PER_CATEGORY: usize = 200;
pub const DEFAULT_MAX_ATTRS: usize = 5;

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("description {id}: token {token} has head {head}, list has {len} tokens")]
    BadHeadIndex {
        id: String,
        token: usize,
        head: usize,
        len: usize,
    },
    #[error("rating {rating} for `{word}` is outside [1, 5]")]
    InvalidRating { word: String, rating: f64 },
    #[error("threshold {0} must lie strictly between 1 and 5")]
    InvalidThreshold(f64),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("adjective list is empty")]
    EmptyAdjectiveList,
    #[error("no tagged tokens for description {0}")]
    MissingTagged(String),
    #[error("attribute {0} has no abstract/concrete category")]
    UnknownCategory(String),
    #[error("presence row {0} has no attributes")]
    EmptyPresenceRow(String),
    #[error("no concrete attributes to correlate against")]
    NoConcreteColumns,
    #[error("no description contains any tracked attribute")]
    EmptyPresence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Abstract,
    Concrete,
    Unknown,
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Abstract => "abstract",
            Self::Concrete => "concrete",
            Self::Unknown => "unknown",
        })
    }
}

impl std::str::FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "abstract" => Ok(Self::Abstract),
            "concrete" => Ok(Self::Concrete),
            "unknown" => Ok(Self::Unknown),
            other => Err(format!("unknown category `{other}`")),
        }
    }
}

/// An adjective with its attached noun, if any. `(adj, None)` is its own
/// identity, distinct from every `(adj, Some(noun))`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AttributeKey {
    pub adjective: String,
    pub noun: Option<String>,
}

impl AttributeKey {
    pub fn new(adjective: String, noun: Option<String>) -> Self {
        Self { adjective, noun }
    }
}

impl fmt::Display for AttributeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.noun {
            Some(n) => write!(f, "{} {}", self.adjective, n),
            None => f.write_str(&self.adjective),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeOccurrence {
    pub key: AttributeKey,
    pub category: Category,
}

/// Source of tagged tokens for a description.
pub trait Tagger: Sync {
    fn tag(&self, id: &str, text: &str) -> Result<Vec<TaggedToken>, AnalysisError>;
}

/// Tokenizes and runs [`heuristic_tag`].
pub struct HeuristicTagger<'a> {
    lexicon: &'a ConcretenessLexicon,
    adjectives: HashSet<String>,
}

impl<'a> HeuristicTagger<'a> {
    pub fn new(lexicon: &'a ConcretenessLexicon, adjectives: HashSet<String>) -> Result<Self, AnalysisError> {
        if adjectives.is_empty() {
            return Err(AnalysisError::EmptyAdjectiveList);
        }
        Ok(Self { lexicon, adjectives })
    }
}

impl Tagger for HeuristicTagger<'_> {
    fn tag(&self, _id: &str, text: &str) -> Result<Vec<TaggedToken>, AnalysisError> {
        Ok(heuristic_tag(
            &tokenize_hyphen_aware(text),
            self.lexicon,
            &self.adjectives,
        ))
    }
}

/// Looks descriptions up in externally produced tags.
pub struct PreTagged {
    by_id: HashMap<String, Vec<TaggedToken>>,
}

impl PreTagged {
    pub fn new(descriptions: Vec<TaggedDescription>) -> Self {
        Self {
            by_id: descriptions.into_iter().collect(),
        }
    }
}

impl Tagger for PreTagged {
    fn tag(&self, id: &str, _text: &str) -> Result<Vec<TaggedToken>, AnalysisError> {
        self.by_id
            .get(id)
            .cloned()
            .ok_or_else(|| AnalysisError::MissingTagged(id.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct FrequencyRow {
    pub unique: usize,
    pub total: usize,
    pub median: usize,
}

/// Adjective counts per category.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FrequencyTable {
    pub rows: BTreeMap<Category, FrequencyRow>,
}

impl FrequencyTable {
    pub fn get(&self, c: Category) -> FrequencyRow {
        self.rows.get(&c).copied().unwrap_or_default()
    }

    /// `category,unique,total,median`, one row per category.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("category,unique,total,median\n");
        for c in [Category::Abstract, Category::Concrete, Category::Unknown] {
            let r = self.get(c);
            out.push_str(&format!("{c},{},{},{}\n", r.unique, r.total, r.median));
        }
        out
    }
}

/// Lower median: element `(n - 1) / 2` of the sorted values.
pub fn lower_median(values: &mut [usize]) -> usize {
    if values.is_empty() {
        return 0;
    }
    values.sort_unstable();
    values[(values.len() - 1) / 2]
}

/// Tags every description of `dataset` in parallel, keeping dataset order.
pub fn tag_dataset(dataset: &Dataset, tagger: &dyn Tagger) -> Result<Vec<TaggedDescription>, AnalysisError> {
    dataset
        .items
        .par_iter()
        .map(|item| Ok((item.id.clone(), tagger.tag(&item.id, &item.abstract_description)?)))
        .collect()
}

/// Unique lemmas, occurrences and per-description median count of adjectives
/// in each category. Unknown adjectives are reported in their own row.
pub fn frequency_stats(
    dataset: &Dataset,
    lexicon: &ConcretenessLexicon,
    tagger: &dyn Tagger,
) -> Result<FrequencyTable, AnalysisError> {
    let tagged = tag_dataset(dataset, tagger)?;
    let per_description: Vec<Vec<(Category, String)>> = tagged
        .par_iter()
        .map(|(_, tokens)| {
            extract_adjectives(tokens)
                .into_iter()
                .map(|lemma| (classify_adjective(&lemma, lexicon), lemma))
                .collect()
        })
        .collect();
    let mut rows = BTreeMap::new();
    for cat in [Category::Abstract, Category::Concrete, Category::Unknown] {
        let mut unique = BTreeSet::new();
        let mut counts = Vec::with_capacity(per_description.len());
        for adjs in &per_description {
            let mine: Vec<&String> = adjs.iter().filter(|(c, _)| *c == cat).map(|(_, l)| l).collect();
            counts.push(mine.len());
            unique.extend(mine);
        }
        let total = counts.iter().sum();
        rows.insert(
            cat,
            FrequencyRow {
                unique: unique.len(),
                total,
                median: lower_median(&mut counts),
            },
        );
    }
    Ok(FrequencyTable { rows })
}

/// Attributes of every description, classified by their adjective.
pub fn classified_attributes(
    tagged: &[TaggedDescription],
    lexicon: &ConcretenessLexicon,
) -> Vec<(String, Vec<AttributeOccurrence>)> {
    tagged
        .par_iter()
        .map(|(id, tokens)| {
            let occ = extract_attributes(tokens)
                .into_iter()
                .map(|mut o| {
                    o.category = classify_adjective(&o.key.adjective, lexicon);
                    o
                })
                .collect();
            (id.clone(), occ)
        })
        .collect()
}

/// Top attributes of each category and their presence matrix.
#[derive(Debug, Clone)]
pub struct AttributeStudy {
    pub abstract_attrs: Vec<AttributeKey>,
    pub concrete_attrs: Vec<AttributeKey>,
    /// Columns are `abstract_attrs` followed by `concrete_attrs`.
    pub presence: PresenceMatrix,
}

impl AttributeStudy {
    pub fn new(
        descriptions: &[(String, Vec<AttributeOccurrence>)],
        per_category: usize,
    ) -> Result<Self, AnalysisError> {
        let all: Vec<AttributeOccurrence> = descriptions.iter().flat_map(|(_, o)| o.iter().cloned()).collect();
        let (abstract_attrs, concrete_attrs) = select_top_attributes(&all, per_category.max(1));
        let columns: Vec<AttributeKey> = abstract_attrs.iter().chain(&concrete_attrs).cloned().collect();
        let presence = PresenceMatrix::build(descriptions, columns);
        if presence.is_empty() {
            return Err(AnalysisError::EmptyPresence);
        }
        Ok(Self {
            abstract_attrs,
            concrete_attrs,
            presence,
        })
    }

    pub fn categories(&self) -> Vec<Category> {
        let a = self.abstract_attrs.len();
        (0..self.presence.columns().len())
            .map(|c| if c < a { Category::Abstract } else { Category::Concrete })
            .collect()
    }

    /// `Φ_i` for every abstract attribute, with its best-matching concrete one.
    pub fn phi(&self) -> Result<Vec<PhiEntry>, AnalysisError> {
        if self.concrete_attrs.is_empty() {
            return Err(AnalysisError::NoConcreteColumns);
        }
        let n = self.presence.rows();
        let a = self.abstract_attrs.len();
        let concrete: Vec<Vec<u64>> = (0..self.concrete_attrs.len())
            .map(|j| self.presence.column_bits(a + j))
            .collect();
        Ok((0..a)
            .into_par_iter()
            .map(|i| {
                let col = self.presence.column_bits(i);
                let mut best = (f64::NEG_INFINITY, 0);
                for (j, c) in concrete.iter().enumerate() {
                    let phi = ContingencyTable::from_bits(&col, c, n).phi().abs();
                    if phi > best.0 {
                        best = (phi, j);
                    }
                }
                PhiEntry {
                    attribute: self.abstract_attrs[i].to_string(),
                    phi: best.0,
                    best_match: self.concrete_attrs[best.1].to_string(),
                }
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhiEntry {
    pub attribute: String,
    pub phi: f64,
    pub best_match: String,
}

/// `attribute,phi,best_match` rows.
pub fn phi_csv(entries: &[PhiEntry]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["attribute", "phi", "best_match"])
        .expect("in-memory write");
    for e in entries {
        w.write_record([e.attribute.as_str(), &e.phi.to_string(), e.best_match.as_str()])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

/// `bin_low,bin_high,count` over the fixed 0.05-wide bins.
pub fn histogram_csv(values: &[f64]) -> String {
    let mut out = String::from("bin_low,bin_high,count\n");
    for (i, n) in phi_histogram(values).iter().enumerate() {
        let (lo, hi) = histogram_edges(i);
        out.push_str(&format!("{lo:.2},{hi:.2},{n}\n"));
    }
    out
}

/// `attr_count,label,rows,mean_precision` rows.
pub fn group_csv(cells: &[GroupCell]) -> String {
    let mut out = String::from("attr_count,label,rows,mean_precision\n");
    for c in cells {
        out.push_str(&format!(
            "{},{},{},{}\n",
            c.attr_count, c.label, c.rows, c.mean_precision
        ));
    }
    out
}
