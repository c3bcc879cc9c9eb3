use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AnalysisError, AttributeKey, AttributeOccurrence, Category};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pos {
    Adjective,
    Noun,
    Verb,
    Subject,
    Compound,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    #[serde(rename = "amod")]
    AdjectiveModifier,
    Compound,
    Subject,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedToken {
    pub text: String,
    pub lemma: String,
    pub pos: Pos,
    pub head_index: Option<usize>,
    pub relation: Relation,
}

impl TaggedToken {
    fn is_adjectival(&self) -> bool {
        self.pos == Pos::Adjective || self.relation == Relation::AdjectiveModifier
    }

    fn is_subject(&self) -> bool {
        self.pos == Pos::Subject || self.relation == Relation::Subject
    }

    fn is_compound(&self) -> bool {
        self.pos == Pos::Compound || self.relation == Relation::Compound
    }
}

/// Checks the head-index invariant of a token list.
pub fn validate_tokens(id: &str, tokens: &[TaggedToken]) -> Result<(), AnalysisError> {
    for (i, t) in tokens.iter().enumerate() {
        if let Some(h) = t.head_index {
            if h >= tokens.len() || h == i {
                return Err(AnalysisError::BadHeadIndex {
                    id: id.to_string(),
                    token: i,
                    head: h,
                    len: tokens.len(),
                });
            }
        }
    }
    Ok(())
}

/// Maps an external tagger's label set onto [`Pos`] and [`Relation`].
///
/// Lookups are case-insensitive. Unmapped labels become `Other`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMapping {
    pub pos: HashMap<String, Pos>,
    pub relation: HashMap<String, Relation>,
}

impl Default for LabelMapping {
    /// Universal POS tags and ClearNLP dependency labels, plus this crate's own
    /// names.
    fn default() -> Self {
        let pos = [
            ("adj", Pos::Adjective),
            ("adjective", Pos::Adjective),
            ("noun", Pos::Noun),
            ("propn", Pos::Noun),
            ("verb", Pos::Verb),
            ("subject", Pos::Subject),
            ("compound", Pos::Compound),
        ];
        let relation = [
            ("amod", Relation::AdjectiveModifier),
            ("adjectivemodifier", Relation::AdjectiveModifier),
            ("compound", Relation::Compound),
            ("nsubj", Relation::Subject),
            ("nsubjpass", Relation::Subject),
            ("subject", Relation::Subject),
        ];
        Self {
            pos: pos.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            relation: relation.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        }
    }
}

impl LabelMapping {
    pub fn pos(&self, label: &str) -> Pos {
        self.pos.get(&label.to_lowercase()).copied().unwrap_or(Pos::Other)
    }

    pub fn relation(&self, label: &str) -> Relation {
        self.relation
            .get(&label.to_lowercase())
            .copied()
            .unwrap_or(Relation::Other)
    }

    /// Reads a JSON object `{"pos": {label: pos}, "rel": {label: relation}}`
    /// and layers it over the defaults.
    pub fn with_overrides_json(mut self, json: &str) -> Result<Self, AnalysisError> {
        #[derive(Deserialize)]
        struct Raw {
            #[serde(default)]
            pos: HashMap<String, Pos>,
            #[serde(default)]
            rel: HashMap<String, Relation>,
        }
        let raw: Raw = serde_json::from_str(json).map_err(|e| AnalysisError::Parse {
            path: "<label mapping>".into(),
            line: e.line(),
            message: e.to_string(),
        })?;
        self.pos.extend(raw.pos.into_iter().map(|(k, v)| (k.to_lowercase(), v)));
        self.relation
            .extend(raw.rel.into_iter().map(|(k, v)| (k.to_lowercase(), v)));
        Ok(self)
    }
}

#[derive(Deserialize)]
struct RawToken {
    text: String,
    #[serde(default)]
    lemma: Option<String>,
    #[serde(default)]
    pos: String,
    #[serde(default)]
    head: Option<usize>,
    #[serde(default)]
    rel: String,
}

#[derive(Deserialize)]
struct RawDescription {
    id: String,
    tokens: Vec<RawToken>,
}

pub type TaggedDescription = (String, Vec<TaggedToken>);

/// Parses pre-tagged JSONL. A token whose head points at itself (the usual
/// encoding of a sentence root) is read as having no head.
pub fn parse_tagged(
    reader: impl BufRead,
    source: &str,
    mapping: &LabelMapping,
) -> Result<Vec<TaggedDescription>, AnalysisError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| AnalysisError::Io {
            path: source.to_string(),
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawDescription = serde_json::from_str(&line).map_err(|e| AnalysisError::Parse {
            path: source.to_string(),
            line: line_no,
            message: e.to_string(),
        })?;
        let tokens: Vec<TaggedToken> = raw
            .tokens
            .into_iter()
            .enumerate()
            .map(|(idx, t)| TaggedToken {
                lemma: t
                    .lemma
                    .filter(|l| !l.is_empty())
                    .unwrap_or_else(|| t.text.clone())
                    .to_lowercase(),
                text: t.text,
                pos: mapping.pos(&t.pos),
                head_index: t.head.filter(|&h| h != idx),
                relation: mapping.relation(&t.rel),
            })
            .collect();
        validate_tokens(&raw.id, &tokens)?;
        out.push((raw.id, tokens));
    }
    Ok(out)
}

pub fn load_tagged(path: impl AsRef<Path>, mapping: &LabelMapping) -> Result<Vec<TaggedDescription>, AnalysisError> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    let file = File::open(path).map_err(|e| AnalysisError::Io {
        path: shown.clone(),
        message: e.to_string(),
    })?;
    parse_tagged(BufReader::new(file), &shown, mapping)
}

/// Lemmas of all adjectival tokens (tagged adjective or in an adjective-modifier
/// relation), lowercased.
pub fn extract_adjectives(tagged: &[TaggedToken]) -> Vec<String> {
    tagged
        .iter()
        .filter(|t| t.is_adjectival() && !t.lemma.is_empty())
        .map(|t| t.lemma.to_lowercase())
        .collect()
}

/// Adjective(+noun) attributes of one tagged description, category `Unknown`.
///
/// An adjectival token that is part of a compound emits its compound couples;
/// otherwise it pairs with its head when the head is an adjective or the
/// subject, and stands alone when it has no such head. Non-adjectival compound
/// tokens emit their couples too.
pub fn extract_attributes(tagged: &[TaggedToken]) -> Vec<AttributeOccurrence> {
    let lemma = |i: usize| tagged[i].lemma.to_lowercase();
    let mut out = Vec::new();
    for (i, t) in tagged.iter().enumerate() {
        if t.lemma.is_empty() {
            continue;
        }
        let couples = compound_couples(tagged, i);
        if !couples.is_empty() {
            out.extend(couples.into_iter().map(|j| AttributeOccurrence {
                key: AttributeKey::new(lemma(i), Some(lemma(j))),
                category: Category::Unknown,
            }));
            continue;
        }
        if !t.is_adjectival() {
            continue;
        }
        let noun = t
            .head_index
            .filter(|&h| tagged[h].pos == Pos::Adjective || tagged[h].is_subject())
            .map(lemma);
        out.push(AttributeOccurrence {
            key: AttributeKey::new(lemma(i), noun),
            category: Category::Unknown,
        });
    }
    out
}

/// Heads of compound relations starting at token `i`.
fn compound_couples(tagged: &[TaggedToken], i: usize) -> Vec<usize> {
    let t = &tagged[i];
    match t.head_index {
        Some(h) if t.is_compound() && !tagged[h].lemma.is_empty() => vec![h],
        _ => Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tok(text: &str, pos: Pos, head: Option<usize>, relation: Relation) -> TaggedToken {
        TaggedToken {
            text: text.into(),
            lemma: text.into(),
            pos,
            head_index: head,
            relation,
        }
    }

    fn keys(occ: &[AttributeOccurrence]) -> Vec<(String, Option<String>)> {
        occ.iter()
            .map(|o| (o.key.adjective.clone(), o.key.noun.clone()))
            .collect()
    }

    #[test]
    fn adjective_with_subject_head() {
        let tags = [
            tok("green", Pos::Adjective, Some(1), Relation::AdjectiveModifier),
            tok("jacket", Pos::Subject, None, Relation::Subject),
        ];
        assert_eq!(
            keys(&extract_attributes(&tags)),
            [("green".into(), Some("jacket".into()))]
        );
    }

    #[test]
    fn compound_couple() {
        let tags = [
            tok("knee", Pos::Compound, Some(1), Relation::Compound),
            tok("length", Pos::Noun, None, Relation::Other),
        ];
        assert_eq!(
            keys(&extract_attributes(&tags)),
            [("knee".into(), Some("length".into()))]
        );
    }

    #[test]
    fn adjective_without_qualifying_head() {
        let tags = [tok("sleek", Pos::Adjective, None, Relation::Other)];
        assert_eq!(keys(&extract_attributes(&tags)), [("sleek".into(), None)]);
        // a plain noun head does not qualify
        let tags = [
            tok("sleek", Pos::Adjective, Some(1), Relation::AdjectiveModifier),
            tok("coat", Pos::Verb, None, Relation::Other),
        ];
        assert_eq!(keys(&extract_attributes(&tags)), [("sleek".into(), None)]);
    }

    #[test]
    fn adjectives_by_relation() {
        let tags = [
            tok("Comfy", Pos::Other, Some(1), Relation::AdjectiveModifier),
            tok("fit", Pos::Noun, None, Relation::Other),
        ];
        assert_eq!(extract_adjectives(&tags), ["comfy"]);
    }

    #[test]
    fn loads_with_mapping() {
        let jsonl = r#"{"id":"d1","tokens":[{"text":"Green","lemma":"green","pos":"ADJ","head":1,"rel":"amod"},{"text":"jacket","lemma":"jacket","pos":"NOUN","head":1,"rel":"ROOT"}]}
{"id":"d2","tokens":[{"text":"knee","pos":"NOUN","head":1,"rel":"compound"},{"text":"length","pos":"NOUN","head":null,"rel":"nsubj"}]}
"#;
        let parsed = parse_tagged(jsonl.as_bytes(), "mem", &LabelMapping::default()).unwrap();
        assert_eq!(parsed.len(), 2);
        let (_, d1) = &parsed[0];
        assert_eq!(d1[0].pos, Pos::Adjective);
        assert_eq!(d1[0].relation, Relation::AdjectiveModifier);
        assert_eq!(d1[1].head_index, None);
        // jacket is a ROOT noun, not a subject, so green stands alone
        assert_eq!(keys(&extract_attributes(d1)), [("green".into(), None)]);
        let (_, d2) = &parsed[1];
        assert_eq!(d2[0].lemma, "knee");
        assert_eq!(d2[1].relation, Relation::Subject);
        assert_eq!(keys(&extract_attributes(d2)), [("knee".into(), Some("length".into()))]);

        let mapping = LabelMapping::default()
            .with_overrides_json(r#"{"rel":{"root":"subject"}}"#)
            .unwrap();
        let parsed = parse_tagged(jsonl.as_bytes(), "mem", &mapping).unwrap();
        assert_eq!(
            keys(&extract_attributes(&parsed[0].1)),
            [("green".into(), Some("jacket".into()))]
        );
    }

    #[test]
    fn bad_head_and_parse_errors() {
        let jsonl = r#"{"id":"d1","tokens":[{"text":"a","pos":"ADJ","head":5,"rel":"amod"}]}"#;
        assert!(matches!(
            parse_tagged(jsonl.as_bytes(), "mem", &LabelMapping::default()),
            Err(AnalysisError::BadHeadIndex {
                token: 0,
                head: 5,
                len: 1,
                ..
            })
        ));
        assert!(matches!(
            parse_tagged("\n{nope".as_bytes(), "mem", &LabelMapping::default()),
            Err(AnalysisError::Parse { line: 2, .. })
        ));
    }
}
