use std::collections::HashSet;

use super::lexicon::ConcretenessLexicon;
use super::tagged::{Pos, Relation, TaggedToken};

/// Lowercased word tokens. Splits on whitespace and punctuation but keeps a
/// hyphen that sits between two alphanumeric characters.
pub fn tokenize_hyphen_aware(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut current = String::new();
    for (i, &c) in chars.iter().enumerate() {
        let inner_hyphen = c == '-' && !current.is_empty() && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric());
        if c.is_alphanumeric() || inner_hyphen {
            current.extend(c.to_lowercase());
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

const IRREGULAR: &[(&str, &str)] = &[
    ("men", "man"),
    ("women", "woman"),
    ("feet", "foot"),
    ("teeth", "tooth"),
    ("children", "child"),
    ("mice", "mouse"),
    ("better", "good"),
    ("best", "good"),
    ("worse", "bad"),
    ("worst", "bad"),
    ("is", "be"),
    ("are", "be"),
    ("was", "be"),
    ("were", "be"),
    ("been", "be"),
    ("has", "have"),
    ("had", "have"),
    ("made", "make"),
    ("wore", "wear"),
    ("worn", "wear"),
    ("knitted", "knit"),
    ("sewn", "sew"),
];

fn is_vowel(c: u8) -> bool {
    matches!(c, b'a' | b'e' | b'i' | b'o' | b'u')
}

/// Number of vowel-to-consonant transitions in `stem` (the Porter "measure").
fn measure(stem: &[u8]) -> usize {
    stem.windows(2).filter(|w| is_vowel(w[0]) && !is_vowel(w[1])).count()
}

/// Repairs the stem left behind by stripping -ed / -ing.
fn restore_stem(stem: &str) -> String {
    let b = stem.as_bytes();
    let n = b.len();
    let last = b[n - 1];
    if n >= 2 && last == b[n - 2] && !is_vowel(last) && !matches!(last, b'l' | b's' | b'z') {
        return stem[..n - 1].to_string();
    }
    let cvc =
        n >= 3 && !is_vowel(b[n - 3]) && is_vowel(b[n - 2]) && !is_vowel(last) && !matches!(last, b'w' | b'x' | b'y');
    if cvc && measure(b) == 1 {
        return format!("{stem}e");
    }
    stem.to_string()
}

/// Deterministic suffix-stripping lemmatizer for lowercase English words.
///
/// Words for which `known` returns true are kept as they are, which protects
/// lexicon entries such as "striped" or "ruffled" from being cut.
pub fn lemmatize(word: &str, known: impl Fn(&str) -> bool) -> String {
    if known(word) || !word.is_ascii() || word.contains('-') {
        return word.to_string();
    }
    if let Some(&(_, lemma)) = IRREGULAR.iter().find(|(w, _)| *w == word) {
        return lemma.to_string();
    }
    let has_vowel = |s: &str| s.bytes().any(is_vowel);
    let n = word.len();
    if n > 4 && word.ends_with("ies") {
        return format!("{}y", &word[..n - 3]);
    }
    for suffix in ["ing", "ed"] {
        if let Some(stem) = word.strip_suffix(suffix) {
            if stem.len() >= 3 && has_vowel(stem) && !stem.ends_with('e') {
                let restored = restore_stem(stem);
                return if known(stem) { stem.to_string() } else { restored };
            }
        }
    }
    if let Some(stem) = word.strip_suffix("es") {
        if ["s", "x", "z", "ch", "sh"].iter().any(|e| stem.ends_with(e)) && stem.len() >= 2 {
            return stem.to_string();
        }
    }
    if n > 3 && word.ends_with('s') && !["ss", "us", "is"].iter().any(|e| word.ends_with(e)) {
        return word[..n - 1].to_string();
    }
    word.to_string()
}

const FUNCTION_WORDS: &[&str] = &[
    "a", "about", "above", "after", "all", "also", "an", "and", "any", "are", "around", "as", "at", "be", "because",
    "been", "before", "below", "between", "both", "but", "by", "can", "could", "do", "does", "down", "each", "either",
    "even", "ever", "extra", "for", "from", "has", "have", "he", "her", "here", "hers", "him", "his", "how", "i", "if",
    "in", "into", "is", "it", "its", "just", "may", "me", "might", "more", "most", "much", "must", "my", "neither",
    "no", "nor", "not", "of", "off", "on", "once", "only", "onto", "or", "our", "out", "over", "per", "plus", "quite",
    "rather", "she", "should", "so", "some", "such", "than", "that", "the", "their", "them", "then", "there", "these",
    "they", "this", "those", "through", "to", "too", "under", "until", "up", "upon", "us", "very", "via", "was", "we",
    "were", "what", "when", "where", "which", "while", "who", "whose", "why", "will", "with", "within", "without",
    "would", "yet", "you", "your",
];

/// Tokens after an adjective that are searched for its head noun.
pub const HEAD_WINDOW: usize = 3;

/// Rule-based stand-in for a dependency parser.
///
/// A token is an adjective when it is in `adjectives` or in the lexicon's
/// override table. Function words, numbers and -ly adverbs are `Other`; every
/// other token counts as a noun. Each adjective attaches to the nearest
/// following noun at most [`HEAD_WINDOW`] tokens away, and nouns that receive
/// an adjective are tagged as the subject.
pub fn heuristic_tag(
    tokens: &[String],
    lexicon: &ConcretenessLexicon,
    adjectives: &HashSet<String>,
) -> Vec<TaggedToken> {
    let function: HashSet<&str> = FUNCTION_WORDS.iter().copied().collect();
    let is_adj = |t: &str| adjectives.contains(t) || lexicon.override_for(t).is_some();
    let known = |t: &str| is_adj(t) || lexicon.contains(t);

    let mut tagged: Vec<TaggedToken> = tokens
        .iter()
        .map(|t| {
            let pos = if is_adj(t) {
                Pos::Adjective
            } else if function.contains(t.as_str())
                || !t.chars().next().is_some_and(char::is_alphabetic)
                || (t.len() > 4 && t.ends_with("ly"))
            {
                Pos::Other
            } else {
                Pos::Noun
            };
            TaggedToken {
                text: t.clone(),
                lemma: lemmatize(t, known),
                pos,
                head_index: None,
                relation: Relation::Other,
            }
        })
        .collect();

    for i in 0..tagged.len() {
        if tagged[i].pos != Pos::Adjective {
            continue;
        }
        let end = (i + HEAD_WINDOW).min(tagged.len() - 1);
        let head = (i + 1..=end).find(|&j| matches!(tagged[j].pos, Pos::Noun | Pos::Subject));
        if let Some(h) = head {
            tagged[i].head_index = Some(h);
            tagged[i].relation = Relation::AdjectiveModifier;
            tagged[h].pos = Pos::Subject;
        }
    }
    tagged
}
