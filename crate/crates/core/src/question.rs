//! Question structure: types, reference spans, parsing, interpretation.
//!
//! A question is reduced to an expected answer type plus, per hop, bags of
//! entity, property and class references. References are plain text until
//! [`interpret`] matches them into ranked candidate term sets. Two parsers
//! produce models: a gold-annotation passthrough and a rule-based heuristic.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{tokenize, Catalogs, MatchCandidate, MatchConfig};
use crate::store::{KnowledgeGraph, StoreError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum QuestionType {
    Select,
    Ask,
    Count,
}

/// Span roles over the two supported hops.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReferenceRole {
    E1,
    P1,
    C1,
    E2,
    P2,
    C2,
}

impl ReferenceRole {
    pub fn hop(self) -> usize {
        match self {
            ReferenceRole::E1 | ReferenceRole::P1 | ReferenceRole::C1 => 1,
            ReferenceRole::E2 | ReferenceRole::P2 | ReferenceRole::C2 => 2,
        }
    }
}

/// A text span carrying one annotated reference.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceSpan {
    pub text: String,
    pub role: ReferenceRole,
}

/// References of one hop, still as plain text.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct HopReferences {
    #[serde(default)]
    pub entities: Vec<String>,
    #[serde(default)]
    pub properties: Vec<String>,
    #[serde(default)]
    pub classes: Vec<String>,
}

impl HopReferences {
    pub fn is_empty(&self) -> bool {
        self.entities.is_empty() && self.properties.is_empty() && self.classes.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionModel {
    pub qtype: QuestionType,
    pub hops: Vec<HopReferences>,
}

#[derive(Debug, Error)]
pub enum QuestionError {
    #[error("question has no hops")]
    NoHops,
    #[error("question has {hops} hops but at most {max} are supported")]
    TooManyHops { hops: usize, max: usize },
    #[error("hop {hop} needs at least one property reference")]
    MissingProperties { hop: usize },
    #[error("interpretation references unknown term <{0}>")]
    UnknownTerm(String),
    #[error("invalid question JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl QuestionModel {
    /// Structural checks: between one and `max_hops` hops, and every hop
    /// after the first anchored by at least one property reference.
    pub fn validate(&self, max_hops: usize) -> Result<(), QuestionError> {
        validate_hops(self.hops.len(), max_hops, |i| self.hops[i].properties.is_empty())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable model")
    }

    pub fn from_json(text: &str) -> Result<QuestionModel, QuestionError> {
        Ok(serde_json::from_str(text)?)
    }
}

fn validate_hops(
    hops: usize,
    max_hops: usize,
    missing_properties: impl Fn(usize) -> bool,
) -> Result<(), QuestionError> {
    if hops == 0 {
        return Err(QuestionError::NoHops);
    }
    if hops > max_hops {
        return Err(QuestionError::TooManyHops { hops, max: max_hops });
    }
    for i in 1..hops {
        if missing_properties(i) {
            return Err(QuestionError::MissingProperties { hop: i + 1 });
        }
    }
    Ok(())
}

const ASK_LEADS: [&str; 7] = ["is", "are", "was", "were", "does", "did", "do"];

/// Keyword classification into SELECT, ASK or COUNT.
///
/// Counting cues (a leading "how many", the word "count", the phrase
/// "number of") win over an interrogative-verb opening; everything else is a
/// selection.
pub fn detect_question_type(text: &str) -> QuestionType {
    let tokens = tokenize(text);
    if tokens.len() >= 2 && tokens[0] == "how" && tokens[1] == "many" {
        return QuestionType::Count;
    }
    if tokens.iter().any(|t| t == "count") {
        return QuestionType::Count;
    }
    if tokens.windows(2).any(|w| w[0] == "number" && w[1] == "of") {
        return QuestionType::Count;
    }
    match tokens.first() {
        Some(first) if ASK_LEADS.contains(&first.as_str()) => QuestionType::Ask,
        _ => QuestionType::Select,
    }
}

/// Builds a model from annotated spans without touching the text.
pub fn annotate_gold(
    qtype: QuestionType,
    spans: &[ReferenceSpan],
) -> Result<QuestionModel, QuestionError> {
    let hop_count = spans.iter().map(|s| s.role.hop()).max().unwrap_or(1);
    let mut hops = vec![HopReferences::default(); hop_count];
    for span in spans {
        let hop = &mut hops[span.role.hop() - 1];
        let bucket = match span.role {
            ReferenceRole::E1 | ReferenceRole::E2 => &mut hop.entities,
            ReferenceRole::P1 | ReferenceRole::P2 => &mut hop.properties,
            ReferenceRole::C1 | ReferenceRole::C2 => &mut hop.classes,
        };
        bucket.push(span.text.clone());
    }
    let model = QuestionModel { qtype, hops };
    model.validate(2)?;
    Ok(model)
}

const STOPWORDS: [&str; 44] = [
    "a", "an", "and", "are", "as", "at", "be", "been", "by", "did", "do", "does", "for", "from",
    "give", "had", "has", "have", "how", "in", "into", "is", "it", "its", "list", "many", "me",
    "much", "name", "of", "on", "or", "show", "that", "the", "this", "to", "was", "were", "with",
    "all", "also", "any", "their",
];

const WH_WORDS: [&str; 8] = ["who", "what", "where", "when", "which", "whom", "whose", "why"];

struct Word {
    text: String,
    capitalized: bool,
    trailing_comma: bool,
}

fn split_words(text: &str) -> Vec<Word> {
    text.split_whitespace()
        .filter_map(|raw| {
            let trailing_comma = raw.trim_end_matches(['?', '!', '.']).ends_with(',');
            let stripped: String =
                raw.chars().filter(|c| c.is_alphanumeric() || *c == '\'').collect();
            let stripped = stripped.trim_matches('\'').to_string();
            if stripped.is_empty() {
                return None;
            }
            let capitalized = stripped.chars().next().is_some_and(char::is_uppercase);
            Some(Word { text: stripped, capitalized, trailing_comma })
        })
        .collect()
}

fn is_content_word(word: &Word) -> bool {
    let lower = word.text.to_lowercase();
    !word.capitalized
        && !STOPWORDS.contains(&lower.as_str())
        && !WH_WORDS.contains(&lower.as_str())
        && word.text.chars().any(char::is_alphabetic)
}

/// Rule-based parser for plain questions.
///
/// Entity references are maximal runs of capitalized words (never starting at
/// the first word, allowed to bridge a single comma). Each run recruits the
/// nearest content word within two positions — left before right — as a
/// hop-1 property reference. When an interrogative word occurs mid-question
/// the final content word becomes a hop-2 property reference, turning the
/// question into a chain.
pub fn annotate_heuristic(text: &str) -> QuestionModel {
    let qtype = detect_question_type(text);
    let words = split_words(text);

    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut i = 1;
    while i < words.len() {
        if !words[i].capitalized {
            i += 1;
            continue;
        }
        let start = i;
        let mut end = i;
        while end + 1 < words.len() && words[end + 1].capitalized {
            end += 1;
        }
        runs.push((start, end));
        i = end + 1;
    }

    let mut entities = Vec::new();
    for &(start, end) in &runs {
        let mut name = String::new();
        for (k, word) in words[start..=end].iter().enumerate() {
            if k > 0 {
                name.push(' ');
            }
            name.push_str(&word.text);
            if word.trailing_comma && start + k < end {
                name.push(',');
            }
        }
        entities.push(name);
    }

    let in_run = |idx: usize| runs.iter().any(|&(s, e)| idx >= s && idx <= e);
    let mut properties: Vec<String> = Vec::new();
    for &(start, end) in &runs {
        let mut found = None;
        'search: for d in 1..=2usize {
            for idx in [start.checked_sub(d), end.checked_add(d).filter(|&r| r < words.len())]
                .into_iter()
                .flatten()
            {
                if !in_run(idx) && is_content_word(&words[idx]) {
                    found = Some(words[idx].text.to_lowercase());
                    break 'search;
                }
            }
        }
        if let Some(p) = found {
            if !properties.contains(&p) {
                properties.push(p);
            }
        }
    }

    let wh_mid =
        words.iter().skip(1).any(|w| WH_WORDS.contains(&w.text.to_lowercase().as_str()));
    let mut second_property = None;
    if wh_mid {
        for (idx, word) in words.iter().enumerate().rev() {
            if in_run(idx) {
                continue;
            }
            if is_content_word(word) {
                let lower = word.text.to_lowercase();
                if !properties.contains(&lower) {
                    second_property = Some(lower);
                }
                break;
            }
        }
    }

    let mut hops = vec![HopReferences { entities, properties, classes: Vec::new() }];
    if let Some(p) = second_property {
        hops.push(HopReferences { properties: vec![p], ..HopReferences::default() });
    }
    QuestionModel { qtype, hops }
}

/// A reference with its matched candidates; `out_of_vocabulary` is set when
/// an embedding matcher had no vector for any token of the text.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpretedReference {
    pub text: String,
    pub candidates: Vec<MatchCandidate>,
    pub out_of_vocabulary: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct InterpretedHop {
    pub entities: Vec<InterpretedReference>,
    pub properties: Vec<InterpretedReference>,
    pub classes: Vec<InterpretedReference>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterpretedQuestion {
    pub qtype: QuestionType,
    pub hops: Vec<InterpretedHop>,
}

impl InterpretedQuestion {
    pub fn validate(&self, max_hops: usize) -> Result<(), QuestionError> {
        validate_hops(self.hops.len(), max_hops, |i| self.hops[i].properties.is_empty())
    }

    pub fn to_json(&self, kg: &KnowledgeGraph) -> String {
        serde_json::to_string_pretty(&self.to_wire(kg)).expect("serializable interpretation")
    }

    pub fn from_json(kg: &KnowledgeGraph, text: &str) -> Result<InterpretedQuestion, QuestionError> {
        let wire: InterpretedQuestionWire = serde_json::from_str(text)?;
        Self::from_wire(kg, wire)
    }

    pub fn to_wire(&self, kg: &KnowledgeGraph) -> InterpretedQuestionWire {
        let refs = |list: &[InterpretedReference]| {
            list.iter()
                .map(|r| InterpretedReferenceWire {
                    text: r.text.clone(),
                    candidates: r
                        .candidates
                        .iter()
                        .map(|c| (kg.term(c.term).to_string(), c.confidence))
                        .collect(),
                    out_of_vocabulary: r.out_of_vocabulary,
                })
                .collect()
        };
        InterpretedQuestionWire {
            qtype: self.qtype,
            hops: self
                .hops
                .iter()
                .map(|h| InterpretedHopWire {
                    entities: refs(&h.entities),
                    properties: refs(&h.properties),
                    classes: refs(&h.classes),
                })
                .collect(),
        }
    }

    pub fn from_wire(
        kg: &KnowledgeGraph,
        wire: InterpretedQuestionWire,
    ) -> Result<InterpretedQuestion, QuestionError> {
        let refs = |list: Vec<InterpretedReferenceWire>| -> Result<_, QuestionError> {
            list.into_iter()
                .map(|r| {
                    let candidates = r
                        .candidates
                        .into_iter()
                        .map(|(uri, confidence)| match kg.resolve(&uri) {
                            Ok(term) => Ok(MatchCandidate { term, confidence }),
                            Err(StoreError::UnknownUri(u)) => Err(QuestionError::UnknownTerm(u)),
                            Err(_) => Err(QuestionError::UnknownTerm(uri.clone())),
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    Ok(InterpretedReference {
                        text: r.text,
                        candidates,
                        out_of_vocabulary: r.out_of_vocabulary,
                    })
                })
                .collect::<Result<Vec<_>, _>>()
        };
        Ok(InterpretedQuestion {
            qtype: wire.qtype,
            hops: wire
                .hops
                .into_iter()
                .map(|h| {
                    Ok(InterpretedHop {
                        entities: refs(h.entities)?,
                        properties: refs(h.properties)?,
                        classes: refs(h.classes)?,
                    })
                })
                .collect::<Result<Vec<_>, QuestionError>>()?,
        })
    }
}

/// JSON shape of an interpretation: candidates as `[uri, confidence]` pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InterpretedQuestionWire {
    pub qtype: QuestionType,
    pub hops: Vec<InterpretedHopWire>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InterpretedHopWire {
    #[serde(default)]
    pub entities: Vec<InterpretedReferenceWire>,
    #[serde(default)]
    pub properties: Vec<InterpretedReferenceWire>,
    #[serde(default)]
    pub classes: Vec<InterpretedReferenceWire>,
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InterpretedReferenceWire {
    pub text: String,
    #[serde(default)]
    pub candidates: Vec<(String, f64)>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub out_of_vocabulary: bool,
}

/// Either an already-interpreted question or a plain model awaiting
/// interpretation, as found in input files.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum QuestionInput {
    Interpreted(InterpretedQuestionWire),
    Model(QuestionModel),
}

/// Matches every reference of the model into candidate sets.
pub fn interpret(
    kg: &KnowledgeGraph,
    catalogs: &Catalogs,
    model: &QuestionModel,
    cfg: &MatchConfig,
) -> InterpretedQuestion {
    let hops = model
        .hops
        .iter()
        .map(|hop| InterpretedHop {
            entities: hop
                .entities
                .iter()
                .map(|text| {
                    let m = catalogs.match_entity(kg, text, cfg);
                    InterpretedReference {
                        text: text.clone(),
                        candidates: m.candidates,
                        out_of_vocabulary: m.out_of_vocabulary,
                    }
                })
                .collect(),
            properties: hop
                .properties
                .iter()
                .map(|text| {
                    let m = catalogs.match_property(kg, text, cfg);
                    InterpretedReference {
                        text: text.clone(),
                        candidates: m.candidates,
                        out_of_vocabulary: m.out_of_vocabulary,
                    }
                })
                .collect(),
            classes: hop
                .classes
                .iter()
                .map(|text| InterpretedReference {
                    text: text.clone(),
                    candidates: catalogs.match_class(text, cfg),
                    out_of_vocabulary: false,
                })
                .collect(),
        })
        .collect();
    InterpretedQuestion { qtype: model.qtype, hops }
}
