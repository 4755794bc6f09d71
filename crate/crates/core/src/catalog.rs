//! Matching question references to graph terms.
//!
//! Two matchers share one candidate shape: a lexical BM25 index over
//! character 3-grams and Snowball stems of term labels, robust to typos and
//! morphology, and an embedding matcher scoring cosine similarity between
//! mean-pooled word vectors of the reference and of each label. Lexical
//! confidences are max-normalized per query into `(0, 1]`; embedding
//! confidences are cosines clipped at zero.

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rust_stemmers::{Algorithm, Stemmer};

use crate::snapshot::{read_str, read_u16, read_u32, read_u64, read_f64};
use crate::snapshot::{write_str, write_u32, write_u64, write_f64};
use crate::store::{KnowledgeGraph, StoreError, TermId};
use crate::store::{ROLE_CLASS, ROLE_ENTITY, ROLE_PROPERTY};
use crate::vectors::{cosine, VectorTable};

pub const DEFAULT_TOP_ENTITIES: usize = 500;
pub const DEFAULT_TOP_PROPERTIES: usize = 50;

const BM25_K1: f64 = 1.2;
const BM25_B: f64 = 0.75;
const NGRAM: usize = 3;

/// A graph term with a matching confidence in `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchCandidate {
    pub term: TermId,
    pub confidence: f64,
}

/// Property candidates plus a marker telling an empty list caused by the
/// reference being absent from the vector vocabulary apart from plain
/// no-match.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Matches {
    pub candidates: Vec<MatchCandidate>,
    pub out_of_vocabulary: bool,
}

/// Derives a readable label from a URI: the fragment after the last `/` or
/// `#` (or `:` when neither occurs), underscores to spaces, camel-case
/// boundaries split, lowercased.
pub fn normalize_uri_label(uri: &str) -> String {
    let tail = match uri.rfind(['/', '#']) {
        Some(i) => &uri[i + 1..],
        None => match uri.rfind(':') {
            Some(i) => &uri[i + 1..],
            None => uri,
        },
    };
    let mut out = String::with_capacity(tail.len() + 4);
    let mut prev_lower = false;
    for c in tail.chars() {
        if c == '_' {
            out.push(' ');
            prev_lower = false;
            continue;
        }
        if c.is_uppercase() && prev_lower {
            out.push(' ');
        }
        prev_lower = c.is_lowercase() || c.is_ascii_digit();
        out.extend(c.to_lowercase());
    }
    let collapsed: Vec<&str> = out.split(' ').filter(|p| !p.is_empty()).collect();
    collapsed.join(" ")
}

/// Lowercased alphanumeric runs; everything else separates tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

pub(crate) fn english_stemmer() -> Stemmer {
    Stemmer::create(Algorithm::English)
}

/// Feature multiset of a text: per token, its character 3-grams plus its
/// stem; tokens shorter than the gram size contribute themselves verbatim.
pub fn features(text: &str, stemmer: &Stemmer) -> Vec<String> {
    let mut out = Vec::new();
    for token in tokenize(text) {
        let chars: Vec<char> = token.chars().collect();
        if chars.len() < NGRAM {
            out.push(token);
            continue;
        }
        for w in chars.windows(NGRAM) {
            out.push(w.iter().collect());
        }
        out.push(stemmer.stem(&token).into_owned());
    }
    out
}

/// Labels used for matching: explicit ones, else the normalized URI.
pub fn effective_labels(kg: &KnowledgeGraph, id: TermId) -> Vec<String> {
    let explicit = kg.labels_of(id);
    if explicit.is_empty() {
        vec![normalize_uri_label(kg.term(id))]
    } else {
        explicit.to_vec()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Doc {
    term: u32,
    len: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Posting {
    doc: u32,
    tf: u32,
}

/// BM25 index with one document per (term, label) pair.
///
/// Scoring a reference takes the best-scoring label of each term, filters by
/// role, orders by descending score with ascending id tie-breaks, truncates,
/// and max-normalizes scores into confidences.
pub struct LexicalIndex {
    roles: Vec<u8>,
    docs: Vec<Doc>,
    postings: HashMap<String, Vec<Posting>>,
    avg_len: f64,
}

pub fn build_lexical_index(kg: &KnowledgeGraph) -> LexicalIndex {
    let stemmer = english_stemmer();
    let mut docs = Vec::new();
    let mut postings: HashMap<String, Vec<Posting>> = HashMap::new();
    let mut total_len = 0u64;
    for id in kg.term_ids() {
        if kg.role(id) == 0 {
            continue;
        }
        for label in effective_labels(kg, id) {
            let feats = features(&label, &stemmer);
            let doc = docs.len() as u32;
            docs.push(Doc { term: id.0, len: feats.len() as u32 });
            total_len += feats.len() as u64;
            let mut counts: HashMap<String, u32> = HashMap::new();
            for f in feats {
                *counts.entry(f).or_insert(0) += 1;
            }
            for (f, tf) in counts {
                postings.entry(f).or_default().push(Posting { doc, tf });
            }
        }
    }
    let avg_len = if docs.is_empty() { 1.0 } else { total_len as f64 / docs.len() as f64 };
    let roles = kg.term_ids().map(|id| kg.role(id)).collect();
    LexicalIndex { roles, docs, postings, avg_len }
}

impl LexicalIndex {
    pub fn doc_count(&self) -> usize {
        self.docs.len()
    }

    /// BM25 candidates for one reference, restricted to terms whose role
    /// intersects `role_mask`.
    pub fn query(&self, reference: &str, role_mask: u8, top_k: usize) -> Vec<MatchCandidate> {
        if top_k == 0 || self.docs.is_empty() {
            return Vec::new();
        }
        let stemmer = english_stemmer();
        let mut feats = features(reference, &stemmer);
        feats.sort_unstable();
        feats.dedup();

        let n = self.docs.len() as f64;
        let mut scores = vec![0.0f64; self.docs.len()];
        let mut touched: Vec<u32> = Vec::new();
        for f in &feats {
            let Some(list) = self.postings.get(f) else { continue };
            let df = list.len() as f64;
            let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
            for p in list {
                let dl = self.docs[p.doc as usize].len as f64;
                let tf = p.tf as f64;
                let norm = tf * (BM25_K1 + 1.0)
                    / (tf + BM25_K1 * (1.0 - BM25_B + BM25_B * dl / self.avg_len));
                if scores[p.doc as usize] == 0.0 {
                    touched.push(p.doc);
                }
                scores[p.doc as usize] += idf * norm;
            }
        }
        touched.sort_unstable();
        touched.dedup();

        let mut best: HashMap<u32, f64> = HashMap::new();
        for &doc in &touched {
            let term = self.docs[doc as usize].term;
            if self.roles[term as usize] & role_mask == 0 {
                continue;
            }
            let entry = best.entry(term).or_insert(0.0);
            if scores[doc as usize] > *entry {
                *entry = scores[doc as usize];
            }
        }
        let mut ranked: Vec<(u32, f64)> = best.into_iter().collect();
        ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("finite scores").then(a.0.cmp(&b.0)));
        ranked.truncate(top_k);
        let Some(&(_, max)) = ranked.first() else { return Vec::new() };
        ranked
            .into_iter()
            .map(|(term, score)| MatchCandidate { term: TermId(term), confidence: score / max })
            .collect()
    }

    pub fn write(&self, mut out: impl Write) -> io::Result<()> {
        out.write_all(INDEX_MAGIC)?;
        out.write_all(&INDEX_VERSION.to_le_bytes())?;
        write_u32(&mut out, self.roles.len() as u32)?;
        out.write_all(&self.roles)?;
        write_u32(&mut out, self.docs.len() as u32)?;
        for d in &self.docs {
            write_u32(&mut out, d.term)?;
            write_u32(&mut out, d.len)?;
        }
        write_f64(&mut out, self.avg_len)?;
        let mut feats: Vec<&String> = self.postings.keys().collect();
        feats.sort_unstable();
        write_u64(&mut out, feats.len() as u64)?;
        for f in feats {
            write_str(&mut out, f)?;
            let list = &self.postings[f];
            write_u32(&mut out, list.len() as u32)?;
            for p in list {
                write_u32(&mut out, p.doc)?;
                write_u32(&mut out, p.tf)?;
            }
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> io::Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        self.write(&mut out)?;
        out.flush()
    }

    pub fn read(mut input: impl Read) -> Result<LexicalIndex, StoreError> {
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic)?;
        if &magic != INDEX_MAGIC {
            return Err(StoreError::Snapshot("unrecognized index magic bytes".into()));
        }
        let version = read_u16(&mut input)?;
        if version != INDEX_VERSION {
            return Err(StoreError::Snapshot(format!(
                "unsupported index version {version} (expected {INDEX_VERSION})"
            )));
        }
        let n_roles = read_u32(&mut input)? as usize;
        let mut roles = vec![0u8; n_roles];
        input.read_exact(&mut roles)?;
        let n_docs = read_u32(&mut input)? as usize;
        let mut docs = Vec::with_capacity(n_docs);
        for _ in 0..n_docs {
            let term = read_u32(&mut input)?;
            if term as usize >= n_roles {
                return Err(StoreError::Snapshot("document term out of range".into()));
            }
            let len = read_u32(&mut input)?;
            docs.push(Doc { term, len });
        }
        let avg_len = read_f64(&mut input)?;
        let n_feats = read_u64(&mut input)? as usize;
        let mut postings = HashMap::with_capacity(n_feats);
        for _ in 0..n_feats {
            let f = read_str(&mut input)?;
            let n_post = read_u32(&mut input)? as usize;
            let mut list = Vec::with_capacity(n_post);
            for _ in 0..n_post {
                let doc = read_u32(&mut input)?;
                if doc as usize >= n_docs {
                    return Err(StoreError::Snapshot("posting doc out of range".into()));
                }
                let tf = read_u32(&mut input)?;
                list.push(Posting { doc, tf });
            }
            postings.insert(f, list);
        }
        Ok(LexicalIndex { roles, docs, postings, avg_len })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<LexicalIndex, StoreError> {
        Self::read(BufReader::new(File::open(path)?))
    }
}

pub const INDEX_MAGIC: &[u8; 4] = b"KGQX";
pub const INDEX_VERSION: u16 = 1;

pub fn match_entity(index: &LexicalIndex, reference: &str, top_k: usize) -> Vec<MatchCandidate> {
    index.query(reference, ROLE_ENTITY, top_k)
}

pub fn match_class(index: &LexicalIndex, reference: &str, top_k: usize) -> Vec<MatchCandidate> {
    index.query(reference, ROLE_CLASS, top_k)
}

pub fn match_property_lexical(
    index: &LexicalIndex,
    reference: &str,
    top_k: usize,
) -> Matches {
    Matches {
        candidates: index.query(reference, ROLE_PROPERTY, top_k),
        out_of_vocabulary: false,
    }
}

/// Embedding candidates: per term, the best cosine between the reference
/// vector and any of its label vectors, clipped at zero; zero-confidence
/// candidates are dropped.
pub fn match_by_embedding(
    kg: &KnowledgeGraph,
    vectors: &VectorTable,
    reference: &str,
    role_mask: u8,
    top_k: usize,
) -> Matches {
    let Some(rv) = vectors.embed(reference) else {
        return Matches { candidates: Vec::new(), out_of_vocabulary: true };
    };
    let mut ranked: Vec<(u32, f64)> = Vec::new();
    for id in kg.term_ids() {
        if kg.role(id) & role_mask == 0 {
            continue;
        }
        let mut best: Option<f64> = None;
        for label in effective_labels(kg, id) {
            if let Some(lv) = vectors.embed(&label) {
                let c = cosine(&rv, &lv);
                if best.is_none_or(|b| c > b) {
                    best = Some(c);
                }
            }
        }
        if let Some(score) = best {
            if score > 0.0 {
                ranked.push((id.0, score));
            }
        }
    }
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("finite scores").then(a.0.cmp(&b.0)));
    ranked.truncate(top_k);
    Matches {
        candidates: ranked
            .into_iter()
            .map(|(term, confidence)| MatchCandidate { term: TermId(term), confidence })
            .collect(),
        out_of_vocabulary: false,
    }
}

pub fn match_property(
    kg: &KnowledgeGraph,
    vectors: &VectorTable,
    reference: &str,
    top_k: usize,
) -> Matches {
    match_by_embedding(kg, vectors, reference, ROLE_PROPERTY, top_k)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatcherKind {
    Lexical,
    Embedding,
}

/// Candidate-list sizes and matcher selection per reference kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatchConfig {
    pub top_entities: usize,
    pub top_properties: usize,
    pub entity_matcher: MatcherKind,
    pub property_matcher: MatcherKind,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            top_entities: DEFAULT_TOP_ENTITIES,
            top_properties: DEFAULT_TOP_PROPERTIES,
            entity_matcher: MatcherKind::Lexical,
            property_matcher: MatcherKind::Embedding,
        }
    }
}

/// The matching state for one graph: always a lexical index, optionally a
/// vector table. Embedding matchers fall back to the lexical index when no
/// vectors were supplied.
pub struct Catalogs {
    pub lexical: LexicalIndex,
    pub vectors: Option<VectorTable>,
}

impl Catalogs {
    pub fn build(kg: &KnowledgeGraph) -> Catalogs {
        Catalogs { lexical: build_lexical_index(kg), vectors: None }
    }

    pub fn with_vectors(kg: &KnowledgeGraph, vectors: VectorTable) -> Catalogs {
        Catalogs { lexical: build_lexical_index(kg), vectors: Some(vectors) }
    }

    pub fn match_entity(
        &self,
        kg: &KnowledgeGraph,
        reference: &str,
        cfg: &MatchConfig,
    ) -> Matches {
        match (cfg.entity_matcher, &self.vectors) {
            (MatcherKind::Embedding, Some(v)) => {
                match_by_embedding(kg, v, reference, ROLE_ENTITY, cfg.top_entities)
            }
            _ => Matches {
                candidates: match_entity(&self.lexical, reference, cfg.top_entities),
                out_of_vocabulary: false,
            },
        }
    }

    pub fn match_property(
        &self,
        kg: &KnowledgeGraph,
        reference: &str,
        cfg: &MatchConfig,
    ) -> Matches {
        match (cfg.property_matcher, &self.vectors) {
            (MatcherKind::Embedding, Some(v)) => {
                match_property(kg, v, reference, cfg.top_properties)
            }
            _ => match_property_lexical(&self.lexical, reference, cfg.top_properties),
        }
    }

    pub fn match_class(&self, reference: &str, cfg: &MatchConfig) -> Vec<MatchCandidate> {
        match_class(&self.lexical, reference, cfg.top_entities)
    }
}
