//! Dictionary-encoded triple store with bidirectional lookup indexes.
//!
//! Terms (URIs) are interned to dense [`TermId`]s in first-seen order, which
//! keeps loading deterministic for a given input. Triples are held sorted by
//! `(predicate, subject, object)` and deduplicated; secondary indexes map a
//! predicate, or an (entity, predicate) pair in either direction, to triple
//! positions. Human-readable labels live in a side table and never become
//! graph edges.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use thiserror::Error;

use crate::ntriples::{self, Statement};

pub const RDFS_LABEL: &str = "http://www.w3.org/2000/01/rdf-schema#label";
pub const RDF_TYPE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";

/// Dense handle for an interned URI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TermId(pub u32);

impl TermId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for TermId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub subject: TermId,
    pub predicate: TermId,
    pub object: TermId,
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unknown term: {0}")]
    UnknownUri(String),
    #[error("unknown term id {0}")]
    UnknownId(TermId),
    #[error("snapshot: {0}")]
    Snapshot(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Which predicates are interpreted as labels and type assertions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphConfig {
    pub label_predicate: String,
    pub type_predicate: String,
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig {
            label_predicate: RDFS_LABEL.to_string(),
            type_predicate: RDF_TYPE.to_string(),
        }
    }
}

pub const ROLE_ENTITY: u8 = 1;
pub const ROLE_PROPERTY: u8 = 2;
pub const ROLE_CLASS: u8 = 4;

/// Incremental construction with first-seen id assignment.
pub struct GraphBuilder {
    config: GraphConfig,
    terms: Vec<String>,
    ids: HashMap<String, TermId>,
    triples: Vec<Triple>,
    labels: Vec<(TermId, String)>,
}

impl GraphBuilder {
    pub fn new(config: GraphConfig) -> GraphBuilder {
        GraphBuilder {
            config,
            terms: Vec::new(),
            ids: HashMap::new(),
            triples: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn intern(&mut self, uri: &str) -> TermId {
        if let Some(&id) = self.ids.get(uri) {
            return id;
        }
        let id = TermId(u32::try_from(self.terms.len()).expect("term table overflow"));
        self.terms.push(uri.to_string());
        self.ids.insert(uri.to_string(), id);
        id
    }

    pub fn add_triple(&mut self, subject: &str, predicate: &str, object: &str) {
        let s = self.intern(subject);
        let p = self.intern(predicate);
        let o = self.intern(object);
        self.triples.push(Triple { subject: s, predicate: p, object: o });
    }

    /// Attaches a label; empty labels are dropped and the subject is still
    /// interned so label-only terms remain resolvable.
    pub fn add_label(&mut self, term: &str, label: &str) {
        let id = self.intern(term);
        if !label.is_empty() {
            self.labels.push((id, label.to_string()));
        }
    }

    pub fn build(self) -> KnowledgeGraph {
        let mut triples = self.triples;
        triples.sort_unstable_by_key(|t| (t.predicate, t.subject, t.object));
        triples.dedup();

        let mut labels: Vec<Vec<String>> = vec![Vec::new(); self.terms.len()];
        for (id, label) in self.labels {
            labels[id.index()].push(label);
        }

        KnowledgeGraph::assemble(self.config, self.terms, self.ids, triples, labels)
    }
}

/// Immutable dictionary-encoded graph.
pub struct KnowledgeGraph {
    config: GraphConfig,
    terms: Vec<String>,
    ids: HashMap<String, TermId>,
    triples: Vec<Triple>,
    labels: Vec<Vec<String>>,
    roles: Vec<u8>,
    type_property: Option<TermId>,
    by_predicate: HashMap<TermId, Vec<u32>>,
    by_subject_predicate: HashMap<(TermId, TermId), Vec<u32>>,
    by_object_predicate: HashMap<(TermId, TermId), Vec<u32>>,
}

impl fmt::Debug for KnowledgeGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KnowledgeGraph")
            .field("terms", &self.terms.len())
            .field("triples", &self.triples.len())
            .finish_non_exhaustive()
    }
}

impl KnowledgeGraph {
    fn assemble(
        config: GraphConfig,
        terms: Vec<String>,
        ids: HashMap<String, TermId>,
        triples: Vec<Triple>,
        labels: Vec<Vec<String>>,
    ) -> KnowledgeGraph {
        let type_property = ids.get(&config.type_predicate).copied();

        let mut roles = vec![0u8; terms.len()];
        let mut by_predicate: HashMap<TermId, Vec<u32>> = HashMap::new();
        let mut by_subject_predicate: HashMap<(TermId, TermId), Vec<u32>> = HashMap::new();
        let mut by_object_predicate: HashMap<(TermId, TermId), Vec<u32>> = HashMap::new();
        for (idx, t) in triples.iter().enumerate() {
            let idx = idx as u32;
            roles[t.subject.index()] |= ROLE_ENTITY;
            roles[t.object.index()] |= ROLE_ENTITY;
            roles[t.predicate.index()] |= ROLE_PROPERTY;
            if Some(t.predicate) == type_property {
                roles[t.object.index()] |= ROLE_CLASS;
            }
            by_predicate.entry(t.predicate).or_default().push(idx);
            by_subject_predicate.entry((t.subject, t.predicate)).or_default().push(idx);
            by_object_predicate.entry((t.object, t.predicate)).or_default().push(idx);
        }

        KnowledgeGraph {
            config,
            terms,
            ids,
            triples,
            labels,
            roles,
            type_property,
            by_predicate,
            by_subject_predicate,
            by_object_predicate,
        }
    }

    /// Parses an N-Triples file. URI-object triples become edges; literal
    /// objects are kept only under the label predicate, all other literal
    /// statements are dropped without interning their subjects.
    pub fn load_ntriples(path: impl AsRef<Path>) -> Result<KnowledgeGraph, StoreError> {
        Self::load_ntriples_with(path, GraphConfig::default())
    }

    pub fn load_ntriples_with(
        path: impl AsRef<Path>,
        config: GraphConfig,
    ) -> Result<KnowledgeGraph, StoreError> {
        let file = File::open(path)?;
        Self::from_ntriples_reader(BufReader::new(file), config)
    }

    pub fn from_ntriples_reader(
        reader: impl BufRead,
        config: GraphConfig,
    ) -> Result<KnowledgeGraph, StoreError> {
        let mut builder = GraphBuilder::new(config);
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            match ntriples::parse_line(&line, lineno + 1)? {
                None => {}
                Some(Statement::Uri { subject, predicate, object }) => {
                    builder.add_triple(subject, predicate, object);
                }
                Some(Statement::Literal { subject, predicate, value }) => {
                    if predicate == builder.config.label_predicate {
                        builder.add_label(subject, &value);
                    }
                }
            }
        }
        Ok(builder.build())
    }

    pub fn from_ntriples_str(text: &str) -> Result<KnowledgeGraph, StoreError> {
        Self::from_ntriples_reader(text.as_bytes(), GraphConfig::default())
    }

    /// Serializes the graph back to N-Triples: every edge, then every label.
    pub fn write_ntriples(&self, mut out: impl Write) -> io::Result<()> {
        for t in &self.triples {
            ntriples::write_uri_triple(
                &mut out,
                self.term(t.subject),
                self.term(t.predicate),
                self.term(t.object),
            )?;
        }
        for (idx, labels) in self.labels.iter().enumerate() {
            for label in labels {
                ntriples::write_literal_triple(
                    &mut out,
                    &self.terms[idx],
                    &self.config.label_predicate,
                    label,
                )?;
            }
        }
        Ok(())
    }

    pub fn config(&self) -> &GraphConfig {
        &self.config
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    pub fn triple_count(&self) -> usize {
        self.triples.len()
    }

    /// All triples, sorted by `(predicate, subject, object)`.
    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn resolve(&self, uri: &str) -> Result<TermId, StoreError> {
        self.ids.get(uri).copied().ok_or_else(|| StoreError::UnknownUri(uri.to_string()))
    }

    pub fn uri_of(&self, id: TermId) -> Result<&str, StoreError> {
        self.terms.get(id.index()).map(String::as_str).ok_or(StoreError::UnknownId(id))
    }

    /// Like [`uri_of`](Self::uri_of) for ids known to be valid.
    pub fn term(&self, id: TermId) -> &str {
        &self.terms[id.index()]
    }

    pub fn term_ids(&self) -> impl Iterator<Item = TermId> + '_ {
        (0..self.terms.len() as u32).map(TermId)
    }

    pub fn labels_of(&self, id: TermId) -> &[String] {
        self.labels.get(id.index()).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn labeled_term_count(&self) -> usize {
        self.labels.iter().filter(|l| !l.is_empty()).count()
    }

    pub fn role(&self, id: TermId) -> u8 {
        self.roles.get(id.index()).copied().unwrap_or(0)
    }

    pub fn is_entity(&self, id: TermId) -> bool {
        self.role(id) & ROLE_ENTITY != 0
    }

    pub fn is_property(&self, id: TermId) -> bool {
        self.role(id) & ROLE_PROPERTY != 0
    }

    pub fn is_class(&self, id: TermId) -> bool {
        self.role(id) & ROLE_CLASS != 0
    }

    pub fn entity_count(&self) -> usize {
        self.roles.iter().filter(|&&r| r & ROLE_ENTITY != 0).count()
    }

    pub fn property_count(&self) -> usize {
        self.roles.iter().filter(|&&r| r & ROLE_PROPERTY != 0).count()
    }

    /// Class terms in ascending id order.
    pub fn classes(&self) -> Vec<TermId> {
        (0..self.terms.len() as u32).map(TermId).filter(|&id| self.is_class(id)).collect()
    }

    pub fn type_property(&self) -> Option<TermId> {
        self.type_property
    }

    /// Triples whose predicate is in `properties` and whose subject or
    /// object is in `entities`, sorted by `(predicate, subject, object)`.
    pub fn triples_with(&self, entities: &[TermId], properties: &[TermId]) -> Vec<Triple> {
        let mut positions: Vec<u32> = Vec::new();
        for &p in properties {
            for &e in entities {
                if let Some(hits) = self.by_subject_predicate.get(&(e, p)) {
                    positions.extend_from_slice(hits);
                }
                if let Some(hits) = self.by_object_predicate.get(&(e, p)) {
                    positions.extend_from_slice(hits);
                }
            }
        }
        positions.sort_unstable();
        positions.dedup();
        positions.iter().map(|&i| self.triples[i as usize]).collect()
    }

    /// Triples under one predicate touching one entity on either side.
    pub fn triples_about(&self, entity: TermId, property: TermId) -> Vec<Triple> {
        self.triples_with(&[entity], &[property])
    }

    pub fn triples_of_predicate(&self, property: TermId) -> &[u32] {
        self.by_predicate.get(&property).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Classes the entity is asserted to belong to, via the type predicate.
    pub fn types_of(&self, entity: TermId) -> Result<BTreeSet<TermId>, StoreError> {
        if entity.index() >= self.terms.len() {
            return Err(StoreError::UnknownId(entity));
        }
        let mut out = BTreeSet::new();
        if let Some(tp) = self.type_property {
            if let Some(hits) = self.by_subject_predicate.get(&(entity, tp)) {
                for &i in hits {
                    out.insert(self.triples[i as usize].object);
                }
            }
        }
        Ok(out)
    }

    /// Entities carrying at least one of the given types.
    pub fn instances_of(&self, classes: &HashSet<TermId>) -> BTreeSet<TermId> {
        let mut out = BTreeSet::new();
        if let Some(tp) = self.type_property {
            for &c in classes {
                if let Some(hits) = self.by_object_predicate.get(&(c, tp)) {
                    for &i in hits {
                        out.insert(self.triples[i as usize].subject);
                    }
                }
            }
        }
        out
    }

    pub(crate) fn from_parts(
        config: GraphConfig,
        terms: Vec<String>,
        triples: Vec<Triple>,
        labels: Vec<Vec<String>>,
    ) -> KnowledgeGraph {
        let ids = terms
            .iter()
            .enumerate()
            .map(|(i, uri)| (uri.clone(), TermId(i as u32)))
            .collect();
        KnowledgeGraph::assemble(config, terms, ids, triples, labels)
    }
}
