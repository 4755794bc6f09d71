//! Question answering over knowledge graphs by confidence propagation.
//!
//! A question is modelled as sets of references to entities, properties and
//! classes, one group per hop. Each reference is matched against the graph
//! vocabulary to obtain weighted candidates, a local subgraph around the
//! candidates is extracted as a stack of sparse adjacency matrices, and
//! candidate confidences are propagated along the edges. Aggregated
//! activations rank the answer entities; intermediate answers seed the next
//! hop for chained questions.
//!
//! Modules follow the pipeline order:
//!
//! * [`store`] — dictionary-encoded triple store with lookup indexes,
//!   built from N-Triples files or binary snapshots ([`snapshot`]).
//! * [`catalog`] / [`vectors`] — reference-to-term matching, lexical
//!   (BM25 over character n-grams and stems) and embedding-based (cosine).
//! * [`question`] — question types, reference spans, parsing and
//!   interpretation into ranked candidate sets.
//! * [`subgraph`] — seed-anchored extraction into per-property sparse
//!   adjacency matrices plus activation vectors.
//! * [`mp`] — the propagation engine: property and entity updates,
//!   aggregation, thresholding, class filtering, multi-hop orchestration.
//! * [`eval`] — dataset loading, per-question scoring and macro metrics.

pub mod catalog;
pub mod eval;
pub mod mp;
pub mod ntriples;
pub mod question;
pub mod snapshot;
pub mod sparse;
pub mod store;
pub mod subgraph;
pub mod vectors;
