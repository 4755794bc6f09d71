//! Extraction of the per-question local subgraph.
//!
//! Seeds are the entity candidates of a hop (plus any entities carried over
//! from the previous hop) together with its property candidates. The
//! subgraph keeps every triple whose predicate is a seed property and that
//! touches a seed entity on either side, symmetrized into one 0/1 adjacency
//! matrix per property with a zero diagonal. Local entity indices and the
//! property stack are ordered by URI, so the extraction is invariant to
//! triple direction and input order.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

use crate::question::InterpretedHop;
use crate::sparse::SparseMatrix;
use crate::store::{KnowledgeGraph, TermId};

/// Benign reasons a hop produces no answers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum HopSignal {
    #[error("no subgraph: seed entities and properties share no triples")]
    EmptySubgraph,
    #[error("no activation: no candidate survives in the subgraph")]
    NoActivation,
    #[error("hop lacks entity or property references")]
    UnanswerableHop,
}

/// The hop-local graph: URI-ordered entities and one symmetric adjacency
/// matrix per URI-ordered seed property.
pub struct Subgraph {
    local_entities: Vec<TermId>,
    global_to_local: HashMap<TermId, u32>,
    seed_properties: Vec<TermId>,
    property_index: HashMap<TermId, usize>,
    matrices: Vec<SparseMatrix>,
}

impl std::fmt::Debug for Subgraph {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Subgraph")
            .field("entities", &self.local_entities.len())
            .field("properties", &self.seed_properties.len())
            .field("nnz", &self.nnz())
            .finish_non_exhaustive()
    }
}

impl Subgraph {
    pub fn entity_count(&self) -> usize {
        self.local_entities.len()
    }

    pub fn property_count(&self) -> usize {
        self.seed_properties.len()
    }

    pub fn local_entities(&self) -> &[TermId] {
        &self.local_entities
    }

    pub fn seed_properties(&self) -> &[TermId] {
        &self.seed_properties
    }

    pub fn matrices(&self) -> &[SparseMatrix] {
        &self.matrices
    }

    pub fn local_of(&self, entity: TermId) -> Option<u32> {
        self.global_to_local.get(&entity).copied()
    }

    pub fn entity_at(&self, local: usize) -> TermId {
        self.local_entities[local]
    }

    pub fn property_slot(&self, property: TermId) -> Option<usize> {
        self.property_index.get(&property).copied()
    }

    pub fn nnz(&self) -> usize {
        self.matrices.iter().map(SparseMatrix::nnz).sum()
    }

    /// Line-oriented description: entities, properties, then undirected
    /// edges, all in index order.
    pub fn dump(&self, kg: &KnowledgeGraph) -> Vec<String> {
        let mut out = Vec::new();
        out.push(format!(
            "subgraph {} entities, {} properties, {} undirected edges",
            self.entity_count(),
            self.property_count(),
            self.nnz() / 2
        ));
        for (i, &e) in self.local_entities.iter().enumerate() {
            out.push(format!("entity {i} <{}>", kg.term(e)));
        }
        for (slot, &p) in self.seed_properties.iter().enumerate() {
            out.push(format!("property {slot} <{}>", kg.term(p)));
        }
        for (slot, m) in self.matrices.iter().enumerate() {
            for (i, j, _) in m.iter() {
                if i < j {
                    out.push(format!(
                        "edge <{}> <{}> <{}>",
                        kg.term(self.seed_properties[slot]),
                        kg.term(self.local_entities[i as usize]),
                        kg.term(self.local_entities[j as usize]),
                    ));
                }
            }
        }
        out
    }
}

fn seed_terms(refs: &[crate::question::InterpretedReference]) -> BTreeSet<TermId> {
    refs.iter()
        .flat_map(|r| r.candidates.iter())
        .filter(|c| c.confidence > 0.0)
        .map(|c| c.term)
        .collect()
}

/// Extracts the hop subgraph around candidate and carried seeds.
///
/// Class candidates never contribute seeds; they only filter answers later.
pub fn extract(
    kg: &KnowledgeGraph,
    hop: &InterpretedHop,
    carried: &[TermId],
) -> Result<Subgraph, HopSignal> {
    let mut seed_entities = seed_terms(&hop.entities);
    seed_entities.extend(carried.iter().copied());
    let seed_properties = seed_terms(&hop.properties);
    if seed_entities.is_empty() || seed_properties.is_empty() {
        return Err(HopSignal::EmptySubgraph);
    }

    let entity_list: Vec<TermId> = seed_entities.iter().copied().collect();
    let mut edges: BTreeMap<TermId, BTreeSet<(TermId, TermId)>> = BTreeMap::new();
    let mut universe: BTreeSet<TermId> = BTreeSet::new();
    for &p in &seed_properties {
        let mut pairs = BTreeSet::new();
        for t in kg.triples_with(&entity_list, &[p]) {
            if t.subject == t.object {
                continue;
            }
            let pair = if t.subject < t.object {
                (t.subject, t.object)
            } else {
                (t.object, t.subject)
            };
            pairs.insert(pair);
        }
        if pairs.is_empty() {
            continue;
        }
        for &(a, b) in &pairs {
            universe.insert(a);
            universe.insert(b);
        }
        edges.insert(p, pairs);
    }
    if edges.is_empty() {
        return Err(HopSignal::EmptySubgraph);
    }

    let mut local_entities: Vec<TermId> = universe.into_iter().collect();
    local_entities.sort_by(|a, b| kg.term(*a).cmp(kg.term(*b)));
    let global_to_local: HashMap<TermId, u32> =
        local_entities.iter().enumerate().map(|(i, &e)| (e, i as u32)).collect();

    let mut kept: Vec<TermId> = edges.keys().copied().collect();
    kept.sort_by(|a, b| kg.term(*a).cmp(kg.term(*b)));
    let property_index: HashMap<TermId, usize> =
        kept.iter().enumerate().map(|(i, &p)| (p, i)).collect();

    let n = local_entities.len();
    let matrices = kept
        .iter()
        .map(|p| {
            let mut entries: Vec<(u32, u32, f64)> = Vec::new();
            for &(a, b) in &edges[p] {
                let (la, lb) = (global_to_local[&a], global_to_local[&b]);
                entries.push((la, lb, 1.0));
                entries.push((lb, la, 1.0));
            }
            entries.sort_unstable_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
            SparseMatrix::from_sorted_entries(n, &entries)
        })
        .collect();

    Ok(Subgraph {
        local_entities,
        global_to_local,
        seed_properties: kept,
        property_index,
        matrices,
    })
}

/// Activation inputs aligned with a subgraph: one sparse row per entity
/// reference (plus an optional carried-answer row, clamped to `[0, 1]`) and
/// one dense confidence row over the property stack per property reference.
#[derive(Debug)]
pub struct ActivationInputs {
    pub entity_rows: Vec<Vec<(u32, f64)>>,
    pub carry_row: Option<usize>,
    pub property_rows: Vec<Vec<f64>>,
}

/// Projects reference candidates onto the subgraph.
///
/// Candidates absent from the subgraph are silently dropped; when nothing
/// remains on either side the hop signals [`HopSignal::NoActivation`].
pub fn build_activations(
    hop: &InterpretedHop,
    sg: &Subgraph,
    carry: Option<&[(TermId, f64)]>,
) -> Result<ActivationInputs, HopSignal> {
    let mut entity_rows: Vec<Vec<(u32, f64)>> = Vec::new();
    for r in &hop.entities {
        let mut cells: Vec<(u32, f64)> = r
            .candidates
            .iter()
            .filter(|c| c.confidence > 0.0)
            .filter_map(|c| sg.local_of(c.term).map(|l| (l, c.confidence)))
            .collect();
        cells.sort_unstable_by_key(|&(l, _)| l);
        entity_rows.push(cells);
    }
    let mut carry_row = None;
    if let Some(carried) = carry {
        let mut cells: Vec<(u32, f64)> = carried
            .iter()
            .filter(|&&(_, a)| a > 0.0)
            .filter_map(|&(e, a)| sg.local_of(e).map(|l| (l, a.min(1.0))))
            .collect();
        cells.sort_unstable_by_key(|&(l, _)| l);
        carry_row = Some(entity_rows.len());
        entity_rows.push(cells);
    }

    let k = sg.property_count();
    let property_rows: Vec<Vec<f64>> = hop
        .properties
        .iter()
        .map(|r| {
            let mut row = vec![0.0f64; k];
            for c in &r.candidates {
                if c.confidence <= 0.0 {
                    continue;
                }
                if let Some(slot) = sg.property_slot(c.term) {
                    row[slot] = c.confidence;
                }
            }
            row
        })
        .collect();

    let any_entity = entity_rows.iter().any(|r| !r.is_empty());
    let any_property = property_rows.iter().any(|r| r.iter().any(|&v| v > 0.0));
    if !any_entity || !any_property {
        return Err(HopSignal::NoActivation);
    }
    Ok(ActivationInputs { entity_rows, carry_row, property_rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::MatchCandidate;
    use crate::question::{InterpretedHop, InterpretedReference};

    const FIXTURE: &str = r#"
<http://x/monaro> <http://x/assembly> <http://x/broadmeadows> .
<http://x/falcon> <http://x/assembly> <http://x/broadmeadows> .
<http://x/monaro> <http://x/style> <http://x/hardtop> .
<http://x/loop> <http://x/assembly> <http://x/loop> .
<http://x/monaro> <http://www.w3.org/1999/02/22-rdf-syntax-ns#type> <http://x/Automobile> .
"#;

    fn kg() -> KnowledgeGraph {
        KnowledgeGraph::from_ntriples_str(FIXTURE).unwrap()
    }

    fn reference(kg: &KnowledgeGraph, pairs: &[(&str, f64)]) -> InterpretedReference {
        InterpretedReference {
            text: String::new(),
            candidates: pairs
                .iter()
                .map(|&(uri, confidence)| MatchCandidate {
                    term: kg.resolve(uri).unwrap(),
                    confidence,
                })
                .collect(),
            out_of_vocabulary: false,
        }
    }

    fn hop(
        kg: &KnowledgeGraph,
        entities: &[&[(&str, f64)]],
        properties: &[&[(&str, f64)]],
    ) -> InterpretedHop {
        InterpretedHop {
            entities: entities.iter().map(|p| reference(kg, p)).collect(),
            properties: properties.iter().map(|p| reference(kg, p)).collect(),
            classes: Vec::new(),
        }
    }

    #[test]
    fn extracts_symmetric_zero_diagonal_matrices() {
        let kg = kg();
        let h = hop(
            &kg,
            &[&[("http://x/broadmeadows", 1.0)]],
            &[&[("http://x/assembly", 1.0)]],
        );
        let sg = extract(&kg, &h, &[]).unwrap();
        assert_eq!(sg.entity_count(), 3, "monaro, falcon, broadmeadows");
        assert_eq!(sg.property_count(), 1);
        let m = &sg.matrices()[0];
        for (i, j, v) in m.iter() {
            assert_ne!(i, j, "zero diagonal");
            assert_eq!(v, 1.0);
            assert_eq!(m.get(j as usize, i as usize), 1.0, "symmetric");
        }
        assert_eq!(m.nnz(), 4, "two undirected edges; the self-loop is dropped");
    }

    #[test]
    fn local_order_follows_uris() {
        let kg = kg();
        let h = hop(
            &kg,
            &[&[("http://x/broadmeadows", 1.0)]],
            &[&[("http://x/assembly", 1.0)]],
        );
        let sg = extract(&kg, &h, &[]).unwrap();
        let uris: Vec<&str> = sg.local_entities().iter().map(|&e| kg.term(e)).collect();
        let mut sorted = uris.clone();
        sorted.sort();
        assert_eq!(uris, sorted);
    }

    #[test]
    fn triple_direction_is_irrelevant() {
        let forward = KnowledgeGraph::from_ntriples_str(
            "<http://x/a> <http://x/p> <http://x/b> .\n",
        )
        .unwrap();
        let backward = KnowledgeGraph::from_ntriples_str(
            "<http://x/b> <http://x/p> <http://x/a> .\n",
        )
        .unwrap();
        let dump_of = |kg: &KnowledgeGraph| {
            let h = hop(kg, &[&[("http://x/a", 1.0)]], &[&[("http://x/p", 1.0)]]);
            extract(kg, &h, &[]).unwrap().dump(kg)
        };
        assert_eq!(dump_of(&forward), dump_of(&backward));
    }

    #[test]
    fn no_overlap_signals_empty_subgraph() {
        let kg = kg();
        let h = hop(&kg, &[&[("http://x/hardtop", 1.0)]], &[&[("http://x/assembly", 1.0)]]);
        assert_eq!(extract(&kg, &h, &[]).unwrap_err(), HopSignal::EmptySubgraph);
    }

    #[test]
    fn missing_seeds_signal_empty_subgraph() {
        let kg = kg();
        let with_props = hop(&kg, &[], &[&[("http://x/assembly", 1.0)]]);
        assert_eq!(extract(&kg, &with_props, &[]).unwrap_err(), HopSignal::EmptySubgraph);
        let with_entities = hop(&kg, &[&[("http://x/monaro", 1.0)]], &[]);
        assert_eq!(extract(&kg, &with_entities, &[]).unwrap_err(), HopSignal::EmptySubgraph);
    }

    #[test]
    fn class_candidates_do_not_seed() {
        let kg = kg();
        let mut h = hop(&kg, &[], &[&[("http://x/assembly", 1.0)]]);
        h.classes.push(reference(&kg, &[("http://x/Automobile", 1.0)]));
        assert_eq!(extract(&kg, &h, &[]).unwrap_err(), HopSignal::EmptySubgraph);
    }

    #[test]
    fn carried_entities_seed_extraction() {
        let kg = kg();
        let h = hop(&kg, &[], &[&[("http://x/assembly", 1.0)]]);
        let carried = [kg.resolve("http://x/broadmeadows").unwrap()];
        let sg = extract(&kg, &h, &carried).unwrap();
        assert_eq!(sg.entity_count(), 3);
    }

    #[test]
    fn edgeless_property_is_dropped_from_stack() {
        let kg = kg();
        let h = hop(
            &kg,
            &[&[("http://x/broadmeadows", 1.0)]],
            &[&[("http://x/assembly", 0.9), ("http://x/style", 0.5)]],
        );
        let sg = extract(&kg, &h, &[]).unwrap();
        assert_eq!(sg.property_count(), 1, "style has no edge at broadmeadows");
        assert_eq!(kg.term(sg.seed_properties()[0]), "http://x/assembly");
    }

    #[test]
    fn activations_project_candidates_onto_locals() {
        let kg = kg();
        let h = hop(
            &kg,
            &[&[("http://x/broadmeadows", 0.8), ("http://x/hardtop", 0.7)]],
            &[&[("http://x/assembly", 0.9)]],
        );
        let sg = extract(&kg, &h, &[]).unwrap();
        let act = build_activations(&h, &sg, None).unwrap();
        assert_eq!(act.entity_rows.len(), 1);
        let row = &act.entity_rows[0];
        assert_eq!(row.len(), 1, "hardtop is not in this subgraph");
        let broad = sg.local_of(kg.resolve("http://x/broadmeadows").unwrap()).unwrap();
        assert_eq!(row[0], (broad, 0.8));
        assert_eq!(act.property_rows, vec![vec![0.9]]);
        assert_eq!(act.carry_row, None);
    }

    #[test]
    fn carry_row_is_appended_and_clamped() {
        let kg = kg();
        let h = hop(&kg, &[], &[&[("http://x/assembly", 1.0)]]);
        let broad = kg.resolve("http://x/broadmeadows").unwrap();
        let sg = extract(&kg, &h, &[broad]).unwrap();
        let act = build_activations(&h, &sg, Some(&[(broad, 1.2)])).unwrap();
        assert_eq!(act.carry_row, Some(0));
        let local = sg.local_of(broad).unwrap();
        assert_eq!(act.entity_rows[0], vec![(local, 1.0)], "activation clamped to 1");
    }

    #[test]
    fn all_dropped_candidates_signal_no_activation() {
        let kg = kg();
        let anchor = hop(
            &kg,
            &[&[("http://x/broadmeadows", 1.0)]],
            &[&[("http://x/assembly", 1.0)]],
        );
        let sg = extract(&kg, &anchor, &[]).unwrap();
        let stray = hop(&kg, &[&[("http://x/hardtop", 1.0)]], &[&[("http://x/assembly", 1.0)]]);
        assert_eq!(
            build_activations(&stray, &sg, None).unwrap_err(),
            HopSignal::NoActivation,
            "entity candidates outside the subgraph leave no activation"
        );
        let zero = hop(
            &kg,
            &[&[("http://x/broadmeadows", 1.0)]],
            &[&[("http://x/style", 1.0)]],
        );
        assert_eq!(
            build_activations(&zero, &sg, None).unwrap_err(),
            HopSignal::NoActivation,
            "property candidates outside the stack leave no activation"
        );
    }

    #[test]
    fn dump_is_deterministic_and_readable() {
        let kg = kg();
        let h = hop(
            &kg,
            &[&[("http://x/broadmeadows", 1.0)]],
            &[&[("http://x/assembly", 1.0)]],
        );
        let sg = extract(&kg, &h, &[]).unwrap();
        let lines = sg.dump(&kg);
        assert_eq!(lines, extract(&kg, &h, &[]).unwrap().dump(&kg));
        assert!(lines[0].contains("3 entities, 1 properties, 2 undirected edges"));
        assert!(lines.iter().any(|l| l.starts_with("edge <http://x/assembly>")));
    }
}
