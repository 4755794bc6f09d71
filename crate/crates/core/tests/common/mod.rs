//! Shared helpers for the integration suites: fixture loading, question
//! construction, random single-hop instances, and a dense reference
//! implementation of the propagation pass used as an oracle.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::PathBuf;

use rand::Rng;

use kgqa_core::catalog::MatchCandidate;
use kgqa_core::mp::{message_pass, HopTrace, PropertyCountMode, ACTIVATION_EPS};
use kgqa_core::question::{InterpretedHop, InterpretedQuestion, InterpretedReference, QuestionType};
use kgqa_core::store::KnowledgeGraph;
use kgqa_core::subgraph::{build_activations, extract, Subgraph};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn load_fixture(name: &str) -> String {
    std::fs::read_to_string(fixture_path(name)).expect("fixture file")
}

pub fn reference(kg: &KnowledgeGraph, pairs: &[(&str, f64)]) -> InterpretedReference {
    InterpretedReference {
        text: String::new(),
        candidates: pairs
            .iter()
            .map(|&(uri, confidence)| MatchCandidate {
                term: kg.resolve(uri).expect("fixture uri"),
                confidence,
            })
            .collect(),
        out_of_vocabulary: false,
    }
}

pub fn hop(
    kg: &KnowledgeGraph,
    entities: &[&[(&str, f64)]],
    properties: &[&[(&str, f64)]],
    classes: &[&[(&str, f64)]],
) -> InterpretedHop {
    InterpretedHop {
        entities: entities.iter().map(|p| reference(kg, p)).collect(),
        properties: properties.iter().map(|p| reference(kg, p)).collect(),
        classes: classes.iter().map(|p| reference(kg, p)).collect(),
    }
}

pub fn select(hops: Vec<InterpretedHop>) -> InterpretedQuestion {
    InterpretedQuestion { qtype: QuestionType::Select, hops }
}

/// A single-hop problem expressed purely in terms of URIs, independent of any
/// graph or engine data structure.
#[derive(Debug, Clone)]
pub struct Instance {
    pub triples: Vec<(String, String, String)>,
    pub entity_refs: Vec<Vec<(String, f64)>>,
    pub property_refs: Vec<Vec<(String, f64)>>,
}

impl Instance {
    pub fn to_ntriples(&self) -> String {
        let mut out = String::new();
        for (s, p, o) in &self.triples {
            out.push_str(&format!("<{s}> <{p}> <{o}> .\n"));
        }
        out
    }

    pub fn to_hop(&self, kg: &KnowledgeGraph) -> InterpretedHop {
        let refs = |list: &[Vec<(String, f64)>]| {
            list.iter()
                .map(|pairs| InterpretedReference {
                    text: String::new(),
                    candidates: pairs
                        .iter()
                        .map(|(uri, confidence)| MatchCandidate {
                            term: kg.resolve(uri).expect("instance uri"),
                            confidence: *confidence,
                        })
                        .collect(),
                    out_of_vocabulary: false,
                })
                .collect()
        };
        InterpretedHop {
            entities: refs(&self.entity_refs),
            properties: refs(&self.property_refs),
            classes: Vec::new(),
        }
    }
}

/// Samples a random instance over at most `max_entities` entity URIs,
/// `max_properties` property URIs, and `max_triples` triples. Reference
/// candidates are drawn from the URIs that actually occur, with confidences
/// bounded away from zero so support counting never sits on the epsilon
/// boundary.
pub fn random_instance(
    rng: &mut impl Rng,
    max_entities: usize,
    max_properties: usize,
    max_triples: usize,
) -> Instance {
    let n_entities = rng.gen_range(2..=max_entities.max(2));
    let n_properties = rng.gen_range(1..=max_properties.max(1));
    let n_triples = rng.gen_range(1..=max_triples.max(1));

    let mut triples = Vec::with_capacity(n_triples);
    for _ in 0..n_triples {
        let s = rng.gen_range(0..n_entities);
        let o = rng.gen_range(0..n_entities);
        let p = rng.gen_range(0..n_properties);
        triples.push((
            format!("http://r/e{s}"),
            format!("http://r/p{p}"),
            format!("http://r/e{o}"),
        ));
    }

    let mut entity_pool: BTreeSet<String> = BTreeSet::new();
    let mut property_pool: BTreeSet<String> = BTreeSet::new();
    for (s, p, o) in &triples {
        entity_pool.insert(s.clone());
        entity_pool.insert(o.clone());
        property_pool.insert(p.clone());
    }
    let entity_pool: Vec<String> = entity_pool.into_iter().collect();
    let property_pool: Vec<String> = property_pool.into_iter().collect();

    let sample_refs = |rng: &mut dyn rand::RngCore, pool: &[String]| {
        let refs = rng.gen_range(1..=3usize);
        (0..refs)
            .map(|_| {
                let count = rng.gen_range(1..=3usize.min(pool.len()));
                let mut picked = BTreeSet::new();
                while picked.len() < count {
                    picked.insert(rng.gen_range(0..pool.len()));
                }
                picked
                    .into_iter()
                    .map(|i| (pool[i].clone(), rng.gen_range(0.05..=1.0f64)))
                    .collect()
            })
            .collect()
    };

    let entity_refs = sample_refs(rng, &entity_pool);
    let property_refs = sample_refs(rng, &property_pool);
    Instance { triples, entity_refs, property_refs }
}

/// The engine-side answer to an instance hop: URI-keyed activations plus the
/// set of input-active URIs, or `None` when the hop signals a dead end.
pub fn engine_hop(
    kg: &KnowledgeGraph,
    hop: &InterpretedHop,
    mode: PropertyCountMode,
) -> Option<(BTreeMap<String, f64>, BTreeSet<String>)> {
    let sg = extract(kg, hop, &[]).ok()?;
    let act = build_activations(hop, &sg, None).ok()?;
    let trace = message_pass(&sg, &act, mode).ok()?;
    Some(trace_to_maps(kg, &sg, &trace))
}

pub fn trace_to_maps(
    kg: &KnowledgeGraph,
    sg: &Subgraph,
    trace: &HopTrace,
) -> (BTreeMap<String, f64>, BTreeSet<String>) {
    let mut activations = BTreeMap::new();
    let mut seeds = BTreeSet::new();
    for (local, &id) in sg.local_entities().iter().enumerate() {
        let uri = kg.term(id).to_string();
        activations.insert(uri.clone(), trace.activations[local]);
        if trace.input_active[local] {
            seeds.insert(uri);
        }
    }
    (activations, seeds)
}

/// Dense, name-keyed reference implementation of one propagation pass,
/// written directly from the activation formula with no sparse structures,
/// shared ordering, or code from the library under test.
pub fn oracle_hop(
    instance: &Instance,
    mode: PropertyCountMode,
) -> Option<(BTreeMap<String, f64>, BTreeSet<String>)> {
    let seed_entities: BTreeSet<&str> = instance
        .entity_refs
        .iter()
        .flatten()
        .filter(|(_, c)| *c > 0.0)
        .map(|(u, _)| u.as_str())
        .collect();
    let seed_properties: BTreeSet<&str> = instance
        .property_refs
        .iter()
        .flatten()
        .filter(|(_, c)| *c > 0.0)
        .map(|(u, _)| u.as_str())
        .collect();

    let mut edges: BTreeMap<&str, BTreeSet<(&str, &str)>> = BTreeMap::new();
    let mut universe: BTreeSet<&str> = BTreeSet::new();
    for (s, p, o) in &instance.triples {
        if s == o
            || !seed_properties.contains(p.as_str())
            || !(seed_entities.contains(s.as_str()) || seed_entities.contains(o.as_str()))
        {
            continue;
        }
        let pair = if s < o { (s.as_str(), o.as_str()) } else { (o.as_str(), s.as_str()) };
        edges.entry(p).or_default().insert(pair);
        universe.insert(s);
        universe.insert(o);
    }
    if edges.is_empty() {
        return None;
    }

    let names: Vec<&str> = universe.into_iter().collect();
    let index: HashMap<&str, usize> = names.iter().enumerate().map(|(i, &u)| (u, i)).collect();
    let kept: Vec<&str> = edges.keys().copied().collect();
    let slot: HashMap<&str, usize> = kept.iter().enumerate().map(|(i, &p)| (p, i)).collect();
    let n = names.len();
    let l = instance.entity_refs.len();
    let m = instance.property_refs.len();

    let mut e_rows = vec![vec![0.0f64; n]; l];
    for (row, pairs) in e_rows.iter_mut().zip(&instance.entity_refs) {
        for (uri, conf) in pairs {
            if *conf > 0.0 {
                if let Some(&i) = index.get(uri.as_str()) {
                    row[i] += conf;
                }
            }
        }
    }
    let mut p_rows = vec![vec![0.0f64; kept.len()]; m];
    for (row, pairs) in p_rows.iter_mut().zip(&instance.property_refs) {
        for (uri, conf) in pairs {
            if *conf > 0.0 {
                if let Some(&i) = slot.get(uri.as_str()) {
                    row[i] = *conf;
                }
            }
        }
    }
    if !e_rows.iter().any(|r| r.iter().any(|&v| v > 0.0))
        || !p_rows.iter().any(|r| r.iter().any(|&v| v > 0.0))
    {
        return None;
    }

    let mut w_raw = vec![0.0f64; n];
    let mut n_property = vec![0.0f64; n];
    let mut y_entity = vec![vec![0.0f64; n]; l];
    for p_row in &p_rows {
        let mut combined = vec![vec![0.0f64; n]; n];
        for (i, &p) in kept.iter().enumerate() {
            if p_row[i] == 0.0 {
                continue;
            }
            for &(a, b) in &edges[p] {
                let (a, b) = (index[a], index[b]);
                combined[a][b] += p_row[i];
                combined[b][a] += p_row[i];
            }
        }
        let deliveries: Vec<Vec<f64>> = e_rows
            .iter()
            .map(|row| {
                (0..n).map(|c| (0..n).map(|u| row[u] * combined[u][c]).sum()).collect()
            })
            .collect();
        for c in 0..n {
            let column: f64 = deliveries.iter().map(|row| row[c]).sum();
            w_raw[c] += column;
            match mode {
                PropertyCountMode::PerReference => {
                    if column > ACTIVATION_EPS {
                        n_property[c] += 1.0;
                    }
                }
                PropertyCountMode::PerPair => {
                    for row in &deliveries {
                        if row[c] > ACTIVATION_EPS {
                            n_property[c] += 1.0;
                        }
                    }
                }
            }
        }
        for (acc, row) in y_entity.iter_mut().zip(&deliveries) {
            for (a, v) in acc.iter_mut().zip(row) {
                *a += v;
            }
        }
    }

    let scale = (l + m) as f64;
    let denom = (l + m + 1) as f64;
    let mut activations = BTreeMap::new();
    let mut seeds = BTreeSet::new();
    for (c, &name) in names.iter().enumerate() {
        let w = 2.0 * w_raw[c] / scale;
        let n_e = y_entity.iter().filter(|row| row[c] > ACTIVATION_EPS).count() as f64;
        activations.insert(name.to_string(), (w + n_e + n_property[c]) / denom);
        if e_rows.iter().any(|row| row[c] > 0.0) {
            seeds.insert(name.to_string());
        }
    }
    Some((activations, seeds))
}
