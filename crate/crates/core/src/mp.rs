//! Confidence propagation over the local subgraph and answer assembly.
//!
//! One pass per hop: every property reference combines the adjacency stack
//! into a single weighted matrix (property update), every entity row is
//! propagated through it (entity update), and three aggregates are blended
//! into per-entity activations — the scaled sum of arriving confidence `W`,
//! the number of supporting entity references `N_E`, and the number of
//! supporting property references `N_P`:
//!
//! `A = (2 * W / (l + m) + N_E + N_P) / (l + m + 1)`
//!
//! with `l` entity rows and `m` property references. `W` is deliberately
//! unbounded — heavily confirmed answers may exceed 1. Activations at or
//! above the hop threshold (seeds excluded) become answers, optionally
//! filtered by class membership; intermediate answers are carried into the
//! next hop as one extra entity row.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::question::{InterpretedHop, InterpretedQuestion, QuestionError, QuestionType};
use crate::sparse::{vec_mat_mul, SparseMatrix};
use crate::store::{KnowledgeGraph, StoreError, TermId};
use crate::subgraph::{build_activations, extract, ActivationInputs, HopSignal, Subgraph};

/// Strict-positivity tolerance for support counting.
pub const ACTIVATION_EPS: f64 = 1e-12;

pub const DEFAULT_THRESHOLD: f64 = 0.5;
pub const DEFAULT_MAX_HOPS: usize = 2;

/// How `N_P` counts property support for an entity.
///
/// `PerReference` adds one per property reference that delivers anything;
/// `PerPair` adds one per (entity row, property reference) pair that does.
/// The readings coincide whenever `l = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PropertyCountMode {
    #[default]
    PerReference,
    PerPair,
}

#[derive(Debug, Clone)]
pub struct Hyperparams {
    pub answer_threshold: f64,
    pub class_filter: bool,
    pub max_hops: usize,
    pub property_count: PropertyCountMode,
    /// Per-hop overrides of `answer_threshold`, keyed by 1-based hop index.
    pub hop_thresholds: BTreeMap<usize, f64>,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            answer_threshold: DEFAULT_THRESHOLD,
            class_filter: true,
            max_hops: DEFAULT_MAX_HOPS,
            property_count: PropertyCountMode::PerReference,
            hop_thresholds: BTreeMap::new(),
        }
    }
}

impl Hyperparams {
    pub fn threshold_for(&self, hop: usize) -> f64 {
        self.hop_thresholds.get(&hop).copied().unwrap_or(self.answer_threshold)
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Question(#[from] QuestionError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Everything computed during one propagation pass.
pub struct HopTrace {
    pub entity_rows: usize,
    pub property_refs: usize,
    /// Per property reference, per entity row: the propagated row `Y`.
    pub per_reference: Vec<Vec<Vec<f64>>>,
    /// Raw column sums of all deliveries, before scaling.
    pub w_raw: Vec<f64>,
    /// `2 * w_raw / (l + m)`.
    pub w: Vec<f64>,
    /// Entity-row accumulation `Y_E`, summed over property references.
    pub y_entity: Vec<Vec<f64>>,
    pub n_entity: Vec<f64>,
    pub n_property: Vec<f64>,
    pub activations: Vec<f64>,
    /// Local positions that received input activation (the seeds).
    pub input_active: Vec<bool>,
}

/// Combines the adjacency stack by property-reference confidences.
pub fn property_update(property_row: &[f64], matrices: &[SparseMatrix]) -> SparseMatrix {
    let refs: Vec<&SparseMatrix> = matrices.iter().collect();
    SparseMatrix::weighted_sum(property_row, &refs)
}

/// Propagates every entity row through the combined matrix.
pub fn entity_update(entity_rows: &[Vec<(u32, f64)>], combined: &SparseMatrix) -> Vec<Vec<f64>> {
    entity_rows.iter().map(|row| vec_mat_mul(row, combined)).collect()
}

/// One full pass over the subgraph.
pub fn message_pass(
    sg: &Subgraph,
    act: &ActivationInputs,
    mode: PropertyCountMode,
) -> Result<HopTrace, HopSignal> {
    let n = sg.entity_count();
    let l = act.entity_rows.len();
    let m = act.property_rows.len();
    if l == 0 || m == 0 || n == 0 {
        return Err(HopSignal::UnanswerableHop);
    }

    let mut w_raw = vec![0.0f64; n];
    let mut n_property = vec![0.0f64; n];
    let mut y_entity = vec![vec![0.0f64; n]; l];
    let mut per_reference = Vec::with_capacity(m);
    for property_row in &act.property_rows {
        let combined = property_update(property_row, sg.matrices());
        let deliveries = entity_update(&act.entity_rows, &combined);
        for c in 0..n {
            let mut column = 0.0;
            for row in &deliveries {
                column += row[c];
            }
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
            for (a, &v) in acc.iter_mut().zip(row) {
                *a += v;
            }
        }
        per_reference.push(deliveries);
    }

    let scale = (l + m) as f64;
    let w: Vec<f64> = w_raw.iter().map(|&v| 2.0 * v / scale).collect();
    let n_entity: Vec<f64> = (0..n)
        .map(|c| y_entity.iter().filter(|row| row[c] > ACTIVATION_EPS).count() as f64)
        .collect();
    let denom = (l + m + 1) as f64;
    let activations: Vec<f64> =
        (0..n).map(|c| (w[c] + n_entity[c] + n_property[c]) / denom).collect();

    let mut input_active = vec![false; n];
    for row in &act.entity_rows {
        for &(local, v) in row {
            if v > 0.0 {
                input_active[local as usize] = true;
            }
        }
    }

    Ok(HopTrace {
        entity_rows: l,
        property_refs: m,
        per_reference,
        w_raw,
        w,
        y_entity,
        n_entity,
        n_property,
        activations,
        input_active,
    })
}

/// Why an entity made it into the answer set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    /// Entity references (row indices, carry row excluded) that delivered.
    pub entity_refs: Vec<usize>,
    /// Whether the carried-answer row delivered.
    pub carried: bool,
    /// Property references that delivered.
    pub property_refs: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnswerEntity {
    pub entity: TermId,
    pub activation: f64,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnswerSet {
    pub answers: Vec<AnswerEntity>,
    pub threshold: f64,
}

impl AnswerSet {
    pub fn entities(&self) -> Vec<TermId> {
        self.answers.iter().map(|a| a.entity).collect()
    }

    pub fn carried(&self) -> Vec<(TermId, f64)> {
        self.answers.iter().map(|a| (a.entity, a.activation)).collect()
    }
}

/// Keeps positive activations at or above the threshold, drops seeds, and
/// ranks by descending activation with URI-order ties (local order is URI
/// order by construction).
pub fn apply_threshold(trace: &HopTrace, sg: &Subgraph, threshold: f64) -> AnswerSet {
    let mut answers = Vec::new();
    for c in 0..sg.entity_count() {
        let a = trace.activations[c];
        if a < threshold || a <= ACTIVATION_EPS || trace.input_active[c] {
            continue;
        }
        let entity_refs: Vec<usize> = (0..trace.entity_rows)
            .filter(|&i| trace.y_entity[i][c] > ACTIVATION_EPS)
            .collect();
        let property_refs: Vec<usize> = (0..trace.property_refs)
            .filter(|&j| {
                trace.per_reference[j].iter().map(|row| row[c]).sum::<f64>() > ACTIVATION_EPS
            })
            .collect();
        answers.push(AnswerEntity {
            entity: sg.entity_at(c),
            activation: a,
            provenance: Provenance { entity_refs, carried: false, property_refs },
        });
    }
    answers.sort_by(|x, y| {
        y.activation.partial_cmp(&x.activation).expect("finite activations")
    });
    AnswerSet { answers, threshold }
}

/// Restricts answers to entities typed with any class candidate. Disabled
/// filtering or an empty candidate set passes the answers through.
pub fn filter_by_class(
    mut set: AnswerSet,
    class_refs: &[crate::question::InterpretedReference],
    kg: &KnowledgeGraph,
    enabled: bool,
) -> AnswerSet {
    if !enabled {
        return set;
    }
    let candidates: BTreeSet<TermId> = class_refs
        .iter()
        .flat_map(|r| r.candidates.iter())
        .map(|c| c.term)
        .collect();
    if candidates.is_empty() {
        return set;
    }
    set.answers.retain(|a| {
        kg.types_of(a.entity)
            .map(|types| types.intersection(&candidates).next().is_some())
            .unwrap_or(false)
    });
    set
}

/// The shape returned for every question, whatever its type.
#[derive(Debug, Clone, Serialize)]
pub struct FinalAnswer {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub qtype: QuestionType,
    /// Ranked `(uri, activation)` pairs.
    pub answers: Vec<(String, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub count: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boolean: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<ExplainReport>,
}

impl FinalAnswer {
    pub fn empty(qtype: QuestionType) -> FinalAnswer {
        FinalAnswer {
            id: None,
            qtype,
            answers: Vec::new(),
            count: (qtype == QuestionType::Count).then_some(0),
            boolean: (qtype == QuestionType::Ask).then_some(false),
            trace: None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.answers.is_empty()
    }
}

/// Readable record of one hop for diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct HopReport {
    pub hop: usize,
    pub threshold: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub signal: Option<String>,
    pub subgraph: Vec<String>,
    pub entities: Vec<ExplainRow>,
    pub deliveries: Vec<Delivery>,
    /// Survivors of thresholding and class filtering, ranked.
    pub answers: Vec<(String, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExplainRow {
    pub uri: String,
    pub w: f64,
    pub entity_support: f64,
    pub property_support: f64,
    pub activation: f64,
    pub seed: bool,
}

/// Confidence mass arriving per property reference.
#[derive(Debug, Clone, Serialize)]
pub struct Delivery {
    pub property_ref: usize,
    pub arrivals: Vec<(String, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExplainReport {
    pub hops: Vec<HopReport>,
}

fn hop_report(
    kg: &KnowledgeGraph,
    sg: &Subgraph,
    trace: &HopTrace,
    threshold: f64,
    set: &AnswerSet,
    hop: usize,
) -> HopReport {
    let entities = (0..sg.entity_count())
        .map(|c| ExplainRow {
            uri: kg.term(sg.entity_at(c)).to_string(),
            w: trace.w[c],
            entity_support: trace.n_entity[c],
            property_support: trace.n_property[c],
            activation: trace.activations[c],
            seed: trace.input_active[c],
        })
        .collect();
    let deliveries = (0..trace.property_refs)
        .map(|j| Delivery {
            property_ref: j,
            arrivals: (0..sg.entity_count())
                .filter_map(|c| {
                    let total: f64 = trace.per_reference[j].iter().map(|row| row[c]).sum();
                    (total > ACTIVATION_EPS)
                        .then(|| (kg.term(sg.entity_at(c)).to_string(), total))
                })
                .collect(),
        })
        .collect();
    HopReport {
        hop,
        threshold,
        signal: None,
        subgraph: sg.dump(kg),
        entities,
        deliveries,
        answers: set
            .answers
            .iter()
            .map(|a| (kg.term(a.entity).to_string(), a.activation))
            .collect(),
    }
}

fn signal_report(hop: usize, threshold: f64, signal: HopSignal) -> HopReport {
    HopReport {
        hop,
        threshold,
        signal: Some(signal.to_string()),
        subgraph: Vec::new(),
        entities: Vec::new(),
        deliveries: Vec::new(),
        answers: Vec::new(),
    }
}

fn aggregate(kg: &KnowledgeGraph, qtype: QuestionType, set: &AnswerSet) -> FinalAnswer {
    let answers: Vec<(String, f64)> =
        set.answers.iter().map(|a| (kg.term(a.entity).to_string(), a.activation)).collect();
    FinalAnswer {
        id: None,
        qtype,
        count: (qtype == QuestionType::Count).then_some(answers.len() as u64),
        boolean: (qtype == QuestionType::Ask).then_some(!answers.is_empty()),
        answers,
        trace: None,
    }
}

fn run(
    kg: &KnowledgeGraph,
    iq: &InterpretedQuestion,
    params: &Hyperparams,
    want_trace: bool,
) -> Result<FinalAnswer, EngineError> {
    iq.validate(params.max_hops)?;
    let mut reports: Vec<HopReport> = Vec::new();
    let mut carry: Option<AnswerSet> = None;
    let mut failed: Option<HopSignal> = None;
    for (i, hop) in iq.hops.iter().enumerate() {
        let hop_no = i + 1;
        let threshold = params.threshold_for(hop_no);
        match run_hop(kg, hop, carry.as_ref(), threshold, params) {
            Ok((set, sg, trace)) => {
                if want_trace {
                    reports.push(hop_report(kg, &sg, &trace, threshold, &set, hop_no));
                }
                carry = Some(set);
            }
            Err(signal) => {
                if want_trace {
                    reports.push(signal_report(hop_no, threshold, signal));
                }
                failed = Some(signal);
                break;
            }
        }
    }
    let mut answer = match (&failed, &carry) {
        (Some(_), _) | (None, None) => FinalAnswer::empty(iq.qtype),
        (None, Some(set)) => aggregate(kg, iq.qtype, set),
    };
    if want_trace {
        answer.trace = Some(ExplainReport { hops: reports });
    }
    Ok(answer)
}

fn run_hop(
    kg: &KnowledgeGraph,
    hop: &InterpretedHop,
    carry: Option<&AnswerSet>,
    threshold: f64,
    params: &Hyperparams,
) -> Result<(AnswerSet, Subgraph, HopTrace), HopSignal> {
    let carried_entities: Vec<TermId> = carry.map(|c| c.entities()).unwrap_or_default();
    let sg = extract(kg, hop, &carried_entities)?;
    let carried_values = carry.map(|c| c.carried());
    let act = build_activations(hop, &sg, carried_values.as_deref())?;
    let trace = message_pass(&sg, &act, params.property_count)?;
    let mut set = apply_threshold(&trace, &sg, threshold);
    if let Some(carry_row) = act.carry_row {
        for a in &mut set.answers {
            let local = sg.local_of(a.entity).expect("answers live in the subgraph");
            a.provenance.carried = trace.y_entity[carry_row][local as usize] > ACTIVATION_EPS;
            a.provenance.entity_refs.retain(|&i| i != carry_row);
        }
    }
    let set = filter_by_class(set, &hop.classes, kg, params.class_filter);
    Ok((set, sg, trace))
}

/// Runs the full multi-hop pipeline; benign dead-ends produce an empty
/// answer rather than an error.
pub fn answer_question(
    kg: &KnowledgeGraph,
    iq: &InterpretedQuestion,
    params: &Hyperparams,
) -> Result<FinalAnswer, EngineError> {
    run(kg, iq, params, false)
}

/// Like [`answer_question`], with a full per-hop trace attached.
pub fn explain(
    kg: &KnowledgeGraph,
    iq: &InterpretedQuestion,
    params: &Hyperparams,
) -> Result<FinalAnswer, EngineError> {
    run(kg, iq, params, true)
}
