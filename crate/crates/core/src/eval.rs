//! Benchmark datasets, per-question scoring, and macro metrics.
//!
//! Datasets are JSON Lines: one record per question with its type, gold
//! answers (URI list, boolean, or cardinality matching the type), and
//! optional gold reference spans for the annotation-passthrough parser.
//! Scoring follows the strict no-partial-credit regime for non-selection
//! questions: counts and booleans either match exactly or score zero.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{Catalogs, MatchConfig};
use crate::mp::{answer_question, EngineError, FinalAnswer, Hyperparams};
use crate::question::{
    annotate_gold, annotate_heuristic, interpret, QuestionType, ReferenceSpan,
};
use crate::store::KnowledgeGraph;

/// Gold payload, shaped by the question type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GoldAnswers {
    Boolean(bool),
    Count(u64),
    Uris(BTreeSet<String>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    pub question: String,
    pub qtype: QuestionType,
    pub gold_answers: GoldAnswers,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_spans: Option<Vec<ReferenceSpan>>,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("line {line}: malformed record: {source}")]
    Malformed { line: usize, source: serde_json::Error },
    #[error("line {line}: record {id:?} pairs {qtype:?} with a mismatched gold kind")]
    PayloadKind { line: usize, id: String, qtype: QuestionType },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn kind_matches(qtype: QuestionType, gold: &GoldAnswers) -> bool {
    matches!(
        (qtype, gold),
        (QuestionType::Select, GoldAnswers::Uris(_))
            | (QuestionType::Count, GoldAnswers::Count(_))
            | (QuestionType::Ask, GoldAnswers::Boolean(_))
    )
}

/// Reads a JSON Lines dataset, skipping blank lines, validating that every
/// record's gold payload agrees with its question type.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<DatasetRecord>, DatasetError> {
    read_dataset(BufReader::new(File::open(path)?))
}

pub fn read_dataset(reader: impl BufRead) -> Result<Vec<DatasetRecord>, DatasetError> {
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: DatasetRecord = serde_json::from_str(&line)
            .map_err(|source| DatasetError::Malformed { line: idx + 1, source })?;
        if !kind_matches(record.qtype, &record.gold_answers) {
            return Err(DatasetError::PayloadKind {
                line: idx + 1,
                id: record.id,
                qtype: record.qtype,
            });
        }
        records.push(record);
    }
    Ok(records)
}

/// Precision and recall of one prediction against one record.
///
/// A prediction of the wrong kind scores `(0, 0)`. Selections compare URI
/// sets; an empty prediction against non-empty gold is `(0, 0)`, a non-empty
/// prediction against empty gold is `(0, 1)`, both empty is `(1, 1)`. Counts
/// and booleans are all-or-nothing.
pub fn score_question(pred: &FinalAnswer, record: &DatasetRecord) -> (f64, f64) {
    if pred.qtype != record.qtype {
        return (0.0, 0.0);
    }
    match &record.gold_answers {
        GoldAnswers::Uris(gold) => {
            let predicted: BTreeSet<&str> =
                pred.answers.iter().map(|(uri, _)| uri.as_str()).collect();
            match (predicted.is_empty(), gold.is_empty()) {
                (true, true) => (1.0, 1.0),
                (true, false) => (0.0, 0.0),
                (false, true) => (0.0, 1.0),
                (false, false) => {
                    let hits = predicted.iter().filter(|u| gold.contains(**u)).count() as f64;
                    (hits / predicted.len() as f64, hits / gold.len() as f64)
                }
            }
        }
        GoldAnswers::Count(gold) => {
            if pred.count == Some(*gold) {
                (1.0, 1.0)
            } else {
                (0.0, 0.0)
            }
        }
        GoldAnswers::Boolean(gold) => {
            if pred.boolean == Some(*gold) {
                (1.0, 1.0)
            } else {
                (0.0, 0.0)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParserKind {
    Gold,
    Heuristic,
}

pub struct EvalOptions {
    pub parser: ParserKind,
    pub params: Hyperparams,
    pub match_config: MatchConfig,
    /// Worker threads; `1` evaluates serially.
    pub jobs: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            parser: ParserKind::Gold,
            params: Hyperparams::default(),
            match_config: MatchConfig::default(),
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct QuestionScore {
    pub id: String,
    pub precision: f64,
    pub recall: f64,
    pub answered: bool,
    pub elapsed_seconds: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TimingStats {
    pub min: f64,
    pub median: f64,
    pub mean: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub questions: usize,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub unanswered: usize,
    pub timing_seconds: TimingStats,
    pub per_question: Vec<QuestionScore>,
}

#[derive(Debug, Error)]
enum AnswerFailure {
    #[error("record has no gold annotation spans")]
    MissingSpans,
    #[error(transparent)]
    Question(#[from] crate::question::QuestionError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

fn answer_record(
    kg: &KnowledgeGraph,
    catalogs: &Catalogs,
    record: &DatasetRecord,
    opts: &EvalOptions,
) -> Result<FinalAnswer, AnswerFailure> {
    let model = match opts.parser {
        ParserKind::Gold => {
            let spans = record.gold_spans.as_deref().ok_or(AnswerFailure::MissingSpans)?;
            annotate_gold(record.qtype, spans)?
        }
        ParserKind::Heuristic => annotate_heuristic(&record.question),
    };
    let iq = interpret(kg, catalogs, &model, &opts.match_config);
    Ok(answer_question(kg, &iq, &opts.params)?)
}

/// Answers and scores every record, preserving dataset order.
///
/// Records that cannot be answered (missing spans, structural errors) are
/// reported on standard error and scored against an empty prediction.
pub fn evaluate(
    kg: &KnowledgeGraph,
    catalogs: &Catalogs,
    records: &[DatasetRecord],
    opts: &EvalOptions,
) -> EvalReport {
    let score_one = |record: &DatasetRecord| -> QuestionScore {
        let start = Instant::now();
        let answer = match answer_record(kg, catalogs, record, opts) {
            Ok(a) => a,
            Err(failure) => {
                eprintln!("question {}: {failure}", record.id);
                FinalAnswer::empty(record.qtype)
            }
        };
        let elapsed = start.elapsed().as_secs_f64();
        let (precision, recall) = score_question(&answer, record);
        QuestionScore {
            id: record.id.clone(),
            precision,
            recall,
            answered: !answer.is_empty(),
            elapsed_seconds: elapsed,
        }
    };

    let per_question: Vec<QuestionScore> = if opts.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.jobs)
            .build()
            .expect("worker pool");
        pool.install(|| records.par_iter().map(score_one).collect())
    } else {
        records.iter().map(score_one).collect()
    };

    let n = per_question.len();
    let (macro_precision, macro_recall) = if n == 0 {
        (0.0, 0.0)
    } else {
        (
            per_question.iter().map(|q| q.precision).sum::<f64>() / n as f64,
            per_question.iter().map(|q| q.recall).sum::<f64>() / n as f64,
        )
    };
    let macro_f1 = if macro_precision + macro_recall > 0.0 {
        2.0 * macro_precision * macro_recall / (macro_precision + macro_recall)
    } else {
        0.0
    };
    let unanswered = per_question.iter().filter(|q| !q.answered).count();

    let mut elapsed: Vec<f64> = per_question.iter().map(|q| q.elapsed_seconds).collect();
    elapsed.sort_by(|a, b| a.partial_cmp(b).expect("finite timings"));
    let timing_seconds = if elapsed.is_empty() {
        TimingStats { min: 0.0, median: 0.0, mean: 0.0, max: 0.0 }
    } else {
        let median = if elapsed.len() % 2 == 1 {
            elapsed[elapsed.len() / 2]
        } else {
            (elapsed[elapsed.len() / 2 - 1] + elapsed[elapsed.len() / 2]) / 2.0
        };
        TimingStats {
            min: elapsed[0],
            median,
            mean: elapsed.iter().sum::<f64>() / elapsed.len() as f64,
            max: *elapsed.last().expect("non-empty"),
        }
    };

    EvalReport {
        questions: n,
        macro_precision,
        macro_recall,
        macro_f1,
        unanswered,
        timing_seconds,
        per_question,
    }
}

/// Fixed-width table of the report for terminal output.
pub fn render_table(report: &EvalReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<24} {:>9} {:>9} {:>12}\n",
        "question", "precision", "recall", "seconds"
    ));
    for q in &report.per_question {
        out.push_str(&format!(
            "{:<24} {:>9.4} {:>9.4} {:>12.6}\n",
            q.id, q.precision, q.recall, q.elapsed_seconds
        ));
    }
    out.push_str(&format!(
        "\nquestions {}   unanswered {}\nmacro precision {:.4}   macro recall {:.4}   macro F1 {:.4}\n",
        report.questions,
        report.unanswered,
        report.macro_precision,
        report.macro_recall,
        report.macro_f1
    ));
    out.push_str(&format!(
        "time/question: min {:.6}s  median {:.6}s  mean {:.6}s  max {:.6}s\n",
        report.timing_seconds.min,
        report.timing_seconds.median,
        report.timing_seconds.mean,
        report.timing_seconds.max
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::question::ReferenceRole;

    fn record_json(id: &str, qtype: &str, gold: &str, spans: Option<&str>) -> String {
        let spans = spans.map(|s| format!(",\"gold_spans\":{s}")).unwrap_or_default();
        format!(
            "{{\"id\":\"{id}\",\"question\":\"q\",\"qtype\":\"{qtype}\",\"gold_answers\":{gold}{spans}}}"
        )
    }

    #[test]
    fn reads_all_three_gold_kinds() {
        let data = [
            record_json("q1", "SELECT", "[\"http://x/a\"]", None),
            record_json("q2", "COUNT", "3", None),
            record_json("q3", "ASK", "true", None),
        ]
        .join("\n");
        let records = read_dataset(data.as_bytes()).unwrap();
        assert_eq!(records.len(), 3);
        assert_eq!(
            records[0].gold_answers,
            GoldAnswers::Uris(BTreeSet::from(["http://x/a".to_string()]))
        );
        assert_eq!(records[1].gold_answers, GoldAnswers::Count(3));
        assert_eq!(records[2].gold_answers, GoldAnswers::Boolean(true));
    }

    #[test]
    fn blank_lines_are_skipped() {
        let data = format!("\n{}\n\n", record_json("q1", "ASK", "false", None));
        assert_eq!(read_dataset(data.as_bytes()).unwrap().len(), 1);
    }

    #[test]
    fn malformed_line_is_located() {
        let data = format!("{}\n{{broken", record_json("q1", "COUNT", "1", None));
        match read_dataset(data.as_bytes()) {
            Err(DatasetError::Malformed { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected malformed error, got {:?}", other.map(|r| r.len())),
        }
    }

    #[test]
    fn kind_mismatch_is_rejected() {
        let data = record_json("q9", "COUNT", "[\"http://x/a\"]", None);
        match read_dataset(data.as_bytes()) {
            Err(DatasetError::PayloadKind { line, id, qtype }) => {
                assert_eq!(line, 1);
                assert_eq!(id, "q9");
                assert_eq!(qtype, QuestionType::Count);
            }
            other => panic!("expected payload error, got {:?}", other.map(|r| r.len())),
        }
    }

    #[test]
    fn spans_deserialize_with_roles() {
        let data = record_json(
            "q1",
            "SELECT",
            "[]",
            Some("[{\"text\":\"Dracula\",\"role\":\"E1\"},{\"text\":\"wrote\",\"role\":\"P1\"}]"),
        );
        let records = read_dataset(data.as_bytes()).unwrap();
        let spans = records[0].gold_spans.as_ref().unwrap();
        assert_eq!(spans[0].role, ReferenceRole::E1);
        assert_eq!(spans[1].text, "wrote");
    }

    fn select_record(gold: &[&str]) -> DatasetRecord {
        DatasetRecord {
            id: "q".into(),
            question: "q".into(),
            qtype: QuestionType::Select,
            gold_answers: GoldAnswers::Uris(gold.iter().map(|s| s.to_string()).collect()),
            gold_spans: None,
        }
    }

    fn select_pred(uris: &[&str]) -> FinalAnswer {
        let mut ans = FinalAnswer::empty(QuestionType::Select);
        ans.answers = uris.iter().map(|u| (u.to_string(), 1.0)).collect();
        ans
    }

    #[test]
    fn selection_scoring_counts_overlap() {
        let record = select_record(&["http://x/a"]);
        assert_eq!(score_question(&select_pred(&["http://x/a", "http://x/b"]), &record), (0.5, 1.0));
        assert_eq!(score_question(&select_pred(&[]), &record), (0.0, 0.0));
        assert_eq!(score_question(&select_pred(&["http://x/c"]), &record), (0.0, 0.0));
        assert_eq!(score_question(&select_pred(&["http://x/c"]), &select_record(&[])), (0.0, 1.0));
        assert_eq!(score_question(&select_pred(&[]), &select_record(&[])), (1.0, 1.0));
    }

    #[test]
    fn count_and_ask_score_all_or_nothing() {
        let count_record = DatasetRecord {
            qtype: QuestionType::Count,
            gold_answers: GoldAnswers::Count(3),
            ..select_record(&[])
        };
        let mut pred = FinalAnswer::empty(QuestionType::Count);
        pred.count = Some(3);
        assert_eq!(score_question(&pred, &count_record), (1.0, 1.0));
        pred.count = Some(2);
        assert_eq!(score_question(&pred, &count_record), (0.0, 0.0));

        let ask_record = DatasetRecord {
            qtype: QuestionType::Ask,
            gold_answers: GoldAnswers::Boolean(true),
            ..select_record(&[])
        };
        let mut pred = FinalAnswer::empty(QuestionType::Ask);
        pred.boolean = Some(true);
        assert_eq!(score_question(&pred, &ask_record), (1.0, 1.0));
        pred.boolean = Some(false);
        assert_eq!(score_question(&pred, &ask_record), (0.0, 0.0));
    }

    #[test]
    fn kind_mismatch_scores_zero() {
        let record = select_record(&["http://x/a"]);
        let pred = FinalAnswer::empty(QuestionType::Count);
        assert_eq!(score_question(&pred, &record), (0.0, 0.0));
    }

    fn demo_kg() -> KnowledgeGraph {
        KnowledgeGraph::from_ntriples_str(
            "<http://x/dracula> <http://x/author> <http://x/stoker> .\n\
             <http://x/dracula> <http://www.w3.org/2000/01/rdf-schema#label> \"Dracula\" .\n\
             <http://x/author> <http://www.w3.org/2000/01/rdf-schema#label> \"wrote\" .\n\
             <http://x/stoker> <http://www.w3.org/2000/01/rdf-schema#label> \"Bram Stoker\" .\n",
        )
        .unwrap()
    }

    fn demo_records() -> Vec<DatasetRecord> {
        let spans = Some(vec![
            ReferenceSpan { text: "Dracula".into(), role: ReferenceRole::E1 },
            ReferenceSpan { text: "wrote".into(), role: ReferenceRole::P1 },
        ]);
        vec![
            DatasetRecord {
                id: "hit".into(),
                question: "Who wrote Dracula?".into(),
                qtype: QuestionType::Select,
                gold_answers: GoldAnswers::Uris(BTreeSet::from(["http://x/stoker".to_string()])),
                gold_spans: spans.clone(),
            },
            DatasetRecord {
                id: "miss".into(),
                question: "Who wrote Dracula?".into(),
                qtype: QuestionType::Select,
                gold_answers: GoldAnswers::Uris(BTreeSet::from(["http://x/other".to_string()])),
                gold_spans: spans,
            },
            DatasetRecord {
                id: "no-spans".into(),
                question: "Who wrote Dracula?".into(),
                qtype: QuestionType::Select,
                gold_answers: GoldAnswers::Uris(BTreeSet::from(["http://x/stoker".to_string()])),
                gold_spans: None,
            },
        ]
    }

    #[test]
    fn evaluate_aggregates_macro_metrics() {
        let kg = demo_kg();
        let catalogs = Catalogs::build(&kg);
        let report = evaluate(&kg, &catalogs, &demo_records(), &EvalOptions::default());
        assert_eq!(report.questions, 3);
        let per: Vec<(f64, f64)> =
            report.per_question.iter().map(|q| (q.precision, q.recall)).collect();
        assert_eq!(per, [(1.0, 1.0), (0.0, 0.0), (0.0, 0.0)], "{per:?}");
        assert!((report.macro_precision - 1.0 / 3.0).abs() < 1e-15);
        assert!((report.macro_recall - 1.0 / 3.0).abs() < 1e-15);
        assert!((report.macro_f1 - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(report.unanswered, 1, "only the span-less record goes unanswered");
        assert!(report.timing_seconds.max >= report.timing_seconds.min);
    }

    #[test]
    fn heuristic_parser_answers_from_raw_text() {
        let kg = demo_kg();
        let catalogs = Catalogs::build(&kg);
        let opts = EvalOptions { parser: ParserKind::Heuristic, ..EvalOptions::default() };
        let report = evaluate(&kg, &catalogs, &demo_records()[..1], &opts);
        assert_eq!(report.per_question[0].precision, 1.0);
        assert_eq!(report.per_question[0].recall, 1.0);
    }

    #[test]
    fn parallel_evaluation_preserves_order_and_scores() {
        let kg = demo_kg();
        let catalogs = Catalogs::build(&kg);
        let serial = evaluate(&kg, &catalogs, &demo_records(), &EvalOptions::default());
        let parallel = evaluate(
            &kg,
            &catalogs,
            &demo_records(),
            &EvalOptions { jobs: 3, ..EvalOptions::default() },
        );
        let ids: Vec<&str> = parallel.per_question.iter().map(|q| q.id.as_str()).collect();
        assert_eq!(ids, ["hit", "miss", "no-spans"]);
        assert_eq!(serial.macro_precision, parallel.macro_precision);
        assert_eq!(serial.macro_recall, parallel.macro_recall);
        assert_eq!(serial.unanswered, parallel.unanswered);
    }

    #[test]
    fn table_renders_summary() {
        let kg = demo_kg();
        let catalogs = Catalogs::build(&kg);
        let report = evaluate(&kg, &catalogs, &demo_records(), &EvalOptions::default());
        let table = render_table(&report);
        assert!(table.contains("macro precision 0.3333"));
        assert!(table.contains("unanswered 1"));
        assert!(table.contains("hit"));
    }

    #[test]
    fn empty_dataset_produces_zeroed_report() {
        let kg = demo_kg();
        let catalogs = Catalogs::build(&kg);
        let report = evaluate(&kg, &catalogs, &[], &EvalOptions::default());
        assert_eq!(report.questions, 0);
        assert_eq!(report.macro_f1, 0.0);
        assert_eq!(report.timing_seconds.median, 0.0);
    }
}
