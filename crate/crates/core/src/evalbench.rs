//! Benchmark scoring: binary task selection (TS), flow of thought (FoT) and
//! output (O) per record, split means, trust quadrants, failure
//! enumeration and selection latency.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Split {
    Single,
    Two,
    Three,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Single, Split::Two, Split::Three];

    pub fn task_count(self) -> usize {
        match self {
            Split::Single => 1,
            Split::Two => 2,
            Split::Three => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Single => "Single",
            Split::Two => "Two",
            Split::Three => "Three",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Text,
    Image,
    Audio,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub id: String,
    pub query: String,
    pub expected_tasks: Vec<String>,
    pub split: Split,
    #[serde(default)]
    pub modality_in: Vec<Modality>,
    #[serde(default)]
    pub modality_out: Vec<Modality>,
    #[serde(default)]
    pub output_verdict: Option<u8>,
}

/// A binary score or the distinct error marker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Score {
    Zero,
    One,
    Err,
}

impl Score {
    pub fn from_bool(b: bool) -> Self {
        if b {
            Score::One
        } else {
            Score::Zero
        }
    }

    pub fn value(self) -> Option<f64> {
        match self {
            Score::Zero => Some(0.0),
            Score::One => Some(1.0),
            Score::Err => None,
        }
    }

    pub fn is_err(self) -> bool {
        self == Score::Err
    }
}

impl fmt::Display for Score {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Score::Zero => "0",
            Score::One => "1",
            Score::Err => "Err",
        })
    }
}

impl Serialize for Score {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Score::Zero => s.serialize_u8(0),
            Score::One => s.serialize_u8(1),
            Score::Err => s.serialize_str("Err"),
        }
    }
}

impl<'de> Deserialize<'de> for Score {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match serde_json::Value::deserialize(d)? {
            serde_json::Value::Number(n) if n.as_u64() == Some(0) => Ok(Score::Zero),
            serde_json::Value::Number(n) if n.as_u64() == Some(1) => Ok(Score::One),
            serde_json::Value::String(s) if s == "Err" => Ok(Score::Err),
            other => Err(de::Error::custom(format!("expected 0, 1 or \"Err\", got {other}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ErrMarker {
    Err,
}

/// A value, or the string `"Err"` when that stage failed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OrErr<T> {
    Err(ErrMarker),
    Ok(T),
}

impl<T> OrErr<T> {
    pub fn err() -> Self {
        OrErr::Err(ErrMarker::Err)
    }

    pub fn ok(&self) -> Option<&T> {
        match self {
            OrErr::Ok(v) => Some(v),
            OrErr::Err(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub record_id: String,
    pub selected_tasks: OrErr<Vec<String>>,
    pub plan_order: OrErr<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_ok: Option<Score>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_select_ms: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ScoreRow {
    pub ts: Score,
    pub fot: Score,
    pub o: Score,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Count Err as 0 in means instead of leaving it out.
    pub err_as_zero: bool,
    /// Force FoT to 0 whenever TS is 0.
    pub couple_fot: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { err_as_zero: false, couple_fot: true }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("record {0}: no output verdict")]
    MissingVerdict(String),
    #[error("record {id}: {message}")]
    Schema { id: String, message: String },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("no records")]
    Empty,
}

/// 1 iff the selected and expected task sets are equal.
pub fn score_ts(expected: &[String], selected: &OrErr<Vec<String>>) -> Score {
    match selected {
        OrErr::Err(_) => Score::Err,
        OrErr::Ok(sel) => {
            let a: std::collections::BTreeSet<&String> = expected.iter().collect();
            let b: std::collections::BTreeSet<&String> = sel.iter().collect();
            Score::from_bool(a == b)
        }
    }
}

/// 1 iff the plan orders exactly the expected tasks in the expected order.
pub fn score_fot(expected: &[String], plan_order: &OrErr<Vec<String>>, ts: Score, couple: bool) -> Score {
    match plan_order {
        OrErr::Err(_) => Score::Err,
        OrErr::Ok(_) if couple && ts == Score::Zero => Score::Zero,
        OrErr::Ok(order) => Score::from_bool(order.as_slice() == expected),
    }
}

/// Pass-through of the annotation. An absent verdict is only acceptable
/// on rows that already failed.
pub fn score_o(verdict: Option<Score>, row_is_err: bool, id: &str) -> Result<Score, EvalError> {
    match verdict {
        Some(v) => Ok(v),
        None if row_is_err => Ok(Score::Err),
        None => Err(EvalError::MissingVerdict(id.to_string())),
    }
}

fn verdict_of(v: u8) -> Option<Score> {
    match v {
        0 => Some(Score::Zero),
        1 => Some(Score::One),
        _ => None,
    }
}

impl BenchRecord {
    pub fn validate(&self) -> Result<(), EvalError> {
        let schema = |m: String| EvalError::Schema { id: self.id.clone(), message: m };
        if self.id.is_empty() {
            return Err(schema("empty id".into()));
        }
        if self.expected_tasks.len() != self.split.task_count() {
            return Err(schema(format!(
                "split {} expects {} task(s), found {}",
                self.split.as_str(),
                self.split.task_count(),
                self.expected_tasks.len()
            )));
        }
        if let Some(v) = self.output_verdict {
            verdict_of(v).ok_or_else(|| schema(format!("verdict must be 0 or 1, got {v}")))?;
        }
        Ok(())
    }
}

pub fn score_row(rec: &BenchRecord, out: &RunOutcome, cfg: &EvalConfig) -> Result<ScoreRow, EvalError> {
    let ts = score_ts(&rec.expected_tasks, &out.selected_tasks);
    let fot = score_fot(&rec.expected_tasks, &out.plan_order, ts, cfg.couple_fot);
    let verdict = out.output_ok.or_else(|| rec.output_verdict.and_then(verdict_of));
    let o = score_o(verdict, ts.is_err() || fot.is_err(), &rec.id)?;
    Ok(ScoreRow { ts, fot, o })
}

fn parse_lines<T: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<T>, EvalError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        out.push(serde_json::from_str(t).map_err(|e| EvalError::Parse { line: i + 1, message: e.to_string() })?);
    }
    Ok(out)
}

pub fn load_bench(text: &str) -> Result<Vec<BenchRecord>, EvalError> {
    let recs: Vec<BenchRecord> = parse_lines(text)?;
    if recs.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut ids = std::collections::BTreeSet::new();
    for r in &recs {
        r.validate()?;
        if !ids.insert(r.id.as_str()) {
            return Err(EvalError::Schema { id: r.id.clone(), message: "duplicate id".into() });
        }
    }
    Ok(recs)
}

pub fn load_outcomes(text: &str) -> Result<Vec<RunOutcome>, EvalError> {
    parse_lines(text)
}

/// Pairs outcomes with records by id and scores them.
pub fn score_all(
    records: &[BenchRecord],
    outcomes: &[RunOutcome],
    cfg: &EvalConfig,
) -> Result<Vec<(BenchRecord, ScoreRow, Option<u64>)>, EvalError> {
    let by_id: BTreeMap<&str, &RunOutcome> = outcomes.iter().map(|o| (o.record_id.as_str(), o)).collect();
    records
        .iter()
        .map(|r| {
            let o = by_id
                .get(r.id.as_str())
                .ok_or_else(|| EvalError::Schema { id: r.id.clone(), message: "no outcome".into() })?;
            Ok((r.clone(), score_row(r, o, cfg)?, o.t_select_ms))
        })
        .collect()
}

/// Supplies O for live runs. `None` means no judgment for that record.
pub trait OutputJudge: Sync {
    fn judge(&self, record_id: &str, output: &str) -> Option<Score>;
}

/// O is 1 iff the output contains every listed string for the record.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StringMatchJudge {
    pub expect: BTreeMap<String, Vec<String>>,
}

impl StringMatchJudge {
    pub fn from_json(text: &str) -> Result<Self, EvalError> {
        let expect = serde_json::from_str(text).map_err(|e| EvalError::Parse { line: 0, message: e.to_string() })?;
        Ok(StringMatchJudge { expect })
    }
}

impl OutputJudge for StringMatchJudge {
    fn judge(&self, record_id: &str, output: &str) -> Option<Score> {
        self.expect.get(record_id).map(|needles| Score::from_bool(needles.iter().all(|n| output.contains(n.as_str()))))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricMean {
    pub mean: Option<f64>,
    pub numeric: usize,
    pub errors: usize,
}

impl MetricMean {
    fn of(scores: impl Iterator<Item = Score>, err_as_zero: bool) -> Self {
        let (mut sum, mut n, mut e) = (0.0, 0usize, 0usize);
        for s in scores {
            match s.value() {
                Some(v) => {
                    sum += v;
                    n += 1;
                }
                None => e += 1,
            }
        }
        let denom = if err_as_zero { n + e } else { n };
        MetricMean { mean: (denom > 0).then(|| sum / denom as f64), numeric: n, errors: e }
    }

    pub fn render(&self) -> String {
        self.mean.map_or("-".into(), |m| format!("{m:.2}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub split: String,
    pub rows: usize,
    pub ts: MetricMean,
    pub fot: MetricMean,
    pub o: MetricMean,
}

/// Means per split (in split order, present splits only) and overall.
pub fn aggregate(rows: &[(BenchRecord, ScoreRow)], cfg: &EvalConfig) -> Vec<AggregateRow> {
    assert!(!rows.is_empty(), "aggregate needs rows");
    let make = |label: &str, sel: Vec<&ScoreRow>| AggregateRow {
        split: label.to_string(),
        rows: sel.len(),
        ts: MetricMean::of(sel.iter().map(|r| r.ts), cfg.err_as_zero),
        fot: MetricMean::of(sel.iter().map(|r| r.fot), cfg.err_as_zero),
        o: MetricMean::of(sel.iter().map(|r| r.o), cfg.err_as_zero),
    };
    let mut out = vec![make("Overall", rows.iter().map(|(_, s)| s).collect())];
    for split in Split::ALL {
        let sel: Vec<&ScoreRow> = rows.iter().filter(|(r, _)| r.split == split).map(|(_, s)| s).collect();
        if !sel.is_empty() {
            out.push(make(split.as_str(), sel));
        }
    }
    out
}

/// Justification: true iff TS and FoT are both 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Justification {
    Top,
    Bottom,
    Err,
}

pub fn justification(r: &ScoreRow) -> Justification {
    match (r.ts, r.fot) {
        (Score::Err, _) | (_, Score::Err) => Justification::Err,
        (Score::One, Score::One) => Justification::Top,
        _ => Justification::Bottom,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quadrants {
    pub tt: usize,
    pub tb: usize,
    pub bt: usize,
    pub bb: usize,
    pub err: usize,
}

impl Quadrants {
    pub fn total(&self) -> usize {
        self.tt + self.tb + self.bt + self.bb + self.err
    }
}

pub fn trustworthiness<'a>(rows: impl IntoIterator<Item = &'a ScoreRow>) -> Quadrants {
    let mut q = Quadrants::default();
    for r in rows {
        match (justification(r), r.o) {
            (Justification::Err, _) | (_, Score::Err) => q.err += 1,
            (Justification::Top, Score::One) => q.tt += 1,
            (Justification::Top, Score::Zero) => q.tb += 1,
            (Justification::Bottom, Score::One) => q.bt += 1,
            (Justification::Bottom, Score::Zero) => q.bb += 1,
        }
    }
    q
}

/// Rows with at least one Err, by (justification, output). `err_bottom`
/// holds rows whose justification failed while the output was judged 0,
/// so that every Err row lands in exactly one cell.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureTable {
    pub err_top: usize,
    pub top_err: usize,
    pub bottom_err: usize,
    pub err_err: usize,
    pub err_bottom: usize,
}

impl FailureTable {
    pub fn total(&self) -> usize {
        self.err_top + self.top_err + self.bottom_err + self.err_err + self.err_bottom
    }
}

pub fn failure_table<'a>(rows: impl IntoIterator<Item = &'a ScoreRow>) -> FailureTable {
    let mut f = FailureTable::default();
    for r in rows {
        match (justification(r), r.o) {
            (Justification::Err, Score::One) => f.err_top += 1,
            (Justification::Err, Score::Zero) => f.err_bottom += 1,
            (Justification::Err, Score::Err) => f.err_err += 1,
            (Justification::Top, Score::Err) => f.top_err += 1,
            (Justification::Bottom, Score::Err) => f.bottom_err += 1,
            _ => {}
        }
    }
    f
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyRow {
    pub split: String,
    pub timed_rows: usize,
    pub mean_s: Option<f64>,
}

pub fn latency_summary(rows: &[(BenchRecord, Option<u64>)]) -> Vec<LatencyRow> {
    let make = |label: &str, ms: Vec<u64>| LatencyRow {
        split: label.to_string(),
        timed_rows: ms.len(),
        mean_s: (!ms.is_empty()).then(|| ms.iter().map(|&m| m as f64 / 1000.0).sum::<f64>() / ms.len() as f64),
    };
    let mut out = vec![make("Overall", rows.iter().filter_map(|(_, t)| *t).collect())];
    for split in Split::ALL {
        if rows.iter().any(|(r, _)| r.split == split) {
            out.push(make(
                split.as_str(),
                rows.iter().filter(|(r, _)| r.split == split).filter_map(|(_, t)| *t).collect(),
            ));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: EvalConfig,
    pub records: usize,
    pub aggregate: Vec<AggregateRow>,
    pub quadrants: Quadrants,
    pub failures: FailureTable,
    pub latency: Vec<LatencyRow>,
    pub accounting_ok: bool,
}

pub fn evaluate(scored: &[(BenchRecord, ScoreRow, Option<u64>)], cfg: &EvalConfig) -> EvalReport {
    let rows: Vec<(BenchRecord, ScoreRow)> = scored.iter().map(|(r, s, _)| (r.clone(), *s)).collect();
    let quadrants = trustworthiness(rows.iter().map(|(_, s)| s));
    let failures = failure_table(rows.iter().map(|(_, s)| s));
    let accounting_ok = quadrants.total() == rows.len() && failures.total() == quadrants.err;
    EvalReport {
        config: *cfg,
        records: rows.len(),
        aggregate: aggregate(&rows, cfg),
        quadrants,
        failures,
        latency: latency_summary(&scored.iter().map(|(r, _, t)| (r.clone(), *t)).collect::<Vec<_>>()),
        accounting_ok,
    }
}

pub fn render_eval(r: &EvalReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "records: {}", r.records);
    let _ = writeln!(s, "\n[scores]");
    let _ = writeln!(s, "  {:<8} {:>5} {:>6} {:>6} {:>6}   Err (TS/FoT/O)", "split", "n", "TS", "FoT", "O");
    for a in &r.aggregate {
        let _ = writeln!(
            s,
            "  {:<8} {:>5} {:>6} {:>6} {:>6}   {}/{}/{}",
            a.split,
            a.rows,
            a.ts.render(),
            a.fot.render(),
            a.o.render(),
            a.ts.errors,
            a.fot.errors,
            a.o.errors
        );
    }
    let q = &r.quadrants;
    let _ = writeln!(s, "\n[trustworthiness] (justification, output)");
    let _ = writeln!(s, "  (T,T) {}  (T,F) {}  (F,T) {}  (F,F) {}  Err {}", q.tt, q.tb, q.bt, q.bb, q.err);
    let f = &r.failures;
    let _ = writeln!(s, "\n[failures]");
    let _ = writeln!(s, "  (Err,T) {}", f.err_top);
    let _ = writeln!(s, "  (T,Err) {}", f.top_err);
    let _ = writeln!(s, "  (F,Err) {}", f.bottom_err);
    let _ = writeln!(s, "  (Err,Err) {}", f.err_err);
    if f.err_bottom > 0 {
        let _ = writeln!(s, "  (Err,F) {}", f.err_bottom);
    }
    let _ = writeln!(s, "  total {}", f.total());
    let _ = writeln!(s, "\n[latency to model selection, s]");
    for l in &r.latency {
        let m = l.mean_s.map_or("-".into(), |m| format!("{m:.2}"));
        let _ = writeln!(s, "  {:<8} {:>6} ({} timed)", l.split, m, l.timed_rows);
    }
    let _ = writeln!(s, "\naccounting: {}", if r.accounting_ok { "PASS" } else { "FAIL" });
    let rule = if r.config.err_as_zero { "Err rows count as 0 in means" } else { "Err rows are excluded from means" };
    let _ = writeln!(s, "note: {rule}; FoT coupled to TS: {}", r.config.couple_fot);
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn ts_rules() {
        let e = v(&["asr", "ner"]);
        assert_eq!(score_ts(&e, &OrErr::Ok(v(&["ner", "asr"]))), Score::One);
        assert_eq!(score_ts(&e, &OrErr::Ok(v(&["asr", "ner", "zero_shot_classification"]))), Score::Zero);
        assert_eq!(score_ts(&e, &OrErr::err()), Score::Err);
    }

    #[test]
    fn fot_rules() {
        let e = v(&["asr", "summarise", "text_to_image"]);
        assert_eq!(score_fot(&e, &OrErr::Ok(e.clone()), Score::One, true), Score::One);
        assert_eq!(score_fot(&e, &OrErr::Ok(v(&["summarise", "asr", "text_to_image"])), Score::One, true), Score::Zero);
        assert_eq!(score_fot(&e, &OrErr::Ok(e.clone()), Score::Zero, true), Score::Zero);
        assert_eq!(score_fot(&e, &OrErr::Ok(e.clone()), Score::Zero, false), Score::One);
        assert_eq!(score_fot(&e, &OrErr::err(), Score::One, true), Score::Err);
    }

    #[test]
    fn o_rules() {
        assert_eq!(score_o(Some(Score::One), false, "r"), Ok(Score::One));
        assert_eq!(score_o(Some(Score::Err), false, "r"), Ok(Score::Err));
        assert_eq!(score_o(None, false, "r"), Err(EvalError::MissingVerdict("r".into())));
        assert_eq!(score_o(None, true, "r"), Ok(Score::Err));
    }

    fn rec(split: Split) -> BenchRecord {
        BenchRecord {
            id: "x".into(),
            query: "q".into(),
            expected_tasks: (0..split.task_count()).map(|i| format!("t{i}")).collect(),
            split,
            modality_in: vec![],
            modality_out: vec![],
            output_verdict: None,
        }
    }

    fn row(ts: Score, fot: Score, o: Score) -> ScoreRow {
        ScoreRow { ts, fot, o }
    }

    #[test]
    fn means() {
        let one = row(Score::One, Score::One, Score::One);
        let zero = row(Score::Zero, Score::Zero, Score::Zero);
        let rows: Vec<_> = (0..4).map(|_| (rec(Split::Single), one)).collect();
        let a = aggregate(&rows, &EvalConfig::default());
        assert_eq!(a[0].ts.render(), "1.00");
        let rows = vec![(rec(Split::Single), one), (rec(Split::Two), zero)];
        let a = aggregate(&rows, &EvalConfig::default());
        assert_eq!(
            (a[0].ts.render(), a[0].fot.render(), a[0].o.render()),
            ("0.50".into(), "0.50".into(), "0.50".into())
        );
        assert_eq!(a.len(), 3);

        let rows = vec![(rec(Split::Single), one), (rec(Split::Single), row(Score::Err, Score::Err, Score::Err))];
        assert_eq!(aggregate(&rows, &EvalConfig::default())[0].ts.render(), "1.00");
        let cfg = EvalConfig { err_as_zero: true, ..Default::default() };
        assert_eq!(aggregate(&rows, &cfg)[0].ts.render(), "0.50");
    }

    #[test]
    fn quadrant_examples() {
        let perfect = vec![row(Score::One, Score::One, Score::One); 10];
        assert_eq!(trustworthiness(&perfect), Quadrants { tt: 10, ..Default::default() });
        assert_eq!(trustworthiness(&[row(Score::One, Score::Zero, Score::One)]).bt, 1);
        let f = failure_table(&[row(Score::Err, Score::Err, Score::One), row(Score::One, Score::One, Score::One)]);
        assert_eq!(f, FailureTable { err_top: 1, ..Default::default() });
    }

    #[test]
    fn latency_means() {
        let rows = vec![(rec(Split::Single), Some(1000)), (rec(Split::Single), Some(3000)), (rec(Split::Single), None)];
        let l = latency_summary(&rows);
        assert_eq!(l[0].mean_s, Some(2.0));
        assert_eq!(l[0].timed_rows, 2);
        assert_eq!(latency_summary(&[(rec(Split::Two), Some(4321))])[0].mean_s, Some(4.321));
    }

    #[test]
    fn outcome_serde() {
        let line = r#"{"record_id":"r1","selected_tasks":"Err","plan_order":["a"],"output_ok":1,"t_select_ms":5}"#;
        let o: RunOutcome = serde_json::from_str(line).unwrap();
        assert_eq!(o.selected_tasks, OrErr::err());
        assert_eq!(o.output_ok, Some(Score::One));
        assert_eq!(serde_json::to_string(&o).unwrap(), line);
        assert!(serde_json::from_str::<RunOutcome>(
            r#"{"record_id":"r","selected_tasks":[],"plan_order":[],"output_ok":2}"#
        )
        .is_err());
    }

    #[test]
    fn bench_schema() {
        let mut r = rec(Split::Two);
        r.expected_tasks.pop();
        assert!(r.validate().is_err());
        assert_eq!(load_bench(""), Err(EvalError::Empty));
    }

    #[test]
    fn string_match_judge() {
        let j = StringMatchJudge::from_json(r#"{"r1": ["United States", "LOC"]}"#).unwrap();
        assert_eq!(j.judge("r1", "LOC: United States"), Some(Score::One));
        assert_eq!(j.judge("r1", "LOC: Canada"), Some(Score::Zero));
        assert_eq!(j.judge("r2", "anything"), None);
    }

    fn score() -> impl Strategy<Value = Score> {
        prop_oneof![Just(Score::Zero), Just(Score::One), Just(Score::Err)]
    }

    proptest! {
        #[test]
        fn accounting(rows in proptest::collection::vec((score(), score(), score()), 0..60)) {
            let rows: Vec<ScoreRow> = rows.into_iter().map(|(a, b, c)| row(a, b, c)).collect();
            let q = trustworthiness(&rows);
            prop_assert_eq!(q.total(), rows.len());
            prop_assert_eq!(failure_table(&rows).total(), q.err);
        }
    }
}
