//! Tool-use quality metrics and differential state-transition analysis.
//!
//! - TER: pooled fraction of attempted tool calls that were usable and got
//!   a successful response.
//! - TTAC: mean over registry tools of the point-biserial (Pearson)
//!   correlation between "tool used" and "task solved".
//! - TSS: `KL(P || U)` of the empirical tool distribution against uniform,
//!   natural log.
//! - TIU: `TER * (1 + TTAC) / 2 * tanh(TSS)`.
//!
//! Mean rows average the per-group values column by column.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::transcript::{SegmentKind, ToolRegistry, Transcript};

/// Tool usage of one evaluated sample.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct UsageRecord {
    pub sample_id: String,
    pub dataset: String,
    /// Usable (valid and registered) calls per tool.
    pub tool_counts: BTreeMap<String, u32>,
    /// Outcome of every attempted call, in order.
    pub call_outcomes: Vec<bool>,
    pub task_success: bool,
}

impl UsageRecord {
    /// Calls are paired with responses by position; a call succeeds when it
    /// is usable and its response reports success. Calls left without a
    /// response count as failures.
    pub fn from_transcript(t: &Transcript, registry: &ToolRegistry, task_success: bool) -> Self {
        let responses: Vec<_> = t.tool_responses().collect();
        let mut tool_counts = BTreeMap::new();
        let mut call_outcomes = Vec::new();
        for (i, call) in t.tool_calls().enumerate() {
            let usable = call.syntactically_valid && registry.contains(&call.tool_name);
            if usable {
                *tool_counts.entry(call.tool_name.clone()).or_insert(0) += 1;
            }
            let ok = responses.get(i).is_some_and(|r| r.success);
            call_outcomes.push(usable && ok);
        }
        Self {
            sample_id: t.sample_id.clone(),
            dataset: t.dataset.clone(),
            tool_counts,
            call_outcomes,
            task_success,
        }
    }

    pub fn used(&self, tool: &str) -> bool {
        self.tool_counts.get(tool).is_some_and(|&n| n > 0)
    }
}

/// `None` when no call was attempted.
pub fn ter(records: &[UsageRecord]) -> Option<f64> {
    let (ok, total) = records
        .iter()
        .flat_map(|r| &r.call_outcomes)
        .fold((0usize, 0usize), |(ok, n), &o| (ok + usize::from(o), n + 1));
    (total > 0).then(|| ok as f64 / total as f64)
}

/// Pearson correlation of two binary vectors; zero if either is constant.
pub fn binary_correlation(x: &[bool], y: &[bool]) -> f64 {
    let n = x.len() as f64;
    let sx = x.iter().filter(|&&v| v).count() as f64;
    let sy = y.iter().filter(|&&v| v).count() as f64;
    let sxy = x.iter().zip(y).filter(|(a, b)| **a && **b).count() as f64;
    // for 0/1 data sum(x^2) == sum(x)
    let vx = n * sx - sx * sx;
    let vy = n * sy - sy * sy;
    if vx <= 0.0 || vy <= 0.0 {
        return 0.0;
    }
    (n * sxy - sx * sy) / (vx * vy).sqrt()
}

/// `None` for fewer than two records.
pub fn ttac(records: &[UsageRecord], registry: &ToolRegistry) -> Option<f64> {
    if records.len() < 2 {
        return None;
    }
    let success: Vec<bool> = records.iter().map(|r| r.task_success).collect();
    let total: f64 = registry
        .names()
        .iter()
        .map(|tool| {
            let usage: Vec<bool> = records.iter().map(|r| r.used(tool)).collect();
            binary_correlation(&usage, &success)
        })
        .sum();
    Some(total / registry.len() as f64)
}

/// `KL(P || U)` over raw per-tool counts aligned with a K-tool registry.
pub fn kl_from_uniform(counts: &[u64]) -> Option<f64> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return None;
    }
    let k = counts.len() as f64;
    Some(
        counts
            .iter()
            .filter(|&&n| n > 0)
            .map(|&n| {
                let p = n as f64 / total as f64;
                p * (p * k).ln()
            })
            .sum::<f64>()
            .max(0.0),
    )
}

/// `None` when no usable call was made.
pub fn tss(records: &[UsageRecord], registry: &ToolRegistry) -> Option<f64> {
    let counts: Vec<u64> = registry
        .names()
        .iter()
        .map(|tool| {
            records
                .iter()
                .map(|r| u64::from(r.tool_counts.get(tool).copied().unwrap_or(0)))
                .sum()
        })
        .collect();
    kl_from_uniform(&counts)
}

pub fn tiu(ter: f64, ttac: f64, tss: f64) -> f64 {
    ter * (1.0 + ttac) / 2.0 * tss.tanh()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TiuRow {
    pub group: String,
    pub ter: Option<f64>,
    pub ttac: Option<f64>,
    pub tss: Option<f64>,
    pub tiu: Option<f64>,
}

impl TiuRow {
    pub fn from_components(group: impl Into<String>, ter: Option<f64>, ttac: Option<f64>, tss: Option<f64>) -> Self {
        let tiu = match (ter, ttac, tss) {
            (Some(a), Some(b), Some(c)) => Some(tiu(a, b, c)),
            _ => None,
        };
        Self {
            group: group.into(),
            ter,
            ttac,
            tss,
            tiu,
        }
    }

    pub fn from_records(group: impl Into<String>, records: &[UsageRecord], registry: &ToolRegistry) -> Self {
        Self::from_components(group, ter(records), ttac(records, registry), tss(records, registry))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TiuReport {
    pub rows: Vec<TiuRow>,
    pub mean: TiuRow,
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let defined: Vec<f64> = values.flatten().collect();
    (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64)
}

impl TiuReport {
    /// Mean row averages each column over the rows where it is defined.
    pub fn from_rows(rows: Vec<TiuRow>) -> Self {
        let mean = TiuRow {
            group: "Mean".into(),
            ter: mean_of(rows.iter().map(|r| r.ter)),
            ttac: mean_of(rows.iter().map(|r| r.ttac)),
            tss: mean_of(rows.iter().map(|r| r.tss)),
            tiu: mean_of(rows.iter().map(|r| r.tiu)),
        };
        Self { rows, mean }
    }

    /// One row per distinct group key, in sorted key order.
    pub fn from_records<F>(records: &[UsageRecord], registry: &ToolRegistry, group_of: F) -> Self
    where
        F: Fn(&UsageRecord) -> String,
    {
        let mut groups: BTreeMap<String, Vec<UsageRecord>> = BTreeMap::new();
        for r in records {
            groups.entry(group_of(r)).or_default().push(r.clone());
        }
        Self::from_rows(
            groups
                .iter()
                .map(|(g, recs)| TiuRow::from_records(g.clone(), recs, registry))
                .collect(),
        )
    }

    /// Aligned text table; percentages with two decimals, undefined cells as "—".
    pub fn render_text(&self) -> String {
        fn cell(v: Option<f64>, f: impl Fn(f64) -> String) -> String {
            v.map_or_else(|| "—".to_string(), f)
        }
        let fmt_row = |r: &TiuRow| {
            [
                r.group.clone(),
                cell(r.ter, |v| format!("{:.2}", v * 100.0)),
                cell(r.ttac, |v| format!("{v:.3}")),
                cell(r.tss, |v| format!("{v:.2}")),
                cell(r.tiu, |v| format!("{:.2}", v * 100.0)),
            ]
        };
        let header = ["Group", "TER (%)", "TTAC", "TSS", "TIU (%)"].map(String::from);
        let mut table = vec![header];
        table.extend(self.rows.iter().map(fmt_row));
        table.push(fmt_row(&self.mean));

        let widths: Vec<usize> = (0..5)
            .map(|c| table.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for row in &table {
            let line: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(c, s)| {
                    let pad = widths[c] - s.chars().count();
                    if c == 0 {
                        format!("{s}{}", " ".repeat(pad))
                    } else {
                        format!("{}{s}", " ".repeat(pad))
                    }
                })
                .collect();
            let _ = writeln!(out, "{}", line.join("  "));
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FlowState {
    Reasoning,
    ToolCall,
    ToolResponseSuccess,
    ToolResponseFailure,
    Perception,
    Terminal,
    Correct,
    Incorrect,
}

impl fmt::Display for FlowState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FlowState::Reasoning => "Reasoning",
            FlowState::ToolCall => "Tool_Call",
            FlowState::ToolResponseSuccess => "Tool_Response_Success",
            FlowState::ToolResponseFailure => "Tool_Response_Failure",
            FlowState::Perception => "Perception",
            FlowState::Terminal => "Terminal",
            FlowState::Correct => "Correct",
            FlowState::Incorrect => "Incorrect",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Outcome {
    Correct,
    Incorrect,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Correct => "Correct",
            Outcome::Incorrect => "Incorrect",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TransitionKey {
    pub source: FlowState,
    pub target: FlowState,
    pub outcome: Outcome,
}

/// Mapped states of a transcript, noise skipped.
pub fn state_sequence(t: &Transcript) -> Vec<FlowState> {
    t.segments
        .iter()
        .filter_map(|s| match s.kind {
            SegmentKind::Reasoning => Some(FlowState::Reasoning),
            SegmentKind::ToolCall => Some(FlowState::ToolCall),
            SegmentKind::ToolResponse => Some(if s.tool_response().is_some_and(|r| r.success) {
                FlowState::ToolResponseSuccess
            } else {
                FlowState::ToolResponseFailure
            }),
            SegmentKind::Perception => Some(FlowState::Perception),
            SegmentKind::Answer => Some(FlowState::Terminal),
            SegmentKind::Noise => None,
        })
        .collect()
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionTable {
    counts: BTreeMap<TransitionKey, u64>,
}

impl TransitionTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds every adjacent pair of mapped states, then an edge from the last
    /// state to the outcome. A transcript without an answer is always
    /// incorrect.
    pub fn add_transcript(&mut self, t: &Transcript, correct: bool) {
        let states = state_sequence(t);
        let outcome = if correct && t.has_answer() {
            Outcome::Correct
        } else {
            Outcome::Incorrect
        };
        let Some(&last) = states.last() else {
            return;
        };
        for pair in states.windows(2) {
            self.increment(pair[0], pair[1], outcome, 1);
        }
        let end = match outcome {
            Outcome::Correct => FlowState::Correct,
            Outcome::Incorrect => FlowState::Incorrect,
        };
        self.increment(last, end, outcome, 1);
    }

    pub fn increment(&mut self, source: FlowState, target: FlowState, outcome: Outcome, by: u64) {
        *self
            .counts
            .entry(TransitionKey {
                source,
                target,
                outcome,
            })
            .or_insert(0) += by;
    }

    pub fn get(&self, source: FlowState, target: FlowState, outcome: Outcome) -> u64 {
        self.counts
            .get(&TransitionKey {
                source,
                target,
                outcome,
            })
            .copied()
            .unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&TransitionKey, &u64)> {
        self.counts.iter()
    }

    pub fn merge(&mut self, other: &TransitionTable) {
        for (k, v) in &other.counts {
            *self.counts.entry(*k).or_insert(0) += v;
        }
    }
}

pub fn transition_table<'a, I>(corpus: I) -> TransitionTable
where
    I: IntoIterator<Item = (&'a Transcript, bool)>,
{
    let mut table = TransitionTable::new();
    for (t, correct) in corpus {
        table.add_transcript(t, correct);
    }
    table
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionDelta {
    pub key: TransitionKey,
    pub count_a: u64,
    pub count_b: u64,
    pub delta: i64,
}

/// Keys whose count changed by at least `cutoff` (and by a nonzero amount)
/// going from `a` to `b`. Correct-outcome entries come first, then
/// incorrect; each block is sorted by descending `|delta|`.
pub fn transition_diff(a: &TransitionTable, b: &TransitionTable, cutoff: u64) -> Vec<TransitionDelta> {
    let mut keys: Vec<TransitionKey> = a.counts.keys().chain(b.counts.keys()).copied().collect();
    keys.sort();
    keys.dedup();
    let mut out: Vec<TransitionDelta> = keys
        .into_iter()
        .map(|key| {
            let count_a = a.counts.get(&key).copied().unwrap_or(0);
            let count_b = b.counts.get(&key).copied().unwrap_or(0);
            TransitionDelta {
                key,
                count_a,
                count_b,
                delta: count_b as i64 - count_a as i64,
            }
        })
        .filter(|d| d.delta != 0 && d.delta.unsigned_abs() >= cutoff)
        .collect();
    out.sort_by(|x, y| {
        x.key
            .outcome
            .cmp(&y.key.outcome)
            .then(y.delta.unsigned_abs().cmp(&x.delta.unsigned_abs()))
            .then(x.key.cmp(&y.key))
    });
    out
}

pub const DIFF_CSV_HEADER: &str = "source,target,outcome,count_a,count_b,delta";

pub fn diff_to_csv(diff: &[TransitionDelta]) -> String {
    let mut out = String::from(DIFF_CSV_HEADER);
    out.push('\n');
    for d in diff {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            d.key.source, d.key.target, d.key.outcome, d.count_a, d.count_b, d.delta
        );
    }
    out
}
