//! Append-only episode trace and its line-delimited JSON form.
//!
//! Layout: one header object, one object per agent step, and an optional
//! trailing summary object. Keys appear in declaration order and maps are
//! ordered, so equal inputs serialize to equal bytes.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::agent::Message;
use crate::error::{Error, Result};
use crate::inference::VfeReport;
use crate::io::meter::OpCounts;
use crate::lab_env::LabState;
use crate::model::{Action, Categorical, Observation};
use crate::planning::EfeBreakdown;

pub const TRACE_SCHEMA: &str = "aif-trace/1";

/// Everything the agent knew and did at one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub step: u64,
    pub observation: Observation,
    /// `-ln` of the observation's predicted probability.
    pub surprise: f64,
    /// Rolling VFE baseline the step was compared against.
    pub baseline: f64,
    /// `vfe.total - baseline`.
    pub prediction_error: f64,
    /// Posterior after the update.
    pub belief: Categorical,
    pub messages: Vec<Message>,
    pub efe_table: Vec<EfeBreakdown>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub vetoed: Vec<String>,
    /// Set only when the candidates were re-scored at this step.
    pub selected_policy: Option<String>,
    pub active_policy: String,
    pub action: Action,
    /// Free energy of the predicted belief against the observation.
    pub vfe: VfeReport,
    /// Free energy of the updated belief.
    pub posterior_vfe: VfeReport,
    pub op_counts: OpCounts,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provider_error: Option<String>,
}

/// Steps plus the confirmation readings taken after the last action.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub events: Vec<TraceEvent>,
    pub closing: Vec<Observation>,
}

impl EpisodeTrace {
    /// Observations in time order, closing readings last.
    pub fn observations(&self) -> impl Iterator<Item = &Observation> {
        self.events.iter().map(|e| &e.observation).chain(&self.closing)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub schema: String,
    pub scenario: String,
    pub seed: u64,
}

impl TraceHeader {
    pub fn new(scenario: impl Into<String>, seed: u64) -> Self {
        Self { schema: TRACE_SCHEMA.to_string(), scenario: scenario.into(), seed }
    }
}

/// Outcome of a finished (or truncated) episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    /// Terminal label from the bench, or `"truncated"`.
    pub outcome: String,
    pub steps: usize,
    /// Policy executed at the first step.
    pub first_policy: Option<String>,
    pub spill: bool,
    pub elapsed_min: f64,
    pub final_state: LabState,
    pub closing: Vec<Observation>,
    pub op_counts: OpCounts,
}

#[derive(Serialize, Deserialize)]
struct SummaryLine {
    summary: EpisodeSummary,
}

/// Renders a trace as JSONL text.
pub fn emit_trace(header: &TraceHeader, events: &[TraceEvent], summary: Option<&EpisodeSummary>) -> String {
    let mut out = String::new();
    let mut push = |line: String| {
        out.push_str(&line);
        out.push('\n');
    };
    // serializing plain data structs cannot fail
    push(serde_json::to_string(header).expect("header serializes"));
    for e in events {
        push(serde_json::to_string(e).expect("event serializes"));
    }
    if let Some(s) = summary {
        push(serde_json::to_string(&SummaryLine { summary: s.clone() }).expect("summary serializes"));
    }
    out
}

pub fn write_trace(
    w: &mut impl Write,
    header: &TraceHeader,
    events: &[TraceEvent],
    summary: Option<&EpisodeSummary>,
) -> std::io::Result<()> {
    w.write_all(emit_trace(header, events, summary).as_bytes())
}

/// Parses JSONL produced by [`emit_trace`].
pub fn parse_trace(text: &str) -> Result<(TraceHeader, Vec<TraceEvent>, Option<EpisodeSummary>)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let first = lines.next().ok_or_else(|| Error::Config("empty trace".to_string()))?;
    let header: TraceHeader = serde_json::from_str(first).map_err(|e| Error::Config(format!("trace header: {e}")))?;
    if header.schema != TRACE_SCHEMA {
        return Err(Error::Config(format!("unsupported trace schema '{}'", header.schema)));
    }
    let mut events = Vec::new();
    let mut summary = None;
    for (i, line) in lines.enumerate() {
        if summary.is_some() {
            return Err(Error::Config(format!("trace line {}: data after summary", i + 2)));
        }
        if line.starts_with("{\"summary\"") {
            let s: SummaryLine =
                serde_json::from_str(line).map_err(|e| Error::Config(format!("trace line {}: {e}", i + 2)))?;
            summary = Some(s.summary);
        } else {
            events.push(serde_json::from_str(line).map_err(|e| Error::Config(format!("trace line {}: {e}", i + 2)))?);
        }
    }
    Ok((header, events, summary))
}
