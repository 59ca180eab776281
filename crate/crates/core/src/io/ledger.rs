//! Free-energy ledger: per-stage VFE accounting of an episode, plus the
//! operation totals that stand in for energy use.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::agent::MessagePayload;
use crate::io::meter::OpCounts;
use crate::io::trace::TraceEvent;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    /// Agent step, `None` for the baseline row.
    pub step: Option<u64>,
    pub stage: String,
    /// VFE total in nats.
    pub vfe: f64,
    pub explanation: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FreeEnergyLedger {
    pub rows: Vec<LedgerRow>,
    pub totals: OpCounts,
}

impl FreeEnergyLedger {
    pub fn vfe_column(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.vfe).collect()
    }

    /// Four-column table followed by operation totals.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str("| Step | Stage | VFE (nats) | Explanation |\n");
        out.push_str("|------|-------|-----------:|-------------|\n");
        for r in &self.rows {
            let step = r.step.map(|s| s.to_string()).unwrap_or_else(|| "-".to_string());
            let _ = writeln!(out, "| {step} | {} | {:.4} | {} |", r.stage, r.vfe, r.explanation);
        }
        out.push_str("\nOperation counts:\n");
        for (k, v) in &self.totals.0 {
            let _ = writeln!(out, "  {k}: {v}");
        }
        out
    }
}

/// Builds the ledger: a baseline row from the first step's baseline, then one
/// row per step carrying that step's pre-update VFE.
pub fn emit_ledger(events: &[TraceEvent]) -> FreeEnergyLedger {
    let Some(first) = events.first() else {
        return FreeEnergyLedger::default();
    };
    let mut rows = vec![LedgerRow {
        step: None,
        stage: "initial".to_string(),
        vfe: first.baseline,
        explanation: "VFE of the most likely first reading under the prior beliefs".to_string(),
    }];
    for (i, e) in events.iter().enumerate() {
        let surprised = e.messages.iter().any(|m| matches!(m.payload, MessagePayload::PredictionError { .. }));
        let stage = if surprised {
            "surprise".to_string()
        } else if i == 0 {
            "first reading".to_string()
        } else {
            format!("after {}", events[i - 1].action.name)
        };
        let verdict = if surprised {
            "prediction error, replanned"
        } else if e.vfe.total < first.baseline {
            "below baseline"
        } else {
            "within threshold"
        };
        rows.push(LedgerRow {
            step: Some(e.step),
            stage,
            vfe: e.vfe.total,
            explanation: format!(
                "{} = {}; {verdict}; next: {}",
                e.observation.channel, e.observation.outcome, e.action.name
            ),
        });
    }
    let totals = events.last().map(|e| e.op_counts.clone()).unwrap_or_default();
    FreeEnergyLedger { rows, totals }
}
