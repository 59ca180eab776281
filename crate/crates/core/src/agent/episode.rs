use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::io::ledger::{emit_ledger, FreeEnergyLedger};
use crate::io::trace::{EpisodeSummary, EpisodeTrace};
use crate::lab_env::{LabEnv, CHANNELS};

use super::Agent;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub summary: EpisodeSummary,
    pub trace: EpisodeTrace,
}

/// Alternates observe → step → apply until the bench is terminal or
/// `max_steps` actions have been taken, then takes one confirmation reading
/// per channel. Running out of steps is reported as `"truncated"`.
pub fn run_episode(agent: &mut Agent, env: &mut LabEnv, max_steps: usize) -> Result<(EpisodeResult, FreeEnergyLedger)> {
    let mut events = Vec::new();
    while env.terminal().is_none() && events.len() < max_steps {
        let t = events.len() as u64;
        let channel = agent.next_readout().to_string();
        let obs = env.observe(&channel, t)?;
        let (action, event) = agent.step(&obs)?;
        env.apply(&action)?;
        events.push(event);
    }
    let t = events.len() as u64;
    let closing = CHANNELS
        .iter()
        .filter(|c| agent.model().channel(c).is_some())
        .map(|c| env.observe(c, t))
        .collect::<Result<Vec<_>>>()?;
    let ledger = emit_ledger(&events);
    let summary = EpisodeSummary {
        outcome: env.terminal().unwrap_or("truncated").to_string(),
        steps: events.len(),
        first_policy: events.first().map(|e| e.active_policy.clone()),
        spill: env.state.spill,
        elapsed_min: env.state.elapsed_min,
        final_state: env.state.clone(),
        closing: closing.clone(),
        op_counts: agent.op_counts().clone(),
    };
    Ok((EpisodeResult { summary, trace: EpisodeTrace { events, closing } }, ledger))
}
