use serde::{Deserialize, Serialize};

use crate::io::trace::EpisodeTrace;
use crate::world_model::{apply_to_model, observed_titration_effect, ParameterChange};

use super::{Agent, Level};

/// Refinement applied at one level after an episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelUpdate {
    pub level: Level,
    /// Prediction error (nats above baseline) that reached this level.
    pub cumulative_error: f64,
    /// Parameters changed; empty when the episode held no usable evidence.
    pub changes: Vec<ParameterChange>,
}

/// Cumulative above-baseline error reaching each level: a channel's error
/// counts at its owning level and every level above it.
fn cumulative_errors(agent: &Agent, episode: &EpisodeTrace) -> [(Level, f64); 3] {
    let mut acc = [(Level::Sensorimotor, 0.0), (Level::Planner, 0.0), (Level::Executive, 0.0)];
    for e in &episode.events {
        let excess = e.prediction_error.max(0.0);
        for lvl in agent.config.owner(&e.observation.channel).and_above() {
            for slot in acc.iter_mut().filter(|(l, _)| l == lvl) {
                slot.1 += excess;
            }
        }
    }
    acc
}

fn sensorimotor_change(agent: &Agent, episode: &EpisodeTrace) -> Option<ParameterChange> {
    let rule = agent.config.refinement.sensorimotor.as_ref()?;
    let model = &agent.model;
    let s = model.state_index(&rule.state)?;
    let o = model.channel(&rule.channel)?.outcome_index(&rule.outcome)?;
    let from = model.a.channel(&rule.channel)?.columns[s][o];
    // First time the cue was seen, then the first later belief that settles
    // whether the state was really present.
    let cue = episode
        .events
        .iter()
        .position(|e| e.observation.channel == rule.channel && e.observation.outcome == rule.outcome)?;
    let x = episode.events[cue + 1..].iter().find_map(|e| {
        let p = e.belief.probs[s];
        if p >= 0.99 {
            Some(1.0)
        } else if p <= 0.01 {
            Some(0.0)
        } else {
            None
        }
    })?;
    Some(ParameterChange::ObservationReliability {
        channel: rule.channel.clone(),
        state: rule.state.clone(),
        outcome: rule.outcome.clone(),
        from,
        to: from + rule.rate * (x - from),
    })
}

fn executive_change(agent: &Agent, episode: &EpisodeTrace) -> Option<ParameterChange> {
    let rule = agent.config.refinement.executive.as_ref()?;
    let s = agent.model.state_index(&rule.state)?;
    let from = agent.executive_prior?;
    let happened = episode.events.iter().any(|e| e.belief.probs[s] >= 0.5);
    let x = if happened { 1.0 } else { 0.0 };
    Some(ParameterChange::EventFrequency { event: rule.event.clone(), from, to: from + rule.rate * (x - from) })
}

/// Refines each level whose cumulative prediction error reached the
/// threshold θ, applying the changes to the agent's model and provider.
/// Returns one summary per refined level, lowest level first.
pub fn propagate_refinement(agent: &mut Agent, episode: &EpisodeTrace) -> Vec<LevelUpdate> {
    if episode.events.is_empty() {
        return Vec::new();
    }
    let theta = agent.config.threshold;
    let mut out = Vec::new();
    for (level, cumulative_error) in cumulative_errors(agent, episode) {
        if cumulative_error < theta {
            continue;
        }
        let changes: Vec<ParameterChange> = match level {
            Level::Sensorimotor => {
                let c = sensorimotor_change(agent, episode);
                if let Some(c) = &c {
                    apply_to_model(agent.model_mut(), c);
                    if let Some(p) = agent.provider_mut() {
                        p.apply(c);
                    }
                }
                c.into_iter().collect()
            }
            Level::Planner => {
                let changes = match agent.provider_mut() {
                    Some(p) => p.refine(episode).changes,
                    None => {
                        let model = agent.model();
                        match (model.b.titration.as_ref(), observed_titration_effect(model, episode)) {
                            (Some(t), Some(obs)) if (obs - t.effect_per_ul).abs() >= 1e-12 => {
                                vec![ParameterChange::TitrationEffect {
                                    reagent: t.reagent.clone(),
                                    from: t.effect_per_ul,
                                    to: obs,
                                }]
                            }
                            _ => Vec::new(),
                        }
                    }
                };
                for c in &changes {
                    apply_to_model(agent.model_mut(), c);
                }
                changes
            }
            Level::Executive => {
                let c = executive_change(agent, episode);
                if let Some(ParameterChange::EventFrequency { to, .. }) = &c {
                    agent.set_executive_prior(*to);
                }
                if let (Some(c), Some(p)) = (&c, agent.provider_mut()) {
                    p.apply(c);
                }
                c.into_iter().collect()
            }
        };
        out.push(LevelUpdate { level, cumulative_error, changes });
    }
    out
}
