//! World-model providers: anything that can propose posterior beliefs and
//! predict where a policy leads.
//!
//! Three implementations ship: [`TabularProvider`] (exact inference over the
//! generative model), [`ScriptedProvider`] (replays recorded responses) and,
//! with the `remote` feature, `RemoteProvider` (JSON over HTTP). Every
//! response is checked by [`validate_response`] before the agent sees it;
//! invalid posteriors are rejected, never renormalized.

mod scripted;
mod tabular;

#[cfg(feature = "remote")]
mod remote;

pub use scripted::{Script, ScriptedProvider, SCRIPT_SCHEMA};
pub use tabular::TabularProvider;

#[cfg(feature = "remote")]
pub use remote::{decode_response, encode_request, RemoteProvider};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::Belief;
use crate::io::trace::EpisodeTrace;
use crate::model::{GenerativeModel, Observation, Policy, PROB_TOL};
use crate::planning::Rollout;

/// A request for a belief update (no policy) or a policy prediction.
///
/// Without a policy, `belief` is the predicted prior and the last history
/// entry is the new observation. With a policy, `belief` is the current
/// posterior; the provider echoes it and predicts the rollout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldModelQuery {
    pub history: Vec<Observation>,
    pub belief: Belief,
    pub policy: Option<Policy>,
}

impl WorldModelQuery {
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        for w in self.history.windows(2) {
            if w[1].t <= w[0].t {
                out.push(format!("history timestamps not increasing at t = {}", w[1].t));
            }
        }
        out.extend(self.belief.posterior.problems());
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldModelResponse {
    pub posterior: crate::model::Categorical,
    #[serde(default)]
    pub rollout: Option<Rollout>,
    #[serde(default)]
    pub rationale: String,
}

/// A concrete change to a model parameter, produced by refinement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParameterChange {
    /// `P(outcome | state)` on one channel; the rest of the column is rescaled.
    ObservationReliability { channel: String, state: String, outcome: String, from: f64, to: f64 },
    /// Per-microlitre effect of the corrective titration.
    TitrationEffect { reagent: String, from: f64, to: f64 },
    /// Executive prior on how often an event occurs.
    EventFrequency { event: String, from: f64, to: f64 },
}

impl ParameterChange {
    pub fn describe(&self) -> String {
        match self {
            ParameterChange::ObservationReliability { channel, state, outcome, from, to } => {
                format!("P({channel}={outcome} | {state}) {from:.3} -> {to:.3}")
            }
            ParameterChange::TitrationEffect { reagent, from, to } => {
                format!("{reagent} effect per uL {from:.3} -> {to:.3}")
            }
            ParameterChange::EventFrequency { event, from, to } => {
                format!("{event} frequency prior {from:.3} -> {to:.3}")
            }
        }
    }
}

/// What a provider changed in response to an episode.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RefinementSummary {
    pub changes: Vec<ParameterChange>,
}

impl RefinementSummary {
    pub fn is_noop(&self) -> bool {
        self.changes.is_empty()
    }
}

/// The provider interface the agent queries.
pub trait WorldModel: Send {
    fn name(&self) -> &str;

    fn infer(&mut self, query: &WorldModelQuery) -> Result<WorldModelResponse>;

    /// Learns from a finished episode.
    fn refine(&mut self, episode: &EpisodeTrace) -> RefinementSummary;

    /// Adopts a change decided elsewhere in the agent. Default: ignore.
    fn apply(&mut self, _change: &ParameterChange) {}
}

/// Checks a response against the model and query; never repairs it.
pub fn validate_response(
    model: &GenerativeModel,
    query: &WorldModelQuery,
    response: &WorldModelResponse,
) -> Result<()> {
    let mut problems = Vec::new();
    let post = &response.posterior;
    if post.labels != model.states {
        problems.push(format!("posterior labels {:?} do not match states {:?}", post.labels, model.states));
    }
    problems.extend(post.problems().into_iter().map(|p| format!("posterior: {p}")));
    if let Some(policy) = &query.policy {
        match &response.rollout {
            None => problems.push(format!("no rollout for policy '{}'", policy.label)),
            Some(r) => {
                if r.len() != policy.horizon() {
                    problems.push(format!("rollout has {} steps, policy has {}", r.len(), policy.horizon()));
                }
                for (k, (step, action)) in r.steps.iter().zip(&policy.actions).enumerate() {
                    if &step.action != action {
                        problems.push(format!("rollout step {k} is '{}', expected '{action}'", step.action));
                    }
                    if step.states.labels != model.states {
                        problems.push(format!("rollout step {k}: state labels mismatch"));
                    }
                    match model.channel(&step.channel) {
                        Some(ch) if ch.outcomes == step.observations.labels => {}
                        _ => problems.push(format!("rollout step {k}: outcome labels mismatch")),
                    }
                    for p in step.states.problems().into_iter().chain(step.observations.problems()) {
                        problems.push(format!("rollout step {k}: {p}"));
                    }
                }
            }
        }
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Error::Validation(problems.join("; ")))
    }
}

/// Titration effect implied by the episode: the change between the reading
/// that sized the last dose and the next reading on the same channel, per
/// microlitre. `None` when the episode holds no completed correction.
pub fn observed_titration_effect(model: &GenerativeModel, episode: &EpisodeTrace) -> Option<f64> {
    let t = model.b.titration.as_ref()?;
    let (idx, ev) = episode
        .events
        .iter()
        .enumerate()
        .rev()
        .find(|(_, e)| e.action.name == t.action && e.action.param("volume_ul").is_some_and(|v| v > 0.0))?;
    let volume = ev.action.param("volume_ul")?;
    let measured = ev.action.param("measured")?;
    let after = episode.events[idx + 1..]
        .iter()
        .map(|e| &e.observation)
        .chain(&episode.closing)
        .find(|o| o.channel == t.channel)?;
    let reading = after.numeric()?;
    let effect = (reading - measured) * t.volume_ml / volume;
    (effect > 0.0).then_some(effect)
}

/// Writes `change` into `model`. Changes the model does not carry are ignored.
pub fn apply_to_model(model: &mut GenerativeModel, change: &ParameterChange) {
    match change {
        ParameterChange::ObservationReliability { channel, state, outcome, to, .. } => {
            let (Some(s), Some(o)) =
                (model.state_index(state), model.channel(channel).and_then(|c| c.outcome_index(outcome)))
            else {
                return;
            };
            if let Some(lik) = model.a.channel_mut(channel) {
                let col = &mut lik.columns[s];
                let rest: f64 = col.iter().enumerate().filter(|(i, _)| *i != o).map(|(_, v)| v).sum();
                let scale = if rest > PROB_TOL { (1.0 - to) / rest } else { 0.0 };
                for (i, v) in col.iter_mut().enumerate() {
                    *v = if i == o { *to } else { *v * scale };
                }
            }
        }
        ParameterChange::TitrationEffect { to, .. } => {
            if let Some(t) = model.b.titration.as_mut() {
                t.effect_per_ul = *to;
            }
        }
        ParameterChange::EventFrequency { .. } => {}
    }
}

impl WorldModel for Box<dyn WorldModel> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn infer(&mut self, query: &WorldModelQuery) -> Result<WorldModelResponse> {
        (**self).infer(query)
    }

    fn refine(&mut self, episode: &EpisodeTrace) -> RefinementSummary {
        (**self).refine(episode)
    }

    fn apply(&mut self, change: &ParameterChange) {
        (**self).apply(change)
    }
}

/// Wraps a provider and keeps every response it returns, in order.
pub struct Recording<P> {
    pub inner: P,
    pub responses: Vec<WorldModelResponse>,
}

impl<P: WorldModel> Recording<P> {
    pub fn new(inner: P) -> Self {
        Self { inner, responses: Vec::new() }
    }

    pub fn script(&self) -> Script {
        Script::new(self.responses.clone())
    }
}

impl<P: WorldModel> WorldModel for Recording<P> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn infer(&mut self, query: &WorldModelQuery) -> Result<WorldModelResponse> {
        let r = self.inner.infer(query)?;
        self.responses.push(r.clone());
        Ok(r)
    }

    fn refine(&mut self, episode: &EpisodeTrace) -> RefinementSummary {
        self.inner.refine(episode)
    }

    fn apply(&mut self, change: &ParameterChange) {
        self.inner.apply(change)
    }
}

/// Shared handle so a caller can keep reading the recorded responses after
/// handing the provider to an agent.
pub type SharedRecording<P> = std::sync::Arc<std::sync::Mutex<Recording<P>>>;

impl<P: WorldModel> WorldModel for SharedRecording<P> {
    fn name(&self) -> &str {
        "recording"
    }

    fn infer(&mut self, query: &WorldModelQuery) -> Result<WorldModelResponse> {
        self.lock().expect("recording lock").infer(query)
    }

    fn refine(&mut self, episode: &EpisodeTrace) -> RefinementSummary {
        self.lock().expect("recording lock").refine(episode)
    }

    fn apply(&mut self, change: &ParameterChange) {
        self.lock().expect("recording lock").apply(change)
    }
}
