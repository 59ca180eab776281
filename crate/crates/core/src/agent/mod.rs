//! Three-level controller (executive, planner, sensorimotor) running one
//! perceive–update–plan–act cycle per observation.
//!
//! The levels share one generative model partitioned by channel ownership.
//! Within a step, bottom-up messages (prediction errors, policy proposals)
//! are always emitted before top-down ones (confirmations, predictions).

mod episode;
mod refine;

pub use episode::{run_episode, EpisodeResult};
pub use refine::{propagate_refinement, LevelUpdate};

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{bayes_update, compute_vfe, ln_floor, surprise, Belief, VfeReport};
use crate::io::meter::{OpCounts, BELIEF_UPDATES, EFE_EVALUATIONS, ENV_STEPS, WORLD_MODEL_QUERIES};
use crate::io::trace::TraceEvent;
use crate::model::{Action, GenerativeModel, Observation, Policy};
use crate::planning::{enumerate_policies, hazard_mass, rank, rollout, score_rollout, EfeBreakdown, Rollout};
use crate::world_model::{validate_response, WorldModel, WorldModelQuery};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Executive,
    Planner,
    Sensorimotor,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::Executive, Level::Planner, Level::Sensorimotor];

    /// This level and every level above it, lowest first.
    pub fn and_above(self) -> &'static [Level] {
        match self {
            Level::Sensorimotor => &[Level::Sensorimotor, Level::Planner, Level::Executive],
            Level::Planner => &[Level::Planner, Level::Executive],
            Level::Executive => &[Level::Executive],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    BottomUp,
    TopDown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MessagePayload {
    PredictionError { channel: String, outcome: String, vfe: f64, baseline: f64 },
    PolicyProposal { policy: String, efe: f64 },
    PolicyConfirmation { policy: String, vetoed: Vec<String> },
    Prediction { channel: String, outcome: String, probability: f64 },
}

impl MessagePayload {
    pub fn direction(&self) -> Direction {
        match self {
            MessagePayload::PredictionError { .. } | MessagePayload::PolicyProposal { .. } => Direction::BottomUp,
            MessagePayload::PolicyConfirmation { .. } | MessagePayload::Prediction { .. } => Direction::TopDown,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub step: u64,
    pub direction: Direction,
    pub from: Level,
    pub to: Level,
    pub payload: MessagePayload,
}

impl Message {
    pub fn new(step: u64, from: Level, to: Level, payload: MessagePayload) -> Self {
        Self { step, direction: payload.direction(), from, to, payload }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelState {
    pub level: Level,
    pub local_belief: Belief,
    /// Messages delivered to this level during the latest step, FIFO.
    pub inbox: VecDeque<Message>,
}

/// Sensorimotor refinement: move one likelihood entry toward the evidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityRule {
    pub channel: String,
    pub state: String,
    pub outcome: String,
    pub rate: f64,
}

/// Executive refinement: move an event-frequency prior toward whether the
/// event happened.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyRule {
    pub event: String,
    /// Hidden state whose posterior mass marks the event.
    pub state: String,
    pub prior: f64,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RefinementConfig {
    #[serde(default)]
    pub sensorimotor: Option<ReliabilityRule>,
    #[serde(default)]
    pub executive: Option<FrequencyRule>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    /// Prediction-error threshold θ in nats.
    pub threshold: f64,
    pub planning_horizon: usize,
    pub max_horizon: usize,
    pub max_candidates: usize,
    pub vfe_baseline_window: usize,
    /// Policy taken when the provider fails or every candidate is vetoed.
    pub fallback_policy: String,
    /// Actions run when no corrective policy is active.
    pub nominal_plan: Vec<String>,
    /// Veto when predicted mass on any avoided outcome exceeds this.
    pub veto_mass: f64,
    /// Channel observed before the first action.
    pub initial_readout: String,
    /// Level owning each channel; unlisted channels belong to the sensorimotor level.
    #[serde(default)]
    pub ownership: BTreeMap<String, Level>,
    #[serde(default)]
    pub refinement: RefinementConfig,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            threshold: 1.0,
            planning_horizon: 2,
            max_horizon: 4,
            max_candidates: 16,
            vfe_baseline_window: 5,
            fallback_policy: "ask_human".to_string(),
            nominal_plan: Vec::new(),
            veto_mass: 0.25,
            initial_readout: String::new(),
            ownership: BTreeMap::new(),
            refinement: RefinementConfig::default(),
        }
    }
}

impl AgentConfig {
    pub fn owner(&self, channel: &str) -> Level {
        self.ownership.get(channel).copied().unwrap_or(Level::Sensorimotor)
    }

    /// `(path, message)` for every setting inconsistent with `model`/`policies`.
    pub fn problems(&self, model: &GenerativeModel, policies: &[Policy]) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let mut bad = |p: &str, m: String| out.push((format!("agent.{p}"), m));
        if !(self.threshold.is_finite() && self.threshold >= 0.0) {
            bad("threshold", format!("{} must be a nonnegative number", self.threshold));
        }
        if self.planning_horizon == 0 || self.planning_horizon > self.max_horizon {
            bad("planning_horizon", format!("must be in 1..={}", self.max_horizon));
        }
        if self.max_candidates == 0 {
            bad("max_candidates", "must be positive".to_string());
        }
        if self.vfe_baseline_window == 0 {
            bad("vfe_baseline_window", "must be positive".to_string());
        }
        if !(0.0..=1.0).contains(&self.veto_mass) {
            bad("veto_mass", format!("{} outside [0, 1]", self.veto_mass));
        }
        if model.channel(&self.initial_readout).is_none() {
            bad("initial_readout", format!("unknown channel '{}'", self.initial_readout));
        }
        if !policies.iter().any(|p| p.label == self.fallback_policy) && model.action(&self.fallback_policy).is_none() {
            bad("fallback_policy", format!("'{}' is neither a policy nor an action", self.fallback_policy));
        }
        for a in &self.nominal_plan {
            if model.action(a).is_none() {
                bad("nominal_plan", format!("unknown action '{a}'"));
            }
        }
        for ch in self.ownership.keys() {
            if model.channel(ch).is_none() {
                bad("ownership", format!("unknown channel '{ch}'"));
            }
        }
        if let Some(r) = &self.refinement.sensorimotor {
            if model.channel(&r.channel).and_then(|c| c.outcome_index(&r.outcome)).is_none() {
                bad("refinement.sensorimotor", format!("unknown outcome '{}' on '{}'", r.outcome, r.channel));
            }
            if model.state_index(&r.state).is_none() {
                bad("refinement.sensorimotor", format!("unknown state '{}'", r.state));
            }
            if !(0.0..=1.0).contains(&r.rate) {
                bad("refinement.sensorimotor", "rate outside [0, 1]".to_string());
            }
        }
        if let Some(r) = &self.refinement.executive {
            if model.state_index(&r.state).is_none() {
                bad("refinement.executive", format!("unknown state '{}'", r.state));
            }
            if !(0.0..=1.0).contains(&r.rate) || !(0.0..=1.0).contains(&r.prior) {
                bad("refinement.executive", "rate and prior must lie in [0, 1]".to_string());
            }
        }
        for (i, p) in policies.iter().enumerate() {
            if p.horizon() > self.max_horizon {
                bad(&format!("policies[{i}]"), format!("horizon {} exceeds {}", p.horizon(), self.max_horizon));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
struct ActivePlan {
    label: String,
    remaining: VecDeque<String>,
}

/// Outcome of scoring the candidate set.
struct Replan {
    table: Vec<EfeBreakdown>,
    vetoed: Vec<String>,
    proposed: usize,
    chosen: Option<usize>,
}

pub struct Agent {
    model: GenerativeModel,
    policies: Vec<Policy>,
    config: AgentConfig,
    /// `None` runs the exact engine directly.
    provider: Option<Box<dyn WorldModel>>,
    levels: Vec<LevelState>,
    belief: Belief,
    /// Prior for the next observation.
    predicted: Vec<f64>,
    next_readout: String,
    plan: Option<ActivePlan>,
    history: Vec<Observation>,
    vfe_history: Vec<f64>,
    counts: OpCounts,
    step: u64,
    executive_prior: Option<f64>,
}

impl Agent {
    /// Agent that calls the inference and planning engine directly.
    pub fn new(model: GenerativeModel, policies: Vec<Policy>, config: AgentConfig) -> Self {
        let belief = Belief::new(model.d.initial.clone(), 0);
        let levels = Level::ALL
            .iter()
            .map(|&level| LevelState { level, local_belief: belief.clone(), inbox: VecDeque::new() })
            .collect();
        Self {
            predicted: belief.probs().to_vec(),
            next_readout: config.initial_readout.clone(),
            executive_prior: config.refinement.executive.as_ref().map(|r| r.prior),
            model,
            policies,
            config,
            provider: None,
            levels,
            belief,
            plan: None,
            history: Vec::new(),
            vfe_history: Vec::new(),
            counts: OpCounts::default(),
            step: 0,
        }
    }

    /// Agent that routes belief updates and rollouts through `provider`.
    pub fn with_provider(
        model: GenerativeModel,
        policies: Vec<Policy>,
        config: AgentConfig,
        provider: Box<dyn WorldModel>,
    ) -> Self {
        let mut a = Self::new(model, policies, config);
        a.provider = Some(provider);
        a
    }

    pub fn model(&self) -> &GenerativeModel {
        &self.model
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn belief(&self) -> &Belief {
        &self.belief
    }

    pub fn levels(&self) -> &[LevelState] {
        &self.levels
    }

    pub fn op_counts(&self) -> &OpCounts {
        &self.counts
    }

    pub fn executive_prior(&self) -> Option<f64> {
        self.executive_prior
    }

    pub fn provider_mut(&mut self) -> Option<&mut (dyn WorldModel + 'static)> {
        self.provider.as_deref_mut()
    }

    /// Channel the agent expects to read next.
    pub fn next_readout(&self) -> &str {
        &self.next_readout
    }

    /// Label of the policy currently being executed.
    pub fn active_policy(&self) -> Option<&str> {
        self.plan.as_ref().map(|p| p.label.as_str())
    }

    fn candidates(&self) -> Vec<Policy> {
        if self.policies.is_empty() {
            enumerate_policies(&self.model, self.config.planning_horizon, self.config.max_candidates)
        } else {
            self.policies.clone()
        }
    }

    fn policy_plan(&self, label: &str) -> Result<ActivePlan> {
        let actions: Vec<String> = match self.policies.iter().find(|p| p.label == label) {
            Some(p) => p.actions.clone(),
            None if self.model.action(label).is_some() => vec![label.to_string()],
            None => return Err(Error::Config(format!("no policy or action named '{label}'"))),
        };
        Ok(ActivePlan { label: label.to_string(), remaining: actions.into() })
    }

    fn nominal_plan(&self) -> Result<ActivePlan> {
        if self.config.nominal_plan.is_empty() {
            return self.policy_plan(&self.config.fallback_policy);
        }
        Ok(ActivePlan { label: "nominal".to_string(), remaining: self.config.nominal_plan.clone().into() })
    }

    /// VFE the prior would incur on its own most likely reading of `channel`.
    fn modal_vfe(&self, channel: &str, q: &[f64]) -> Result<f64> {
        let mode = self.model.predict_outcomes(channel, q)?.mode();
        let lik = self
            .model
            .a
            .channel(channel)
            .ok_or_else(|| Error::Shape(format!("no likelihood for channel '{channel}'")))?;
        Ok(-q.iter().zip(&lik.columns).map(|(qs, col)| qs * ln_floor(col[mode])).sum::<f64>())
    }

    fn baseline(&self, channel: &str, q: &[f64]) -> Result<f64> {
        if self.vfe_history.is_empty() {
            return self.modal_vfe(channel, q);
        }
        let w = self.config.vfe_baseline_window.max(1);
        let recent = &self.vfe_history[self.vfe_history.len().saturating_sub(w)..];
        Ok(recent.iter().sum::<f64>() / recent.len() as f64)
    }

    fn query(&mut self, query: WorldModelQuery) -> Result<crate::world_model::WorldModelResponse> {
        let provider = self.provider.as_mut().expect("query only in provider mode");
        let response = provider.infer(&query)?;
        validate_response(&self.model, &query, &response)?;
        Ok(response)
    }

    fn update_belief(&mut self, prior: &Belief, obs: &Observation, lik: &[f64]) -> Result<Belief> {
        self.counts.add(BELIEF_UPDATES, 1);
        self.counts.add(WORLD_MODEL_QUERIES, 1);
        if self.provider.is_none() {
            return bayes_update(prior, lik, obs);
        }
        let q = WorldModelQuery { history: self.history.clone(), belief: prior.clone(), policy: None };
        let r = self.query(q)?;
        Ok(Belief::new(r.posterior, prior.timestamp + 1))
    }

    fn predict(&mut self, policy: &Policy) -> Result<Rollout> {
        self.counts.add(WORLD_MODEL_QUERIES, 1);
        if self.provider.is_none() {
            return rollout(&self.model, &self.belief, policy);
        }
        let q = WorldModelQuery {
            history: self.history.clone(),
            belief: self.belief.clone(),
            policy: Some(policy.clone()),
        };
        self.query(q)?.rollout.ok_or_else(|| Error::Validation(format!("no rollout for '{}'", policy.label)))
    }

    fn replan(&mut self) -> Result<Replan> {
        let candidates = self.candidates();
        if candidates.is_empty() {
            return Err(Error::NoPolicy);
        }
        let mut table = Vec::with_capacity(candidates.len());
        let mut hazards = Vec::with_capacity(candidates.len());
        for p in &candidates {
            let r = self.predict(p)?;
            table.push(score_rollout(&self.model, &r, p)?);
            self.counts.add(EFE_EVALUATIONS, 1);
            hazards.push(hazard_mass(&self.model, &r));
        }
        let order = rank(&table);
        let veto = self.config.veto_mass;
        let vetoed = order.iter().filter(|&&i| hazards[i] > veto).map(|&i| table[i].policy.label.clone()).collect();
        let chosen = order.iter().copied().find(|&i| hazards[i] <= veto);
        Ok(Replan { proposed: order[0], chosen, table, vetoed })
    }

    /// Dose the corrective titration from the latest reading on its channel.
    fn parameterize(&self, name: &str) -> Action {
        let mut action = Action::new(name);
        if let Some(t) = self.model.b.titration.as_ref().filter(|t| t.action == name) {
            let measured =
                self.history.iter().rev().find(|o| o.channel == t.channel).and_then(|o| o.outcome.parse::<f64>().ok());
            match measured {
                Some(m) => {
                    action = action.with_param("measured", m).with_param("volume_ul", t.planned_volume(m));
                }
                None => action = action.with_param("volume_ul", 0.0),
            }
        }
        action
    }

    /// One perceive–update–plan–act cycle. Returns the single primitive
    /// action to execute and the full record of the step.
    pub fn step(&mut self, obs: &Observation) -> Result<(Action, TraceEvent)> {
        let t = self.step;
        let prior_q = self.predicted.clone();
        let lik = self.model.likelihood(&obs.channel, &obs.outcome)?;
        let predictive = self.model.predict_outcomes(&obs.channel, &prior_q)?;
        let surprise = surprise(obs, &predictive)?;
        let prior_cat = self.model.state_categorical(prior_q.clone());
        let prior_belief = Belief::new(prior_cat.clone(), self.belief.timestamp);
        let vfe = compute_vfe(&prior_belief, &prior_cat, &lik)?;
        let baseline = self.baseline(&obs.channel, &prior_q)?;
        let prediction_error = vfe.total - baseline;
        let surprised = prediction_error > self.config.threshold;

        let mut messages = Vec::new();
        if surprised {
            messages.push(Message::new(
                t,
                Level::Sensorimotor,
                Level::Planner,
                MessagePayload::PredictionError {
                    channel: obs.channel.clone(),
                    outcome: obs.outcome.clone(),
                    vfe: vfe.total,
                    baseline,
                },
            ));
        }
        self.history.push(obs.clone());

        let mut provider_error = None;
        let mut selected_policy = None;
        let mut efe_table = Vec::new();
        let mut vetoed = Vec::new();
        let mut posterior_vfe: VfeReport = vfe;

        let outcome = self.update_belief(&prior_belief, obs, &lik).and_then(|post| {
            self.belief = post;
            posterior_vfe = compute_vfe(&self.belief, &prior_cat, &lik)?;
            if surprised {
                self.replan().map(Some)
            } else {
                Ok(None)
            }
        });
        match outcome {
            Ok(Some(rp)) => {
                let proposal = &rp.table[rp.proposed];
                messages.push(Message::new(
                    t,
                    Level::Planner,
                    Level::Executive,
                    MessagePayload::PolicyProposal { policy: proposal.policy.label.clone(), efe: proposal.total },
                ));
                let label = match rp.chosen {
                    Some(i) => rp.table[i].policy.label.clone(),
                    None => self.config.fallback_policy.clone(),
                };
                messages.push(Message::new(
                    t,
                    Level::Executive,
                    Level::Planner,
                    MessagePayload::PolicyConfirmation { policy: label.clone(), vetoed: rp.vetoed.clone() },
                ));
                self.plan = Some(self.policy_plan(&label)?);
                selected_policy = Some(label);
                efe_table = rp.table;
                vetoed = rp.vetoed;
            }
            Ok(None) => {
                if self.plan.as_ref().is_none_or(|p| p.remaining.is_empty()) {
                    self.plan = Some(self.nominal_plan()?);
                }
            }
            Err(e) => {
                if self.belief.timestamp == prior_belief.timestamp {
                    // the update itself failed: carry the prediction forward
                    self.belief = Belief::new(prior_cat.clone(), prior_belief.timestamp + 1);
                }
                provider_error = Some(e.to_string());
                self.plan = Some(self.policy_plan(&self.config.fallback_policy.clone())?);
            }
        }

        let plan = self.plan.as_mut().expect("a plan is always set above");
        let active_policy = plan.label.clone();
        let name = plan.remaining.pop_front().ok_or(Error::NoPolicy)?;
        let action = self.parameterize(&name);

        self.predicted = self.model.predict_states(&name, self.belief.probs())?;
        self.next_readout = self.model.readout(&name)?.to_string();
        let expected = self.model.predict_outcomes(&self.next_readout, &self.predicted)?;
        let mode = expected.mode();
        messages.push(Message::new(
            t,
            Level::Planner,
            Level::Sensorimotor,
            MessagePayload::Prediction {
                channel: self.next_readout.clone(),
                outcome: expected.labels[mode].clone(),
                probability: expected.probs[mode],
            },
        ));
        self.counts.add(ENV_STEPS, 1);
        self.vfe_history.push(vfe.total);

        for level in &mut self.levels {
            level.local_belief = self.belief.clone();
            level.inbox = messages.iter().filter(|m| m.to == level.level).cloned().collect();
        }
        self.step += 1;

        let event = TraceEvent {
            step: t,
            observation: obs.clone(),
            surprise,
            baseline,
            prediction_error,
            belief: self.belief.posterior.clone(),
            messages,
            efe_table,
            vetoed,
            selected_policy,
            active_policy,
            action: action.clone(),
            vfe,
            posterior_vfe,
            op_counts: self.counts.clone(),
            provider_error,
        };
        Ok((action, event))
    }

    pub(crate) fn model_mut(&mut self) -> &mut GenerativeModel {
        &mut self.model
    }

    pub(crate) fn set_executive_prior(&mut self, p: f64) {
        self.executive_prior = Some(p);
    }
}
