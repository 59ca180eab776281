//! Generative-model domain types shared by every other module.
//!
//! A model is the usual A/B/C/D quadruple over finite label sets:
//! observation likelihoods per channel, action-conditioned transitions,
//! log-preferences over outcomes and a prior over hidden states. Matrices
//! are stored as plain row vectors so that a model read from disk can be
//! held (and reported on) even when it is malformed; [`validate_model`]
//! is the gate.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Normalization tolerance for every stored distribution.
pub const PROB_TOL: f64 = 1e-9;

/// Normalized probability vector over an ordered label set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Categorical {
    pub labels: Vec<String>,
    pub probs: Vec<f64>,
}

impl Categorical {
    /// Builds a distribution, rejecting anything that violates the invariants.
    pub fn new(labels: Vec<String>, probs: Vec<f64>) -> Result<Self> {
        let dist = Self { labels, probs };
        let problems = dist.problems();
        if problems.is_empty() {
            Ok(dist)
        } else {
            Err(Error::InvalidDistribution(problems.join("; ")))
        }
    }

    /// Normalizes nonnegative weights onto `labels`.
    pub fn from_weights(labels: Vec<String>, weights: &[f64]) -> Result<Self> {
        if labels.len() != weights.len() {
            return Err(Error::Shape(format!("{} labels but {} weights", labels.len(), weights.len())));
        }
        Self::new(labels, normalize(weights)?)
    }

    pub fn uniform(labels: Vec<String>) -> Self {
        let n = labels.len();
        Self { labels, probs: vec![1.0 / n as f64; n] }
    }

    pub fn delta(labels: Vec<String>, index: usize) -> Self {
        let mut probs = vec![0.0; labels.len()];
        probs[index] = 1.0;
        Self { labels, probs }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn prob(&self, label: &str) -> Option<f64> {
        self.index_of(label).map(|i| self.probs[i])
    }

    /// Index of the most probable label; first wins on ties.
    pub fn mode(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }

    /// Every violated invariant, as human-readable text. Empty when valid.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.labels.len() != self.probs.len() {
            out.push(format!("{} labels but {} probabilities", self.labels.len(), self.probs.len()));
        }
        if self.probs.is_empty() {
            out.push("empty distribution".to_string());
        }
        let mut seen = BTreeSet::new();
        for l in &self.labels {
            if !seen.insert(l.as_str()) {
                out.push(format!("duplicate label '{l}'"));
            }
        }
        out.extend(prob_problems(&self.probs));
        out
    }

    pub fn is_valid(&self) -> bool {
        self.problems().is_empty()
    }

    pub fn same_support(&self, other: &Self) -> bool {
        self.labels == other.labels
    }
}

impl fmt::Display for Categorical {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, (l, p)) in self.labels.iter().zip(&self.probs).enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{l}: {p:.4}")?;
        }
        write!(f, "]")
    }
}

fn prob_problems(probs: &[f64]) -> Vec<String> {
    let mut out = Vec::new();
    for (i, &p) in probs.iter().enumerate() {
        if !p.is_finite() || !(0.0..=1.0).contains(&p) {
            out.push(format!("entry {i} = {p} outside [0, 1]"));
        }
    }
    let sum: f64 = probs.iter().sum();
    if !probs.is_empty() && (sum - 1.0).abs() > PROB_TOL {
        out.push(format!("sums to {sum}"));
    }
    out
}

/// Scales a nonnegative vector to sum to one.
pub fn normalize(raw: &[f64]) -> Result<Vec<f64>> {
    if let Some(bad) = raw.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::InvalidDistribution(format!("negative or non-finite weight {bad}")));
    }
    let total: f64 = raw.iter().sum();
    if total <= 0.0 {
        return Err(Error::Degenerate("all weights are zero".to_string()));
    }
    Ok(raw.iter().map(|v| v / total).collect())
}

/// A single reading from one sensory channel.
///
/// `outcome` is the discrete label the model reasons over; `value` carries
/// the underlying numeric reading when the sensor has one (e.g. a pH probe).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub channel: String,
    pub outcome: String,
    pub t: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
}

impl Observation {
    pub fn new(channel: impl Into<String>, outcome: impl Into<String>, t: u64) -> Self {
        Self { channel: channel.into(), outcome: outcome.into(), t, value: None }
    }

    pub fn with_value(mut self, value: f64) -> Self {
        self.value = Some(value);
        self
    }

    /// Numeric reading, falling back to parsing the outcome label.
    pub fn numeric(&self) -> Option<f64> {
        self.value.or_else(|| self.outcome.parse().ok())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub name: String,
    pub outcomes: Vec<String>,
    /// Numeric binning the outcome labels were generated from, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bins: Option<Bins>,
}

impl Channel {
    pub fn new(name: impl Into<String>, outcomes: &[&str]) -> Self {
        Self { name: name.into(), outcomes: outcomes.iter().map(|s| s.to_string()).collect(), bins: None }
    }

    pub fn binned(name: impl Into<String>, bins: Bins) -> Self {
        Self { name: name.into(), outcomes: bins.labels(), bins: Some(bins) }
    }

    pub fn outcome_index(&self, outcome: &str) -> Option<usize> {
        self.outcomes.iter().position(|o| o == outcome)
    }
}

/// Evenly spaced numeric outcome bins, labelled with a fixed number of decimals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bins {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
    pub decimals: usize,
}

impl Bins {
    pub fn count(&self) -> usize {
        ((self.stop - self.start) / self.step).round() as usize + 1
    }

    /// Bin centres in ascending order.
    pub fn centers(&self) -> Vec<f64> {
        (0..self.count()).map(|i| self.start + i as f64 * self.step).collect()
    }

    pub fn labels(&self) -> Vec<String> {
        self.centers().iter().map(|c| self.format(*c)).collect()
    }

    fn format(&self, v: f64) -> String {
        format!("{:.*}", self.decimals, v)
    }

    /// Label of the bin nearest to `value`, clamped to the range.
    pub fn label(&self, value: f64) -> String {
        let i = ((value - self.start) / self.step).round().clamp(0.0, (self.count() - 1) as f64);
        self.format(self.start + i * self.step)
    }
}

/// A primitive action with its numeric parameters (e.g. dose volume).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Action {
    pub name: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
}

impl Action {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), params: BTreeMap::new() }
    }

    pub fn with_param(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    pub fn param(&self, key: &str) -> Option<f64> {
        self.params.get(key).copied()
    }
}

/// Likelihood of each outcome of one channel, one column per hidden state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelLikelihood {
    pub channel: String,
    /// `columns[state][outcome]`
    pub columns: Vec<Vec<f64>>,
}

/// The A component.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ObservationModel {
    pub channels: Vec<ChannelLikelihood>,
}

impl ObservationModel {
    pub fn channel(&self, name: &str) -> Option<&ChannelLikelihood> {
        self.channels.iter().find(|c| c.channel == name)
    }

    pub fn channel_mut(&mut self, name: &str) -> Option<&mut ChannelLikelihood> {
        self.channels.iter_mut().find(|c| c.channel == name)
    }
}

/// Next-state distributions for one action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionTransition {
    pub action: String,
    /// `rows[from_state][to_state]`
    pub rows: Vec<Vec<f64>>,
}

/// Continuous parameters of a corrective titration, used by the planner to
/// size a dose from a measured reading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TitrationModel {
    /// Action that performs the titration.
    pub action: String,
    /// Channel whose numeric reading gives the current level.
    pub channel: String,
    pub reagent: String,
    /// Shift of the reading per microlitre into `volume_ml` of sample.
    pub effect_per_ul: f64,
    pub target: f64,
    pub volume_ml: f64,
    /// Pipette resolution in microlitres.
    pub resolution_ul: f64,
}

impl TitrationModel {
    /// Dose in microlitres needed to move `measured` to the target.
    pub fn planned_volume(&self, measured: f64) -> f64 {
        let raw = (self.target - measured) * self.volume_ml / self.effect_per_ul;
        let steps = (raw / self.resolution_ul).round();
        (steps * self.resolution_ul).max(0.0)
    }
}

/// The B component.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TransitionModel {
    pub actions: Vec<ActionTransition>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub titration: Option<TitrationModel>,
}

impl TransitionModel {
    pub fn action(&self, name: &str) -> Option<&ActionTransition> {
        self.actions.iter().find(|a| a.action == name)
    }
}

/// Outcome predicate used by a preference entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum OutcomeSet {
    Labels(Vec<String>),
    /// Outcomes whose label parses to a number in `[lo, hi]`.
    Range {
        lo: f64,
        hi: f64,
    },
}

impl OutcomeSet {
    pub fn contains(&self, outcome: &str) -> bool {
        match self {
            OutcomeSet::Labels(ls) => ls.iter().any(|l| l == outcome),
            OutcomeSet::Range { lo, hi } => {
                outcome.parse::<f64>().map(|v| v >= *lo - 1e-9 && v <= *hi + 1e-9).unwrap_or(false)
            }
        }
    }

    pub fn labels(&self) -> Vec<String> {
        match self {
            OutcomeSet::Labels(ls) => ls.clone(),
            OutcomeSet::Range { .. } => Vec::new(),
        }
    }
}

/// One weighted preference statement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceEntry {
    pub statement: String,
    /// Confidence in `[0, 1]`.
    pub weight: f64,
    /// Channel the predicate reads; `None` for episode-level constraints.
    pub channel: Option<String>,
    pub prefer: Option<OutcomeSet>,
    pub avoid: Option<OutcomeSet>,
    /// Time budget in minutes, for episode-level constraints.
    pub budget_min: Option<f64>,
}

/// Compiled log-preferences of one channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelPreference {
    pub channel: String,
    pub log_probs: Vec<f64>,
    /// Outcomes some entry explicitly avoids.
    pub hazards: Vec<bool>,
}

/// The C component.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PreferenceModel {
    pub entries: Vec<PreferenceEntry>,
    pub channels: Vec<ChannelPreference>,
}

/// Raw mass shared by all avoided outcomes of a channel before normalization.
pub const AVOID_MASS: f64 = 0.01;

impl PreferenceModel {
    /// Compiles weighted entries into per-channel log-priors.
    ///
    /// Avoided outcomes share [`AVOID_MASS`]; every other outcome gets
    /// `exp(sum of weights of entries preferring it)`. Channels that no entry
    /// mentions come out uniform.
    pub fn compile(entries: Vec<PreferenceEntry>, channels: &[Channel]) -> Self {
        let compiled = channels
            .iter()
            .map(|ch| {
                let hazards: Vec<bool> = ch
                    .outcomes
                    .iter()
                    .map(|o| {
                        entries.iter().any(|e| {
                            e.channel.as_deref() == Some(&ch.name) && e.avoid.as_ref().is_some_and(|s| s.contains(o))
                        })
                    })
                    .collect();
                let n_avoid = hazards.iter().filter(|h| **h).count().max(1) as f64;
                let raw: Vec<f64> = ch
                    .outcomes
                    .iter()
                    .zip(&hazards)
                    .map(|(o, &hazard)| {
                        if hazard {
                            AVOID_MASS / n_avoid
                        } else {
                            let logit: f64 = entries
                                .iter()
                                .filter(|e| {
                                    e.channel.as_deref() == Some(&ch.name)
                                        && e.prefer.as_ref().is_some_and(|s| s.contains(o))
                                })
                                .map(|e| e.weight)
                                .sum();
                            logit.exp()
                        }
                    })
                    .collect();
                let total: f64 = raw.iter().sum();
                ChannelPreference {
                    channel: ch.name.clone(),
                    log_probs: raw.iter().map(|r| (r / total).ln()).collect(),
                    hazards,
                }
            })
            .collect();
        Self { entries, channels: compiled }
    }

    /// Preferences given directly as log-probabilities, with no entries.
    pub fn from_log_priors(channels: Vec<(String, Vec<f64>)>) -> Self {
        Self {
            entries: Vec::new(),
            channels: channels
                .into_iter()
                .map(|(channel, log_probs)| {
                    let hazards = log_probs.iter().map(|l| l.exp() <= AVOID_MASS).collect();
                    ChannelPreference { channel, log_probs, hazards }
                })
                .collect(),
        }
    }

    pub fn channel(&self, name: &str) -> Option<&ChannelPreference> {
        self.channels.iter().find(|c| c.channel == name)
    }

    /// Adds `shift` to every log-preference. The result is unnormalized.
    pub fn shifted(&self, shift: f64) -> Self {
        let mut out = self.clone();
        for ch in &mut out.channels {
            for l in &mut ch.log_probs {
                *l += shift;
            }
        }
        out
    }

    /// Distinct confidence weights, in declaration order.
    pub fn weights(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for e in &self.entries {
            if !out.iter().any(|w| (w - e.weight).abs() < 1e-12) {
                out.push(e.weight);
            }
        }
        out
    }

    /// Smallest episode time budget among the entries, if any.
    pub fn time_budget_min(&self) -> Option<f64> {
        self.entries.iter().filter_map(|e| e.budget_min).reduce(f64::min)
    }
}

/// The D component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorBeliefs {
    pub initial: Categorical,
}

/// A declared action and the channel read out after it executes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionDef {
    pub name: String,
    pub readout: String,
}

/// A finite action sequence scored as a unit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Policy {
    pub label: String,
    pub actions: Vec<String>,
}

impl Policy {
    pub fn new(label: impl Into<String>, actions: &[&str]) -> Self {
        Self { label: label.into(), actions: actions.iter().map(|a| a.to_string()).collect() }
    }

    pub fn horizon(&self) -> usize {
        self.actions.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerativeModel {
    pub states: Vec<String>,
    pub actions: Vec<ActionDef>,
    pub channels: Vec<Channel>,
    pub a: ObservationModel,
    pub b: TransitionModel,
    pub c: PreferenceModel,
    pub d: PriorBeliefs,
}

impl GenerativeModel {
    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s == name)
    }

    pub fn action(&self, name: &str) -> Option<&ActionDef> {
        self.actions.iter().find(|a| a.name == name)
    }

    pub fn channel(&self, name: &str) -> Option<&Channel> {
        self.channels.iter().find(|c| c.name == name)
    }

    pub fn action_names(&self) -> Vec<String> {
        self.actions.iter().map(|a| a.name.clone()).collect()
    }

    fn require_channel(&self, name: &str) -> Result<(&Channel, &ChannelLikelihood)> {
        let ch = self.channel(name).ok_or_else(|| Error::Shape(format!("unknown channel '{name}'")))?;
        let lik = self.a.channel(name).ok_or_else(|| Error::Shape(format!("no likelihood for channel '{name}'")))?;
        Ok((ch, lik))
    }

    /// Per-state probability of `outcome` on `channel`.
    pub fn likelihood(&self, channel: &str, outcome: &str) -> Result<Vec<f64>> {
        let (ch, lik) = self.require_channel(channel)?;
        let o = ch
            .outcome_index(outcome)
            .ok_or_else(|| Error::Shape(format!("'{outcome}' is not an outcome of '{channel}'")))?;
        Ok(lik.columns.iter().map(|col| col[o]).collect())
    }

    /// Distribution over `channel` outcomes implied by state distribution `q`.
    pub fn predict_outcomes(&self, channel: &str, q: &[f64]) -> Result<Categorical> {
        let (ch, lik) = self.require_channel(channel)?;
        if q.len() != lik.columns.len() {
            return Err(Error::Shape(format!(
                "state vector of length {} against {} likelihood columns",
                q.len(),
                lik.columns.len()
            )));
        }
        let mut probs = vec![0.0; ch.outcomes.len()];
        for (qs, col) in q.iter().zip(&lik.columns) {
            for (p, a) in probs.iter_mut().zip(col) {
                *p += qs * a;
            }
        }
        Ok(Categorical { labels: ch.outcomes.clone(), probs })
    }

    /// State distribution after applying `action` to `q`.
    pub fn predict_states(&self, action: &str, q: &[f64]) -> Result<Vec<f64>> {
        let tr = self.b.action(action).ok_or_else(|| Error::Shape(format!("no transitions for action '{action}'")))?;
        if q.len() != tr.rows.len() {
            return Err(Error::Shape(format!(
                "state vector of length {} against {} transition rows",
                q.len(),
                tr.rows.len()
            )));
        }
        let mut next = vec![0.0; self.states.len()];
        for (qs, row) in q.iter().zip(&tr.rows) {
            for (n, b) in next.iter_mut().zip(row) {
                *n += qs * b;
            }
        }
        Ok(next)
    }

    pub fn readout(&self, action: &str) -> Result<&str> {
        self.action(action)
            .map(|a| a.readout.as_str())
            .ok_or_else(|| Error::Shape(format!("unknown action '{action}'")))
    }

    pub fn log_preferences(&self, channel: &str) -> Result<&[f64]> {
        self.c
            .channel(channel)
            .map(|c| c.log_probs.as_slice())
            .ok_or_else(|| Error::Shape(format!("no preferences for channel '{channel}'")))
    }

    pub fn state_categorical(&self, probs: Vec<f64>) -> Categorical {
        Categorical { labels: self.states.clone(), probs }
    }
}

/// One violated invariant and where it lives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation { path: path.into(), message: message.into() });
    }

    pub fn extend(&mut self, other: ValidationReport) {
        self.violations.extend(other.violations);
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_empty() {
            Ok(())
        } else {
            let text: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
            Err(Error::Validation(text.join("; ")))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

fn check_unique(report: &mut ValidationReport, path: &str, names: &[String]) {
    let mut seen = BTreeSet::new();
    for n in names {
        if !seen.insert(n) {
            report.push(path, format!("duplicate name '{n}'"));
        }
    }
}

/// Checks every structural invariant of `model` and of the candidate
/// `policies` against it. Never fails; an empty report means well-formed.
pub fn validate_model(model: &GenerativeModel, policies: &[Policy]) -> ValidationReport {
    let mut report = ValidationReport::default();
    let n_states = model.states.len();
    if n_states == 0 {
        report.push("states", "no hidden states declared");
    }
    check_unique(&mut report, "states", &model.states);
    check_unique(&mut report, "actions", &model.action_names());
    let channel_names: Vec<String> = model.channels.iter().map(|c| c.name.clone()).collect();
    check_unique(&mut report, "channels", &channel_names);

    for ch in &model.channels {
        if ch.outcomes.is_empty() {
            report.push(format!("channels.{}", ch.name), "no outcomes declared");
        }
        check_unique(&mut report, &format!("channels.{}.outcomes", ch.name), &ch.outcomes);
    }
    for act in &model.actions {
        if model.channel(&act.readout).is_none() {
            report.push(format!("actions.{}.readout", act.name), format!("unknown channel '{}'", act.readout));
        }
    }

    // A
    for ch in &model.channels {
        match model.a.channel(&ch.name) {
            None => report.push(format!("A.{}", ch.name), "missing likelihood table"),
            Some(lik) => {
                if lik.columns.len() != n_states {
                    report.push(
                        format!("A.{}", ch.name),
                        format!("{} state columns, expected {n_states}", lik.columns.len()),
                    );
                }
                for (s, col) in lik.columns.iter().enumerate() {
                    let state = model.states.get(s).map(String::as_str).unwrap_or("?");
                    let path = format!("A.{}.{}", ch.name, state);
                    if col.len() != ch.outcomes.len() {
                        report.push(&path, format!("{} entries, expected {}", col.len(), ch.outcomes.len()));
                    }
                    for p in prob_problems(col) {
                        report.push(&path, p);
                    }
                }
            }
        }
    }
    for lik in &model.a.channels {
        if model.channel(&lik.channel).is_none() {
            report.push(format!("A.{}", lik.channel), "likelihood for undeclared channel");
        }
    }

    // B
    for act in &model.actions {
        match model.b.action(&act.name) {
            None => report.push(format!("B.{}", act.name), "missing transition table"),
            Some(tr) => {
                if tr.rows.len() != n_states {
                    report
                        .push(format!("B.{}", act.name), format!("{} state rows, expected {n_states}", tr.rows.len()));
                }
                for (s, row) in tr.rows.iter().enumerate() {
                    let state = model.states.get(s).map(String::as_str).unwrap_or("?");
                    let path = format!("B.{}.{}", act.name, state);
                    if row.len() != n_states {
                        report.push(&path, format!("{} entries, expected {n_states}", row.len()));
                    }
                    for p in prob_problems(row) {
                        report.push(&path, p);
                    }
                }
            }
        }
    }
    for tr in &model.b.actions {
        if model.action(&tr.action).is_none() {
            report.push(format!("B.{}", tr.action), "transitions for undeclared action");
        }
    }
    if let Some(t) = &model.b.titration {
        if model.action(&t.action).is_none() {
            report.push("B.titration.action", format!("unknown action '{}'", t.action));
        }
        if model.channel(&t.channel).is_none() {
            report.push("B.titration.channel", format!("unknown channel '{}'", t.channel));
        }
        if t.effect_per_ul <= 0.0 || t.volume_ml <= 0.0 || t.resolution_ul <= 0.0 {
            report.push("B.titration", "effect, volume and resolution must be positive");
        }
    }

    // C
    for (i, e) in model.c.entries.iter().enumerate() {
        let path = format!("C.entries[{i}]");
        if !(0.0..=1.0).contains(&e.weight) {
            report.push(&path, format!("weight {} outside [0, 1]", e.weight));
        }
        if let Some(ch) = &e.channel {
            match model.channel(ch) {
                None => report.push(&path, format!("unknown channel '{ch}'")),
                Some(decl) => {
                    for set in [&e.prefer, &e.avoid].into_iter().flatten() {
                        for l in set.labels() {
                            if decl.outcome_index(&l).is_none() {
                                report.push(&path, format!("'{l}' is not an outcome of '{ch}'"));
                            }
                        }
                    }
                }
            }
        }
    }
    for ch in &model.channels {
        match model.c.channel(&ch.name) {
            None => report.push(format!("C.{}", ch.name), "missing preference prior"),
            Some(pref) => {
                let path = format!("C.{}", ch.name);
                if pref.log_probs.len() != ch.outcomes.len() {
                    report.push(&path, format!("{} entries, expected {}", pref.log_probs.len(), ch.outcomes.len()));
                }
                let mass: f64 = pref.log_probs.iter().map(|l| l.exp()).sum();
                if (mass - 1.0).abs() > PROB_TOL {
                    report.push(&path, format!("exponentiated priors sum to {mass}"));
                }
            }
        }
    }

    // D
    let d = &model.d.initial;
    if d.labels != model.states {
        report.push("D", "labels do not match declared states");
    }
    for p in d.problems() {
        report.push("D", p);
    }

    // policies
    for (i, pol) in policies.iter().enumerate() {
        let path = format!("policies[{i}] '{}'", pol.label);
        if pol.actions.is_empty() {
            report.push(&path, "empty action sequence");
        }
        for a in &pol.actions {
            if model.action(a).is_none() {
                report.push(&path, format!("action '{a}' is not declared"));
            }
        }
    }
    report
}
