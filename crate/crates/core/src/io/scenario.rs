//! Scenario files: one TOML document holding the generative model, the
//! candidate policies, the bench description and the agent settings.
//!
//! Matrices are written as named rows (`[A.<channel>]` has one array per
//! state, `[B.<action>]` one next-state array per current state) so a
//! scenario can be audited by eye. Loading always validates; a bundle that
//! comes back from [`load_scenario`] is well-formed.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::AgentConfig;
use crate::lab_env::{ChemistrySpec, CommandBinding, EnvSpec, InitialState, NoiseSpec, TimingSpec, CHANNELS};
use crate::lab_env::{FLUORESCENCE, PH_PROBE, TEMP_PROBE};
use crate::model::{
    validate_model, ActionDef, ActionTransition, Bins, Categorical, Channel, ChannelLikelihood, GenerativeModel,
    ObservationModel, OutcomeSet, Policy, PreferenceEntry, PreferenceModel, PriorBeliefs, TitrationModel,
    TransitionModel, ValidationReport,
};

/// Text of the bundled enzyme-assay scenario.
pub const LAB_ASSAY: &str = include_str!("../../scenarios/lab_assay.toml");

/// Scenarios addressable by bare name.
pub fn bundled(name: &str) -> Option<&'static str> {
    match name {
        "lab_assay" => Some(LAB_ASSAY),
        _ => None,
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("unknown scenario '{0}'")]
    Unknown(String),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("scenario failed validation:\n{0}")]
    Invalid(ValidationReport),
}

impl ScenarioError {
    /// True for malformed or inconsistent scenario content, as opposed to
    /// a scenario that could not be found or read.
    pub fn is_validation(&self) -> bool {
        matches!(self, ScenarioError::Parse { .. } | ScenarioError::Invalid(_))
    }
}

impl From<ScenarioError> for crate::Error {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Invalid(r) => crate::Error::Validation(r.to_string()),
            other => crate::Error::Config(other.to_string()),
        }
    }
}

/// Everything needed to run a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioBundle {
    pub name: String,
    pub model: GenerativeModel,
    pub env: EnvSpec,
    pub policies: Vec<Policy>,
    pub agent: AgentConfig,
}

// ---- file form -------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StatesSection {
    names: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelSpec {
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    outcomes: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bins: Option<Bins>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntrySpec {
    statement: String,
    weight: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    channel: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    prefer: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    avoid: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    prefer_range: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    avoid_range: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    budget_min: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PreferenceSection {
    entries: Vec<EntrySpec>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnvSection {
    initial: InitialState,
    noise: NoiseSpec,
    chemistry: ChemistrySpec,
    timing: TimingSpec,
    commands: Vec<CommandBinding>,
}

type Rows = BTreeMap<String, BTreeMap<String, Vec<f64>>>;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: String,
    states: StatesSection,
    channels: Vec<ChannelSpec>,
    actions: Vec<ActionDef>,
    #[serde(rename = "A")]
    a: Rows,
    #[serde(rename = "B")]
    b: Rows,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    titration: Option<TitrationModel>,
    #[serde(rename = "C")]
    c: PreferenceSection,
    #[serde(rename = "D")]
    d: BTreeMap<String, f64>,
    #[serde(default)]
    policies: Vec<Policy>,
    environment: EnvSection,
    agent: AgentConfig,
}

pub const DEFAULT_PROBE_BINS: Bins = Bins { start: 4.0, stop: 10.0, step: 0.1, decimals: 1 };
pub const DEFAULT_FLUORESCENCE_BINS: Bins = Bins { start: 0.0, stop: 100.0, step: 5.0, decimals: 0 };
pub const DEFAULT_TEMP_BINS: Bins = Bins { start: 0.0, stop: 100.0, step: 0.5, decimals: 1 };

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map(|l| l.chars().count()).unwrap_or(0) + 1;
    (line, column)
}

fn outcome_set(labels: Option<Vec<String>>, range: Option<[f64; 2]>) -> Option<OutcomeSet> {
    match (labels, range) {
        (Some(l), _) => Some(OutcomeSet::Labels(l)),
        (None, Some([lo, hi])) => Some(OutcomeSet::Range { lo, hi }),
        (None, None) => None,
    }
}

/// Named rows → matrix in `order`; unknown row names are reported.
fn rows_in_order(
    table: Option<&BTreeMap<String, Vec<f64>>>,
    order: &[String],
    path: &str,
    report: &mut ValidationReport,
) -> Vec<Vec<f64>> {
    let Some(table) = table else {
        return Vec::new();
    };
    for key in table.keys() {
        if !order.contains(key) {
            report.push(format!("{path}.{key}"), "row for undeclared state");
        }
    }
    order.iter().map(|s| table.get(s).cloned().unwrap_or_default()).collect()
}

fn from_file(file: ScenarioFile) -> Result<ScenarioBundle, ScenarioError> {
    let mut report = ValidationReport::default();
    let states = file.states.names;

    let channels: Vec<Channel> = file
        .channels
        .into_iter()
        .map(|c| match (c.outcomes, c.bins) {
            (Some(outcomes), None) => Channel { name: c.name, outcomes, bins: None },
            (None, Some(bins)) => Channel::binned(c.name, bins),
            (Some(outcomes), Some(bins)) => {
                if outcomes != bins.labels() {
                    report.push(format!("channels.{}", c.name), "outcomes disagree with bins");
                }
                Channel { name: c.name, outcomes, bins: Some(bins) }
            }
            (None, None) => {
                report.push(format!("channels.{}", c.name), "needs `outcomes` or `bins`");
                Channel { name: c.name, outcomes: Vec::new(), bins: None }
            }
        })
        .collect();

    let mut a = ObservationModel::default();
    for ch in &channels {
        if let Some(table) = file.a.get(&ch.name) {
            let columns = rows_in_order(Some(table), &states, &format!("A.{}", ch.name), &mut report);
            a.channels.push(ChannelLikelihood { channel: ch.name.clone(), columns });
        }
    }
    for key in file.a.keys() {
        if !channels.iter().any(|c| &c.name == key) {
            report.push(format!("A.{key}"), "likelihood for undeclared channel");
        }
    }

    let mut b = TransitionModel { actions: Vec::new(), titration: file.titration };
    for act in &file.actions {
        if let Some(table) = file.b.get(&act.name) {
            let rows = rows_in_order(Some(table), &states, &format!("B.{}", act.name), &mut report);
            b.actions.push(ActionTransition { action: act.name.clone(), rows });
        }
    }
    for key in file.b.keys() {
        if !file.actions.iter().any(|a| &a.name == key) {
            report.push(format!("B.{key}"), "transitions for undeclared action");
        }
    }

    let entries: Vec<PreferenceEntry> = file
        .c
        .entries
        .into_iter()
        .map(|e| PreferenceEntry {
            statement: e.statement,
            weight: e.weight,
            channel: e.channel,
            prefer: outcome_set(e.prefer, e.prefer_range),
            avoid: outcome_set(e.avoid, e.avoid_range),
            budget_min: e.budget_min,
        })
        .collect();
    let c = PreferenceModel::compile(entries, &channels);

    for key in file.d.keys() {
        if !states.contains(key) {
            report.push(format!("D.{key}"), "prior for undeclared state");
        }
    }
    let d = PriorBeliefs {
        initial: Categorical {
            labels: states.clone(),
            probs: states.iter().map(|s| file.d.get(s).copied().unwrap_or(0.0)).collect(),
        },
    };

    let model = GenerativeModel { states, actions: file.actions, channels, a, b, c, d };
    report.extend(validate_model(&model, &file.policies));

    let bins_of = |name: &str, default: Bins| model.channel(name).and_then(|c| c.bins).unwrap_or(default);
    let env = EnvSpec {
        name: file.name.clone(),
        initial: file.environment.initial,
        noise: file.environment.noise,
        chemistry: file.environment.chemistry,
        timing: file.environment.timing,
        probe_bins: bins_of(PH_PROBE, DEFAULT_PROBE_BINS),
        fluorescence_bins: bins_of(FLUORESCENCE, DEFAULT_FLUORESCENCE_BINS),
        temp_bins: bins_of(TEMP_PROBE, DEFAULT_TEMP_BINS),
        commands: file.environment.commands,
    };
    for p in env.problems() {
        report.push("environment", p);
    }
    for ch in &model.channels {
        if !CHANNELS.contains(&ch.name.as_str()) {
            report.push(format!("channels.{}", ch.name), "the bench cannot emit this channel");
        }
    }
    for act in &model.actions {
        if env.command(&act.name).is_none() {
            report.push(format!("environment.commands.{}", act.name), "no bench command for action");
        }
    }
    for cmd in &env.commands {
        if model.action(&cmd.action).is_none() {
            report.push(format!("environment.commands.{}", cmd.action), "command for undeclared action");
        }
    }
    for (path, msg) in file.agent.problems(&model, &file.policies) {
        report.push(path, msg);
    }

    if !report.is_empty() {
        return Err(ScenarioError::Invalid(report));
    }
    Ok(ScenarioBundle { name: file.name, model, env, policies: file.policies, agent: file.agent })
}

/// Parses and validates scenario text.
pub fn parse_scenario(text: &str) -> Result<ScenarioBundle, ScenarioError> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map(|s| line_col(text, s.start)).unwrap_or((0, 0));
        ScenarioError::Parse { line, column, message: e.message().to_string() }
    })?;
    from_file(file)
}

/// Loads a scenario from a file path, or a bundled one by bare name.
pub fn load_scenario(spec: &str) -> Result<ScenarioBundle, ScenarioError> {
    let path = Path::new(spec);
    if path.is_file() {
        let text =
            std::fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: spec.to_string(), source })?;
        return parse_scenario(&text);
    }
    if let Some(text) = bundled(spec) {
        return parse_scenario(text);
    }
    if path.components().count() == 1 && path.extension().is_none() {
        return Err(ScenarioError::Unknown(spec.to_string()));
    }
    Err(ScenarioError::Io {
        path: spec.to_string(),
        source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
    })
}

fn to_file(bundle: &ScenarioBundle) -> ScenarioFile {
    let m = &bundle.model;
    let named = |rows: &[Vec<f64>]| -> BTreeMap<String, Vec<f64>> {
        m.states.iter().cloned().zip(rows.iter().cloned()).collect()
    };
    let split = |set: &Option<OutcomeSet>| match set {
        Some(OutcomeSet::Labels(l)) => (Some(l.clone()), None),
        Some(OutcomeSet::Range { lo, hi }) => (None, Some([*lo, *hi])),
        None => (None, None),
    };
    ScenarioFile {
        name: bundle.name.clone(),
        states: StatesSection { names: m.states.clone() },
        channels: m
            .channels
            .iter()
            .map(|c| match c.bins {
                Some(bins) if bins.labels() == c.outcomes => {
                    ChannelSpec { name: c.name.clone(), outcomes: None, bins: Some(bins) }
                }
                bins => ChannelSpec { name: c.name.clone(), outcomes: Some(c.outcomes.clone()), bins },
            })
            .collect(),
        actions: m.actions.clone(),
        a: m.a.channels.iter().map(|l| (l.channel.clone(), named(&l.columns))).collect(),
        b: m.b.actions.iter().map(|t| (t.action.clone(), named(&t.rows))).collect(),
        titration: m.b.titration.clone(),
        c: PreferenceSection {
            entries: m
                .c
                .entries
                .iter()
                .map(|e| {
                    let (prefer, prefer_range) = split(&e.prefer);
                    let (avoid, avoid_range) = split(&e.avoid);
                    EntrySpec {
                        statement: e.statement.clone(),
                        weight: e.weight,
                        channel: e.channel.clone(),
                        prefer,
                        avoid,
                        prefer_range,
                        avoid_range,
                        budget_min: e.budget_min,
                    }
                })
                .collect(),
        },
        d: m.d.initial.labels.iter().cloned().zip(m.d.initial.probs.iter().copied()).collect(),
        policies: bundle.policies.clone(),
        environment: EnvSection {
            initial: bundle.env.initial.clone(),
            noise: bundle.env.noise.clone(),
            chemistry: bundle.env.chemistry.clone(),
            timing: bundle.env.timing.clone(),
            commands: bundle.env.commands.clone(),
        },
        agent: bundle.agent.clone(),
    }
}

/// Serializes a bundle back to scenario TOML.
pub fn save_scenario(bundle: &ScenarioBundle) -> String {
    toml::to_string(&to_file(bundle)).expect("scenario serializes")
}
