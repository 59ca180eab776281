use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::trace::EpisodeTrace;
use crate::model::{Categorical, GenerativeModel};
use crate::planning::{Rollout, RolloutStep};

use super::{RefinementSummary, WorldModel, WorldModelQuery, WorldModelResponse};

#[derive(Serialize)]
struct WireObservation<'a> {
    channel: &'a str,
    outcome: &'a str,
    t: u64,
}

#[derive(Serialize, Deserialize)]
struct WireDistribution {
    labels: Vec<String>,
    probs: Vec<f64>,
}

#[derive(Serialize)]
struct WirePolicy<'a> {
    label: &'a str,
    actions: &'a [String],
}

#[derive(Serialize)]
struct WireRequest<'a> {
    history: Vec<WireObservation<'a>>,
    belief: WireDistribution,
    #[serde(skip_serializing_if = "Option::is_none")]
    policy: Option<WirePolicy<'a>>,
}

#[derive(Deserialize)]
struct WireStep {
    states: BTreeMap<String, f64>,
    observations: BTreeMap<String, f64>,
}

#[derive(Deserialize)]
struct WireResponse {
    posterior: WireDistribution,
    #[serde(default)]
    rollout: Option<Vec<WireStep>>,
    #[serde(default)]
    rationale: String,
}

/// Serializes a query into the request document.
pub fn encode_request(query: &WorldModelQuery) -> String {
    let req = WireRequest {
        history: query
            .history
            .iter()
            .map(|o| WireObservation { channel: &o.channel, outcome: &o.outcome, t: o.t })
            .collect(),
        belief: WireDistribution {
            labels: query.belief.posterior.labels.clone(),
            probs: query.belief.posterior.probs.clone(),
        },
        policy: query.policy.as_ref().map(|p| WirePolicy { label: &p.label, actions: &p.actions }),
    };
    serde_json::to_string(&req).expect("request serializes")
}

fn provider_error(message: impl Into<String>, payload: &str) -> Error {
    Error::Provider { message: message.into(), payload: payload.to_string() }
}

fn ordered(map: &BTreeMap<String, f64>, labels: &[String], what: &str, payload: &str) -> Result<Categorical> {
    if map.len() != labels.len() {
        return Err(provider_error(format!("{what}: {} labels, expected {}", map.len(), labels.len()), payload));
    }
    let probs = labels
        .iter()
        .map(|l| map.get(l).copied().ok_or_else(|| provider_error(format!("{what}: missing '{l}'"), payload)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Categorical { labels: labels.to_vec(), probs })
}

/// Parses a response document into the engine's form. Values are carried
/// over as sent; validation happens separately.
pub fn decode_response(model: &GenerativeModel, query: &WorldModelQuery, body: &str) -> Result<WorldModelResponse> {
    let wire: WireResponse =
        serde_json::from_str(body).map_err(|e| provider_error(format!("malformed response: {e}"), body))?;
    let rollout = match (&query.policy, wire.rollout) {
        (Some(policy), Some(steps)) => {
            if steps.len() != policy.actions.len() {
                return Err(provider_error(
                    format!("rollout has {} steps, policy has {}", steps.len(), policy.actions.len()),
                    body,
                ));
            }
            let mut out = Vec::with_capacity(steps.len());
            for (step, action) in steps.iter().zip(&policy.actions) {
                let channel = model.readout(action)?;
                let outcomes = &model.channel(channel).expect("readout channel is declared").outcomes;
                out.push(RolloutStep {
                    action: action.clone(),
                    channel: channel.to_string(),
                    states: ordered(&step.states, &model.states, "rollout states", body)?,
                    observations: ordered(&step.observations, outcomes, "rollout observations", body)?,
                });
            }
            Some(Rollout { steps: out })
        }
        _ => None,
    };
    Ok(WorldModelResponse {
        posterior: Categorical { labels: wire.posterior.labels, probs: wire.posterior.probs },
        rollout,
        rationale: wire.rationale,
    })
}

/// Sends each query as a JSON POST to a fixed endpoint.
pub struct RemoteProvider {
    model: GenerativeModel,
    url: String,
    agent: ureq::Agent,
    /// Episodes handed to `refine`; forwarding them is left to the endpoint.
    pub recorded: Vec<EpisodeTrace>,
}

impl RemoteProvider {
    pub fn new(model: GenerativeModel, url: impl Into<String>, timeout: Duration) -> Self {
        let agent: ureq::Agent =
            ureq::Agent::config_builder().timeout_global(Some(timeout)).http_status_as_error(false).build().into();
        Self { model, url: url.into(), agent, recorded: Vec::new() }
    }
}

impl WorldModel for RemoteProvider {
    fn name(&self) -> &str {
        "remote"
    }

    fn infer(&mut self, query: &WorldModelQuery) -> Result<WorldModelResponse> {
        let body = encode_request(query);
        let mut resp = self
            .agent
            .post(&self.url)
            .header("content-type", "application/json")
            .send(body.as_str())
            .map_err(|e| provider_error(format!("request failed: {e}"), ""))?;
        let status = resp.status();
        let text =
            resp.body_mut().read_to_string().map_err(|e| provider_error(format!("reading response: {e}"), ""))?;
        if !status.is_success() {
            return Err(provider_error(format!("endpoint returned {status}"), &text));
        }
        decode_response(&self.model, query, &text)
    }

    fn refine(&mut self, episode: &EpisodeTrace) -> RefinementSummary {
        self.recorded.push(episode.clone());
        RefinementSummary::default()
    }
}
