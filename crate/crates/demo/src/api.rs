//! Target-independent implementations behind the exported functions.

use aif_core::agent::{self, Agent};
use aif_core::inference::{bayes_update, compute_vfe, surprise, Belief};
use aif_core::io::scenario::{load_scenario, ScenarioBundle};
use aif_core::lab_env::env_reset;
use aif_core::model::{Categorical, Observation};
use aif_core::planning::{expected_free_energy, hazard_mass, rank, rollout};
use serde_json::json;

const MAX_STEPS: usize = 8;

fn bundle() -> Result<ScenarioBundle, String> {
    load_scenario("lab_assay").map_err(|e| e.to_string())
}

/// Prior with `p` on the acidic state and the rest on the neutral one.
fn prior(b: &ScenarioBundle, p: f64) -> Result<Belief, String> {
    if !(0.0..=1.0).contains(&p) {
        return Err(format!("probability {p} outside [0, 1]"));
    }
    let probs = b
        .model
        .states
        .iter()
        .map(|s| match s.as_str() {
            "ph_acidic" => p,
            "ph_ok" => 1.0 - p,
            _ => 0.0,
        })
        .collect();
    let q = Categorical::new(b.model.states.clone(), probs).map_err(|e| e.to_string())?;
    Ok(Belief::new(q, 0))
}

pub fn channels() -> Result<String, String> {
    let b = bundle()?;
    let list: Vec<_> = b.model.channels.iter().map(|c| json!({ "name": c.name, "outcomes": c.outcomes })).collect();
    Ok(json!(list).to_string())
}

pub fn posterior(prior_acidic: f64, channel: &str, outcome: &str) -> Result<String, String> {
    let b = bundle()?;
    let belief = prior(&b, prior_acidic)?;
    let lik = b.model.likelihood(channel, outcome).map_err(|e| e.to_string())?;
    let obs = Observation::new(channel, outcome, 0);
    let predictive = b.model.predict_outcomes(channel, belief.probs()).map_err(|e| e.to_string())?;
    let post = bayes_update(&belief, &lik, &obs).map_err(|e| e.to_string())?;
    let vfe = compute_vfe(&post, &belief.posterior, &lik).map_err(|e| e.to_string())?;
    let s = surprise(&obs, &predictive).map_err(|e| e.to_string())?;
    Ok(json!({
        "labels": post.posterior.labels,
        "prior": belief.posterior.probs,
        "likelihood": lik,
        "posterior": post.posterior.probs,
        "surprise": s,
        "vfe": vfe,
    })
    .to_string())
}

pub fn score_policies(prior_acidic: f64, veto_mass: f64) -> Result<String, String> {
    let b = bundle()?;
    let belief = prior(&b, prior_acidic)?;
    let mut table = Vec::new();
    let mut hazards = Vec::new();
    for p in &b.policies {
        table.push(expected_free_energy(&b.model, &belief, p).map_err(|e| e.to_string())?);
        let r = rollout(&b.model, &belief, p).map_err(|e| e.to_string())?;
        hazards.push(hazard_mass(&b.model, &r));
    }
    let order = rank(&table);
    let chosen = order.iter().copied().find(|&i| hazards[i] <= veto_mass);
    let rows: Vec<_> = order
        .iter()
        .map(|&i| {
            let e = &table[i];
            json!({
                "policy": e.policy.label,
                "actions": e.policy.actions,
                "epistemic": e.epistemic,
                "pragmatic": e.pragmatic,
                "total": e.total,
                "hazard": hazards[i],
                "vetoed": hazards[i] > veto_mass,
            })
        })
        .collect();
    let fallback = b.agent.fallback_policy.clone();
    let selected = chosen.map(|i| table[i].policy.label.clone()).unwrap_or(fallback);
    Ok(json!({ "ranked": rows, "selected": selected }).to_string())
}

pub fn run_episode(seed: u64, initial_ph: f64, threshold: f64) -> Result<String, String> {
    let mut b = bundle()?;
    b.env.initial.ph = initial_ph;
    b.agent.threshold = threshold;
    let mut env = env_reset(&b.env, seed).map_err(|e| e.to_string())?;
    let mut a = Agent::new(b.model.clone(), b.policies.clone(), b.agent.clone());
    let (result, ledger) = agent::run_episode(&mut a, &mut env, MAX_STEPS).map_err(|e| e.to_string())?;
    let steps: Vec<_> = result
        .trace
        .events
        .iter()
        .map(|e| {
            json!({
                "step": e.step,
                "channel": e.observation.channel,
                "outcome": e.observation.outcome,
                "value": e.observation.value,
                "vfe": e.vfe.total,
                "prediction_error": e.prediction_error,
                "policy": e.active_policy,
                "action": e.action,
            })
        })
        .collect();
    let updates = agent::propagate_refinement(&mut a, &result.trace);
    Ok(json!({
        "summary": result.summary,
        "steps": steps,
        "ledger": ledger.rows,
        "ledger_table": ledger.render(),
        "refinement": updates,
    })
    .to_string())
}
