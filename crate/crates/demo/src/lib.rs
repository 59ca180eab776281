//! Browser demo for the assay agent.
//!
//! Three operations are exported to JavaScript, each returning a JSON string:
//! [`posterior`] explores a single Bayesian update, [`score_policies`] scores
//! the candidate policies from an adjustable belief, and [`run_episode`] runs
//! a full seeded episode and returns its steps and free-energy ledger.

use wasm_bindgen::prelude::*;

pub mod api;

fn js(r: Result<String, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

/// Channels of the bundled scenario with their outcomes.
#[wasm_bindgen]
pub fn channels() -> Result<String, JsError> {
    js(api::channels())
}

/// Updates a prior with `P(ph_acidic) = prior_acidic` on one reading.
#[wasm_bindgen]
pub fn posterior(prior_acidic: f64, channel: &str, outcome: &str) -> Result<String, JsError> {
    js(api::posterior(prior_acidic, channel, outcome))
}

/// Expected free energy of every candidate policy from the given belief,
/// with the executive veto applied at `veto_mass`.
#[wasm_bindgen]
pub fn score_policies(prior_acidic: f64, veto_mass: f64) -> Result<String, JsError> {
    js(api::score_policies(prior_acidic, veto_mass))
}

/// Runs one seeded episode from `initial_ph` with refinement threshold `threshold`.
#[wasm_bindgen]
pub fn run_episode(seed: u64, initial_ph: f64, threshold: f64) -> Result<String, JsError> {
    js(api::run_episode(seed, initial_ph, threshold))
}
