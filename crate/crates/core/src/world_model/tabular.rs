use crate::error::{Error, Result};
use crate::inference::bayes_update;
use crate::io::trace::EpisodeTrace;
use crate::model::GenerativeModel;
use crate::planning::rollout;

use super::{
    apply_to_model, observed_titration_effect, ParameterChange, RefinementSummary, WorldModel, WorldModelQuery,
    WorldModelResponse,
};

/// Exact provider: Bayes updates and rollouts computed from its own copy of
/// the generative model. Refinement replaces the titration effect with the
/// one observed in the episode.
#[derive(Debug, Clone)]
pub struct TabularProvider {
    model: GenerativeModel,
}

impl TabularProvider {
    pub fn new(model: GenerativeModel) -> Self {
        Self { model }
    }

    pub fn model(&self) -> &GenerativeModel {
        &self.model
    }
}

impl WorldModel for TabularProvider {
    fn name(&self) -> &str {
        "tabular"
    }

    fn infer(&mut self, query: &WorldModelQuery) -> Result<WorldModelResponse> {
        if let Some(policy) = &query.policy {
            let r = rollout(&self.model, &query.belief, policy)?;
            return Ok(WorldModelResponse {
                posterior: query.belief.posterior.clone(),
                rollout: Some(r),
                rationale: format!("exact rollout of {}", policy.label),
            });
        }
        let obs = query
            .history
            .last()
            .ok_or_else(|| Error::Validation("belief update without an observation".to_string()))?;
        let lik = self.model.likelihood(&obs.channel, &obs.outcome)?;
        let post = bayes_update(&query.belief, &lik, obs)?;
        Ok(WorldModelResponse {
            posterior: post.posterior,
            rollout: None,
            rationale: format!("exact Bayes update on {} = {}", obs.channel, obs.outcome),
        })
    }

    fn refine(&mut self, episode: &EpisodeTrace) -> RefinementSummary {
        let (Some(t), Some(observed)) =
            (self.model.b.titration.as_ref(), observed_titration_effect(&self.model, episode))
        else {
            return RefinementSummary::default();
        };
        if (observed - t.effect_per_ul).abs() < 1e-12 {
            return RefinementSummary::default();
        }
        let change =
            ParameterChange::TitrationEffect { reagent: t.reagent.clone(), from: t.effect_per_ul, to: observed };
        apply_to_model(&mut self.model, &change);
        RefinementSummary { changes: vec![change] }
    }

    fn apply(&mut self, change: &ParameterChange) {
        apply_to_model(&mut self.model, change);
    }
}
