//! Perception: Bayesian belief updating, KL divergence, surprise and
//! variational free energy over categorical beliefs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Categorical, Observation};

/// Floor substituted for zero probabilities before taking logarithms.
pub const EPS: f64 = 1e-12;

/// Absolute tolerance for comparing beliefs.
pub const BELIEF_TOL: f64 = 1e-6;

#[inline]
pub fn ln_floor(p: f64) -> f64 {
    p.max(EPS).ln()
}

/// Posterior over hidden states at a given step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Belief {
    pub posterior: Categorical,
    pub timestamp: u64,
}

impl Belief {
    pub fn new(posterior: Categorical, timestamp: u64) -> Self {
        Self { posterior, timestamp }
    }

    pub fn probs(&self) -> &[f64] {
        &self.posterior.probs
    }
}

/// Free energy split into its two terms, in nats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VfeReport {
    pub complexity: f64,
    pub accuracy: f64,
    pub total: f64,
}

/// `Σ q ln(q/p)` over raw vectors; zero-mass terms of `q` contribute nothing.
pub fn kl_probs(q: &[f64], p: &[f64]) -> f64 {
    let kl: f64 =
        q.iter().zip(p).filter(|(qi, _)| **qi > 0.0).map(|(qi, pi)| qi * (ln_floor(*qi) - ln_floor(*pi))).sum();
    // Rounding can leave a tiny negative residue when q == p.
    kl.max(0.0)
}

/// Shannon entropy in nats.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|x| **x > 0.0).map(|x| x * x.ln()).sum::<f64>()
}

pub fn kl_divergence(q: &Categorical, p: &Categorical) -> Result<f64> {
    if !q.same_support(p) || q.len() != p.len() {
        return Err(Error::Shape(format!("KL over mismatched label sets {:?} and {:?}", q.labels, p.labels)));
    }
    Ok(kl_probs(&q.probs, &p.probs))
}

/// Posterior ∝ prior × likelihood; the timestamp advances by one.
pub fn bayes_update(prior: &Belief, likelihood: &[f64], obs: &Observation) -> Result<Belief> {
    let q = &prior.posterior;
    if likelihood.len() != q.len() {
        return Err(Error::Shape(format!("likelihood of length {} for {} states", likelihood.len(), q.len())));
    }
    if let Some(bad) = likelihood.iter().find(|l| !(0.0..=1.0).contains(*l)) {
        return Err(Error::InvalidDistribution(format!("likelihood entry {bad} outside [0, 1]")));
    }
    let joint: Vec<f64> = q.probs.iter().zip(likelihood).map(|(p, l)| p * l).collect();
    let mass: f64 = joint.iter().sum();
    if mass <= 0.0 {
        return Err(Error::ImpossibleObservation(format!(
            "'{}' on {} has zero probability under the current belief",
            obs.outcome, obs.channel
        )));
    }
    let posterior = Categorical { labels: q.labels.clone(), probs: joint.iter().map(|j| j / mass).collect() };
    Ok(Belief { posterior, timestamp: prior.timestamp + 1 })
}

/// Complexity `KL(posterior ‖ prior)` minus accuracy `E_q[ln P(o|s)]`.
pub fn compute_vfe(belief: &Belief, prior: &Categorical, likelihood: &[f64]) -> Result<VfeReport> {
    let q = &belief.posterior;
    if likelihood.len() != q.len() {
        return Err(Error::Shape(format!("likelihood of length {} for {} states", likelihood.len(), q.len())));
    }
    let complexity = kl_divergence(q, prior)?;
    let accuracy: f64 = q.probs.iter().zip(likelihood).map(|(p, l)| p * ln_floor(*l)).sum();
    Ok(VfeReport { complexity, accuracy, total: complexity - accuracy })
}

/// `-ln predictive[obs.outcome]`, floored.
pub fn surprise(obs: &Observation, predictive: &Categorical) -> Result<f64> {
    let p = predictive
        .prob(&obs.outcome)
        .ok_or_else(|| Error::Shape(format!("'{}' is not an outcome of the predictive distribution", obs.outcome)))?;
    Ok(-ln_floor(p))
}
