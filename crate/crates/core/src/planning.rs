//! Action: policy rollouts, expected free energy and argmin selection.
//!
//! Each action reads out one channel, so step `k` of a rollout predicts the
//! state distribution after action `k` and the outcome distribution of that
//! action's readout channel. Scoring is exact; nothing is sampled.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{kl_probs, Belief, EPS};
use crate::model::{Categorical, GenerativeModel, Policy};

/// Totals closer than this are treated as tied.
pub const TIE_TOL: f64 = 1e-9;

/// Scored expected free energy of one policy, in nats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfeBreakdown {
    pub policy: Policy,
    /// Expected information gain (≥ 0).
    pub epistemic: f64,
    /// Expected log-preference of predicted outcomes.
    pub pragmatic: f64,
    /// `-epistemic - pragmatic`.
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutStep {
    pub action: String,
    pub channel: String,
    /// Predicted states after the action.
    pub states: Categorical,
    /// Predicted outcomes on `channel`.
    pub observations: Categorical,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Rollout {
    pub steps: Vec<RolloutStep>,
}

impl Rollout {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

fn check_policy(model: &GenerativeModel, policy: &Policy) -> Result<()> {
    if policy.actions.is_empty() {
        return Err(Error::Validation(format!("policy '{}' has no actions", policy.label)));
    }
    for a in &policy.actions {
        if model.action(a).is_none() {
            return Err(Error::Validation(format!("policy '{}' uses undeclared action '{a}'", policy.label)));
        }
    }
    Ok(())
}

/// Pushes `belief` through the policy's transitions and readouts.
pub fn rollout(model: &GenerativeModel, belief: &Belief, policy: &Policy) -> Result<Rollout> {
    check_policy(model, policy)?;
    let mut q = belief.probs().to_vec();
    let mut steps = Vec::with_capacity(policy.horizon());
    for action in &policy.actions {
        q = model.predict_states(action, &q)?;
        let channel = model.readout(action)?;
        let observations = model.predict_outcomes(channel, &q)?;
        steps.push(RolloutStep {
            action: action.clone(),
            channel: channel.to_string(),
            states: model.state_categorical(q.clone()),
            observations,
        });
    }
    Ok(Rollout { steps })
}

/// Expected KL between the Bayes posterior after each predicted outcome and
/// the predicted states, summed over steps.
pub fn information_gain(model: &GenerativeModel, rollout: &Rollout) -> Result<f64> {
    let mut total = 0.0;
    for step in &rollout.steps {
        let q = &step.states.probs;
        let lik = model
            .a
            .channel(&step.channel)
            .ok_or_else(|| Error::Shape(format!("no likelihood for channel '{}'", step.channel)))?;
        if lik.columns.len() != q.len() {
            return Err(Error::Shape(format!(
                "{} predicted states against {} likelihood columns",
                q.len(),
                lik.columns.len()
            )));
        }
        let n_out = step.observations.len();
        let mut post = vec![0.0; q.len()];
        for o in 0..n_out {
            let mut mass = 0.0;
            for (s, col) in lik.columns.iter().enumerate() {
                post[s] = q[s] * col[o];
                mass += post[s];
            }
            if mass <= 0.0 {
                continue;
            }
            for p in &mut post {
                *p /= mass;
            }
            total += mass * kl_probs(&post, q);
        }
    }
    Ok(total)
}

/// `Σ_k Σ_o Q(o) ln P(o|C)` over each step's readout channel.
pub fn pragmatic_value(model: &GenerativeModel, rollout: &Rollout) -> Result<f64> {
    let mut total = 0.0;
    for step in &rollout.steps {
        let logc = model.log_preferences(&step.channel)?;
        if logc.len() != step.observations.len() {
            return Err(Error::Shape(format!(
                "{} preferences for {} outcomes on '{}'",
                logc.len(),
                step.observations.len(),
                step.channel
            )));
        }
        total += step.observations.probs.iter().zip(logc).map(|(q, c)| q * c.max(EPS.ln())).sum::<f64>();
    }
    Ok(total)
}

/// Scores an already computed rollout.
pub fn score_rollout(model: &GenerativeModel, rollout: &Rollout, policy: &Policy) -> Result<EfeBreakdown> {
    let epistemic = information_gain(model, rollout)?;
    let pragmatic = pragmatic_value(model, rollout)?;
    Ok(EfeBreakdown { policy: policy.clone(), epistemic, pragmatic, total: -epistemic - pragmatic })
}

pub fn expected_free_energy(model: &GenerativeModel, belief: &Belief, policy: &Policy) -> Result<EfeBreakdown> {
    score_rollout(model, &rollout(model, belief, policy)?, policy)
}

/// Candidate indices sorted by total EFE; ties keep declaration order.
pub fn rank(table: &[EfeBreakdown]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..table.len()).collect();
    order.sort_by(|&i, &j| {
        let (a, b) = (table[i].total, table[j].total);
        if (a - b).abs() <= TIE_TOL {
            i.cmp(&j)
        } else {
            a.total_cmp(&b)
        }
    });
    order
}

/// Index of the minimum total; the earliest wins within [`TIE_TOL`].
pub fn argmin(table: &[EfeBreakdown]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, row) in table.iter().enumerate() {
        match best {
            Some(b) if row.total >= table[b].total - TIE_TOL => {}
            _ => best = Some(i),
        }
    }
    best
}

/// Scores every candidate and returns the EFE minimizer with the full table.
pub fn select_policy(
    model: &GenerativeModel,
    belief: &Belief,
    candidates: &[Policy],
) -> Result<(Policy, Vec<EfeBreakdown>)> {
    if candidates.is_empty() {
        return Err(Error::NoPolicy);
    }
    let table = candidates.iter().map(|p| expected_free_energy(model, belief, p)).collect::<Result<Vec<_>>>()?;
    let best = argmin(&table).ok_or(Error::NoPolicy)?;
    Ok((candidates[best].clone(), table))
}

/// All action sequences of length `horizon` in lexicographic declaration
/// order, truncated at `max_count`. Labels join action names with `+`.
pub fn enumerate_policies(model: &GenerativeModel, horizon: usize, max_count: usize) -> Vec<Policy> {
    let names = model.action_names();
    let mut out = Vec::new();
    if names.is_empty() || horizon == 0 {
        return out;
    }
    let mut idx = vec![0usize; horizon];
    while out.len() < max_count {
        let actions: Vec<String> = idx.iter().map(|&i| names[i].clone()).collect();
        out.push(Policy { label: actions.join("+"), actions });
        // odometer increment, last position fastest
        let mut pos = horizon;
        loop {
            if pos == 0 {
                return out;
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < names.len() {
                break;
            }
            idx[pos] = 0;
        }
    }
    out
}

/// Largest predicted probability placed on any avoided outcome along the
/// rollout; the quantity the safety veto thresholds.
pub fn hazard_mass(model: &GenerativeModel, rollout: &Rollout) -> f64 {
    rollout
        .steps
        .iter()
        .filter_map(|step| {
            let pref = model.c.channel(&step.channel)?;
            step.observations.probs.iter().zip(&pref.hazards).filter(|(_, h)| **h).map(|(p, _)| *p).reduce(f64::max)
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::{labels, two_state_model};
    use crate::model::*;

    fn identity_model() -> GenerativeModel {
        let mut m = two_state_model();
        for tr in &mut m.b.actions {
            tr.rows = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        }
        m
    }

    fn belief(m: &GenerativeModel, probs: &[f64]) -> Belief {
        Belief::new(m.state_categorical(probs.to_vec()), 0)
    }

    #[test]
    fn identity_dynamics_keep_the_belief() {
        let m = identity_model();
        let b = belief(&m, &[0.3, 0.7]);
        let r = rollout(&m, &b, &Policy::new("p", &["measure_ph", "titrate_naoh"])).unwrap();
        assert_eq!(r.len(), 2);
        for s in &r.steps {
            assert_eq!(s.states.probs, vec![0.3, 0.7]);
        }
    }

    #[test]
    fn deterministic_chain() {
        let mut m = two_state_model();
        m.b.actions[0].rows = vec![vec![0.0, 1.0], vec![0.0, 1.0]];
        let r = rollout(&m, &belief(&m, &[1.0, 0.0]), &Policy::new("p", &["measure_ph"])).unwrap();
        assert_eq!(r.steps[0].states.probs, vec![0.0, 1.0]);
    }

    #[test]
    fn rollout_rejects_unknown_action() {
        let m = two_state_model();
        let err = rollout(&m, &belief(&m, &[0.5, 0.5]), &Policy::new("p", &["titrate_HCl"]));
        assert!(matches!(err, Err(Error::Validation(_))));
    }

    #[test]
    fn information_gain_examples() {
        let mut m = identity_model();
        let pol = Policy::new("p", &["measure_ph"]);
        let r = rollout(&m, &belief(&m, &[1.0, 0.0]), &pol).unwrap();
        assert_eq!(information_gain(&m, &r).unwrap(), 0.0);

        m.a.channels[0].columns = vec![vec![0.2, 0.5, 0.3], vec![0.2, 0.5, 0.3]];
        let r = rollout(&m, &belief(&m, &[0.5, 0.5]), &pol).unwrap();
        assert!(information_gain(&m, &r).unwrap().abs() < 1e-15);

        m.channels[0] = Channel::new("indicatorColor", &["yellow", "green"]);
        m.a.channels[0].columns = vec![vec![0.9, 0.1], vec![0.1, 0.9]];
        m.c = PreferenceModel::compile(Vec::new(), &m.channels);
        let r = rollout(&m, &belief(&m, &[0.5, 0.5]), &pol).unwrap();
        let ig = information_gain(&m, &r).unwrap();
        assert!((ig - 0.3681).abs() < 5e-5, "{ig}");
    }

    #[test]
    fn pragmatic_value_examples() {
        let mut m = identity_model();
        m.c = PreferenceModel::compile(Vec::new(), &m.channels);
        let pol = Policy::new("p", &["measure_ph"]);
        let r = rollout(&m, &belief(&m, &[0.3, 0.7]), &pol).unwrap();
        assert!((pragmatic_value(&m, &r).unwrap() - (1.0f64 / 3.0).ln()).abs() < 1e-12);

        let mut m = identity_model();
        m.a.channels[0].columns = vec![vec![0.0, 1.0, 0.0], vec![0.0, 1.0, 0.0]];
        let r = rollout(&m, &belief(&m, &[0.3, 0.7]), &pol).unwrap();
        let best = m.c.channel("indicatorColor").unwrap().log_probs[1];
        assert!((pragmatic_value(&m, &r).unwrap() - best).abs() < 1e-12);
    }

    #[test]
    fn degenerate_policies_tie() {
        let mut m = identity_model();
        m.c = PreferenceModel::compile(Vec::new(), &m.channels);
        let b = belief(&m, &[1.0, 0.0]);
        let pols = vec![
            Policy::new("a", &["measure_ph", "titrate_naoh"]),
            Policy::new("b", &["titrate_naoh", "titrate_naoh"]),
        ];
        let (chosen, table) = select_policy(&m, &b, &pols).unwrap();
        let expect = -2.0 * (1.0f64 / 3.0).ln();
        for row in &table {
            assert!((row.total - expect).abs() < 1e-12);
            assert_eq!(row.total, -row.epistemic - row.pragmatic);
        }
        assert_eq!(chosen.label, "a");
    }

    #[test]
    fn selection_edge_cases() {
        let m = two_state_model();
        let b = belief(&m, &[0.5, 0.5]);
        assert!(matches!(select_policy(&m, &b, &[]), Err(Error::NoPolicy)));
        let only = vec![Policy::new("only", &["titrate_naoh"])];
        assert_eq!(select_policy(&m, &b, &only).unwrap().0.label, "only");
    }

    #[test]
    fn argmin_prefers_first_within_tolerance() {
        let row = |label: &str, total: f64| EfeBreakdown {
            policy: Policy::new(label, &["x"]),
            epistemic: 0.0,
            pragmatic: -total,
            total,
        };
        let t = vec![row("a", 1.0 + 5e-10), row("b", 1.0), row("c", 0.5)];
        assert_eq!(argmin(&t[..2]), Some(0));
        assert_eq!(argmin(&t), Some(2));
        assert_eq!(rank(&t), vec![2, 0, 1]);
    }

    #[test]
    fn enumeration_is_lexicographic() {
        let m = two_state_model();
        let one = enumerate_policies(&m, 1, 10);
        assert_eq!(one.len(), 2);
        assert_eq!(one[0].actions, labels(&["measure_ph"]));
        assert_eq!(one[1].actions, labels(&["titrate_naoh"]));

        let mut m3 = m.clone();
        m3.actions.push(ActionDef { name: "wait".into(), readout: "indicatorColor".into() });
        let five = enumerate_policies(&m3, 2, 5);
        let got: Vec<_> = five.iter().map(|p| p.label.as_str()).collect();
        assert_eq!(
            got,
            vec![
                "measure_ph+measure_ph",
                "measure_ph+titrate_naoh",
                "measure_ph+wait",
                "titrate_naoh+measure_ph",
                "titrate_naoh+titrate_naoh"
            ]
        );
        assert_eq!(enumerate_policies(&m3, 2, 100).len(), 9);
    }
}
