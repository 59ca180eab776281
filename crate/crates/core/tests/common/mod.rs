//! Shared test support: random generative models, a brute-force expected
//! free energy oracle, and randomized property checks.

#![allow(dead_code)]

use aif_core::inference::{bayes_update, kl_divergence, Belief};
use aif_core::io::scenario::{load_scenario, ScenarioBundle};
use aif_core::model::{
    ActionDef, ActionTransition, Categorical, Channel, ChannelLikelihood, GenerativeModel, Observation,
    ObservationModel, Policy, PreferenceModel, PriorBeliefs, TransitionModel,
};
use aif_core::planning::{argmin, enumerate_policies, expected_free_energy, information_gain, rollout, EfeBreakdown};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn lab() -> ScenarioBundle {
    load_scenario("lab_assay").expect("bundled scenario loads")
}

fn names(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

/// Random distribution of length `n`; about one entry in five is zeroed.
pub fn random_dist(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let raw: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.2) { 0.0 } else { rng.random::<f64>() }).collect();
        let total: f64 = raw.iter().sum();
        if total > 1e-6 {
            return raw.iter().map(|r| r / total).collect();
        }
    }
}

/// A random model with up to 4 states, 3 actions, 3 outcomes per channel.
/// Each action reads out its own channel.
pub fn random_model(rng: &mut ChaCha8Rng) -> GenerativeModel {
    let n_s = rng.random_range(1..=4);
    let n_a = rng.random_range(1..=3);
    let states = names("s", n_s);
    let mut actions = Vec::new();
    let mut channels = Vec::new();
    let mut a = ObservationModel::default();
    let mut b = TransitionModel::default();
    let mut prefs = Vec::new();
    for k in 0..n_a {
        let n_o = rng.random_range(1..=3);
        let ch = format!("c{k}");
        let outcomes = names("o", n_o);
        channels.push(Channel { name: ch.clone(), outcomes, bins: None });
        actions.push(ActionDef { name: format!("a{k}"), readout: ch.clone() });
        a.channels.push(ChannelLikelihood {
            channel: ch.clone(),
            columns: (0..n_s).map(|_| random_dist(rng, n_o)).collect(),
        });
        b.actions.push(ActionTransition {
            action: format!("a{k}"),
            rows: (0..n_s).map(|_| random_dist(rng, n_s)).collect(),
        });
        prefs.push((ch, random_dist(rng, n_o).iter().map(|p| p.ln()).collect()));
    }
    let d = Categorical::new(states.clone(), random_dist(rng, n_s)).expect("valid prior");
    GenerativeModel {
        states,
        actions,
        channels,
        a,
        b,
        c: PreferenceModel::from_log_priors(prefs),
        d: PriorBeliefs { initial: d },
    }
}

fn xlogx(p: f64) -> f64 {
    if p > 0.0 {
        p * p.ln()
    } else {
        0.0
    }
}

fn entropy(p: &[f64]) -> f64 {
    -p.iter().map(|&x| xlogx(x)).sum::<f64>()
}

/// Expected free energy by enumerating every hidden-state path.
///
/// For each step the joint of (state, outcome) is accumulated over whole
/// paths; the epistemic term is the mutual information `H(O) - H(O|S)` and the
/// pragmatic term is the expected log-preference with `ln 1e-12` as a floor.
pub fn oracle_efe(model: &GenerativeModel, q0: &[f64], policy: &Policy) -> f64 {
    let n = model.states.len();
    let horizon = policy.actions.len();
    let floor = 1e-12_f64.ln();
    let mut g = 0.0;
    for k in 0..horizon {
        let action = &policy.actions[k];
        let channel = &model.actions.iter().find(|a| &a.name == action).unwrap().readout;
        let lik = &model.a.channels.iter().find(|c| &c.channel == channel).unwrap().columns;
        let logc = &model.c.channels.iter().find(|c| &c.channel == channel).unwrap().log_probs;
        let n_o = lik[0].len();
        // Marginal of the state after step k, summed over all paths s0..s_{k+1}.
        let mut p_state = vec![0.0; n];
        let mut path = vec![0usize; k + 2];
        loop {
            let mut p = q0[path[0]];
            for j in 0..=k {
                let rows = &model.b.actions.iter().find(|t| t.action == policy.actions[j]).unwrap().rows;
                p *= rows[path[j]][path[j + 1]];
            }
            p_state[path[k + 1]] += p;
            // odometer over path positions
            let mut i = 0;
            while i < path.len() {
                path[i] += 1;
                if path[i] < n {
                    break;
                }
                path[i] = 0;
                i += 1;
            }
            if i == path.len() {
                break;
            }
        }
        let mut p_out = vec![0.0; n_o];
        let mut h_cond = 0.0;
        for s in 0..n {
            for o in 0..n_o {
                p_out[o] += p_state[s] * lik[s][o];
            }
            h_cond += p_state[s] * entropy(&lik[s]);
        }
        let mi = entropy(&p_out) - h_cond;
        let pv: f64 = p_out.iter().zip(logc).map(|(p, c)| p * c.max(floor)).sum();
        g += -mi - pv;
    }
    g
}

/// Random policies over the model's actions, horizon 1 or 2.
pub fn random_policies(rng: &mut ChaCha8Rng, model: &GenerativeModel) -> Vec<Policy> {
    let h = rng.random_range(1..=2);
    enumerate_policies(model, h, 9)
}

fn prior_belief(model: &GenerativeModel) -> Belief {
    Belief::new(model.d.initial.clone(), 0)
}

/// Largest |engine - oracle| over `count` random models and all their
/// horizon-1/2 policies.
pub fn oracle_max_error(count: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let model = random_model(&mut r);
        let belief = prior_belief(&model);
        for p in random_policies(&mut r, &model) {
            let engine = expected_free_energy(&model, &belief, &p).expect("engine scores").total;
            let oracle = oracle_efe(&model, belief.probs(), &p);
            worst = worst.max((engine - oracle).abs());
        }
    }
    worst
}

fn scores(model: &GenerativeModel, belief: &Belief, policies: &[Policy]) -> Vec<EfeBreakdown> {
    policies.iter().map(|p| expected_free_energy(model, belief, p).expect("engine scores")).collect()
}

/// KL is non-negative and zero exactly when the distributions coincide.
pub fn prop_kl(count: usize, seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    for i in 0..count {
        let n = r.random_range(1..=5);
        let labels = names("x", n);
        let q = Categorical::new(labels.clone(), random_dist(&mut r, n)).unwrap();
        // p strictly positive so KL(q||p) is finite
        let p_raw: Vec<f64> = random_dist(&mut r, n).iter().map(|v| v + 0.05).collect();
        let total: f64 = p_raw.iter().sum();
        let p = Categorical::new(labels, p_raw.iter().map(|v| v / total).collect()).unwrap();
        let kl = kl_divergence(&q, &p).map_err(|e| e.to_string())?;
        let same = q.probs.iter().zip(&p.probs).all(|(a, b)| (a - b).abs() <= 1e-9);
        if kl < 0.0 {
            return Err(format!("instance {i}: KL = {kl} < 0"));
        }
        if same != (kl <= 1e-9) {
            return Err(format!("instance {i}: KL = {kl} but distributions equal = {same}"));
        }
        let self_kl = kl_divergence(&q, &q).map_err(|e| e.to_string())?;
        if self_kl.abs() > 1e-9 {
            return Err(format!("instance {i}: KL(q||q) = {self_kl}"));
        }
    }
    Ok(())
}

/// Information gain is never negative.
pub fn prop_information_gain(count: usize, seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    for i in 0..count {
        let model = random_model(&mut r);
        let belief = prior_belief(&model);
        for p in random_policies(&mut r, &model) {
            let ro = rollout(&model, &belief, &p).map_err(|e| e.to_string())?;
            let ig = information_gain(&model, &ro).map_err(|e| e.to_string())?;
            if ig < 0.0 {
                return Err(format!("instance {i}: IG = {ig} for '{}'", p.label));
            }
        }
    }
    Ok(())
}

/// Uniform preferences on every channel: the winning policy is the one with
/// the most information gain, so the argmin must match that.
pub fn prop_uniform_c(count: usize, seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    for i in 0..count {
        let mut model = random_model(&mut r);
        model.c = PreferenceModel::from_log_priors(
            model
                .channels
                .iter()
                .map(|c| (c.name.clone(), vec![-(c.outcomes.len() as f64).ln(); c.outcomes.len()]))
                .collect(),
        );
        // Keep every channel the same size so the constant PV is shared.
        let policies = enumerate_policies(&model, 1, 9);
        let sizes: Vec<usize> = model.channels.iter().map(|c| c.outcomes.len()).collect();
        if sizes.iter().any(|s| *s != sizes[0]) {
            continue;
        }
        let belief = prior_belief(&model);
        let table = scores(&model, &belief, &policies);
        let chosen = argmin(&table).ok_or("empty table")?;
        let best_ig = table.iter().map(|e| e.epistemic).fold(f64::MIN, f64::max);
        if table[chosen].epistemic < best_ig - 1e-9 {
            return Err(format!("instance {i}: argmin IG {} < best {best_ig}", table[chosen].epistemic));
        }
    }
    Ok(())
}

/// A belief concentrated on one state, pushed through deterministic
/// transitions, leaves nothing to learn: epistemic value is zero.
pub fn prop_delta_belief(count: usize, seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    for i in 0..count {
        let mut model = random_model(&mut r);
        let n = model.states.len();
        for t in &mut model.b.actions {
            let perm: Vec<usize> = (0..n).map(|s| (s + r.random_range(0..n)) % n).collect();
            t.rows = (0..n).map(|s| (0..n).map(|j| if j == perm[s] { 1.0 } else { 0.0 }).collect()).collect();
        }
        let s0 = r.random_range(0..n);
        let belief = Belief::new(Categorical::delta(model.states.clone(), s0), 0);
        for p in random_policies(&mut r, &model) {
            let e = expected_free_energy(&model, &belief, &p).map_err(|e| e.to_string())?;
            if e.epistemic.abs() > 1e-9 {
                return Err(format!("instance {i}: epistemic {} under a delta belief", e.epistemic));
            }
        }
    }
    Ok(())
}

/// Shifting every finite log-preference by one constant moves all policies
/// of one horizon equally, so the argmin is unchanged.
pub fn prop_shift_c(count: usize, seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    for i in 0..count {
        let mut model = random_model(&mut r);
        // Finite log-preferences only: a zero-probability outcome sits on the
        // ln 1e-12 floor, which a shift cannot move.
        let finite = model
            .channels
            .iter()
            .map(|c| {
                let n = c.outcomes.len();
                let p: Vec<f64> = random_dist(&mut r, n).iter().map(|v| (v + 0.05) / (1.0 + 0.05 * n as f64)).collect();
                (c.name.clone(), p.iter().map(|v| v.ln()).collect())
            })
            .collect();
        model.c = PreferenceModel::from_log_priors(finite);
        let belief = prior_belief(&model);
        let policies = random_policies(&mut r, &model);
        let shift = r.random_range(-5.0..5.0);
        let mut shifted = model.clone();
        shifted.c = model.c.shifted(shift);
        let a = argmin(&scores(&model, &belief, &policies));
        let b = argmin(&scores(&shifted, &belief, &policies));
        if a != b {
            return Err(format!("instance {i}: argmin {a:?} became {b:?} after shift {shift}"));
        }
    }
    Ok(())
}

/// Posterior on the second state after observing an outcome with the given
/// per-state likelihoods.
pub fn posterior_second(prior: [f64; 2], lik: [f64; 2]) -> f64 {
    let labels = vec!["ph_ok".to_string(), "ph_acidic".to_string()];
    let belief = Belief::new(Categorical::new(labels, prior.to_vec()).unwrap(), 0);
    let post = bayes_update(&belief, &lik, &Observation::new("indicatorColor", "yellow", 0)).unwrap();
    post.posterior.probs[1]
}
