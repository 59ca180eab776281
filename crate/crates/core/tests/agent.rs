//! Agent loop behavior on the bundled assay scenario and its variants.

mod common;

use aif_core::agent::{propagate_refinement, run_episode, Agent, Direction, Level, MessagePayload};
use aif_core::inference::bayes_update;
use aif_core::io::scenario::ScenarioBundle;
use aif_core::io::trace::EpisodeTrace;
use aif_core::lab_env::{env_reset, PH_PROBE};
use aif_core::model::{Categorical, Observation};
use aif_core::world_model::{
    ParameterChange, RefinementSummary, TabularProvider, WorldModel, WorldModelQuery, WorldModelResponse,
};
use common::lab;

fn direct(bundle: &ScenarioBundle) -> Agent {
    Agent::new(bundle.model.clone(), bundle.policies.clone(), bundle.agent.clone())
}

fn seed42() -> (Agent, EpisodeTrace) {
    let bundle = lab();
    let mut agent = direct(&bundle);
    let mut env = env_reset(&bundle.env, 42).unwrap();
    let (result, _) = run_episode(&mut agent, &mut env, 8).unwrap();
    (agent, result.trace)
}

#[test]
fn yellow_indicator_triggers_replanning() {
    let bundle = lab();
    let mut agent = direct(&bundle);
    let (action, event) = agent.step(&Observation::new("indicatorColor", "yellow", 0)).unwrap();
    assert_eq!(action.name, "measure_ph");
    assert_eq!(event.selected_policy.as_deref(), Some("measure_then_titrate"));
    let acidic = event.belief.prob("ph_acidic").unwrap();
    assert!((acidic - 0.944).abs() < 0.005, "posterior on acidic = {acidic}");
    let kinds: Vec<_> = event.messages.iter().map(|m| (m.direction, m.from, m.to)).collect();
    assert!(matches!(event.messages[0].payload, MessagePayload::PredictionError { .. }));
    assert_eq!(kinds[0], (Direction::BottomUp, Level::Sensorimotor, Level::Planner));
    // every top-down message follows the bottom-up error that triggered it
    let first_down = kinds.iter().position(|k| k.0 == Direction::TopDown).unwrap();
    assert!(first_down > 0);
    assert!(event.vetoed.contains(&"add_base_immediately".to_string()));
    for m in &event.messages {
        assert_eq!(m.direction, m.payload.direction());
    }
}

#[test]
fn seed_42_episode_follows_the_recorded_course() {
    let (_, trace) = seed42();
    let actions: Vec<_> = trace.events.iter().map(|e| e.action.name.as_str()).collect();
    assert_eq!(actions, ["measure_ph", "titrate_naoh", "run_assay"]);
    assert_eq!(trace.events[1].observation.outcome, "6.2");
    assert_eq!(trace.events[1].action.param("volume_ul"), Some(6.0));
    assert_eq!(trace.events[2].observation.outcome, "green");
    // without a new prediction error the candidates are not re-scored
    assert!(trace.events[1].efe_table.is_empty());
    assert_eq!(trace.events[1].active_policy, "measure_then_titrate");
}

#[test]
fn delta_belief_and_modal_observation_raise_no_error() {
    let mut bundle = lab();
    bundle.model.d.initial = Categorical::delta(bundle.model.states.clone(), 0);
    let mut agent = direct(&bundle);
    let (action, event) = agent.step(&Observation::new("indicatorColor", "green", 0)).unwrap();
    assert!(event.prediction_error <= bundle.agent.threshold);
    assert!(!event.messages.iter().any(|m| matches!(m.payload, MessagePayload::PredictionError { .. })));
    assert!(event.efe_table.is_empty());
    assert_eq!(action.name, "run_assay");
}

struct Malformed;

impl WorldModel for Malformed {
    fn name(&self) -> &str {
        "malformed"
    }

    fn infer(&mut self, query: &WorldModelQuery) -> aif_core::Result<WorldModelResponse> {
        let labels = query.belief.posterior.labels.clone();
        let n = labels.len();
        Ok(WorldModelResponse {
            posterior: Categorical { labels, probs: vec![0.7; n] },
            rollout: None,
            rationale: String::new(),
        })
    }

    fn refine(&mut self, _: &EpisodeTrace) -> RefinementSummary {
        RefinementSummary::default()
    }
}

#[test]
fn malformed_posterior_falls_back_to_asking_a_human() {
    let bundle = lab();
    let mut agent =
        Agent::with_provider(bundle.model.clone(), bundle.policies.clone(), bundle.agent.clone(), Box::new(Malformed));
    let (action, event) = agent.step(&Observation::new("indicatorColor", "yellow", 0)).unwrap();
    assert_eq!(action.name, "ask_human");
    assert_eq!(event.active_policy, "ask_human");
    assert!(event.provider_error.as_deref().unwrap().contains("posterior"));
}

#[test]
fn tabular_provider_matches_exact_update() {
    let bundle = lab();
    let mut provider = TabularProvider::new(bundle.model.clone());
    let prior = aif_core::inference::Belief::new(bundle.model.d.initial.clone(), 0);
    let obs = Observation::new("indicatorColor", "yellow", 0);
    let q = WorldModelQuery { history: vec![obs.clone()], belief: prior.clone(), policy: None };
    let response = provider.infer(&q).unwrap();
    let lik = bundle.model.likelihood("indicatorColor", "yellow").unwrap();
    let exact = bayes_update(&prior, &lik, &obs).unwrap();
    assert_eq!(response.posterior, exact.posterior);
}

#[test]
fn max_steps_truncates() {
    let bundle = lab();
    let mut agent = direct(&bundle);
    let mut env = env_reset(&bundle.env, 42).unwrap();
    let (result, ledger) = run_episode(&mut agent, &mut env, 1).unwrap();
    assert_eq!(result.trace.events.len(), 1);
    assert_eq!(result.summary.outcome, "truncated");
    assert_eq!(ledger.rows.len(), 2);
}

#[test]
fn terminal_bench_gives_an_empty_episode() {
    let bundle = lab();
    let mut agent = direct(&bundle);
    let mut env = env_reset(&bundle.env, 42).unwrap();
    env.set_terminal("handed_off");
    let (result, ledger) = run_episode(&mut agent, &mut env, 8).unwrap();
    assert!(result.trace.events.is_empty());
    assert_eq!(result.summary.outcome, "handed_off");
    assert!(ledger.rows.is_empty());
}

fn with_probe_reading(mut trace: EpisodeTrace, value: f64) -> EpisodeTrace {
    for o in trace.closing.iter_mut().filter(|o| o.channel == PH_PROBE) {
        *o = Observation::new(PH_PROBE, format!("{value:.1}"), o.t).with_value(value);
    }
    trace
}

#[test]
fn assay_refinement_updates_all_three_levels() {
    let (mut agent, trace) = seed42();
    let trace = with_probe_reading(trace, 7.38);
    let updates = propagate_refinement(&mut agent, &trace);
    let levels: Vec<_> = updates.iter().map(|u| u.level).collect();
    assert_eq!(levels, [Level::Sensorimotor, Level::Planner, Level::Executive]);
    match &updates[0].changes[..] {
        [ParameterChange::ObservationReliability { from, to, .. }] => {
            assert!((from - 0.95).abs() < 1e-12 && (to - 0.98).abs() < 1e-9, "{from} -> {to}");
        }
        other => panic!("unexpected sensorimotor changes {other:?}"),
    }
    match &updates[1].changes[..] {
        [ParameterChange::TitrationEffect { from, to, .. }] => {
            assert!((from - 0.2).abs() < 1e-12);
            assert!((to - 1.18 / 6.0).abs() < 1e-9, "effect = {to}");
        }
        other => panic!("unexpected planner changes {other:?}"),
    }
    match &updates[2].changes[..] {
        [ParameterChange::EventFrequency { from, to, .. }] => {
            assert!((from - 0.05).abs() < 1e-12 && (to - 0.15).abs() < 1e-9, "{from} -> {to}");
        }
        other => panic!("unexpected executive changes {other:?}"),
    }
    let t = agent.model().b.titration.as_ref().unwrap();
    assert!((t.effect_per_ul - 1.18 / 6.0).abs() < 1e-9);
    assert_eq!(
        agent.model().a.channel("indicatorColor").unwrap().columns[1][0],
        updates[0]
            .changes
            .iter()
            .find_map(|c| match c {
                ParameterChange::ObservationReliability { to, .. } => Some(*to),
                _ => None,
            })
            .unwrap()
    );
    assert!((agent.executive_prior().unwrap() - 0.15).abs() < 1e-9);
}

#[test]
fn provider_refinement_is_idempotent() {
    let (_, trace) = seed42();
    let trace = with_probe_reading(trace, 7.38);
    let mut provider = TabularProvider::new(lab().model);
    let first = provider.refine(&trace);
    assert_eq!(first.changes.len(), 1);
    assert!(provider.refine(&trace).is_noop());
}

#[test]
fn quiet_episode_refines_nothing_and_zero_threshold_refines_everything() {
    let mut bundle = lab();
    bundle.env.initial.ph = 7.4;
    let mut agent = direct(&bundle);
    let mut env = env_reset(&bundle.env, 3).unwrap();
    let (result, _) = run_episode(&mut agent, &mut env, 8).unwrap();
    assert_eq!(result.summary.outcome, "assay_complete");
    assert!(propagate_refinement(&mut agent, &result.trace).is_empty());

    bundle.agent.threshold = 0.0;
    let mut agent = direct(&bundle);
    let updates = propagate_refinement(&mut agent, &result.trace);
    assert_eq!(updates.len(), 3);
}
