//! Simulated bench: calibration, determinism and chemistry invariants.

mod common;

use aif_core::lab_env::{env_observe, env_reset, CommandBinding, EnvCommand, Reagent, CHANNELS, PH_PROBE};
use aif_core::model::Action;
use aif_core::Error;
use common::{lab, rng};
use proptest::prelude::*;

#[test]
fn assay_bench_starts_acidic_and_cool() {
    let env = env_reset(&lab().env, 9).unwrap();
    let s = &env.state;
    assert_eq!((s.ph, s.temp_c, s.enzyme_activity, s.volume_ml, s.spill), (6.2, 22.0, 1.0, 1.0, false));
}

#[test]
fn probe_is_calibrated() {
    let spec = lab().env;
    let state = spec.initial_state();
    let mut r = rng(2024);
    let readings: Vec<f64> =
        (0..10_000).map(|t| env_observe(&spec, &state, PH_PROBE, t, &mut r).unwrap().value.unwrap()).collect();
    let n = readings.len() as f64;
    let mean = readings.iter().sum::<f64>() / n;
    let sd = (readings.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!((mean - state.ph).abs() <= 0.01, "mean {mean}");
    assert!((0.02..=0.03).contains(&sd), "sd {sd}");
}

#[test]
fn same_seed_same_readings() {
    let spec = lab().env;
    let run = |seed| {
        let mut env = env_reset(&spec, seed).unwrap();
        let mut out = Vec::new();
        for (t, a) in ["measure_ph", "titrate_naoh"].iter().enumerate() {
            for c in CHANNELS {
                out.push(env.observe(c, t as u64).unwrap());
            }
            env.apply(&Action::new(*a).with_param("volume_ul", 3.0)).unwrap();
        }
        (out, env.state)
    };
    assert_eq!(run(5), run(5));
    assert_ne!(run(5).0, run(6).0);
}

#[test]
fn negative_volume_is_rejected() {
    let mut env = env_reset(&lab().env, 1).unwrap();
    let err = env.apply(&Action::new("titrate_naoh").with_param("volume_ul", -1.0)).unwrap_err();
    assert!(matches!(err, Error::Validation(_)));
}

#[test]
fn unknown_channel_is_a_shape_error() {
    let mut env = env_reset(&lab().env, 1).unwrap();
    assert!(matches!(env.observe("smell", 0), Err(Error::Shape(_))));
}

proptest! {
    #[test]
    fn base_never_lowers_and_acid_never_raises_ph(
        seed in any::<u64>(),
        doses in proptest::collection::vec((any::<bool>(), 0.0f64..20.0), 1..8),
    ) {
        let mut spec = lab().env;
        spec.commands.push(CommandBinding {
            action: "titrate_hcl".into(),
            command: EnvCommand::Titrate { reagent: Reagent::HCl, volume_ul: None, rate_ul_per_s: 1.0, mix: false },
        });
        let mut env = env_reset(&spec, seed).unwrap();
        let mut spilled = false;
        for (base, v) in doses {
            let before = env.state.ph;
            let name = if base { "add_base_fast" } else { "titrate_hcl" };
            env.apply(&Action::new(name).with_param("volume_ul", v)).unwrap();
            if base {
                prop_assert!(env.state.ph >= before);
            } else {
                prop_assert!(env.state.ph <= before);
            }
            prop_assert!(!spilled || env.state.spill);
            spilled = env.state.spill;
        }
    }
}
