//! Seeded simulator of a small enzyme-assay bench: buffer pH, titration,
//! temperature, enzyme integrity, indicator optics and spill detection.
//!
//! All randomness flows through one ChaCha stream seeded at reset, so equal
//! (spec, seed, action sequence) triples yield equal trajectories.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Action, Bins, Observation};

pub const INDICATOR: &str = "indicatorColor";
pub const PH_PROBE: &str = "phProbe";
pub const FLUORESCENCE: &str = "fluorescence";
pub const TEMP_PROBE: &str = "tempProbe";
pub const SPILL_DETECTOR: &str = "spillDetector";

/// Channels the simulator can emit, in canonical order.
pub const CHANNELS: [&str; 5] = [INDICATOR, PH_PROBE, FLUORESCENCE, TEMP_PROBE, SPILL_DETECTOR];

/// Hidden physical state of the bench.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabState {
    pub ph: f64,
    pub temp_c: f64,
    pub enzyme_activity: f64,
    pub volume_ml: f64,
    pub spill: bool,
    pub elapsed_min: f64,
    pub reagent_used_ul: f64,
    /// Time spent above the denaturation temperature.
    pub minutes_hot: f64,
}

impl LabState {
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(0.0..=14.0).contains(&self.ph) {
            out.push(format!("ph {} outside [0, 14]", self.ph));
        }
        if !(0.0..=1.0).contains(&self.enzyme_activity) {
            out.push(format!("enzyme activity {} outside [0, 1]", self.enzyme_activity));
        }
        if self.volume_ml <= 0.0 {
            out.push(format!("volume {} mL is not positive", self.volume_ml));
        }
        out
    }
}

/// Initial hidden state declared by a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialState {
    pub ph: f64,
    pub temp_c: f64,
    pub enzyme_activity: f64,
    pub volume_ml: f64,
}

/// Gaussian sensor and reagent noise, as standard deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub probe_sd: f64,
    pub temp_sd: f64,
    pub fluorescence_sd: f64,
    /// Per-microlitre spread of the titration effect.
    pub effect_sd: f64,
}

impl NoiseSpec {
    pub fn silent() -> Self {
        Self { probe_sd: 0.0, temp_sd: 0.0, fluorescence_sd: 0.0, effect_sd: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChemistrySpec {
    /// pH shift per microlitre of 1 M NaOH into 1 mL of buffer.
    pub effect_per_ul: f64,
    pub indicator_acid_below: f64,
    pub indicator_base_above: f64,
    /// Dispense rate above which splashing becomes possible.
    pub safe_rate_ul_per_s: f64,
    pub spill_probability: f64,
    pub denature_above_c: f64,
    pub denature_after_min: f64,
    pub denature_factor: f64,
    /// pH window in which the assay succeeds.
    pub assay_ph_min: f64,
    pub assay_ph_max: f64,
    /// pH of a freshly prepared buffer after a restart.
    pub fresh_ph: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingSpec {
    pub measure_min: f64,
    pub mix_s: f64,
    pub assay_min: f64,
    pub handoff_min: f64,
    pub restart_min: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Reagent {
    NaOH,
    HCl,
}

impl Reagent {
    fn sign(self) -> f64 {
        match self {
            Reagent::NaOH => 1.0,
            Reagent::HCl => -1.0,
        }
    }
}

/// What an agent action does to the bench.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvCommand {
    /// Take a reading; costs measurement time only.
    Measure,
    /// Dispense reagent. `volume_ul` is the default dose when the action
    /// carries none; `rate_ul_per_s` likewise.
    Titrate {
        reagent: Reagent,
        #[serde(default)]
        volume_ul: Option<f64>,
        rate_ul_per_s: f64,
        #[serde(default)]
        mix: bool,
    },
    Heat {
        target_c: f64,
        minutes: f64,
    },
    Wait {
        minutes: f64,
    },
    RunAssay,
    HandOff,
    Restart,
}

/// A scenario's binding from agent action name to bench command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandBinding {
    pub action: String,
    #[serde(flatten)]
    pub command: EnvCommand,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub name: String,
    pub initial: InitialState,
    pub noise: NoiseSpec,
    pub chemistry: ChemistrySpec,
    pub timing: TimingSpec,
    pub probe_bins: Bins,
    pub fluorescence_bins: Bins,
    pub temp_bins: Bins,
    pub commands: Vec<CommandBinding>,
}

impl EnvSpec {
    pub fn command(&self, action: &str) -> Option<&EnvCommand> {
        self.commands.iter().find(|c| c.action == action).map(|c| &c.command)
    }

    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let init = self.initial_state();
        out.extend(init.problems().into_iter().map(|p| format!("initial: {p}")));
        for (name, sd) in [
            ("probe_sd", self.noise.probe_sd),
            ("temp_sd", self.noise.temp_sd),
            ("fluorescence_sd", self.noise.fluorescence_sd),
            ("effect_sd", self.noise.effect_sd),
        ] {
            if !(sd.is_finite() && sd >= 0.0) {
                out.push(format!("noise.{name} = {sd} must be a nonnegative number"));
            }
        }
        if !(0.0..=1.0).contains(&self.chemistry.spill_probability) {
            out.push("chemistry.spill_probability outside [0, 1]".to_string());
        }
        for b in &self.commands {
            if let EnvCommand::Titrate { volume_ul, rate_ul_per_s, .. } = &b.command {
                if volume_ul.is_some_and(|v| v < 0.0) || *rate_ul_per_s <= 0.0 {
                    out.push(format!("command '{}': bad volume or rate", b.action));
                }
            }
        }
        out
    }

    pub fn initial_state(&self) -> LabState {
        LabState {
            ph: self.initial.ph,
            temp_c: self.initial.temp_c,
            enzyme_activity: self.initial.enzyme_activity,
            volume_ml: self.initial.volume_ml,
            spill: false,
            elapsed_min: 0.0,
            reagent_used_ul: 0.0,
            minutes_hot: 0.0,
        }
    }
}

fn gauss(rng: &mut ChaCha8Rng, sd: f64) -> f64 {
    if sd == 0.0 {
        return 0.0;
    }
    Normal::new(0.0, sd).map(|n| n.sample(rng)).unwrap_or(0.0)
}

fn round_to(v: f64, decimals: i32) -> f64 {
    let k = 10f64.powi(decimals);
    (v * k).round() / k
}

/// Emits one reading of `channel` from `state`.
pub fn env_observe(
    spec: &EnvSpec,
    state: &LabState,
    channel: &str,
    t: u64,
    rng: &mut ChaCha8Rng,
) -> Result<Observation> {
    let chem = &spec.chemistry;
    let obs = match channel {
        INDICATOR => {
            let colour = if state.ph < chem.indicator_acid_below {
                "yellow"
            } else if state.ph > chem.indicator_base_above {
                "blue"
            } else {
                "green"
            };
            Observation::new(channel, colour, t)
        }
        PH_PROBE => {
            let b = &spec.probe_bins;
            let reading = (state.ph + gauss(rng, spec.noise.probe_sd)).clamp(b.start, b.stop);
            Observation::new(channel, b.label(reading), t).with_value(round_to(reading, 2))
        }
        FLUORESCENCE => {
            let b = &spec.fluorescence_bins;
            let reading =
                (100.0 * state.enzyme_activity + gauss(rng, spec.noise.fluorescence_sd)).clamp(b.start, b.stop);
            Observation::new(channel, b.label(reading), t).with_value(round_to(reading, 1))
        }
        TEMP_PROBE => {
            let b = &spec.temp_bins;
            let reading = (state.temp_c + gauss(rng, spec.noise.temp_sd)).clamp(b.start, b.stop);
            Observation::new(channel, b.label(reading), t).with_value(round_to(reading, 2))
        }
        SPILL_DETECTOR => Observation::new(channel, if state.spill { "spill" } else { "clear" }, t),
        other => return Err(Error::Shape(format!("unknown channel '{other}'"))),
    };
    Ok(obs)
}

/// Bench instance: hidden state plus its private noise stream.
#[derive(Debug, Clone)]
pub struct LabEnv {
    pub spec: EnvSpec,
    pub state: LabState,
    rng: ChaCha8Rng,
    terminal: Option<String>,
    /// Spill events caused by dispensing.
    pub spill_events: u32,
}

/// Resets the bench described by `spec` with a fresh seeded noise stream.
pub fn env_reset(spec: &EnvSpec, seed: u64) -> Result<LabEnv> {
    let problems = spec.problems();
    if !problems.is_empty() {
        return Err(Error::Config(format!("environment '{}': {}", spec.name, problems.join("; "))));
    }
    Ok(LabEnv {
        spec: spec.clone(),
        state: spec.initial_state(),
        rng: ChaCha8Rng::seed_from_u64(seed),
        terminal: None,
        spill_events: 0,
    })
}

impl LabEnv {
    pub fn observe(&mut self, channel: &str, t: u64) -> Result<Observation> {
        env_observe(&self.spec, &self.state, channel, t, &mut self.rng)
    }

    /// Terminal outcome label once the episode has ended.
    pub fn terminal(&self) -> Option<&str> {
        self.terminal.as_deref()
    }

    /// Forces the bench into a terminal outcome (used for degenerate episodes).
    pub fn set_terminal(&mut self, outcome: impl Into<String>) {
        self.terminal = Some(outcome.into());
    }

    fn advance(&mut self, minutes: f64) {
        let chem = &self.spec.chemistry;
        self.state.elapsed_min += minutes;
        if self.state.temp_c > chem.denature_above_c {
            let before = self.state.minutes_hot;
            self.state.minutes_hot += minutes;
            // Denaturation happens once, when the exposure crosses the limit.
            if before < chem.denature_after_min && self.state.minutes_hot >= chem.denature_after_min - 1e-9 {
                self.state.enzyme_activity *= chem.denature_factor;
            }
        }
    }

    fn dispense(&mut self, reagent: Reagent, volume_ul: f64, rate: f64, mix: bool) -> Result<()> {
        if !(volume_ul.is_finite() && volume_ul >= 0.0) {
            return Err(Error::Validation(format!("titration volume {volume_ul} µL is negative")));
        }
        if rate <= 0.0 {
            return Err(Error::Validation(format!("dispense rate {rate} µL/s is not positive")));
        }
        let chem = self.spec.chemistry.clone();
        let per_ml = 1.0 / self.state.volume_ml;
        let whole = volume_ul.floor() as u64;
        let frac = volume_ul - whole as f64;
        let mut shift = 0.0;
        for _ in 0..whole {
            shift += (chem.effect_per_ul + gauss(&mut self.rng, self.spec.noise.effect_sd)) * per_ml;
        }
        if frac > 0.0 {
            shift += frac * (chem.effect_per_ul + gauss(&mut self.rng, self.spec.noise.effect_sd)) * per_ml;
        }
        // The Gaussian cannot flip the sign of the effect for sane specs;
        // clamp anyway so NaOH never lowers pH.
        let shift = shift.max(0.0) * reagent.sign();
        self.state.ph = (self.state.ph + shift).clamp(0.0, 14.0);
        self.state.volume_ml += volume_ul / 1000.0;
        self.state.reagent_used_ul += volume_ul;
        if rate > chem.safe_rate_ul_per_s && volume_ul > 0.0 {
            let draw: f64 = rand::Rng::random(&mut self.rng);
            if draw < chem.spill_probability {
                if !self.state.spill {
                    self.spill_events += 1;
                }
                self.state.spill = true;
            }
        }
        let mut seconds = volume_ul / rate;
        if mix {
            seconds += self.spec.timing.mix_s;
        }
        self.advance(seconds / 60.0);
        Ok(())
    }

    /// Applies one agent action to the bench.
    pub fn apply(&mut self, action: &Action) -> Result<()> {
        if self.terminal.is_some() {
            return Err(Error::Validation("environment is already terminal".to_string()));
        }
        let command = self
            .spec
            .command(&action.name)
            .cloned()
            .ok_or_else(|| Error::Config(format!("no bench command for action '{}'", action.name)))?;
        let timing = self.spec.timing.clone();
        match command {
            EnvCommand::Measure => self.advance(timing.measure_min),
            EnvCommand::Titrate { reagent, volume_ul, rate_ul_per_s, mix } => {
                let volume = action.param("volume_ul").or(volume_ul).unwrap_or(0.0);
                let rate = action.param("rate_ul_per_s").unwrap_or(rate_ul_per_s);
                self.dispense(reagent, volume, rate, mix)?;
            }
            EnvCommand::Heat { target_c, minutes } => {
                self.state.temp_c = target_c;
                self.advance(minutes);
            }
            EnvCommand::Wait { minutes } => self.advance(minutes),
            EnvCommand::RunAssay => {
                self.advance(timing.assay_min);
                let chem = &self.spec.chemistry;
                let ok = !self.state.spill && self.state.ph >= chem.assay_ph_min && self.state.ph <= chem.assay_ph_max;
                self.terminal = Some(if ok { "assay_complete" } else { "assay_failed" }.to_string());
            }
            EnvCommand::HandOff => {
                self.advance(timing.handoff_min);
                self.terminal = Some("handed_off".to_string());
            }
            EnvCommand::Restart => {
                let init = self.spec.initial.clone();
                self.state.ph = self.spec.chemistry.fresh_ph;
                self.state.enzyme_activity = init.enzyme_activity;
                self.state.volume_ml = init.volume_ml;
                self.state.temp_c = init.temp_c;
                self.state.minutes_hot = 0.0;
                self.advance(timing.restart_min);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub fn assay_spec() -> EnvSpec {
        EnvSpec {
            name: "lab_assay".into(),
            initial: InitialState { ph: 6.2, temp_c: 22.0, enzyme_activity: 1.0, volume_ml: 1.0 },
            noise: NoiseSpec { probe_sd: 0.025, temp_sd: 0.25, fluorescence_sd: 2.5, effect_sd: 0.01 },
            chemistry: ChemistrySpec {
                effect_per_ul: 0.2,
                indicator_acid_below: 7.0,
                indicator_base_above: 8.0,
                safe_rate_ul_per_s: 1.0,
                spill_probability: 0.3,
                denature_above_c: 60.0,
                denature_after_min: 2.0,
                denature_factor: 0.05,
                assay_ph_min: 7.0,
                assay_ph_max: 8.0,
                fresh_ph: 7.4,
            },
            timing: TimingSpec { measure_min: 0.5, mix_s: 10.0, assay_min: 3.25, handoff_min: 15.0, restart_min: 20.0 },
            probe_bins: Bins { start: 4.0, stop: 10.0, step: 0.1, decimals: 1 },
            fluorescence_bins: Bins { start: 0.0, stop: 100.0, step: 5.0, decimals: 0 },
            temp_bins: Bins { start: 0.0, stop: 100.0, step: 0.5, decimals: 1 },
            commands: vec![
                CommandBinding { action: "measure_ph".into(), command: EnvCommand::Measure },
                CommandBinding {
                    action: "titrate_naoh".into(),
                    command: EnvCommand::Titrate {
                        reagent: Reagent::NaOH,
                        volume_ul: None,
                        rate_ul_per_s: 1.0,
                        mix: true,
                    },
                },
                CommandBinding {
                    action: "titrate_hcl".into(),
                    command: EnvCommand::Titrate {
                        reagent: Reagent::HCl,
                        volume_ul: None,
                        rate_ul_per_s: 1.0,
                        mix: true,
                    },
                },
                CommandBinding {
                    action: "add_base_fast".into(),
                    command: EnvCommand::Titrate {
                        reagent: Reagent::NaOH,
                        volume_ul: Some(6.0),
                        rate_ul_per_s: 6.0,
                        mix: false,
                    },
                },
                CommandBinding { action: "heat".into(), command: EnvCommand::Heat { target_c: 65.0, minutes: 2.0 } },
                CommandBinding { action: "run_assay".into(), command: EnvCommand::RunAssay },
                CommandBinding { action: "ask_human".into(), command: EnvCommand::HandOff },
                CommandBinding { action: "discard_restart".into(), command: EnvCommand::Restart },
            ],
        }
    }

    fn quiet() -> EnvSpec {
        let mut s = assay_spec();
        s.noise = NoiseSpec::silent();
        s
    }

    #[test]
    fn indicator_thresholds() {
        let mut env = env_reset(&assay_spec(), 1).unwrap();
        assert_eq!(env.observe(INDICATOR, 0).unwrap().outcome, "yellow");
        env.state.ph = 7.38;
        assert_eq!(env.observe(INDICATOR, 0).unwrap().outcome, "green");
        env.state.ph = 8.3;
        assert_eq!(env.observe(INDICATOR, 0).unwrap().outcome, "blue");
        assert!(matches!(env.observe("sonar", 0), Err(Error::Shape(_))));
    }

    #[test]
    fn probe_reads_the_true_bin_at_fixed_seed() {
        let mut env = env_reset(&assay_spec(), 42).unwrap();
        let o = env.observe(PH_PROBE, 0).unwrap();
        assert_eq!(o.outcome, "6.2");
    }

    #[test]
    fn noiseless_titration_is_exact() {
        let mut env = env_reset(&quiet(), 7).unwrap();
        env.apply(&Action::new("titrate_naoh").with_param("volume_ul", 6.0)).unwrap();
        assert!((env.state.ph - 7.4).abs() < 1e-9);
        assert!((env.state.volume_ml - 1.006).abs() < 1e-12);
        assert!(!env.state.spill);
        // 6 s dispensing plus 10 s mixing
        assert!((env.state.elapsed_min - 16.0 / 60.0).abs() < 1e-12);
    }

    #[test]
    fn realized_effect_reproduces_seven_point_three_eight() {
        let mut spec = quiet();
        spec.chemistry.effect_per_ul = 1.18 / 6.0;
        let mut env = env_reset(&spec, 7).unwrap();
        env.apply(&Action::new("titrate_naoh").with_param("volume_ul", 6.0)).unwrap();
        assert!((env.state.ph - 7.38).abs() < 1e-9);
    }

    #[test]
    fn acid_lowers_and_fractional_doses_scale() {
        let mut env = env_reset(&quiet(), 7).unwrap();
        env.apply(&Action::new("titrate_hcl").with_param("volume_ul", 2.5)).unwrap();
        assert!((env.state.ph - 5.7).abs() < 1e-9);
        assert!(env.apply(&Action::new("titrate_naoh").with_param("volume_ul", -1.0)).is_err());
    }

    #[test]
    fn heat_denatures_enzyme() {
        let mut env = env_reset(&assay_spec(), 3).unwrap();
        env.apply(&Action::new("heat")).unwrap();
        assert!((env.state.enzyme_activity - 0.05).abs() < 1e-12);
        let f = env.observe(FLUORESCENCE, 0).unwrap();
        assert!(f.outcome == "0" || f.outcome == "5" || f.outcome == "10", "{}", f.outcome);
    }

    #[test]
    fn over_rate_dispensing_can_spill_and_spill_is_sticky() {
        let spilled = (0..50u64).any(|seed| {
            let mut env = env_reset(&assay_spec(), seed).unwrap();
            env.apply(&Action::new("add_base_fast")).unwrap();
            if env.state.spill {
                env.apply(&Action::new("discard_restart")).unwrap();
                assert!(env.state.spill);
                assert_eq!(env.observe(SPILL_DETECTOR, 1).unwrap().outcome, "spill");
            }
            env.state.spill
        });
        assert!(spilled);
        for seed in 0..50u64 {
            let mut env = env_reset(&assay_spec(), seed).unwrap();
            env.apply(&Action::new("titrate_naoh").with_param("volume_ul", 6.0)).unwrap();
            assert!(!env.state.spill);
        }
    }

    #[test]
    fn terminal_actions() {
        let mut env = env_reset(&quiet(), 1).unwrap();
        env.apply(&Action::new("titrate_naoh").with_param("volume_ul", 6.0)).unwrap();
        env.apply(&Action::new("run_assay")).unwrap();
        assert_eq!(env.terminal(), Some("assay_complete"));
        assert!(env.apply(&Action::new("measure_ph")).is_err());

        let mut env = env_reset(&quiet(), 1).unwrap();
        env.apply(&Action::new("run_assay")).unwrap();
        assert_eq!(env.terminal(), Some("assay_failed"));

        let mut env = env_reset(&quiet(), 1).unwrap();
        env.apply(&Action::new("ask_human")).unwrap();
        assert_eq!(env.terminal(), Some("handed_off"));
    }

    #[test]
    fn reset_is_deterministic() {
        let spec = assay_spec();
        let run = |seed| {
            let mut env = env_reset(&spec, seed).unwrap();
            let a = env.observe(PH_PROBE, 0).unwrap();
            env.apply(&Action::new("titrate_naoh").with_param("volume_ul", 6.0)).unwrap();
            let b = env.observe(TEMP_PROBE, 1).unwrap();
            (a, b, env.state.clone())
        };
        assert_eq!(run(5), run(5));
        let init = env_reset(&spec, 99).unwrap().state;
        assert_eq!(
            (init.ph, init.temp_c, init.enzyme_activity, init.volume_ml, init.spill),
            (6.2, 22.0, 1.0, 1.0, false)
        );
    }

    #[test]
    fn invalid_spec_is_a_config_error() {
        let mut spec = assay_spec();
        spec.initial.volume_ml = 0.0;
        assert!(matches!(env_reset(&spec, 1), Err(Error::Config(_))));
    }
}
