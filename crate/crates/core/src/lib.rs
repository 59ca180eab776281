//! Discrete-state active inference engine.
//!
//! Perception minimizes variational free energy over categorical beliefs;
//! action selection minimizes expected free energy over candidate policies.
//! A three-level agent wraps both around a pluggable world-model provider,
//! and a seeded enzyme-assay bench exercises the loop end to end.
//!
//! ```
//! use aif_core::io::load_scenario;
//! use aif_core::{agent::{run_episode, Agent}, lab_env::env_reset};
//!
//! let s = load_scenario("lab_assay").unwrap();
//! let mut env = env_reset(&s.env, 42).unwrap();
//! let mut agent = Agent::new(s.model, s.policies, s.agent);
//! let (result, ledger) = run_episode(&mut agent, &mut env, 8).unwrap();
//! assert_eq!(result.summary.outcome, "assay_complete");
//! assert!(ledger.rows.len() > 1);
//! ```

pub mod agent;
pub mod error;
pub mod inference;
pub mod io;
pub mod lab_env;
pub mod model;
pub mod planning;
pub mod world_model;

#[cfg(feature = "cli")]
pub mod cli;

pub use error::{Error, Result};
