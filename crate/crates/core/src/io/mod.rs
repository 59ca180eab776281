//! Scenario files, traces, ledgers and operation metering.

pub mod ledger;
pub mod meter;
pub mod scenario;
pub mod trace;

pub use ledger::{emit_ledger, FreeEnergyLedger, LedgerRow};
pub use meter::OpCounts;
pub use scenario::{load_scenario, parse_scenario, save_scenario, ScenarioBundle, ScenarioError};
pub use trace::{emit_trace, parse_trace, EpisodeSummary, EpisodeTrace, TraceEvent, TraceHeader};
