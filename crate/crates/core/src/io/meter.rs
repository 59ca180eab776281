//! Decision-cost metering: deterministic operation counts used as an energy
//! proxy in traces and ledgers.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub const BELIEF_UPDATES: &str = "belief_updates";
pub const EFE_EVALUATIONS: &str = "efe_evaluations";
pub const ENV_STEPS: &str = "env_steps";
pub const WORLD_MODEL_QUERIES: &str = "world_model_queries";

/// Cumulative counters keyed by name; iteration order is stable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OpCounts(pub BTreeMap<String, u64>);

impl Default for OpCounts {
    fn default() -> Self {
        let mut m = BTreeMap::new();
        for k in [BELIEF_UPDATES, EFE_EVALUATIONS, ENV_STEPS, WORLD_MODEL_QUERIES] {
            m.insert(k.to_string(), 0);
        }
        Self(m)
    }
}

impl OpCounts {
    pub fn add(&mut self, key: &str, n: u64) {
        *self.0.entry(key.to_string()).or_insert(0) += n;
    }

    pub fn get(&self, key: &str) -> u64 {
        self.0.get(key).copied().unwrap_or(0)
    }

    /// True when no counter in `self` is below its value in `earlier`.
    pub fn dominates(&self, earlier: &OpCounts) -> bool {
        earlier.0.iter().all(|(k, v)| self.get(k) >= *v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counters_accumulate() {
        let mut c = OpCounts::default();
        let before = c.clone();
        c.add(EFE_EVALUATIONS, 4);
        c.add(EFE_EVALUATIONS, 1);
        assert_eq!(c.get(EFE_EVALUATIONS), 5);
        assert!(c.dominates(&before));
        assert!(!before.dominates(&c));
        assert_eq!(
            serde_json::to_string(&before).unwrap(),
            r#"{"belief_updates":0,"efe_evaluations":0,"env_steps":0,"world_model_queries":0}"#
        );
    }
}
