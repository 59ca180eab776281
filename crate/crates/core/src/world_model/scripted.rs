use std::collections::VecDeque;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::trace::EpisodeTrace;

use super::{RefinementSummary, WorldModel, WorldModelQuery, WorldModelResponse};

pub const SCRIPT_SCHEMA: &str = "aif-script/1";

/// Recorded provider responses, in the order they were requested.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Script {
    pub schema: String,
    pub responses: Vec<WorldModelResponse>,
}

impl Script {
    pub fn new(responses: Vec<WorldModelResponse>) -> Self {
        Self { schema: SCRIPT_SCHEMA.to_string(), responses }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Script = serde_json::from_str(text).map_err(|e| Error::Config(format!("script: {e}")))?;
        if s.schema != SCRIPT_SCHEMA {
            return Err(Error::Config(format!("unsupported script schema '{}'", s.schema)));
        }
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("script serializes");
        s.push('\n');
        s
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

/// Replays a [`Script`] verbatim, one response per query.
#[derive(Debug, Clone)]
pub struct ScriptedProvider {
    queue: VecDeque<WorldModelResponse>,
    served: usize,
    /// Episodes handed to `refine`, kept for inspection.
    pub recorded: Vec<EpisodeTrace>,
}

impl ScriptedProvider {
    pub fn new(script: Script) -> Self {
        Self { queue: script.responses.into(), served: 0, recorded: Vec::new() }
    }

    pub fn remaining(&self) -> usize {
        self.queue.len()
    }
}

impl WorldModel for ScriptedProvider {
    fn name(&self) -> &str {
        "scripted"
    }

    fn infer(&mut self, _query: &WorldModelQuery) -> Result<WorldModelResponse> {
        let r = self.queue.pop_front().ok_or(Error::ScriptExhausted(self.served))?;
        self.served += 1;
        Ok(r)
    }

    fn refine(&mut self, episode: &EpisodeTrace) -> RefinementSummary {
        self.recorded.push(episode.clone());
        RefinementSummary::default()
    }
}
