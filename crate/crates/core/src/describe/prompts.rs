//! Prompt catalog for the video describer.
//!
//! Six prompts ship with the crate (`data/prompts.json`). Prompts 1-4 are
//! single messages; prompts 5 and 6 are multi-run conversations whose turns,
//! joined with single spaces, reproduce the full prompt text.

use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::DescribeError;

const BUNDLED: &str = include_str!("../../data/prompts.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub id: u8,
    pub multi_run: bool,
    pub turns: Vec<String>,
}

impl PromptSpec {
    /// Full prompt text with turns joined by a single space.
    pub fn text(&self) -> String {
        self.turns.join(" ")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptCatalog {
    pub prompts: Vec<PromptSpec>,
}

impl PromptCatalog {
    pub fn parse(json: &str) -> Result<Self, DescribeError> {
        let catalog: PromptCatalog =
            serde_json::from_str(json).map_err(|e| DescribeError::Config(format!("prompt catalog: {e}")))?;
        catalog.validate()?;
        Ok(catalog)
    }

    pub fn load(path: &Path) -> Result<Self, DescribeError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// The catalog compiled into the crate.
    pub fn bundled() -> &'static PromptCatalog {
        static CATALOG: OnceLock<PromptCatalog> = OnceLock::new();
        CATALOG.get_or_init(|| Self::parse(BUNDLED).expect("bundled prompt catalog is valid"))
    }

    pub fn get(&self, id: u8) -> Result<&PromptSpec, DescribeError> {
        self.prompts
            .iter()
            .find(|p| p.id == id)
            .ok_or(DescribeError::UnknownPrompt(id))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("catalog serializes");
        s.push('\n');
        s
    }

    fn validate(&self) -> Result<(), DescribeError> {
        let mut seen = [false; 7];
        for p in &self.prompts {
            if !(1..=6).contains(&p.id) || std::mem::replace(&mut seen[p.id as usize], true) {
                return Err(DescribeError::Config(format!("prompt catalog: bad or repeated id {}", p.id)));
            }
            if p.multi_run != (p.id >= 5) {
                return Err(DescribeError::Config(format!(
                    "prompt catalog: prompt {} has multi_run = {}",
                    p.id, p.multi_run
                )));
            }
            if p.turns.is_empty() || p.turns.iter().any(|t| t.trim().is_empty()) {
                return Err(DescribeError::Config(format!("prompt catalog: prompt {} has empty turns", p.id)));
            }
            if !p.multi_run && p.turns.len() != 1 {
                return Err(DescribeError::Config(format!(
                    "prompt catalog: single-run prompt {} has {} turns",
                    p.id,
                    p.turns.len()
                )));
            }
        }
        Ok(())
    }
}

/// Looks a prompt up in the bundled catalog.
pub fn get_prompt(id: u8) -> Result<PromptSpec, DescribeError> {
    PromptCatalog::bundled().get(id).cloned()
}
