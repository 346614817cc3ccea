//! Annotation guidelines served to annotators.

use std::sync::LazyLock;

use serde::{Deserialize, Serialize};

use crate::zone::Zone;

const GUIDELINES_JSON: &str = include_str!("../data/guidelines-v1.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassGuideline {
    pub code: Zone,
    pub name: String,
    /// Keyboard shortcut in the annotation UI.
    pub key: u8,
    pub definition: String,
    pub example: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Guidelines {
    pub version: String,
    pub unit: String,
    pub classes: Vec<ClassGuideline>,
}

static GUIDELINES: LazyLock<Guidelines> =
    LazyLock::new(|| serde_json::from_str(GUIDELINES_JSON).expect("bundled guidelines are valid"));

pub fn guidelines() -> &'static Guidelines {
    &GUIDELINES
}
