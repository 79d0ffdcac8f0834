//! Named constant sets for the detectors.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::needle::{M1Config, M2Config};

const PAPER: &str = include_str!("../../profiles/paper.toml");
const DESK: &str = include_str!("../../profiles/desk.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Profile {
    pub name: String,
    pub m1: M1Config,
    pub m2: M2Config,
}

impl Profile {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let p: Profile = toml::from_str(text)?;
        p.m1.c2()?;
        p.m2.c2()?;
        Ok(p)
    }

    pub fn paper() -> Self {
        Self::from_toml(PAPER).expect("pinned paper profile parses")
    }

    pub fn desk() -> Self {
        Self::from_toml(DESK).expect("pinned desk profile parses")
    }

    /// `paper`, `desk`, or a path to a profile file.
    pub fn resolve(name: &str) -> Result<Self, HarnessError> {
        match name {
            "paper" => Ok(Self::paper()),
            "desk" => Ok(Self::desk()),
            path if Path::new(path).exists() => Self::from_toml(&std::fs::read_to_string(path)?),
            other => Err(HarnessError::Config(format!("unknown profile `{other}`"))),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("profile serializes")
    }
}
