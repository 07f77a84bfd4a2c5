use std::fmt;

use liectl_core::Error;

use crate::artifacts::Artifact;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// A failed run: exit code, message, and any artifacts still worth writing.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
    pub artifacts: Vec<Artifact>,
}

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_CONFIG,
            message: message.into(),
            artifacts: Vec::new(),
        }
    }

    pub fn with_artifacts(mut self, artifacts: Vec<Artifact>) -> Self {
        self.artifacts = artifacts;
        self
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_validation() {
            EXIT_CONFIG
        } else {
            EXIT_NUMERIC
        };
        Failure {
            code,
            message: e.to_string(),
            artifacts: Vec::new(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}
