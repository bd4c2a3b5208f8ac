use std::fmt;

use thiserror::Error;

use crate::{Slot, StationId};

/// A scenario or sweep file that failed to parse or validate.
///
/// `line` is 1-based and points at the offending entry when the source text
/// is known.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: Option<String>,
    pub message: String,
}

impl ConfigError {
    pub fn invalid(key: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            line: None,
            key: Some(key.into()),
            message: message.into(),
        }
    }

    pub fn parse(line: Option<usize>, message: impl Into<String>) -> Self {
        Self {
            line,
            key: None,
            message: message.into(),
        }
    }

    pub fn at_line(mut self, line: Option<usize>) -> Self {
        if self.line.is_none() {
            self.line = line;
        }
        self
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(line) = self.line {
            write!(f, "line {line}: ")?;
        }
        if let Some(key) = &self.key {
            write!(f, "{key}: ")?;
        }
        f.write_str(&self.message)
    }
}

/// Internal consistency failures. Any of these indicates a simulator bug,
/// never a protocol event.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("station {station} started a frame in slot {slot} while already transmitting")]
    HalfDuplexViolation { station: StationId, slot: Slot },
    #[error("frame duration must be at least one slot")]
    ZeroDuration,
    #[error("transmission result delivered to station {0} which is not transmitting")]
    NotTransmitting(StationId),
    #[error("negative MAC delay: enqueued at {enqueue_us} us, completed at {completion_us} us")]
    NegativeDelay { enqueue_us: f64, completion_us: f64 },
    #[error(transparent)]
    Config(#[from] ConfigError),
}
