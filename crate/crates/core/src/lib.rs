//! Slotted discrete-event simulator for adaptive-backoff CSMA/CA over a
//! K-MPR (multipacket reception) channel, with four access categories that
//! are differentiated by their freeze threshold and countdown rule.
//!
//! The crate is organised bottom-up:
//!
//! - [`channel`]: the all-or-nothing K-MPR channel and ideal carrier sensing.
//! - [`mac`]: per-station backoff state machine and the access-category table.
//! - [`traffic`]: Poisson and saturated sources, frame timing.
//! - [`engine`]: the slot loop, trace records and seed handling.
//! - [`metrics`]: throughput, MAC delay and jitter per access category.
//! - [`scenario`]: the scenario file format and its resolved echo.
//! - [`sweep`]: parameter sweeps, the canned experiments and CSV output.

use std::fmt;

use serde::{Deserialize, Serialize};

pub mod channel;
pub mod engine;
pub mod error;
pub mod mac;
pub mod metrics;
pub mod scenario;
pub mod sweep;
pub mod traffic;

pub use channel::{ChannelConfig, ChannelState};
pub use engine::{run, run_dcf_baseline, RunOutput, ScenarioConfig, TraceRecord};
pub use error::{ConfigError, SimError};
pub use mac::{AccessCategoryConfig, BackoffConfig, CountdownMode, StationState};
pub use metrics::{MetricsAccumulator, MetricsReport};
pub use traffic::{TrafficConfig, TrafficMode};

/// Slot index.
pub type Slot = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StationId(pub u32);

impl fmt::Display for StationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Access category, 0 (highest priority) to 3 (lowest).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct AcId(u8);

impl AcId {
    pub const AC0: AcId = AcId(0);
    pub const AC1: AcId = AcId(1);
    pub const AC2: AcId = AcId(2);
    pub const AC3: AcId = AcId(3);
    pub const ALL: [AcId; 4] = [Self::AC0, Self::AC1, Self::AC2, Self::AC3];

    pub fn new(id: u8) -> Option<Self> {
        (id < 4).then_some(AcId(id))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl TryFrom<u8> for AcId {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        AcId::new(v).ok_or_else(|| format!("access category {v} out of range 0..=3"))
    }
}

impl From<AcId> for u8 {
    fn from(ac: AcId) -> u8 {
        ac.0
    }
}

impl fmt::Display for AcId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AC{}", self.0)
    }
}
