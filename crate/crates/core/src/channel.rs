//! K-MPR collision channel with ideal enhanced carrier sensing.
//!
//! Time is slotted. A frame admitted in slot `s` with a duration of `d` slots
//! occupies slots `s..s + d`. Whenever admitting the starters of a slot pushes
//! the number of concurrent frames above the MPR limit, every frame on the air
//! (new and already ongoing) is doomed and fails at completion, even if the
//! concurrency later drops back to the limit.

use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, SimError};
use crate::{AcId, Slot, StationId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelConfig {
    /// Number of simultaneous transmissions a receiver can decode (K).
    pub mpr_limit: u32,
}

impl ChannelConfig {
    pub fn new(mpr_limit: u32) -> Result<Self, ConfigError> {
        if mpr_limit == 0 {
            return Err(ConfigError::invalid("channel.mpr_limit", "must be >= 1"));
        }
        Ok(Self { mpr_limit })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InFlightTransmission {
    pub station: StationId,
    pub ac: AcId,
    pub start_slot: Slot,
    /// Exclusive.
    pub end_slot: Slot,
    pub doomed: bool,
}

/// Outcome of a frame leaving the channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Completion {
    pub station: StationId,
    pub ac: AcId,
    pub start_slot: Slot,
    pub success: bool,
}

#[derive(Debug, Clone)]
pub struct ChannelState {
    config: ChannelConfig,
    in_flight: Vec<InFlightTransmission>,
    slot: Slot,
}

impl ChannelState {
    pub fn new(config: ChannelConfig) -> Self {
        Self {
            config,
            in_flight: Vec::new(),
            slot: 0,
        }
    }

    pub fn config(&self) -> ChannelConfig {
        self.config
    }

    /// Index of the slot currently being processed.
    pub fn slot(&self) -> Slot {
        self.slot
    }

    pub fn in_flight(&self) -> &[InFlightTransmission] {
        &self.in_flight
    }

    pub fn is_transmitting(&self, station: StationId) -> bool {
        self.in_flight.iter().any(|t| t.station == station)
    }

    /// Number of ongoing transmissions seen by any non-transmitting station.
    ///
    /// Sensing is ideal, so this is the exact count, including counts above
    /// the MPR limit.
    pub fn sense(&self) -> u32 {
        self.in_flight.len() as u32
    }

    /// Starts the given frames in the current slot.
    ///
    /// All starters are admitted before the collision rule is evaluated, so
    /// stations acting in the same slot are simultaneous. If the resulting
    /// concurrency exceeds the MPR limit, every frame on the air is doomed.
    /// Nothing is modified when an error is returned.
    pub fn admit_transmissions(
        &mut self,
        starters: &[(StationId, AcId)],
        duration_slots: u64,
    ) -> Result<(), SimError> {
        if starters.is_empty() {
            return Ok(());
        }
        if duration_slots == 0 {
            return Err(SimError::ZeroDuration);
        }
        for (i, &(station, _)) in starters.iter().enumerate() {
            if self.is_transmitting(station) || starters[..i].iter().any(|(s, _)| *s == station) {
                return Err(SimError::HalfDuplexViolation {
                    station,
                    slot: self.slot,
                });
            }
        }
        let start_slot = self.slot;
        self.in_flight
            .extend(starters.iter().map(|&(station, ac)| InFlightTransmission {
                station,
                ac,
                start_slot,
                end_slot: start_slot + duration_slots,
                doomed: false,
            }));
        if self.in_flight.len() > self.config.mpr_limit as usize {
            for t in &mut self.in_flight {
                t.doomed = true;
            }
        }
        Ok(())
    }

    /// Closes the current slot and removes every frame whose last occupied
    /// slot it was. Completions are reported in admission order.
    pub fn retire_completions(&mut self) -> Vec<Completion> {
        self.slot += 1;
        let now = self.slot;
        let mut done = Vec::new();
        self.in_flight.retain(|t| {
            if t.end_slot == now {
                done.push(Completion {
                    station: t.station,
                    ac: t.ac,
                    start_slot: t.start_slot,
                    success: !t.doomed,
                });
                false
            } else {
                true
            }
        });
        done
    }
}
