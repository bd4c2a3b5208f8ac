//! Per-station MAC: threshold-gated backoff countdown, transmission decision,
//! binary exponential backoff with retry limit, and the access-category table.
//!
//! A slot is idle for a station when the sensed number of ongoing
//! transmissions `L` is at most the station's threshold `K_t`. In an idle slot
//! the counter drops by `K - L` (adaptive) or by 1 (fixed), so it may overshoot
//! zero. A station transmits in the first slot where its counter is nonpositive
//! and the slot is idle after an AIFS-long run of idle slots; a busy slot
//! freezes the counter and restarts the AIFS wait.

use std::collections::VecDeque;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, SimError};
use crate::{AcId, Slot, StationId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountdownMode {
    /// Decrement by the remaining MPR headroom `K - L`.
    Adaptive,
    /// Decrement by exactly one.
    FixedOne,
}

/// Which values a backoff draw over a window `CW` can take.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowBounds {
    /// `0..=CW`
    Inclusive,
    /// `0..CW`, the conventional 802.11 draw.
    Exclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackoffConfig {
    pub cw_min: u32,
    pub max_backoff_stage: u32,
    pub retry_limit: u32,
    pub window: WindowBounds,
}

impl Default for BackoffConfig {
    fn default() -> Self {
        Self {
            cw_min: 16,
            max_backoff_stage: 5,
            retry_limit: 4,
            window: WindowBounds::Inclusive,
        }
    }
}

impl BackoffConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.cw_min == 0 {
            return Err(ConfigError::invalid("cw_min", "must be >= 1"));
        }
        if self.cw_max().is_none() {
            return Err(ConfigError::invalid(
                "max_backoff_stage",
                format!(
                    "cw_min * 2^{} overflows a 32-bit window",
                    self.max_backoff_stage
                ),
            ));
        }
        Ok(())
    }

    pub fn cw_max(&self) -> Option<u32> {
        1u32.checked_shl(self.max_backoff_stage)
            .and_then(|f| self.cw_min.checked_mul(f))
    }

    /// Contention window at `stage`, capped at the maximum stage.
    pub fn window(&self, stage: u32) -> u32 {
        self.cw_min << stage.min(self.max_backoff_stage)
    }

    /// Largest value a draw at `stage` can return.
    pub fn draw_upper(&self, stage: u32) -> u32 {
        let cw = self.window(stage);
        match self.window {
            WindowBounds::Inclusive => cw,
            WindowBounds::Exclusive => cw - 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessCategoryConfig {
    pub ac: AcId,
    /// `K_t`: the counter runs only while at most this many frames are on air.
    pub threshold: u32,
    pub countdown: CountdownMode,
    pub backoff: BackoffConfig,
    pub aifs_us: u32,
}

impl AccessCategoryConfig {
    pub fn validate(&self, mpr_limit: u32) -> Result<(), ConfigError> {
        if self.threshold >= mpr_limit {
            return Err(ConfigError::invalid(
                format!("ac[{}].threshold", self.ac.index()),
                format!(
                    "threshold must be < K ({} >= {})",
                    self.threshold, mpr_limit
                ),
            ));
        }
        self.backoff.validate().map_err(|mut e| {
            e.key = e.key.map(|k| format!("ac[{}].{k}", self.ac.index()));
            e
        })
    }
}

/// Amount by which a counter drops in a slot with `sensed` ongoing frames.
///
/// Requires `threshold < mpr_limit`, which configuration validation enforces.
pub fn decrement_amount(mode: CountdownMode, mpr_limit: u32, threshold: u32, sensed: u32) -> u32 {
    debug_assert!(threshold < mpr_limit);
    if !slot_is_idle(sensed, threshold) {
        return 0;
    }
    match mode {
        CountdownMode::Adaptive => mpr_limit - sensed,
        CountdownMode::FixedOne => 1,
    }
}

pub fn slot_is_idle(sensed: u32, threshold: u32) -> bool {
    sensed <= threshold
}

/// Uniform draw from `0..=upper` using exactly one 64-bit output of `rng`.
///
/// Uses a widening multiply without rejection; the bias is below
/// `upper / 2^64`.
pub fn draw_backoff<R: RngCore + ?Sized>(rng: &mut R, upper: u32) -> u32 {
    let span = upper as u128 + 1;
    ((rng.next_u64() as u128 * span) >> 64) as u32
}

/// The four-category table derived from the MPR limit `K`.
///
/// | AC | threshold | countdown |
/// |----|-----------|-----------|
/// | 0  | K - 1     | adaptive  |
/// | 1  | ceil(K/2) | adaptive  |
/// | 2  | ceil(K/4) | fixed     |
/// | 3  | 1         | fixed     |
pub fn default_ac_table(
    mpr_limit: u32,
    backoff: BackoffConfig,
    aifs_us: u32,
) -> Result<[AccessCategoryConfig; 4], ConfigError> {
    let k = mpr_limit;
    if k == 0 {
        return Err(ConfigError::invalid("channel.mpr_limit", "must be >= 1"));
    }
    let rows = [
        (k - 1, CountdownMode::Adaptive),
        (k.div_ceil(2), CountdownMode::Adaptive),
        (k.div_ceil(4), CountdownMode::FixedOne),
        (1, CountdownMode::FixedOne),
    ];
    let table = AcId::ALL.map(|ac| {
        let (threshold, countdown) = rows[ac.index()];
        AccessCategoryConfig {
            ac,
            threshold,
            countdown,
            backoff,
            aifs_us,
        }
    });
    for cfg in &table {
        if cfg.threshold >= k {
            return Err(ConfigError::invalid(
                "channel.mpr_limit",
                format!(
                    "default table needs K >= 2: {} threshold {} must be < K ({k})",
                    cfg.ac, cfg.threshold
                ),
            ));
        }
    }
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Packet {
    pub id: u64,
    pub arrival_slot: Slot,
    /// Slot at which the packet became head of line.
    pub hol_slot: Slot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseKind {
    IdleNoPacket,
    Deferring,
    CountingDown,
    Transmitting,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    /// No packet and no backoff pending.
    IdleNoPacket,
    /// Waiting for this many more idle slots before the AIFS run completes.
    Deferring { remaining: u32 },
    CountingDown,
    /// Busy until this slot; covers the frame and any ACK overhead.
    Transmitting { until: Slot },
}

impl Phase {
    pub fn kind(self) -> PhaseKind {
        match self {
            Phase::IdleNoPacket => PhaseKind::IdleNoPacket,
            Phase::Deferring { .. } => PhaseKind::Deferring,
            Phase::CountingDown => PhaseKind::CountingDown,
            Phase::Transmitting { .. } => PhaseKind::Transmitting,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepOutcome {
    pub wants_to_transmit: bool,
    pub decrement: u32,
    pub drew: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResultOutcome {
    Delivered(Packet),
    Retry,
    Dropped(Packet),
}

#[derive(Debug, Clone)]
pub struct StationState {
    pub id: StationId,
    pub ac: AccessCategoryConfig,
    mpr_limit: u32,
    aifs_slots: u32,
    /// Backoff counter; may go negative under adaptive countdown.
    pub counter: i64,
    pub stage: u32,
    pub retries: u32,
    pub hol: Option<Packet>,
    pub queue: VecDeque<Packet>,
    backoff_active: bool,
    idle_run: u32,
    busy_until: Option<Slot>,
}

impl StationState {
    pub fn new(id: StationId, ac: AccessCategoryConfig, mpr_limit: u32, aifs_slots: u32) -> Self {
        Self {
            id,
            ac,
            mpr_limit,
            aifs_slots,
            counter: 0,
            stage: 0,
            retries: 0,
            hol: None,
            queue: VecDeque::new(),
            backoff_active: false,
            idle_run: 0,
            busy_until: None,
        }
    }

    pub fn aifs_slots(&self) -> u32 {
        self.aifs_slots
    }

    /// Consecutive idle slots observed up to the last step.
    pub fn idle_run(&self) -> u32 {
        self.idle_run
    }

    pub fn aifs_satisfied(&self) -> bool {
        self.idle_run >= self.aifs_slots
    }

    pub fn backoff_pending(&self) -> bool {
        self.backoff_active
    }

    pub fn is_busy(&self) -> bool {
        self.busy_until.is_some()
    }

    pub fn phase(&self) -> Phase {
        if let Some(until) = self.busy_until {
            return Phase::Transmitting { until };
        }
        if self.hol.is_none() && !self.backoff_active {
            return Phase::IdleNoPacket;
        }
        if self.idle_run < self.aifs_slots {
            return Phase::Deferring {
                remaining: self.aifs_slots - self.idle_run,
            };
        }
        Phase::CountingDown
    }

    /// Packets held by the station, head of line included.
    pub fn backlog(&self) -> usize {
        self.queue.len() + usize::from(self.hol.is_some())
    }

    /// Appends an arrival. Returns the packet back if the queue is full.
    pub fn enqueue(&mut self, packet: Packet, capacity: Option<usize>) -> Result<(), Packet> {
        if capacity.is_some_and(|cap| self.backlog() >= cap) {
            return Err(packet);
        }
        if self.hol.is_none() && !self.is_busy() {
            self.hol = Some(Packet {
                hol_slot: packet.arrival_slot,
                ..packet
            });
        } else {
            self.queue.push_back(packet);
        }
        Ok(())
    }

    /// Advances the station through one slot in which `sensed` frames were on
    /// the air at slot start.
    ///
    /// The slot qualifies for countdown and transmission when it is idle and
    /// the preceding AIFS-many slots were idle too. A head-of-line packet with
    /// no backoff pending transmits in a qualifying slot and otherwise draws a
    /// backoff from the current window. A pending counter that is already
    /// nonpositive transmits in the next qualifying slot; a positive one is
    /// decremented.
    pub fn step<R: RngCore + ?Sized>(&mut self, sensed: u32, rng: &mut R) -> StepOutcome {
        debug_assert!(!self.is_busy(), "stepped a transmitting station");
        let idle = slot_is_idle(sensed, self.ac.threshold);
        let qualifying = idle && self.idle_run >= self.aifs_slots;
        self.idle_run = if idle { self.idle_run.saturating_add(1) } else { 0 };

        let mut out = StepOutcome::default();
        if self.hol.is_some() && !self.backoff_active && !qualifying {
            let v = draw_backoff(rng, self.ac.backoff.draw_upper(self.stage));
            self.counter = v as i64;
            self.backoff_active = true;
            out.drew = Some(v);
            return out;
        }
        if !qualifying {
            return out;
        }
        if self.hol.is_some() && (!self.backoff_active || self.counter <= 0) {
            self.backoff_active = false;
            out.wants_to_transmit = true;
        } else if self.backoff_active {
            let d = decrement_amount(self.ac.countdown, self.mpr_limit, self.ac.threshold, sensed);
            self.counter -= d as i64;
            out.decrement = d;
            if self.hol.is_none() && self.counter <= 0 {
                // post-backoff finished with nothing to send
                self.backoff_active = false;
            }
        }
        out
    }

    /// Marks the station as on the air until `until` (exclusive).
    pub fn start_transmission(&mut self, until: Slot) {
        debug_assert!(self.hol.is_some());
        self.busy_until = Some(until);
    }

    /// Applies the outcome of the frame that just finished at `now` and draws
    /// the next backoff.
    ///
    /// A success or a drop resets stage and retries and starts a post-backoff
    /// from the minimum window. A failure below the retry limit moves one
    /// stage up and redraws from the doubled window.
    pub fn on_transmission_result<R: RngCore + ?Sized>(
        &mut self,
        success: bool,
        now: Slot,
        rng: &mut R,
    ) -> Result<(ResultOutcome, u32), SimError> {
        if self.busy_until.take().is_none() {
            return Err(SimError::NotTransmitting(self.id));
        }
        let packet = self.hol.take().ok_or(SimError::NotTransmitting(self.id))?;
        self.idle_run = 0;
        let outcome = if success {
            ResultOutcome::Delivered(packet)
        } else {
            self.retries += 1;
            if self.retries > self.ac.backoff.retry_limit {
                ResultOutcome::Dropped(packet)
            } else {
                self.stage = (self.stage + 1).min(self.ac.backoff.max_backoff_stage);
                self.hol = Some(packet);
                ResultOutcome::Retry
            }
        };
        if !matches!(outcome, ResultOutcome::Retry) {
            self.stage = 0;
            self.retries = 0;
            self.hol = self.queue.pop_front().map(|p| Packet { hol_slot: now, ..p });
        }
        let v = draw_backoff(rng, self.ac.backoff.draw_upper(self.stage));
        self.counter = v as i64;
        self.backoff_active = true;
        Ok((outcome, v))
    }
}
