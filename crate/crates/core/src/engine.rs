//! The slot loop.
//!
//! Each slot runs the same five phases in a fixed order:
//!
//! 1. arrivals are credited at the slot boundary (saturated stations refill),
//! 2. every non-transmitting station senses the count at slot start,
//! 3. and steps its backoff state machine,
//! 4. all stations that want to transmit start together,
//! 5. the slot closes and finished frames report success or failure.
//!
//! Every station owns two ChaCha8 streams derived from the run seed: stream
//! `2 * key` feeds its backoff draws and stream `2 * key + 1` its arrivals,
//! where `key = (ac << 32) | index_within_ac`. Adding stations to one category
//! therefore never perturbs the draws of existing stations.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{ChannelConfig, ChannelState, Completion};
use crate::error::{ConfigError, SimError};
use crate::mac::{AccessCategoryConfig, CountdownMode, Packet, PhaseKind, ResultOutcome, StationState};
use crate::metrics::{MetricsAccumulator, MetricsReport};
use crate::traffic::{frame_duration_slots, PoissonArrivals, TrafficConfig, TrafficMode};
use crate::{AcId, Slot, StationId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timing {
    pub slot_us: u32,
    pub difs_us: u32,
    /// Slots the sender stays busy after its frame before learning the
    /// outcome. The channel is not occupied.
    pub ack_overhead_slots: u32,
}

impl Default for Timing {
    fn default() -> Self {
        Self {
            slot_us: 50,
            difs_us: 128,
            ack_overhead_slots: 0,
        }
    }
}

impl Timing {
    pub fn aifs_slots(&self, aifs_us: u32) -> u32 {
        aifs_us.div_ceil(self.slot_us)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSettings {
    pub total_slots: u64,
    pub warmup_slots: u64,
    pub seed: u64,
}

impl RunSettings {
    pub const DEFAULT_TOTAL_SLOTS: u64 = 1_000_000;

    /// Warm-up defaults to a tenth of the run.
    pub fn with_default_warmup(total_slots: u64, seed: u64) -> Self {
        Self {
            total_slots,
            warmup_slots: total_slots / 10,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DelayAnchor {
    /// MAC delay starts when the packet enters the queue.
    Arrival,
    /// MAC delay starts when the packet reaches the head of the queue.
    HeadOfLine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricsSettings {
    pub delay_anchor: DelayAnchor,
    /// Count PHY and MAC header bits as carried traffic.
    pub include_headers: bool,
}

impl Default for MetricsSettings {
    fn default() -> Self {
        Self {
            delay_anchor: DelayAnchor::Arrival,
            include_headers: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub channel: ChannelConfig,
    pub ac_table: [AccessCategoryConfig; 4],
    pub stations_per_ac: [u32; 4],
    pub traffic: TrafficConfig,
    pub timing: Timing,
    pub run: RunSettings,
    pub metrics: MetricsSettings,
}

impl ScenarioConfig {
    pub fn station_count(&self) -> u32 {
        self.stations_per_ac.iter().sum()
    }

    pub fn frame_slots(&self) -> u64 {
        frame_duration_slots(&self.traffic, self.traffic.bitrate_bps, self.timing.slot_us as f64)
    }

    pub fn observed_duration_us(&self) -> f64 {
        (self.run.total_slots - self.run.warmup_slots) as f64 * self.timing.slot_us as f64
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.channel.mpr_limit == 0 {
            return Err(ConfigError::invalid("channel.mpr_limit", "must be >= 1"));
        }
        for (i, ac) in self.ac_table.iter().enumerate() {
            if ac.ac.index() != i {
                return Err(ConfigError::invalid(
                    format!("ac[{i}].id"),
                    format!("entry {i} describes {}", ac.ac),
                ));
            }
            ac.validate(self.channel.mpr_limit)?;
        }
        if self.station_count() == 0 {
            return Err(ConfigError::invalid("stations.per_ac", "at least one station is required"));
        }
        self.traffic.validate()?;
        if self.timing.slot_us == 0 {
            return Err(ConfigError::invalid("timing.slot_us", "must be > 0"));
        }
        if self.run.total_slots <= self.run.warmup_slots {
            return Err(ConfigError::invalid(
                "run.warmup_slots",
                format!(
                    "warm-up ({}) must be shorter than the run ({})",
                    self.run.warmup_slots, self.run.total_slots
                ),
            ));
        }
        Ok(())
    }
}

/// Everything that happened in one slot. Station fields hold station ids.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceRecord {
    pub slot: Slot,
    pub sensed: u32,
    pub arrivals: Vec<(u32, u32)>,
    pub draws: Vec<(u32, u32)>,
    pub decrements: Vec<(u32, u32)>,
    pub starts: Vec<u32>,
    pub ends: Vec<(u32, bool)>,
    pub drops: Vec<u32>,
    pub phases: Vec<(u32, PhaseKind)>,
}

impl TraceRecord {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("trace records always serialize")
    }

    pub fn from_json_line(line: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(line)
    }
}

/// SHA-256 over the newline-terminated JSON lines of a trace.
#[derive(Debug, Clone, Default)]
pub struct TraceDigest(Sha256);

impl TraceDigest {
    pub fn update(&mut self, record: &TraceRecord) {
        self.0.update(record.to_json_line().as_bytes());
        self.0.update(b"\n");
    }

    pub fn hex(self) -> String {
        self.0
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// Whole-run packet bookkeeping; arrivals reconcile with the other fields.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PacketLedger {
    pub arrivals: u64,
    pub delivered: u64,
    pub dropped: u64,
    /// Arrivals rejected by a full queue.
    pub overflowed: u64,
    /// Held by stations at the end, head of line included, excluding frames on air.
    pub queued: u64,
    pub in_flight: u64,
}

impl PacketLedger {
    pub fn reconciles(&self) -> bool {
        self.arrivals == self.delivered + self.dropped + self.overflowed + self.queued + self.in_flight
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameLedger {
    pub started: u64,
    pub succeeded: u64,
    pub collided: u64,
    pub unresolved: u64,
}

impl FrameLedger {
    pub fn reconciles(&self) -> bool {
        self.started == self.succeeded + self.collided + self.unresolved
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    pub metrics: MetricsReport,
    pub packets: PacketLedger,
    pub frames: FrameLedger,
    /// Highest number of frames observed on the air at once.
    pub peak_concurrency: u32,
}

struct Station {
    mac: StationState,
    backoff_rng: ChaCha8Rng,
    arrival_rng: ChaCha8Rng,
}

fn substream(seed: u64, ac: AcId, index: u32, arrivals: bool) -> ChaCha8Rng {
    let key = ((ac.index() as u64) << 32) | index as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2 * key + u64::from(arrivals));
    rng
}

struct Pending {
    due: Slot,
    completion: Completion,
}

struct Simulation<'a> {
    cfg: &'a ScenarioConfig,
    channel: ChannelState,
    stations: Vec<Station>,
    arrivals: Option<PoissonArrivals>,
    frame_slots: u64,
    metrics: MetricsAccumulator,
    packets: PacketLedger,
    frames: FrameLedger,
    pending: Vec<Pending>,
    next_packet: u64,
    peak: u32,
    credited_bits: u64,
}

impl<'a> Simulation<'a> {
    fn new(cfg: &'a ScenarioConfig) -> Self {
        let mut stations = Vec::with_capacity(cfg.station_count() as usize);
        for ac_cfg in &cfg.ac_table {
            let aifs = cfg.timing.aifs_slots(ac_cfg.aifs_us);
            for index in 0..cfg.stations_per_ac[ac_cfg.ac.index()] {
                let id = StationId(stations.len() as u32);
                stations.push(Station {
                    mac: StationState::new(id, *ac_cfg, cfg.channel.mpr_limit, aifs),
                    backoff_rng: substream(cfg.run.seed, ac_cfg.ac, index, false),
                    arrival_rng: substream(cfg.run.seed, ac_cfg.ac, index, true),
                });
            }
        }
        let arrivals = match cfg.traffic.mode {
            TrafficMode::Poisson { rate_pps } => {
                Some(PoissonArrivals::new(rate_pps, cfg.timing.slot_us as f64))
            }
            TrafficMode::Saturation => None,
        };
        let credited_bits = if cfg.metrics.include_headers {
            cfg.traffic.frame_bits()
        } else {
            cfg.traffic.payload_bits as u64
        };
        Self {
            cfg,
            channel: ChannelState::new(cfg.channel),
            stations,
            arrivals,
            frame_slots: cfg.frame_slots(),
            metrics: MetricsAccumulator::new(cfg.traffic.bitrate_bps),
            packets: PacketLedger::default(),
            frames: FrameLedger::default(),
            pending: Vec::new(),
            next_packet: 0,
            peak: 0,
            credited_bits,
        }
    }

    fn in_window(&self, slot: Slot) -> bool {
        slot >= self.cfg.run.warmup_slots
    }

    fn slot_us(&self) -> f64 {
        self.cfg.timing.slot_us as f64
    }

    fn run<F: FnMut(&TraceRecord)>(mut self, mut sink: Option<F>) -> Result<RunOutput, SimError> {
        let mut starters = Vec::new();
        let mut before = Vec::new();
        for t in 0..self.cfg.run.total_slots {
            let mut rec = sink.is_some().then(|| TraceRecord {
                slot: t,
                ..Default::default()
            });
            if rec.is_some() {
                before.clear();
                before.extend(self.stations.iter().map(|s| s.mac.phase().kind()));
            }
            self.arrivals_phase(t, rec.as_mut());

            let sensed = self.channel.sense();
            if let Some(r) = rec.as_mut() {
                r.sensed = sensed;
            }

            starters.clear();
            for st in &mut self.stations {
                if st.mac.is_busy() {
                    continue;
                }
                let out = st.mac.step(sensed, &mut st.backoff_rng);
                if let Some(r) = rec.as_mut() {
                    if let Some(v) = out.drew {
                        r.draws.push((st.mac.id.0, v));
                    }
                    if out.decrement > 0 {
                        r.decrements.push((st.mac.id.0, out.decrement));
                    }
                }
                if out.wants_to_transmit {
                    starters.push((st.mac.id, st.mac.ac.ac));
                }
            }

            self.channel.admit_transmissions(&starters, self.frame_slots)?;
            let busy_until = t + self.frame_slots + self.cfg.timing.ack_overhead_slots as u64;
            for &(id, _) in &starters {
                self.stations[id.0 as usize].mac.start_transmission(busy_until);
                self.frames.started += 1;
                if let Some(r) = rec.as_mut() {
                    r.starts.push(id.0);
                }
            }
            self.peak = self.peak.max(self.channel.sense());

            let done = self.channel.retire_completions();
            let now = t + 1;
            let ack = self.cfg.timing.ack_overhead_slots as u64;
            for completion in done {
                if completion.success {
                    self.frames.succeeded += 1;
                } else {
                    self.frames.collided += 1;
                }
                self.pending.push(Pending {
                    due: now + ack,
                    completion,
                });
            }
            let mut i = 0;
            while i < self.pending.len() {
                if self.pending[i].due == now {
                    let p = self.pending.remove(i);
                    self.apply_result(p.completion, now, rec.as_mut())?;
                } else {
                    i += 1;
                }
            }

            if let (Some(mut r), Some(f)) = (rec, sink.as_mut()) {
                for (st, was) in self.stations.iter().zip(&before) {
                    let kind = st.mac.phase().kind();
                    if kind != *was {
                        r.phases.push((st.mac.id.0, kind));
                    }
                }
                f(&r);
            }
        }
        Ok(self.finish())
    }

    fn arrivals_phase(&mut self, t: Slot, mut rec: Option<&mut TraceRecord>) {
        let capacity = self.cfg.traffic.queue_capacity;
        let window = self.in_window(t);
        for st in &mut self.stations {
            let count = match &self.arrivals {
                Some(src) => src.sample(&mut st.arrival_rng),
                None => u32::from(st.mac.hol.is_none() && !st.mac.is_busy()),
            };
            if count == 0 {
                continue;
            }
            for _ in 0..count {
                let packet = Packet {
                    id: self.next_packet,
                    arrival_slot: t,
                    hol_slot: t,
                };
                self.next_packet += 1;
                if st.mac.enqueue(packet, capacity).is_err() {
                    self.packets.overflowed += 1;
                }
            }
            self.packets.arrivals += count as u64;
            if window {
                self.metrics.record_arrivals(st.mac.ac.ac, count as u64);
            }
            if let Some(r) = rec.as_deref_mut() {
                r.arrivals.push((st.mac.id.0, count));
            }
        }
    }

    fn apply_result(
        &mut self,
        completion: Completion,
        now: Slot,
        rec: Option<&mut TraceRecord>,
    ) -> Result<(), SimError> {
        let slot_us = self.slot_us();
        let window = now > self.cfg.run.warmup_slots;
        let st = &mut self.stations[completion.station.0 as usize];
        let (outcome, drew) = st
            .mac
            .on_transmission_result(completion.success, now, &mut st.backoff_rng)?;
        let id = st.mac.id.0;
        let ac = st.mac.ac.ac;
        match outcome {
            ResultOutcome::Delivered(p) => {
                self.packets.delivered += 1;
                if window {
                    let anchor = match self.cfg.metrics.delay_anchor {
                        DelayAnchor::Arrival => p.arrival_slot,
                        DelayAnchor::HeadOfLine => p.hol_slot,
                    };
                    self.metrics.record_delivery(
                        ac,
                        anchor as f64 * slot_us,
                        now as f64 * slot_us,
                        self.credited_bits,
                    )?;
                }
            }
            ResultOutcome::Dropped(_) => {
                self.packets.dropped += 1;
                if window {
                    self.metrics.record_drop(ac);
                }
            }
            ResultOutcome::Retry => {}
        }
        if let Some(r) = rec {
            r.ends.push((id, completion.success));
            if matches!(outcome, ResultOutcome::Dropped(_)) {
                r.drops.push(id);
            }
            r.draws.push((id, drew));
        }
        Ok(())
    }

    fn finish(self) -> RunOutput {
        let in_flight = self.stations.iter().filter(|s| s.mac.is_busy()).count() as u64;
        let held: u64 = self.stations.iter().map(|s| s.mac.backlog() as u64).sum();
        let packets = PacketLedger {
            queued: held - in_flight,
            in_flight,
            ..self.packets
        };
        let frames = FrameLedger {
            unresolved: self.channel.in_flight().len() as u64,
            ..self.frames
        };
        RunOutput {
            metrics: self.metrics.finalize(self.cfg.observed_duration_us()),
            packets,
            frames,
            peak_concurrency: self.peak,
        }
    }
}

/// Runs a scenario without recording a trace.
pub fn run(cfg: &ScenarioConfig) -> Result<RunOutput, SimError> {
    cfg.validate()?;
    Simulation::new(cfg).run(None::<fn(&TraceRecord)>)
}

/// Runs a scenario and hands every slot's record to `sink` in slot order.
pub fn run_traced<F: FnMut(&TraceRecord)>(cfg: &ScenarioConfig, sink: F) -> Result<RunOutput, SimError> {
    cfg.validate()?;
    Simulation::new(cfg).run(Some(sink))
}

/// Runs a scenario and collects the full trace in memory.
pub fn run_with_trace(cfg: &ScenarioConfig) -> Result<(RunOutput, Vec<TraceRecord>), SimError> {
    let mut trace = Vec::with_capacity(cfg.run.total_slots as usize);
    let out = run_traced(cfg, |r| trace.push(r.clone()))?;
    Ok((out, trace))
}

/// Classical DCF: every category counts down by one per fully idle slot.
///
/// Requires a single-reception channel (`K = 1`). All categories are forced to
/// threshold 0 with fixed countdown; their backoff parameters are kept.
pub fn run_dcf_baseline(cfg: &ScenarioConfig) -> Result<(RunOutput, Vec<TraceRecord>), SimError> {
    if cfg.channel.mpr_limit != 1 {
        return Err(ConfigError::invalid(
            "channel.mpr_limit",
            format!("the DCF baseline needs K = 1, got {}", cfg.channel.mpr_limit),
        )
        .into());
    }
    let mut dcf = cfg.clone();
    for ac in &mut dcf.ac_table {
        ac.threshold = 0;
        ac.countdown = CountdownMode::FixedOne;
    }
    run_with_trace(&dcf)
}
