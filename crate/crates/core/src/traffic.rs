//! Packet sources and frame timing.

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TrafficMode {
    /// Independent Poisson arrivals at every station, in packets per second.
    Poisson { rate_pps: f64 },
    /// Every station always has a packet ready.
    Saturation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrafficConfig {
    pub mode: TrafficMode,
    pub payload_bits: u32,
    pub mac_header_bits: u32,
    pub phy_header_bits: u32,
    pub bitrate_bps: f64,
    /// Per-station packet limit including the head of line; `None` is unbounded.
    pub queue_capacity: Option<usize>,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        Self {
            mode: TrafficMode::Saturation,
            payload_bits: 8184,
            mac_header_bits: 272,
            phy_header_bits: 128,
            bitrate_bps: 1e6,
            queue_capacity: None,
        }
    }
}

impl TrafficConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if let TrafficMode::Poisson { rate_pps } = self.mode {
            if !(rate_pps.is_finite() && rate_pps >= 0.0) {
                return Err(ConfigError::invalid(
                    "traffic.rate_pps",
                    "must be a finite nonnegative rate",
                ));
            }
        }
        if self.payload_bits == 0 {
            return Err(ConfigError::invalid("traffic.payload_bits", "must be > 0"));
        }
        if !(self.bitrate_bps.is_finite() && self.bitrate_bps > 0.0) {
            return Err(ConfigError::invalid("traffic.bitrate_bps", "must be > 0"));
        }
        if self.queue_capacity == Some(0) {
            return Err(ConfigError::invalid("traffic.queue_capacity", "must be >= 1"));
        }
        Ok(())
    }

    pub fn frame_bits(&self) -> u64 {
        self.phy_header_bits as u64 + self.mac_header_bits as u64 + self.payload_bits as u64
    }

    /// Exact on-air time of one frame, headers included.
    pub fn frame_duration_us(&self) -> f64 {
        bits_to_us(self.frame_bits(), self.bitrate_bps)
    }

    pub fn payload_duration_us(&self) -> f64 {
        bits_to_us(self.payload_bits as u64, self.bitrate_bps)
    }
}

pub fn bits_to_us(bits: u64, bitrate_bps: f64) -> f64 {
    bits as f64 * 1e6 / bitrate_bps
}

/// Number of whole slots a frame occupies; the final partial slot is rounded up.
pub fn frame_duration_slots(cfg: &TrafficConfig, bitrate_bps: f64, slot_us: f64) -> u64 {
    let slots = bits_to_us(cfg.frame_bits(), bitrate_bps) / slot_us;
    // absorb float noise on exact multiples
    let slots = (slots - 1e-9).ceil();
    slots.max(1.0) as u64
}

/// Offered load normalised to the frame transmission time; may exceed 1.
pub fn normalized_offered_load(per_station_rate_pps: f64, stations: u32, frame_us: f64) -> f64 {
    stations as f64 * per_station_rate_pps * frame_us * 1e-6
}

/// Per-station rate that yields `load` for `stations` stations.
pub fn rate_for_load(load: f64, stations: u32, frame_us: f64) -> f64 {
    if load == 0.0 {
        return 0.0;
    }
    load / (stations as f64 * frame_us * 1e-6)
}

/// Per-slot Poisson arrival counter with precomputed parameters.
#[derive(Debug, Clone)]
pub struct PoissonArrivals {
    mean: f64,
    p0: f64,
    large: Option<Poisson<f64>>,
}

impl PoissonArrivals {
    const INVERSION_LIMIT: f64 = 30.0;

    pub fn new(rate_pps: f64, slot_us: f64) -> Self {
        let mean = rate_pps * slot_us * 1e-6;
        let large = (mean >= Self::INVERSION_LIMIT).then(|| Poisson::new(mean).expect("finite mean"));
        Self {
            mean,
            p0: (-mean).exp(),
            large,
        }
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Arrivals in one slot. Small means use inversion with a single uniform.
    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> u32 {
        if self.mean == 0.0 {
            return 0;
        }
        if let Some(d) = &self.large {
            return d.sample(rng) as u32;
        }
        let u: f64 = rng.random();
        let mut k = 0u32;
        let mut p = self.p0;
        let mut cdf = p;
        while u > cdf && p > 0.0 {
            k += 1;
            p *= self.mean / k as f64;
            cdf += p;
        }
        k
    }
}

/// Poisson arrivals at one station during one slot; `None` in saturation mode.
pub fn arrivals_in_slot<R: RngCore + ?Sized>(
    rng: &mut R,
    cfg: &TrafficConfig,
    slot_us: f64,
) -> Option<u32> {
    match cfg.mode {
        TrafficMode::Poisson { rate_pps } => Some(PoissonArrivals::new(rate_pps, slot_us).sample(rng)),
        TrafficMode::Saturation => None,
    }
}
