//! Per-category throughput, MAC delay and jitter.
//!
//! Throughput is the delivered payload airtime divided by the observed time,
//! so a K-MPR channel can exceed 1. Jitter is the population variance of the
//! MAC delay samples.

use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::traffic::bits_to_us;
use crate::AcId;

/// Online mean and variance (Welford).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunningStats {
    count: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> Option<f64> {
        (self.count > 0).then_some(self.mean)
    }

    pub fn population_variance(&self) -> Option<f64> {
        (self.count > 0).then(|| (self.m2 / self.count as f64).max(0.0))
    }
}

#[derive(Debug, Clone, Default)]
struct AcAccumulator {
    delivered: u64,
    dropped: u64,
    offered: u64,
    delivered_bits: u64,
    delay: RunningStats,
    samples: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct MetricsAccumulator {
    bitrate_bps: f64,
    per_ac: [AcAccumulator; 4],
}

impl MetricsAccumulator {
    pub fn new(bitrate_bps: f64) -> Self {
        Self {
            bitrate_bps,
            per_ac: Default::default(),
        }
    }

    /// Credits one delivered packet. `bits` is what counts towards
    /// throughput (payload only unless headers are included by the caller).
    pub fn record_delivery(
        &mut self,
        ac: AcId,
        enqueue_us: f64,
        completion_us: f64,
        bits: u64,
    ) -> Result<(), SimError> {
        if completion_us < enqueue_us {
            return Err(SimError::NegativeDelay {
                enqueue_us,
                completion_us,
            });
        }
        let acc = &mut self.per_ac[ac.index()];
        let delay = completion_us - enqueue_us;
        acc.delivered += 1;
        acc.delivered_bits += bits;
        acc.delay.push(delay);
        acc.samples.push(delay);
        Ok(())
    }

    pub fn record_drop(&mut self, ac: AcId) {
        self.per_ac[ac.index()].dropped += 1;
    }

    pub fn record_arrivals(&mut self, ac: AcId, count: u64) {
        self.per_ac[ac.index()].offered += count;
    }

    /// Raw delay samples in delivery order.
    pub fn delay_samples(&self, ac: AcId) -> &[f64] {
        &self.per_ac[ac.index()].samples
    }

    pub fn finalize(&self, observed_duration_us: f64) -> MetricsReport {
        debug_assert!(observed_duration_us > 0.0);
        let per_ac: Vec<AcReport> = AcId::ALL
            .iter()
            .map(|&ac| {
                let a = &self.per_ac[ac.index()];
                AcReport {
                    ac,
                    throughput: bits_to_us(a.delivered_bits, self.bitrate_bps) / observed_duration_us,
                    mean_delay_us: a.delay.mean(),
                    jitter_us2: a.delay.population_variance(),
                    delivered: a.delivered,
                    dropped: a.dropped,
                    offered: a.offered,
                    delivered_bits: a.delivered_bits,
                }
            })
            .collect();
        let mut all = RunningStats::default();
        for a in &self.per_ac {
            for &d in &a.samples {
                all.push(d);
            }
        }
        let aggregate = AggregateReport {
            throughput: per_ac.iter().map(|r| r.throughput).sum(),
            mean_delay_us: all.mean(),
            jitter_us2: all.population_variance(),
            delivered: per_ac.iter().map(|r| r.delivered).sum(),
            dropped: per_ac.iter().map(|r| r.dropped).sum(),
            offered: per_ac.iter().map(|r| r.offered).sum(),
            delivered_bits: per_ac.iter().map(|r| r.delivered_bits).sum(),
        };
        MetricsReport {
            observed_duration_us,
            per_ac,
            aggregate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcReport {
    pub ac: AcId,
    pub throughput: f64,
    /// `None` when nothing was delivered.
    pub mean_delay_us: Option<f64>,
    pub jitter_us2: Option<f64>,
    pub delivered: u64,
    pub dropped: u64,
    /// Arrivals inside the observation window.
    pub offered: u64,
    pub delivered_bits: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub throughput: f64,
    pub mean_delay_us: Option<f64>,
    pub jitter_us2: Option<f64>,
    pub delivered: u64,
    pub dropped: u64,
    pub offered: u64,
    pub delivered_bits: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub observed_duration_us: f64,
    pub per_ac: Vec<AcReport>,
    pub aggregate: AggregateReport,
}

impl MetricsReport {
    pub fn ac(&self, ac: AcId) -> &AcReport {
        &self.per_ac[ac.index()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_pass_variance(xs: &[f64]) -> f64 {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n
    }

    #[test]
    fn single_sample_has_zero_jitter() {
        let mut m = MetricsAccumulator::new(1e6);
        m.record_delivery(AcId::AC1, 10.0, 510.0, 8184).unwrap();
        let r = m.finalize(1e6);
        assert_eq!(r.ac(AcId::AC1).mean_delay_us, Some(500.0));
        assert_eq!(r.ac(AcId::AC1).jitter_us2, Some(0.0));
    }

    #[test]
    fn equal_delays_have_zero_jitter() {
        let mut m = MetricsAccumulator::new(1e6);
        m.record_delivery(AcId::AC0, 0.0, 250.0, 1).unwrap();
        m.record_delivery(AcId::AC0, 100.0, 350.0, 1).unwrap();
        assert_eq!(m.finalize(1.0).ac(AcId::AC0).jitter_us2, Some(0.0));
    }

    #[test]
    fn population_variance_of_two_delays() {
        let mut m = MetricsAccumulator::new(1e6);
        m.record_delivery(AcId::AC2, 0.0, 100.0, 1).unwrap();
        m.record_delivery(AcId::AC2, 0.0, 300.0, 1).unwrap();
        let r = m.finalize(1.0);
        assert_eq!(r.ac(AcId::AC2).mean_delay_us, Some(200.0));
        assert_eq!(r.ac(AcId::AC2).jitter_us2, Some(10_000.0));
    }

    #[test]
    fn rejects_negative_delay() {
        let mut m = MetricsAccumulator::new(1e6);
        assert!(matches!(
            m.record_delivery(AcId::AC0, 10.0, 5.0, 1),
            Err(SimError::NegativeDelay { .. })
        ));
    }

    #[test]
    fn empty_report() {
        let r = MetricsAccumulator::new(1e6).finalize(1e6);
        for a in &r.per_ac {
            assert_eq!(a.throughput, 0.0);
            assert_eq!(a.mean_delay_us, None);
            assert_eq!(a.jitter_us2, None);
        }
        assert_eq!(r.aggregate.throughput, 0.0);
    }

    #[test]
    fn throughput_is_payload_airtime_fraction() {
        let mut m = MetricsAccumulator::new(1e6);
        for _ in 0..10 {
            m.record_delivery(AcId::AC0, 0.0, 1.0, 8184).unwrap();
        }
        let r = m.finalize(81_840.0 * 2.0);
        assert!((r.ac(AcId::AC0).throughput - 0.5).abs() < 1e-12);
    }

    #[test]
    fn fully_packed_eight_streams_approach_packing_bound() {
        // eight back-to-back streams of 8584-bit frames, 8184 payload bits each
        let frames = 1000u64;
        let mut m = MetricsAccumulator::new(1e6);
        for stream in 0..8u8 {
            let ac = AcId::new(stream % 4).unwrap();
            for f in 0..frames {
                let start = f as f64 * 8584.0;
                m.record_delivery(ac, start, start + 8584.0, 8184).unwrap();
            }
        }
        let r = m.finalize(frames as f64 * 8584.0);
        let bound = 8.0 * 8184.0 / 8584.0;
        assert!((r.aggregate.throughput - bound).abs() < 1e-9);
        assert!(r.aggregate.throughput <= 8.0);
    }

    #[test]
    fn drops_never_become_delay_samples() {
        let mut m = MetricsAccumulator::new(1e6);
        m.record_drop(AcId::AC3);
        m.record_drop(AcId::AC3);
        let r = m.finalize(1.0);
        assert_eq!(r.ac(AcId::AC3).dropped, 2);
        assert_eq!(r.ac(AcId::AC3).delivered, 0);
        assert!(m.delay_samples(AcId::AC3).is_empty());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn streaming_variance_matches_two_pass(
                xs in proptest::collection::vec(0.0f64..1e7, 1..500),
            ) {
                let mut m = MetricsAccumulator::new(1e6);
                for &x in &xs {
                    m.record_delivery(AcId::AC0, 0.0, x, 1).unwrap();
                }
                let streamed = m.finalize(1.0).ac(AcId::AC0).jitter_us2.unwrap();
                let batch = two_pass_variance(&xs);
                let scale = batch.abs().max(1.0);
                prop_assert!((streamed - batch).abs() / scale < 1e-9,
                    "streamed {} batch {}", streamed, batch);
            }
        }
    }
}
