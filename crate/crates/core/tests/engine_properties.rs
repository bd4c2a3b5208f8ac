use std::collections::HashSet;

use mprsim::engine::{run_with_trace, ScenarioConfig, TraceRecord};
use mprsim::mac::{decrement_amount, CountdownMode};
use mprsim::scenario::parse_scenario;
use mprsim::{run, AcId};
use proptest::prelude::*;

fn scenario(src: &str) -> ScenarioConfig {
    parse_scenario(src).unwrap_or_else(|e| panic!("{e}\n{src}"))
}

/// AC of every station, in engine order (grouped by category).
fn station_acs(cfg: &ScenarioConfig) -> Vec<usize> {
    (0..4)
        .flat_map(|ac| std::iter::repeat_n(ac, cfg.stations_per_ac[ac] as usize))
        .collect()
}

/// Gap between the end of a frame and the next start of one lone station,
/// given the backoff it drew in between.
fn lone_station_gaps(trace: &[TraceRecord]) -> Vec<(u64, u32)> {
    let mut last_end = None;
    let mut last_draw = None;
    let mut gaps = Vec::new();
    for rec in trace {
        if let Some(&(_, b)) = rec.draws.last() {
            last_draw = Some(b);
        }
        if !rec.starts.is_empty() {
            if let (Some(e), Some(b)) = (last_end, last_draw) {
                gaps.push((rec.slot - e - 1, b));
            }
            last_draw = None;
        }
        if !rec.ends.is_empty() {
            last_end = Some(rec.slot);
        }
    }
    gaps
}

#[test]
fn lone_fixed_station_waits_aifs_plus_backoff() {
    let cfg = scenario("[stations]\nper_ac = [0, 0, 0, 1]\n[run]\ntotal_slots = 200000\n");
    let (out, trace) = run_with_trace(&cfg).unwrap();
    let gaps = lone_station_gaps(&trace);
    assert!(gaps.len() > 1000);
    for &(gap, b) in &gaps {
        assert_eq!(gap, 3 + b as u64);
    }
    assert_eq!(out.frames.collided, 0);
}

#[test]
fn lone_adaptive_station_counts_down_k_per_slot() {
    let cfg = scenario("[stations]\nper_ac = [1, 0, 0, 0]\n[run]\ntotal_slots = 200000\n");
    let (_, trace) = run_with_trace(&cfg).unwrap();
    for (gap, b) in lone_station_gaps(&trace) {
        assert_eq!(gap, 3 + (b as u64).div_ceil(8), "draw {b}");
    }
}

#[test]
fn lone_station_throughput_matches_renewal_oracle() {
    // cycle = frame + AIFS + uniform{0..=16} backoff, in 50 us slots
    let cfg = scenario("[stations]\nper_ac = [0, 0, 0, 1]\n[run]\ntotal_slots = 1000000\nseed = 3\n");
    let out = run(&cfg).unwrap();
    let frame_slots = (8584.0f64 / 50.0).ceil();
    let mean_backoff = (0..=16).sum::<u32>() as f64 / 17.0;
    let expected = 8184.0 / ((frame_slots + 3.0 + mean_backoff) * 50.0);
    let got = out.metrics.ac(AcId::AC3).throughput;
    assert!((got - expected).abs() / expected < 0.005, "{got} vs {expected}");
    // a saturated packet waits exactly one cycle from reaching the head of the line
    let delay = out.metrics.ac(AcId::AC3).mean_delay_us.unwrap();
    let expected_delay = (frame_slots + 3.0 + mean_backoff) * 50.0;
    assert!((delay - expected_delay).abs() / expected_delay < 0.005, "{delay} vs {expected_delay}");
}

const MIXED: &str = "[channel]\nmpr_limit = 8\n[stations]\ntotal = 40\n[traffic]\nmode = \"poisson\"\n\
                     normalized_load = 5.0\n[run]\ntotal_slots = 60000\nseed = 21\n";

#[test]
fn counters_freeze_above_threshold_and_decrement_by_formula() {
    let cfg = scenario(MIXED);
    let acs = station_acs(&cfg);
    let (_, trace) = run_with_trace(&cfg).unwrap();
    let mut seen = 0;
    for rec in &trace {
        for &(s, d) in &rec.decrements {
            let ac = &cfg.ac_table[acs[s as usize]];
            assert!(rec.sensed <= ac.threshold, "slot {}: station {s} decremented while frozen", rec.slot);
            assert_eq!(d, decrement_amount(ac.countdown, 8, ac.threshold, rec.sensed));
            seen += 1;
        }
    }
    assert!(seen > 1000);
}

#[test]
fn starts_respect_half_duplex_and_threshold() {
    let cfg = scenario(MIXED);
    let acs = station_acs(&cfg);
    let (out, trace) = run_with_trace(&cfg).unwrap();
    let mut airing = HashSet::new();
    let mut starts = 0u64;
    for rec in &trace {
        assert_eq!(rec.sensed as usize, airing.len(), "slot {}", rec.slot);
        for &s in &rec.starts {
            assert!(airing.insert(s), "station {s} started twice at slot {}", rec.slot);
            assert!(rec.sensed <= cfg.ac_table[acs[s as usize]].threshold);
            starts += 1;
        }
        for &(s, _) in &rec.ends {
            assert!(airing.remove(&s), "station {s} ended without starting");
        }
    }
    assert_eq!(starts, out.frames.started);
}

#[test]
fn differentiation_holds_in_mixed_run() {
    let out = run(&scenario(MIXED)).unwrap();
    let d = |ac| out.metrics.ac(ac).mean_delay_us.unwrap();
    assert!(d(AcId::AC0) < d(AcId::AC1));
    assert!(out.metrics.ac(AcId::AC0).throughput > out.metrics.ac(AcId::AC3).throughput);
}

#[test]
fn delay_is_at_least_one_frame() {
    let cfg = scenario(MIXED);
    let out = run(&cfg).unwrap();
    let frame_us = cfg.frame_slots() as f64 * 50.0;
    for r in &out.metrics.per_ac {
        if let Some(d) = r.mean_delay_us {
            assert!(d >= frame_us, "{}: {d}", r.ac);
        }
    }
}

#[test]
fn throughput_counts_payload_unless_headers_included() {
    let base = "[stations]\ntotal = 8\n[run]\ntotal_slots = 40000\n";
    for (headers, bits) in [(false, 8184u64), (true, 8584)] {
        let cfg = scenario(&format!("{base}[metrics]\ninclude_headers = {headers}\n"));
        let out = run(&cfg).unwrap();
        for r in &out.metrics.per_ac {
            assert_eq!(r.delivered_bits, r.delivered * bits);
            let expected = r.delivered_bits as f64 / out.metrics.observed_duration_us;
            assert!((r.throughput - expected).abs() < 1e-12);
        }
    }
}

#[test]
fn station_count_does_not_shift_existing_streams() {
    let a = scenario("[stations]\nper_ac = [3, 0, 0, 0]\n[run]\ntotal_slots = 2000\nseed = 9\n");
    let mut b = a.clone();
    b.stations_per_ac = [3, 0, 0, 2];
    let first_draws = |cfg: &ScenarioConfig| -> Vec<(u32, u32)> {
        let (_, t) = run_with_trace(cfg).unwrap();
        t[0].draws.iter().copied().filter(|&(s, _)| s < 3).collect()
    };
    assert_eq!(first_draws(&a), first_draws(&b));
}

fn arb_scenario() -> impl Strategy<Value = String> {
    (
        2u32..=8,
        prop::array::uniform4(0u32..4),
        prop_oneof![Just(None), (0.0f64..6.0).prop_map(Some)],
        1u32..64,
        0u32..=7,
        0u32..=6,
        0u32..3,
        prop_oneof![Just(None), (1usize..8).prop_map(Some)],
        any::<u64>(),
        any::<bool>(),
    )
        .prop_filter("needs a station", |t| t.1.iter().sum::<u32>() > 0)
        .prop_map(|(k, per_ac, load, cw, m, retry, ack, cap, seed, exclusive)| {
            let mut s = format!(
                "[channel]\nmpr_limit = {k}\n[timing]\nack_overhead_slots = {ack}\n\
                 [stations]\nper_ac = [{}, {}, {}, {}]\n[traffic]\n",
                per_ac[0], per_ac[1], per_ac[2], per_ac[3]
            );
            match load {
                Some(g) => s += &format!("mode = \"poisson\"\nnormalized_load = {g}\n"),
                None => s += "mode = \"saturation\"\n",
            }
            if let Some(c) = cap {
                s += &format!("queue_capacity = {c}\n");
            }
            let window = if exclusive && cw > 1 { "exclusive" } else { "inclusive" };
            s += &format!(
                "[backoff]\ncw_min = {cw}\nmax_backoff_stage = {m}\nretry_limit = {retry}\nwindow = \"{window}\"\n\
                 [run]\ntotal_slots = 4000\nwarmup_slots = 500\nseed = {seed}\n"
            );
            s
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn random_scenarios_conserve_and_stay_in_bounds(src in arb_scenario()) {
        let cfg = scenario(&src);
        let (out, trace) = run_with_trace(&cfg).unwrap();
        let k = cfg.channel.mpr_limit;
        prop_assert!(out.packets.reconciles(), "{:?}", out.packets);
        prop_assert!(out.frames.reconciles(), "{:?}", out.frames);
        prop_assert!(out.metrics.aggregate.throughput <= k as f64);
        let acs = station_acs(&cfg);
        let mut attempts = vec![0u32; acs.len()];
        for rec in &trace {
            for &(s, b) in &rec.draws {
                let backoff = &cfg.ac_table[acs[s as usize]].backoff;
                prop_assert!(b <= backoff.draw_upper(backoff.max_backoff_stage), "draw {} too large", b);
            }
            for &s in &rec.starts {
                attempts[s as usize] += 1;
            }
            for &(s, ok) in &rec.ends {
                if ok { attempts[s as usize] = 0; }
            }
            for &s in &rec.drops {
                let limit = cfg.ac_table[acs[s as usize]].backoff.retry_limit;
                prop_assert_eq!(attempts[s as usize], limit + 1, "station {} dropped early or late", s);
                attempts[s as usize] = 0;
            }
            for (s, &a) in attempts.iter().enumerate() {
                let limit = cfg.ac_table[acs[s]].backoff.retry_limit;
                prop_assert!(a <= limit + 1, "station {} made {} attempts", s, a);
            }
        }
        for r in &out.metrics.per_ac {
            if let Some(d) = r.mean_delay_us {
                prop_assert!(d >= 0.0);
            }
            if r.delivered == 0 {
                prop_assert!(r.mean_delay_us.is_none());
            }
        }
    }
}

#[test]
fn fixed_countdown_never_decrements_by_more_than_one() {
    let cfg = scenario(MIXED);
    let acs = station_acs(&cfg);
    let (_, trace) = run_with_trace(&cfg).unwrap();
    for rec in &trace {
        for &(s, d) in &rec.decrements {
            if cfg.ac_table[acs[s as usize]].countdown == CountdownMode::FixedOne {
                assert_eq!(d, 1);
            }
        }
    }
}
