//! Scenario files.
//!
//! A scenario is a TOML document whose tables mirror [`ScenarioConfig`].
//! Every key is optional; omitted keys take the reference defaults (K = 8,
//! 40 stations split evenly, 50 us slots, 128 us DIFS, 8184-bit payload at
//! 1 Mb/s, cw_min 16, stage cap 5, retry limit 4). Without `[[ac]]` entries
//! the four categories come from [`default_ac_table`]; an `[[ac]]` entry
//! overrides individual fields of the category named by its `id`.
//!
//! ```toml
//! [channel]
//! mpr_limit = 8
//!
//! [traffic]
//! mode = "poisson"
//! normalized_load = 2.0
//!
//! [stations]
//! per_ac = [10, 10, 10, 10]
//!
//! [[ac]]
//! id = 3
//! threshold = 2
//! ```
//!
//! [`echo_scenario`] prints the fully resolved form, which parses back to the
//! same configuration.

use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::ops::Range;

use serde::de::{self, Deserializer, Visitor};
use serde::Deserialize;
use toml::Spanned;

use crate::channel::ChannelConfig;
use crate::engine::{DelayAnchor, MetricsSettings, RunSettings, ScenarioConfig, Timing};
use crate::error::ConfigError;
use crate::mac::{default_ac_table, BackoffConfig, CountdownMode, WindowBounds};
use crate::traffic::{normalized_offered_load, rate_for_load, TrafficConfig, TrafficMode};
use crate::AcId;

pub const DEFAULT_MPR_LIMIT: u32 = 8;
pub const DEFAULT_STATIONS_PER_AC: u32 = 10;

/// A TOML number that may be written as an integer or a float.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Num(pub f64);

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct NumVisitor;
        impl Visitor<'_> for NumVisitor {
            type Value = Num;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number")
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Num, E> {
                Ok(Num(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Num, E> {
                Ok(Num(v as f64))
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Num, E> {
                Ok(Num(v))
            }
        }
        d.deserialize_any(NumVisitor)
    }
}

type S<T> = Option<Spanned<T>>;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct RawScenario {
    channel: Option<RawChannel>,
    timing: Option<RawTiming>,
    traffic: Option<RawTraffic>,
    stations: Option<RawStations>,
    backoff: Option<RawBackoff>,
    run: Option<RawRun>,
    metrics: Option<RawMetrics>,
    #[serde(default)]
    ac: Vec<RawAc>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannel {
    mpr_limit: S<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTiming {
    slot_us: S<u32>,
    difs_us: S<u32>,
    ack_overhead_slots: S<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RawMode {
    Poisson,
    Saturation,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTraffic {
    mode: S<RawMode>,
    rate_pps: S<Num>,
    normalized_load: S<Num>,
    payload_bits: S<u32>,
    mac_header_bits: S<u32>,
    phy_header_bits: S<u32>,
    bitrate_bps: S<Num>,
    queue_capacity: S<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStations {
    per_ac: S<Vec<u32>>,
    total: S<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBackoff {
    cw_min: S<u32>,
    max_backoff_stage: S<u32>,
    retry_limit: S<u32>,
    window: S<WindowBounds>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    total_slots: S<u64>,
    warmup_slots: S<u64>,
    seed: S<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMetrics {
    delay_anchor: S<DelayAnchor>,
    include_headers: S<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAc {
    id: Spanned<u8>,
    threshold: S<u32>,
    countdown: S<CountdownMode>,
    cw_min: S<u32>,
    max_backoff_stage: S<u32>,
    retry_limit: S<u32>,
    window: S<WindowBounds>,
    aifs_us: S<u32>,
}

/// Maps key paths to the source span that set them.
#[derive(Debug, Default)]
struct Spans {
    prefix: String,
    map: HashMap<String, Range<usize>>,
}

impl Spans {
    fn take<T: Clone>(&mut self, key: &str, v: &S<T>) -> Option<T> {
        v.as_ref().map(|s| {
            self.map.insert(key.to_string(), s.span());
            s.get_ref().clone()
        })
    }

    fn key(&self, key: &str) -> String {
        format!("{}{key}", self.prefix)
    }

    fn error(&self, src: &str, err: ConfigError) -> ConfigError {
        let Some(key) = err.key.clone() else {
            return err;
        };
        let span = self.map.get(&key).or_else(|| {
            // per-category backoff fields may come from the shared [backoff] table
            let field = key.rsplit('.').next()?;
            key.starts_with("ac[")
                .then(|| self.map.get(&format!("backoff.{field}")))
                .flatten()
        });
        let line = span.map(|s| line_of(src, s.start));
        ConfigError {
            key: Some(self.key(&key)),
            ..err
        }
        .at_line(line)
    }
}

pub(crate) fn line_of(src: &str, offset: usize) -> usize {
    let offset = offset.min(src.len());
    src.as_bytes()[..offset].iter().filter(|&&b| b == b'\n').count() + 1
}

pub(crate) fn toml_error(src: &str, e: toml::de::Error) -> ConfigError {
    let line = e.span().map(|s| line_of(src, s.start));
    ConfigError::parse(line, e.message().to_string())
}

/// Parses and resolves a scenario document.
pub fn parse_scenario(src: &str) -> Result<ScenarioConfig, ConfigError> {
    let raw: RawScenario = toml::from_str(src).map_err(|e| toml_error(src, e))?;
    resolve(raw, src, "")
}

pub(crate) fn resolve(raw: RawScenario, src: &str, prefix: &str) -> Result<ScenarioConfig, ConfigError> {
    let mut spans = Spans {
        prefix: prefix.to_string(),
        ..Default::default()
    };
    let cfg = build(raw, &mut spans).map_err(|e| spans.error(src, e))?;
    cfg.validate().map_err(|e| spans.error(src, e))?;
    Ok(cfg)
}

fn build(raw: RawScenario, sp: &mut Spans) -> Result<ScenarioConfig, ConfigError> {
    let ch = raw.channel.unwrap_or_default();
    let mpr_limit = sp.take("channel.mpr_limit", &ch.mpr_limit).unwrap_or(DEFAULT_MPR_LIMIT);
    let channel = ChannelConfig::new(mpr_limit)?;

    let t = raw.timing.unwrap_or_default();
    let defaults = Timing::default();
    let timing = Timing {
        slot_us: sp.take("timing.slot_us", &t.slot_us).unwrap_or(defaults.slot_us),
        difs_us: sp.take("timing.difs_us", &t.difs_us).unwrap_or(defaults.difs_us),
        ack_overhead_slots: sp
            .take("timing.ack_overhead_slots", &t.ack_overhead_slots)
            .unwrap_or(defaults.ack_overhead_slots),
    };

    let b = raw.backoff.unwrap_or_default();
    let bd = BackoffConfig::default();
    let backoff = BackoffConfig {
        cw_min: sp.take("backoff.cw_min", &b.cw_min).unwrap_or(bd.cw_min),
        max_backoff_stage: sp
            .take("backoff.max_backoff_stage", &b.max_backoff_stage)
            .unwrap_or(bd.max_backoff_stage),
        retry_limit: sp.take("backoff.retry_limit", &b.retry_limit).unwrap_or(bd.retry_limit),
        window: sp.take("backoff.window", &b.window).unwrap_or(bd.window),
    };

    // thresholds only need the default table when some category leaves them unset
    let mut ac_table = default_ac_table(mpr_limit.max(2), backoff, timing.difs_us)?;
    let mut seen = [false; 4];
    let mut explicit = [false; 4];
    for entry in &raw.ac {
        let id = *entry.id.get_ref();
        let Some(ac) = AcId::new(id) else {
            sp.map.insert("ac.id".into(), entry.id.span());
            return Err(ConfigError::invalid("ac.id", format!("access category {id} out of range 0..=3")));
        };
        let i = ac.index();
        sp.map.insert(format!("ac[{i}].id"), entry.id.span());
        if std::mem::replace(&mut seen[i], true) {
            return Err(ConfigError::invalid(format!("ac[{i}].id"), "duplicate access category"));
        }
        let row = &mut ac_table[i];
        let k = |f: &str| format!("ac[{i}].{f}");
        if let Some(v) = sp.take(&k("threshold"), &entry.threshold) {
            row.threshold = v;
            explicit[i] = true;
        }
        if let Some(v) = sp.take(&k("countdown"), &entry.countdown) {
            row.countdown = v;
        }
        if let Some(v) = sp.take(&k("cw_min"), &entry.cw_min) {
            row.backoff.cw_min = v;
        }
        if let Some(v) = sp.take(&k("max_backoff_stage"), &entry.max_backoff_stage) {
            row.backoff.max_backoff_stage = v;
        }
        if let Some(v) = sp.take(&k("retry_limit"), &entry.retry_limit) {
            row.backoff.retry_limit = v;
        }
        if let Some(v) = sp.take(&k("window"), &entry.window) {
            row.backoff.window = v;
        }
        if let Some(v) = sp.take(&k("aifs_us"), &entry.aifs_us) {
            row.aifs_us = v;
        }
    }
    if mpr_limit < 2 {
        // the derived table is undefined at K = 1; every category must be explicit
        if let Some(i) = (0..4).find(|&i| !explicit[i]) {
            return Err(ConfigError::invalid(
                "channel.mpr_limit",
                format!("K = {mpr_limit} has no default table; give ac[{i}] an explicit threshold"),
            ));
        }
    }

    let s = raw.stations.unwrap_or_default();
    let per_ac = sp.take("stations.per_ac", &s.per_ac);
    let total = sp.take("stations.total", &s.total);
    let stations_per_ac = match (per_ac, total) {
        (Some(_), Some(_)) => {
            return Err(ConfigError::invalid("stations.total", "give either per_ac or total, not both"))
        }
        (Some(v), None) => <[u32; 4]>::try_from(v.as_slice())
            .map_err(|_| ConfigError::invalid("stations.per_ac", "needs exactly four counts"))?,
        (None, Some(n)) => split_evenly(n),
        (None, None) => [DEFAULT_STATIONS_PER_AC; 4],
    };
    let n: u32 = stations_per_ac.iter().sum();

    let tr = raw.traffic.unwrap_or_default();
    let td = TrafficConfig::default();
    let mut traffic = TrafficConfig {
        mode: TrafficMode::Saturation,
        payload_bits: sp.take("traffic.payload_bits", &tr.payload_bits).unwrap_or(td.payload_bits),
        mac_header_bits: sp
            .take("traffic.mac_header_bits", &tr.mac_header_bits)
            .unwrap_or(td.mac_header_bits),
        phy_header_bits: sp
            .take("traffic.phy_header_bits", &tr.phy_header_bits)
            .unwrap_or(td.phy_header_bits),
        bitrate_bps: sp.take("traffic.bitrate_bps", &tr.bitrate_bps).map_or(td.bitrate_bps, |n| n.0),
        queue_capacity: sp.take("traffic.queue_capacity", &tr.queue_capacity).map(|c| c as usize),
    };
    let mode = sp.take("traffic.mode", &tr.mode);
    let rate = sp.take("traffic.rate_pps", &tr.rate_pps);
    let load = sp.take("traffic.normalized_load", &tr.normalized_load);
    traffic.mode = match (mode.unwrap_or(RawMode::Saturation), rate, load) {
        (RawMode::Saturation, None, None) => TrafficMode::Saturation,
        (RawMode::Saturation, _, _) => {
            let key = if rate.is_some() { "traffic.rate_pps" } else { "traffic.normalized_load" };
            return Err(ConfigError::invalid(key, "only valid with mode = \"poisson\""));
        }
        (RawMode::Poisson, Some(_), Some(_)) => {
            return Err(ConfigError::invalid(
                "traffic.normalized_load",
                "give either rate_pps or normalized_load, not both",
            ))
        }
        (RawMode::Poisson, Some(r), None) => TrafficMode::Poisson { rate_pps: r.0 },
        (RawMode::Poisson, None, Some(g)) => {
            if !(g.0.is_finite() && g.0 >= 0.0) {
                return Err(ConfigError::invalid("traffic.normalized_load", "must be a finite nonnegative load"));
            }
            if n == 0 {
                return Err(ConfigError::invalid("stations.per_ac", "at least one station is required"));
            }
            TrafficMode::Poisson {
                rate_pps: rate_for_load(g.0, n, traffic.frame_duration_us()),
            }
        }
        (RawMode::Poisson, None, None) => {
            return Err(ConfigError::invalid(
                "traffic.mode",
                "poisson traffic needs rate_pps or normalized_load",
            ))
        }
    };
    if traffic.bitrate_bps <= 0.0 || !traffic.bitrate_bps.is_finite() {
        return Err(ConfigError::invalid("traffic.bitrate_bps", "must be > 0"));
    }

    let r = raw.run.unwrap_or_default();
    let total_slots = sp
        .take("run.total_slots", &r.total_slots)
        .unwrap_or(RunSettings::DEFAULT_TOTAL_SLOTS);
    let run = RunSettings {
        total_slots,
        warmup_slots: sp.take("run.warmup_slots", &r.warmup_slots).unwrap_or(total_slots / 10),
        seed: sp.take("run.seed", &r.seed).unwrap_or(1),
    };

    let m = raw.metrics.unwrap_or_default();
    let md = MetricsSettings::default();
    let metrics = MetricsSettings {
        delay_anchor: sp.take("metrics.delay_anchor", &m.delay_anchor).unwrap_or(md.delay_anchor),
        include_headers: sp
            .take("metrics.include_headers", &m.include_headers)
            .unwrap_or(md.include_headers),
    };

    Ok(ScenarioConfig {
        channel,
        ac_table,
        stations_per_ac,
        traffic,
        timing,
        run,
        metrics,
    })
}

/// Splits `n` stations over the four categories, remainder to the
/// highest-priority ones.
pub fn split_evenly(n: u32) -> [u32; 4] {
    let base = n / 4;
    let extra = n % 4;
    [0, 1, 2, 3].map(|i| base + u32::from(i < extra))
}

fn snake<T: serde::Serialize>(v: &T) -> String {
    toml::Value::try_from(v)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .expect("unit enum serializes to a string")
}

/// The fully resolved scenario as a scenario document.
pub fn echo_scenario(cfg: &ScenarioConfig) -> String {
    let mut o = String::new();
    let w = &mut o;
    writeln!(w, "[channel]").unwrap();
    writeln!(w, "mpr_limit = {}", cfg.channel.mpr_limit).unwrap();
    writeln!(w, "\n[timing]").unwrap();
    writeln!(w, "slot_us = {}", cfg.timing.slot_us).unwrap();
    writeln!(w, "difs_us = {}", cfg.timing.difs_us).unwrap();
    writeln!(w, "ack_overhead_slots = {}", cfg.timing.ack_overhead_slots).unwrap();
    writeln!(w, "\n[traffic]").unwrap();
    match cfg.traffic.mode {
        TrafficMode::Saturation => writeln!(w, "mode = \"saturation\"").unwrap(),
        TrafficMode::Poisson { rate_pps } => {
            writeln!(w, "mode = \"poisson\"").unwrap();
            writeln!(w, "rate_pps = {rate_pps:?}").unwrap();
            let g = normalized_offered_load(rate_pps, cfg.station_count(), cfg.traffic.frame_duration_us());
            writeln!(w, "# normalized offered load {g}").unwrap();
        }
    }
    writeln!(w, "payload_bits = {}", cfg.traffic.payload_bits).unwrap();
    writeln!(w, "mac_header_bits = {}", cfg.traffic.mac_header_bits).unwrap();
    writeln!(w, "phy_header_bits = {}", cfg.traffic.phy_header_bits).unwrap();
    writeln!(w, "bitrate_bps = {:?}", cfg.traffic.bitrate_bps).unwrap();
    match cfg.traffic.queue_capacity {
        Some(c) => writeln!(w, "queue_capacity = {c}").unwrap(),
        None => writeln!(w, "# queue_capacity unbounded").unwrap(),
    }
    writeln!(w, "# frame occupies {} slots", cfg.frame_slots()).unwrap();
    writeln!(w, "\n[stations]").unwrap();
    let [a, b, c, d] = cfg.stations_per_ac;
    writeln!(w, "per_ac = [{a}, {b}, {c}, {d}]").unwrap();
    writeln!(w, "\n[run]").unwrap();
    writeln!(w, "total_slots = {}", cfg.run.total_slots).unwrap();
    writeln!(w, "warmup_slots = {}", cfg.run.warmup_slots).unwrap();
    writeln!(w, "seed = {}", cfg.run.seed).unwrap();
    writeln!(w, "\n[metrics]").unwrap();
    writeln!(w, "delay_anchor = \"{}\"", snake(&cfg.metrics.delay_anchor)).unwrap();
    writeln!(w, "include_headers = {}", cfg.metrics.include_headers).unwrap();
    for ac in &cfg.ac_table {
        writeln!(w, "\n[[ac]]").unwrap();
        writeln!(w, "id = {}", ac.ac.index()).unwrap();
        writeln!(w, "threshold = {}", ac.threshold).unwrap();
        writeln!(w, "countdown = \"{}\"", snake(&ac.countdown)).unwrap();
        writeln!(w, "cw_min = {}", ac.backoff.cw_min).unwrap();
        writeln!(w, "max_backoff_stage = {}", ac.backoff.max_backoff_stage).unwrap();
        writeln!(w, "retry_limit = {}", ac.backoff.retry_limit).unwrap();
        writeln!(w, "window = \"{}\"", snake(&ac.backoff.window)).unwrap();
        writeln!(w, "aifs_us = {}", ac.aifs_us).unwrap();
        writeln!(w, "# aifs = {} slots", cfg.timing.aifs_slots(ac.aifs_us)).unwrap();
    }
    o
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_takes_reference_defaults() {
        let cfg = parse_scenario("").unwrap();
        assert_eq!(cfg.channel.mpr_limit, 8);
        assert_eq!(cfg.ac_table.map(|a| a.threshold), [7, 4, 2, 1]);
        assert_eq!(cfg.stations_per_ac, [10; 4]);
        assert_eq!(cfg.timing, Timing::default());
        assert_eq!(cfg.traffic, TrafficConfig::default());
        assert_eq!(cfg.run.total_slots, 1_000_000);
        assert_eq!(cfg.run.warmup_slots, 100_000);
    }

    #[test]
    fn echo_shows_derived_thresholds_and_timing_defaults() {
        let cfg = parse_scenario("[channel]\nmpr_limit = 8\n").unwrap();
        let echo = echo_scenario(&cfg);
        let thresholds: Vec<&str> = echo.lines().filter(|l| l.starts_with("threshold = ")).collect();
        assert_eq!(thresholds, ["threshold = 7", "threshold = 4", "threshold = 2", "threshold = 1"]);
        assert!(echo.contains("slot_us = 50\n"));
        assert!(echo.contains("difs_us = 128\n"));
    }

    #[test]
    fn threshold_at_k_is_rejected_with_line() {
        let src = "[channel]\nmpr_limit = 8\n\n[[ac]]\nid = 0\nthreshold = 8\n";
        let err = parse_scenario(src).unwrap_err();
        assert_eq!(err.line, Some(6));
        assert!(err.to_string().contains("threshold must be < K"), "{err}");
    }

    #[test]
    fn syntax_error_has_line() {
        let err = parse_scenario("[channel]\nmpr_limit = = 3\n").unwrap_err();
        assert_eq!(err.line, Some(2));
    }

    #[test]
    fn unknown_key_is_rejected() {
        let err = parse_scenario("[channel]\nmpr = 3\n").unwrap_err();
        assert_eq!(err.line, Some(2));
    }

    #[test]
    fn backoff_overflow_points_at_shared_table() {
        let src = "[backoff]\ncw_min = 1048576\nmax_backoff_stage = 20\n";
        let err = parse_scenario(src).unwrap_err();
        assert!(err.line.is_some(), "{err}");
    }

    #[test]
    fn ac_override_keeps_other_defaults() {
        let src = "[[ac]]\nid = 3\nthreshold = 2\ncountdown = \"adaptive\"\n";
        let cfg = parse_scenario(src).unwrap();
        assert_eq!(cfg.ac_table.map(|a| a.threshold), [7, 4, 2, 2]);
        assert_eq!(cfg.ac_table[3].countdown, CountdownMode::Adaptive);
        assert_eq!(cfg.ac_table[2].countdown, CountdownMode::FixedOne);
    }

    #[test]
    fn k1_requires_explicit_table() {
        assert!(parse_scenario("[channel]\nmpr_limit = 1\n").is_err());
        let mut src = String::from("[channel]\nmpr_limit = 1\n");
        for i in 0..4 {
            src.push_str(&format!("[[ac]]\nid = {i}\nthreshold = 0\n"));
        }
        let cfg = parse_scenario(&src).unwrap();
        assert!(cfg.ac_table.iter().all(|a| a.threshold == 0));
    }

    #[test]
    fn normalized_load_resolves_to_rate() {
        let src = "[traffic]\nmode = \"poisson\"\nnormalized_load = 2\n";
        let cfg = parse_scenario(src).unwrap();
        let TrafficMode::Poisson { rate_pps } = cfg.traffic.mode else {
            panic!("expected poisson")
        };
        let g = normalized_offered_load(rate_pps, 40, 8584.0);
        assert!((g - 2.0).abs() < 1e-12);
    }

    #[test]
    fn conflicting_rate_keys_rejected() {
        let src = "[traffic]\nmode = \"poisson\"\nnormalized_load = 2\nrate_pps = 3\n";
        assert!(parse_scenario(src).is_err());
        assert!(parse_scenario("[traffic]\nrate_pps = 3\n").is_err());
        assert!(parse_scenario("[traffic]\nmode = \"poisson\"\n").is_err());
    }

    #[test]
    fn station_total_splits_evenly() {
        assert_eq!(split_evenly(40), [10; 4]);
        assert_eq!(split_evenly(6), [2, 2, 1, 1]);
        let cfg = parse_scenario("[stations]\ntotal = 7\n").unwrap();
        assert_eq!(cfg.stations_per_ac, [2, 2, 2, 1]);
    }

    #[test]
    fn echo_round_trips() {
        let src = r#"
[channel]
mpr_limit = 6
[timing]
ack_overhead_slots = 2
[traffic]
mode = "poisson"
normalized_load = 0.37
queue_capacity = 50
bitrate_bps = 2.5e6
[stations]
per_ac = [3, 0, 5, 1]
[run]
total_slots = 12345
seed = 99
[metrics]
delay_anchor = "head_of_line"
include_headers = true
[[ac]]
id = 2
window = "exclusive"
cw_min = 7
"#;
        let cfg = parse_scenario(src).unwrap();
        let again = parse_scenario(&echo_scenario(&cfg)).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(echo_scenario(&cfg), echo_scenario(&again));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn echo_round_trips_for_generated_scenarios(
                k in 2u32..16,
                per_ac in proptest::array::uniform4(0u32..20),
                load in 0.0f64..10.0,
                cw in 1u32..1024,
                m in 0u32..8,
                seed in any::<u64>(),
                poisson in any::<bool>(),
            ) {
                prop_assume!(per_ac.iter().sum::<u32>() > 0);
                let traffic = if poisson {
                    format!("mode = \"poisson\"\nnormalized_load = {load:?}\n")
                } else {
                    String::new()
                };
                let src = format!(
                    "[channel]\nmpr_limit = {k}\n[traffic]\n{traffic}[stations]\nper_ac = {per_ac:?}\n\
                     [backoff]\ncw_min = {cw}\nmax_backoff_stage = {m}\n[run]\nseed = {seed}\n"
                );
                let cfg = parse_scenario(&src).unwrap();
                prop_assert_eq!(&parse_scenario(&echo_scenario(&cfg)).unwrap(), &cfg);
            }

            #[test]
            fn parser_never_panics(src in "\\PC{0,200}") {
                let _ = parse_scenario(&src);
            }
        }
    }
}
