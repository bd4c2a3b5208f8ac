//! Parameter sweeps and CSV output.
//!
//! A sweep runs one base scenario at every swept value for every seed. Runs
//! are independent and execute on the rayon pool; results are collected and
//! sorted before anything is written, so the output depends only on the
//! sweep spec.
//!
//! Sweep files are TOML:
//!
//! ```toml
//! scenario_id = "fig1"
//! parameter = "cw_min"          # cw_min | normalized_load | mpr_limit | stations | seed
//! values = [16, 50, 256, 500]   # or: range = { start = 0.5, stop = 8.0, step = 0.5 }
//! replications = 10             # seeds base.run.seed .. base.run.seed + 9
//!
//! [base]                        # any scenario document; or base_file = "path"
//! [base.traffic]
//! mode = "saturation"
//! ```
//!
//! Per-run CSV columns:
//! `scenario_id,seed,param_value,ac_id,throughput,mean_delay_us,jitter_us2,delivered,dropped`.
//! Delay and jitter are empty when a category delivered nothing.

use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::Deserialize;
use toml::Spanned;

use crate::engine::{run, RunOutput, RunSettings, ScenarioConfig};
use crate::error::{ConfigError, SimError};
use crate::mac::{default_ac_table, BackoffConfig};
use crate::scenario::{self, split_evenly, toml_error, Num, RawScenario};
use crate::traffic::{rate_for_load, TrafficConfig, TrafficMode};
use crate::AcId;

pub const DEFAULT_REPLICATIONS: u32 = 10;

pub const RUN_HEADER: [&str; 9] = [
    "scenario_id",
    "seed",
    "param_value",
    "ac_id",
    "throughput",
    "mean_delay_us",
    "jitter_us2",
    "delivered",
    "dropped",
];

pub const SUMMARY_HEADER: [&str; 13] = [
    "scenario_id",
    "param_value",
    "ac_id",
    "replications",
    "throughput_mean",
    "throughput_se",
    "mean_delay_us_mean",
    "mean_delay_us_se",
    "jitter_us2_mean",
    "jitter_us2_se",
    "delivered_total",
    "dropped_total",
    "replications_with_delay",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    CwMin,
    NormalizedLoad,
    MprLimit,
    Stations,
    Seed,
}

impl fmt::Display for SweepParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepParameter::CwMin => "cw_min",
            SweepParameter::NormalizedLoad => "normalized_load",
            SweepParameter::MprLimit => "mpr_limit",
            SweepParameter::Stations => "stations",
            SweepParameter::Seed => "seed",
        })
    }
}

impl SweepParameter {
    fn integral(self) -> bool {
        !matches!(self, SweepParameter::NormalizedLoad)
    }

    /// `base` with this parameter set to `value`.
    pub fn apply(self, base: &ScenarioConfig, value: f64) -> Result<ScenarioConfig, ConfigError> {
        let mut cfg = base.clone();
        let int = |max: f64| -> Result<u64, ConfigError> {
            if value.fract() != 0.0 || value < 0.0 || value > max {
                return Err(ConfigError::invalid(
                    "values",
                    format!("{value} is not a valid {self} value"),
                ));
            }
            Ok(value as u64)
        };
        match self {
            SweepParameter::CwMin => {
                let cw = int(u32::MAX as f64)? as u32;
                for ac in &mut cfg.ac_table {
                    ac.backoff.cw_min = cw;
                }
            }
            SweepParameter::NormalizedLoad => {
                if !(value.is_finite() && value >= 0.0) {
                    return Err(ConfigError::invalid("values", format!("{value} is not a valid load")));
                }
                cfg.traffic.mode = TrafficMode::Poisson {
                    rate_pps: rate_for_load(value, cfg.station_count(), cfg.traffic.frame_duration_us()),
                };
            }
            SweepParameter::MprLimit => {
                let k = int(u32::MAX as f64)? as u32;
                let table = default_ac_table(k, BackoffConfig::default(), 0)
                    .map_err(|e| ConfigError::invalid("values", format!("K = {value}: {}", e.message)))?;
                cfg.channel.mpr_limit = k;
                for (ac, derived) in cfg.ac_table.iter_mut().zip(table) {
                    ac.threshold = derived.threshold;
                    ac.countdown = derived.countdown;
                }
            }
            SweepParameter::Stations => {
                cfg.stations_per_ac = split_evenly(int(u32::MAX as f64)? as u32);
            }
            SweepParameter::Seed => cfg.run.seed = int(u64::MAX as f64)?,
        }
        cfg.validate()
            .map_err(|e| ConfigError::invalid("values", format!("{self} = {value}: {e}")))?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub scenario_id: String,
    pub base: ScenarioConfig,
    pub parameter: SweepParameter,
    /// Ascending and distinct.
    pub values: Vec<f64>,
    pub seeds: Vec<u64>,
}

impl SweepSpec {
    pub fn new(
        scenario_id: impl Into<String>,
        base: ScenarioConfig,
        parameter: SweepParameter,
        values: Vec<f64>,
        replications: u32,
    ) -> Result<Self, ConfigError> {
        let first = base.run.seed;
        let seeds = if parameter == SweepParameter::Seed {
            vec![first]
        } else {
            (0..replications as u64).map(|r| first.wrapping_add(r)).collect()
        };
        let spec = Self {
            scenario_id: scenario_id.into(),
            base,
            parameter,
            values,
            seeds,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.scenario_id.is_empty()
            || !self
                .scenario_id
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c))
        {
            return Err(ConfigError::invalid(
                "scenario_id",
                "must be nonempty and use only letters, digits, '-', '_' or '.'",
            ));
        }
        if self.values.is_empty() {
            return Err(ConfigError::invalid("values", "at least one sweep value is required"));
        }
        if self.seeds.is_empty() {
            return Err(ConfigError::invalid("replications", "must be >= 1"));
        }
        if let Some(v) = self.values.iter().find(|v| !v.is_finite()) {
            return Err(ConfigError::invalid("values", format!("{v} is not a finite value")));
        }
        if let Some(w) = self.values.windows(2).find(|w| w[0] >= w[1]) {
            return Err(ConfigError::invalid(
                "values",
                format!("values must be strictly increasing ({} then {})", w[0], w[1]),
            ));
        }
        if self.parameter.integral() {
            if let Some(v) = self.values.iter().find(|v| v.fract() != 0.0) {
                return Err(ConfigError::invalid("values", format!("{} needs integers, got {v}", self.parameter)));
            }
        }
        for &v in &self.values {
            self.parameter.apply(&self.base, v)?;
        }
        Ok(())
    }

    pub fn run_count(&self) -> usize {
        self.values.len() * self.seeds.len()
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRange {
    start: Num,
    stop: Num,
    step: Num,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    scenario_id: Option<Spanned<String>>,
    parameter: Spanned<SweepParameter>,
    values: Option<Spanned<Vec<Num>>>,
    range: Option<Spanned<RawRange>>,
    replications: Option<Spanned<u32>>,
    base: Option<RawScenario>,
    base_file: Option<Spanned<String>>,
}

const MAX_RANGE_POINTS: f64 = 100_000.0;

/// Parses a sweep document. `load_base` reads a `base_file` reference.
pub fn parse_sweep<F>(src: &str, load_base: F) -> Result<SweepSpec, ConfigError>
where
    F: FnOnce(&str) -> Result<String, String>,
{
    let raw: RawSweep = toml::from_str(src).map_err(|e| toml_error(src, e))?;
    let line = |span: std::ops::Range<usize>| Some(scenario::line_of(src, span.start));

    let base = match (raw.base, raw.base_file) {
        (Some(_), Some(f)) => {
            return Err(ConfigError::invalid("base_file", "give either [base] or base_file, not both")
                .at_line(line(f.span())))
        }
        (Some(b), None) => scenario::resolve(b, src, "base.")?,
        (None, Some(f)) => {
            let text = load_base(f.get_ref())
                .map_err(|e| ConfigError::invalid("base_file", e).at_line(line(f.span())))?;
            scenario::parse_scenario(&text).map_err(|e| ConfigError {
                message: format!("in {}: {}", f.get_ref(), e.message),
                ..e
            })?
        }
        (None, None) => scenario::parse_scenario("")?,
    };

    let values_span = raw
        .values
        .as_ref()
        .map(|v| v.span())
        .or_else(|| raw.range.as_ref().map(|r| r.span()))
        .unwrap_or_else(|| raw.parameter.span());
    let values = match (raw.values, raw.range) {
        (Some(v), None) => v.into_inner().into_iter().map(|n| n.0).collect(),
        (None, Some(r)) => {
            let span = r.span();
            let RawRange { start, stop, step } = r.into_inner();
            let (start, stop, step) = (start.0, stop.0, step.0);
            let count = ((stop - start) / step).floor();
            if !(step > 0.0 && stop >= start && count.is_finite() && count < MAX_RANGE_POINTS) {
                return Err(ConfigError::invalid("range", "needs step > 0, stop >= start and a bounded point count")
                    .at_line(line(span)));
            }
            (0..=count as u64).map(|i| start + i as f64 * step).collect()
        }
        (Some(v), Some(_)) => {
            return Err(ConfigError::invalid("range", "give either values or range, not both").at_line(line(v.span())))
        }
        (None, None) => return Err(ConfigError::invalid("values", "a sweep needs values or range")),
    };

    let replications = raw.replications.as_ref().map_or(DEFAULT_REPLICATIONS, |r| *r.get_ref());
    let scenario_id = raw.scenario_id.as_ref().map_or("sweep", |s| s.get_ref().as_str());
    let parameter = *raw.parameter.get_ref();
    SweepSpec::new(scenario_id, base, parameter, values, replications).map_err(|e| {
        let span = match e.key.as_deref() {
            Some("values") => values_span,
            Some("replications") => raw.replications.as_ref().map_or(raw.parameter.span(), |r| r.span()),
            Some("scenario_id") => raw.scenario_id.as_ref().map_or(0..0, |s| s.span()),
            _ => raw.parameter.span(),
        };
        e.at_line(line(span))
    })
}

#[derive(Debug, Clone)]
pub struct SweepRun {
    pub value: f64,
    pub seed: u64,
    pub output: RunOutput,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub scenario_id: String,
    /// `None` for plain replications of one scenario; `param_value` is then empty.
    pub parameter: Option<SweepParameter>,
    /// Sorted by value, then by the position of the seed in the spec.
    pub runs: Vec<SweepRun>,
}

pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult, SimError> {
    spec.validate()?;
    let jobs: Vec<(usize, usize)> = (0..spec.values.len())
        .flat_map(|v| (0..spec.seeds.len()).map(move |s| (v, s)))
        .collect();
    let runs = jobs
        .par_iter()
        .map(|&(v, s)| {
            let value = spec.values[v];
            let seed = spec.seeds[s];
            let mut cfg = spec.parameter.apply(&spec.base, value)?;
            if spec.parameter != SweepParameter::Seed {
                cfg.run.seed = seed;
            }
            let output = run(&cfg)?;
            Ok(SweepRun {
                value,
                seed: cfg.run.seed,
                output,
            })
        })
        .collect::<Result<Vec<_>, SimError>>()?;
    Ok(SweepResult {
        scenario_id: spec.scenario_id.clone(),
        parameter: Some(spec.parameter),
        runs,
    })
}

/// Runs `base` with `replications` consecutive seeds starting at its own seed.
pub fn run_replications(
    scenario_id: impl Into<String>,
    base: &ScenarioConfig,
    replications: u32,
) -> Result<SweepResult, SimError> {
    base.validate()?;
    if replications == 0 {
        return Err(ConfigError::invalid("replications", "must be >= 1").into());
    }
    let runs = (0..replications as u64)
        .into_par_iter()
        .map(|r| {
            let mut cfg = base.clone();
            cfg.run.seed = base.run.seed.wrapping_add(r);
            Ok(SweepRun {
                value: 0.0,
                seed: cfg.run.seed,
                output: run(&cfg)?,
            })
        })
        .collect::<Result<Vec<_>, SimError>>()?;
    Ok(SweepResult {
        scenario_id: scenario_id.into(),
        parameter: None,
        runs,
    })
}

/// Mean and standard error over replications.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub n: usize,
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Option<Self> {
        let n = xs.len();
        if n == 0 {
            return None;
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let se = if n > 1 {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Some(Self { n, mean, se })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointSummary {
    pub value: f64,
    pub ac: AcId,
    pub replications: usize,
    pub throughput: Estimate,
    pub mean_delay_us: Option<Estimate>,
    pub jitter_us2: Option<Estimate>,
    pub delivered: u64,
    pub dropped: u64,
}

impl SweepResult {
    pub fn values(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.runs.iter().map(|r| r.value).collect();
        v.dedup();
        v
    }

    pub fn runs_at(&self, value: f64) -> impl Iterator<Item = &SweepRun> {
        self.runs.iter().filter(move |r| r.value == value)
    }

    pub fn summarize(&self) -> Vec<PointSummary> {
        let mut out = Vec::new();
        for value in self.values() {
            let runs: Vec<&SweepRun> = self.runs_at(value).collect();
            for ac in AcId::ALL {
                let rows: Vec<_> = runs.iter().map(|r| r.output.metrics.ac(ac)).collect();
                let th: Vec<f64> = rows.iter().map(|r| r.throughput).collect();
                let delay: Vec<f64> = rows.iter().filter_map(|r| r.mean_delay_us).collect();
                let jitter: Vec<f64> = rows.iter().filter_map(|r| r.jitter_us2).collect();
                out.push(PointSummary {
                    value,
                    ac,
                    replications: runs.len(),
                    throughput: Estimate::from_samples(&th).expect("at least one run per value"),
                    mean_delay_us: Estimate::from_samples(&delay),
                    jitter_us2: Estimate::from_samples(&jitter),
                    delivered: rows.iter().map(|r| r.delivered).sum(),
                    dropped: rows.iter().map(|r| r.dropped).sum(),
                });
            }
        }
        out
    }

    pub fn summary(&self, value: f64, ac: AcId) -> Option<PointSummary> {
        self.summarize().into_iter().find(|s| s.value == value && s.ac == ac)
    }

    fn param_cell(&self, value: f64) -> String {
        match self.parameter {
            Some(_) => fmt_f64(value),
            None => String::new(),
        }
    }

    /// Rows ordered by value, access category, then seed.
    pub fn write_runs_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(RUN_HEADER)?;
        for value in self.values() {
            for ac in AcId::ALL {
                for r in self.runs_at(value) {
                    let m = r.output.metrics.ac(ac);
                    out.write_record([
                        self.scenario_id.clone(),
                        r.seed.to_string(),
                        self.param_cell(value),
                        ac.index().to_string(),
                        fmt_f64(m.throughput),
                        fmt_opt(m.mean_delay_us),
                        fmt_opt(m.jitter_us2),
                        m.delivered.to_string(),
                        m.dropped.to_string(),
                    ])?;
                }
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_summary_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(SUMMARY_HEADER)?;
        for s in self.summarize() {
            out.write_record([
                self.scenario_id.clone(),
                self.param_cell(s.value),
                s.ac.index().to_string(),
                s.replications.to_string(),
                fmt_f64(s.throughput.mean),
                fmt_f64(s.throughput.se),
                fmt_opt(s.mean_delay_us.map(|e| e.mean)),
                fmt_opt(s.mean_delay_us.map(|e| e.se)),
                fmt_opt(s.jitter_us2.map(|e| e.mean)),
                fmt_opt(s.jitter_us2.map(|e| e.se)),
                s.delivered.to_string(),
                s.dropped.to_string(),
                s.mean_delay_us.map_or(0, |e| e.n).to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Base scenario shared by the canned experiments: K = 8, 40 stations,
/// reference timing and frame sizes.
pub fn reference_scenario(
    traffic: TrafficMode,
    backoff: BackoffConfig,
    total_slots: u64,
    seed: u64,
) -> ScenarioConfig {
    let mut cfg = scenario::parse_scenario("").expect("defaults are valid");
    cfg.ac_table = default_ac_table(cfg.channel.mpr_limit, backoff, cfg.timing.difs_us).expect("K = 8");
    cfg.traffic = TrafficConfig {
        mode: traffic,
        ..cfg.traffic
    };
    cfg.run = RunSettings::with_default_warmup(total_slots, seed);
    cfg
}

/// Saturation throughput per category against `cw_min` (N = 40, K = 8,
/// stage cap 5, retry limit 4).
pub fn experiment_fig1(
    cw_values: &[u32],
    replications: u32,
    total_slots: u64,
    first_seed: u64,
) -> Result<SweepSpec, ConfigError> {
    let base = reference_scenario(TrafficMode::Saturation, BackoffConfig::default(), total_slots, first_seed);
    SweepSpec::new(
        "fig1",
        base,
        SweepParameter::CwMin,
        cw_values.iter().map(|&c| c as f64).collect(),
        replications,
    )
}

/// Throughput, delay and jitter per category against normalized offered load
/// (N = 40, K = 8, stage cap 7, cw_min 256).
pub fn experiment_fig2_3_4(
    loads: &[f64],
    replications: u32,
    total_slots: u64,
    first_seed: u64,
) -> Result<SweepSpec, ConfigError> {
    let backoff = BackoffConfig {
        cw_min: 256,
        max_backoff_stage: 7,
        ..Default::default()
    };
    let base = reference_scenario(TrafficMode::Poisson { rate_pps: 0.0 }, backoff, total_slots, first_seed);
    SweepSpec::new("fig2_3_4", base, SweepParameter::NormalizedLoad, loads.to_vec(), replications)
}
