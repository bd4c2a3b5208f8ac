use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use mprsim::engine::{run_traced, RunSettings, TraceDigest};
use mprsim::scenario::{echo_scenario, parse_scenario};
use mprsim::sweep::{
    experiment_fig1, experiment_fig2_3_4, parse_sweep, run_replications, run_sweep, SweepResult, SweepSpec,
};
use mprsim::{AcId, ScenarioConfig};

#[derive(Parser)]
#[command(name = "mprsim", version, about = "Adaptive-backoff CSMA/CA over a K-MPR channel")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file.
    Run {
        config: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
        /// Write the per-slot trace of the first replication as JSON lines.
        #[arg(long)]
        trace: bool,
    },
    /// Run a parameter sweep file.
    Sweep {
        spec: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Validate a scenario file and print it fully resolved.
    Check { config: PathBuf },
    /// Run one of the built-in experiments.
    Experiment {
        #[arg(value_enum)]
        which: Experiment,
        #[command(flatten)]
        opts: RunOpts,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Experiment {
    /// Saturation throughput against cw_min.
    Fig1,
    /// Throughput, delay and jitter against offered load.
    Fig234,
}

#[derive(Args)]
struct RunOpts {
    /// First seed; replications use consecutive seeds.
    #[arg(long)]
    seed: Option<u64>,
    /// Total slots per run, warm-up included.
    #[arg(long)]
    slots: Option<u64>,
    /// Slots discarded before measuring (default: a tenth of --slots).
    #[arg(long)]
    warmup: Option<u64>,
    #[arg(long)]
    replications: Option<u32>,
    /// Output directory.
    #[arg(long, env = "MPRSIM_OUT_DIR", default_value = "results")]
    out: PathBuf,
}

impl RunOpts {
    fn apply(&self, cfg: &mut ScenarioConfig) -> Result<()> {
        if let Some(seed) = self.seed {
            cfg.run.seed = seed;
        }
        if let Some(slots) = self.slots {
            cfg.run.total_slots = slots;
            cfg.run.warmup_slots = slots / 10;
        }
        if let Some(w) = self.warmup {
            cfg.run.warmup_slots = w;
        }
        cfg.validate()?;
        Ok(())
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Check { config } => {
            let cfg = load_scenario(&config)?;
            print!("{}", echo_scenario(&cfg));
            Ok(())
        }
        Command::Run { config, opts, trace } => cmd_run(&config, &opts, trace),
        Command::Sweep { spec, opts } => {
            let spec = load_sweep(&spec)?;
            let spec = override_spec(spec, &opts)?;
            finish_sweep(&spec, &opts.out)
        }
        Command::Experiment { which, opts } => {
            let reps = opts.replications.unwrap_or(10);
            let slots = opts.slots.unwrap_or(RunSettings::DEFAULT_TOTAL_SLOTS);
            let seed = opts.seed.unwrap_or(1);
            let spec = match which {
                Experiment::Fig1 => experiment_fig1(&[16, 32, 50, 64, 128, 256, 500, 1024], reps, slots, seed)?,
                Experiment::Fig234 => {
                    let loads: Vec<f64> = (1..=16).map(|i| i as f64 * 0.5).collect();
                    experiment_fig2_3_4(&loads, reps, slots, seed)?
                }
            };
            let spec = override_spec(spec, &opts)?;
            finish_sweep(&spec, &opts.out)
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load_scenario(path: &Path) -> Result<ScenarioConfig> {
    parse_scenario(&read(path)?).with_context(|| path.display().to_string())
}

fn load_sweep(path: &Path) -> Result<SweepSpec> {
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_sweep(&read(path)?, |p| fs::read_to_string(dir.join(p)).map_err(|e| format!("cannot read {p}: {e}")))
        .with_context(|| path.display().to_string())
}

fn override_spec(spec: SweepSpec, opts: &RunOpts) -> Result<SweepSpec> {
    let mut base = spec.base.clone();
    opts.apply(&mut base)?;
    let reps = opts.replications.unwrap_or(spec.seeds.len() as u32);
    Ok(SweepSpec::new(spec.scenario_id, base, spec.parameter, spec.values, reps)?)
}

fn scenario_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into())
}

fn cmd_run(config: &Path, opts: &RunOpts, trace: bool) -> Result<()> {
    let mut cfg = load_scenario(config)?;
    opts.apply(&mut cfg)?;
    let id = scenario_id(config);
    let reps = opts.replications.unwrap_or(1);
    if reps == 0 {
        bail!("--replications must be >= 1");
    }
    fs::create_dir_all(&opts.out).with_context(|| format!("cannot create {}", opts.out.display()))?;
    fs::write(opts.out.join(format!("{id}.resolved.toml")), echo_scenario(&cfg))?;

    if trace {
        let path = opts.out.join(format!("{id}.trace.jsonl"));
        let mut w = BufWriter::new(File::create(&path).with_context(|| format!("cannot create {}", path.display()))?);
        let mut digest = TraceDigest::default();
        let mut io_err = None;
        run_traced(&cfg, |rec| {
            digest.update(rec);
            if io_err.is_none() {
                if let Err(e) = writeln!(w, "{}", rec.to_json_line()) {
                    io_err = Some(e);
                }
            }
        })?;
        if let Some(e) = io_err {
            return Err(e).with_context(|| format!("writing {}", path.display()));
        }
        w.flush()?;
        println!("trace {} sha256 {}", path.display(), digest.hex());
    }

    let result = run_replications(&id, &cfg, reps)?;
    write_csvs(&result, &opts.out)?;
    print_table(&result);
    Ok(())
}

fn finish_sweep(spec: &SweepSpec, out: &Path) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    eprintln!(
        "{}: {} = {} values x {} seeds",
        spec.scenario_id,
        spec.parameter,
        spec.values.len(),
        spec.seeds.len()
    );
    let result = run_sweep(spec)?;
    write_csvs(&result, out)?;
    print_table(&result);
    Ok(())
}

fn write_csvs(result: &SweepResult, out: &Path) -> Result<()> {
    let runs = out.join(format!("{}.csv", result.scenario_id));
    let summary = out.join(format!("{}_summary.csv", result.scenario_id));
    result
        .write_runs_csv(BufWriter::new(File::create(&runs)?))
        .with_context(|| format!("writing {}", runs.display()))?;
    result
        .write_summary_csv(BufWriter::new(File::create(&summary)?))
        .with_context(|| format!("writing {}", summary.display()))?;
    println!("wrote {} and {}", runs.display(), summary.display());
    Ok(())
}

fn print_table(result: &SweepResult) {
    let label = result.parameter.map(|p| p.to_string()).unwrap_or_default();
    println!("{label:>16} {:>4} {:>12} {:>10} {:>14} {:>16}", "ac", "throughput", "+-se", "delay_us", "jitter_us2");
    for s in result.summarize() {
        let value = if result.parameter.is_some() { format!("{}", s.value) } else { String::new() };
        let delay = s.mean_delay_us.map_or("-".into(), |e| format!("{:.1}", e.mean));
        let jitter = s.jitter_us2.map_or("-".into(), |e| format!("{:.4e}", e.mean));
        println!(
            "{value:>16} {:>4} {:>12.5} {:>10.5} {delay:>14} {jitter:>16}",
            AcId::ALL[s.ac.index()],
            s.throughput.mean,
            s.throughput.se
        );
    }
}
