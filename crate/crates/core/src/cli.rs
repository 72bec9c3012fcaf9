//! Command-line front end: `run`, `compare`, `synth-cycle` and
//! `validate-config`.
//!
//! Exit status: 0 success, 2 usage or configuration, 3 numerical failure
//! during a run, 4 I/O.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use crate::config::{read_config, ConfigDoc};
use crate::drivecycle::{synth_cycle, CycleSample, DriveCycle};
use crate::engine::{
    export_log, rpm_to_kmph, run_batch, run_scenario, ControllerKind, ScenarioConfig, ScenarioKind, SimLog,
};
use crate::error::{Result, SimError};
use crate::metrics::{rmse, settling_time, steady_state, Band, MetricsReport, SETTLING_BAND, STEADY_WINDOW};

/// Spacing at which drive-cycle tracking is scored (s).
pub const CYCLE_SCORE_PERIOD: f64 = 0.1;
/// Motor-speed target of the vehicle step used for settling and steady state.
pub const STEP_TARGET_RPM: f64 = 1000.0;
/// Length of the vehicle step run (s).
pub const STEP_RUN_S: f64 = 10.0;
/// Spacing of the logged samples of the vehicle step run (s).
const STEP_LOG_PERIOD: f64 = 1e-3;

#[derive(Debug, Parser)]
#[command(name = "evsim", version, about = "EV drivetrain simulator: battery, Z-source inverter, BLDC motor, vehicle")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scenario; writes log.csv, metrics.txt, config.toml and manifest.txt.
    Run(RunArgs),
    /// Run the drive-cycle scenario under PID and SMC and tabulate both.
    Compare(RunArgs),
    /// Write a seeded synthetic drive cycle as CSV.
    SynthCycle(SynthArgs),
    /// Check a configuration file without running it.
    ValidateConfig(ConfigArgs),
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// Scenario configuration (TOML, dotted keys).
    #[arg(long)]
    pub config: PathBuf,
    /// Drive-cycle CSV; replaces `scenario.cycle`.
    #[arg(long)]
    pub cycle: Option<PathBuf>,
    /// `key=value` applied after the file; repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Output directory.
    #[arg(long, env = "EVSIM_OUTPUT_DIR", default_value = "evsim-out")]
    pub output_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub seed: u64,
    /// Cycle length (s).
    #[arg(long)]
    pub duration: f64,
    /// Output file; defaults to `<output-dir>/cycle.csv`.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, env = "EVSIM_OUTPUT_DIR", default_value = "evsim-out")]
    pub output_dir: PathBuf,
}

/// Parses the arguments, runs the command and returns the exit status.
/// Diagnostics go to standard error.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli.command) {
        Ok(report) => {
            print!("{report}");
            0
        }
        Err(e) => {
            eprintln!("evsim: {e}");
            e.exit_code()
        }
    }
}

/// Runs a parsed command; returns the text for standard output.
pub fn execute(command: &Command) -> Result<String> {
    match command {
        Command::Run(args) => cmd_run(args),
        Command::Compare(args) => cmd_compare(args),
        Command::SynthCycle(args) => cmd_synth_cycle(args),
        Command::ValidateConfig(args) => {
            let (doc, cfg) = load(args)?;
            Ok(format!("ok: {} keys resolved, {} steps\n", doc.render().lines().count(), step_count(&cfg)))
        }
    }
}

fn step_count(cfg: &ScenarioConfig) -> usize {
    (cfg.duration / cfg.dt * (1.0 + 1e-12)).floor() as usize
}

/// Reads the file, applies overrides and `--cycle`, and resolves the cycle.
fn load(args: &ConfigArgs) -> Result<(ConfigDoc, ScenarioConfig)> {
    let mut doc = read_config(&args.config)?;
    for o in &args.overrides {
        doc.apply_override(o)?;
    }
    let base = args.config.parent().unwrap_or(Path::new("."));
    let mut resolved = doc.clone();
    if let Some(c) = &args.cycle {
        // a command-line cycle is relative to the working directory
        let abs = std::env::current_dir().map_err(|e| SimError::io(".", e))?.join(c);
        resolved.cycle_path = Some(abs);
        doc.cycle_path = Some(c.clone());
    }
    let cfg = resolved.resolve(base)?;
    Ok((doc, cfg))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| SimError::io(path, e))
}

fn make_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| SimError::io(path, e))
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn manifest(command: &str, config_echo: &str, cfg: &ScenarioConfig) -> String {
    let mut m = String::new();
    writeln!(m, "tool=evsim {}", env!("CARGO_PKG_VERSION")).unwrap();
    writeln!(m, "command={command}").unwrap();
    writeln!(m, "config_sha256={}", sha256_hex(config_echo.as_bytes())).unwrap();
    if let Some(c) = &cfg.cycle {
        writeln!(m, "cycle={}", c.name).unwrap();
        writeln!(m, "cycle_sha256={}", sha256_hex(c.render().as_bytes())).unwrap();
    }
    m
}

/// Tracking figures for one log. Drive-cycle runs are scored on vehicle
/// speed (km/h) at [`CYCLE_SCORE_PERIOD`]; the other scenarios on motor
/// speed (RPM) against the final reference.
pub fn run_metrics(cfg: &ScenarioConfig, log: &SimLog) -> Result<MetricsReport> {
    if log.records.is_empty() {
        return Err(SimError::domain("no records to score"));
    }
    if cfg.kind == ScenarioKind::ClosedLoopDynamics {
        let scored = log.resample(CYCLE_SCORE_PERIOD);
        let v: Vec<f64> = scored.iter().map(|r| r.v_kmph).collect();
        let r: Vec<f64> = scored.iter().map(|r| r.reference).collect();
        let target = *r.last().expect("non-empty");
        let all_v = log.column(|r| r.v_kmph);
        let band = if target == 0.0 { Band::Absolute(1.0) } else { Band::Relative(SETTLING_BAND) };
        Ok(MetricsReport {
            rmse: rmse(&v, &r)?,
            settling_time_s: settling_time(&all_v, target, band, log.log_dt)?,
            steady_state_value: steady_state(&all_v, STEADY_WINDOW)?,
            overshoot_pct: crate::metrics::overshoot_pct(&all_v, target),
        })
    } else {
        let target = log.records.last().expect("non-empty").reference;
        let speed = log.column(|r| r.speed_rpm);
        if target == 0.0 {
            let zeros = vec![0.0; speed.len()];
            return Ok(MetricsReport {
                rmse: rmse(&speed, &zeros)?,
                settling_time_s: settling_time(&speed, 0.0, Band::Absolute(1.0), log.log_dt)?,
                steady_state_value: steady_state(&speed, STEADY_WINDOW)?,
                overshoot_pct: 0.0,
            });
        }
        MetricsReport::for_step(&speed, target, log.log_dt)
    }
}

fn metrics_text(cfg: &ScenarioConfig, log: &SimLog, report: &MetricsReport) -> String {
    let mut out = String::new();
    if cfg.kind == ScenarioKind::ClosedLoopDynamics {
        out.push_str("# rmse: vehicle speed vs cycle in km/h, sampled at 10 Hz; settling and steady state on km/h\n");
    } else {
        out.push_str("# rmse, settling and steady state on motor speed in RPM vs the final reference\n");
    }
    out.push_str(&report.to_string());
    let s = &log.summary;
    writeln!(out, "final_soc={}", s.final_soc).unwrap();
    writeln!(out, "tractive_energy_j={}", s.tractive_energy_j).unwrap();
    writeln!(out, "max_current_imbalance_a={}", s.max_current_imbalance).unwrap();
    writeln!(out, "traction_limited_steps={}", s.traction_limited_steps).unwrap();
    writeln!(out, "regen_limited_steps={}", s.regen_limited_steps).unwrap();
    out
}

fn cmd_run(args: &RunArgs) -> Result<String> {
    let (doc, cfg) = load(&args.config)?;
    let log = run_scenario(&cfg)?;
    let report = run_metrics(&cfg, &log)?;
    let dir = &args.output_dir;
    make_dir(dir)?;
    let echo = doc.render();
    export_log(&log, &dir.join("log.csv"))?;
    let text = metrics_text(&cfg, &log, &report);
    write_file(&dir.join("metrics.txt"), &text)?;
    write_file(&dir.join("config.toml"), &echo)?;
    write_file(&dir.join("manifest.txt"), &manifest("run", &echo, &cfg))?;
    Ok(text)
}

/// Figures for one controller in a comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerFigures {
    /// Vehicle-speed tracking error over the cycle (km/h).
    pub rmse_kmph: f64,
    /// Settling of the vehicle step into ±2% of its motor-speed target.
    pub settling_time_s: Option<f64>,
    /// Mean motor speed over the last 10% of the vehicle step (RPM).
    pub steady_state_rpm: f64,
    /// State of charge spent over the cycle.
    pub soc_used: f64,
}

/// Both controllers on the same plant: the drive cycle and a vehicle step.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub pid: ControllerFigures,
    pub smc: ControllerFigures,
    pub cycle_logs: [SimLog; 2],
    pub step_logs: [SimLog; 2],
}

/// Vehicle scenario holding the motor at [`STEP_TARGET_RPM`] from rest.
pub fn vehicle_step_config(base: &ScenarioConfig) -> Result<ScenarioConfig> {
    let v = rpm_to_kmph(STEP_TARGET_RPM, &base.vehicle);
    let flat = vec![
        CycleSample { t: 0.0, v_kmph: v, grade_rad: 0.0 },
        CycleSample { t: STEP_RUN_S, v_kmph: v, grade_rad: 0.0 },
    ];
    let mut cfg = base.clone();
    cfg.kind = ScenarioKind::ClosedLoopDynamics;
    cfg.duration = STEP_RUN_S;
    cfg.cycle = Some(DriveCycle::new("vehicle-step", flat, false)?);
    cfg.log_every = ((STEP_LOG_PERIOD / cfg.dt).round() as usize).max(1);
    Ok(cfg)
}

/// Runs PID and SMC concurrently on the cycle and on the vehicle step.
pub fn compare_controllers(base: &ScenarioConfig) -> Result<Comparison> {
    if base.cycle.is_none() {
        return Err(SimError::config("compare needs a drive cycle (scenario.cycle or --cycle)"));
    }
    let mut cycle = base.clone();
    cycle.kind = ScenarioKind::ClosedLoopDynamics;
    let step = vehicle_step_config(base)?;
    let with = |c: &ScenarioConfig, kind| {
        let mut c = c.clone();
        c.controller.kind = kind;
        c
    };
    let configs = [
        with(&cycle, ControllerKind::Pid),
        with(&cycle, ControllerKind::Smc),
        with(&step, ControllerKind::Pid),
        with(&step, ControllerKind::Smc),
    ];
    let mut logs = run_batch(&configs).into_iter().collect::<Result<Vec<_>>>()?;
    let step_logs: [SimLog; 2] = logs.split_off(2).try_into().expect("two step runs");
    let cycle_logs: [SimLog; 2] = logs.try_into().expect("two cycle runs");

    let figures = |k: usize| -> Result<ControllerFigures> {
        let cyc = run_metrics(&configs[k], &cycle_logs[k])?;
        let speed = step_logs[k].column(|r| r.speed_rpm);
        Ok(ControllerFigures {
            rmse_kmph: cyc.rmse,
            settling_time_s: settling_time(
                &speed,
                STEP_TARGET_RPM,
                Band::Relative(SETTLING_BAND),
                step_logs[k].log_dt,
            )?,
            steady_state_rpm: steady_state(&speed, STEADY_WINDOW)?,
            soc_used: base.initial_soc - cycle_logs[k].summary.final_soc,
        })
    };
    Ok(Comparison { pid: figures(0)?, smc: figures(1)?, cycle_logs, step_logs })
}

impl Comparison {
    /// Side-by-side table; the last column names the better controller.
    pub fn table(&self) -> String {
        fn better(pid: f64, smc: f64) -> &'static str {
            if pid < smc {
                "pid"
            } else if smc < pid {
                "smc"
            } else {
                "tie"
            }
        }
        let settle = |f: &ControllerFigures| f.settling_time_s.unwrap_or(f64::INFINITY);
        let fmt_settle = |f: &ControllerFigures| f.settling_time_s.map_or("not-settled".to_string(), |t| t.to_string());
        let off = |f: &ControllerFigures| (f.steady_state_rpm - STEP_TARGET_RPM).abs();
        let (p, s) = (&self.pid, &self.smc);
        let mut out = String::new();
        out.push_str("# rmse: vehicle speed vs cycle in km/h at 10 Hz\n");
        writeln!(out, "# settling (±2%) and steady state (final 10%): {STEP_TARGET_RPM} RPM vehicle step from rest")
            .unwrap();
        out.push_str("metric,pid,smc,better\n");
        writeln!(out, "rmse_kmph,{},{},{}", p.rmse_kmph, s.rmse_kmph, better(p.rmse_kmph, s.rmse_kmph)).unwrap();
        writeln!(out, "settling_time_s,{},{},{}", fmt_settle(p), fmt_settle(s), better(settle(p), settle(s))).unwrap();
        writeln!(out, "steady_state_rpm,{},{},{}", p.steady_state_rpm, s.steady_state_rpm, better(off(p), off(s)))
            .unwrap();
        writeln!(out, "soc_used,{},{},{}", p.soc_used, s.soc_used, better(p.soc_used, s.soc_used)).unwrap();
        out
    }
}

fn cmd_compare(args: &RunArgs) -> Result<String> {
    let (doc, cfg) = load(&args.config)?;
    let cmp = compare_controllers(&cfg)?;
    let dir = &args.output_dir;
    let echo = doc.render();
    let table = cmp.table();
    // nothing is written until every run has finished
    make_dir(dir)?;
    for (name, cyc, step) in
        [("pid", &cmp.cycle_logs[0], &cmp.step_logs[0]), ("smc", &cmp.cycle_logs[1], &cmp.step_logs[1])]
    {
        let sub = dir.join(name);
        make_dir(&sub)?;
        export_log(cyc, &sub.join("log.csv"))?;
        export_log(step, &sub.join("step_log.csv"))?;
    }
    write_file(&dir.join("metrics.txt"), &table)?;
    write_file(&dir.join("config.toml"), &echo)?;
    write_file(&dir.join("manifest.txt"), &manifest("compare", &echo, &cfg))?;
    Ok(table)
}

fn cmd_synth_cycle(args: &SynthArgs) -> Result<String> {
    let cycle = synth_cycle(args.duration, args.seed).map_err(|e| SimError::config(e.to_string()))?;
    let path = match &args.output {
        Some(p) => p.clone(),
        None => {
            make_dir(&args.output_dir)?;
            args.output_dir.join("cycle.csv")
        }
    };
    write_file(&path, &cycle.render())?;
    Ok(format!("wrote {} ({} samples, seed {})\n", path.display(), cycle.samples().len(), args.seed))
}
