//! Command-line interface: `run`, `sweep` and `grids`.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{SimConfig, StagnationMode, StrategyKind};
use crate::engine::{run_observed, RunResult, TickObserver};
use crate::error::{Error, Result};
use crate::metrics::{mean_grid, mean_vector_grid, replay, GridSpec};
use crate::trajectory::{TrajectoryHeader, TrajectoryWriter};

#[derive(Debug, Parser)]
#[command(name = "swarmdec", version, about = "Swarm collective decision simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one simulation and write its metrics as JSON.
    Run(RunArgs),
    /// Run a grid of strategies, swarm sizes, ranges and repetitions.
    Sweep(SweepArgs),
    /// Recompute stagnation and movement grids from trajectory logs.
    Grids(GridsArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML config; command-line values override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Timeout in seconds.
    #[arg(long)]
    pub timeout: Option<f64>,
    #[arg(long, env = "SWARMDEC_OUT", default_value = "out")]
    pub out: PathBuf,
    /// Also write a binary trajectory log next to each JSON file.
    #[arg(long)]
    pub record_trajectories: bool,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub strategy: StrategyKind,
    #[arg(long)]
    pub robots: Option<usize>,
    /// Communication range in meters.
    #[arg(long)]
    pub range: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_delimiter = ',', default_value = "honeybee,stigmergy,dol")]
    pub strategies: Vec<StrategyKind>,
    #[arg(long, value_delimiter = ',', default_value = "20,40,60,80,100,150")]
    pub robots: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0.2,0.4,0.6,0.8")]
    pub ranges: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    pub reps: u32,
    /// Base seed; each run derives its own from its coordinates.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Re-run and overwrite existing outputs.
    #[arg(long)]
    pub force: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct GridsArgs {
    /// Trajectory logs; grids are averaged across them.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Analysis window as start and end percentages of each run.
    #[arg(long, num_args = 2, value_names = ["START", "END"])]
    pub window: Option<Vec<f64>>,
    #[arg(long)]
    pub normalization: Option<f64>,
    #[arg(long)]
    pub cell_size: Option<f64>,
    /// Stagnation threshold in seconds.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub crossings: bool,
    /// TOML config providing the metrics defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, env = "SWARMDEC_OUT", default_value = "out")]
    pub out: PathBuf,
}

fn load_config(common: &Common) -> Result<SimConfig> {
    let mut config = match &common.config {
        Some(p) => SimConfig::from_file(p)?,
        None => SimConfig::default(),
    };
    if let Some(t) = common.timeout {
        config.world.timeout = t;
    }
    Ok(config)
}

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Range rounded to whole millimeters, used in seeds and file names.
pub fn range_mm(range: f64) -> u64 {
    (range * 1000.0).round() as u64
}

/// Seed of one sweep run, stable under reordering of the sweep.
pub fn sweep_seed(base: u64, kind: StrategyKind, robots: usize, range: f64, rep: u32) -> u64 {
    let key = format!("{}|{}|{}|{}", kind.name(), robots, range_mm(range), rep);
    base.wrapping_add(fnv1a(key.as_bytes()))
}

pub fn run_stem(kind: StrategyKind, robots: usize, range: f64, tag: &str) -> String {
    format!("{}_n{}_r{}mm_{}", kind.name(), robots, range_mm(range), tag)
}

/// Writes `value` as pretty JSON through a temporary file and a rename, so
/// a partially written file never has the final name.
pub fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, serde_json::to_vec_pretty(value)?)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn read_result(path: &Path) -> Result<RunResult> {
    if !path.exists() {
        return Err(Error::MissingInput(path.to_path_buf()));
    }
    Ok(serde_json::from_slice(&fs::read(path)?)?)
}

/// Runs one configuration and writes `<stem>.json` (and `<stem>.traj`).
fn execute(config: &SimConfig, kind: StrategyKind, seed: u64, dir: &Path, stem: &str, record: bool) -> Result<RunResult> {
    let result = if record {
        let header = TrajectoryHeader {
            robots: config.world.robots as u32,
            dt: config.world.dt,
            arena_width: config.world.arena_width,
            arena_height: config.world.arena_height,
        };
        let path = dir.join(format!("{stem}.traj"));
        let tmp = path.with_extension("traj.tmp");
        let mut writer = TrajectoryWriter::create(&tmp, header)?;
        let result = run_observed(config, kind, seed, Some(&mut writer as &mut dyn TickObserver))?;
        writer.finish()?;
        fs::rename(&tmp, &path)?;
        result
    } else {
        run_observed(config, kind, seed, None)?
    };
    write_json_atomic(&dir.join(format!("{stem}.json")), &result)?;
    Ok(result)
}

fn summary_line(r: &RunResult) -> String {
    format!(
        "{} N={} R={} seed={}: converged={} winner={} t={:.1}s mean_ca={:.2}s mean_conflicts={:.2}",
        r.strategy,
        r.robots,
        r.comm_range,
        r.seed,
        r.converged,
        r.winner.map_or("none".to_string(), |z| format!("{z:?}")),
        r.convergence_time,
        r.metrics.mean_ca_time,
        r.metrics.mean_conflicts
    )
}

pub fn cmd_run(args: &RunArgs) -> Result<RunResult> {
    let mut config = load_config(&args.common)?;
    if let Some(n) = args.robots {
        config.world.robots = n;
    }
    if let Some(r) = args.range {
        config.world.comm_range = r;
    }
    fs::create_dir_all(&args.common.out)?;
    let stem = run_stem(args.strategy, config.world.robots, config.world.comm_range, &format!("seed{}", args.seed));
    let result = execute(&config, args.strategy, args.seed, &args.common.out, &stem, args.common.record_trajectories)?;
    println!("{}", summary_line(&result));
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct SweepRow {
    pub strategy: String,
    #[serde(rename = "N")]
    pub robots: usize,
    #[serde(rename = "R")]
    pub range: f64,
    pub rep: u32,
    pub seed: u64,
    pub converged: bool,
    pub winner: String,
    pub convergence_time: f64,
    pub mean_ca_time: f64,
    pub mean_conflicts: f64,
}

#[derive(Debug, Clone)]
struct SweepJob {
    kind: StrategyKind,
    robots: usize,
    range: f64,
    rep: u32,
    seed: u64,
    stem: String,
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<Vec<SweepRow>> {
    let base = load_config(&args.common)?;
    let dir = &args.common.out;
    fs::create_dir_all(dir)?;
    let mut jobs = Vec::new();
    for &kind in &args.strategies {
        for &robots in &args.robots {
            for &range in &args.ranges {
                for rep in 0..args.reps {
                    jobs.push(SweepJob {
                        kind,
                        robots,
                        range,
                        rep,
                        seed: sweep_seed(args.seed, kind, robots, range, rep),
                        stem: run_stem(kind, robots, range, &format!("rep{rep}")),
                    });
                }
            }
        }
    }
    jobs.par_iter().try_for_each(|job| -> Result<()> {
        let json = dir.join(format!("{}.json", job.stem));
        if json.exists() && !args.force {
            info!("skipping existing {}", json.display());
            return Ok(());
        }
        let mut config = base.clone();
        config.world.robots = job.robots;
        config.world.comm_range = job.range;
        let r = execute(&config, job.kind, job.seed, dir, &job.stem, args.common.record_trajectories)?;
        info!("{}", summary_line(&r));
        Ok(())
    })?;

    let rows = jobs
        .iter()
        .map(|job| {
            let r = read_result(&dir.join(format!("{}.json", job.stem)))?;
            Ok(SweepRow {
                strategy: job.kind.name().to_string(),
                robots: job.robots,
                range: job.range,
                rep: job.rep,
                seed: r.seed,
                converged: r.converged,
                winner: r.winner.map_or(String::new(), |z| format!("{z:?}")),
                convergence_time: r.convergence_time,
                mean_ca_time: r.metrics.mean_ca_time,
                mean_conflicts: r.metrics.mean_conflicts,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut w = csv::Writer::from_path(dir.join("sweep.csv"))?;
    for row in &rows {
        w.serialize(row)?;
    }
    w.flush()?;
    println!("{} runs, summary in {}", rows.len(), dir.join("sweep.csv").display());
    Ok(rows)
}

/// Writes a scalar grid as `ix,iy,value` rows.
pub fn write_scalar_grid(path: &Path, grid: &GridSpec, values: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["ix", "iy", "value"])?;
    for (i, v) in values.iter().enumerate() {
        w.write_record([(i % grid.cols).to_string(), (i / grid.cols).to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a vector grid as `ix,iy,dx,dy` rows.
pub fn write_vector_grid(path: &Path, grid: &GridSpec, values: &[[f64; 2]]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["ix", "iy", "dx", "dy"])?;
    for (i, v) in values.iter().enumerate() {
        w.write_record([
            (i % grid.cols).to_string(),
            (i / grid.cols).to_string(),
            v[0].to_string(),
            v[1].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_grids(args: &GridsArgs) -> Result<(Vec<f64>, Vec<[f64; 2]>)> {
    let mut params = match &args.config {
        Some(p) => SimConfig::from_file(p)?.metrics,
        None => SimConfig::default().metrics,
    };
    if let Some(w) = &args.window {
        params.window = [w[0], w[1]];
    }
    if let Some(n) = args.normalization {
        params.normalization = n;
    }
    if let Some(c) = args.cell_size {
        params.cell_size = c;
    }
    if let Some(t) = args.threshold {
        params.stagnation_threshold = t;
    }
    if args.crossings {
        params.stagnation_mode = StagnationMode::ThresholdCrossings;
    }
    params.validate()?;

    let accs = args
        .inputs
        .iter()
        .map(|p| replay(p, &params))
        .collect::<Result<Vec<_>>>()?;
    let grid = accs[0].grid();
    if accs.iter().any(|a| a.grid() != grid) {
        return Err(Error::InvalidConfig("trajectory logs have different arena sizes".into()));
    }
    let stagnation: Vec<f64> = mean_grid(&accs.iter().map(|a| a.stagnation_grid()).collect::<Vec<_>>())
        .into_iter()
        .map(|v| v / params.normalization)
        .collect();
    let movement = mean_vector_grid(&accs.iter().map(|a| a.movement_grid()).collect::<Vec<_>>());
    fs::create_dir_all(&args.out)?;
    write_scalar_grid(&args.out.join("stagnation.csv"), &grid, &stagnation)?;
    write_vector_grid(&args.out.join("movement.csv"), &grid, &movement)?;
    println!("grids from {} logs written to {}", accs.len(), args.out.display());
    Ok((stagnation, movement))
}

pub fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Run(a) => cmd_run(a).map(|_| ()),
        Command::Sweep(a) => cmd_sweep(a).map(|_| ()),
        Command::Grids(a) => cmd_grids(a).map(|_| ()),
    }
}
