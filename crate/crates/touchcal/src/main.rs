use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use touchcal::experiment::{replay, run_batch, run_sweep, CellResult};
use touchcal::report::{read_summary, render_table, write_all, write_long};
use touchcal::scene::{build_env, Scene};
use touchcal::sdf_cache::{read_grid, write_grid};
use touchcal::{Error, ExperimentConfig};
use touchcal_core::geometry::build_sdf;

/// Contact-based robot base self-calibration experiments.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment configuration (TOML). Built-in defaults when absent.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Use the desk-scale preset as the base configuration.
    #[arg(long, conflicts_with = "config")]
    desk_scale: bool,
    /// Override a configuration leaf, e.g. `--set filter.sigma_p=0.01`.
    #[arg(short, long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig, Error> {
        match &self.config {
            Some(path) => ExperimentConfig::load(path, &self.sets),
            None => {
                let base = if self.desk_scale { ExperimentConfig::desk_scale() } else { ExperimentConfig::default() };
                let text = toml::to_string(&base).map_err(|e| Error::Config(e.to_string()))?;
                ExperimentConfig::from_toml_str(&text, &self.sets)
            }
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured seeds once, ignoring any sweep grid.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        /// Run only this seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for traces and result tables.
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Precomputed SDF grid (see `sdf-build`).
        #[arg(long)]
        sdf: Option<PathBuf>,
    },
    /// Run every cell of the sweep grid for every seed.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(short, long)]
        out: PathBuf,
        /// Skip per-iteration traces.
        #[arg(long)]
        no_traces: bool,
    },
    /// Feed logged observations to a fresh filter.
    Replay {
        #[command(flatten)]
        config: ConfigArgs,
        /// Seed of the original run.
        #[arg(long)]
        seed: u64,
        /// Observation log (`observations-<seed>.jsonl`).
        observations: PathBuf,
        /// Write the replayed steps as JSONL here.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Build the filter's SDF grid and store it.
    SdfBuild {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Print a summary CSV as a table and optionally write the long format.
    Report {
        summary: PathBuf,
        /// Plot-ready long-format CSV output.
        #[arg(long)]
        long: Option<PathBuf>,
    },
}

fn print_runs(cells: &[CellResult]) {
    for cell in cells {
        let params: Vec<String> = cell.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        for r in &cell.runs {
            println!(
                "{}seed {}: {} after {} actions, error {:.2} cm / {:.4} rad{}",
                if params.is_empty() { String::new() } else { format!("[{}] ", params.join(" ")) },
                r.seed,
                if r.terminated { "terminated" } else { "stopped" },
                r.iterations,
                r.trans_error_cm,
                r.rot_error_rad,
                r.failure.as_deref().map(|f| format!(" ({f})")).unwrap_or_default(),
            );
        }
    }
}

fn finish(cells: &[CellResult], out: Option<&Path>) -> Result<ExitCode, Error> {
    print_runs(cells);
    if let Some(dir) = out {
        let [summary, ..] = write_all(dir, cells)?;
        print!("{}", render_table(&read_summary(&summary)?));
    }
    let all = cells.iter().flat_map(|c| &c.runs).all(|r| r.terminated);
    Ok(if all { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn main_inner(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Run { config, seed, out, sdf } => {
            let mut cfg = config.load()?;
            if let Some(s) = seed {
                cfg.experiment.seeds = vec![s];
            }
            let scene = match sdf {
                Some(path) => Scene::with_grid(&cfg, build_env(&cfg.env)?, read_grid(&path)?)?,
                None => Scene::build(&cfg)?,
            };
            let cell = run_batch(&cfg, &scene, out.as_deref())?;
            finish(&[cell], out.as_deref())
        }
        Command::Sweep { config, out, no_traces } => {
            let cfg = config.load()?;
            let cells = run_sweep(&cfg, if no_traces { None } else { Some(&out) })?;
            finish(&cells, Some(&out))
        }
        Command::Replay { config, seed, observations, out } => {
            let cfg = config.load()?;
            let scene = Scene::build(&cfg)?;
            let steps = replay(&cfg, &scene, seed, &observations)?;
            if let Some(path) = &out {
                let mut w = touchcal::trace::JsonlWriter::create(path.clone())?;
                for s in &steps {
                    w.write(s)?;
                }
                w.finish()?;
            }
            let terminated = steps.last().is_some_and(|s| s.terminated);
            if let Some(last) = steps.last() {
                println!(
                    "{} steps, {}; estimate {:?}",
                    steps.len(),
                    if terminated { "terminated" } else { "not terminated" },
                    last.estimate.to_array()
                );
            }
            Ok(if terminated { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::SdfBuild { config, out } => {
            let cfg = config.load()?;
            let env = build_env(&cfg.env)?;
            let grid = build_sdf(&env, cfg.filter.resolution, cfg.filter.padding)?;
            write_grid(&out, &grid)?;
            let d = grid.dims();
            println!("{} x {} x {} voxels at {} m -> {}", d[0], d[1], d[2], grid.resolution(), out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Report { summary, long } => {
            let s = read_summary(&summary)?;
            print!("{}", render_table(&s));
            if let Some(path) = long {
                let f = std::fs::File::create(&path).map_err(|e| Error::Io(path.clone(), e))?;
                write_long(&s, f)?;
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
