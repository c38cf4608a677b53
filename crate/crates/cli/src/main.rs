//! Command-line front end for the lost-person simulation pipeline.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lostpath::behaviors::BehaviorKind;
use lostpath::config::Config;
use lostpath::pipeline::{self, PlsInput};
use lostpath::{Error, Point};

#[derive(Debug, Parser)]
#[command(name = "lostpath", version, about = "Lost-person movement simulation and probability maps")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Master seed (overrides the config file)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// TOML config, or a manifest.json from an earlier run
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads [default: available parallelism]
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Directory for outputs and the run manifest
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// More log output (repeat for more)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Up-sample a sparse place-last-seen heatmap with a Gaussian process
    UpsamplePls {
        #[arg(long)]
        heatmap: PathBuf,
        /// Output cell size in meters
        #[arg(long)]
        out_cell_size: Option<f64>,
    },
    /// Generate Monte Carlo paths over a terrain directory
    Simulate {
        #[arg(long)]
        terrain: PathBuf,
        /// Surface to draw places last seen from (e.g. posterior.asc)
        #[arg(long, conflicts_with = "pls")]
        pls_surface: Option<PathBuf>,
        /// Fixed place last seen as `x,y`
        #[arg(long, value_parser = parse_point)]
        pls: Option<Point>,
        #[arg(long)]
        n_gen: Option<usize>,
        /// Termination distance in meters
        #[arg(long)]
        d_max: Option<f64>,
        /// Use one behavior for every path (e.g. head_to_water)
        #[arg(long)]
        behavior: Option<BehaviorKind>,
    },
    /// Sample found locations along stored paths and build the PDM
    Sample {
        #[arg(long)]
        paths: PathBuf,
        #[arg(long)]
        terrain: PathBuf,
        #[arg(long)]
        samples_per_path: Option<usize>,
        /// Mobility model override as `s,lambda` (hours)
        #[arg(long, value_parser = parse_pair)]
        mobility: Option<(f64, f64)>,
    },
    /// Re-bin a sample file into a PDM
    Pdm {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        terrain: PathBuf,
        /// PDM cell size in meters
        #[arg(long)]
        cell_size: Option<f64>,
    },
    /// Compare found-location categories against reference counts
    Evaluate {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        terrain: PathBuf,
        /// `category,count` CSV; the built-in solo-hiker counts when omitted
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Fit the log-normal mobility-time model to a histogram
    FitMobility {
        /// `hours,count` CSV
        #[arg(long)]
        histogram: PathBuf,
    },
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected two comma-separated numbers")?;
    let a = a.trim().parse::<f64>().map_err(|e| e.to_string())?;
    let b = b.trim().parse::<f64>().map_err(|e| e.to_string())?;
    Ok((a, b))
}

fn parse_point(s: &str) -> Result<Point, String> {
    parse_pair(s).map(|(x, y)| Point::new(x, y))
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::MissingInput(_) => 2,
        Error::Misaligned(_) => 3,
        Error::EmptyInput(_) | Error::EmptyGraph => 4,
        Error::CategoryMismatch(_) => 5,
        _ => 1,
    }
}

fn load_config(common: &Common) -> lostpath::Result<Config> {
    let mut cfg = match &common.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> lostpath::Result<()> {
    let mut cfg = load_config(&cli.common)?;
    let workers = cli
        .common
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    let out: &Path = &cli.common.out_dir;
    match cli.command {
        Command::UpsamplePls { heatmap, out_cell_size } => {
            if let Some(c) = out_cell_size {
                cfg.gp.out_cell_size = c;
            }
            cfg.validate()?;
            pipeline::upsample_pls(&heatmap, out, &cfg)?;
        }
        Command::Simulate {
            terrain,
            pls_surface,
            pls,
            n_gen,
            d_max,
            behavior,
        } => {
            if let Some(n) = n_gen {
                cfg.simulation.n_gen = n;
            }
            if let Some(d) = d_max {
                cfg.simulation.d_max = d;
            }
            if behavior.is_some() {
                cfg.simulation.behavior_override = behavior;
            }
            cfg.validate()?;
            let source = match (pls_surface, pls) {
                (Some(p), _) => PlsInput::Surface(p),
                (None, Some(p)) => PlsInput::Fixed(p),
                (None, None) => {
                    return Err(Error::Config("simulate needs --pls-surface or --pls".into()));
                }
            };
            pipeline::simulate(&terrain, &source, out, &cfg, workers)?;
        }
        Command::Sample {
            paths,
            terrain,
            samples_per_path,
            mobility,
        } => {
            if let Some(m) = samples_per_path {
                cfg.sampling.samples_per_path = m;
            }
            if let Some((s, l)) = mobility {
                cfg.sampling.mobility.s = s;
                cfg.sampling.mobility.lambda_scale = l;
            }
            cfg.validate()?;
            pipeline::sample(&paths, &terrain, out, &cfg, workers)?;
        }
        Command::Pdm {
            samples,
            terrain,
            cell_size,
        } => {
            if cell_size.is_some() {
                cfg.sampling.pdm_cell_size = cell_size;
            }
            cfg.validate()?;
            pipeline::pdm(&samples, &terrain, out, &cfg)?;
        }
        Command::Evaluate {
            samples,
            terrain,
            reference,
        } => {
            pipeline::evaluate(&samples, &terrain, reference.as_deref(), out, &cfg, workers)?;
            let summary = out.join(pipeline::REPORT_TXT);
            print!("{}", std::fs::read_to_string(&summary).map_err(|e| Error::io(&summary, e))?);
        }
        Command::FitMobility { histogram } => {
            let (_, r) = pipeline::fit_mobility_stage(&histogram, out, &cfg)?;
            let m = r.lognormal.model;
            println!(
                "log-normal s={:.6} lambda={:.6} h (SKL {:.6}); best normal mean={:.4} h sd={:.4} h (SKL {:.6})",
                m.s, m.lambda_scale, r.lognormal.skl, r.normal_mean, r.normal_sd, r.normal_skl
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.common.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
