//! Thin CLI over the library: batch runs, trace replay, and depth queries.

use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use vineyard_nav::depth::reliable_depth;
use vineyard_nav::harness::{replay, run_batch};
use vineyard_nav::pfm;
use vineyard_nav::simulator::SimConfig;

#[derive(Parser)]
#[command(name = "vineyard-nav", version, about = "Row navigation trial harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a batch of seeded simulation trials and write CSV/SVG/trace
    /// artifacts.
    Run {
        /// Config file path, or a built-in profile name (aliengo, hyqreal).
        #[arg(long)]
        config: String,
        /// Number of independent trials.
        #[arg(long, default_value_t = 10)]
        trials: u32,
        /// Batch seed; per-trial seeds are derived from it.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory for csv/summary/histogram/traces.
        #[arg(long, env = "VINEYARD_NAV_OUT", default_value = "out")]
        out: PathBuf,
    },
    /// Render a trial trace as a readable timeline.
    Replay {
        #[arg(long)]
        trace: PathBuf,
    },
    /// Query a reliable depth value from a PFM image and back-project it.
    Depth {
        /// PFM depth image (grayscale, NaN = invalid).
        #[arg(long)]
        image: PathBuf,
        /// Sidecar text file holding `fx fy cx cy`.
        #[arg(long)]
        intrinsics: PathBuf,
        /// Pixel as `X,Y`.
        #[arg(long, value_parser = parse_pixel)]
        pixel: (usize, usize),
    },
}

fn parse_pixel(raw: &str) -> Result<(usize, usize), String> {
    let (x, y) = raw
        .split_once(',')
        .ok_or_else(|| "expected X,Y".to_string())?;
    Ok((
        x.trim().parse().map_err(|e| format!("bad X: {e}"))?,
        y.trim().parse().map_err(|e| format!("bad Y: {e}"))?,
    ))
}

fn load_config(spec: &str) -> Result<SimConfig, String> {
    if Path::new(spec).exists() {
        return SimConfig::load(spec).map_err(|e| e.to_string());
    }
    SimConfig::named(spec)
        .ok_or_else(|| format!("'{spec}' is neither a config file nor a built-in profile"))
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Command::Run {
            config,
            trials,
            seed,
            out,
        } => {
            let config = load_config(&config)?;
            let report = run_batch(&config, trials, seed, &out).map_err(|e| e.to_string())?;
            let s = &report.summary;
            println!(
                "trials: {} ({} completed)",
                s.trials, s.completed_trials
            );
            println!(
                "visit rate: {:.1}% of {} trunks/trial",
                100.0 * s.visit_rate,
                s.trunk_count
            );
            match (s.mean_error_m, s.std_error_m) {
                (Some(mean), Some(std)) => {
                    println!("waypoint error: mean {:.3} m, std {:.3} m", mean, std)
                }
                _ => println!("waypoint error: no visits"),
            }
            println!("artifacts: {}", out.display());
            if report.all_completed {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("error: not every trial reached row-done");
                Ok(ExitCode::FAILURE)
            }
        }
        Command::Replay { trace } => {
            let timeline = replay(&trace).map_err(|e| e.to_string())?;
            print!("{timeline}");
            Ok(ExitCode::SUCCESS)
        }
        Command::Depth {
            image,
            intrinsics,
            pixel,
        } => {
            let depth_image = pfm::read_pfm(&image).map_err(|e| e.to_string())?;
            let k = pfm::read_intrinsics(&intrinsics).map_err(|e| e.to_string())?;
            let point = reliable_depth(pixel.0, pixel.1, &depth_image, &k)
                .map_err(|e| e.to_string())?;
            println!(
                "pixel ({}, {}) -> camera frame x={:.6} y={:.6} z={:.6} (m)",
                pixel.0, pixel.1, point.x, point.y, point.z
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}
