//! Run a Monte-Carlo batch with one of the built-in profiles and report
//! the aggregate waypoint-precision statistics. Writes the CSV, summary,
//! histogram, and per-trial traces under a temp directory.
//!
//! ```bash
//! cargo run -p vineyard-nav --example trial_batch
//! ```

use vineyard_nav::harness::run_batch;
use vineyard_nav::simulator::SimConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = SimConfig::aliengo();
    let out = std::env::temp_dir().join("vineyard-nav-batch-example");
    let report = run_batch(&config, 20, 12345, &out)?;

    let s = &report.summary;
    println!("profile: aliengo ({} trunks per trial)", s.trunk_count);
    println!("trials: {} ({} completed)", s.trials, s.completed_trials);
    println!("visit rate: {:.1}%", 100.0 * s.visit_rate);
    if let (Some(mean), Some(std)) = (s.mean_error_m, s.std_error_m) {
        println!("waypoint error: mean {:.3} m, std {:.3} m", mean, std);
    }

    println!("\nper-trial wall time (ms):");
    for r in &report.results {
        println!(
            "  trial {:>2}: {:>5.1} ms, visited {}/{}",
            r.trial_id,
            r.wall_time_s * 1e3,
            r.visited_count,
            r.visited_count + r.skipped_count
        );
    }
    println!("\nartifacts in {}", out.display());
    Ok(())
}
