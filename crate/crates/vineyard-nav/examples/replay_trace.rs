//! Persist a trial's transition events as a JSONL trace file, then render
//! it back as a human-readable timeline.
//!
//! ```bash
//! cargo run -p vineyard-nav --example replay_trace
//! ```

use vineyard_nav::harness::{replay, write_trace};
use vineyard_nav::simulator::{run_trial, SimConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let trace = run_trial(&SimConfig::hyqreal(), 9)?;

    let dir = std::env::temp_dir().join("vineyard-nav-replay-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("trial.jsonl");
    write_trace(&trace.events, &path)?;
    println!("wrote {} events to {}\n", trace.events.len(), path.display());

    print!("{}", replay(&path)?);
    Ok(())
}
