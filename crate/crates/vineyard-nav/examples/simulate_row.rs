//! Run one simulated trial end-to-end and narrate what happened: every
//! state transition and every visit with its waypoint error.
//!
//! ```bash
//! cargo run -p vineyard-nav --example simulate_row
//! ```

use vineyard_nav::simulator::{run_trial, SimConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = SimConfig::hyqreal();
    let trace = run_trial(&config, 42)?;

    println!(
        "trial finished in {:.1} s simulated ({} steps), final state {}, completed: {}",
        trace.sim_time, trace.steps, trace.final_state, trace.completed
    );

    println!("\ntransitions:");
    for e in &trace.events {
        print!(
            "  [{:>6.1}s] {:<14} robot=({:+.2}, {:+.2})",
            e.t, e.state.to_string(), e.robot.x, e.robot.y
        );
        if let Some(target) = e.target {
            print!(" -> cluster {target}");
        }
        println!();
    }

    println!("\nvisits:");
    for v in trace.visits {
        println!(
            "  cluster {} at ({:+.3}, {:+.3}): stopped {:.3} m from the commanded waypoint",
            v.cluster_id, v.cluster_position.x, v.cluster_position.y, v.error
        );
    }
    Ok(())
}
