//! Fold noisy per-frame detections into confirmed trunk clusters.
//!
//! Simulates a detector that sees two real trunks with jitter plus one
//! background false positive, and shows how the rolling average pulls the
//! confirmed positions onto the truth while the one-shot garbage stays
//! unconfirmed.
//!
//! ```bash
//! cargo run -p vineyard-nav --example cluster_detections
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vineyard_nav::clustering::{Detection, FilterConfig, FilterState};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let truth = [(0.0, 0.0), (0.8, 0.0)];
    let mut filter = FilterState::new(FilterConfig::default());

    for frame in 0..12u64 {
        for (tx, ty) in truth {
            let (jx, jy) = (rng.random_range(-0.06..0.06), rng.random_range(-0.06..0.06));
            filter.ingest(Detection::new(tx + jx, ty + jy, frame))?;
        }
    }
    // One stray background detection, far from everything.
    filter.ingest(Detection::new(3.5, -1.2, 12))?;

    println!("{} detections ingested", filter.ingested());
    for c in filter.clusters() {
        println!(
            "cluster {}: ({:+.3}, {:+.3}) averaged {} times",
            c.id, c.position.x, c.position.y, c.count
        );
    }

    println!("\nconfirmed (seen more than {} times):", filter.config().confirm_threshold);
    for c in filter.confirmed() {
        println!(
            "cluster {}: ({:+.3}, {:+.3})",
            c.id, c.position.x, c.position.y
        );
    }
    Ok(())
}
