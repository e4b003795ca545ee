//! Find row lines among confirmed clusters and pick the one to work.
//!
//! The scene has two parallel rows two meters apart; the selection rule
//! anchors on the trunk nearest the robot and prefers the shortest line
//! through it, which rejects the diagonal between the rows.
//!
//! ```bash
//! cargo run -p vineyard-nav --example find_rows
//! ```

use vineyard_nav::clustering::{ClusterId, DetectionCluster};
use vineyard_nav::geometry::{Point2, Pose2D};
use vineyard_nav::rows::{enumerate_lines, refresh_row, select_initial_row, RowConfig};

fn cluster(id: u64, x: f64, y: f64) -> DetectionCluster {
    DetectionCluster {
        id: ClusterId(id),
        position: Point2::new(x, y),
        count: 4,
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut clusters = vec![
        cluster(0, 0.0, 0.02),
        cluster(1, 0.8, -0.01),
        cluster(2, 1.6, 0.03),
        cluster(3, 0.1, 2.0),
        cluster(4, 0.9, 2.02),
        cluster(5, 1.7, 1.98),
    ];
    let config = RowConfig::default();

    let candidates = enumerate_lines(&clusters, &config);
    println!("{} line candidate(s):", candidates.len());
    for c in &candidates {
        println!(
            "  members {:?}, length {:.2} m, rms {:.3} m, direction ({:+.3}, {:+.3})",
            c.member_ids.iter().map(|id| id.0).collect::<Vec<_>>(),
            c.length,
            c.rms_perp_error,
            c.direction.dx,
            c.direction.dy
        );
    }

    let robot = Pose2D::new(-1.5, 0.8, 0.0);
    let row = select_initial_row(&candidates, &clusters, robot)?;
    println!(
        "\nselected row anchored at cluster {}: members {:?}",
        row.anchor_id,
        row.line.member_ids.iter().map(|id| id.0).collect::<Vec<_>>()
    );

    // A newly confirmed trunk near the row joins it on refresh.
    clusters.push(cluster(6, 2.4, 0.05));
    let refreshed = refresh_row(&row, &clusters, &config)?;
    println!(
        "after refresh: members {:?}, direction ({:+.4}, {:+.4})",
        refreshed.line.member_ids.iter().map(|id| id.0).collect::<Vec<_>>(),
        refreshed.line.direction.dx,
        refreshed.line.direction.dy
    );
    Ok(())
}
