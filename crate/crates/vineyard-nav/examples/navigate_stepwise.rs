//! Drive the navigator by hand, one snapshot at a time, without the
//! simulator: useful when embedding the state machine behind a real
//! perception stack. The caller owns the loop; the navigator only sees
//! confirmed clusters, the robot pose, and the tick length.
//!
//! ```bash
//! cargo run -p vineyard-nav --example navigate_stepwise
//! ```

use vineyard_nav::clustering::{ClusterId, DetectionCluster};
use vineyard_nav::geometry::{Point2, Pose2D};
use vineyard_nav::navigator::{NavConfig, Navigator, Snapshot};
use vineyard_nav::rows::RowConfig;

fn main() {
    // Pretend perception has already confirmed three trunks in a row.
    let clusters: Vec<DetectionCluster> = (0..3)
        .map(|i| DetectionCluster {
            id: ClusterId(i),
            position: Point2::new(0.8 * i as f64, 0.0),
            count: 5,
        })
        .collect();

    let mut navigator = Navigator::new(NavConfig::default(), RowConfig::default());
    let mut robot = Pose2D::new(-1.8, 1.0, 0.0);
    let dt = 0.1;

    for step in 0..2000 {
        let command = navigator.step(&Snapshot {
            clusters: &clusters,
            robot,
            dt,
        });
        // Trivial holonomic playback of the command (yaw stays zero here).
        robot = Pose2D::new(robot.x + command.vx * dt, robot.y + command.vy * dt, robot.yaw);

        if navigator.is_done() {
            println!("row finished after {} steps ({:.1} s)", step + 1, navigator.time());
            break;
        }
    }

    for event in navigator.take_events() {
        println!(
            "[{:>6.1}s] {:<14} robot=({:+.2}, {:+.2})",
            event.t,
            event.state.to_string(),
            event.robot.x,
            event.robot.y
        );
    }
    println!("visited {} trunks", navigator.visit_log().len());
}
