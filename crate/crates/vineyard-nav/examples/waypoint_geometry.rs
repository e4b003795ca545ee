//! Place approach waypoints beside a trunk: build the trunk-centered
//! frame from the row direction, then offset laterally to either side.
//!
//! ```bash
//! cargo run -p vineyard-nav --example waypoint_geometry
//! ```

use vineyard_nav::geometry::{distance, offset_waypoint, trunk_frame, Point2, Side, Vec2};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let trunk = Point2::new(2.4, 0.1);
    let row_direction = Vec2::new(0.95, 0.05).normalized()?;

    let frame = trunk_frame(trunk, row_direction)?;
    println!(
        "trunk at ({:.2}, {:.2}), row heading {:.1} deg",
        trunk.x,
        trunk.y,
        frame.yaw.to_degrees()
    );

    for side in [Side::Left, Side::Right] {
        let wp = offset_waypoint(frame, 1.0, side)?;
        println!(
            "{side:?}: waypoint ({:.3}, {:.3}) facing {:.1} deg, {:.3} m from trunk",
            wp.x,
            wp.y,
            wp.yaw.to_degrees(),
            distance(trunk, wp.position())
        );
    }

    // The two waypoints mirror each other across the row line.
    let left = offset_waypoint(frame, 1.0, Side::Left)?;
    let right = offset_waypoint(frame, 1.0, Side::Right)?;
    println!(
        "midpoint of both sides: ({:.3}, {:.3}) (the trunk itself)",
        (left.x + right.x) / 2.0,
        (left.y + right.y) / 2.0
    );
    Ok(())
}
