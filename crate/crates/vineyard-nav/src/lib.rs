//! Row-crop navigation stack with a deterministic trial simulator.
//!
//! Plant-by-plant work in a vineyard row (pruning, spraying, inspection)
//! needs the robot to stop at a precise pose beside every trunk. This
//! crate implements the control side of that problem and a desk-scale way
//! to validate it:
//!
//! - [`clustering`] folds noisy per-frame trunk detections into rolling
//!   averaged clusters and confirms the repeatedly-seen ones.
//! - [`rows`] finds collinear cluster subsets, selects the row to work,
//!   and keeps its direction vector fresh as estimates shift.
//! - [`geometry`] places waypoints at a lateral offset from each trunk,
//!   parallel to the row, so an arm workspace centers on the plant.
//! - [`navigator`] is the state machine that ties it together: search,
//!   fit, approach, pause for the task, pick the next trunk, finish the
//!   row.
//! - [`depth`] + [`pfm`] recover reliable depth for a pixel from a sensor
//!   image full of dropouts and back-project it through the pinhole model.
//! - [`simulator`] + [`harness`] replay the whole loop in a seeded 2D
//!   world with configurable sensor noise and score waypoint precision
//!   against ground truth over Monte-Carlo batches.
//!
//! # Quick start
//!
//! ```
//! use vineyard_nav::harness::run_batch;
//! use vineyard_nav::simulator::SimConfig;
//!
//! # fn main() -> Result<(), Box<dyn std::error::Error>> {
//! let out = std::env::temp_dir().join("vineyard-nav-doc");
//! let report = run_batch(&SimConfig::aliengo(), 3, 42, &out)?;
//! println!(
//!     "visited {:.0}% of trunks",
//!     100.0 * report.summary.visit_rate
//! );
//! # Ok(())
//! # }
//! ```
//!
//! The `examples/` directory has one runnable example per capability
//! (`cargo run --example simulate_row`, `--example find_rows`, ...), and
//! the `vineyard-nav` binary wraps batch runs, trace replay, and depth
//! queries for the command line.

pub mod clustering;
pub mod depth;
pub mod geometry;
pub mod harness;
pub mod navigator;
pub mod pfm;
pub mod rows;
pub mod simulator;

pub use clustering::{ClusterId, Detection, DetectionCluster, FilterConfig, FilterState};
pub use geometry::{distance, offset_waypoint, trunk_frame, Point2, Pose2D, Side, Vec2};
pub use navigator::{MotionCommand, NavConfig, NavState, Navigator, Snapshot};
pub use rows::{collinear, enumerate_lines, refresh_row, select_initial_row, RowConfig, RowEstimate};
pub use simulator::{run_trial, SimConfig, TrialTrace, VineyardWorld};
