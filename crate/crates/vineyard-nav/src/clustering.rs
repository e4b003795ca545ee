//! Online clustering of noisy per-frame trunk detections.
//!
//! Per-frame detections of the same trunk scatter around its true position
//! and occasionally include background garbage. The filter merges each new
//! detection into the first existing cluster whose axis-aligned box (half
//! width [`FilterConfig::merge_radius`]) contains it, updating the cluster
//! position as an incremental mean, or opens a new cluster otherwise. A
//! cluster only counts as a real trunk once it has been averaged strictly
//! more than [`FilterConfig::confirm_threshold`] times.

use crate::geometry::Point2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ClusterError {
    #[error("detection has non-finite coordinates ({x}, {y})")]
    NonFiniteDetection { x: f64, y: f64 },
}

/// Stable identifier of a cluster, assigned in creation order.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct ClusterId(pub u64);

impl std::fmt::Display for ClusterId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One world-frame trunk detection from a single sensor frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub position: Point2,
    pub source_frame_id: u64,
}

impl Detection {
    pub fn new(x: f64, y: f64, source_frame_id: u64) -> Self {
        Self {
            position: Point2::new(x, y),
            source_frame_id,
        }
    }
}

/// A rolling-averaged trunk hypothesis.
///
/// `position` is the arithmetic mean of every detection merged into this
/// cluster; `count` is how many detections that is.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionCluster {
    pub id: ClusterId,
    pub position: Point2,
    pub count: u32,
}

/// Tuning for the detection filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    /// Half-width of the merge box around each cluster, meters. Defaults to
    /// half the nominal 0.8 m trunk spacing so neighbours cannot merge.
    pub merge_radius: f64,
    /// A cluster is confirmed once `count > confirm_threshold` (strict).
    pub confirm_threshold: u32,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            merge_radius: 0.40,
            confirm_threshold: 2,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.merge_radius.is_finite() && self.merge_radius > 0.0) {
            return Err(format!(
                "filter.merge_radius must be > 0, got {}",
                self.merge_radius
            ));
        }
        if self.confirm_threshold < 1 {
            return Err("filter.confirm_threshold must be >= 1".into());
        }
        Ok(())
    }
}

/// Mutable cluster store. Single writer; ingestion is strictly sequential.
#[derive(Debug, Clone, Default)]
pub struct FilterState {
    config: FilterConfig,
    clusters: Vec<DetectionCluster>,
    next_id: u64,
    ingested: u64,
}

impl FilterState {
    pub fn new(config: FilterConfig) -> Self {
        Self {
            config,
            clusters: Vec::new(),
            next_id: 0,
            ingested: 0,
        }
    }

    pub fn config(&self) -> &FilterConfig {
        &self.config
    }

    /// Total number of detections accepted so far.
    pub fn ingested(&self) -> u64 {
        self.ingested
    }

    /// All clusters, confirmed or not, in ascending id order.
    pub fn clusters(&self) -> &[DetectionCluster] {
        &self.clusters
    }

    /// Merge one detection into the state.
    ///
    /// The first cluster (ascending id order) whose merge box contains the
    /// detection absorbs it:
    /// `position <- (position * count + detection) / (count + 1)`,
    /// `count <- count + 1`. If no box matches, a fresh cluster with count 1
    /// is created. Exactly one cluster changes; its id is returned.
    pub fn ingest(&mut self, detection: Detection) -> Result<ClusterId, ClusterError> {
        let p = detection.position;
        if !p.is_finite() {
            return Err(ClusterError::NonFiniteDetection { x: p.x, y: p.y });
        }
        let r = self.config.merge_radius;
        self.ingested += 1;

        for cluster in &mut self.clusters {
            let cx = cluster.position.x;
            let cy = cluster.position.y;
            let inside =
                cx - r <= p.x && p.x <= cx + r && cy - r <= p.y && p.y <= cy + r;
            if inside {
                let a = f64::from(cluster.count);
                cluster.position = Point2::new(
                    (cluster.position.x * a + p.x) / (a + 1.0),
                    (cluster.position.y * a + p.y) / (a + 1.0),
                );
                cluster.count += 1;
                return Ok(cluster.id);
            }
        }

        let id = ClusterId(self.next_id);
        self.next_id += 1;
        self.clusters.push(DetectionCluster {
            id,
            position: p,
            count: 1,
        });
        Ok(id)
    }

    /// Clusters averaged strictly more than `confirm_threshold` times, in
    /// ascending id order. Read-only.
    pub fn confirmed(&self) -> Vec<DetectionCluster> {
        self.clusters
            .iter()
            .filter(|c| c.count > self.config.confirm_threshold)
            .copied()
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn state() -> FilterState {
        FilterState::new(FilterConfig::default())
    }

    #[test]
    fn first_detection_opens_a_cluster() {
        let mut s = state();
        let id = s.ingest(Detection::new(1.0, 1.0, 0)).unwrap();
        assert_eq!(id, ClusterId(0));
        assert_eq!(s.clusters().len(), 1);
        assert_eq!(s.clusters()[0].position, Point2::new(1.0, 1.0));
        assert_eq!(s.clusters()[0].count, 1);
    }

    #[test]
    fn detection_outside_box_opens_second_cluster() {
        let mut s = state();
        s.ingest(Detection::new(1.0, 1.0, 0)).unwrap();
        s.ingest(Detection::new(3.0, 3.0, 1)).unwrap();
        assert_eq!(s.clusters().len(), 2);
    }

    /// Incremental-mean arithmetic, cross-checked against the plain mean of
    /// the raw detections that built the cluster.
    #[test]
    fn rolling_average_matches_raw_mean() {
        let mut s = state();
        // Two detections averaging to (0, 0), then one at (0.3, 0).
        let raw = [(-0.15, 0.0), (0.15, 0.0), (0.3, 0.0)];
        for (i, (x, y)) in raw.iter().enumerate() {
            s.ingest(Detection::new(*x, *y, i as u64)).unwrap();
        }
        assert_eq!(s.clusters().len(), 1);
        let c = s.clusters()[0];
        assert_eq!(c.count, 3);

        let mean_x = raw.iter().map(|(x, _)| x).sum::<f64>() / raw.len() as f64;
        assert!((c.position.x - mean_x).abs() < 1e-12);
        assert!((c.position.x - 0.1).abs() < 1e-12);
        assert_eq!(c.position.y, 0.0);
    }

    #[test]
    fn rejects_non_finite_detection() {
        let mut s = state();
        assert!(s.ingest(Detection::new(f64::NAN, 0.0, 0)).is_err());
        assert!(s.ingest(Detection::new(0.0, f64::INFINITY, 0)).is_err());
        assert_eq!(s.ingested(), 0);
        assert!(s.clusters().is_empty());
    }

    #[test]
    fn confirmed_uses_strict_threshold() {
        let mut s = state();
        // Three well-separated clusters with counts 1, 2, 3.
        for (cx, n) in [(0.0, 1), (5.0, 2), (10.0, 3)] {
            for i in 0..n {
                s.ingest(Detection::new(cx, 0.0, i)).unwrap();
            }
        }
        let confirmed = s.confirmed();
        assert_eq!(confirmed.len(), 1);
        assert_eq!(confirmed[0].count, 3);
        assert_eq!(confirmed[0].position.x, 10.0);
    }

    #[test]
    fn confirmed_of_empty_state_is_empty() {
        assert!(state().confirmed().is_empty());
    }

    #[test]
    fn confirmed_preserves_id_order_and_is_idempotent() {
        let mut s = state();
        for cx in [10.0, 0.0] {
            for i in 0..3 {
                s.ingest(Detection::new(cx, 0.0, i)).unwrap();
            }
        }
        let a = s.confirmed();
        let b = s.confirmed();
        assert_eq!(a, b);
        assert_eq!(a.len(), 2);
        assert!(a[0].id < a[1].id);
        assert_eq!(a[0].position.x, 10.0); // created first
    }

    #[test]
    fn ingest_at_existing_position_never_creates_cluster() {
        let mut s = state();
        s.ingest(Detection::new(2.0, 2.0, 0)).unwrap();
        let before = s.clusters().len();
        s.ingest(Detection::new(2.0, 2.0, 1)).unwrap();
        assert_eq!(s.clusters().len(), before);
        assert_eq!(s.clusters()[0].count, 2);
    }

    #[test]
    fn first_matching_cluster_wins_on_overlap() {
        // Two clusters whose boxes both contain the new detection; the
        // earlier id must absorb it and the later one stay untouched.
        let mut s = state();
        s.ingest(Detection::new(0.0, 0.0, 0)).unwrap();
        s.ingest(Detection::new(0.6, 0.0, 1)).unwrap();
        assert_eq!(s.clusters().len(), 2);
        let id = s.ingest(Detection::new(0.3, 0.0, 2)).unwrap();
        assert_eq!(id, ClusterId(0));
        assert_eq!(s.clusters()[0].count, 2);
        assert_eq!(s.clusters()[1].count, 1);
        assert_eq!(s.ingested(), 3);
    }

    proptest! {
        /// Mean equivalence: when every detection lands in the same cluster,
        /// the final position is the arithmetic mean of the whole sequence,
        /// independent of ingest order.
        #[test]
        fn incremental_mean_equals_arithmetic_mean(
            points in proptest::collection::vec((-0.19..0.19f64, -0.19..0.19f64), 1..120),
        ) {
            let mut s = state();
            for (i, (x, y)) in points.iter().enumerate() {
                s.ingest(Detection::new(*x, *y, i as u64)).unwrap();
            }
            // All points lie within +-0.19 of the origin, so the running mean
            // does too, and every point is inside the 0.40 merge box.
            prop_assert_eq!(s.clusters().len(), 1);
            let c = s.clusters()[0];
            let n = points.len() as f64;
            let mx = points.iter().map(|(x, _)| x).sum::<f64>() / n;
            let my = points.iter().map(|(_, y)| y).sum::<f64>() / n;
            prop_assert!((c.position.x - mx).abs() < 1e-9);
            prop_assert!((c.position.y - my).abs() < 1e-9);
        }

        /// Count conservation: cluster counts always sum to the number of
        /// ingested detections, however they scatter.
        #[test]
        fn counts_sum_to_ingested(
            points in proptest::collection::vec((-10.0..10.0f64, -10.0..10.0f64), 0..200),
        ) {
            let mut s = state();
            for (i, (x, y)) in points.iter().enumerate() {
                s.ingest(Detection::new(*x, *y, i as u64)).unwrap();
            }
            let total: u64 = s.clusters().iter().map(|c| u64::from(c.count)).sum();
            prop_assert_eq!(total, points.len() as u64);
            prop_assert_eq!(s.ingested(), points.len() as u64);
        }
    }
}
