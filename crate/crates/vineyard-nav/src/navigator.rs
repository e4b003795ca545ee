//! The row-working state machine.
//!
//! Flow: an initial search creeps forward until enough trunks are
//! confirmed, a row line is fit and the nearest trunk anchors it, then the
//! robot loops approach -> pause-for-task -> next target until no
//! unvisited trunks remain on the row and no new confirmations arrive
//! within the search timeout.
//!
//! `step` is a pure-ish transition: one snapshot in, one motion command
//! out, all mutation confined to the navigator's own state. Identical
//! snapshot sequences produce identical state and command traces.

use crate::clustering::{ClusterId, DetectionCluster};
use crate::geometry::{
    distance, normalize_angle, offset_waypoint, trunk_frame, GeometryError, Point2, Pose2D,
    Side, Vec2,
};
use crate::rows::{enumerate_lines, refresh_row, select_initial_row, RowConfig, RowEstimate};
use log::debug;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Desired body-frame velocity handed to the base controller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionCommand {
    /// Forward, m/s.
    pub vx: f64,
    /// Lateral (left positive), m/s.
    pub vy: f64,
    /// Yaw rate, rad/s.
    pub vyaw: f64,
}

impl MotionCommand {
    pub fn stop() -> Self {
        Self {
            vx: 0.0,
            vy: 0.0,
            vyaw: 0.0,
        }
    }

    pub fn is_stop(&self) -> bool {
        self.vx == 0.0 && self.vy == 0.0 && self.vyaw == 0.0
    }
}

/// How the lateral side of the row is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SidePolicy {
    /// Stay in the half-plane the robot already occupies; never cross the
    /// row. Locked at the first waypoint for the rest of the run.
    Auto,
    Left,
    Right,
}

/// Navigator tuning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NavConfig {
    /// Lateral offset of waypoints from the trunk, meters. Sized so the
    /// arm workspace spans a typical 0.7 m cordon.
    pub offset_d: f64,
    /// Position tolerance that counts as arrival, meters.
    pub arrival_tolerance: f64,
    /// Give up after this long without a new confirmed trunk, seconds.
    pub search_timeout: f64,
    /// Dwell at each waypoint for the plant task, seconds.
    pub pause_duration: f64,
    pub side_policy: SidePolicy,
    /// Extra shift of the waypoint along the row, meters. Zero centers the
    /// robot on the trunk itself.
    pub along_offset: f64,
    /// Forward creep speed during the initial search, m/s.
    pub scan_speed: f64,
    /// Speed cap while approaching a waypoint, m/s.
    pub cruise_speed: f64,
    /// Proportional gain from position error to speed, 1/s.
    pub approach_gain: f64,
    /// Proportional gain from heading error to yaw rate, 1/s.
    pub yaw_gain: f64,
}

impl Default for NavConfig {
    fn default() -> Self {
        Self {
            offset_d: 1.0,
            arrival_tolerance: 0.05,
            search_timeout: 10.0,
            pause_duration: 5.0,
            side_policy: SidePolicy::Auto,
            along_offset: 0.0,
            scan_speed: 0.1,
            cruise_speed: 0.5,
            approach_gain: 1.5,
            yaw_gain: 2.0,
        }
    }
}

impl NavConfig {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("nav.offset_d", self.offset_d),
            ("nav.arrival_tolerance", self.arrival_tolerance),
            ("nav.search_timeout", self.search_timeout),
            ("nav.pause_duration", self.pause_duration),
            ("nav.scan_speed", self.scan_speed),
            ("nav.cruise_speed", self.cruise_speed),
            ("nav.approach_gain", self.approach_gain),
            ("nav.yaw_gain", self.yaw_gain),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("{name} must be > 0, got {v}"));
            }
        }
        if !self.along_offset.is_finite() {
            return Err("nav.along_offset must be finite".into());
        }
        Ok(())
    }
}

/// Discrete mode of the state machine.
#[derive(Debug, Clone, PartialEq)]
pub enum NavState {
    /// Creep forward until enough trunks are confirmed.
    InitialSearch,
    /// Fit a row line and pick the first target.
    RowFit,
    /// Drive to a generated waypoint beside the target trunk.
    Approach { waypoint: Pose2D, target: ClusterId },
    /// Hold at the waypoint for the plant task; detections keep updating.
    TaskPause { remaining: f64 },
    /// Absorbing terminal state.
    RowDone,
}

impl NavState {
    pub fn kind(&self) -> StateKind {
        match self {
            NavState::InitialSearch => StateKind::InitialSearch,
            NavState::RowFit => StateKind::RowFit,
            NavState::Approach { .. } => StateKind::Approach,
            NavState::TaskPause { .. } => StateKind::TaskPause,
            NavState::RowDone => StateKind::RowDone,
        }
    }

    fn target(&self) -> Option<ClusterId> {
        match self {
            NavState::Approach { target, .. } => Some(*target),
            _ => None,
        }
    }

    fn waypoint(&self) -> Option<Pose2D> {
        match self {
            NavState::Approach { waypoint, .. } => Some(*waypoint),
            _ => None,
        }
    }

    /// Same discrete phase, ignoring timer countdowns.
    fn same_phase(&self, other: &NavState) -> bool {
        self.kind() == other.kind() && self.target() == other.target()
    }
}

/// Wire-friendly state tag used in the event log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateKind {
    InitialSearch,
    RowFit,
    Approach,
    TaskPause,
    RowDone,
}

impl std::fmt::Display for StateKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            StateKind::InitialSearch => "initial_search",
            StateKind::RowFit => "row_fit",
            StateKind::Approach => "approach",
            StateKind::TaskPause => "task_pause",
            StateKind::RowDone => "row_done",
        };
        f.write_str(name)
    }
}

/// One record per state transition, serialized as a JSON line in traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NavEvent {
    pub t: f64,
    pub state: StateKind,
    pub robot: Pose2D,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<ClusterId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub waypoint: Option<Pose2D>,
}

/// One arrival at a waypoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisitRecord {
    pub cluster_id: ClusterId,
    /// Cluster position at arrival time (the averaged trunk estimate).
    pub cluster_position: Point2,
    pub achieved: Pose2D,
    /// The commanded waypoint this visit aimed for.
    pub waypoint: Pose2D,
    /// Distance between achieved position and commanded waypoint, meters.
    pub error: f64,
}

/// Append-only visit history; a cluster id never repeats.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct VisitLog {
    records: Vec<VisitRecord>,
}

impl VisitLog {
    pub fn records(&self) -> &[VisitRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    fn record(&mut self, r: VisitRecord) -> bool {
        if self.records.iter().any(|x| x.cluster_id == r.cluster_id) {
            return false;
        }
        self.records.push(r);
        true
    }
}

/// World state handed to the navigator each tick.
#[derive(Debug, Clone, Copy)]
pub struct Snapshot<'a> {
    /// Confirmed clusters, ascending id order.
    pub clusters: &'a [DetectionCluster],
    pub robot: Pose2D,
    /// Seconds since the previous step.
    pub dt: f64,
}

/// Generate the approach waypoint for a trunk on a row.
///
/// The waypoint sits at lateral offset `offset_d` from the trunk, facing
/// along the row, optionally shifted `along_offset` down the row. Under
/// `SidePolicy::Auto` the side is the half-plane currently containing the
/// robot.
pub fn waypoint_for(
    cluster: &DetectionCluster,
    row: &RowEstimate,
    config: &NavConfig,
    robot: Pose2D,
) -> Result<Pose2D, GeometryError> {
    let side = match config.side_policy {
        SidePolicy::Left => Side::Left,
        SidePolicy::Right => Side::Right,
        SidePolicy::Auto => side_of(row.line.direction, cluster.position, robot.position()),
    };
    waypoint_with_side(cluster, row, config, side)
}

/// Half-plane of `point` relative to the row line through `on_line`.
fn side_of(direction: Vec2, on_line: Point2, point: Point2) -> Side {
    if direction.cross(on_line.to(point)) >= 0.0 {
        Side::Left
    } else {
        Side::Right
    }
}

fn waypoint_with_side(
    cluster: &DetectionCluster,
    row: &RowEstimate,
    config: &NavConfig,
    side: Side,
) -> Result<Pose2D, GeometryError> {
    let frame = trunk_frame(cluster.position, row.line.direction)?;
    let wp = offset_waypoint(frame, config.offset_d, side)?;
    if config.along_offset == 0.0 {
        return Ok(wp);
    }
    let shifted = wp
        .position()
        .offset(row.line.direction.scaled(config.along_offset));
    Ok(Pose2D::new(shifted.x, shifted.y, wp.yaw))
}

/// The state machine driver.
pub struct Navigator {
    nav_config: NavConfig,
    row_config: RowConfig,
    state: NavState,
    row: Option<RowEstimate>,
    visited: BTreeSet<ClusterId>,
    visit_log: VisitLog,
    locked_side: Option<Side>,
    time: f64,
    known_confirmed: BTreeSet<ClusterId>,
    last_confirmation_time: f64,
    events: Vec<NavEvent>,
}

impl Navigator {
    pub fn new(nav_config: NavConfig, row_config: RowConfig) -> Self {
        Self {
            nav_config,
            row_config,
            state: NavState::InitialSearch,
            row: None,
            visited: BTreeSet::new(),
            visit_log: VisitLog::default(),
            locked_side: None,
            time: 0.0,
            known_confirmed: BTreeSet::new(),
            last_confirmation_time: 0.0,
            events: Vec::new(),
        }
    }

    pub fn state(&self) -> &NavState {
        &self.state
    }

    pub fn visit_log(&self) -> &VisitLog {
        &self.visit_log
    }

    pub fn row(&self) -> Option<&RowEstimate> {
        self.row.as_ref()
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn events(&self) -> &[NavEvent] {
        &self.events
    }

    /// Drain accumulated transition events.
    pub fn take_events(&mut self) -> Vec<NavEvent> {
        std::mem::take(&mut self.events)
    }

    pub fn is_done(&self) -> bool {
        matches!(self.state, NavState::RowDone)
    }

    /// Advance one tick. See the module docs for the transition rules.
    pub fn step(&mut self, snapshot: &Snapshot) -> MotionCommand {
        self.time += snapshot.dt;
        let mut grew = false;
        for c in snapshot.clusters {
            if self.known_confirmed.insert(c.id) {
                grew = true;
            }
        }
        if grew {
            self.last_confirmation_time = self.time;
        }

        let (next, command) = self.transition(snapshot);
        if let Some(next) = next {
            self.enter(next, snapshot.robot);
        }
        command
    }

    fn timed_out(&self) -> bool {
        self.time - self.last_confirmation_time >= self.nav_config.search_timeout
    }

    fn transition(&mut self, snap: &Snapshot) -> (Option<NavState>, MotionCommand) {
        match self.state.clone() {
            NavState::InitialSearch => {
                if snap.clusters.len() >= self.row_config.min_line_size {
                    (Some(NavState::RowFit), MotionCommand::stop())
                } else if snap.clusters.is_empty() && self.timed_out() {
                    (Some(NavState::RowDone), MotionCommand::stop())
                } else {
                    (
                        None,
                        MotionCommand {
                            vx: self.nav_config.scan_speed,
                            vy: 0.0,
                            vyaw: 0.0,
                        },
                    )
                }
            }
            NavState::RowFit => {
                let candidates = enumerate_lines(snap.clusters, &self.row_config);
                match select_initial_row(&candidates, snap.clusters, snap.robot) {
                    Ok(estimate) => {
                        debug!(
                            "row fit: {} members, anchor {}",
                            estimate.line.member_ids.len(),
                            estimate.anchor_id
                        );
                        self.row = Some(estimate);
                        match self.next_target(snap) {
                            Some((target, waypoint)) => (
                                Some(NavState::Approach { waypoint, target }),
                                MotionCommand::stop(),
                            ),
                            None if self.timed_out() => {
                                (Some(NavState::RowDone), MotionCommand::stop())
                            }
                            None => (None, MotionCommand::stop()),
                        }
                    }
                    Err(e) => {
                        debug!("row fit failed: {e}");
                        (Some(NavState::InitialSearch), MotionCommand::stop())
                    }
                }
            }
            NavState::Approach { waypoint, target } => {
                let cluster = snap.clusters.iter().find(|c| c.id == target);
                let Some(cluster) = cluster else {
                    // Target vanished mid-approach: re-fit rather than crash.
                    debug!("approach target {target} vanished, re-fitting");
                    return (Some(NavState::RowFit), MotionCommand::stop());
                };
                let dist = distance(snap.robot.position(), waypoint.position());
                if dist <= self.nav_config.arrival_tolerance {
                    let recorded = self.visit_log.record(VisitRecord {
                        cluster_id: target,
                        cluster_position: cluster.position,
                        achieved: snap.robot,
                        waypoint,
                        error: dist,
                    });
                    debug_assert!(recorded, "targets are filtered against the visit log");
                    self.visited.insert(target);
                    (
                        Some(NavState::TaskPause {
                            remaining: self.nav_config.pause_duration,
                        }),
                        MotionCommand::stop(),
                    )
                } else {
                    (None, self.approach_command(snap.robot, waypoint))
                }
            }
            NavState::TaskPause { remaining } => {
                // The pause doubles as a detection update: re-fit the row
                // against the freshest cluster positions.
                match self.row.as_ref() {
                    Some(row) => match refresh_row(row, snap.clusters, &self.row_config) {
                        Ok(updated) => self.row = Some(updated),
                        Err(e) => {
                            debug!("row refresh failed: {e}");
                            self.row = None;
                            return (Some(NavState::RowFit), MotionCommand::stop());
                        }
                    },
                    None => return (Some(NavState::RowFit), MotionCommand::stop()),
                }
                let remaining = (remaining - snap.dt).max(0.0);
                if remaining > 0.0 {
                    (
                        Some(NavState::TaskPause { remaining }),
                        MotionCommand::stop(),
                    )
                } else {
                    match self.next_target(snap) {
                        Some((target, waypoint)) => (
                            Some(NavState::Approach { waypoint, target }),
                            MotionCommand::stop(),
                        ),
                        None if self.timed_out() => {
                            (Some(NavState::RowDone), MotionCommand::stop())
                        }
                        // Hold: detections may still confirm a new trunk.
                        None => (
                            Some(NavState::TaskPause { remaining: 0.0 }),
                            MotionCommand::stop(),
                        ),
                    }
                }
            }
            NavState::RowDone => (None, MotionCommand::stop()),
        }
    }

    /// Closest unvisited confirmed trunk on the current row, with its
    /// waypoint.
    fn next_target(&mut self, snap: &Snapshot) -> Option<(ClusterId, Pose2D)> {
        let row = self.row.clone()?;
        let robot_pos = snap.robot.position();
        let target = row
            .line
            .member_ids
            .iter()
            .filter(|id| !self.visited.contains(id))
            .filter_map(|id| snap.clusters.iter().find(|c| c.id == *id))
            .min_by(|a, b| {
                distance(a.position, robot_pos)
                    .partial_cmp(&distance(b.position, robot_pos))
                    .unwrap()
                    .then(a.id.cmp(&b.id))
            })?;
        let side = self.resolve_side(&row, target, snap.robot);
        let waypoint = waypoint_with_side(target, &row, &self.nav_config, side).ok()?;
        Some((target.id, waypoint))
    }

    fn resolve_side(&mut self, row: &RowEstimate, target: &DetectionCluster, robot: Pose2D) -> Side {
        match self.nav_config.side_policy {
            SidePolicy::Left => Side::Left,
            SidePolicy::Right => Side::Right,
            SidePolicy::Auto => *self.locked_side.get_or_insert_with(|| {
                side_of(row.line.direction, target.position, robot.position())
            }),
        }
    }

    fn approach_command(&self, robot: Pose2D, waypoint: Pose2D) -> MotionCommand {
        let to_wp = robot.position().to(waypoint.position());
        let dist = to_wp.norm();
        let speed = (self.nav_config.approach_gain * dist).min(self.nav_config.cruise_speed);
        let v_world = to_wp.scaled(speed / dist);
        let v_body = v_world.rotated(-robot.yaw);
        MotionCommand {
            vx: v_body.dx,
            vy: v_body.dy,
            vyaw: self.nav_config.yaw_gain * normalize_angle(waypoint.yaw - robot.yaw),
        }
    }

    fn enter(&mut self, next: NavState, robot: Pose2D) {
        let changed = !self.state.same_phase(&next);
        self.state = next;
        if changed {
            debug!("-> {} at t={:.1}", self.state.kind(), self.time);
            self.events.push(NavEvent {
                t: self.time,
                state: self.state.kind(),
                robot,
                target: self.state.target(),
                waypoint: self.state.waypoint(),
            });
        }
    }
}
