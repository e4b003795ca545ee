//! Row-line estimation over confirmed trunk clusters.
//!
//! A vineyard row shows up as a collinear subset of the confirmed clusters.
//! This module enumerates those subsets with a perpendicular-distance
//! collinearity test, picks the initial row the robot should work (nearest
//! trunk, extreme on the line, shortest line wins), and refreshes the row
//! direction as the robot moves and cluster positions keep averaging in.

use crate::clustering::{ClusterId, DetectionCluster};
use crate::geometry::{distance, Point2, Pose2D, Vec2};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RowError {
    /// The two points defining a line coincide.
    #[error("degenerate pair: line base points coincide at ({x}, {y})")]
    DegeneratePair { x: f64, y: f64 },
    /// No candidate line passes through the trunk nearest the robot.
    #[error("no row found through the nearest trunk")]
    NoRowFound,
    /// Too few members survive to keep tracking the row.
    #[error("row lost: {surviving} member(s) survive, need at least 2")]
    RowLost { surviving: usize },
}

/// Tuning for line enumeration and membership.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RowConfig {
    /// Max perpendicular distance (meters) of a member from its row line.
    pub epsilon: f64,
    /// Minimum member count for an enumerated line candidate.
    pub min_line_size: usize,
}

impl Default for RowConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.10,
            min_line_size: 3,
        }
    }
}

impl RowConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(format!("row.epsilon must be >= 0, got {}", self.epsilon));
        }
        if self.min_line_size < 2 {
            return Err(format!(
                "row.min_line_size must be >= 2, got {}",
                self.min_line_size
            ));
        }
        Ok(())
    }
}

/// A collinear subset of clusters with a canonical direction.
///
/// `member_ids` are ordered by projection along `direction`, so the first
/// member projects lowest. Candidates from [`enumerate_lines`] carry at
/// least `min_line_size` members; [`refresh_row`] keeps tracking a row down
/// to 2 survivors before declaring it lost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineCandidate {
    pub member_ids: Vec<ClusterId>,
    pub direction: Vec2,
    pub length: f64,
    pub rms_perp_error: f64,
}

/// The row currently being worked, anchored at the trunk nearest the robot
/// at selection time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowEstimate {
    pub line: LineCandidate,
    pub anchor_id: ClusterId,
}

/// An infinite line through `centroid` along unit `direction`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrincipalLine {
    pub centroid: Point2,
    pub direction: Vec2,
}

impl PrincipalLine {
    /// Perpendicular distance from `p` to the line.
    pub fn distance_to(&self, p: Point2) -> f64 {
        self.direction.cross(self.centroid.to(p)).abs()
    }

    /// Signed projection of `p` along the line direction.
    pub fn projection_of(&self, p: Point2) -> f64 {
        self.direction.dot(self.centroid.to(p))
    }
}

/// Perpendicular distance from `p_k` to the infinite line through `p_i`
/// and `p_j`.
pub fn perp_distance(p_i: Point2, p_j: Point2, p_k: Point2) -> Result<f64, RowError> {
    if p_i == p_j {
        return Err(RowError::DegeneratePair { x: p_i.x, y: p_i.y });
    }
    let base = p_i.to(p_j);
    Ok(base.cross(p_i.to(p_k)).abs() / base.norm())
}

/// True iff `p_k` lies within `epsilon` perpendicular distance of the line
/// through `p_i` and `p_j`.
pub fn collinear(
    p_i: Point2,
    p_j: Point2,
    p_k: Point2,
    epsilon: f64,
) -> Result<bool, RowError> {
    Ok(perp_distance(p_i, p_j, p_k)? <= epsilon)
}

/// Best-fit line through a point set: centroid plus the principal axis of
/// the scatter (largest-eigenvalue eigenvector of the 2x2 covariance).
///
/// Returns `None` for fewer than 2 points or an isotropic cloud with no
/// distinguished axis.
pub fn fit_principal_line(points: &[Point2]) -> Option<PrincipalLine> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let cx = points.iter().map(|p| p.x).sum::<f64>() / n;
    let cy = points.iter().map(|p| p.y).sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for p in points {
        let dx = p.x - cx;
        let dy = p.y - cy;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    let lambda = 0.5 * (sxx + syy + ((sxx - syy).powi(2) + 4.0 * sxy * sxy).sqrt());
    // Pick the better-conditioned eigenvector expression.
    let v = if sxx >= syy {
        Vec2::new(lambda - syy, sxy)
    } else {
        Vec2::new(sxy, lambda - sxx)
    };
    let direction = v.normalized().ok()?;
    Some(PrincipalLine {
        centroid: Point2::new(cx, cy),
        direction,
    })
}

fn canonical_sign(dir: Vec2) -> Vec2 {
    if dir.dx < 0.0 || (dir.dx == 0.0 && dir.dy < 0.0) {
        dir.scaled(-1.0)
    } else {
        dir
    }
}

fn find_cluster(clusters: &[DetectionCluster], id: ClusterId) -> Option<&DetectionCluster> {
    clusters.iter().find(|c| c.id == id)
}

/// Build a candidate from a member subset, validating every member against
/// the best-fit line.
fn build_candidate(
    members: &[DetectionCluster],
    epsilon: f64,
    sign_reference: Option<Vec2>,
) -> Option<LineCandidate> {
    let positions: Vec<Point2> = members.iter().map(|c| c.position).collect();
    let fit = fit_principal_line(&positions)?;
    if positions.iter().any(|p| fit.distance_to(*p) > epsilon) {
        return None;
    }
    let direction = match sign_reference {
        Some(prev) if fit.direction.dot(prev) < 0.0 => fit.direction.scaled(-1.0),
        Some(_) => fit.direction,
        None => canonical_sign(fit.direction),
    };
    let line = PrincipalLine {
        centroid: fit.centroid,
        direction,
    };
    let mut ordered: Vec<&DetectionCluster> = members.iter().collect();
    ordered.sort_by(|a, b| {
        line.projection_of(a.position)
            .partial_cmp(&line.projection_of(b.position))
            .unwrap()
            .then(a.id.cmp(&b.id))
    });
    let first = ordered.first()?.position;
    let last = ordered.last()?.position;
    let rms = (positions
        .iter()
        .map(|p| line.distance_to(*p).powi(2))
        .sum::<f64>()
        / positions.len() as f64)
        .sqrt();
    Some(LineCandidate {
        member_ids: ordered.iter().map(|c| c.id).collect(),
        direction,
        length: distance(first, last),
        rms_perp_error: rms,
    })
}

/// Enumerate maximal collinear subsets of the clusters.
///
/// Every unordered cluster pair seeds an infinite line; clusters within
/// `epsilon` perpendicular distance are absorbed. A subset survives if it
/// has at least `min_line_size` members that all sit within `epsilon` of
/// their own best-fit line. Subsets contained in a larger candidate are
/// dropped. Result is sorted by length ascending (ties by member ids).
pub fn enumerate_lines(
    clusters: &[DetectionCluster],
    config: &RowConfig,
) -> Vec<LineCandidate> {
    if clusters.len() < config.min_line_size {
        return Vec::new();
    }
    let mut seen: BTreeSet<Vec<ClusterId>> = BTreeSet::new();
    let mut candidates: Vec<LineCandidate> = Vec::new();

    for i in 0..clusters.len() {
        for j in (i + 1)..clusters.len() {
            let (pi, pj) = (clusters[i].position, clusters[j].position);
            if pi == pj {
                continue;
            }
            let members: Vec<DetectionCluster> = clusters
                .iter()
                .filter(|c| {
                    perp_distance(pi, pj, c.position)
                        .map(|d| d <= config.epsilon)
                        .unwrap_or(false)
                })
                .copied()
                .collect();
            if members.len() < config.min_line_size {
                continue;
            }
            let mut key: Vec<ClusterId> = members.iter().map(|c| c.id).collect();
            key.sort();
            if !seen.insert(key) {
                continue;
            }
            if let Some(candidate) = build_candidate(&members, config.epsilon, None) {
                candidates.push(candidate);
            }
        }
    }

    // Keep only maximal member sets.
    let sets: Vec<BTreeSet<ClusterId>> = candidates
        .iter()
        .map(|c| c.member_ids.iter().copied().collect())
        .collect();
    let mut maximal: Vec<LineCandidate> = candidates
        .iter()
        .enumerate()
        .filter(|(i, _)| {
            !sets
                .iter()
                .enumerate()
                .any(|(j, other)| j != *i && sets[*i].len() < other.len() && sets[*i].is_subset(other))
        })
        .map(|(_, c)| c.clone())
        .collect();

    maximal.sort_by(|a, b| {
        a.length
            .partial_cmp(&b.length)
            .unwrap()
            .then_with(|| a.member_ids.cmp(&b.member_ids))
    });
    maximal
}

/// Whether `id` sits at either extreme of the candidate's member order.
fn is_extreme(candidate: &LineCandidate, id: ClusterId) -> bool {
    candidate.member_ids.first() == Some(&id) || candidate.member_ids.last() == Some(&id)
}

/// Select the row the robot should work first.
///
/// The chain: the cluster nearest the robot anchors the choice; among the
/// candidates containing it, prefer those where it sits at an extreme of
/// the line, and take the shortest (a row reads shorter than the diagonal
/// between two rows). Ties break by anchor distance, then member ids. If
/// the anchor is interior to every containing candidate, fall back to the
/// shortest containing candidate.
pub fn select_initial_row(
    candidates: &[LineCandidate],
    clusters: &[DetectionCluster],
    robot: Pose2D,
) -> Result<RowEstimate, RowError> {
    let robot_pos = robot.position();
    let anchor = clusters
        .iter()
        .min_by(|a, b| {
            distance(a.position, robot_pos)
                .partial_cmp(&distance(b.position, robot_pos))
                .unwrap()
                .then(a.id.cmp(&b.id))
        })
        .ok_or(RowError::NoRowFound)?;

    let containing: Vec<&LineCandidate> = candidates
        .iter()
        .filter(|c| c.member_ids.contains(&anchor.id))
        .collect();
    if containing.is_empty() {
        return Err(RowError::NoRowFound);
    }
    let extreme: Vec<&LineCandidate> = containing
        .iter()
        .copied()
        .filter(|c| is_extreme(c, anchor.id))
        .collect();
    let pool = if extreme.is_empty() { &containing } else { &extreme };

    // Every pooled candidate shares the same anchor, so the anchor-distance
    // tie-break is vacuous; length then member ids decide.
    let winner = pool
        .iter()
        .min_by(|a, b| {
            a.length
                .partial_cmp(&b.length)
                .unwrap()
                .then_with(|| a.member_ids.cmp(&b.member_ids))
        })
        .expect("pool is non-empty");

    Ok(RowEstimate {
        line: (*winner).clone(),
        anchor_id: anchor.id,
    })
}

/// Re-fit the tracked row against the current confirmed clusters.
///
/// Membership is every cluster within `epsilon` of the previous line
/// (reconstructed from the surviving previous members' current positions);
/// the direction is re-fit as the principal axis of the new membership with
/// its sign held continuous (`dot(new, old) > 0`).
pub fn refresh_row(
    estimate: &RowEstimate,
    clusters: &[DetectionCluster],
    config: &RowConfig,
) -> Result<RowEstimate, RowError> {
    let prev_dir = estimate.line.direction;
    let surviving: Vec<Point2> = estimate
        .line
        .member_ids
        .iter()
        .filter_map(|id| find_cluster(clusters, *id))
        .map(|c| c.position)
        .collect();
    if surviving.len() < 2 {
        return Err(RowError::RowLost {
            surviving: surviving.len(),
        });
    }
    let prev_line = fit_principal_line(&surviving).ok_or(RowError::RowLost {
        surviving: surviving.len(),
    })?;

    let members: Vec<DetectionCluster> = clusters
        .iter()
        .filter(|c| prev_line.distance_to(c.position) <= config.epsilon)
        .copied()
        .collect();
    if members.len() < 2 {
        return Err(RowError::RowLost {
            surviving: members.len(),
        });
    }

    // An isotropic refit has no unique axis; keep the previous direction.
    let candidate = build_candidate(&members, config.epsilon, Some(prev_dir))
        .or_else(|| {
            build_candidate_with_direction(&members, prev_line.centroid, prev_dir)
        })
        .ok_or(RowError::RowLost {
            surviving: members.len(),
        })?;

    let anchor_id = if candidate.member_ids.contains(&estimate.anchor_id) {
        estimate.anchor_id
    } else {
        candidate.member_ids[0]
    };
    Ok(RowEstimate {
        line: candidate,
        anchor_id,
    })
}

/// Fallback candidate construction along a fixed direction.
fn build_candidate_with_direction(
    members: &[DetectionCluster],
    centroid: Point2,
    direction: Vec2,
) -> Option<LineCandidate> {
    let line = PrincipalLine {
        centroid,
        direction,
    };
    let mut ordered: Vec<&DetectionCluster> = members.iter().collect();
    ordered.sort_by(|a, b| {
        line.projection_of(a.position)
            .partial_cmp(&line.projection_of(b.position))
            .unwrap()
            .then(a.id.cmp(&b.id))
    });
    let first = ordered.first()?.position;
    let last = ordered.last()?.position;
    let rms = (members
        .iter()
        .map(|c| line.distance_to(c.position).powi(2))
        .sum::<f64>()
        / members.len() as f64)
        .sqrt();
    Some(LineCandidate {
        member_ids: ordered.iter().map(|c| c.id).collect(),
        direction,
        length: distance(first, last),
        rms_perp_error: rms,
    })
}
