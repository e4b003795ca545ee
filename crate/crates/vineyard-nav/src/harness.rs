//! Monte-Carlo trial batches and their artifacts.
//!
//! A batch runs N independent trials of one config with derived seeds,
//! scores each visit against the ideal waypoint computed from ground
//! truth, and writes per-trunk errors as CSV, a JSON summary, a static SVG
//! histogram, and one JSONL trace per trial. Results merge by trial id, so
//! the output bytes do not depend on scheduling.

use crate::geometry::{distance, offset_waypoint, trunk_frame, Point2, Pose2D, Side, Vec2};
use crate::navigator::{NavConfig, NavEvent};
use crate::rows::fit_principal_line;
use crate::simulator::{run_trial, SimConfig, SimError, TrialTrace};
use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("geometry error: {0}")]
    Geometry(#[from] crate::geometry::GeometryError),
    #[error("trace parse error at line {line}: {message}")]
    TraceParse { line: usize, message: String },
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Outcome for one ground-truth trunk in one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrunkOutcome {
    pub trunk_id: usize,
    pub visited: bool,
    /// Distance between the achieved pose and the ideal waypoint for this
    /// trunk, meters. Present iff visited.
    pub error_m: Option<f64>,
}

/// Scored result of a single trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial_id: u32,
    pub outcomes: Vec<TrunkOutcome>,
    pub visited_count: usize,
    pub skipped_count: usize,
    pub wall_time_s: f64,
    pub completed: bool,
}

/// Aggregate statistics over one batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub trials: u32,
    pub trunk_count: usize,
    pub completed_trials: u32,
    /// Fraction of (trial, trunk) pairs that were visited.
    pub visit_rate: f64,
    /// Mean of per-trunk errors over all visits, meters. None if nothing
    /// was visited.
    pub mean_error_m: Option<f64>,
    /// Sample standard deviation of per-trunk errors, meters.
    pub std_error_m: Option<f64>,
    pub csv_path: PathBuf,
}

/// Batch results plus everything needed to decide the exit code.
#[derive(Debug, Clone)]
pub struct BatchReport {
    pub summary: BatchSummary,
    pub results: Vec<TrialResult>,
    /// True iff every trial reached row-done.
    pub all_completed: bool,
}

/// Derive the per-trial seed from the batch seed (splitmix64 step).
pub fn trial_seed(base: u64, trial: u32) -> u64 {
    let mut z = base.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(u64::from(trial) + 1));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Ideal waypoint for a ground-truth trunk: lateral offset from the truth
/// row line, mirroring what the navigator aims for with perfect estimates.
pub fn ideal_waypoint(
    trunk: Point2,
    direction: Vec2,
    side: Side,
    nav: &NavConfig,
) -> Result<Pose2D, crate::geometry::GeometryError> {
    let frame = trunk_frame(trunk, direction)?;
    let wp = offset_waypoint(frame, nav.offset_d, side)?;
    if nav.along_offset == 0.0 {
        return Ok(wp);
    }
    let shifted = wp.position().offset(direction.scaled(nav.along_offset));
    Ok(Pose2D::new(shifted.x, shifted.y, wp.yaw))
}

/// Score a finished trial against ground truth.
///
/// Visits are associated to the nearest truth trunk within half the trunk
/// spacing (via the cluster position the navigator aimed at); the error is
/// the distance from the achieved pose to that trunk's ideal waypoint. A
/// trunk claimed by no visit counts as skipped.
pub fn evaluate_trial(
    config: &SimConfig,
    trace: &TrialTrace,
    trial_id: u32,
    wall_time_s: f64,
) -> Result<TrialResult, HarnessError> {
    let world = config.world.build()?;
    let trunks = world.trunks();
    let truth_line = fit_principal_line(trunks);
    let direction = truth_line
        .map(|l| l.direction)
        .unwrap_or(Vec2::new(1.0, 0.0));
    let centroid = truth_line
        .map(|l| l.centroid)
        .unwrap_or_else(|| trunks[0]);

    // The operating side comes from where the robot actually stood at the
    // first visit.
    let side = trace
        .visits
        .first()
        .map(|v| {
            if direction.cross(centroid.to(v.achieved.position())) >= 0.0 {
                Side::Left
            } else {
                Side::Right
            }
        })
        .unwrap_or(Side::Left);

    let gate = world.trunk_spacing / 2.0;
    let mut errors: Vec<Option<f64>> = vec![None; trunks.len()];
    for visit in &trace.visits {
        let nearest = trunks
            .iter()
            .enumerate()
            .map(|(i, t)| (i, distance(*t, visit.cluster_position)))
            .filter(|(_, d)| *d <= gate)
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
        if let Some((i, _)) = nearest {
            if errors[i].is_none() {
                let ideal = ideal_waypoint(trunks[i], direction, side, &config.nav)?;
                errors[i] = Some(distance(visit.achieved.position(), ideal.position()));
            }
        }
    }

    let outcomes: Vec<TrunkOutcome> = errors
        .iter()
        .enumerate()
        .map(|(trunk_id, e)| TrunkOutcome {
            trunk_id,
            visited: e.is_some(),
            error_m: *e,
        })
        .collect();
    let visited_count = outcomes.iter().filter(|o| o.visited).count();
    Ok(TrialResult {
        trial_id,
        skipped_count: outcomes.len() - visited_count,
        visited_count,
        outcomes,
        wall_time_s,
        completed: trace.completed,
    })
}

fn mean_and_std(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    (Some(mean), Some(std))
}

/// Render results as CSV (`trial_id,trunk_id,error_m,visited`); the error
/// column is empty for skipped trunks. Uses shortest-round-trip float
/// formatting so recomputed statistics match exactly.
pub fn results_to_csv(results: &[TrialResult]) -> String {
    let mut out = String::from("trial_id,trunk_id,error_m,visited\n");
    for r in results {
        for o in &r.outcomes {
            match o.error_m {
                Some(e) => {
                    let _ = writeln!(out, "{},{},{},{}", r.trial_id, o.trunk_id, e, o.visited);
                }
                None => {
                    let _ = writeln!(out, "{},{},,{}", r.trial_id, o.trunk_id, o.visited);
                }
            }
        }
    }
    out
}

/// Run `trials` independent simulations and write all batch artifacts
/// under `out_dir`: `errors.csv`, `summary.json`, `errors_histogram.svg`,
/// and `traces/trial_NNNN.jsonl`.
///
/// A trial that panics is recorded as incomplete (all trunks skipped) and
/// the batch keeps going, so partial results survive.
pub fn run_batch(
    config: &SimConfig,
    trials: u32,
    seed: u64,
    out_dir: &Path,
) -> Result<BatchReport, HarnessError> {
    config.validate()?;
    let traces_dir = out_dir.join("traces");
    fs::create_dir_all(&traces_dir)?;

    let mut raw: Vec<(u32, Option<TrialTrace>, f64)> = (0..trials)
        .into_par_iter()
        .map(|trial_id| {
            let started = Instant::now();
            let outcome = catch_unwind(AssertUnwindSafe(|| {
                run_trial(config, trial_seed(seed, trial_id))
            }));
            let wall = started.elapsed().as_secs_f64();
            match outcome {
                Ok(Ok(trace)) => (trial_id, Some(trace), wall),
                Ok(Err(e)) => {
                    warn!("trial {trial_id} failed: {e}");
                    (trial_id, None, wall)
                }
                Err(_) => {
                    warn!("trial {trial_id} panicked");
                    (trial_id, None, wall)
                }
            }
        })
        .collect();
    raw.sort_by_key(|(id, _, _)| *id);

    let trunk_count = config.world.build()?.trunks().len();
    let mut results = Vec::with_capacity(raw.len());
    for (trial_id, trace, wall) in &raw {
        let result = match trace {
            Some(trace) => {
                let path = traces_dir.join(format!("trial_{trial_id:04}.jsonl"));
                write_trace(&trace.events, &path)?;
                evaluate_trial(config, trace, *trial_id, *wall)?
            }
            None => TrialResult {
                trial_id: *trial_id,
                outcomes: (0..trunk_count)
                    .map(|trunk_id| TrunkOutcome {
                        trunk_id,
                        visited: false,
                        error_m: None,
                    })
                    .collect(),
                visited_count: 0,
                skipped_count: trunk_count,
                wall_time_s: *wall,
                completed: false,
            },
        };
        results.push(result);
    }

    let csv_path = out_dir.join("errors.csv");
    fs::write(&csv_path, results_to_csv(&results))?;

    let errors: Vec<f64> = results
        .iter()
        .flat_map(|r| r.outcomes.iter().filter_map(|o| o.error_m))
        .collect();
    let (mean_error_m, std_error_m) = mean_and_std(&errors);
    let visited: usize = results.iter().map(|r| r.visited_count).sum();
    let total = trials as usize * trunk_count;
    let summary = BatchSummary {
        trials,
        trunk_count,
        completed_trials: results.iter().filter(|r| r.completed).count() as u32,
        visit_rate: if total == 0 {
            0.0
        } else {
            visited as f64 / total as f64
        },
        mean_error_m,
        std_error_m,
        csv_path: csv_path.clone(),
    };
    fs::write(
        out_dir.join("summary.json"),
        serde_json::to_string_pretty(&summary)?,
    )?;
    write_histogram_svg(
        &errors,
        "Per-trunk waypoint error (m)",
        &out_dir.join("errors_histogram.svg"),
    )?;

    let all_completed = results.iter().all(|r| r.completed);
    Ok(BatchReport {
        summary,
        results,
        all_completed,
    })
}

/// Write transition events as one JSON record per line.
pub fn write_trace(events: &[NavEvent], path: &Path) -> Result<(), HarnessError> {
    let mut out = String::new();
    for event in events {
        let _ = writeln!(out, "{}", serde_json::to_string(event)?);
    }
    fs::write(path, out)?;
    Ok(())
}

/// Render a trace file as a human-readable timeline, one line per
/// transition. Pure read; parse failures report the 1-based line number.
pub fn replay(path: &Path) -> Result<String, HarnessError> {
    let text = fs::read_to_string(path)?;
    let mut out = String::new();
    for (index, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let event: NavEvent =
            serde_json::from_str(line).map_err(|e| HarnessError::TraceParse {
                line: index + 1,
                message: e.to_string(),
            })?;
        let _ = write!(
            out,
            "[{:>8.2}s] {:<14} robot=({:.3}, {:.3}, {:.1} deg)",
            event.t,
            event.state.to_string(),
            event.robot.x,
            event.robot.y,
            event.robot.yaw.to_degrees(),
        );
        if let Some(target) = event.target {
            let _ = write!(out, " target={target}");
        }
        if let Some(wp) = event.waypoint {
            let _ = write!(out, " waypoint=({:.3}, {:.3})", wp.x, wp.y);
        }
        out.push('\n');
    }
    Ok(out)
}

/// Write a static SVG histogram of the error samples.
pub fn write_histogram_svg(values: &[f64], title: &str, path: &Path) -> std::io::Result<()> {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const MARGIN: f64 = 48.0;
    const BINS: usize = 20;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(
        svg,
        r#"<rect width="{W}" height="{H}" fill="white" stroke="none"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="24" font-family="monospace" font-size="14">{} (n={})</text>"#,
        MARGIN,
        title,
        values.len()
    );

    if values.is_empty() {
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-family="monospace" font-size="12">no samples</text>"#,
            W / 2.0 - 40.0,
            H / 2.0
        );
    } else {
        let max_v = values.iter().cloned().fold(0.0f64, f64::max).max(1e-9);
        let hi = max_v * 1.05;
        let mut counts = [0usize; BINS];
        for v in values {
            let bin = ((v / hi) * BINS as f64).floor() as usize;
            counts[bin.min(BINS - 1)] += 1;
        }
        let max_count = counts.iter().copied().max().unwrap_or(1).max(1);
        let plot_w = W - 2.0 * MARGIN;
        let plot_h = H - 2.0 * MARGIN;
        let bar_w = plot_w / BINS as f64;
        for (i, count) in counts.iter().enumerate() {
            let bar_h = plot_h * (*count as f64 / max_count as f64);
            let x = MARGIN + i as f64 * bar_w;
            let y = H - MARGIN - bar_h;
            let _ = writeln!(
                svg,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="seagreen" stroke="white"/>"#,
                x,
                y,
                bar_w,
                bar_h
            );
        }
        // Axes and range labels.
        let _ = writeln!(
            svg,
            r#"<line x1="{m}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/>"#,
            m = MARGIN,
            b = H - MARGIN,
            r = W - MARGIN
        );
        let _ = writeln!(
            svg,
            r#"<line x1="{m}" y1="{t}" x2="{m}" y2="{b}" stroke="black"/>"#,
            m = MARGIN,
            t = MARGIN,
            b = H - MARGIN
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-family="monospace" font-size="11">0</text>"#,
            MARGIN - 4.0,
            H - MARGIN + 14.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-family="monospace" font-size="11">{:.3}</text>"#,
            W - MARGIN - 24.0,
            H - MARGIN + 14.0,
            hi
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-family="monospace" font-size="11">{}</text>"#,
            MARGIN - 36.0,
            MARGIN + 8.0,
            max_count
        );
    }
    svg.push_str("</svg>\n");
    fs::write(path, svg)
}
