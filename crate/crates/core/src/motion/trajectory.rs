use serde::{Deserialize, Serialize};

use super::{MotionField, Point};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryParams {
    /// Frames between trajectory start frames.
    pub stride: usize,
    /// Minimum vector magnitude (pixels) for a block to seed a trajectory.
    pub tau: f64,
    /// Frames per trajectory.
    pub length: usize,
    /// Side of the square support window centered on each point.
    pub window: usize,
}

impl Default for TrajectoryParams {
    fn default() -> Self {
        Self {
            stride: 5,
            tau: 1.0,
            length: 15,
            window: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    pub start_frame: usize,
    /// One position per frame, `start_frame..start_frame + points.len()`.
    pub points: Vec<Point>,
    pub valid: bool,
}

impl Trajectory {
    pub fn mean_position(&self) -> (f64, f64) {
        let n = self.points.len().max(1) as f64;
        let (sx, sy) = self
            .points
            .iter()
            .fold((0.0, 0.0), |(sx, sy), p| (sx + p.x as f64, sy + p.y as f64));
        (sx / n, sy / n)
    }
}

/// Centers of every block whose vector magnitude is at least `tau`, row-major.
pub fn select_interest_points(field: &MotionField, tau: f64) -> Vec<Point> {
    let mut out = Vec::new();
    for by in 0..field.blocks_y {
        for bx in 0..field.blocks_x {
            if field.at(bx, by).magnitude() >= tau {
                out.push(field.block_center(bx, by));
            }
        }
    }
    out
}

#[inline]
fn window_inside(p: Point, half: i32, width: i32, height: i32) -> bool {
    p.x - half >= 0 && p.x + half <= width && p.y - half >= 0 && p.y + half <= height
}

fn chain(
    fields: &[MotionField],
    start: usize,
    seed: Point,
    dims: (usize, usize),
    params: &TrajectoryParams,
) -> Option<Trajectory> {
    let half = (params.window / 2) as i32;
    let (w, h) = (dims.0 as i32, dims.1 as i32);
    let mut points = Vec::with_capacity(params.length);
    let mut p = seed;
    for t in 0..params.length {
        if !window_inside(p, half, w, h) {
            return None;
        }
        points.push(p);
        if t + 1 < params.length {
            // points outside the full-block grid have no vector to follow
            p = p.offset(fields[start + t].vector_at_pixel(p.x, p.y)?);
        }
    }
    Some(Trajectory {
        start_frame: start,
        points,
        valid: true,
    })
}

/// Seeds trajectories at the interest points of every `stride`-th frame and
/// follows the containing block's vector for `length - 1` steps. Any
/// trajectory whose window leaves the frame at some step is dropped, as is
/// one that steps outside the full-block grid.
///
/// `fields[t]` maps frame `t` to `t + 1`. Output is ordered by start frame,
/// then by seed point in row-major block order.
pub fn build_trajectories(
    fields: &[MotionField],
    dims: (usize, usize),
    params: &TrajectoryParams,
) -> Vec<Trajectory> {
    let steps = params.length.saturating_sub(1);
    let stride = params.stride.max(1);
    if params.length == 0 || fields.len() < steps {
        return Vec::new();
    }
    let starts: Vec<usize> = (0..=fields.len() - steps).step_by(stride).collect();
    par::map(&starts, |&s| {
        let Some(field) = fields.get(s) else {
            return Vec::new();
        };
        select_interest_points(field, params.tau)
            .into_iter()
            .filter_map(|seed| chain(fields, s, seed, dims, params))
            .collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect()
}

/// Re-checks the chaining and window invariants; returns one message per violation.
pub fn validate_trajectory(
    traj: &Trajectory,
    fields: &[MotionField],
    dims: (usize, usize),
    params: &TrajectoryParams,
) -> Vec<String> {
    let mut out = Vec::new();
    if traj.points.len() != params.length {
        out.push(format!("expected {} points, got {}", params.length, traj.points.len()));
    }
    let half = (params.window / 2) as i32;
    for (t, p) in traj.points.iter().enumerate() {
        if traj.valid && !window_inside(*p, half, dims.0 as i32, dims.1 as i32) {
            out.push(format!("frame {t}: window at ({}, {}) leaves frame", p.x, p.y));
        }
    }
    for (t, pair) in traj.points.windows(2).enumerate() {
        let expected = fields
            .get(traj.start_frame + t)
            .and_then(|f| f.vector_at_pixel(pair[0].x, pair[0].y))
            .map(|v| pair[0].offset(v));
        if expected != Some(pair[1]) {
            out.push(format!("frame {t}: chain broken, next point {:?} expected {expected:?}", pair[1]));
        }
    }
    out
}
