//! Block motion fields, interest points and trajectories.
//!
//! A [`MotionField`] holds one integer displacement per full block, mapping
//! frame `t` to frame `t + 1`, the same quantity a video codec stores for
//! inter-coded macroblocks. Fields come either from [`estimate_motion`] or
//! from a text sidecar ([`parse_motion_sidecar`]).

mod estimate;
mod sidecar;
mod trajectory;

pub use estimate::{estimate_motion, estimate_sequence_motion, sad};
pub use sidecar::{format_motion_sidecar, parse_motion_sidecar, read_motion_sidecar};
pub use trajectory::{
    build_trajectories, select_interest_points, validate_trajectory, Trajectory,
    TrajectoryParams,
};

use serde::{Deserialize, Serialize};

pub const DEFAULT_BLOCK_SIZE: usize = 16;
pub const DEFAULT_SEARCH_RANGE: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct MotionVector {
    pub dx: i32,
    pub dy: i32,
}

impl MotionVector {
    pub const ZERO: MotionVector = MotionVector { dx: 0, dy: 0 };

    pub fn new(dx: i32, dy: i32) -> Self {
        Self { dx, dy }
    }

    pub fn magnitude(self) -> f64 {
        ((self.dx as f64).powi(2) + (self.dy as f64).powi(2)).sqrt()
    }

    pub fn l1(self) -> i32 {
        self.dx.abs() + self.dy.abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Point {
    pub x: i32,
    pub y: i32,
}

impl Point {
    pub fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }

    pub fn offset(self, v: MotionVector) -> Point {
        Point::new(self.x + v.dx, self.y + v.dy)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MotionField {
    pub blocks_x: usize,
    pub blocks_y: usize,
    pub block_size: usize,
    /// Row-major, `blocks_x * blocks_y` entries.
    pub vectors: Vec<MotionVector>,
}

impl MotionField {
    pub fn zeros(blocks_x: usize, blocks_y: usize, block_size: usize) -> Self {
        Self {
            blocks_x,
            blocks_y,
            block_size,
            vectors: vec![MotionVector::ZERO; blocks_x * blocks_y],
        }
    }

    /// Field with the same vector in every block.
    pub fn uniform(blocks_x: usize, blocks_y: usize, block_size: usize, v: MotionVector) -> Self {
        Self {
            blocks_x,
            blocks_y,
            block_size,
            vectors: vec![v; blocks_x * blocks_y],
        }
    }

    #[inline]
    pub fn at(&self, bx: usize, by: usize) -> MotionVector {
        self.vectors[by * self.blocks_x + bx]
    }

    /// Vector of the block containing pixel `(x, y)`, or `None` for pixels
    /// outside the full-block grid.
    #[inline]
    pub fn vector_at_pixel(&self, x: i32, y: i32) -> Option<MotionVector> {
        if x < 0 || y < 0 {
            return None;
        }
        let (bx, by) = (x as usize / self.block_size, y as usize / self.block_size);
        (bx < self.blocks_x && by < self.blocks_y).then(|| self.at(bx, by))
    }

    /// Block center in pixels.
    pub fn block_center(&self, bx: usize, by: usize) -> Point {
        let half = self.block_size / 2;
        Point::new(
            (bx * self.block_size + half) as i32,
            (by * self.block_size + half) as i32,
        )
    }
}
