use super::{MotionField, MotionVector};
use crate::error::{Error, Result};
use crate::media_io::GrayFrame;
use crate::par;

/// Sum of absolute differences between the `size`×`size` block of `a` at
/// `(ax, ay)` and the block of `b` at `(bx, by)`. Both blocks must be in bounds.
pub fn sad(a: &GrayFrame, ax: usize, ay: usize, b: &GrayFrame, bx: usize, by: usize, size: usize) -> u32 {
    let mut total = 0u32;
    for row in 0..size {
        let ra = &a.data[(ay + row) * a.width + ax..][..size];
        let rb = &b.data[(by + row) * b.width + bx..][..size];
        total += ra
            .iter()
            .zip(rb)
            .map(|(&p, &q)| p.abs_diff(q) as u32)
            .sum::<u32>();
    }
    total
}

// Same as `sad` but stops once the running total exceeds `limit`.
fn sad_bounded(a: &GrayFrame, ax: usize, ay: usize, b: &GrayFrame, bx: usize, by: usize, size: usize, limit: u32) -> u32 {
    let mut total = 0u32;
    for row in 0..size {
        let ra = &a.data[(ay + row) * a.width + ax..][..size];
        let rb = &b.data[(by + row) * b.width + bx..][..size];
        total += ra
            .iter()
            .zip(rb)
            .map(|(&p, &q)| p.abs_diff(q) as u32)
            .sum::<u32>();
        if total > limit {
            break;
        }
    }
    total
}

fn best_vector(prev: &GrayFrame, cur: &GrayFrame, x0: usize, y0: usize, size: usize, range: i32) -> MotionVector {
    let (w, h) = (cur.width as i32, cur.height as i32);
    let mut best = MotionVector::ZERO;
    let mut best_sad = u32::MAX;
    // candidate scan order: dy outer, dx inner
    for dy in -range..=range {
        let y = y0 as i32 + dy;
        if y < 0 || y + size as i32 > h {
            continue;
        }
        for dx in -range..=range {
            let x = x0 as i32 + dx;
            if x < 0 || x + size as i32 > w {
                continue;
            }
            let cand = MotionVector::new(dx, dy);
            let s = sad_bounded(prev, x0, y0, cur, x as usize, y as usize, size, best_sad);
            if s < best_sad || (s == best_sad && cand.l1() < best.l1()) {
                best_sad = s;
                best = cand;
            }
        }
    }
    best
}

/// Exhaustive block matching.
///
/// Every full `block_size` block of `prev` gets the displacement in
/// `[-search_range, search_range]²` minimizing SAD against `cur`. Candidates
/// whose displaced block leaves the frame are not considered. Ties go to the
/// smaller `|dx| + |dy|`, then to the earlier candidate in row-major order.
pub fn estimate_motion(
    prev: &GrayFrame,
    cur: &GrayFrame,
    block_size: usize,
    search_range: usize,
) -> Result<MotionField> {
    if (prev.width, prev.height) != (cur.width, cur.height) {
        return Err(Error::invalid(format!(
            "frame size mismatch: {}x{} vs {}x{}",
            prev.width, prev.height, cur.width, cur.height
        )));
    }
    if block_size == 0 || prev.width < block_size || prev.height < block_size {
        return Err(Error::invalid(format!(
            "frame {}x{} smaller than one {block_size}px block",
            prev.width, prev.height
        )));
    }
    if search_range < 1 {
        return Err(Error::invalid("search range must be at least 1"));
    }
    let blocks_x = prev.width / block_size;
    let blocks_y = prev.height / block_size;
    let range = search_range as i32;
    let vectors = par::map_range(0..blocks_x * blocks_y, |i| {
        let (bx, by) = (i % blocks_x, i / blocks_x);
        best_vector(prev, cur, bx * block_size, by * block_size, block_size, range)
    });
    Ok(MotionField {
        blocks_x,
        blocks_y,
        block_size,
        vectors,
    })
}

/// Motion fields for every consecutive frame pair.
pub fn estimate_sequence_motion(
    frames: &[GrayFrame],
    block_size: usize,
    search_range: usize,
) -> Result<Vec<MotionField>> {
    if frames.len() < 2 {
        return Ok(Vec::new());
    }
    par::map_range(0..frames.len() - 1, |t| {
        estimate_motion(&frames[t], &frames[t + 1], block_size, search_range)
    })
    .into_iter()
    .collect()
}
