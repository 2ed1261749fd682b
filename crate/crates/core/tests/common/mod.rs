//! Independent reference implementations shared by the integration and
//! acceptance tests. Written for clarity, not speed, and kept free of calls
//! into the code they check.
#![allow(dead_code)]

use hodg::descriptors::{Channel, DescriptorConfig};
use hodg::encoding::GmmCodebook;
use hodg::media_io::{DepthFrame, GrayFrame};
use hodg::motion::{MotionField, MotionVector, Point, Trajectory};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn noise_gray(w: usize, h: usize, rng: &mut ChaCha8Rng) -> GrayFrame {
    GrayFrame::new(w, h, (0..w * h).map(|_| rng.random()).collect()).unwrap()
}

/// Depth in [500, 4500] mm with roughly `hole_rate` of samples set to 0.
pub fn noise_depth(w: usize, h: usize, hole_rate: f64, rng: &mut ChaCha8Rng) -> DepthFrame {
    let data = (0..w * h)
        .map(|_| {
            if rng.random_bool(hole_rate) {
                0
            } else {
                rng.random_range(500..=4500)
            }
        })
        .collect();
    DepthFrame::new(w, h, data).unwrap()
}

pub fn random_field(w: usize, h: usize, bs: usize, max: i32, rng: &mut ChaCha8Rng) -> MotionField {
    let (bx, by) = (w / bs, h / bs);
    MotionField {
        blocks_x: bx,
        blocks_y: by,
        block_size: bs,
        vectors: (0..bx * by)
            .map(|_| MotionVector::new(rng.random_range(-max..=max), rng.random_range(-max..=max)))
            .collect(),
    }
}

/// Trajectory with arbitrary in-bounds points (chaining is not needed by the
/// descriptor stage).
pub fn random_trajectory(w: usize, h: usize, start: usize, cfg: &DescriptorConfig, rng: &mut ChaCha8Rng) -> Trajectory {
    let half = (cfg.window / 2) as i32;
    let points = (0..cfg.traj_len)
        .map(|_| {
            Point::new(
                rng.random_range(half..=w as i32 - half),
                rng.random_range(half..=h as i32 - half),
            )
        })
        .collect();
    Trajectory {
        start_frame: start,
        points,
        valid: true,
    }
}

fn degrees(gx: f64, gy: f64) -> f64 {
    let d = gy.atan2(gx) * 180.0 / std::f64::consts::PI;
    let d = d.rem_euclid(360.0);
    if d >= 360.0 {
        0.0
    } else {
        d
    }
}

fn bin_of(deg: f64, bins: usize) -> usize {
    ((deg / (360.0 / bins as f64)).floor() as usize) % bins
}

/// `(magnitude, bin)` of the central-difference gradient of `v` at `(x, y)`.
/// Border pixels and pixels rejected by `skip` contribute nothing.
fn grad_sample(
    v: &dyn Fn(i64, i64) -> f64,
    x: i64,
    y: i64,
    w: i64,
    h: i64,
    bins: usize,
) -> Option<(f64, usize)> {
    if x <= 0 || y <= 0 || x >= w - 1 || y >= h - 1 {
        return None;
    }
    let gx = v(x + 1, y) - v(x - 1, y);
    let gy = v(x, y + 1) - v(x, y - 1);
    let m = (gx * gx + gy * gy).sqrt();
    (m > 0.0).then(|| (m, bin_of(degrees(gx, gy), bins)))
}

fn flow_at(field: &MotionField, x: i64, y: i64) -> (f64, f64) {
    let bs = field.block_size as i64;
    let (bx, by) = (x / bs, y / bs);
    if bx >= field.blocks_x as i64 || by >= field.blocks_y as i64 {
        return (0.0, 0.0);
    }
    let v = field.vectors[by as usize * field.blocks_x + bx as usize];
    (v.dx as f64, v.dy as f64)
}

fn has_hole_nearby(d: &DepthFrame, x: i64, y: i64) -> bool {
    for ny in y - 1..=y + 1 {
        for nx in x - 1..=x + 1 {
            if nx >= 0 && ny >= 0 && (nx as usize) < d.width && (ny as usize) < d.height && d.at(nx as usize, ny as usize) == 0 {
                return true;
            }
        }
    }
    false
}

/// Scalar brute-force descriptor of one channel: per-pixel sample, cell
/// lookup, accumulation, then l2 per temporal slice.
pub fn reference_channel(
    traj: &Trajectory,
    gray: &[GrayFrame],
    depth: &[DepthFrame],
    fields: &[MotionField],
    cfg: &DescriptorConfig,
    channel: Channel,
) -> Vec<f64> {
    let bins = if channel == Channel::Hof { cfg.hof_bins } else { cfg.orient_bins };
    let [nx, ny, nt] = cfg.grid;
    let [cx, cy, ct] = cfg.cell;
    let mut hist = vec![0.0; nx * ny * nt * bins];
    let half = (cfg.window / 2) as i64;
    for (t, p) in traj.points.iter().enumerate() {
        let f = traj.start_frame + t;
        let field = if f < fields.len() { fields.get(f) } else { fields.get(f.wrapping_sub(1)) };
        for wy in 0..cfg.window {
            for wx in 0..cfg.window {
                let x = p.x as i64 - half + wx as i64;
                let y = p.y as i64 - half + wy as i64;
                let sample: Option<(f64, usize)> = match channel {
                    Channel::Hog => {
                        let g = &gray[f];
                        let v = |x: i64, y: i64| g.at(x as usize, y as usize) as f64;
                        grad_sample(&v, x, y, g.width as i64, g.height as i64, bins)
                    }
                    Channel::Hodg => {
                        let d = &depth[f];
                        if has_hole_nearby(d, x, y) {
                            None
                        } else {
                            let v = |x: i64, y: i64| d.at(x as usize, y as usize) as f64;
                            grad_sample(&v, x, y, d.width as i64, d.height as i64, bins)
                        }
                    }
                    Channel::Hof => {
                        let (dx, dy) = flow_at(field.unwrap(), x, y);
                        let m = (dx * dx + dy * dy).sqrt();
                        if m < cfg.epsilon_zero_flow || m == 0.0 {
                            Some((1.0, bins - 1))
                        } else {
                            Some((m, bin_of(degrees(dx, dy), bins - 1)))
                        }
                    }
                    Channel::Mbhx | Channel::Mbhy => {
                        let fld = field.unwrap();
                        let pick_x = channel == Channel::Mbhx;
                        let v = |x: i64, y: i64| {
                            let (dx, dy) = flow_at(fld, x, y);
                            if pick_x {
                                dx
                            } else {
                                dy
                            }
                        };
                        let (w, h) = (depth.first().map_or(gray[0].width, |d| d.width), depth.first().map_or(gray[0].height, |d| d.height));
                        grad_sample(&v, x, y, w as i64, h as i64, bins)
                    }
                };
                if let Some((m, b)) = sample {
                    let cell = ((t / ct) * ny + wy / cy) * nx + wx / cx;
                    hist[cell * bins + b] += m;
                }
            }
        }
    }
    let slice = nx * ny * bins;
    for s in hist.chunks_mut(slice) {
        let n: f64 = s.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 0.0 {
            for v in s {
                *v /= n;
            }
        }
    }
    hist
}

/// Exhaustive SAD block matching with the documented tie-break: smallest SAD,
/// then smallest |dx| + |dy|, then first in (dy, dx) row-major scan order.
pub fn exhaustive_sad(prev: &GrayFrame, cur: &GrayFrame, bs: usize, range: i32) -> Vec<MotionVector> {
    let (w, h) = (prev.width as i32, prev.height as i32);
    let mut out = Vec::new();
    for by in 0..prev.height / bs {
        for bx in 0..prev.width / bs {
            let (x0, y0) = ((bx * bs) as i32, (by * bs) as i32);
            let mut best: Option<(u64, i32, MotionVector)> = None;
            for dy in -range..=range {
                for dx in -range..=range {
                    if x0 + dx < 0 || y0 + dy < 0 || x0 + dx + bs as i32 > w || y0 + dy + bs as i32 > h {
                        continue;
                    }
                    let mut sad = 0u64;
                    for j in 0..bs as i32 {
                        for i in 0..bs as i32 {
                            let a = prev.at((x0 + i) as usize, (y0 + j) as usize) as i64;
                            let b = cur.at((x0 + dx + i) as usize, (y0 + dy + j) as usize) as i64;
                            sad += (a - b).unsigned_abs();
                        }
                    }
                    let key = (sad, dx.abs() + dy.abs());
                    if best.is_none_or(|(s, l, _)| key < (s, l)) {
                        best = Some((sad, key.1, MotionVector::new(dx, dy)));
                    }
                }
            }
            out.push(best.unwrap().2);
        }
    }
    out
}

/// AP by explicit ranking: descending score, ties by ascending index.
pub fn brute_force_ap(scores: &[f64], positives: &[bool]) -> f64 {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    // insertion sort keeps the reference independent of the library's sort
    for i in 1..idx.len() {
        let mut j = i;
        while j > 0 {
            let (a, b) = (idx[j - 1], idx[j]);
            let before = scores[b] > scores[a] || (scores[b] == scores[a] && b < a);
            if !before {
                break;
            }
            idx.swap(j - 1, j);
            j -= 1;
        }
    }
    let total = positives.iter().filter(|&&p| p).count();
    let mut hits = 0;
    let mut sum = 0.0;
    for (r, &i) in idx.iter().enumerate() {
        if positives[i] {
            hits += 1;
            sum += hits as f64 / (r + 1) as f64;
        }
    }
    sum / total as f64
}

/// Total log-likelihood `Σ_i log Σ_k w_k N(x_i; μ_k, diag σ²_k)`.
pub fn gmm_total_log_likelihood(cb: &GmmCodebook, xs: &[Vec<f64>]) -> f64 {
    let ln2pi = (2.0 * std::f64::consts::PI).ln();
    xs.iter()
        .map(|x| {
            let terms: Vec<f64> = (0..cb.k)
                .map(|k| {
                    let mut s = cb.weights[k].ln();
                    for d in 0..cb.d {
                        let var = cb.variances[k * cb.d + d];
                        let diff = x[d] - cb.means[k * cb.d + d];
                        s -= 0.5 * (ln2pi + var.ln() + diff * diff / var);
                    }
                    s
                })
                .collect();
            let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
        })
        .collect::<Vec<_>>()
        .iter()
        .sum()
}

/// A random diagonal GMM with well-conditioned variances.
pub fn random_codebook(k: usize, d: usize, rng: &mut ChaCha8Rng) -> GmmCodebook {
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.5..2.0)).collect();
    let total: f64 = raw.iter().sum();
    GmmCodebook {
        k,
        d,
        weights: raw.iter().map(|w| w / total).collect(),
        means: (0..k * d).map(|_| rng.random_range(-2.0..2.0)).collect(),
        variances: (0..k * d).map(|_| rng.random_range(0.5..2.0)).collect(),
        seed: 0,
        variance_floor: 1e-6,
        channel: None,
    }
}

/// Shifts `src` by `(sx, sy)`: `out(x, y) = src(x - sx, y - sy)`, with pixels
/// that would come from outside filled from `fill`.
pub fn shifted(src: &GrayFrame, sx: i32, sy: i32, fill: &GrayFrame) -> GrayFrame {
    let (w, h) = (src.width as i32, src.height as i32);
    let data = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .map(|(x, y)| {
            let (ox, oy) = (x - sx, y - sy);
            if ox >= 0 && oy >= 0 && ox < w && oy < h {
                src.at(ox as usize, oy as usize)
            } else {
                fill.at(x as usize, y as usize)
            }
        })
        .collect();
    GrayFrame::new(src.width, src.height, data).unwrap()
}
