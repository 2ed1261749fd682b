use std::collections::BTreeMap;
use std::sync::Arc;

use super::gradient::depth_invalid_mask;
use super::histogram::{normalize_slices, orientation_bin, orientation_degrees};
use super::{Channel, ChannelMask, DescriptorConfig, Plane, TrajectoryDescriptor};
use crate::error::{Error, Result};
use crate::media_io::{DepthFrame, GrayFrame};
use crate::motion::{MotionField, Trajectory};
use crate::par;

/// Frames and motion a sequence's descriptors are computed from. `gray` may be
/// empty when only depth channels are requested, and `fields` when no flow
/// channel is.
#[derive(Debug, Clone, Copy)]
pub struct ExtractionInput<'a> {
    pub gray: &'a [GrayFrame],
    pub depth: &'a [DepthFrame],
    pub fields: &'a [MotionField],
}

impl ExtractionInput<'_> {
    fn frame_count(&self) -> usize {
        self.depth.len().max(self.gray.len())
    }

    fn dims(&self) -> Option<(usize, usize)> {
        self.depth
            .first()
            .map(|d| (d.width, d.height))
            .or_else(|| self.gray.first().map(|g| (g.width, g.height)))
    }

    /// Flow for frame `f`: the field mapping `f` to `f + 1`, or for the last
    /// frame of a sequence the field arriving at it.
    fn field_for(&self, f: usize) -> Option<&MotionField> {
        self.fields
            .get(f)
            .or_else(|| f.checked_sub(1).and_then(|p| self.fields.get(p)))
    }
}

/// Per-pixel bin index and weight for one channel of one frame.
#[derive(Debug, Clone)]
struct BinnedPlane {
    width: usize,
    bin: Vec<u8>,
    weight: Vec<f64>,
}

/// Binned per-pixel inputs for every requested channel of one frame.
#[derive(Debug, Clone, Default)]
pub struct FrameFeatures {
    planes: [Option<BinnedPlane>; 5],
}

fn binned_gradients(image: &Plane, suppress: Option<&[bool]>, bins: usize) -> BinnedPlane {
    let (w, h) = (image.width, image.height);
    let mut bin = vec![0u8; w * h];
    let mut weight = vec![0.0; w * h];
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let i = y * w + x;
            if suppress.is_some_and(|m| m[i]) {
                continue;
            }
            let dx = image.data[i + 1] - image.data[i - 1];
            let dy = image.data[i + w] - image.data[i - w];
            let mag = dx.hypot(dy);
            if mag > 0.0 {
                weight[i] = mag;
                bin[i] = orientation_bin(orientation_degrees(dx, dy), bins) as u8;
            }
        }
    }
    BinnedPlane { width: w, bin, weight }
}

fn binned_flow(field: &MotionField, w: usize, h: usize, cfg: &DescriptorConfig) -> BinnedPlane {
    let zero_bin = (cfg.hof_bins - 1) as u8;
    let orient_bins = cfg.hof_bins - 1;
    let mut bin = vec![zero_bin; w * h];
    let mut weight = vec![1.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let v = field.vector_at_pixel(x as i32, y as i32).unwrap_or_default();
            let (dx, dy) = (v.dx as f64, v.dy as f64);
            let mag = dx.hypot(dy);
            if mag >= cfg.epsilon_zero_flow && mag > 0.0 {
                let i = y * w + x;
                weight[i] = mag;
                bin[i] = orientation_bin(orientation_degrees(dx, dy), orient_bins) as u8;
            }
        }
    }
    BinnedPlane { width: w, bin, weight }
}

fn flow_component(field: &MotionField, w: usize, h: usize, pick: impl Fn(i32, i32) -> i32) -> Plane {
    Plane::from_fn(w, h, |x, y| {
        let v = field.vector_at_pixel(x as i32, y as i32).unwrap_or_default();
        pick(v.dx, v.dy) as f64
    })
}

impl FrameFeatures {
    /// Computes the binned inputs for frame `f`.
    pub fn compute(input: &ExtractionInput<'_>, f: usize, cfg: &DescriptorConfig, mask: ChannelMask) -> Result<Self> {
        let (w, h) = input
            .dims()
            .ok_or_else(|| Error::invalid("no frames to extract from"))?;
        let mut planes: [Option<BinnedPlane>; 5] = Default::default();
        if mask.contains(Channel::Hog) {
            let g = input
                .gray
                .get(f)
                .ok_or_else(|| Error::invalid(format!("gray frame {f} out of range")))?;
            planes[Channel::Hog.index()] = Some(binned_gradients(&Plane::from_gray(g), None, cfg.orient_bins));
        }
        if mask.contains(Channel::Hodg) {
            let d = input
                .depth
                .get(f)
                .ok_or_else(|| Error::invalid(format!("depth frame {f} out of range")))?;
            let invalid = depth_invalid_mask(d);
            planes[Channel::Hodg.index()] =
                Some(binned_gradients(&Plane::from_depth(d), Some(&invalid), cfg.orient_bins));
        }
        if mask.needs_flow() {
            let field = input
                .field_for(f)
                .ok_or_else(|| Error::invalid(format!("no motion field for frame {f}")))?;
            if mask.contains(Channel::Hof) {
                planes[Channel::Hof.index()] = Some(binned_flow(field, w, h, cfg));
            }
            if mask.contains(Channel::Mbhx) {
                let p = flow_component(field, w, h, |dx, _| dx);
                planes[Channel::Mbhx.index()] = Some(binned_gradients(&p, None, cfg.orient_bins));
            }
            if mask.contains(Channel::Mbhy) {
                let p = flow_component(field, w, h, |_, dy| dy);
                planes[Channel::Mbhy.index()] = Some(binned_gradients(&p, None, cfg.orient_bins));
            }
        }
        Ok(Self { planes })
    }
}

/// Unnormalized `(t, y, x, bin)` cell histograms of one channel along a
/// trajectory. `frames[t]` holds the features of frame `start_frame + t`.
pub fn accumulate_channel(
    traj: &Trajectory,
    frames: &[&FrameFeatures],
    cfg: &DescriptorConfig,
    channel: Channel,
) -> Vec<f64> {
    let bins = cfg.bins(channel);
    let [nx, ny, _] = cfg.grid;
    let [cx, cy, ct] = cfg.cell;
    let half = (cfg.window / 2) as i32;
    let mut hist = vec![0.0; cfg.channel_len(channel)];
    for (t, (p, feats)) in traj.points.iter().zip(frames).enumerate() {
        let Some(plane) = &feats.planes[channel.index()] else {
            continue;
        };
        let slice = t / ct;
        let x0 = (p.x - half) as usize;
        let y0 = (p.y - half) as usize;
        for wy in 0..cfg.window {
            let row = (y0 + wy) * plane.width + x0;
            let cell_row = (slice * ny + wy / cy) * nx;
            let bins_row = &plane.bin[row..row + cfg.window];
            let weight_row = &plane.weight[row..row + cfg.window];
            for (wx, (&b, &wgt)) in bins_row.iter().zip(weight_row).enumerate() {
                if wgt != 0.0 {
                    hist[(cell_row + wx / cx) * bins + b as usize] += wgt;
                }
            }
        }
    }
    hist
}

fn check_trajectory(traj: &Trajectory, input: &ExtractionInput<'_>, cfg: &DescriptorConfig, mask: ChannelMask) -> Result<()> {
    if !traj.valid {
        return Err(Error::invalid("trajectory is not valid"));
    }
    if traj.points.len() != cfg.traj_len {
        return Err(Error::invalid(format!(
            "trajectory has {} points, descriptor expects {}",
            traj.points.len(),
            cfg.traj_len
        )));
    }
    let end = traj.start_frame + cfg.traj_len;
    if end > input.frame_count() {
        return Err(Error::invalid(format!(
            "trajectory frames {}..{end} out of range ({} frames)",
            traj.start_frame,
            input.frame_count()
        )));
    }
    if mask.needs_flow() && input.fields.len() < end - 1 {
        return Err(Error::invalid(format!(
            "trajectory needs motion fields up to {}, have {}",
            end - 2,
            input.fields.len()
        )));
    }
    let (w, h) = input.dims().unwrap_or((0, 0));
    let half = (cfg.window / 2) as i32;
    for p in &traj.points {
        if p.x - half < 0 || p.y - half < 0 || p.x + half > w as i32 || p.y + half > h as i32 {
            return Err(Error::invalid(format!("window at ({}, {}) leaves the frame", p.x, p.y)));
        }
    }
    Ok(())
}

fn assemble(traj: &Trajectory, frames: &[&FrameFeatures], cfg: &DescriptorConfig, mask: ChannelMask) -> TrajectoryDescriptor {
    let mut channels: [Vec<f64>; 5] = Default::default();
    for c in mask.channels() {
        let mut v = accumulate_channel(traj, frames, cfg, c);
        normalize_slices(&mut v, cfg.slice_len(c));
        channels[c.index()] = v;
    }
    let (mean_x, mean_y) = traj.mean_position();
    TrajectoryDescriptor {
        start_frame: traj.start_frame,
        mean_x,
        mean_y,
        channels,
    }
}

/// Descriptor of a single trajectory, computing frame features on the fly.
pub fn extract_trajectory_descriptor(
    traj: &Trajectory,
    input: &ExtractionInput<'_>,
    cfg: &DescriptorConfig,
    mask: ChannelMask,
) -> Result<TrajectoryDescriptor> {
    cfg.validate()?;
    check_trajectory(traj, input, cfg, mask)?;
    let feats = (0..cfg.traj_len)
        .map(|t| FrameFeatures::compute(input, traj.start_frame + t, cfg, mask))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&FrameFeatures> = feats.iter().collect();
    Ok(assemble(traj, &refs, cfg, mask))
}

/// Descriptors for many trajectories, returned in input order.
///
/// Trajectories are grouped by start frame; frame features are computed once
/// per frame and dropped once no later group needs them.
pub fn extract_descriptors(
    trajectories: &[Trajectory],
    input: &ExtractionInput<'_>,
    cfg: &DescriptorConfig,
    mask: ChannelMask,
) -> Result<Vec<TrajectoryDescriptor>> {
    cfg.validate()?;
    for t in trajectories {
        check_trajectory(t, input, cfg, mask)?;
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, t) in trajectories.iter().enumerate() {
        groups.entry(t.start_frame).or_default().push(i);
    }
    let mut cache: BTreeMap<usize, Arc<FrameFeatures>> = BTreeMap::new();
    let mut out: Vec<Option<TrajectoryDescriptor>> = vec![None; trajectories.len()];
    for (&start, members) in &groups {
        cache = cache.split_off(&start);
        let missing: Vec<usize> = (start..start + cfg.traj_len)
            .filter(|f| !cache.contains_key(f))
            .collect();
        let computed = par::map(&missing, |&f| FrameFeatures::compute(input, f, cfg, mask));
        for (f, feats) in missing.into_iter().zip(computed) {
            cache.insert(f, Arc::new(feats?));
        }
        let frames: Vec<&FrameFeatures> = (start..start + cfg.traj_len).map(|f| cache[&f].as_ref()).collect();
        let descs = par::map(members, |&i| assemble(&trajectories[i], &frames, cfg, mask));
        for (&i, d) in members.iter().zip(descs) {
            out[i] = Some(d);
        }
    }
    Ok(out.into_iter().map(|d| d.expect("every trajectory assigned")).collect())
}
