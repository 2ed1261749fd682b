//! Trajectory-aligned local descriptors.
//!
//! Each trajectory carries a `window`×`window`×`traj_len` volume split into an
//! `nx`×`ny`×`nt` grid of cells. Per cell we build magnitude-weighted,
//! hard-binned orientation histograms for five channels:
//!
//! | channel | input                                     | bins |
//! |---------|-------------------------------------------|------|
//! | HOG     | luma gradients                            | 8    |
//! | HOF     | block flow (plus a zero-motion bin)       | 9    |
//! | MBHx    | gradients of the flow's x component       | 8    |
//! | MBHy    | gradients of the flow's y component       | 8    |
//! | HODG    | depth gradients, invalid samples masked   | 8    |
//!
//! Cell histograms are laid out `(t, y, x, bin)` and every temporal slice is
//! l2-normalized on its own.

mod dump;
mod extract;
mod gradient;
mod histogram;

pub use dump::{read_descriptor_dump, write_descriptor_dump, DescriptorDump, DUMP_MAGIC};
pub use extract::{
    accumulate_channel, extract_descriptors, extract_trajectory_descriptor, ExtractionInput,
    FrameFeatures,
};
pub use gradient::{depth_gradients, spatial_gradients, GradientField, Plane};
pub use histogram::{
    hof_histogram, normalize_slices, orientation_bin, orientation_degrees, orientation_histogram,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Hog,
    Hof,
    Mbhx,
    Mbhy,
    Hodg,
}

impl Channel {
    /// Canonical order used for dumps and Fisher-vector concatenation.
    pub const ALL: [Channel; 5] = [
        Channel::Hog,
        Channel::Hof,
        Channel::Mbhx,
        Channel::Mbhy,
        Channel::Hodg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Channel::Hog => "hog",
            Channel::Hof => "hof",
            Channel::Mbhx => "mbhx",
            Channel::Mbhy => "mbhy",
            Channel::Hodg => "hodg",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_name(s: &str) -> Option<Channel> {
        Channel::ALL.into_iter().find(|c| c.name() == s)
    }

    pub fn needs_rgb(self) -> bool {
        self != Channel::Hodg
    }
}

impl std::fmt::Display for Channel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Subset of channels to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ChannelMask(u8);

impl ChannelMask {
    pub const RGB_TRIO: ChannelMask = ChannelMask(0b01111);
    pub const HODG: ChannelMask = ChannelMask(0b10000);
    pub const ALL: ChannelMask = ChannelMask(0b11111);

    pub fn of(channels: &[Channel]) -> Self {
        ChannelMask(channels.iter().fold(0, |m, c| m | 1 << c.index()))
    }

    pub fn contains(self, c: Channel) -> bool {
        self.0 & (1 << c.index()) != 0
    }

    pub fn channels(self) -> Vec<Channel> {
        Channel::ALL.into_iter().filter(|c| self.contains(*c)).collect()
    }

    pub fn needs_rgb(self) -> bool {
        self.channels().iter().any(|c| c.needs_rgb())
    }

    pub fn needs_flow(self) -> bool {
        self.contains(Channel::Hof) || self.contains(Channel::Mbhx) || self.contains(Channel::Mbhy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DescriptorConfig {
    pub window: usize,
    pub traj_len: usize,
    /// Cells per volume along (x, y, t).
    pub grid: [usize; 3],
    /// Cell extent along (x, y, t).
    pub cell: [usize; 3],
    pub orient_bins: usize,
    /// Orientation bins plus one zero-motion bin.
    pub hof_bins: usize,
    /// Flow magnitude (pixels) below which a sample counts as "no motion".
    pub epsilon_zero_flow: f64,
}

impl Default for DescriptorConfig {
    fn default() -> Self {
        Self {
            window: 32,
            traj_len: 15,
            grid: [2, 2, 3],
            cell: [16, 16, 5],
            orient_bins: 8,
            hof_bins: 9,
            epsilon_zero_flow: 0.4,
        }
    }
}

impl DescriptorConfig {
    pub fn validate(&self) -> Result<()> {
        let [nx, ny, nt] = self.grid;
        let [cx, cy, ct] = self.cell;
        if nx * cx != self.window || ny * cy != self.window || nt * ct != self.traj_len {
            return Err(Error::Config(format!(
                "grid {:?} × cell {:?} does not tile a {w}×{w}×{t} volume",
                self.grid,
                self.cell,
                w = self.window,
                t = self.traj_len
            )));
        }
        if self.window == 0 || self.window % 2 != 0 {
            return Err(Error::Config(format!("window {} must be even and positive", self.window)));
        }
        if self.orient_bins < 2 || self.orient_bins > 255 {
            return Err(Error::Config(format!("orient_bins {} outside [2, 255]", self.orient_bins)));
        }
        if self.hof_bins < 3 || self.hof_bins > 256 {
            return Err(Error::Config(format!("hof_bins {} outside [3, 256]", self.hof_bins)));
        }
        if !(self.epsilon_zero_flow >= 0.0) {
            return Err(Error::Config("epsilon_zero_flow must be >= 0".into()));
        }
        Ok(())
    }

    pub fn cells(&self) -> usize {
        self.grid.iter().product()
    }

    pub fn bins(&self, channel: Channel) -> usize {
        match channel {
            Channel::Hof => self.hof_bins,
            _ => self.orient_bins,
        }
    }

    pub fn channel_len(&self, channel: Channel) -> usize {
        self.cells() * self.bins(channel)
    }

    /// Length of one temporal slice of a channel vector.
    pub fn slice_len(&self, channel: Channel) -> usize {
        self.grid[0] * self.grid[1] * self.bins(channel)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryDescriptor {
    pub start_frame: usize,
    pub mean_x: f64,
    pub mean_y: f64,
    /// Indexed by [`Channel::index`]; channels not computed are empty.
    pub channels: [Vec<f64>; 5],
}

impl TrajectoryDescriptor {
    pub fn get(&self, c: Channel) -> &[f64] {
        &self.channels[c.index()]
    }

    pub fn hog(&self) -> &[f64] {
        self.get(Channel::Hog)
    }

    pub fn hof(&self) -> &[f64] {
        self.get(Channel::Hof)
    }

    pub fn mbhx(&self) -> &[f64] {
        self.get(Channel::Mbhx)
    }

    pub fn mbhy(&self) -> &[f64] {
        self.get(Channel::Mbhy)
    }

    pub fn hodg(&self) -> &[f64] {
        self.get(Channel::Hodg)
    }
}
