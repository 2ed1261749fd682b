use super::histogram::orientation_degrees;
use crate::error::{Error, Result};
use crate::media_io::{DepthFrame, GrayFrame, DEPTH_INVALID};

/// Scalar image in `f64`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Plane {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), width * height, "plane data length");
        Self {
            width,
            height,
            data,
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn from_gray(g: &GrayFrame) -> Self {
        Self::new(g.width, g.height, g.data.iter().map(|&v| v as f64).collect())
    }

    pub fn from_depth(d: &DepthFrame) -> Self {
        Self::new(d.width, d.height, d.data.iter().map(|&v| v as f64).collect())
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    pub width: usize,
    pub height: usize,
    pub gx: Vec<f64>,
    pub gy: Vec<f64>,
    pub magnitude: Vec<f64>,
    /// Degrees in `[0, 360)`; 0 where the magnitude is 0.
    pub orientation: Vec<f64>,
}

/// Pixels whose 3×3 neighborhood contains an invalid depth sample.
pub(crate) fn depth_invalid_mask(depth: &DepthFrame) -> Vec<bool> {
    let (w, h) = (depth.width, depth.height);
    let mut mask = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            if depth.data[y * w + x] != DEPTH_INVALID {
                continue;
            }
            for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                    mask[ny * w + nx] = true;
                }
            }
        }
    }
    mask
}

/// Central-difference gradients `[1, 0, -1]` along x and y.
///
/// The one-pixel border gets zero gradient, as does every pixel flagged in
/// `suppress` (for depth: pixels within one sample of a 0 mm hole).
pub fn spatial_gradients(image: &Plane, suppress: Option<&[bool]>) -> Result<GradientField> {
    let (w, h) = (image.width, image.height);
    if w < 3 || h < 3 {
        return Err(Error::invalid(format!("image {w}x{h} smaller than 3x3")));
    }
    if let Some(m) = suppress {
        if m.len() != w * h {
            return Err(Error::invalid("mask size does not match image"));
        }
    }
    let n = w * h;
    let mut gx = vec![0.0; n];
    let mut gy = vec![0.0; n];
    let mut magnitude = vec![0.0; n];
    let mut orientation = vec![0.0; n];
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let i = y * w + x;
            if suppress.is_some_and(|m| m[i]) {
                continue;
            }
            let dx = image.data[i + 1] - image.data[i - 1];
            let dy = image.data[i + w] - image.data[i - w];
            gx[i] = dx;
            gy[i] = dy;
            magnitude[i] = dx.hypot(dy);
            if magnitude[i] > 0.0 {
                orientation[i] = orientation_degrees(dx, dy);
            }
        }
    }
    Ok(GradientField {
        width: w,
        height: h,
        gx,
        gy,
        magnitude,
        orientation,
    })
}

/// Depth gradients with invalid samples suppressed.
pub fn depth_gradients(depth: &DepthFrame) -> Result<GradientField> {
    let mask = depth_invalid_mask(depth);
    spatial_gradients(&Plane::from_depth(depth), Some(&mask))
}
