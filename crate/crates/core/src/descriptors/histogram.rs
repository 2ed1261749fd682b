/// `atan2(gy, gx)` in degrees, mapped to `[0, 360)`.
#[inline]
pub fn orientation_degrees(gx: f64, gy: f64) -> f64 {
    let mut deg = gy.atan2(gx).to_degrees();
    if deg < 0.0 {
        deg += 360.0;
    }
    if deg >= 360.0 {
        deg -= 360.0;
    }
    deg
}

/// Hard bin index: `floor(orientation / (360 / bins)) mod bins`.
#[inline]
pub fn orientation_bin(orientation: f64, bins: usize) -> usize {
    let width = 360.0 / bins as f64;
    ((orientation / width).floor() as usize) % bins
}

/// Magnitude-weighted orientation histogram over `(magnitude, orientation)` samples.
pub fn orientation_histogram(samples: &[(f64, f64)], bins: usize) -> Vec<f64> {
    let mut hist = vec![0.0; bins];
    for &(mag, ori) in samples {
        if mag > 0.0 {
            hist[orientation_bin(ori, bins)] += mag;
        }
    }
    hist
}

/// Histogram of flow `(dx, dy)` samples. The last of `bins` bins counts
/// samples slower than `epsilon` with unit weight; the rest bin by flow
/// orientation weighted by flow magnitude.
pub fn hof_histogram(samples: &[(f64, f64)], bins: usize, epsilon: f64) -> Vec<f64> {
    let orient_bins = bins - 1;
    let mut hist = vec![0.0; bins];
    for &(dx, dy) in samples {
        let mag = dx.hypot(dy);
        if mag < epsilon || mag == 0.0 {
            hist[orient_bins] += 1.0;
        } else {
            hist[orientation_bin(orientation_degrees(dx, dy), orient_bins)] += mag;
        }
    }
    hist
}

/// l2-normalizes consecutive `slice_len` chunks in place; all-zero chunks stay zero.
pub fn normalize_slices(v: &mut [f64], slice_len: usize) {
    for slice in v.chunks_mut(slice_len) {
        let norm = slice.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            slice.iter_mut().for_each(|x| *x /= norm);
        }
    }
}
