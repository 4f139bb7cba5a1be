use std::fmt;

use serde::{Deserialize, Serialize};

use crate::imagecore::{clamp_round, resize_bilinear, GrayImage};

use super::{AttributeError, Landmarks, Result};

pub const PATCH_WIDTH: usize = 16;
pub const PATCH_HEIGHT: usize = 12;
const GRID_X: usize = 4;
const GRID_Y: usize = 3;
const BINS: usize = 4;
/// Gradient magnitude separating the weak and strong histogram bins, in
/// normalized intensity units.
const GRADIENT_SPLIT: f64 = 0.5;

/// Length of every attribute feature vector: the normalized raster plus a
/// gradient-sign histogram per grid cell.
pub const FEATURE_DIM: usize = PATCH_WIDTH * PATCH_HEIGHT + BINS * GRID_X * GRID_Y;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    Mouth,
    LeftEye,
    RightEye,
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Region::Mouth => "mouth",
            Region::LeftEye => "left-eye",
            Region::RightEye => "right-eye",
        })
    }
}

impl Region {
    /// Box size as fractions of the crop width and height.
    fn extent(self) -> (f64, f64) {
        match self {
            Region::Mouth => (0.50, 0.26),
            Region::LeftEye | Region::RightEye => (0.32, 0.24),
        }
    }

    fn anchor(self, lm: &Landmarks) -> (f64, f64) {
        match self {
            Region::Mouth => lm.mouth_center,
            Region::LeftEye => lm.left_eye,
            Region::RightEye => lm.right_eye,
        }
    }
}

/// A region box resampled to the fixed patch size.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionPatch {
    pub patch: GrayImage,
    /// Part of the box fell outside the crop and was zero-filled.
    pub clipped: bool,
}

/// Samples the box around a landmark onto a 16x12 patch, bilinearly at
/// cell centres. Samples outside the crop are 0.
pub fn sample_region(face: &GrayImage, lm: &Landmarks, region: Region) -> RegionPatch {
    let (fw, fh) = region.extent();
    let bw = fw * face.width() as f64;
    let bh = fh * face.height() as f64;
    let (ax, ay) = region.anchor(lm);
    let (x0, y0) = (ax - bw / 2.0, ay - bh / 2.0);
    let mut clipped = false;
    let patch = GrayImage::from_fn(PATCH_WIDTH, PATCH_HEIGHT, |i, j| {
        let cx = x0 + (i as f64 + 0.5) * bw / PATCH_WIDTH as f64;
        let cy = y0 + (j as f64 + 0.5) * bh / PATCH_HEIGHT as f64;
        match face.sample_bilinear(cx - 0.5, cy - 0.5) {
            Some(v) => clamp_round(v),
            None => {
                clipped = true;
                0
            }
        }
    })
    .expect("fixed patch size");
    RegionPatch { patch, clipped }
}

/// Feature vector of a region patch of any size (resized to 16x12 first).
pub fn region_features(patch: &GrayImage) -> Vec<f64> {
    let patch = if patch.width() == PATCH_WIDTH && patch.height() == PATCH_HEIGHT {
        patch.clone()
    } else {
        resize_bilinear(patch, PATCH_WIDTH, PATCH_HEIGHT).expect("fixed patch size")
    };
    let raw: Vec<f64> = patch.data().iter().map(|&v| v as f64).collect();
    let n = raw.len() as f64;
    let mean = raw.iter().sum::<f64>() / n;
    let var = raw.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let mut out = Vec::with_capacity(FEATURE_DIM);
    if var < 1e-9 {
        out.resize(raw.len(), 0.0);
    } else {
        let std = var.sqrt();
        out.extend(raw.iter().map(|v| (v - mean) / std));
    }

    let at = |x: usize, y: usize| out[y * PATCH_WIDTH + x];
    let cw = PATCH_WIDTH / GRID_X;
    let ch = PATCH_HEIGHT / GRID_Y;
    let mut hist = vec![0.0; BINS * GRID_X * GRID_Y];
    for y in 0..PATCH_HEIGHT {
        for x in 0..PATCH_WIDTH {
            let g = at((x + 1).min(PATCH_WIDTH - 1), y) - at(x.saturating_sub(1), y);
            let bin = if g <= -GRADIENT_SPLIT {
                0
            } else if g < 0.0 {
                1
            } else if g == 0.0 {
                continue;
            } else if g < GRADIENT_SPLIT {
                2
            } else {
                3
            };
            let cell = (y / ch) * GRID_X + x / cw;
            hist[cell * BINS + bin] += 1.0 / (cw * ch) as f64;
        }
    }
    out.extend(hist);
    out
}

/// Feature vector for one attribute region of a face crop. Also reports
/// whether the region had to be zero-filled.
pub fn extract_attribute_features(face: &GrayImage, lm: &Landmarks, region: Region) -> (Vec<f64>, bool) {
    let RegionPatch { patch, clipped } = sample_region(face, lm, region);
    (region_features(&patch), clipped)
}

/// Checks a vector has the attribute feature dimension.
pub fn check_dim(v: &[f64], expected: usize) -> Result<()> {
    if v.len() != expected {
        return Err(AttributeError::Dimension { expected, got: v.len() });
    }
    Ok(())
}
