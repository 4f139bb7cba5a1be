use std::fmt;

use serde::{Deserialize, Serialize};

use crate::imagecore::IntegralImage;

use super::{DetectorError, Result, BASE_WINDOW};

/// Lower bound on the window standard deviation used for normalization.
pub const MIN_STD_DEV: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum FeatureKind {
    /// Left and right halves.
    TwoHorizontal = 0,
    /// Top and bottom halves.
    TwoVertical = 1,
    /// Three columns, centre weighted double.
    ThreeHorizontal = 2,
    /// Three rows, centre weighted double.
    ThreeVertical = 3,
    /// 2x2 checker.
    FourDiagonal = 4,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 5] = [
        FeatureKind::TwoHorizontal,
        FeatureKind::TwoVertical,
        FeatureKind::ThreeHorizontal,
        FeatureKind::ThreeVertical,
        FeatureKind::FourDiagonal,
    ];

    /// Number of sub-rectangles along x and y.
    pub const fn grid(self) -> (u32, u32) {
        match self {
            FeatureKind::TwoHorizontal => (2, 1),
            FeatureKind::TwoVertical => (1, 2),
            FeatureKind::ThreeHorizontal => (3, 1),
            FeatureKind::ThreeVertical => (1, 3),
            FeatureKind::FourDiagonal => (2, 2),
        }
    }

    pub fn from_u8(v: u8) -> Option<FeatureKind> {
        FeatureKind::ALL.get(v as usize).copied()
    }

    /// Sub-rectangle weights in row-major grid order. Each kind sums to
    /// zero so a uniform window yields exactly 0.
    fn weights(self) -> &'static [i64] {
        match self {
            FeatureKind::TwoHorizontal | FeatureKind::TwoVertical => &[1, -1],
            FeatureKind::ThreeHorizontal | FeatureKind::ThreeVertical => &[1, -2, 1],
            FeatureKind::FourDiagonal => &[1, -1, -1, 1],
        }
    }
}

/// One Haar-like feature inside the base window. `w` and `h` are the
/// dimensions of a single sub-rectangle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HaarFeature {
    pub kind: FeatureKind,
    pub x: u8,
    pub y: u8,
    pub w: u8,
    pub h: u8,
}

/// A weighted rectangle in window-relative coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WeightedRect {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
    pub weight: i64,
}

impl HaarFeature {
    pub fn new(kind: FeatureKind, x: u8, y: u8, w: u8, h: u8) -> Result<HaarFeature> {
        let f = HaarFeature { kind, x, y, w, h };
        let (ew, eh) = f.extent();
        if w == 0 || h == 0 || x as u32 + ew > BASE_WINDOW || y as u32 + eh > BASE_WINDOW {
            return Err(DetectorError::Config(format!("feature {f} does not fit the base window")));
        }
        Ok(f)
    }

    /// Full width and height of the feature.
    pub fn extent(&self) -> (u32, u32) {
        let (gx, gy) = self.kind.grid();
        (gx * self.w as u32, gy * self.h as u32)
    }

    /// Sub-rectangle size after scaling. Floors so the scaled feature never
    /// leaves the scaled window.
    pub fn scaled_cell(&self, scale: f64) -> (u32, u32) {
        (scale_floor(self.w, scale).max(1), scale_floor(self.h, scale).max(1))
    }

    /// The feature's sub-rectangles at `scale`, relative to the window
    /// origin. At integer scales every coordinate is exactly multiplied.
    pub fn scaled_rects(&self, scale: f64) -> Vec<WeightedRect> {
        let (gx, gy) = self.kind.grid();
        let (sw, sh) = self.scaled_cell(scale);
        let x0 = scale_floor(self.x, scale);
        let y0 = scale_floor(self.y, scale);
        let weights = self.kind.weights();
        let mut out = Vec::with_capacity(weights.len());
        for j in 0..gy {
            for i in 0..gx {
                out.push(WeightedRect {
                    x: x0 + i * sw,
                    y: y0 + j * sh,
                    w: sw,
                    h: sh,
                    weight: weights[(j * gx + i) as usize],
                });
            }
        }
        out
    }

    /// Weighted sum of the sub-rectangle pixel sums, unnormalized.
    pub fn raw_value(&self, ii: &IntegralImage, ox: u32, oy: u32, scale: f64) -> Result<i64> {
        let rects = self.scaled_rects(scale);
        let last = rects.last().expect("every kind has rects");
        let (ex, ey) = (ox + last.x + last.w, oy + last.y + last.h);
        if ex as usize > ii.width() || ey as usize > ii.height() {
            return Err(DetectorError::OutOfBounds(format!(
                "feature {self} at ({ox},{oy}) scale {scale} exceeds {}x{}",
                ii.width(),
                ii.height()
            )));
        }
        Ok(rects
            .iter()
            .map(|r| {
                r.weight
                    * ii.sum_xywh((ox + r.x) as usize, (oy + r.y) as usize, r.w as usize, r.h as usize)
                        as i64
            })
            .sum())
    }
}

#[inline]
fn scale_floor(v: u8, scale: f64) -> u32 {
    (v as f64 * scale + 1e-9).floor() as u32
}

impl fmt::Display for HaarFeature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}@({},{}) {}x{}", self.kind, self.x, self.y, self.w, self.h)
    }
}

/// Every feature that fits a `base_window` square, ordered by kind, then
/// `y`, `x`, `h`, `w` ascending.
pub fn enumerate_features(base_window: u32) -> Result<Vec<HaarFeature>> {
    if base_window != BASE_WINDOW {
        return Err(DetectorError::Config(format!(
            "unsupported base window {base_window}; only {BASE_WINDOW} is supported"
        )));
    }
    let n = base_window;
    let mut out = Vec::with_capacity(162_336);
    for kind in FeatureKind::ALL {
        let (gx, gy) = kind.grid();
        for y in 0..n {
            for x in 0..n {
                for h in 1..=(n - y) / gy {
                    for w in 1..=(n - x) / gx {
                        out.push(HaarFeature { kind, x: x as u8, y: y as u8, w: w as u8, h: h as u8 });
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Window edge length at `scale`.
#[inline]
pub fn window_size(scale: f64) -> u32 {
    (BASE_WINDOW as f64 * scale).round() as u32
}

/// Variance-normalized feature response of the window at `(ox, oy)`.
///
/// The raw weighted sum is divided by the cell area (so responses are
/// comparable across scales) and by the window's intensity standard
/// deviation, floored at [`MIN_STD_DEV`].
pub fn eval_feature(f: &HaarFeature, ii: &IntegralImage, ox: u32, oy: u32, scale: f64) -> Result<f64> {
    if !(scale >= 1.0) {
        return Err(DetectorError::Config(format!("scale must be >= 1, got {scale}")));
    }
    let win = window_size(scale);
    if (ox + win) as usize > ii.width() || (oy + win) as usize > ii.height() {
        return Err(DetectorError::OutOfBounds(format!(
            "window {win}px at ({ox},{oy}) exceeds {}x{}",
            ii.width(),
            ii.height()
        )));
    }
    let raw = f.raw_value(ii, ox, oy, scale)?;
    let (_, std) = ii.window_stats(ox as usize, oy as usize, win as usize, win as usize);
    let (sw, sh) = f.scaled_cell(scale);
    Ok(normalize(raw, (sw * sh) as f64, std))
}

#[inline]
pub(crate) fn normalize(raw: i64, cell_area: f64, std: f64) -> f64 {
    raw as f64 / (cell_area * std.max(MIN_STD_DEV))
}
