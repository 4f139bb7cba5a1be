use serde::{Deserialize, Serialize};

use crate::imagecore::GrayImage;

use super::{AttributeError, Result};

/// Eye and mouth centres in crop coordinates (pixel `i` spans `[i, i+1)`).
/// `left_eye` is the one on the image's left.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Landmarks {
    pub left_eye: (f64, f64),
    pub right_eye: (f64, f64),
    pub mouth_center: (f64, f64),
    /// Set when a search band had no usable contrast and its centre was
    /// used instead.
    pub low_confidence: bool,
}

impl Landmarks {
    pub fn eye_midpoint(&self) -> (f64, f64) {
        ((self.left_eye.0 + self.right_eye.0) / 2.0, (self.left_eye.1 + self.right_eye.1) / 2.0)
    }

    pub fn inter_eye_distance(&self) -> f64 {
        (self.right_eye.0 - self.left_eye.0).hypot(self.right_eye.1 - self.left_eye.1)
    }
}

/// Column/row span `[lo, hi]` of pixels whose centres fall within the
/// fractional band `[a, b]` of `n` pixels.
fn band(n: usize, a: f64, b: f64) -> (usize, usize) {
    let lo = (a * n as f64 - 0.5).ceil().max(0.0) as usize;
    let hi = ((b * n as f64 - 0.5).floor() as usize).min(n - 1);
    (lo, hi.max(lo))
}

/// Contrast below which a band is considered featureless.
const MIN_CONTRAST: f64 = 8.0;

/// Fraction of the way from the darkest pixel to the band median that still
/// counts as part of a valley.
const VALLEY_LEVEL: f64 = 0.35;

/// Dark-weighted centroid of the pixels in `[x0, x1] x [y0, y1]`, or `None`
/// when the band is flat.
fn valley_centroid(img: &GrayImage, (x0, x1): (usize, usize), (y0, y1): (usize, usize)) -> Option<(f64, f64)> {
    let mut vals: Vec<u8> = Vec::with_capacity((x1 - x0 + 1) * (y1 - y0 + 1));
    for y in y0..=y1 {
        for x in x0..=x1 {
            vals.push(img.get(x, y));
        }
    }
    let min = *vals.iter().min()? as f64;
    let mut sorted = vals.clone();
    sorted.sort_unstable();
    let median = sorted[sorted.len() / 2] as f64;
    if median - min < MIN_CONTRAST {
        return None;
    }
    let level = min + VALLEY_LEVEL * (median - min);
    let (mut sx, mut sy, mut sw) = (0.0, 0.0, 0.0);
    for y in y0..=y1 {
        for x in x0..=x1 {
            let d = level - img.get(x, y) as f64;
            if d > 0.0 {
                sx += d * (x as f64 + 0.5);
                sy += d * (y as f64 + 0.5);
                sw += d;
            }
        }
    }
    (sw > 0.0).then(|| (sx / sw, sy / sw))
}

fn band_center((x0, x1): (usize, usize), (y0, y1): (usize, usize)) -> (f64, f64) {
    ((x0 + x1 + 1) as f64 / 2.0, (y0 + y1 + 1) as f64 / 2.0)
}

/// Finds eyes and mouth as intensity valleys inside fixed search bands:
/// eyes in rows 20-50% and columns 10-45% / 55-90%, mouth in rows 65-90%
/// and the middle 60% of columns. The right-side bands are exact mirrors of
/// the left ones.
pub fn locate_landmarks(face: &GrayImage) -> Result<Landmarks> {
    let (w, h) = (face.width(), face.height());
    if w < 24 || h < 24 {
        return Err(AttributeError::InvalidInput(format!("face crop must be at least 24x24, got {w}x{h}")));
    }
    let eye_rows = band(h, 0.20, 0.50);
    let left_cols = band(w, 0.10, 0.45);
    let right_cols = (w - 1 - left_cols.1, w - 1 - left_cols.0);
    let mouth_rows = band(h, 0.65, 0.90);
    let mouth_cols = band(w, 0.20, 0.80);
    let mouth_cols = (mouth_cols.0, w - 1 - mouth_cols.0);

    let mut low = false;
    let mut find = |cols, rows| {
        valley_centroid(face, cols, rows).unwrap_or_else(|| {
            low = true;
            band_center(cols, rows)
        })
    };
    let left_eye = find(left_cols, eye_rows);
    let right_eye = find(right_cols, eye_rows);
    let mouth_center = find(mouth_cols, mouth_rows);
    Ok(Landmarks { left_eye, right_eye, mouth_center, low_confidence: low })
}
