//! Raster primitives shared by every stage of the engine.
//!
//! Everything downstream works on 8-bit grayscale rasters. Summed-area
//! tables give constant-time rectangle sums (plus sums of squares, used for
//! per-window variance normalization in the detector).

mod io;

pub use io::{decode_image, encode_pgm, encode_png, read_image, write_pgm, write_png};

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("rect {rect} is outside a {width}x{height} image")]
    OutOfBounds { rect: Rect, width: usize, height: usize },
    #[error("cannot decode image: {0}")]
    Decode(String),
    #[error("cannot encode image: {0}")]
    Encode(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = ImageError> = std::result::Result<T, E>;

/// Row-major 8-bit grayscale raster.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl fmt::Debug for GrayImage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GrayImage({}x{})", self.width, self.height)
    }
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(ImageError::InvalidInput(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(ImageError::InvalidInput(format!(
                "expected {} pixels for {width}x{height}, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(GrayImage { width, height, data })
    }

    /// A `width x height` image filled with `value`.
    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        GrayImage::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> u8,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        GrayImage::new(width, height, data)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.data[y * self.width + x] = v;
    }

    pub fn full_rect(&self) -> Rect {
        Rect::new(0, 0, self.width as u32, self.height as u32)
    }

    /// Bilinear sample at continuous pixel-center coordinates. Returns `None`
    /// when the point lies outside `[0, w-1] x [0, h-1]`.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> Option<f64> {
        let maxx = (self.width - 1) as f64;
        let maxy = (self.height - 1) as f64;
        if !(x >= 0.0 && y >= 0.0 && x <= maxx && y <= maxy) {
            return None;
        }
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let p = |xx: usize, yy: usize| self.get(xx, yy) as f64;
        let top = p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx;
        let bottom = p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx;
        Some(top * (1.0 - fy) + bottom * fy)
    }

    /// Left-right mirror image.
    pub fn mirror_horizontal(&self) -> GrayImage {
        let mut data = Vec::with_capacity(self.data.len());
        for row in self.data.chunks_exact(self.width) {
            data.extend(row.iter().rev());
        }
        GrayImage { width: self.width, height: self.height, data }
    }

    /// Copies `src` into `self` with its top-left corner at `(x, y)`; pixels
    /// falling outside `self` are dropped.
    pub fn paste(&mut self, src: &GrayImage, x: usize, y: usize) {
        for sy in 0..src.height {
            let ty = y + sy;
            if ty >= self.height {
                break;
            }
            for sx in 0..src.width {
                let tx = x + sx;
                if tx >= self.width {
                    break;
                }
                self.set(tx, ty, src.get(sx, sy));
            }
        }
    }

    /// Returns the image with `f` applied to each pixel value, saturating to
    /// `[0, 255]`.
    pub fn map(&self, mut f: impl FnMut(u8) -> f64) -> GrayImage {
        let data = self.data.iter().map(|&v| clamp_round(f(v))).collect();
        GrayImage { width: self.width, height: self.height, data }
    }
}

/// Axis-aligned rectangle with inclusive top-left and exclusive bottom-right
/// corners. Always stored canonically (`x1 <= x2`, `y1 <= y2`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default, serde::Serialize, serde::Deserialize)]
pub struct Rect {
    pub x1: u32,
    pub y1: u32,
    pub x2: u32,
    pub y2: u32,
}

impl Rect {
    /// Builds a canonical rect, swapping corner coordinates if given out of
    /// order.
    pub fn new(x1: u32, y1: u32, x2: u32, y2: u32) -> Rect {
        Rect { x1: x1.min(x2), y1: y1.min(y2), x2: x1.max(x2), y2: y1.max(y2) }
    }

    pub fn from_xywh(x: u32, y: u32, w: u32, h: u32) -> Rect {
        Rect::new(x, y, x + w, y + h)
    }

    #[inline]
    pub fn width(&self) -> u32 {
        self.x2 - self.x1
    }

    #[inline]
    pub fn height(&self) -> u32 {
        self.y2 - self.y1
    }

    #[inline]
    pub fn area(&self) -> u64 {
        self.width() as u64 * self.height() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.x1 == self.x2 || self.y1 == self.y2
    }

    pub fn fits_within(&self, width: usize, height: usize) -> bool {
        self.x2 as usize <= width && self.y2 as usize <= height
    }

    pub fn intersection(&self, other: &Rect) -> Option<Rect> {
        let x1 = self.x1.max(other.x1);
        let y1 = self.y1.max(other.y1);
        let x2 = self.x2.min(other.x2);
        let y2 = self.y2.min(other.y2);
        (x1 < x2 && y1 < y2).then_some(Rect { x1, y1, x2, y2 })
    }

    /// Intersection over union; 0 when the union is empty.
    pub fn iou(&self, other: &Rect) -> f64 {
        let inter = self.intersection(other).map_or(0, |r| r.area());
        let union = self.area() + other.area() - inter;
        if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        }
    }

    pub fn translate(&self, dx: i64, dy: i64) -> Option<Rect> {
        let shift = |v: u32, d: i64| u32::try_from(v as i64 + d).ok();
        Some(Rect::new(
            shift(self.x1, dx)?,
            shift(self.y1, dy)?,
            shift(self.x2, dx)?,
            shift(self.y2, dy)?,
        ))
    }
}

impl fmt::Display for Rect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Rect({},{}-{},{})", self.x1, self.y1, self.x2, self.y2)
    }
}

/// Summed-area tables of a grayscale image: plain intensities and squared
/// intensities. Both tables carry a zero top row and left column, so they
/// are `(width + 1) x (height + 1)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntegralImage {
    width: usize,
    height: usize,
    table: Vec<u64>,
    squared: Vec<u64>,
}

impl IntegralImage {
    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    /// Entry `(x, y)`: sum of all source pixels with column `< x` and row `< y`.
    #[inline]
    pub fn at(&self, x: usize, y: usize) -> u64 {
        self.table[y * (self.width + 1) + x]
    }

    #[inline]
    pub fn squared_at(&self, x: usize, y: usize) -> u64 {
        self.squared[y * (self.width + 1) + x]
    }

    pub fn total(&self) -> u64 {
        self.at(self.width, self.height)
    }

    /// Sum of pixels inside `r`.
    pub fn rect_sum(&self, r: &Rect) -> Result<u64> {
        if !r.fits_within(self.width, self.height) {
            return Err(ImageError::OutOfBounds { rect: *r, width: self.width, height: self.height });
        }
        Ok(self.sum_xywh(r.x1 as usize, r.y1 as usize, r.width() as usize, r.height() as usize))
    }

    /// Sum of squared pixels inside `r`.
    pub fn rect_sum_squared(&self, r: &Rect) -> Result<u64> {
        if !r.fits_within(self.width, self.height) {
            return Err(ImageError::OutOfBounds { rect: *r, width: self.width, height: self.height });
        }
        let (x, y, w, h) = (r.x1 as usize, r.y1 as usize, r.width() as usize, r.height() as usize);
        Ok(self.squared_at(x + w, y + h) + self.squared_at(x, y)
            - self.squared_at(x + w, y)
            - self.squared_at(x, y + h))
    }

    /// Unchecked rectangle sum for detector inner loops; the caller
    /// guarantees `x + w <= width` and `y + h <= height`.
    #[inline]
    pub fn sum_xywh(&self, x: usize, y: usize, w: usize, h: usize) -> u64 {
        debug_assert!(x + w <= self.width && y + h <= self.height);
        let stride = self.width + 1;
        let t = &self.table;
        let a = t[y * stride + x];
        let b = t[y * stride + x + w];
        let c = t[(y + h) * stride + x];
        let d = t[(y + h) * stride + x + w];
        d + a - b - c
    }

    /// Mean and standard deviation of the pixels in a square-or-not window.
    #[inline]
    pub fn window_stats(&self, x: usize, y: usize, w: usize, h: usize) -> (f64, f64) {
        let n = (w * h) as f64;
        let stride = self.width + 1;
        let s = &self.squared;
        let sq = s[(y + h) * stride + x + w] + s[y * stride + x]
            - s[y * stride + x + w]
            - s[(y + h) * stride + x];
        let sum = self.sum_xywh(x, y, w, h) as f64;
        let mean = sum / n;
        let var = (sq as f64 / n - mean * mean).max(0.0);
        (mean, var.sqrt())
    }
}

pub fn integral(img: &GrayImage) -> IntegralImage {
    let (w, h) = (img.width, img.height);
    let stride = w + 1;
    let mut table = vec![0u64; stride * (h + 1)];
    let mut squared = vec![0u64; stride * (h + 1)];
    for y in 0..h {
        let mut row = 0u64;
        let mut row_sq = 0u64;
        for x in 0..w {
            let v = img.data[y * w + x] as u64;
            row += v;
            row_sq += v * v;
            table[(y + 1) * stride + x + 1] = table[y * stride + x + 1] + row;
            squared[(y + 1) * stride + x + 1] = squared[y * stride + x + 1] + row_sq;
        }
    }
    IntegralImage { width: w, height: h, table, squared }
}

/// Sum of pixels in `r`, from four table lookups.
pub fn rect_sum(ii: &IntegralImage, r: &Rect) -> Result<u64> {
    ii.rect_sum(r)
}

/// Luminance conversion of an interleaved 8-bit RGB raster
/// (`0.299 R + 0.587 G + 0.114 B`, rounded to nearest).
pub fn to_grayscale(width: usize, height: usize, rgb: &[u8]) -> Result<GrayImage> {
    if width == 0 || height == 0 {
        return Err(ImageError::InvalidInput(format!(
            "image dimensions must be positive, got {width}x{height}"
        )));
    }
    if rgb.len() != 3 * width * height {
        return Err(ImageError::InvalidInput(format!(
            "expected {} RGB bytes for {width}x{height}, got {}",
            3 * width * height,
            rgb.len()
        )));
    }
    let data = rgb
        .chunks_exact(3)
        .map(|p| {
            // Integer form of the weights keeps the rounding exact.
            let y = 299 * p[0] as u32 + 587 * p[1] as u32 + 114 * p[2] as u32;
            ((y + 500) / 1000) as u8
        })
        .collect();
    GrayImage::new(width, height, data)
}

pub fn crop(img: &GrayImage, r: &Rect) -> Result<GrayImage> {
    if r.is_empty() {
        return Err(ImageError::InvalidInput(format!("cannot crop zero-area {r}")));
    }
    if !r.fits_within(img.width, img.height) {
        return Err(ImageError::OutOfBounds { rect: *r, width: img.width, height: img.height });
    }
    let (w, h) = (r.width() as usize, r.height() as usize);
    let mut data = Vec::with_capacity(w * h);
    for y in r.y1 as usize..r.y2 as usize {
        let start = y * img.width + r.x1 as usize;
        data.extend_from_slice(&img.data[start..start + w]);
    }
    GrayImage::new(w, h, data)
}

/// Rounds half away from zero and saturates into the 8-bit range.
#[inline]
pub fn clamp_round(v: f64) -> u8 {
    if v.is_nan() {
        return 0;
    }
    v.round().clamp(0.0, 255.0) as u8
}

/// Bilinear resize with corner-aligned sampling: output corners land exactly
/// on input corners.
pub fn resize_bilinear(img: &GrayImage, width: usize, height: usize) -> Result<GrayImage> {
    if width == 0 || height == 0 {
        return Err(ImageError::InvalidInput(format!(
            "resize target must be positive, got {width}x{height}"
        )));
    }
    if width == img.width && height == img.height {
        return Ok(img.clone());
    }
    let ratio = |src: usize, dst: usize| {
        if dst == 1 {
            0.0
        } else {
            (src - 1) as f64 / (dst - 1) as f64
        }
    };
    let rx = ratio(img.width, width);
    let ry = ratio(img.height, height);
    // Single-sample axes take the source centre.
    let offx = if width == 1 { (img.width - 1) as f64 / 2.0 } else { 0.0 };
    let offy = if height == 1 { (img.height - 1) as f64 / 2.0 } else { 0.0 };
    GrayImage::from_fn(width, height, |x, y| {
        let sx = (offx + x as f64 * rx).min((img.width - 1) as f64);
        let sy = (offy + y as f64 * ry).min((img.height - 1) as f64);
        clamp_round(img.sample_bilinear(sx, sy).unwrap_or(0.0))
    })
}

/// Rotates clockwise (as displayed, y pointing down) by `angle` degrees
/// around the image centre. Output keeps the input dimensions; samples
/// falling outside the source are filled with 0.
pub fn rotate(img: &GrayImage, angle: f64) -> GrayImage {
    rotate_impl(img, angle, false)
}

/// Like [`rotate`], but samples falling outside the source take the nearest
/// border value instead of 0.
pub fn rotate_replicate(img: &GrayImage, angle: f64) -> GrayImage {
    rotate_impl(img, angle, true)
}

fn rotate_impl(img: &GrayImage, angle: f64, replicate: bool) -> GrayImage {
    if angle == 0.0 || !angle.is_finite() {
        return img.clone();
    }
    let (xmax, ymax) = ((img.width - 1) as f64, (img.height - 1) as f64);
    let (sin, cos) = angle.to_radians().sin_cos();
    let cx = (img.width - 1) as f64 / 2.0;
    let cy = (img.height - 1) as f64 / 2.0;
    let mut out = img.clone();
    for y in 0..img.height {
        for x in 0..img.width {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            let mut sx = cx + dx * cos + dy * sin;
            let mut sy = cy - dx * sin + dy * cos;
            if replicate {
                sx = sx.clamp(0.0, xmax);
                sy = sy.clamp(0.0, ymax);
            }
            out.set(x, y, clamp_round(img.sample_bilinear(sx, sy).unwrap_or(0.0)));
        }
    }
    out
}

/// Rotates a point clockwise (y down) by `angle` degrees around `(cx, cy)`,
/// matching the pixel mapping of [`rotate`].
pub fn rotate_point(p: (f64, f64), center: (f64, f64), angle: f64) -> (f64, f64) {
    let (sin, cos) = angle.to_radians().sin_cos();
    let dx = p.0 - center.0;
    let dy = p.1 - center.1;
    (center.0 + dx * cos - dy * sin, center.1 + dx * sin + dy * cos)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_sum(img: &GrayImage, r: &Rect) -> u64 {
        let mut s = 0;
        for y in r.y1..r.y2 {
            for x in r.x1..r.x2 {
                s += img.get(x as usize, y as usize) as u64;
            }
        }
        s
    }

    fn random_image(rng: &mut ChaCha8Rng, max: usize) -> GrayImage {
        let w = rng.gen_range(1..=max);
        let h = rng.gen_range(1..=max);
        GrayImage::from_fn(w, h, |_, _| rng.gen()).unwrap()
    }

    #[test]
    fn grayscale_examples() {
        assert_eq!(to_grayscale(1, 1, &[255, 255, 255]).unwrap().get(0, 0), 255);
        assert_eq!(to_grayscale(1, 1, &[0, 0, 0]).unwrap().get(0, 0), 0);
        // 29.9 + 88.05 + 22.8 = 140.75
        assert_eq!(to_grayscale(1, 1, &[100, 150, 200]).unwrap().get(0, 0), 141);
        assert!(to_grayscale(2, 1, &[1, 2, 3]).is_err());
        assert!(to_grayscale(0, 1, &[]).is_err());
    }

    #[test]
    fn gray_image_rejects_bad_dims() {
        assert!(GrayImage::new(2, 2, vec![0; 3]).is_err());
        assert!(GrayImage::new(0, 2, vec![]).is_err());
    }

    #[test]
    fn integral_examples() {
        let ones = GrayImage::filled(3, 3, 1).unwrap();
        let ii = integral(&ones);
        assert_eq!(ii.at(3, 3), 9);
        assert_eq!(ii.at(0, 0), 0);
        let img = GrayImage::new(2, 2, vec![1, 2, 3, 4]).unwrap();
        let ii = integral(&img);
        assert_eq!(ii.at(2, 2), 10);
        assert_eq!(ii.at(1, 1), 1);
        assert_eq!(ii.at(2, 1), 3);
        assert_eq!(ii.at(1, 2), 4);
    }

    #[test]
    fn integral_borders_and_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let img = random_image(&mut rng, 20);
            let ii = integral(&img);
            for x in 0..=img.width() {
                assert_eq!(ii.at(x, 0), 0);
            }
            for y in 0..=img.height() {
                assert_eq!(ii.at(0, y), 0);
            }
            for y in 1..=img.height() {
                for x in 1..=img.width() {
                    assert!(ii.at(x, y) >= ii.at(x - 1, y));
                    assert!(ii.at(x, y) >= ii.at(x, y - 1));
                }
            }
            assert_eq!(ii.total(), img.data().iter().map(|&v| v as u64).sum::<u64>());
        }
    }

    #[test]
    fn brightening_a_pixel_never_decreases_entries() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let img = GrayImage::from_fn(10, 8, |_, _| rng.gen_range(0..200)).unwrap();
        let before = integral(&img);
        let mut brighter = img.clone();
        brighter.set(4, 3, img.get(4, 3) + 50);
        let after = integral(&brighter);
        for y in 0..=8 {
            for x in 0..=10 {
                assert!(after.at(x, y) >= before.at(x, y));
                if x > 4 && y > 3 {
                    assert_eq!(after.at(x, y), before.at(x, y) + 50);
                }
            }
        }
    }

    #[test]
    fn rect_sum_examples() {
        let ones = GrayImage::filled(3, 3, 1).unwrap();
        let ii = integral(&ones);
        assert_eq!(rect_sum(&ii, &ones.full_rect()).unwrap(), 9);
        assert_eq!(rect_sum(&ii, &Rect::new(1, 0, 1, 3)).unwrap(), 0);
        assert!(matches!(
            rect_sum(&ii, &Rect::new(0, 0, 4, 3)),
            Err(ImageError::OutOfBounds { .. })
        ));
    }

    #[test]
    fn rect_sum_matches_pixel_loop_on_8x8() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let img = GrayImage::from_fn(8, 8, |_, _| rng.gen()).unwrap();
        let ii = integral(&img);
        for _ in 0..200 {
            let r = Rect::new(
                rng.gen_range(0..=8),
                rng.gen_range(0..=8),
                rng.gen_range(0..=8),
                rng.gen_range(0..=8),
            );
            assert_eq!(rect_sum(&ii, &r).unwrap(), brute_sum(&img, &r));
            let sq: u64 = (r.y1..r.y2)
                .flat_map(|y| (r.x1..r.x2).map(move |x| (x, y)))
                .map(|(x, y)| (img.get(x as usize, y as usize) as u64).pow(2))
                .sum();
            assert_eq!(ii.rect_sum_squared(&r).unwrap(), sq);
        }
    }

    #[test]
    fn crop_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let img = random_image(&mut rng, 16);
        assert_eq!(crop(&img, &img.full_rect()).unwrap(), img);
        let px = crop(&img, &Rect::new(0, 0, 1, 1)).unwrap();
        assert_eq!((px.width(), px.height(), px.get(0, 0)), (1, 1, img.get(0, 0)));
        let r = Rect::new(0, 0, img.width() as u32, img.height() as u32);
        let once = crop(&img, &r).unwrap();
        assert_eq!(crop(&once, &once.full_rect()).unwrap(), once);
        assert!(crop(&img, &Rect::new(0, 0, 0, 1)).is_err());
        assert!(crop(&img, &Rect::new(0, 0, 100, 1)).is_err());
    }

    #[test]
    fn resize_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let img = random_image(&mut rng, 12);
        assert_eq!(resize_bilinear(&img, img.width(), img.height()).unwrap(), img);
        let uniform = GrayImage::filled(7, 5, 93).unwrap();
        let r = resize_bilinear(&uniform, 13, 3).unwrap();
        assert!(r.data().iter().all(|&v| v == 93));
        // midpoint 127.5 rounds half away from zero
        let ramp = GrayImage::new(2, 1, vec![0, 255]).unwrap();
        let r = resize_bilinear(&ramp, 3, 1).unwrap();
        assert_eq!(r.data(), &[0, 128, 255]);
        assert!(resize_bilinear(&img, 0, 3).is_err());
    }

    #[test]
    fn rotate_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let img = GrayImage::from_fn(21, 21, |_, _| rng.gen()).unwrap();
        assert_eq!(rotate(&img, 0.0), img);
        let back = rotate(&rotate(&img, 90.0), -90.0);
        let c = 10.0;
        for y in 0..21 {
            for x in 0..21 {
                let r = ((x as f64 - c).powi(2) + (y as f64 - c).powi(2)).sqrt();
                if r <= 9.5 {
                    let d = (back.get(x, y) as i32 - img.get(x, y) as i32).abs();
                    assert!(d <= 2, "({x},{y}) differs by {d}");
                }
            }
        }
        let uniform = GrayImage::filled(15, 11, 77).unwrap();
        let rot = rotate(&uniform, 33.0);
        for y in 0..11 {
            for x in 0..15 {
                let r = ((x as f64 - 7.0).powi(2) + (y as f64 - 5.0).powi(2)).sqrt();
                if r <= 5.0 {
                    assert_eq!(rot.get(x, y), 77);
                }
            }
        }
    }

    #[test]
    fn rotation_is_clockwise_positive() {
        // A bright pixel right of centre moves down for a positive angle.
        let mut img = GrayImage::filled(11, 11, 0).unwrap();
        img.set(9, 5, 255);
        let rot = rotate(&img, 90.0);
        assert_eq!(rot.get(5, 9), 255);
        let p = rotate_point((9.0, 5.0), (5.0, 5.0), 90.0);
        assert!((p.0 - 5.0).abs() < 1e-12 && (p.1 - 9.0).abs() < 1e-12);
    }

    #[test]
    fn iou_basics() {
        let a = Rect::new(0, 0, 10, 10);
        assert_eq!(a.iou(&a), 1.0);
        assert_eq!(a.iou(&Rect::new(10, 10, 20, 20)), 0.0);
        let b = Rect::new(5, 0, 15, 10);
        assert!((a.iou(&b) - 50.0 / 150.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn rect_canonicalization(a in 0u32..500, b in 0u32..500, c in 0u32..500, d in 0u32..500) {
            prop_assert_eq!(Rect::new(a, b, c, d), Rect::new(c, d, a, b));
            prop_assert_eq!(Rect::new(a, b, c, d), Rect::new(c, b, a, d));
            let r = Rect::new(a, b, c, d);
            prop_assert!(r.x1 <= r.x2 && r.y1 <= r.y2);
            prop_assert_eq!(r.width(), r.x2 - r.x1);
        }

        #[test]
        fn resampling_stays_in_range(
            w in 1usize..12, h in 1usize..12, tw in 1usize..20, th in 1usize..20,
            angle in -180.0f64..180.0, seed in any::<u64>()
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let img = GrayImage::from_fn(w, h, |_, _| rng.gen()).unwrap();
            let r = resize_bilinear(&img, tw, th).unwrap();
            prop_assert_eq!((r.width(), r.height()), (tw, th));
            let rot = rotate(&img, angle);
            prop_assert_eq!((rot.width(), rot.height()), (w, h));
        }
    }
}
