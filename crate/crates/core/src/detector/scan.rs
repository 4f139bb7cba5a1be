use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::imagecore::{integral, GrayImage, IntegralImage, Rect};

use super::features::{window_size, MIN_STD_DEV};
use super::{Cascade, BASE_WINDOW};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanParams {
    /// Ratio between consecutive pyramid window sizes (> 1).
    pub scale_factor: f64,
    /// Window step as a fraction of the window size; at least one pixel.
    pub stride: f64,
    /// Smallest window edge in pixels.
    pub min_window: u32,
    /// Largest window edge in pixels; unbounded when `None`.
    pub max_window: Option<u32>,
    /// Overlap above which the weaker of two candidates is suppressed.
    pub nms_iou: f64,
}

impl Default for ScanParams {
    fn default() -> Self {
        ScanParams { scale_factor: 1.25, stride: 1.0 / 12.0, min_window: 24, max_window: None, nms_iou: 0.3 }
    }
}

impl ScanParams {
    /// Pyramid scales for an image of the given size, smallest first.
    pub fn scales(&self, width: usize, height: usize) -> Vec<f64> {
        let limit = width.min(height) as u32;
        let limit = self.max_window.map_or(limit, |m| m.min(limit));
        let mut out = Vec::new();
        if !(self.scale_factor > 1.0) {
            return out;
        }
        let mut scale = (self.min_window.max(BASE_WINDOW) as f64) / BASE_WINDOW as f64;
        while window_size(scale) <= limit {
            out.push(scale);
            scale *= self.scale_factor;
        }
        out
    }

    pub fn step(&self, window: u32) -> u32 {
        ((self.stride * window as f64).round() as u32).max(1)
    }
}

/// A candidate window with its cascade margin (sum over stages of stage
/// score minus stage threshold).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Detection {
    pub rect: Rect,
    pub score: f64,
}

#[derive(Clone, Copy)]
struct CompiledRect {
    x: usize,
    y: usize,
    w: usize,
    h: usize,
    weight: f64,
}

struct CompiledStump {
    rects: [CompiledRect; 4],
    count: usize,
    inv_area: f64,
    threshold: f64,
    polarity: i8,
    alpha: f64,
}

struct CompiledStage {
    stumps: Vec<CompiledStump>,
    threshold: f64,
}

/// A cascade with every feature rectangle pre-scaled for one window size.
pub(crate) struct ScaledCascade {
    window: usize,
    stages: Vec<CompiledStage>,
}

impl ScaledCascade {
    pub(crate) fn new(cascade: &Cascade, scale: f64) -> ScaledCascade {
        let stages = cascade
            .stages
            .iter()
            .map(|stage| CompiledStage {
                threshold: stage.threshold,
                stumps: stage
                    .stumps
                    .iter()
                    .map(|s| {
                        let placed = s.feature.scaled_rects(scale);
                        let mut rects = [CompiledRect { x: 0, y: 0, w: 0, h: 0, weight: 0.0 }; 4];
                        for (slot, r) in rects.iter_mut().zip(&placed) {
                            *slot = CompiledRect {
                                x: r.x as usize,
                                y: r.y as usize,
                                w: r.w as usize,
                                h: r.h as usize,
                                weight: r.weight as f64,
                            };
                        }
                        let (sw, sh) = s.feature.scaled_cell(scale);
                        CompiledStump {
                            rects,
                            count: placed.len(),
                            inv_area: 1.0 / (sw * sh) as f64,
                            threshold: s.threshold,
                            polarity: s.polarity,
                            alpha: s.alpha,
                        }
                    })
                    .collect(),
            })
            .collect();
        ScaledCascade { window: window_size(scale) as usize, stages }
    }

    /// Margin of the window at `(x, y)` if every stage accepts it.
    #[inline]
    pub(crate) fn evaluate(&self, ii: &IntegralImage, x: usize, y: usize) -> Option<f64> {
        let (_, std) = ii.window_stats(x, y, self.window, self.window);
        let norm = 1.0 / std.max(MIN_STD_DEV);
        let mut margin = 0.0;
        for stage in &self.stages {
            let mut sum = 0.0;
            for s in &stage.stumps {
                let mut raw = 0.0;
                for r in &s.rects[..s.count] {
                    raw += r.weight * ii.sum_xywh(x + r.x, y + r.y, r.w, r.h) as f64;
                }
                let value = raw * s.inv_area * norm;
                let face = if s.polarity >= 0 { value < s.threshold } else { value > s.threshold };
                if face {
                    sum += s.alpha;
                }
            }
            if sum < stage.threshold {
                return None;
            }
            margin += sum - stage.threshold;
        }
        Some(margin)
    }
}

/// Every pyramid window accepted by all cascade stages, in scan order
/// (scale, then row, then column).
pub fn scan_candidates(ii: &IntegralImage, cascade: &Cascade, params: &ScanParams) -> Vec<Detection> {
    let mut out = Vec::new();
    for scale in params.scales(ii.width(), ii.height()) {
        let compiled = ScaledCascade::new(cascade, scale);
        let win = compiled.window;
        let step = params.step(win as u32) as usize;
        let mut y = 0;
        while y + win <= ii.height() {
            let mut x = 0;
            while x + win <= ii.width() {
                if let Some(score) = compiled.evaluate(ii, x, y) {
                    out.push(Detection { rect: Rect::from_xywh(x as u32, y as u32, win as u32, win as u32), score });
                }
                x += step;
            }
            y += step;
        }
    }
    out
}

fn by_priority(a: &Detection, b: &Detection) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then(b.rect.area().cmp(&a.rect.area()))
        .then(a.rect.cmp(&b.rect))
}

/// Greedy non-maximum suppression: visits candidates by descending score
/// and keeps each one whose IoU with every kept box is at most
/// `iou_threshold`. Survivors are returned in visiting order.
pub fn nms(candidates: &[Detection], iou_threshold: f64) -> Vec<Detection> {
    let mut sorted = candidates.to_vec();
    sorted.sort_by(by_priority);
    let mut kept: Vec<Detection> = Vec::new();
    for c in sorted {
        if kept.iter().all(|k| k.rect.iou(&c.rect) <= iou_threshold) {
            kept.push(c);
        }
    }
    kept
}

/// Detections with scores, sorted by descending area.
pub fn detect_scored(img: &GrayImage, cascade: &Cascade, params: &ScanParams) -> Vec<Detection> {
    if img.width() < params.min_window as usize || img.height() < params.min_window as usize {
        return Vec::new();
    }
    let ii = integral(img);
    let mut kept = nms(&scan_candidates(&ii, cascade, params), params.nms_iou);
    kept.sort_by(|a, b| b.rect.area().cmp(&a.rect.area()).then(by_priority(a, b)));
    kept
}

/// Face rectangles found in `img`, sorted by descending area. Images
/// smaller than the minimum window yield no detections.
pub fn detect(img: &GrayImage, cascade: &Cascade, params: &ScanParams) -> Vec<Rect> {
    detect_scored(img, cascade, params).into_iter().map(|d| d.rect).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// O(n^2) reference: repeatedly take the best remaining candidate and
    /// drop everything that overlaps it too much.
    fn brute_nms(cands: &[Detection], thr: f64) -> Vec<Detection> {
        let mut remaining: Vec<Detection> = cands.to_vec();
        let mut out = Vec::new();
        while !remaining.is_empty() {
            let mut best = 0;
            for i in 1..remaining.len() {
                if by_priority(&remaining[i], &remaining[best]) == Ordering::Less {
                    best = i;
                }
            }
            let b = remaining.swap_remove(best);
            remaining.retain(|r| r.rect.iou(&b.rect) <= thr);
            out.push(b);
        }
        out
    }

    fn random_dets(rng: &mut ChaCha8Rng, n: usize) -> Vec<Detection> {
        (0..n)
            .map(|_| {
                let x = rng.gen_range(0..60);
                let y = rng.gen_range(0..60);
                let s = rng.gen_range(5..30);
                Detection { rect: Rect::from_xywh(x, y, s, s), score: rng.gen_range(0.0..10.0) }
            })
            .collect()
    }

    #[test]
    fn nms_examples() {
        let a = Detection { rect: Rect::new(0, 0, 10, 10), score: 1.0 };
        assert_eq!(nms(&[a], 0.3), vec![a]);
        let b = Detection { score: 2.0, ..a };
        assert_eq!(nms(&[a, b], 0.3), vec![b]);
    }

    #[test]
    fn nms_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..50 {
            let dets = random_dets(&mut rng, 50);
            assert_eq!(nms(&dets, 0.3), brute_nms(&dets, 0.3));
        }
    }

    #[test]
    fn nms_is_idempotent_subset() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for thr in [0.1, 0.3, 0.6] {
            let dets = random_dets(&mut rng, 40);
            let once = nms(&dets, thr);
            assert!(once.iter().all(|d| dets.contains(d)));
            assert_eq!(nms(&once, thr), once);
            for (i, a) in once.iter().enumerate() {
                for b in &once[i + 1..] {
                    assert!(a.rect.iou(&b.rect) <= thr);
                }
            }
            for d in &dets {
                assert!(once.contains(d) || once.iter().any(|k| k.rect.iou(&d.rect) > thr && by_priority(k, d).is_lt()));
            }
        }
    }

    #[test]
    fn pyramid_scales() {
        let p = ScanParams::default();
        let s = p.scales(320, 240);
        assert_eq!(s[0], 1.0);
        assert!(s.windows(2).all(|w| (w[1] / w[0] - 1.25).abs() < 1e-12));
        assert!(window_size(*s.last().unwrap()) <= 240);
        assert!(window_size(s.last().unwrap() * 1.25) > 240);
        assert!(p.scales(23, 100).is_empty());
        assert_eq!(p.step(24), 2);
        assert_eq!(p.step(6), 1);
    }
}
