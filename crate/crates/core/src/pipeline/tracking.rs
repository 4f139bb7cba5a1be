use serde::{Deserialize, Serialize};

use crate::imagecore::Rect;

/// Minimum overlap for a detection to continue a track.
pub const TRACK_IOU: f64 = 0.3;
/// Frames a track survives without a matching detection.
pub const DEFAULT_MAX_AGE: u32 = 15;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Track {
    pub id: u64,
    pub rect: Rect,
    /// Consecutive frames without a match.
    pub missed: u32,
}

/// Tracking ids for one stream, starting at 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackState {
    active: Vec<Track>,
    next_id: u64,
    pub max_age: u32,
}

impl Default for TrackState {
    fn default() -> Self {
        TrackState::new(DEFAULT_MAX_AGE)
    }
}

impl TrackState {
    pub fn new(max_age: u32) -> Self {
        TrackState { active: Vec::new(), next_id: 0, max_age }
    }

    pub fn active(&self) -> &[Track] {
        &self.active
    }

    pub fn next_id(&self) -> u64 {
        self.next_id
    }

    /// Ids for `rects`, parallel to it. Pairs are matched greedily by
    /// descending IoU (ties: lower track id, then lower rect index); other
    /// rects open new tracks and unmatched tracks age out after `max_age`.
    pub fn assign(&mut self, rects: &[Rect]) -> Vec<u64> {
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for (ti, t) in self.active.iter().enumerate() {
            for (ri, r) in rects.iter().enumerate() {
                let iou = t.rect.iou(r);
                if iou >= TRACK_IOU {
                    pairs.push((iou, ti, ri));
                }
            }
        }
        pairs.sort_by(|a, b| {
            b.0.total_cmp(&a.0).then(self.active[a.1].id.cmp(&self.active[b.1].id)).then(a.2.cmp(&b.2))
        });
        let mut track_used = vec![false; self.active.len()];
        let mut out: Vec<Option<u64>> = vec![None; rects.len()];
        for (_, ti, ri) in pairs {
            if track_used[ti] || out[ri].is_some() {
                continue;
            }
            track_used[ti] = true;
            out[ri] = Some(self.active[ti].id);
            self.active[ti].rect = rects[ri];
            self.active[ti].missed = 0;
        }
        for (t, used) in self.active.iter_mut().zip(&track_used) {
            if !used {
                t.missed += 1;
            }
        }
        let max_age = self.max_age;
        self.active.retain(|t| t.missed <= max_age);
        let mut ids = Vec::with_capacity(rects.len());
        for (ri, id) in out.into_iter().enumerate() {
            let id = id.unwrap_or_else(|| {
                let id = self.next_id;
                self.next_id += 1;
                self.active.push(Track { id, rect: rects[ri], missed: 0 });
                id
            });
            ids.push(id);
        }
        ids
    }
}
