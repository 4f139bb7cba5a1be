//! Discrete AdaBoost over single-feature threshold classifiers.
//!
//! Feature responses of every training window are computed once, sorted per
//! feature, and reused by every boosting round (when they fit the memory
//! budget). Each round is then a linear scan per feature over cumulative
//! class weights.

use serde::{Deserialize, Serialize};

use crate::imagecore::IntegralImage;

use super::features::{eval_feature, normalize, HaarFeature};
use super::{DetectorError, Result, BASE_WINDOW};

/// Lower bound on a round's weighted error when computing its vote weight.
pub const MIN_ROUND_ERROR: f64 = 1e-10;

/// Errors closer than this are treated as ties and resolved by scan order.
const TIE_EPS: f64 = 1e-12;

/// A one-feature threshold classifier with a vote weight. Votes "face" when
/// `polarity * value < polarity * threshold`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stump {
    pub feature: HaarFeature,
    pub threshold: f64,
    pub polarity: i8,
    pub alpha: f64,
}

impl Stump {
    #[inline]
    pub fn votes_face(&self, value: f64) -> bool {
        if self.polarity >= 0 {
            value < self.threshold
        } else {
            value > self.threshold
        }
    }

    /// Evaluates the stump on a 24x24 training window.
    pub fn votes_face_on(&self, window: &IntegralImage) -> Result<bool> {
        Ok(self.votes_face(eval_feature(&self.feature, window, 0, 0, 1.0)?))
    }
}

#[derive(Clone, Debug)]
pub struct AdaBoostConfig {
    /// Largest sorted feature table to keep in memory, in bytes. Larger
    /// problems recompute responses every round.
    pub memory_budget_bytes: usize,
}

impl Default for AdaBoostConfig {
    fn default() -> Self {
        AdaBoostConfig { memory_budget_bytes: 2 << 30 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoostRound {
    pub stump: Stump,
    /// Index of the chosen feature in the candidate list.
    pub feature_index: usize,
    pub weighted_error: f64,
    /// Unweighted training error of the strong classifier after this round.
    pub strong_error: f64,
}

/// Why boosting stopped before the requested number of rounds.
#[derive(Clone, Debug, PartialEq)]
pub struct EarlyStop {
    pub round: usize,
    pub best_error: f64,
}

#[derive(Clone, Debug)]
pub struct AdaBoostOutcome {
    pub stumps: Vec<Stump>,
    pub rounds: Vec<BoostRound>,
    pub early_stop: Option<EarlyStop>,
}

/// Responses of one feature over all samples, in ascending order.
struct SortedColumn<'a> {
    values: &'a [f32],
    index: &'a [u16],
}

enum Responses {
    Cached { values: Vec<f32>, index: Vec<u16> },
    OnTheFly { stds: Vec<f64> },
}

/// Incremental AdaBoost trainer; one call to [`AdaBoost::step`] per round.
pub struct AdaBoost<'a> {
    features: &'a [HaarFeature],
    windows: &'a [IntegralImage],
    labels: Vec<bool>,
    weights: Vec<f64>,
    scores: Vec<f64>,
    alpha_sum: f64,
    responses: Responses,
    rounds: Vec<BoostRound>,
    last_best_error: f64,
    scratch_values: Vec<f32>,
    scratch_index: Vec<u16>,
}

#[derive(Clone, Copy)]
struct Candidate {
    error: f64,
    feature: usize,
    /// Number of sorted samples below the threshold.
    split: usize,
    threshold: f64,
    polarity: i8,
}

fn sort_key(v: f32) -> u32 {
    let bits = v.to_bits();
    if bits & 0x8000_0000 != 0 {
        !bits
    } else {
        bits | 0x8000_0000
    }
}

fn sort_column(raw: &[f32], values: &mut [f32], index: &mut [u16], keys: &mut Vec<u64>) {
    keys.clear();
    keys.extend(raw.iter().enumerate().map(|(i, &v)| ((sort_key(v) as u64) << 16) | i as u64));
    keys.sort_unstable();
    for (k, key) in keys.iter().enumerate() {
        let i = (key & 0xffff) as usize;
        index[k] = i as u16;
        values[k] = raw[i];
    }
}

fn window_std(ii: &IntegralImage) -> f64 {
    ii.window_stats(0, 0, BASE_WINDOW as usize, BASE_WINDOW as usize).1
}

#[inline]
fn response(f: &HaarFeature, ii: &IntegralImage, std: f64) -> f32 {
    let raw = f.raw_value(ii, 0, 0, 1.0).expect("windows are validated as 24x24");
    normalize(raw, (f.w as u32 * f.h as u32) as f64, std) as f32
}

impl<'a> AdaBoost<'a> {
    pub fn new(
        features: &'a [HaarFeature],
        windows: &'a [IntegralImage],
        labels: &[bool],
        cfg: &AdaBoostConfig,
    ) -> Result<Self> {
        if windows.len() != labels.len() {
            return Err(DetectorError::Training(format!(
                "{} windows but {} labels",
                windows.len(),
                labels.len()
            )));
        }
        if features.is_empty() {
            return Err(DetectorError::Training("no candidate features".into()));
        }
        if windows.len() > u16::MAX as usize {
            return Err(DetectorError::Training(format!(
                "at most {} training windows are supported, got {}",
                u16::MAX,
                windows.len()
            )));
        }
        if let Some(bad) = windows
            .iter()
            .find(|w| w.width() != BASE_WINDOW as usize || w.height() != BASE_WINDOW as usize)
        {
            return Err(DetectorError::Training(format!(
                "training windows must be {BASE_WINDOW}x{BASE_WINDOW}, got {}x{}",
                bad.width(),
                bad.height()
            )));
        }
        let faces = labels.iter().filter(|&&l| l).count();
        let nonfaces = labels.len() - faces;
        if faces == 0 || nonfaces == 0 {
            return Err(DetectorError::Training(format!(
                "need at least one sample of each class, got {faces} faces and {nonfaces} non-faces"
            )));
        }
        let weights = labels
            .iter()
            .map(|&l| if l { 0.5 / faces as f64 } else { 0.5 / nonfaces as f64 })
            .collect();

        let n = windows.len();
        let stds: Vec<f64> = windows.iter().map(window_std).collect();
        let table_bytes = features.len() * n * (4 + 2);
        let responses = if table_bytes <= cfg.memory_budget_bytes {
            let mut values = vec![0f32; features.len() * n];
            let mut index = vec![0u16; features.len() * n];
            let mut raw = vec![0f32; n];
            let mut keys = Vec::with_capacity(n);
            for (j, f) in features.iter().enumerate() {
                for (i, w) in windows.iter().enumerate() {
                    raw[i] = response(f, w, stds[i]);
                }
                let span = j * n..(j + 1) * n;
                sort_column(&raw, &mut values[span.clone()], &mut index[span], &mut keys);
            }
            Responses::Cached { values, index }
        } else {
            tracing::debug!(table_bytes, "feature table exceeds budget; recomputing per round");
            Responses::OnTheFly { stds }
        };

        Ok(AdaBoost {
            features,
            windows,
            labels: labels.to_vec(),
            weights,
            scores: vec![0.0; n],
            alpha_sum: 0.0,
            responses,
            rounds: Vec::new(),
            last_best_error: f64::NAN,
            scratch_values: vec![0.0; n],
            scratch_index: vec![0; n],
        })
    }

    /// Lowest weighted error found by the most recent call to `step`.
    pub fn last_best_error(&self) -> f64 {
        self.last_best_error
    }

    pub fn rounds(&self) -> &[BoostRound] {
        &self.rounds
    }

    pub fn stumps(&self) -> Vec<Stump> {
        self.rounds.iter().map(|r| r.stump).collect()
    }

    /// Current sample weights (sum to 1).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Strong-classifier score `sum(alpha * vote)` of each training sample.
    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    fn best_in_column(&self, j: usize, col: &SortedColumn<'_>, pos_total: f64, neg_total: f64) -> Candidate {
        let n = col.values.len();
        let mut best = Candidate { error: f64::INFINITY, feature: j, split: 0, threshold: 0.0, polarity: 1 };
        let mut below_pos = 0.0;
        let mut below_neg = 0.0;
        for k in 0..=n {
            let boundary = k == 0 || k == n || col.values[k - 1] < col.values[k];
            if boundary {
                let err_pos = (pos_total - below_pos) + below_neg;
                let err_neg = below_pos + (neg_total - below_neg);
                for (err, polarity) in [(err_pos, 1i8), (err_neg, -1i8)] {
                    if err < best.error - TIE_EPS {
                        let threshold = if k == 0 {
                            col.values[0] as f64 - 1.0
                        } else if k == n {
                            col.values[n - 1] as f64 + 1.0
                        } else {
                            (col.values[k - 1] as f64 + col.values[k] as f64) / 2.0
                        };
                        best = Candidate { error: err, feature: j, split: k, threshold, polarity };
                    }
                }
            }
            if k < n {
                let i = col.index[k] as usize;
                if self.labels[i] {
                    below_pos += self.weights[i];
                } else {
                    below_neg += self.weights[i];
                }
            }
        }
        best
    }

    /// Runs one boosting round. Returns `Ok(None)` without changing state
    /// when no stump reaches a weighted error below 0.5.
    pub fn step(&mut self) -> Result<Option<BoostRound>> {
        let (pos_total, neg_total) = self.labels.iter().zip(&self.weights).fold((0.0, 0.0), |acc, (&l, &w)| {
            if l {
                (acc.0 + w, acc.1)
            } else {
                (acc.0, acc.1 + w)
            }
        });
        let n = self.windows.len();
        let mut best: Option<Candidate> = None;
        let mut keys = Vec::with_capacity(n);
        let mut raw = vec![0f32; n];
        for j in 0..self.features.len() {
            let cand = match &self.responses {
                Responses::Cached { values, index } => {
                    let col = SortedColumn { values: &values[j * n..(j + 1) * n], index: &index[j * n..(j + 1) * n] };
                    self.best_in_column(j, &col, pos_total, neg_total)
                }
                Responses::OnTheFly { stds } => {
                    let f = &self.features[j];
                    for (i, w) in self.windows.iter().enumerate() {
                        raw[i] = response(f, w, stds[i]);
                    }
                    let mut values = std::mem::take(&mut self.scratch_values);
                    let mut index = std::mem::take(&mut self.scratch_index);
                    sort_column(&raw, &mut values, &mut index, &mut keys);
                    let cand = self.best_in_column(j, &SortedColumn { values: &values, index: &index }, pos_total, neg_total);
                    self.scratch_values = values;
                    self.scratch_index = index;
                    cand
                }
            };
            if best.is_none_or(|b| cand.error < b.error - TIE_EPS) {
                best = Some(cand);
            }
        }
        let best = best.expect("features is non-empty");
        self.last_best_error = best.error;
        if !(best.error < 0.5) {
            return Ok(None);
        }

        let eps = best.error.max(MIN_ROUND_ERROR);
        let alpha = ((1.0 - eps) / eps).ln() / 2.0;
        let stump = Stump {
            feature: self.features[best.feature],
            threshold: best.threshold,
            polarity: best.polarity,
            alpha,
        };

        let votes = self.votes_for(best.feature, best.split, best.polarity);
        let mut total = 0.0;
        for i in 0..n {
            let correct = votes[i] == self.labels[i];
            self.weights[i] *= if correct { (-alpha).exp() } else { alpha.exp() };
            total += self.weights[i];
            if votes[i] {
                self.scores[i] += alpha;
            }
        }
        for w in &mut self.weights {
            *w /= total;
        }
        self.alpha_sum += alpha;
        let cut = 0.5 * self.alpha_sum;
        let wrong = self.scores.iter().zip(&self.labels).filter(|(&s, &l)| (s >= cut) != l).count();
        let round = BoostRound {
            stump,
            feature_index: best.feature,
            weighted_error: best.error,
            strong_error: wrong as f64 / n as f64,
        };
        self.rounds.push(round.clone());
        Ok(Some(round))
    }

    /// Face votes of feature `j`'s stump for every sample, derived from the
    /// sorted order so they agree exactly with the error computed in the scan.
    fn votes_for(&mut self, j: usize, split: usize, polarity: i8) -> Vec<bool> {
        let n = self.windows.len();
        let mut votes = vec![false; n];
        let mut mark = |index: &[u16]| {
            for (k, &i) in index.iter().enumerate() {
                votes[i as usize] = if polarity > 0 { k < split } else { k >= split };
            }
        };
        match &self.responses {
            Responses::Cached { index, .. } => mark(&index[j * n..(j + 1) * n]),
            Responses::OnTheFly { stds } => {
                let f = &self.features[j];
                let raw: Vec<f32> = self.windows.iter().zip(stds).map(|(w, &s)| response(f, w, s)).collect();
                let mut keys = Vec::with_capacity(n);
                sort_column(&raw, &mut self.scratch_values, &mut self.scratch_index, &mut keys);
                mark(&self.scratch_index);
            }
        }
        votes
    }
}

/// Trains `rounds` stumps on labelled 24x24 windows (`true` = face).
/// Stops early, reporting why, when a round cannot beat chance.
pub fn train_adaboost(
    features: &[HaarFeature],
    windows: &[IntegralImage],
    labels: &[bool],
    rounds: usize,
    cfg: &AdaBoostConfig,
) -> Result<AdaBoostOutcome> {
    if rounds == 0 {
        return Err(DetectorError::Training("at least one boosting round is required".into()));
    }
    let mut boost = AdaBoost::new(features, windows, labels, cfg)?;
    let mut early_stop = None;
    for round in 0..rounds {
        if boost.step()?.is_none() {
            let best_error = boost.last_best_error();
            tracing::warn!(round, best_error, "no stump beats chance; stopping early");
            early_stop = Some(EarlyStop { round, best_error });
            break;
        }
    }
    Ok(AdaBoostOutcome { stumps: boost.stumps(), rounds: boost.rounds().to_vec(), early_stop })
}
