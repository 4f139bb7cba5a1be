//! Attentional cascade: an ordered list of boosted stages. A window is a face
//! only if every stage accepts it, so most background windows are rejected
//! after a handful of feature evaluations.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::imagecore::{crop, integral, resize_bilinear, GrayImage, IntegralImage, Rect};

use super::adaboost::{AdaBoost, AdaBoostConfig, Stump};
use super::features::{enumerate_features, eval_feature, HaarFeature};
use super::scan::{ScaledCascade, ScanParams};
use super::{DetectorError, Result, BASE_WINDOW};

pub const CASCADE_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CascadeStage {
    pub stumps: Vec<Stump>,
    pub threshold: f64,
}

impl CascadeStage {
    /// Sum of the vote weights of the stumps voting "face" for the 24x24
    /// window `ii`.
    pub fn score(&self, ii: &IntegralImage) -> Result<f64> {
        let mut sum = 0.0;
        for s in &self.stumps {
            if s.votes_face(eval_feature(&s.feature, ii, 0, 0, 1.0)?) {
                sum += s.alpha;
            }
        }
        Ok(sum)
    }

    pub fn accepts(&self, ii: &IntegralImage) -> Result<bool> {
        Ok(self.score(ii)? >= self.threshold)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cascade {
    pub base_window: u32,
    pub stages: Vec<CascadeStage>,
    pub version: u32,
}

impl Cascade {
    pub fn new(stages: Vec<CascadeStage>) -> Result<Cascade> {
        let c = Cascade { base_window: BASE_WINDOW, stages, version: CASCADE_VERSION };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.base_window != BASE_WINDOW {
            return Err(DetectorError::Model(format!("base window must be {BASE_WINDOW}, got {}", self.base_window)));
        }
        if self.stages.is_empty() {
            return Err(DetectorError::Model("cascade has no stages".into()));
        }
        for (i, st) in self.stages.iter().enumerate() {
            if st.stumps.is_empty() {
                return Err(DetectorError::Model(format!("stage {i} has no stumps")));
            }
            if let Some(s) = st.stumps.iter().find(|s| !(s.alpha.is_finite() && s.alpha >= 0.0)) {
                return Err(DetectorError::Model(format!("stage {i} has invalid vote weight {}", s.alpha)));
            }
        }
        Ok(())
    }

    /// Whether all stages accept a 24x24 window.
    pub fn accepts(&self, ii: &IntegralImage) -> Result<bool> {
        for stage in &self.stages {
            if !stage.accepts(ii)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn stump_count(&self) -> usize {
        self.stages.iter().map(|s| s.stumps.len()).sum()
    }
}

/// Per-stage training targets measured on the held-out split.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageGoal {
    pub min_detection_rate: f64,
    pub max_false_positive_rate: f64,
}

impl Default for StageGoal {
    fn default() -> Self {
        StageGoal { min_detection_rate: 0.995, max_false_positive_rate: 0.5 }
    }
}

#[derive(Clone, Debug)]
pub struct CascadeConfig {
    /// Goals for each stage; the last entry applies to any further stages.
    pub stage_goals: Vec<StageGoal>,
    pub max_stages: usize,
    pub max_stumps_per_stage: usize,
    /// Training stops once fewer negatives than this survive the cascade.
    pub min_negatives: usize,
    /// Fraction of each class held out to tune and check stage goals.
    pub validation_fraction: f64,
    pub seed: u64,
    /// Candidate features; every base-window feature when `None`.
    pub features: Option<Vec<HaarFeature>>,
    pub boost: AdaBoostConfig,
    /// Scan settings used when mining false positives from backgrounds.
    pub mining_scan: ScanParams,
}

impl Default for CascadeConfig {
    fn default() -> Self {
        CascadeConfig {
            stage_goals: vec![StageGoal::default()],
            max_stages: 20,
            max_stumps_per_stage: 200,
            min_negatives: 10,
            validation_fraction: 0.25,
            seed: 0x5eed,
            features: None,
            boost: AdaBoostConfig::default(),
            mining_scan: ScanParams::default(),
        }
    }
}

impl CascadeConfig {
    fn goal(&self, stage: usize) -> StageGoal {
        self.stage_goals[stage.min(self.stage_goals.len() - 1)]
    }
}

/// What one stage achieved on its validation split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stumps: usize,
    pub goal: StageGoal,
    pub detection_rate: f64,
    pub false_positive_rate: f64,
    pub train_negatives: usize,
    pub validation_negatives: usize,
    /// Negatives harvested from background images before this stage.
    pub mined_negatives: usize,
}

#[derive(Clone, Debug)]
pub struct CascadeTraining {
    pub cascade: Cascade,
    pub reports: Vec<StageReport>,
    pub stop_reason: StopReason,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    NegativesExhausted,
    MaxStages,
}

/// Builds a cascade from face and non-face patches, optionally topping up
/// negatives after each stage with false positives mined from background
/// images.
pub struct CascadeTrainer<'a> {
    cfg: CascadeConfig,
    backgrounds: &'a [GrayImage],
}

fn check_patches(set: &[GrayImage], what: &str) -> Result<()> {
    if set.is_empty() {
        return Err(DetectorError::Training(format!("{what} set is empty")));
    }
    if let Some(p) = set.iter().find(|p| p.width() != BASE_WINDOW as usize || p.height() != BASE_WINDOW as usize) {
        return Err(DetectorError::Training(format!(
            "{what} patches must be {BASE_WINDOW}x{BASE_WINDOW}, found {}x{}",
            p.width(),
            p.height()
        )));
    }
    Ok(())
}

fn split(mut items: Vec<IntegralImage>, fraction: f64, rng: &mut ChaCha8Rng) -> (Vec<IntegralImage>, Vec<IntegralImage>) {
    items.shuffle(rng);
    let held = ((items.len() as f64 * fraction).round() as usize).min(items.len().saturating_sub(1));
    let train = items.split_off(held);
    (train, items)
}

fn stage_scores(stumps: &[Stump], windows: &[IntegralImage]) -> Result<Vec<f64>> {
    let stage = CascadeStage { stumps: stumps.to_vec(), threshold: 0.0 };
    windows.iter().map(|w| stage.score(w)).collect()
}

impl<'a> CascadeTrainer<'a> {
    pub fn new(cfg: CascadeConfig) -> Self {
        CascadeTrainer { cfg, backgrounds: &[] }
    }

    pub fn backgrounds(mut self, backgrounds: &'a [GrayImage]) -> Self {
        self.backgrounds = backgrounds;
        self
    }

    pub fn train(&self, faces: &[GrayImage], nonfaces: &[GrayImage]) -> Result<CascadeTraining> {
        let cfg = &self.cfg;
        check_patches(faces, "face")?;
        check_patches(nonfaces, "non-face")?;
        if cfg.stage_goals.is_empty() || cfg.max_stages == 0 || cfg.max_stumps_per_stage == 0 {
            return Err(DetectorError::Config("need stage goals, a stage budget and a stump budget".into()));
        }
        for g in &cfg.stage_goals {
            if !(g.max_false_positive_rate > 0.0 && g.max_false_positive_rate < 1.0)
                || !(g.min_detection_rate > 0.0 && g.min_detection_rate <= 1.0)
            {
                return Err(DetectorError::Config(format!("invalid stage goal {g:?}")));
            }
        }
        let all_features;
        let features: &[HaarFeature] = match &cfg.features {
            Some(f) => f,
            None => {
                all_features = enumerate_features(BASE_WINDOW)?;
                &all_features
            }
        };

        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let (train_faces, val_faces) = split(faces.iter().map(integral).collect(), cfg.validation_fraction, &mut rng);
        let (mut train_neg, mut val_neg) =
            split(nonfaces.iter().map(integral).collect(), cfg.validation_fraction, &mut rng);
        let (train_target, val_target) = (train_neg.len(), val_neg.len());
        let val_faces = if val_faces.is_empty() { train_faces.clone() } else { val_faces };

        let mut stages: Vec<CascadeStage> = Vec::new();
        let mut reports = Vec::new();
        let mut mined_before = 0;
        let stop_reason = loop {
            if stages.len() == cfg.max_stages {
                break StopReason::MaxStages;
            }
            if train_neg.is_empty() || train_neg.len() + val_neg.len() < cfg.min_negatives {
                break StopReason::NegativesExhausted;
            }
            let k = stages.len();
            let goal = cfg.goal(k);
            let check_neg: &[IntegralImage] = if val_neg.is_empty() { &train_neg } else { &val_neg };

            let mut windows = train_faces.clone();
            windows.extend(train_neg.iter().cloned());
            let labels: Vec<bool> = (0..windows.len()).map(|i| i < train_faces.len()).collect();
            let mut boost = AdaBoost::new(features, &windows, &labels, &cfg.boost)?;

            let stage = loop {
                if boost.step()?.is_none() {
                    return Err(DetectorError::StageUnreachable {
                        stage: k,
                        reason: format!("no stump beats chance after {} stumps", boost.rounds().len()),
                    });
                }
                let stumps = boost.stumps();
                let face_scores = stage_scores(&stumps, &val_faces)?;
                let mut sorted = face_scores.clone();
                sorted.sort_by(|a, b| b.total_cmp(a));
                let need = ((goal.min_detection_rate * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
                // Slightly below the cut score so the boundary face passes
                // regardless of summation order.
                let threshold = sorted[need - 1] - 1e-9;
                let det = face_scores.iter().filter(|&&s| s >= threshold).count() as f64 / face_scores.len() as f64;
                let neg_scores = stage_scores(&stumps, check_neg)?;
                let fp = neg_scores.iter().filter(|&&s| s >= threshold).count() as f64 / neg_scores.len() as f64;
                tracing::debug!(stage = k, stumps = stumps.len(), det, fp, "stage progress");
                if fp <= goal.max_false_positive_rate && det >= goal.min_detection_rate {
                    reports.push(StageReport {
                        stumps: stumps.len(),
                        goal,
                        detection_rate: det,
                        false_positive_rate: fp,
                        train_negatives: train_neg.len(),
                        validation_negatives: check_neg.len(),
                        mined_negatives: mined_before,
                    });
                    break CascadeStage { stumps, threshold };
                }
                if stumps.len() >= cfg.max_stumps_per_stage {
                    return Err(DetectorError::StageUnreachable {
                        stage: k,
                        reason: format!(
                            "detection {det:.4} / false positives {fp:.4} after {} stumps (goal {:.4} / {:.4}; {} training and {} validation negatives)",
                            stumps.len(),
                            goal.min_detection_rate,
                            goal.max_false_positive_rate,
                            train_neg.len(),
                            check_neg.len()
                        ),
                    });
                }
            };
            tracing::info!(stage = k, stumps = stage.stumps.len(), train_negatives = train_neg.len(), validation_negatives = check_neg.len(), "stage trained");

            // Negatives for the next stage are this cascade's false positives.
            let keep = |set: Vec<IntegralImage>| -> Result<Vec<IntegralImage>> {
                let mut out = Vec::new();
                for w in set {
                    if stage.accepts(&w)? {
                        out.push(w);
                    }
                }
                Ok(out)
            };
            train_neg = keep(train_neg)?;
            val_neg = keep(val_neg)?;
            stages.push(stage);

            mined_before = 0;
            if !self.backgrounds.is_empty() && stages.len() < cfg.max_stages {
                let cascade = Cascade { base_window: BASE_WINDOW, stages: stages.clone(), version: CASCADE_VERSION };
                let want = (train_target - train_neg.len()) + (val_target - val_neg.len());
                let mut mined = mine_false_positives(&cascade, self.backgrounds, &cfg.mining_scan, want, &mut rng)?;
                mined_before = mined.len();
                let val_fill = (val_target - val_neg.len()).min(mined.len() * val_target / (train_target + val_target).max(1));
                val_neg.extend(mined.drain(..val_fill));
                train_neg.extend(mined);
            }
        };

        Ok(CascadeTraining { cascade: Cascade::new(stages)?, reports, stop_reason })
    }
}

/// Trains a cascade from face and non-face patch sets alone.
pub fn train_cascade(faces: &[GrayImage], nonfaces: &[GrayImage], cfg: &CascadeConfig) -> Result<CascadeTraining> {
    CascadeTrainer::new(cfg.clone()).train(faces, nonfaces)
}

/// Scans backgrounds (which contain no faces) and returns up to `want`
/// accepted windows as 24x24 patch integrals, sampled without replacement.
pub fn mine_false_positives(
    cascade: &Cascade,
    backgrounds: &[GrayImage],
    scan: &ScanParams,
    want: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<IntegralImage>> {
    if want == 0 {
        return Ok(Vec::new());
    }
    let mut hits: Vec<(usize, Rect)> = Vec::new();
    for (idx, img) in backgrounds.iter().enumerate() {
        let ii = integral(img);
        for scale in scan.scales(img.width(), img.height()) {
            let compiled = ScaledCascade::new(cascade, scale);
            let win = super::features::window_size(scale) as usize;
            let step = scan.step(win as u32) as usize;
            let mut y = 0;
            while y + win <= img.height() {
                let mut x = 0;
                while x + win <= img.width() {
                    if compiled.evaluate(&ii, x, y).is_some() {
                        hits.push((idx, Rect::from_xywh(x as u32, y as u32, win as u32, win as u32)));
                    }
                    x += step;
                }
                y += step;
            }
        }
    }
    hits.shuffle(rng);
    let mut out = Vec::with_capacity(want.min(hits.len()));
    for (idx, r) in hits {
        if out.len() == want {
            break;
        }
        let patch = resize_bilinear(&crop(&backgrounds[idx], &r)?, BASE_WINDOW as usize, BASE_WINDOW as usize)?;
        let ii = integral(&patch);
        // Resampling can move a window across a stage boundary.
        if cascade.accepts(&ii)? {
            out.push(ii);
        }
    }
    Ok(out)
}
