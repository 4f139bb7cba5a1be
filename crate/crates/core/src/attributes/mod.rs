//! Smile and eye-open likelihoods plus yaw/roll pose for a cropped face.

mod features;
mod landmarks;
mod logistic;
mod pose;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::imagecore::{GrayImage, ImageError};

pub use features::{
    extract_attribute_features, region_features, sample_region, Region, RegionPatch, FEATURE_DIM, PATCH_HEIGHT,
    PATCH_WIDTH,
};
pub use landmarks::{locate_landmarks, Landmarks};
pub use logistic::{
    decode_attribute_model, encode_attribute_model, load_attribute_model, loss_and_gradient, report_probability,
    save_attribute_model, sigmoid, train_logistic, AttributeKind, LogisticConfig, LogisticModel, SATURATION_LOGIT,
};
pub use pose::{estimate_roll, estimate_yaw, refined_roll, DEFAULT_YAW_GAIN, MAX_ANGLE};

#[derive(Debug, thiserror::Error)]
pub enum AttributeError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("feature dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("training failed: {0}")]
    Training(String),
    #[error("bad attribute model: {0}")]
    Model(String),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, AttributeError>;

/// Pose angles in degrees and reported probabilities for one face.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributeSet {
    pub euler_y: f64,
    pub euler_z: f64,
    pub smile_p: f64,
    pub left_eye_open_p: f64,
    pub right_eye_open_p: f64,
}

/// The three trained likelihood models and the yaw calibration.
#[derive(Clone, Debug, PartialEq)]
pub struct AttributeModels {
    pub smile: LogisticModel,
    pub left_eye: LogisticModel,
    pub right_eye: LogisticModel,
    pub yaw_gain: f64,
}

impl AttributeModels {
    pub fn new(smile: LogisticModel, left_eye: LogisticModel, right_eye: LogisticModel) -> Result<Self> {
        for (name, m) in [("smile", &smile), ("left-eye", &left_eye), ("right-eye", &right_eye)] {
            if m.input_dim != FEATURE_DIM {
                return Err(AttributeError::Model(format!("{name} model has input_dim {}, want {FEATURE_DIM}", m.input_dim)));
            }
        }
        Ok(AttributeModels { smile, left_eye, right_eye, yaw_gain: DEFAULT_YAW_GAIN })
    }

    /// Loads `smile.rela`, `left-eye.rela` and `right-eye.rela` from `dir`.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let load = |kind: AttributeKind| -> Result<LogisticModel> {
            let (got, model) = load_attribute_model(dir.join(kind.file_name()))?;
            if got != kind {
                return Err(AttributeError::Model(format!("{} holds a {got} model", kind.file_name())));
            }
            Ok(model)
        };
        Self::new(load(AttributeKind::Smile)?, load(AttributeKind::LeftEye)?, load(AttributeKind::RightEye)?)
    }

    pub fn save_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        for (kind, m) in self.iter() {
            save_attribute_model(dir.join(kind.file_name()), kind, m)?;
        }
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (AttributeKind, &LogisticModel)> {
        [
            (AttributeKind::Smile, &self.smile),
            (AttributeKind::LeftEye, &self.left_eye),
            (AttributeKind::RightEye, &self.right_eye),
        ]
        .into_iter()
    }

    /// Full attribute record for a face crop.
    pub fn estimate(&self, face: &GrayImage) -> Result<AttributeSet> {
        let lm = locate_landmarks(face)?;
        self.estimate_with(face, &lm)
    }

    pub fn estimate_with(&self, face: &GrayImage, lm: &Landmarks) -> Result<AttributeSet> {
        let prob = |m: &LogisticModel, region| -> Result<f64> {
            let (x, _) = extract_attribute_features(face, lm, region);
            m.predict(&x)
        };
        Ok(AttributeSet {
            euler_y: estimate_yaw(face, lm, self.yaw_gain)?,
            euler_z: refined_roll(face, lm)?,
            smile_p: prob(&self.smile, Region::Mouth)?,
            left_eye_open_p: prob(&self.left_eye, Region::LeftEye)?,
            right_eye_open_p: prob(&self.right_eye, Region::RightEye)?,
        })
    }
}

impl AttributeKind {
    /// Face region the model looks at.
    pub fn region(self) -> Region {
        match self {
            AttributeKind::Smile => Region::Mouth,
            AttributeKind::LeftEye => Region::LeftEye,
            AttributeKind::RightEye => Region::RightEye,
        }
    }
}

/// Feature vectors of region patches together with their mirror images.
pub fn augmented_features(patches: &[GrayImage]) -> Vec<Vec<f64>> {
    patches
        .iter()
        .flat_map(|p| [region_features(p), region_features(&p.mirror_horizontal())])
        .collect()
}

/// Trains one attribute model from positive and negative region patches,
/// each also used mirrored.
pub fn train_attribute_model(positives: &[GrayImage], negatives: &[GrayImage], cfg: &LogisticConfig) -> Result<LogisticModel> {
    let mut samples = augmented_features(positives);
    let mut labels = vec![true; samples.len()];
    let neg = augmented_features(negatives);
    labels.extend(std::iter::repeat_n(false, neg.len()));
    samples.extend(neg);
    train_logistic(&samples, &labels, cfg)
}

/// A face crop with ground-truth attribute labels.
#[derive(Clone, Debug)]
pub struct LabeledFace {
    pub face: GrayImage,
    pub smiling: bool,
    pub left_eye_open: bool,
    pub right_eye_open: bool,
}

impl LabeledFace {
    pub fn label(&self, kind: AttributeKind) -> bool {
        match kind {
            AttributeKind::Smile => self.smiling,
            AttributeKind::LeftEye => self.left_eye_open,
            AttributeKind::RightEye => self.right_eye_open,
        }
    }
}

/// Region patches of `faces` split by their label for `kind`.
pub fn labeled_patches(faces: &[LabeledFace], kind: AttributeKind) -> Result<(Vec<GrayImage>, Vec<GrayImage>)> {
    let (mut pos, mut neg) = (Vec::new(), Vec::new());
    for f in faces {
        let patch = sample_region(&f.face, &locate_landmarks(&f.face)?, kind.region()).patch;
        if f.label(kind) {
            pos.push(patch);
        } else {
            neg.push(patch);
        }
    }
    Ok((pos, neg))
}

/// Trains all three models from labeled face crops. Both eye models are
/// one model fitted to the pooled left and right eye patches, so that a
/// mirrored face reports swapped eye probabilities.
pub fn train_attribute_models(faces: &[LabeledFace], cfg: &LogisticConfig) -> Result<AttributeModels> {
    let (pos, neg) = labeled_patches(faces, AttributeKind::Smile)?;
    let smile = train_attribute_model(&pos, &neg, cfg)?;
    let (mut pos, mut neg) = labeled_patches(faces, AttributeKind::LeftEye)?;
    let (rp, rn) = labeled_patches(faces, AttributeKind::RightEye)?;
    pos.extend(rp);
    neg.extend(rn);
    let eye = train_attribute_model(&pos, &neg, cfg)?;
    AttributeModels::new(smile, eye.clone(), eye)
}

