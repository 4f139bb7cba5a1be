//! Haar-feature cascade face detector: feature enumeration and evaluation,
//! AdaBoost stump training, cascade assembly, pyramid scanning and
//! non-maximum suppression.

mod adaboost;
mod cascade;
mod features;
mod model_io;
mod scan;

pub use adaboost::{
    train_adaboost, AdaBoost, AdaBoostConfig, AdaBoostOutcome, BoostRound, EarlyStop, Stump, MIN_ROUND_ERROR,
};
pub use cascade::{
    mine_false_positives, train_cascade, Cascade, CascadeConfig, CascadeStage, CascadeTrainer, CascadeTraining,
    StageGoal, StageReport, StopReason, CASCADE_VERSION,
};
pub use features::{enumerate_features, eval_feature, window_size, FeatureKind, HaarFeature, WeightedRect, MIN_STD_DEV};
pub use model_io::{decode_cascade, dump_cascade, encode_cascade, load_cascade, save_cascade, CASCADE_MAGIC};
pub use scan::{detect, detect_scored, nms, scan_candidates, Detection, ScanParams};

use thiserror::Error;

/// Edge length of the square detection window features are defined in.
pub const BASE_WINDOW: u32 = 24;

#[derive(Debug, Error)]
pub enum DetectorError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("out of bounds: {0}")]
    OutOfBounds(String),
    #[error("training error: {0}")]
    Training(String),
    #[error("stage {stage} cannot meet its goals: {reason}")]
    StageUnreachable { stage: usize, reason: String },
    #[error("invalid cascade model: {0}")]
    Model(String),
    #[error(transparent)]
    Image(#[from] crate::imagecore::ImageError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = DetectorError> = std::result::Result<T, E>;
