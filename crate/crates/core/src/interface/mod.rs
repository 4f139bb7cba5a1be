//! Service layer: configuration, HTTP endpoints and per-stream state.

mod config;
mod http;
mod stream;

use crate::attributes::{load_attribute_model, AttributeError, AttributeKind, AttributeModels};
use crate::detector::{load_cascade, save_cascade, Cascade, DetectorError};
use crate::facedb::FaceDbError;
use crate::imagecore::ImageError;
use crate::pipeline::{PipelineConfig, PipelineError};
use crate::recognizer::RecognizerError;
use crate::synth::DeskRecipe;

pub use config::{ConfigError, ServiceConfig, DB_ENV};
pub use http::{router, serve, AppState, StreamCreated};
pub use stream::{
    EnrollRequest, EnrollmentStatus, FrameResponse, ObservationRecord, PersonSummary, StreamState, ENROLL_PROMPT,
};

/// JSON schema of every service response body, one `$defs` entry per
/// response kind.
pub const SERVICE_SCHEMA: &str = include_str!("../../schema/service.schema.json");

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Unavailable(String),
    #[error("{0}")]
    Internal(String),
    #[error("bad image: {0}")]
    Image(#[from] ImageError),
    #[error(transparent)]
    Db(#[from] FaceDbError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

impl From<RecognizerError> for ServiceError {
    fn from(e: RecognizerError) -> Self {
        match e {
            RecognizerError::Db(db) => ServiceError::Db(db),
            RecognizerError::InvalidInput(m) => ServiceError::BadRequest(m),
            other => ServiceError::Pipeline(PipelineError::Recognizer(other)),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error(transparent)]
    Detector(#[from] DetectorError),
    #[error(transparent)]
    Attributes(#[from] AttributeError),
}

/// File name of the cascade inside a models directory.
pub const CASCADE_FILE: &str = "cascade.relc";

/// Loaded models plus the pipeline settings used with them.
#[derive(Clone, Debug)]
pub struct Engine {
    pub cascade: Cascade,
    pub attributes: AttributeModels,
    pub pipeline: PipelineConfig,
}

impl Engine {
    pub fn new(cascade: Cascade, attributes: AttributeModels, pipeline: PipelineConfig) -> Self {
        Engine { cascade, attributes, pipeline }
    }

    pub fn load(cfg: &ServiceConfig) -> Result<Engine, EngineError> {
        let cascade = load_cascade(&cfg.cascade_path)?;
        let load = |kind: AttributeKind, path: &std::path::Path| -> Result<_, EngineError> {
            let (got, m) = load_attribute_model(path)?;
            if got != kind {
                return Err(AttributeError::Model(format!("{} holds a {got} model, want {kind}", path.display())).into());
            }
            Ok(m)
        };
        let mut attributes = AttributeModels::new(
            load(AttributeKind::Smile, &cfg.smile_model)?,
            load(AttributeKind::LeftEye, &cfg.left_eye_model)?,
            load(AttributeKind::RightEye, &cfg.right_eye_model)?,
        )?;
        attributes.yaw_gain = cfg.yaw_gain;
        Ok(Engine { cascade, attributes, pipeline: PipelineConfig { scan: cfg.scan.clone(), threshold: cfg.threshold } })
    }

    /// Trains every model from synthetic material.
    pub fn train(recipe: &DeskRecipe) -> Result<Engine, EngineError> {
        let cascade = recipe.train_cascade()?.cascade;
        let attributes = recipe.train_attributes()?;
        Ok(Engine::new(cascade, attributes, PipelineConfig::default()))
    }

    /// Loads `cascade.relc` and the attribute models from one directory.
    pub fn load_dir(dir: impl AsRef<std::path::Path>) -> Result<Engine, EngineError> {
        let dir = dir.as_ref();
        let cascade = load_cascade(dir.join(CASCADE_FILE))?;
        let attributes = AttributeModels::load_dir(dir)?;
        Ok(Engine::new(cascade, attributes, PipelineConfig::default()))
    }

    /// Writes the layout read by [`Engine::load_dir`].
    pub fn save_dir(&self, dir: impl AsRef<std::path::Path>) -> Result<(), EngineError> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(AttributeError::from)?;
        save_cascade(&self.cascade, dir.join(CASCADE_FILE))?;
        self.attributes.save_dir(dir)?;
        Ok(())
    }
}
