//! Per-frame orchestration: detect, track, estimate attributes, recognize.

mod table;
mod tracking;

use serde::{Deserialize, Serialize};

use crate::attributes::{AttributeError, AttributeModels};
use crate::detector::{detect, Cascade, DetectorError, ScanParams};
use crate::imagecore::{crop, GrayImage, ImageError, Rect};
use crate::recognizer::{roll_corrected_descriptor, Gallery, RecognizerError, DEFAULT_THRESHOLD};

pub use table::{format_observation, format_probability, parse_observation, parse_rect, ParseError};
pub use tracking::{Track, TrackState, DEFAULT_MAX_AGE, TRACK_IOU};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Detector(#[from] DetectorError),
    #[error(transparent)]
    Attributes(#[from] AttributeError),
    #[error(transparent)]
    Recognizer(#[from] RecognizerError),
    #[error(transparent)]
    Image(#[from] ImageError),
}

pub type Result<T> = std::result::Result<T, PipelineError>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Identity {
    Recognized { person_id: u64, name: Option<String>, distance: f64 },
    Unidentified,
}

impl Identity {
    /// Display label: the person's name, else their id, else "unknown".
    pub fn label(&self) -> String {
        match self {
            Identity::Recognized { name: Some(n), .. } => n.clone(),
            Identity::Recognized { person_id, .. } => person_id.to_string(),
            Identity::Unidentified => "unknown".into(),
        }
    }
}

/// Everything reported about one detected face.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaceObservation {
    pub rect: Rect,
    pub tracking_id: Option<u64>,
    pub euler_y: f64,
    pub euler_z: f64,
    pub smile_p: f64,
    pub left_eye_open_p: f64,
    pub right_eye_open_p: f64,
    pub identity: Identity,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub scan: ScanParams,
    pub threshold: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig { scan: ScanParams::default(), threshold: DEFAULT_THRESHOLD }
    }
}

/// An observation with the face crop it was computed from.
#[derive(Clone, Debug)]
pub struct FrameFace {
    pub observation: FaceObservation,
    pub crop: GrayImage,
}

/// Runs the whole chain on one frame. Tracking ids are assigned only when
/// `tracks` is given, recognition only when `gallery` is. Observations come
/// in detector order (largest face first).
pub fn process_frame_with_crops(
    img: &GrayImage,
    cascade: &Cascade,
    models: &AttributeModels,
    gallery: Option<&Gallery>,
    tracks: Option<&mut TrackState>,
    cfg: &PipelineConfig,
) -> Result<Vec<FrameFace>> {
    let rects = detect(img, cascade, &cfg.scan);
    let ids: Vec<Option<u64>> = match tracks {
        Some(state) => state.assign(&rects).into_iter().map(Some).collect(),
        None => vec![None; rects.len()],
    };
    let snapshot = gallery.map(|g| g.snapshot());
    let mut out = Vec::with_capacity(rects.len());
    for (rect, tracking_id) in rects.into_iter().zip(ids) {
        let face = crop(img, &rect)?;
        let attrs = models.estimate(&face)?;
        let identity = match &snapshot {
            Some(persons) if !persons.is_empty() => {
                let probe = roll_corrected_descriptor(&face)?;
                match crate::recognizer::match_probe(&probe, persons, cfg.threshold)? {
                    Some(m) if m.accepted => {
                        let name = persons.iter().find(|p| p.id == m.person_id).and_then(|p| p.name.clone());
                        Identity::Recognized { person_id: m.person_id, name, distance: m.distance }
                    }
                    _ => Identity::Unidentified,
                }
            }
            _ => Identity::Unidentified,
        };
        out.push(FrameFace {
            observation: FaceObservation {
                rect,
                tracking_id,
                euler_y: attrs.euler_y,
                euler_z: attrs.euler_z,
                smile_p: attrs.smile_p,
                left_eye_open_p: attrs.left_eye_open_p,
                right_eye_open_p: attrs.right_eye_open_p,
                identity,
            },
            crop: face,
        });
    }
    Ok(out)
}

pub fn process_frame(
    img: &GrayImage,
    cascade: &Cascade,
    models: &AttributeModels,
    gallery: Option<&Gallery>,
    tracks: Option<&mut TrackState>,
    cfg: &PipelineConfig,
) -> Result<Vec<FaceObservation>> {
    Ok(process_frame_with_crops(img, cascade, models, gallery, tracks, cfg)?
        .into_iter()
        .map(|f| f.observation)
        .collect())
}
