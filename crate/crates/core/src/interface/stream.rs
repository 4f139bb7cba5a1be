use std::collections::{HashMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::facedb::{validate_name, FaceDb};
use crate::imagecore::GrayImage;
use crate::pipeline::{process_frame_with_crops, FaceObservation, Identity, TrackState};
use crate::recognizer::{enroll, EnrollmentSession, Gallery, PersonRecord};

use super::{Engine, ServiceError};

/// Marker attached to observations of unknown faces the operator may enroll.
pub const ENROLL_PROMPT: &str = "enroll?";

/// An observation as sent over the wire.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationRecord {
    #[serde(flatten)]
    pub observation: FaceObservation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PersonSummary {
    pub id: u64,
    pub name: Option<String>,
    pub descriptor_count: usize,
    pub crop_count: usize,
    pub created_unix_seconds: u64,
}

impl From<&PersonRecord> for PersonSummary {
    fn from(p: &PersonRecord) -> Self {
        PersonSummary {
            id: p.id,
            name: p.name.clone(),
            descriptor_count: p.descriptors.len(),
            crop_count: p.crop_count,
            created_unix_seconds: p.created_unix_seconds,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum EnrollmentStatus {
    Collecting { tracking_id: u64, collected: usize, target_count: usize },
    Enrolled { tracking_id: u64, person: PersonSummary },
    /// The track disappeared before enough crops were captured.
    Cancelled { tracking_id: u64, collected: usize },
    Declined { tracking_id: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameResponse {
    pub frame: u64,
    pub observations: Vec<ObservationRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enrollment: Option<EnrollmentStatus>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnrollRequest {
    pub accept: bool,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub tracking_id: Option<u64>,
}

#[derive(Debug)]
struct ActiveEnrollment {
    tracking_id: u64,
    name: Option<String>,
    session: EnrollmentSession,
}

/// Per-stream state: tracks, prompts, declines and any enrollment in
/// progress.
#[derive(Debug)]
pub struct StreamState {
    tracks: TrackState,
    frames: u64,
    target_count: usize,
    declined: HashSet<u64>,
    prompted: Vec<u64>,
    /// Recent crops of unidentified tracks, so an accepted prompt can start
    /// from frames already seen.
    buffers: HashMap<u64, VecDeque<GrayImage>>,
    active: Option<ActiveEnrollment>,
}

impl StreamState {
    pub fn new(max_age: u32, target_count: usize) -> Self {
        StreamState {
            tracks: TrackState::new(max_age),
            frames: 0,
            target_count: target_count.max(1),
            declined: HashSet::new(),
            prompted: Vec::new(),
            buffers: HashMap::new(),
            active: None,
        }
    }

    /// Tracks currently carrying an enrollment prompt.
    pub fn prompted(&self) -> &[u64] {
        &self.prompted
    }

    fn finish(&mut self, db: &FaceDb, gallery: &Gallery) -> Result<EnrollmentStatus, ServiceError> {
        let active = self.active.take().expect("active enrollment");
        let person = enroll(&active.session, db, Some(gallery), active.name.as_deref())?;
        self.buffers.remove(&active.tracking_id);
        Ok(EnrollmentStatus::Enrolled { tracking_id: active.tracking_id, person: PersonSummary::from(&person) })
    }

    pub fn process(
        &mut self,
        img: &GrayImage,
        engine: &Engine,
        db: &FaceDb,
        gallery: &Gallery,
    ) -> Result<FrameResponse, ServiceError> {
        let faces = process_frame_with_crops(
            img,
            &engine.cascade,
            &engine.attributes,
            Some(gallery),
            Some(&mut self.tracks),
            &engine.pipeline,
        )?;
        self.frames += 1;
        let live: HashSet<u64> = self.tracks.active().iter().map(|t| t.id).collect();
        self.buffers.retain(|tid, _| live.contains(tid));
        self.declined.retain(|tid| live.contains(tid));

        let mut enrollment = None;
        let mut observations = Vec::with_capacity(faces.len());
        self.prompted.clear();
        for face in faces {
            let obs = face.observation;
            let tid = obs.tracking_id.expect("stream frames are tracked");
            let unknown = obs.identity == Identity::Unidentified;
            let enrolling = self.active.as_ref().is_some_and(|a| a.tracking_id == tid);
            if enrolling {
                let a = self.active.as_mut().expect("checked");
                a.session.push(face.crop);
            } else if unknown {
                let buf = self.buffers.entry(tid).or_default();
                if buf.len() == self.target_count {
                    buf.pop_front();
                }
                buf.push_back(face.crop);
            }
            let prompt = unknown && !enrolling && !self.declined.contains(&tid);
            if prompt {
                self.prompted.push(tid);
            }
            observations.push(ObservationRecord { observation: obs, prompt: prompt.then(|| ENROLL_PROMPT.to_string()) });
        }

        if let Some(a) = &self.active {
            let (tid, collected) = (a.tracking_id, a.session.collected().len());
            if a.session.is_complete() {
                enrollment = Some(self.finish(db, gallery)?);
            } else if !live.contains(&tid) {
                self.active = None;
                enrollment = Some(EnrollmentStatus::Cancelled { tracking_id: tid, collected });
            } else {
                enrollment =
                    Some(EnrollmentStatus::Collecting { tracking_id: tid, collected, target_count: self.target_count });
            }
        }
        Ok(FrameResponse { frame: self.frames, observations, enrollment })
    }

    /// Answers the prompt on `req.tracking_id`, or on the first prompted
    /// track of the latest frame.
    pub fn answer(&mut self, req: &EnrollRequest, db: &FaceDb, gallery: &Gallery) -> Result<EnrollmentStatus, ServiceError> {
        if self.active.is_some() {
            return Err(ServiceError::Conflict("an enrollment is already in progress".into()));
        }
        let tid = match req.tracking_id {
            Some(t) if self.prompted.contains(&t) => t,
            Some(t) => return Err(ServiceError::Conflict(format!("track {t} has no active prompt"))),
            None => *self.prompted.first().ok_or_else(|| ServiceError::Conflict("no active prompt".into()))?,
        };
        if !req.accept {
            self.declined.insert(tid);
            self.prompted.retain(|&t| t != tid);
            self.buffers.remove(&tid);
            return Ok(EnrollmentStatus::Declined { tracking_id: tid });
        }
        let name = req.name.as_deref().map(str::trim).filter(|n| !n.is_empty()).map(str::to_string);
        if let Some(n) = &name {
            validate_name(n).map_err(|e| ServiceError::BadRequest(e.to_string()))?;
        }
        let mut session = EnrollmentSession::new(self.target_count);
        for crop in self.buffers.remove(&tid).unwrap_or_default() {
            session.push(crop);
        }
        self.prompted.retain(|&t| t != tid);
        let collected = session.collected().len();
        self.active = Some(ActiveEnrollment { tracking_id: tid, name, session });
        if self.active.as_ref().is_some_and(|a| a.session.is_complete()) {
            return self.finish(db, gallery);
        }
        Ok(EnrollmentStatus::Collecting { tracking_id: tid, collected, target_count: self.target_count })
    }
}
