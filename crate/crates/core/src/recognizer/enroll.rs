use serde::{Deserialize, Serialize};

use crate::facedb::{FaceDb, NewPerson};
use crate::imagecore::GrayImage;

use super::{roll_corrected_descriptor, Gallery, PersonRecord, RecognizerError, Result};

pub const DEFAULT_TARGET_COUNT: usize = 30;
/// Nominal camera capture rate during enrollment, frames per second.
pub const DEFAULT_CAPTURE_RATE: f64 = 60.0;

/// Face crops collected for one person before they are stored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnrollmentSession {
    pub target_count: usize,
    pub capture_rate: f64,
    #[serde(skip)]
    collected: Vec<GrayImage>,
}

impl Default for EnrollmentSession {
    fn default() -> Self {
        EnrollmentSession::new(DEFAULT_TARGET_COUNT)
    }
}

impl EnrollmentSession {
    pub fn new(target_count: usize) -> Self {
        EnrollmentSession { target_count: target_count.max(1), capture_rate: DEFAULT_CAPTURE_RATE, collected: Vec::new() }
    }

    /// Adds a crop unless the session is already full. Returns whether the
    /// session is now complete.
    pub fn push(&mut self, crop: GrayImage) -> bool {
        if self.collected.len() < self.target_count {
            self.collected.push(crop);
        }
        self.is_complete()
    }

    pub fn is_complete(&self) -> bool {
        self.collected.len() >= self.target_count
    }

    pub fn collected(&self) -> &[GrayImage] {
        &self.collected
    }

    pub fn remaining(&self) -> usize {
        self.target_count - self.collected.len()
    }

    /// Seconds of capture the target represents at the nominal rate.
    pub fn capture_seconds(&self) -> f64 {
        self.target_count as f64 / self.capture_rate
    }
}

/// Describes every collected crop (after roll correction), stores the
/// person with a fresh id and adds it to `gallery`. Nothing becomes visible
/// if storing fails.
pub fn enroll(
    session: &EnrollmentSession,
    db: &FaceDb,
    gallery: Option<&Gallery>,
    name: Option<&str>,
) -> Result<PersonRecord> {
    if session.collected.is_empty() {
        return Err(RecognizerError::InvalidInput("enrollment session has no crops".into()));
    }
    let descriptors = session.collected.iter().map(roll_corrected_descriptor).collect::<Result<Vec<_>>>()?;
    let person = NewPerson { name: name.map(str::to_string), descriptors, crops: session.collected.clone() };
    let record = db.put_person(&person)?;
    if let Some(g) = gallery {
        g.upsert(record.clone());
    }
    Ok(record)
}
