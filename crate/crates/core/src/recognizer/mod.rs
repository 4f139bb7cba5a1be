//! Pixel descriptors compared by Euclidean distance, gallery matching and
//! burst enrollment.

mod enroll;

use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use crate::attributes::{estimate_roll, locate_landmarks, AttributeError};
use crate::imagecore::{rotate, GrayImage};

pub use enroll::{enroll, EnrollmentSession, DEFAULT_CAPTURE_RATE, DEFAULT_TARGET_COUNT};

/// Side of the square grid a crop is resampled to.
pub const DESCRIPTOR_SIDE: usize = 32;
pub const DESCRIPTOR_DIM: usize = DESCRIPTOR_SIDE * DESCRIPTOR_SIDE;
/// Default acceptance radius for unit-norm descriptors.
pub const DEFAULT_THRESHOLD: f64 = 0.8;
const MIN_CROP: usize = 24;

#[derive(Debug, thiserror::Error)]
pub enum RecognizerError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("descriptor dimension mismatch: {0} vs {1}")]
    Dimension(usize, usize),
    #[error(transparent)]
    Attributes(#[from] AttributeError),
    #[error(transparent)]
    Db(#[from] crate::facedb::FaceDbError),
}

pub type Result<T> = std::result::Result<T, RecognizerError>;

/// Zero-mean, unit-norm vector of resampled crop intensities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Descriptor {
    pub values: Vec<f32>,
    /// The crop had no contrast; `values` is all zeros.
    pub degenerate: bool,
}

impl Descriptor {
    pub fn from_values(values: Vec<f32>) -> Result<Self> {
        if values.len() != DESCRIPTOR_DIM {
            return Err(RecognizerError::Dimension(values.len(), DESCRIPTOR_DIM));
        }
        let degenerate = values.iter().all(|&v| v == 0.0);
        Ok(Descriptor { values, degenerate })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Descriptor of a crop as given (no roll correction).
pub fn descriptor(face: &GrayImage) -> Result<Descriptor> {
    let (w, h) = (face.width(), face.height());
    if w < MIN_CROP || h < MIN_CROP {
        return Err(RecognizerError::InvalidInput(format!("crop must be at least {MIN_CROP}x{MIN_CROP}, got {w}x{h}")));
    }
    let n = DESCRIPTOR_SIDE;
    let rx = (w - 1) as f64 / (n - 1) as f64;
    let ry = (h - 1) as f64 / (n - 1) as f64;
    let mut raw = Vec::with_capacity(DESCRIPTOR_DIM);
    for y in 0..n {
        for x in 0..n {
            let sx = (x as f64 * rx).min((w - 1) as f64);
            let sy = (y as f64 * ry).min((h - 1) as f64);
            raw.push(face.sample_bilinear(sx, sy).expect("inside crop"));
        }
    }
    let mean = raw.iter().sum::<f64>() / raw.len() as f64;
    raw.iter_mut().for_each(|v| *v -= mean);
    let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm < 1e-9 {
        return Ok(Descriptor { values: vec![0.0; DESCRIPTOR_DIM], degenerate: true });
    }
    Ok(Descriptor { values: raw.iter().map(|v| (v / norm) as f32).collect(), degenerate: false })
}

/// Rotates the crop upright using its estimated roll, then describes it.
pub fn roll_corrected_descriptor(face: &GrayImage) -> Result<Descriptor> {
    let lm = locate_landmarks(face)?;
    let roll = estimate_roll(&lm).unwrap_or(0.0);
    descriptor(&rotate(face, -roll))
}

/// Euclidean distance, accumulated in f64.
pub fn distance(a: &Descriptor, b: &Descriptor) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(RecognizerError::Dimension(a.dim(), b.dim()));
    }
    Ok(a.values
        .iter()
        .zip(&b.values)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum::<f64>()
        .sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PersonRecord {
    pub id: u64,
    pub name: Option<String>,
    pub descriptors: Vec<Descriptor>,
    /// Stored crops are numbered `0..crop_count`.
    pub crop_count: usize,
    pub created_unix_seconds: u64,
}

impl PersonRecord {
    /// The name when set, otherwise the numeric id.
    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.id.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub person_id: u64,
    pub distance: f64,
    pub accepted: bool,
}

/// Nearest person by minimum descriptor distance; ties go to the lower id.
/// `None` for an empty gallery.
pub fn match_probe(probe: &Descriptor, gallery: &[PersonRecord], threshold: f64) -> Result<Option<MatchResult>> {
    if !(threshold > 0.0) {
        return Err(RecognizerError::InvalidInput(format!("threshold must be positive, got {threshold}")));
    }
    let mut best: Option<(f64, u64)> = None;
    for person in gallery {
        for d in &person.descriptors {
            let dist = distance(probe, d)?;
            let better = match best {
                None => true,
                Some((bd, bid)) => dist < bd || (dist == bd && person.id < bid),
            };
            if better {
                best = Some((dist, person.id));
            }
        }
    }
    Ok(best.map(|(distance, person_id)| MatchResult { person_id, distance, accepted: distance <= threshold }))
}

/// Shared in-memory gallery. Readers take a snapshot; a writer swaps in a
/// new list, so a reader never sees a half-added person.
#[derive(Clone, Debug, Default)]
pub struct Gallery {
    inner: Arc<RwLock<Arc<Vec<PersonRecord>>>>,
}

impl Gallery {
    pub fn new(mut persons: Vec<PersonRecord>) -> Self {
        persons.sort_by_key(|p| p.id);
        Gallery { inner: Arc::new(RwLock::new(Arc::new(persons))) }
    }

    pub fn snapshot(&self) -> Arc<Vec<PersonRecord>> {
        self.inner.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn replace(&self, mut persons: Vec<PersonRecord>) {
        persons.sort_by_key(|p| p.id);
        *self.inner.write().unwrap_or_else(|e| e.into_inner()) = Arc::new(persons);
    }

    /// Inserts or replaces the person with the same id.
    pub fn upsert(&self, person: PersonRecord) {
        let mut guard = self.inner.write().unwrap_or_else(|e| e.into_inner());
        let mut next: Vec<PersonRecord> = guard.iter().filter(|p| p.id != person.id).cloned().collect();
        next.push(person);
        next.sort_by_key(|p| p.id);
        *guard = Arc::new(next);
    }

    pub fn get(&self, id: u64) -> Option<PersonRecord> {
        self.snapshot().iter().find(|p| p.id == id).cloned()
    }

    pub fn len(&self) -> usize {
        self.snapshot().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn match_probe(&self, probe: &Descriptor, threshold: f64) -> Result<Option<MatchResult>> {
        match_probe(probe, &self.snapshot(), threshold)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn textured(seed: u64, w: usize, h: usize, max: u8) -> GrayImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        GrayImage::from_fn(w, h, |_, _| rng.gen_range(0..=max)).unwrap()
    }

    fn unit(seed: u64) -> Descriptor {
        descriptor(&textured(seed, 40, 40, 255)).unwrap()
    }

    fn person(id: u64, descriptors: Vec<Descriptor>) -> PersonRecord {
        PersonRecord { id, name: None, descriptors, crop_count: 0, created_unix_seconds: 0 }
    }

    #[test]
    fn descriptor_normalization() {
        let d = unit(1);
        assert_eq!(d.dim(), 1024);
        let mean = d.values.iter().map(|&v| v as f64).sum::<f64>() / 1024.0;
        let norm = d.values.iter().map(|&v| (v as f64).powi(2)).sum::<f64>().sqrt();
        assert!(mean.abs() < 1e-6 && (norm - 1.0).abs() < 1e-6);
        assert_eq!(d, unit(1));
        let flat = descriptor(&GrayImage::filled(30, 30, 90).unwrap()).unwrap();
        assert!(flat.degenerate && flat.values.iter().all(|&v| v == 0.0));
        assert!(descriptor(&GrayImage::filled(23, 30, 1).unwrap()).is_err());
    }

    #[test]
    fn descriptor_brightness_and_contrast_invariance() {
        // even values up to 170 keep +40 and x1.5 exact in u8
        let base = textured(2, 48, 52, 85).map(|v| 2.0 * v as f64);
        let d = descriptor(&base).unwrap();
        let close = |e: &Descriptor| d.values.iter().zip(&e.values).all(|(a, b)| (a - b).abs() <= 1e-6);
        assert!(close(&descriptor(&base.map(|v| v as f64 + 40.0)).unwrap()));
        assert!(close(&descriptor(&base.map(|v| v as f64 * 1.5)).unwrap()));
    }

    #[test]
    fn distance_examples() {
        let d = unit(3);
        assert_eq!(distance(&d, &d).unwrap(), 0.0);
        let mut a = vec![0.0f32; 1024];
        let mut b = vec![0.0f32; 1024];
        a[0] = 1.0;
        b[1] = 1.0;
        let (a, b) = (Descriptor::from_values(a).unwrap(), Descriptor::from_values(b).unwrap());
        assert!((distance(&a, &b).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        let short = Descriptor { values: vec![0.0; 3], degenerate: true };
        assert!(distance(&a, &short).is_err());
    }

    #[test]
    fn match_examples() {
        let (a, b, c) = (unit(10), unit(11), unit(12));
        assert_eq!(match_probe(&a, &[], 0.8).unwrap(), None);
        let gallery = vec![person(0, vec![b.clone()]), person(1, vec![c.clone(), a.clone()])];
        let m = match_probe(&a, &gallery, 0.8).unwrap().unwrap();
        assert_eq!((m.person_id, m.distance, m.accepted), (1, 0.0, true));
        // brute-force oracle and permutation invariance
        let probe = &unit(13);
        let expect = gallery
            .iter()
            .flat_map(|p| p.descriptors.iter().map(move |d| (distance(probe, d).unwrap(), p.id)))
            .min_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)))
            .unwrap();
        let mut rev = gallery.clone();
        rev.reverse();
        for g in [&gallery, &rev] {
            let m = match_probe(probe, g, 0.8).unwrap().unwrap();
            assert_eq!((m.distance, m.person_id), expect);
            assert_eq!(m.accepted, m.distance <= 0.8);
        }
        assert!(match_probe(&a, &gallery, 0.0).is_err());
    }

    #[test]
    fn ties_go_to_lower_id() {
        let a = unit(20);
        let gallery = vec![person(5, vec![a.clone()]), person(2, vec![a.clone()])];
        assert_eq!(match_probe(&a, &gallery, 0.8).unwrap().unwrap().person_id, 2);
    }

    #[test]
    fn gallery_snapshots_are_stable() {
        let g = Gallery::default();
        let before = g.snapshot();
        g.upsert(person(0, vec![unit(30)]));
        assert!(before.is_empty());
        assert_eq!(g.len(), 1);
        let mut renamed = g.get(0).unwrap();
        renamed.name = Some("A".into());
        g.upsert(renamed);
        assert_eq!(g.len(), 1);
        assert_eq!(g.get(0).unwrap().label(), "A");
    }
}
