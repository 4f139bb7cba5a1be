//! Burst enrollment into an on-disk face database, then recognition of
//! held-out crops against the gallery.
//!
//! `cargo run --release --example enroll_and_recognize -- [db_dir]`
//!
//! Uses a temporary database unless a directory is given.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use real::facedb::FaceDb;
use real::imagecore::GrayImage;
use real::recognizer::{enroll, roll_corrected_descriptor, EnrollmentSession, Gallery, DEFAULT_THRESHOLD};
use real::synth::{render_face_on_clutter, FaceSpec, Persona, Pose};

fn crop(preset: usize, rng: &mut ChaCha8Rng) -> GrayImage {
    let mut spec = FaceSpec::frontal(Persona::preset(preset));
    spec.pose = Pose::jitter(rng, 4.0);
    render_face_on_clutter(&spec, 96, rng)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tmp = tempfile::tempdir()?;
    let root = std::env::args().nth(1).map(Into::into).unwrap_or_else(|| tmp.path().to_path_buf());
    let db = FaceDb::open(&root)?;
    let gallery = Gallery::new(db.load_gallery());
    let mut rng = ChaCha8Rng::seed_from_u64(21);

    for (preset, name) in [(0, Some("Ada")), (1, None)] {
        let mut session = EnrollmentSession::new(30);
        while !session.is_complete() {
            session.push(crop(preset, &mut rng));
        }
        let person = enroll(&session, &db, Some(&gallery), name)?;
        println!(
            "enrolled person {} as {:?} from {} crops ({:.2} s of capture)",
            person.id,
            person.label(),
            person.crop_count,
            session.capture_seconds()
        );
    }

    for (preset, who) in [(0, "Ada"), (1, "the unnamed person"), (3, "a stranger")] {
        let probe = roll_corrected_descriptor(&crop(preset, &mut rng))?;
        match gallery.match_probe(&probe, DEFAULT_THRESHOLD)? {
            Some(m) if m.accepted => {
                println!("probe of {who}: matched {} at distance {:.4}", gallery.get(m.person_id).unwrap().label(), m.distance)
            }
            Some(m) => println!("probe of {who}: unidentified (nearest distance {:.4})", m.distance),
            None => println!("probe of {who}: empty gallery"),
        }
    }

    let report = db.verify()?;
    println!("database at {}: {} persons, {} crops, {} problems", root.display(), report.persons, report.crops, report.problems.len());
    Ok(())
}
