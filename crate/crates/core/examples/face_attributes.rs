//! Trains the smile and eye-state models on synthetic faces, then estimates
//! probabilities and head angles on held-out crops.
//!
//! `cargo run --release --example face_attributes`

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use real::attributes::{locate_landmarks, train_attribute_models, LogisticConfig};
use real::synth::{labeled_faces, render_face, FaceSpec, Persona};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let train = labeled_faces(400, 64, 8.0, &mut rng);
    let models = train_attribute_models(&train, &LogisticConfig::default())?;

    let test = labeled_faces(200, 72, 8.0, &mut rng);
    let mut correct = [0usize; 3];
    for f in &test {
        let a = models.estimate(&f.face)?;
        correct[0] += ((a.smile_p >= 0.5) == f.smiling) as usize;
        correct[1] += ((a.left_eye_open_p >= 0.5) == f.left_eye_open) as usize;
        correct[2] += ((a.right_eye_open_p >= 0.5) == f.right_eye_open) as usize;
    }
    println!("held-out accuracy of {}: smile {}, left eye {}, right eye {}", test.len(), correct[0], correct[1], correct[2]);

    for roll in [-12.0, 0.0, 12.0] {
        let mut spec = FaceSpec::frontal(Persona::preset(2));
        spec.pose.roll = roll;
        spec.expression.smiling = roll > 0.0;
        spec.expression.left_eye_open = roll >= 0.0;
        let face = render_face(&spec, 96, 96, 100, &mut rng);
        let lm = locate_landmarks(&face)?;
        let a = models.estimate_with(&face, &lm)?;
        println!(
            "rendered roll {roll:+5.1}: euler_z {:+6.2}, euler_y {:+6.2}, smile {:.2}, eyes {:.2}/{:.2}, eyes at {:.1?} {:.1?}",
            a.euler_z, a.euler_y, a.smile_p, a.left_eye_open_p, a.right_eye_open_p, lm.left_eye, lm.right_eye
        );
    }
    Ok(())
}
