//! Finds faces in a frame and reports every attribute per face, as JSON and
//! as table lines.
//!
//! `cargo run --release --example detect_faces -- models [image]`
//!
//! Without an image a synthetic scene with two faces is used. Models come
//! from the given directory (see `train_models`); when it holds none, a
//! quick set is trained first.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use real::imagecore::{read_image, Rect};
use real::interface::Engine;
use real::pipeline::{format_observation, process_frame};
use real::synth::{scene_with_faces, DeskRecipe, FaceSpec, Persona};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let dir = args.first().map(String::as_str).unwrap_or("models");
    let engine = Engine::load_dir(dir).or_else(|e| {
        eprintln!("{dir}: {e}; training a quick model set");
        Engine::train(&DeskRecipe::quick())
    })?;

    let frame = match args.get(1) {
        Some(path) => read_image(path)?,
        None => {
            let mut smiling = FaceSpec::frontal(Persona::preset(1));
            smiling.expression.smiling = true;
            smiling.pose.roll = 8.0;
            scene_with_faces(
                320,
                240,
                &[(Rect::from_xywh(30, 50, 100, 100), FaceSpec::frontal(Persona::preset(0))), (Rect::from_xywh(190, 70, 90, 90), smiling)],
                &mut ChaCha8Rng::seed_from_u64(5),
            )
        }
    };

    let faces = process_frame(&frame, &engine.cascade, &engine.attributes, None, None, &engine.pipeline)?;
    println!("{} face(s) in a {}x{} frame", faces.len(), frame.width(), frame.height());
    for f in &faces {
        println!("{}", format_observation(f));
    }
    println!("{}", serde_json::to_string_pretty(&faces)?);
    Ok(())
}
