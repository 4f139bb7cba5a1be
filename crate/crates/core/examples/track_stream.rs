//! Runs a short synthetic video through the full pipeline with per-stream
//! tracking, so that a face keeps its tracking id while it moves.
//!
//! `cargo run --release --example track_stream -- models`

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use real::imagecore::{GrayImage, Rect};
use real::interface::Engine;
use real::pipeline::{format_observation, process_frame, TrackState};
use real::synth::{paint_face, DeskRecipe, FaceSpec, Persona};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "models".into());
    let engine = Engine::load_dir(&dir).or_else(|e| {
        eprintln!("{dir}: {e}; training a quick model set");
        Engine::train(&DeskRecipe::quick())
    })?;
    let mut tracks = TrackState::default();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let walker = FaceSpec::frontal(Persona::preset(0));
    let visitor = FaceSpec::frontal(Persona::preset(1));

    for frame in 0..24u32 {
        let mut img = GrayImage::filled(320, 240, 120)?;
        paint_face(&mut img, &Rect::from_xywh(20 + 6 * frame, 60, 96, 96), &walker, &mut rng);
        // A second face shows up for a few frames.
        if (8..16).contains(&frame) {
            paint_face(&mut img, &Rect::from_xywh(220, 20, 80, 80), &visitor, &mut rng);
        }
        let faces = process_frame(&img, &engine.cascade, &engine.attributes, None, Some(&mut tracks), &engine.pipeline)?;
        let lines: Vec<String> = faces.iter().map(format_observation).collect();
        println!("frame {frame:2}: {}", if lines.is_empty() { "-".into() } else { lines.join(" | ") });
    }
    println!("{} track(s) active, next id {}", tracks.active().len(), tracks.next_id());
    Ok(())
}
