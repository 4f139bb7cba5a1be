//! Writes synthetic training material in the layout the CLI expects.
//!
//! `cargo run --example generate_fixtures -- fixtures`
//!
//! Produces `faces/` and `nonfaces/` (24x24 PGM patches), `smile/` and
//! `nosmile/` (64x64 face crops for `train-attr --from-faces`), `persons/a`
//! and `persons/b` (crops of two identities for `enroll`) and `scene.png`.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use real::imagecore::{write_pgm, write_png, Rect};
use real::synth::{
    labeled_faces, random_face_patch, random_nonface_patch, render_face_on_clutter, scene_with_faces, FaceSpec, Persona,
    Pose,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "fixtures".into());
    let out = Path::new(&out);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let dir = |name: &str| -> std::io::Result<std::path::PathBuf> {
        let d = out.join(name);
        fs::create_dir_all(&d)?;
        Ok(d)
    };

    let (faces, nonfaces) = (dir("faces")?, dir("nonfaces")?);
    for i in 0..300 {
        write_pgm(&random_face_patch(24, &mut rng), faces.join(format!("{i:04}.pgm")))?;
    }
    for i in 0..600 {
        write_pgm(&random_nonface_patch(24, &mut rng), nonfaces.join(format!("{i:04}.pgm")))?;
    }

    let (smile, nosmile) = (dir("smile")?, dir("nosmile")?);
    for (i, f) in labeled_faces(200, 64, 8.0, &mut rng).iter().enumerate() {
        let target = if f.smiling { &smile } else { &nosmile };
        write_png(&f.face, target.join(format!("{i:04}.png")))?;
    }

    for (name, preset) in [("persons/a", 0), ("persons/b", 1)] {
        let d = dir(name)?;
        for i in 0..30 {
            let mut spec = FaceSpec::frontal(Persona::preset(preset));
            spec.pose = Pose::jitter(&mut rng, 4.0);
            write_png(&render_face_on_clutter(&spec, 96, &mut rng), d.join(format!("{i:02}.png")))?;
        }
    }

    let scene = scene_with_faces(
        320,
        240,
        &[
            (Rect::from_xywh(30, 50, 100, 100), FaceSpec::frontal(Persona::preset(0))),
            (Rect::from_xywh(190, 70, 90, 90), FaceSpec::frontal(Persona::preset(1))),
        ],
        &mut rng,
    );
    write_png(&scene, out.join("scene.png"))?;
    println!("wrote fixtures under {}", out.display());
    Ok(())
}
