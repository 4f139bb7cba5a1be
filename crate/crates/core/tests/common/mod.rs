#![allow(dead_code)]

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use real::attributes::AttributeModels;
use real::detector::{load_cascade, save_cascade, Cascade};
use real::imagecore::{GrayImage, Rect};
use real::interface::Engine;
use real::pipeline::PipelineConfig;
use real::synth::{paint_face, scene_with_faces, DeskRecipe, Expression, FaceSpec, Lighting, Persona, Pose};

/// Trained desk models, cached under the cargo target directory so that
/// test binaries share one training run.
pub struct Models {
    pub cascade: Cascade,
    pub attributes: AttributeModels,
    pub dir: PathBuf,
}

fn cache_dir(recipe: &DeskRecipe) -> PathBuf {
    let mut h = DefaultHasher::new();
    format!("{recipe:?}").hash(&mut h);
    env!("CARGO_PKG_VERSION").hash(&mut h);
    Path::new(env!("CARGO_TARGET_TMPDIR")).join(format!("desk-models-{:016x}", h.finish()))
}

fn load_or_train(recipe: &DeskRecipe) -> Models {
    let dir = cache_dir(recipe);
    if let (Ok(cascade), Ok(attributes)) = (load_cascade(dir.join("cascade.relc")), AttributeModels::load_dir(&dir)) {
        return Models { cascade, attributes, dir };
    }
    let cascade = recipe.train_cascade().expect("desk cascade trains").cascade;
    let attributes = recipe.train_attributes().expect("attribute models train");
    let tmp = dir.with_extension(format!("tmp{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&tmp);
    std::fs::create_dir_all(&tmp).unwrap();
    save_cascade(&cascade, tmp.join("cascade.relc")).unwrap();
    attributes.save_dir(&tmp).unwrap();
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::rename(&tmp, &dir).unwrap();
    Models { cascade, attributes, dir }
}

pub fn models() -> &'static Models {
    static MODELS: OnceLock<Models> = OnceLock::new();
    MODELS.get_or_init(|| load_or_train(&DeskRecipe::default()))
}

pub fn engine() -> Engine {
    let m = models();
    Engine::new(m.cascade.clone(), m.attributes.clone(), PipelineConfig::default())
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A neutral frontal spec for persona preset `i`.
pub fn frontal(i: usize) -> FaceSpec {
    FaceSpec {
        persona: Persona::preset(i),
        expression: Expression::default(),
        pose: Pose::default(),
        lighting: Lighting::default(),
    }
}

/// A 320x240 clutter scene with one face at `rect`.
pub fn face_scene(rect: Rect, spec: &FaceSpec, seed: u64) -> GrayImage {
    scene_with_faces(320, 240, &[(rect, spec.clone())], &mut rng(seed))
}

/// A flat 320x240 frame with faces painted at the given rects.
pub fn plain_scene(faces: &[(Rect, FaceSpec)], seed: u64) -> GrayImage {
    let mut img = GrayImage::filled(320, 240, 120).unwrap();
    let mut r = rng(seed);
    for (rect, spec) in faces {
        paint_face(&mut img, rect, spec, &mut r);
    }
    img
}

pub fn blank(width: usize, height: usize) -> GrayImage {
    GrayImage::filled(width, height, 128).unwrap()
}

pub fn temp_dir() -> tempfile::TempDir {
    tempfile::tempdir().unwrap()
}
