//! Procedural fixtures: parametric grayscale faces and face-free clutter.
//!
//! Faces are drawn in unit coordinates of their bounding box (the same
//! framing the detector is trained on): eyes near `(0.3, 0.38)` and
//! `(0.7, 0.38)`, mouth near `(0.5, 0.78)`. Every generator is seeded and
//! deterministic.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::attributes::{self, train_attribute_models, AttributeModels, LabeledFace, LogisticConfig};
use crate::detector::{self, enumerate_features, CascadeConfig, CascadeTrainer, CascadeTraining, BASE_WINDOW};
use crate::imagecore::{clamp_round, GrayImage, Rect};

/// Stable facial geometry and tone of one synthetic person.
#[derive(Clone, Debug, PartialEq)]
pub struct Persona {
    pub head_rx: f64,
    pub head_ry: f64,
    pub head_cy: f64,
    pub skin: f64,
    /// Hairline height in unit coordinates and hair tone.
    pub hair_line: f64,
    pub hair: f64,
    pub eye_dx: f64,
    pub eye_y: f64,
    pub eye_rx: f64,
    pub eye_ry: f64,
    pub pupil_r: f64,
    pub brow_gap: f64,
    pub brow_len: f64,
    pub brow_thick: f64,
    pub nose_len: f64,
    pub mouth_y: f64,
    pub mouth_w: f64,
    pub beard: bool,
    /// Darkness of facial features relative to skin (0 = black, 1 = skin).
    pub feature_tone: f64,
}

impl Persona {
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Persona {
        Persona {
            head_rx: rng.gen_range(0.47..0.54),
            head_ry: rng.gen_range(0.56..0.64),
            head_cy: rng.gen_range(0.46..0.50),
            skin: rng.gen_range(120.0..215.0),
            hair_line: rng.gen_range(0.02..0.16),
            hair: rng.gen_range(15.0..90.0),
            eye_dx: rng.gen_range(0.18..0.22),
            eye_y: rng.gen_range(0.36..0.40),
            eye_rx: rng.gen_range(0.075..0.095),
            eye_ry: rng.gen_range(0.040..0.055),
            pupil_r: rng.gen_range(0.032..0.042),
            brow_gap: rng.gen_range(0.085..0.11),
            brow_len: rng.gen_range(0.14..0.19),
            brow_thick: rng.gen_range(0.022..0.035),
            nose_len: rng.gen_range(0.18..0.24),
            mouth_y: rng.gen_range(0.76..0.80),
            mouth_w: rng.gen_range(0.26..0.36),
            beard: rng.gen_bool(0.15),
            feature_tone: rng.gen_range(0.12..0.3),
        }
    }

    /// Two fixed, clearly different people for recognition fixtures.
    pub fn preset(index: usize) -> Persona {
        match index % 2 {
            0 => Persona {
                head_rx: 0.48,
                head_ry: 0.58,
                head_cy: 0.48,
                skin: 185.0,
                hair_line: 0.05,
                hair: 30.0,
                eye_dx: 0.185,
                eye_y: 0.37,
                eye_rx: 0.09,
                eye_ry: 0.05,
                pupil_r: 0.04,
                brow_gap: 0.09,
                brow_len: 0.17,
                brow_thick: 0.03,
                nose_len: 0.2,
                mouth_y: 0.77,
                mouth_w: 0.30,
                beard: false,
                feature_tone: 0.18,
            },
            _ => Persona {
                head_rx: 0.53,
                head_ry: 0.63,
                head_cy: 0.47,
                skin: 140.0,
                hair_line: 0.15,
                hair: 75.0,
                eye_dx: 0.215,
                eye_y: 0.40,
                eye_rx: 0.078,
                eye_ry: 0.042,
                pupil_r: 0.033,
                brow_gap: 0.105,
                brow_len: 0.15,
                brow_thick: 0.024,
                nose_len: 0.23,
                mouth_y: 0.795,
                mouth_w: 0.35,
                beard: true,
                feature_tone: 0.28,
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Expression {
    pub smiling: bool,
    pub left_eye_open: bool,
    pub right_eye_open: bool,
}

impl Default for Expression {
    fn default() -> Self {
        Expression { smiling: false, left_eye_open: true, right_eye_open: true }
    }
}

impl Expression {
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Expression {
        Expression {
            smiling: rng.gen_bool(0.5),
            left_eye_open: rng.gen_bool(0.8),
            right_eye_open: rng.gen_bool(0.8),
        }
    }
}

/// Placement of the face inside its box.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Pose {
    /// In-plane rotation, degrees, clockwise as displayed.
    pub roll: f64,
    /// Horizontal offset of the inner features, as a fraction of the box
    /// width; a crude stand-in for turning the head.
    pub yaw_shift: f64,
    pub shift_x: f64,
    pub shift_y: f64,
    /// Relative zoom; 0 means unchanged.
    pub zoom: f64,
}

impl Pose {
    /// Small jitter typical of a detector crop.
    pub fn jitter<R: Rng + ?Sized>(rng: &mut R, max_roll: f64) -> Pose {
        Pose {
            roll: if max_roll > 0.0 { rng.gen_range(-max_roll..max_roll) } else { 0.0 },
            yaw_shift: rng.gen_range(-0.02..0.02),
            shift_x: rng.gen_range(-0.03..0.03),
            shift_y: rng.gen_range(-0.03..0.03),
            zoom: rng.gen_range(-0.05..0.05),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Lighting {
    pub gain: f64,
    pub offset: f64,
    /// Left-to-right brightness ramp, as a fraction of the value.
    pub ramp: f64,
    pub noise: f64,
}

impl Default for Lighting {
    fn default() -> Self {
        Lighting { gain: 1.0, offset: 0.0, ramp: 0.0, noise: 0.0 }
    }
}

impl Lighting {
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Lighting {
        Lighting {
            gain: rng.gen_range(0.6..1.25),
            offset: rng.gen_range(-25.0..25.0),
            ramp: rng.gen_range(-0.2..0.2),
            noise: rng.gen_range(0.0..6.0),
        }
    }
}

#[derive(Clone, Debug)]
pub struct FaceSpec {
    pub persona: Persona,
    pub expression: Expression,
    pub pose: Pose,
    pub lighting: Lighting,
}

impl FaceSpec {
    pub fn frontal(persona: Persona) -> FaceSpec {
        FaceSpec { persona, expression: Expression::default(), pose: Pose::default(), lighting: Lighting::default() }
    }
}

fn in_ellipse(u: f64, v: f64, cx: f64, cy: f64, rx: f64, ry: f64) -> bool {
    let a = (u - cx) / rx;
    let b = (v - cy) / ry;
    a * a + b * b <= 1.0
}

/// Intensity of the face at unit coordinates, or `None` outside the head.
fn shade(p: &Persona, e: &Expression, yaw: f64, u: f64, v: f64) -> Option<f64> {
    let cx = 0.5;
    let on_head = in_ellipse(u, v, cx, p.head_cy, p.head_rx, p.head_ry);
    // hair cap extends slightly past the head outline at the top
    let on_cap = v < p.head_cy && in_ellipse(u, v, cx, p.head_cy - 0.02, p.head_rx + 0.03, p.head_ry + 0.04);
    if !on_head {
        return on_cap.then_some(p.hair);
    }
    if v < p.hair_line + 0.05 * ((u - cx) / p.head_rx).powi(2) * 4.0 {
        return Some(p.hair);
    }
    let dark = p.skin * p.feature_tone;
    // roundness shading
    let r = ((u - cx) / p.head_rx).powi(2);
    let mut val = p.skin * (1.0 - 0.18 * r);

    let fx = cx + yaw;
    for side in [-1.0, 1.0] {
        let ex = fx + side * p.eye_dx;
        let open = if side < 0.0 { e.left_eye_open } else { e.right_eye_open };
        // brow
        let by = p.eye_y - p.brow_gap;
        if (u - ex).abs() <= p.brow_len / 2.0 && (v - by).abs() <= p.brow_thick / 2.0 {
            val = p.skin * 0.5;
        }
        if open {
            if in_ellipse(u, v, ex, p.eye_y, p.eye_rx, p.eye_ry) {
                val = (p.skin + 45.0).min(250.0);
            }
            if in_ellipse(u, v, ex, p.eye_y, p.pupil_r, p.pupil_r) {
                val = dark;
            }
        } else {
            let lid = p.eye_y + 0.006 * (1.0 - ((u - ex) / p.eye_rx).powi(2));
            if (u - ex).abs() <= p.eye_rx && (v - lid).abs() <= 0.014 {
                val = dark;
            }
        }
    }
    // nose: soft ridge shadow and nostrils
    let nose_top = p.eye_y + 0.06;
    let nose_end = p.eye_y + p.nose_len;
    if v > nose_top && v < nose_end && (u - fx - 0.025).abs() < 0.012 {
        val = val.min(p.skin * 0.8);
    }
    for side in [-1.0, 1.0] {
        if in_ellipse(u, v, fx + side * 0.04, nose_end, 0.018, 0.012) {
            val = p.skin * 0.45;
        }
    }
    // beard below the mouth line and along the jaw
    if p.beard && (v > p.mouth_y + 0.05 || (v > nose_end + 0.03 && (u - fx).abs() > p.mouth_w / 2.0 + 0.04)) {
        val = p.skin * 0.55;
    }
    // mouth
    let t = (u - fx) / (p.mouth_w / 2.0);
    if t.abs() <= 1.0 {
        let m = p.mouth_y;
        if e.smiling {
            let bow = 1.0 - t * t;
            let upper = m - 0.03 + 0.025 * bow;
            let lower = m - 0.03 + 0.08 * bow;
            if v >= upper && v <= lower {
                val = if v < upper + 0.3 * (lower - upper) { (p.skin + 40.0).min(245.0) } else { dark };
            }
        } else if t.abs() <= 0.85 && (v - m).abs() <= 0.016 {
            val = dark;
        }
    }
    Some(val)
}

const SUPERSAMPLE: usize = 3;

/// Draws the face described by `spec` into `rect` of `canvas`, keeping the
/// canvas wherever the face does not cover it.
pub fn paint_face<R: Rng + ?Sized>(canvas: &mut GrayImage, rect: &Rect, spec: &FaceSpec, rng: &mut R) {
    let (w, h) = (rect.width() as f64, rect.height() as f64);
    let (cxp, cyp) = (w / 2.0, h / 2.0);
    let (sin, cos) = spec.pose.roll.to_radians().sin_cos();
    let zoom = 1.0 + spec.pose.zoom;
    let l = &spec.lighting;
    let noise = Normal::new(0.0, l.noise.max(1e-9)).unwrap();
    for py in 0..rect.height() as usize {
        let cy = rect.y1 as usize + py;
        if cy >= canvas.height() {
            break;
        }
        for px in 0..rect.width() as usize {
            let cx = rect.x1 as usize + px;
            if cx >= canvas.width() {
                break;
            }
            let mut acc = 0.0;
            let mut hits = 0usize;
            for j in 0..SUPERSAMPLE {
                for i in 0..SUPERSAMPLE {
                    let sx = px as f64 + (i as f64 + 0.5) / SUPERSAMPLE as f64 - cxp;
                    let sy = py as f64 + (j as f64 + 0.5) / SUPERSAMPLE as f64 - cyp;
                    // inverse of a clockwise rotation
                    let rx = sx * cos + sy * sin;
                    let ry = -sx * sin + sy * cos;
                    let u = (rx / w) / zoom + 0.5 - spec.pose.shift_x;
                    let v = (ry / h) / zoom + 0.5 - spec.pose.shift_y;
                    if let Some(val) = shade(&spec.persona, &spec.expression, spec.pose.yaw_shift, u, v) {
                        acc += val;
                        hits += 1;
                    }
                }
            }
            if hits == 0 {
                continue;
            }
            let total = (SUPERSAMPLE * SUPERSAMPLE) as f64;
            let bg = canvas.get(cx, cy) as f64;
            let face = acc / hits as f64;
            let ramp = 1.0 + l.ramp * (px as f64 / w - 0.5);
            let mut lit = (face * l.gain * ramp + l.offset).clamp(0.0, 255.0);
            if l.noise > 0.0 {
                lit += noise.sample(rng);
            }
            let cover = hits as f64 / total;
            canvas.set(cx, cy, clamp_round(lit * cover + bg * (1.0 - cover)));
        }
    }
}

/// A `width x height` face crop on a flat background.
pub fn render_face<R: Rng + ?Sized>(spec: &FaceSpec, width: usize, height: usize, background: u8, rng: &mut R) -> GrayImage {
    let mut img = GrayImage::filled(width, height, background).expect("positive size");
    paint_face(&mut img, &Rect::new(0, 0, width as u32, height as u32), spec, rng);
    img
}

/// A face crop whose surroundings are clutter instead of a flat tone.
pub fn render_face_on_clutter<R: Rng + ?Sized>(spec: &FaceSpec, size: usize, rng: &mut R) -> GrayImage {
    let mut img = clutter_scene(size, size, rng);
    paint_face(&mut img, &Rect::new(0, 0, size as u32, size as u32), spec, rng);
    img
}

/// A random face in a random pose and lighting, framed like a detector
/// training window.
pub fn random_face_patch<R: Rng + ?Sized>(size: usize, rng: &mut R) -> GrayImage {
    let spec = FaceSpec {
        persona: Persona::random(rng),
        expression: Expression::random(rng),
        pose: Pose::jitter(rng, 10.0),
        lighting: Lighting::random(rng),
    };
    render_face_on_clutter(&spec, size, rng)
}

fn fill_rect(img: &mut GrayImage, x0: f64, y0: f64, x1: f64, y1: f64, v: u8) {
    let (w, h) = (img.width() as f64, img.height() as f64);
    let xa = x0.max(0.0).min(w) as usize;
    let xb = x1.max(0.0).min(w) as usize;
    let ya = y0.max(0.0).min(h) as usize;
    let yb = y1.max(0.0).min(h) as usize;
    for y in ya..yb {
        for x in xa..xb {
            img.set(x, y, v);
        }
    }
}

/// A face-free scene of geometric objects: boxes, discs, rings, bars,
/// stripes, checkers and gradients over a shaded background.
pub fn clutter_scene<R: Rng + ?Sized>(width: usize, height: usize, rng: &mut R) -> GrayImage {
    let (w, h) = (width as f64, height as f64);
    let base = rng.gen_range(30.0..220.0);
    let gx = rng.gen_range(-80.0..80.0);
    let gy = rng.gen_range(-80.0..80.0);
    let mut img = GrayImage::from_fn(width, height, |x, y| {
        clamp_round(base + gx * (x as f64 / w - 0.5) + gy * (y as f64 / h - 0.5))
    })
    .expect("positive size");
    let scale = w.min(h);
    let objects = rng.gen_range(3..12);
    for _ in 0..objects {
        let v: u8 = rng.gen();
        let cx = rng.gen_range(0.0..w);
        let cy = rng.gen_range(0.0..h);
        let sx = rng.gen_range(0.05..0.6) * scale;
        let sy = rng.gen_range(0.05..0.6) * scale;
        match rng.gen_range(0..7) {
            0 => fill_rect(&mut img, cx - sx / 2.0, cy - sy / 2.0, cx + sx / 2.0, cy + sy / 2.0, v),
            1 | 2 => {
                let ring = rng.gen_bool(0.4);
                let (rx, ry) = (sx / 2.0, sy / 2.0);
                for y in (cy - ry).max(0.0) as usize..((cy + ry).min(h) as usize) {
                    for x in (cx - rx).max(0.0) as usize..((cx + rx).min(w) as usize) {
                        let d = ((x as f64 + 0.5 - cx) / rx).powi(2) + ((y as f64 + 0.5 - cy) / ry).powi(2);
                        if d <= 1.0 && (!ring || d >= 0.55) {
                            img.set(x, y, v);
                        }
                    }
                }
            }
            3 => {
                // bar of random orientation
                let ang: f64 = rng.gen_range(0.0..std::f64::consts::PI);
                let (s, c) = ang.sin_cos();
                let half = sx / 2.0;
                let thick = rng.gen_range(1.0..(0.08 * scale).max(2.0));
                for y in 0..height {
                    for x in 0..width {
                        let dx = x as f64 + 0.5 - cx;
                        let dy = y as f64 + 0.5 - cy;
                        let along = dx * c + dy * s;
                        let across = -dx * s + dy * c;
                        if along.abs() <= half && across.abs() <= thick / 2.0 {
                            img.set(x, y, v);
                        }
                    }
                }
            }
            4 => {
                let period = rng.gen_range(2.0..(0.15 * scale).max(3.0));
                let other: u8 = rng.gen();
                let vertical = rng.gen_bool(0.5);
                for y in (cy - sy / 2.0).max(0.0) as usize..((cy + sy / 2.0).min(h) as usize) {
                    for x in (cx - sx / 2.0).max(0.0) as usize..((cx + sx / 2.0).min(w) as usize) {
                        let t = if vertical { x as f64 } else { y as f64 };
                        img.set(x, y, if (t / period) as i64 % 2 == 0 { v } else { other });
                    }
                }
            }
            5 => {
                let cell = rng.gen_range(2.0..(0.12 * scale).max(3.0));
                let other: u8 = rng.gen();
                for y in (cy - sy / 2.0).max(0.0) as usize..((cy + sy / 2.0).min(h) as usize) {
                    for x in (cx - sx / 2.0).max(0.0) as usize..((cx + sx / 2.0).min(w) as usize) {
                        let on = ((x as f64 / cell) as i64 + (y as f64 / cell) as i64) % 2 == 0;
                        img.set(x, y, if on { v } else { other });
                    }
                }
            }
            _ => {
                // triangle
                let (ax, ay) = (cx, cy - sy / 2.0);
                let (bx, by) = (cx - sx / 2.0, cy + sy / 2.0);
                let (qx, qy) = (cx + sx / 2.0, cy + sy / 2.0);
                let edge = |x0: f64, y0: f64, x1: f64, y1: f64, x: f64, y: f64| (x1 - x0) * (y - y0) - (y1 - y0) * (x - x0);
                for y in ay.max(0.0) as usize..(by.min(h) as usize) {
                    for x in bx.max(0.0) as usize..(qx.min(w) as usize) {
                        let (fx, fy) = (x as f64 + 0.5, y as f64 + 0.5);
                        let e1 = edge(ax, ay, bx, by, fx, fy);
                        let e2 = edge(bx, by, qx, qy, fx, fy);
                        let e3 = edge(qx, qy, ax, ay, fx, fy);
                        if (e1 <= 0.0 && e2 <= 0.0 && e3 <= 0.0) || (e1 >= 0.0 && e2 >= 0.0 && e3 >= 0.0) {
                            img.set(x, y, v);
                        }
                    }
                }
            }
        }
    }
    let sigma = rng.gen_range(0.0..10.0);
    if sigma > 0.5 {
        let n = Normal::new(0.0, sigma).unwrap();
        img = img.map(|v| v as f64 + n.sample(rng));
    }
    img
}

/// A 24x24-style non-face patch: a random window of a clutter scene,
/// resampled to `size`.
pub fn random_nonface_patch<R: Rng + ?Sized>(size: usize, rng: &mut R) -> GrayImage {
    let sw = rng.gen_range(size..=size * 4);
    let scene = clutter_scene(sw, sw, rng);
    crate::imagecore::resize_bilinear(&scene, size, size).expect("positive size")
}

/// Desk-scale training material for the detector.
pub struct DetectorSet {
    pub faces: Vec<GrayImage>,
    pub nonfaces: Vec<GrayImage>,
    /// Face-free scenes for false-positive mining.
    pub backgrounds: Vec<GrayImage>,
}

impl DetectorSet {
    pub fn generate<R: Rng + ?Sized>(faces: usize, nonfaces: usize, backgrounds: usize, rng: &mut R) -> DetectorSet {
        DetectorSet {
            faces: (0..faces).map(|_| random_face_patch(24, rng)).collect(),
            nonfaces: (0..nonfaces).map(|_| random_nonface_patch(24, rng)).collect(),
            backgrounds: (0..backgrounds).map(|_| clutter_scene(320, 240, rng)).collect(),
        }
    }
}

/// Face crops with random persona, expression, pose and lighting, labeled
/// for attribute training.
pub fn labeled_faces<R: Rng + ?Sized>(count: usize, size: usize, max_roll: f64, rng: &mut R) -> Vec<LabeledFace> {
    (0..count)
        .map(|_| {
            let spec = FaceSpec {
                persona: Persona::random(rng),
                expression: Expression::random(rng),
                pose: Pose::jitter(rng, max_roll),
                lighting: Lighting::random(rng),
            };
            let e = spec.expression;
            LabeledFace {
                face: render_face_on_clutter(&spec, size, rng),
                smiling: e.smiling,
                left_eye_open: e.left_eye_open,
                right_eye_open: e.right_eye_open,
            }
        })
        .collect()
}

/// Settings for training the desk-scale detector and attribute models from
/// synthetic material.
#[derive(Clone, Debug, PartialEq)]
pub struct DeskRecipe {
    pub faces: usize,
    pub nonfaces: usize,
    pub backgrounds: usize,
    /// Every n-th candidate Haar feature is offered to boosting.
    pub feature_step: usize,
    pub max_stages: usize,
    pub attribute_faces: usize,
    pub seed: u64,
}

impl Default for DeskRecipe {
    fn default() -> Self {
        DeskRecipe {
            faces: 600,
            nonfaces: 700,
            backgrounds: 1000,
            feature_step: 8,
            max_stages: 20,
            attribute_faces: 400,
            seed: 1,
        }
    }
}

impl DeskRecipe {
    /// A smaller recipe for quick experiments; weaker but trains in seconds.
    pub fn quick() -> Self {
        DeskRecipe { faces: 300, nonfaces: 500, backgrounds: 300, feature_step: 16, ..DeskRecipe::default() }
    }

    pub fn detector_set(&self) -> DetectorSet {
        DetectorSet::generate(self.faces, self.nonfaces, self.backgrounds, &mut ChaCha8Rng::seed_from_u64(self.seed))
    }

    pub fn cascade_config(&self) -> detector::Result<CascadeConfig> {
        let features = enumerate_features(BASE_WINDOW)?.into_iter().step_by(self.feature_step.max(1)).collect();
        Ok(CascadeConfig { max_stages: self.max_stages, features: Some(features), ..CascadeConfig::default() })
    }

    pub fn train_cascade(&self) -> detector::Result<CascadeTraining> {
        let set = self.detector_set();
        CascadeTrainer::new(self.cascade_config()?).backgrounds(&set.backgrounds).train(&set.faces, &set.nonfaces)
    }

    pub fn train_attributes(&self) -> attributes::Result<AttributeModels> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0xa77);
        let faces = labeled_faces(self.attribute_faces, 64, 8.0, &mut rng);
        train_attribute_models(&faces, &LogisticConfig::default())
    }
}

/// A clutter scene with faces painted at the given rects.
pub fn scene_with_faces<R: Rng + ?Sized>(
    width: usize,
    height: usize,
    faces: &[(Rect, FaceSpec)],
    rng: &mut R,
) -> GrayImage {
    let mut img = clutter_scene(width, height, rng);
    for (r, spec) in faces {
        paint_face(&mut img, r, spec, rng);
    }
    img
}
