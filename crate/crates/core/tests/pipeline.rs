mod common;

use common::{blank, engine, face_scene, frontal, plain_scene, rng};
use rand::Rng;
use real::attributes::{estimate_roll, locate_landmarks, AttributeSet};
use real::detector::detect;
use real::imagecore::{crop, GrayImage, Rect};
use real::pipeline::{
    format_observation, parse_observation, parse_rect, process_frame, FaceObservation, Identity, TrackState,
};
use real::recognizer::Gallery;
use real::synth::{clutter_scene, labeled_faces, render_face, render_face_on_clutter, FaceSpec, Persona, Pose};

fn check_invariants(o: &FaceObservation) {
    for p in [o.smile_p, o.left_eye_open_p, o.right_eye_open_p] {
        assert!((0.0..=1.0).contains(&p), "probability {p} out of range in {o:?}");
    }
    for a in [o.euler_y, o.euler_z] {
        assert!(a.is_finite() && (-90.0..=90.0).contains(&a), "angle {a} out of range in {o:?}");
    }
    assert!(!o.rect.is_empty());
}

#[test]
fn blank_frame_only_ages_tracks() {
    let e = engine();
    let mut tracks = TrackState::new(15);
    let face = Rect::from_xywh(110, 60, 90, 90);
    let img = plain_scene(&[(face, frontal(0))], 1);
    let first = process_frame(&img, &e.cascade, &e.attributes, None, Some(&mut tracks), &e.pipeline).unwrap();
    assert_eq!(first.len(), 1);
    let before = tracks.next_id();
    let out = process_frame(&blank(320, 240), &e.cascade, &e.attributes, None, Some(&mut tracks), &e.pipeline).unwrap();
    assert!(out.is_empty());
    assert_eq!(tracks.next_id(), before);
    assert_eq!(tracks.active().len(), 1);
    assert_eq!(tracks.active()[0].missed, 1);
}

#[test]
fn single_face_empty_gallery() {
    let e = engine();
    let rect = Rect::from_xywh(100, 50, 100, 100);
    let img = face_scene(rect, &frontal(1), 2);
    let mut tracks = TrackState::new(15);
    let gallery = Gallery::new(Vec::new());
    let obs = process_frame(&img, &e.cascade, &e.attributes, Some(&gallery), Some(&mut tracks), &e.pipeline).unwrap();
    assert_eq!(obs.len(), 1, "{obs:?}");
    assert_eq!(obs[0].tracking_id, Some(0));
    assert_eq!(obs[0].identity, Identity::Unidentified);
    assert!(obs[0].rect.iou(&rect) >= 0.5);
    check_invariants(&obs[0]);
}

#[test]
fn shifted_face_keeps_tracking_id() {
    let e = engine();
    let mut tracks = TrackState::new(15);
    let mut ids = Vec::new();
    for (i, dx) in [0u32, 3].into_iter().enumerate() {
        let img = plain_scene(&[(Rect::from_xywh(100 + dx, 60, 96, 96), frontal(0))], 10 + i as u64);
        let obs = process_frame(&img, &e.cascade, &e.attributes, None, Some(&mut tracks), &e.pipeline).unwrap();
        assert_eq!(obs.len(), 1);
        ids.push(obs[0].tracking_id);
    }
    assert_eq!(ids, vec![Some(0), Some(0)]);
}

#[test]
fn two_faces_get_distinct_ids() {
    let e = engine();
    let faces = [(Rect::from_xywh(20, 60, 90, 90), frontal(0)), (Rect::from_xywh(200, 70, 80, 80), frontal(1))];
    let img = plain_scene(&faces, 3);
    let mut tracks = TrackState::new(15);
    let obs = process_frame(&img, &e.cascade, &e.attributes, None, Some(&mut tracks), &e.pipeline).unwrap();
    assert_eq!(obs.len(), 2, "{obs:?}");
    assert_ne!(obs[0].tracking_id, obs[1].tracking_id);
    // largest first
    assert!(obs[0].rect.area() >= obs[1].rect.area());
}

#[test]
fn observations_satisfy_invariants_on_random_frames() {
    let e = engine();
    let mut r = rng(40);
    for seed in 0..12u64 {
        let mut img = clutter_scene(320, 240, &mut r);
        let side = r.gen_range(50..140);
        let rect = Rect::from_xywh(r.gen_range(0..320 - side), r.gen_range(0..240 - side), side, side);
        let spec = FaceSpec {
            persona: Persona::random(&mut r),
            expression: real::synth::Expression::random(&mut r),
            pose: Pose::jitter(&mut r, 12.0),
            lighting: real::synth::Lighting::random(&mut r),
        };
        real::synth::paint_face(&mut img, &rect, &spec, &mut r);
        let mut tracks = TrackState::new(15);
        for o in process_frame(&img, &e.cascade, &e.attributes, None, Some(&mut tracks), &e.pipeline).unwrap() {
            check_invariants(&o);
            let line = format_observation(&o);
            assert_eq!(format_observation(&parse_observation(&line).unwrap()), line, "seed {seed}");
            assert_eq!(parse_rect(&o.rect.to_string()).unwrap(), o.rect);
        }
    }
}

#[test]
fn identical_sequences_give_identical_streams() {
    let e = engine();
    let frames: Vec<GrayImage> =
        (0..4u32).map(|i| plain_scene(&[(Rect::from_xywh(90 + 4 * i, 50, 100, 100), frontal(2))], 7)).collect();
    let run = || {
        let mut tracks = TrackState::new(15);
        let mut out = String::new();
        for f in &frames {
            for o in process_frame(f, &e.cascade, &e.attributes, None, Some(&mut tracks), &e.pipeline).unwrap() {
                out.push_str(&format_observation(&o));
                out.push('\n');
                out.push_str(&serde_json::to_string(&o).unwrap());
                out.push('\n');
            }
        }
        out
    };
    let a = run();
    assert!(!a.is_empty());
    assert_eq!(a, run());
}

#[test]
fn pasted_training_face_is_found_once() {
    let e = engine();
    let mut r = rng(77);
    let face = real::synth::random_face_patch(24, &mut r);
    let big = real::imagecore::resize_bilinear(&face, 72, 72).unwrap();
    let mut img = GrayImage::filled(320, 240, 120).unwrap();
    img.paste(&big, 130, 80);
    let target = Rect::from_xywh(130, 80, 72, 72);
    let found = detect(&img, &e.cascade, &e.pipeline.scan);
    assert_eq!(found.len(), 1, "{found:?}");
    assert!(found[0].iou(&target) >= 0.5, "{} vs {target}", found[0]);
}

fn mirror_set(a: &AttributeSet, m: &AttributeSet) {
    assert!((a.smile_p - m.smile_p).abs() <= 0.05, "smile {a:?} / {m:?}");
    assert!((a.left_eye_open_p - m.right_eye_open_p).abs() <= 0.05, "eyes {a:?} / {m:?}");
    assert!((a.right_eye_open_p - m.left_eye_open_p).abs() <= 0.05, "eyes {a:?} / {m:?}");
    assert!((a.euler_y + m.euler_y).abs() <= 1.0, "yaw {a:?} / {m:?}");
    assert!((a.euler_z + m.euler_z).abs() <= 1.0, "roll {a:?} / {m:?}");
}

#[test]
fn attributes_are_mirror_consistent() {
    let e = engine();
    for f in labeled_faces(40, 72, 10.0, &mut rng(8)) {
        let a = e.attributes.estimate(&f.face).unwrap();
        let m = e.attributes.estimate(&f.face.mirror_horizontal()).unwrap();
        mirror_set(&a, &m);
    }
}

#[test]
fn attributes_stay_in_range_on_noise() {
    let e = engine();
    let mut r = rng(9);
    for _ in 0..60 {
        let (w, h) = (r.gen_range(24..90), r.gen_range(24..90));
        let data = (0..w * h).map(|_| r.gen()).collect();
        let img = GrayImage::new(w, h, data).unwrap();
        let a = e.attributes.estimate(&img).unwrap();
        for p in [a.smile_p, a.left_eye_open_p, a.right_eye_open_p] {
            assert!((0.0..=1.0).contains(&p));
        }
        assert!(a.euler_y.abs() <= 90.0 && a.euler_z.abs() <= 90.0);
    }
}

#[test]
fn attributes_follow_expression() {
    let e = engine();
    let faces = labeled_faces(200, 72, 8.0, &mut rng(10));
    let mut correct = [0usize; 3];
    for f in &faces {
        let a = e.attributes.estimate(&f.face).unwrap();
        correct[0] += ((a.smile_p >= 0.5) == f.smiling) as usize;
        correct[1] += ((a.left_eye_open_p >= 0.5) == f.left_eye_open) as usize;
        correct[2] += ((a.right_eye_open_p >= 0.5) == f.right_eye_open) as usize;
    }
    for c in correct {
        assert!(c >= 180, "accuracy {correct:?} of 200");
    }
}

#[test]
fn roll_tracks_rotation_end_to_end() {
    let e = engine();
    for theta in [-15.0, -10.0, -5.0, 5.0, 10.0, 15.0] {
        for i in 0..3 {
            let mut spec = frontal(i);
            spec.pose.roll = theta;
            let face = render_face(&spec, 96, 96, 100, &mut rng(i as u64));
            let z = e.attributes.estimate(&face).unwrap().euler_z;
            assert!((z - theta).abs() <= 3.0, "persona {i}, theta {theta}: {z}");
        }
    }
}

#[test]
fn frontal_faces_have_small_yaw() {
    let e = engine();
    let mut r = rng(11);
    for i in 0..30 {
        let mut spec = FaceSpec::frontal(Persona::random(&mut r));
        spec.pose = Pose::jitter(&mut r, 3.0);
        let face = render_face_on_clutter(&spec, 80, &mut r);
        let a = e.attributes.estimate(&face).unwrap();
        assert!(a.euler_y.abs() < 10.0, "face {i}: yaw {}", a.euler_y);
    }
}

#[test]
fn symmetric_face_has_zero_yaw_and_roll() {
    let e = engine();
    let face = render_face(&frontal(0), 80, 80, 100, &mut rng(0));
    let lm = locate_landmarks(&face).unwrap();
    assert!(estimate_roll(&lm).unwrap().abs() <= 1.0);
    let a = e.attributes.estimate(&face).unwrap();
    assert!(a.euler_y.abs() <= 1.0 && a.euler_z.abs() <= 1.0, "{a:?}");
    let cropped = crop(&face, &Rect::new(0, 0, 80, 80)).unwrap();
    assert_eq!(cropped, face);
}
