mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::{blank, frontal, models, plain_scene, rng};
use real::attributes::{load_attribute_model, AttributeKind};
use real::detector::{detect, load_cascade, ScanParams};
use real::imagecore::{crop, write_pgm, write_png, Rect};
use real::pipeline::{format_observation, parse_observation};
use real::synth::{random_face_patch, random_nonface_patch, render_face_on_clutter, Pose};

fn real(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_real")).args(args).env_remove("REAL_DB").env_remove("REAL_MODELS").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn detect_blank_prints_nothing() {
    let dir = common::temp_dir();
    let img = dir.path().join("blank.pgm");
    write_pgm(&blank(160, 120), &img).unwrap();
    for extra in [&[][..], &["--table1"][..]] {
        let mut args = vec!["detect", "--image", p(&img), "--models", p(&models().dir)];
        args.extend(extra);
        let out = real(&args);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        assert_eq!(stdout(&out), "");
    }
}

#[test]
fn detect_table1_line_round_trips() {
    let dir = common::temp_dir();
    let img = dir.path().join("face.pgm");
    write_pgm(&plain_scene(&[(Rect::from_xywh(100, 50, 100, 100), frontal(0))], 1), &img).unwrap();
    let out = real(&["detect", "--image", p(&img), "--table1", "--models", p(&models().dir)]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1, "{text}");
    assert_eq!(format_observation(&parse_observation(lines[0]).unwrap()), lines[0]);
    assert!(lines[0].starts_with("Rect("));
    assert_eq!(lines[0].split('\t').nth(1), Some("-"));

    let out = real(&["detect", "--image", p(&img), "--models", p(&models().dir)]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 1);
}

#[test]
fn enroll_then_recognize() {
    let dir = common::temp_dir();
    let db = dir.path().join("db");
    let face = dir.path().join("probe.png");
    let scene = plain_scene(&[(Rect::from_xywh(100, 50, 100, 100), frontal(0))], 2);
    write_png(&scene, &face).unwrap();

    let out = real(&["recognize", "--image", p(&face), "--db", p(&db), "--models", p(&models().dir)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).trim_end().ends_with("unidentified"), "{}", stdout(&out));

    let crops = dir.path().join("crops");
    std::fs::create_dir(&crops).unwrap();
    let mut r = rng(3);
    for i in 0..10u32 {
        let mut spec = frontal(0);
        spec.pose = Pose::jitter(&mut r, 4.0);
        let frame = plain_scene(&[(Rect::from_xywh(90 + 2 * i, 40 + i, 100, 100), spec)], 50 + i as u64);
        let found = detect(&frame, &models().cascade, &ScanParams::default());
        write_png(&crop(&frame, &found[0]).unwrap(), crops.join(format!("{i:02}.png"))).unwrap();
    }
    let out = real(&["enroll", "--dir", p(&crops), "--name", "A", "--db", p(&db)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("person 0"));

    let out = real(&["recognize", "--image", p(&face), "--db", p(&db), "--models", p(&models().dir)]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 1);
    assert_eq!(text.split('\t').nth(1), Some("A"), "{text}");

    let held_out = dir.path().join("held_out.png");
    let mut spec = frontal(0);
    spec.pose = Pose::jitter(&mut rng(99), 4.0);
    write_png(&render_face_on_clutter(&spec, 96, &mut rng(100)), &held_out).unwrap();
    let out = real(&["recognize", "--image", p(&held_out), "--crop", "--db", p(&db)]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).starts_with("A\t"), "{}", stdout(&out));

    let out = real(&["db", "verify", "--db", p(&db)]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert!(stdout(&out).contains("1 persons, 10 crops, 0 problems"));

    let desc = db.join("persons/0/descriptors.bin");
    let mut bytes = std::fs::read(&desc).unwrap();
    bytes[20] ^= 0xff;
    std::fs::write(&desc, bytes).unwrap();
    let out = real(&["db", "verify", "--db", p(&db)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(real(&[]).status.code(), Some(2));
    assert_eq!(real(&["bogus"]).status.code(), Some(2));
    assert_eq!(real(&["detect"]).status.code(), Some(2));
    assert_eq!(real(&["train-attr", "--model", "nose", "--pos", "a", "--neg", "b", "--out", "c"]).status.code(), Some(2));
    assert_eq!(real(&["--help"]).status.code(), Some(0));
}

#[test]
fn operational_errors_exit_1() {
    let dir = common::temp_dir();
    let missing = dir.path().join("missing.png");
    let out = real(&["detect", "--image", p(&missing), "--models", p(&models().dir)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());

    let img = dir.path().join("x.pgm");
    write_pgm(&blank(32, 32), &img).unwrap();
    let out = real(&["detect", "--image", p(&img), "--models", p(dir.path())]);
    assert_eq!(out.status.code(), Some(1));

    let cfg = dir.path().join("service.conf");
    std::fs::write(&cfg, "port: 0\nmodels_dir: nowhere\n").unwrap();
    let out = real(&["serve", "--config", p(&cfg)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("does not exist"));

    let out = real(&["db", "verify", "--db", p(&dir.path().join("nodb"))]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn training_commands_write_models() {
    let dir = common::temp_dir();
    let (faces, nonfaces) = (dir.path().join("faces"), dir.path().join("nonfaces"));
    std::fs::create_dir(&faces).unwrap();
    std::fs::create_dir(&nonfaces).unwrap();
    let mut r = rng(4);
    for i in 0..40 {
        write_pgm(&random_face_patch(24, &mut r), faces.join(format!("{i}.pgm"))).unwrap();
        write_pgm(&random_nonface_patch(24, &mut r), nonfaces.join(format!("{i}.pgm"))).unwrap();
    }
    let out_path = dir.path().join("c.relc");
    let out = real(&[
        "train-cascade", "--faces", p(&faces), "--nonfaces", p(&nonfaces), "--stages", "2", "--out", p(&out_path),
        "--feature-step", "97",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let c = load_cascade(&out_path).unwrap();
    assert!(!c.stages.is_empty() && c.stages.len() <= 2);

    let (pos, neg) = (dir.path().join("smile"), dir.path().join("nonsmile"));
    std::fs::create_dir(&pos).unwrap();
    std::fs::create_dir(&neg).unwrap();
    for f in real::synth::labeled_faces(40, 64, 5.0, &mut r).iter().enumerate() {
        let target = if f.1.smiling { &pos } else { &neg };
        write_png(&f.1.face, target.join(format!("{}.png", f.0))).unwrap();
    }
    let model = dir.path().join("smile.rela");
    let out = real(&[
        "train-attr", "--model", "smile", "--pos", p(&pos), "--neg", p(&neg), "--out", p(&model), "--from-faces",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let (kind, m) = load_attribute_model(&model).unwrap();
    assert_eq!(kind, AttributeKind::Smile);
    assert_eq!(m.input_dim, real::attributes::FEATURE_DIM);
}
