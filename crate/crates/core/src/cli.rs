//! Command-line front end for the `real` binary.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use crate::attributes::{
    locate_landmarks, sample_region, save_attribute_model, train_attribute_model, AttributeKind,
    LogisticConfig,
};
use crate::detector::{enumerate_features, save_cascade, CascadeConfig, CascadeTrainer, BASE_WINDOW};
use crate::facedb::FaceDb;
use crate::imagecore::{read_image, resize_bilinear, GrayImage};
use crate::interface::{AppState, Engine, ServiceConfig};
use crate::pipeline::{format_observation, process_frame};
use crate::recognizer::{enroll, roll_corrected_descriptor, EnrollmentSession, Gallery, DEFAULT_TARGET_COUNT};

/// Exit code for operational failures.
pub const EXIT_FAILURE: i32 = 1;
/// Exit code for malformed invocations.
pub const EXIT_USAGE: i32 = 2;

type BoxError = Box<dyn std::error::Error + Send + Sync>;

#[derive(Parser, Debug)]
#[command(name = "real", version, about = "Face detection, attribute estimation and recognition")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train a detector cascade from 24x24 face and non-face patches.
    TrainCascade(TrainCascadeArgs),
    /// Train one attribute model from positive and negative region patches.
    TrainAttr(TrainAttrArgs),
    /// Detect faces in an image and report their attributes.
    Detect(DetectArgs),
    /// Enroll a person from a directory of face crops.
    Enroll(EnrollArgs),
    /// Match the faces in an image against the database.
    Recognize(RecognizeArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
    /// Database maintenance.
    Db {
        #[command(subcommand)]
        command: DbCommand,
    },
}

#[derive(Subcommand, Debug)]
pub enum DbCommand {
    /// Check every checksum and cross-reference in a database.
    Verify {
        #[arg(long)]
        db: PathBuf,
    },
}

#[derive(Args, Debug)]
pub struct TrainCascadeArgs {
    #[arg(long)]
    pub faces: PathBuf,
    #[arg(long)]
    pub nonfaces: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub stages: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Face-free scenes to mine extra negatives from.
    #[arg(long)]
    pub backgrounds: Option<PathBuf>,
    /// Use every n-th candidate feature (1 = all).
    #[arg(long, default_value_t = 1)]
    pub feature_step: usize,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct TrainAttrArgs {
    #[arg(long, value_parser = parse_kind)]
    pub model: AttributeKind,
    #[arg(long)]
    pub pos: PathBuf,
    #[arg(long)]
    pub neg: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 400)]
    pub epochs: usize,
    /// Inputs are whole face crops; the model's region is cut out of each
    /// using located landmarks. Otherwise inputs are region patches.
    #[arg(long)]
    pub from_faces: bool,
}

#[derive(Args, Debug)]
pub struct ModelArgs {
    /// Directory holding cascade.relc and the three attribute models.
    #[arg(long, env = "REAL_MODELS", default_value = "models")]
    pub models: PathBuf,
}

#[derive(Args, Debug)]
pub struct DetectArgs {
    #[arg(long)]
    pub image: PathBuf,
    /// Emit tab-separated observation lines instead of JSON.
    #[arg(long)]
    pub table1: bool,
    #[command(flatten)]
    pub models: ModelArgs,
}

#[derive(Args, Debug)]
pub struct EnrollArgs {
    #[arg(long)]
    pub dir: PathBuf,
    #[arg(long)]
    pub name: Option<String>,
    #[arg(long, env = "REAL_DB")]
    pub db: PathBuf,
    /// Crops to use; all images in the directory when absent.
    #[arg(long)]
    pub count: Option<usize>,
}

#[derive(Args, Debug)]
pub struct RecognizeArgs {
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long, env = "REAL_DB")]
    pub db: PathBuf,
    /// Treat the image as a single face crop instead of running detection.
    #[arg(long)]
    pub crop: bool,
    #[arg(long, default_value_t = crate::recognizer::DEFAULT_THRESHOLD)]
    pub threshold: f64,
    #[command(flatten)]
    pub models: ModelArgs,
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    #[arg(long)]
    pub config: PathBuf,
}

fn parse_kind(s: &str) -> Result<AttributeKind, String> {
    AttributeKind::parse(s).ok_or_else(|| format!("unknown model {s:?}; expected smile, left-eye or right-eye"))
}

/// Image files in `dir`, sorted by name.
pub fn image_files(dir: &Path) -> Result<Vec<PathBuf>, BoxError> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| format!("{}: {e}", dir.display()))? {
        let path = entry?.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if matches!(ext.as_deref(), Some("png" | "pgm" | "pnm")) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn read_dir_images(dir: &Path) -> Result<Vec<GrayImage>, BoxError> {
    let files = image_files(dir)?;
    if files.is_empty() {
        return Err(format!("{} contains no .png or .pgm images", dir.display()).into());
    }
    files.iter().map(|p| read_image(p).map_err(|e| format!("{}: {e}", p.display()).into())).collect()
}

fn load_engine(dir: &Path) -> Result<Engine, BoxError> {
    Engine::load_dir(dir).map_err(|e| format!("{}: {e}", dir.display()).into())
}

fn train_cascade_cmd(a: &TrainCascadeArgs, out: &mut dyn Write) -> Result<(), BoxError> {
    let faces = read_dir_images(&a.faces)?;
    let nonfaces = read_dir_images(&a.nonfaces)?;
    let side = BASE_WINDOW as usize;
    let fit = |v: Vec<GrayImage>| -> Result<Vec<GrayImage>, BoxError> {
        v.into_iter()
            .map(|p| if p.width() == side && p.height() == side { Ok(p) } else { Ok(resize_bilinear(&p, side, side)?) })
            .collect()
    };
    let (faces, nonfaces) = (fit(faces)?, fit(nonfaces)?);
    let backgrounds = match &a.backgrounds {
        Some(d) => read_dir_images(d)?,
        None => Vec::new(),
    };
    let mut cfg = CascadeConfig { max_stages: a.stages.max(1), ..CascadeConfig::default() };
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if a.feature_step > 1 {
        cfg.features = Some(enumerate_features(BASE_WINDOW)?.into_iter().step_by(a.feature_step).collect());
    }
    let trained = CascadeTrainer::new(cfg).backgrounds(&backgrounds).train(&faces, &nonfaces)?;
    save_cascade(&trained.cascade, &a.out)?;
    for (i, r) in trained.reports.iter().enumerate() {
        writeln!(
            out,
            "stage {i}: {} stumps, detection {:.4}, false positives {:.4}",
            r.stumps, r.detection_rate, r.false_positive_rate
        )?;
    }
    writeln!(out, "stopped: {:?}; wrote {}", trained.stop_reason, a.out.display())?;
    Ok(())
}

fn train_attr_cmd(a: &TrainAttrArgs, out: &mut dyn Write) -> Result<(), BoxError> {
    let region = a.model.region();
    let patches = |dir: &Path| -> Result<Vec<GrayImage>, BoxError> {
        let images = read_dir_images(dir)?;
        if !a.from_faces {
            return Ok(images);
        }
        images.iter().map(|face| Ok(sample_region(face, &locate_landmarks(face)?, region).patch)).collect()
    };
    let (pos, neg) = (patches(&a.pos)?, patches(&a.neg)?);
    let cfg = LogisticConfig { epochs: a.epochs, ..LogisticConfig::default() };
    let model = train_attribute_model(&pos, &neg, &cfg)?;
    save_attribute_model(&a.out, a.model, &model)?;
    writeln!(out, "trained {} on {} positive and {} negative samples; wrote {}", a.model, pos.len(), neg.len(), a.out.display())?;
    Ok(())
}

fn detect_cmd(a: &DetectArgs, out: &mut dyn Write) -> Result<(), BoxError> {
    let engine = load_engine(&a.models.models)?;
    let img = read_image(&a.image)?;
    let obs = process_frame(&img, &engine.cascade, &engine.attributes, None, None, &engine.pipeline)?;
    if a.table1 {
        for o in &obs {
            writeln!(out, "{}", format_observation(o))?;
        }
    } else if !obs.is_empty() {
        writeln!(out, "{}", serde_json::to_string_pretty(&obs)?)?;
    }
    Ok(())
}

fn enroll_cmd(a: &EnrollArgs, out: &mut dyn Write) -> Result<(), BoxError> {
    let mut crops = read_dir_images(&a.dir)?;
    if let Some(n) = a.count {
        crops.truncate(n);
    }
    let db = FaceDb::open(&a.db)?;
    let mut session = EnrollmentSession::new(crops.len().max(1));
    for c in crops {
        session.push(c);
    }
    let person = enroll(&session, &db, None, a.name.as_deref())?;
    writeln!(out, "enrolled person {} ({} crops) as {}", person.id, person.crop_count, person.label())?;
    if session.collected().len() < DEFAULT_TARGET_COUNT {
        tracing::warn!(crops = session.collected().len(), "fewer crops than the usual enrollment target");
    }
    Ok(())
}

fn recognize_cmd(a: &RecognizeArgs, out: &mut dyn Write) -> Result<(), BoxError> {
    let db = FaceDb::open(&a.db)?;
    let gallery = Gallery::new(db.load_gallery());
    let img = read_image(&a.image)?;
    if a.crop {
        let probe = roll_corrected_descriptor(&img)?;
        let line = match gallery.match_probe(&probe, a.threshold)? {
            Some(m) if m.accepted => {
                let label = gallery.get(m.person_id).map_or_else(|| m.person_id.to_string(), |p| p.label());
                format!("{label}\t{:.4}", m.distance)
            }
            Some(m) => format!("unidentified\t{:.4}", m.distance),
            None => "unidentified".to_string(),
        };
        writeln!(out, "{line}")?;
        return Ok(());
    }
    let mut engine = load_engine(&a.models.models)?;
    engine.pipeline.threshold = a.threshold;
    let obs = process_frame(&img, &engine.cascade, &engine.attributes, Some(&gallery), None, &engine.pipeline)?;
    for o in &obs {
        let label = match &o.identity {
            crate::pipeline::Identity::Recognized { distance, .. } => format!("{}\t{distance:.4}", o.identity.label()),
            crate::pipeline::Identity::Unidentified => "unidentified".to_string(),
        };
        writeln!(out, "{}\t{label}", o.rect)?;
    }
    if obs.is_empty() {
        writeln!(out, "no faces")?;
    }
    Ok(())
}

fn serve_cmd(a: &ServeArgs) -> Result<(), BoxError> {
    let cfg = ServiceConfig::load(&a.config)?;
    cfg.check_files()?;
    let engine = Engine::load(&cfg)?;
    let db = FaceDb::open(&cfg.db_path)?;
    let state = Arc::new(AppState::new(Some(engine), db, &cfg));
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(crate::interface::serve(state, &cfg.bind, cfg.port))?;
    Ok(())
}

fn db_verify_cmd(db: &Path, out: &mut dyn Write) -> Result<(), BoxError> {
    if !db.join("VERSION").is_file() {
        return Err(format!("{} is not a face database", db.display()).into());
    }
    let report = FaceDb::open(db)?.verify()?;
    for p in &report.problems {
        writeln!(out, "problem: {p}")?;
    }
    writeln!(out, "{} persons, {} crops, {} problems", report.persons, report.crops, report.problems.len())?;
    if report.is_ok() {
        Ok(())
    } else {
        Err("database failed verification".into())
    }
}

/// Runs a parsed command, writing results to `out`.
pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<(), BoxError> {
    match &cli.command {
        Command::TrainCascade(a) => train_cascade_cmd(a, out),
        Command::TrainAttr(a) => train_attr_cmd(a, out),
        Command::Detect(a) => detect_cmd(a, out),
        Command::Enroll(a) => enroll_cmd(a, out),
        Command::Recognize(a) => recognize_cmd(a, out),
        Command::Serve(a) => serve_cmd(a),
        Command::Db { command: DbCommand::Verify { db } } => db_verify_cmd(db, out),
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match execute(&cli, &mut lock) {
        Ok(()) => 0,
        Err(e) => {
            let _ = lock.flush();
            eprintln!("error: {e}");
            EXIT_FAILURE
        }
    }
}
