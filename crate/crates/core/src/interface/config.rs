use std::path::{Path, PathBuf};

use crate::attributes::{AttributeKind, DEFAULT_YAW_GAIN};
use crate::detector::ScanParams;
use crate::pipeline::DEFAULT_MAX_AGE;
use crate::recognizer::{DEFAULT_TARGET_COUNT, DEFAULT_THRESHOLD};

/// Environment variable that overrides `db_path`.
pub const DB_ENV: &str = "REAL_DB";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// Service settings, read from `key: value` lines. Relative paths are
/// taken relative to the config file's directory.
#[derive(Clone, Debug, PartialEq)]
pub struct ServiceConfig {
    pub bind: String,
    pub port: u16,
    pub db_path: PathBuf,
    pub cascade_path: PathBuf,
    pub smile_model: PathBuf,
    pub left_eye_model: PathBuf,
    pub right_eye_model: PathBuf,
    pub threshold: f64,
    pub scan: ScanParams,
    pub target_count: usize,
    pub max_age: u32,
    pub yaw_gain: f64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            bind: "127.0.0.1".into(),
            port: 8080,
            db_path: "db".into(),
            cascade_path: "models/cascade.relc".into(),
            smile_model: format!("models/{}", AttributeKind::Smile.file_name()).into(),
            left_eye_model: format!("models/{}", AttributeKind::LeftEye.file_name()).into(),
            right_eye_model: format!("models/{}", AttributeKind::RightEye.file_name()).into(),
            threshold: DEFAULT_THRESHOLD,
            scan: ScanParams::default(),
            target_count: DEFAULT_TARGET_COUNT,
            max_age: DEFAULT_MAX_AGE,
            yaw_gain: DEFAULT_YAW_GAIN,
        }
    }
}

impl ServiceConfig {
    /// Parses config text. `base` resolves relative paths.
    pub fn parse(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut cfg = ServiceConfig::default();
        let mut models_dir: Option<PathBuf> = None;
        let mut explicit = [false; 4];
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let syntax = |message: String| ConfigError::Syntax { line: i + 1, message };
            let (key, value) = line.split_once(':').ok_or_else(|| syntax("expected `key: value`".into()))?;
            let (key, value) = (key.trim(), value.trim());
            let path = || base.join(value);
            let num = |what: &str| -> Result<f64, ConfigError> {
                value.parse::<f64>().map_err(|_| syntax(format!("{key}: expected {what}, got {value:?}")))
            };
            let int = || -> Result<u64, ConfigError> {
                value.parse::<u64>().map_err(|_| syntax(format!("{key}: expected an integer, got {value:?}")))
            };
            match key {
                "bind" => cfg.bind = value.to_string(),
                "port" => cfg.port = u16::try_from(int()?).map_err(|_| syntax("port out of range".into()))?,
                "db_path" => cfg.db_path = path(),
                "models_dir" => models_dir = Some(path()),
                "cascade_path" => {
                    cfg.cascade_path = path();
                    explicit[0] = true;
                }
                "smile_model" => {
                    cfg.smile_model = path();
                    explicit[1] = true;
                }
                "left_eye_model" => {
                    cfg.left_eye_model = path();
                    explicit[2] = true;
                }
                "right_eye_model" => {
                    cfg.right_eye_model = path();
                    explicit[3] = true;
                }
                "threshold" => cfg.threshold = num("a number")?,
                "scale_factor" => cfg.scan.scale_factor = num("a number")?,
                "stride" => cfg.scan.stride = num("a number")?,
                "min_window" => cfg.scan.min_window = int()? as u32,
                "max_window" => cfg.scan.max_window = Some(int()? as u32),
                "nms_iou" => cfg.scan.nms_iou = num("a number")?,
                "target_count" => cfg.target_count = int()? as usize,
                "max_age" => cfg.max_age = int()? as u32,
                "yaw_gain" => cfg.yaw_gain = num("a number")?,
                _ => return Err(syntax(format!("unknown key {key:?}"))),
            }
        }
        if let Some(dir) = models_dir {
            let kinds = [AttributeKind::Smile, AttributeKind::LeftEye, AttributeKind::RightEye];
            if !explicit[0] {
                cfg.cascade_path = dir.join(super::CASCADE_FILE);
            }
            for (k, (slot, set)) in kinds.iter().zip(
                [&mut cfg.smile_model, &mut cfg.left_eye_model, &mut cfg.right_eye_model].into_iter().zip(&explicit[1..]),
            ) {
                if !set {
                    *slot = dir.join(k.file_name());
                }
            }
        } else {
            for p in [&mut cfg.cascade_path, &mut cfg.smile_model, &mut cfg.left_eye_model, &mut cfg.right_eye_model] {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        if cfg.db_path.is_relative() {
            cfg.db_path = base.join(&cfg.db_path);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut cfg = Self::parse(&text, base)?;
        cfg.apply_env();
        Ok(cfg)
    }

    /// Applies the `REAL_DB` override.
    pub fn apply_env(&mut self) {
        if let Some(db) = std::env::var_os(DB_ENV).filter(|v| !v.is_empty()) {
            self.db_path = PathBuf::from(db);
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.threshold > 0.0) {
            return Err(ConfigError::Invalid(format!("threshold must be positive, got {}", self.threshold)));
        }
        if !(self.scan.scale_factor > 1.0) || !(self.scan.stride > 0.0) {
            return Err(ConfigError::Invalid("scale_factor must exceed 1 and stride must be positive".into()));
        }
        if self.target_count == 0 {
            return Err(ConfigError::Invalid("target_count must be positive".into()));
        }
        Ok(())
    }

    /// Checks that every referenced model file exists.
    pub fn check_files(&self) -> Result<(), ConfigError> {
        for p in [&self.cascade_path, &self.smile_model, &self.left_eye_model, &self.right_eye_model] {
            if !p.is_file() {
                return Err(ConfigError::Invalid(format!("model file {} does not exist", p.display())));
            }
        }
        Ok(())
    }
}
