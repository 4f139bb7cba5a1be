//! On-disk store of enrolled persons.
//!
//! ```text
//! <root>/VERSION
//! <root>/next_id
//! <root>/persons/<id>/meta.txt
//! <root>/persons/<id>/descriptors.bin
//! <root>/persons/<id>/crops/<n>.png
//! ```
//!
//! A person is staged under `<root>/tmp/` and published with one directory
//! rename, so a reader or a reopen sees it completely or not at all.

mod format;

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use fs2::FileExt;

use crate::imagecore::{decode_image, encode_png, GrayImage};
use crate::recognizer::{Descriptor, PersonRecord};

pub use format::{decode_descriptors, encode_descriptors, parse_meta, render_meta, Meta};

pub const DB_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum FaceDbError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("corrupt file {path}: {reason}")]
    Corrupt { path: PathBuf, reason: String },
    #[error("database version {found} needs migration (this build reads version {expected})")]
    Migration { found: String, expected: u32 },
    #[error("no person with id {0}")]
    NotFound(u64),
    #[error("person {id} has no crop {n}")]
    CropNotFound { id: u64, n: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("injected fault at {0:?}")]
    Injected(WriteStep),
}

pub type Result<T> = std::result::Result<T, FaceDbError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> FaceDbError + '_ {
    move |source| FaceDbError::Io { path: path.to_path_buf(), source }
}

/// Points in `put_person` where a fault can be injected. An injected fault
/// abandons the write on the spot, leaving whatever was already on disk, as
/// a crash would.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WriteStep {
    Counter,
    Crops,
    Descriptors,
    Meta,
    Publish,
}

impl WriteStep {
    pub const ALL: [WriteStep; 5] =
        [WriteStep::Counter, WriteStep::Crops, WriteStep::Descriptors, WriteStep::Meta, WriteStep::Publish];
}

/// A person to be stored; the id is allocated by the database.
#[derive(Clone, Debug)]
pub struct NewPerson {
    pub name: Option<String>,
    pub descriptors: Vec<Descriptor>,
    pub crops: Vec<GrayImage>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct VerifyReport {
    pub persons: usize,
    pub crops: usize,
    pub problems: Vec<String>,
}

impl VerifyReport {
    pub fn is_ok(&self) -> bool {
        self.problems.is_empty()
    }
}

#[derive(Debug)]
struct State {
    persons: BTreeMap<u64, PersonRecord>,
    next_id: u64,
}

#[derive(Debug)]
pub struct FaceDb {
    root: PathBuf,
    state: RwLock<State>,
    writer: Mutex<Option<WriteStep>>,
}

/// Rejects names that would not survive the line-based meta format.
pub fn validate_name(name: &str) -> Result<()> {
    if name.trim().is_empty() {
        return Err(FaceDbError::InvalidInput("name must not be empty".into()));
    }
    if name.chars().any(char::is_control) {
        return Err(FaceDbError::InvalidInput("name must not contain control characters".into()));
    }
    if name != name.trim() {
        return Err(FaceDbError::InvalidInput("name must not start or end with whitespace".into()));
    }
    Ok(())
}

fn write_synced(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = File::create(path).map_err(io_err(path))?;
    f.write_all(bytes).map_err(io_err(path))?;
    f.sync_all().map_err(io_err(path))
}

/// Writes to a sibling temp file and renames it over `path`.
fn replace_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    write_synced(&tmp, bytes)?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

fn sync_dir(path: &Path) {
    // Directory fsync is best effort; not every platform allows it.
    if let Ok(d) = File::open(path) {
        let _ = d.sync_all();
    }
}

fn now_unix() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

impl FaceDb {
    /// Opens or creates a database directory, loading and checking every
    /// person.
    pub fn open(root: impl AsRef<Path>) -> Result<FaceDb> {
        let root = root.as_ref().to_path_buf();
        fs::create_dir_all(root.join("persons")).map_err(io_err(&root))?;
        let version_path = root.join("VERSION");
        match fs::read_to_string(&version_path) {
            Ok(v) => {
                if v.trim() != DB_VERSION.to_string() {
                    return Err(FaceDbError::Migration { found: v.trim().to_string(), expected: DB_VERSION });
                }
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                replace_file(&version_path, format!("{DB_VERSION}\n").as_bytes())?;
            }
            Err(e) => return Err(FaceDbError::Io { path: version_path, source: e }),
        }
        let db = FaceDb {
            root,
            state: RwLock::new(State { persons: BTreeMap::new(), next_id: 0 }),
            writer: Mutex::new(None),
        };
        {
            let _lock = db.lock_file()?;
            db.clean_staging()?;
        }
        db.reload()?;
        Ok(db)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn persons_dir(&self) -> PathBuf {
        self.root.join("persons")
    }

    fn person_dir(&self, id: u64) -> PathBuf {
        self.persons_dir().join(id.to_string())
    }

    fn staging_dir(&self) -> PathBuf {
        self.root.join("tmp")
    }

    fn lock_file(&self) -> Result<File> {
        let path = self.root.join("lock");
        let f = File::create(&path).map_err(io_err(&path))?;
        f.lock_exclusive().map_err(io_err(&path))?;
        Ok(f)
    }

    fn clean_staging(&self) -> Result<()> {
        let tmp = self.staging_dir();
        if tmp.exists() {
            fs::remove_dir_all(&tmp).map_err(io_err(&tmp))?;
        }
        for entry in fs::read_dir(&self.root).map_err(io_err(&self.root))? {
            let path = entry.map_err(io_err(&self.root))?.path();
            if path.extension().is_some_and(|e| e == "tmp") {
                let _ = fs::remove_file(&path);
            }
        }
        Ok(())
    }

    fn read_counter(&self) -> Result<u64> {
        let path = self.root.join("next_id");
        match fs::read_to_string(&path) {
            Ok(s) => s
                .trim()
                .parse()
                .map_err(|_| FaceDbError::Corrupt { path: path.clone(), reason: format!("bad counter {:?}", s.trim()) }),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(0),
            Err(e) => Err(FaceDbError::Io { path, source: e }),
        }
    }

    /// Re-reads every person from disk.
    pub fn reload(&self) -> Result<()> {
        let mut persons = BTreeMap::new();
        let dir = self.persons_dir();
        for entry in fs::read_dir(&dir).map_err(io_err(&dir))? {
            let entry = entry.map_err(io_err(&dir))?;
            let path = entry.path();
            let name = entry.file_name();
            let Some(id) = name.to_str().and_then(|s| s.parse::<u64>().ok()) else {
                return Err(FaceDbError::Corrupt { path, reason: "unexpected entry in persons/".into() });
            };
            persons.insert(id, self.load_person(id)?);
        }
        let next_id = self.read_counter()?.max(persons.keys().next_back().map_or(0, |m| m + 1));
        *self.state.write().unwrap_or_else(|e| e.into_inner()) = State { persons, next_id };
        Ok(())
    }

    fn load_person(&self, id: u64) -> Result<PersonRecord> {
        let dir = self.person_dir(id);
        let meta_path = dir.join("meta.txt");
        let text = fs::read(&meta_path).map_err(io_err(&meta_path))?;
        let text = String::from_utf8(text)
            .map_err(|_| FaceDbError::Corrupt { path: meta_path.clone(), reason: "not UTF-8".into() })?;
        let meta = parse_meta(&text).map_err(|reason| FaceDbError::Corrupt { path: meta_path.clone(), reason })?;
        if meta.id != id {
            return Err(FaceDbError::Corrupt { path: meta_path, reason: format!("id {} in directory {id}", meta.id) });
        }
        let desc_path = dir.join("descriptors.bin");
        let bytes = fs::read(&desc_path).map_err(io_err(&desc_path))?;
        let descriptors =
            decode_descriptors(&bytes).map_err(|reason| FaceDbError::Corrupt { path: desc_path.clone(), reason })?;
        if descriptors.len() != meta.descriptor_count {
            return Err(FaceDbError::Corrupt {
                path: desc_path,
                reason: format!("{} descriptors, meta says {}", descriptors.len(), meta.descriptor_count),
            });
        }
        for n in 0..meta.crop_count {
            let p = dir.join("crops").join(format!("{n}.png"));
            if !p.is_file() {
                return Err(FaceDbError::Corrupt { path: p, reason: "missing crop".into() });
            }
        }
        Ok(PersonRecord {
            id,
            name: meta.name,
            descriptors,
            crop_count: meta.crop_count,
            created_unix_seconds: meta.created_unix_seconds,
        })
    }

    /// Every person, by ascending id.
    pub fn load_gallery(&self) -> Vec<PersonRecord> {
        self.state.read().unwrap_or_else(|e| e.into_inner()).persons.values().cloned().collect()
    }

    pub fn get(&self, id: u64) -> Option<PersonRecord> {
        self.state.read().unwrap_or_else(|e| e.into_inner()).persons.get(&id).cloned()
    }

    pub fn len(&self) -> usize {
        self.state.read().unwrap_or_else(|e| e.into_inner()).persons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The id the next stored person will receive.
    pub fn next_id(&self) -> u64 {
        self.state.read().unwrap_or_else(|e| e.into_inner()).next_id
    }

    /// Makes the next `put_person` stop at `step` as if the process died.
    pub fn inject_fault(&self, step: WriteStep) {
        *self.writer.lock().unwrap_or_else(|e| e.into_inner()) = Some(step);
    }

    /// Stores a person under a fresh id and returns the record.
    pub fn put_person(&self, person: &NewPerson) -> Result<PersonRecord> {
        if person.descriptors.is_empty() {
            return Err(FaceDbError::InvalidInput("a person needs at least one descriptor".into()));
        }
        if let Some(name) = &person.name {
            validate_name(name)?;
        }
        let mut fault = self.writer.lock().unwrap_or_else(|e| e.into_inner());
        let _lock = self.lock_file()?;
        // Another process may have written since we loaded.
        let on_disk = self.read_counter()?;
        let id = {
            let mut st = self.state.write().unwrap_or_else(|e| e.into_inner());
            st.next_id = st.next_id.max(on_disk);
            st.next_id
        };
        let check = |step: WriteStep, fault: &mut Option<WriteStep>| -> Result<()> {
            if *fault == Some(step) {
                *fault = None;
                return Err(FaceDbError::Injected(step));
            }
            Ok(())
        };

        // Reserve the id first so it is never handed out twice.
        check(WriteStep::Counter, &mut fault)?;
        replace_file(&self.root.join("next_id"), format!("{}\n", id + 1).as_bytes())?;
        self.state.write().unwrap_or_else(|e| e.into_inner()).next_id = id + 1;

        let stage = self.staging_dir().join(format!("{id}"));
        if stage.exists() {
            fs::remove_dir_all(&stage).map_err(io_err(&stage))?;
        }
        let crops_dir = stage.join("crops");
        fs::create_dir_all(&crops_dir).map_err(io_err(&crops_dir))?;
        for (n, crop) in person.crops.iter().enumerate() {
            check(WriteStep::Crops, &mut fault)?;
            let png = encode_png(crop).map_err(|e| FaceDbError::InvalidInput(format!("crop {n}: {e}")))?;
            write_synced(&crops_dir.join(format!("{n}.png")), &png)?;
        }
        check(WriteStep::Descriptors, &mut fault)?;
        let desc = encode_descriptors(&person.descriptors).map_err(FaceDbError::InvalidInput)?;
        write_synced(&stage.join("descriptors.bin"), &desc)?;
        check(WriteStep::Meta, &mut fault)?;
        let meta = Meta {
            id,
            name: person.name.clone(),
            created_unix_seconds: now_unix(),
            descriptor_count: person.descriptors.len(),
            crop_count: person.crops.len(),
        };
        write_synced(&stage.join("meta.txt"), render_meta(&meta).as_bytes())?;
        sync_dir(&crops_dir);
        sync_dir(&stage);
        check(WriteStep::Publish, &mut fault)?;
        let dest = self.person_dir(id);
        fs::rename(&stage, &dest).map_err(io_err(&dest))?;
        sync_dir(&self.persons_dir());

        let record = PersonRecord {
            id,
            name: meta.name,
            descriptors: person.descriptors.clone(),
            crop_count: meta.crop_count,
            created_unix_seconds: meta.created_unix_seconds,
        };
        self.state.write().unwrap_or_else(|e| e.into_inner()).persons.insert(id, record.clone());
        tracing::info!(id, "person stored");
        Ok(record)
    }

    /// Renames a person, rewriting its meta file atomically.
    pub fn set_name(&self, id: u64, name: &str) -> Result<PersonRecord> {
        validate_name(name)?;
        let _guard = self.writer.lock().unwrap_or_else(|e| e.into_inner());
        let _lock = self.lock_file()?;
        let mut record = self.get(id).ok_or(FaceDbError::NotFound(id))?;
        record.name = Some(name.to_string());
        let meta = Meta {
            id,
            name: record.name.clone(),
            created_unix_seconds: record.created_unix_seconds,
            descriptor_count: record.descriptors.len(),
            crop_count: record.crop_count,
        };
        replace_file(&self.person_dir(id).join("meta.txt"), render_meta(&meta).as_bytes())?;
        self.state.write().unwrap_or_else(|e| e.into_inner()).persons.insert(id, record.clone());
        Ok(record)
    }

    /// Removes a person. Its id stays retired.
    pub fn delete(&self, id: u64) -> Result<()> {
        let _guard = self.writer.lock().unwrap_or_else(|e| e.into_inner());
        let _lock = self.lock_file()?;
        if self.get(id).is_none() {
            return Err(FaceDbError::NotFound(id));
        }
        let trash = self.staging_dir().join(format!("deleted-{id}"));
        fs::create_dir_all(self.staging_dir()).map_err(io_err(&self.root))?;
        fs::rename(self.person_dir(id), &trash).map_err(io_err(&trash))?;
        self.state.write().unwrap_or_else(|e| e.into_inner()).persons.remove(&id);
        fs::remove_dir_all(&trash).map_err(io_err(&trash))
    }

    /// Stored PNG bytes of a crop, exactly as written.
    pub fn crop_bytes(&self, id: u64, n: usize) -> Result<Vec<u8>> {
        let record = self.get(id).ok_or(FaceDbError::NotFound(id))?;
        if n >= record.crop_count {
            return Err(FaceDbError::CropNotFound { id, n });
        }
        let path = self.person_dir(id).join("crops").join(format!("{n}.png"));
        fs::read(&path).map_err(io_err(&path))
    }

    pub fn read_crop(&self, id: u64, n: usize) -> Result<GrayImage> {
        let bytes = self.crop_bytes(id, n)?;
        decode_image(&bytes).map_err(|e| FaceDbError::Corrupt {
            path: self.person_dir(id).join("crops").join(format!("{n}.png")),
            reason: e.to_string(),
        })
    }

    /// Checks every file of every person, collecting problems instead of
    /// stopping at the first.
    pub fn verify(&self) -> Result<VerifyReport> {
        let mut report = VerifyReport::default();
        let dir = self.persons_dir();
        let mut ids = Vec::new();
        for entry in fs::read_dir(&dir).map_err(io_err(&dir))? {
            let entry = entry.map_err(io_err(&dir))?;
            match entry.file_name().to_str().and_then(|s| s.parse::<u64>().ok()) {
                Some(id) => ids.push(id),
                None => report.problems.push(format!("{}: unexpected entry", entry.path().display())),
            }
        }
        ids.sort_unstable();
        let counter = self.read_counter()?;
        for id in ids {
            if id >= counter {
                report.problems.push(format!("person {id} is not below the id counter {counter}"));
            }
            match self.load_person(id) {
                Ok(p) => {
                    report.persons += 1;
                    for n in 0..p.crop_count {
                        let path = self.person_dir(id).join("crops").join(format!("{n}.png"));
                        match fs::read(&path).map_err(|e| e.to_string()).and_then(|b| decode_image(&b).map_err(|e| e.to_string())) {
                            Ok(_) => report.crops += 1,
                            Err(e) => report.problems.push(format!("{}: {e}", path.display())),
                        }
                    }
                }
                Err(e) => report.problems.push(e.to_string()),
            }
        }
        Ok(report)
    }
}
