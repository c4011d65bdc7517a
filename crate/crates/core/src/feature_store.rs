//! Ingestion, validation and storage of per-frame feature records.
//!
//! A film arrives as a line-delimited stream: one header object followed by
//! one object per sampled frame. Everything downstream (segmentation,
//! indexing, retrieval) reads frames and pooled shot vectors from here.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::NodeId;

pub mod synth;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("line {line}: malformed header: {reason}")]
    MalformedHeader { line: usize, reason: String },
    #[error("line {line}: malformed record: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("line {line}: {field} has {found} components, expected {expected}")]
    DimensionMismatch {
        line: usize,
        field: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: frame index {found} does not follow {prev}")]
    NonIncreasingFrame { line: usize, prev: u64, found: u64 },
    #[error("line {line}: frame index {found} breaks sampling stride {stride} after {prev}")]
    StrideMismatch {
        line: usize,
        prev: u64,
        found: u64,
        stride: u64,
    },
    #[error("line {line}: {reason}")]
    InvalidValue { line: usize, reason: String },
    #[error("stream is empty")]
    EmptyStream,
    #[error("film {0:?} already exists")]
    DuplicateFilm(String),
    #[error("unknown film {0:?}")]
    UnknownFilm(String),
    #[error("unknown shot {0}")]
    UnknownShot(NodeId),
    #[error("invalid film id {0:?}: use letters, digits, '_', '-' or '.'")]
    InvalidFilmId(String),
    #[error("corrupt store file {path}: {reason}")]
    Corrupt { path: PathBuf, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = StoreError> = std::result::Result<T, E>;

/// Film-level metadata carried by the stream header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilmMeta {
    pub film_id: String,
    pub title: String,
    pub fps: f64,
    pub frame_count: u64,
    pub feature_dim: usize,
    pub class_count: usize,
    pub sampling_period_ms: u64,
}

impl FilmMeta {
    /// Source frames between consecutive samples, `round(S * fps / 1000)`.
    pub fn frame_stride(&self) -> u64 {
        (self.sampling_period_ms as f64 * self.fps / 1000.0).round() as u64
    }

    fn validate(&self, line: usize) -> Result<()> {
        let bad = |reason: &str| StoreError::MalformedHeader {
            line,
            reason: reason.to_string(),
        };
        if !valid_film_id(&self.film_id) {
            return Err(StoreError::InvalidFilmId(self.film_id.clone()));
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(bad("fps must be a positive number"));
        }
        if self.feature_dim == 0 {
            return Err(bad("feature_dim must be positive"));
        }
        if self.class_count == 0 {
            return Err(bad("class_count must be positive"));
        }
        if self.sampling_period_ms == 0 {
            return Err(bad("sampling_period_ms must be positive"));
        }
        Ok(())
    }
}

/// Salient object box in normalized frame coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SalientAnnotation {
    pub lemma: String,
    /// `[x, y, w, h]`, origin top-left.
    pub bbox: [f64; 4],
    #[serde(rename = "conf")]
    pub confidence: f64,
}

impl SalientAnnotation {
    pub fn center(&self) -> (f64, f64) {
        let [x, y, w, h] = self.bbox;
        (x + w / 2.0, y + h / 2.0)
    }

    fn validate(&self) -> std::result::Result<(), String> {
        let [x, y, w, h] = self.bbox;
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !(unit(x) && unit(y) && unit(w) && unit(h)) || x + w > 1.0 || y + h > 1.0 {
            return Err(format!("bbox {:?} leaves the unit square", self.bbox));
        }
        if !unit(self.confidence) {
            return Err(format!("confidence {} outside [0, 1]", self.confidence));
        }
        if self.lemma.is_empty() {
            return Err("salient lemma is empty".into());
        }
        Ok(())
    }
}

/// One sampled frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    #[serde(rename = "frame")]
    pub frame_index: u64,
    #[serde(rename = "t_ms")]
    pub timestamp_ms: u64,
    pub fv: Vec<f64>,
    pub cv: Vec<f64>,
    #[serde(default)]
    pub salient: Vec<SalientAnnotation>,
}

/// A film held by the store.
#[derive(Debug, Clone, PartialEq)]
pub struct Film {
    pub meta: FilmMeta,
    pub frames: Vec<FrameRecord>,
}

/// Pooled per-shot vectors, keyed by the shot's graph node id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotRecord {
    pub shot_id: NodeId,
    pub film_id: String,
    /// First sample ordinal of the shot (inclusive).
    pub start_ordinal: usize,
    /// One past the last sample ordinal.
    pub end_ordinal: usize,
    pub duration_ms: u64,
    pub pooled_fv: Vec<f64>,
    pub pooled_cv: Vec<f64>,
}

pub(crate) fn valid_film_id(id: &str) -> bool {
    !id.is_empty()
        && !id.starts_with('.')
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

/// Parse and fully validate a feature stream without touching any store.
pub fn parse_stream<R: BufRead>(reader: R) -> Result<Film> {
    let mut meta: Option<FilmMeta> = None;
    let mut frames: Vec<FrameRecord> = Vec::new();
    let mut prev_index: Option<u64> = None;

    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let Some(meta) = meta.as_ref() else {
            let parsed: FilmMeta =
                serde_json::from_str(&line).map_err(|e| StoreError::MalformedHeader {
                    line: line_no,
                    reason: e.to_string(),
                })?;
            parsed.validate(line_no)?;
            meta = Some(parsed);
            continue;
        };
        let frame: FrameRecord =
            serde_json::from_str(&line).map_err(|e| StoreError::MalformedRecord {
                line: line_no,
                reason: e.to_string(),
            })?;
        validate_frame(meta, &frame, line_no)?;
        if let Some(prev) = prev_index {
            if frame.frame_index <= prev {
                return Err(StoreError::NonIncreasingFrame {
                    line: line_no,
                    prev,
                    found: frame.frame_index,
                });
            }
            let stride = meta.frame_stride();
            if stride > 0 && frame.frame_index - prev != stride {
                return Err(StoreError::StrideMismatch {
                    line: line_no,
                    prev,
                    found: frame.frame_index,
                    stride,
                });
            }
        }
        prev_index = Some(frame.frame_index);
        frames.push(frame);
    }

    let meta = meta.ok_or(StoreError::EmptyStream)?;
    Ok(Film { meta, frames })
}

fn validate_frame(meta: &FilmMeta, frame: &FrameRecord, line: usize) -> Result<()> {
    if frame.fv.len() != meta.feature_dim {
        return Err(StoreError::DimensionMismatch {
            line,
            field: "fv",
            expected: meta.feature_dim,
            found: frame.fv.len(),
        });
    }
    if frame.cv.len() != meta.class_count {
        return Err(StoreError::DimensionMismatch {
            line,
            field: "cv",
            expected: meta.class_count,
            found: frame.cv.len(),
        });
    }
    if frame.fv.iter().any(|v| !v.is_finite()) {
        return Err(StoreError::InvalidValue {
            line,
            reason: "fv contains a non-finite value".into(),
        });
    }
    if let Some(v) = frame.cv.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(StoreError::InvalidValue {
            line,
            reason: format!("cv component {v} outside [0, 1]"),
        });
    }
    for ann in &frame.salient {
        ann.validate()
            .map_err(|reason| StoreError::InvalidValue { line, reason })?;
    }
    Ok(())
}

/// Serialize a film back into the stream format.
pub fn write_stream<W: Write>(film: &Film, mut out: W) -> Result<()> {
    let mut line = serde_json::to_string(&film.meta).expect("meta serializes");
    line.push('\n');
    out.write_all(line.as_bytes())?;
    for frame in &film.frames {
        let mut line = serde_json::to_string(frame).expect("frame serializes");
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    Ok(())
}

/// Read bare feature vectors (positive samples): frame-record lines where only
/// `fv` is required.
pub fn parse_vectors<R: BufRead>(reader: R, dim: Option<usize>) -> Result<Vec<Vec<f64>>> {
    #[derive(Deserialize)]
    struct VectorLine {
        fv: Vec<f64>,
    }
    let mut out = Vec::new();
    let mut expected = dim;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: VectorLine =
            serde_json::from_str(&line).map_err(|e| StoreError::MalformedRecord {
                line: line_no,
                reason: e.to_string(),
            })?;
        let want = *expected.get_or_insert(parsed.fv.len());
        if parsed.fv.len() != want {
            return Err(StoreError::DimensionMismatch {
                line: line_no,
                field: "fv",
                expected: want,
                found: parsed.fv.len(),
            });
        }
        if parsed.fv.iter().any(|v| !v.is_finite()) {
            return Err(StoreError::InvalidValue {
                line: line_no,
                reason: "fv contains a non-finite value".into(),
            });
        }
        out.push(parsed.fv);
    }
    Ok(out)
}

/// Embedded store of films and pooled shot vectors.
///
/// Readers take cheap `Arc` snapshots of a film. Writers to the same film are
/// serialized through a per-film mutex; distinct films ingest in parallel.
#[derive(Debug, Default)]
pub struct FeatureStore {
    root: Option<PathBuf>,
    films: RwLock<BTreeMap<String, Arc<Film>>>,
    shots: RwLock<BTreeMap<NodeId, Arc<ShotRecord>>>,
    writers: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl FeatureStore {
    /// A store that lives only in memory.
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Open (or create) a store persisted under `root`.
    pub fn open(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        let films_dir = root.join("films");
        fs::create_dir_all(&films_dir)?;

        let mut films = BTreeMap::new();
        let mut entries: Vec<_> = fs::read_dir(&films_dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        entries.sort();
        for path in entries {
            let file = fs::File::open(&path)?;
            let film =
                parse_stream(std::io::BufReader::new(file)).map_err(|e| StoreError::Corrupt {
                    path: path.clone(),
                    reason: e.to_string(),
                })?;
            films.insert(film.meta.film_id.clone(), Arc::new(film));
        }

        let mut shots = BTreeMap::new();
        let shots_path = root.join("shots.jsonl");
        if shots_path.exists() {
            let text = fs::read_to_string(&shots_path)?;
            for line in text.lines().filter(|l| !l.trim().is_empty()) {
                let shot: ShotRecord =
                    serde_json::from_str(line).map_err(|e| StoreError::Corrupt {
                        path: shots_path.clone(),
                        reason: e.to_string(),
                    })?;
                shots.insert(shot.shot_id, Arc::new(shot));
            }
        }

        Ok(Self {
            root: Some(root),
            films: RwLock::new(films),
            shots: RwLock::new(shots),
            writers: Mutex::new(HashMap::new()),
        })
    }

    fn writer_lock(&self, film_id: &str) -> Arc<Mutex<()>> {
        self.writers
            .lock()
            .entry(film_id.to_string())
            .or_default()
            .clone()
    }

    /// Parse, validate and persist one film. Nothing is stored unless the
    /// whole stream is valid.
    pub fn ingest_stream<R: BufRead>(&self, reader: R, overwrite: bool) -> Result<(FilmMeta, usize)> {
        let film = parse_stream(reader)?;
        self.insert_film(film, overwrite)
    }

    pub fn insert_film(&self, film: Film, overwrite: bool) -> Result<(FilmMeta, usize)> {
        let id = film.meta.film_id.clone();
        if !valid_film_id(&id) {
            return Err(StoreError::InvalidFilmId(id));
        }
        let lock = self.writer_lock(&id);
        let _guard = lock.lock();
        if !overwrite && self.films.read().contains_key(&id) {
            return Err(StoreError::DuplicateFilm(id));
        }
        if let Some(root) = &self.root {
            let path = root.join("films").join(format!("{id}.jsonl"));
            let tmp = path.with_extension("jsonl.tmp");
            {
                let mut out = std::io::BufWriter::new(fs::File::create(&tmp)?);
                write_stream(&film, &mut out)?;
                out.flush()?;
            }
            fs::rename(&tmp, &path)?;
        }
        let meta = film.meta.clone();
        let count = film.frames.len();
        self.films.write().insert(id, Arc::new(film));
        Ok((meta, count))
    }

    pub fn film(&self, film_id: &str) -> Result<Arc<Film>> {
        self.films
            .read()
            .get(film_id)
            .cloned()
            .ok_or_else(|| StoreError::UnknownFilm(film_id.to_string()))
    }

    pub fn film_ids(&self) -> Vec<String> {
        self.films.read().keys().cloned().collect()
    }

    /// Frames of a film in frame-index order, optionally restricted to an
    /// inclusive frame-index range.
    pub fn get_frames(&self, film_id: &str, range: Option<(u64, u64)>) -> Result<Vec<FrameRecord>> {
        let film = self.film(film_id)?;
        Ok(match range {
            None => film.frames.clone(),
            Some((lo, hi)) => film
                .frames
                .iter()
                .filter(|f| (lo..=hi).contains(&f.frame_index))
                .cloned()
                .collect(),
        })
    }

    /// Replace all pooled shot vectors of `film_id` with `shots`.
    pub fn replace_film_shots(&self, film_id: &str, shots: Vec<ShotRecord>) -> Result<()> {
        let lock = self.writer_lock(film_id);
        let _guard = lock.lock();
        let mut table = self.shots.write();
        table.retain(|_, s| s.film_id != film_id);
        for shot in shots {
            table.insert(shot.shot_id, Arc::new(shot));
        }
        if let Some(root) = &self.root {
            let path = root.join("shots.jsonl");
            let tmp = root.join("shots.jsonl.tmp");
            {
                let mut out = std::io::BufWriter::new(fs::File::create(&tmp)?);
                for shot in table.values() {
                    serde_json::to_writer(&mut out, shot.as_ref()).expect("shot serializes");
                    out.write_all(b"\n")?;
                }
                out.flush()?;
            }
            fs::rename(&tmp, &path)?;
        }
        Ok(())
    }

    pub fn shot(&self, shot_id: NodeId) -> Result<Arc<ShotRecord>> {
        self.shots
            .read()
            .get(&shot_id)
            .cloned()
            .ok_or(StoreError::UnknownShot(shot_id))
    }

    /// All pooled shots in shot-id order.
    pub fn shots(&self) -> Vec<Arc<ShotRecord>> {
        self.shots.read().values().cloned().collect()
    }

    pub fn shot_count(&self) -> usize {
        self.shots.read().len()
    }
}
