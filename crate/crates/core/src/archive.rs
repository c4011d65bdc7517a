//! A complete on-disk (or in-memory) archive: feature store, graph, lexicon,
//! class map, shot boundaries and trained classifiers behind one handle.
//!
//! Layout under the root directory:
//!
//! ```text
//! films/<film_id>.jsonl      ingested feature streams
//! shots.jsonl                pooled shot vectors
//! graph.dump                 graph snapshot (lexicon + film graphs)
//! classmap.txt               classifier slot -> synset id
//! boundaries/<film_id>.json  latest segmentation per film
//! classifiers/<id>.model     trained classifier models
//! ```
//!
//! Every mutating call rewrites the affected files through a temporary file
//! and a rename.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use parking_lot::{Mutex, RwLock, RwLockReadGuard};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::feature_store::{FeatureStore, FilmMeta, StoreError};
use crate::graph::{GraphError, GraphStore, NodeId, Value, EDGE_SALIENT, LABEL_SHOT};
use crate::indexer::{self, BuildCounts, ClassMap, IndexError, IndexParams, SpatialRelation, TagAssignment};
use crate::lexicon::{LexiconError, Lexicon, LoadCounts};
use crate::query::{self, Explain, QueryError, QueryResult};
use crate::retrieval::{self, ClassifierModel, Page, RetrievalError, SearchResponse, SearchResult, TrainParams};
use crate::segmenter::{self, Metric, SegmentError, SegmentationParams, ShotBoundaries, DEFAULT_KERNEL};

#[derive(Debug, Error)]
pub enum ArchiveError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Segment(#[from] SegmentError),
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("film `{0}` has not been segmented yet")]
    NotSegmented(String),
    #[error("no class map loaded")]
    NoClassMap,
    #[error("unknown classifier `{0}`")]
    UnknownClassifier(String),
    #[error("unknown shot {0}")]
    UnknownShot(NodeId),
    #[error("{}: {reason}", path.display())]
    Corrupt { path: PathBuf, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = ArchiveError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SegmentOptions {
    /// Fixed threshold; `None` calibrates one from the film itself.
    pub threshold: Option<f64>,
    pub metric: Metric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentReport {
    pub film_id: String,
    pub threshold: f64,
    pub shots: usize,
    pub boundaries: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotInfo {
    pub shot_id: NodeId,
    pub film_id: String,
    pub title: String,
    pub shot_index: i64,
    pub start_ordinal: usize,
    pub end_ordinal: usize,
    pub start_ms: i64,
    pub duration_ms: u64,
    pub tags: Vec<TagAssignment>,
    pub salient: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveStats {
    pub films: usize,
    pub shots: usize,
    pub synsets: usize,
    pub nodes: usize,
    pub edges: usize,
    pub classifiers: usize,
}

#[derive(Debug, Default)]
pub struct Archive {
    root: Option<PathBuf>,
    store: FeatureStore,
    graph: RwLock<GraphStore>,
    lexicon: RwLock<Lexicon>,
    class_map: RwLock<Option<ClassMap>>,
    boundaries: RwLock<BTreeMap<String, ShotBoundaries>>,
    classifiers: RwLock<BTreeMap<String, Arc<ClassifierModel>>>,
    /// Serializes snapshot writes.
    persist: Mutex<()>,
}

fn write_atomic(path: &Path, write: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut out = std::io::BufWriter::new(fs::File::create(&tmp)?);
        write(&mut out)?;
        out.flush()?;
    }
    fs::rename(&tmp, path)
}

fn corrupt(path: &Path, reason: impl ToString) -> ArchiveError {
    ArchiveError::Corrupt {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    }
}

fn classifier_number(id: &str) -> Option<u64> {
    id.strip_prefix('c')?.parse().ok()
}

impl Archive {
    pub fn in_memory() -> Self {
        Self {
            graph: RwLock::new(GraphStore::with_default_indexes()),
            ..Default::default()
        }
    }

    /// Open the archive stored under `root`, creating it if needed.
    pub fn open(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        fs::create_dir_all(root.join("boundaries"))?;
        fs::create_dir_all(root.join("classifiers"))?;
        let store = FeatureStore::open(&root)?;

        let graph_path = root.join("graph.dump");
        let graph = if graph_path.exists() {
            GraphStore::load(BufReader::new(fs::File::open(&graph_path)?)).map_err(|e| corrupt(&graph_path, e))?
        } else {
            GraphStore::with_default_indexes()
        };
        let lexicon = Lexicon::from_graph(&graph);

        let map_path = root.join("classmap.txt");
        let class_map = if map_path.exists() {
            Some(ClassMap::parse(BufReader::new(fs::File::open(&map_path)?)).map_err(|e| corrupt(&map_path, e))?)
        } else {
            None
        };

        let mut boundaries = BTreeMap::new();
        for entry in fs::read_dir(root.join("boundaries"))? {
            let path = entry?.path();
            if path.extension().is_some_and(|x| x == "json") {
                let b: ShotBoundaries =
                    serde_json::from_str(&fs::read_to_string(&path)?).map_err(|e| corrupt(&path, e))?;
                boundaries.insert(b.film_id.clone(), b);
            }
        }

        let mut classifiers = BTreeMap::new();
        for entry in fs::read_dir(root.join("classifiers"))? {
            let path = entry?.path();
            if path.extension().is_some_and(|x| x == "model") {
                let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
                let model = ClassifierModel::load(BufReader::new(fs::File::open(&path)?)).map_err(|e| corrupt(&path, e))?;
                classifiers.insert(id, Arc::new(model));
            }
        }

        Ok(Self {
            root: Some(root),
            store,
            graph: RwLock::new(graph),
            lexicon: RwLock::new(lexicon),
            class_map: RwLock::new(class_map),
            boundaries: RwLock::new(boundaries),
            classifiers: RwLock::new(classifiers),
            persist: Mutex::new(()),
        })
    }

    pub fn root(&self) -> Option<&Path> {
        self.root.as_deref()
    }

    pub fn store(&self) -> &FeatureStore {
        &self.store
    }

    pub fn graph(&self) -> RwLockReadGuard<'_, GraphStore> {
        self.graph.read()
    }

    pub fn lexicon(&self) -> RwLockReadGuard<'_, Lexicon> {
        self.lexicon.read()
    }

    pub fn stats(&self) -> ArchiveStats {
        let g = self.graph.read();
        ArchiveStats {
            films: self.store.film_ids().len(),
            shots: self.store.shot_count(),
            synsets: self.lexicon.read().len(),
            nodes: g.node_count(),
            edges: g.edge_count(),
            classifiers: self.classifiers.read().len(),
        }
    }

    fn save_graph(&self, graph: &GraphStore) -> Result<()> {
        if let Some(root) = &self.root {
            let _guard = self.persist.lock();
            write_atomic(&root.join("graph.dump"), |w| graph.dump(w))?;
        }
        Ok(())
    }

    pub fn ingest<R: BufRead>(&self, reader: R, overwrite: bool) -> Result<(FilmMeta, usize)> {
        Ok(self.store.ingest_stream(reader, overwrite)?)
    }

    pub fn load_lexicon<R: BufRead>(&self, reader: R) -> Result<LoadCounts> {
        let mut graph = self.graph.write();
        let counts = self.lexicon.write().load(&mut graph, reader)?;
        self.save_graph(&graph)?;
        Ok(counts)
    }

    pub fn set_class_map(&self, map: ClassMap) -> Result<()> {
        map.validate(&self.lexicon.read())?;
        if let Some(root) = &self.root {
            write_atomic(&root.join("classmap.txt"), |w| w.write_all(map.to_text().as_bytes()))?;
        }
        *self.class_map.write() = Some(map);
        Ok(())
    }

    pub fn class_map(&self) -> Option<ClassMap> {
        self.class_map.read().clone()
    }

    pub fn segment(&self, film_id: &str, options: SegmentOptions) -> Result<SegmentReport> {
        let film = self.store.film(film_id)?;
        let fvs: Vec<&[f64]> = film.frames.iter().map(|f| f.fv.as_slice()).collect();
        let (boundaries, threshold) = match options.threshold {
            Some(t) => {
                let params = SegmentationParams {
                    threshold: t,
                    kernel: DEFAULT_KERNEL,
                    metric: options.metric,
                };
                (segmenter::segment(film_id, &fvs, &params)?, t)
            }
            None => segmenter::segment_auto(film_id, &fvs, &DEFAULT_KERNEL, options.metric)?,
        };
        self.set_boundaries(boundaries.clone())?;
        Ok(SegmentReport {
            film_id: film_id.to_string(),
            threshold,
            shots: boundaries.boundaries.len(),
            boundaries: boundaries.boundaries,
        })
    }

    /// Record externally produced boundaries for a film.
    pub fn set_boundaries(&self, boundaries: ShotBoundaries) -> Result<()> {
        let film = self.store.film(&boundaries.film_id)?;
        // Revalidate against the film actually stored.
        let boundaries = ShotBoundaries::new(boundaries.film_id, boundaries.boundaries, film.frames.len())?;
        if let Some(root) = &self.root {
            let path = root.join("boundaries").join(format!("{}.json", boundaries.film_id));
            let text = serde_json::to_string(&boundaries).expect("boundaries serialize");
            write_atomic(&path, |w| w.write_all(text.as_bytes()))?;
        }
        self.boundaries.write().insert(boundaries.film_id.clone(), boundaries);
        Ok(())
    }

    pub fn boundaries(&self, film_id: &str) -> Option<ShotBoundaries> {
        self.boundaries.read().get(film_id).cloned()
    }

    /// Build the film's graph from its latest segmentation. `class_map`
    /// overrides (and replaces) the stored map.
    pub fn index(&self, film_id: &str, params: IndexParams, class_map: Option<ClassMap>) -> Result<BuildCounts> {
        self.store.film(film_id)?;
        let boundaries = self.boundaries(film_id).ok_or_else(|| ArchiveError::NotSegmented(film_id.to_string()))?;
        if let Some(map) = class_map {
            self.set_class_map(map)?;
        }
        let map = self.class_map().ok_or(ArchiveError::NoClassMap)?;
        let mut graph = self.graph.write();
        let lexicon = self.lexicon.read();
        let counts = indexer::build_film_graph(&self.store, &mut graph, &lexicon, &boundaries, &map, params)?;
        self.save_graph(&graph)?;
        Ok(counts)
    }

    pub fn search_keyword(&self, lemma: &str, min_weight: f64, page: Page) -> Result<SearchResponse> {
        Ok(retrieval::search_keyword(&self.graph.read(), &self.lexicon.read(), lemma, min_weight, page)?)
    }

    pub fn search_hypernym(&self, lemma: &str, min_weight: f64, page: Page) -> Result<SearchResponse> {
        Ok(retrieval::search_hypernym(&self.graph.read(), &self.lexicon.read(), lemma, min_weight, page)?)
    }

    pub fn search_spatial(&self, a: &str, relation: SpatialRelation, b: &str, page: Page) -> Result<SearchResponse> {
        Ok(retrieval::search_spatial(&self.graph.read(), &self.lexicon.read(), a, relation, b, page)?)
    }

    pub fn similar(&self, shot: NodeId, threshold: f64, depth: usize) -> Result<Vec<SearchResult>> {
        Ok(retrieval::search_by_shot(
            &self.store,
            &self.graph.read(),
            &self.lexicon.read(),
            shot,
            threshold,
            depth,
        )?)
    }

    /// Train a classifier against archive negatives and register it. Returns
    /// the new classifier id.
    pub fn train_classifier(&self, positives: &[Vec<f64>], params: &TrainParams) -> Result<(String, Arc<ClassifierModel>)> {
        let model = Arc::new(retrieval::train_on_archive(positives, &self.store, params)?);
        let mut table = self.classifiers.write();
        let next = table.keys().filter_map(|k| classifier_number(k)).max().map_or(1, |n| n + 1);
        let id = format!("c{next}");
        if let Some(root) = &self.root {
            let path = root.join("classifiers").join(format!("{id}.model"));
            write_atomic(&path, |w| model.save(w))?;
        }
        table.insert(id.clone(), model.clone());
        Ok((id, model))
    }

    pub fn classifier(&self, id: &str) -> Result<Arc<ClassifierModel>> {
        self.classifiers
            .read()
            .get(id)
            .cloned()
            .ok_or_else(|| ArchiveError::UnknownClassifier(id.to_string()))
    }

    pub fn classifier_results(&self, id: &str) -> Result<Vec<SearchResult>> {
        let model = self.classifier(id)?;
        Ok(retrieval::search_by_classifier(&model, &self.store)?)
    }

    pub fn query(&self, text: &str) -> Result<QueryResult> {
        Ok(query::run(text, &self.graph.read())?)
    }

    pub fn explain(&self, text: &str) -> Result<Explain> {
        Ok(query::explain(&query::parse(text)?, &self.graph.read())?)
    }

    pub fn shot_info(&self, shot: NodeId) -> Result<ShotInfo> {
        let graph = self.graph.read();
        let node = graph
            .node(shot)
            .filter(|n| n.label == LABEL_SHOT)
            .ok_or(ArchiveError::UnknownShot(shot))?;
        let int = |k: &str| match node.props.get(k) {
            Some(Value::Int(i)) => *i,
            _ => 0,
        };
        let film_id = match node.props.get("film_id") {
            Some(Value::Str(s)) => s.clone(),
            _ => String::new(),
        };
        let title = self.store.film(&film_id).map(|f| f.meta.title.clone()).unwrap_or_default();
        let tags = retrieval::shot_tags(&graph, shot)
            .into_iter()
            .map(|(synset_id, weight)| TagAssignment { synset_id, weight })
            .collect();
        let salient = graph
            .neighbors(shot, Some(EDGE_SALIENT), crate::graph::Direction::Out)?
            .into_iter()
            .filter_map(|(_, o)| match graph.node(o)?.props.get("lemma") {
                Some(Value::Str(s)) => Some(s.clone()),
                _ => None,
            })
            .collect();
        Ok(ShotInfo {
            shot_id: shot,
            film_id,
            title,
            shot_index: int("shot_index"),
            start_ordinal: int("start_ordinal") as usize,
            end_ordinal: int("end_ordinal") as usize,
            start_ms: int("start_ms"),
            duration_ms: int("duration") as u64,
            tags,
            salient,
        })
    }
}
