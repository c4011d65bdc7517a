//! Turns segmented films into graph content: pooled shot vectors, Category
//! tags, salient objects with spatial relations, and temporal `Next` links.

use std::collections::BTreeSet;
use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::feature_store::{FeatureStore, FrameRecord, SalientAnnotation, ShotRecord, StoreError};
use crate::graph::{
    props, GraphError, GraphStore, NodeId, Properties, Value, EDGE_CATEGORY, EDGE_INSTANCE_OF, EDGE_NEXT,
    EDGE_SALIENT, LABEL_SALIENT, LABEL_SHOT,
};
use crate::lexicon::Lexicon;
use crate::segmenter::ShotBoundaries;

/// Shots are pooled over at most this many leading samples.
pub const POOL_FRAMES: usize = 10;

pub const DEFAULT_MIN_WEIGHT: f64 = 0.1;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("cannot pool an empty shot")]
    EmptyShot,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("class map line {line}: {reason}")]
    BadClassMap { line: usize, reason: String },
    #[error("class map entry `{0}` is not a known synset")]
    UnknownClassSynset(String),
    #[error("salient lemma `{0}` does not resolve to any synset")]
    UnresolvedLemma(String),
    #[error("boundaries cover {boundaries} samples but film `{film_id}` has {samples}")]
    BoundaryMismatch {
        film_id: String,
        boundaries: usize,
        samples: usize,
    },
    #[error("unknown pooling mode `{0}` (expected avg or max)")]
    BadMode(String),
    #[error("unknown spatial relation `{0}` (expected Left, Right, Above or Below)")]
    BadRelation(String),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolMode {
    #[default]
    Avg,
    Max,
}

impl FromStr for PoolMode {
    type Err = IndexError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "avg" | "mean" => Ok(PoolMode::Avg),
            "max" => Ok(PoolMode::Max),
            _ => Err(IndexError::BadMode(s.to_string())),
        }
    }
}

impl fmt::Display for PoolMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PoolMode::Avg => "avg",
            PoolMode::Max => "max",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SpatialRelation {
    Left,
    Right,
    Above,
    Below,
}

impl SpatialRelation {
    /// The edge type used in the graph.
    pub fn as_str(self) -> &'static str {
        match self {
            SpatialRelation::Left => "Left",
            SpatialRelation::Right => "Right",
            SpatialRelation::Above => "Above",
            SpatialRelation::Below => "Below",
        }
    }
}

impl FromStr for SpatialRelation {
    type Err = IndexError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "left" => Ok(SpatialRelation::Left),
            "right" => Ok(SpatialRelation::Right),
            "above" => Ok(SpatialRelation::Above),
            "below" => Ok(SpatialRelation::Below),
            _ => Err(IndexError::BadRelation(s.to_string())),
        }
    }
}

impl fmt::Display for SpatialRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagAssignment {
    pub synset_id: String,
    pub weight: f64,
}

/// Classifier output slot to synset id.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ClassMap {
    synsets: Vec<String>,
}

impl ClassMap {
    pub fn new(synsets: Vec<String>) -> Self {
        Self { synsets }
    }

    /// One synset id per line; the line number is the class slot. Blank lines
    /// are rejected because they would shift every later slot.
    pub fn parse<R: BufRead>(reader: R) -> Result<Self, IndexError> {
        let mut synsets = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let id = line.trim();
            if id.is_empty() || id.contains(char::is_whitespace) {
                return Err(IndexError::BadClassMap {
                    line: i + 1,
                    reason: format!("expected one synset id, found {line:?}"),
                });
            }
            synsets.push(id.to_string());
        }
        Ok(Self { synsets })
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for id in &self.synsets {
            s.push_str(id);
            s.push('\n');
        }
        s
    }

    pub fn len(&self) -> usize {
        self.synsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.synsets.is_empty()
    }

    pub fn synsets(&self) -> &[String] {
        &self.synsets
    }

    /// Every entry must name a synset of `lexicon`.
    pub fn validate(&self, lexicon: &Lexicon) -> Result<(), IndexError> {
        match self.synsets.iter().find(|s| !lexicon.contains(s)) {
            Some(s) => Err(IndexError::UnknownClassSynset(s.clone())),
            None => Ok(()),
        }
    }
}

fn pool(rows: &[&[f64]], mode: PoolMode) -> Vec<f64> {
    let dim = rows[0].len();
    match mode {
        PoolMode::Avg => {
            let mut acc = vec![0.0; dim];
            for r in rows {
                for (a, v) in acc.iter_mut().zip(r.iter()) {
                    *a += v;
                }
            }
            let n = rows.len() as f64;
            acc.iter_mut().for_each(|a| *a /= n);
            acc
        }
        PoolMode::Max => {
            let mut acc = rows[0].to_vec();
            for r in &rows[1..] {
                for (a, v) in acc.iter_mut().zip(r.iter()) {
                    *a = a.max(*v);
                }
            }
            acc
        }
    }
}

/// Pool the feature and classification vectors of the first
/// `min(POOL_FRAMES, frames.len())` frames.
pub fn pool_shot(frames: &[FrameRecord], mode: PoolMode) -> Result<(Vec<f64>, Vec<f64>), IndexError> {
    let Some(first) = frames.first() else {
        return Err(IndexError::EmptyShot);
    };
    let head = &frames[..frames.len().min(POOL_FRAMES)];
    for f in head {
        for (expected, found) in [(first.fv.len(), f.fv.len()), (first.cv.len(), f.cv.len())] {
            if expected != found {
                return Err(IndexError::DimensionMismatch { expected, found });
            }
        }
    }
    let fvs: Vec<&[f64]> = head.iter().map(|f| f.fv.as_slice()).collect();
    let cvs: Vec<&[f64]> = head.iter().map(|f| f.cv.as_slice()).collect();
    Ok((pool(&fvs, mode), pool(&cvs, mode)))
}

/// Tags for every class whose pooled score reaches `min_weight`, strongest
/// first (ties keep class-slot order).
pub fn tag_shot(pooled_cv: &[f64], class_map: &ClassMap, min_weight: f64) -> Result<Vec<TagAssignment>, IndexError> {
    if pooled_cv.len() != class_map.len() {
        return Err(IndexError::DimensionMismatch {
            expected: class_map.len(),
            found: pooled_cv.len(),
        });
    }
    let mut tags: Vec<TagAssignment> = pooled_cv
        .iter()
        .zip(class_map.synsets())
        .filter(|(w, _)| **w >= min_weight)
        .map(|(w, s)| TagAssignment {
            synset_id: s.clone(),
            weight: *w,
        })
        .collect();
    tags.sort_by(|a, b| b.weight.total_cmp(&a.weight));
    Ok(tags)
}

/// Pairwise relations between annotation boxes by center position. `(i, Left,
/// j)` means box `i` is left of box `j`; image y grows downwards, so `Above`
/// means a smaller center y. Equal centers yield nothing on that axis.
pub fn derive_spatial_edges(annotations: &[SalientAnnotation]) -> Vec<(usize, SpatialRelation, usize)> {
    let centers: Vec<(f64, f64)> = annotations.iter().map(SalientAnnotation::center).collect();
    let mut out = Vec::new();
    for (i, &(xi, yi)) in centers.iter().enumerate() {
        for (j, &(xj, yj)) in centers.iter().enumerate() {
            if i == j {
                continue;
            }
            if xi < xj {
                out.push((i, SpatialRelation::Left, j));
            } else if xi > xj {
                out.push((i, SpatialRelation::Right, j));
            }
            if yi < yj {
                out.push((i, SpatialRelation::Above, j));
            } else if yi > yj {
                out.push((i, SpatialRelation::Below, j));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexParams {
    pub mode: PoolMode,
    pub min_weight: f64,
}

impl Default for IndexParams {
    fn default() -> Self {
        Self {
            mode: PoolMode::Avg,
            min_weight: DEFAULT_MIN_WEIGHT,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BuildCounts {
    pub shots: usize,
    pub tags: usize,
    pub salient_nodes: usize,
    pub spatial_edges: usize,
}

/// Nodes belonging to a film's subgraph (its Shot and Salient_obj nodes).
pub fn film_subgraph(graph: &GraphStore, film_id: &str) -> BTreeSet<NodeId> {
    let key = Value::from(film_id);
    let mut ids: BTreeSet<NodeId> = graph.find_nodes(LABEL_SHOT, "film_id", &key).into_iter().collect();
    ids.extend(graph.find_nodes(LABEL_SALIENT, "film_id", &key));
    ids
}

struct PlannedShot {
    start: usize,
    end: usize,
    pooled_fv: Vec<f64>,
    pooled_cv: Vec<f64>,
    tags: Vec<TagAssignment>,
    objects: Vec<(SalientAnnotation, String)>,
}

/// Build (or rebuild) the graph of one film from its boundaries.
///
/// Everything is validated before the graph is touched; a rebuild first
/// removes the film's previous Shot and Salient_obj nodes, so running it
/// twice leaves identical counts.
pub fn build_film_graph(
    store: &FeatureStore,
    graph: &mut GraphStore,
    lexicon: &Lexicon,
    boundaries: &ShotBoundaries,
    class_map: &ClassMap,
    params: IndexParams,
) -> Result<BuildCounts, IndexError> {
    let film = store.film(&boundaries.film_id)?;
    let film_id = film.meta.film_id.clone();
    if boundaries.sample_count != film.frames.len() {
        return Err(IndexError::BoundaryMismatch {
            film_id,
            boundaries: boundaries.sample_count,
            samples: film.frames.len(),
        });
    }
    if class_map.len() != film.meta.class_count {
        return Err(IndexError::DimensionMismatch {
            expected: film.meta.class_count,
            found: class_map.len(),
        });
    }
    class_map.validate(lexicon)?;

    let mut planned = Vec::new();
    for (start, end) in boundaries.intervals() {
        let frames = &film.frames[start..end];
        let (pooled_fv, pooled_cv) = pool_shot(frames, params.mode)?;
        let tags = tag_shot(&pooled_cv, class_map, params.min_weight)?;
        let annotations = frames
            .iter()
            .find(|f| !f.salient.is_empty())
            .map(|f| f.salient.clone())
            .unwrap_or_default();
        let mut objects = Vec::new();
        for a in annotations {
            let synset = lexicon
                .resolve_lemma(&a.lemma)
                .into_iter()
                .next()
                .ok_or_else(|| IndexError::UnresolvedLemma(a.lemma.clone()))?;
            objects.push((a, synset));
        }
        planned.push(PlannedShot {
            start,
            end,
            pooled_fv,
            pooled_cv,
            tags,
            objects,
        });
    }

    graph.remove_nodes(&film_subgraph(graph, &film_id));

    let period = film.meta.sampling_period_ms;
    let mut counts = BuildCounts::default();
    let mut records = Vec::new();
    let mut previous: Option<NodeId> = None;
    for (index, shot) in planned.into_iter().enumerate() {
        let duration = (shot.end - shot.start) as u64 * period;
        let start_ms = film.frames[shot.start].timestamp_ms;
        let node = graph.add_node(
            LABEL_SHOT,
            props([
                ("film_id", Value::from(film_id.as_str())),
                ("shot_index", Value::Int(index as i64)),
                ("start_ordinal", Value::Int(shot.start as i64)),
                ("end_ordinal", Value::Int(shot.end as i64)),
                ("start_ms", Value::Int(start_ms as i64)),
                ("duration", Value::Int(duration as i64)),
            ]),
        )?;
        for tag in &shot.tags {
            let target = lexicon.synset_node(&tag.synset_id).expect("class map validated");
            graph.add_edge(EDGE_CATEGORY, node, target, props([("weight", tag.weight)]))?;
            counts.tags += 1;
        }
        let annotations: Vec<SalientAnnotation> = shot.objects.iter().map(|(a, _)| a.clone()).collect();
        let mut object_nodes = Vec::new();
        for (a, synset) in &shot.objects {
            let (cx, cy) = a.center();
            let mut p: Properties = props([
                ("lemma", Value::from(a.lemma.as_str())),
                ("film_id", Value::from(film_id.as_str())),
                ("conf", Value::Real(a.confidence)),
                ("cx", Value::Real(cx)),
                ("cy", Value::Real(cy)),
            ]);
            for (k, v) in ["x", "y", "w", "h"].iter().zip(a.bbox) {
                p.insert(format!("bbox_{k}"), Value::Real(v));
            }
            let obj = graph.add_node(LABEL_SALIENT, p)?;
            graph.add_edge(EDGE_SALIENT, node, obj, Properties::new())?;
            let target = lexicon.synset_node(synset).expect("resolved above");
            graph.add_edge(EDGE_INSTANCE_OF, obj, target, Properties::new())?;
            object_nodes.push(obj);
            counts.salient_nodes += 1;
        }
        for (i, rel, j) in derive_spatial_edges(&annotations) {
            graph.add_edge(rel.as_str(), object_nodes[i], object_nodes[j], Properties::new())?;
            counts.spatial_edges += 1;
        }
        if let Some(prev) = previous {
            graph.add_edge(EDGE_NEXT, prev, node, Properties::new())?;
        }
        previous = Some(node);
        counts.shots += 1;
        records.push(ShotRecord {
            shot_id: node,
            film_id: film_id.clone(),
            start_ordinal: shot.start,
            end_ordinal: shot.end,
            duration_ms: duration,
            pooled_fv: shot.pooled_fv,
            pooled_cv: shot.pooled_cv,
        });
    }
    store.replace_film_shots(&film_id, records)?;
    Ok(counts)
}
