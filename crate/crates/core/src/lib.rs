//! Semantic video indexing and retrieval over precomputed per-frame feature
//! vectors.
//!
//! The pipeline: [`feature_store`] ingests sampled frames, [`segmenter`] splits
//! them into shots, [`indexer`] pools shots and writes them into the
//! [`graph`] next to the [`lexicon`], and [`retrieval`] answers keyword,
//! hypernym, spatial, by-shot and by-classifier searches. [`query`] is the
//! pattern-matching language the structured searches compile to, and
//! [`archive`] ties the pieces together behind one persistent handle.

pub mod archive;
pub mod feature_store;
pub mod graph;
pub mod indexer;
pub mod lexicon;
pub mod query;
pub mod retrieval;
pub mod segmenter;
pub mod vector;

pub use archive::{Archive, ArchiveError, SegmentOptions, SegmentReport, ShotInfo};
pub use feature_store::{FeatureStore, FilmMeta, FrameRecord, SalientAnnotation, ShotRecord};
pub use graph::{Direction, EdgeId, GraphStore, NodeId, Value};
pub use indexer::{BuildCounts, ClassMap, IndexParams, PoolMode, SpatialRelation, TagAssignment};
pub use lexicon::Lexicon;
pub use query::{BindingRow, Element, QueryError, QueryResult};
pub use retrieval::{ClassifierModel, Page, SearchResponse, SearchResult, TrainParams};
pub use segmenter::{BoundaryScore, Metric, SegmentationParams, ShotBoundaries};
