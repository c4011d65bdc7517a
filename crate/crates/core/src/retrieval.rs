//! Search modes: keyword, hypernym-expanded, spatial, by sample shot and by
//! a classifier trained on sample vectors.
//!
//! The structured modes are thin wrappers that instantiate a query template,
//! run it through [`crate::query`] and rank the matched shots.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::feature_store::{FeatureStore, StoreError};
use crate::graph::{GraphStore, NodeId, Value, EDGE_CATEGORY, LABEL_SHOT};
use crate::indexer::SpatialRelation;
use crate::lexicon::{LexiconError, Lexicon};
use crate::query::{self, ast::write_literal, Element, QueryError};
use crate::vector::{self, VectorError};

pub const DEFAULT_SIMILARITY_THRESHOLD: f64 = 0.3;
pub const DEFAULT_PRUNE_DEPTH: usize = 1;
pub const DEFAULT_NEGATIVES: usize = 25_000;

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Vector(#[from] VectorError),
    #[error(transparent)]
    Graph(#[from] crate::graph::GraphError),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("no positive samples")]
    NoPositives,
    #[error("the archive has no indexed shots")]
    EmptyArchive,
    #[error("invalid training parameters: {0}")]
    BadParams(String),
    #[error("model line {line}: {reason}")]
    BadModel { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub shot_id: NodeId,
    /// Tag weight, cosine distance or classifier margin depending on the mode.
    pub score: f64,
    /// 1-based position within the returned list.
    pub rank: usize,
}

/// Results plus an optional human-readable notice (e.g. an unknown lemma).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SearchResponse {
    pub results: Vec<SearchResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub notice: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Page {
    pub skip: usize,
    pub limit: Option<usize>,
}

fn literal(s: &str) -> String {
    let mut out = String::new();
    write_literal(&mut out, &Value::from(s)).expect("writing to a String");
    out
}

fn real(v: f64) -> String {
    let mut out = String::new();
    write_literal(&mut out, &Value::Real(v)).expect("writing to a String");
    out
}

/// Keyword template: shots tagged `synset` above `min_weight`, longest first.
pub fn keyword_query(synset: &str, min_weight: f64) -> String {
    format!(
        "MATCH (s:Shot)-[c:Category]->(w:Wordnet {{synset: {}}})\nWHERE c.weight > {}\nRETURN s, c ORDER BY s.duration DESC",
        literal(synset),
        real(min_weight)
    )
}

/// Hypernym template: shots tagged with any synset whose hypernym is also a
/// hypernym of `synset`.
pub fn hypernym_query(synset: &str, min_weight: f64) -> String {
    format!(
        "MATCH (w:Wordnet {{synset: {}}})-[lr:Lexical_rel]->(up:Wordnet)\n\
         MATCH (s:Shot)-[c:Category]->(t:Wordnet)-[r:Lexical_rel]->(up)\n\
         WHERE c.weight > {} AND lr.symbol = \"@\" AND r.symbol = \"@\"\n\
         RETURN s, c ORDER BY s.duration DESC",
        literal(synset),
        real(min_weight)
    )
}

/// Spatial template: shots with an `a` object standing in `relation` to a `b`
/// object (`Left` reads "a is left of b").
pub fn spatial_query(synset_a: &str, relation: SpatialRelation, synset_b: &str) -> String {
    format!(
        "MATCH (s:Shot)-[:Salient]->(a:Salient_obj)-[:Instance_of]->(wa:Wordnet {{synset: {}}})\n\
         MATCH (s)-[:Salient]->(b:Salient_obj)-[:Instance_of]->(wb:Wordnet {{synset: {}}})\n\
         MATCH (a)-[:{}]->(b)\n\
         RETURN s, a, b ORDER BY s.duration DESC",
        literal(synset_a),
        literal(synset_b),
        relation.as_str()
    )
}

fn duration(graph: &GraphStore, shot: NodeId) -> i64 {
    graph
        .node(shot)
        .and_then(|n| n.props.get("duration"))
        .and_then(|v| match v {
            Value::Int(i) => Some(*i),
            Value::Real(r) => Some(*r as i64),
            _ => None,
        })
        .unwrap_or(i64::MIN)
}

/// Merge per-shot scores (keeping the best) and order longest shot first,
/// then by shot id.
fn rank_by_duration(graph: &GraphStore, scores: HashMap<NodeId, f64>, page: Page) -> Vec<SearchResult> {
    let mut shots: Vec<(NodeId, f64)> = scores.into_iter().collect();
    shots.sort_by(|a, b| duration(graph, b.0).cmp(&duration(graph, a.0)).then(a.0.cmp(&b.0)));
    ranked(shots.into_iter().skip(page.skip).take(page.limit.unwrap_or(usize::MAX)))
}

fn ranked(items: impl Iterator<Item = (NodeId, f64)>) -> Vec<SearchResult> {
    items
        .enumerate()
        .map(|(i, (shot_id, score))| SearchResult {
            shot_id,
            score,
            rank: i + 1,
        })
        .collect()
}

fn unknown_lemma(lemma: &str) -> SearchResponse {
    SearchResponse {
        results: Vec::new(),
        notice: Some(format!("no such synset: {lemma:?}")),
    }
}

fn run_scored(
    graph: &GraphStore,
    text: &str,
    score: impl Fn(&[Element]) -> f64,
    into: &mut HashMap<NodeId, f64>,
) -> Result<(), RetrievalError> {
    let result = query::run(text, graph)?;
    for row in result.rows {
        let shot = row.0[0].node().expect("first column is a shot");
        let s = score(&row.0);
        into.entry(shot).and_modify(|v| *v = v.max(s)).or_insert(s);
    }
    Ok(())
}

fn edge_weight(graph: &GraphStore, e: Element) -> f64 {
    match e {
        Element::Edge(id) => graph
            .edge(id)
            .and_then(|e| e.props.get("weight"))
            .and_then(Value::as_f64)
            .unwrap_or(0.0),
        Element::Node(_) => 0.0,
    }
}

/// Shots tagged with any synset of `lemma` above `min_weight`.
pub fn search_keyword(
    graph: &GraphStore,
    lexicon: &Lexicon,
    lemma: &str,
    min_weight: f64,
    page: Page,
) -> Result<SearchResponse, RetrievalError> {
    let synsets = lexicon.resolve_lemma(lemma);
    if synsets.is_empty() {
        return Ok(unknown_lemma(lemma));
    }
    let mut scores = HashMap::new();
    for s in &synsets {
        run_scored(graph, &keyword_query(s, min_weight), |r| edge_weight(graph, r[1]), &mut scores)?;
    }
    Ok(SearchResponse {
        results: rank_by_duration(graph, scores, page),
        notice: None,
    })
}

/// Shots tagged with a sibling (or the synset itself) under any direct
/// hypernym of `lemma`'s synsets.
pub fn search_hypernym(
    graph: &GraphStore,
    lexicon: &Lexicon,
    lemma: &str,
    min_weight: f64,
    page: Page,
) -> Result<SearchResponse, RetrievalError> {
    let synsets = lexicon.resolve_lemma(lemma);
    if synsets.is_empty() {
        return Ok(unknown_lemma(lemma));
    }
    let mut scores = HashMap::new();
    for s in &synsets {
        run_scored(graph, &hypernym_query(s, min_weight), |r| edge_weight(graph, r[1]), &mut scores)?;
    }
    Ok(SearchResponse {
        results: rank_by_duration(graph, scores, page),
        notice: None,
    })
}

/// Shots showing an `a` object in `relation` to a `b` object. The score is
/// the lower of the two detection confidences.
pub fn search_spatial(
    graph: &GraphStore,
    lexicon: &Lexicon,
    lemma_a: &str,
    relation: SpatialRelation,
    lemma_b: &str,
    page: Page,
) -> Result<SearchResponse, RetrievalError> {
    let (sa, sb) = (lexicon.resolve_lemma(lemma_a), lexicon.resolve_lemma(lemma_b));
    if sa.is_empty() {
        return Ok(unknown_lemma(lemma_a));
    }
    if sb.is_empty() {
        return Ok(unknown_lemma(lemma_b));
    }
    let conf = |e: Element| {
        e.node()
            .and_then(|n| graph.node(n))
            .and_then(|n| n.props.get("conf"))
            .and_then(Value::as_f64)
            .unwrap_or(0.0)
    };
    let mut scores = HashMap::new();
    for a in &sa {
        for b in &sb {
            run_scored(
                graph,
                &spatial_query(a, relation, b),
                |r| conf(r[1]).min(conf(r[2])),
                &mut scores,
            )?;
        }
    }
    Ok(SearchResponse {
        results: rank_by_duration(graph, scores, page),
        notice: None,
    })
}

/// Synsets a shot is tagged with, strongest first.
pub fn shot_tags(graph: &GraphStore, shot: NodeId) -> Vec<(String, f64)> {
    let Ok(out) = graph.neighbors(shot, Some(EDGE_CATEGORY), crate::graph::Direction::Out) else {
        return Vec::new();
    };
    let mut tags: Vec<(String, f64)> = out
        .into_iter()
        .filter_map(|(e, n)| {
            let name = crate::lexicon::synset_name(graph, n)?;
            Some((name, edge_weight(graph, Element::Edge(e))))
        })
        .collect();
    tags.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    tags
}

/// Shots that may be lexically related to `shot`: those tagged with a synset
/// whose `depth`-step hypernym closure meets the closure of one of the
/// sample's tags. Depth 0 keeps exact tag matches only.
pub fn candidate_shots(
    graph: &GraphStore,
    lexicon: &Lexicon,
    shot: NodeId,
    depth: usize,
) -> Result<BTreeSet<NodeId>, RetrievalError> {
    let mut expanded: BTreeSet<String> = BTreeSet::new();
    for (tag, _) in shot_tags(graph, shot) {
        if depth > 0 {
            expanded.extend(lexicon.hypernyms(graph, &tag, depth)?);
        }
        expanded.insert(tag);
    }
    let mut synsets = expanded.clone();
    if depth > 0 {
        for s in &expanded {
            synsets.extend(lexicon.hyponyms(graph, s, depth)?);
        }
    }
    let mut shots = BTreeSet::new();
    for s in &synsets {
        let Some(node) = lexicon.synset_node(s) else { continue };
        for (_, src) in graph.neighbors(node, Some(EDGE_CATEGORY), crate::graph::Direction::In)? {
            if graph.node(src).is_some_and(|n| n.label == LABEL_SHOT) {
                shots.insert(src);
            }
        }
    }
    shots.remove(&shot);
    Ok(shots)
}

/// Shots within cosine distance `threshold` of `shot`'s pooled feature
/// vector, nearest first. Only lexically related candidates are compared.
pub fn search_by_shot(
    store: &FeatureStore,
    graph: &GraphStore,
    lexicon: &Lexicon,
    shot: NodeId,
    threshold: f64,
    depth: usize,
) -> Result<Vec<SearchResult>, RetrievalError> {
    let sample = store.shot(shot)?;
    let candidates = candidate_shots(graph, lexicon, shot, depth)?;
    let sample_norm = vector::norm(&sample.pooled_fv);
    if sample_norm == 0.0 {
        return Err(VectorError::ZeroVector.into());
    }
    let mut hits = Vec::new();
    for id in candidates {
        let Ok(other) = store.shot(id) else { continue };
        if other.pooled_fv.len() != sample.pooled_fv.len() {
            return Err(RetrievalError::DimensionMismatch {
                expected: sample.pooled_fv.len(),
                found: other.pooled_fv.len(),
            });
        }
        let n = vector::norm(&other.pooled_fv);
        if n == 0.0 {
            continue;
        }
        let d = vector::cosine_distance_prenormed(&sample.pooled_fv, sample_norm, &other.pooled_fv, n);
        if d <= threshold {
            hits.push((id, d));
        }
    }
    hits.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    Ok(ranked(hits.into_iter()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainParams {
    pub positive_weight: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// How many archive shots to sample as negatives.
    pub negatives: usize,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            positive_weight: 200.0,
            epochs: 3,
            learning_rate: 0.5,
            seed: 0,
            negatives: DEFAULT_NEGATIVES,
        }
    }
}

impl TrainParams {
    pub fn validate(&self) -> Result<(), RetrievalError> {
        if !(self.positive_weight > 0.0 && self.positive_weight.is_finite()) {
            return Err(RetrievalError::BadParams("positive_weight must be > 0".into()));
        }
        if self.epochs == 0 {
            return Err(RetrievalError::BadParams("epochs must be >= 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(RetrievalError::BadParams("learning_rate must be >= 0".into()));
        }
        Ok(())
    }
}

/// Logistic-regression model over pooled feature vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub positives: usize,
    pub negatives: usize,
    pub params: TrainParams,
    /// Importance-weighted mean log-loss over the training set after each epoch.
    pub epoch_losses: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

impl ClassifierModel {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn margin(&self, x: &[f64]) -> f64 {
        vector::dot(&self.weights, x) + self.bias
    }

    pub fn probability(&self, x: &[f64]) -> f64 {
        sigmoid(self.margin(x))
    }

    pub fn save<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let p = &self.params;
        writeln!(out, "classifier 1")?;
        writeln!(out, "dim {}", self.weights.len())?;
        writeln!(out, "bias {:?}", self.bias)?;
        writeln!(out, "positive_weight {:?}", p.positive_weight)?;
        writeln!(out, "epochs {}", p.epochs)?;
        writeln!(out, "learning_rate {:?}", p.learning_rate)?;
        writeln!(out, "seed {}", p.seed)?;
        writeln!(out, "negative_samples {}", p.negatives)?;
        writeln!(out, "trained_on {} {}", self.positives, self.negatives)?;
        let mut losses = String::new();
        for l in &self.epoch_losses {
            write!(losses, " {l:?}").expect("writing to a String");
        }
        writeln!(out, "losses{losses}")?;
        writeln!(out, "weights")?;
        for w in &self.weights {
            writeln!(out, "{w:?}")?;
        }
        Ok(())
    }

    pub fn load<R: BufRead>(reader: R) -> Result<Self, RetrievalError> {
        let lines: Vec<String> = reader.lines().collect::<Result<_, _>>()?;
        let bad = |line: usize, reason: &str| RetrievalError::BadModel {
            line,
            reason: reason.to_string(),
        };
        let field = |i: usize, key: &str| -> Result<&str, RetrievalError> {
            let l = lines.get(i).ok_or_else(|| bad(i + 1, "unexpected end of file"))?;
            match l.split_once(' ') {
                Some((k, v)) if k == key => Ok(v),
                _ if l == key => Ok(""),
                _ => Err(bad(i + 1, &format!("expected `{key}`"))),
            }
        };
        fn num<T: std::str::FromStr>(s: &str, line: usize) -> Result<T, RetrievalError> {
            s.trim().parse().map_err(|_| RetrievalError::BadModel {
                line,
                reason: format!("bad number {s:?}"),
            })
        }
        if lines.first().map(String::as_str) != Some("classifier 1") {
            return Err(bad(1, "not a classifier model"));
        }
        let dim: usize = num(field(1, "dim")?, 2)?;
        let bias: f64 = num(field(2, "bias")?, 3)?;
        let params = TrainParams {
            positive_weight: num(field(3, "positive_weight")?, 4)?,
            epochs: num(field(4, "epochs")?, 5)?,
            learning_rate: num(field(5, "learning_rate")?, 6)?,
            seed: num(field(6, "seed")?, 7)?,
            negatives: num(field(7, "negative_samples")?, 8)?,
        };
        let counts: Vec<&str> = field(8, "trained_on")?.split_whitespace().collect();
        let [pos, neg] = counts.as_slice() else {
            return Err(bad(9, "expected two counts"));
        };
        let epoch_losses = field(9, "losses")?
            .split_whitespace()
            .map(|s| num(s, 10))
            .collect::<Result<Vec<f64>, _>>()?;
        field(10, "weights")?;
        let weights = lines[11..]
            .iter()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| num(l, i + 12))
            .collect::<Result<Vec<f64>, _>>()?;
        if weights.len() != dim {
            return Err(RetrievalError::DimensionMismatch {
                expected: dim,
                found: weights.len(),
            });
        }
        Ok(Self {
            weights,
            bias,
            positives: num(pos, 9)?,
            negatives: num(neg, 9)?,
            params,
            epoch_losses,
        })
    }
}

fn weighted_log_loss(w: &[f64], b: f64, examples: &[(&[f64], bool)], pos_weight: f64) -> f64 {
    let (mut total, mut mass) = (0.0, 0.0);
    for (x, y) in examples {
        let z = vector::dot(w, x) + b;
        let m = if *y { pos_weight } else { 1.0 };
        // -[y ln σ(z) + (1-y) ln(1-σ(z))] = softplus(z) - y z
        total += m * (softplus(z) - if *y { z } else { 0.0 });
        mass += m;
    }
    total / mass
}

/// Per-example SGD on importance-weighted log-loss, starting from zero
/// weights. Examples are reshuffled every epoch with a generator seeded
/// from `params.seed`.
pub fn train_classifier(
    positives: &[Vec<f64>],
    negatives: &[Vec<f64>],
    params: &TrainParams,
) -> Result<ClassifierModel, RetrievalError> {
    params.validate()?;
    let Some(first) = positives.first() else {
        return Err(RetrievalError::NoPositives);
    };
    let dim = first.len();
    for v in positives.iter().chain(negatives) {
        if v.len() != dim {
            return Err(RetrievalError::DimensionMismatch {
                expected: dim,
                found: v.len(),
            });
        }
    }
    let mut examples: Vec<(&[f64], bool)> = positives
        .iter()
        .map(|v| (v.as_slice(), true))
        .chain(negatives.iter().map(|v| (v.as_slice(), false)))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut epoch_losses = Vec::with_capacity(params.epochs);
    for _ in 0..params.epochs {
        examples.shuffle(&mut rng);
        for (x, y) in &examples {
            let m = if *y { params.positive_weight } else { 1.0 };
            let err = f64::from(u8::from(*y)) - sigmoid(vector::dot(&w, x) + b);
            let step = params.learning_rate * m * err;
            if step != 0.0 {
                for (wi, xi) in w.iter_mut().zip(x.iter()) {
                    *wi += step * xi;
                }
                b += step;
            }
        }
        epoch_losses.push(weighted_log_loss(&w, b, &examples, params.positive_weight));
    }
    Ok(ClassifierModel {
        weights: w,
        bias: b,
        positives: positives.len(),
        negatives: negatives.len(),
        params: *params,
        epoch_losses,
    })
}

/// Pooled feature vectors of up to `count` archive shots drawn without
/// replacement.
pub fn sample_negatives(store: &FeatureStore, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut shots = store.shots();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shots.shuffle(&mut rng);
    shots.truncate(count);
    shots.iter().map(|s| s.pooled_fv.clone()).collect()
}

/// Train against negatives sampled from the archive.
pub fn train_on_archive(
    positives: &[Vec<f64>],
    store: &FeatureStore,
    params: &TrainParams,
) -> Result<ClassifierModel, RetrievalError> {
    if store.shot_count() == 0 {
        return Err(RetrievalError::EmptyArchive);
    }
    // Decorrelate the negative draw from the epoch shuffles.
    let negatives = sample_negatives(store, params.negatives, params.seed ^ 0x9e37_79b9_7f4a_7c15);
    train_classifier(positives, &negatives, params)
}

/// Every archive shot with a strictly positive margin, highest first.
pub fn search_by_classifier(model: &ClassifierModel, store: &FeatureStore) -> Result<Vec<SearchResult>, RetrievalError> {
    let mut hits = Vec::new();
    for shot in store.shots() {
        if shot.pooled_fv.len() != model.dim() {
            return Err(RetrievalError::DimensionMismatch {
                expected: model.dim(),
                found: shot.pooled_fv.len(),
            });
        }
        let m = model.margin(&shot.pooled_fv);
        if m > 0.0 {
            hits.push((shot.shot_id, m));
        }
    }
    hits.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(ranked(hits.into_iter()))
}

/// Tag weights of many shots at once, for presentation.
pub fn tags_by_shot(graph: &GraphStore, shots: &[NodeId]) -> BTreeMap<NodeId, Vec<(String, f64)>> {
    shots.iter().map(|&s| (s, shot_tags(graph, s))).collect()
}
