//! Embedded property graph with label and `(label, property)` hash indexes.
//!
//! Hosts both the lexical graph (`Wordnet` nodes, `Lexical_rel` edges) and the
//! per-film graphs (`Shot`, `Salient_obj` nodes and their edges). Nodes carry a
//! single label; properties are scalars only. Ids are assigned monotonically,
//! so identical insert sequences produce identical ids.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const LABEL_SHOT: &str = "Shot";
pub const LABEL_WORDNET: &str = "Wordnet";
pub const LABEL_SALIENT: &str = "Salient_obj";

pub const EDGE_CATEGORY: &str = "Category";
pub const EDGE_LEXICAL: &str = "Lexical_rel";
pub const EDGE_SALIENT: &str = "Salient";
pub const EDGE_INSTANCE_OF: &str = "Instance_of";
pub const EDGE_NEXT: &str = "Next";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EdgeId(pub u64);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("unknown edge {0}")]
    UnknownEdge(EdgeId),
    #[error("unsupported property value for {key:?}: {reason}")]
    UnsupportedValue { key: String, reason: String },
    #[error("invalid name {0:?}: labels, types and keys must be non-empty and free of whitespace")]
    InvalidName(String),
    #[error("line {line}: {reason}")]
    BadDump { line: usize, reason: String },
}

/// Scalar property value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Real(f64),
    Str(String),
}

impl Value {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Real(r) => Some(*r),
            _ => None,
        }
    }

    /// Ordering between comparable values: numbers (ints and reals mix),
    /// strings, booleans. Anything else is incomparable.
    pub fn compare(&self, other: &Value) -> Option<Ordering> {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => Some(a.cmp(b)),
            (Value::Str(a), Value::Str(b)) => Some(a.cmp(b)),
            (Value::Bool(a), Value::Bool(b)) => Some(a.cmp(b)),
            _ => self.as_f64()?.partial_cmp(&other.as_f64()?),
        }
    }

    pub fn loose_eq(&self, other: &Value) -> bool {
        self.compare(other) == Some(Ordering::Equal)
    }

    fn index_key(&self) -> IndexKey {
        match self {
            Value::Bool(b) => IndexKey::Bool(*b),
            Value::Str(s) => IndexKey::Str(s.clone()),
            Value::Int(_) | Value::Real(_) => {
                let v = self.as_f64().unwrap();
                IndexKey::Num(if v == 0.0 { 0.0f64.to_bits() } else { v.to_bits() })
            }
        }
    }

    fn check(&self, key: &str) -> Result<(), GraphError> {
        match self {
            Value::Real(r) if !r.is_finite() => Err(GraphError::UnsupportedValue {
                key: key.to_string(),
                reason: "non-finite number".into(),
            }),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Real(r) => write!(f, "{r:?}"),
            Value::Str(s) => write!(f, "{s:?}"),
        }
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Str(s.to_string())
    }
}
impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::Str(s)
    }
}
impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int(v)
    }
}
impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Real(v)
    }
}
impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}

impl TryFrom<serde_json::Value> for Value {
    type Error = String;

    fn try_from(v: serde_json::Value) -> Result<Self, String> {
        match v {
            serde_json::Value::Bool(b) => Ok(Value::Bool(b)),
            serde_json::Value::String(s) => Ok(Value::Str(s)),
            serde_json::Value::Number(n) => n
                .as_i64()
                .map(Value::Int)
                .or_else(|| n.as_f64().map(Value::Real))
                .ok_or_else(|| format!("number {n} out of range")),
            other => Err(format!("expected a scalar, found {other}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum IndexKey {
    Bool(bool),
    Num(u64),
    Str(String),
}

pub type Properties = BTreeMap<String, Value>;

/// Build a property map from `(key, value)` pairs.
pub fn props<K, V, I>(pairs: I) -> Properties
where
    K: Into<String>,
    V: Into<Value>,
    I: IntoIterator<Item = (K, V)>,
{
    pairs.into_iter().map(|(k, v)| (k.into(), v.into())).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub label: String,
    pub props: Properties,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub id: EdgeId,
    #[serde(rename = "type")]
    pub edge_type: String,
    pub src: NodeId,
    pub dst: NodeId,
    pub props: Properties,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Out,
    In,
    Both,
}

type PropIndex = HashMap<IndexKey, BTreeSet<NodeId>>;

#[derive(Debug, Clone, Default)]
pub struct GraphStore {
    nodes: BTreeMap<NodeId, Node>,
    edges: BTreeMap<EdgeId, Edge>,
    out_adj: HashMap<NodeId, Vec<EdgeId>>,
    in_adj: HashMap<NodeId, Vec<EdgeId>>,
    by_label: HashMap<String, BTreeSet<NodeId>>,
    indexes: BTreeMap<(String, String), PropIndex>,
    next_node: u64,
    next_edge: u64,
}

fn check_name(name: &str) -> Result<(), GraphError> {
    if name.is_empty() || name.chars().any(|c| c.is_whitespace() || c.is_control()) {
        return Err(GraphError::InvalidName(name.to_string()));
    }
    Ok(())
}

impl GraphStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// A store with the standard indexes: `(Wordnet, synset)`, `(Shot, film_id)`
    /// and `(Salient_obj, film_id)`.
    pub fn with_default_indexes() -> Self {
        let mut g = Self::new();
        g.create_index(LABEL_WORDNET, "synset").unwrap();
        g.create_index(LABEL_SHOT, "film_id").unwrap();
        g.create_index(LABEL_SALIENT, "film_id").unwrap();
        g
    }

    pub fn create_index(&mut self, label: &str, key: &str) -> Result<(), GraphError> {
        check_name(label)?;
        check_name(key)?;
        let mut index = PropIndex::new();
        for id in self.by_label.get(label).into_iter().flatten() {
            if let Some(v) = self.nodes[id].props.get(key) {
                index.entry(v.index_key()).or_default().insert(*id);
            }
        }
        self.indexes.insert((label.to_string(), key.to_string()), index);
        Ok(())
    }

    pub fn has_index(&self, label: &str, key: &str) -> bool {
        self.indexes
            .contains_key(&(label.to_string(), key.to_string()))
    }

    pub fn add_node(&mut self, label: &str, props: Properties) -> Result<NodeId, GraphError> {
        let id = NodeId(self.next_node);
        self.insert_node(Node {
            id,
            label: label.to_string(),
            props,
        })?;
        Ok(id)
    }

    fn insert_node(&mut self, node: Node) -> Result<(), GraphError> {
        check_name(&node.label)?;
        for (k, v) in &node.props {
            check_name(k)?;
            v.check(k)?;
        }
        let id = node.id;
        for ((label, key), index) in self.indexes.iter_mut() {
            if *label == node.label {
                if let Some(v) = node.props.get(key) {
                    index.entry(v.index_key()).or_default().insert(id);
                }
            }
        }
        self.by_label
            .entry(node.label.clone())
            .or_default()
            .insert(id);
        self.nodes.insert(id, node);
        self.next_node = self.next_node.max(id.0 + 1);
        Ok(())
    }

    pub fn add_edge(
        &mut self,
        edge_type: &str,
        src: NodeId,
        dst: NodeId,
        props: Properties,
    ) -> Result<EdgeId, GraphError> {
        let id = EdgeId(self.next_edge);
        self.insert_edge(Edge {
            id,
            edge_type: edge_type.to_string(),
            src,
            dst,
            props,
        })?;
        Ok(id)
    }

    fn insert_edge(&mut self, edge: Edge) -> Result<(), GraphError> {
        check_name(&edge.edge_type)?;
        for end in [edge.src, edge.dst] {
            if !self.nodes.contains_key(&end) {
                return Err(GraphError::UnknownNode(end));
            }
        }
        for (k, v) in &edge.props {
            check_name(k)?;
            v.check(k)?;
        }
        let id = edge.id;
        insert_sorted(self.out_adj.entry(edge.src).or_default(), id);
        insert_sorted(self.in_adj.entry(edge.dst).or_default(), id);
        self.edges.insert(id, edge);
        self.next_edge = self.next_edge.max(id.0 + 1);
        Ok(())
    }

    /// Remove nodes together with every incident edge.
    pub fn remove_nodes(&mut self, ids: &BTreeSet<NodeId>) {
        let doomed_edges: BTreeSet<EdgeId> = ids
            .iter()
            .flat_map(|n| {
                let out = self.out_adj.get(n).into_iter().flatten();
                let inc = self.in_adj.get(n).into_iter().flatten();
                out.chain(inc).copied()
            })
            .collect();
        for eid in doomed_edges {
            if let Some(e) = self.edges.remove(&eid) {
                if let Some(v) = self.out_adj.get_mut(&e.src) {
                    v.retain(|x| *x != eid);
                }
                if let Some(v) = self.in_adj.get_mut(&e.dst) {
                    v.retain(|x| *x != eid);
                }
            }
        }
        for id in ids {
            let Some(node) = self.nodes.remove(id) else {
                continue;
            };
            self.out_adj.remove(id);
            self.in_adj.remove(id);
            if let Some(set) = self.by_label.get_mut(&node.label) {
                set.remove(id);
            }
            for ((label, key), index) in self.indexes.iter_mut() {
                if *label == node.label {
                    if let Some(v) = node.props.get(key) {
                        let k = v.index_key();
                        if let Some(set) = index.get_mut(&k) {
                            set.remove(id);
                            if set.is_empty() {
                                index.remove(&k);
                            }
                        }
                    }
                }
            }
        }
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.nodes.get(&id)
    }

    pub fn edge(&self, id: EdgeId) -> Option<&Edge> {
        self.edges.get(&id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    pub fn edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.values()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Nodes with `label`, in id order.
    pub fn nodes_with_label<'a>(&'a self, label: &str) -> impl Iterator<Item = NodeId> + 'a {
        self.by_label.get(label).into_iter().flatten().copied()
    }

    pub fn label_count(&self, label: &str) -> usize {
        self.by_label.get(label).map_or(0, BTreeSet::len)
    }

    /// Nodes with `label` whose `key` property equals `value`, in id order.
    /// Served from the hash index when one exists, else by scanning the label.
    pub fn find_nodes(&self, label: &str, key: &str, value: &Value) -> Vec<NodeId> {
        if let Some(index) = self.indexes.get(&(label.to_string(), key.to_string())) {
            return index
                .get(&value.index_key())
                .map(|s| s.iter().copied().collect())
                .unwrap_or_default();
        }
        self.nodes_with_label(label)
            .filter(|id| {
                self.nodes[id]
                    .props
                    .get(key)
                    .is_some_and(|v| v.loose_eq(value))
            })
            .collect()
    }

    /// Candidate count a lookup would produce, or `None` without an index.
    pub fn index_selectivity(&self, label: &str, key: &str, value: &Value) -> Option<usize> {
        self.indexes
            .get(&(label.to_string(), key.to_string()))
            .map(|index| index.get(&value.index_key()).map_or(0, BTreeSet::len))
    }

    /// Incident edges of `id` as `(edge, other endpoint)`, ordered by edge id.
    pub fn neighbors(
        &self,
        id: NodeId,
        edge_type: Option<&str>,
        direction: Direction,
    ) -> Result<Vec<(EdgeId, NodeId)>, GraphError> {
        if !self.nodes.contains_key(&id) {
            return Err(GraphError::UnknownNode(id));
        }
        let empty = Vec::new();
        let out = self.out_adj.get(&id).unwrap_or(&empty);
        let inc = self.in_adj.get(&id).unwrap_or(&empty);
        let mut ids: Vec<EdgeId> = match direction {
            Direction::Out => out.clone(),
            Direction::In => inc.clone(),
            Direction::Both => {
                let mut all: Vec<EdgeId> = out.iter().chain(inc).copied().collect();
                all.sort_unstable();
                all.dedup();
                all
            }
        };
        if let Some(t) = edge_type {
            ids.retain(|e| self.edges[e].edge_type == t);
        }
        Ok(ids
            .into_iter()
            .map(|eid| {
                let e = &self.edges[&eid];
                (eid, if e.src == id { e.dst } else { e.src })
            })
            .collect())
    }

    /// Raw outgoing / incoming adjacency lists (edge ids sorted ascending).
    pub(crate) fn out_edges(&self, id: NodeId) -> &[EdgeId] {
        self.out_adj.get(&id).map_or(&[], Vec::as_slice)
    }

    pub(crate) fn in_edges(&self, id: NodeId) -> &[EdgeId] {
        self.in_adj.get(&id).map_or(&[], Vec::as_slice)
    }

    /// Write the graph as replayable text: a header line, index declarations,
    /// then one line per node and per edge.
    pub fn dump<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "G\t{}\t{}", self.next_node, self.next_edge)?;
        for (label, key) in self.indexes.keys() {
            writeln!(out, "I\t{label}\t{key}")?;
        }
        for n in self.nodes.values() {
            let p = serde_json::to_string(&n.props).expect("props serialize");
            writeln!(out, "N\t{}\t{}\t{p}", n.id, n.label)?;
        }
        for e in self.edges.values() {
            let p = serde_json::to_string(&e.props).expect("props serialize");
            writeln!(out, "E\t{}\t{}\t{}\t{}\t{p}", e.id, e.edge_type, e.src, e.dst)?;
        }
        Ok(())
    }

    pub fn load<R: BufRead>(reader: R) -> Result<Self, GraphError> {
        let mut g = GraphStore::new();
        let mut next = (0, 0);
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let bad = |reason: String| GraphError::BadDump {
                line: line_no,
                reason,
            };
            let line = line.map_err(|e| bad(e.to_string()))?;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let int = |s: &str| s.parse::<u64>().map_err(|e| bad(format!("{s:?}: {e}")));
            let properties = |s: &str| -> Result<Properties, GraphError> {
                let raw: BTreeMap<String, serde_json::Value> =
                    serde_json::from_str(s).map_err(|e| bad(e.to_string()))?;
                raw.into_iter()
                    .map(|(k, v)| {
                        Value::try_from(v)
                            .map(|v| (k.clone(), v))
                            .map_err(|reason| GraphError::UnsupportedValue { key: k, reason })
                    })
                    .collect()
            };
            match fields.as_slice() {
                ["G", n, e] => next = (int(n)?, int(e)?),
                ["I", label, key] => g.create_index(label, key)?,
                ["N", id, label, p] => g.insert_node(Node {
                    id: NodeId(int(id)?),
                    label: label.to_string(),
                    props: properties(p)?,
                })?,
                ["E", id, t, src, dst, p] => g.insert_edge(Edge {
                    id: EdgeId(int(id)?),
                    edge_type: t.to_string(),
                    src: NodeId(int(src)?),
                    dst: NodeId(int(dst)?),
                    props: properties(p)?,
                })?,
                _ => return Err(bad(format!("unrecognized record {line:?}"))),
            }
        }
        g.next_node = g.next_node.max(next.0);
        g.next_edge = g.next_edge.max(next.1);
        Ok(g)
    }
}

fn insert_sorted(v: &mut Vec<EdgeId>, id: EdgeId) {
    match v.last() {
        Some(last) if *last > id => {
            let pos = v.partition_point(|x| *x < id);
            v.insert(pos, id);
        }
        _ => v.push(id),
    }
}
