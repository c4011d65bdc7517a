//! WordNet-style noun lexicon materialized inside the graph store.
//!
//! Synsets become `Wordnet` nodes (property `synset` = synset id) and lexical
//! relations become `Lexical_rel` edges with a `symbol` property. `@` marks a
//! hypernym edge pointing from the narrower synset to the broader one.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::io::BufRead;

use serde::Serialize;
use thiserror::Error;

use crate::graph::{self, GraphError, GraphStore, NodeId, Properties, Value};

pub const HYPERNYM: &str = "@";
pub const HYPONYM: &str = "~";

#[derive(Debug, Error, PartialEq)]
pub enum LexiconError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: duplicate synset {id:?}")]
    DuplicateSynset { line: usize, id: String },
    #[error("line {line}: relation endpoint {id:?} is not a known synset")]
    DanglingEndpoint { line: usize, id: String },
    #[error("hypernym cycle through {0:?}")]
    HypernymCycle(String),
    #[error("unknown synset {0:?}")]
    UnknownSynset(String),
    #[error("depth must be at least 1")]
    BadDepth,
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Synset {
    pub synset_id: String,
    pub lemmas: Vec<String>,
    pub gloss: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LexicalRelation {
    pub src: String,
    pub dst: String,
    pub symbol: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LoadCounts {
    pub synsets: usize,
    pub relations: usize,
}

/// Lemma and id lookup over the `Wordnet` nodes of a graph. Traversals read
/// the graph itself.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    nodes: HashMap<String, NodeId>,
    by_lemma: HashMap<String, Vec<String>>,
}

struct Parsed {
    synsets: Vec<(usize, Synset)>,
    relations: Vec<(usize, LexicalRelation)>,
}

fn parse(reader: impl BufRead) -> Result<Parsed, LexiconError> {
    let mut synsets = Vec::new();
    let mut relations = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let malformed = |reason: &str| LexiconError::Malformed {
            line: line_no,
            reason: reason.to_string(),
        };
        let line = line.map_err(|e| malformed(&e.to_string()))?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        match fields.as_slice() {
            ["S", id, lemmas, rest @ ..] if rest.len() <= 1 => {
                let lemmas: Vec<String> = lemmas
                    .split(',')
                    .map(|l| l.trim().to_lowercase())
                    .filter(|l| !l.is_empty())
                    .collect();
                if id.is_empty() || lemmas.is_empty() {
                    return Err(malformed("synset needs an id and at least one lemma"));
                }
                synsets.push((
                    line_no,
                    Synset {
                        synset_id: id.to_string(),
                        lemmas,
                        gloss: rest.first().map(|g| g.to_string()),
                    },
                ));
            }
            ["R", src, symbol, dst] => {
                if symbol.is_empty() {
                    return Err(malformed("relation symbol is empty"));
                }
                if src == dst {
                    return Err(malformed("relation must join two distinct synsets"));
                }
                relations.push((
                    line_no,
                    LexicalRelation {
                        src: src.to_string(),
                        dst: dst.to_string(),
                        symbol: symbol.to_string(),
                    },
                ));
            }
            _ => return Err(malformed("expected `S<TAB>id<TAB>lemmas` or `R<TAB>src<TAB>symbol<TAB>dst`")),
        }
    }
    Ok(Parsed { synsets, relations })
}

impl Lexicon {
    /// Rebuild the lookup tables from the `Wordnet` nodes already in `graph`.
    pub fn from_graph(graph: &GraphStore) -> Self {
        let mut lex = Lexicon::default();
        for id in graph.nodes_with_label(graph::LABEL_WORDNET) {
            let node = graph.node(id).expect("label index is consistent");
            let Some(Value::Str(synset)) = node.props.get("synset") else {
                continue;
            };
            let lemmas = match node.props.get("lemmas") {
                Some(Value::Str(l)) => l.split(',').map(str::to_string).collect(),
                _ => vec![synset.clone()],
            };
            lex.register(synset, id, &lemmas);
        }
        lex
    }

    fn register(&mut self, synset: &str, node: NodeId, lemmas: &[String]) {
        self.nodes.insert(synset.to_string(), node);
        for lemma in lemmas {
            let ids = self.by_lemma.entry(lemma.to_lowercase()).or_default();
            if !ids.iter().any(|s| s == synset) {
                ids.push(synset.to_string());
                ids.sort();
            }
        }
    }

    /// Parse a lexicon file and add it to `graph`. Validation happens before
    /// any insert, so a rejected file leaves the graph untouched.
    pub fn load(&mut self, graph: &mut GraphStore, reader: impl BufRead) -> Result<LoadCounts, LexiconError> {
        let parsed = parse(reader)?;

        let mut new_ids = HashSet::new();
        for (line, s) in &parsed.synsets {
            if self.nodes.contains_key(&s.synset_id) || !new_ids.insert(s.synset_id.as_str()) {
                return Err(LexiconError::DuplicateSynset {
                    line: *line,
                    id: s.synset_id.clone(),
                });
            }
        }
        for (line, r) in &parsed.relations {
            for end in [&r.src, &r.dst] {
                if !new_ids.contains(end.as_str()) && !self.nodes.contains_key(end) {
                    return Err(LexiconError::DanglingEndpoint {
                        line: *line,
                        id: end.clone(),
                    });
                }
            }
        }
        self.check_acyclic(graph, &parsed.relations)?;

        for (_, s) in &parsed.synsets {
            let mut p: Properties = graph::props([
                ("synset", s.synset_id.clone()),
                ("lemmas", s.lemmas.join(",")),
            ]);
            if let Some(g) = &s.gloss {
                p.insert("gloss".into(), Value::Str(g.clone()));
            }
            let id = graph.add_node(graph::LABEL_WORDNET, p)?;
            self.register(&s.synset_id, id, &s.lemmas);
        }
        for (_, r) in &parsed.relations {
            graph.add_edge(
                graph::EDGE_LEXICAL,
                self.nodes[&r.src],
                self.nodes[&r.dst],
                graph::props([("symbol", r.symbol.as_str())]),
            )?;
        }
        Ok(LoadCounts {
            synsets: parsed.synsets.len(),
            relations: parsed.relations.len(),
        })
    }

    fn check_acyclic(&self, graph: &GraphStore, new: &[(usize, LexicalRelation)]) -> Result<(), LexiconError> {
        let mut adj: HashMap<String, Vec<String>> = HashMap::new();
        for (synset, &node) in &self.nodes {
            for parent in direct_hypernyms(graph, node) {
                if let Some(name) = synset_name(graph, parent) {
                    adj.entry(synset.clone()).or_default().push(name);
                }
            }
        }
        for (_, r) in new.iter().filter(|(_, r)| r.symbol == HYPERNYM) {
            adj.entry(r.src.clone()).or_default().push(r.dst.clone());
        }

        // Iterative three-colour DFS.
        let mut state: HashMap<&str, u8> = HashMap::new();
        let mut roots: Vec<&String> = adj.keys().collect();
        roots.sort();
        for root in roots {
            if state.contains_key(root.as_str()) {
                continue;
            }
            let mut stack: Vec<(&str, usize)> = vec![(root.as_str(), 0)];
            state.insert(root, 1);
            while let Some((node, next)) = stack.pop() {
                let children = adj.get(node).map_or(&[][..], Vec::as_slice);
                if next < children.len() {
                    stack.push((node, next + 1));
                    let child = children[next].as_str();
                    match state.get(child) {
                        Some(1) => return Err(LexiconError::HypernymCycle(child.to_string())),
                        Some(_) => {}
                        None => {
                            state.insert(child, 1);
                            stack.push((child, 0));
                        }
                    }
                } else {
                    state.insert(node, 2);
                }
            }
        }
        Ok(())
    }

    pub fn synset_node(&self, synset_id: &str) -> Option<NodeId> {
        self.nodes.get(synset_id).copied()
    }

    pub fn contains(&self, synset_id: &str) -> bool {
        self.nodes.contains_key(synset_id)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Synsets listing `lemma` (case-folded), sorted by id.
    pub fn resolve_lemma(&self, lemma: &str) -> Vec<String> {
        self.by_lemma
            .get(&lemma.trim().to_lowercase())
            .cloned()
            .unwrap_or_default()
    }

    fn node_or_err(&self, synset_id: &str) -> Result<NodeId, LexiconError> {
        self.synset_node(synset_id)
            .ok_or_else(|| LexiconError::UnknownSynset(synset_id.to_string()))
    }

    /// Synsets reachable over 1..=depth hypernym edges.
    pub fn hypernyms(&self, graph: &GraphStore, synset_id: &str, depth: usize) -> Result<BTreeSet<String>, LexiconError> {
        let start = self.node_or_err(synset_id)?;
        if depth == 0 {
            return Err(LexiconError::BadDepth);
        }
        Ok(bfs(graph, start, depth, direct_hypernyms)
            .into_iter()
            .filter_map(|n| synset_name(graph, n))
            .collect())
    }

    /// Synsets reachable over 1..=depth edges in the narrowing direction.
    pub fn hyponyms(&self, graph: &GraphStore, synset_id: &str, depth: usize) -> Result<BTreeSet<String>, LexiconError> {
        let start = self.node_or_err(synset_id)?;
        if depth == 0 {
            return Err(LexiconError::BadDepth);
        }
        Ok(bfs(graph, start, depth, direct_hyponyms)
            .into_iter()
            .filter_map(|n| synset_name(graph, n))
            .collect())
    }

    /// True when `a` and `b` are the same synset or their `steps`-deep
    /// hypernym closures (each including the synset itself) meet.
    pub fn shares_hypernym(&self, graph: &GraphStore, a: &str, b: &str, steps: usize) -> Result<bool, LexiconError> {
        let mut up_a = self.hypernyms(graph, a, steps)?;
        let mut up_b = self.hypernyms(graph, b, steps)?;
        up_a.insert(a.to_string());
        up_b.insert(b.to_string());
        Ok(!up_a.is_disjoint(&up_b))
    }
}

pub(crate) fn synset_name(graph: &GraphStore, node: NodeId) -> Option<String> {
    match graph.node(node)?.props.get("synset") {
        Some(Value::Str(s)) => Some(s.clone()),
        _ => None,
    }
}

fn is_hypernym_edge(graph: &GraphStore, e: &graph::Edge) -> bool {
    e.edge_type == graph::EDGE_LEXICAL
        && matches!(e.props.get("symbol"), Some(Value::Str(s)) if s == HYPERNYM)
        && graph
            .node(e.dst)
            .is_some_and(|n| n.label == graph::LABEL_WORDNET)
}

pub(crate) fn direct_hypernyms(graph: &GraphStore, node: NodeId) -> Vec<NodeId> {
    graph
        .out_edges(node)
        .iter()
        .filter_map(|eid| graph.edge(*eid))
        .filter(|e| is_hypernym_edge(graph, e))
        .map(|e| e.dst)
        .collect()
}

pub(crate) fn direct_hyponyms(graph: &GraphStore, node: NodeId) -> Vec<NodeId> {
    graph
        .in_edges(node)
        .iter()
        .filter_map(|eid| graph.edge(*eid))
        .filter(|e| is_hypernym_edge(graph, e))
        .map(|e| e.src)
        .collect()
}

pub(crate) fn bfs(
    graph: &GraphStore,
    start: NodeId,
    depth: usize,
    step: fn(&GraphStore, NodeId) -> Vec<NodeId>,
) -> BTreeSet<NodeId> {
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::from([(start, 0usize)]);
    while let Some((node, d)) = queue.pop_front() {
        if d == depth {
            continue;
        }
        for next in step(graph, node) {
            if seen.insert(next) {
                queue.push_back((next, d + 1));
            }
        }
    }
    seen
}
