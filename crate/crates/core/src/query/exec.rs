//! Planning and evaluation of parsed queries against a [`GraphStore`].
//!
//! Every pattern variable, named or anonymous, becomes a slot. The planner
//! anchors on the most selective node slot (an indexed property literal beats
//! a label scan, which beats a full scan), then walks pattern edges outward
//! from bound slots. WHERE conjuncts run as soon as their variables are bound.
//!
//! Matching is homomorphic: distinct variables may bind the same element.
//! Rows are ordered by the ORDER BY key (missing values last), then by the
//! ids of all slots in order of first appearance, so results never depend on
//! the chosen plan.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;

use serde::Serialize;

use super::ast::*;
use super::QueryError;
use crate::graph::{EdgeId, GraphStore, NodeId, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Element {
    Node(NodeId),
    Edge(EdgeId),
}

impl Element {
    pub fn node(self) -> Option<NodeId> {
        match self {
            Element::Node(n) => Some(n),
            Element::Edge(_) => None,
        }
    }
}

/// One result row: the returned variables' elements, aligned with
/// [`QueryResult::columns`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct BindingRow(pub Vec<Element>);

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct QueryResult {
    pub columns: Vec<String>,
    pub rows: Vec<BindingRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Node(usize),
    Edge(usize),
}

#[derive(Debug, Default, Clone)]
struct NodeConstraint {
    labels: Vec<String>,
    props: Vec<(String, Value)>,
}

#[derive(Debug, Clone)]
struct EdgeConstraint {
    slot: usize,
    src: usize,
    dst: usize,
    rel_type: Option<String>,
}

#[derive(Debug, Clone)]
enum COperand {
    Prop(Slot, String),
    Lit(Value),
}

#[derive(Debug, Clone)]
enum CExpr {
    Or(Box<CExpr>, Box<CExpr>),
    And(Box<CExpr>, Box<CExpr>),
    Not(Box<CExpr>),
    Cmp(COperand, CmpOp, COperand),
}

#[derive(Debug, Clone)]
enum AnchorSource {
    Index { label: String, key: String, value: Value },
    Label(String),
    AllNodes,
}

#[derive(Debug, Clone)]
enum Step {
    Anchor { node: usize, source: AnchorSource, estimate: usize },
    Expand { edge: usize, from: usize, to: usize, outgoing: bool },
    Check { edge: usize },
}

struct Compiled {
    names: Vec<(String, Slot)>,
    order: Vec<Slot>,
    nodes: Vec<NodeConstraint>,
    edge_slots: usize,
    edges: Vec<EdgeConstraint>,
    conjuncts: Vec<CExpr>,
    returns: Vec<Slot>,
    order_by: Option<(Slot, String, bool)>,
    impossible: bool,
}

fn compile(q: &Query) -> Result<Compiled, QueryError> {
    let mut c = Compiled {
        names: Vec::new(),
        order: Vec::new(),
        nodes: Vec::new(),
        edge_slots: 0,
        edges: Vec::new(),
        conjuncts: Vec::new(),
        returns: Vec::new(),
        order_by: None,
        impossible: false,
    };
    let mut by_name: HashMap<String, Slot> = HashMap::new();

    let node_slot = |c: &mut Compiled, by_name: &mut HashMap<String, Slot>, np: &NodePattern| -> Result<usize, QueryError> {
        let slot = match &np.var {
            Some(v) => match by_name.get(v) {
                Some(Slot::Node(i)) => *i,
                Some(Slot::Edge(_)) => return Err(QueryError::VariableKind(v.clone())),
                None => {
                    let i = c.nodes.len();
                    c.nodes.push(NodeConstraint::default());
                    by_name.insert(v.clone(), Slot::Node(i));
                    c.names.push((v.clone(), Slot::Node(i)));
                    c.order.push(Slot::Node(i));
                    i
                }
            },
            None => {
                let i = c.nodes.len();
                c.nodes.push(NodeConstraint::default());
                c.order.push(Slot::Node(i));
                i
            }
        };
        let cons = &mut c.nodes[slot];
        if let Some(l) = &np.label {
            if !cons.labels.contains(l) {
                cons.labels.push(l.clone());
            }
        }
        cons.props.extend(np.props.iter().cloned());
        Ok(slot)
    };

    for m in &q.matches {
        for p in &m.patterns {
            let mut left = node_slot(&mut c, &mut by_name, &p.start)?;
            for (rel, np) in &p.steps {
                let eslot = match &rel.var {
                    Some(v) => match by_name.get(v) {
                        Some(Slot::Edge(i)) => *i,
                        Some(Slot::Node(_)) => return Err(QueryError::VariableKind(v.clone())),
                        None => {
                            let i = c.edge_slots;
                            c.edge_slots += 1;
                            by_name.insert(v.clone(), Slot::Edge(i));
                            c.names.push((v.clone(), Slot::Edge(i)));
                            c.order.push(Slot::Edge(i));
                            i
                        }
                    },
                    None => {
                        let i = c.edge_slots;
                        c.edge_slots += 1;
                        c.order.push(Slot::Edge(i));
                        i
                    }
                };
                let right = node_slot(&mut c, &mut by_name, np)?;
                let (src, dst) = match rel.direction {
                    RelDirection::Right => (left, right),
                    RelDirection::Left => (right, left),
                };
                c.edges.push(EdgeConstraint {
                    slot: eslot,
                    src,
                    dst,
                    rel_type: rel.rel_type.clone(),
                });
                left = right;
            }
        }
    }
    c.impossible = c.nodes.iter().any(|n| n.labels.len() > 1);

    let lookup = |v: &str| by_name.get(v).copied().ok_or_else(|| QueryError::Unbound(v.to_string()));
    fn lower(e: &Expr, lookup: &dyn Fn(&str) -> Result<Slot, QueryError>) -> Result<CExpr, QueryError> {
        let operand = |o: &Operand| -> Result<COperand, QueryError> {
            Ok(match o {
                Operand::Property { var, key } => COperand::Prop(lookup(var)?, key.clone()),
                Operand::Literal(v) => COperand::Lit(v.clone()),
            })
        };
        Ok(match e {
            Expr::Or(a, b) => CExpr::Or(Box::new(lower(a, lookup)?), Box::new(lower(b, lookup)?)),
            Expr::And(a, b) => CExpr::And(Box::new(lower(a, lookup)?), Box::new(lower(b, lookup)?)),
            Expr::Not(a) => CExpr::Not(Box::new(lower(a, lookup)?)),
            Expr::Compare { left, op, right } => CExpr::Cmp(operand(left)?, *op, operand(right)?),
        })
    }
    if let Some(w) = &q.where_clause {
        for conj in w.conjuncts() {
            c.conjuncts.push(lower(conj, &lookup)?);
        }
    }
    for r in &q.returns {
        c.returns.push(lookup(r)?);
    }
    if let Some(o) = &q.order_by {
        c.order_by = Some((lookup(&o.var)?, o.key.clone(), o.descending));
    }
    Ok(c)
}

fn cexpr_slots(e: &CExpr, out: &mut Vec<Slot>) {
    match e {
        CExpr::Or(a, b) | CExpr::And(a, b) => {
            cexpr_slots(a, out);
            cexpr_slots(b, out);
        }
        CExpr::Not(a) => cexpr_slots(a, out),
        CExpr::Cmp(l, _, r) => {
            for o in [l, r] {
                if let COperand::Prop(s, _) = o {
                    out.push(*s);
                }
            }
        }
    }
}

struct Plan {
    steps: Vec<Step>,
    /// Conjunct indexes to evaluate once step `i` has bound its slots.
    filters: Vec<Vec<usize>>,
    /// Conjuncts that reference no variable at all.
    constant_filters: Vec<usize>,
}

fn estimate(graph: &GraphStore, cons: &NodeConstraint) -> (usize, AnchorSource) {
    let mut best = (graph.node_count(), AnchorSource::AllNodes);
    if let Some(label) = cons.labels.first() {
        for (key, value) in &cons.props {
            if let Some(n) = graph.index_selectivity(label, key, value) {
                if n < best.0 || matches!(best.1, AnchorSource::AllNodes | AnchorSource::Label(_)) && n <= best.0 {
                    best = (
                        n,
                        AnchorSource::Index {
                            label: label.clone(),
                            key: key.clone(),
                            value: value.clone(),
                        },
                    );
                }
            }
        }
        let n = graph.label_count(label);
        if n < best.0 || matches!(best.1, AnchorSource::AllNodes) {
            best = (n, AnchorSource::Label(label.clone()));
        }
    }
    best
}

fn plan(c: &Compiled, graph: &GraphStore) -> Plan {
    let mut bound_nodes = vec![false; c.nodes.len()];
    let mut bound_edges = vec![false; c.edge_slots];
    let mut done = vec![false; c.edges.len()];
    let mut steps = Vec::new();

    loop {
        if let Some(i) = (0..c.edges.len())
            .find(|&i| !done[i] && bound_nodes[c.edges[i].src] && bound_nodes[c.edges[i].dst])
        {
            done[i] = true;
            bound_edges[c.edges[i].slot] = true;
            steps.push(Step::Check { edge: i });
            continue;
        }
        if let Some(i) = (0..c.edges.len())
            .find(|&i| !done[i] && (bound_nodes[c.edges[i].src] || bound_nodes[c.edges[i].dst]))
        {
            let e = &c.edges[i];
            let outgoing = bound_nodes[e.src];
            let (from, to) = if outgoing { (e.src, e.dst) } else { (e.dst, e.src) };
            done[i] = true;
            bound_edges[e.slot] = true;
            bound_nodes[to] = true;
            steps.push(Step::Expand { edge: i, from, to, outgoing });
            continue;
        }
        let anchor = (0..c.nodes.len())
            .filter(|&n| !bound_nodes[n])
            .map(|n| {
                let (est, source) = estimate(graph, &c.nodes[n]);
                (est, n, source)
            })
            .min_by_key(|(est, n, _)| (*est, *n));
        let Some((estimate, node, source)) = anchor else { break };
        bound_nodes[node] = true;
        steps.push(Step::Anchor { node, source, estimate });
    }

    // Attach each conjunct to the first step after which all its slots are bound.
    let mut bound_at_nodes = vec![usize::MAX; c.nodes.len()];
    let mut bound_at_edges = vec![usize::MAX; c.edge_slots];
    for (k, s) in steps.iter().enumerate() {
        match s {
            Step::Anchor { node, .. } => bound_at_nodes[*node] = k,
            Step::Expand { edge, to, .. } => {
                bound_at_nodes[*to] = bound_at_nodes[*to].min(k);
                let slot = c.edges[*edge].slot;
                bound_at_edges[slot] = bound_at_edges[slot].min(k);
            }
            Step::Check { edge } => {
                let slot = c.edges[*edge].slot;
                bound_at_edges[slot] = bound_at_edges[slot].min(k);
            }
        }
    }
    let mut filters = vec![Vec::new(); steps.len()];
    let mut constant_filters = Vec::new();
    for (ci, conj) in c.conjuncts.iter().enumerate() {
        let mut slots = Vec::new();
        cexpr_slots(conj, &mut slots);
        let at = slots
            .iter()
            .map(|s| match s {
                Slot::Node(i) => bound_at_nodes[*i],
                Slot::Edge(i) => bound_at_edges[*i],
            })
            .max();
        match at {
            Some(k) => filters[k].push(ci),
            None => constant_filters.push(ci),
        }
    }
    Plan {
        steps,
        filters,
        constant_filters,
    }
}

struct Binding {
    nodes: Vec<Option<NodeId>>,
    edges: Vec<Option<EdgeId>>,
}

struct Runner<'a> {
    c: &'a Compiled,
    plan: &'a Plan,
    graph: &'a GraphStore,
    out: Vec<(Option<Value>, Vec<u64>)>,
}

impl Runner<'_> {
    fn node_ok(&self, slot: usize, id: NodeId) -> bool {
        let Some(node) = self.graph.node(id) else { return false };
        let cons = &self.c.nodes[slot];
        cons.labels.iter().all(|l| *l == node.label)
            && cons
                .props
                .iter()
                .all(|(k, v)| node.props.get(k).is_some_and(|x| x.loose_eq(v)))
    }

    fn prop<'g>(&'g self, b: &Binding, slot: Slot, key: &str) -> Option<&'g Value> {
        match slot {
            Slot::Node(i) => self.graph.node(b.nodes[i]?)?.props.get(key),
            Slot::Edge(i) => self.graph.edge(b.edges[i]?)?.props.get(key),
        }
    }

    fn eval(&self, b: &Binding, e: &CExpr) -> bool {
        match e {
            CExpr::Or(x, y) => self.eval(b, x) || self.eval(b, y),
            CExpr::And(x, y) => self.eval(b, x) && self.eval(b, y),
            CExpr::Not(x) => !self.eval(b, x),
            CExpr::Cmp(l, op, r) => {
                let get = |o: &COperand| match o {
                    COperand::Prop(s, k) => self.prop(b, *s, k).cloned(),
                    COperand::Lit(v) => Some(v.clone()),
                };
                let (Some(l), Some(r)) = (get(l), get(r)) else { return false };
                let Some(ord) = l.compare(&r) else { return false };
                match op {
                    CmpOp::Eq => ord == Ordering::Equal,
                    CmpOp::Ne => ord != Ordering::Equal,
                    CmpOp::Lt => ord == Ordering::Less,
                    CmpOp::Le => ord != Ordering::Greater,
                    CmpOp::Gt => ord == Ordering::Greater,
                    CmpOp::Ge => ord != Ordering::Less,
                }
            }
        }
    }

    fn filters_pass(&self, b: &Binding, k: usize) -> bool {
        self.plan.filters[k]
            .iter()
            .all(|&ci| self.eval(b, &self.c.conjuncts[ci]))
    }

    fn run(&mut self, k: usize, b: &mut Binding) {
        if k == self.plan.steps.len() {
            let key = self
                .c
                .order_by
                .as_ref()
                .and_then(|(slot, prop, _)| self.prop(b, *slot, prop).cloned());
            let ids = self
                .c
                .order
                .iter()
                .map(|s| match s {
                    Slot::Node(i) => b.nodes[*i].expect("all slots bound").0,
                    Slot::Edge(i) => b.edges[*i].expect("all slots bound").0,
                })
                .collect();
            self.out.push((key, ids));
            return;
        }
        match self.plan.steps[k].clone() {
            Step::Anchor { node, source, .. } => {
                let candidates: Vec<NodeId> = match &source {
                    AnchorSource::Index { label, key, value } => self.graph.find_nodes(label, key, value),
                    AnchorSource::Label(l) => self.graph.nodes_with_label(l).collect(),
                    AnchorSource::AllNodes => self.graph.nodes().map(|n| n.id).collect(),
                };
                for id in candidates {
                    if self.node_ok(node, id) {
                        b.nodes[node] = Some(id);
                        if self.filters_pass(b, k) {
                            self.run(k + 1, b);
                        }
                    }
                }
                b.nodes[node] = None;
            }
            Step::Expand { edge, from, to, outgoing } => {
                let cons = &self.c.edges[edge];
                let from_id = b.nodes[from].expect("expand starts at a bound slot");
                let list = if outgoing {
                    self.graph.out_edges(from_id)
                } else {
                    self.graph.in_edges(from_id)
                };
                let prior_edge = b.edges[cons.slot];
                let prior_to = b.nodes[to];
                for &eid in list {
                    if prior_edge.is_some_and(|p| p != eid) {
                        continue;
                    }
                    let e = self.graph.edge(eid).expect("adjacency is consistent");
                    if cons.rel_type.as_ref().is_some_and(|t| *t != e.edge_type) {
                        continue;
                    }
                    let other = if outgoing { e.dst } else { e.src };
                    if let Some(p) = prior_to {
                        if p != other {
                            continue;
                        }
                    } else if !self.node_ok(to, other) {
                        continue;
                    }
                    b.edges[cons.slot] = Some(eid);
                    b.nodes[to] = Some(other);
                    if self.filters_pass(b, k) {
                        self.run(k + 1, b);
                    }
                }
                b.edges[cons.slot] = prior_edge;
                b.nodes[to] = prior_to;
            }
            Step::Check { edge } => {
                let cons = &self.c.edges[edge];
                let src = b.nodes[cons.src].expect("bound");
                let dst = b.nodes[cons.dst].expect("bound");
                let prior_edge = b.edges[cons.slot];
                for &eid in self.graph.out_edges(src) {
                    if prior_edge.is_some_and(|p| p != eid) {
                        continue;
                    }
                    let e = self.graph.edge(eid).expect("adjacency is consistent");
                    if e.dst != dst || cons.rel_type.as_ref().is_some_and(|t| *t != e.edge_type) {
                        continue;
                    }
                    b.edges[cons.slot] = Some(eid);
                    if self.filters_pass(b, k) {
                        self.run(k + 1, b);
                    }
                }
                b.edges[cons.slot] = prior_edge;
            }
        }
    }
}

/// Total order used for ORDER BY: comparable values by value, otherwise by
/// kind (booleans, numbers, strings).
fn sort_order(a: &Value, b: &Value) -> Ordering {
    a.compare(b).unwrap_or_else(|| {
        let rank = |v: &Value| match v {
            Value::Bool(_) => 0,
            Value::Int(_) | Value::Real(_) => 1,
            Value::Str(_) => 2,
        };
        rank(a).cmp(&rank(b))
    })
}

/// Run `query` against `graph`.
pub fn execute(query: &Query, graph: &GraphStore) -> Result<QueryResult, QueryError> {
    let c = compile(query)?;
    let columns = query.returns.clone();
    if c.impossible {
        return Ok(QueryResult { columns, rows: Vec::new() });
    }
    let plan = plan(&c, graph);
    let mut runner = Runner {
        c: &c,
        plan: &plan,
        graph,
        out: Vec::new(),
    };
    let mut b = Binding {
        nodes: vec![None; c.nodes.len()],
        edges: vec![None; c.edge_slots],
    };
    if plan
        .constant_filters
        .iter()
        .all(|&ci| runner.eval(&b, &c.conjuncts[ci]))
    {
        runner.run(0, &mut b);
    }
    let mut rows = runner.out;

    let descending = c.order_by.as_ref().is_some_and(|o| o.2);
    rows.sort_by(|(ka, ia), (kb, ib)| {
        let by_key = match (ka, kb) {
            (Some(a), Some(b)) => {
                let o = sort_order(a, b);
                if descending {
                    o.reverse()
                } else {
                    o
                }
            }
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => Ordering::Equal,
        };
        by_key.then_with(|| ia.cmp(ib))
    });

    let skip = query.skip.unwrap_or(0).min(usize::MAX as u64) as usize;
    let limit = query.limit.map_or(usize::MAX, |l| l.min(usize::MAX as u64) as usize);
    let positions: Vec<usize> = c
        .returns
        .iter()
        .map(|s| c.order.iter().position(|o| o == s).expect("returned slot is bound"))
        .collect();
    let rows = rows
        .into_iter()
        .skip(skip)
        .take(limit)
        .map(|(_, ids)| {
            BindingRow(
                positions
                    .iter()
                    .map(|&p| match c.order[p] {
                        Slot::Node(_) => Element::Node(NodeId(ids[p])),
                        Slot::Edge(_) => Element::Edge(EdgeId(ids[p])),
                    })
                    .collect(),
            )
        })
        .collect();
    Ok(QueryResult { columns, rows })
}

/// Chosen plan, for debugging.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Explain {
    /// Description of the anchor node pattern, e.g. `(w:Wordnet) via index Wordnet.synset`.
    pub anchor: String,
    /// Estimated candidates at the anchor.
    pub anchor_estimate: usize,
    /// Node count of the whole store, the cost of a brute-force scan.
    pub total_nodes: usize,
    pub steps: Vec<String>,
}

impl fmt::Display for Explain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "anchor {} (~{} of {} nodes)",
            self.anchor, self.anchor_estimate, self.total_nodes
        )?;
        for s in &self.steps {
            writeln!(f, "  {s}")?;
        }
        Ok(())
    }
}

pub fn explain(query: &Query, graph: &GraphStore) -> Result<Explain, QueryError> {
    let c = compile(query)?;
    let plan = plan(&c, graph);
    let node_name = |i: usize| {
        c.names
            .iter()
            .find(|(_, s)| *s == Slot::Node(i))
            .map_or_else(|| format!("_n{i}"), |(n, _)| n.clone())
    };
    let edge_name = |e: &EdgeConstraint| {
        let var = c
            .names
            .iter()
            .find(|(_, s)| *s == Slot::Edge(e.slot))
            .map(|(n, _)| n.clone())
            .unwrap_or_default();
        match &e.rel_type {
            Some(t) => format!("{var}:{t}"),
            None => var,
        }
    };
    let mut anchor = None;
    let mut steps = Vec::new();
    for s in &plan.steps {
        let text = match s {
            Step::Anchor { node, source, estimate } => {
                let via = match source {
                    AnchorSource::Index { label, key, value } => format!("index {label}.{key} = {value}"),
                    AnchorSource::Label(l) => format!("label scan {l}"),
                    AnchorSource::AllNodes => "full scan".to_string(),
                };
                let label = c.nodes[*node].labels.first().map(|l| format!(":{l}")).unwrap_or_default();
                let text = format!("({}{label}) via {via}", node_name(*node));
                if anchor.is_none() {
                    anchor = Some((text.clone(), *estimate));
                }
                format!("anchor {text}")
            }
            Step::Expand { edge, from, to, outgoing } => {
                let e = &c.edges[*edge];
                let dir = if *outgoing { "outbound" } else { "inbound" };
                let arrow = if *outgoing {
                    format!("-[{}]->", edge_name(e))
                } else {
                    format!("<-[{}]-", edge_name(e))
                };
                format!("expand {dir} ({}){arrow}({})", node_name(*from), node_name(*to))
            }
            Step::Check { edge } => {
                let e = &c.edges[*edge];
                format!("check ({})-[{}]->({})", node_name(e.src), edge_name(e), node_name(e.dst))
            }
        };
        steps.push(text);
    }
    let (anchor, anchor_estimate) = anchor.unwrap_or_else(|| ("none".into(), 0));
    Ok(Explain {
        anchor,
        anchor_estimate,
        total_nodes: graph.node_count(),
        steps,
    })
}
