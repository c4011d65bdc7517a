//! Shared test support: an exhaustive-assignment query matcher, random graph
//! generation and the template queries it is checked against.
#![allow(dead_code)]

use std::cmp::Ordering;
use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shotgraph_core::graph::{props, GraphStore, Properties, Value};
use shotgraph_core::query::ast::{CmpOp, Expr, Operand, Query, RelDirection};
use shotgraph_core::query::Element;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Kind {
    Node,
    Edge,
}

struct EdgePos {
    var: String,
    src: String,
    dst: String,
    rel_type: Option<String>,
}

fn num(v: &Value) -> Option<f64> {
    match v {
        Value::Int(i) => Some(*i as f64),
        Value::Real(r) => Some(*r),
        _ => None,
    }
}

fn cmp_values(a: &Value, b: &Value) -> Option<Ordering> {
    match (a, b) {
        (Value::Int(x), Value::Int(y)) => Some(x.cmp(y)),
        (Value::Str(x), Value::Str(y)) => Some(x.cmp(y)),
        (Value::Bool(x), Value::Bool(y)) => Some(x.cmp(y)),
        _ => num(a)?.partial_cmp(&num(b)?),
    }
}

fn kind_rank(v: &Value) -> u8 {
    match v {
        Value::Bool(_) => 0,
        Value::Int(_) | Value::Real(_) => 1,
        Value::Str(_) => 2,
    }
}

type NodeCon = (Option<String>, Vec<(String, Value)>);

/// Enumerate every assignment of pattern variables to graph elements and keep
/// the ones satisfying all constraints. Rows are ordered by the ORDER BY key
/// (missing last), then by the ids of all variables in order of first
/// appearance, anonymous ones included.
pub fn brute_force(q: &Query, g: &GraphStore) -> Vec<Vec<Element>> {
    let mut order: Vec<(String, Kind)> = Vec::new();
    let mut node_cons: HashMap<String, Vec<NodeCon>> = HashMap::new();
    let mut edges: Vec<EdgePos> = Vec::new();
    let mut anon = 0;
    let fresh = |anon: &mut usize| {
        *anon += 1;
        format!("#{anon}")
    };
    let note = |order: &mut Vec<(String, Kind)>, name: &str, kind: Kind| {
        if !order.iter().any(|(n, _)| n == name) {
            order.push((name.to_string(), kind));
        }
    };
    for m in &q.matches {
        for p in &m.patterns {
            let mut nodes = vec![p.start.clone()];
            nodes.extend(p.steps.iter().map(|(_, n)| n.clone()));
            let mut names = Vec::new();
            let mut rel_names = Vec::new();
            for (i, n) in nodes.iter().enumerate() {
                let name = n.var.clone().unwrap_or_else(|| fresh(&mut anon));
                note(&mut order, &name, Kind::Node);
                node_cons
                    .entry(name.clone())
                    .or_default()
                    .push((n.label.clone(), n.props.clone()));
                names.push(name);
                if i < p.steps.len() {
                    let r = &p.steps[i].0;
                    let rname = r.var.clone().unwrap_or_else(|| fresh(&mut anon));
                    note(&mut order, &rname, Kind::Edge);
                    rel_names.push(rname);
                }
            }
            for (i, (r, _)) in p.steps.iter().enumerate() {
                let (src, dst) = match r.direction {
                    RelDirection::Right => (names[i].clone(), names[i + 1].clone()),
                    RelDirection::Left => (names[i + 1].clone(), names[i].clone()),
                };
                edges.push(EdgePos {
                    var: rel_names[i].clone(),
                    src,
                    dst,
                    rel_type: r.rel_type.clone(),
                });
            }
        }
    }

    let node_vars: Vec<String> = order
        .iter()
        .filter(|(_, k)| *k == Kind::Node)
        .map(|(n, _)| n.clone())
        .collect();
    let domains: Vec<Vec<u64>> = node_vars
        .iter()
        .map(|v| {
            g.nodes()
                .filter(|n| {
                    node_cons[v].iter().all(|(label, ps)| {
                        label.as_ref().is_none_or(|l| *l == n.label)
                            && ps.iter().all(|(k, val)| {
                                n.props.get(k).and_then(|x| cmp_values(x, val)) == Some(Ordering::Equal)
                            })
                    })
                })
                .map(|n| n.id.0)
                .collect()
        })
        .collect();
    let all_edges: Vec<_> = g.edges().collect();

    let mut rows: Vec<(Option<Value>, Vec<u64>)> = Vec::new();
    let mut idx = vec![0usize; node_vars.len()];
    if domains.iter().any(|d| d.is_empty()) {
        return Vec::new();
    }
    loop {
        let nb: HashMap<&str, u64> = node_vars
            .iter()
            .zip(&idx)
            .enumerate()
            .map(|(k, (v, &i))| (v.as_str(), domains[k][i]))
            .collect();
        // For each edge position, the edges it could bind.
        let options: Vec<Vec<u64>> = edges
            .iter()
            .map(|e| {
                all_edges
                    .iter()
                    .filter(|x| {
                        x.src.0 == nb[e.src.as_str()]
                            && x.dst.0 == nb[e.dst.as_str()]
                            && e.rel_type.as_ref().is_none_or(|t| *t == x.edge_type)
                    })
                    .map(|x| x.id.0)
                    .collect()
            })
            .collect();
        if options.iter().all(|o| !o.is_empty()) {
            let mut eidx = vec![0usize; edges.len()];
            loop {
                let mut eb: HashMap<&str, u64> = HashMap::new();
                let mut consistent = true;
                for (k, e) in edges.iter().enumerate() {
                    let id = options[k][eidx[k]];
                    if let Some(prev) = eb.insert(e.var.as_str(), id) {
                        consistent &= prev == id;
                    }
                }
                if consistent {
                    let lookup = |var: &str, key: &str| -> Option<Value> {
                        if let Some(n) = nb.get(var) {
                            g.node(shotgraph_core::NodeId(*n))?.props.get(key).cloned()
                        } else {
                            let e = eb.get(var)?;
                            g.edge(shotgraph_core::EdgeId(*e))?.props.get(key).cloned()
                        }
                    };
                    let pass = q.where_clause.as_ref().is_none_or(|w| eval(w, &lookup));
                    if pass {
                        let key = q.order_by.as_ref().and_then(|o| lookup(&o.var, &o.key));
                        let ids = order
                            .iter()
                            .map(|(n, k)| match k {
                                Kind::Node => nb[n.as_str()],
                                Kind::Edge => eb[n.as_str()],
                            })
                            .collect();
                        rows.push((key, ids));
                    }
                }
                if !odometer(&mut eidx, &options.iter().map(Vec::len).collect::<Vec<_>>()) {
                    break;
                }
            }
        }
        if !odometer(&mut idx, &domains.iter().map(Vec::len).collect::<Vec<_>>()) {
            break;
        }
    }

    let desc = q.order_by.as_ref().is_some_and(|o| o.descending);
    rows.sort_by(|(ka, ia), (kb, ib)| {
        let k = match (ka, kb) {
            (Some(a), Some(b)) => {
                let o = cmp_values(a, b).unwrap_or_else(|| kind_rank(a).cmp(&kind_rank(b)));
                if desc {
                    o.reverse()
                } else {
                    o
                }
            }
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => Ordering::Equal,
        };
        k.then_with(|| ia.cmp(ib))
    });
    let skip = q.skip.unwrap_or(0) as usize;
    let limit = q.limit.map_or(usize::MAX, |l| l as usize);
    rows.into_iter()
        .skip(skip)
        .take(limit)
        .map(|(_, ids)| {
            q.returns
                .iter()
                .map(|r| {
                    let p = order.iter().position(|(n, _)| n == r).unwrap();
                    match order[p].1 {
                        Kind::Node => Element::Node(shotgraph_core::NodeId(ids[p])),
                        Kind::Edge => Element::Edge(shotgraph_core::EdgeId(ids[p])),
                    }
                })
                .collect()
        })
        .collect()
}

fn odometer(idx: &mut [usize], sizes: &[usize]) -> bool {
    for k in (0..idx.len()).rev() {
        idx[k] += 1;
        if idx[k] < sizes[k] {
            return true;
        }
        idx[k] = 0;
    }
    false
}

fn eval(e: &Expr, lookup: &dyn Fn(&str, &str) -> Option<Value>) -> bool {
    match e {
        Expr::Or(a, b) => eval(a, lookup) || eval(b, lookup),
        Expr::And(a, b) => eval(a, lookup) && eval(b, lookup),
        Expr::Not(a) => !eval(a, lookup),
        Expr::Compare { left, op, right } => {
            let get = |o: &Operand| match o {
                Operand::Property { var, key } => lookup(var, key),
                Operand::Literal(v) => Some(v.clone()),
            };
            let (Some(l), Some(r)) = (get(left), get(right)) else { return false };
            let Some(o) = cmp_values(&l, &r) else { return false };
            match op {
                CmpOp::Eq => o.is_eq(),
                CmpOp::Ne => o.is_ne(),
                CmpOp::Lt => o.is_lt(),
                CmpOp::Le => o.is_le(),
                CmpOp::Gt => o.is_gt(),
                CmpOp::Ge => o.is_ge(),
            }
        }
    }
}

pub const LABELS: [&str; 3] = ["A", "B", "C"];
pub const TYPES: [&str; 3] = ["R", "S", "T"];
const NAMES: [&str; 3] = ["x", "y", "z"];

/// Random graph with at most `max_nodes` nodes and `max_edges` edges. Nodes
/// carry optional `k` (int), `name` (string), `w` (real), `flag` (bool);
/// edges an optional `w`.
pub fn random_graph(seed: u64, max_nodes: usize, max_edges: usize) -> GraphStore {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = GraphStore::new();
    g.create_index("A", "k").unwrap();
    g.create_index("B", "name").unwrap();
    let n = rng.random_range(1..=max_nodes);
    let mut ids = Vec::new();
    for _ in 0..n {
        let label = LABELS[rng.random_range(0..LABELS.len())];
        let mut p = Properties::new();
        if rng.random_bool(0.85) {
            p.insert("k".into(), Value::Int(rng.random_range(0..5)));
        }
        if rng.random_bool(0.8) {
            p.insert("name".into(), Value::Str(NAMES[rng.random_range(0..3)].into()));
        }
        if rng.random_bool(0.7) {
            p.insert("w".into(), Value::Real((rng.random::<f64>() * 10.0).round() / 10.0));
        }
        if rng.random_bool(0.5) {
            p.insert("flag".into(), Value::Bool(rng.random()));
        }
        ids.push(g.add_node(label, p).unwrap());
    }
    let m = rng.random_range(0..=max_edges);
    for _ in 0..m {
        let a = ids[rng.random_range(0..ids.len())];
        let b = if rng.random_bool(0.1) { a } else { ids[rng.random_range(0..ids.len())] };
        let t = TYPES[rng.random_range(0..TYPES.len())];
        let p = if rng.random_bool(0.8) {
            props([("w", (rng.random::<f64>() * 10.0).round() / 10.0)])
        } else {
            Properties::new()
        };
        g.add_edge(t, a, b, p).unwrap();
    }
    g
}

/// Query templates covering labels, property literals, anonymous nodes and
/// edges, joins across MATCH clauses, every WHERE operator, ORDER BY, SKIP
/// and LIMIT.
pub const TEMPLATES: [&str; 20] = [
    "MATCH (a:A) RETURN a",
    "MATCH (a:A {k: 2}) RETURN a",
    "MATCH (a)-[r:R]->(b) RETURN a, r, b",
    "MATCH (a:A)-->(b:B) RETURN a, b",
    "MATCH (a)<--(b:C) RETURN a, b",
    "MATCH (a:A)-[r]->(b)<-[s:S]-(c) RETURN a, b, c",
    "MATCH (a:A)-[:R]->(b) MATCH (b)-[:S]->(c:C) RETURN a, c",
    "MATCH (a:B), (b:C) WHERE a.k = b.k RETURN a, b",
    "MATCH (a)-[r]->(b) WHERE r.w > 0.5 RETURN r ORDER BY r.w DESC",
    "MATCH (a:A) WHERE a.k >= 2 AND a.k <= 3 OR a.name = \"x\" RETURN a ORDER BY a.k",
    "MATCH (a)-[r:T]->(a) RETURN a, r",
    "MATCH (a:C)-->()-->(b) WHERE NOT a.name = \"y\" RETURN a, b",
    "MATCH (a)-[r]->(b) WHERE a.k <> b.k RETURN a, b ORDER BY a.name ASC SKIP 2 LIMIT 5",
    "MATCH (a:A {name: \"x\"})-[r]->(b {k: 1}) RETURN b, r",
    "MATCH (a)-[r]->(b) MATCH (b)-[r]->(a) RETURN a, b",
    "MATCH (a:B)-[:R]->(b), (c:A)-[:R]->(b) WHERE a.w < c.w RETURN a, b, c ORDER BY c.w DESC LIMIT 10",
    "MATCH (a) WHERE a.flag = true OR a.k > 3 RETURN a ORDER BY a.flag",
    "MATCH (a:A)<-[r:S]-(b) WHERE r.w >= 0.2 AND NOT r.w > 0.8 RETURN b ORDER BY b.w DESC SKIP 1",
    "MATCH (a)-->(b)-->(c) WHERE a.k < c.k RETURN a, c ORDER BY b.k DESC LIMIT 7",
    "MATCH (a:A), (b:B) MATCH (a)-[:T]->(b) WHERE a.name <> b.name AND 1 < 2 RETURN b, a ORDER BY a.name",
];

pub const LEXICON: &str = "\
S\tcheetah\tcheetah,chetah
S\tleopard\tleopard
S\tlion\tlion,king_of_beasts
S\tbig_cat\tbig_cat,cat
S\tfeline\tfeline,felid
S\tzebra\tzebra
S\tequine\tequine,equid
R\tcheetah\t@\tbig_cat
R\tleopard\t@\tbig_cat
R\tlion\t@\tbig_cat
R\tbig_cat\t@\tfeline
R\tzebra\t@\tequine
";

pub const KEYWORD_QUERY: &str = "MATCH (s:Shot) - [c:Category] ->
(w:Wordnet {synset: \"zebra\"})
WHERE c.weight > 0.1
RETURN s ORDER BY s.duration DESC";

pub const HYPERNYM_QUERY: &str = "MATCH (w:Wordnet {synset: \"cheetah\"}) -
[lr:Lexical_rel] -> (big_cats:Wordnet)
MATCH (s:Shot) - [c:Category] -> () --> (big_cats)
WHERE c.weight > 0.1 and lr.symbol = \"@\"
RETURN s ORDER BY s.duration DESC";

pub const SPATIAL_QUERY: &str = "MATCH (s:Shot) --> (zebra_obj:Saliient_obj) -->
(w:Wordnet {synset: \"zebra\"})
MATCH (s) --> (lion_obj:Saliient_obj) -->
(w:Wordnet {synset: \"lion\"})
MATCH (zebra_obj) - [:Left] -> (lion_obj)
RETURN s ORDER BY s.duration DESC";

/// The spatial query with the label spelled as the indexer writes it and a separate
/// Wordnet variable per object.
pub const SPATIAL_QUERY_FIXED: &str = "MATCH (s:Shot) --> (zebra_obj:Salient_obj) -->
(w1:Wordnet {synset: \"zebra\"})
MATCH (s) --> (lion_obj:Salient_obj) -->
(w2:Wordnet {synset: \"lion\"})
MATCH (zebra_obj) - [:Left] -> (lion_obj)
RETURN s ORDER BY s.duration DESC";

pub struct GoldenFixture {
    pub graph: GraphStore,
    pub lexicon: shotgraph_core::Lexicon,
    /// Shots tagged zebra at weights 0.4, 0.05, 0.2 with durations 10, 99, 20.
    pub zebra: [shotgraph_core::NodeId; 3],
    pub leopard: shotgraph_core::NodeId,
    pub lion: shotgraph_core::NodeId,
    /// Lion to the left of a zebra.
    pub lion_left_of_zebra: shotgraph_core::NodeId,
    /// Zebra to the left of a lion.
    pub zebra_left_of_lion: shotgraph_core::NodeId,
}

/// Hand-built graph for the golden query tests.
pub fn golden_fixture() -> GoldenFixture {
    use shotgraph_core::graph::{EDGE_CATEGORY, EDGE_INSTANCE_OF, EDGE_SALIENT};
    let mut graph = GraphStore::with_default_indexes();
    let mut lexicon = shotgraph_core::Lexicon::default();
    lexicon.load(&mut graph, LEXICON.as_bytes()).unwrap();
    let syn = |l: &shotgraph_core::Lexicon, s: &str| l.synset_node(s).unwrap();

    let shot = |g: &mut GraphStore, duration: i64, tags: &[(&str, f64)]| {
        let s = g
            .add_node("Shot", props([("film_id", Value::from("fx")), ("duration", Value::Int(duration))]))
            .unwrap();
        for (synset, w) in tags {
            g.add_edge(EDGE_CATEGORY, s, syn(&lexicon, synset), props([("weight", *w)])).unwrap();
        }
        s
    };
    let z1 = shot(&mut graph, 10, &[("zebra", 0.4)]);
    let z2 = shot(&mut graph, 99, &[("zebra", 0.05)]);
    let z3 = shot(&mut graph, 20, &[("zebra", 0.2)]);
    let leopard = shot(&mut graph, 30, &[("leopard", 0.5)]);
    let lion = shot(&mut graph, 15, &[("lion", 0.3), ("zebra", 0.08)]);
    let a = shot(&mut graph, 40, &[("lion", 0.35), ("zebra", 0.3)]);
    let b = shot(&mut graph, 50, &[("lion", 0.25), ("zebra", 0.25)]);

    let objects = |g: &mut GraphStore, s, lion_x: f64, zebra_x: f64| {
        let obj = |g: &mut GraphStore, lemma: &str, x: f64| {
            let o = g
                .add_node(
                    "Salient_obj",
                    props([("lemma", Value::from(lemma)), ("film_id", Value::from("fx")), ("x", Value::Real(x))]),
                )
                .unwrap();
            g.add_edge(EDGE_SALIENT, s, o, Properties::new()).unwrap();
            g.add_edge(EDGE_INSTANCE_OF, o, syn(&lexicon, lemma), Properties::new()).unwrap();
            o
        };
        let l = obj(g, "lion", lion_x);
        let z = obj(g, "zebra", zebra_x);
        let (left, right) = if lion_x < zebra_x { (l, z) } else { (z, l) };
        g.add_edge("Left", left, right, Properties::new()).unwrap();
        g.add_edge("Right", right, left, Properties::new()).unwrap();
    };
    objects(&mut graph, a, 0.2, 0.7);
    objects(&mut graph, b, 0.8, 0.3);

    GoldenFixture {
        graph,
        lexicon,
        zebra: [z1, z2, z3],
        leopard,
        lion,
        lion_left_of_zebra: a,
        zebra_left_of_lion: b,
    }
}

pub fn node_rows(rows: &[Vec<Element>]) -> Vec<shotgraph_core::NodeId> {
    rows.iter().map(|r| r[0].node().unwrap()).collect()
}

/// Linearly separable vectors: positives satisfy `u·x >= margin`, negatives
/// `u·x <= -margin` for a random unit direction `u`. The component
/// orthogonal to `u` has expected norm `spread`. Returns
/// `(positives, negatives, u)`.
pub fn separable_set(
    positives: usize,
    negatives: usize,
    dim: usize,
    margin: f64,
    spread: f64,
    seed: u64,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<f64>) {
    use rand_distr::StandardNormal;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let n = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    u.iter_mut().for_each(|x| *x /= n);
    let draw = |sign: f64, rng: &mut ChaCha8Rng| {
        let scale = spread / (dim as f64).sqrt();
        let mut x: Vec<f64> = (0..dim).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
        let along: f64 = x.iter().zip(&u).map(|(a, b)| a * b).sum();
        let target = sign * (margin + 0.5 * rng.sample::<f64, _>(StandardNormal).abs());
        for (xi, ui) in x.iter_mut().zip(&u) {
            *xi += (target - along) * ui;
        }
        x
    };
    let pos = (0..positives).map(|_| draw(1.0, &mut rng)).collect();
    let neg = (0..negatives).map(|_| draw(-1.0, &mut rng)).collect();
    (pos, neg, u)
}

/// Perceptron run to convergence; `Some(epochs)` proves the two sets are
/// linearly separable.
pub fn perceptron_separates(pos: &[Vec<f64>], neg: &[Vec<f64>], max_epochs: usize) -> Option<usize> {
    let dim = pos[0].len();
    let mut w = vec![0.0; dim + 1];
    for epoch in 1..=max_epochs {
        let mut mistakes = 0;
        for (x, y) in pos.iter().map(|x| (x, 1.0)).chain(neg.iter().map(|x| (x, -1.0))) {
            let s: f64 = x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + w[dim];
            if y * s <= 0.0 {
                mistakes += 1;
                for (wi, xi) in w.iter_mut().zip(x) {
                    *wi += y * xi;
                }
                w[dim] += y;
            }
        }
        if mistakes == 0 {
            return Some(epoch);
        }
    }
    None
}

/// Archive of `shots` pooled shots over a two-level taxonomy (4 groups of 5
/// leaves under one root). Feature vectors cluster by leaf, leaves cluster
/// by group, and every shot gets a random positive scale. Each shot is
/// tagged with its leaf and sometimes with a second, random leaf.
pub fn similarity_archive(
    shots: usize,
    dim: usize,
    seed: u64,
) -> (shotgraph_core::FeatureStore, GraphStore, shotgraph_core::Lexicon) {
    use rand_distr::StandardNormal;
    use shotgraph_core::graph::EDGE_CATEGORY;
    use shotgraph_core::ShotRecord;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = |rng: &mut ChaCha8Rng| {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.into_iter().map(|x| x / n).collect::<Vec<f64>>()
    };
    let mut lex = String::from("S\tentity\tentity\n");
    let mut leaves = Vec::new();
    for g in 0..4 {
        lex.push_str(&format!("S\tgroup{g}\tgroup{g}\nR\tgroup{g}\t@\tentity\n"));
        let gc = unit(&mut rng);
        for k in 0..5 {
            let name = format!("leaf{g}_{k}");
            lex.push_str(&format!("S\t{name}\t{name}\nR\t{name}\t@\tgroup{g}\n"));
            let r = unit(&mut rng);
            let c: Vec<f64> = gc.iter().zip(&r).map(|(a, b)| a + 0.6 * b).collect();
            leaves.push((name, c));
        }
    }
    let mut graph = GraphStore::with_default_indexes();
    let mut lexicon = shotgraph_core::Lexicon::default();
    lexicon.load(&mut graph, lex.as_bytes()).unwrap();
    let store = shotgraph_core::FeatureStore::in_memory();

    let per_film = 100;
    let mut records: Vec<ShotRecord> = Vec::new();
    for i in 0..shots {
        let film = format!("arch{}", i / per_film);
        let leaf = rng.random_range(0..leaves.len());
        let noise = 0.3 / (dim as f64).sqrt();
        let scale = rng.random_range(0.5..5.0);
        let fv: Vec<f64> = leaves[leaf]
            .1
            .iter()
            .map(|c| scale * (c + noise * rng.sample::<f64, _>(StandardNormal)))
            .collect();
        let duration = rng.random_range(1..100) * 320;
        let node = graph
            .add_node(
                "Shot",
                props([("film_id", Value::from(film.as_str())), ("duration", Value::Int(duration))]),
            )
            .unwrap();
        let mut tags = vec![(leaf, rng.random_range(0.6..0.9))];
        if rng.random_bool(0.3) {
            let other = rng.random_range(0..leaves.len());
            if other != leaf {
                tags.push((other, rng.random_range(0.15..0.3)));
            }
        }
        for (t, w) in tags {
            let target = lexicon.synset_node(&leaves[t].0).unwrap();
            graph.add_edge(EDGE_CATEGORY, node, target, props([("weight", w)])).unwrap();
        }
        records.push(ShotRecord {
            shot_id: node,
            film_id: film,
            start_ordinal: 0,
            end_ordinal: 1,
            duration_ms: duration as u64,
            pooled_fv: fv,
            pooled_cv: Vec::new(),
        });
        if (i + 1) % per_film == 0 || i + 1 == shots {
            let film_id = records[0].film_id.clone();
            store.replace_film_shots(&film_id, std::mem::take(&mut records)).unwrap();
        }
    }
    (store, graph, lexicon)
}

/// Cosine distance computed the textbook way, for cross-checking.
pub fn cosine_oracle(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    1.0 - dot / (na * nb)
}
