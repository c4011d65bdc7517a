#![allow(dead_code)]

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::Value as Json;
use shotgraph_core::feature_store::synth::{generate_synthetic_film, SynthSpec, SyntheticFilm};
use shotgraph_core::{Archive, ClassMap, IndexParams, NodeId, SalientAnnotation, SegmentOptions};
use tower::ServiceExt;

pub const LEXICON: &str = "\
S\tentity\tentity
S\tanimal\tanimal
S\tobject\tobject
S\tbig_cat\tbig_cat
S\tequine\tequine
S\tlion\tlion
S\tleopard\tleopard
S\tcheetah\tcheetah
S\tzebra\tzebra
S\thorse\thorse
S\tdog\tdog
S\tcat\tcat
S\tcar\tcar
S\ttree\ttree
S\thouse\thouse
R\tanimal\t@\tentity
R\tobject\t@\tentity
R\tbig_cat\t@\tanimal
R\tequine\t@\tanimal
R\tlion\t@\tbig_cat
R\tleopard\t@\tbig_cat
R\tcheetah\t@\tbig_cat
R\tzebra\t@\tequine
R\thorse\t@\tequine
R\tdog\t@\tanimal
R\tcat\t@\tanimal
R\tcar\t@\tobject
R\ttree\t@\tobject
R\thouse\t@\tobject
";

/// Class slot order of the synthetic films.
pub const CLASSES: [&str; 10] = [
    "zebra", "lion", "leopard", "cheetah", "horse", "dog", "cat", "car", "tree", "house",
];

pub fn class_map() -> ClassMap {
    ClassMap::new(CLASSES.iter().map(|s| s.to_string()).collect())
}

fn ann(lemma: &str, x: f64, y: f64) -> SalientAnnotation {
    SalientAnnotation {
        lemma: lemma.into(),
        bbox: [x, y, 0.1, 0.1],
        confidence: 0.9,
    }
}

/// Synthetic film with two annotated shots: shot 5 shows a lion left of a
/// zebra, shot 9 a zebra left of a lion.
pub fn annotated_film(seed: u64) -> SyntheticFilm {
    let mut film = generate_synthetic_film(&SynthSpec::new(20, 12, 64, 10).seed(seed).film_id("film1"));
    film.film.frames[5 * 12 + 2].salient = vec![ann("lion", 0.1, 0.4), ann("zebra", 0.6, 0.4)];
    film.film.frames[9 * 12].salient = vec![ann("zebra", 0.2, 0.5), ann("lion", 0.7, 0.3)];
    film
}

pub struct Fixture {
    pub archive: Arc<Archive>,
    pub film: SyntheticFilm,
    /// Graph ids of the film's shots in order.
    pub shots: Vec<NodeId>,
}

/// An in-memory archive with the annotated film ingested, segmented and
/// indexed.
pub fn fixture() -> Fixture {
    let archive = Archive::in_memory();
    let film = annotated_film(1);
    archive.ingest(film.to_stream().as_bytes(), false).unwrap();
    archive.load_lexicon(LEXICON.as_bytes()).unwrap();
    let report = archive.segment("film1", SegmentOptions::default()).unwrap();
    assert_eq!(report.boundaries, film.truth);
    archive.index("film1", IndexParams::default(), Some(class_map())).unwrap();
    let mut shots: Vec<_> = archive.store().shots().iter().map(|s| (s.start_ordinal, s.shot_id)).collect();
    shots.sort();
    Fixture {
        archive: Arc::new(archive),
        film,
        shots: shots.into_iter().map(|(_, id)| id).collect(),
    }
}

pub fn app(archive: Arc<Archive>) -> Router {
    shotgraph_cli::router(shotgraph_cli::AppState::new(archive))
}

/// One request through the router; the body is parsed as JSON when possible.
pub async fn exchange(app: &Router, method: Method, uri: &str, body: impl Into<String>) -> (StatusCode, Json) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .body(Body::from(body.into()))
        .unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    let value = serde_json::from_slice(&bytes).unwrap_or_else(|_| Json::String(String::from_utf8_lossy(&bytes).into_owned()));
    (status, value)
}

pub async fn get(app: &Router, uri: &str) -> (StatusCode, Json) {
    exchange(app, Method::GET, uri, "").await
}

pub async fn post(app: &Router, uri: &str, body: impl Into<String>) -> (StatusCode, Json) {
    exchange(app, Method::POST, uri, body).await
}

pub fn json<T: serde::Serialize>(v: &T) -> Json {
    serde_json::to_value(v).unwrap()
}

/// Positive sample lines for the classifier endpoint.
pub fn vector_lines(vs: &[Vec<f64>]) -> String {
    vs.iter().map(|v| format!("{}\n", serde_json::json!({ "fv": v }))).collect()
}
