//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;
mod support;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use axum::http::{Method, StatusCode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde_json::{json, Value as Json};
use shotgraph_core::feature_store::synth::{generate_synthetic_film, SynthSpec};
use shotgraph_core::indexer::{pool_shot, POOL_FRAMES};
use shotgraph_core::query::{self, parse};
use shotgraph_core::retrieval::{search_by_shot, train_classifier, TrainParams};
use shotgraph_core::segmenter::{
    evaluate_boundaries, low_pass, segment, segment_auto, SegmentationParams, DEFAULT_KERNEL,
};
use shotgraph_core::vector::cosine_distance;
use shotgraph_core::{
    Archive, FrameRecord, IndexParams, Metric, Page, PoolMode, SegmentOptions, SpatialRelation,
};

/// Numeric agreement demanded of every oracle comparison.
const TOL: f64 = 1e-12;
const SEGMENT_BUDGET: Duration = Duration::from_secs(1);
const QUERY_BUDGET: Duration = Duration::from_secs(30);
const TRAIN_BUDGET: Duration = Duration::from_secs(1);
const MIN_PRECISION: f64 = 0.95;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn segmentation_exactness() -> Outcome {
    let mut worst = Duration::ZERO;
    let mut runs = 0;
    // Separation 10 against noise norms 0.8 and 0.5: ratios 12.5 and 20.
    for noise in [0.8, 0.5] {
        for seed in 0..10 {
            let spec = SynthSpec::new(20, 12, 64, 10).separation(10.0).noise(noise).seed(seed);
            let film = generate_synthetic_film(&spec);
            let fvs: Vec<&[f64]> = film.film.frames.iter().map(|f| f.fv.as_slice()).collect();
            let start = Instant::now();
            let (b, t) =
                segment_auto("synthetic", &fvs, &DEFAULT_KERNEL, Metric::SquaredEuclidean).map_err(|e| e.to_string())?;
            worst = worst.max(start.elapsed());
            let score = evaluate_boundaries(&b.boundaries, &film.truth, 0);
            ensure(score.precision == 1.0 && score.recall == 1.0, || {
                format!("noise {noise}, seed {seed}: threshold {t}, precision {} recall {}", score.precision, score.recall)
            })?;
            runs += 1;
        }
    }
    ensure(worst < SEGMENT_BUDGET, || format!("slowest run {worst:?}"))?;
    Ok(format!(
        "{runs} films of 20x12, D=64, separation/noise 12.5 and 20, auto threshold: precision 1, recall 1 at tolerance 0; slowest {worst:?}"
    ))
}

fn filter_fidelity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let oracle = |w: &[f64], k: &[f64; 4]| {
        let mut padded = [0.0; 4];
        padded[4 - w.len()..].copy_from_slice(w);
        k[0] * padded[0] + k[1] * padded[1] + k[2] * padded[2] + k[3] * padded[3]
    };
    let mut worst: f64 = 0.0;
    for i in 0..1000 {
        let kernel = if i % 2 == 0 {
            DEFAULT_KERNEL
        } else {
            [rng.random(), rng.random(), rng.random(), rng.random()]
        };
        let w: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..100.0)).collect();
        let got = low_pass(&w, &kernel).map_err(|e| e.to_string())?;
        worst = worst.max((got - oracle(&w, &kernel)).abs());
    }
    ensure(worst <= TOL, || format!("max deviation {worst:e}"))?;
    for len in 1..=3 {
        for _ in 0..100 {
            let w: Vec<f64> = (0..len).map(|_| rng.random_range(0.0..100.0)).collect();
            let got = low_pass(&w, &DEFAULT_KERNEL).map_err(|e| e.to_string())?;
            let expected = oracle(&w, &DEFAULT_KERNEL);
            ensure((got - expected).abs() <= TOL, || format!("window {w:?}: {got} vs {expected}"))?;
        }
    }
    ensure(low_pass(&[], &DEFAULT_KERNEL).is_err() && low_pass(&[0.0; 5], &DEFAULT_KERNEL).is_err(), || {
        "empty or oversized window accepted".into()
    })?;
    Ok(format!("1000 windows, max deviation {worst:e}; zero padding verified for lengths 1-3"))
}

fn threshold_monotonicity() -> Outcome {
    let mut violations = 0;
    let mut checks = 0;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let dim = rng.random_range(1..16);
        let n = rng.random_range(2..80);
        let mut x: Vec<f64> = vec![0.0; dim];
        let stream: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let jump = if rng.random_bool(0.1) { 5.0 } else { 0.3 };
                for v in x.iter_mut() {
                    *v += jump * rng.sample::<f64, _>(StandardNormal);
                }
                x.clone()
            })
            .collect();
        let metric = if seed % 3 == 0 { Metric::Cosine } else { Metric::SquaredEuclidean };
        let mut prev: Option<BTreeSet<usize>> = None;
        let mut t = rng.random_range(1e-3..0.5);
        for _ in 0..10 {
            let params = SegmentationParams {
                threshold: t,
                kernel: DEFAULT_KERNEL,
                metric,
            };
            let k: BTreeSet<usize> = segment("s", &stream, &params).map_err(|e| e.to_string())?.boundaries.into_iter().collect();
            if let Some(p) = &prev {
                checks += 1;
                if !k.is_subset(p) {
                    violations += 1;
                }
            }
            prev = Some(k);
            t += rng.random_range(1e-3..20.0);
        }
    }
    ensure(violations == 0, || format!("{violations} violations"))?;
    Ok(format!("100 streams x 10 thresholds, {checks} inclusions checked, 0 violations"))
}

fn query_oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut nonempty = 0;
    for seed in 0..100 {
        let g = common::random_graph(seed, 30, 60);
        for t in common::TEMPLATES {
            let q = parse(t).map_err(|e| format!("{t}: {e}"))?;
            let got: Vec<Vec<_>> = query::execute(&q, &g)
                .map_err(|e| e.to_string())?
                .rows
                .into_iter()
                .map(|r| r.0)
                .collect();
            let expected = common::brute_force(&q, &g);
            ensure(got == expected, || format!("graph {seed}, `{t}`: {} rows vs oracle {}", got.len(), expected.len()))?;
            nonempty += usize::from(!got.is_empty());
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < QUERY_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!("100 graphs x 20 templates identical to exhaustive matcher ({nonempty} non-empty), {elapsed:?}"))
}

fn golden_queries() -> Outcome {
    let fx = common::golden_fixture();
    let run = |text: &str| -> Result<Vec<_>, String> {
        let q = parse(text).map_err(|e| e.to_string())?;
        let rows: Vec<Vec<_>> = query::execute(&q, &fx.graph).map_err(|e| e.to_string())?.rows.into_iter().map(|r| r.0).collect();
        let oracle = common::brute_force(&q, &fx.graph);
        ensure(rows == oracle, || format!("engine and oracle disagree on\n{text}"))?;
        Ok(common::node_rows(&rows))
    };
    let keyword = run(common::KEYWORD_QUERY)?;
    let expected_keyword = vec![fx.zebra_left_of_lion, fx.lion_left_of_zebra, fx.zebra[2], fx.zebra[0]];
    ensure(keyword == expected_keyword, || format!("keyword query returned {keyword:?}"))?;
    let hyper = run(common::HYPERNYM_QUERY)?;
    ensure(hyper.contains(&fx.leopard), || format!("hypernym query misses the leopard shot: {hyper:?}"))?;
    ensure(hyper == vec![fx.zebra_left_of_lion, fx.lion_left_of_zebra, fx.leopard, fx.lion], || {
        format!("hypernym query returned {hyper:?}")
    })?;
    let spatial = run(common::SPATIAL_QUERY)?;
    ensure(spatial.is_empty(), || format!("uncorrected spatial query returned {spatial:?}"))?;
    let spatial_fixed = run(common::SPATIAL_QUERY_FIXED)?;
    ensure(spatial_fixed == vec![fx.zebra_left_of_lion], || format!("corrected spatial query returned {spatial_fixed:?}"))?;
    Ok("keyword and hypernym texts match the exhaustive matcher and expected shots (cheetah finds leopard); \
        the spatial text as written is empty, its corrected form returns the zebra-left-of-lion shot"
        .into())
}

fn similarity_soundness() -> Outcome {
    let (store, graph, lexicon) = common::similarity_archive(5000, 64, 21);
    let shots = store.shots();
    let mut pruned_total = 0;
    let mut full_total = 0;
    for probe in shots.iter().step_by(shots.len() / 50).take(50) {
        let mut scan: Vec<_> = shots
            .iter()
            .filter(|s| s.shot_id != probe.shot_id)
            .map(|s| (s.shot_id, common::cosine_oracle(&probe.pooled_fv, &s.pooled_fv)))
            .filter(|(_, d)| *d <= 0.3)
            .collect();
        scan.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        let scan_ids: BTreeSet<_> = scan.iter().map(|(id, _)| *id).collect();

        let pruned = search_by_shot(&store, &graph, &lexicon, probe.shot_id, 0.3, 1).map_err(|e| e.to_string())?;
        ensure(pruned.iter().all(|h| scan_ids.contains(&h.shot_id)), || {
            format!("probe {}: pruned result outside the scan", probe.shot_id)
        })?;
        ensure(pruned.windows(2).all(|w| w[0].score <= w[1].score), || {
            format!("probe {}: not ordered by distance", probe.shot_id)
        })?;
        let full = search_by_shot(&store, &graph, &lexicon, probe.shot_id, 0.3, 2).map_err(|e| e.to_string())?;
        let full_ids: Vec<_> = full.iter().map(|h| h.shot_id).collect();
        let scan_order: Vec<_> = scan.iter().map(|(id, _)| *id).collect();
        ensure(full_ids == scan_order, || format!("probe {}: full-depth result differs from scan", probe.shot_id))?;
        for (h, (_, d)) in full.iter().zip(&scan) {
            ensure((h.score - d).abs() <= 1e-9, || format!("distance {} vs {}", h.score, d))?;
        }
        pruned_total += pruned.len();
        full_total += full.len();
    }

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..1000 {
        let dim = rng.random_range(1..64);
        let a: Vec<f64> = (0..dim).map(|_| rng.random_range(-10.0..10.0)).collect();
        let b: Vec<f64> = (0..dim).map(|_| rng.random_range(-10.0..10.0)).collect();
        let k = rng.random_range(0.01..100.0);
        let ab = cosine_distance(&a, &b).map_err(|e| e.to_string())?;
        let ba = cosine_distance(&b, &a).map_err(|e| e.to_string())?;
        let aa = cosine_distance(&a, &a).map_err(|e| e.to_string())?;
        let ka: Vec<f64> = a.iter().map(|x| x * k).collect();
        let kab = cosine_distance(&ka, &b).map_err(|e| e.to_string())?;
        ensure((ab - ba).abs() <= TOL, || format!("asymmetric: {ab} vs {ba}"))?;
        ensure(aa.abs() <= TOL, || format!("self distance {aa}"))?;
        ensure((ab - kab).abs() <= TOL, || format!("scale changed distance: {ab} vs {kab}"))?;
        ensure((ab - common::cosine_oracle(&a, &b)).abs() <= TOL, || "disagrees with oracle".into())?;
    }
    Ok(format!(
        "5000 shots, 50 probes: depth 1 kept {pruned_total} of {full_total} in-threshold shots, all sound and ordered; \
         full depth equals the scan; 1000 cosine property cases within {TOL:e}"
    ))
}

fn classifier() -> Outcome {
    let (mut pos, mut neg, _) = common::separable_set(400, 4000, 64, 1.0, 1.0, 3);
    let (test_pos, test_neg) = (pos.split_off(200), neg.split_off(2000));
    let epochs = common::perceptron_separates(&pos, &neg, 1000).ok_or("training set is not separable")?;
    let params = TrainParams {
        positive_weight: 200.0,
        epochs: 3,
        learning_rate: 0.5,
        seed: 17,
        ..TrainParams::default()
    };
    let start = Instant::now();
    let model = train_classifier(&pos, &neg, &params).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let again = train_classifier(&pos, &neg, &params).map_err(|e| e.to_string())?;
    let tp = test_pos.iter().filter(|x| model.margin(x) > 0.0).count();
    let fp = test_neg.iter().filter(|x| model.margin(x) > 0.0).count();
    let precision = tp as f64 / (tp + fp).max(1) as f64;
    ensure(tp > 0 && precision >= MIN_PRECISION, || format!("held-out precision {precision} (tp {tp}, fp {fp})"))?;
    let l = &model.epoch_losses;
    ensure(l.len() == 3 && l.windows(2).all(|w| w[1] < w[0]), || format!("losses {l:?}"))?;
    ensure(elapsed < TRAIN_BUDGET, || format!("training took {elapsed:?}"))?;
    let bits = |m: &shotgraph_core::ClassifierModel| -> Vec<u64> {
        m.weights.iter().chain([&m.bias]).map(|v| v.to_bits()).collect()
    };
    ensure(bits(&model) == bits(&again), || "same seed gave different weights".into())?;
    Ok(format!(
        "200/2000 separable (perceptron converged in {epochs} epochs); held-out precision {precision:.4} \
         (tp {tp}, fp {fp}); losses {:.3e} > {:.3e} > {:.3e}; {elapsed:?}; bit-identical rerun",
        l[0], l[1], l[2]
    ))
}

fn pooling() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for n in [1usize, 9, 10, 11, 25] {
        let frames: Vec<FrameRecord> = (0..n)
            .map(|i| FrameRecord {
                frame_index: i as u64 * 8,
                timestamp_ms: i as u64 * 320,
                fv: (0..16).map(|_| rng.random_range(-5.0..5.0)).collect(),
                cv: (0..6).map(|_| rng.random::<f64>()).collect(),
                salient: Vec::new(),
            })
            .collect();
        let k = n.min(POOL_FRAMES);
        let head = &frames[..k];
        let mean = |get: &dyn Fn(&FrameRecord) -> &Vec<f64>, i: usize| head.iter().map(|f| get(f)[i]).sum::<f64>() / k as f64;
        let max = |get: &dyn Fn(&FrameRecord) -> &Vec<f64>, i: usize| head.iter().map(|f| get(f)[i]).fold(f64::NEG_INFINITY, f64::max);
        let (afv, acv) = pool_shot(&frames, PoolMode::Avg).map_err(|e| e.to_string())?;
        let (mfv, mcv) = pool_shot(&frames, PoolMode::Max).map_err(|e| e.to_string())?;
        for i in 0..16 {
            ensure((afv[i] - mean(&|f| &f.fv, i)).abs() <= TOL, || format!("N={n} avg fv[{i}]"))?;
            ensure(mfv[i] == max(&|f| &f.fv, i), || format!("N={n} max fv[{i}]"))?;
        }
        for i in 0..6 {
            ensure((acv[i] - mean(&|f| &f.cv, i)).abs() <= TOL, || format!("N={n} avg cv[{i}]"))?;
            ensure(mcv[i] == max(&|f| &f.cv, i), || format!("N={n} max cv[{i}]"))?;
        }
        if n > POOL_FRAMES {
            // Frames past the window must not matter.
            let mut altered = frames.clone();
            for f in &mut altered[POOL_FRAMES..] {
                f.fv.iter_mut().for_each(|v| *v = 1e6);
            }
            ensure(pool_shot(&altered, PoolMode::Max).map_err(|e| e.to_string())?.0 == mfv, || {
                format!("N={n}: frames beyond {POOL_FRAMES} changed the pool")
            })?;
        }
    }
    Ok(format!("avg/max equal mean/max oracles within {TOL:e} for N in 1, 9, 10, 11, 25 (window min(10, N))"))
}

fn end_to_end() -> Outcome {
    let archive = Archive::in_memory();
    let film = support::annotated_film(2);
    archive.ingest(film.to_stream().as_bytes(), false).map_err(|e| e.to_string())?;
    archive.load_lexicon(support::LEXICON.as_bytes()).map_err(|e| e.to_string())?;
    let report = archive.segment("film1", SegmentOptions::default()).map_err(|e| e.to_string())?;
    ensure(report.boundaries == film.truth, || format!("segmentation {:?}", report.boundaries))?;
    archive
        .index("film1", IndexParams::default(), Some(support::class_map()))
        .map_err(|e| e.to_string())?;

    let mut by_start: Vec<_> = archive.store().shots().iter().map(|s| (s.start_ordinal, s.shot_id)).collect();
    by_start.sort();
    let classes: BTreeSet<usize> = film.dominant_classes.iter().copied().collect();
    for &c in &classes {
        let hits: BTreeSet<_> = archive
            .search_keyword(support::CLASSES[c], 0.1, Page::default())
            .map_err(|e| e.to_string())?
            .results
            .iter()
            .map(|r| r.shot_id)
            .collect();
        let planted: Vec<_> = film
            .dominant_classes
            .iter()
            .enumerate()
            .filter(|(_, &d)| d == c)
            .map(|(i, _)| by_start[i].1)
            .collect();
        ensure(planted.iter().all(|s| hits.contains(s)), || {
            format!("class {}: planted {planted:?}, found {hits:?}", support::CLASSES[c])
        })?;
    }

    let archive = std::sync::Arc::new(archive);
    let app = support::app(archive.clone());
    let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().map_err(|e| e.to_string())?;
    let shot = by_start[5].1;
    let keyword = common::KEYWORD_QUERY;
    let positives: Vec<Vec<f64>> = film.film.frames[..6].iter().map(|f| f.fv.clone()).collect();
    let exchanges = rt.block_on(async {
        let mut out: Vec<(String, (StatusCode, Json), Json)> = Vec::new();
        let a = &archive;
        let mut record = |name: &str, got: (StatusCode, Json), expected: Json| out.push((name.to_string(), got, expected));
        record("GET /health", support::get(&app, "/health").await, json!({"status": "ok"}));
        record(
            "GET /search",
            support::get(&app, "/search?q=zebra").await,
            support::json(&a.search_keyword("zebra", 0.1, Page::default()).unwrap()),
        );
        record(
            "GET /search hypernym",
            support::get(&app, "/search?q=cheetah&hypernym=1&limit=5").await,
            support::json(&a.search_hypernym("cheetah", 0.1, Page { skip: 0, limit: Some(5) }).unwrap()),
        );
        record(
            "GET /search/spatial",
            support::get(&app, "/search/spatial?a=lion&rel=Left&b=zebra").await,
            support::json(&a.search_spatial("lion", SpatialRelation::Left, "zebra", Page::default()).unwrap()),
        );
        record(
            "GET /shots/{id}",
            support::get(&app, &format!("/shots/{}", shot.0)).await,
            support::json(&a.shot_info(shot).unwrap()),
        );
        record(
            "GET /shots/{id}/similar",
            support::get(&app, &format!("/shots/{}/similar?threshold=1.5&depth=2", shot.0)).await,
            json!({ "results": support::json(&a.similar(shot, 1.5, 2).unwrap()) }),
        );
        record(
            "POST /query",
            support::post(&app, "/query", keyword).await,
            support::json(&a.query(keyword).unwrap()),
        );
        let trained = support::post(&app, "/classifiers?negatives=10&seed=1", support::vector_lines(&positives)).await;
        let id = trained.1["classifier_id"].as_str().unwrap_or("?").to_string();
        let model = a.classifier(&id).ok();
        record(
            "POST /classifiers",
            trained,
            model.map_or(Json::Null, |m| {
                json!({ "classifier_id": id, "positives": m.positives, "negatives": m.negatives, "epoch_losses": m.epoch_losses })
            }),
        );
        record(
            "GET /classifiers/{id}/results",
            support::get(&app, &format!("/classifiers/{id}/results")).await,
            json!({ "results": support::json(&a.classifier_results(&id).unwrap_or_default()) }),
        );
        record(
            "POST /films/{id}/segment",
            support::exchange(&app, Method::POST, "/films/film1/segment", "").await,
            support::json(&a.segment("film1", SegmentOptions::default()).unwrap()),
        );
        out
    });
    for (name, (status, body), expected) in &exchanges {
        ensure(*status == StatusCode::OK && body == expected, || format!("{name}: {status} {body}"))?;
    }
    Ok(format!(
        "every planted shot found under its dominant class ({} classes); {} HTTP exchanges equal library results",
        classes.len(),
        exchanges.len()
    ))
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 9] = [
        ("segmentation exactness", segmentation_exactness),
        ("filter fidelity", filter_fidelity),
        ("threshold monotonicity", threshold_monotonicity),
        ("query-engine oracle equivalence", query_oracle_equivalence),
        ("golden query texts", golden_queries),
        ("similarity-search soundness", similarity_soundness),
        ("classifier", classifier),
        ("pooling", pooling),
        ("end-to-end pipeline", end_to_end),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail} [{:?}]", start.elapsed()),
            Err(reason) => {
                failed += 1;
                println!("FAIL  {name}: {reason} [{:?}]", start.elapsed());
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
