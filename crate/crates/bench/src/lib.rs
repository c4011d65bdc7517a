//! Fixtures shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shotgraph_core::feature_store::synth::{generate_synthetic_film, SynthSpec};
use shotgraph_core::{Archive, ClassMap, IndexParams, SegmentOptions};

pub const CLASSES: usize = 12;

/// Three groups of four leaf classes under one root.
pub fn lexicon() -> String {
    let mut out = String::from("S\troot\troot\n");
    for g in 0..3 {
        out.push_str(&format!("S\tgroup{g}\tgroup{g}\nR\tgroup{g}\t@\troot\n"));
        for k in 0..4 {
            let leaf = format!("class{}", g * 4 + k);
            out.push_str(&format!("S\t{leaf}\t{leaf}\nR\t{leaf}\t@\tgroup{g}\n"));
        }
    }
    out
}

pub fn class_map() -> ClassMap {
    ClassMap::new((0..CLASSES).map(|i| format!("class{i}")).collect())
}

/// An in-memory archive of `films` synthetic films, each segmented and
/// indexed, `shots_per_film` shots of 12 samples.
pub fn indexed_archive(films: usize, shots_per_film: usize, dim: usize) -> Archive {
    let archive = Archive::in_memory();
    archive.load_lexicon(lexicon().as_bytes()).unwrap();
    archive.set_class_map(class_map()).unwrap();
    for f in 0..films {
        let spec = SynthSpec::new(shots_per_film, 12, dim, CLASSES)
            .seed(f as u64)
            .film_id(format!("film{f}"));
        let film = generate_synthetic_film(&spec);
        let id = spec.film_id.clone();
        archive.ingest(film.to_stream().as_bytes(), false).unwrap();
        let threshold = Some(spec.separation * spec.separation / 2.0);
        archive
            .segment(&id, SegmentOptions { threshold, ..Default::default() })
            .unwrap();
        archive.index(&id, IndexParams::default(), None).unwrap();
    }
    archive
}

/// Two Gaussian blobs `2·offset` apart along the first axis.
pub fn blobs(pos: usize, neg: usize, dim: usize, offset: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |sign: f64| -> Vec<f64> {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        v[0] += sign * offset;
        v
    };
    let p = (0..pos).map(|_| draw(1.0)).collect();
    let n = (0..neg).map(|_| draw(-1.0)).collect();
    (p, n)
}
