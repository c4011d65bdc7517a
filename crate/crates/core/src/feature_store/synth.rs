//! Deterministic synthetic films with known shot boundaries.
//!
//! Each shot's feature vectors scatter around their own cluster center.
//! When there are no more shots than dimensions the centers are mutually
//! orthogonal and every pair sits exactly `separation` apart; otherwise they
//! are random directions at the same radius. Noise vectors have expected
//! L2 norm `noise`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{write_stream, Film, FilmMeta, FrameRecord};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub film_id: String,
    pub shots: usize,
    pub samples_per_shot: usize,
    pub feature_dim: usize,
    pub class_count: usize,
    pub separation: f64,
    pub noise: f64,
    pub seed: u64,
    pub fps: f64,
    pub sampling_period_ms: u64,
}

impl SynthSpec {
    pub fn new(shots: usize, samples_per_shot: usize, feature_dim: usize, class_count: usize) -> Self {
        Self {
            film_id: "synthetic".into(),
            shots,
            samples_per_shot,
            feature_dim,
            class_count,
            separation: 10.0,
            noise: 0.5,
            seed: 0,
            fps: 25.0,
            sampling_period_ms: 320,
        }
    }

    pub fn separation(mut self, separation: f64) -> Self {
        self.separation = separation;
        self
    }

    pub fn noise(mut self, noise: f64) -> Self {
        self.noise = noise;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn film_id(mut self, id: impl Into<String>) -> Self {
        self.film_id = id.into();
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.shots == 0 || self.samples_per_shot == 0 {
            return Err("shot and sample counts must be positive".into());
        }
        if self.feature_dim == 0 || self.class_count == 0 {
            return Err("feature_dim and class_count must be positive".into());
        }
        if !(self.separation.is_finite() && self.separation > 0.0) {
            return Err("separation must be positive".into());
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return Err("noise must be non-negative".into());
        }
        if !self.fps.is_finite() || self.fps <= 0.0 || self.sampling_period_ms == 0 {
            return Err("fps and sampling period must be positive".into());
        }
        if !crate::feature_store::valid_film_id(&self.film_id) {
            return Err(format!("invalid film id {:?}", self.film_id));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticFilm {
    pub film: Film,
    /// First sample ordinal of every shot.
    pub truth: Vec<usize>,
    /// Dominant class slot of every shot.
    pub dominant_classes: Vec<usize>,
    pub centers: Vec<Vec<f64>>,
}

impl SyntheticFilm {
    pub fn to_stream(&self) -> String {
        let mut buf = Vec::new();
        write_stream(&self.film, &mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("stream is UTF-8")
    }
}

/// Generate a film per `spec`.
///
/// # Panics
///
/// If `spec.validate()` fails.
pub fn generate_synthetic_film(spec: &SynthSpec) -> SyntheticFilm {
    if let Err(e) = spec.validate() {
        panic!("invalid synthetic film spec: {e}");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let dim = spec.feature_dim;
    let centers = cluster_centers(&mut rng, spec.shots, dim, spec.separation);

    let mut dominant_classes = Vec::with_capacity(spec.shots);
    for k in 0..spec.shots {
        let mut class = rng.random_range(0..spec.class_count);
        if spec.class_count > 1 && k > 0 && class == dominant_classes[k - 1] {
            class = (class + 1 + rng.random_range(0..spec.class_count - 1)) % spec.class_count;
        }
        dominant_classes.push(class);
    }

    let meta = FilmMeta {
        film_id: spec.film_id.clone(),
        title: format!("Synthetic film {}", spec.seed),
        fps: spec.fps,
        frame_count: 0,
        feature_dim: dim,
        class_count: spec.class_count,
        sampling_period_ms: spec.sampling_period_ms,
    };
    let stride = meta.frame_stride().max(1);
    let component_sigma = spec.noise / (dim as f64).sqrt();

    let mut frames = Vec::with_capacity(spec.shots * spec.samples_per_shot);
    let mut truth = Vec::with_capacity(spec.shots);
    for (center, &class) in centers.iter().zip(&dominant_classes) {
        truth.push(frames.len());
        for _ in 0..spec.samples_per_shot {
            let ordinal = frames.len() as u64;
            let fv = center
                .iter()
                .map(|c| c + component_sigma * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let cv = class_row(&mut rng, spec.class_count, class);
            frames.push(FrameRecord {
                frame_index: ordinal * stride,
                timestamp_ms: ordinal * spec.sampling_period_ms,
                fv,
                cv,
                salient: Vec::new(),
            });
        }
    }

    let mut meta = meta;
    meta.frame_count = frames.len() as u64 * stride;
    SyntheticFilm {
        film: Film { meta, frames },
        truth,
        dominant_classes,
        centers,
    }
}

fn cluster_centers(rng: &mut ChaCha8Rng, count: usize, dim: usize, separation: f64) -> Vec<Vec<f64>> {
    let radius = separation / std::f64::consts::SQRT_2;
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(count);
    while basis.len() < count {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        if basis.len() < dim {
            for b in &basis {
                let proj: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= proj * y);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-9 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        basis.push(v);
    }
    basis
        .into_iter()
        .map(|v| v.into_iter().map(|x| x * radius).collect())
        .collect()
}

fn class_row(rng: &mut ChaCha8Rng, classes: usize, dominant: usize) -> Vec<f64> {
    let top = 0.7 + rng.random_range(-0.05..0.05);
    if classes == 1 {
        return vec![top];
    }
    let rest: Vec<f64> = (0..classes - 1).map(|_| rng.random::<f64>()).collect();
    let total: f64 = rest.iter().sum::<f64>().max(1e-12);
    let budget = (1.0 - top) * 0.8;
    let mut others = rest.into_iter().map(|w| w / total * budget);
    (0..classes)
        .map(|j| if j == dominant { top } else { others.next().unwrap() })
        .collect()
}
