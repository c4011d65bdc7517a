//! Shot boundary detection over sampled feature vectors.
//!
//! Distances between consecutive samples pass through a 4-tap FIR low-pass
//! filter; a sample starts a new shot when the filtered distance exceeds the
//! threshold. Boundaries are 0-based ordinals into the sampled sequence.

use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vector::{self, VectorError};

pub const DEFAULT_KERNEL: [f64; 4] = [0.1, 0.1, 0.1, 0.99];
pub const DEFAULT_TOLERANCE: usize = 5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SegmentError {
    #[error(transparent)]
    Vector(#[from] VectorError),
    #[error("filter window must hold 1 to 4 distances, got {0}")]
    BadWindow(usize),
    #[error("cannot segment an empty frame sequence")]
    EmptyInput,
    #[error("threshold must be a positive number, got {0}")]
    BadThreshold(f64),
    #[error("invalid boundaries: {0}")]
    BadBoundaries(String),
    #[error("line {line}: {reason}")]
    BadOrdinalFile { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    SquaredEuclidean,
    Cosine,
}

impl std::str::FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "squared_euclidean" | "sq_euclid" | "euclidean" => Ok(Metric::SquaredEuclidean),
            "cosine" => Ok(Metric::Cosine),
            other => Err(format!("unknown metric {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentationParams {
    pub threshold: f64,
    pub kernel: [f64; 4],
    pub metric: Metric,
}

impl SegmentationParams {
    pub fn with_threshold(threshold: f64) -> Self {
        Self {
            threshold,
            kernel: DEFAULT_KERNEL,
            metric: Metric::default(),
        }
    }
}

/// Start ordinals of every shot of one film.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotBoundaries {
    pub film_id: String,
    pub boundaries: Vec<usize>,
    pub sample_count: usize,
}

impl ShotBoundaries {
    pub fn new(
        film_id: impl Into<String>,
        boundaries: Vec<usize>,
        sample_count: usize,
    ) -> Result<Self, SegmentError> {
        let bad = |m: &str| Err(SegmentError::BadBoundaries(m.to_string()));
        if boundaries.first() != Some(&0) {
            return bad("first boundary must be 0");
        }
        if boundaries.windows(2).any(|w| w[0] >= w[1]) {
            return bad("boundaries must be strictly increasing");
        }
        if boundaries.last().is_some_and(|&b| b >= sample_count) {
            return bad("boundary beyond the last sample");
        }
        Ok(Self {
            film_id: film_id.into(),
            boundaries,
            sample_count,
        })
    }

    /// Half-open `[start, end)` sample intervals, one per shot.
    pub fn intervals(&self) -> Vec<(usize, usize)> {
        let ends = self
            .boundaries
            .iter()
            .skip(1)
            .copied()
            .chain(std::iter::once(self.sample_count));
        self.boundaries.iter().copied().zip(ends).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryScore {
    pub precision: f64,
    pub recall: f64,
    pub true_positives: usize,
    pub tolerance_frames: usize,
}

pub fn frame_distance(a: &[f64], b: &[f64], metric: Metric) -> Result<f64, SegmentError> {
    Ok(match metric {
        Metric::SquaredEuclidean => vector::squared_euclidean(a, b)?,
        Metric::Cosine => vector::cosine_distance(a, b)?,
    })
}

/// Dot the kernel with the window, left-padding the window with zeros to
/// length 4. The newest distance is last.
pub fn low_pass(window: &[f64], kernel: &[f64; 4]) -> Result<f64, SegmentError> {
    if window.is_empty() || window.len() > 4 {
        return Err(SegmentError::BadWindow(window.len()));
    }
    let offset = 4 - window.len();
    Ok(window
        .iter()
        .zip(&kernel[offset..])
        .map(|(d, k)| d * k)
        .sum())
}

/// Filtered distance for every ordinal `1..n`; entry `i - 1` belongs to ordinal `i`.
pub fn filtered_distances<V: AsRef<[f64]>>(
    fvs: &[V],
    kernel: &[f64; 4],
    metric: Metric,
) -> Result<Vec<f64>, SegmentError> {
    let mut raw: Vec<f64> = Vec::with_capacity(fvs.len().saturating_sub(1));
    let mut filtered = Vec::with_capacity(raw.capacity());
    for pair in fvs.windows(2) {
        raw.push(frame_distance(pair[1].as_ref(), pair[0].as_ref(), metric)?);
        let start = raw.len().saturating_sub(4);
        filtered.push(low_pass(&raw[start..], kernel)?);
    }
    Ok(filtered)
}

/// Scale-free default threshold: mean + 3 standard deviations of the film's
/// filtered distances.
pub fn calibrate_threshold<V: AsRef<[f64]>>(
    fvs: &[V],
    kernel: &[f64; 4],
    metric: Metric,
) -> Result<f64, SegmentError> {
    let df = filtered_distances(fvs, kernel, metric)?;
    Ok(threshold_from_filtered(&df))
}

fn threshold_from_filtered(df: &[f64]) -> f64 {
    if df.is_empty() {
        return f64::EPSILON;
    }
    let n = df.len() as f64;
    let mean = df.iter().sum::<f64>() / n;
    let var = df.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n;
    (mean + 3.0 * var.sqrt()).max(f64::EPSILON)
}

pub fn segment<V: AsRef<[f64]>>(
    film_id: &str,
    fvs: &[V],
    params: &SegmentationParams,
) -> Result<ShotBoundaries, SegmentError> {
    if fvs.is_empty() {
        return Err(SegmentError::EmptyInput);
    }
    if !(params.threshold.is_finite() && params.threshold > 0.0) {
        return Err(SegmentError::BadThreshold(params.threshold));
    }
    let df = filtered_distances(fvs, &params.kernel, params.metric)?;
    Ok(boundaries_above(film_id, &df, params.threshold, fvs.len()))
}

/// Segment with the threshold calibrated on the same film. Returns the
/// boundaries and the threshold that was used.
pub fn segment_auto<V: AsRef<[f64]>>(
    film_id: &str,
    fvs: &[V],
    kernel: &[f64; 4],
    metric: Metric,
) -> Result<(ShotBoundaries, f64), SegmentError> {
    if fvs.is_empty() {
        return Err(SegmentError::EmptyInput);
    }
    let df = filtered_distances(fvs, kernel, metric)?;
    let threshold = threshold_from_filtered(&df);
    Ok((boundaries_above(film_id, &df, threshold, fvs.len()), threshold))
}

fn boundaries_above(film_id: &str, df: &[f64], threshold: f64, n: usize) -> ShotBoundaries {
    let mut boundaries = vec![0];
    boundaries.extend(
        df.iter()
            .enumerate()
            .filter(|(_, &d)| d > threshold)
            .map(|(i, _)| i + 1),
    );
    ShotBoundaries {
        film_id: film_id.to_string(),
        boundaries,
        sample_count: n,
    }
}

/// Greedy one-to-one matching in ascending order: each predicted boundary
/// takes the earliest unmatched truth entry within `tolerance`.
pub fn evaluate_boundaries(predicted: &[usize], truth: &[usize], tolerance: usize) -> BoundaryScore {
    let mut predicted = predicted.to_vec();
    let mut truth = truth.to_vec();
    predicted.sort_unstable();
    truth.sort_unstable();

    let mut tp = 0;
    let mut j = 0;
    for &p in &predicted {
        while j < truth.len() && truth[j] + tolerance < p {
            j += 1;
        }
        if j < truth.len() && truth[j] <= p + tolerance {
            tp += 1;
            j += 1;
        }
    }
    let ratio = |den: usize| if den == 0 { 1.0 } else { tp as f64 / den as f64 };
    BoundaryScore {
        precision: ratio(predicted.len()),
        recall: ratio(truth.len()),
        true_positives: tp,
        tolerance_frames: tolerance,
    }
}

/// Plain-text ordinal list, one per line. Blank lines and `#` comments are skipped.
pub fn parse_ordinals<R: BufRead>(reader: R) -> Result<Vec<usize>, SegmentError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| SegmentError::BadOrdinalFile {
            line: i + 1,
            reason: e.to_string(),
        })?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        out.push(t.parse().map_err(|_| SegmentError::BadOrdinalFile {
            line: i + 1,
            reason: format!("not a non-negative integer: {t:?}"),
        })?);
    }
    Ok(out)
}
