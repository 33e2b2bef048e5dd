//! Adaptive repetition counting on a knee-angle timeseries.
//!
//! The angle series is mean-centred, and every flexion trough that sinks more than
//! `std_threshold` standard deviations below the mean becomes a candidate. Candidates
//! are then accepted deepest-first, rejecting any that fall within the minimum
//! exercise time of an already accepted one.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{read_metrics_column, validate_fps, DEFAULT_FPS};

pub const DEFAULT_STD_THRESHOLD: f64 = 0.5;
pub const DEFAULT_MIN_EXERCISE_SECONDS: f64 = 4.0;
pub const DEFAULT_COLUMN: &str = "right_knee_angle_deg";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CounterParams {
    /// Peak height threshold as a multiple of the centred series' standard deviation.
    pub std_threshold: f64,
    /// Minimum time between two repetitions.
    pub min_exercise_seconds: f64,
    pub fps: f64,
}

impl Default for CounterParams {
    fn default() -> Self {
        CounterParams {
            std_threshold: DEFAULT_STD_THRESHOLD,
            min_exercise_seconds: DEFAULT_MIN_EXERCISE_SECONDS,
            fps: DEFAULT_FPS,
        }
    }
}

impl CounterParams {
    pub fn validate(&self) -> Result<()> {
        validate_fps(self.fps)?;
        for (name, v) in [
            ("std_threshold", self.std_threshold),
            ("min_exercise_seconds", self.min_exercise_seconds),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        if self.min_distance_frames() < 1 {
            return Err(Error::InvalidParams(format!(
                "min_exercise_seconds {} at {} fps is shorter than one frame",
                self.min_exercise_seconds, self.fps
            )));
        }
        Ok(())
    }

    pub fn min_distance_frames(&self) -> u64 {
        (self.min_exercise_seconds * self.fps).round() as u64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rep {
    pub frame_index: u64,
    pub timestamp_s: f64,
    /// Centred angle at the trough; negative.
    pub peak_depth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExerciseIndex {
    pub count: usize,
    pub reps: Vec<Rep>,
}

impl ExerciseIndex {
    fn from_reps(reps: Vec<Rep>) -> Self {
        ExerciseIndex {
            count: reps.len(),
            reps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenteredSeries {
    /// `(frame_index, centred angle in degrees)`.
    pub values: Vec<(u64, f64)>,
    pub mean_removed: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl CenteredSeries {
    pub fn threshold(&self, std_threshold: f64) -> f64 {
        self.std * std_threshold
    }
}

/// Subtracts the arithmetic mean and records the population standard deviation.
pub fn center_series(angles: &[(u64, f64)]) -> Result<CenteredSeries> {
    if angles.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: angles.len(),
        });
    }
    if let Some((frame, v)) = angles.iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::Data(format!("non-finite angle {v} at frame {frame}")));
    }
    let n = angles.len() as f64;
    let naive = angles.iter().map(|(_, v)| v).sum::<f64>() / n;
    // second pass removes the rounding left in the naive mean
    let mean = naive + angles.iter().map(|(_, v)| v - naive).sum::<f64>() / n;

    let values: Vec<(u64, f64)> = angles.iter().map(|&(f, v)| (f, v - mean)).collect();
    let var = values.iter().map(|(_, v)| v * v).sum::<f64>() / n;
    Ok(CenteredSeries {
        values,
        mean_removed: mean,
        std: var.sqrt(),
    })
}

/// Positions of strict local minima; a flat-bottomed minimum reports its middle
/// sample (the left one of two middles). Endpoints never qualify.
fn local_minima(values: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    let n = values.len();
    if n < 3 {
        return out;
    }
    let mut i = 1;
    while i < n - 1 {
        if values[i - 1] > values[i] {
            let mut ahead = i + 1;
            while ahead < n - 1 && values[ahead] == values[i] {
                ahead += 1;
            }
            if values[ahead] > values[i] {
                out.push((i + ahead - 1) / 2);
            }
            i = ahead;
        } else {
            i += 1;
        }
    }
    out
}

/// Flexion troughs deeper than `std * std_threshold`, at least the minimum exercise
/// time apart on the original frame timeline.
pub fn find_negative_peaks(series: &CenteredSeries, params: &CounterParams) -> Result<ExerciseIndex> {
    params.validate()?;
    if series.std == 0.0 {
        return Ok(ExerciseIndex::from_reps(Vec::new()));
    }
    let threshold = series.threshold(params.std_threshold);
    let values: Vec<f64> = series.values.iter().map(|&(_, v)| v).collect();

    let mut candidates: Vec<usize> = local_minima(&values)
        .into_iter()
        .filter(|&i| -values[i] > threshold)
        .collect();
    // deepest first, earlier frame on ties
    candidates.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));

    let min_gap = params.min_distance_frames();
    let mut kept: Vec<usize> = Vec::new();
    for cand in candidates {
        let frame = series.values[cand].0;
        if kept.iter().all(|&k| series.values[k].0.abs_diff(frame) >= min_gap) {
            kept.push(cand);
        }
    }
    kept.sort_unstable();

    let reps = kept
        .into_iter()
        .map(|i| {
            let (frame_index, depth) = series.values[i];
            Rep {
                frame_index,
                timestamp_s: frame_index as f64 / params.fps,
                peak_depth: depth,
            }
        })
        .collect();
    Ok(ExerciseIndex::from_reps(reps))
}

/// Reads one angle column, drops missing rows, centres, and finds repetitions.
pub fn count_and_index(
    metrics_csv: impl AsRef<Path>,
    column: &str,
    params: &CounterParams,
) -> Result<(CenteredSeries, ExerciseIndex)> {
    params.validate()?;
    let path = metrics_csv.as_ref();
    let angles: Vec<(u64, f64)> = read_metrics_column(path, column)?
        .into_iter()
        .filter_map(|(f, v)| v.map(|v| (f, v)))
        .collect();
    if angles.is_empty() {
        return Err(Error::EmptySeries(format!(
            "no numeric `{column}` values in {}",
            path.display()
        )));
    }
    let centered = center_series(&angles)?;
    let index = find_negative_peaks(&centered, params)?;
    Ok((centered, index))
}
