//! Python bindings for `kneerehab`.
//!
//! Points are `(x, y, z)` tuples, angle series are lists of floats indexed by frame,
//! and enum arguments are strings (`"sagittal"`/`"frontal"`, `"left"`/`"right"`).

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyOSError, PyValueError};
use pyo3::prelude::*;

use kneerehab::counter::{center_series, count_and_index, find_negative_peaks, CounterParams, ExerciseIndex};
use kneerehab::kinematics::{angle_law_of_cosines, angle_right_triangle_decomposition, AngleParams, Point3};
use kneerehab::model::{KneeSide, ViewPlane, DEFAULT_VISIBILITY_MIN};
use kneerehab::session::{self, AnalyzeConfig, SessionReport};
use kneerehab::synth::{self, Distractor, PoseOptions, SynthSpec};
use kneerehab::Error;

create_exception!(kneerehab_py, KneeRehabError, PyException);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        Error::InvalidParams(_) | Error::InvalidSpec(_) => PyValueError::new_err(e.to_string()),
        other => KneeRehabError::new_err(other.to_string()),
    }
}

type Triple = (f64, f64, f64);

fn pt((x, y, z): Triple) -> Point3 {
    Point3::new(x, y, z)
}

fn counter_params(fps: f64, std_threshold: f64, min_exercise_seconds: f64) -> CounterParams {
    CounterParams {
        std_threshold,
        min_exercise_seconds,
        fps,
    }
}

/// Angle at `b` in degrees.
#[pyfunction]
#[pyo3(signature = (a, b, c, use_z = true, collinear_tol = 1e-9))]
fn knee_angle(a: Triple, b: Triple, c: Triple, use_z: bool, collinear_tol: f64) -> PyResult<f64> {
    angle_law_of_cosines(pt(a), pt(b), pt(c), use_z, collinear_tol).map_err(to_py)
}

/// Knee angle from the straight-leg hip/ankle (`a0`, `c0`) and their flexed positions (`a1`, `c1`).
#[pyfunction]
#[pyo3(signature = (a0, a1, c0, c1, b, tol = 1e-9))]
fn knee_angle_decomposed(a0: Triple, a1: Triple, c0: Triple, c1: Triple, b: Triple, tol: f64) -> PyResult<f64> {
    angle_right_triangle_decomposition(pt(a0), pt(a1), pt(c0), pt(c1), pt(b), tol).map_err(to_py)
}

#[pyclass(frozen, get_all, skip_from_py_object, module = "kneerehab_py")]
#[derive(Clone)]
struct Rep {
    frame_index: u64,
    timestamp_s: f64,
    peak_depth: f64,
}

#[pymethods]
impl Rep {
    fn __repr__(&self) -> String {
        format!(
            "Rep(frame_index={}, timestamp_s={:.3}, peak_depth={:.3})",
            self.frame_index, self.timestamp_s, self.peak_depth
        )
    }
}

fn reps(index: &ExerciseIndex) -> Vec<Rep> {
    index
        .reps
        .iter()
        .map(|r| Rep {
            frame_index: r.frame_index,
            timestamp_s: r.timestamp_s,
            peak_depth: r.peak_depth,
        })
        .collect()
}

/// Count repetitions in an angle series sampled at `fps`. Returns the repetitions.
#[pyfunction]
#[pyo3(signature = (angles, fps = 30.0, std_threshold = 0.5, min_exercise_seconds = 4.0))]
fn count_reps(angles: Vec<f64>, fps: f64, std_threshold: f64, min_exercise_seconds: f64) -> PyResult<Vec<Rep>> {
    let series: Vec<(u64, f64)> = angles.into_iter().enumerate().map(|(i, a)| (i as u64, a)).collect();
    let centered = center_series(&series).map_err(to_py)?;
    let index =
        find_negative_peaks(&centered, &counter_params(fps, std_threshold, min_exercise_seconds)).map_err(to_py)?;
    Ok(reps(&index))
}

/// Count repetitions in one column of a metrics CSV.
#[pyfunction]
#[pyo3(signature = (path, column = "right_knee_angle_deg", fps = 30.0, std_threshold = 0.5, min_exercise_seconds = 4.0))]
fn count_metrics_file(
    path: PathBuf,
    column: &str,
    fps: f64,
    std_threshold: f64,
    min_exercise_seconds: f64,
) -> PyResult<Vec<Rep>> {
    let (_, index) =
        count_and_index(&path, column, &counter_params(fps, std_threshold, min_exercise_seconds)).map_err(to_py)?;
    Ok(reps(&index))
}

#[pyclass(frozen, module = "kneerehab_py")]
struct Report {
    inner: SessionReport,
}

#[pymethods]
impl Report {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Report {
            inner: session::read_report(&path).map_err(to_py)?,
        })
    }

    #[getter]
    fn source_id(&self) -> &str {
        &self.inner.source_id
    }

    #[getter]
    fn count(&self) -> usize {
        self.inner.count
    }

    #[getter]
    fn reps(&self) -> Vec<Rep> {
        self.inner
            .reps
            .iter()
            .map(|r| Rep {
                frame_index: r.frame_index,
                timestamp_s: r.timestamp_s,
                peak_depth: r.peak_depth,
            })
            .collect()
    }

    #[getter]
    fn frames_analyzed(&self) -> usize {
        self.inner.frames_analyzed
    }

    #[getter]
    fn duration_s(&self) -> f64 {
        self.inner.duration_s
    }

    #[getter]
    fn flagged_fraction(&self) -> f64 {
        self.inner.alert_summary.flagged_fraction
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    /// One ffmpeg command per indexed repetition.
    #[pyo3(signature = (video, margin_seconds = 2.0, fps = 30.0))]
    fn trim_commands(&self, video: PathBuf, margin_seconds: f64, fps: f64) -> PyResult<Vec<String>> {
        session::emit_trim_commands(&self.inner, &video, margin_seconds, fps).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "Report(source_id={:?}, count={})",
            self.inner.source_id, self.inner.count
        )
    }
}

/// Run the full pipeline on a pose CSV, writing all outputs into `out_dir`.
#[pyfunction]
#[pyo3(signature = (
    input, out_dir, view = "sagittal", side = "right", fps = 30.0, std_threshold = 0.5,
    min_exercise_seconds = 4.0, visibility_min = DEFAULT_VISIBILITY_MIN, sagittal_margin = 0.0,
    frontal_epsilon = 0.0,
))]
#[allow(clippy::too_many_arguments)]
fn analyze(
    py: Python<'_>,
    input: PathBuf,
    out_dir: PathBuf,
    view: &str,
    side: &str,
    fps: f64,
    std_threshold: f64,
    min_exercise_seconds: f64,
    visibility_min: f64,
    sagittal_margin: f64,
    frontal_epsilon: f64,
) -> PyResult<Report> {
    let view: ViewPlane = view.parse().map_err(to_py)?;
    let side: KneeSide = side.parse().map_err(to_py)?;
    let config = AnalyzeConfig {
        angle: AngleParams {
            sagittal_margin,
            frontal_epsilon,
            ..AngleParams::new(view, side)
        },
        counter: counter_params(fps, std_threshold, min_exercise_seconds),
        visibility_min,
        ..AnalyzeConfig::new(input, out_dir)
    };
    let (inner, _) = py.detach(|| session::analyze(&config)).map_err(to_py)?;
    Ok(Report { inner })
}

/// Detection accuracy in percent: min/max of the two counts.
#[pyfunction]
fn accuracy(detected: usize, actual: usize) -> f64 {
    session::accuracy_pct(detected, actual)
}

/// Score a directory of metrics CSVs against a label file. Returns the evaluation as JSON.
#[pyfunction]
#[pyo3(signature = (labels, metrics_dir, side = "right", fps = 30.0, std_threshold = 0.5, min_exercise_seconds = 4.0))]
fn evaluate(
    labels: PathBuf,
    metrics_dir: PathBuf,
    side: &str,
    fps: f64,
    std_threshold: f64,
    min_exercise_seconds: f64,
) -> PyResult<String> {
    let side: KneeSide = side.parse().map_err(to_py)?;
    let entries = session::read_labels(&labels).map_err(to_py)?;
    let eval = session::evaluate(
        &entries,
        &metrics_dir,
        side,
        &counter_params(fps, std_threshold, min_exercise_seconds),
    )
    .map_err(to_py)?;
    serde_json::to_string(&eval).map_err(|e| KneeRehabError::new_err(e.to_string()))
}

#[allow(clippy::too_many_arguments)]
fn spec(
    reps: u32,
    period_s: f64,
    standing_deg: f64,
    depth_deg: f64,
    noise_sigma_deg: f64,
    distractors: Vec<Triple>,
    fps: f64,
    seed: u64,
) -> SynthSpec {
    SynthSpec {
        reps,
        period_s,
        standing_deg,
        depth_deg,
        noise_sigma_deg,
        distractors: distractors
            .into_iter()
            .map(|(start_s, duration_s, depth_deg)| Distractor {
                start_s,
                duration_s,
                depth_deg,
            })
            .collect(),
        fps,
        seed,
        ..Default::default()
    }
}

/// Synthetic knee-angle series. Returns `(angles, trough_frames)`.
///
/// `distractors` are `(start_s, duration_s, depth_deg)` dips outside the repetitions.
#[pyfunction]
#[pyo3(signature = (
    reps, period_s = 3.0, standing_deg = 175.0, depth_deg = 80.0, noise_sigma_deg = 0.0,
    distractors = Vec::new(), fps = 30.0, seed = 0,
))]
#[allow(clippy::too_many_arguments)]
fn synth_angles(
    reps: u32,
    period_s: f64,
    standing_deg: f64,
    depth_deg: f64,
    noise_sigma_deg: f64,
    distractors: Vec<Triple>,
    fps: f64,
    seed: u64,
) -> PyResult<(Vec<f64>, Vec<u64>)> {
    let s = spec(
        reps,
        period_s,
        standing_deg,
        depth_deg,
        noise_sigma_deg,
        distractors,
        fps,
        seed,
    );
    let out = synth::generate_angle_series(&s).map_err(to_py)?;
    Ok((out.angles.into_iter().map(|(_, a)| a).collect(), out.trough_frames))
}

/// Write `<name>.csv`, `<name>_metrics.csv` and `<name>_truth.json`. Returns the three paths.
#[pyfunction]
#[pyo3(signature = (
    out_dir, name, reps, view = "sagittal", period_s = 3.0, standing_deg = 175.0, depth_deg = 80.0,
    noise_sigma_deg = 0.0, distractors = Vec::new(), fps = 30.0, seed = 0, inject = Vec::new(),
))]
#[allow(clippy::too_many_arguments)]
fn write_synth(
    out_dir: PathBuf,
    name: &str,
    reps: u32,
    view: &str,
    period_s: f64,
    standing_deg: f64,
    depth_deg: f64,
    noise_sigma_deg: f64,
    distractors: Vec<Triple>,
    fps: f64,
    seed: u64,
    inject: Vec<(u64, u64)>,
) -> PyResult<(PathBuf, PathBuf, PathBuf)> {
    let view: ViewPlane = view.parse().map_err(to_py)?;
    let s = spec(
        reps,
        period_s,
        standing_deg,
        depth_deg,
        noise_sigma_deg,
        distractors,
        fps,
        seed,
    );
    let opts = PoseOptions {
        inject: inject.into_iter().map(|(a, b)| a..=b).collect(),
    };
    let files = session::write_synth_fixture(&s, view, &opts, &out_dir, name).map_err(to_py)?;
    Ok((files.pose, files.metrics, files.truth))
}

/// Independent run-scan count used as a test oracle.
#[pyfunction]
fn brute_force_count(angles: Vec<f64>, min_depth_deg: f64, min_gap_frames: u64) -> usize {
    let series: Vec<(u64, f64)> = angles.into_iter().enumerate().map(|(i, a)| (i as u64, a)).collect();
    synth::brute_force_count(&series, min_depth_deg, min_gap_frames)
}

#[pymodule]
fn kneerehab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("KneeRehabError", m.py().get_type::<KneeRehabError>())?;
    m.add_class::<Rep>()?;
    m.add_class::<Report>()?;
    m.add_function(wrap_pyfunction!(knee_angle, m)?)?;
    m.add_function(wrap_pyfunction!(knee_angle_decomposed, m)?)?;
    m.add_function(wrap_pyfunction!(count_reps, m)?)?;
    m.add_function(wrap_pyfunction!(count_metrics_file, m)?)?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(accuracy, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(synth_angles, m)?)?;
    m.add_function(wrap_pyfunction!(write_synth, m)?)?;
    m.add_function(wrap_pyfunction!(brute_force_count, m)?)?;
    Ok(())
}
