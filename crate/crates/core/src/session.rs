//! Session-level workflows behind the command-line tool: analysing one recording,
//! scoring counts against a label file, building trim commands, and writing
//! synthetic fixtures. Everything here reads and writes local files only.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::counter::{count_and_index, CounterParams, Rep};
use crate::error::{Error, Result};
use crate::kinematics::{compute_metrics, AngleParams};
use crate::model::{
    drop_nan_rows, parse_pose_csv, write_metrics_csv, write_pose_csv, KneeMetricsRow, KneeSide, ViewPlane,
    DEFAULT_VISIBILITY_MIN,
};
use crate::plot::render_plot;
use crate::synth::{generate_pose_series, PoseOptions, SynthSpec};

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const INDEX_FILE: &str = "index.csv";
const INDEX_HEADER: &str = "source_id,created_at,count,report_path";

/// One row of a label file: `source_id,camera_view,exercise_total`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelEntry {
    pub source_id: String,
    pub camera_view: ViewPlane,
    pub exercise_total: u32,
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<LabelEntry>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let header = reader.headers()?.clone();
    for col in ["source_id", "camera_view", "exercise_total"] {
        if !header.iter().any(|h| h == col) {
            return Err(Error::Schema(format!("label file is missing column `{col}`")));
        }
    }
    let col = |name: &str| header.iter().position(|h| h == name).unwrap_or(0);
    let (id_col, view_col, total_col) = (col("source_id"), col("camera_view"), col("exercise_total"));
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let field = |c: usize| rec.get(c).unwrap_or("");
        let camera_view = field(view_col)
            .parse::<ViewPlane>()
            .map_err(|e| Error::Data(format!("label row {row}: {e}")))?;
        let exercise_total = field(total_col)
            .parse::<u32>()
            .ok()
            .filter(|&t| t >= 1)
            .ok_or_else(|| {
                Error::Data(format!(
                    "label row {row}: exercise_total must be a positive integer, got `{}`",
                    field(total_col)
                ))
            })?;
        out.push(LabelEntry {
            source_id: field(id_col).to_string(),
            camera_view,
            exercise_total,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlertSummary {
    pub frames_flagged_sagittal: usize,
    pub frames_flagged_frontal: usize,
    /// Share of analysed frames with any alert raised.
    pub flagged_fraction: f64,
}

impl AlertSummary {
    pub fn from_rows(rows: &[KneeMetricsRow]) -> Self {
        let sag = rows
            .iter()
            .filter(|r| r.sagittal_alert_left || r.sagittal_alert_right)
            .count();
        let front = rows
            .iter()
            .filter(|r| r.frontal_alert_left || r.frontal_alert_right)
            .count();
        let any = rows
            .iter()
            .filter(|r| {
                r.sagittal_alert_left || r.sagittal_alert_right || r.frontal_alert_left || r.frontal_alert_right
            })
            .count();
        AlertSummary {
            frames_flagged_sagittal: sag,
            frames_flagged_frontal: front,
            flagged_fraction: if rows.is_empty() {
                0.0
            } else {
                any as f64 / rows.len() as f64
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub schema_version: u32,
    pub source_id: String,
    pub view: ViewPlane,
    pub side: KneeSide,
    pub angle_params: AngleParams,
    pub counter_params: CounterParams,
    pub visibility_min: f64,
    pub frames_input: usize,
    pub frames_analyzed: usize,
    /// Timestamp of the last input frame.
    pub duration_s: f64,
    pub mean_angle_deg: f64,
    pub std_angle_deg: f64,
    pub count: usize,
    pub reps: Vec<Rep>,
    pub alert_summary: AlertSummary,
    pub created_at: String,
}

impl SessionReport {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != REPORT_SCHEMA_VERSION {
            return Err(Error::Schema(format!(
                "unsupported report schema_version {}",
                self.schema_version
            )));
        }
        if self.count != self.reps.len() {
            return Err(Error::Data(format!(
                "report count {} disagrees with {} indexed reps",
                self.count,
                self.reps.len()
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

pub fn read_report(path: impl AsRef<Path>) -> Result<SessionReport> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let report: SessionReport =
        serde_json::from_str(&text).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
    report.validate()?;
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct AnalyzeConfig {
    pub input: PathBuf,
    pub angle: AngleParams,
    pub counter: CounterParams,
    pub visibility_min: f64,
    pub out_dir: PathBuf,
    /// Defaults to `<out_dir>/<source_id>_plot.svg`.
    pub plot: Option<PathBuf>,
}

impl AnalyzeConfig {
    pub fn new(input: impl Into<PathBuf>, out_dir: impl Into<PathBuf>) -> Self {
        AnalyzeConfig {
            input: input.into(),
            angle: AngleParams::default(),
            counter: CounterParams::default(),
            visibility_min: DEFAULT_VISIBILITY_MIN,
            out_dir: out_dir.into(),
            plot: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzeOutputs {
    pub metrics: PathBuf,
    pub plot: PathBuf,
    pub report: PathBuf,
    pub index: PathBuf,
}

/// Pose CSV in; metrics CSV, plot, report JSON and a session index line out.
pub fn analyze(config: &AnalyzeConfig) -> Result<(SessionReport, AnalyzeOutputs)> {
    config.angle.validate()?;
    config.counter.validate()?;
    let raw = parse_pose_csv(&config.input, config.counter.fps)?;
    let duration_s = raw.frames.last().map_or(0.0, |f| f.timestamp_s);
    let clean = drop_nan_rows(&raw, config.visibility_min)?;
    let rows = compute_metrics(&clean, &config.angle);

    std::fs::create_dir_all(&config.out_dir).map_err(|e| Error::io(&config.out_dir, e))?;
    let id = &raw.source_id;
    let metrics = config.out_dir.join(format!("{id}_metrics.csv"));
    write_metrics_csv(&rows, &metrics)?;

    let (centered, index) = count_and_index(&metrics, config.angle.side.angle_column(), &config.counter)?;
    let plot = config
        .plot
        .clone()
        .unwrap_or_else(|| config.out_dir.join(format!("{id}_plot.svg")));
    render_plot(&centered, &index, &config.counter, &plot)?;

    let report = SessionReport {
        schema_version: REPORT_SCHEMA_VERSION,
        source_id: id.clone(),
        view: config.angle.view,
        side: config.angle.side,
        angle_params: config.angle,
        counter_params: config.counter,
        visibility_min: config.visibility_min,
        frames_input: raw.len(),
        frames_analyzed: clean.len(),
        duration_s,
        mean_angle_deg: centered.mean_removed,
        std_angle_deg: centered.std,
        count: index.count,
        reps: index.reps,
        alert_summary: AlertSummary::from_rows(&rows),
        created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
    };
    let report_path = config.out_dir.join(format!("{id}_report.json"));
    std::fs::write(&report_path, report.to_json()).map_err(|e| Error::io(&report_path, e))?;
    let index_path = append_index(&config.out_dir, &report, &report_path)?;

    Ok((
        report,
        AnalyzeOutputs {
            metrics,
            plot,
            report: report_path,
            index: index_path,
        },
    ))
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Appends one line to `<dir>/index.csv` while holding an exclusive lock on the file.
pub fn append_index(dir: &Path, report: &SessionReport, report_path: &Path) -> Result<PathBuf> {
    let path = dir.join(INDEX_FILE);
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&path)
        .map_err(|e| Error::io(&path, e))?;
    file.lock().map_err(|e| Error::io(&path, e))?;
    let mut chunk = String::new();
    let empty = file.metadata().map_err(|e| Error::io(&path, e))?.len() == 0;
    if empty {
        chunk.push_str(INDEX_HEADER);
        chunk.push('\n');
    }
    chunk.push_str(&format!(
        "{},{},{},{}\n",
        csv_field(&report.source_id),
        csv_field(&report.created_at),
        report.count,
        csv_field(&report_path.display().to_string())
    ));
    let written = file.write_all(chunk.as_bytes());
    let _ = file.unlock();
    written.map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// `min(detected, actual) / max(detected, actual)` as a percentage.
pub fn accuracy_pct(detected: usize, actual: usize) -> f64 {
    let (lo, hi) = if detected < actual {
        (detected, actual)
    } else {
        (actual, detected)
    };
    if hi == 0 {
        100.0
    } else {
        lo as f64 / hi as f64 * 100.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileScore {
    pub source_id: String,
    pub camera_view: ViewPlane,
    pub actual: u32,
    pub detected: usize,
    pub accuracy_pct: f64,
    pub metrics_path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub files: Vec<FileScore>,
    /// Label entries with no matching metrics file; excluded from the summary.
    pub missing: Vec<String>,
    pub min_accuracy_pct: Option<f64>,
    pub max_accuracy_pct: Option<f64>,
    /// Per-file accuracy weighted by the labelled exercise total.
    pub weighted_accuracy_pct: Option<f64>,
    pub total_actual: u64,
    pub total_detected: u64,
}

impl Evaluation {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("source_id,camera_view,actual,detected,accuracy_pct\n");
        for f in &self.files {
            out.push_str(&format!(
                "{},{},{},{},{:.2}\n",
                csv_field(&f.source_id),
                f.camera_view,
                f.actual,
                f.detected,
                f.accuracy_pct
            ));
        }
        out
    }
}

fn resolve_metrics(dir: &Path, source_id: &str) -> Option<PathBuf> {
    let stem = Path::new(source_id)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| source_id.to_string());
    [format!("{stem}_metrics.csv"), format!("{stem}.csv")]
        .into_iter()
        .map(|name| dir.join(name))
        .find(|p| p.is_file())
}

/// Counts every labelled recording found in `metrics_dir` and scores it.
pub fn evaluate(
    labels: &[LabelEntry],
    metrics_dir: &Path,
    side: KneeSide,
    params: &CounterParams,
) -> Result<Evaluation> {
    params.validate()?;
    let mut files = Vec::new();
    let mut missing = Vec::new();
    for label in labels {
        let Some(path) = resolve_metrics(metrics_dir, &label.source_id) else {
            missing.push(label.source_id.clone());
            continue;
        };
        let (_, index) = count_and_index(&path, side.angle_column(), params)?;
        files.push(FileScore {
            source_id: label.source_id.clone(),
            camera_view: label.camera_view,
            actual: label.exercise_total,
            detected: index.count,
            accuracy_pct: accuracy_pct(index.count, label.exercise_total as usize),
            metrics_path: path,
        });
    }
    let accs = files.iter().map(|f| f.accuracy_pct);
    let total_actual: u64 = files.iter().map(|f| f.actual as u64).sum();
    let weighted = (total_actual > 0)
        .then(|| files.iter().map(|f| f.accuracy_pct * f.actual as f64).sum::<f64>() / total_actual as f64);
    Ok(Evaluation {
        min_accuracy_pct: accs.clone().reduce(f64::min),
        max_accuracy_pct: accs.reduce(f64::max),
        weighted_accuracy_pct: weighted,
        total_actual,
        total_detected: files.iter().map(|f| f.detected as u64).sum(),
        files,
        missing,
    })
}

fn shell_quote(s: &str) -> String {
    let plain = !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || "-_./:+@%=".contains(c));
    if plain {
        s.to_string()
    } else {
        format!("'{}'", s.replace('\'', r"'\''"))
    }
}

/// One stream-copy `ffmpeg` invocation per repetition, centred on its trough.
/// Clip windows are clamped to `[0, report.duration_s]`. Commands are only built,
/// never run.
pub fn emit_trim_commands(report: &SessionReport, video: &Path, margin_s: f64, fps: f64) -> Result<Vec<String>> {
    crate::model::validate_fps(fps)?;
    if !(margin_s.is_finite() && margin_s > 0.0) {
        return Err(Error::InvalidParams(format!("margin must be positive, got {margin_s}")));
    }
    let end_limit = report.duration_s.max(0.0);
    let video = shell_quote(&video.display().to_string());
    Ok(report
        .reps
        .iter()
        .enumerate()
        .map(|(k, rep)| {
            let t = rep.frame_index as f64 / fps;
            let start = (t - margin_s).max(0.0);
            let end = (t + margin_s).min(end_limit).max(start);
            let output = shell_quote(&format!("{}_rep{}.mp4", report.source_id, k + 1));
            format!(
                "ffmpeg -hide_banner -loglevel error -y -ss {start:.3} -i {video} -t {:.3} -c copy -avoid_negative_ts make_zero {output}",
                end - start
            )
        })
        .collect())
}

/// Ground truth written beside generated fixtures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTruth {
    pub view: ViewPlane,
    pub spec: SynthSpec,
    pub reps: u32,
    pub trough_frames: Vec<u64>,
    /// Frames on which the right knee's alert for `view` is staged.
    pub alert_frames: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthFiles {
    pub pose: PathBuf,
    pub metrics: PathBuf,
    pub truth: PathBuf,
}

/// Writes `<name>.csv` (pose), `<name>_metrics.csv` and `<name>_truth.json` into `out_dir`.
pub fn write_synth_fixture(
    spec: &SynthSpec,
    view: ViewPlane,
    options: &PoseOptions,
    out_dir: &Path,
    name: &str,
) -> Result<SynthFiles> {
    let mut pose = generate_pose_series(spec, view, options)?;
    pose.series.source_id = name.to_string();
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let files = SynthFiles {
        pose: out_dir.join(format!("{name}.csv")),
        metrics: out_dir.join(format!("{name}_metrics.csv")),
        truth: out_dir.join(format!("{name}_truth.json")),
    };
    write_pose_csv(&pose.series, &files.pose)?;
    let rows = compute_metrics(&pose.series, &AngleParams::new(view, KneeSide::Right));
    write_metrics_csv(&rows, &files.metrics)?;

    let truth = SynthTruth {
        view,
        spec: spec.clone(),
        reps: spec.reps,
        trough_frames: pose.trough_frames.clone(),
        alert_frames: pose
            .series
            .frames
            .iter()
            .zip(&pose.alert_mask)
            .filter(|(_, &m)| m)
            .map(|(f, _)| f.frame_index)
            .collect(),
    };
    let mut json = serde_json::to_string_pretty(&truth).expect("truth serializes");
    json.push('\n');
    std::fs::write(&files.truth, json).map_err(|e| Error::io(&files.truth, e))?;
    Ok(files)
}
