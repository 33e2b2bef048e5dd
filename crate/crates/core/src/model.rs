//! Domain types shared by every stage, plus the two CSV formats.
//!
//! Pose CSV (input, header-keyed so column order is free):
//! `frame,timestamp_s,` then `<slot>_x,<slot>_y,<slot>_z,<slot>_vis` for each of
//! `l_hip, r_hip, l_knee, r_knee, l_ankle, r_ankle, l_foot_index, r_foot_index`.
//!
//! Knee metrics CSV (output):
//! `frame,timestamp_s,left_knee_angle_deg,right_knee_angle_deg,sag_alert_l,sag_alert_r,front_alert_l,front_alert_r`.
//!
//! Missing values are read from empty cells or a literal `NaN`; they are always
//! written back as empty cells.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_FPS: f64 = 30.0;
pub const DEFAULT_VISIBILITY_MIN: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KneeSide {
    Left,
    Right,
}

impl KneeSide {
    pub const BOTH: [KneeSide; 2] = [KneeSide::Left, KneeSide::Right];

    pub fn opposite(self) -> Self {
        match self {
            KneeSide::Left => KneeSide::Right,
            KneeSide::Right => KneeSide::Left,
        }
    }

    /// Name of the metrics CSV column holding this knee's angle.
    pub fn angle_column(self) -> &'static str {
        match self {
            KneeSide::Left => "left_knee_angle_deg",
            KneeSide::Right => "right_knee_angle_deg",
        }
    }
}

impl fmt::Display for KneeSide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KneeSide::Left => "left",
            KneeSide::Right => "right",
        })
    }
}

impl FromStr for KneeSide {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "left" | "l" => Ok(KneeSide::Left),
            "right" | "r" => Ok(KneeSide::Right),
            other => Err(Error::InvalidParams(format!("unknown side `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ViewPlane {
    Sagittal,
    Frontal,
}

impl fmt::Display for ViewPlane {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ViewPlane::Sagittal => "sagittal",
            ViewPlane::Frontal => "frontal",
        })
    }
}

impl FromStr for ViewPlane {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sagittal" | "side" => Ok(ViewPlane::Sagittal),
            "frontal" | "front" => Ok(ViewPlane::Frontal),
            other => Err(Error::InvalidParams(format!("unknown view `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Joint {
    Hip,
    Knee,
    Ankle,
    FootIndex,
}

impl Joint {
    pub const ALL: [Joint; 4] = [Joint::Hip, Joint::Knee, Joint::Ankle, Joint::FootIndex];
}

/// One of the eight selected landmark slots, in CSV column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Slot {
    pub joint: Joint,
    pub side: KneeSide,
}

impl Slot {
    pub const ALL: [Slot; 8] = [
        Slot::new(Joint::Hip, KneeSide::Left),
        Slot::new(Joint::Hip, KneeSide::Right),
        Slot::new(Joint::Knee, KneeSide::Left),
        Slot::new(Joint::Knee, KneeSide::Right),
        Slot::new(Joint::Ankle, KneeSide::Left),
        Slot::new(Joint::Ankle, KneeSide::Right),
        Slot::new(Joint::FootIndex, KneeSide::Left),
        Slot::new(Joint::FootIndex, KneeSide::Right),
    ];

    pub const fn new(joint: Joint, side: KneeSide) -> Self {
        Slot { joint, side }
    }

    pub const fn index(self) -> usize {
        let j = match self.joint {
            Joint::Hip => 0,
            Joint::Knee => 1,
            Joint::Ankle => 2,
            Joint::FootIndex => 3,
        };
        let s = match self.side {
            KneeSide::Left => 0,
            KneeSide::Right => 1,
        };
        j * 2 + s
    }

    pub const fn name(self) -> &'static str {
        match (self.joint, self.side) {
            (Joint::Hip, KneeSide::Left) => "l_hip",
            (Joint::Hip, KneeSide::Right) => "r_hip",
            (Joint::Knee, KneeSide::Left) => "l_knee",
            (Joint::Knee, KneeSide::Right) => "r_knee",
            (Joint::Ankle, KneeSide::Left) => "l_ankle",
            (Joint::Ankle, KneeSide::Right) => "r_ankle",
            (Joint::FootIndex, KneeSide::Left) => "l_foot_index",
            (Joint::FootIndex, KneeSide::Right) => "r_foot_index",
        }
    }
}

/// A detected body landmark in the pose engine's normalized image frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Landmark {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub visibility: f64,
}

impl Landmark {
    /// Returns `None` unless every coordinate is finite and visibility lies in `[0, 1]`.
    pub fn new(x: f64, y: f64, z: f64, visibility: f64) -> Option<Self> {
        let finite = x.is_finite() && y.is_finite() && z.is_finite();
        if finite && (0.0..=1.0).contains(&visibility) {
            Some(Landmark { x, y, z, visibility })
        } else {
            None
        }
    }

    pub fn mirrored(self) -> Self {
        Landmark {
            x: 1.0 - self.x,
            ..self
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkFrame {
    pub frame_index: u64,
    pub timestamp_s: f64,
    /// Indexed by [`Slot::index`]; `None` marks a missing landmark.
    pub landmarks: [Option<Landmark>; 8],
}

impl LandmarkFrame {
    pub fn new(frame_index: u64, fps: f64) -> Self {
        LandmarkFrame {
            frame_index,
            timestamp_s: frame_index as f64 / fps,
            landmarks: [None; 8],
        }
    }

    pub fn get(&self, joint: Joint, side: KneeSide) -> Option<Landmark> {
        self.landmarks[Slot::new(joint, side).index()]
    }

    pub fn require(&self, joint: Joint, side: KneeSide) -> Result<Landmark> {
        let slot = Slot::new(joint, side);
        self.landmarks[slot.index()].ok_or(Error::MissingLandmark(slot.name()))
    }

    pub fn set(&mut self, joint: Joint, side: KneeSide, landmark: Option<Landmark>) {
        self.landmarks[Slot::new(joint, side).index()] = landmark;
    }

    /// Horizontal flip (`x -> 1 - x`) keeping slot labels.
    pub fn mirrored(&self) -> Self {
        let mut out = self.clone();
        for lm in out.landmarks.iter_mut().flatten() {
            *lm = lm.mirrored();
        }
        out
    }

    /// Horizontal flip with left and right slots exchanged.
    pub fn mirrored_swapped(&self) -> Self {
        let mut out = self.mirrored();
        for joint in Joint::ALL {
            let l = out.get(joint, KneeSide::Left);
            let r = out.get(joint, KneeSide::Right);
            out.set(joint, KneeSide::Left, r);
            out.set(joint, KneeSide::Right, l);
        }
        out
    }

    fn is_complete(&self, visibility_min: f64) -> bool {
        self.landmarks
            .iter()
            .all(|lm| matches!(lm, Some(l) if l.visibility >= visibility_min))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoseSeries {
    pub fps: f64,
    pub frames: Vec<LandmarkFrame>,
    pub source_id: String,
}

impl PoseSeries {
    pub fn new(fps: f64, frames: Vec<LandmarkFrame>, source_id: impl Into<String>) -> Result<Self> {
        validate_fps(fps)?;
        if let Some(w) = frames.windows(2).find(|w| w[1].frame_index <= w[0].frame_index) {
            return Err(Error::Data(format!(
                "frame indices must strictly increase ({} followed by {})",
                w[0].frame_index, w[1].frame_index
            )));
        }
        Ok(PoseSeries {
            fps,
            frames,
            source_id: source_id.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

pub(crate) fn validate_fps(fps: f64) -> Result<()> {
    if fps.is_finite() && fps > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!("fps must be positive, got {fps}")))
    }
}

/// Per-frame knee angles and binary safety flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KneeMetricsRow {
    pub frame_index: u64,
    pub timestamp_s: f64,
    pub left_knee_angle_deg: Option<f64>,
    pub right_knee_angle_deg: Option<f64>,
    pub sagittal_alert_left: bool,
    pub sagittal_alert_right: bool,
    pub frontal_alert_left: bool,
    pub frontal_alert_right: bool,
}

impl KneeMetricsRow {
    pub fn angle(&self, side: KneeSide) -> Option<f64> {
        match side {
            KneeSide::Left => self.left_knee_angle_deg,
            KneeSide::Right => self.right_knee_angle_deg,
        }
    }

    pub fn sagittal_alert(&self, side: KneeSide) -> bool {
        match side {
            KneeSide::Left => self.sagittal_alert_left,
            KneeSide::Right => self.sagittal_alert_right,
        }
    }

    pub fn frontal_alert(&self, side: KneeSide) -> bool {
        match side {
            KneeSide::Left => self.frontal_alert_left,
            KneeSide::Right => self.frontal_alert_right,
        }
    }
}

pub const POSE_FRAME_COLUMN: &str = "frame";
pub const TIMESTAMP_COLUMN: &str = "timestamp_s";

pub const METRICS_COLUMNS: [&str; 8] = [
    "frame",
    "timestamp_s",
    "left_knee_angle_deg",
    "right_knee_angle_deg",
    "sag_alert_l",
    "sag_alert_r",
    "front_alert_l",
    "front_alert_r",
];

const COORD_SUFFIXES: [&str; 4] = ["x", "y", "z", "vis"];

/// Canonical pose CSV header, in schema order.
pub fn pose_columns() -> Vec<String> {
    let mut cols = vec![POSE_FRAME_COLUMN.to_string(), TIMESTAMP_COLUMN.to_string()];
    for slot in Slot::ALL {
        for suffix in COORD_SUFFIXES {
            cols.push(format!("{}_{}", slot.name(), suffix));
        }
    }
    cols
}

fn parse_cell(cell: &str) -> Option<f64> {
    let cell = cell.trim();
    if cell.is_empty() {
        return None;
    }
    cell.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn parse_frame_cell(cell: &str, row: usize) -> Result<u64> {
    let cell = cell.trim();
    if let Ok(v) = cell.parse::<u64>() {
        return Ok(v);
    }
    // Accept integral floats such as `12.0`.
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() && v >= 0.0 && v.fract() == 0.0 && v < 2f64.powi(53) => Ok(v as u64),
        _ => Err(Error::Data(format!(
            "row {row}: frame `{cell}` is not a non-negative integer"
        ))),
    }
}

/// Maps each expected column name to its position in `header`, reporting the first
/// header entry that is unknown or duplicated, or else the first expected column absent.
fn resolve_header(header: &csv::StringRecord, expected: &[String]) -> Result<HashMap<String, usize>> {
    let mut positions = HashMap::with_capacity(header.len());
    for (i, name) in header.iter().enumerate() {
        let name = name.trim().trim_start_matches('\u{feff}');
        if !expected.iter().any(|e| e == name) {
            return Err(Error::Schema(format!("unexpected column `{name}` at position {i}")));
        }
        if positions.insert(name.to_string(), i).is_some() {
            return Err(Error::Schema(format!("duplicate column `{name}` at position {i}")));
        }
    }
    if let Some(missing) = expected.iter().find(|e| !positions.contains_key(e.as_str())) {
        return Err(Error::Schema(format!("missing column `{missing}`")));
    }
    Ok(positions)
}

fn open_reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().has_headers(true).from_reader(file))
}

fn source_id_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Reads a pose CSV. Timestamps are recomputed as `frame / fps`.
pub fn parse_pose_csv(path: impl AsRef<Path>, fps: f64) -> Result<PoseSeries> {
    let path = path.as_ref();
    validate_fps(fps)?;
    let mut reader = open_reader(path)?;
    let header = reader.headers().map_err(|e| with_path(e, path))?.clone();
    if header.iter().all(|h| h.trim().is_empty()) {
        return Err(Error::EmptySeries(format!("{} has no header or rows", path.display())));
    }
    let expected = pose_columns();
    let pos = resolve_header(&header, &expected)?;

    let frame_col = pos[POSE_FRAME_COLUMN];
    let slot_cols: Vec<[usize; 4]> = Slot::ALL
        .iter()
        .map(|slot| COORD_SUFFIXES.map(|s| pos[&format!("{}_{}", slot.name(), s)]))
        .collect();

    let mut frames = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| with_path(e, path))?;
        let frame_index = parse_frame_cell(record.get(frame_col).unwrap_or(""), row + 1)?;
        let mut frame = LandmarkFrame::new(frame_index, fps);
        for (slot, cols) in Slot::ALL.iter().zip(&slot_cols) {
            let vals = cols.map(|c| record.get(c).and_then(parse_cell));
            let lm = match vals {
                [Some(x), Some(y), Some(z), Some(v)] => Landmark::new(x, y, z, v),
                _ => None,
            };
            frame.landmarks[slot.index()] = lm;
        }
        frames.push(frame);
    }
    PoseSeries::new(fps, frames, source_id_of(path))
}

fn with_path(err: csv::Error, path: &Path) -> Error {
    match Error::from(err) {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.filter(|v| v.is_finite()).map(|v| v.to_string()).unwrap_or_default()
}

fn fmt_flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| Error::io(path, e))
}

/// Writes a pose CSV in canonical column order.
pub fn write_pose_csv(series: &PoseSeries, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    out.push_str(&pose_columns().join(","));
    out.push('\n');
    for frame in &series.frames {
        out.push_str(&frame.frame_index.to_string());
        out.push(',');
        out.push_str(&frame.timestamp_s.to_string());
        for lm in &frame.landmarks {
            match lm {
                Some(l) => {
                    for v in [l.x, l.y, l.z, l.visibility] {
                        out.push(',');
                        out.push_str(&v.to_string());
                    }
                }
                None => out.push_str(",,,,"),
            }
        }
        out.push('\n');
    }
    create(path)?.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Removes every frame with a missing landmark or one below `visibility_min`.
/// Surviving frames keep their original `frame_index`.
pub fn drop_nan_rows(series: &PoseSeries, visibility_min: f64) -> Result<PoseSeries> {
    if !(0.0..=1.0).contains(&visibility_min) {
        return Err(Error::InvalidParams(format!(
            "visibility_min must lie in [0, 1], got {visibility_min}"
        )));
    }
    let frames: Vec<_> = series
        .frames
        .iter()
        .filter(|f| f.is_complete(visibility_min))
        .cloned()
        .collect();
    if frames.is_empty() {
        return Err(Error::EmptySeries(format!(
            "no complete frames in `{}` at visibility >= {visibility_min}",
            series.source_id
        )));
    }
    Ok(PoseSeries {
        fps: series.fps,
        frames,
        source_id: series.source_id.clone(),
    })
}

pub fn write_metrics_csv(rows: &[KneeMetricsRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = METRICS_COLUMNS.join(",");
    out.push('\n');
    for r in rows {
        let line = [
            r.frame_index.to_string(),
            r.timestamp_s.to_string(),
            fmt_opt(r.left_knee_angle_deg),
            fmt_opt(r.right_knee_angle_deg),
            fmt_flag(r.sagittal_alert_left).to_string(),
            fmt_flag(r.sagittal_alert_right).to_string(),
            fmt_flag(r.frontal_alert_left).to_string(),
            fmt_flag(r.frontal_alert_right).to_string(),
        ]
        .join(",");
        out.push_str(&line);
        out.push('\n');
    }
    create(path)?.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

fn parse_flag(cell: &str, column: &str, row: usize) -> Result<bool> {
    match cell.trim() {
        "0" | "" => Ok(false),
        "1" => Ok(true),
        other => Err(Error::Data(format!(
            "row {row}: `{column}` must be 0 or 1, got `{other}`"
        ))),
    }
}

pub fn read_metrics_csv(path: impl AsRef<Path>) -> Result<Vec<KneeMetricsRow>> {
    let path = path.as_ref();
    let mut reader = open_reader(path)?;
    let header = reader.headers().map_err(|e| with_path(e, path))?.clone();
    let expected: Vec<String> = METRICS_COLUMNS.iter().map(|s| s.to_string()).collect();
    let pos = resolve_header(&header, &expected)?;
    let cell = |rec: &csv::StringRecord, name: &str| rec.get(pos[name]).unwrap_or("").to_string();

    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let rec = record.map_err(|e| with_path(e, path))?;
        let row = i + 1;
        let timestamp = parse_cell(&cell(&rec, "timestamp_s"))
            .ok_or_else(|| Error::Data(format!("row {row}: timestamp_s is not numeric")))?;
        rows.push(KneeMetricsRow {
            frame_index: parse_frame_cell(&cell(&rec, "frame"), row)?,
            timestamp_s: timestamp,
            left_knee_angle_deg: parse_cell(&cell(&rec, "left_knee_angle_deg")),
            right_knee_angle_deg: parse_cell(&cell(&rec, "right_knee_angle_deg")),
            sagittal_alert_left: parse_flag(&cell(&rec, "sag_alert_l"), "sag_alert_l", row)?,
            sagittal_alert_right: parse_flag(&cell(&rec, "sag_alert_r"), "sag_alert_r", row)?,
            frontal_alert_left: parse_flag(&cell(&rec, "front_alert_l"), "front_alert_l", row)?,
            frontal_alert_right: parse_flag(&cell(&rec, "front_alert_r"), "front_alert_r", row)?,
        });
    }
    Ok(rows)
}

/// Reads `(frame, value)` pairs for one column of a metrics CSV. Missing cells are `None`.
pub fn read_metrics_column(path: impl AsRef<Path>, column: &str) -> Result<Vec<(u64, Option<f64>)>> {
    let path = path.as_ref();
    let mut reader = open_reader(path)?;
    let header = reader.headers().map_err(|e| with_path(e, path))?.clone();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h.trim().trim_start_matches('\u{feff}') == name)
    };
    let frame_col =
        find(POSE_FRAME_COLUMN).ok_or_else(|| Error::Schema(format!("missing column `{POSE_FRAME_COLUMN}`")))?;
    let value_col = find(column).ok_or_else(|| Error::Schema(format!("missing column `{column}`")))?;

    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let rec = record.map_err(|e| with_path(e, path))?;
        let frame = parse_frame_cell(rec.get(frame_col).unwrap_or(""), i + 1)?;
        out.push((frame, rec.get(value_col).and_then(parse_cell)));
    }
    if let Some(w) = out.windows(2).find(|w| w[1].0 <= w[0].0) {
        return Err(Error::Data(format!(
            "frame indices must strictly increase ({} followed by {})",
            w[0].0, w[1].0
        )));
    }
    Ok(out)
}
