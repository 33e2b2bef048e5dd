//! Seeded synthetic exercise sessions with exact ground truth, and a brute-force
//! repetition counter that shares no code with [`crate::counter`].

use std::ops::RangeInclusive;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{validate_fps, Joint, KneeSide, Landmark, LandmarkFrame, PoseSeries, ViewPlane};

/// A short knee dip outside the repetitions (shaking a leg out, lifting a knee).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Distractor {
    pub start_s: f64,
    pub duration_s: f64,
    pub depth_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub reps: u32,
    pub period_s: f64,
    pub standing_deg: f64,
    /// How far below `standing_deg` each repetition bottoms out.
    pub depth_deg: f64,
    pub noise_sigma_deg: f64,
    pub distractors: Vec<Distractor>,
    pub fps: f64,
    pub seed: u64,
    /// Standing time before the first and after the last repetition.
    pub lead_in_s: f64,
    pub lead_out_s: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            reps: 5,
            period_s: 3.0,
            standing_deg: 175.0,
            depth_deg: 80.0,
            noise_sigma_deg: 0.0,
            distractors: Vec::new(),
            fps: 30.0,
            seed: 0,
            lead_in_s: 3.0,
            lead_out_s: 3.0,
        }
    }
}

/// Frame layout derived from a validated spec.
#[derive(Debug, Clone, Copy)]
struct Layout {
    lead_in: u64,
    period: u64,
    total: u64,
}

impl Layout {
    fn rep_window(&self, reps: u32) -> (u64, u64) {
        (self.lead_in, self.lead_in + reps as u64 * self.period)
    }
}

fn frames(seconds: f64, fps: f64) -> u64 {
    (seconds * fps).round() as u64
}

impl SynthSpec {
    fn layout(&self) -> Result<Layout> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if validate_fps(self.fps).is_err() {
            return bad(format!("fps must be positive, got {}", self.fps));
        }
        if !(self.period_s.is_finite() && self.period_s > 0.0) {
            return bad(format!("period_s must be positive, got {}", self.period_s));
        }
        if !(self.standing_deg > 0.0 && self.standing_deg <= 180.0) {
            return bad(format!("standing_deg must lie in (0, 180], got {}", self.standing_deg));
        }
        if !(self.depth_deg > 0.0 && self.depth_deg < self.standing_deg) {
            return bad(format!(
                "depth_deg must lie in (0, {}), got {}",
                self.standing_deg, self.depth_deg
            ));
        }
        if !(self.noise_sigma_deg.is_finite() && self.noise_sigma_deg >= 0.0) {
            return bad(format!("noise_sigma_deg must be >= 0, got {}", self.noise_sigma_deg));
        }
        for (name, v) in [("lead_in_s", self.lead_in_s), ("lead_out_s", self.lead_out_s)] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be >= 0, got {v}"));
            }
        }
        let period = frames(self.period_s, self.fps);
        if period < 3 {
            return bad(format!("period_s {} spans fewer than 3 frames", self.period_s));
        }
        let lead_in = frames(self.lead_in_s, self.fps);
        let total = lead_in + self.reps as u64 * period + frames(self.lead_out_s, self.fps);
        let layout = Layout { lead_in, period, total };

        let (rep_start, rep_end) = layout.rep_window(self.reps);
        let mut spans: Vec<(u64, u64)> = Vec::new();
        for d in &self.distractors {
            if !(d.start_s.is_finite() && d.start_s >= 0.0) {
                return bad(format!("distractor start_s must be >= 0, got {}", d.start_s));
            }
            if !(d.duration_s > 0.0 && d.duration_s < self.period_s) {
                return bad(format!(
                    "distractor duration_s must lie in (0, period_s), got {}",
                    d.duration_s
                ));
            }
            if !(d.depth_deg.is_finite() && d.depth_deg >= 0.0 && d.depth_deg < self.standing_deg) {
                return bad(format!("distractor depth_deg out of range: {}", d.depth_deg));
            }
            let (s, e) = distractor_span(d, self.fps);
            if e > total {
                return bad(format!("distractor at {} s runs past the end of the series", d.start_s));
            }
            if self.reps > 0 && s < rep_end && rep_start < e {
                return bad(format!("distractor at {} s overlaps a repetition", d.start_s));
            }
            if spans.iter().any(|&(s2, e2)| s < e2 && s2 < e) {
                return bad(format!("distractor at {} s overlaps another distractor", d.start_s));
            }
            spans.push((s, e));
        }
        Ok(layout)
    }
}

fn distractor_span(d: &Distractor, fps: f64) -> (u64, u64) {
    let s = frames(d.start_s, fps);
    (s, s + frames(d.duration_s, fps).max(3))
}

/// Raised-cosine dip: 0 at both ends of `[0, len)`, 1 at the middle.
fn dip(pos: u64, len: u64) -> f64 {
    0.5 * (1.0 - (std::f64::consts::TAU * pos as f64 / len as f64).cos())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthAngles {
    pub angles: Vec<(u64, f64)>,
    /// Exact trough frame of each repetition.
    pub trough_frames: Vec<u64>,
}

pub fn generate_angle_series(spec: &SynthSpec) -> Result<SynthAngles> {
    let layout = spec.layout()?;
    let (rep_start, rep_end) = layout.rep_window(spec.reps);
    let mut angles: Vec<(u64, f64)> = (0..layout.total).map(|i| (i, spec.standing_deg)).collect();

    for (i, a) in angles.iter_mut() {
        if (rep_start..rep_end).contains(i) {
            *a -= spec.depth_deg * dip((*i - rep_start) % layout.period, layout.period);
        }
    }
    for d in &spec.distractors {
        let (s, e) = distractor_span(d, spec.fps);
        for i in s..e {
            angles[i as usize].1 -= d.depth_deg * dip(i - s, e - s);
        }
    }
    if spec.noise_sigma_deg > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let normal = Normal::new(0.0, spec.noise_sigma_deg).map_err(|e| Error::InvalidSpec(e.to_string()))?;
        for (_, a) in angles.iter_mut() {
            *a += normal.sample(&mut rng);
        }
    }
    let trough_frames = (0..spec.reps as u64)
        .map(|k| rep_start + k * layout.period + layout.period / 2)
        .collect();
    Ok(SynthAngles { angles, trough_frames })
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PoseOptions {
    /// Right-knee frames on which the view's error is staged: knee past the foot
    /// index (sagittal) or knee collapsed toward the midline (frontal).
    pub inject: Vec<RangeInclusive<u64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthPose {
    pub series: PoseSeries,
    /// Knee angle the geometry was built for, per frame (the waveform clamped to [5, 179]).
    pub target_angles: Vec<f64>,
    pub trough_frames: Vec<u64>,
    /// Ground-truth right-knee alert per frame for the generated view.
    pub alert_mask: Vec<bool>,
}

const SEGMENT: f64 = 0.25;
const VISIBILITY: f64 = 0.99;
const TOE_AHEAD: f64 = 0.10;
/// Shin lean needed to put the knee 0.05 past the toe: sin(lean) * SEGMENT = TOE_AHEAD + 0.05.
const PAST_TOE_SIN: f64 = (TOE_AHEAD + 0.05) / SEGMENT;
const COLLAPSE_RAD: f64 = std::f64::consts::FRAC_PI_6;

type V3 = [f64; 3];

fn add(a: V3, b: V3) -> V3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn sub(a: V3, b: V3) -> V3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn scale(a: V3, s: f64) -> V3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn dot(a: V3, b: V3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: V3, b: V3) -> V3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

struct Leg {
    hip: V3,
    knee: V3,
    ankle: V3,
    toe: V3,
}

/// Side view, subject facing +x (y grows downward). The shin leans forward by a
/// tenth of the flexion so the knee stays behind the toe unless `past_toe`.
fn sagittal_leg(angle_deg: f64, ankle: V3, past_toe: bool) -> Leg {
    let flex = (180.0 - angle_deg).to_radians();
    let shin = if past_toe { PAST_TOE_SIN.asin() } else { 0.1 * flex };
    let thigh = flex - shin;
    let knee = add(ankle, [SEGMENT * shin.sin(), -SEGMENT * shin.cos(), 0.0]);
    let hip = add(knee, [-SEGMENT * thigh.sin(), -SEGMENT * thigh.cos(), 0.0]);
    Leg {
        hip,
        knee,
        ankle,
        toe: add(ankle, [TOE_AHEAD, 0.02, 0.0]),
    }
}

/// Front view: the knee travels toward the camera (-z). With `inward_x != 0` the knee
/// is swung about the hip-ankle axis toward that x direction, which keeps both
/// segment lengths and therefore the knee angle.
fn frontal_leg(angle_deg: f64, ankle: V3, inward_x: f64) -> Leg {
    let half = 0.5 * (180.0 - angle_deg).to_radians();
    let knee = add(ankle, [0.0, -SEGMENT * half.cos(), -SEGMENT * half.sin()]);
    let hip = add(knee, [0.0, -SEGMENT * half.cos(), SEGMENT * half.sin()]);
    let mut leg = Leg {
        hip,
        knee,
        ankle,
        toe: add(ankle, [0.0, 0.03, -0.08]),
    };
    if inward_x != 0.0 {
        let axis = sub(ankle, hip);
        let u = scale(axis, 1.0 / dot(axis, axis).sqrt());
        let foot = add(hip, scale(u, dot(sub(knee, hip), u)));
        let radial = sub(knee, foot);
        let r = dot(radial, radial).sqrt();
        let n0 = scale(radial, 1.0 / r);
        let mut m = cross(u, n0);
        if m[0] * inward_x < 0.0 {
            m = scale(m, -1.0);
        }
        let (s, c) = COLLAPSE_RAD.sin_cos();
        leg.knee = add(foot, add(scale(n0, r * c), scale(m, r * s)));
    }
    leg
}

fn place(frame: &mut LandmarkFrame, side: KneeSide, leg: &Leg) {
    let lm = |p: V3| Landmark::new(p[0], p[1], p[2], VISIBILITY);
    frame.set(Joint::Hip, side, lm(leg.hip));
    frame.set(Joint::Knee, side, lm(leg.knee));
    frame.set(Joint::Ankle, side, lm(leg.ankle));
    frame.set(Joint::FootIndex, side, lm(leg.toe));
}

/// Builds landmark frames whose knee angles follow [`generate_angle_series`] for both
/// legs. Only the right knee receives injected errors.
pub fn generate_pose_series(spec: &SynthSpec, view: ViewPlane, options: &PoseOptions) -> Result<SynthPose> {
    let synth = generate_angle_series(spec)?;
    let mut frames = Vec::with_capacity(synth.angles.len());
    let mut target_angles = Vec::with_capacity(synth.angles.len());
    let mut alert_mask = Vec::with_capacity(synth.angles.len());

    for &(i, raw) in &synth.angles {
        let angle = raw.clamp(5.0, 179.0);
        let injected = options.inject.iter().any(|r| r.contains(&i));
        let mut frame = LandmarkFrame::new(i, spec.fps);
        match view {
            ViewPlane::Sagittal => {
                place(
                    &mut frame,
                    KneeSide::Right,
                    &sagittal_leg(angle, [0.50, 0.9, -0.1], injected),
                );
                place(
                    &mut frame,
                    KneeSide::Left,
                    &sagittal_leg(angle, [0.47, 0.9, 0.1], false),
                );
            }
            ViewPlane::Frontal => {
                // subject faces the camera: right leg on the image left
                let inward = if injected { 1.0 } else { 0.0 };
                place(
                    &mut frame,
                    KneeSide::Right,
                    &frontal_leg(angle, [0.45, 0.9, 0.0], inward),
                );
                place(&mut frame, KneeSide::Left, &frontal_leg(angle, [0.55, 0.9, 0.0], 0.0));
            }
        }
        frames.push(frame);
        target_angles.push(angle);
        alert_mask.push(injected);
    }
    Ok(SynthPose {
        series: PoseSeries::new(spec.fps, frames, format!("synth_seed{}", spec.seed))?,
        target_angles,
        trough_frames: synth.trough_frames,
        alert_mask,
    })
}

/// Exhaustive repetition count: every local minimum (flat bottoms reduced to their
/// middle sample) lying more than `min_depth_deg` below the series mean is a
/// candidate; the deepest candidate not within `min_gap_frames` of an accepted one is
/// accepted until none remain.
pub fn brute_force_count(angles: &[(u64, f64)], min_depth_deg: f64, min_gap_frames: u64) -> usize {
    let n = angles.len();
    if n < 3 {
        return 0;
    }
    let mean = angles.iter().map(|p| p.1).sum::<f64>() / n as f64;

    // scan maximal runs of equal values
    let mut candidates: Vec<(u64, f64)> = Vec::new();
    let mut start = 0;
    while start < n {
        let mut end = start;
        while end + 1 < n && angles[end + 1].1 == angles[start].1 {
            end += 1;
        }
        let v = angles[start].1;
        let interior = start > 0 && end + 1 < n;
        if interior && angles[start - 1].1 > v && angles[end + 1].1 > v && mean - v > min_depth_deg {
            candidates.push(angles[(start + end) / 2]);
        }
        start = end + 1;
    }

    let mut accepted: Vec<u64> = Vec::new();
    let mut used = vec![false; candidates.len()];
    loop {
        let mut best: Option<usize> = None;
        for (j, &(frame, v)) in candidates.iter().enumerate() {
            if used[j] || accepted.iter().any(|&a| a.abs_diff(frame) < min_gap_frames) {
                continue;
            }
            let better = match best {
                None => true,
                Some(b) => v < candidates[b].1 || (v == candidates[b].1 && frame < candidates[b].0),
            };
            if better {
                best = Some(j);
            }
        }
        match best {
            Some(j) => {
                used[j] = true;
                accepted.push(candidates[j].0);
            }
            None => break,
        }
    }
    accepted.len()
}
