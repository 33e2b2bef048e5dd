//! Knee angle computation and the two rule-based safety detectors.
//!
//! The knee angle is the angle at the knee between the thigh (knee to hip) and the
//! calf (knee to ankle): 180 degrees for a straight leg, about 90 for a deep squat.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Joint, KneeMetricsRow, KneeSide, Landmark, LandmarkFrame, PoseSeries, ViewPlane};

pub const DEFAULT_COLLINEAR_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleParams {
    pub view: ViewPlane,
    pub side: KneeSide,
    /// Normalized-x distance the knee may travel past the foot index before alerting.
    pub sagittal_margin: f64,
    /// Minimum |signed area x 2| of hip-knee-ankle before a frontal deviation counts.
    pub frontal_epsilon: f64,
    /// Segments at or below this length are treated as degenerate.
    pub collinear_tol: f64,
}

impl Default for AngleParams {
    fn default() -> Self {
        AngleParams {
            view: ViewPlane::Sagittal,
            side: KneeSide::Right,
            sagittal_margin: 0.0,
            frontal_epsilon: 0.0,
            collinear_tol: DEFAULT_COLLINEAR_TOL,
        }
    }
}

impl AngleParams {
    pub fn new(view: ViewPlane, side: KneeSide) -> Self {
        AngleParams {
            view,
            side,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("sagittal_margin", self.sagittal_margin),
            ("frontal_epsilon", self.frontal_epsilon),
            ("collinear_tol", self.collinear_tol),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParams(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    fn flatten(self, use_z: bool) -> Self {
        if use_z {
            self
        } else {
            Point3 { z: 0.0, ..self }
        }
    }

    pub fn dist_sq(self, other: Point3) -> f64 {
        let (dx, dy, dz) = (self.x - other.x, self.y - other.y, self.z - other.z);
        dx * dx + dy * dy + dz * dz
    }

    pub fn dist(self, other: Point3) -> f64 {
        self.dist_sq(other).sqrt()
    }
}

impl From<Landmark> for Point3 {
    fn from(l: Landmark) -> Self {
        Point3::new(l.x, l.y, l.z)
    }
}

fn check_segment(length: f64, tolerance: f64) -> Result<()> {
    if length > tolerance {
        Ok(())
    } else {
        Err(Error::DegenerateGeometry { length, tolerance })
    }
}

/// Angle at `b` in degrees from the three side lengths of triangle `abc`.
///
/// With `use_z == false` the points are projected onto the image plane first.
pub fn angle_law_of_cosines(a: Point3, b: Point3, c: Point3, use_z: bool, collinear_tol: f64) -> Result<f64> {
    let (a, b, c) = (a.flatten(use_z), b.flatten(use_z), c.flatten(use_z));
    let ab_sq = a.dist_sq(b);
    let bc_sq = b.dist_sq(c);
    let ac_sq = a.dist_sq(c);
    let (ab, bc) = (ab_sq.sqrt(), bc_sq.sqrt());
    check_segment(ab, collinear_tol)?;
    check_segment(bc, collinear_tol)?;
    let cos = ((bc_sq + ab_sq - ac_sq) / (2.0 * bc * ab)).clamp(-1.0, 1.0);
    Ok(cos.acos().to_degrees())
}

/// Knee angle from a reference pose and a displaced one, where the reference thigh
/// `a0-b` and calf `c0-b` are the hypotenuses of right triangles whose adjacent legs
/// are the displaced segments `a1-b` and `c1-b`:
///
/// `180 - acos(|a1 b| / |a0 b|) - acos(|c1 b| / |c0 b|)`.
pub fn angle_right_triangle_decomposition(
    a0: Point3,
    a1: Point3,
    c0: Point3,
    c1: Point3,
    b: Point3,
    collinear_tol: f64,
) -> Result<f64> {
    let ref_thigh = a0.dist(b);
    let ref_calf = c0.dist(b);
    check_segment(ref_thigh, collinear_tol)?;
    check_segment(ref_calf, collinear_tol)?;

    let deflection = |adjacent: f64, hypotenuse: f64| -> Result<f64> {
        let ratio = adjacent / hypotenuse;
        if ratio > 1.0 + collinear_tol {
            return Err(Error::ConstructionViolated {
                ratio,
                tolerance: collinear_tol,
            });
        }
        Ok(ratio.clamp(0.0, 1.0).acos())
    };
    let thigh = deflection(a1.dist(b), ref_thigh)?;
    let calf = deflection(c1.dist(b), ref_calf)?;
    Ok((std::f64::consts::PI - thigh - calf).to_degrees())
}

fn point(frame: &LandmarkFrame, joint: Joint, side: KneeSide) -> Result<Point3> {
    frame.require(joint, side).map(Point3::from)
}

/// Angle between thigh and calf for `params.side`. Frontal view uses depth, sagittal does not.
pub fn knee_angle(frame: &LandmarkFrame, params: &AngleParams) -> Result<f64> {
    knee_angle_for(frame, params.side, params.view, params.collinear_tol)
}

fn knee_angle_for(frame: &LandmarkFrame, side: KneeSide, view: ViewPlane, tol: f64) -> Result<f64> {
    let hip = point(frame, Joint::Hip, side)?;
    let knee = point(frame, Joint::Knee, side)?;
    let ankle = point(frame, Joint::Ankle, side)?;
    angle_law_of_cosines(hip, knee, ankle, view == ViewPlane::Frontal, tol)
}

/// Knee positioned in front of the foot index (side view).
///
/// The subject's facing direction is taken from the ankle-to-toe direction, so the
/// rule holds for either walking direction. An indeterminate facing never alerts.
pub fn sagittal_alert(frame: &LandmarkFrame, side: KneeSide, margin: f64) -> Result<bool> {
    let knee = frame.require(Joint::Knee, side)?;
    let ankle = frame.require(Joint::Ankle, side)?;
    let foot = frame.require(Joint::FootIndex, side)?;
    let facing = sign(foot.x - ankle.x);
    if facing == 0.0 {
        return Ok(false);
    }
    Ok((knee.x - foot.x) * facing > margin)
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Twice the signed area of hip-knee-ankle in the image plane.
pub fn collinearity_delta(hip: Landmark, knee: Landmark, ankle: Landmark) -> f64 {
    (knee.x - hip.x) * (ankle.y - hip.y) - (ankle.x - hip.x) * (knee.y - hip.y)
}

/// Knee collapsing toward the body midline off the hip-ankle line (front view).
pub fn frontal_alert(frame: &LandmarkFrame, side: KneeSide, epsilon: f64) -> Result<bool> {
    let hip = frame.require(Joint::Hip, side)?;
    let knee = frame.require(Joint::Knee, side)?;
    let ankle = frame.require(Joint::Ankle, side)?;
    let other_hip = frame.require(Joint::Hip, side.opposite())?;

    let delta = collinearity_delta(hip, knee, ankle);
    if delta.abs() <= epsilon {
        return Ok(false);
    }
    // delta = (ankle.y - hip.y) * (knee.x - x of the hip-ankle line at knee.y)
    let deviation = sign(delta) * sign(ankle.y - hip.y);
    let midline_x = 0.5 * (hip.x + other_hip.x);
    let toward_midline = sign(midline_x - hip.x);
    Ok(deviation != 0.0 && deviation == toward_midline)
}

/// Angles for both knees plus the alert flags of the configured view on every frame.
/// A frame whose geometry fails yields missing angles and cleared flags for that knee.
pub fn compute_metrics(series: &PoseSeries, params: &AngleParams) -> Vec<KneeMetricsRow> {
    series
        .frames
        .iter()
        .map(|frame| {
            let angle = |side| knee_angle_for(frame, side, params.view, params.collinear_tol).ok();
            let sag = |side| {
                params.view == ViewPlane::Sagittal
                    && sagittal_alert(frame, side, params.sagittal_margin).unwrap_or(false)
            };
            let front = |side| {
                params.view == ViewPlane::Frontal && frontal_alert(frame, side, params.frontal_epsilon).unwrap_or(false)
            };
            KneeMetricsRow {
                frame_index: frame.frame_index,
                timestamp_s: frame.timestamp_s,
                left_knee_angle_deg: angle(KneeSide::Left),
                right_knee_angle_deg: angle(KneeSide::Right),
                sagittal_alert_left: sag(KneeSide::Left),
                sagittal_alert_right: sag(KneeSide::Right),
                frontal_alert_left: front(KneeSide::Left),
                frontal_alert_right: front(KneeSide::Right),
            }
        })
        .collect()
}
