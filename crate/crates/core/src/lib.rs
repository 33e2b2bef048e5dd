//! Knee-rehabilitation analytics over pose-landmark timeseries.
//!
//! The pipeline reads per-frame hip, knee, ankle and foot-index landmarks, drops
//! incomplete frames, derives both knee angles and the side-view / front-view safety
//! flags, then counts and indexes exercise repetitions from the angle signal.
//!
//! ```text
//! parse_pose_csv -> drop_nan_rows -> compute_metrics -> write_metrics_csv
//!                                                    -> count_and_index -> render_plot
//! ```

pub mod counter;
pub mod error;
pub mod kinematics;
pub mod model;
pub mod plot;
pub mod session;
pub mod synth;

pub use counter::{
    center_series, count_and_index, find_negative_peaks, CenteredSeries, CounterParams, ExerciseIndex, Rep,
};
pub use error::{Error, Result};
pub use kinematics::{
    angle_law_of_cosines, angle_right_triangle_decomposition, compute_metrics, frontal_alert, knee_angle,
    sagittal_alert, AngleParams, Point3,
};
pub use model::{
    drop_nan_rows, parse_pose_csv, read_metrics_csv, write_metrics_csv, write_pose_csv, Joint, KneeMetricsRow,
    KneeSide, Landmark, LandmarkFrame, PoseSeries, ViewPlane,
};
pub use plot::render_plot;
pub use session::{
    accuracy_pct, analyze, emit_trim_commands, evaluate, read_labels, read_report, AnalyzeConfig, Evaluation,
    LabelEntry, SessionReport,
};
pub use synth::{brute_force_count, generate_angle_series, generate_pose_series, Distractor, PoseOptions, SynthSpec};
