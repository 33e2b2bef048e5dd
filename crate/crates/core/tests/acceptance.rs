//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each, and exits
//! non-zero if any fails. Fixtures come from the synthetic generator only.

use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kneerehab::counter::{center_series, count_and_index, find_negative_peaks, CounterParams, ExerciseIndex};
use kneerehab::kinematics::{
    angle_law_of_cosines, angle_right_triangle_decomposition, compute_metrics, frontal_alert, sagittal_alert,
    AngleParams, Point3, DEFAULT_COLLINEAR_TOL,
};
use kneerehab::model::{
    drop_nan_rows, write_metrics_csv, Joint, KneeSide, Landmark, LandmarkFrame, PoseSeries, Slot, ViewPlane,
};
use kneerehab::plot::render_svg;
use kneerehab::session::{accuracy_pct, evaluate, read_labels, write_synth_fixture};
use kneerehab::synth::{
    brute_force_count, generate_angle_series, generate_pose_series, Distractor, PoseOptions, SynthSpec,
};

const TOL: f64 = DEFAULT_COLLINEAR_TOL;

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn p(x: f64, y: f64, z: f64) -> Point3 {
    Point3::new(x, y, z)
}

fn dot_oracle(a: Point3, b: Point3, c: Point3) -> f64 {
    let u = [a.x - b.x, a.y - b.y, a.z - b.z];
    let v = [c.x - b.x, c.y - b.y, c.z - b.z];
    let dot = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
    let nu = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
    let nv = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    (dot / (nu * nv)).clamp(-1.0, 1.0).acos().to_degrees()
}

fn ac1_angle_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut triples = Vec::with_capacity(1000);
    while triples.len() < 1000 {
        let mut pt = || {
            p(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            )
        };
        let (a, b, c) = (pt(), pt(), pt());
        if a.dist(b) > 1e-3 && c.dist(b) > 1e-3 {
            triples.push((a, b, c));
        }
    }
    let start = Instant::now();
    let mut worst = 0.0f64;
    for &(a, b, c) in &triples {
        let got = angle_law_of_cosines(a, b, c, true, TOL).map_err(|e| e.to_string())?;
        worst = worst.max((got - dot_oracle(a, b, c)).abs());
    }
    let elapsed = start.elapsed();
    check(worst < 1e-9, || format!("max deviation {worst:e} deg >= 1e-9"))?;
    check(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    Ok(format!("1000 triples, max |diff| {worst:.2e} deg, {elapsed:?}"))
}

fn unit(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

fn ac2_decomposition_vs_cosines() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let b = p(
            rng.random_range(0.0..1.0),
            rng.random_range(0.0..1.0),
            rng.random_range(-0.5..0.5),
        );
        // thigh direction and a perpendicular folding direction
        let d = unit([
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ]);
        let r = [
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ];
        let proj = r[0] * d[0] + r[1] * d[1] + r[2] * d[2];
        let f = unit([r[0] - proj * d[0], r[1] - proj * d[1], r[2] - proj * d[2]]);
        let (thigh, calf) = (rng.random_range(0.1..0.5), rng.random_range(0.1..0.5));
        let alpha = rng.random_range(1.0f64..89.0).to_radians();
        let gamma = rng.random_range(1.0f64..89.0).to_radians();
        let at = |len: f64, dir: [f64; 3]| p(b.x + len * dir[0], b.y + len * dir[1], b.z + len * dir[2]);

        let a0 = at(thigh, d);
        let c0 = at(calf, [-d[0], -d[1], -d[2]]);
        let (sa, ca) = alpha.sin_cos();
        let (sg, cg) = gamma.sin_cos();
        let a1 = at(
            thigh * ca,
            [ca * d[0] + sa * f[0], ca * d[1] + sa * f[1], ca * d[2] + sa * f[2]],
        );
        let c1 = at(
            calf * cg,
            [-cg * d[0] + sg * f[0], -cg * d[1] + sg * f[1], -cg * d[2] + sg * f[2]],
        );

        let decomposed = angle_right_triangle_decomposition(a0, a1, c0, c1, b, TOL).map_err(|e| e.to_string())?;
        let cosines = angle_law_of_cosines(a1, b, c1, true, TOL).map_err(|e| e.to_string())?;
        let built = 180.0 - alpha.to_degrees() - gamma.to_degrees();
        check((decomposed - built).abs() < 1e-6, || {
            format!("decomposition {decomposed} vs construction {built}")
        })?;
        worst = worst.max((decomposed - cosines).abs());
    }
    check(worst < 1e-6, || format!("max |decomposed - cosines| = {worst:e} deg"))?;
    Ok(format!("100 geometries, max |diff| {worst:.2e} deg"))
}

fn count_angles(angles: &[(u64, f64)], params: &CounterParams) -> Result<ExerciseIndex, String> {
    let c = center_series(angles).map_err(|e| e.to_string())?;
    find_negative_peaks(&c, params).map_err(|e| e.to_string())
}

/// Repetitions 3 s apart; a 2.4 s minimum exercise time keeps consecutive troughs apart
/// while suppressing short distractors right next to a repetition.
fn ac3_synthetic_counting() -> Outcome {
    let params = CounterParams {
        min_exercise_seconds: 2.4,
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let start = Instant::now();
    let mut trials = 0;
    let mut max_noise = 0.0f64;
    for reps in [1u32, 5, 12, 31] {
        for trial in 0..25u64 {
            let depth = 80.0;
            let noise = rng.random_range(0.0..=0.1) * depth;
            max_noise = max_noise.max(noise);
            // a knee lift ending where the first rep starts, a leg shake after the last
            let lift = rng.random_range(0.2..0.5);
            let shake = rng.random_range(0.2..0.5);
            let spec = SynthSpec {
                reps,
                period_s: 3.0,
                depth_deg: depth,
                noise_sigma_deg: noise,
                fps: 30.0,
                seed: 1000 * reps as u64 + trial,
                distractors: vec![
                    Distractor {
                        start_s: 3.0 - lift,
                        duration_s: lift,
                        depth_deg: rng.random_range(15.0..40.0),
                    },
                    Distractor {
                        start_s: 3.0 + 3.0 * reps as f64,
                        duration_s: shake,
                        depth_deg: rng.random_range(15.0..40.0),
                    },
                ],
                ..Default::default()
            };
            let synth = generate_angle_series(&spec).map_err(|e| e.to_string())?;
            let idx = count_angles(&synth.angles, &params)?;
            check(idx.count == reps as usize, || {
                format!("reps={reps} seed={} noise={noise:.2}: counted {}", spec.seed, idx.count)
            })?;
            trials += 1;
        }
    }
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(10), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "{trials}/100 exact, noise up to {max_noise:.2} deg, {elapsed:?}"
    ))
}

fn population_std(vals: &[f64]) -> f64 {
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
}

fn ac4_oracle_sweep() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut disagreements = Vec::new();
    let mut total_reps = 0;
    for k in 0..200u64 {
        let reps = rng.random_range(1..=20);
        let period = rng.random_range(2.0..6.0);
        let depth = rng.random_range(40.0..100.0);
        let base = SynthSpec {
            reps,
            period_s: period,
            depth_deg: depth,
            noise_sigma_deg: rng.random_range(0.0..=0.1) * depth,
            fps: 30.0,
            seed: k,
            ..Default::default()
        };
        let clean = generate_angle_series(&SynthSpec {
            noise_sigma_deg: 0.0,
            ..base.clone()
        })
        .map_err(|e| e.to_string())?;
        let sigma = population_std(&clean.angles.iter().map(|a| a.1).collect::<Vec<_>>());
        let spec = SynthSpec {
            distractors: vec![
                Distractor {
                    start_s: 0.5,
                    duration_s: 1.5f64.min(0.9 * period),
                    depth_deg: rng.random_range(0.0..0.5) * sigma,
                },
                Distractor {
                    start_s: 3.0 + period * reps as f64 + 0.5,
                    duration_s: 1.5f64.min(0.9 * period),
                    depth_deg: rng.random_range(0.0..0.5) * sigma,
                },
            ],
            ..base
        };
        let synth = generate_angle_series(&spec).map_err(|e| e.to_string())?;
        let params = CounterParams {
            std_threshold: 0.5,
            min_exercise_seconds: rng.random_range(0.5..0.9) * period,
            fps: 30.0,
        };
        let got = count_angles(&synth.angles, &params)?.count;
        let sd = population_std(&synth.angles.iter().map(|a| a.1).collect::<Vec<_>>());
        let oracle = brute_force_count(&synth.angles, params.std_threshold * sd, params.min_distance_frames());
        if got != oracle {
            disagreements.push(format!("spec {k}: counter {got} vs oracle {oracle}"));
        }
        total_reps += got;
    }
    check(disagreements.is_empty(), || disagreements.join("; "))?;
    Ok(format!("200 specs, 0 disagreements ({total_reps} reps total)"))
}

fn ac5_affine_invariance() -> Outcome {
    let params = CounterParams {
        min_exercise_seconds: 2.0,
        ..Default::default()
    };
    let mut checked = 0;
    for seed in 0..20u64 {
        let spec = SynthSpec {
            reps: 3 + (seed % 10) as u32,
            noise_sigma_deg: 4.0,
            seed,
            ..Default::default()
        };
        let synth = generate_angle_series(&spec).map_err(|e| e.to_string())?;
        let base = count_angles(&synth.angles, &params)?;
        let base_locs: Vec<u64> = base.reps.iter().map(|r| r.frame_index).collect();
        for a in [0.5, 2.0, 10.0] {
            for b in [-50.0, 30.0] {
                let moved: Vec<(u64, f64)> = synth.angles.iter().map(|&(f, v)| (f, a * v + b)).collect();
                let idx = count_angles(&moved, &params)?;
                let locs: Vec<u64> = idx.reps.iter().map(|r| r.frame_index).collect();
                check(idx.count == base.count && locs == base_locs, || {
                    format!("seed {seed}, a={a}, b={b}: {locs:?} vs {base_locs:?}")
                })?;
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} transformed series identical to their originals"))
}

/// Labelled session totals and camera views.
const SESSIONS: [(&str, ViewPlane, u32); 9] = [
    ("IMG_1142.mp4", ViewPlane::Sagittal, 5),
    ("IMG_1143.mp4", ViewPlane::Sagittal, 12),
    ("IMG_1145.mp4", ViewPlane::Sagittal, 11),
    ("IMG_1147.mp4", ViewPlane::Sagittal, 14),
    ("IMG_1150.mp4", ViewPlane::Sagittal, 31),
    ("IMG_2407.mp4", ViewPlane::Sagittal, 12),
    ("IMG_2408.mp4", ViewPlane::Frontal, 27),
    ("IMG_2409.mp4", ViewPlane::Sagittal, 35),
    ("IMG_2410_5.mp4", ViewPlane::Frontal, 32),
];

fn ac6_accuracy_semantics(dir: &Path) -> Outcome {
    let lower = accuracy_pct(11, 12);
    check((lower - 91.67).abs() <= 0.01, || format!("accuracy(11, 12) = {lower}"))?;

    let mut labels = String::from("source_id,camera_view,exercise_total\n");
    for (i, (id, view, total)) in SESSIONS.iter().enumerate() {
        labels.push_str(&format!("{id},{view},{total}\n"));
        let spec = SynthSpec {
            reps: *total,
            period_s: 5.0,
            noise_sigma_deg: 2.0,
            seed: i as u64,
            ..Default::default()
        };
        let stem = id.trim_end_matches(".mp4");
        write_synth_fixture(&spec, *view, &PoseOptions::default(), dir, stem).map_err(|e| e.to_string())?;
    }
    let label_path = dir.join("labels.csv");
    std::fs::write(&label_path, labels).map_err(|e| e.to_string())?;
    let labels = read_labels(&label_path).map_err(|e| e.to_string())?;
    let eval = evaluate(&labels, dir, KneeSide::Right, &CounterParams::default()).map_err(|e| e.to_string())?;
    check(eval.missing.is_empty() && eval.files.len() == 9, || {
        format!("missing {:?}", eval.missing)
    })?;
    for f in &eval.files {
        check(f.accuracy_pct == 100.0, || {
            format!("{}: {} of {}", f.source_id, f.detected, f.actual)
        })?;
    }
    check(
        eval.min_accuracy_pct == Some(100.0) && eval.weighted_accuracy_pct == Some(100.0),
        || format!("overall {:?} / {:?}", eval.min_accuracy_pct, eval.weighted_accuracy_pct),
    )?;
    Ok(format!(
        "accuracy(11, 12) = {lower:.2}%; 9 profiles, {} reps, 100% per file and overall",
        eval.total_detected
    ))
}

fn lm(x: f64, y: f64, z: f64) -> Option<Landmark> {
    Landmark::new(x, y, z, 1.0)
}

fn ac7_safety_rules() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut sagittal_checked = 0;
    for _ in 0..50 {
        // facing either way; knee 0.05 past or behind the toe
        let facing: f64 = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let ankle_x = rng.random_range(0.3..0.7);
        let toe_x = ankle_x + facing * rng.random_range(0.05..0.12);
        for (offset, want) in [(0.05, true), (-0.05, false)] {
            let mut f = LandmarkFrame::new(0, 30.0);
            f.set(Joint::Knee, KneeSide::Right, lm(toe_x + facing * offset, 0.7, 0.0));
            f.set(Joint::Ankle, KneeSide::Right, lm(ankle_x, 0.9, 0.0));
            f.set(Joint::FootIndex, KneeSide::Right, lm(toe_x, 0.92, 0.0));
            let got = sagittal_alert(&f, KneeSide::Right, 0.0).map_err(|e| e.to_string())?;
            check(got == want, || {
                format!("knee offset {offset} facing {facing}: alert {got}")
            })?;
            sagittal_checked += 1;
        }
    }

    for _ in 0..50 {
        // hip, knee, ankle on one line
        let hip = (rng.random_range(0.3..0.45), rng.random_range(0.3..0.5));
        let ankle = (hip.0 + rng.random_range(-0.1..0.1), rng.random_range(0.8..0.95));
        let t = rng.random_range(0.2..0.8);
        let mut f = LandmarkFrame::new(0, 30.0);
        f.set(Joint::Hip, KneeSide::Right, lm(hip.0, hip.1, 0.0));
        f.set(
            Joint::Knee,
            KneeSide::Right,
            lm(hip.0 + t * (ankle.0 - hip.0), hip.1 + t * (ankle.1 - hip.1), 0.1),
        );
        f.set(Joint::Ankle, KneeSide::Right, lm(ankle.0, ankle.1, 0.0));
        f.set(Joint::Hip, KneeSide::Left, lm(1.0 - hip.0, hip.1, 0.0));
        let got = frontal_alert(&f, KneeSide::Right, 1e-12).map_err(|e| e.to_string())?;
        check(!got, || "collinear frame alerted".to_string())?;
    }

    let spec = SynthSpec {
        reps: 6,
        noise_sigma_deg: 2.0,
        seed: 70,
        ..Default::default()
    };
    // fourth repetition
    let opts = PoseOptions {
        inject: vec![360..=449],
    };
    let pose = generate_pose_series(&spec, ViewPlane::Frontal, &opts).map_err(|e| e.to_string())?;
    let rows = compute_metrics(&pose.series, &AngleParams::new(ViewPlane::Frontal, KneeSide::Right));
    let mismatched = rows
        .iter()
        .zip(&pose.alert_mask)
        .filter(|(r, &m)| r.frontal_alert_right != m)
        .count();
    check(mismatched == 0, || {
        format!("{mismatched} frames disagree with the collapse mask")
    })?;

    let opts = PoseOptions {
        inject: vec![100..=120, 300..=310],
    };
    let pose = generate_pose_series(&spec, ViewPlane::Sagittal, &opts).map_err(|e| e.to_string())?;
    let rows = compute_metrics(&pose.series, &AngleParams::new(ViewPlane::Sagittal, KneeSide::Right));
    let mismatched = rows
        .iter()
        .zip(&pose.alert_mask)
        .filter(|(r, &m)| r.sagittal_alert_right != m)
        .count();
    check(mismatched == 0, || {
        format!("{mismatched} frames disagree with the knee-past-toe mask")
    })?;

    for _ in 0..100 {
        let mut f = LandmarkFrame::new(0, 30.0);
        for slot in Slot::ALL {
            f.landmarks[slot.index()] = lm(rng.random_range(0.05..0.95), rng.random_range(0.05..0.95), 0.0);
        }
        for side in KneeSide::BOTH {
            let sag = sagittal_alert(&f, side, 0.0).map_err(|e| e.to_string())?;
            let front = frontal_alert(&f, side, 0.0).map_err(|e| e.to_string())?;
            let m = f.mirrored();
            let ms = f.mirrored_swapped();
            check(sag == sagittal_alert(&m, side, 0.0).unwrap(), || {
                "sagittal mirror".into()
            })?;
            check(sag == sagittal_alert(&ms, side.opposite(), 0.0).unwrap(), || {
                "sagittal mirror+swap".into()
            })?;
            check(front == frontal_alert(&ms, side.opposite(), 0.0).unwrap(), || {
                "frontal mirror+swap".into()
            })?;
        }
    }
    Ok(format!(
        "{sagittal_checked} sagittal frames, 50 collinear frames, both masks exact, 100 mirrored frames"
    ))
}

fn ac8_preprocessing(dir: &Path) -> Outcome {
    let spec = SynthSpec {
        reps: 8,
        period_s: 5.0,
        noise_sigma_deg: 3.0,
        seed: 8,
        ..Default::default()
    };
    let pose = generate_pose_series(&spec, ViewPlane::Sagittal, &PoseOptions::default()).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(8);

    // knock out landmarks on ~10% of frames
    let mut frames = pose.series.frames.clone();
    for f in frames.iter_mut() {
        if rng.random_bool(0.1) {
            let slot = Slot::ALL[rng.random_range(0..8)];
            f.landmarks[slot.index()] = None;
        }
    }
    let holed = PoseSeries::new(spec.fps, frames, "holed").map_err(|e| e.to_string())?;
    let clean = drop_nan_rows(&holed, 0.5).map_err(|e| e.to_string())?;
    let rows = compute_metrics(&clean, &AngleParams::default());
    let nan = rows
        .iter()
        .filter(|r| {
            !r.left_knee_angle_deg.is_some_and(f64::is_finite) || !r.right_knee_angle_deg.is_some_and(f64::is_finite)
        })
        .count();
    check(nan == 0, || {
        format!("{nan} rows with missing angles after preprocessing")
    })?;

    let full = compute_metrics(&pose.series, &AngleParams::default());
    let clean_path = dir.join("clean_metrics.csv");
    write_metrics_csv(&full, &clean_path).map_err(|e| e.to_string())?;

    let near_trough = |f: u64| pose.trough_frames.iter().any(|&t| t.abs_diff(f) <= 30);
    let mut dropped = 0;
    let gappy: Vec<_> = full
        .iter()
        .cloned()
        .map(|mut r| {
            if !near_trough(r.frame_index) && rng.random_bool(0.1) {
                r.right_knee_angle_deg = None;
                r.left_knee_angle_deg = None;
                dropped += 1;
            }
            r
        })
        .collect();
    let gappy_path = dir.join("gappy_metrics.csv");
    write_metrics_csv(&gappy, &gappy_path).map_err(|e| e.to_string())?;

    let params = CounterParams::default();
    let column = KneeSide::Right.angle_column();
    let (_, a) = count_and_index(&clean_path, column, &params).map_err(|e| e.to_string())?;
    let (_, b) = count_and_index(&gappy_path, column, &params).map_err(|e| e.to_string())?;
    check(a.count == spec.reps as usize, || format!("clean count {}", a.count))?;
    check(a.count == b.count, || format!("clean {} vs gappy {}", a.count, b.count))?;
    Ok(format!(
        "{} of {} frames kept with zero NaN; {dropped} NaN rows, count {} == clean {}",
        clean.len(),
        holed.len(),
        b.count,
        a.count
    ))
}

fn ac9_plot_contract() -> Outcome {
    let spec = SynthSpec {
        reps: 7,
        noise_sigma_deg: 3.0,
        seed: 9,
        ..Default::default()
    };
    let synth = generate_angle_series(&spec).map_err(|e| e.to_string())?;
    let params = CounterParams {
        min_exercise_seconds: 2.0,
        ..Default::default()
    };
    let c = center_series(&synth.angles).map_err(|e| e.to_string())?;
    let idx = find_negative_peaks(&c, &params).map_err(|e| e.to_string())?;
    let svg = render_svg(&c, &idx, &params);
    let markers = svg.matches("<circle class=\"rep-marker\"").count();
    check(markers == idx.count, || {
        format!("{markers} markers for count {}", idx.count)
    })?;
    check(svg.matches("<line class=\"threshold\"").count() == 1, || {
        "threshold line missing".into()
    })?;
    Ok(format!(
        "{markers} markers for count {}, threshold line present",
        idx.count
    ))
}

fn main() {
    let dir = tempfile::tempdir().expect("temp dir");
    let criteria: Vec<Criterion> = vec![
        ("AC1 angle oracle equivalence", Box::new(ac1_angle_oracle)),
        (
            "AC2 decomposition vs law of cosines",
            Box::new(ac2_decomposition_vs_cosines),
        ),
        ("AC3 synthetic counting exactness", Box::new(ac3_synthetic_counting)),
        ("AC4 brute-force oracle sweep", Box::new(ac4_oracle_sweep)),
        ("AC5 affine invariance", Box::new(ac5_affine_invariance)),
        (
            "AC6 accuracy metric semantics",
            Box::new(|| ac6_accuracy_semantics(&dir.path().join("ac6"))),
        ),
        ("AC7 safety rules", Box::new(ac7_safety_rules)),
        (
            "AC8 preprocessing",
            Box::new(|| {
                std::fs::create_dir_all(dir.path().join("ac8")).map_err(|e| e.to_string())?;
                ac8_preprocessing(&dir.path().join("ac8"))
            }),
        ),
        ("AC9 plot contract", Box::new(ac9_plot_contract)),
    ];
    let mut failed = 0;
    for (name, run) in &criteria {
        match run() {
            Ok(detail) => println!("[PASS] {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
