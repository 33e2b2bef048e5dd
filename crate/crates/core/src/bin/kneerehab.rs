use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use kneerehab::counter::{CounterParams, DEFAULT_MIN_EXERCISE_SECONDS, DEFAULT_STD_THRESHOLD};
use kneerehab::kinematics::{AngleParams, DEFAULT_COLLINEAR_TOL};
use kneerehab::model::{KneeSide, ViewPlane, DEFAULT_FPS, DEFAULT_VISIBILITY_MIN};
use kneerehab::session::{
    analyze, emit_trim_commands, evaluate, read_labels, read_report, write_synth_fixture, AnalyzeConfig,
};
use kneerehab::synth::{Distractor, PoseOptions, SynthSpec};
use kneerehab::Error;

#[derive(Parser)]
#[command(
    name = "kneerehab",
    version,
    about = "Knee angles, safety alerts and repetition counts from pose CSV files"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyse one pose CSV: metrics CSV, plot, report JSON, session index.
    Analyze(AnalyzeArgs),
    /// Score repetition counts in a directory of metrics CSVs against a label file.
    Evaluate(EvaluateArgs),
    /// Print one ffmpeg trim command per indexed repetition of a report.
    Trim(TrimArgs),
    /// Write a synthetic pose CSV, metrics CSV and ground-truth sidecar.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ViewArg {
    Sagittal,
    Frontal,
}

impl From<ViewArg> for ViewPlane {
    fn from(v: ViewArg) -> Self {
        match v {
            ViewArg::Sagittal => ViewPlane::Sagittal,
            ViewArg::Frontal => ViewPlane::Frontal,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SideArg {
    Left,
    Right,
}

impl From<SideArg> for KneeSide {
    fn from(s: SideArg) -> Self {
        match s {
            SideArg::Left => KneeSide::Left,
            SideArg::Right => KneeSide::Right,
        }
    }
}

#[derive(Args)]
struct CounterArgs {
    #[arg(long, default_value_t = DEFAULT_FPS)]
    fps: f64,
    #[arg(long, default_value_t = DEFAULT_STD_THRESHOLD)]
    std_threshold: f64,
    #[arg(long, default_value_t = DEFAULT_MIN_EXERCISE_SECONDS)]
    min_exercise_seconds: f64,
}

impl CounterArgs {
    fn params(&self) -> CounterParams {
        CounterParams {
            std_threshold: self.std_threshold,
            min_exercise_seconds: self.min_exercise_seconds,
            fps: self.fps,
        }
    }
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Pose CSV.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "sagittal")]
    view: ViewArg,
    #[arg(long, value_enum, default_value = "right")]
    side: SideArg,
    #[command(flatten)]
    counter: CounterArgs,
    #[arg(long, default_value_t = DEFAULT_VISIBILITY_MIN)]
    visibility_min: f64,
    /// Normalized-x tolerance before the knee counts as past the foot index.
    #[arg(long, default_value_t = 0.0)]
    sagittal_margin: f64,
    /// Collinearity tolerance for the inward-collapse rule.
    #[arg(long, default_value_t = 0.0)]
    frontal_epsilon: f64,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Plot path (default `<out-dir>/<source>_plot.svg`).
    #[arg(long)]
    plot: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Label CSV with columns source_id,camera_view,exercise_total.
    #[arg(long)]
    labels: PathBuf,
    /// Directory holding `<source>_metrics.csv` or `<source>.csv` files.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "right")]
    side: SideArg,
    #[command(flatten)]
    counter: CounterArgs,
    /// Also write `evaluation.json` here.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct TrimArgs {
    /// Report JSON written by `analyze`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    video: PathBuf,
    #[arg(long, default_value_t = 2.0)]
    margin_seconds: f64,
    #[arg(long, default_value_t = DEFAULT_FPS)]
    fps: f64,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 5)]
    reps: u32,
    #[arg(long, default_value_t = 3.0)]
    period_seconds: f64,
    #[arg(long, default_value_t = 175.0)]
    standing: f64,
    #[arg(long, default_value_t = 80.0)]
    depth: f64,
    /// Gaussian noise sigma in degrees.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// `start_s:duration_s:depth_deg`, repeatable.
    #[arg(long = "distractor", value_parser = parse_distractor)]
    distractors: Vec<Distractor>,
    /// Inclusive frame range `first-last` with a staged right-knee error, repeatable.
    #[arg(long = "inject", value_parser = parse_range)]
    inject: Vec<(u64, u64)>,
    #[arg(long, default_value_t = 3.0)]
    lead_in_seconds: f64,
    #[arg(long, default_value_t = 3.0)]
    lead_out_seconds: f64,
    #[arg(long, default_value_t = DEFAULT_FPS)]
    fps: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "sagittal")]
    view: ViewArg,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// File stem for the generated files.
    #[arg(long, default_value = "synth")]
    name: String,
}

fn parse_distractor(s: &str) -> Result<Distractor, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [start, dur, depth] = parts.as_slice() else {
        return Err(format!("expected start:duration:depth, got `{s}`"));
    };
    let num = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}"));
    Ok(Distractor {
        start_s: num(start)?,
        duration_s: num(dur)?,
        depth_deg: num(depth)?,
    })
}

fn parse_range(s: &str) -> Result<(u64, u64), String> {
    let (a, b) = s
        .split_once('-')
        .ok_or_else(|| format!("expected first-last, got `{s}`"))?;
    let a: u64 = a.trim().parse().map_err(|e| format!("`{a}`: {e}"))?;
    let b: u64 = b.trim().parse().map_err(|e| format!("`{b}`: {e}"))?;
    if b < a {
        return Err(format!("empty range `{s}`"));
    }
    Ok((a, b))
}

fn run_analyze(args: AnalyzeArgs) -> Result<(), Error> {
    let config = AnalyzeConfig {
        input: args.input,
        angle: AngleParams {
            view: args.view.into(),
            side: args.side.into(),
            sagittal_margin: args.sagittal_margin,
            frontal_epsilon: args.frontal_epsilon,
            collinear_tol: DEFAULT_COLLINEAR_TOL,
        },
        counter: args.counter.params(),
        visibility_min: args.visibility_min,
        out_dir: args.out_dir,
        plot: args.plot,
    };
    let (report, outputs) = analyze(&config)?;
    println!("{}", report.count);
    eprintln!(
        "{}: {} reps over {} frames; report {}",
        report.source_id,
        report.count,
        report.frames_analyzed,
        outputs.report.display()
    );
    Ok(())
}

fn run_evaluate(args: EvaluateArgs) -> Result<(), Error> {
    let labels = read_labels(&args.labels)?;
    let eval = evaluate(&labels, &args.input, args.side.into(), &args.counter.params())?;
    print!("{}", eval.to_csv());
    if let (Some(lo), Some(hi), Some(w)) = (eval.min_accuracy_pct, eval.max_accuracy_pct, eval.weighted_accuracy_pct) {
        eprintln!(
            "accuracy range {lo:.2}%-{hi:.2}%, weighted {w:.2}% ({} detected / {} labelled)",
            eval.total_detected, eval.total_actual
        );
    }
    if let Some(dir) = args.out_dir {
        std::fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        let path = dir.join("evaluation.json");
        let json = serde_json::to_string_pretty(&eval).expect("evaluation serializes");
        std::fs::write(&path, json + "\n").map_err(|e| io_err(&path, e))?;
    }
    if !eval.missing.is_empty() {
        return Err(Error::Data(format!("no metrics file for: {}", eval.missing.join(", "))));
    }
    Ok(())
}

fn io_err(path: &std::path::Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn run_trim(args: TrimArgs) -> Result<(), Error> {
    let report = read_report(&args.input)?;
    for cmd in emit_trim_commands(&report, &args.video, args.margin_seconds, args.fps)? {
        println!("{cmd}");
    }
    Ok(())
}

fn run_synth(args: SynthArgs) -> Result<(), Error> {
    let spec = SynthSpec {
        reps: args.reps,
        period_s: args.period_seconds,
        standing_deg: args.standing,
        depth_deg: args.depth,
        noise_sigma_deg: args.noise,
        distractors: args.distractors,
        fps: args.fps,
        seed: args.seed,
        lead_in_s: args.lead_in_seconds,
        lead_out_s: args.lead_out_seconds,
    };
    let options = PoseOptions {
        inject: args.inject.into_iter().map(|(a, b)| a..=b).collect(),
    };
    let files = write_synth_fixture(&spec, args.view.into(), &options, &args.out_dir, &args.name)?;
    for p in [&files.pose, &files.metrics, &files.truth] {
        println!("{}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Analyze(a) => run_analyze(a),
        Command::Evaluate(a) => run_evaluate(a),
        Command::Trim(a) => run_trim(a),
        Command::Synth(a) => run_synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
