use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod output;

#[derive(Debug, Parser)]
#[command(name = "egogate", version, about = "Audio-gated capture: train, trigger, gate and report")]
struct Cli {
    /// Seed for every random draw (shuffling, dropout, resampling).
    #[arg(long, global = true, default_value_t = 1337)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train the interaction classifier on a labeled clip corpus.
    Train(TrainArgs),
    /// Write the per-window probability trace of one recording.
    Classify(ClassifyArgs),
    /// Turn a probability trace into activation intervals.
    Trigger(TriggerArgs),
    /// Simulate frame gating and estimate bitrate.
    Gate(GateArgs),
    /// Precision/recall/F1/FPR over a list of thresholds.
    Sweep(SweepArgs),
    /// Per-class precision/recall/F1 at one threshold.
    Evaluate(EvaluateArgs),
    /// Duty-cycle power breakdown.
    Power(PowerArgs),
    /// Pool per-video gating reports.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, Args)]
struct WindowArgs {
    /// Window length in seconds.
    #[arg(long, default_value_t = 4.0)]
    window_dur: f64,
    /// Window hop in seconds.
    #[arg(long, default_value_t = 2.0)]
    hop: f64,
}

#[derive(Debug, Clone, Args)]
struct CorpusArgs {
    /// JSON Lines file with `clip_file` and `is_hand_object_interaction`.
    #[arg(long)]
    labels: PathBuf,
    /// Directory the `clip_file` entries are relative to.
    #[arg(long)]
    audio_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StrategyArg {
    ClassWeights,
    Smote,
    Undersample,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    window: WindowArgs,
    #[arg(long, value_enum, default_value_t = StrategyArg::ClassWeights)]
    strategy: StrategyArg,
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    /// Neighbors considered by SMOTE.
    #[arg(long, default_value_t = 5)]
    k_neighbors: usize,
    /// Model file to write.
    #[arg(long)]
    out: PathBuf,
    /// Training log (defaults to `<out>.log.json`).
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ClassifyArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    audio: PathBuf,
    #[command(flatten)]
    window: WindowArgs,
    /// Trace CSV to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TriggerKind {
    Fixed,
    Hysteresis,
}

#[derive(Debug, Args)]
struct TriggerArgs {
    /// Model file; requires --audio.
    #[arg(long, requires = "audio", conflicts_with = "trace")]
    model: Option<PathBuf>,
    #[arg(long, requires = "model")]
    audio: Option<PathBuf>,
    /// Precomputed trace CSV (`start_sec,p_c1`).
    #[arg(long, required_unless_present = "model")]
    trace: Option<PathBuf>,
    #[command(flatten)]
    window: WindowArgs,
    #[arg(long, value_enum, default_value_t = TriggerKind::Fixed)]
    trigger: TriggerKind,
    /// Fixed-duration trigger threshold.
    #[arg(long, default_value_t = egogate::TriggerConfig::DEFAULT_TAU)]
    tau: f64,
    /// Seconds kept on after each triggering window.
    #[arg(long, default_value_t = egogate::TriggerConfig::DEFAULT_T_FIXED)]
    t_fixed: f64,
    #[arg(long, default_value_t = egogate::TriggerConfig::DEFAULT_TAU_ON)]
    tau_on: f64,
    #[arg(long, default_value_t = egogate::TriggerConfig::DEFAULT_TAU_OFF)]
    tau_off: f64,
    /// Interval JSON to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct GateArgs {
    /// Activation interval JSON.
    #[arg(long, required_unless_present = "decimate", conflicts_with = "decimate")]
    intervals: Option<PathBuf>,
    /// Keep one frame per this many seconds instead of following intervals.
    #[arg(long)]
    decimate: Option<f64>,
    #[arg(long, default_value_t = 30.0)]
    fps: f64,
    /// Video duration in seconds.
    #[arg(long)]
    duration: f64,
    /// Bitrate of the ungated video, Mbps.
    #[arg(long)]
    full_bitrate: f64,
    /// Gating report JSON to write.
    #[arg(long)]
    out: PathBuf,
    /// Also write the captured-frame plan.
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Also write an ffmpeg blackout filter for the gaps.
    #[arg(long)]
    blackout: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    window: WindowArgs,
    /// Comma-separated thresholds.
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")]
    taus: Vec<f64>,
    /// Sweep CSV to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    window: WindowArgs,
    #[arg(long, default_value_t = 0.5)]
    tau: f64,
    /// Label for the report block.
    #[arg(long, default_value = "model")]
    name: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PowerArgs {
    /// JSON array of `{name, active_power_w, duty, idle_power_w?}`.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Gating report JSON files, one per video.
    #[arg(required = true)]
    reports: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("EGOGATE_LOG", "warn")).init();
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
