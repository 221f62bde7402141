use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use egogate::audio::{load_wav, preprocess};
use egogate::balance::ResampleStrategy;
use egogate::dataset::{class_counts, read_label_file, ClipLabel};
use egogate::gating::{aggregate_reports, apply_intervals, decimate, emit_blackout_expr, report, GatingReport};
use egogate::metrics::{confusion, false_positive_rate, metrics, threshold_predictions, threshold_sweep, StrategyReport};
use egogate::pipeline::{classify_trace, clip_examples};
use egogate::power::{duty_cycle_power, PowerBreakdown, PowerComponent};
use egogate::train::{train, TrainLog};
use egogate::trigger::{read_intervals_json, total_duration, write_intervals_json};
use egogate::{AudioClip, ClassifierHead, FrameTimeline, Label, LabeledExample, ProbabilityTrace, TrainConfig, TriggerConfig, WindowSpec};
use serde::Serialize;

use crate::output::Outputs;
use crate::{
    ClassifyArgs, Cli, Command, CorpusArgs, EvaluateArgs, GateArgs, PowerArgs, ReportArgs, StrategyArg, SweepArgs,
    TrainArgs, TriggerArgs, TriggerKind, WindowArgs,
};

pub fn run(cli: Cli) -> Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::Train(a) => cmd_train(a, seed),
        Command::Classify(a) => cmd_classify(a),
        Command::Trigger(a) => cmd_trigger(a),
        Command::Gate(a) => cmd_gate(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Power(a) => cmd_power(a),
        Command::Report(a) => cmd_report(a),
    }
}

/// Fixed-point rounding for stable artifacts.
fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

impl WindowArgs {
    fn spec(self) -> Result<WindowSpec> {
        WindowSpec::new(self.window_dur, self.hop).context("invalid window")
    }
}

fn load_clip(path: &Path) -> Result<AudioClip> {
    let clip = load_wav(path)?;
    preprocess(clip).with_context(|| format!("cannot preprocess {}", path.display()))
}

fn load_model(path: &Path) -> Result<ClassifierHead> {
    let file = File::open(path).with_context(|| format!("cannot open model {}", path.display()))?;
    ClassifierHead::read_from(BufReader::new(file)).with_context(|| format!("invalid model file {}", path.display()))
}

fn read_labels(corpus: &CorpusArgs) -> Result<Vec<(PathBuf, Label)>> {
    let file = File::open(&corpus.labels).with_context(|| format!("cannot open {}", corpus.labels.display()))?;
    let rows = read_label_file(BufReader::new(file)).with_context(|| format!("in {}", corpus.labels.display()))?;
    ensure!(!rows.is_empty(), "{} lists no clips", corpus.labels.display());
    Ok(rows
        .into_iter()
        .map(|row: ClipLabel| (corpus.audio_dir.join(&row.clip_file), row.label()))
        .collect())
}

/// Window-level examples for every clip, in label-file order.
pub fn corpus_examples(corpus: &CorpusArgs, spec: WindowSpec) -> Result<Vec<LabeledExample>> {
    let mut out = Vec::new();
    for (path, label) in read_labels(corpus)? {
        let clip = load_clip(&path)?;
        let examples = clip_examples(&clip, label, spec).with_context(|| format!("{}", path.display()))?;
        out.extend(examples);
    }
    Ok(out)
}

/// Window scores and their clip labels, in label-file order.
fn corpus_scores(model: &ClassifierHead, corpus: &CorpusArgs, spec: WindowSpec) -> Result<(Vec<f64>, Vec<Label>)> {
    let mut scores = Vec::new();
    let mut truths = Vec::new();
    for (path, label) in read_labels(corpus)? {
        let clip = load_clip(&path)?;
        let trace = classify_trace(model, &clip, spec).with_context(|| format!("{}", path.display()))?;
        for p in trace.probabilities() {
            scores.push(p);
            truths.push(label);
        }
    }
    Ok((scores, truths))
}

#[derive(Serialize)]
struct TrainRecord<'a> {
    window_sec: f64,
    hop_sec: f64,
    config: &'a TrainConfig,
    #[serde(flatten)]
    log: &'a TrainLog,
}

fn cmd_train(a: TrainArgs, seed: u64) -> Result<()> {
    let spec = a.window.spec()?;
    let examples = corpus_examples(&a.corpus, spec)?;
    let counts = class_counts(&examples);
    log::info!("{} windows (C0={}, C1={})", examples.len(), counts[0], counts[1]);
    let strategy = match a.strategy {
        StrategyArg::ClassWeights => ResampleStrategy::ClassWeights,
        StrategyArg::Smote => ResampleStrategy::SmoteOversample {
            k_neighbors: a.k_neighbors,
            seed,
        },
        StrategyArg::Undersample => ResampleStrategy::RandomUndersample { seed },
    };
    let cfg = TrainConfig {
        epochs: a.epochs,
        seed,
        ..TrainConfig::default()
    };
    let model = train(&examples, &cfg, strategy)?;
    let log_path = a.log.unwrap_or_else(|| {
        let mut p = a.out.clone().into_os_string();
        p.push(".log.json");
        PathBuf::from(p)
    });
    let mut out = Outputs::new();
    out.stage(&a.out, &model.head.to_bytes())?;
    out.stage_json(
        &log_path,
        &TrainRecord {
            window_sec: spec.window_sec(),
            hop_sec: spec.hop_sec(),
            config: &cfg,
            log: &model.log,
        },
    )?;
    out.commit()?;
    println!(
        "trained on {} windows, counts after resampling C0={} C1={}, final loss {:.6}",
        examples.len(),
        model.log.counts_after[0],
        model.log.counts_after[1],
        model.log.final_loss
    );
    Ok(())
}

fn trace_csv(trace: &ProbabilityTrace) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    trace.write_csv(&mut buf)?;
    Ok(buf)
}

fn cmd_classify(a: ClassifyArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let clip = load_clip(&a.audio)?;
    let trace = classify_trace(&model, &clip, a.window.spec()?).with_context(|| format!("{}", a.audio.display()))?;
    let mut out = Outputs::new();
    out.stage(&a.out, &trace_csv(&trace)?)?;
    out.commit()?;
    println!("{} windows", trace.len());
    Ok(())
}

fn cmd_trigger(a: TriggerArgs) -> Result<()> {
    let spec = a.window.spec()?;
    let trace = match (&a.model, &a.audio, &a.trace) {
        (Some(model), Some(audio), None) => {
            let model = load_model(model)?;
            let clip = load_clip(audio)?;
            classify_trace(&model, &clip, spec).with_context(|| format!("{}", audio.display()))?
        }
        (None, None, Some(path)) => {
            let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
            ProbabilityTrace::read_csv(BufReader::new(file), spec.hop_sec())
                .with_context(|| format!("invalid trace {}", path.display()))?
        }
        _ => bail!("give either --model with --audio, or --trace"),
    };
    let config = match a.trigger {
        TriggerKind::Fixed => TriggerConfig::fixed_off(a.tau, a.t_fixed)?,
        TriggerKind::Hysteresis => TriggerConfig::hysteresis(a.tau_on, a.tau_off)?,
    };
    let intervals = config.run(&trace)?;
    let mut buf = Vec::new();
    write_intervals_json(&intervals, &mut buf)?;
    buf.push(b'\n');
    let mut out = Outputs::new();
    out.stage(&a.out, &buf)?;
    out.commit()?;
    println!("{} intervals, {:.2} s active", intervals.len(), total_duration(&intervals));
    Ok(())
}

fn rounded6(r: &GatingReport) -> GatingReport {
    GatingReport {
        frames_reduced_pct: round6(r.frames_reduced_pct),
        capture_fraction: round6(r.capture_fraction),
        full_bitrate_mbps: round6(r.full_bitrate_mbps),
        est_bitrate_mbps: round6(r.est_bitrate_mbps),
        ..*r
    }
}

fn print_report(r: &GatingReport) {
    let h = r.rounded();
    println!(
        "frames {}/{} captured, reduction {:.2}%, est. bitrate {:.2} Mbps",
        h.frames_captured, h.frames_total, h.frames_reduced_pct, h.est_bitrate_mbps
    );
}

fn cmd_gate(a: GateArgs) -> Result<()> {
    let timeline = FrameTimeline::new(a.fps, a.duration)?;
    let (plan, intervals) = match (&a.intervals, a.decimate) {
        (Some(path), None) => {
            let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
            let intervals =
                read_intervals_json(BufReader::new(file)).with_context(|| format!("malformed intervals {}", path.display()))?;
            (apply_intervals(timeline, &intervals), Some(intervals))
        }
        (None, Some(period)) => (decimate(timeline, period)?, None),
        _ => bail!("give either --intervals or --decimate"),
    };
    let r = report(&plan, a.full_bitrate)?;
    let mut out = Outputs::new();
    out.stage_json(&a.out, &rounded6(&r))?;
    if let Some(path) = &a.plan {
        out.stage_json(path, &plan.to_file())?;
    }
    if let Some(path) = &a.blackout {
        let intervals = match intervals {
            Some(ivs) => ivs,
            None => plan
                .captured_runs()
                .into_iter()
                .map(|[s, e]| egogate::ActivationInterval::new(s, e))
                .collect::<Result<_, _>>()?,
        };
        let mut expr = emit_blackout_expr(&intervals, a.duration);
        expr.push('\n');
        out.stage(path, expr.as_bytes())?;
    }
    out.commit()?;
    print_report(&r);
    Ok(())
}

fn cmd_sweep(a: SweepArgs) -> Result<()> {
    ensure!(!a.taus.is_empty(), "no thresholds given");
    let model = load_model(&a.model)?;
    let (scores, truths) = corpus_scores(&model, &a.corpus, a.window.spec()?)?;
    let points = threshold_sweep(&scores, &truths, &a.taus)?;
    let negatives: Vec<f64> = scores
        .iter()
        .zip(&truths)
        .filter(|(_, &y)| y == Label::NoInteraction)
        .map(|(&s, _)| s)
        .collect();
    let mut csv = String::from("tau,precision,recall,f1,fpr\n");
    for pt in &points {
        let fpr = if negatives.is_empty() {
            0.0
        } else {
            false_positive_rate(&negatives, pt.tau)?
        };
        csv.push_str(&format!(
            "{:.6},{:.6},{:.6},{:.6},{:.6}\n",
            pt.tau, pt.precision, pt.recall, pt.f1, fpr
        ));
    }
    let mut out = Outputs::new();
    out.stage(&a.out, csv.as_bytes())?;
    out.commit()?;
    println!("{} thresholds over {} windows", points.len(), scores.len());
    Ok(())
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let (scores, truths) = corpus_scores(&model, &a.corpus, a.window.spec()?)?;
    let preds = threshold_predictions(&scores, a.tau);
    let m = metrics(&confusion(&preds, &truths)?)?;
    for what in &m.zero_division {
        log::warn!("zero denominator in {what}; reported as 0");
    }
    let report = StrategyReport::new(a.name, a.tau, &m);
    let mut out = Outputs::new();
    out.stage_json(&a.out, &report)?;
    out.commit()?;
    for row in &report.rows {
        println!(
            "{:<14} P {:.2}  R {:.2}  F1 {:.2}  n {}",
            row.class, row.precision, row.recall, row.f1, row.support
        );
    }
    Ok(())
}

fn cmd_power(a: PowerArgs) -> Result<()> {
    let file = File::open(&a.config).with_context(|| format!("cannot open {}", a.config.display()))?;
    let components: Vec<PowerComponent> =
        serde_json::from_reader(BufReader::new(file)).with_context(|| format!("malformed power config {}", a.config.display()))?;
    ensure!(!components.is_empty(), "power config lists no components");
    let b = duty_cycle_power(&components)?;
    let rounded = PowerBreakdown {
        components: b
            .components
            .iter()
            .map(|c| egogate::power::ComponentDraw {
                name: c.name.clone(),
                average_power_w: round6(c.average_power_w),
            })
            .collect(),
        total_w: round6(b.total_w),
    };
    let mut out = Outputs::new();
    out.stage_json(&a.out, &rounded)?;
    out.commit()?;
    println!("total {:.2} W", b.total_w);
    Ok(())
}

fn cmd_report(a: ReportArgs) -> Result<()> {
    let mut reports = Vec::with_capacity(a.reports.len());
    for path in &a.reports {
        let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
        let r: GatingReport =
            serde_json::from_reader(BufReader::new(file)).with_context(|| format!("malformed report {}", path.display()))?;
        reports.push(r);
    }
    let pooled = aggregate_reports(&reports)?;
    let mut out = Outputs::new();
    out.stage_json(&a.out, &rounded6(&pooled))?;
    out.commit()?;
    print_report(&pooled);
    Ok(())
}
