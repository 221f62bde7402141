//! Capture trigger strategies over a probability trace.
//!
//! * Fixed-OFF: every window with `p >= tau` switches capture on for
//!   `[t, t + t_fixed]`; overlapping spans are merged.
//! * Hysteresis: a two-state machine that arms at `p >= tau_on` and
//!   releases at `p < tau_off`, starting OFF. An interval runs from the
//!   arming sample's start time to the releasing sample's start time; if
//!   still ON at the end it closes one hop after the last sample.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TriggerError {
    #[error("probability trace is empty")]
    EmptyTrace,
    #[error("sample {index}: probability {p} outside [0, 1]")]
    Probability { index: usize, p: f64 },
    #[error("sample {index}: start times must increase by a constant hop of {hop}s")]
    Spacing { index: usize, hop: f64 },
    #[error("hop must be positive, got {0}")]
    Hop(f64),
    #[error("invalid trigger config: {0}")]
    Config(String),
    #[error("interval [{start}, {stop}] has non-positive length")]
    Interval { start: f64, stop: f64 },
    #[error("trace file line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for TriggerError {
    fn from(e: std::io::Error) -> Self {
        TriggerError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub start_sec: f64,
    pub p: f64,
}

/// Per-window `P(C1)` samples on a uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityTrace {
    samples: Vec<TraceSample>,
    hop_sec: f64,
}

const SPACING_TOLERANCE: f64 = 1e-6;

impl ProbabilityTrace {
    pub fn new(samples: Vec<TraceSample>, hop_sec: f64) -> Result<Self, TriggerError> {
        if !(hop_sec.is_finite() && hop_sec > 0.0) {
            return Err(TriggerError::Hop(hop_sec));
        }
        for (index, s) in samples.iter().enumerate() {
            if !(0.0..=1.0).contains(&s.p) {
                return Err(TriggerError::Probability { index, p: s.p });
            }
            if !s.start_sec.is_finite() {
                return Err(TriggerError::Spacing { index, hop: hop_sec });
            }
        }
        for (i, pair) in samples.windows(2).enumerate() {
            let step = pair[1].start_sec - pair[0].start_sec;
            if (step - hop_sec).abs() > SPACING_TOLERANCE {
                return Err(TriggerError::Spacing { index: i + 1, hop: hop_sec });
            }
        }
        Ok(Self { samples, hop_sec })
    }

    /// Samples at `start + i * hop`.
    pub fn from_probabilities(start_sec: f64, hop_sec: f64, probabilities: &[f64]) -> Result<Self, TriggerError> {
        let samples = probabilities
            .iter()
            .enumerate()
            .map(|(i, &p)| TraceSample {
                start_sec: start_sec + i as f64 * hop_sec,
                p,
            })
            .collect();
        Self::new(samples, hop_sec)
    }

    pub fn samples(&self) -> &[TraceSample] {
        &self.samples
    }

    pub fn hop_sec(&self) -> f64 {
        self.hop_sec
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn probabilities(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.p)
    }

    /// CSV with header `start_sec,p_c1`, six decimals.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "start_sec,p_c1")?;
        for s in &self.samples {
            writeln!(w, "{:.6},{:.6}", s.start_sec, s.p)?;
        }
        Ok(())
    }

    /// Parse the CSV written by [`Self::write_csv`]. The hop is inferred
    /// from the first two rows; `fallback_hop` is used for one-row traces.
    pub fn read_csv(reader: impl BufRead, fallback_hop: f64) -> Result<Self, TriggerError> {
        let mut samples = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if i == 0 {
                if line.replace(' ', "") != "start_sec,p_c1" {
                    return Err(TriggerError::Parse {
                        line: 1,
                        msg: format!("expected header `start_sec,p_c1`, got `{line}`"),
                    });
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let parse_err = |msg: String| TriggerError::Parse { line: i + 1, msg };
            let (a, b) = line
                .split_once(',')
                .ok_or_else(|| parse_err("expected two columns".into()))?;
            let start_sec = a.trim().parse::<f64>().map_err(|e| parse_err(e.to_string()))?;
            let p = b.trim().parse::<f64>().map_err(|e| parse_err(e.to_string()))?;
            samples.push(TraceSample { start_sec, p });
        }
        if samples.is_empty() {
            return Err(TriggerError::EmptyTrace);
        }
        let hop = if samples.len() >= 2 {
            samples[1].start_sec - samples[0].start_sec
        } else {
            fallback_hop
        };
        Self::new(samples, hop)
    }
}

/// A closed capture period `[start_sec, stop_sec]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActivationInterval {
    pub start_sec: f64,
    pub stop_sec: f64,
}

impl ActivationInterval {
    pub fn new(start_sec: f64, stop_sec: f64) -> Result<Self, TriggerError> {
        if !(start_sec.is_finite() && stop_sec.is_finite() && stop_sec > start_sec) {
            return Err(TriggerError::Interval {
                start: start_sec,
                stop: stop_sec,
            });
        }
        Ok(Self { start_sec, stop_sec })
    }

    pub fn duration(&self) -> f64 {
        self.stop_sec - self.start_sec
    }

    pub fn contains(&self, t: f64) -> bool {
        self.start_sec <= t && t <= self.stop_sec
    }
}

/// Sort and coalesce overlapping or touching intervals.
pub fn merge_intervals(intervals: &[ActivationInterval]) -> Result<Vec<ActivationInterval>, TriggerError> {
    for iv in intervals {
        ActivationInterval::new(iv.start_sec, iv.stop_sec)?;
    }
    let mut sorted = intervals.to_vec();
    sorted.sort_by(|a, b| a.start_sec.total_cmp(&b.start_sec));
    let mut out: Vec<ActivationInterval> = Vec::with_capacity(sorted.len());
    for iv in sorted {
        match out.last_mut() {
            Some(last) if iv.start_sec <= last.stop_sec => last.stop_sec = last.stop_sec.max(iv.stop_sec),
            _ => out.push(iv),
        }
    }
    Ok(out)
}

/// True if a list is sorted, disjoint and has no touching neighbours.
pub fn is_normalized(intervals: &[ActivationInterval]) -> bool {
    intervals.iter().all(|iv| iv.stop_sec > iv.start_sec)
        && intervals.windows(2).all(|w| w[0].stop_sec < w[1].start_sec)
}

pub fn total_duration(intervals: &[ActivationInterval]) -> f64 {
    intervals.iter().map(ActivationInterval::duration).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TriggerConfig {
    FixedOff { tau: f64, t_fixed: f64 },
    Hysteresis { tau_on: f64, tau_off: f64 },
}

impl TriggerConfig {
    pub const DEFAULT_TAU: f64 = 0.4;
    pub const DEFAULT_T_FIXED: f64 = 1.0;
    pub const DEFAULT_TAU_ON: f64 = 0.8;
    pub const DEFAULT_TAU_OFF: f64 = 0.7;

    pub fn fixed_off(tau: f64, t_fixed: f64) -> Result<Self, TriggerError> {
        let cfg = TriggerConfig::FixedOff { tau, t_fixed };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn hysteresis(tau_on: f64, tau_off: f64) -> Result<Self, TriggerError> {
        let cfg = TriggerConfig::Hysteresis { tau_on, tau_off };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), TriggerError> {
        let open_unit = |v: f64| v > 0.0 && v < 1.0;
        match *self {
            TriggerConfig::FixedOff { tau, t_fixed } => {
                if !open_unit(tau) {
                    return Err(TriggerError::Config(format!("tau {tau} must lie in (0, 1)")));
                }
                if !(t_fixed.is_finite() && t_fixed > 0.0) {
                    return Err(TriggerError::Config(format!("t_fixed {t_fixed} must be positive")));
                }
            }
            TriggerConfig::Hysteresis { tau_on, tau_off } => {
                if !open_unit(tau_on) || !open_unit(tau_off) {
                    return Err(TriggerError::Config("thresholds must lie in (0, 1)".into()));
                }
                if tau_on <= tau_off {
                    return Err(TriggerError::Config(format!(
                        "tau_on ({tau_on}) must exceed tau_off ({tau_off})"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn run(&self, trace: &ProbabilityTrace) -> Result<Vec<ActivationInterval>, TriggerError> {
        match *self {
            TriggerConfig::FixedOff { tau, t_fixed } => run_fixed_trigger(trace, tau, t_fixed),
            TriggerConfig::Hysteresis { tau_on, tau_off } => run_hysteresis(trace, tau_on, tau_off),
        }
    }
}

pub fn run_fixed_trigger(
    trace: &ProbabilityTrace,
    tau: f64,
    t_fixed: f64,
) -> Result<Vec<ActivationInterval>, TriggerError> {
    TriggerConfig::FixedOff { tau, t_fixed }.validate()?;
    if trace.is_empty() {
        return Err(TriggerError::EmptyTrace);
    }
    let spans: Vec<ActivationInterval> = trace
        .samples
        .iter()
        .filter(|s| s.p >= tau)
        .map(|s| ActivationInterval {
            start_sec: s.start_sec,
            stop_sec: s.start_sec + t_fixed,
        })
        .collect();
    merge_intervals(&spans)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TriggerState {
    Off,
    On,
}

/// One step of the hysteresis rule.
pub fn hysteresis_step(state: TriggerState, p: f64, tau_on: f64, tau_off: f64) -> TriggerState {
    match state {
        TriggerState::Off if p >= tau_on => TriggerState::On,
        TriggerState::On if p < tau_off => TriggerState::Off,
        s => s,
    }
}

pub fn run_hysteresis(
    trace: &ProbabilityTrace,
    tau_on: f64,
    tau_off: f64,
) -> Result<Vec<ActivationInterval>, TriggerError> {
    TriggerConfig::Hysteresis { tau_on, tau_off }.validate()?;
    if trace.is_empty() {
        return Err(TriggerError::EmptyTrace);
    }
    let mut state = TriggerState::Off;
    let mut opened_at = 0.0;
    let mut out = Vec::new();
    for s in &trace.samples {
        let next = hysteresis_step(state, s.p, tau_on, tau_off);
        match (state, next) {
            (TriggerState::Off, TriggerState::On) => opened_at = s.start_sec,
            (TriggerState::On, TriggerState::Off) => out.push(ActivationInterval {
                start_sec: opened_at,
                stop_sec: s.start_sec,
            }),
            _ => {}
        }
        state = next;
    }
    if state == TriggerState::On {
        let last = trace.samples.last().expect("nonempty");
        out.push(ActivationInterval {
            start_sec: opened_at,
            stop_sec: last.start_sec + trace.hop_sec,
        });
    }
    Ok(out)
}

pub fn write_intervals_json(intervals: &[ActivationInterval], w: impl Write) -> serde_json::Result<()> {
    serde_json::to_writer_pretty(w, intervals)
}

/// Read an activation-interval file and normalize it.
pub fn read_intervals_json(r: impl std::io::Read) -> Result<Vec<ActivationInterval>, TriggerError> {
    let raw: Vec<ActivationInterval> =
        serde_json::from_reader(r).map_err(|e| TriggerError::Parse { line: e.line(), msg: e.to_string() })?;
    merge_intervals(&raw)
}
