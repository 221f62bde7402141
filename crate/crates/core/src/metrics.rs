//! Classification metrics, threshold sweeps and false-trigger statistics.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Label;
use crate::trigger::ActivationInterval;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("{predictions} predictions but {truths} ground-truth labels")]
    LengthMismatch { predictions: usize, truths: usize },
    #[error("no examples to score")]
    Empty,
    #[error("recording duration must be positive, got {0}")]
    Duration(f64),
    #[error("ground-truth spans must be sorted, disjoint and of positive length")]
    TruthSpans,
}

/// Confusion cells with C1 (interaction) as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// Cells with C0 treated as positive.
    pub fn swapped(&self) -> Self {
        Self {
            tp: self.tn,
            fp: self.fn_,
            tn: self.tp,
            fn_: self.fp,
        }
    }

    pub fn scaled(&self, k: u64) -> Self {
        Self {
            tp: self.tp * k,
            fp: self.fp * k,
            tn: self.tn * k,
            fn_: self.fn_ * k,
        }
    }
}

pub fn confusion(predictions: &[Label], truths: &[Label]) -> Result<ConfusionCounts, MetricsError> {
    if predictions.len() != truths.len() {
        return Err(MetricsError::LengthMismatch {
            predictions: predictions.len(),
            truths: truths.len(),
        });
    }
    let mut c = ConfusionCounts::default();
    for (p, t) in predictions.iter().zip(truths) {
        match (p.is_positive(), t.is_positive()) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// `sum(v_k * s_k) / sum(s_k)`.
pub fn weighted_average(values: &[f64], supports: &[u64]) -> f64 {
    let total: u64 = supports.iter().sum();
    if total == 0 {
        return 0.0;
    }
    values.iter().zip(supports).map(|(v, &s)| v * s as f64).sum::<f64>() / total as f64
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassRow {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

/// Per-class rows plus the support-weighted average.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub no_interaction: ClassRow,
    pub interaction: ClassRow,
    pub weighted: ClassRow,
    /// Quantities whose denominator was zero and were reported as 0.
    pub zero_division: Vec<String>,
}

impl ClassMetrics {
    pub fn row(&self, label: Label) -> &ClassRow {
        match label {
            Label::NoInteraction => &self.no_interaction,
            Label::Interaction => &self.interaction,
        }
    }
}

fn positive_row(c: &ConfusionCounts, name: &str, flags: &mut Vec<String>) -> ClassRow {
    let precision = ratio(c.tp, c.tp + c.fp).unwrap_or_else(|| {
        flags.push(format!("{name}.precision"));
        0.0
    });
    let recall = ratio(c.tp, c.tp + c.fn_).unwrap_or_else(|| {
        flags.push(format!("{name}.recall"));
        0.0
    });
    ClassRow {
        precision,
        recall,
        f1: f1_score(precision, recall),
        support: c.tp + c.fn_,
    }
}

/// Precision, recall and F1 for both classes; class C0 is scored by
/// swapping the positive class. Zero denominators yield 0 and are listed
/// in `zero_division`.
pub fn metrics(counts: &ConfusionCounts) -> Result<ClassMetrics, MetricsError> {
    if counts.total() == 0 {
        return Err(MetricsError::Empty);
    }
    let mut flags = Vec::new();
    let no_interaction = positive_row(&counts.swapped(), "c0", &mut flags);
    let interaction = positive_row(counts, "c1", &mut flags);
    let supports = [no_interaction.support, interaction.support];
    let avg = |f: fn(&ClassRow) -> f64| weighted_average(&[f(&no_interaction), f(&interaction)], &supports);
    let weighted = ClassRow {
        precision: avg(|r| r.precision),
        recall: avg(|r| r.recall),
        f1: avg(|r| r.f1),
        support: supports.iter().sum(),
    };
    Ok(ClassMetrics {
        no_interaction,
        interaction,
        weighted,
        zero_division: flags,
    })
}

/// Label by `P(C1) >= tau`.
pub fn threshold_predictions(scores: &[f64], tau: f64) -> Vec<Label> {
    scores
        .iter()
        .map(|&p| if p >= tau { Label::Interaction } else { Label::NoInteraction })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub tau: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

/// C1 precision/recall/F1 at each threshold.
pub fn threshold_sweep(scores: &[f64], truths: &[Label], taus: &[f64]) -> Result<Vec<SweepPoint>, MetricsError> {
    taus.iter()
        .map(|&tau| {
            let counts = confusion(&threshold_predictions(scores, tau), truths)?;
            let m = metrics(&counts)?;
            Ok(SweepPoint {
                tau,
                precision: m.interaction.precision,
                recall: m.interaction.recall,
                f1: m.interaction.f1,
                support: m.interaction.support,
            })
        })
        .collect()
}

/// Fraction of known-negative clips scored `>= tau`.
pub fn false_positive_rate(negative_scores: &[f64], tau: f64) -> Result<f64, MetricsError> {
    if negative_scores.is_empty() {
        return Err(MetricsError::Empty);
    }
    let hits = negative_scores.iter().filter(|&&p| p >= tau).count();
    Ok(hits as f64 / negative_scores.len() as f64)
}

/// Annotated HOI spans of one recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthIntervals {
    pub spans: Vec<ActivationInterval>,
    pub duration_sec: f64,
}

impl GroundTruthIntervals {
    pub fn new(spans: Vec<ActivationInterval>, duration_sec: f64) -> Result<Self, MetricsError> {
        if !(duration_sec.is_finite() && duration_sec > 0.0) {
            return Err(MetricsError::Duration(duration_sec));
        }
        let ordered = spans.iter().all(|s| s.stop_sec > s.start_sec)
            && spans.windows(2).all(|w| w[0].stop_sec <= w[1].start_sec);
        if !ordered {
            return Err(MetricsError::TruthSpans);
        }
        Ok(Self { spans, duration_sec })
    }
}

fn overlaps(a: &ActivationInterval, b: &ActivationInterval) -> bool {
    a.start_sec < b.stop_sec && b.start_sec < a.stop_sec
}

/// Predicted intervals that share no time with any truth span.
pub fn false_positive_count(predicted: &[ActivationInterval], truth: &GroundTruthIntervals) -> usize {
    predicted
        .iter()
        .filter(|p| !truth.spans.iter().any(|t| overlaps(p, t)))
        .count()
}

/// False positives per minute of recording.
pub fn fppm(predicted: &[ActivationInterval], truth: &GroundTruthIntervals) -> f64 {
    false_positive_count(predicted, truth) as f64 / (truth.duration_sec / 60.0)
}

/// One strategy block of a classification report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyReport {
    pub strategy: String,
    pub threshold: f64,
    pub rows: Vec<ReportRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

impl StrategyReport {
    /// C0, C1 and weighted rows, values rounded to two decimals.
    pub fn new(strategy: impl Into<String>, threshold: f64, m: &ClassMetrics) -> Self {
        let row = |class: &str, r: &ClassRow| ReportRow {
            class: class.to_string(),
            precision: round2(r.precision),
            recall: round2(r.recall),
            f1: round2(r.f1),
            support: r.support,
        };
        Self {
            strategy: strategy.into(),
            threshold,
            rows: vec![
                row("C0 (No HOI)", &m.no_interaction),
                row("C1 (HOI)", &m.interaction),
                row("Weighted Avg", &m.weighted),
            ],
        }
    }
}
