//! Offline frame gating: which frames of a video timeline would have been
//! captured, how many frames that saves, and the implied bitrate.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trigger::ActivationInterval;

/// Decimation baseline period: one frame every five seconds (0.2 FPS).
pub const DEFAULT_DECIMATION_PERIOD_SEC: f64 = 5.0;

#[derive(Debug, Error, PartialEq)]
pub enum GatingError {
    #[error("fps must be positive, got {0}")]
    Fps(f64),
    #[error("duration must be positive, got {0}")]
    Duration(f64),
    #[error("timeline has no frames")]
    EmptyTimeline,
    #[error("full bitrate must be positive, got {0}")]
    Bitrate(f64),
    #[error("decimation period must be positive, got {0}")]
    Period(f64),
    #[error("no reports to aggregate")]
    NothingToAggregate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameTimeline {
    pub fps: f64,
    pub duration_sec: f64,
}

impl FrameTimeline {
    pub fn new(fps: f64, duration_sec: f64) -> Result<Self, GatingError> {
        if !(fps.is_finite() && fps > 0.0) {
            return Err(GatingError::Fps(fps));
        }
        if !(duration_sec.is_finite() && duration_sec > 0.0) {
            return Err(GatingError::Duration(duration_sec));
        }
        Ok(Self { fps, duration_sec })
    }

    /// `floor(duration * fps)`, tolerant of representation error.
    pub fn frame_count(&self) -> usize {
        (self.duration_sec * self.fps + 1e-9).floor() as usize
    }

    pub fn timestamp(&self, frame: usize) -> f64 {
        frame as f64 / self.fps
    }
}

/// Per-frame capture decisions.
#[derive(Debug, Clone, PartialEq)]
pub struct GatingPlan {
    pub timeline: FrameTimeline,
    pub captured: Vec<bool>,
}

impl GatingPlan {
    pub fn frames_captured(&self) -> usize {
        self.captured.iter().filter(|&&c| c).count()
    }

    /// Maximal runs of captured frames as `[first_ts, one_past_last_ts)`.
    pub fn captured_runs(&self) -> Vec<[f64; 2]> {
        let mut runs = Vec::new();
        let mut start = None;
        for (i, &c) in self.captured.iter().chain(std::iter::once(&false)).enumerate() {
            match (c, start) {
                (true, None) => start = Some(i),
                (false, Some(s)) => {
                    runs.push([self.timeline.timestamp(s), self.timeline.timestamp(i)]);
                    start = None;
                }
                _ => {}
            }
        }
        runs
    }

    pub fn to_file(&self) -> GatingPlanFile {
        GatingPlanFile {
            fps: self.timeline.fps,
            duration_sec: self.timeline.duration_sec,
            captured_intervals: self.captured_runs(),
        }
    }
}

/// Run-length serialization of a [`GatingPlan`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatingPlanFile {
    pub fps: f64,
    pub duration_sec: f64,
    pub captured_intervals: Vec<[f64; 2]>,
}

impl GatingPlanFile {
    pub fn to_plan(&self) -> Result<GatingPlan, GatingError> {
        let timeline = FrameTimeline::new(self.fps, self.duration_sec)?;
        let intervals: Vec<ActivationInterval> = self
            .captured_intervals
            .iter()
            .filter(|[a, b]| b > a)
            .map(|&[start_sec, stop_sec]| ActivationInterval { start_sec, stop_sec })
            .collect();
        Ok(apply_intervals(timeline, &intervals))
    }
}

/// Frame `i` (at `i / fps`) is captured iff `start <= t < stop` for some
/// interval.
pub fn apply_intervals(timeline: FrameTimeline, intervals: &[ActivationInterval]) -> GatingPlan {
    let mut sorted = intervals.to_vec();
    sorted.sort_by(|a, b| a.start_sec.total_cmp(&b.start_sec));
    let n = timeline.frame_count();
    let mut captured = vec![false; n];
    let mut next = 0;
    // Reaching furthest stop among intervals whose start has been passed.
    let mut reach = f64::NEG_INFINITY;
    for (i, slot) in captured.iter_mut().enumerate() {
        let t = timeline.timestamp(i);
        while next < sorted.len() && sorted[next].start_sec <= t {
            reach = reach.max(sorted[next].stop_sec);
            next += 1;
        }
        *slot = t < reach;
    }
    GatingPlan { timeline, captured }
}

/// Keep the first frame at or after each multiple of `period_sec`.
pub fn decimate(timeline: FrameTimeline, period_sec: f64) -> Result<GatingPlan, GatingError> {
    if !(period_sec.is_finite() && period_sec > 0.0) {
        return Err(GatingError::Period(period_sec));
    }
    let n = timeline.frame_count();
    let mut captured = vec![false; n];
    let mut k = 0u64;
    loop {
        let mark = k as f64 * period_sec;
        let mut i = (mark * timeline.fps).ceil().max(0.0) as usize;
        // correct for rounding in either direction
        while i > 0 && timeline.timestamp(i - 1) >= mark {
            i -= 1;
        }
        while timeline.timestamp(i) < mark {
            i += 1;
        }
        if i >= n {
            break;
        }
        captured[i] = true;
        k += 1;
    }
    Ok(GatingPlan { timeline, captured })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GatingReport {
    pub frames_total: usize,
    pub frames_captured: usize,
    pub frames_reduced_pct: f64,
    pub capture_fraction: f64,
    pub full_bitrate_mbps: f64,
    pub est_bitrate_mbps: f64,
}

/// Bitrate under the linear duty model: `full * capture_fraction`.
pub fn estimate_bitrate(full_bitrate_mbps: f64, frames_reduced_pct: f64) -> f64 {
    full_bitrate_mbps * (1.0 - frames_reduced_pct / 100.0)
}

fn round_to(x: f64, decimals: i32) -> f64 {
    let scale = 10f64.powi(decimals);
    (x * scale).round() / scale
}

impl GatingReport {
    fn from_counts(frames_total: usize, frames_captured: usize, full_bitrate_mbps: f64) -> Result<Self, GatingError> {
        if frames_total == 0 {
            return Err(GatingError::EmptyTimeline);
        }
        if !(full_bitrate_mbps.is_finite() && full_bitrate_mbps > 0.0) {
            return Err(GatingError::Bitrate(full_bitrate_mbps));
        }
        let capture_fraction = frames_captured as f64 / frames_total as f64;
        Ok(Self {
            frames_total,
            frames_captured,
            frames_reduced_pct: 100.0 * (1.0 - capture_fraction),
            capture_fraction,
            full_bitrate_mbps,
            est_bitrate_mbps: full_bitrate_mbps * capture_fraction,
        })
    }

    /// Percentages and Mbps to 2 decimals, the capture fraction to 6.
    pub fn rounded(&self) -> Self {
        Self {
            frames_reduced_pct: round_to(self.frames_reduced_pct, 2),
            capture_fraction: round_to(self.capture_fraction, 6),
            full_bitrate_mbps: round_to(self.full_bitrate_mbps, 2),
            est_bitrate_mbps: round_to(self.est_bitrate_mbps, 2),
            ..*self
        }
    }
}

pub fn report(plan: &GatingPlan, full_bitrate_mbps: f64) -> Result<GatingReport, GatingError> {
    GatingReport::from_counts(plan.captured.len(), plan.frames_captured(), full_bitrate_mbps)
}

/// Pool several videos: frame counts add up, so the pooled reduction is
/// the frame-weighted mean of the per-video reductions. Bitrates are
/// frame-weighted as well.
pub fn aggregate_reports(reports: &[GatingReport]) -> Result<GatingReport, GatingError> {
    if reports.is_empty() {
        return Err(GatingError::NothingToAggregate);
    }
    let total: usize = reports.iter().map(|r| r.frames_total).sum();
    let captured: usize = reports.iter().map(|r| r.frames_captured).sum();
    let full = reports
        .iter()
        .map(|r| r.full_bitrate_mbps * r.frames_total as f64)
        .sum::<f64>()
        / total as f64;
    let mut pooled = GatingReport::from_counts(total, captured, full)?;
    pooled.est_bitrate_mbps = reports
        .iter()
        .map(|r| r.est_bitrate_mbps * r.frames_total as f64)
        .sum::<f64>()
        / total as f64;
    Ok(pooled)
}

/// Gaps of `[0, duration)` not covered by any interval.
pub fn complement(intervals: &[ActivationInterval], duration_sec: f64) -> Vec<[f64; 2]> {
    let mut sorted = intervals.to_vec();
    sorted.sort_by(|a, b| a.start_sec.total_cmp(&b.start_sec));
    let mut gaps = Vec::new();
    let mut cursor = 0.0f64;
    for iv in &sorted {
        let start = iv.start_sec.min(duration_sec);
        if start > cursor {
            gaps.push([cursor, start]);
        }
        cursor = cursor.max(iv.stop_sec);
        if cursor >= duration_sec {
            break;
        }
    }
    if cursor < duration_sec {
        gaps.push([cursor, duration_sec]);
    }
    gaps
}

/// `between(t,a,b)+...` over every span that should be blacked out, six
/// decimals per bound. Empty when the intervals cover the whole video.
pub fn emit_blackout_expr(intervals: &[ActivationInterval], duration_sec: f64) -> String {
    let mut expr = String::new();
    for (i, [a, b]) in complement(intervals, duration_sec).into_iter().enumerate() {
        if i > 0 {
            expr.push('+');
        }
        write!(expr, "between(t,{a:.6},{b:.6})").expect("writing to a String cannot fail");
    }
    expr
}

/// Wrap a blackout expression in a full-frame black `drawbox` filter.
pub fn blackout_filter(expr: &str) -> Option<String> {
    if expr.is_empty() {
        return None;
    }
    Some(format!("drawbox=x=0:y=0:w=iw:h=ih:color=black:t=fill:enable='{expr}'"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(a: f64, b: f64) -> ActivationInterval {
        ActivationInterval::new(a, b).unwrap()
    }

    fn tl(fps: f64, d: f64) -> FrameTimeline {
        FrameTimeline::new(fps, d).unwrap()
    }

    #[test]
    fn interval_examples() {
        let timeline = tl(2.0, 5.0);
        assert_eq!(apply_intervals(timeline, &[]).frames_captured(), 0);
        let full = apply_intervals(timeline, &[iv(0.0, 5.0)]);
        assert_eq!(full.frames_captured(), 10);
        assert_eq!(report(&full, 5.47).unwrap().frames_reduced_pct, 0.0);
        let plan = apply_intervals(timeline, &[iv(1.0, 2.0)]);
        let on: Vec<usize> = (0..10).filter(|&i| plan.captured[i]).collect();
        assert_eq!(on, vec![2, 3]);
    }

    #[test]
    fn overlapping_unsorted_intervals() {
        let plan = apply_intervals(tl(1.0, 10.0), &[iv(5.0, 6.0), iv(0.0, 3.0), iv(1.0, 2.0)]);
        let on: Vec<usize> = (0..10).filter(|&i| plan.captured[i]).collect();
        assert_eq!(on, vec![0, 1, 2, 5]);
    }

    #[test]
    fn decimation_examples() {
        let plan = decimate(tl(30.0, 10.0), 5.0).unwrap();
        let on: Vec<usize> = (0..300).filter(|&i| plan.captured[i]).collect();
        assert_eq!(on, vec![0, 150]);
        let r = report(&plan, 1.0).unwrap();
        assert_eq!(r.rounded().frames_reduced_pct, 99.33);

        let every = decimate(tl(30.0, 2.0), 1.0 / 30.0).unwrap();
        assert_eq!(every.frames_captured(), 60);
        let faster = decimate(tl(30.0, 2.0), 0.01).unwrap();
        assert_eq!(faster.frames_captured(), 60);

        assert_eq!(decimate(tl(30.0, 4.9), 5.0).unwrap().frames_captured(), 1);
        assert!(decimate(tl(30.0, 4.9), 0.0).is_err());
    }

    #[test]
    fn decimation_with_fractional_rate() {
        // 29.97 fps: mark 5 s falls between frames 149 (4.9716 s) and 150 (5.005 s)
        let plan = decimate(tl(29.97, 11.0), 5.0).unwrap();
        let on: Vec<usize> = plan.captured.iter().enumerate().filter(|(_, c)| **c).map(|(i, _)| i).collect();
        assert_eq!(on, vec![0, 150, 300]);
    }

    #[test]
    fn report_bitrate_examples() {
        assert!((estimate_bitrate(5.47, 54.39) - 2.495).abs() < 1e-3);
        assert!((estimate_bitrate(1.31, 54.28) - 0.599).abs() < 1e-3);
        assert_eq!(estimate_bitrate(5.47, 0.0), 5.47);
        let full = apply_intervals(tl(10.0, 3.0), &[iv(0.0, 3.0)]);
        assert_eq!(report(&full, 5.47).unwrap().est_bitrate_mbps, 5.47);
    }

    #[test]
    fn report_errors() {
        assert_eq!(FrameTimeline::new(30.0, 0.0), Err(GatingError::Duration(0.0)));
        assert_eq!(FrameTimeline::new(0.0, 1.0), Err(GatingError::Fps(0.0)));
        let tiny = apply_intervals(tl(1.0, 0.5), &[]);
        assert_eq!(report(&tiny, 1.0), Err(GatingError::EmptyTimeline));
        let plan = apply_intervals(tl(1.0, 5.0), &[]);
        assert_eq!(report(&plan, 0.0), Err(GatingError::Bitrate(0.0)));
    }

    #[test]
    fn blackout_expressions() {
        assert_eq!(emit_blackout_expr(&[], 10.0), "between(t,0.000000,10.000000)");
        assert_eq!(emit_blackout_expr(&[iv(0.0, 10.0)], 10.0), "");
        assert_eq!(emit_blackout_expr(&[iv(-1.0, 12.0)], 10.0), "");
        assert_eq!(
            emit_blackout_expr(&[iv(1.0, 2.0)], 3.0),
            "between(t,0.000000,1.000000)+between(t,2.000000,3.000000)"
        );
        assert_eq!(complement(&[iv(0.0, 1.0), iv(0.5, 2.0)], 2.5), vec![[2.0, 2.5]]);
        assert_eq!(blackout_filter(""), None);
        assert!(blackout_filter("between(t,0,1)").unwrap().contains("enable='between(t,0,1)'"));
    }

    #[test]
    fn plan_file_round_trip() {
        let plan = apply_intervals(tl(4.0, 6.0), &[iv(0.5, 1.6), iv(3.0, 4.0)]);
        let file = plan.to_file();
        assert_eq!(file.captured_intervals, vec![[0.5, 1.75], [3.0, 4.0]]);
        assert_eq!(file.to_plan().unwrap(), plan);
        let json = serde_json::to_string(&file).unwrap();
        assert!(json.starts_with("{\"fps\":4.0,\"duration_sec\":6.0,\"captured_intervals\":[[0.5,1.75]"));
    }

    #[test]
    fn aggregate_weights_by_frames() {
        // 100 frames at 20% reduction, 300 frames at 60% reduction
        let a = report(&apply_intervals(tl(10.0, 10.0), &[iv(0.0, 8.0)]), 2.0).unwrap();
        let b = report(&apply_intervals(tl(10.0, 30.0), &[iv(0.0, 12.0)]), 2.0).unwrap();
        let pooled = aggregate_reports(&[a, b]).unwrap();
        assert_eq!(pooled.frames_total, 400);
        assert_eq!(pooled.frames_captured, 200);
        assert!((pooled.frames_reduced_pct - 50.0).abs() < 1e-12);
        assert!((pooled.est_bitrate_mbps - 1.0).abs() < 1e-12);
        assert_eq!(aggregate_reports(&[]), Err(GatingError::NothingToAggregate));
    }
}
