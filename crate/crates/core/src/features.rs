//! Log-mel statistics front-end.
//!
//! Each window is framed (25 ms frames, 10 ms hop, Hann taper), turned into
//! a 64-band mel magnitude spectrogram over 125-7500 Hz, log-compressed with
//! `ln(x + 1e-6)`, and pooled into per-band mean and standard deviation.

use std::sync::{Arc, OnceLock};

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

use crate::audio::{AudioWindow, TARGET_SAMPLE_RATE};

pub const MEL_BANDS: usize = 64;
pub const FEATURE_DIM: usize = 2 * MEL_BANDS;
pub const FRAME_LEN: usize = 400;
pub const FRAME_HOP: usize = 160;
pub const FFT_LEN: usize = 512;
pub const MEL_LOW_HZ: f64 = 125.0;
pub const MEL_HIGH_HZ: f64 = 7500.0;
pub const LOG_FLOOR: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("feature front-end expects {expected} Hz audio, got {actual} Hz")]
    SampleRate { expected: u32, actual: u32 },
    #[error("window has {0} samples, fewer than one {FRAME_LEN}-sample frame")]
    TooShort(usize),
}

/// Fixed-length, finite feature vector describing one audio window.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl From<Vec<f64>> for FeatureVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// HTK-style mel scale.
pub fn hz_to_mel(hz: f64) -> f64 {
    1127.0 * (1.0 + hz / 700.0).ln()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * ((mel / 1127.0).exp() - 1.0)
}

pub struct LogMelExtractor {
    fft: Arc<dyn Fft<f64>>,
    taper: Vec<f64>,
    // filterbank[band] = (first bin, weights)
    filterbank: Vec<(usize, Vec<f64>)>,
}

impl std::fmt::Debug for LogMelExtractor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LogMelExtractor").field("bands", &self.filterbank.len()).finish()
    }
}

impl Default for LogMelExtractor {
    fn default() -> Self {
        Self::new()
    }
}

impl LogMelExtractor {
    pub fn new() -> Self {
        let fft = FftPlanner::new().plan_fft_forward(FFT_LEN);
        // periodic Hann
        let taper = (0..FRAME_LEN)
            .map(|n| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / FRAME_LEN as f64).cos())
            .collect();
        Self {
            fft,
            taper,
            filterbank: mel_filterbank(),
        }
    }

    pub fn extract(&self, window: &AudioWindow<'_>) -> Result<FeatureVector, FeatureError> {
        if window.sample_rate != TARGET_SAMPLE_RATE {
            return Err(FeatureError::SampleRate {
                expected: TARGET_SAMPLE_RATE,
                actual: window.sample_rate,
            });
        }
        let samples = window.samples;
        if samples.len() < FRAME_LEN {
            return Err(FeatureError::TooShort(samples.len()));
        }
        let n_frames = 1 + (samples.len() - FRAME_LEN) / FRAME_HOP;
        let mut sum = [0.0f64; MEL_BANDS];
        let mut sum_sq = [0.0f64; MEL_BANDS];
        let mut log_mel = vec![[0.0f64; MEL_BANDS]; n_frames];
        let mut buf = vec![Complex::new(0.0, 0.0); FFT_LEN];
        let mut scratch = vec![Complex::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        let mut magnitude = vec![0.0f64; FFT_LEN / 2 + 1];

        for (f, row) in log_mel.iter_mut().enumerate() {
            let frame = &samples[f * FRAME_HOP..f * FRAME_HOP + FRAME_LEN];
            for (slot, (&s, &w)) in buf.iter_mut().zip(frame.iter().zip(&self.taper)) {
                *slot = Complex::new(f64::from(s) * w, 0.0);
            }
            buf[FRAME_LEN..].fill(Complex::new(0.0, 0.0));
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            for (m, c) in magnitude.iter_mut().zip(&buf) {
                *m = c.norm();
            }
            for (b, (first, weights)) in self.filterbank.iter().enumerate() {
                let energy: f64 = weights.iter().zip(&magnitude[*first..]).map(|(w, m)| w * m).sum();
                row[b] = (energy + LOG_FLOOR).ln();
                sum[b] += row[b];
            }
        }

        let n = n_frames as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        for row in &log_mel {
            for b in 0..MEL_BANDS {
                sum_sq[b] += (row[b] - mean[b]).powi(2);
            }
        }
        let mut values = mean;
        values.extend(sum_sq.iter().map(|s| (s / n).sqrt()));
        Ok(FeatureVector(values))
    }
}

/// Triangular filters on the HTK mel scale with edges evenly spaced in mel
/// between `MEL_LOW_HZ` and `MEL_HIGH_HZ`.
fn mel_filterbank() -> Vec<(usize, Vec<f64>)> {
    let lo = hz_to_mel(MEL_LOW_HZ);
    let hi = hz_to_mel(MEL_HIGH_HZ);
    let edges: Vec<f64> = (0..MEL_BANDS + 2)
        .map(|i| lo + (hi - lo) * i as f64 / (MEL_BANDS + 1) as f64)
        .collect();
    let bin_mel: Vec<f64> = (0..=FFT_LEN / 2)
        .map(|k| hz_to_mel(k as f64 * TARGET_SAMPLE_RATE as f64 / FFT_LEN as f64))
        .collect();
    (0..MEL_BANDS)
        .map(|b| {
            let (left, center, right) = (edges[b], edges[b + 1], edges[b + 2]);
            let weights: Vec<f64> = bin_mel
                .iter()
                .map(|&m| {
                    if m > left && m <= center {
                        (m - left) / (center - left)
                    } else if m > center && m < right {
                        (right - m) / (right - center)
                    } else {
                        0.0
                    }
                })
                .collect();
            let first = weights.iter().position(|&w| w > 0.0).unwrap_or(0);
            let last = weights.iter().rposition(|&w| w > 0.0).map_or(first, |l| l + 1);
            (first, weights[first..last].to_vec())
        })
        .collect()
}

fn shared_extractor() -> &'static LogMelExtractor {
    static EXTRACTOR: OnceLock<LogMelExtractor> = OnceLock::new();
    EXTRACTOR.get_or_init(LogMelExtractor::new)
}

/// Compute the 128-value log-mel statistics vector of a 16 kHz window.
pub fn extract_features(window: &AudioWindow<'_>) -> Result<FeatureVector, FeatureError> {
    shared_extractor().extract(window)
}
