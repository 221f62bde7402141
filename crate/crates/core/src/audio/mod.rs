//! Audio ingestion and preprocessing: clips, channel folding, resampling,
//! peak normalization and sliding-window segmentation.

mod noise;
mod wav;

pub use noise::{add_white_noise, generate_noise, NoiseLevel, NoiseSpec};
pub use wav::{load_wav, write_wav_pcm16};

use thiserror::Error;

/// Sample rate expected by the feature front-end.
pub const TARGET_SAMPLE_RATE: u32 = 16_000;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("failed to read {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: hound::Error,
    },
    #[error("unsupported WAV encoding: {0}")]
    UnsupportedFormat(String),
    #[error("{0}: data chunk holds no samples")]
    EmptyData(String),
    #[error("expected 1 or 2 channels, got {0}")]
    ChannelCount(u16),
    #[error("sample rate must be positive")]
    ZeroSampleRate,
    #[error("invalid window spec: duration {window_sec}s, hop {hop_sec}s")]
    InvalidWindow { window_sec: f64, hop_sec: f64 },
    #[error("clip too short to window: {duration_sec:.3}s < {window_sec:.3}s")]
    ClipTooShort { duration_sec: f64, window_sec: f64 },
    #[error("noise: {0}")]
    Noise(String),
}

/// A block of interleaved PCM audio at a fixed sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f32>,
    channels: u16,
    sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f32>, channels: u16, sample_rate: u32) -> Result<Self, AudioError> {
        if sample_rate == 0 {
            return Err(AudioError::ZeroSampleRate);
        }
        if channels == 0 {
            return Err(AudioError::ChannelCount(channels));
        }
        Ok(Self {
            samples,
            channels,
            sample_rate,
        })
    }

    /// Single-channel convenience constructor.
    pub fn mono(samples: Vec<f32>, sample_rate: u32) -> Result<Self, AudioError> {
        Self::new(samples, 1, sample_rate)
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f32> {
        self.samples
    }

    pub fn channels(&self) -> u16 {
        self.channels
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    /// Number of sample frames (samples per channel).
    pub fn frames(&self) -> usize {
        self.samples.len() / self.channels as usize
    }

    pub fn duration_sec(&self) -> f64 {
        self.frames() as f64 / self.sample_rate as f64
    }

    pub fn peak(&self) -> f32 {
        self.samples.iter().fold(0.0f32, |m, s| m.max(s.abs()))
    }

    /// Mean squared amplitude.
    pub fn power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|&s| f64::from(s).powi(2)).sum::<f64>() / self.samples.len() as f64
    }
}

/// Average a stereo clip down to one channel. Mono clips pass through.
pub fn to_mono(clip: AudioClip) -> Result<AudioClip, AudioError> {
    match clip.channels {
        1 => Ok(clip),
        2 => {
            let samples = clip
                .samples
                .chunks_exact(2)
                .map(|lr| (lr[0] + lr[1]) * 0.5)
                .collect();
            AudioClip::mono(samples, clip.sample_rate)
        }
        n => Err(AudioError::ChannelCount(n)),
    }
}

/// Linear-interpolation resampler. The output holds
/// `round(duration * target_rate)` frames; positions past the last input
/// frame repeat it.
pub fn resample(clip: AudioClip, target_rate: u32) -> Result<AudioClip, AudioError> {
    if target_rate == 0 {
        return Err(AudioError::ZeroSampleRate);
    }
    if target_rate == clip.sample_rate {
        return Ok(clip);
    }
    let channels = clip.channels as usize;
    let in_frames = clip.frames();
    let ratio = clip.sample_rate as f64 / target_rate as f64;
    let out_frames = (in_frames as f64 * target_rate as f64 / clip.sample_rate as f64).round() as usize;
    let mut out = Vec::with_capacity(out_frames * channels);
    for j in 0..out_frames {
        let pos = j as f64 * ratio;
        let i0 = pos.floor() as usize;
        let frac = (pos - i0 as f64) as f32;
        for c in 0..channels {
            let s = if i0 + 1 < in_frames {
                let a = clip.samples[i0 * channels + c];
                let b = clip.samples[(i0 + 1) * channels + c];
                a + (b - a) * frac
            } else {
                clip.samples[(in_frames - 1) * channels + c]
            };
            out.push(s);
        }
    }
    AudioClip::new(out, clip.channels, target_rate)
}

/// Scale so that the peak magnitude is exactly 1. Silent clips are
/// returned untouched.
pub fn normalize_amplitude(clip: AudioClip) -> AudioClip {
    let peak = clip.peak();
    if peak <= 0.0 || peak == 1.0 {
        return clip;
    }
    let samples = clip.samples.iter().map(|&s| s / peak).collect();
    AudioClip { samples, ..clip }
}

/// Mono, 16 kHz, peak-normalized: the form the classifier consumes.
pub fn preprocess(clip: AudioClip) -> Result<AudioClip, AudioError> {
    let clip = to_mono(clip)?;
    let clip = resample(clip, TARGET_SAMPLE_RATE)?;
    Ok(normalize_amplitude(clip))
}

/// Window duration and hop, both in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowSpec {
    window_sec: f64,
    hop_sec: f64,
}

impl WindowSpec {
    pub fn new(window_sec: f64, hop_sec: f64) -> Result<Self, AudioError> {
        let ok = window_sec.is_finite()
            && hop_sec.is_finite()
            && window_sec > 0.0
            && hop_sec > 0.0
            && hop_sec <= window_sec;
        if !ok {
            return Err(AudioError::InvalidWindow {
                window_sec,
                hop_sec,
            });
        }
        Ok(Self {
            window_sec,
            hop_sec,
        })
    }

    pub fn window_sec(&self) -> f64 {
        self.window_sec
    }

    pub fn hop_sec(&self) -> f64 {
        self.hop_sec
    }

    /// `floor((duration - window) / hop) + 1`, or 0 if the clip is shorter
    /// than one window.
    pub fn window_count(&self, duration_sec: f64) -> usize {
        let span = duration_sec - self.window_sec;
        if span < -1e-9 {
            return 0;
        }
        ((span.max(0.0) / self.hop_sec) + 1e-9).floor() as usize + 1
    }
}

impl Default for WindowSpec {
    fn default() -> Self {
        Self {
            window_sec: 4.0,
            hop_sec: 2.0,
        }
    }
}

/// One analysis window borrowed from a mono clip.
#[derive(Debug, Clone, Copy)]
pub struct AudioWindow<'a> {
    pub index: usize,
    pub start_sec: f64,
    pub samples: &'a [f32],
    pub sample_rate: u32,
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

/// Cut a mono clip into fixed-length windows starting at `i * hop`.
/// Tail audio shorter than a window is dropped.
pub fn slide_windows(clip: &AudioClip, spec: WindowSpec) -> Result<Vec<AudioWindow<'_>>, AudioError> {
    if clip.channels != 1 {
        return Err(AudioError::ChannelCount(clip.channels));
    }
    let duration_sec = clip.duration_sec();
    let count = spec.window_count(duration_sec);
    if count == 0 || clip.samples.is_empty() {
        return Err(AudioError::ClipTooShort {
            duration_sec,
            window_sec: spec.window_sec,
        });
    }
    let rate = clip.sample_rate as f64;
    let len = round_half_up(spec.window_sec * rate);
    let mut windows = Vec::with_capacity(count);
    for index in 0..count {
        let start_sec = index as f64 * spec.hop_sec;
        let start = round_half_up(start_sec * rate);
        // Non-integer sample counts can push the final window one sample
        // past the end.
        let Some(samples) = clip.samples.get(start..start + len) else {
            break;
        };
        windows.push(AudioWindow {
            index,
            start_sec,
            samples,
            sample_rate: clip.sample_rate,
        });
    }
    Ok(windows)
}
