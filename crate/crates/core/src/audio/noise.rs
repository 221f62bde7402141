use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{AudioClip, AudioError};

/// How loud the injected noise should be.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseLevel {
    /// Per-sample variance in squared amplitude units.
    Variance(f64),
    /// Target signal-to-noise ratio in dB relative to the clip's power.
    SnrDb(f64),
}

/// Additive white Gaussian noise, reproducible from `seed`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub level: NoiseLevel,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn variance(variance: f64, seed: u64) -> Self {
        Self {
            level: NoiseLevel::Variance(variance),
            seed,
        }
    }

    pub fn snr_db(snr_db: f64, seed: u64) -> Self {
        Self {
            level: NoiseLevel::SnrDb(snr_db),
            seed,
        }
    }

    fn noise_variance(&self, clip: &AudioClip) -> Result<f64, AudioError> {
        match self.level {
            NoiseLevel::Variance(v) if v >= 0.0 && v.is_finite() => Ok(v),
            NoiseLevel::Variance(v) => Err(AudioError::Noise(format!("variance {v} is not a nonnegative number"))),
            NoiseLevel::SnrDb(db) if db.is_finite() => {
                let signal = clip.power();
                if signal <= 0.0 {
                    return Err(AudioError::Noise("SNR target requires a nonsilent clip".into()));
                }
                Ok(signal / 10f64.powf(db / 10.0))
            }
            NoiseLevel::SnrDb(db) => Err(AudioError::Noise(format!("SNR {db} dB is not finite"))),
        }
    }
}

/// The raw noise sequence `add_white_noise` would add to `clip`, before
/// clipping.
pub fn generate_noise(clip: &AudioClip, spec: &NoiseSpec) -> Result<Vec<f64>, AudioError> {
    let variance = spec.noise_variance(clip)?;
    if variance == 0.0 {
        return Ok(vec![0.0; clip.samples().len()]);
    }
    let normal = Normal::new(0.0, variance.sqrt()).map_err(|e| AudioError::Noise(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    Ok((0..clip.samples().len()).map(|_| normal.sample(&mut rng)).collect())
}

/// Add zero-mean Gaussian noise and saturate the result to [-1, 1].
pub fn add_white_noise(clip: AudioClip, spec: &NoiseSpec) -> Result<AudioClip, AudioError> {
    let noise = generate_noise(&clip, spec)?;
    let samples = clip
        .samples()
        .iter()
        .zip(&noise)
        .map(|(&s, &n)| (f64::from(s) + n).clamp(-1.0, 1.0) as f32)
        .collect();
    AudioClip::new(samples, clip.channels(), clip.sample_rate())
}
