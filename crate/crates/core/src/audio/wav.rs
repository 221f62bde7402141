use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::{AudioClip, AudioError};

/// Read a PCM16 or float32 WAV file. Channels are kept interleaved;
/// use [`super::to_mono`] to fold stereo.
pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioClip, AudioError> {
    let path = path.as_ref();
    let name = path.display().to_string();
    let read_err = |source| AudioError::Read {
        path: name.clone(),
        source,
    };
    let mut reader = WavReader::open(path).map_err(read_err)?;
    let spec = reader.spec();
    if spec.channels == 0 || spec.channels > 2 {
        return Err(AudioError::ChannelCount(spec.channels));
    }
    let samples: Vec<f32> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| f32::from(v) / 32768.0))
            .collect::<Result<_, _>>()
            .map_err(read_err)?,
        (SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .collect::<Result<_, _>>()
            .map_err(read_err)?,
        (fmt, bits) => {
            return Err(AudioError::UnsupportedFormat(format!(
                "{name}: {fmt:?} {bits}-bit"
            )))
        }
    };
    if samples.is_empty() {
        return Err(AudioError::EmptyData(name));
    }
    AudioClip::new(samples, spec.channels, spec.sample_rate)
}

/// Write a clip as 16-bit PCM, saturating out-of-range samples.
pub fn write_wav_pcm16(path: impl AsRef<Path>, clip: &AudioClip) -> Result<(), hound::Error> {
    let spec = WavSpec {
        channels: clip.channels(),
        sample_rate: clip.sample_rate(),
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut writer = WavWriter::create(path, spec)?;
    for &s in clip.samples() {
        let v = (f64::from(s) * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(v)?;
    }
    writer.finalize()
}
