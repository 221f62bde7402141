//! Glue between audio, features and the classifier.

use rayon::prelude::*;
use thiserror::Error;

use crate::audio::{slide_windows, AudioClip, AudioError, WindowSpec};
use crate::dataset::{Label, LabeledExample};
use crate::features::{extract_features, FeatureError, FeatureVector};
use crate::model::{ClassifierHead, ModelError};
use crate::trigger::{ProbabilityTrace, TraceSample, TriggerError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Trigger(#[from] TriggerError),
}

/// Features of every window of a preprocessed clip, in window order.
pub fn window_features(clip: &AudioClip, spec: WindowSpec) -> Result<Vec<(f64, FeatureVector)>, PipelineError> {
    let windows = slide_windows(clip, spec)?;
    windows
        .par_iter()
        .map(|w| Ok((w.start_sec, extract_features(w)?)))
        .collect()
}

/// One training example per window, all carrying the clip's label.
pub fn clip_examples(clip: &AudioClip, label: Label, spec: WindowSpec) -> Result<Vec<LabeledExample>, PipelineError> {
    Ok(window_features(clip, spec)?
        .into_iter()
        .map(|(_, features)| LabeledExample { features, label })
        .collect())
}

/// `P(C1)` for each window of a preprocessed (mono, 16 kHz, normalized)
/// clip.
pub fn classify_trace(
    head: &ClassifierHead,
    clip: &AudioClip,
    spec: WindowSpec,
) -> Result<ProbabilityTrace, PipelineError> {
    let samples = window_features(clip, spec)?
        .into_iter()
        .map(|(start_sec, f)| {
            Ok(TraceSample {
                start_sec,
                p: head.predict_positive(f.as_slice())?,
            })
        })
        .collect::<Result<Vec<_>, ModelError>>()?;
    Ok(ProbabilityTrace::new(samples, spec.hop_sec())?)
}
