//! Labeled feature datasets and the JSON Lines label file.

use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureVector;

/// Binary HOI label: class 0 is background audio, class 1 a hand-object
/// interaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    NoInteraction = 0,
    Interaction = 1,
}

impl Label {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        match i {
            0 => Some(Label::NoInteraction),
            1 => Some(Label::Interaction),
            _ => None,
        }
    }

    pub fn is_positive(self) -> bool {
        self == Label::Interaction
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample {
    pub features: FeatureVector,
    pub label: Label,
}

impl LabeledExample {
    pub fn new(features: impl Into<FeatureVector>, label: Label) -> Self {
        Self {
            features: features.into(),
            label,
        }
    }
}

/// Per-class example counts, indexed by [`Label::index`].
pub fn class_counts(examples: &[LabeledExample]) -> [usize; 2] {
    let mut counts = [0usize; 2];
    for e in examples {
        counts[e.label.index()] += 1;
    }
    counts
}

#[derive(Debug, Error)]
pub enum LabelFileError {
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: label must be 0 or 1, got {value}")]
    BadLabel { line: usize, value: u64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One row of the label file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClipLabel {
    pub clip_file: String,
    pub is_hand_object_interaction: u64,
}

impl ClipLabel {
    pub fn label(&self) -> Label {
        if self.is_hand_object_interaction == 1 {
            Label::Interaction
        } else {
            Label::NoInteraction
        }
    }
}

/// Parse a JSON Lines label file. Blank lines are skipped.
pub fn read_label_file(reader: impl BufRead) -> Result<Vec<ClipLabel>, LabelFileError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: ClipLabel =
            serde_json::from_str(&line).map_err(|source| LabelFileError::Parse { line: i + 1, source })?;
        if row.is_hand_object_interaction > 1 {
            return Err(LabelFileError::BadLabel {
                line: i + 1,
                value: row.is_hand_object_interaction,
            });
        }
        out.push(row);
    }
    Ok(out)
}
