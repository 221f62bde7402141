//! Audio-gated visual capture.
//!
//! A small audio classifier scores overlapping windows of a recording for
//! hand-object interaction (HOI). A trigger strategy turns the resulting
//! probability trace into capture intervals, which are then projected onto
//! a video frame timeline to estimate frame savings, bitrate and power.
//!
//! Modules follow the data flow:
//! [`audio`] → [`features`] → [`model`]/[`train`] → [`pipeline`] →
//! [`trigger`] → [`gating`], with [`metrics`] and [`power`] for evaluation.

pub mod audio;
pub mod balance;
pub mod dataset;
pub mod features;
pub mod gating;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod power;
pub mod train;
pub mod trigger;

pub use audio::{AudioClip, AudioWindow, WindowSpec};
pub use balance::ResampleStrategy;
pub use dataset::{Label, LabeledExample};
pub use features::FeatureVector;
pub use gating::{FrameTimeline, GatingPlan, GatingReport};
pub use model::ClassifierHead;
pub use train::{TrainConfig, TrainLog, TrainedModel};
pub use trigger::{ActivationInterval, ProbabilityTrace, TriggerConfig};
