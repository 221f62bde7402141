//! Duty-cycle power model: each component draws its active power for the
//! fraction of time it is on and its idle power (default 0) otherwise.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PowerError {
    #[error("{name}: power must be a nonnegative number")]
    Power { name: String },
    #[error("{name}: duty {duty} outside [0, 1]")]
    Duty { name: String, duty: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerComponent {
    pub name: String,
    pub active_power_w: f64,
    pub duty: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub idle_power_w: Option<f64>,
}

impl PowerComponent {
    pub fn new(name: impl Into<String>, active_power_w: f64, duty: f64) -> Self {
        Self {
            name: name.into(),
            active_power_w,
            duty,
            idle_power_w: None,
        }
    }

    pub fn validate(&self) -> Result<(), PowerError> {
        let ok = |w: f64| w.is_finite() && w >= 0.0;
        if !ok(self.active_power_w) || !self.idle_power_w.is_none_or(ok) {
            return Err(PowerError::Power { name: self.name.clone() });
        }
        if !(0.0..=1.0).contains(&self.duty) {
            return Err(PowerError::Duty {
                name: self.name.clone(),
                duty: self.duty,
            });
        }
        Ok(())
    }

    pub fn average_power_w(&self) -> f64 {
        self.active_power_w * self.duty + self.idle_power_w.unwrap_or(0.0) * (1.0 - self.duty)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentDraw {
    pub name: String,
    pub average_power_w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerBreakdown {
    pub components: Vec<ComponentDraw>,
    pub total_w: f64,
}

pub fn duty_cycle_power(components: &[PowerComponent]) -> Result<PowerBreakdown, PowerError> {
    let mut draws = Vec::with_capacity(components.len());
    for c in components {
        c.validate()?;
        draws.push(ComponentDraw {
            name: c.name.clone(),
            average_power_w: c.average_power_w(),
        });
    }
    let total_w = draws.iter().map(|d| d.average_power_w).sum();
    Ok(PowerBreakdown {
        components: draws,
        total_w,
    })
}

/// Relative saving of `candidate` against `reference`, in percent.
pub fn power_reduction_pct(reference_w: f64, candidate_w: f64) -> f64 {
    100.0 * (reference_w - candidate_w) / reference_w
}
