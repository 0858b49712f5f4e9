//! Early termination and timeout.

use serde::{Deserialize, Serialize};

use super::plant::Measured;
use super::trajectory::RefState;
use crate::error::{Error, Result};
use crate::rbd::boxminus;
use crate::scalar::{to_f64, Real};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TerminationParams {
    /// Base position deviation, m.
    pub max_position_error: f64,
    /// Base orientation deviation, rad.
    pub max_orientation_error: f64,
    /// Contact force limit in N; `None` without a contact backend.
    pub max_contact_force: Option<f64>,
    /// Hold on the final frame before the timeout, s.
    pub dwell_s: f64,
}

impl Default for TerminationParams {
    fn default() -> Self {
        Self {
            max_position_error: 0.5,
            max_orientation_error: 0.8,
            max_contact_force: None,
            dwell_s: 0.5,
        }
    }
}

impl TerminationParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.max_position_error > 0.0
            && self.max_orientation_error > 0.0
            && self.max_contact_force.is_none_or(|f| f > 0.0)
            && self.dwell_s >= 0.0
            && self.dwell_s.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(
                "termination thresholds out of range".into(),
            ))
        }
    }

    pub fn dwell_steps(&self, control_dt: f64) -> usize {
        (self.dwell_s / control_dt).round() as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    BasePosition,
    BaseOrientation,
    ContactForce,
    Numerical,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Running,
    Failed(FailureReason),
    Timeout,
}

impl Status {
    pub fn is_done(self) -> bool {
        self != Status::Running
    }

    pub fn label(self) -> &'static str {
        match self {
            Status::Running => "running",
            Status::Failed(FailureReason::BasePosition) => "failed_base_position",
            Status::Failed(FailureReason::BaseOrientation) => "failed_base_orientation",
            Status::Failed(FailureReason::ContactForce) => "failed_contact_force",
            Status::Failed(FailureReason::Numerical) => "failed_numerical",
            Status::Timeout => "timeout",
        }
    }
}

/// Status after `steps_taken` control steps; the episode times out once
/// `steps_taken` reaches `timeout_steps`. Failures take precedence.
pub fn check_termination<T: Real>(
    m: &Measured<T>,
    r: &RefState<T>,
    contact_force: Option<f64>,
    steps_taken: usize,
    timeout_steps: usize,
    params: &TerminationParams,
) -> Status {
    if !m.is_finite() {
        return Status::Failed(FailureReason::Numerical);
    }
    if to_f64((m.base.position - r.base_pos).norm()) > params.max_position_error {
        return Status::Failed(FailureReason::BasePosition);
    }
    if to_f64(boxminus(&m.base.orientation, &r.base_quat).norm()) > params.max_orientation_error {
        return Status::Failed(FailureReason::BaseOrientation);
    }
    if let (Some(limit), Some(f)) = (params.max_contact_force, contact_force) {
        if f > limit {
            return Status::Failed(FailureReason::ContactForce);
        }
    }
    if steps_taken >= timeout_steps {
        Status::Timeout
    } else {
        Status::Running
    }
}
