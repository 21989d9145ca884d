//! Eikonal ray integration through a [`MediumModel`](crate::media::MediumModel)
//! and the two-point shooting solver.
//!
//! The ray state is position `r` (km) and unit direction `s`, advanced in arc
//! length with `dr/ds = s` and `ds/ds = (grad n - s (s . grad n)) / n`.
//! Outside the medium cutoff sphere the ray is straight.

mod integrate;
mod nelder_mead;
mod shooting;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::media::PlasmaSample;
use crate::Vec3;

pub use integrate::{chord_displacement, integrate_ray, replay_ray, vacuum_extension};
pub use nelder_mead::{nelder_mead, NelderMeadOptions, NelderMeadResult};
pub use shooting::{
    direction_from_angles, solve_initial_direction, LosChart, OuterIteration, ShootingResult,
    SolverOptions, StopReason,
};

#[derive(Debug, Error)]
pub enum RaytraceError {
    #[error("ray occulted by the Earth at s = {s_km:.3} km (altitude {altitude_km:.3} km)")]
    Occultation { s_km: f64, altitude_km: f64 },
    #[error("ray integration exceeded {steps} steps")]
    Runaway { steps: usize },
    #[error("geometry error: {0}")]
    Geometry(String),
}

/// One node of a traced ray.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RaySample {
    /// Arc length from the transmitter, km.
    pub s: f64,
    pub pos: Vec3,
    pub dir: Vec3,
    /// Curvature vector ds/ds, 1/km.
    pub dir_deriv: Vec3,
    pub plasma: PlasmaSample,
    pub cos_theta: f64,
}

/// Frozen stage derivatives of one RK4 step; replaying them reproduces the
/// step without touching the medium.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Step {
    pub h: f64,
    pub stages: [Vec3; 4],
}

#[derive(Clone, Debug, PartialEq)]
pub struct RayPath {
    pub samples: Vec<RaySample>,
    pub s_exit: f64,
    pub exit_pos: Vec3,
    pub exit_dir: Vec3,
    /// Total arc length to the point nearest the receiver; equals `s_exit`
    /// until [`vacuum_extension`] has been applied.
    pub s_f: f64,
    pub frequency: f64,
    pub initial_dir: Vec3,
    pub(crate) steps: Vec<Step>,
}

impl RayPath {
    pub fn tx_pos(&self) -> Vec3 {
        self.samples[0].pos
    }

    pub fn step_count(&self) -> usize {
        self.steps.len()
    }

    /// Lowest altitude reached, km, and the index of that sample.
    pub fn min_altitude(&self) -> (usize, f64) {
        self.samples
            .iter()
            .enumerate()
            .map(|(i, s)| (i, s.pos.norm() - crate::constants::EARTH_RADIUS_KM))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap_or((0, f64::NAN))
    }
}

/// One altitude band of the step-size schedule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepBand {
    /// Upper altitude of the band, km (exclusive).
    pub below_km: f64,
    pub step_km: f64,
}

/// Altitude-dependent arc-length step. Altitudes above the last band use the
/// last band's step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StepTable {
    pub bands: Vec<StepBand>,
}

impl Default for StepTable {
    fn default() -> Self {
        Self {
            bands: vec![
                StepBand { below_km: 1000.0, step_km: 10.0 },
                StepBand { below_km: 4000.0, step_km: 20.0 },
                StepBand { below_km: f64::INFINITY, step_km: 100.0 },
            ],
        }
    }
}

impl StepTable {
    pub fn validate(&self) -> Result<(), RaytraceError> {
        if self.bands.is_empty() {
            return Err(RaytraceError::Geometry("step table is empty".into()));
        }
        if self.bands.iter().any(|b| !(b.step_km > 0.0) || !b.step_km.is_finite()) {
            return Err(RaytraceError::Geometry("step sizes must be positive".into()));
        }
        if self.bands.windows(2).any(|w| w[1].below_km <= w[0].below_km) {
            return Err(RaytraceError::Geometry(
                "step table altitudes must be strictly increasing".into(),
            ));
        }
        Ok(())
    }

    pub fn step_at(&self, altitude_km: f64) -> f64 {
        self.bands
            .iter()
            .find(|b| altitude_km < b.below_km)
            .or(self.bands.last())
            .map_or(10.0, |b| b.step_km)
    }

    /// Every step multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            bands: self
                .bands
                .iter()
                .map(|b| StepBand {
                    below_km: b.below_km,
                    step_km: b.step_km * factor,
                })
                .collect(),
        }
    }
}
