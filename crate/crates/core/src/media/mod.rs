//! Electron density, magnetic field and refractive indices.
//!
//! A [`MediumModel`] only has to answer point queries; gradients are taken by
//! finite differences so any model can be plugged in.

mod indices;
mod reference;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frames::{sun_direction, Epoch};
use crate::Vec3;

pub use indices::{
    cos_theta, gradient_step_km, group_index, group_refractivity, gyro_frequency, index_gradient,
    phase_index, phase_refractivity, plasma_frequency, solar_indices_from_r12, SolarIndices,
    GYRO_FREQ_PER_TESLA, PLASMA_FREQ_SQ_PER_DENSITY,
};
pub use reference::{reference_medium, ReferenceMedium, ReferenceParams};

#[derive(Debug, Error)]
pub enum MediaError {
    #[error("kp must be in [0, 9], got {0}")]
    Kp(f64),
    #[error("r12 must be in [0, 300], got {0}")]
    R12(f64),
    #[error("invalid medium parameter {name}: {reason}")]
    Param { name: &'static str, reason: String },
}

/// Geomagnetic and solar activity at an epoch, plus quantities derived from
/// them that every sample needs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpaceWeather {
    kp: f64,
    r12: f64,
    epoch: Epoch,
    indices: SolarIndices,
    sun_dir: Vec3,
}

impl SpaceWeather {
    pub fn new(kp: f64, r12: f64, epoch: Epoch) -> Result<Self, MediaError> {
        if !(0.0..=9.0).contains(&kp) {
            return Err(MediaError::Kp(kp));
        }
        if !(0.0..=300.0).contains(&r12) {
            return Err(MediaError::R12(r12));
        }
        Ok(Self {
            kp,
            r12,
            epoch,
            indices: solar_indices_from_r12(r12),
            sun_dir: sun_direction(epoch),
        })
    }

    pub fn kp(&self) -> f64 {
        self.kp
    }

    pub fn r12(&self) -> f64 {
        self.r12
    }

    pub fn epoch(&self) -> Epoch {
        self.epoch
    }

    pub fn indices(&self) -> SolarIndices {
        self.indices
    }

    /// Unit vector toward the Sun, inertial frame.
    pub fn sun_dir(&self) -> Vec3 {
        self.sun_dir
    }
}

/// Electron density (e/m^3) and magnetic field (T) at a point.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PlasmaSample {
    pub n_e: f64,
    pub b_field: Vec3,
}

impl PlasmaSample {
    pub const VACUUM: PlasmaSample = PlasmaSample {
        n_e: 0.0,
        b_field: Vec3::new(0.0, 0.0, 0.0),
    };
}

pub trait MediumModel: Send + Sync {
    /// Plasma at an Earth-centred inertial position, km.
    fn sample(&self, pos: &Vec3, weather: &SpaceWeather) -> PlasmaSample;

    /// Radius beyond which the medium is treated as vacuum, km.
    fn cutoff_radius(&self) -> f64;
}

/// Empty space.
#[derive(Clone, Copy, Debug, Default)]
pub struct VacuumMedium;

impl MediumModel for VacuumMedium {
    fn sample(&self, _pos: &Vec3, _weather: &SpaceWeather) -> PlasmaSample {
        PlasmaSample::VACUUM
    }

    fn cutoff_radius(&self) -> f64 {
        4.0 * crate::constants::EARTH_RADIUS_KM
    }
}

impl<M: MediumModel + ?Sized> MediumModel for std::sync::Arc<M> {
    fn sample(&self, pos: &Vec3, weather: &SpaceWeather) -> PlasmaSample {
        (**self).sample(pos, weather)
    }

    fn cutoff_radius(&self) -> f64 {
        (**self).cutoff_radius()
    }
}
