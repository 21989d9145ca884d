use nalgebra::{Matrix3, Rotation3};
use serde::{Deserialize, Serialize};

use super::{Epoch, EpochState, Frame, FrameError};
use crate::Vec3;

/// Unit vector from Earth to the Sun in the inertial equatorial frame, using
/// the low-precision almanac series (about 0.01 deg over 1950-2050).
pub fn sun_direction(epoch: Epoch) -> Vec3 {
    let n = epoch.days_since_j2000();
    let mean_lon = (280.460 + 0.985_647_4 * n).rem_euclid(360.0);
    let anomaly = (357.528 + 0.985_600_3 * n).rem_euclid(360.0).to_radians();
    let lambda = (mean_lon + 1.915 * anomaly.sin() + 0.020 * (2.0 * anomaly).sin()).to_radians();
    let obliquity = (23.439 - 4.0e-7 * n).to_radians();
    let (sl, cl) = lambda.sin_cos();
    let (se, ce) = obliquity.sin_cos();
    Vec3::new(cl, ce * sl, se * sl)
}

/// Geomagnetic dipole axis, fixed in the inertial frame for a run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DipoleAxis {
    /// Angle from the inertial +Z axis, deg.
    pub tilt_deg: f64,
    /// Inertial longitude of the tilted axis, deg.
    pub longitude_deg: f64,
}

impl Default for DipoleAxis {
    fn default() -> Self {
        Self {
            tilt_deg: 11.5,
            longitude_deg: -72.6,
        }
    }
}

impl DipoleAxis {
    /// Northward unit vector of the dipole axis.
    pub fn unit(&self) -> Vec3 {
        let (st, ct) = self.tilt_deg.to_radians().sin_cos();
        let (sl, cl) = self.longitude_deg.to_radians().sin_cos();
        Vec3::new(st * cl, st * sl, ct)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmPosition {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl SmPosition {
    pub fn as_vec(&self) -> Vec3 {
        Vec3::new(self.x, self.y, self.z)
    }

    pub fn norm(&self) -> f64 {
        self.as_vec().norm()
    }
}

/// Rotation from inertial to solar-magnetic coordinates.
#[derive(Clone, Copy, Debug)]
pub struct SmTransform {
    rotation: Rotation3<f64>,
}

impl SmTransform {
    /// Z along `dipole`, Y = unit(Z x sun), X = Y x Z (so the Sun has X > 0).
    pub fn from_axes(dipole: &Vec3, sun: &Vec3) -> Result<Self, FrameError> {
        let z = dipole.normalize();
        let y_raw = z.cross(&sun.normalize());
        if y_raw.norm() < 1e-9 {
            return Err(FrameError::DegenerateSmFrame);
        }
        let y = y_raw.normalize();
        let x = y.cross(&z);
        let m = Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
        Ok(Self {
            rotation: Rotation3::from_matrix_unchecked(m),
        })
    }

    pub fn at(epoch: Epoch, axis: &DipoleAxis) -> Result<Self, FrameError> {
        Self::from_axes(&axis.unit(), &sun_direction(epoch))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        self.rotation.matrix()
    }

    pub fn apply(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    pub fn inverse_apply(&self, v: &Vec3) -> Vec3 {
        self.rotation.inverse() * v
    }
}

pub fn to_sm_frame(pos: &EpochState, axis: &DipoleAxis) -> Result<SmPosition, FrameError> {
    if pos.frame != Frame::EarthCenteredInertial {
        return Err(FrameError::FrameMismatch {
            expected: Frame::EarthCenteredInertial,
            got: pos.frame,
        });
    }
    let v = SmTransform::at(pos.epoch, axis)?.apply(&pos.position);
    Ok(SmPosition {
        x: v.x,
        y: v.y,
        z: v.z,
    })
}

/// Inverse of [`to_sm_frame`]: inertial position of `sm` at `epoch`.
pub fn from_sm_frame(sm: &SmPosition, epoch: Epoch, axis: &DipoleAxis) -> Result<Vec3, FrameError> {
    Ok(SmTransform::at(epoch, axis)?.inverse_apply(&sm.as_vec()))
}
