use std::f64::consts::PI;

use nalgebra::Rotation3;
use serde::{Deserialize, Serialize};

use super::{Epoch, EpochState, Frame, FrameError};
use crate::Vec3;

const KEPLER_TOLERANCE: f64 = 1e-12;
const KEPLER_MAX_ITER: usize = 50;
const MAX_PROPAGATION_S: f64 = 10.0 * 365.25 * 86_400.0;

/// Classical elements of a closed two-body orbit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KeplerianElements {
    pub a_km: f64,
    pub e: f64,
    pub i_deg: f64,
    pub raan_deg: f64,
    pub argp_deg: f64,
    pub m0_deg: f64,
    /// Gravitational parameter of the central body, km^3/s^2.
    pub gm: f64,
    pub epoch: Epoch,
    /// Frame the resulting states are expressed in.
    pub frame: Frame,
}

impl KeplerianElements {
    pub fn validate(&self) -> Result<(), FrameError> {
        let bad = |msg: String| Err(FrameError::InvalidElements(msg));
        if !(self.a_km > 0.0) {
            return bad(format!("semi-major axis must be positive, got {}", self.a_km));
        }
        if !(0.0..1.0).contains(&self.e) {
            return bad(format!("eccentricity must be in [0, 1), got {}", self.e));
        }
        if !(0.0..=180.0).contains(&self.i_deg) {
            return bad(format!("inclination must be in [0, 180] deg, got {}", self.i_deg));
        }
        if !(self.gm > 0.0) {
            return bad(format!("gm must be positive, got {}", self.gm));
        }
        Ok(())
    }

    /// Mean motion, rad/s.
    pub fn mean_motion(&self) -> f64 {
        (self.gm / self.a_km.powi(3)).sqrt()
    }

    pub fn period_s(&self) -> f64 {
        2.0 * PI / self.mean_motion()
    }

    fn perifocal_to_inertial(&self) -> Rotation3<f64> {
        Rotation3::from_axis_angle(&Vec3::z_axis(), self.raan_deg.to_radians())
            * Rotation3::from_axis_angle(&Vec3::x_axis(), self.i_deg.to_radians())
            * Rotation3::from_axis_angle(&Vec3::z_axis(), self.argp_deg.to_radians())
    }
}

/// Solves Kepler's equation `E - e sin E = M` by Newton iteration.
/// Returns the eccentric anomaly and the final residual.
pub fn solve_kepler(mean_anomaly: f64, e: f64) -> Result<(f64, f64), FrameError> {
    let m = (mean_anomaly + PI).rem_euclid(2.0 * PI) - PI;
    let mut ecc_anom = if e < 0.8 { m } else { PI.copysign(m) };
    let mut residual = ecc_anom - e * ecc_anom.sin() - m;
    for _ in 0..KEPLER_MAX_ITER {
        if residual.abs() < KEPLER_TOLERANCE {
            return Ok((ecc_anom, residual));
        }
        ecc_anom -= residual / (1.0 - e * ecc_anom.cos());
        residual = ecc_anom - e * ecc_anom.sin() - m;
    }
    if residual.abs() < KEPLER_TOLERANCE {
        Ok((ecc_anom, residual))
    } else {
        Err(FrameError::KeplerNotConverged {
            iterations: KEPLER_MAX_ITER,
            residual,
        })
    }
}

/// Two-body state at `at` from osculating elements.
pub fn kepler_to_state(el: &KeplerianElements, at: Epoch) -> Result<EpochState, FrameError> {
    el.validate()?;
    let dt = at - el.epoch;
    if dt.abs() >= MAX_PROPAGATION_S {
        return Err(FrameError::InvalidElements(format!(
            "propagation span {dt} s exceeds 10 years"
        )));
    }
    let n = el.mean_motion();
    let mean_anomaly = el.m0_deg.to_radians() + n * dt;
    let (ecc_anom, _) = solve_kepler(mean_anomaly, el.e)?;
    let (sin_e, cos_e) = ecc_anom.sin_cos();
    let root = (1.0 - el.e * el.e).sqrt();

    let r_pf = Vec3::new(el.a_km * (cos_e - el.e), el.a_km * root * sin_e, 0.0);
    let edot = n / (1.0 - el.e * cos_e);
    let v_pf = Vec3::new(-el.a_km * sin_e * edot, el.a_km * root * cos_e * edot, 0.0);

    let rot = el.perifocal_to_inertial();
    Ok(EpochState::new(at, el.frame, rot * r_pf, rot * v_pf))
}
