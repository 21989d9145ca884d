//! Time tags, reference frames, two-body propagation, light-time and
//! line-of-sight geometry.
//!
//! Epochs are opaque continuous seconds past 2000-01-01T12:00:00 (J2000).
//! Calendar strings are mapped onto that scale without leap-second handling,
//! which is adequate for geometry but makes no claim of UTC correctness.

mod ephemeris;
mod geometry;
mod kepler;
mod light_time;
mod sm;

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Sub};
use std::str::FromStr;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::{EARTH_RADIUS_KM, MOON_RADIUS_KM, SECONDS_PER_DAY};
use crate::Vec3;

pub use ephemeris::{
    read_element_file, Ephemeris, FixedOffset, RelativeEphemeris, TabulatedEphemeris,
};
pub use geometry::{segment_intersects_sphere, segment_min_distance, tangential_altitude};
pub use kepler::{kepler_to_state, solve_kepler, KeplerianElements};
pub use light_time::{solve_light_time, LightTimeSolution};
pub use sm::{from_sm_frame, sun_direction, to_sm_frame, DipoleAxis, SmPosition, SmTransform};

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("Kepler solver did not converge after {iterations} iterations (residual {residual:e} rad)")]
    KeplerNotConverged { iterations: usize, residual: f64 },
    #[error("invalid orbital elements: {0}")]
    InvalidElements(String),
    #[error("ephemeris gap: no coverage for [{from_s}, {to_s}] s")]
    EphemerisGap { from_s: f64, to_s: f64 },
    #[error("frame mismatch: expected {expected}, got {got}")]
    FrameMismatch { expected: Frame, got: Frame },
    #[error("zero-length segment")]
    ZeroLengthSegment,
    #[error("Sun direction is parallel to the dipole axis; solar-magnetic frame undefined")]
    DegenerateSmFrame,
    #[error("light-time iteration did not converge (residual {residual_s:e} s)")]
    LightTimeNotConverged { residual_s: f64 },
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("ephemeris file error: {0}")]
    File(String),
}

/// A time tag in continuous seconds past J2000.
///
/// Stored as whole seconds plus a fraction in `[0, 1)` so differences stay
/// exact to well below a nanosecond over multi-year spans.
#[derive(Clone, Copy, Debug, Default)]
pub struct Epoch {
    whole: i64,
    frac: f64,
}

impl Epoch {
    pub const J2000: Epoch = Epoch { whole: 0, frac: 0.0 };

    pub fn from_seconds(seconds: f64) -> Self {
        Self::J2000.add_seconds(seconds)
    }

    pub fn seconds(&self) -> f64 {
        self.whole as f64 + self.frac
    }

    pub fn add_seconds(self, dt: f64) -> Self {
        let total = self.frac + dt;
        let w = total.floor();
        let mut frac = total - w;
        let mut whole = self.whole + w as i64;
        if frac >= 1.0 {
            frac -= 1.0;
            whole += 1;
        }
        Epoch { whole, frac }
    }

    /// `self - earlier` in seconds.
    pub fn seconds_since(&self, earlier: Epoch) -> f64 {
        (self.whole - earlier.whole) as f64 + (self.frac - earlier.frac)
    }

    pub fn days_since_j2000(&self) -> f64 {
        self.whole as f64 / SECONDS_PER_DAY + self.frac / SECONDS_PER_DAY
    }

    /// Parses `YYYY-MM-DDTHH:MM:SS[.fff]` (or with a space separator) as a
    /// naive calendar time on the continuous scale.
    pub fn from_calendar(text: &str) -> Result<Self, FrameError> {
        let trimmed = text.trim().trim_end_matches('Z');
        let parsed = NaiveDateTime::parse_from_str(trimmed, "%Y-%m-%dT%H:%M:%S%.f")
            .or_else(|_| NaiveDateTime::parse_from_str(trimmed, "%Y-%m-%d %H:%M:%S%.f"))
            .map_err(|e| FrameError::InvalidState(format!("bad calendar epoch {text:?}: {e}")))?;
        let reference = NaiveDateTime::parse_from_str("2000-01-01T12:00:00", "%Y-%m-%dT%H:%M:%S")
            .expect("static reference epoch");
        let delta = parsed - reference;
        let whole = delta.num_seconds();
        let nanos = (delta - chrono::Duration::seconds(whole))
            .num_nanoseconds()
            .unwrap_or(0);
        Ok(Epoch::J2000
            .add_seconds(whole as f64)
            .add_seconds(nanos as f64 * 1e-9))
    }

    /// Calendar rendering with millisecond resolution, inverse of
    /// `from_calendar`.
    pub fn to_calendar(&self) -> String {
        let reference = NaiveDateTime::parse_from_str("2000-01-01T12:00:00", "%Y-%m-%dT%H:%M:%S")
            .expect("static reference epoch");
        let millis = (self.frac * 1000.0).round() as i64;
        let t = reference
            + chrono::Duration::seconds(self.whole)
            + chrono::Duration::milliseconds(millis);
        t.format("%Y-%m-%dT%H:%M:%S%.3f").to_string()
    }
}

impl PartialEq for Epoch {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Epoch {}

impl PartialOrd for Epoch {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Epoch {
    fn cmp(&self, other: &Self) -> Ordering {
        self.whole
            .cmp(&other.whole)
            .then(self.frac.total_cmp(&other.frac))
    }
}

impl Add<f64> for Epoch {
    type Output = Epoch;
    fn add(self, rhs: f64) -> Epoch {
        self.add_seconds(rhs)
    }
}

impl Sub<f64> for Epoch {
    type Output = Epoch;
    fn sub(self, rhs: f64) -> Epoch {
        self.add_seconds(-rhs)
    }
}

impl Sub for Epoch {
    type Output = f64;
    fn sub(self, rhs: Epoch) -> f64 {
        self.seconds_since(rhs)
    }
}

impl fmt::Display for Epoch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.seconds())
    }
}

impl Serialize for Epoch {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.seconds())
    }
}

impl<'de> Deserialize<'de> for Epoch {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        f64::deserialize(deserializer).map(Epoch::from_seconds)
    }
}

/// Reference frames known to the crate. All are inertial (non-rotating)
/// apart from the solar-magnetic frame, whose orientation follows the Sun.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Frame {
    #[serde(rename = "eci")]
    EarthCenteredInertial,
    #[serde(rename = "mci")]
    MoonCenteredInertial,
    #[serde(rename = "sm")]
    SolarMagnetic,
}

impl Frame {
    pub fn as_str(&self) -> &'static str {
        match self {
            Frame::EarthCenteredInertial => "eci",
            Frame::MoonCenteredInertial => "mci",
            Frame::SolarMagnetic => "sm",
        }
    }

    /// Radius of the body at the frame origin, km.
    pub fn body_radius_km(&self) -> f64 {
        match self {
            Frame::EarthCenteredInertial | Frame::SolarMagnetic => EARTH_RADIUS_KM,
            Frame::MoonCenteredInertial => MOON_RADIUS_KM,
        }
    }
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Frame {
    type Err = FrameError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "eci" | "earth-centered-inertial" => Ok(Frame::EarthCenteredInertial),
            "mci" | "moon-centered-inertial" => Ok(Frame::MoonCenteredInertial),
            "sm" | "solar-magnetic" => Ok(Frame::SolarMagnetic),
            other => Err(FrameError::InvalidState(format!("unknown frame {other:?}"))),
        }
    }
}

/// Position (km) and velocity (km/s) at a time tag.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochState {
    pub epoch: Epoch,
    pub frame: Frame,
    pub position: Vec3,
    pub velocity: Vec3,
}

impl EpochState {
    pub fn new(epoch: Epoch, frame: Frame, position: Vec3, velocity: Vec3) -> Self {
        Self {
            epoch,
            frame,
            position,
            velocity,
        }
    }

    /// Checks finiteness and that the point is not inside the central body.
    /// Points exactly on the surface are accepted.
    pub fn validate(&self) -> Result<(), FrameError> {
        if !self.position.iter().chain(self.velocity.iter()).all(|v| v.is_finite()) {
            return Err(FrameError::InvalidState("non-finite state".into()));
        }
        let radius = self.frame.body_radius_km();
        if self.position.norm() < radius - 1e-9 {
            return Err(FrameError::InvalidState(format!(
                "|position| = {:.3} km is inside the {} body radius {radius} km",
                self.position.norm(),
                self.frame
            )));
        }
        Ok(())
    }
}
