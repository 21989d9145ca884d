#![allow(dead_code)]

use plasmaray::constants::EARTH_RADIUS_KM;
use plasmaray::frames::Epoch;
use plasmaray::media::SpaceWeather;
use plasmaray::Vec3;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitSphere};

pub const GPS_RADIUS_KM: f64 = 26_560.0;
pub const LUNAR_RANGE_KM: f64 = 400_000.0;

/// Transmitter at GPS radius and receiver at lunar range whose chord touches
/// tangential altitude `h_km` at unit position `u`, travelling along `v`.
pub fn link_through(h_km: f64, u: &Vec3, v: &Vec3) -> (Vec3, Vec3) {
    let t = u * (EARTH_RADIUS_KM + h_km);
    let a = (GPS_RADIUS_KM.powi(2) - t.norm_squared()).sqrt();
    let b = (LUNAR_RANGE_KM.powi(2) - t.norm_squared()).sqrt();
    (t - v * a, t + v * b)
}

/// Random orthonormal pair `(u, v)`.
pub fn random_frame(rng: &mut ChaCha8Rng) -> (Vec3, Vec3) {
    let u = Vec3::from(UnitSphere.sample(rng));
    let w = Vec3::from(UnitSphere.sample(rng));
    let v = (w - u * u.dot(&w)).normalize();
    (u, v)
}

/// Random link with tangential altitude uniform in `[lo, hi]` km.
pub fn random_link(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> (Vec3, Vec3, f64) {
    let h = rng.random_range(lo..hi);
    let (u, v) = random_frame(rng);
    let (tx, rx) = link_through(h, &u, &v);
    (tx, rx, h)
}

pub fn medium_epoch() -> Epoch {
    Epoch::from_calendar("2025-01-01T12:00:00").unwrap()
}

pub fn weather(kp: f64, r12: f64) -> SpaceWeather {
    SpaceWeather::new(kp, r12, medium_epoch()).unwrap()
}
