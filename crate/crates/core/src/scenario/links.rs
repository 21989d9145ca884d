use serde::Serialize;

use super::setup::Scenario;
use crate::constants::MOON_RADIUS_KM;
use crate::frames::{segment_intersects_sphere, solve_light_time, tangential_altitude, EpochState};
use crate::link::off_boresight_deg;
use crate::Vec3;

/// Radius used for the lunar blockage test, slightly inside the surface so a
/// chord ending on the surface is not blocked by its own endpoint.
const MOON_BLOCK_RADIUS_KM: f64 = MOON_RADIUS_KM - 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Visibility {
    Visible,
    EarthOcculted,
    MoonOcculted,
    BelowMask,
    /// Ephemeris or light-time failure; counted as a failed link.
    Unavailable,
}

#[derive(Clone, Debug)]
pub struct LinkGeometry {
    pub epoch_index: usize,
    pub tx_index: usize,
    pub rx_index: usize,
    /// Transmitter at emission time.
    pub tx: EpochState,
    /// Receiver at reception time.
    pub rx: EpochState,
    pub tangential_altitude_km: f64,
    pub tx_off_boresight_deg: f64,
    pub rx_off_boresight_deg: f64,
    /// Transmitter elevation above a surface user's horizon, deg.
    pub elevation_deg: Option<f64>,
    pub visibility: Visibility,
    pub detail: String,
}

/// Elevation of `target` seen from a site whose local vertical is
/// `site - moon`, deg.
pub fn elevation_deg(site: &Vec3, moon: &Vec3, target: &Vec3) -> f64 {
    let up = (site - moon).normalize();
    let los = (target - site).normalize();
    los.dot(&up).clamp(-1.0, 1.0).asin().to_degrees()
}

/// Classifies one transmitter–receiver pair at `epoch_index`.
pub fn link_geometry(sc: &Scenario, epoch_index: usize, tx_index: usize, rx_index: usize) -> LinkGeometry {
    let epoch = sc.epochs[epoch_index];
    let tx = &sc.transmitters[tx_index];
    let rx = &sc.receivers[rx_index];
    let unavailable = |detail: String, rx_state: EpochState| LinkGeometry {
        epoch_index,
        tx_index,
        rx_index,
        tx: rx_state,
        rx: rx_state,
        tangential_altitude_km: f64::NAN,
        tx_off_boresight_deg: f64::NAN,
        rx_off_boresight_deg: f64::NAN,
        elevation_deg: None,
        visibility: Visibility::Unavailable,
        detail,
    };
    let blank = EpochState::new(epoch, rx.ephemeris.frame(), Vec3::zeros(), Vec3::zeros());
    let rx_state = match rx.ephemeris.state_at(epoch) {
        Ok(s) => s,
        Err(e) => return unavailable(format!("receiver ephemeris: {e}"), blank),
    };
    let lt = match solve_light_time(&rx_state, tx.ephemeris.as_ref()) {
        Ok(lt) => lt,
        Err(e) => return unavailable(format!("light time: {e}"), rx_state),
    };
    let moon = match sc.moon_position(epoch) {
        Ok(m) => m,
        Err(e) => return unavailable(format!("moon ephemeris: {e}"), rx_state),
    };
    let (tp, rp) = (lt.tx.position, rx_state.position);
    let h_t = match tangential_altitude(&tp, &rp) {
        Ok(h) => h,
        Err(e) => return unavailable(format!("geometry: {e}"), rx_state),
    };
    let moon_blocked = segment_intersects_sphere(&tp, &rp, &moon, MOON_BLOCK_RADIUS_KM).unwrap_or(true);
    let elevation = rx.elevation_mask_deg.map(|_| elevation_deg(&rp, &moon, &tp));
    let visibility = if h_t <= 0.0 {
        Visibility::EarthOcculted
    } else if moon_blocked {
        Visibility::MoonOcculted
    } else if matches!((elevation, rx.elevation_mask_deg), (Some(el), Some(mask)) if el < mask) {
        Visibility::BelowMask
    } else {
        Visibility::Visible
    };
    LinkGeometry {
        epoch_index,
        tx_index,
        rx_index,
        tx: lt.tx,
        rx: rx_state,
        tangential_altitude_km: h_t,
        tx_off_boresight_deg: off_boresight_deg(&tp, tx.pattern.boresight, &rp),
        rx_off_boresight_deg: off_boresight_deg(&rp, rx.pattern.boresight, &tp),
        elevation_deg: elevation,
        visibility,
        detail: String::new(),
    }
}

/// Every transmitter–receiver pair at one epoch, transmitter-major order.
pub fn enumerate_links(sc: &Scenario, epoch_index: usize) -> Vec<LinkGeometry> {
    let mut out = Vec::with_capacity(sc.transmitters.len() * sc.receivers.len());
    for tx_index in 0..sc.transmitters.len() {
        for rx_index in 0..sc.receivers.len() {
            out.push(link_geometry(sc, epoch_index, tx_index, rx_index));
        }
    }
    out
}
