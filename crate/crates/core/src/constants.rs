//! Physical and geodetic constants shared across the crate.

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT_M_S: f64 = 299_792_458.0;
/// Speed of light in vacuum, km/s.
pub const SPEED_OF_LIGHT_KM_S: f64 = SPEED_OF_LIGHT_M_S / 1000.0;

/// Equatorial Earth radius, km. Used for altitudes, occultation and L-shells.
pub const EARTH_RADIUS_KM: f64 = 6378.137;
/// Mean lunar radius, km.
pub const MOON_RADIUS_KM: f64 = 1737.4;

/// Earth gravitational parameter, km^3/s^2.
pub const GM_EARTH: f64 = 398_600.441_8;
/// Lunar gravitational parameter, km^3/s^2.
pub const GM_MOON: f64 = 4_902.800_066;

/// Elementary charge, C.
pub const ELECTRON_CHARGE: f64 = 1.602_176_634e-19;
/// Electron rest mass, kg.
pub const ELECTRON_MASS: f64 = 9.109_383_701_5e-31;
/// Vacuum permittivity, F/m.
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;

/// First-order ionospheric coefficient, m^3/s^2 (delay = 40.3 TEC / f^2).
pub const FIRST_ORDER_COEFF: f64 = 40.3;
/// Second-order coefficient (q integrand scale), SI.
pub const SECOND_ORDER_COEFF: f64 = -2.2566e12;
/// Third-order density-squared coefficient.
pub const THIRD_ORDER_DENSITY_COEFF: f64 = 2437.0;
/// Third-order magnetic coefficient.
pub const THIRD_ORDER_FIELD_COEFF: f64 = 4.74e22;

/// GPS L1 / Galileo E1 carrier, Hz.
pub const FREQ_L1_HZ: f64 = 1_575.42e6;
/// GPS L5 / Galileo E5a carrier, Hz.
pub const FREQ_L5_HZ: f64 = 1_176.45e6;

/// Seconds per day.
pub const SECONDS_PER_DAY: f64 = 86_400.0;
