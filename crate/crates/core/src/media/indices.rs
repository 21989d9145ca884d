use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{MediumModel, PlasmaSample, SpaceWeather};
use crate::constants::{EARTH_RADIUS_KM, ELECTRON_CHARGE, ELECTRON_MASS, VACUUM_PERMITTIVITY};
use crate::Vec3;

/// f_p^2 per unit density, Hz^2 m^3 (about 80.6).
pub const PLASMA_FREQ_SQ_PER_DENSITY: f64 =
    ELECTRON_CHARGE * ELECTRON_CHARGE / (4.0 * PI * PI * VACUUM_PERMITTIVITY * ELECTRON_MASS);
/// f_g per tesla, Hz/T.
pub const GYRO_FREQ_PER_TESLA: f64 = ELECTRON_CHARGE / (2.0 * PI * ELECTRON_MASS);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolarIndices {
    pub f107: f64,
    pub ig12: f64,
}

/// F10.7 and IG12 from the smoothed sunspot number.
pub fn solar_indices_from_r12(r12: f64) -> SolarIndices {
    SolarIndices {
        f107: 63.75 + 0.728 * r12 + 0.00089 * r12 * r12,
        ig12: -12.349154 + 1.4683266 * r12 - 0.00267690893 * r12 * r12,
    }
}

pub fn plasma_frequency(n_e: f64) -> f64 {
    (n_e * PLASMA_FREQ_SQ_PER_DENSITY).sqrt()
}

pub fn gyro_frequency(b_mag: f64) -> f64 {
    b_mag * GYRO_FREQ_PER_TESLA
}

/// Cosine of the angle between the ray and the field; 0 where there is no field.
pub fn cos_theta(b_field: &Vec3, ray_dir: &Vec3) -> f64 {
    let b = b_field.norm();
    if b == 0.0 {
        0.0
    } else {
        (b_field.dot(ray_dir) / (b * ray_dir.norm())).clamp(-1.0, 1.0)
    }
}

/// `n - 1` for the phase index, evaluated without forming `1 + tiny`.
pub fn phase_refractivity(sample: &PlasmaSample, ray_dir: &Vec3, f: f64) -> f64 {
    let fp2 = sample.n_e * PLASMA_FREQ_SQ_PER_DENSITY;
    if fp2 == 0.0 {
        return 0.0;
    }
    let fg = gyro_frequency(sample.b_field.norm());
    let c = cos_theta(&sample.b_field, ray_dir);
    let f2 = f * f;
    -fp2 / (2.0 * f2)
        - fp2 * fg * c / (2.0 * f2 * f)
        - fp2 / (4.0 * f2 * f2) * (fp2 / 2.0 + fg * fg * (1.0 + c * c))
}

/// `n_gr - 1` for the group index.
pub fn group_refractivity(sample: &PlasmaSample, ray_dir: &Vec3, f: f64) -> f64 {
    let fp2 = sample.n_e * PLASMA_FREQ_SQ_PER_DENSITY;
    if fp2 == 0.0 {
        return 0.0;
    }
    let fg = gyro_frequency(sample.b_field.norm());
    let c = cos_theta(&sample.b_field, ray_dir);
    let f2 = f * f;
    fp2 / (2.0 * f2)
        + fp2 * fg * c / (f2 * f)
        + 3.0 * fp2 / (4.0 * f2 * f2) * (fp2 / 2.0 + fg * fg * (1.0 + c * c))
}

pub fn phase_index(sample: &PlasmaSample, ray_dir: &Vec3, f: f64) -> f64 {
    1.0 + phase_refractivity(sample, ray_dir, f)
}

pub fn group_index(sample: &PlasmaSample, ray_dir: &Vec3, f: f64) -> f64 {
    1.0 + group_refractivity(sample, ray_dir, f)
}

/// Finite-difference step for the index gradient, km.
pub fn gradient_step_km(pos: &Vec3) -> f64 {
    (1e-4 * (pos.norm() - EARTH_RADIUS_KM)).max(0.1)
}

/// Central-difference gradient of the phase index, 1/km, with the ray
/// direction held fixed.
pub fn index_gradient(
    medium: &dyn MediumModel,
    pos: &Vec3,
    ray_dir: &Vec3,
    f: f64,
    weather: &SpaceWeather,
) -> Vec3 {
    let delta = gradient_step_km(pos);
    let mut grad = Vec3::zeros();
    for axis in 0..3 {
        let mut plus = *pos;
        let mut minus = *pos;
        plus[axis] += delta;
        minus[axis] -= delta;
        let np = phase_refractivity(&medium.sample(&plus, weather), ray_dir, f);
        let nm = phase_refractivity(&medium.sample(&minus, weather), ray_dir, f);
        grad[axis] = (np - nm) / (2.0 * delta);
    }
    grad
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::{FREQ_L1_HZ, FREQ_L5_HZ};
    use crate::frames::Epoch;
    use crate::media::VacuumMedium;
    use proptest::prelude::*;

    fn sample(n_e: f64, b: Vec3) -> PlasmaSample {
        PlasmaSample { n_e, b_field: b }
    }

    #[test]
    fn solar_index_polynomials() {
        let s = solar_indices_from_r12(0.0);
        assert_eq!((s.f107, s.ig12), (63.75, -12.349154));
        assert!((solar_indices_from_r12(100.0).f107 - 145.45).abs() < 1e-9);
        assert!((solar_indices_from_r12(167.24).f107 - 210.39).abs() < 1.0);
    }

    #[test]
    fn plasma_and_gyro_frequencies() {
        assert_eq!(plasma_frequency(0.0), 0.0);
        assert!((plasma_frequency(1e12) / 8.9787e6 - 1.0).abs() < 1e-4);
        assert!((plasma_frequency(1e10) / 0.8979e6 - 1.0).abs() < 1e-4);
        assert_eq!(gyro_frequency(0.0), 0.0);
        assert!((gyro_frequency(3.12e-5) / 0.8733e6 - 1.0).abs() < 1e-3);
        assert!((gyro_frequency(5e-5) / 1.3995e6 - 1.0).abs() < 1e-4);
    }

    #[test]
    fn vacuum_index_is_exactly_one() {
        let s = sample(0.0, Vec3::new(1e-5, 0.0, 0.0));
        assert_eq!(phase_index(&s, &Vec3::x(), FREQ_L1_HZ), 1.0);
        assert_eq!(group_index(&s, &Vec3::x(), FREQ_L1_HZ), 1.0);
    }

    #[test]
    fn first_order_terms() {
        let s = sample(1e12, Vec3::zeros());
        let dn = phase_refractivity(&s, &Vec3::x(), FREQ_L1_HZ);
        let dg = group_refractivity(&s, &Vec3::x(), FREQ_L1_HZ);
        assert!((dn / -1.6239e-5 - 1.0).abs() < 1e-3, "{dn}");
        assert!((dg / 1.6239e-5 - 1.0).abs() < 1e-3, "{dg}");
        let sum = phase_index(&s, &Vec3::x(), FREQ_L1_HZ) + group_index(&s, &Vec3::x(), FREQ_L1_HZ);
        assert!((sum - 2.0).abs() < 1e-9);
    }

    #[test]
    fn flipping_direction_flips_only_cubic_term() {
        let s = sample(1e12, Vec3::new(0.0, 3e-5, 4e-5));
        let d = Vec3::new(0.3, 0.4, 0.5).normalize();
        let a = phase_refractivity(&s, &d, FREQ_L5_HZ);
        let b = phase_refractivity(&s, &(-d), FREQ_L5_HZ);
        let fp2 = 1e12 * PLASMA_FREQ_SQ_PER_DENSITY;
        let cubic = fp2 * gyro_frequency(5e-5) * cos_theta(&s.b_field, &d) / (2.0 * FREQ_L5_HZ.powi(3));
        assert!(((a - b) + 2.0 * cubic).abs() < 1e-18);
        assert!(((a + b) / 2.0 - (a + cubic)).abs() < 1e-18);
    }

    #[test]
    fn vacuum_gradient_is_zero() {
        let w = SpaceWeather::new(3.0, 100.0, Epoch::J2000).unwrap();
        let g = index_gradient(&VacuumMedium, &Vec3::new(7000.0, 0.0, 0.0), &Vec3::x(), FREQ_L1_HZ, &w);
        assert_eq!(g, Vec3::zeros());
    }

    proptest! {
        #[test]
        fn index_ordering_and_first_order_match(
            log_ne in 0.0f64..12.5,
            bx in -5e-5f64..5e-5, by in -5e-5f64..5e-5, bz in -5e-5f64..5e-5,
            dx in -1.0f64..1.0, dy in -1.0f64..1.0, dz in -1.0f64..1.0,
            f in 1.0e9f64..2.0e9,
        ) {
            let dir = Vec3::new(dx, dy, dz);
            prop_assume!(dir.norm() > 1e-3);
            let dir = dir.normalize();
            let n_e = 10f64.powf(log_ne);
            let unmag = sample(n_e, Vec3::zeros());
            prop_assert!(phase_index(&unmag, &dir, f) <= 1.0);
            prop_assert!(group_index(&unmag, &dir, f) >= 1.0);

            let s = sample(n_e, Vec3::new(bx, by, bz));
            let dn = phase_refractivity(&s, &dir, f);
            let dg = group_refractivity(&s, &dir, f);
            prop_assert!(dn.abs() < 1e-3);
            let fp2 = n_e * PLASMA_FREQ_SQ_PER_DENSITY;
            let fg = gyro_frequency(s.b_field.norm());
            let c = cos_theta(&s.b_field, &dir);
            let cubic = (fp2 * fg * c / f.powi(3)).abs();
            let quartic = fp2 / (4.0 * f.powi(4)) * (fp2 / 2.0 + fg * fg * (1.0 + c * c));
            let gap = (-dn - dg).abs();
            prop_assert!(gap <= 1.5 * cubic + 4.0 * quartic + 1e-18);
        }

        #[test]
        fn f107_monotone(a in 0.0f64..250.0, b in 0.0f64..250.0) {
            prop_assume!(a < b);
            prop_assert!(solar_indices_from_r12(a).f107 < solar_indices_from_r12(b).f107);
        }
    }
}
