use serde::{Deserialize, Serialize};

use super::{MediaError, MediumModel, PlasmaSample, SpaceWeather};
use crate::constants::EARTH_RADIUS_KM;
use crate::frames::DipoleAxis;
use crate::Vec3;

/// Constants of the analytic reference medium. Densities in e/m^3,
/// lengths in km, field in T.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceParams {
    /// Chapman peak density for F10.7 = 63.75 and an overhead Sun.
    pub nm: f64,
    pub hm_km: f64,
    pub scale_height_km: f64,
    /// Fractional peak increase per solar flux unit above 63.75.
    pub solar_coeff: f64,
    /// Daylight factor on the night side.
    pub night_fraction: f64,
    /// Plasmasphere density at L = 1; falls as L^-4.
    pub n1: f64,
    pub trough: f64,
    pub lpp_a: f64,
    pub lpp_b: f64,
    /// Plasmapause tanh width, L units.
    pub lpp_width: f64,
    pub join_alt_km: f64,
    pub join_width_km: f64,
    /// Equatorial surface field strength.
    pub b0: f64,
    pub dipole: DipoleAxis,
    pub cutoff_radius_km: f64,
    /// Width of the smooth roll-off just inside the cutoff.
    pub taper_km: f64,
}

impl Default for ReferenceParams {
    fn default() -> Self {
        Self {
            nm: 3.5e11,
            hm_km: 300.0,
            scale_height_km: 60.0,
            solar_coeff: 0.004,
            night_fraction: 0.2,
            n1: 2.0e10,
            trough: 1.0e7,
            lpp_a: 5.6,
            lpp_b: 0.46,
            lpp_width: 0.1,
            join_alt_km: 1000.0,
            join_width_km: 100.0,
            b0: 3.12e-5,
            dipole: DipoleAxis::default(),
            cutoff_radius_km: 4.0 * EARTH_RADIUS_KM,
            taper_km: 0.25 * EARTH_RADIUS_KM,
        }
    }
}

impl ReferenceParams {
    pub fn validate(&self) -> Result<(), MediaError> {
        let check = |name: &'static str, ok: bool, value: f64| {
            if ok {
                Ok(())
            } else {
                Err(MediaError::Param {
                    name,
                    reason: format!("value {value} out of range"),
                })
            }
        };
        check("nm", self.nm >= 0.0 && self.nm < 1e14, self.nm)?;
        check("hm_km", self.hm_km > 0.0 && self.hm_km < 2000.0, self.hm_km)?;
        check("scale_height_km", self.scale_height_km > 0.0, self.scale_height_km)?;
        check("solar_coeff", self.solar_coeff >= 0.0, self.solar_coeff)?;
        check(
            "night_fraction",
            (0.0..=1.0).contains(&self.night_fraction),
            self.night_fraction,
        )?;
        check("n1", self.n1 >= 0.0, self.n1)?;
        check("trough", self.trough >= 0.0, self.trough)?;
        check("lpp_a", self.lpp_a > 0.0, self.lpp_a)?;
        check("lpp_b", self.lpp_b >= 0.0, self.lpp_b)?;
        check("lpp_width", self.lpp_width > 0.0, self.lpp_width)?;
        check("join_width_km", self.join_width_km > 0.0, self.join_width_km)?;
        check("b0", self.b0 >= 0.0 && self.b0 < 1e-4, self.b0)?;
        check(
            "cutoff_radius_km",
            self.cutoff_radius_km > EARTH_RADIUS_KM,
            self.cutoff_radius_km,
        )?;
        check(
            "taper_km",
            self.taper_km > 0.0 && self.taper_km < self.cutoff_radius_km - EARTH_RADIUS_KM,
            self.taper_km,
        )?;
        Ok(())
    }
}

/// Chapman ionosphere, L-shell plasmasphere with a Kp-dependent plasmapause,
/// and a centred dipole field.
#[derive(Clone, Debug)]
pub struct ReferenceMedium {
    params: ReferenceParams,
    axis: Vec3,
}

pub fn reference_medium(params: ReferenceParams) -> Result<ReferenceMedium, MediaError> {
    params.validate()?;
    Ok(ReferenceMedium {
        axis: params.dipole.unit(),
        params,
    })
}

impl ReferenceMedium {
    pub fn params(&self) -> &ReferenceParams {
        &self.params
    }

    pub fn solar_factor(&self, weather: &SpaceWeather) -> f64 {
        1.0 + self.params.solar_coeff * (weather.indices().f107 - 63.75)
    }

    pub fn plasmapause_l(&self, weather: &SpaceWeather) -> f64 {
        self.params.lpp_a - self.params.lpp_b * weather.kp()
    }

    /// Chapman profile without solar or daylight scaling.
    pub fn chapman(&self, alt_km: f64) -> f64 {
        let z = (alt_km - self.params.hm_km) / self.params.scale_height_km;
        self.params.nm * (0.5 * (1.0 - z - (-z).exp())).exp()
    }

    /// Dipole L-shell of an inertial position.
    pub fn l_shell(&self, pos: &Vec3) -> f64 {
        let r = pos.norm();
        let sin_lat = pos.dot(&self.axis) / r;
        let cos2 = (1.0 - sin_lat * sin_lat).max(1e-12);
        r / (EARTH_RADIUS_KM * cos2)
    }

    pub fn b_field(&self, pos: &Vec3) -> Vec3 {
        let r = pos.norm();
        let rhat = pos / r;
        let scale = self.params.b0 * (EARTH_RADIUS_KM / r).powi(3);
        (self.axis - 3.0 * self.axis.dot(&rhat) * rhat) * scale
    }

    fn taper(&self, r: f64) -> f64 {
        let start = self.params.cutoff_radius_km - self.params.taper_km;
        if r <= start {
            1.0
        } else if r >= self.params.cutoff_radius_km {
            0.0
        } else {
            let x = (r - start) / self.params.taper_km;
            1.0 - x * x * (3.0 - 2.0 * x)
        }
    }

    fn density(&self, pos: &Vec3, weather: &SpaceWeather) -> f64 {
        let p = &self.params;
        let r = pos.norm();
        let taper = self.taper(r);
        if taper == 0.0 {
            return 0.0;
        }
        let alt = r - EARTH_RADIUS_KM;
        let solar = self.solar_factor(weather);

        let daylight =
            p.night_fraction + (1.0 - p.night_fraction) * (pos.dot(&weather.sun_dir()) / r).max(0.0);
        let iono = self.chapman(alt) * solar * daylight;

        let join = 0.5 * (1.0 + ((alt - p.join_alt_km) / p.join_width_km).tanh());
        let plasma = if join < 1e-300 {
            0.0
        } else {
            let l = self.l_shell(pos);
            let inside = p.n1 * solar / (l * l * l * l);
            let falloff = 0.5 * (1.0 - ((l - self.plasmapause_l(weather)) / p.lpp_width).tanh());
            p.trough + (inside - p.trough) * falloff
        };
        (iono + join * plasma).max(0.0) * taper
    }
}

impl MediumModel for ReferenceMedium {
    fn sample(&self, pos: &Vec3, weather: &SpaceWeather) -> PlasmaSample {
        PlasmaSample {
            n_e: self.density(pos, weather),
            b_field: self.b_field(pos),
        }
    }

    fn cutoff_radius(&self) -> f64 {
        self.params.cutoff_radius_km
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::FREQ_L1_HZ;
    use crate::frames::Epoch;
    use crate::media::index_gradient;

    fn weather(kp: f64, r12: f64) -> SpaceWeather {
        SpaceWeather::new(kp, r12, Epoch::from_seconds(7.9e8)).unwrap()
    }

    fn solar_r12_zero() -> f64 {
        // r12 giving f107 = 63.75 exactly.
        0.0
    }

    #[test]
    fn chapman_peak_identity() {
        let m = reference_medium(ReferenceParams {
            n1: 0.0,
            trough: 0.0,
            ..Default::default()
        })
        .unwrap();
        let w = weather(3.0, solar_r12_zero());
        let p = w.sun_dir() * (EARTH_RADIUS_KM + 300.0);
        let n = m.sample(&p, &w).n_e;
        assert!((n / m.params().nm - 1.0).abs() < 1e-12, "{n}");
    }

    #[test]
    fn vanishes_beyond_cutoff() {
        let m = reference_medium(ReferenceParams::default()).unwrap();
        let w = weather(3.0, 150.0);
        for r in [m.cutoff_radius(), m.cutoff_radius() + 1.0, 1e5] {
            let p = Vec3::new(r, 0.0, 0.0);
            assert_eq!(m.sample(&p, &w).n_e, 0.0);
        }
        // Ionospheric part at the cutoff altitude is negligible.
        assert!(m.chapman(m.cutoff_radius() - EARTH_RADIUS_KM) < 1.0);
    }

    #[test]
    fn eroded_plasmasphere_sits_on_trough() {
        let m = reference_medium(ReferenceParams::default()).unwrap();
        let w = weather(9.0, 0.0);
        assert!((m.plasmapause_l(&w) - 1.46).abs() < 1e-12);
        // Equatorial point at L = 3, well past the plasmapause and the join.
        let eq = m.axis.cross(&Vec3::x()).normalize() * 3.0 * EARTH_RADIUS_KM;
        let n = m.sample(&eq, &w).n_e;
        assert!(n < m.params.trough * 1.01, "{n}");
    }

    #[test]
    fn dipole_strengths() {
        let m = reference_medium(ReferenceParams::default()).unwrap();
        let eq = m.axis.cross(&Vec3::y()).normalize() * EARTH_RADIUS_KM;
        assert!((m.b_field(&eq).norm() - 3.12e-5).abs() < 1e-15);
        assert!((m.b_field(&(m.axis * EARTH_RADIUS_KM)).norm() - 6.24e-5).abs() < 1e-15);
        assert!((m.l_shell(&(eq * 2.0)) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn index_rises_above_peak() {
        let m = reference_medium(ReferenceParams {
            n1: 0.0,
            trough: 0.0,
            ..Default::default()
        })
        .unwrap();
        let w = weather(3.0, 100.0);
        let up = w.sun_dir();
        let pos = up * (EARTH_RADIUS_KM + 350.0);
        let g = index_gradient(&m, &pos, &up, FREQ_L1_HZ, &w);
        assert!(g.dot(&up) > 0.0);
        let below = up * (EARTH_RADIUS_KM + 250.0);
        assert!(index_gradient(&m, &below, &up, FREQ_L1_HZ, &w).dot(&up) < 0.0);
    }

    #[test]
    fn plasmapause_contracts_with_kp() {
        // Radial equatorial segment from 2 to 3.75 R_E.
        let m = reference_medium(ReferenceParams::default()).unwrap();
        let dir = m.axis.cross(&Vec3::x()).normalize();
        let integral = |kp: f64| {
            let w = weather(kp, 100.0);
            (0..=1750)
                .map(|k| {
                    let r = 2.0 * EARTH_RADIUS_KM + k as f64 * 1.75 * EARTH_RADIUS_KM / 1750.0;
                    m.sample(&(dir * r), &w).n_e
                })
                .sum::<f64>()
        };
        let values: Vec<f64> = [1.0, 3.0, 5.0, 7.0, 9.0].iter().map(|&k| integral(k)).collect();
        assert!(values.windows(2).all(|w| w[1] < w[0]), "{values:?}");
    }

    #[test]
    fn rejects_bad_params() {
        assert!(reference_medium(ReferenceParams {
            scale_height_km: 0.0,
            ..Default::default()
        })
        .is_err());
    }
}
