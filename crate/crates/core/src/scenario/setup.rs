use std::sync::Arc;

use super::config::{MediumKind, ScenarioConfig, SurfaceUser};
use super::ConfigError;
use crate::constants::{GM_EARTH, GM_MOON, MOON_RADIUS_KM};
use crate::frames::{
    kepler_to_state, read_element_file, Ephemeris, Epoch, EpochState, Frame, FrameError,
    KeplerianElements, RelativeEphemeris, TabulatedEphemeris,
};
use crate::link::{AntennaPattern, DllParams};
use crate::media::{reference_medium, MediumModel, SpaceWeather, VacuumMedium};
use crate::Vec3;

pub struct Transmitter {
    pub id: String,
    pub ephemeris: Arc<dyn Ephemeris>,
    pub eirp_dbw: f64,
    pub pattern: Arc<AntennaPattern>,
}

pub struct Receiver {
    pub id: String,
    pub ephemeris: Arc<dyn Ephemeris>,
    pub pattern: Arc<AntennaPattern>,
    /// Elevation mask for surface users, deg.
    pub elevation_mask_deg: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct Frequency {
    pub label: String,
    pub hz: f64,
    pub dll: DllParams,
}

/// A point on a spherical, synchronously rotating Moon. The body frame has
/// +Z along the inertially fixed spin axis `pole` and +X toward the Earth
/// direction projected onto the equator, so longitude 0 is the sub-Earth
/// meridian.
pub struct SurfaceSite {
    pub moon: KeplerianElements,
    /// Unit spin axis.
    pub pole: Vec3,
    pub lat_deg: f64,
    pub lon_deg: f64,
    pub alt_km: f64,
}

impl SurfaceSite {
    fn local_offset(&self) -> Vec3 {
        let (slat, clat) = self.lat_deg.to_radians().sin_cos();
        let (slon, clon) = self.lon_deg.to_radians().sin_cos();
        Vec3::new(clat * clon, clat * slon, slat) * (MOON_RADIUS_KM + self.alt_km)
    }

    /// Offset of the site from the Moon's centre at `epoch`, with the Moon
    /// state used to orient the body frame.
    pub fn offset(&self, moon: &EpochState) -> (Vec3, Vec3) {
        let z = self.pole;
        let u = -(moon.position - z * moon.position.dot(&z));
        let du = -(moon.velocity - z * moon.velocity.dot(&z));
        let x = u.normalize();
        let y = z.cross(&x);
        let l = self.local_offset();
        let offset = x * l.x + y * l.y + z * l.z;
        let omega = z * (u.cross(&du).dot(&z) / u.norm_squared());
        (offset, omega.cross(&offset))
    }
}

impl Ephemeris for SurfaceSite {
    fn state_at(&self, epoch: Epoch) -> Result<EpochState, FrameError> {
        let moon = kepler_to_state(&self.moon, epoch)?;
        let (dp, dv) = self.offset(&moon);
        Ok(EpochState::new(epoch, moon.frame, moon.position + dp, moon.velocity + dv))
    }

    fn frame(&self) -> Frame {
        self.moon.frame
    }
}

/// Unit normal of a plane with inclination `i_deg` and node `raan_deg`.
pub fn plane_normal(i_deg: f64, raan_deg: f64) -> Vec3 {
    let (si, ci) = i_deg.to_radians().sin_cos();
    let (so, co) = raan_deg.to_radians().sin_cos();
    Vec3::new(so * si, -co * si, ci)
}

/// A validated config with every file loaded.
pub struct Scenario {
    pub config: ScenarioConfig,
    pub epochs: Vec<Epoch>,
    /// Medium evaluation epoch for each entry of `epochs`.
    pub medium_epochs: Vec<Epoch>,
    pub moon: KeplerianElements,
    pub medium: Arc<dyn MediumModel>,
    pub frequencies: Vec<Frequency>,
    pub transmitters: Vec<Transmitter>,
    pub receivers: Vec<Receiver>,
}

fn frame_err(what: &str, e: FrameError) -> ConfigError {
    ConfigError::invalid(what, e)
}

fn load_pattern(cfg: &ScenarioConfig, path: &Option<std::path::PathBuf>) -> Result<Option<AntennaPattern>, ConfigError> {
    path.as_ref()
        .map(|p| {
            AntennaPattern::from_csv_path(&cfg.resolve_path(p))
                .map_err(|e| ConfigError::invalid("pattern", e))
        })
        .transpose()
}

impl Scenario {
    pub fn prepare(config: ScenarioConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        let epochs = config.epochs.epochs()?;
        let start = epochs[0];
        let medium_start = match &config.weather.medium_epoch {
            Some(s) => Epoch::from_calendar(s).map_err(|e| frame_err("weather.medium_epoch", e))?,
            None => start,
        };
        let medium_epochs = epochs.iter().map(|&e| medium_start + (e - start)).collect();

        let m = &config.receivers.moon;
        let moon = KeplerianElements {
            a_km: m.a_km,
            e: m.e,
            i_deg: m.i_deg,
            raan_deg: m.raan_deg,
            argp_deg: m.argp_deg,
            m0_deg: m.m0_deg,
            gm: GM_EARTH + GM_MOON,
            epoch: match &m.epoch {
                Some(s) => Epoch::from_calendar(s).map_err(|e| frame_err("receivers.moon.epoch", e))?,
                None => start,
            },
            frame: Frame::EarthCenteredInertial,
        };
        moon.validate().map_err(|e| frame_err("receivers.moon", e))?;
        let pole = plane_normal(m.pole_i_deg, m.pole_raan_deg);

        let medium: Arc<dyn MediumModel> = match config.medium.model {
            MediumKind::Vacuum => Arc::new(VacuumMedium),
            MediumKind::Reference => Arc::new(
                reference_medium(config.medium.reference)
                    .map_err(|e| ConfigError::invalid("medium.reference", e))?,
            ),
        };

        let frequencies = config
            .frequencies
            .iter()
            .map(|f| {
                let (hz, dll) = f.resolve()?;
                Ok(Frequency {
                    label: f.label.clone(),
                    hz,
                    dll,
                })
            })
            .collect::<Result<Vec<_>, ConfigError>>()?;

        let mut transmitters = Vec::new();
        for group in &config.transmitters {
            let pattern = Arc::new(
                load_pattern(&config, &group.pattern)?
                    .unwrap_or_else(AntennaPattern::default_transmitter)
                    .with_boresight(group.boresight),
            );
            let mut push = |id: String, ephemeris: Arc<dyn Ephemeris>| {
                transmitters.push(Transmitter {
                    id,
                    ephemeris,
                    eirp_dbw: group.eirp_dbw,
                    pattern: pattern.clone(),
                })
            };
            if let Some(path) = &group.elements {
                let path = config.resolve_path(path);
                let els = read_element_file(&path, GM_EARTH, Frame::EarthCenteredInertial)
                    .map_err(|e| frame_err(&format!("transmitters[{}].elements", group.name), e))?;
                for (id, el) in els {
                    push(id, Arc::new(el));
                }
            }
            for path in &group.ephemerides {
                let path = config.resolve_path(path);
                let eph = TabulatedEphemeris::from_csv_path(&path)
                    .map_err(|e| frame_err(&format!("transmitters[{}].ephemerides", group.name), e))?;
                if eph.frame() != Frame::EarthCenteredInertial {
                    return Err(ConfigError::invalid(
                        &format!("transmitters[{}].ephemerides", group.name),
                        format!("{} is not Earth-centred inertial", path.display()),
                    ));
                }
                let id = path
                    .file_stem()
                    .map_or_else(|| "tx".to_string(), |s| s.to_string_lossy().into_owned());
                push(id, Arc::new(eph));
            }
        }

        let rx_cfg = &config.receivers;
        let rx_pattern = Arc::new(
            load_pattern(&config, &rx_cfg.pattern)?
                .unwrap_or_else(AntennaPattern::default_receiver)
                .with_boresight(rx_cfg.boresight),
        );
        let moon_eph: Arc<dyn Ephemeris> = Arc::new(moon);
        let mut receivers = Vec::new();
        if let Some(path) = &rx_cfg.orbiters {
            let path = config.resolve_path(path);
            let els = read_element_file(&path, GM_MOON, Frame::MoonCenteredInertial)
                .map_err(|e| frame_err("receivers.orbiters", e))?;
            for (id, el) in els {
                receivers.push(Receiver {
                    id,
                    ephemeris: Arc::new(RelativeEphemeris {
                        center: moon_eph.clone(),
                        local: Arc::new(el),
                    }),
                    pattern: rx_pattern.clone(),
                    elevation_mask_deg: None,
                });
            }
        }
        for SurfaceUser {
            name,
            lat_deg,
            lon_deg,
            alt_km,
            elevation_mask_deg,
        } in &rx_cfg.surface
        {
            receivers.push(Receiver {
                id: name.clone(),
                ephemeris: Arc::new(SurfaceSite {
                    moon,
                    pole,
                    lat_deg: *lat_deg,
                    lon_deg: *lon_deg,
                    alt_km: *alt_km,
                }),
                pattern: rx_pattern.clone(),
                elevation_mask_deg: Some(*elevation_mask_deg),
            });
        }

        let check_unique = |ids: Vec<&String>, field: &str| -> Result<(), ConfigError> {
            let mut seen = std::collections::HashSet::new();
            for id in ids {
                if !seen.insert(id) {
                    return Err(ConfigError::invalid(field, format!("duplicate id {id:?}")));
                }
            }
            Ok(())
        };
        check_unique(transmitters.iter().map(|t| &t.id).collect(), "transmitters")?;
        check_unique(receivers.iter().map(|r| &r.id).collect(), "receivers")?;
        if transmitters.is_empty() {
            return Err(ConfigError::invalid("transmitters", "element files list no satellites"));
        }
        if receivers.is_empty() {
            return Err(ConfigError::invalid("receivers", "orbiter file lists no satellites"));
        }

        Ok(Self {
            config,
            epochs,
            medium_epochs,
            moon,
            medium,
            frequencies,
            transmitters,
            receivers,
        })
    }

    /// `(kp, r12)` pairs in canonical order.
    pub fn weather_points(&self) -> Vec<(f64, f64)> {
        let w = &self.config.weather;
        w.kp.iter()
            .flat_map(|&kp| w.r12.iter().map(move |&r12| (kp, r12)))
            .collect()
    }

    pub fn weather_at(&self, epoch_index: usize, kp: f64, r12: f64) -> SpaceWeather {
        SpaceWeather::new(kp, r12, self.medium_epochs[epoch_index])
            .expect("weather grid validated at load")
    }

    pub fn moon_position(&self, epoch: Epoch) -> Result<Vec3, FrameError> {
        kepler_to_state(&self.moon, epoch).map(|s| s.position)
    }

    /// Number of (epoch, weather, frequency, transmitter, receiver) tasks.
    pub fn candidate_count(&self) -> usize {
        self.epochs.len()
            * self.weather_points().len()
            * self.frequencies.len()
            * self.transmitters.len()
            * self.receivers.len()
    }
}
