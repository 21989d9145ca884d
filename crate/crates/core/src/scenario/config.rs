use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::de::{DeTable, DeValue};

use super::ConfigError;
use crate::constants::{FREQ_L1_HZ, FREQ_L5_HZ, MOON_RADIUS_KM};
use crate::frames::Epoch;
use crate::link::{Boresight, DllParams, SystemParams};
use crate::media::{ReferenceParams, SpaceWeather};
use crate::raytrace::SolverOptions;

/// Tangential-altitude bin edges used when the config gives none, km.
pub const DEFAULT_BIN_EDGES_KM: [f64; 11] = [
    0.0, 500.0, 1000.0, 2000.0, 3000.0, 4000.0, 6000.0, 8000.0, 10000.0, 15000.0, 20000.0,
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Worker threads; 0 uses every available core.
    #[serde(default)]
    pub workers: usize,
    #[serde(default = "default_uere_samples")]
    pub uere_samples: usize,
    #[serde(default = "default_bin_edges")]
    pub bin_edges_km: Vec<f64>,
    #[serde(default)]
    pub epochs: EpochSpan,
    #[serde(default)]
    pub weather: WeatherGrid,
    #[serde(default)]
    pub medium: MediumConfig,
    pub frequencies: Vec<FrequencyConfig>,
    pub transmitters: Vec<TransmitterGroup>,
    pub receivers: ReceiverConfig,
    #[serde(default)]
    pub link: SystemParams,
    #[serde(default)]
    pub solver: SolverOptions,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_uere_samples() -> usize {
    100
}

fn default_bin_edges() -> Vec<f64> {
    DEFAULT_BIN_EDGES_KM.to_vec()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpochSpan {
    /// Calendar start of the orbit propagation.
    pub start: String,
    pub span_hours: f64,
    pub step_minutes: f64,
}

impl Default for EpochSpan {
    fn default() -> Self {
        Self {
            start: "2027-03-01T12:00:00".into(),
            span_hours: 45.0,
            step_minutes: 30.0,
        }
    }
}

impl EpochSpan {
    pub fn start_epoch(&self) -> Result<Epoch, ConfigError> {
        Epoch::from_calendar(&self.start).map_err(|e| ConfigError::invalid("epochs.start", e))
    }

    /// Sample epochs from the start to the end of the span inclusive.
    pub fn epochs(&self) -> Result<Vec<Epoch>, ConfigError> {
        let start = self.start_epoch()?;
        let step = self.step_minutes * 60.0;
        let count = (self.span_hours * 3600.0 / step + 1e-9).floor() as usize + 1;
        Ok((0..count).map(|k| start + k as f64 * step).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeatherGrid {
    pub kp: Vec<f64>,
    pub r12: Vec<f64>,
    /// Epoch the medium is evaluated at for the first orbit sample; later
    /// samples advance by the same offset. Defaults to the orbit start.
    pub medium_epoch: Option<String>,
}

impl Default for WeatherGrid {
    fn default() -> Self {
        Self {
            kp: vec![3.0],
            r12: vec![167.24],
            medium_epoch: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MediumKind {
    #[default]
    Reference,
    Vacuum,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MediumConfig {
    pub model: MediumKind,
    pub reference: ReferenceParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencyConfig {
    /// `L1`, `L5` and `E1` carry built-in frequencies and loop parameters.
    pub label: String,
    #[serde(default)]
    pub hz: Option<f64>,
    #[serde(default)]
    pub dll: Option<DllParams>,
}

impl FrequencyConfig {
    pub fn resolve(&self) -> Result<(f64, DllParams), ConfigError> {
        let builtin = match self.label.as_str() {
            "L1" | "E1" => Some((FREQ_L1_HZ, DllParams::gps_l1())),
            "L5" => Some((FREQ_L5_HZ, DllParams::gps_l5())),
            _ => None,
        };
        let field = format!("frequencies[{}]", self.label);
        let hz = match (self.hz, builtin) {
            (Some(hz), _) => hz,
            (None, Some((hz, _))) => hz,
            (None, None) => return Err(ConfigError::invalid(&field, "unknown label needs `hz`")),
        };
        let dll = match (self.dll, builtin) {
            (Some(d), _) => d,
            (None, Some((_, d))) => d,
            (None, None) => return Err(ConfigError::invalid(&field, "unknown label needs `dll`")),
        };
        if !(hz > 0.0 && hz.is_finite()) {
            return Err(ConfigError::invalid(&field, format!("frequency {hz} Hz must be positive")));
        }
        dll.validate().map_err(|e| ConfigError::invalid(&field, e))?;
        Ok((hz, dll))
    }
}

/// A set of transmitters sharing link parameters. Exactly one of `elements`
/// (element CSV about the Earth) or `ephemerides` (state CSVs) is given.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransmitterGroup {
    pub name: String,
    #[serde(default)]
    pub elements: Option<PathBuf>,
    #[serde(default)]
    pub ephemerides: Vec<PathBuf>,
    #[serde(default = "default_eirp")]
    pub eirp_dbw: f64,
    /// `angle_deg,gain_dbi` CSV; the synthetic pattern when absent.
    #[serde(default)]
    pub pattern: Option<PathBuf>,
    #[serde(default)]
    pub boresight: Boresight,
}

fn default_eirp() -> f64 {
    27.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MoonOrbit {
    pub a_km: f64,
    pub e: f64,
    pub i_deg: f64,
    pub raan_deg: f64,
    pub argp_deg: f64,
    pub m0_deg: f64,
    /// Element epoch; the orbit start when absent.
    pub epoch: Option<String>,
    /// Lunar spin axis, given as the normal of a plane with this inclination
    /// and node in the Earth-centred frame.
    pub pole_i_deg: f64,
    pub pole_raan_deg: f64,
}

impl Default for MoonOrbit {
    fn default() -> Self {
        Self {
            a_km: 384_400.0,
            e: 0.0549,
            i_deg: 28.58,
            raan_deg: 0.0,
            argp_deg: 0.0,
            m0_deg: 0.0,
            epoch: None,
            pole_i_deg: 21.90,
            pole_raan_deg: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceUser {
    pub name: String,
    pub lat_deg: f64,
    pub lon_deg: f64,
    #[serde(default)]
    pub alt_km: f64,
    #[serde(default)]
    pub elevation_mask_deg: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReceiverConfig {
    /// Element CSV of lunar orbiters, Moon-centred.
    #[serde(default)]
    pub orbiters: Option<PathBuf>,
    #[serde(default)]
    pub surface: Vec<SurfaceUser>,
    #[serde(default)]
    pub moon: MoonOrbit,
    #[serde(default)]
    pub pattern: Option<PathBuf>,
    #[serde(default = "default_rx_boresight")]
    pub boresight: Boresight,
}

fn default_rx_boresight() -> Boresight {
    Boresight::EarthPointing
}

impl ScenarioConfig {
    /// Reads, schema-checks, and validates a config file.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
        Self::from_toml_str(&text, &base)
    }

    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let doc = DeTable::parse(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let mut unknown = Vec::new();
        check_table(doc.get_ref(), &config_schema(), "", text, &mut unknown);
        if !unknown.is_empty() {
            return Err(ConfigError::UnknownKeys(unknown));
        }
        let mut cfg: ScenarioConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let edges = &self.bin_edges_km;
        if edges.len() < 2 {
            return Err(ConfigError::invalid("bin_edges_km", "needs at least two edges"));
        }
        if edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ConfigError::invalid("bin_edges_km", "edges must be finite and strictly increasing"));
        }
        if self.uere_samples == 0 {
            return Err(ConfigError::invalid("uere_samples", "must be at least 1"));
        }
        let span = &self.epochs;
        if !(span.span_hours >= 0.0 && span.span_hours.is_finite()) {
            return Err(ConfigError::invalid("epochs.span_hours", "must be finite and >= 0"));
        }
        if !(span.step_minutes > 0.0 && span.step_minutes.is_finite()) {
            return Err(ConfigError::invalid("epochs.step_minutes", "must be positive"));
        }
        let start = span.start_epoch()?;
        if let Some(m) = &self.weather.medium_epoch {
            Epoch::from_calendar(m).map_err(|e| ConfigError::invalid("weather.medium_epoch", e))?;
        }
        if self.weather.kp.is_empty() || self.weather.r12.is_empty() {
            return Err(ConfigError::invalid("weather", "kp and r12 lists must be non-empty"));
        }
        for &kp in &self.weather.kp {
            for &r12 in &self.weather.r12 {
                SpaceWeather::new(kp, r12, start).map_err(|e| ConfigError::invalid("weather", e))?;
            }
        }
        self.medium
            .reference
            .validate()
            .map_err(|e| ConfigError::invalid("medium.reference", e))?;
        if self.frequencies.is_empty() {
            return Err(ConfigError::invalid("frequencies", "at least one frequency is required"));
        }
        let mut labels: Vec<&str> = Vec::new();
        for f in &self.frequencies {
            if labels.contains(&f.label.as_str()) {
                return Err(ConfigError::invalid("frequencies", format!("duplicate label {:?}", f.label)));
            }
            labels.push(&f.label);
            f.resolve()?;
        }
        if self.transmitters.is_empty() {
            return Err(ConfigError::invalid("transmitters", "at least one transmitter group is required"));
        }
        for (k, t) in self.transmitters.iter().enumerate() {
            let field = format!("transmitters[{k}]");
            if t.elements.is_some() == !t.ephemerides.is_empty() {
                return Err(ConfigError::invalid(&field, "give exactly one of `elements` or `ephemerides`"));
            }
            if !t.eirp_dbw.is_finite() {
                return Err(ConfigError::invalid(&field, "eirp_dbw must be finite"));
            }
        }
        let rx = &self.receivers;
        if rx.orbiters.is_none() && rx.surface.is_empty() {
            return Err(ConfigError::invalid("receivers", "at least one receiver is required"));
        }
        for (k, s) in rx.surface.iter().enumerate() {
            let field = format!("receivers.surface[{k}]");
            if !(-90.0..=90.0).contains(&s.lat_deg) || !s.lon_deg.is_finite() {
                return Err(ConfigError::invalid(&field, "latitude must lie in [-90, 90]"));
            }
            if !(s.alt_km > -MOON_RADIUS_KM && s.alt_km.is_finite()) {
                return Err(ConfigError::invalid(&field, "altitude out of range"));
            }
            if !(-90.0..=90.0).contains(&s.elevation_mask_deg) {
                return Err(ConfigError::invalid(&field, "elevation mask must lie in [-90, 90]"));
            }
        }
        if !(self.link.threshold_dbhz.is_finite() && self.link.n0_dbw_hz.is_finite()) {
            return Err(ConfigError::invalid("link", "noise density and threshold must be finite"));
        }
        self.solver.validate().map_err(|e| ConfigError::invalid("solver", e))?;
        Ok(())
    }
}

/// Allowed key structure of a TOML document.
enum Schema {
    Any,
    Table(Vec<(String, Schema)>),
    /// Array whose table elements follow the inner schema.
    Tables(Box<Schema>),
}

fn table(entries: Vec<(&str, Schema)>) -> Schema {
    Schema::Table(entries.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
}

/// Schema mirroring the serialized form of a default value.
fn schema_of<T: Serialize>(value: &T) -> Schema {
    fn walk(v: &toml::Value) -> Schema {
        match v {
            toml::Value::Table(t) => Schema::Table(t.iter().map(|(k, v)| (k.clone(), walk(v))).collect()),
            toml::Value::Array(a) => match a.first() {
                Some(first @ toml::Value::Table(_)) => Schema::Tables(Box::new(walk(first))),
                _ => Schema::Any,
            },
            _ => Schema::Any,
        }
    }
    toml::Value::try_from(value).map_or(Schema::Any, |v| walk(&v))
}

fn with_optional(schema: Schema, extra: &[&str]) -> Schema {
    match schema {
        Schema::Table(mut entries) => {
            for k in extra {
                if !entries.iter().any(|(e, _)| e == k) {
                    entries.push((k.to_string(), Schema::Any));
                }
            }
            Schema::Table(entries)
        }
        other => other,
    }
}

fn config_schema() -> Schema {
    use Schema::Any;
    let dll = schema_of(&DllParams::gps_l1());
    table(vec![
        ("name", Any),
        ("seed", Any),
        ("output_dir", Any),
        ("workers", Any),
        ("uere_samples", Any),
        ("bin_edges_km", Any),
        ("epochs", schema_of(&EpochSpan::default())),
        ("weather", with_optional(schema_of(&WeatherGrid::default()), &["medium_epoch"])),
        ("medium", table(vec![("model", Any), ("reference", schema_of(&ReferenceParams::default()))])),
        ("frequencies", Schema::Tables(Box::new(table(vec![("label", Any), ("hz", Any), ("dll", dll)])))),
        (
            "transmitters",
            Schema::Tables(Box::new(table(vec![
                ("name", Any),
                ("elements", Any),
                ("ephemerides", Any),
                ("eirp_dbw", Any),
                ("pattern", Any),
                ("boresight", Any),
            ]))),
        ),
        (
            "receivers",
            table(vec![
                ("orbiters", Any),
                ("surface", schema_of(&vec![SurfaceUser {
                    name: String::new(),
                    lat_deg: 0.0,
                    lon_deg: 0.0,
                    alt_km: 0.0,
                    elevation_mask_deg: 0.0,
                }])),
                ("moon", with_optional(schema_of(&MoonOrbit::default()), &["epoch"])),
                ("pattern", Any),
                ("boresight", Any),
            ]),
        ),
        ("link", schema_of(&SystemParams::default())),
        ("solver", schema_of(&SolverOptions::default())),
    ])
}

fn line_of(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

fn check_table(t: &DeTable<'_>, schema: &Schema, path: &str, src: &str, out: &mut Vec<String>) {
    let Schema::Table(entries) = schema else {
        return;
    };
    for (key, value) in t.iter() {
        let name = key.get_ref().as_ref();
        let full = if path.is_empty() {
            name.to_string()
        } else {
            format!("{path}.{name}")
        };
        match entries.iter().find(|(k, _)| k == name) {
            None => out.push(format!("line {}: unknown key `{full}`", line_of(src, key.span().start))),
            Some((_, sub)) => check_value(value.get_ref(), sub, &full, src, out),
        }
    }
}

fn check_value(v: &DeValue<'_>, schema: &Schema, path: &str, src: &str, out: &mut Vec<String>) {
    match (v, schema) {
        (DeValue::Table(t), Schema::Table(_)) => check_table(t, schema, path, src, out),
        (DeValue::Array(items), Schema::Tables(inner)) => {
            for (k, item) in items.iter().enumerate() {
                if let DeValue::Table(t) = item.get_ref() {
                    check_table(t, inner, &format!("{path}[{k}]"), src, out);
                }
            }
        }
        _ => {}
    }
}
