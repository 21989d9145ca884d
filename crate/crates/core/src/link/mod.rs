//! Antenna gains, received C/N0, DLL thermal noise and UERE statistics.

use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::SPEED_OF_LIGHT_M_S;
use crate::frames::{tangential_altitude, EpochState, Frame};
use crate::Vec3;

#[derive(Debug, Error)]
pub enum LinkError {
    #[error("antenna pattern {0:?} has no gain entries")]
    EmptyPattern(String),
    #[error("antenna pattern {name:?}: {reason}")]
    BadPattern { name: String, reason: String },
    #[error("off-boresight angle {0} deg outside [0, 180]")]
    AngleRange(f64),
    #[error("link endpoints must be Earth-centred inertial, got {0}")]
    Frame(Frame),
    #[error("invalid DLL parameters: {0}")]
    DllParams(String),
    #[error("pattern file error: {0}")]
    File(String),
}

/// Gain versus off-boresight angle, symmetric about the boresight.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AntennaPattern {
    pub name: String,
    pub angles_deg: Vec<f64>,
    pub gains_dbi: Vec<f64>,
    #[serde(default)]
    pub boresight: Boresight,
}

#[derive(Serialize, Deserialize)]
struct PatternRow {
    angle_deg: f64,
    gain_dbi: f64,
}

impl AntennaPattern {
    pub fn new(name: &str, angles_deg: Vec<f64>, gains_dbi: Vec<f64>) -> Result<Self, LinkError> {
        let bad = |reason: &str| LinkError::BadPattern {
            name: name.to_string(),
            reason: reason.to_string(),
        };
        if angles_deg.len() != gains_dbi.len() {
            return Err(bad("angle and gain columns differ in length"));
        }
        if let Some(&first) = angles_deg.first() {
            if first != 0.0 {
                return Err(bad("angle grid must start at 0"));
            }
        }
        if angles_deg.windows(2).any(|w| w[1] <= w[0]) {
            return Err(bad("angle grid must be strictly increasing"));
        }
        if angles_deg.last().is_some_and(|&a| a > 180.0) {
            return Err(bad("angles beyond 180 deg"));
        }
        if gains_dbi.iter().any(|g| !g.is_finite()) {
            return Err(bad("non-finite gain"));
        }
        Ok(Self {
            name: name.to_string(),
            angles_deg,
            gains_dbi,
            boresight: Boresight::Nadir,
        })
    }

    pub fn with_boresight(mut self, boresight: Boresight) -> Self {
        self.boresight = boresight;
        self
    }

    fn tabulate(name: &str, gain: impl Fn(f64) -> f64) -> Self {
        let angles: Vec<f64> = (0..=180).map(|k| k as f64 * 0.5).collect();
        let gains = angles.iter().map(|&a| gain(a)).collect();
        Self::new(name, angles, gains).expect("static pattern is well formed")
    }

    /// Lunar receiver: 14 dBi peak, 6 deg half-power beamwidth, -10 dBi floor.
    pub fn default_receiver() -> Self {
        Self::tabulate("lunar-rx-14dBi", |a| (14.0 - 12.0 * (a / 6.0).powi(2)).max(-10.0))
            .with_boresight(Boresight::EarthPointing)
    }

    /// Synthetic GNSS transmit pattern: flat 13 dBi main beam to 12 deg, a
    /// parabolic roll-off onto a -5 dBi sidelobe shelf, and a linear fall to
    /// -30 dBi between 70 and 90 deg.
    pub fn default_transmitter() -> Self {
        Self::tabulate("gnss-tx-synthetic", |a| {
            if a <= 12.0 {
                13.0
            } else if a <= 70.0 {
                (13.0 - 12.0 * ((a - 12.0) / 9.6).powi(2)).max(-5.0)
            } else {
                -5.0 - 25.0 * (a - 70.0) / 20.0
            }
        })
    }

    pub fn peak_gain(&self) -> f64 {
        self.gains_dbi.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Reads `angle_deg,gain_dbi` rows.
    pub fn from_csv_reader<R: Read>(name: &str, reader: R) -> Result<Self, LinkError> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let mut angles = Vec::new();
        let mut gains = Vec::new();
        for row in rdr.deserialize::<PatternRow>() {
            let row = row.map_err(|e| LinkError::File(format!("{name}: {e}")))?;
            angles.push(row.angle_deg);
            gains.push(row.gain_dbi);
        }
        Self::new(name, angles, gains)
    }

    pub fn from_csv_path(path: &Path) -> Result<Self, LinkError> {
        let file = std::fs::File::open(path)
            .map_err(|e| LinkError::File(format!("{}: {e}", path.display())))?;
        let name = path
            .file_stem()
            .map_or_else(|| "pattern".to_string(), |s| s.to_string_lossy().into_owned());
        Self::from_csv_reader(&name, file)
    }

    pub fn to_csv_writer<W: Write>(&self, writer: W) -> Result<(), LinkError> {
        let mut wtr = csv::Writer::from_writer(writer);
        for (&angle_deg, &gain_dbi) in self.angles_deg.iter().zip(&self.gains_dbi) {
            wtr.serialize(PatternRow { angle_deg, gain_dbi })
                .map_err(|e| LinkError::File(e.to_string()))?;
        }
        wtr.flush().map_err(|e| LinkError::File(e.to_string()))
    }
}

/// Linear interpolation in the gain table, clamped to the last node.
pub fn gain_lookup(pattern: &AntennaPattern, off_boresight_deg: f64) -> Result<f64, LinkError> {
    if pattern.angles_deg.is_empty() {
        return Err(LinkError::EmptyPattern(pattern.name.clone()));
    }
    if !(0.0..=180.0).contains(&off_boresight_deg) {
        return Err(LinkError::AngleRange(off_boresight_deg));
    }
    let a = &pattern.angles_deg;
    let g = &pattern.gains_dbi;
    let last = a.len() - 1;
    if off_boresight_deg >= a[last] {
        return Ok(g[last]);
    }
    let hi = a.partition_point(|&x| x <= off_boresight_deg);
    let lo = hi - 1;
    let t = (off_boresight_deg - a[lo]) / (a[hi] - a[lo]);
    Ok(g[lo] + t * (g[hi] - g[lo]))
}

/// Which way an antenna's boresight points.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boresight {
    /// Toward the Earth's centre; used by GNSS transmitters.
    #[default]
    Nadir,
    /// Toward the Earth's centre from a lunar receiver.
    EarthPointing,
}

impl Boresight {
    fn direction(&self, pos: &Vec3) -> Vec3 {
        match self {
            Boresight::Nadir | Boresight::EarthPointing => -pos.normalize(),
        }
    }
}

/// Angle between an antenna's boresight and the direction to `target`, deg.
pub fn off_boresight_deg(own: &Vec3, rule: Boresight, target: &Vec3) -> f64 {
    let los = (target - own).normalize();
    los.dot(&rule.direction(own)).clamp(-1.0, 1.0).acos().to_degrees()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemParams {
    /// Receiver noise density, dBW/Hz.
    pub n0_dbw_hz: f64,
    pub threshold_dbhz: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            n0_dbw_hz: -208.0,
            threshold_dbhz: 18.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub eirp_dbw: f64,
    pub tx_gain_dbi: f64,
    pub rx_gain_dbi: f64,
    pub tx_off_boresight_deg: f64,
    pub rx_off_boresight_deg: f64,
    pub fspl_db: f64,
    pub c_n0_dbhz: f64,
    pub trackable: bool,
}

pub fn free_space_loss_db(distance_m: f64, f: f64) -> f64 {
    20.0 * (4.0 * std::f64::consts::PI * distance_m * f / SPEED_OF_LIGHT_M_S).log10()
}

/// Received C/N0. `eirp_dbw` is the peak EIRP; the transmit pattern enters
/// relative to its own peak. Earth-occulted links come back untrackable.
pub fn compute_cn0(
    tx: &EpochState,
    rx: &EpochState,
    tx_pattern: &AntennaPattern,
    rx_pattern: &AntennaPattern,
    eirp_dbw: f64,
    f: f64,
    sys: &SystemParams,
) -> Result<LinkBudget, LinkError> {
    for s in [tx, rx] {
        if s.frame != Frame::EarthCenteredInertial {
            return Err(LinkError::Frame(s.frame));
        }
    }
    let tx_angle = off_boresight_deg(&tx.position, tx_pattern.boresight, &rx.position);
    let rx_angle = off_boresight_deg(&rx.position, rx_pattern.boresight, &tx.position);
    let tx_gain = gain_lookup(tx_pattern, tx_angle)?;
    let rx_gain = gain_lookup(rx_pattern, rx_angle)?;
    let distance_m = (rx.position - tx.position).norm() * 1000.0;
    let fspl = free_space_loss_db(distance_m, f);
    let c_n0 = eirp_dbw + (tx_gain - tx_pattern.peak_gain()) - fspl + rx_gain - sys.n0_dbw_hz;
    let occulted = tangential_altitude(&tx.position, &rx.position).map_or(true, |h| h <= 0.0);
    Ok(LinkBudget {
        eirp_dbw,
        tx_gain_dbi: tx_gain,
        rx_gain_dbi: rx_gain,
        tx_off_boresight_deg: tx_angle,
        rx_off_boresight_deg: rx_angle,
        fspl_db: fspl,
        c_n0_dbhz: c_n0,
        trackable: !occulted && c_n0 >= sys.threshold_dbhz,
    })
}

/// Delay-lock-loop parameters. `t_coh` and `t_chip` in s, bandwidths in Hz,
/// `d` in chips.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DllParams {
    pub b_dll: f64,
    pub d: f64,
    pub t_coh: f64,
    pub t_chip: f64,
    pub b_fe: f64,
}

impl DllParams {
    pub fn gps_l1() -> Self {
        Self {
            b_dll: 0.1,
            d: 0.3,
            t_coh: 0.02,
            t_chip: 0.978e-6,
            b_fe: 2.046e6,
        }
    }

    pub fn gps_l5() -> Self {
        Self {
            t_chip: 0.0978e-6,
            b_fe: 20.46e6,
            ..Self::gps_l1()
        }
    }

    pub fn validate(&self) -> Result<(), LinkError> {
        let vals = [self.b_dll, self.d, self.t_coh, self.t_chip, self.b_fe];
        if vals.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(LinkError::DllParams("all parameters must be positive".into()));
        }
        if self.d > 1.0 {
            return Err(LinkError::DllParams(format!("spacing d = {} exceeds 1 chip", self.d)));
        }
        Ok(())
    }
}

/// Correlator-spacing regime of the DLL variance expression.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DllCase {
    /// `d >= pi / (T_c B_fe)`.
    Wide,
    /// `d <= 1 / (T_c B_fe)`.
    Narrow,
    /// Between the two bounds.
    Intermediate,
}

pub fn dll_case(p: &DllParams) -> DllCase {
    let x = p.t_chip * p.b_fe;
    if p.d >= std::f64::consts::PI / x {
        DllCase::Wide
    } else if p.d <= 1.0 / x {
        DllCase::Narrow
    } else {
        DllCase::Intermediate
    }
}

/// Variance of the code-tracking error in chips^2 for a given regime.
pub fn dll_variance_chips2(case: DllCase, c_n0_linear: f64, p: &DllParams) -> f64 {
    let x = p.t_chip * p.b_fe;
    let base = p.b_dll / (2.0 * c_n0_linear);
    let squaring = |k: f64| 1.0 + k / (p.t_coh * c_n0_linear * if k == 1.0 { 1.0 } else { 2.0 - p.d });
    match case {
        DllCase::Wide => base * p.d * squaring(2.0),
        DllCase::Narrow => base * (1.0 / x) * squaring(1.0),
        DllCase::Intermediate => {
            let excess = p.d - 1.0 / x;
            base * (1.0 / x + x / (std::f64::consts::PI - 1.0) * excess * excess) * squaring(2.0)
        }
    }
}

/// DLL thermal-noise standard deviation in metres.
pub fn dll_sigma(c_n0_dbhz: f64, p: &DllParams) -> f64 {
    let c_n0 = 10f64.powf(c_n0_dbhz / 10.0);
    let var = dll_variance_chips2(dll_case(p), c_n0, p);
    var.sqrt() * SPEED_OF_LIGHT_M_S * p.t_chip
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct UereStats {
    pub mean: f64,
    pub p95: f64,
    pub p99: f64,
}

/// Nearest-rank percentile of an ascending slice; `None` when empty.
pub fn nearest_rank(sorted: &[f64], pct: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let rank = ((pct / 100.0) * sorted.len() as f64).ceil() as usize;
    Some(sorted[rank.clamp(1, sorted.len()) - 1])
}

/// Mean of `|d_total + e|` over `n_samples` draws of `e ~ N(0, sigma)`,
/// with nearest-rank 95th and 99th percentiles of the same draws.
pub fn total_uere(d_total: f64, sigma: f64, n_samples: usize, seed: u64) -> UereStats {
    if sigma == 0.0 || n_samples == 0 {
        let v = d_total.abs();
        return UereStats {
            mean: v,
            p95: v,
            p99: v,
        };
    }
    let normal = Normal::new(0.0, sigma).expect("sigma is finite and positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draws: Vec<f64> = (0..n_samples)
        .map(|_| (d_total + normal.sample(&mut rng)).abs())
        .collect();
    let mean = draws.iter().sum::<f64>() / n_samples as f64;
    draws.sort_by(f64::total_cmp);
    UereStats {
        mean,
        p95: nearest_rank(&draws, 95.0).unwrap_or(mean),
        p99: nearest_rank(&draws, 99.0).unwrap_or(mean),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::{EARTH_RADIUS_KM, FREQ_L1_HZ};
    use crate::frames::Epoch;

    #[test]
    fn receiver_pattern_anchor_points() {
        let rx = AntennaPattern::default_receiver();
        assert_eq!(gain_lookup(&rx, 0.0).unwrap(), 14.0);
        assert!((gain_lookup(&rx, 3.0).unwrap() - 11.0).abs() < 1e-12);
        assert_eq!(gain_lookup(&rx, 120.0).unwrap(), -10.0);
        assert!(gain_lookup(&rx, 181.0).is_err());
    }

    #[test]
    fn clamps_beyond_last_node() {
        let p = AntennaPattern::new("short", vec![0.0, 10.0], vec![5.0, 1.0]).unwrap();
        assert_eq!(gain_lookup(&p, 5.0).unwrap(), 3.0);
        assert_eq!(gain_lookup(&p, 50.0).unwrap(), 1.0);
        let empty = AntennaPattern::new("empty", vec![], vec![]).unwrap();
        assert!(matches!(gain_lookup(&empty, 1.0), Err(LinkError::EmptyPattern(_))));
    }

    #[test]
    fn rejects_malformed_pattern() {
        assert!(AntennaPattern::new("x", vec![1.0, 2.0], vec![0.0, 0.0]).is_err());
        assert!(AntennaPattern::new("x", vec![0.0, 2.0, 2.0], vec![0.0; 3]).is_err());
    }

    #[test]
    fn pattern_csv_round_trip() {
        let p = AntennaPattern::default_transmitter();
        let mut buf = Vec::new();
        p.to_csv_writer(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("angle_deg,gain_dbi"));
        let back = AntennaPattern::from_csv_reader(&p.name, buf.as_slice()).unwrap();
        assert_eq!(back.angles_deg.last(), Some(&90.0));
        assert_eq!(back, p);
    }

    fn eci(p: Vec3) -> EpochState {
        EpochState::new(Epoch::J2000, Frame::EarthCenteredInertial, p, Vec3::zeros())
    }

    #[test]
    fn doubling_distance_costs_6db() {
        let tx = eci(Vec3::new(0.0, 0.0, 26560.0));
        let near = eci(Vec3::new(0.0, 0.0, -2.0e5));
        let far = eci(Vec3::new(0.0, 0.0, -4.0e5));
        // Both through the Earth; gains identical, only range differs.
        let p = AntennaPattern::new("flat", vec![0.0, 180.0], vec![0.0, 0.0]).unwrap();
        let sys = SystemParams::default();
        let a = compute_cn0(&tx, &near, &p, &p, 27.0, FREQ_L1_HZ, &sys).unwrap();
        let b = compute_cn0(&tx, &far, &p, &p, 27.0, FREQ_L1_HZ, &sys).unwrap();
        let expected = 20.0 * ((4.0e5_f64 + 26560.0) / (2.0e5 + 26560.0)).log10();
        let doubled = free_space_loss_db(2.0e8, FREQ_L1_HZ) - free_space_loss_db(1.0e8, FREQ_L1_HZ);
        assert!((doubled - 6.0206).abs() < 1e-4);
        assert!((a.c_n0_dbhz - b.c_n0_dbhz - expected).abs() < 1e-9);
        assert!(!a.trackable, "occulted link must be untrackable");
    }

    #[test]
    fn main_lobe_calibration_anchor() {
        // Tangential altitude 250 km, receiver at 3.8e5 km.
        let h = EARTH_RADIUS_KM + 250.0;
        let tx_r = 26560.0f64;
        let rx_r = 3.8e5f64;
        let tx = eci(Vec3::new(h, -(tx_r * tx_r - h * h).sqrt(), 0.0));
        let rx = eci(Vec3::new(h, (rx_r * rx_r - h * h).sqrt(), 0.0));
        let b = compute_cn0(
            &tx,
            &rx,
            &AntennaPattern::default_transmitter(),
            &AntennaPattern::default_receiver(),
            27.0,
            FREQ_L1_HZ,
            &SystemParams::default(),
        )
        .unwrap();
        assert!((38.0..=41.0).contains(&b.c_n0_dbhz), "{b:?}");
        assert!(b.trackable);
    }

    #[test]
    fn dll_l1_hand_value() {
        let p = DllParams::gps_l1();
        assert_eq!(dll_case(&p), DllCase::Narrow);
        let s = dll_sigma(30.0, &p);
        assert!((s - 1.502).abs() < 1e-3, "{s}");
        let l5 = dll_sigma(30.0, &DllParams::gps_l5());
        assert!((l5 / s - 0.1).abs() < 1e-12);
    }

    #[test]
    fn dll_upper_boundary_is_continuous() {
        let mut p = DllParams::gps_l1();
        p.d = std::f64::consts::PI / (p.t_chip * p.b_fe);
        let wide = dll_variance_chips2(DllCase::Wide, 1000.0, &p);
        let mid = dll_variance_chips2(DllCase::Intermediate, 1000.0, &p);
        assert!((wide / mid - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dll_sigma_decreases_with_cn0() {
        for p in [DllParams::gps_l1(), DllParams { d: 0.9, ..DllParams::gps_l1() }] {
            let s: Vec<f64> = (0..=54).map(|k| dll_sigma(18.0 + 0.5 * k as f64, &p)).collect();
            assert!(s.windows(2).all(|w| w[1] < w[0]));
        }
    }

    #[test]
    fn uere_degenerate_and_seeded() {
        assert_eq!(total_uere(-2.5, 0.0, 100, 1).mean, 2.5);
        let a = total_uere(1.0, 0.5, 100, 42);
        assert_eq!(a, total_uere(1.0, 0.5, 100, 42));
        assert_ne!(a, total_uere(1.0, 0.5, 100, 43));
        assert!(a.p95 <= a.p99);
    }

    #[test]
    fn uere_large_bias() {
        let s = total_uere(50.0, 1.0, 100, 7);
        assert!((s.mean - 50.0).abs() < 3.0 / 10.0);
    }

    #[test]
    fn nearest_rank_definition() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(nearest_rank(&v, 95.0), Some(95.0));
        assert_eq!(nearest_rank(&v, 99.0), Some(99.0));
        assert_eq!(nearest_rank(&[3.0], 50.0), Some(3.0));
        assert_eq!(nearest_rank(&[], 50.0), None);
    }
}
