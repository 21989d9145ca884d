use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{kepler_to_state, Epoch, EpochState, Frame, FrameError, KeplerianElements};
use crate::Vec3;

/// A time-indexed source of states.
pub trait Ephemeris: Send + Sync {
    fn state_at(&self, epoch: Epoch) -> Result<EpochState, FrameError>;

    fn frame(&self) -> Frame;

    /// Inclusive time span over which `state_at` succeeds; `None` if unbounded.
    fn coverage(&self) -> Option<(Epoch, Epoch)> {
        None
    }
}

impl Ephemeris for KeplerianElements {
    fn state_at(&self, epoch: Epoch) -> Result<EpochState, FrameError> {
        kepler_to_state(self, epoch)
    }

    fn frame(&self) -> Frame {
        self.frame
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct EphemerisRow {
    epoch_s: f64,
    frame: String,
    x_km: f64,
    y_km: f64,
    z_km: f64,
    vx_kms: f64,
    vy_kms: f64,
    vz_kms: f64,
}

/// Sampled ephemeris with four-point Lagrange interpolation in time.
#[derive(Clone, Debug)]
pub struct TabulatedEphemeris {
    samples: Vec<EpochState>,
    frame: Frame,
    /// Bracketing samples further apart than this are treated as a gap.
    pub max_gap_s: Option<f64>,
}

impl TabulatedEphemeris {
    pub fn new(mut samples: Vec<EpochState>) -> Result<Self, FrameError> {
        let first = samples
            .first()
            .ok_or_else(|| FrameError::File("ephemeris has no samples".into()))?;
        let frame = first.frame;
        if let Some(bad) = samples.iter().find(|s| s.frame != frame) {
            return Err(FrameError::FrameMismatch {
                expected: frame,
                got: bad.frame,
            });
        }
        samples.sort_by_key(|s| s.epoch);
        if samples.windows(2).any(|w| w[0].epoch == w[1].epoch) {
            return Err(FrameError::File("duplicate epochs in ephemeris".into()));
        }
        Ok(Self {
            samples,
            frame,
            max_gap_s: None,
        })
    }

    pub fn samples(&self) -> &[EpochState] {
        &self.samples
    }

    /// Reads `epoch_s,frame,x_km,y_km,z_km,vx_kms,vy_kms,vz_kms` rows.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self, FrameError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| FrameError::File(e.to_string()))?
            .clone();
        let expected = [
            "epoch_s", "frame", "x_km", "y_km", "z_km", "vx_kms", "vy_kms", "vz_kms",
        ];
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(FrameError::File(format!(
                "unexpected ephemeris header {:?}, want {}",
                headers,
                expected.join(",")
            )));
        }
        let mut samples = Vec::new();
        for (line, row) in rdr.deserialize::<EphemerisRow>().enumerate() {
            let row = row.map_err(|e| FrameError::File(format!("row {}: {e}", line + 2)))?;
            samples.push(EpochState::new(
                Epoch::from_seconds(row.epoch_s),
                row.frame.parse()?,
                Vec3::new(row.x_km, row.y_km, row.z_km),
                Vec3::new(row.vx_kms, row.vy_kms, row.vz_kms),
            ));
        }
        Self::new(samples)
    }

    pub fn from_csv_path(path: &Path) -> Result<Self, FrameError> {
        let file = std::fs::File::open(path)
            .map_err(|e| FrameError::File(format!("{}: {e}", path.display())))?;
        Self::from_csv_reader(file)
    }

    pub fn to_csv_writer<W: Write>(&self, writer: W) -> Result<(), FrameError> {
        let mut wtr = csv::Writer::from_writer(writer);
        for s in &self.samples {
            wtr.serialize(EphemerisRow {
                epoch_s: s.epoch.seconds(),
                frame: s.frame.as_str().to_string(),
                x_km: s.position.x,
                y_km: s.position.y,
                z_km: s.position.z,
                vx_kms: s.velocity.x,
                vy_kms: s.velocity.y,
                vz_kms: s.velocity.z,
            })
            .map_err(|e| FrameError::File(e.to_string()))?;
        }
        wtr.flush().map_err(|e| FrameError::File(e.to_string()))
    }
}

impl Ephemeris for TabulatedEphemeris {
    fn state_at(&self, epoch: Epoch) -> Result<EpochState, FrameError> {
        let n = self.samples.len();
        let first = self.samples[0].epoch;
        let last = self.samples[n - 1].epoch;
        if epoch < first {
            return Err(FrameError::EphemerisGap {
                from_s: epoch.seconds(),
                to_s: first.seconds(),
            });
        }
        if epoch > last {
            return Err(FrameError::EphemerisGap {
                from_s: last.seconds(),
                to_s: epoch.seconds(),
            });
        }
        if n == 1 {
            return Ok(self.samples[0]);
        }
        let upper = self
            .samples
            .partition_point(|s| s.epoch <= epoch)
            .clamp(1, n - 1);
        if let Some(max_gap) = self.max_gap_s {
            let (a, b) = (self.samples[upper - 1].epoch, self.samples[upper].epoch);
            if b - a > max_gap {
                return Err(FrameError::EphemerisGap {
                    from_s: a.seconds(),
                    to_s: b.seconds(),
                });
            }
        }
        let width = n.min(4);
        let start = upper.saturating_sub(2).min(n - width);
        let window = &self.samples[start..start + width];

        let mut position = Vec3::zeros();
        let mut velocity = Vec3::zeros();
        for (j, sj) in window.iter().enumerate() {
            let mut weight = 1.0;
            for (m, sm) in window.iter().enumerate() {
                if m != j {
                    weight *= (epoch - sm.epoch) / (sj.epoch - sm.epoch);
                }
            }
            position += sj.position * weight;
            velocity += sj.velocity * weight;
        }
        Ok(EpochState::new(epoch, self.frame, position, velocity))
    }

    fn frame(&self) -> Frame {
        self.frame
    }

    fn coverage(&self) -> Option<(Epoch, Epoch)> {
        Some((self.samples[0].epoch, self.samples[self.samples.len() - 1].epoch))
    }
}

/// An object whose state is given relative to a moving center, e.g. a lunar
/// orbiter (local elements about the Moon) placed in the Earth frame.
pub struct RelativeEphemeris {
    pub center: Arc<dyn Ephemeris>,
    pub local: Arc<dyn Ephemeris>,
}

impl Ephemeris for RelativeEphemeris {
    fn state_at(&self, epoch: Epoch) -> Result<EpochState, FrameError> {
        let c = self.center.state_at(epoch)?;
        let l = self.local.state_at(epoch)?;
        Ok(EpochState::new(
            epoch,
            c.frame,
            c.position + l.position,
            c.velocity + l.velocity,
        ))
    }

    fn frame(&self) -> Frame {
        self.center.frame()
    }

    fn coverage(&self) -> Option<(Epoch, Epoch)> {
        match (self.center.coverage(), self.local.coverage()) {
            (None, c) | (c, None) => c,
            (Some(a), Some(b)) => Some((a.0.max(b.0), a.1.min(b.1))),
        }
    }
}

/// A point fixed relative to a moving center (non-rotating offset).
pub struct FixedOffset {
    pub center: Arc<dyn Ephemeris>,
    pub offset_km: Vec3,
}

impl Ephemeris for FixedOffset {
    fn state_at(&self, epoch: Epoch) -> Result<EpochState, FrameError> {
        let c = self.center.state_at(epoch)?;
        Ok(EpochState::new(
            epoch,
            c.frame,
            c.position + self.offset_km,
            c.velocity,
        ))
    }

    fn frame(&self) -> Frame {
        self.center.frame()
    }

    fn coverage(&self) -> Option<(Epoch, Epoch)> {
        self.center.coverage()
    }
}

#[derive(Debug, Deserialize)]
struct ElementRow {
    name: String,
    epoch_s: f64,
    a_km: f64,
    e: f64,
    i_deg: f64,
    raan_deg: f64,
    argp_deg: f64,
    m0_deg: f64,
}

/// Reads an element file: `name,epoch_s,a_km,e,i_deg,raan_deg,argp_deg,m0_deg`.
/// The central body's `gm` and the output frame are supplied by the caller.
pub fn read_element_file(
    path: &Path,
    gm: f64,
    frame: Frame,
) -> Result<Vec<(String, KeplerianElements)>, FrameError> {
    let file = std::fs::File::open(path)
        .map_err(|e| FrameError::File(format!("{}: {e}", path.display())))?;
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(file);
    let mut out = Vec::new();
    for (line, row) in rdr.deserialize::<ElementRow>().enumerate() {
        let row = row.map_err(|e| {
            FrameError::File(format!("{} row {}: {e}", path.display(), line + 2))
        })?;
        let el = KeplerianElements {
            a_km: row.a_km,
            e: row.e,
            i_deg: row.i_deg,
            raan_deg: row.raan_deg,
            argp_deg: row.argp_deg,
            m0_deg: row.m0_deg,
            gm,
            epoch: Epoch::from_seconds(row.epoch_s),
            frame,
        };
        el.validate()?;
        out.push((row.name, el));
    }
    Ok(out)
}
