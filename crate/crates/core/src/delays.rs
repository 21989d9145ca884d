//! TEC integrals and the group-delay decomposition of a solved ray.
//!
//! All delays are in metres and are referenced to the straight-line range.
//! With `p = 40.3 TEC`, the group delay of the traced path is
//! `p/f^2 + q/f^3 + u/f^4`; the first-order part is split into the
//! line-of-sight TEC and the extra TEC picked up by the bent path.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::{
    EARTH_RADIUS_KM, FIRST_ORDER_COEFF, SECOND_ORDER_COEFF, THIRD_ORDER_DENSITY_COEFF,
    THIRD_ORDER_FIELD_COEFF,
};
use crate::frames::tangential_altitude;
use crate::media::{MediumModel, SpaceWeather};
use crate::raytrace::{RayPath, ShootingResult, StepTable};
use crate::Vec3;

/// Relative agreement demanded between successive halvings in [`los_tec`].
const LOS_TEC_RTOL: f64 = 1e-4;
const LOS_TEC_MAX_HALVINGS: usize = 12;
/// Path-length differences below this are indistinguishable from rounding, km.
const D_LEN_FLOOR_KM: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum DelayError {
    #[error("path has {0} samples; at least 2 are needed")]
    TooFewSamples(usize),
    #[error("ray did not converge (miss {miss_m:.3} m)")]
    NotConverged { miss_m: f64 },
    #[error("chord is occulted by the Earth (tangential altitude {0:.3} km)")]
    Occulted(f64),
    #[error("line-of-sight TEC did not reach tolerance after {0} halvings")]
    LosTecNotConverged(usize),
    #[error("geometry error: {0}")]
    Geometry(String),
}

/// `tec` in e/m^2, `q` in m Hz^3, `u` in m Hz^4.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PathIntegrals {
    pub tec: f64,
    pub q: f64,
    pub u: f64,
}

/// Trapezoidal integrals over the path nodes.
pub fn path_integrals(path: &RayPath) -> Result<PathIntegrals, DelayError> {
    if path.samples.len() < 2 {
        return Err(DelayError::TooFewSamples(path.samples.len()));
    }
    let terms = |i: usize| {
        let smp = &path.samples[i];
        let n = smp.plasma.n_e;
        let b = smp.plasma.b_field.norm();
        let c = smp.cos_theta;
        (n, n * b * c, n * n, n * b * b * (1.0 + c * c))
    };
    let (mut tec, mut qb, mut u_nn, mut u_b) = (0.0, 0.0, 0.0, 0.0);
    let mut prev = terms(0);
    for i in 1..path.samples.len() {
        let next = terms(i);
        let ds_m = (path.samples[i].s - path.samples[i - 1].s) * 1000.0;
        tec += 0.5 * (prev.0 + next.0) * ds_m;
        qb += 0.5 * (prev.1 + next.1) * ds_m;
        u_nn += 0.5 * (prev.2 + next.2) * ds_m;
        u_b += 0.5 * (prev.3 + next.3) * ds_m;
        prev = next;
    }
    Ok(PathIntegrals {
        tec,
        q: SECOND_ORDER_COEFF * qb,
        u: THIRD_ORDER_DENSITY_COEFF * u_nn + THIRD_ORDER_FIELD_COEFF * u_b,
    })
}

/// Parameter interval of the chord `tx + t (rx - tx)`, `t` in `[0, 1]`, lying
/// inside the sphere of `radius`.
fn chord_inside(tx: &Vec3, rx: &Vec3, radius: f64) -> Option<(f64, f64)> {
    let d = rx - tx;
    let a = d.norm_squared();
    let b = tx.dot(&d);
    let c = tx.norm_squared() - radius * radius;
    let disc = b * b - a * c;
    if disc <= 0.0 {
        return None;
    }
    let root = disc.sqrt();
    let t0 = ((-b - root) / a).max(0.0);
    let t1 = ((-b + root) / a).min(1.0);
    (t1 > t0).then_some((t0, t1))
}

fn chord_trapezoid(
    start: &Vec3,
    dir: &Vec3,
    length: f64,
    medium: &dyn MediumModel,
    weather: &SpaceWeather,
    table: &StepTable,
) -> f64 {
    let mut s = 0.0;
    let mut prev = medium.sample(start, weather).n_e;
    let mut sum = 0.0;
    while s < length {
        let pos = start + dir * s;
        let h = table.step_at(pos.norm() - EARTH_RADIUS_KM).min(length - s);
        s = if length - s <= h { length } else { s + h };
        let next = medium.sample(&(start + dir * s), weather).n_e;
        sum += 0.5 * (prev + next) * h * 1000.0;
        prev = next;
    }
    sum
}

/// Electron content along the straight chord, e/m^2. Uses the ray step
/// schedule and halves it until two successive estimates agree.
pub fn los_tec(
    tx: &Vec3,
    rx: &Vec3,
    medium: &dyn MediumModel,
    weather: &SpaceWeather,
    table: &StepTable,
) -> Result<f64, DelayError> {
    let h_t = tangential_altitude(tx, rx).map_err(|e| DelayError::Geometry(e.to_string()))?;
    if h_t < 0.0 {
        return Err(DelayError::Occulted(h_t));
    }
    let Some((t0, t1)) = chord_inside(tx, rx, medium.cutoff_radius()) else {
        return Ok(0.0);
    };
    let chord = rx - tx;
    let start = tx + chord * t0;
    let dir = chord.normalize();
    let length = chord.norm() * (t1 - t0);

    let mut coarse = chord_trapezoid(&start, &dir, length, medium, weather, table);
    let mut factor = 1.0;
    for _ in 0..LOS_TEC_MAX_HALVINGS {
        factor *= 0.5;
        let fine = chord_trapezoid(&start, &dir, length, medium, weather, &table.scaled(factor));
        if (fine - coarse).abs() <= LOS_TEC_RTOL * fine.abs() {
            return Ok(fine);
        }
        coarse = fine;
    }
    Err(DelayError::LosTecNotConverged(LOS_TEC_MAX_HALVINGS))
}

/// Group-delay terms of one link, m, plus the integrals they derive from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DelayBreakdown {
    pub d_i1_los: f64,
    pub d_i2: f64,
    pub d_i3: f64,
    pub d_i1_bend: f64,
    pub d_len: f64,
    pub d_total: f64,
    pub tec_los: f64,
    /// TEC of the bent path minus the line-of-sight TEC; may be negative.
    pub tec_bend: f64,
    /// `40.3 x` path TEC, m Hz^2.
    pub p: f64,
    pub q: f64,
    pub u: f64,
    pub frequency: f64,
}

impl DelayBreakdown {
    /// Assembles the terms from path integrals at frequency `f`. `d_len_m`
    /// is the excess path length.
    pub fn from_integrals(ints: &PathIntegrals, tec_los: f64, d_len_m: f64, f: f64) -> Self {
        let f2 = f * f;
        let d_i1_los = FIRST_ORDER_COEFF * tec_los / f2;
        let d_i1_bend = FIRST_ORDER_COEFF * (ints.tec - tec_los) / f2;
        let d_i2 = ints.q / (f2 * f);
        let d_i3 = ints.u / (f2 * f2);
        Self {
            d_i1_los,
            d_i2,
            d_i3,
            d_i1_bend,
            d_len: d_len_m,
            d_total: d_i1_los + d_i2 + d_i3 + d_i1_bend + d_len_m,
            tec_los,
            tec_bend: ints.tec - tec_los,
            p: FIRST_ORDER_COEFF * ints.tec,
            q: ints.q,
            u: ints.u,
            frequency: f,
        }
    }

    /// Total first-order group delay of the path at frequency `f`, m.
    pub fn first_order_at(&self, f: f64) -> f64 {
        self.p / (f * f)
    }

    pub fn second_order_at(&self, f: f64) -> f64 {
        self.q / (f * f * f)
    }

    pub fn third_order_at(&self, f: f64) -> f64 {
        self.u / (f * f * f * f)
    }

    /// Ionospheric phase advance of the path at `f`, m (negative).
    pub fn phase_advance_at(&self, f: f64) -> f64 {
        -self.first_order_at(f) - self.second_order_at(f) / 2.0 - self.third_order_at(f) / 3.0
    }

    /// Checks the sum, sign and finiteness invariants.
    pub fn validate(&self) -> Result<(), String> {
        let fields = [
            self.d_i1_los,
            self.d_i2,
            self.d_i3,
            self.d_i1_bend,
            self.d_len,
            self.d_total,
            self.tec_los,
            self.tec_bend,
            self.p,
            self.q,
            self.u,
        ];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err("non-finite delay term".into());
        }
        let sum = self.d_i1_los + self.d_i2 + self.d_i3 + self.d_i1_bend + self.d_len;
        if (sum - self.d_total).abs() > 1e-9 {
            return Err(format!("terms sum to {sum}, total is {}", self.d_total));
        }
        if self.d_len < 0.0 {
            return Err(format!("negative excess length {}", self.d_len));
        }
        if self.tec_los < 0.0 {
            return Err(format!("negative LOS TEC {}", self.tec_los));
        }
        Ok(())
    }
}

/// Excess length of the extended path over the chord from `tx` to `end`, m.
/// `end` is the terminal point of the path, which differs from the receiver
/// by the miss distance. Differences within rounding of the accumulated arc
/// length are reported as zero.
pub fn excess_length_m(path: &RayPath, tx: &Vec3, end: &Vec3) -> f64 {
    let excess = path.s_f - (end - tx).norm();
    if excess.abs() <= D_LEN_FLOOR_KM {
        0.0
    } else {
        excess * 1000.0
    }
}

/// Five-term decomposition of a converged solve.
pub fn breakdown(
    result: &ShootingResult,
    tx: &Vec3,
    rx: &Vec3,
    medium: &dyn MediumModel,
    weather: &SpaceWeather,
    table: &StepTable,
) -> Result<DelayBreakdown, DelayError> {
    if !result.converged {
        return Err(DelayError::NotConverged {
            miss_m: result.miss_distance_m,
        });
    }
    let ints = path_integrals(&result.path)?;
    let tec_los = los_tec(tx, rx, medium, weather, table)?;
    Ok(DelayBreakdown::from_integrals(
        &ints,
        tec_los,
        excess_length_m(&result.path, tx, &result.terminal_pos),
        result.path.frequency,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::{FREQ_L1_HZ, FREQ_L5_HZ};
    use crate::frames::Epoch;
    use crate::media::{PlasmaSample, VacuumMedium};
    use crate::raytrace::{integrate_ray, solve_initial_direction, SolverOptions};

    fn weather() -> SpaceWeather {
        SpaceWeather::new(3.0, 100.0, Epoch::J2000).unwrap()
    }

    /// Uniform plasma inside a radial shell.
    struct Shell {
        inner: f64,
        outer: f64,
        n_e: f64,
        b: Vec3,
    }

    impl MediumModel for Shell {
        fn sample(&self, pos: &Vec3, _w: &SpaceWeather) -> PlasmaSample {
            let r = pos.norm();
            if r >= self.inner && r <= self.outer {
                PlasmaSample {
                    n_e: self.n_e,
                    b_field: self.b,
                }
            } else {
                PlasmaSample::VACUUM
            }
        }
        fn cutoff_radius(&self) -> f64 {
            4.0 * EARTH_RADIUS_KM
        }
    }

    fn straight_path(n_e: f64, b: Vec3, length_km: f64) -> RayPath {
        // Ray at very high frequency through a uniform region: effectively straight.
        let shell = Shell {
            inner: 0.0,
            outer: 1e9,
            n_e,
            b,
        };
        let tx = Vec3::new(EARTH_RADIUS_KM + 100.0, 0.0, 0.0);
        let mut path = integrate_ray(&tx, &Vec3::x(), 1e15, &shell, &weather(), &StepTable::default())
            .unwrap();
        let keep = path.samples.iter().take_while(|s| s.s <= length_km).count();
        path.samples.truncate(keep);
        path
    }

    #[test]
    fn uniform_segment_integrals() {
        let path = straight_path(1e12, Vec3::zeros(), 1000.0);
        assert_eq!(path.samples.last().unwrap().s, 1000.0);
        let ints = path_integrals(&path).unwrap();
        assert!((ints.tec / 1e18 - 1.0).abs() < 1e-12);
        assert_eq!(ints.q, 0.0);
        assert!((ints.u / 2.437e33 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn field_flip_flips_q_only() {
        let a = path_integrals(&straight_path(1e12, Vec3::new(3e-5, 1e-5, 0.0), 1000.0)).unwrap();
        let b = path_integrals(&straight_path(1e12, Vec3::new(-3e-5, -1e-5, 0.0), 1000.0)).unwrap();
        assert!(a.q != 0.0);
        assert!((a.q + b.q).abs() <= 1e-12 * a.q.abs());
        assert!((a.u - b.u).abs() <= 1e-12 * a.u);
    }

    #[test]
    fn vacuum_integrals_are_zero() {
        let tx = Vec3::new(26560.0, 0.0, 0.0);
        let p = integrate_ray(&tx, &Vec3::new(-0.2, 1.0, 0.0), FREQ_L1_HZ, &VacuumMedium, &weather(), &StepTable::default())
            .unwrap();
        assert_eq!(path_integrals(&p).unwrap(), PathIntegrals::default());
        let rx = tx + Vec3::new(-0.2, 1.0, 0.0).normalize() * 4e5;
        assert_eq!(los_tec(&tx, &rx, &VacuumMedium, &weather(), &StepTable::default()).unwrap(), 0.0);
    }

    #[test]
    fn too_few_samples() {
        let mut p = straight_path(1.0, Vec3::zeros(), 100.0);
        p.samples.truncate(1);
        assert!(matches!(path_integrals(&p), Err(DelayError::TooFewSamples(1))));
    }

    #[test]
    fn radial_shell_tec() {
        let shell = Shell {
            inner: EARTH_RADIUS_KM + 300.0,
            outer: EARTH_RADIUS_KM + 800.0,
            n_e: 1e11,
            b: Vec3::zeros(),
        };
        let tx = Vec3::new(0.0, 0.0, EARTH_RADIUS_KM + 50.0);
        let rx = Vec3::new(0.0, 0.0, 4e5);
        let tec = los_tec(&tx, &rx, &shell, &weather(), &StepTable::default()).unwrap();
        assert!((tec / 5e16 - 1.0).abs() < 1e-3, "{tec}");
    }

    #[test]
    fn occulted_chord_rejected() {
        let tx = Vec3::new(26560.0, 0.0, 0.0);
        let rx = Vec3::new(-4e5, 0.0, 0.0);
        assert!(matches!(
            los_tec(&tx, &rx, &VacuumMedium, &weather(), &StepTable::default()),
            Err(DelayError::Occulted(_))
        ));
    }

    #[test]
    fn single_term_arithmetic() {
        let ints = PathIntegrals {
            tec: 1e18,
            q: 0.0,
            u: 0.0,
        };
        let l1 = DelayBreakdown::from_integrals(&ints, 1e18, 0.0, FREQ_L1_HZ);
        assert!((l1.d_i1_los - 16.237).abs() < 5e-4, "{}", l1.d_i1_los);
        assert_eq!((l1.d_i2, l1.d_i3, l1.d_i1_bend, l1.d_len), (0.0, 0.0, 0.0, 0.0));
        let l5 = DelayBreakdown::from_integrals(&ints, 1e18, 0.0, FREQ_L5_HZ);
        assert!((l5.d_i1_los - 29.118).abs() < 5e-4, "{}", l5.d_i1_los);
        assert!((l1.d_i1_los / l5.d_i1_los - 0.5576).abs() < 1e-4);
        l1.validate().unwrap();
    }

    #[test]
    fn vacuum_breakdown_is_all_zero() {
        let tx = Vec3::new(26560.0, 0.0, 0.0);
        let rx = Vec3::new(-2.0e5, 3.4e5, 1.0e4);
        let w = weather();
        let r = solve_initial_direction(&tx, &rx, FREQ_L1_HZ, &VacuumMedium, &w, &SolverOptions::default())
            .unwrap();
        let d = breakdown(&r, &tx, &rx, &VacuumMedium, &w, &StepTable::default()).unwrap();
        assert_eq!(d, DelayBreakdown { frequency: FREQ_L1_HZ, ..Default::default() });
    }

    #[test]
    fn frequency_laws_on_frozen_path() {
        let d = DelayBreakdown::from_integrals(
            &PathIntegrals {
                tec: 3.1e17,
                q: -4.2e27,
                u: 7.7e34,
            },
            3.0e17,
            0.02,
            FREQ_L1_HZ,
        );
        let r = FREQ_L5_HZ / FREQ_L1_HZ;
        let rel = |a: f64, b: f64| (a / b - 1.0).abs();
        assert!(rel(d.first_order_at(FREQ_L1_HZ) / d.first_order_at(FREQ_L5_HZ), r * r) < 1e-12);
        assert!(rel(d.second_order_at(FREQ_L1_HZ) / d.second_order_at(FREQ_L5_HZ), r.powi(3)) < 1e-12);
        assert!(rel(d.third_order_at(FREQ_L1_HZ) / d.third_order_at(FREQ_L5_HZ), r.powi(4)) < 1e-12);
        assert!(d.phase_advance_at(FREQ_L1_HZ) < 0.0);
    }
}
