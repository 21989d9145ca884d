use serde::{Deserialize, Serialize};

use super::integrate::{integrate_ray, replay_ray, vacuum_extension};
use super::nelder_mead::{nelder_mead, NelderMeadOptions};
use super::{RayPath, RaytraceError, StepTable};
use crate::frames::tangential_altitude;
use crate::media::{group_refractivity, MediumModel, SpaceWeather};
use crate::Vec3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Terminal miss distance accepted as converged, m.
    pub miss_threshold_m: f64,
    /// Converged once the delay changes less than this between outer
    /// iterations, m.
    pub delay_stagnation_m: f64,
    pub max_outer: usize,
    /// Initial simplex edge, rad.
    pub simplex_scale_rad: f64,
    pub inner_tol_rad: f64,
    pub inner_max_iter: usize,
    /// Consecutive non-improving outer iterations before giving up.
    pub stall_limit: usize,
    pub steps: StepTable,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            miss_threshold_m: 100.0,
            delay_stagnation_m: 1e-3,
            max_outer: 10,
            simplex_scale_rad: 5e-4,
            inner_tol_rad: 1e-9,
            inner_max_iter: 200,
            stall_limit: 3,
            steps: StepTable::default(),
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<(), RaytraceError> {
        let bad = |m: &str| Err(RaytraceError::Geometry(format!("solver options: {m}")));
        if !(self.miss_threshold_m >= 0.0) {
            return bad("miss_threshold_m must be >= 0");
        }
        if !(self.delay_stagnation_m >= 0.0) {
            return bad("delay_stagnation_m must be >= 0");
        }
        if self.max_outer == 0 {
            return bad("max_outer must be >= 1");
        }
        if !(self.simplex_scale_rad > 0.0) {
            return bad("simplex_scale_rad must be > 0");
        }
        if self.stall_limit == 0 {
            return bad("stall_limit must be >= 1");
        }
        self.steps.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MissThreshold,
    DelayStagnation,
    MaxOuter,
    Stalled,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OuterIteration {
    pub miss_m: f64,
    /// Group delay along the path plus the excess length, m.
    pub delay_m: f64,
    /// Change of `delay_m` from the previous outer iteration.
    pub delay_change_m: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShootingResult {
    /// Last fully integrated path, with `s_f` set.
    pub path: RayPath,
    pub initial_dir: Vec3,
    pub terminal_pos: Vec3,
    pub miss_distance_m: f64,
    pub outer_iterations: usize,
    pub converged: bool,
    pub stop_reason: StopReason,
    pub history: Vec<OuterIteration>,
}

/// Direction chart whose origin is the line of sight: azimuth rotates toward
/// `e1` (perpendicular to the LOS and the transmitter radius), elevation
/// toward `e2`.
#[derive(Clone, Copy, Debug)]
pub struct LosChart {
    pub los: Vec3,
    pub e1: Vec3,
    pub e2: Vec3,
}

impl LosChart {
    pub fn new(tx: &Vec3, rx: &Vec3) -> Result<Self, RaytraceError> {
        let chord = rx - tx;
        if chord.norm() == 0.0 {
            return Err(RaytraceError::Geometry("transmitter and receiver coincide".into()));
        }
        let los = chord.normalize();
        let mut e1 = los.cross(tx);
        if e1.norm() < 1e-9 * tx.norm().max(1.0) {
            let helper = if los.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
            e1 = los.cross(&helper);
        }
        let e1 = e1.normalize();
        let e2 = los.cross(&e1);
        Ok(Self { los, e1, e2 })
    }

    pub fn direction(&self, angles: &[f64; 2]) -> Vec3 {
        direction_from_angles(self, angles[0], angles[1])
    }

    pub fn angles(&self, dir: &Vec3) -> [f64; 2] {
        let d = dir.normalize();
        [d.dot(&self.e1).atan2(d.dot(&self.los)), d.dot(&self.e2).clamp(-1.0, 1.0).asin()]
    }
}

pub fn direction_from_angles(chart: &LosChart, az: f64, el: f64) -> Vec3 {
    let (sa, ca) = az.sin_cos();
    let (se, ce) = el.sin_cos();
    (chart.los * (ce * ca) + chart.e1 * (ce * sa) + chart.e2 * se).normalize()
}

/// Group delay of the path plus its excess length over the chord, m.
fn delay_proxy(path: &RayPath, chord_km: f64) -> f64 {
    let f = path.frequency;
    let mut integral = 0.0;
    for w in path.samples.windows(2) {
        let a = group_refractivity(&w[0].plasma, &w[0].dir, f);
        let b = group_refractivity(&w[1].plasma, &w[1].dir, f);
        integral += 0.5 * (a + b) * (w[1].s - w[0].s);
    }
    (integral + (path.s_f - chord_km)) * 1000.0
}

fn terminal_miss(path: &RayPath, rx: &Vec3) -> Result<(f64, Vec3, f64), RaytraceError> {
    let (s_f, term) = vacuum_extension(path, rx)?;
    Ok((s_f, term, (term - rx).norm() * 1000.0))
}

/// Finds the launch direction whose ray passes through `rx_pos`.
///
/// Each outer iteration traces the ray through the medium, extends it to the
/// receiver, and then corrects the launch angles with a simplex search over
/// replays of the stored curvature.
pub fn solve_initial_direction(
    tx_pos: &Vec3,
    rx_pos: &Vec3,
    f: f64,
    medium: &dyn MediumModel,
    weather: &SpaceWeather,
    opts: &SolverOptions,
) -> Result<ShootingResult, RaytraceError> {
    opts.validate()?;
    let h_t = tangential_altitude(tx_pos, rx_pos)
        .map_err(|e| RaytraceError::Geometry(e.to_string()))?;
    if h_t <= 0.0 {
        return Err(RaytraceError::Occultation {
            s_km: 0.0,
            altitude_km: h_t,
        });
    }
    let chart = LosChart::new(tx_pos, rx_pos)?;
    let chord = (rx_pos - tx_pos).norm();
    let nm_opts = NelderMeadOptions {
        initial_step: opts.simplex_scale_rad,
        diameter_tol: opts.inner_tol_rad,
        max_iter: opts.inner_max_iter,
    };

    let mut angles = [0.0, 0.0];
    let mut history: Vec<OuterIteration> = Vec::new();
    let mut stalled = 0;
    let mut iteration = 0;
    loop {
        iteration += 1;
        let dir = chart.direction(&angles);
        let mut path = integrate_ray(tx_pos, &dir, f, medium, weather, &opts.steps)?;
        let (s_f, terminal, miss) = terminal_miss(&path, rx_pos)?;
        path.s_f = s_f;
        let delay = delay_proxy(&path, chord);
        let change = history.last().map(|h| (delay - h.delay_m).abs());
        if let Some(prev) = history.last() {
            if miss >= prev.miss_m {
                stalled += 1;
            } else {
                stalled = 0;
            }
        }
        history.push(OuterIteration {
            miss_m: miss,
            delay_m: delay,
            delay_change_m: change,
        });

        let stop = if miss <= opts.miss_threshold_m {
            Some((true, StopReason::MissThreshold))
        } else if change.is_some_and(|c| c < opts.delay_stagnation_m) {
            Some((true, StopReason::DelayStagnation))
        } else if stalled >= opts.stall_limit {
            Some((false, StopReason::Stalled))
        } else if iteration >= opts.max_outer {
            Some((false, StopReason::MaxOuter))
        } else {
            None
        };
        if let Some((converged, stop_reason)) = stop {
            return Ok(ShootingResult {
                initial_dir: dir,
                terminal_pos: terminal,
                miss_distance_m: miss,
                outer_iterations: iteration,
                converged,
                stop_reason,
                history,
                path,
            });
        }

        let best = nelder_mead(
            |a: &[f64; 2]| {
                let replayed = replay_ray(&path, &chart.direction(a));
                terminal_miss(&replayed, rx_pos).map_or(f64::INFINITY, |(_, _, m)| m)
            },
            angles,
            &nm_opts,
        );
        angles = best.x;
    }
}
