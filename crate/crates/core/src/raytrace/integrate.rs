use super::{RayPath, RaySample, RaytraceError, Step, StepTable};
use crate::constants::EARTH_RADIUS_KM;
use crate::media::{
    cos_theta, gradient_step_km, phase_refractivity, MediumModel, PlasmaSample, SpaceWeather,
};
use crate::Vec3;

const MAX_STEPS: usize = 1_000_000;

/// Refractivity gradient and index at a point, for a given ray direction.
#[derive(Clone, Copy)]
struct IndexField {
    n: f64,
    grad: Vec3,
}

impl IndexField {
    const VACUUM: IndexField = IndexField {
        n: 1.0,
        grad: Vec3::new(0.0, 0.0, 0.0),
    };

    /// Curvature of a ray travelling along `dir` through this point.
    fn curvature(&self, dir: &Vec3) -> Vec3 {
        (self.grad - dir * dir.dot(&self.grad)) / self.n
    }
}

struct Tracer<'a> {
    medium: &'a dyn MediumModel,
    weather: &'a SpaceWeather,
    f: f64,
    cutoff: f64,
}

impl Tracer<'_> {
    fn field(&self, pos: &Vec3, dir: &Vec3) -> (PlasmaSample, IndexField) {
        let delta = gradient_step_km(pos);
        if pos.norm() > self.cutoff + delta {
            return (PlasmaSample::VACUUM, IndexField::VACUUM);
        }
        let center = self.medium.sample(pos, self.weather);
        let mut grad = Vec3::zeros();
        for axis in 0..3 {
            let mut plus = *pos;
            let mut minus = *pos;
            plus[axis] += delta;
            minus[axis] -= delta;
            let np = phase_refractivity(&self.medium.sample(&plus, self.weather), dir, self.f);
            let nm = phase_refractivity(&self.medium.sample(&minus, self.weather), dir, self.f);
            grad[axis] = (np - nm) / (2.0 * delta);
        }
        let n = 1.0 + phase_refractivity(&center, dir, self.f);
        (center, IndexField { n, grad })
    }

    fn node(&self, s: f64, pos: Vec3, dir: Vec3) -> (RaySample, Vec3) {
        let (plasma, field) = self.field(&pos, &dir);
        let deriv = field.curvature(&dir);
        (
            RaySample {
                s,
                pos,
                dir,
                dir_deriv: deriv,
                plasma,
                cos_theta: cos_theta(&plasma.b_field, &dir),
            },
            deriv,
        )
    }

    /// RK4 stage derivatives; the two middle stages share the midpoint field.
    fn stages(&self, pos: &Vec3, dir: &Vec3, h: f64, a1: Vec3) -> [Vec3; 4] {
        let half = 0.5 * h;
        let d2 = dir + a1 * half;
        let (_, mid) = self.field(&(pos + dir * half), &d2);
        let a2 = mid.curvature(&d2);
        let a3 = mid.curvature(&(dir + a2 * half));
        let d4 = dir + a3 * h;
        let (_, end) = self.field(&(pos + d2 * h), &d4);
        let a4 = end.curvature(&d4);
        [a1, a2, a3, a4]
    }
}

/// Applies one frozen RK4 step. Shared by integration and replay so that an
/// unchanged replay is bit-identical.
fn advance(pos: &Vec3, dir: &Vec3, step: &Step) -> (Vec3, Vec3) {
    let h = step.h;
    let [a1, a2, a3, a4] = step.stages;
    let new_pos = pos + dir * h + (a1 + a2 + a3) * (h * h / 6.0);
    let new_dir = (dir + (a1 + (a2 + a3) * 2.0 + a4) * (h / 6.0)).normalize();
    (new_pos, new_dir)
}

/// Distance along `dir` from `pos` to the far side of the sphere of
/// `radius` (exit from inside). `None` if the line misses the sphere.
fn distance_to_exit(pos: &Vec3, dir: &Vec3, radius: f64) -> Option<f64> {
    let b = pos.dot(dir);
    let disc = b * b - (pos.norm_squared() - radius * radius);
    (disc >= 0.0).then(|| (-b + disc.sqrt()).max(0.0))
}

/// Distance along `dir` from an outside point to where the line enters the
/// sphere; `None` if it never does.
fn distance_to_entry(pos: &Vec3, dir: &Vec3, radius: f64) -> Option<f64> {
    let b = pos.dot(dir);
    let c = pos.norm_squared() - radius * radius;
    let disc = b * b - c;
    (disc >= 0.0 && b < 0.0).then(|| (c / (-b + disc.sqrt())).max(0.0))
}

fn check_altitude(sample: &RaySample) -> Result<(), RaytraceError> {
    let altitude = sample.pos.norm() - EARTH_RADIUS_KM;
    if altitude < 0.0 {
        return Err(RaytraceError::Occultation {
            s_km: sample.s,
            altitude_km: altitude,
        });
    }
    Ok(())
}

/// Traces a ray from `tx_pos` along `dir0` until it leaves the medium's cutoff
/// sphere travelling outward. A transmitter outside the sphere is first moved
/// along the straight line to the entry point.
pub fn integrate_ray(
    tx_pos: &Vec3,
    dir0: &Vec3,
    f: f64,
    medium: &dyn MediumModel,
    weather: &SpaceWeather,
    table: &StepTable,
) -> Result<RayPath, RaytraceError> {
    table.validate()?;
    let dir0 = dir0.normalize();
    if !dir0.iter().all(|v| v.is_finite()) || !tx_pos.iter().all(|v| v.is_finite()) {
        return Err(RaytraceError::Geometry("non-finite initial state".into()));
    }
    let tracer = Tracer {
        medium,
        weather,
        f,
        cutoff: medium.cutoff_radius(),
    };
    let cutoff = tracer.cutoff;

    let mut samples = Vec::new();
    let mut steps = Vec::new();
    let mut pos = *tx_pos;
    let mut dir = dir0;
    let mut s = 0.0;

    if pos.norm() > cutoff {
        let first = RaySample {
            s,
            pos,
            dir,
            dir_deriv: Vec3::zeros(),
            plasma: PlasmaSample::VACUUM,
            cos_theta: 0.0,
        };
        check_altitude(&first)?;
        samples.push(first);
        match distance_to_entry(&pos, &dir, cutoff) {
            Some(entry) => {
                let step = Step {
                    h: entry,
                    stages: [Vec3::zeros(); 4],
                };
                (pos, dir) = advance(&pos, &dir, &step);
                s += entry;
                steps.push(step);
            }
            None => {
                // Never enters the medium: straight to the closest approach.
                let ahead = (-pos.dot(&dir)).max(0.0);
                let step = Step {
                    h: ahead,
                    stages: [Vec3::zeros(); 4],
                };
                (pos, dir) = advance(&pos, &dir, &step);
                s += ahead;
                steps.push(step);
                samples.push(RaySample { s, pos, dir, ..first });
                return Ok(finish(samples, steps, f, dir0));
            }
        }
    }

    loop {
        let (sample, a1) = tracer.node(s, pos, dir);
        check_altitude(&sample)?;
        samples.push(sample);
        let outbound = pos.dot(&dir) > 0.0;
        if steps.len() > 1 && outbound && pos.norm() >= cutoff * (1.0 - 1e-12) {
            break;
        }
        if steps.len() >= MAX_STEPS {
            return Err(RaytraceError::Runaway { steps: steps.len() });
        }
        let mut h = table.step_at(pos.norm() - EARTH_RADIUS_KM);
        let mut last = false;
        if let Some(to_exit) = distance_to_exit(&pos, &dir, cutoff) {
            if to_exit <= h {
                h = to_exit;
                last = true;
            }
        }
        let step = Step {
            h,
            stages: tracer.stages(&pos, &dir, h, a1),
        };
        (pos, dir) = advance(&pos, &dir, &step);
        s += h;
        steps.push(step);
        if last {
            let (sample, _) = tracer.node(s, pos, dir);
            check_altitude(&sample)?;
            samples.push(sample);
            break;
        }
    }
    Ok(finish(samples, steps, f, dir0))
}

fn finish(samples: Vec<RaySample>, steps: Vec<Step>, f: f64, dir0: Vec3) -> RayPath {
    let last = samples[samples.len() - 1];
    RayPath {
        s_exit: last.s,
        exit_pos: last.pos,
        exit_dir: last.dir,
        s_f: last.s,
        frequency: f,
        initial_dir: dir0,
        samples,
        steps,
    }
}

/// Re-runs the stored step schedule from a new initial direction using the
/// frozen curvature stages. No medium evaluations are made; per-node plasma
/// is carried over unchanged.
pub fn replay_ray(path: &RayPath, dir0: &Vec3) -> RayPath {
    let dir0 = dir0.normalize();
    let mut pos = path.samples[0].pos;
    let mut dir = dir0;
    let mut samples = Vec::with_capacity(path.samples.len());
    samples.push(RaySample {
        pos,
        dir,
        ..path.samples[0]
    });
    for (step, old) in path.steps.iter().zip(&path.samples[1..]) {
        (pos, dir) = advance(&pos, &dir, step);
        samples.push(RaySample { pos, dir, ..*old });
    }
    finish(samples, path.steps.clone(), path.frequency, dir0)
}

/// Extends the path straight from its exit point to the foot of the
/// perpendicular from `rx_pos`. Returns the extended path length and that
/// terminal point.
pub fn vacuum_extension(path: &RayPath, rx_pos: &Vec3) -> Result<(f64, Vec3), RaytraceError> {
    let ds = (rx_pos - path.exit_pos).dot(&path.exit_dir);
    if ds < 0.0 {
        return Err(RaytraceError::Geometry(format!(
            "receiver lies {:.3} km behind the exit point",
            -ds
        )));
    }
    Ok((path.s_exit + ds, path.exit_pos + path.exit_dir * ds))
}

/// Perpendicular distance of each sample from the transmitter-receiver
/// chord, m.
pub fn chord_displacement(path: &RayPath, tx_pos: &Vec3, rx_pos: &Vec3) -> Vec<f64> {
    let axis = (rx_pos - tx_pos).normalize();
    path.samples
        .iter()
        .map(|smp| (smp.pos - tx_pos).cross(&axis).norm() * 1000.0)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::FREQ_L1_HZ;
    use crate::frames::Epoch;
    use crate::media::VacuumMedium;

    fn weather() -> SpaceWeather {
        SpaceWeather::new(3.0, 100.0, Epoch::J2000).unwrap()
    }

    #[test]
    fn vacuum_ray_is_straight() {
        let tx = Vec3::new(26560.0, 0.0, 0.0);
        let dir = Vec3::new(-0.3, 0.9, 0.1).normalize();
        let p = integrate_ray(&tx, &dir, FREQ_L1_HZ, &VacuumMedium, &weather(), &StepTable::default())
            .unwrap();
        assert!(p.samples.iter().all(|s| s.dir_deriv == Vec3::zeros()));
        assert!((p.exit_pos - (tx + dir * p.s_exit)).norm() < 1e-6);
        assert!((p.exit_pos.norm() - VacuumMedium.cutoff_radius()).abs() < 1e-6);
        assert!(p.samples.windows(2).all(|w| w[1].s >= w[0].s));
    }

    #[test]
    fn ray_into_earth_is_occulted() {
        let tx = Vec3::new(20000.0, 0.0, 0.0);
        let r = integrate_ray(
            &tx,
            &(-tx).normalize(),
            FREQ_L1_HZ,
            &VacuumMedium,
            &weather(),
            &StepTable::default(),
        );
        assert!(matches!(r, Err(RaytraceError::Occultation { .. })));
    }

    #[test]
    fn ray_missing_the_sphere_stays_straight() {
        let tx = Vec3::new(40000.0, 0.0, 0.0);
        let dir = Vec3::new(-0.1, 1.0, 0.0).normalize();
        let p = integrate_ray(&tx, &dir, FREQ_L1_HZ, &VacuumMedium, &weather(), &StepTable::default())
            .unwrap();
        assert_eq!(p.samples.len(), 2);
        assert!(p.exit_pos.dot(&dir).abs() < 1e-9);
    }

    #[test]
    fn replay_identity_and_rotation() {
        let tx = Vec3::new(26560.0, 0.0, 0.0);
        let dir = Vec3::new(-0.25, 1.0, 0.05).normalize();
        let p = integrate_ray(&tx, &dir, FREQ_L1_HZ, &VacuumMedium, &weather(), &StepTable::default())
            .unwrap();
        assert_eq!(replay_ray(&p, &dir), p);
        let rotated = Vec3::new(-0.2501, 1.0, 0.0502).normalize();
        let q = replay_ray(&p, &rotated);
        assert!((q.exit_pos - (tx + rotated * q.s_exit)).norm() < 1e-6);
    }

    #[test]
    fn vacuum_extension_projection() {
        let tx = Vec3::new(26560.0, 0.0, 0.0);
        let dir = Vec3::new(-0.25, 1.0, 0.05).normalize();
        let p = integrate_ray(&tx, &dir, FREQ_L1_HZ, &VacuumMedium, &weather(), &StepTable::default())
            .unwrap();
        let on_ray = tx + dir * 4.0e5;
        let (s_f, term) = vacuum_extension(&p, &on_ray).unwrap();
        assert!((term - on_ray).norm() < 1e-6);
        assert!((s_f - 4.0e5).abs() < 1e-6);

        let perp = dir.cross(&Vec3::z()).normalize();
        let off = on_ray + perp;
        let (_, term) = vacuum_extension(&p, &off).unwrap();
        assert!(((term - off).norm() - 1.0).abs() < 1e-9);
        assert!((term - off).dot(&p.exit_dir).abs() < 1e-9);

        assert!(vacuum_extension(&p, &tx).is_err());
    }

    #[test]
    fn vacuum_chord_displacement_is_zero() {
        let tx = Vec3::new(26560.0, 0.0, 0.0);
        let rx = Vec3::new(-1.0e5, 3.8e5, 2.0e4);
        let dir = (rx - tx).normalize();
        let p = integrate_ray(&tx, &dir, FREQ_L1_HZ, &VacuumMedium, &weather(), &StepTable::default())
            .unwrap();
        assert!(chord_displacement(&p, &tx, &rx).iter().all(|d| *d < 1e-6));
    }

    #[test]
    fn step_table_lookup() {
        let t = StepTable::default();
        assert_eq!(t.step_at(500.0), 10.0);
        assert_eq!(t.step_at(1000.0), 20.0);
        assert_eq!(t.step_at(3999.0), 20.0);
        assert_eq!(t.step_at(1e5), 100.0);
        assert_eq!(t.scaled(0.5).step_at(500.0), 5.0);
    }
}
