mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{link_through, random_link, weather};
use plasmaray::constants::{EARTH_RADIUS_KM, FIRST_ORDER_COEFF, FREQ_L1_HZ, FREQ_L5_HZ, GM_EARTH, GM_MOON};
use plasmaray::delays::{breakdown, los_tec, path_integrals};
use plasmaray::frames::{kepler_to_state, solve_light_time, EpochState, Frame, KeplerianElements};
use plasmaray::link::{
    dll_case, dll_sigma, gain_lookup, off_boresight_deg, AntennaPattern, Boresight, DllCase,
    DllParams,
};
use plasmaray::media::{
    group_index, phase_index, reference_medium, MediumModel, PlasmaSample, ReferenceMedium,
    ReferenceParams,
};
use plasmaray::raytrace::{integrate_ray, solve_initial_direction, RayPath, SolverOptions};
use plasmaray::Vec3;

fn reference() -> ReferenceMedium {
    reference_medium(ReferenceParams::default()).unwrap()
}

fn unit(az: f64, el: f64) -> Vec3 {
    Vec3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin())
}

fn frame_from(az: f64, el: f64, roll: f64) -> (Vec3, Vec3) {
    let u = unit(az, el);
    let a = if u.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let p = u.cross(&a).normalize();
    let q = u.cross(&p);
    (u, p * roll.cos() + q * roll.sin())
}

fn orbit(a_km: f64, e: f64, i: f64, raan: f64, argp: f64, m0: f64, gm: f64) -> KeplerianElements {
    KeplerianElements {
        a_km,
        e,
        i_deg: i,
        raan_deg: raan,
        argp_deg: argp,
        m0_deg: m0,
        gm,
        epoch: common::medium_epoch(),
        frame: Frame::EarthCenteredInertial,
    }
}

/// Optical (phase) path from the transmitter to `rx`: the traced path plus a
/// straight vacuum closure from its exit point, expressed as excess over the
/// chord, m.
fn phase_path_excess(path: &RayPath, rx: &Vec3, chord_km: f64) -> f64 {
    let f = path.frequency;
    let mut refr = 0.0;
    for w in path.samples.windows(2) {
        let a = phase_index(&w[0].plasma, &w[0].dir, f) - 1.0;
        let b = phase_index(&w[1].plasma, &w[1].dir, f) - 1.0;
        refr += 0.5 * (a + b) * (w[1].s - w[0].s);
    }
    let closure = (rx - path.exit_pos).norm();
    (refr + (path.s_exit + closure - chord_km)) * 1000.0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn two_body_invariants_hold_over_a_period(
        a in 7000.0f64..60000.0,
        e in 0.0f64..0.8,
        i in 0.0f64..180.0,
        raan in 0.0f64..360.0,
        argp in 0.0f64..360.0,
        m0 in 0.0f64..360.0,
    ) {
        let el = orbit(a, e, i, raan, argp, m0, GM_EARTH);
        prop_assume!(a * (1.0 - e) > EARTH_RADIUS_KM + 100.0);
        let inv = |t: f64| {
            let s = kepler_to_state(&el, el.epoch + t).unwrap();
            (0.5 * s.velocity.norm_squared() - el.gm / s.position.norm(), s.position.cross(&s.velocity))
        };
        let (e0, h0) = inv(0.0);
        let period = el.period_s();
        for k in 1..=16 {
            let (en, h) = inv(period * k as f64 / 16.0);
            prop_assert!(((en - e0) / e0).abs() < 1e-10);
            prop_assert!((h - h0).norm() / h0.norm() < 1e-10);
        }
        let back = kepler_to_state(&el, el.epoch + period).unwrap().position;
        let start = kepler_to_state(&el, el.epoch).unwrap().position;
        prop_assert!((back - start).norm() / start.norm() < 1e-9);
    }

    #[test]
    fn light_time_residual_is_tiny(
        a in 20000.0f64..30000.0,
        i in 0.0f64..90.0,
        raan in 0.0f64..360.0,
        m0 in 0.0f64..360.0,
        az in 0.0f64..std::f64::consts::TAU,
        el in -1.5f64..1.5,
        range in 3.6e5f64..4.1e5,
    ) {
        let tx = orbit(a, 0.01, i, raan, 0.0, m0, GM_EARTH);
        let epoch = common::medium_epoch() + 3600.0;
        let rx = EpochState::new(epoch, Frame::EarthCenteredInertial, unit(az, el) * range, Vec3::new(0.3, -0.8, 0.1));
        let sol = solve_light_time(&rx, &tx).unwrap();
        prop_assert!(sol.residual_s.abs() < 1e-12);
        let geometric = (rx.position - sol.tx.position).norm() / 299_792.458;
        prop_assert!((geometric - sol.delay_s).abs() < 1e-12);
    }

    #[test]
    fn index_bounds(
        n_e in 0.0f64..5e12,
        bx in -6e-5f64..6e-5,
        by in -6e-5f64..6e-5,
        bz in -6e-5f64..6e-5,
        az in 0.0f64..std::f64::consts::TAU,
        el in -1.5f64..1.5,
        f in 1.0e9f64..2.0e9,
    ) {
        let dir = unit(az, el);
        let bare = PlasmaSample { n_e, b_field: Vec3::zeros() };
        prop_assert!(phase_index(&bare, &dir, f) <= 1.0);
        prop_assert!(group_index(&bare, &dir, f) >= 1.0);
        let magnetised = PlasmaSample { n_e, b_field: Vec3::new(bx, by, bz) };
        prop_assert!((phase_index(&magnetised, &dir, f) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn gain_depends_only_on_off_boresight_angle(
        az in 0.0f64..std::f64::consts::TAU,
        el in -1.4f64..1.4,
        off in 0.0f64..1.5,
        spin in 0.0f64..std::f64::consts::TAU,
        spin2 in 0.0f64..std::f64::consts::TAU,
        r in 3000.0f64..30000.0,
    ) {
        let own = unit(az, el) * r;
        let bore = -own.normalize();
        let (_, perp) = frame_from(az, el, spin);
        let (_, perp2) = frame_from(az, el, spin2);
        let target = |p: Vec3| own + (bore * off.cos() + p * off.sin()) * 1.0e5;
        let pattern = AntennaPattern::default_transmitter();
        let a = off_boresight_deg(&own, Boresight::Nadir, &target(perp));
        let b = off_boresight_deg(&own, Boresight::Nadir, &target(perp2));
        prop_assert!((a - off.to_degrees()).abs() < 1e-6);
        prop_assert!((a - b).abs() < 1e-6);
        prop_assert!((gain_lookup(&pattern, a).unwrap() - gain_lookup(&pattern, b).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn dll_case_selection_is_total(
        d in 0.01f64..1.0,
        t_chip in 1e-8f64..2e-6,
        b_fe in 1e5f64..5e7,
        cn0 in 10.0f64..60.0,
    ) {
        let p = DllParams { d, t_chip, b_fe, ..DllParams::gps_l1() };
        let x = t_chip * b_fe;
        let fired = [d >= std::f64::consts::PI / x, d <= 1.0 / x, d > 1.0 / x && d < std::f64::consts::PI / x];
        prop_assert_eq!(fired.iter().filter(|f| **f).count(), 1);
        let expected = if fired[0] { DllCase::Wide } else if fired[1] { DllCase::Narrow } else { DllCase::Intermediate };
        prop_assert_eq!(dll_case(&p), expected);
        let s = dll_sigma(cn0, &p);
        prop_assert!(s.is_finite() && s > 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn converged_rays_keep_unit_direction_and_order_by_frequency(
        h in 150.0f64..12000.0,
        az in 0.0f64..std::f64::consts::TAU,
        el in -1.4f64..1.4,
        roll in 0.0f64..std::f64::consts::TAU,
    ) {
        let m = reference();
        let w = weather(3.0, 167.24);
        let (u, v) = frame_from(az, el, roll);
        let (tx, rx) = link_through(h, &u, &v);
        let opts = SolverOptions::default();
        let l1 = solve_initial_direction(&tx, &rx, FREQ_L1_HZ, &m, &w, &opts).unwrap();
        let l5 = solve_initial_direction(&tx, &rx, FREQ_L5_HZ, &m, &w, &opts).unwrap();
        prop_assume!(l1.converged && l5.converged);
        for r in [&l1, &l5] {
            let worst = r.path.samples.iter().map(|s| (s.dir.norm() - 1.0).abs()).fold(0.0, f64::max);
            prop_assert!(worst < 1e-9);
            let misses: Vec<f64> = r.history.iter().map(|h| h.miss_m).collect();
            prop_assert!(misses.windows(2).all(|p| p[1] <= p[0]), "{:?}", misses);
        }
        let b1 = breakdown(&l1, &tx, &rx, &m, &w, &opts.steps).unwrap();
        let b5 = breakdown(&l5, &tx, &rx, &m, &w, &opts.steps).unwrap();
        prop_assert!(b1.d_len >= 0.0);
        // Both excess lengths are resolved to the tracer's rounding floor.
        prop_assert!(b5.d_len >= b1.d_len - 1e-6, "L5 {} < L1 {}", b5.d_len, b1.d_len);

        let again = solve_initial_direction(&tx, &rx, FREQ_L1_HZ, &m, &w, &opts).unwrap();
        prop_assert_eq!(&again, &l1);
    }

    #[test]
    fn converged_ray_is_phase_stationary(
        h in 150.0f64..3000.0,
        az in 0.0f64..std::f64::consts::TAU,
        el in -1.4f64..1.4,
        roll in 0.0f64..std::f64::consts::TAU,
    ) {
        let m = reference();
        let w = weather(3.0, 167.24);
        let (u, v) = frame_from(az, el, roll);
        let (tx, rx) = link_through(h, &u, &v);
        let opts = SolverOptions { miss_threshold_m: 1.0, ..SolverOptions::default() };
        let r = solve_initial_direction(&tx, &rx, FREQ_L1_HZ, &m, &w, &opts).unwrap();
        prop_assume!(r.converged);
        let chord = (rx - tx).norm();
        let base = phase_path_excess(&r.path, &rx, chord);
        let e1 = r.initial_dir.cross(&tx).normalize();
        let e2 = r.initial_dir.cross(&e1);
        for (a, b) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)] {
            let dir = (r.initial_dir + (e1 * a + e2 * b) * 1e-5).normalize();
            let p = integrate_ray(&tx, &dir, FREQ_L1_HZ, &m, &w, &opts.steps).unwrap();
            let nearby = phase_path_excess(&p, &rx, chord);
            prop_assert!(base <= nearby + 1e-3, "bent {base} vs nearby {nearby}");
        }
    }

    #[test]
    fn quadrature_converges_under_step_halving(
        h in 100.0f64..20000.0,
        az in 0.0f64..std::f64::consts::TAU,
        el in -1.4f64..1.4,
        roll in 0.0f64..std::f64::consts::TAU,
    ) {
        let m = reference();
        let w = weather(3.0, 167.24);
        let (u, v) = frame_from(az, el, roll);
        let (tx, rx) = link_through(h, &u, &v);
        let opts = SolverOptions::default();
        let r = solve_initial_direction(&tx, &rx, FREQ_L1_HZ, &m, &w, &opts).unwrap();
        let fine = opts.steps.scaled(0.5);
        let f = FREQ_L1_HZ;
        let terms = |table| {
            let p = integrate_ray(&tx, &r.initial_dir, f, &m, &w, table).unwrap();
            let ints = path_integrals(&p).unwrap();
            let los = los_tec(&tx, &rx, &m, &w, table).unwrap();
            [
                FIRST_ORDER_COEFF * los / (f * f),
                FIRST_ORDER_COEFF * (ints.tec - los) / (f * f),
                ints.q / (f * f * f),
                ints.u / (f * f * f * f),
            ]
        };
        let coarse = terms(&opts.steps);
        let halved = terms(&fine);
        for (a, b) in coarse.iter().zip(&halved) {
            prop_assert!((a - b).abs() <= (1e-3 * b.abs()).max(1e-4), "{coarse:?} vs {halved:?}");
        }
    }
}

#[test]
fn medium_is_continuous_on_kilometre_scales() {
    let m = reference();
    let w = weather(3.0, 167.24);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let (u, v) = common::random_frame(&mut rng);
        let r = EARTH_RADIUS_KM + 400.0 + rand::Rng::random_range(&mut rng, 0.0..60000.0);
        let a = u * r;
        let b = a + v;
        let (na, nb) = (m.sample(&a, &w).n_e, m.sample(&b, &w).n_e);
        worst = worst.max((na - nb).abs() / na.max(nb).max(1e6));
    }
    assert!(worst < 0.05, "worst relative jump {worst}");
}

#[test]
fn plasmasphere_content_at_l4_falls_with_kp() {
    // The default cutoff is 4 R_E; extend it so the chord lies inside the medium.
    let m = reference_medium(ReferenceParams {
        cutoff_radius_km: 8.0 * EARTH_RADIUS_KM,
        ..ReferenceParams::default()
    })
    .unwrap();
    // Equatorial chord in the dipole frame, tangent to the L = 4 shell.
    let axis = m.params().dipole.unit();
    let (p, q) = {
        let a = if axis.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
        let p = axis.cross(&a).normalize();
        (p, axis.cross(&p))
    };
    let r = 4.0 * EARTH_RADIUS_KM;
    let content = |kp: f64| {
        let w = weather(kp, 100.0);
        (-400..=400)
            .map(|k| m.sample(&(p * r + q * (k as f64 * 50.0)), &w).n_e)
            .sum::<f64>()
    };
    let series: Vec<f64> = [1.0, 3.0, 5.0, 7.0, 9.0].iter().map(|&kp| content(kp)).collect();
    assert!(series.windows(2).all(|s| s[1] < s[0]), "{series:?}");
}

#[test]
fn random_links_touch_requested_altitude() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let (tx, rx, h) = random_link(&mut rng, 100.0, 20000.0);
        let got = plasmaray::frames::tangential_altitude(&tx, &rx).unwrap();
        assert!((got - h).abs() < 1e-6);
        assert!((tx.norm() - common::GPS_RADIUS_KM).abs() < 1e-6);
        assert!((rx.norm() - common::LUNAR_RANGE_KM).abs() < 1e-6);
    }
}

#[test]
fn lunar_orbit_invariants() {
    let el = orbit(3487.18, 0.0, 90.0, 0.0, 0.0, 0.0, GM_MOON);
    let s = kepler_to_state(&el, el.epoch).unwrap();
    assert!((s.position.norm() - 3487.18).abs() < 1e-6);
    assert!((s.velocity.norm() - (GM_MOON / 3487.18).sqrt()).abs() < 1e-9);
}
