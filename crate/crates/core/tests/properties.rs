//! Randomized checks of the force, Hessian and frame code against
//! independent finite-difference and closed-form oracles.

use drumhead_core::equilibrium::EquilibriumConfig;
use drumhead_core::forces::{coulomb_force, coulomb_potential, lab_frame_force, rotating_force};
use drumhead_core::frame::{from_rotating_frame, to_rotating_frame, RotatingState};
use drumhead_core::hessian::total_hessian;
use drumhead_core::params::{beta_from_wall, coulomb_strength};
use drumhead_core::{default_nist_params, CrystalState, Error, ForceField, TrapParams, UnitSystem};
use proptest::prelude::*;

const UM: f64 = 1e-6;

fn separated(points: &[[f64; 3]], min: f64) -> bool {
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            let d: f64 = (0..3).map(|a| (points[i][a] - points[j][a]).powi(2)).sum();
            if d.sqrt() < min {
                return false;
            }
        }
    }
    true
}

/// 2..10 ions in a 60 um box, at least 3 um apart.
fn cloud(planar: bool) -> impl Strategy<Value = Vec<[f64; 3]>> {
    prop::collection::vec(
        (-30.0..30.0f64, -30.0..30.0f64, -10.0..10.0f64),
        2..10,
    )
    .prop_map(move |v| {
        v.into_iter()
            .map(|(x, y, z)| [x * UM, y * UM, if planar { 0.0 } else { z * UM }])
            .collect::<Vec<_>>()
    })
    .prop_filter("ions too close", |p| separated(p, 3.0 * UM))
}

fn trap_at(khz: f64) -> TrapParams {
    let (s, t) = default_nist_params();
    t.retuned(2.0 * std::f64::consts::PI * khz * 1e3, &s).unwrap()
}

fn shifted(p: &[[f64; 3]], i: usize, a: usize, h: f64) -> Vec<[f64; 3]> {
    let mut q = p.to_vec();
    q[i][a] += h;
    q
}

/// Independent lab-frame potential: static quadrupole, rotating wall at
/// angle `omega_r t` (stiffness `+delta` along the rotating x' axis and
/// `-delta` along y') and the Coulomb sum.
fn lab_potential(p: &[[f64; 3]], t: f64, trap: &TrapParams) -> f64 {
    let (s, _) = default_nist_params();
    let k = s.mass * trap.omega_z * trap.omega_z;
    let (sn, cs) = (trap.omega_r * t).sin_cos();
    let mut u = coulomb_potential(p, &s).unwrap();
    for r in p {
        let xr = cs * r[0] - sn * r[1];
        let yr = sn * r[0] + cs * r[1];
        u += 0.5 * k * (r[2] * r[2] - 0.5 * (r[0] * r[0] + r[1] * r[1]));
        u += 0.5 * k * trap.delta * (xr * xr - yr * yr);
    }
    u
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn coulomb_force_is_minus_gradient(p in cloud(false)) {
        let (s, t) = default_nist_params();
        let h = 1e-6 * UnitSystem::new(&s, t.omega_z).length_scale;
        let f = coulomb_force(&p, &s).unwrap();
        for i in 0..p.len() {
            let scale = f[i].iter().map(|c| c.abs()).fold(0.0, f64::max);
            for a in 0..3 {
                let up = coulomb_potential(&shifted(&p, i, a, h), &s).unwrap();
                let dn = coulomb_potential(&shifted(&p, i, a, -h), &s).unwrap();
                let fd = -(up - dn) / (2.0 * h);
                prop_assert!((fd - f[i][a]).abs() <= 1e-6 * scale, "ion {i} axis {a}: {fd} vs {}", f[i][a]);
            }
        }
        // Newton's third law
        for a in 0..3 {
            let total: f64 = f.iter().map(|v| v[a]).sum();
            let scale: f64 = f.iter().map(|v| v[a].abs()).sum();
            prop_assert!(total.abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn coulomb_energy_is_homogeneous(p in cloud(false)) {
        let (s, _) = default_nist_params();
        let u = coulomb_potential(&p, &s).unwrap();
        let doubled: Vec<[f64; 3]> = p.iter().map(|r| [2.0 * r[0], 2.0 * r[1], 2.0 * r[2]]).collect();
        let u2 = coulomb_potential(&doubled, &s).unwrap();
        prop_assert!((u2 - 0.5 * u).abs() <= 1e-13 * u);
    }

    #[test]
    fn lab_force_is_gradient_plus_lorentz(
        p in cloud(false),
        khz in 180.0..204.0f64,
        t in 0.0..1e-5f64,
        vs in prop::collection::vec((-50.0..50.0f64, -50.0..50.0f64, -50.0..50.0f64), 10),
    ) {
        let (s, _) = default_nist_params();
        let trap = trap_at(khz);
        let v: Vec<[f64; 3]> = vs.iter().take(p.len()).map(|&(a, b, c)| [a, b, c]).collect();
        let state = CrystalState::new(t, p.clone(), v.clone()).unwrap();
        let f = lab_frame_force(&state, &ForceField::full(trap, s)).unwrap();
        let h = 1e-6 * UnitSystem::new(&s, trap.omega_z).length_scale;
        let qb = s.charge * trap.b_field;
        for i in 0..p.len() {
            let grad: Vec<f64> = (0..3)
                .map(|a| {
                    (lab_potential(&shifted(&p, i, a, h), t, &trap)
                        - lab_potential(&shifted(&p, i, a, -h), t, &trap))
                        / (2.0 * h)
                })
                .collect();
            let lorentz = [qb * v[i][1], -qb * v[i][0], 0.0];
            let scale = (0..3).map(|a| grad[a].abs() + lorentz[a].abs()).fold(0.0, f64::max);
            for a in 0..3 {
                let expect = -grad[a] + lorentz[a];
                prop_assert!((f[i][a] - expect).abs() <= 1e-6 * scale, "ion {i} axis {a}: {} vs {expect}", f[i][a]);
            }
        }
    }

    #[test]
    fn hessian_is_symmetric_and_matches_force_differences(p in cloud(true), khz in 180.0..204.0f64) {
        let (s, _) = default_nist_params();
        let trap = trap_at(khz);
        let eq = EquilibriumConfig::from_positions(p.clone(), trap, s, 1e-6).unwrap();
        let hd = total_hessian(&eq).unwrap();
        let h = &hd.matrix;
        let n = p.len();
        let hmax = h.amax();
        for r in 0..3 * n {
            for c in 0..3 * n {
                prop_assert!((h[(r, c)] - h[(c, r)]).abs() <= 1e-12 * hmax);
            }
        }
        // planar configuration: axial and planar blocks decouple exactly
        for i in 0..n {
            for j in 0..n {
                for a in 0..2 {
                    prop_assert_eq!(h[(3 * i + a, 3 * j + 2)], 0.0);
                }
            }
        }
        let step = 1e-6 * UnitSystem::new(&s, trap.omega_z).length_scale;
        for i in 0..n {
            for a in 0..3 {
                let up = rotating_force(&shifted(&p, i, a, step), &trap, &s).unwrap();
                let dn = rotating_force(&shifted(&p, i, a, -step), &trap, &s).unwrap();
                let col = 3 * i + a;
                let row_scale = (0..3 * n).map(|r| h[(r, col)].abs()).fold(0.0, f64::max);
                for j in 0..n {
                    for b in 0..3 {
                        let fd = -(up[j][b] - dn[j][b]) / (2.0 * step);
                        let r = 3 * j + b;
                        prop_assert!((fd - h[(r, col)]).abs() <= 1e-6 * row_scale, "H[{r},{col}] {fd} vs {}", h[(r, col)]);
                    }
                }
            }
        }
    }

    #[test]
    fn beta_is_symmetric_under_reflection(frac in 0.02..0.98f64) {
        let (s, t) = default_nist_params();
        let wc = t.omega_c(&s);
        let a = TrapParams { omega_r: frac * wc, delta: 0.0, ..t };
        let b = TrapParams { omega_r: wc - frac * wc, delta: 0.0, ..t };
        let (ba, bb) = (beta_from_wall(&a, &s).unwrap(), beta_from_wall(&b, &s).unwrap());
        prop_assert!((ba - bb).abs() <= 1e-9 * ba.abs().max(1.0));
    }

    #[test]
    fn frame_round_trip(
        p in cloud(false),
        vs in prop::collection::vec((-100.0..100.0f64, -100.0..100.0f64, -100.0..100.0f64), 10),
        t in 0.0..1e-3f64,
    ) {
        let (_, trap) = default_nist_params();
        let v: Vec<[f64; 3]> = vs.iter().take(p.len()).map(|&(a, b, c)| [a, b, c]).collect();
        let state = CrystalState::new(t, p.clone(), v.clone()).unwrap();
        let rot = to_rotating_frame(&state, trap.omega_r);
        let back = from_rotating_frame(&rot, trap.omega_r);
        for i in 0..p.len() {
            let r_lab = (p[i][0].hypot(p[i][1]), p[i][2]);
            let r_rot = (rot.positions[i][0].hypot(rot.positions[i][1]), rot.positions[i][2]);
            prop_assert!((r_lab.0 - r_rot.0).abs() <= 1e-15 * r_lab.0.max(UM));
            prop_assert_eq!(r_lab.1, r_rot.1);
            for a in 0..3 {
                prop_assert!((back.positions[i][a] - p[i][a]).abs() <= 1e-12 * 30.0 * UM);
                prop_assert!((back.velocities[i][a] - v[i][a]).abs() <= 1e-12 * 1e3);
            }
        }
    }

    #[test]
    fn rigid_rotation_has_zero_rotating_velocity(p in cloud(true), t in 0.0..1e-3f64) {
        let (_, trap) = default_nist_params();
        let rot = RotatingState { time: t, positions: p.clone(), velocities: vec![[0.0; 3]; p.len()] };
        let lab = from_rotating_frame(&rot, trap.omega_r);
        let again = to_rotating_frame(&lab, trap.omega_r);
        for v in &again.velocities {
            for c in v {
                prop_assert!(c.abs() <= 1e-9);
            }
        }
    }
}

#[test]
fn non_planar_configuration_has_no_mode_hessian() {
    let (s, t) = default_nist_params();
    let p = vec![[0.0, 0.0, 1.0 * UM], [10.0 * UM, 0.0, 0.0]];
    let eq = EquilibriumConfig::from_positions(p, t, s, 1e-6).unwrap();
    assert!(matches!(total_hessian(&eq), Err(Error::NotPlanar { .. })));
}

#[test]
fn single_ion_hessian_is_the_trap_stiffness() {
    let (s, t) = default_nist_params();
    let eq = EquilibriumConfig::from_positions(vec![[0.0; 3]], t, s, 1e-6).unwrap();
    let h = total_hessian(&eq).unwrap().matrix;
    let k = s.mass * t.omega_z * t.omega_z;
    let beta = beta_from_wall(&t, &s).unwrap();
    let expect = [k * (beta + t.delta), k * (beta - t.delta), k];
    for a in 0..3 {
        assert!((h[(a, a)] - expect[a]).abs() <= 1e-12 * k);
    }
    assert!(coulomb_strength(s.charge) > 0.0);
}
