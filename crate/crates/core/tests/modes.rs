//! Normal-mode checks: single-ion closed forms, exact energy partition,
//! thermal synthesis round trips and the approach to the planar limit.

use std::f64::consts::PI;

use drumhead_core::modes::synthesize_thermal_state;
use drumhead_core::params::BOLTZMANN;
use drumhead_core::{
    default_nist_params, find_equilibrium, Branch, BranchTemperatures, CrystalState,
    EquilibriumConfig, EquilibriumOptions, ModeDecomposition, TrapParams,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const KHZ: f64 = 2.0 * PI * 1e3;

fn trap_at(khz: f64) -> TrapParams {
    let (s, t) = default_nist_params();
    t.retuned(khz * KHZ, &s).unwrap()
}

fn crystal(n: usize, khz: f64) -> EquilibriumConfig {
    let (s, _) = default_nist_params();
    let opts = EquilibriumOptions { seeds: 6, ..Default::default() };
    find_equilibrium(n, &trap_at(khz), &s, &opts).unwrap()
}

/// Rotating-frame quadratic energy of a lab state about `eq`, computed
/// directly from the Hessian: `q^T H q / 2 + m |v'|^2 / 2`.
fn quadratic_energy(state: &CrystalState, eq: &EquilibriumConfig) -> f64 {
    let h = drumhead_core::hessian::total_hessian(eq).unwrap().matrix;
    let rot = drumhead_core::frame::to_rotating_frame(state, eq.trap.omega_r);
    let n = eq.n_ions();
    let mut q = vec![0.0; 3 * n];
    let mut ke = 0.0;
    for i in 0..n {
        for a in 0..3 {
            q[3 * i + a] = rot.positions[i][a] - eq.positions_rot[i][a];
            ke += 0.5 * eq.species.mass * rot.velocities[i][a].powi(2);
        }
    }
    let mut pe = 0.0;
    for r in 0..3 * n {
        for c in 0..3 * n {
            pe += 0.5 * q[r] * h[(r, c)] * q[c];
        }
    }
    pe + ke
}

#[test]
fn single_ion_frequencies_match_closed_form() {
    let (s, t) = default_nist_params();
    let trap = TrapParams { delta: 0.0, ..t };
    let eq = EquilibriumConfig::from_positions(vec![[0.0; 3]], trap, s, 1e-6).unwrap();
    let dec = ModeDecomposition::new(&eq).unwrap();
    let wc = trap.omega_c(&s);
    let root = (wc * wc / 4.0 - trap.omega_z * trap.omega_z / 2.0).sqrt();
    let (wp, wm) = (wc / 2.0 + root, wc / 2.0 - root);
    let expect = [
        (Branch::Drumhead, trap.omega_z),
        (Branch::ExB, trap.omega_r - wm),
        (Branch::Cyclotron, wp - trap.omega_r),
    ];
    for (b, w) in expect {
        let got = dec.branch_frequencies(b)[0];
        assert!((got - w).abs() <= 1e-10 * w, "{}: {got} vs {w}", b.name());
    }
    // quoted NIST values, to the three digits given
    assert!((wp / (2.0 * PI) - 7.432e6).abs() < 5e3);
    assert!((wm / (2.0 * PI) - 0.168e6).abs() < 5e2);
}

#[test]
fn mode_count_and_com_mode() {
    for n in [2, 7, 19] {
        let dec = ModeDecomposition::new(&crystal(n, 190.0)).unwrap();
        assert_eq!(dec.frequencies.len(), 3 * n);
        for b in [Branch::Drumhead, Branch::ExB, Branch::Cyclotron] {
            assert_eq!(dec.branch_frequencies(b).len(), n);
        }
        let wz = dec.equilibrium.trap.omega_z;
        assert!((dec.branch_frequencies(Branch::Drumhead)[0] - wz).abs() <= 1e-9 * wz);
        let wc = dec.equilibrium.trap.omega_c(&dec.equilibrium.species);
        let wr = dec.equilibrium.trap.omega_r;
        // cyclotron branch lies above omega_c/2 in the lab frame, ExB below
        assert!(dec.branch_frequencies(Branch::Cyclotron).iter().all(|w| w + wr > wc / 2.0));
        assert!(dec.branch_frequencies(Branch::ExB).iter().all(|w| wr - w < wc / 2.0));
    }
}

#[test]
fn energy_partition_is_exact_for_random_states() {
    let eq = crystal(12, 200.0);
    let dec = ModeDecomposition::new(&eq).unwrap();
    let units = eq.units();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = eq.n_ions();
    let mut worst: f64 = 0.0;
    for trial in 0..1000 {
        let amp = 1e-4 * units.length_scale;
        let vamp = 1e-4 * units.velocity_scale();
        let rot = drumhead_core::frame::RotatingState {
            time: rng.random::<f64>() * 1e-4,
            positions: (0..n)
                .map(|i| {
                    let p = eq.positions_rot[i];
                    [
                        p[0] + amp * (rng.random::<f64>() - 0.5),
                        p[1] + amp * (rng.random::<f64>() - 0.5),
                        amp * (rng.random::<f64>() - 0.5),
                    ]
                })
                .collect(),
            velocities: (0..n)
                .map(|_| [0; 3].map(|_: i32| vamp * (rng.random::<f64>() - 0.5)))
                .collect(),
        };
        let state = drumhead_core::frame::from_rotating_frame(&rot, eq.trap.omega_r);
        let me = dec.mode_energies(&state).unwrap();
        let total: f64 = me.energies.iter().sum();
        let direct = quadratic_energy(&state, &eq);
        let rel = (total - direct).abs() / direct;
        worst = worst.max(rel);
        assert!(me.energies.iter().all(|&e| e >= 0.0));
        assert!(rel <= 1e-8, "trial {trial}: {total} vs {direct}");
    }
    assert!(worst <= 1e-8);
}

#[test]
fn thermal_synthesis_round_trip() {
    let eq = crystal(19, 204.0);
    let dec = ModeDecomposition::new(&eq).unwrap();
    let temps = BranchTemperatures { t_drumhead: 2e-3, t_exb: 10e-3, t_cyclotron: 1e-3 };
    let state = synthesize_thermal_state(&dec, &temps, 3).unwrap();
    let got = dec.mode_energies(&state).unwrap();
    for k in 0..dec.frequencies.len() {
        let want = BOLTZMANN * temps.get(dec.branches[k]);
        assert!((got.energies[k] - want).abs() <= 1e-6 * want, "mode {k}");
    }
    for b in [Branch::Drumhead, Branch::ExB, Branch::Cyclotron] {
        let (g, w) = (got.temperatures.get(b), temps.get(b));
        assert!((g - w).abs() <= 1e-6 * w);
    }
    assert!(!got.reconfigured);
}

#[test]
fn zero_temperature_is_the_rotating_equilibrium() {
    let eq = crystal(7, 195.0);
    let dec = ModeDecomposition::new(&eq).unwrap();
    let state = synthesize_thermal_state(&dec, &BranchTemperatures::default(), 9).unwrap();
    let rot = drumhead_core::frame::to_rotating_frame(&state, eq.trap.omega_r);
    for (p, e) in rot.positions.iter().zip(&eq.positions_rot) {
        for a in 0..3 {
            assert!((p[a] - e[a]).abs() <= 1e-18);
        }
    }
    for v in &rot.velocities {
        assert!(v.iter().all(|c| c.abs() <= 1e-12));
    }
}

#[test]
fn min_drumhead_frequency_falls_toward_planar_limit() {
    let (s, _) = default_nist_params();
    let mut guess = crystal(19, 190.0).positions_rot;
    let mut last = f64::INFINITY;
    for khz in [190.0, 196.0, 200.0, 204.0, 206.0, 208.0] {
        let opts = EquilibriumOptions {
            seeds: 0,
            initial_guesses: vec![guess.clone()],
            ..Default::default()
        };
        let eq = find_equilibrium(19, &trap_at(khz), &s, &opts).unwrap();
        if !eq.planar {
            break;
        }
        let dec = ModeDecomposition::new(&eq).unwrap();
        let wmin = dec.branch_frequencies(Branch::Drumhead).iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(wmin < last, "{khz} kHz: {wmin} not below {last}");
        last = wmin;
        guess = eq.positions_rot;
    }
    assert!(last.is_finite());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Energies of two states built from disjoint mode sets add.
    #[test]
    fn projection_is_additive_over_disjoint_modes(
        split in 1usize..20,
        phases in prop::collection::vec(0.0..(2.0 * PI), 21),
        scales in prop::collection::vec(0.1..2.0f64, 21),
    ) {
        let eq = crystal(7, 200.0);
        let dec = ModeDecomposition::new(&eq).unwrap();
        let m = dec.frequencies.len();
        let e: Vec<f64> = scales.iter().take(m).map(|s| s * 1e-3 * BOLTZMANN).collect();
        let mask = |keep: bool| -> Vec<f64> {
            (0..m).map(|k| if (k < split) == keep { e[k] } else { 0.0 }).collect()
        };
        let a = dec.synthesize(&mask(true), &phases[..m], 0.0).unwrap();
        let b = dec.synthesize(&mask(false), &phases[..m], 0.0).unwrap();
        let both = dec.synthesize(&e, &phases[..m], 0.0).unwrap();
        let (ea, eb, ec) = (
            dec.mode_energies(&a).unwrap().energies,
            dec.mode_energies(&b).unwrap().energies,
            dec.mode_energies(&both).unwrap().energies,
        );
        for k in 0..m {
            prop_assert!((ea[k] + eb[k] - ec[k]).abs() <= 1e-8 * ec[k]);
            if k < split {
                prop_assert!(eb[k] <= 1e-12 * e[k]);
            } else {
                prop_assert!(ea[k] <= 1e-12 * e[k]);
            }
        }
    }
}
