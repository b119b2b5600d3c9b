//! Lab-frame forces (static trap quadrupole, rotating wall, Lorentz force,
//! Coulomb repulsion) and the rotating-frame potential energy.
//!
//! In the lab frame the electrostatic potential is the static quadrupole
//! `m wz^2 (z^2 - rho^2/2) / 2` plus the wall `m wz^2 delta (x'^2 - y'^2) / 2`
//! written in rotating coordinates `x' = R(omega_r t) x`. Transforming to the
//! frame co-rotating with the crystal turns the Lorentz and centrifugal terms
//! into the planar confinement `beta`.

use alloc::vec::Vec;

use crate::coulomb;
use crate::error::{invalid, Error, Result};
use crate::frame::rotate;
use crate::linear::{LinearKernel, LinearizedCoulomb};
use crate::math;
use crate::params::{SpeciesParams, TrapParams, UnitSystem};
use crate::state::{Coords, CrystalState};

/// How the ion-ion interaction is evaluated during time evolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CoulombMode {
    #[default]
    Full,
    /// Second-order expansion about the equilibrium; removes mode coupling.
    Linearized,
}

/// Trap frequencies in units of omega_z plus the rotating-frame couplings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledTrap {
    pub omega_c: f64,
    pub omega_r: f64,
    pub beta: f64,
    pub delta: f64,
}

impl ScaledTrap {
    pub fn new(trap: &TrapParams, species: &SpeciesParams) -> Result<Self> {
        trap.validate(species)?;
        Ok(Self {
            omega_c: trap.omega_c(species) / trap.omega_z,
            omega_r: trap.omega_r / trap.omega_z,
            beta: trap.beta(species)?,
            delta: trap.delta,
        })
    }

    /// Diagonal of the trap Hessian in the rotating frame.
    pub fn stiffness(&self) -> [f64; 3] {
        [self.beta + self.delta, self.beta - self.delta, 1.0]
    }

    /// Effective magnetic frequency in the rotating frame, `omega_c - 2 omega_r`.
    pub fn vortex_frequency(&self) -> f64 {
        self.omega_c - 2.0 * self.omega_r
    }
}

/// Rotating-frame potential (trap + Coulomb), dimensionless.
pub(crate) fn rotating_energy(pos: &Coords, trap: &ScaledTrap) -> Result<f64> {
    Ok(trap_energy(pos, trap) + coulomb::pair_energy(pos)?)
}

pub(crate) fn trap_energy(pos: &Coords, trap: &ScaledTrap) -> f64 {
    let [kx, ky, kz] = trap.stiffness();
    let mut e = 0.0;
    for i in 0..pos.len() {
        e += kx * pos.x[i] * pos.x[i] + ky * pos.y[i] * pos.y[i] + kz * pos.z[i] * pos.z[i];
    }
    0.5 * e
}

/// Gradient of the rotating-frame potential, written into `grad`.
pub(crate) fn rotating_gradient(pos: &Coords, trap: &ScaledTrap, grad: &mut Coords) {
    let [kx, ky, kz] = trap.stiffness();
    grad.fill(0.0);
    coulomb::accumulate_forces(pos, grad);
    for i in 0..pos.len() {
        grad.x[i] = kx * pos.x[i] - grad.x[i];
        grad.y[i] = ky * pos.y[i] - grad.y[i];
        grad.z[i] = kz * pos.z[i] - grad.z[i];
    }
}

/// Trap, species and interaction model for time evolution.
#[derive(Debug, Clone)]
pub struct ForceField {
    pub trap: TrapParams,
    pub species: SpeciesParams,
    pub coulomb_mode: CoulombMode,
    pub linearization: Option<LinearizedCoulomb>,
}

impl ForceField {
    pub fn full(trap: TrapParams, species: SpeciesParams) -> Self {
        Self {
            trap,
            species,
            coulomb_mode: CoulombMode::Full,
            linearization: None,
        }
    }

    pub fn linearized(lin: LinearizedCoulomb) -> Self {
        Self {
            trap: lin.equilibrium.trap,
            species: lin.equilibrium.species,
            coulomb_mode: CoulombMode::Linearized,
            linearization: Some(lin),
        }
    }

    pub fn units(&self) -> UnitSystem {
        UnitSystem::new(&self.species, self.trap.omega_z)
    }

    pub(crate) fn kernel(&self) -> Result<ForceKernel> {
        let scaled = ScaledTrap::new(&self.trap, &self.species)?;
        let linear = match (self.coulomb_mode, &self.linearization) {
            (CoulombMode::Full, _) => None,
            (CoulombMode::Linearized, Some(lin)) => Some(lin.kernel()),
            (CoulombMode::Linearized, None) => {
                return Err(invalid(
                    "coulomb_mode",
                    "linearized mode needs an attached LinearizedCoulomb",
                ))
            }
        };
        Ok(ForceKernel { scaled, linear })
    }
}

/// Electric-type accelerations in dimensionless units (mass 1). The
/// magnetic force is handled by the integrator's rotation.
pub(crate) struct ForceKernel {
    pub scaled: ScaledTrap,
    linear: Option<LinearKernel>,
}

impl ForceKernel {
    /// Static quadrupole + rotating wall + Coulomb at dimensionless time `t`.
    pub fn electric_accel(&mut self, pos: &Coords, t: f64, out: &mut Coords) {
        let n = pos.len();
        let (s, c) = math::sin_cos(self.scaled.omega_r * t);
        let delta = self.scaled.delta;
        for i in 0..n {
            let (x, y) = (pos.x[i], pos.y[i]);
            let (xr, yr) = rotate(c, s, x, y);
            let (wx, wy) = rotate(c, -s, -delta * xr, delta * yr);
            out.x[i] = 0.5 * x + wx;
            out.y[i] = 0.5 * y + wy;
            out.z[i] = -pos.z[i];
        }
        match &mut self.linear {
            None => coulomb::accumulate_forces(pos, out),
            Some(lin) => lin.accumulate(pos, c, s, out),
        }
    }
}

fn check_positions(positions: &[[f64; 3]]) -> Result<()> {
    for i in 0..positions.len() {
        for j in (i + 1)..positions.len() {
            if positions[i] == positions[j] {
                return Err(Error::CoincidentIons { i, j });
            }
        }
    }
    Ok(())
}

/// `e^2/(8 pi eps0) sum_i sum_{j != i} 1/|x_i - x_j|` (J).
pub fn coulomb_potential(positions: &[[f64; 3]], species: &SpeciesParams) -> Result<f64> {
    check_positions(positions)?;
    let k = crate::params::coulomb_strength(species.charge);
    let mut total = 0.0;
    for i in 0..positions.len() {
        for j in (i + 1)..positions.len() {
            let d = [
                positions[i][0] - positions[j][0],
                positions[i][1] - positions[j][1],
                positions[i][2] - positions[j][2],
            ];
            total += 1.0 / math::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
        }
    }
    Ok(k * total)
}

/// Coulomb force on every ion (N); the exact negative gradient of
/// [`coulomb_potential`].
pub fn coulomb_force(positions: &[[f64; 3]], species: &SpeciesParams) -> Result<Vec<[f64; 3]>> {
    check_positions(positions)?;
    let k = crate::params::coulomb_strength(species.charge);
    let pos = Coords::from_rows(positions, 1.0);
    let mut f = Coords::zeros(pos.len());
    coulomb::accumulate_forces(&pos, &mut f);
    Ok(f.to_rows(k))
}

/// Total lab-frame force (N): static trap, rotating wall at phase
/// `omega_r t`, Lorentz force and Coulomb interaction.
pub fn lab_frame_force(state: &CrystalState, field: &ForceField) -> Result<Vec<[f64; 3]>> {
    state.validate()?;
    check_positions(&state.positions)?;
    let units = field.units();
    let mut kernel = field.kernel()?;
    let pos = Coords::from_rows(&state.positions, 1.0 / units.length_scale);
    let mut acc = Coords::zeros(pos.len());
    kernel.electric_accel(&pos, units.time_from_si(state.time), &mut acc);
    let fs = units.force_scale();
    let qb = field.species.charge * field.trap.b_field;
    Ok((0..pos.len())
        .map(|i| {
            let v = state.velocities[i];
            // q v x B with B = B z
            [
                acc.x[i] * fs + qb * v[1],
                acc.y[i] * fs - qb * v[0],
                acc.z[i] * fs,
            ]
        })
        .collect())
}

/// Rotating-frame potential `sum m wz^2 (z^2 + (beta+delta) x^2 + (beta-delta) y^2)/2`
/// plus the Coulomb energy (J).
pub fn rotating_potential_energy(
    positions_rot: &[[f64; 3]],
    trap: &TrapParams,
    species: &SpeciesParams,
) -> Result<f64> {
    let units = UnitSystem::new(species, trap.omega_z);
    let scaled = ScaledTrap::new(trap, species)?;
    let pos = Coords::from_rows(positions_rot, 1.0 / units.length_scale);
    Ok(units.energy_to_si(rotating_energy(&pos, &scaled)?))
}

/// Rotating-frame force `-grad U_r` (N) on every ion, the residual that
/// vanishes at an equilibrium.
pub fn rotating_force(
    positions_rot: &[[f64; 3]],
    trap: &TrapParams,
    species: &SpeciesParams,
) -> Result<Vec<[f64; 3]>> {
    check_positions(positions_rot)?;
    let units = UnitSystem::new(species, trap.omega_z);
    let scaled = ScaledTrap::new(trap, species)?;
    let pos = Coords::from_rows(positions_rot, 1.0 / units.length_scale);
    let mut grad = Coords::zeros(pos.len());
    rotating_gradient(&pos, &scaled, &mut grad);
    Ok(grad.to_rows(-units.force_scale()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{coulomb_strength, default_nist_params};
    use alloc::vec;

    #[test]
    fn two_ion_pair_values() {
        let (s, _) = default_nist_params();
        let d = 10e-6;
        let p = vec![[0.0, 0.0, 0.0], [d, 0.0, 0.0]];
        let u = coulomb_potential(&p, &s).unwrap();
        let k = coulomb_strength(s.charge);
        assert!(((u - k / d) / u).abs() < 1e-14);
        assert!((u - 2.307e-23).abs() < 0.001e-23);
        let f = coulomb_force(&p, &s).unwrap();
        assert!((f[1][0] - 2.307e-18).abs() < 0.001e-18);
        assert!(f[0][0] < 0.0 && f[1][0] > 0.0);
        assert_eq!(coulomb_potential(&p[..1], &s).unwrap(), 0.0);
    }

    #[test]
    fn coulomb_potential_scaling() {
        let (s, _) = default_nist_params();
        let p = vec![[1e-6, 2e-6, 0.0], [-3e-6, 1e-6, 1e-7], [0.5e-6, -4e-6, 0.0]];
        let p2: Vec<[f64; 3]> = p.iter().map(|r| [2.0 * r[0], 2.0 * r[1], 2.0 * r[2]]).collect();
        let u1 = coulomb_potential(&p, &s).unwrap();
        let u2 = coulomb_potential(&p2, &s).unwrap();
        assert!((u2 - 0.5 * u1).abs() < 1e-14 * u1);
    }

    #[test]
    fn coincident_ions_rejected() {
        let (s, t) = default_nist_params();
        let p = vec![[1e-6, 0.0, 0.0], [1e-6, 0.0, 0.0]];
        assert!(matches!(coulomb_potential(&p, &s), Err(Error::CoincidentIons { .. })));
        assert!(coulomb_force(&p, &s).is_err());
        assert!(rotating_potential_energy(&p, &t, &s).is_err());
        let st = CrystalState::at_rest(0.0, p).unwrap();
        assert!(lab_frame_force(&st, &ForceField::full(t, s)).is_err());
    }

    #[test]
    fn single_ion_lab_forces() {
        let (s, t) = default_nist_params();
        let field = ForceField::full(t, s);
        let st = CrystalState::at_rest(1.234e-6, vec![[0.0; 3]]).unwrap();
        let f = lab_frame_force(&st, &field).unwrap();
        assert_eq!(f[0], [0.0, 0.0, 0.0]);

        let v = 3.0;
        let st = CrystalState::new(0.0, vec![[0.0; 3]], vec![[v, 0.0, 0.0]]).unwrap();
        let f = lab_frame_force(&st, &field).unwrap();
        let expected = -s.charge * v * t.b_field;
        assert!((f[0][1] - expected).abs() < 1e-12 * expected.abs());
        assert_eq!(f[0][0], 0.0);

        let mut t0 = t;
        t0.delta = 0.0;
        let z = 1e-6;
        let st = CrystalState::at_rest(0.0, vec![[0.0, 0.0, z]]).unwrap();
        let f = lab_frame_force(&st, &ForceField::full(t0, s)).unwrap();
        let expected = -s.mass * t.omega_z * t.omega_z * z;
        assert!(((f[0][2] - expected) / expected).abs() < 1e-12);
    }

    #[test]
    fn rotating_energy_single_ion() {
        let (s, t) = default_nist_params();
        assert_eq!(rotating_potential_energy(&[[0.0; 3]], &t, &s).unwrap(), 0.0);
        let x = 2e-6;
        let e = rotating_potential_energy(&[[x, 0.0, 0.0]], &t, &s).unwrap();
        let beta = t.beta(&s).unwrap();
        let expected = 0.5 * s.mass * t.omega_z * t.omega_z * (beta + t.delta) * x * x;
        assert!(((e - expected) / expected).abs() < 1e-12);
    }
}
