//! Physical constants, ion and trap parameters, and the dimensionless unit
//! system used by every kernel in the crate.

use core::f64::consts::PI;

use crate::error::{invalid, Result};
use crate::math;

/// Elementary charge (C).
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Boltzmann constant (J/K).
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Reduced Planck constant (J s).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Vacuum permittivity (F/m).
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;
/// Unified atomic mass unit (kg).
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
/// Electron mass (kg).
pub const ELECTRON_MASS: f64 = 9.109_383_701_5e-31;

/// Coulomb constant times e^2, `e^2 / (4 pi eps0)` in J m.
pub fn coulomb_strength(charge: f64) -> f64 {
    charge * charge / (4.0 * PI * EPSILON_0)
}

/// Ion species: mass, charge and the cooling transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeciesParams {
    /// kg
    pub mass: f64,
    /// C
    pub charge: f64,
    /// m
    pub transition_wavelength: f64,
    /// rad/s
    pub natural_linewidth: f64,
}

impl SpeciesParams {
    pub fn new(
        mass: f64,
        charge: f64,
        transition_wavelength: f64,
        natural_linewidth: f64,
    ) -> Result<Self> {
        let s = Self {
            mass,
            charge,
            transition_wavelength,
            natural_linewidth,
        };
        s.validate()?;
        Ok(s)
    }

    /// Singly ionized beryllium-9 cooled on the 313 nm S1/2 -> P3/2 line.
    pub fn beryllium9() -> Self {
        Self {
            mass: 9.012_183_1 * ATOMIC_MASS_UNIT - ELECTRON_MASS,
            charge: ELEMENTARY_CHARGE,
            transition_wavelength: 313e-9,
            natural_linewidth: 2.0 * PI * 18e6,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("mass", self.mass),
            ("charge", self.charge),
            ("transition_wavelength", self.transition_wavelength),
            ("natural_linewidth", self.natural_linewidth),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(name, "must be finite and strictly positive"));
            }
        }
        Ok(())
    }

    /// Wavevector magnitude `2 pi / lambda` (rad/m).
    pub fn wavevector(&self) -> f64 {
        2.0 * PI / self.transition_wavelength
    }

    /// Doppler cooling limit `hbar gamma0 / (2 k_B)` (K).
    pub fn doppler_limit(&self) -> f64 {
        HBAR * self.natural_linewidth / (2.0 * BOLTZMANN)
    }

    /// Single-photon recoil velocity `hbar k / m` (m/s).
    pub fn recoil_velocity(&self) -> f64 {
        HBAR * self.wavevector() / self.mass
    }
}

/// Trap configuration. `delta` is the absolute wall anisotropy; use
/// [`TrapParams::with_delta_ratio`] to configure it relative to beta.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrapParams {
    /// T
    pub b_field: f64,
    /// Axial trap frequency (rad/s).
    pub omega_z: f64,
    /// Rotating wall frequency (rad/s).
    pub omega_r: f64,
    /// Dimensionless wall anisotropy.
    pub delta: f64,
}

impl TrapParams {
    /// Build a trap whose anisotropy is `delta_over_beta * beta(omega_r)`.
    pub fn with_delta_ratio(
        b_field: f64,
        omega_z: f64,
        omega_r: f64,
        delta_over_beta: f64,
        species: &SpeciesParams,
    ) -> Result<Self> {
        let mut trap = Self {
            b_field,
            omega_z,
            omega_r,
            delta: 0.0,
        };
        trap.delta = delta_over_beta * beta_from_wall(&trap, species)?;
        trap.validate(species)?;
        Ok(trap)
    }

    /// Same trap at a different wall frequency, with delta rescaled so that
    /// `delta/beta` stays fixed.
    pub fn retuned(&self, omega_r: f64, species: &SpeciesParams) -> Result<Self> {
        let ratio = self.delta / beta_from_wall(self, species)?;
        Self::with_delta_ratio(self.b_field, self.omega_z, omega_r, ratio, species)
    }

    pub fn omega_c(&self, species: &SpeciesParams) -> f64 {
        species.charge * self.b_field / species.mass
    }

    pub fn beta(&self, species: &SpeciesParams) -> Result<f64> {
        beta_from_wall(self, species)
    }

    /// Checks the confinement condition `beta > delta >= 0`.
    pub fn validate(&self, species: &SpeciesParams) -> Result<()> {
        species.validate()?;
        if !(self.b_field.is_finite() && self.b_field > 0.0) {
            return Err(invalid("b_field", "must be finite and positive"));
        }
        if !(self.omega_z.is_finite() && self.omega_z > 0.0) {
            return Err(invalid("omega_z", "must be finite and positive"));
        }
        let beta = beta_from_wall(self, species)?;
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return Err(invalid("delta", "must be finite and non-negative"));
        }
        if beta <= self.delta {
            return Err(invalid(
                "omega_r",
                alloc::format!("beta = {beta:.6} does not exceed delta = {:.6}", self.delta),
            ));
        }
        Ok(())
    }
}

/// Planar confinement strength `omega_r (omega_c - omega_r) / omega_z^2 - 1/2`.
pub fn beta_from_wall(trap: &TrapParams, species: &SpeciesParams) -> Result<f64> {
    let wc = trap.omega_c(species);
    let wr = trap.omega_r;
    if !(wr.is_finite() && wr > 0.0 && wr < wc) {
        return Err(invalid(
            "omega_r",
            alloc::format!("must lie in (0, omega_c = {wc:.6e} rad/s), got {wr:.6e}"),
        ));
    }
    Ok(wr * (wc - wr) / (trap.omega_z * trap.omega_z) - 0.5)
}

/// Wall anisotropy ratio used for every crystal in the NIST configuration.
pub const NIST_DELTA_OVER_BETA: f64 = 0.25;
/// Typical NIST rotating wall frequency (rad/s).
pub const NIST_OMEGA_R: f64 = 2.0 * PI * 180e3;

/// Beryllium-9 in the NIST Penning trap (B = 4.4588 T, omega_z = 2 pi 1.58 MHz)
/// with the wall at 2 pi 180 kHz and `delta/beta = 0.25`.
pub fn default_nist_params() -> (SpeciesParams, TrapParams) {
    let species = SpeciesParams::beryllium9();
    let trap = TrapParams::with_delta_ratio(
        4.4588,
        2.0 * PI * 1.58e6,
        NIST_OMEGA_R,
        NIST_DELTA_OVER_BETA,
        &species,
    )
    .expect("NIST parameters are valid");
    (species, trap)
}

/// Energy per ion expressed as a temperature: `T = E / (N k_B)`.
pub fn energy_to_temperature(energy: f64, n_ions: usize) -> f64 {
    energy / (n_ions as f64 * BOLTZMANN)
}

/// Inverse of [`energy_to_temperature`].
pub fn temperature_to_energy(temperature: f64, n_ions: usize) -> f64 {
    temperature * (n_ions as f64 * BOLTZMANN)
}

/// Natural scales of a Coulomb crystal in a harmonic well of frequency omega_z.
///
/// With `l0 = (e^2 / (4 pi eps0 m omega_z^2))^(1/3)` the pair energy is
/// `1/r` and the axial well is `z^2/2` in units of `m omega_z^2 l0^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitSystem {
    /// m
    pub length_scale: f64,
    /// s
    pub time_scale: f64,
    /// J
    pub energy_scale: f64,
    pub mass: f64,
}

impl UnitSystem {
    pub fn new(species: &SpeciesParams, omega_z: f64) -> Self {
        let k = coulomb_strength(species.charge);
        let l0 = math::cbrt(k / (species.mass * omega_z * omega_z));
        Self {
            length_scale: l0,
            time_scale: 1.0 / omega_z,
            energy_scale: species.mass * omega_z * omega_z * l0 * l0,
            mass: species.mass,
        }
    }

    pub fn velocity_scale(&self) -> f64 {
        self.length_scale / self.time_scale
    }

    pub fn force_scale(&self) -> f64 {
        self.energy_scale / self.length_scale
    }

    /// Scale for Hessian entries (J/m^2).
    pub fn stiffness_scale(&self) -> f64 {
        self.energy_scale / (self.length_scale * self.length_scale)
    }

    pub fn frequency_scale(&self) -> f64 {
        1.0 / self.time_scale
    }

    pub fn length_to_si(&self, x: f64) -> f64 {
        x * self.length_scale
    }
    pub fn length_from_si(&self, x: f64) -> f64 {
        x / self.length_scale
    }
    pub fn velocity_to_si(&self, v: f64) -> f64 {
        v * self.velocity_scale()
    }
    pub fn velocity_from_si(&self, v: f64) -> f64 {
        v / self.velocity_scale()
    }
    pub fn time_to_si(&self, t: f64) -> f64 {
        t * self.time_scale
    }
    pub fn time_from_si(&self, t: f64) -> f64 {
        t / self.time_scale
    }
    pub fn energy_to_si(&self, e: f64) -> f64 {
        e * self.energy_scale
    }
    pub fn energy_from_si(&self, e: f64) -> f64 {
        e / self.energy_scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trap(omega_r_khz: f64) -> (SpeciesParams, TrapParams) {
        // omega_c pinned to 2 pi 7.6 MHz through the field.
        let species = SpeciesParams::beryllium9();
        let b = 2.0 * PI * 7.6e6 * species.mass / species.charge;
        let trap = TrapParams {
            b_field: b,
            omega_z: 2.0 * PI * 1.58e6,
            omega_r: 2.0 * PI * omega_r_khz * 1e3,
            delta: 0.0,
        };
        (species, trap)
    }

    #[test]
    fn beta_reference_values() {
        // Direct evaluation: (0.18 * 7.42) / 1.58^2 - 0.5 and (0.204 * 7.396) / 1.58^2 - 0.5.
        let (s, t) = trap(180.0);
        let expected = 0.18 * (7.6 - 0.18) / (1.58 * 1.58) - 0.5;
        assert!((beta_from_wall(&t, &s).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 0.0350).abs() < 5e-5);

        let (s, t) = trap(204.0);
        let expected = 0.204 * (7.6 - 0.204) / (1.58 * 1.58) - 0.5;
        assert!((beta_from_wall(&t, &s).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 0.1044).abs() < 5e-5);
    }

    #[test]
    fn beta_vanishes_at_root() {
        let (s, mut t) = trap(0.0 + 1.0);
        let wc = t.omega_c(&s);
        let wz = t.omega_z;
        // omega_r (omega_c - omega_r) = omega_z^2 / 2, smaller root
        t.omega_r = 0.5 * (wc - (wc * wc - 2.0 * wz * wz).sqrt());
        assert!(beta_from_wall(&t, &s).unwrap().abs() < 1e-12);
    }

    #[test]
    fn beta_symmetric_under_reflection() {
        let (s, mut t) = trap(190.0);
        let b1 = beta_from_wall(&t, &s).unwrap();
        t.omega_r = t.omega_c(&s) - t.omega_r;
        let b2 = beta_from_wall(&t, &s).unwrap();
        assert!((b1 - b2).abs() < 1e-12 * b1.abs().max(1.0));
    }

    #[test]
    fn beta_rejects_out_of_range() {
        let (s, mut t) = trap(180.0);
        t.omega_r = 0.0;
        assert!(beta_from_wall(&t, &s).is_err());
        t.omega_r = t.omega_c(&s);
        assert!(beta_from_wall(&t, &s).is_err());
        t.omega_r = -1.0;
        assert!(beta_from_wall(&t, &s).is_err());
    }

    #[test]
    fn nist_defaults() {
        let (s, t) = default_nist_params();
        let fc = t.omega_c(&s) / (2.0 * PI);
        assert!((fc - 7.60e6).abs() < 0.01e6, "f_c = {fc}");
        let beta = t.beta(&s).unwrap();
        assert!((t.delta / beta - 0.25).abs() < 1e-14);
        let retuned = t.retuned(2.0 * PI * 204e3, &s).unwrap();
        assert!((retuned.delta / retuned.beta(&s).unwrap() - 0.25).abs() < 1e-14);
        let td = s.doppler_limit();
        assert!((td - 0.43e-3).abs() < 0.005e-3, "T_D = {td}");
    }

    #[test]
    fn delta_must_stay_below_beta() {
        let (s, t) = default_nist_params();
        let bad = TrapParams::with_delta_ratio(t.b_field, t.omega_z, t.omega_r, 1.0, &s);
        assert!(bad.is_err());
    }

    #[test]
    fn unit_round_trip() {
        let (s, t) = default_nist_params();
        let u = UnitSystem::new(&s, t.omega_z);
        // l0 ~ 5.4 um for Be+ at 1.58 MHz
        assert!(u.length_scale > 5.0e-6 && u.length_scale < 6.0e-6);
        for x in [1e-9, 3.7e-6, 2.5e-4] {
            let r = u.length_to_si(u.length_from_si(x));
            assert!(((r - x) / x).abs() < 1e-12);
        }
        for v in [1e-3, 25.0] {
            let r = u.velocity_to_si(u.velocity_from_si(v));
            assert!(((r - v) / v).abs() < 1e-12);
        }
        let e = 1.3e-25;
        assert!(((u.energy_to_si(u.energy_from_si(e)) - e) / e).abs() < 1e-12);
        // pair energy at distance l0 equals the energy scale
        let k = coulomb_strength(s.charge);
        assert!(((k / u.length_scale - u.energy_scale) / u.energy_scale).abs() < 1e-12);
    }

    #[test]
    fn temperature_conversion_round_trips() {
        let e = temperature_to_energy(10e-3, 54);
        assert_eq!(energy_to_temperature(e, 54), 10e-3);
        assert!((temperature_to_energy(10e-3, 1) - 1.380649e-25).abs() < 1e-35);
    }
}
