//! Stochastic Doppler cooling: per-step photon scattering with absorption
//! kicks along the beam and isotropic spontaneous-emission recoil.

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::math;
use crate::params::{SpeciesParams, UnitSystem, HBAR};
use crate::state::{Coords, CrystalState};

/// Intensity profile transverse to the beam.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BeamProfile {
    Uniform,
    /// `S = S0 exp(-2 (r . offset_axis - offset)^2 / waist^2)`.
    Gaussian {
        waist: f64,
        offset_axis: [f64; 3],
        offset: f64,
    },
}

/// A single cooling beam. All fields SI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaserBeam {
    /// Unit propagation direction.
    pub direction: [f64; 3],
    /// Laser minus atomic frequency (rad/s); negative is red.
    pub detuning: f64,
    pub peak_saturation: f64,
    pub profile: BeamProfile,
    /// rad/m
    pub wavevector: f64,
}

fn norm(v: &[f64; 3]) -> f64 {
    math::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

impl LaserBeam {
    pub fn validate(&self) -> Result<()> {
        if (norm(&self.direction) - 1.0).abs() > 1e-9 {
            return Err(invalid("direction", "must be a unit vector"));
        }
        if !(self.peak_saturation.is_finite() && self.peak_saturation >= 0.0) {
            return Err(invalid("peak_saturation", "must be finite and non-negative"));
        }
        if !self.detuning.is_finite() {
            return Err(invalid("detuning", "must be finite"));
        }
        if !(self.wavevector.is_finite() && self.wavevector > 0.0) {
            return Err(invalid("wavevector", "must be finite and positive"));
        }
        if let BeamProfile::Gaussian {
            waist,
            offset_axis,
            offset,
        } = self.profile
        {
            if !(waist.is_finite() && waist > 0.0) {
                return Err(invalid("waist", "must be finite and positive"));
            }
            if (norm(&offset_axis) - 1.0).abs() > 1e-9 {
                return Err(invalid("offset_axis", "must be a unit vector"));
            }
            if !offset.is_finite() {
                return Err(invalid("offset", "must be finite"));
            }
        }
        Ok(())
    }

    /// Local saturation parameter at lab position `r` (m).
    pub fn saturation(&self, r: &[f64; 3]) -> f64 {
        match self.profile {
            BeamProfile::Uniform => self.peak_saturation,
            BeamProfile::Gaussian {
                waist,
                offset_axis,
                offset,
            } => {
                let d = dot(r, &offset_axis) - offset;
                self.peak_saturation * math::exp(-2.0 * d * d / (waist * waist))
            }
        }
    }
}

/// Beams plus the seed of the scattering random stream.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CoolingConfig {
    pub beams: Vec<LaserBeam>,
    pub rng_seed: u64,
}

impl CoolingConfig {
    pub fn validate(&self) -> Result<()> {
        self.beams.iter().try_for_each(LaserBeam::validate)
    }
}

/// The NIST geometry: a planar Gaussian beam along +x (waist 30 um, offset
/// 20 um along y, S = 1, detuning -2 pi 40 MHz) and two uniform axial beams
/// along +z and -z (S = 5e-3, detuning -gamma0/2).
pub fn nist_beam_set(species: &SpeciesParams) -> CoolingConfig {
    let k = species.wavevector();
    let axial = |dz: f64| LaserBeam {
        direction: [0.0, 0.0, dz],
        detuning: -0.5 * species.natural_linewidth,
        peak_saturation: 5e-3,
        profile: BeamProfile::Uniform,
        wavevector: k,
    };
    CoolingConfig {
        beams: alloc::vec![
            LaserBeam {
                direction: [1.0, 0.0, 0.0],
                detuning: -2.0 * PI * 40e6,
                peak_saturation: 1.0,
                profile: BeamProfile::Gaussian {
                    waist: 30e-6,
                    offset_axis: [0.0, 1.0, 0.0],
                    offset: 20e-6,
                },
                wavevector: k,
            },
            axial(1.0),
            axial(-1.0),
        ],
        rng_seed: 0,
    }
}

/// Two-level scattering rate (1/s) for an ion at lab position `r` (m)
/// moving with lab velocity `v` (m/s).
pub fn scattering_rate(beam: &LaserBeam, r: &[f64; 3], v: &[f64; 3], species: &SpeciesParams) -> f64 {
    let gamma = species.natural_linewidth;
    let s = beam.saturation(r);
    let eff = beam.detuning - beam.wavevector * dot(&beam.direction, v);
    let x = 2.0 * eff / gamma;
    0.5 * gamma * s / (1.0 + s + x * x)
}

/// Draw scattering events for one step of length `dt` (s) and apply the
/// kicks to the velocities of `state`. Returns the number of events.
pub fn apply_scattering(
    state: &mut CrystalState,
    cfg: &CoolingConfig,
    species: &SpeciesParams,
    dt: f64,
    rng: &mut ChaCha8Rng,
) -> Result<u64> {
    cfg.validate()?;
    let mut events = 0;
    for i in 0..state.n_ions() {
        for (b, beam) in cfg.beams.iter().enumerate() {
            let p = scattering_rate(beam, &state.positions[i], &state.velocities[i], species) * dt;
            if p > 0.1 {
                return Err(Error::ScatterProbability {
                    probability: p,
                    beam: b,
                    ion: i,
                });
            }
            if rng.random::<f64>() < p {
                events += 1;
                let kick = HBAR * beam.wavevector / species.mass;
                let n = isotropic(rng);
                for a in 0..3 {
                    state.velocities[i][a] += kick * (beam.direction[a] + n[a]);
                }
            }
        }
    }
    Ok(events)
}

fn isotropic(rng: &mut ChaCha8Rng) -> [f64; 3] {
    let cz = 2.0 * rng.random::<f64>() - 1.0;
    let phi = 2.0 * PI * rng.random::<f64>();
    let sz = math::sqrt((1.0 - cz * cz).max(0.0));
    let (s, c) = math::sin_cos(phi);
    [sz * c, sz * s, cz]
}

struct ScaledBeam {
    dir: [f64; 3],
    detuning: f64,
    s0: f64,
    gaussian: Option<([f64; 3], f64, f64)>,
    k: f64,
    kick: f64,
}

/// Dimensionless scattering for the time loop. Draws follow the same
/// order as [`apply_scattering`]: ions outer, beams inner, one uniform per
/// pair plus two for the emission direction on a hit.
pub(crate) struct ScatterKernel {
    beams: Vec<ScaledBeam>,
    gamma: f64,
    dt: f64,
}

impl ScatterKernel {
    pub fn new(cfg: &CoolingConfig, species: &SpeciesParams, units: &UnitSystem, dt: f64) -> Result<Self> {
        cfg.validate()?;
        let l0 = units.length_scale;
        let beams = cfg
            .beams
            .iter()
            .map(|b| ScaledBeam {
                dir: b.direction,
                detuning: b.detuning * units.time_scale,
                s0: b.peak_saturation,
                gaussian: match b.profile {
                    BeamProfile::Uniform => None,
                    BeamProfile::Gaussian {
                        waist,
                        offset_axis,
                        offset,
                    } => Some((offset_axis, offset / l0, 2.0 * l0 * l0 / (waist * waist))),
                },
                k: b.wavevector * l0,
                kick: HBAR * b.wavevector / species.mass / units.velocity_scale(),
            })
            .collect();
        Ok(Self {
            beams,
            gamma: species.natural_linewidth * units.time_scale,
            dt,
        })
    }

    /// Apply one step of scattering; `step` only labels errors.
    pub fn apply(&self, pos: &Coords, vel: &mut Coords, rng: &mut ChaCha8Rng) -> Result<u64> {
        let mut events = 0;
        for i in 0..pos.len() {
            let r = [pos.x[i], pos.y[i], pos.z[i]];
            for (b, beam) in self.beams.iter().enumerate() {
                let s = match beam.gaussian {
                    None => beam.s0,
                    Some((axis, off, inv)) => {
                        let d = dot(&r, &axis) - off;
                        beam.s0 * math::exp(-d * d * inv)
                    }
                };
                let v = [vel.x[i], vel.y[i], vel.z[i]];
                let x = 2.0 * (beam.detuning - beam.k * dot(&beam.dir, &v)) / self.gamma;
                let p = 0.5 * self.gamma * s / (1.0 + s + x * x) * self.dt;
                if p > 0.1 {
                    return Err(Error::ScatterProbability {
                        probability: p,
                        beam: b,
                        ion: i,
                    });
                }
                if rng.random::<f64>() < p {
                    events += 1;
                    let n = isotropic(rng);
                    vel.x[i] += beam.kick * (beam.dir[0] + n[0]);
                    vel.y[i] += beam.kick * (beam.dir[1] + n[1]);
                    vel.z[i] += beam.kick * (beam.dir[2] + n[2]);
                }
            }
        }
        Ok(events)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn nist_profile_values() {
        let s = SpeciesParams::beryllium9();
        let cfg = nist_beam_set(&s);
        let planar = &cfg.beams[0];
        assert!((planar.saturation(&[0.0, 20e-6, 0.0]) - 1.0).abs() < 1e-15);
        let e2 = planar.saturation(&[3e-6, 50e-6, 1e-6]);
        assert!((e2 - (-2.0f64).exp()).abs() < 1e-12);
        assert!((cfg.beams[1].detuning + 2.0 * PI * 9e6).abs() < 1e-6);
        assert_eq!(cfg.beams[1].direction, [0.0, 0.0, 1.0]);
        assert_eq!(cfg.beams[2].direction, [0.0, 0.0, -1.0]);
    }

    #[test]
    fn rate_values() {
        let s = SpeciesParams::beryllium9();
        let g = s.natural_linewidth;
        let beam = LaserBeam {
            direction: [1.0, 0.0, 0.0],
            detuning: -g / 2.0,
            peak_saturation: 1.0,
            profile: BeamProfile::Uniform,
            wavevector: s.wavevector(),
        };
        let r = scattering_rate(&beam, &[0.0; 3], &[0.0; 3], &s);
        assert!((r - g / 6.0).abs() < 1e-9 * r);
        let weak = LaserBeam {
            peak_saturation: 1e-9,
            ..beam
        };
        let r = scattering_rate(&weak, &[0.0; 3], &[0.0; 3], &s);
        assert!((r - 0.5 * g * 1e-9 / 2.0).abs() < 1e-8 * r);
        let away = scattering_rate(&beam, &[0.0; 3], &[5.0, 0.0, 0.0], &s);
        let toward = scattering_rate(&beam, &[0.0; 3], &[-5.0, 0.0, 0.0], &s);
        assert!(away < toward);
    }

    #[test]
    fn no_beams_no_change() {
        let s = SpeciesParams::beryllium9();
        let mut st = CrystalState::new(0.0, alloc::vec![[1e-6, 0.0, 0.0]], alloc::vec![[1.0, 2.0, 3.0]]).unwrap();
        let before = st.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = apply_scattering(&mut st, &CoolingConfig::default(), &s, 1e-9, &mut rng).unwrap();
        assert_eq!(n, 0);
        assert_eq!(st, before);
    }

    #[test]
    fn probability_bound_enforced() {
        let s = SpeciesParams::beryllium9();
        let cfg = nist_beam_set(&s);
        let mut st = CrystalState::at_rest(0.0, alloc::vec![[0.0, 20e-6, 0.0]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = apply_scattering(&mut st, &cfg, &s, 1e-7, &mut rng);
        assert!(matches!(r, Err(Error::ScatterProbability { beam: 0, .. })));
    }
}
