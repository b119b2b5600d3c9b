//! Time evolution with diagnostics sampled in the rotating frame.

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::equilibrium::{find_equilibrium, EquilibriumConfig, EquilibriumOptions, SiteCheck};
use crate::error::{invalid, Error, Result};
use crate::forces::{rotating_energy, CoulombMode, ForceField, ScaledTrap};
use crate::frame::coords_to_rotating;
use crate::integrator::Boris;
use crate::laser::{CoolingConfig, ScatterKernel};
use crate::linear::LinearizedCoulomb;
use crate::modes::{BranchTemperatures, ModeDecomposition};
use crate::params::{SpeciesParams, TrapParams, UnitSystem, BOLTZMANN};
use crate::state::{Coords, CrystalState, Phase};

/// How the crystal is initialized.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    /// Every mode at `k_B T` of its branch with random phases.
    ThermalBranches { temps: BranchTemperatures, seed: u64 },
    /// A given lab-frame state; its time is the start time.
    Explicit(CrystalState),
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub n_ions: usize,
    pub trap: TrapParams,
    pub species: SpeciesParams,
    pub coulomb_mode: CoulombMode,
    pub cooling: Option<CoolingConfig>,
    /// s
    pub dt: f64,
    /// Total evolution time (s).
    pub duration: f64,
    /// s; rounded to a whole number of steps.
    pub sample_interval: f64,
    pub initial_state: InitialState,
    pub equilibrium: EquilibriumOptions,
    /// Per-mode energy above which the crystal counts as reconfigured (J).
    pub reconfiguration_bound: f64,
    /// Upper bound on `omega_c dt`.
    pub max_cyclotron_phase: f64,
}

impl RunConfig {
    /// Defaults: 1 ns steps, 1 us samples, no lasers, full Coulomb.
    pub fn new(n_ions: usize, trap: TrapParams, species: SpeciesParams, duration: f64) -> Self {
        Self {
            n_ions,
            trap,
            species,
            coulomb_mode: CoulombMode::Full,
            cooling: None,
            dt: 1e-9,
            duration,
            sample_interval: 1e-6,
            initial_state: InitialState::ThermalBranches {
                temps: BranchTemperatures::default(),
                seed: 0,
            },
            equilibrium: EquilibriumOptions::default(),
            reconfiguration_bound: BOLTZMANN,
            max_cyclotron_phase: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_ions == 0 {
            return Err(invalid("n_ions", "must be at least 1"));
        }
        self.trap.validate(&self.species)?;
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(invalid("dt", "must be finite and positive"));
        }
        let phase = self.trap.omega_c(&self.species) * self.dt;
        if phase > self.max_cyclotron_phase {
            return Err(invalid(
                "dt",
                alloc::format!(
                    "omega_c dt = {phase:.4} exceeds {}; use a smaller step",
                    self.max_cyclotron_phase
                ),
            ));
        }
        if !(self.duration.is_finite() && self.duration >= 0.0) {
            return Err(invalid("duration", "must be finite and non-negative"));
        }
        if !(self.sample_interval.is_finite() && self.sample_interval >= self.dt) {
            return Err(invalid("sample_interval", "must be at least dt"));
        }
        if let Some(c) = &self.cooling {
            c.validate()?;
        }
        if let InitialState::ThermalBranches { temps, .. } = &self.initial_state {
            temps.validate()?;
        }
        if let InitialState::Explicit(s) = &self.initial_state {
            s.validate()?;
            if s.n_ions() != self.n_ions {
                return Err(Error::Shape(alloc::format!(
                    "initial state has {} ions, config has {}",
                    s.n_ions(),
                    self.n_ions
                )));
            }
        }
        Ok(())
    }

    pub fn n_steps(&self) -> u64 {
        crate::math::round(self.duration / self.dt) as u64
    }

    pub fn sample_every(&self) -> u64 {
        (crate::math::round(self.sample_interval / self.dt) as u64).max(1)
    }
}

/// Rotating-frame diagnostics, all energies per ion in kelvin.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DiagnosticsSeries {
    /// s
    pub times: Vec<f64>,
    pub ke_perp: Vec<f64>,
    pub ke_par: Vec<f64>,
    /// Potential energy above the equilibrium.
    pub pe: Vec<f64>,
    /// Absent once the crystal has reconfigured or without a planar
    /// equilibrium.
    pub branch_temps: Vec<Option<BranchTemperatures>>,
    /// Scattering events per second over the preceding interval.
    pub event_rate: Vec<f64>,
    /// Time of the first sample that failed the reconfiguration check.
    pub reconfigured_at: Option<f64>,
}

impl DiagnosticsSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `ke_perp + ke_par + pe`, the conserved quantity without lasers.
    pub fn total(&self) -> Vec<f64> {
        (0..self.len())
            .map(|k| self.ke_perp[k] + self.ke_par[k] + self.pe[k])
            .collect()
    }

    /// Mean of `series` over samples with `t >= t_from`.
    pub fn mean_after(series: &[f64], times: &[f64], t_from: f64) -> f64 {
        let (mut s, mut n) = (0.0, 0usize);
        for (v, t) in series.iter().zip(times) {
            if *t >= t_from - 1e-15 {
                s += v;
                n += 1;
            }
        }
        if n == 0 {
            f64::NAN
        } else {
            s / n as f64
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub diagnostics: DiagnosticsSeries,
    pub final_state: CrystalState,
    pub equilibrium: EquilibriumConfig,
    pub modes: Option<ModeDecomposition>,
    pub scatter_events: u64,
    pub steps: u64,
}

/// Equilibrium, modes and initial state shared by runs with the same trap.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub equilibrium: EquilibriumConfig,
    pub modes: Option<ModeDecomposition>,
    pub initial: CrystalState,
}

/// Find the equilibrium and build the initial state.
pub fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    cfg.validate()?;
    let eq = find_equilibrium(cfg.n_ions, &cfg.trap, &cfg.species, &cfg.equilibrium)?;
    prepare_with_equilibrium(cfg, eq)
}

/// Like [`prepare`] with a known equilibrium.
pub fn prepare_with_equilibrium(cfg: &RunConfig, eq: EquilibriumConfig) -> Result<Prepared> {
    cfg.validate()?;
    if eq.n_ions() != cfg.n_ions || eq.trap != cfg.trap || eq.species != cfg.species {
        return Err(invalid("equilibrium", "does not match the run configuration"));
    }
    let modes = if eq.planar {
        Some(ModeDecomposition::new(&eq)?)
    } else {
        None
    };
    let initial = initial_state(cfg, &eq, modes.as_ref())?;
    Ok(Prepared {
        equilibrium: eq,
        modes,
        initial,
    })
}

/// Initial state for `cfg` given an equilibrium and its modes.
pub fn initial_state(
    cfg: &RunConfig,
    eq: &EquilibriumConfig,
    modes: Option<&ModeDecomposition>,
) -> Result<CrystalState> {
    match &cfg.initial_state {
        InitialState::Explicit(s) => Ok(s.clone()),
        InitialState::ThermalBranches { temps, seed } => {
            let dec = modes.ok_or(Error::NotPlanar {
                max_z: eq.max_abs_z(),
            })?;
            crate::modes::synthesize_thermal_state(dec, temps, *seed)
        }
    }
}

/// Prepare and evolve.
pub fn run(cfg: &RunConfig) -> Result<RunOutput> {
    let prep = prepare(cfg)?;
    run_prepared(&prep, cfg, 0, |_, _, _| {})
}

struct Sampler {
    units: UnitSystem,
    trap: ScaledTrap,
    omega_r: f64,
    n: usize,
    u_eq: f64,
    x_eq: Coords,
    /// Absent for linearized runs: with linear forces ions have no lattice
    /// sites to leave, and the mode energies are the only meaningful check.
    sites: Option<SiteCheck>,
    pos_rot: Coords,
    vel_rot: Coords,
    projector: Option<crate::modes::Projector>,
    bound: f64,
}

impl Sampler {
    fn sample(&mut self, phase: &Phase, out: &mut DiagnosticsSeries, rate: f64, dec: Option<&ModeDecomposition>) -> Result<()> {
        coords_to_rotating(&phase.pos, &phase.vel, self.omega_r, phase.time, &mut self.pos_rot, &mut self.vel_rot);
        let (mut kp, mut kz) = (0.0, 0.0);
        for i in 0..self.n {
            let (vx, vy, vz) = (self.vel_rot.x[i], self.vel_rot.y[i], self.vel_rot.z[i]);
            kp += 0.5 * (vx * vx + vy * vy);
            kz += 0.5 * vz * vz;
        }
        let u = rotating_energy(&self.pos_rot, &self.trap)?;
        let to_k = |e: f64| self.units.energy_to_si(e) / (self.n as f64 * BOLTZMANN);
        out.times.push(self.units.time_to_si(phase.time));
        out.ke_perp.push(to_k(kp));
        out.ke_par.push(to_k(kz));
        out.pe.push(to_k(u - self.u_eq));
        out.event_rate.push(rate);

        let mut temps = None;
        if out.reconfigured_at.is_none() {
            if self.sites.as_ref().is_some_and(|c| c.exceeded(&self.pos_rot, &self.x_eq)) {
                out.reconfigured_at = out.times.last().copied();
            } else if let (Some(p), Some(dec)) = (self.projector.as_mut(), dec) {
                let e = p.energies(&phase.pos, &phase.vel, phase.time);
                let e_si: Vec<f64> = e.iter().map(|v| self.units.energy_to_si(*v)).collect();
                if e_si.iter().any(|v| *v > self.bound) {
                    out.reconfigured_at = out.times.last().copied();
                } else {
                    temps = Some(dec.branch_temperatures(&e_si));
                }
            }
        }
        out.branch_temps.push(temps);
        Ok(())
    }
}

/// Evolve a prepared run. Every `observe_every` steps (never if zero) the
/// observer receives the time (s), lab positions (m) and velocities (m/s).
pub fn run_prepared<F>(prep: &Prepared, cfg: &RunConfig, observe_every: u64, mut observer: F) -> Result<RunOutput>
where
    F: FnMut(f64, &[[f64; 3]], &[[f64; 3]]),
{
    cfg.validate()?;
    let eq = &prep.equilibrium;
    let units = UnitSystem::new(&cfg.species, cfg.trap.omega_z);
    let field = match cfg.coulomb_mode {
        CoulombMode::Full => ForceField::full(cfg.trap, cfg.species),
        CoulombMode::Linearized => ForceField::linearized(LinearizedCoulomb::new(eq)?),
    };
    let dt = units.time_from_si(cfg.dt);
    let mut boris = Boris::new(&field, Phase::from_state(&prep.initial, &units), dt)?;

    let scatter = match &cfg.cooling {
        Some(c) if !c.beams.is_empty() => Some((
            ScatterKernel::new(c, &cfg.species, &units, dt)?,
            ChaCha8Rng::seed_from_u64(c.rng_seed),
        )),
        _ => None,
    };
    let mut scatter = scatter;

    let n = cfg.n_ions;
    let scaled_trap = ScaledTrap::new(&cfg.trap, &cfg.species)?;
    let mut sampler = Sampler {
        units,
        trap: scaled_trap,
        omega_r: scaled_trap.omega_r,
        n,
        u_eq: rotating_energy(&eq.scaled, &scaled_trap)?,
        x_eq: eq.scaled.clone(),
        sites: match cfg.coulomb_mode {
            CoulombMode::Full => Some(SiteCheck::new(&eq.scaled)),
            CoulombMode::Linearized => None,
        },
        pos_rot: Coords::zeros(n),
        vel_rot: Coords::zeros(n),
        projector: prep.modes.as_ref().map(|d| d.projector()),
        bound: cfg.reconfiguration_bound,
    };

    let n_steps = cfg.n_steps();
    let every = cfg.sample_every();
    let mut diag = DiagnosticsSeries::default();
    sampler.sample(&boris.phase, &mut diag, 0.0, prep.modes.as_ref())?;

    let mut pos_buf = alloc::vec![[0.0; 3]; n];
    let mut vel_buf = alloc::vec![[0.0; 3]; n];
    let mut emit = |phase: &Phase, f: &mut F| {
        for i in 0..n {
            pos_buf[i] = [
                phase.pos.x[i] * units.length_scale,
                phase.pos.y[i] * units.length_scale,
                phase.pos.z[i] * units.length_scale,
            ];
            let vs = units.velocity_scale();
            vel_buf[i] = [phase.vel.x[i] * vs, phase.vel.y[i] * vs, phase.vel.z[i] * vs];
        }
        f(units.time_to_si(phase.time), &pos_buf, &vel_buf);
    };
    if observe_every > 0 {
        emit(&boris.phase, &mut observer);
    }

    let mut events_total = 0u64;
    let mut events_window = 0u64;
    for k in 1..=n_steps {
        boris.step()?;
        if let Some((kernel, rng)) = scatter.as_mut() {
            let e = kernel.apply(&boris.phase.pos, &mut boris.phase.vel, rng)?;
            events_window += e;
        }
        if observe_every > 0 && k % observe_every == 0 {
            emit(&boris.phase, &mut observer);
        }
        if k % every == 0 {
            let rate = events_window as f64 / (every as f64 * cfg.dt);
            events_total += events_window;
            events_window = 0;
            sampler.sample(&boris.phase, &mut diag, rate, prep.modes.as_ref())?;
        }
    }
    events_total += events_window;

    Ok(RunOutput {
        diagnostics: diag,
        final_state: boris.phase.to_state(&units),
        equilibrium: eq.clone(),
        modes: prep.modes.clone(),
        scatter_events: events_total,
        steps: n_steps,
    })
}
