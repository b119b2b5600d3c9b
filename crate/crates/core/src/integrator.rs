//! Boris integration of the lab-frame equations of motion.
//!
//! Each step is a half magnetic rotation, a half electric kick, a drift, a
//! second half kick and a second half rotation. This is the standard Boris
//! pusher with velocities reported at integer steps; the rotation angle is
//! `2 atan(omega_c dt / 2)`, which keeps the E x B drift exact. The
//! acceleration at the end of a step is cached for the start of the next,
//! so each step costs one force evaluation.
//!
//! The reported planar velocity is `cos(theta/2)` times the internal Boris
//! velocity. That is the mean of the velocities before and after the
//! magnetic rotation, which is exact for drift motion, so a rigidly
//! rotating equilibrium starts without a spurious cyclotron kick.

use crate::error::{invalid, Error, Result};
use crate::forces::{ForceField, ForceKernel};
use crate::math;
use crate::state::{Coords, CrystalState, Phase};

pub(crate) struct Boris {
    kernel: ForceKernel,
    /// Dimensionless step.
    pub dt: f64,
    cos_h: f64,
    sin_h: f64,
    pub phase: Phase,
    acc: Coords,
    next: Coords,
    pub steps: u64,
}

impl Boris {
    pub fn new(field: &ForceField, phase: Phase, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(invalid("dt", "must be finite and positive"));
        }
        let kernel = field.kernel()?;
        let theta = 2.0 * math::atan(0.5 * kernel.scaled.omega_c * dt);
        let (sin_h, cos_h) = math::sin_cos(0.5 * theta);
        let n = phase.pos.len();
        let mut b = Self {
            kernel,
            dt,
            cos_h,
            sin_h,
            acc: Coords::zeros(n),
            next: phase.pos.clone(),
            phase,
            steps: 0,
        };
        b.kernel.electric_accel(&b.phase.pos, b.phase.time, &mut b.acc);
        Ok(b)
    }

    #[inline]
    fn half_rotation(&mut self) {
        // clockwise about +z, the sense of q v x B for B along +z
        let (c, s) = (self.cos_h, self.sin_h);
        let v = &mut self.phase.vel;
        for i in 0..v.len() {
            let (vx, vy) = (v.x[i], v.y[i]);
            v.x[i] = c * vx + s * vy;
            v.y[i] = -s * vx + c * vy;
        }
    }

    /// Scale planar velocities between the reported velocity and the
    /// internal one.
    #[inline]
    fn scale_planar(&mut self, f: f64) {
        let v = &mut self.phase.vel;
        for i in 0..v.len() {
            v.x[i] *= f;
            v.y[i] *= f;
        }
    }

    /// Advance by one step. Laser kicks may modify `phase.vel` between
    /// calls; positions must not be changed externally.
    pub fn step(&mut self) -> Result<()> {
        let h = 0.5 * self.dt;
        let dt = self.dt;
        self.scale_planar(1.0 / self.cos_h);
        self.half_rotation();
        {
            let (p, v, a) = (&mut self.phase.pos, &mut self.phase.vel, &self.acc);
            for i in 0..p.len() {
                v.x[i] += h * a.x[i];
                v.y[i] += h * a.y[i];
                v.z[i] += h * a.z[i];
                p.x[i] += dt * v.x[i];
                p.y[i] += dt * v.y[i];
                p.z[i] += dt * v.z[i];
            }
        }
        self.phase.time += dt;
        self.steps += 1;
        self.kernel
            .electric_accel(&self.phase.pos, self.phase.time, &mut self.next);
        core::mem::swap(&mut self.acc, &mut self.next);
        {
            let (v, a) = (&mut self.phase.vel, &self.acc);
            for i in 0..v.len() {
                v.x[i] += h * a.x[i];
                v.y[i] += h * a.y[i];
                v.z[i] += h * a.z[i];
            }
        }
        self.half_rotation();
        self.scale_planar(self.cos_h);
        self.check_finite()
    }

    fn check_finite(&self) -> Result<()> {
        let p = &self.phase.pos;
        let v = &self.phase.vel;
        let mut sum = 0.0;
        for i in 0..p.len() {
            sum += p.x[i] + p.y[i] + p.z[i] + v.x[i] + v.y[i] + v.z[i];
        }
        if sum.is_finite() {
            return Ok(());
        }
        let ion = (0..p.len())
            .find(|&i| {
                ![p.x[i], p.y[i], p.z[i], v.x[i], v.y[i], v.z[i]]
                    .iter()
                    .all(|c| c.is_finite())
            })
            .unwrap_or(0);
        Err(Error::NonFinite {
            step: self.steps,
            time: self.phase.time,
            ion,
        })
    }
}

/// One Boris step of `dt` seconds from `state`.
pub fn step(state: &CrystalState, field: &ForceField, dt: f64) -> Result<CrystalState> {
    state.validate()?;
    let units = field.units();
    let phase = Phase::from_state(state, &units);
    let mut b = Boris::new(field, phase, units.time_from_si(dt))?;
    b.step()?;
    let mut out = b.phase.to_state(&units);
    // keep the caller's clock exact
    out.time = state.time + dt;
    Ok(out)
}
