//! Coulomb interaction expanded to second order about a planar equilibrium.
//!
//! With `q = x' - x_eq` in the rotating frame the force is `-J - H q`, where
//! `J` is the Coulomb gradient and `H` the Coulomb Hessian at equilibrium.
//! Every other force stays exact, so this only removes the anharmonic
//! coupling between modes.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::coulomb;
use crate::equilibrium::EquilibriumConfig;
use crate::error::{Error, Result};
use crate::frame::rotate;
use crate::hessian::{coulomb_hessian, split_blocks};
use crate::math;
use crate::state::{Coords, CrystalState};

/// Coulomb gradient and Hessian frozen at an equilibrium.
#[derive(Debug, Clone)]
pub struct LinearizedCoulomb {
    pub equilibrium: EquilibriumConfig,
    /// `dU_C/dx_i` at equilibrium (N). Cancels the trap force there.
    pub jacobian: Vec<[f64; 3]>,
    /// Coulomb-only Hessian, 3N x 3N interleaved (N/m).
    pub hessian: DMatrix<f64>,
}

impl LinearizedCoulomb {
    pub fn new(eq: &EquilibriumConfig) -> Result<Self> {
        if !eq.planar {
            return Err(Error::NotPlanar {
                max_z: eq.max_abs_z(),
            });
        }
        let units = eq.units();
        let mut f = Coords::zeros(eq.n_ions());
        coulomb::accumulate_forces(&eq.scaled, &mut f);
        let jacobian = f.to_rows(-units.force_scale());
        let hessian = coulomb_hessian(&eq.scaled) * units.stiffness_scale();
        Ok(Self {
            equilibrium: eq.clone(),
            jacobian,
            hessian,
        })
    }

    pub(crate) fn kernel(&self) -> LinearKernel {
        let eq = &self.equilibrium;
        let n = eq.n_ions();
        let mut f = Coords::zeros(n);
        coulomb::accumulate_forces(&eq.scaled, &mut f);
        let (axial, planar) = split_blocks(&coulomb_hessian(&eq.scaled));
        LinearKernel {
            force_eq: f,
            x_eq: eq.scaled.clone(),
            axial,
            planar,
            qz: DVector::zeros(n),
            qp: DVector::zeros(2 * n),
            fz: DVector::zeros(n),
            fp: DVector::zeros(2 * n),
        }
    }
}

/// Dimensionless evaluation state. The axial and planar blocks are applied
/// separately since they decouple for a planar equilibrium.
#[derive(Debug, Clone)]
pub(crate) struct LinearKernel {
    force_eq: Coords,
    x_eq: Coords,
    axial: DMatrix<f64>,
    planar: DMatrix<f64>,
    qz: DVector<f64>,
    qp: DVector<f64>,
    fz: DVector<f64>,
    fp: DVector<f64>,
}

impl LinearKernel {
    /// Add the linearized Coulomb acceleration at lab positions `pos` to
    /// `out`; `(c, s)` is the cosine and sine of the wall phase.
    pub fn accumulate(&mut self, pos: &Coords, c: f64, s: f64, out: &mut Coords) {
        let n = pos.len();
        for i in 0..n {
            let (xr, yr) = rotate(c, s, pos.x[i], pos.y[i]);
            self.qp[2 * i] = xr - self.x_eq.x[i];
            self.qp[2 * i + 1] = yr - self.x_eq.y[i];
            self.qz[i] = pos.z[i] - self.x_eq.z[i];
        }
        self.fp.gemv(-1.0, &self.planar, &self.qp, 0.0);
        self.fz.gemv(-1.0, &self.axial, &self.qz, 0.0);
        for i in 0..n {
            let fx = self.force_eq.x[i] + self.fp[2 * i];
            let fy = self.force_eq.y[i] + self.fp[2 * i + 1];
            let (lx, ly) = rotate(c, -s, fx, fy);
            out.x[i] += lx;
            out.y[i] += ly;
            out.z[i] += self.force_eq.z[i] + self.fz[i];
        }
    }
}

/// Linearized Coulomb force on every ion in the lab frame (N).
pub fn linearized_coulomb_force(state: &CrystalState, lin: &LinearizedCoulomb) -> Result<Vec<[f64; 3]>> {
    state.validate()?;
    if state.n_ions() != lin.equilibrium.n_ions() {
        return Err(Error::Shape(alloc::format!(
            "state has {} ions, linearization has {}",
            state.n_ions(),
            lin.equilibrium.n_ions()
        )));
    }
    let units = lin.equilibrium.units();
    let omega_r = lin.equilibrium.trap.omega_r;
    let (s, c) = math::sin_cos(omega_r * state.time);
    let pos = Coords::from_rows(&state.positions, 1.0 / units.length_scale);
    let mut out = Coords::zeros(pos.len());
    lin.kernel().accumulate(&pos, c, s, &mut out);
    Ok(out.to_rows(units.force_scale()))
}
