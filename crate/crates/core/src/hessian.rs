//! Analytic second derivatives of the rotating-frame potential.
//!
//! Coordinates are interleaved per ion, `[x0, y0, z0, x1, ...]`. Planar
//! blocks use `[x0, y0, x1, y1, ...]` and axial blocks `[z0, z1, ...]`.

use nalgebra::DMatrix;

use crate::equilibrium::EquilibriumConfig;
use crate::error::{Error, Result};
use crate::forces::ScaledTrap;
use crate::math;
use crate::state::Coords;

/// Hessian of the Coulomb energy `sum_{i<j} 1/r_ij` (dimensionless).
pub(crate) fn coulomb_hessian(pos: &Coords) -> DMatrix<f64> {
    let n = pos.len();
    let mut h = DMatrix::zeros(3 * n, 3 * n);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = [pos.x[i] - pos.x[j], pos.y[i] - pos.y[j], pos.z[i] - pos.z[j]];
            let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
            let r = math::sqrt(r2);
            let inv3 = 1.0 / (r2 * r);
            let inv5 = inv3 / r2;
            for a in 0..3 {
                for b in 0..3 {
                    let mut v = 3.0 * d[a] * d[b] * inv5;
                    if a == b {
                        v -= inv3;
                    }
                    h[(3 * i + a, 3 * i + b)] += v;
                    h[(3 * j + a, 3 * j + b)] += v;
                    h[(3 * i + a, 3 * j + b)] -= v;
                    h[(3 * j + a, 3 * i + b)] -= v;
                }
            }
        }
    }
    h
}

/// Coulomb Hessian plus the diagonal trap stiffness.
pub(crate) fn total_hessian_scaled(pos: &Coords, trap: &ScaledTrap) -> DMatrix<f64> {
    let mut h = coulomb_hessian(pos);
    let k = trap.stiffness();
    for i in 0..pos.len() {
        for (a, ka) in k.iter().enumerate() {
            h[(3 * i + a, 3 * i + a)] += ka;
        }
    }
    h
}

/// Axial (N x N) and planar (2N x 2N) blocks of a full 3N x 3N Hessian.
pub(crate) fn split_blocks(h: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = h.nrows() / 3;
    let axial = DMatrix::from_fn(n, n, |i, j| h[(3 * i + 2, 3 * j + 2)]);
    let planar = DMatrix::from_fn(2 * n, 2 * n, |p, q| h[(3 * (p / 2) + p % 2, 3 * (q / 2) + q % 2)]);
    (axial, planar)
}

/// Second derivatives of the total rotating-frame potential at an equilibrium.
#[derive(Debug, Clone)]
pub struct HessianData {
    /// 3N x 3N, J/m^2.
    pub matrix: DMatrix<f64>,
    /// N x N axial block, J/m^2.
    pub axial: DMatrix<f64>,
    /// 2N x 2N planar block, J/m^2.
    pub planar: DMatrix<f64>,
}

/// Total Hessian (trap + Coulomb) at a planar equilibrium.
pub fn total_hessian(eq: &EquilibriumConfig) -> Result<HessianData> {
    if !eq.planar {
        return Err(Error::NotPlanar {
            max_z: eq.max_abs_z(),
        });
    }
    let scaled_trap = ScaledTrap::new(&eq.trap, &eq.species)?;
    let scaled = total_hessian_scaled(&eq.scaled, &scaled_trap);
    let stiff = eq.units().stiffness_scale();
    let matrix = scaled * stiff;
    let (axial, planar) = split_blocks(&matrix);
    Ok(HessianData {
        matrix,
        axial,
        planar,
    })
}
