//! Lab <-> rotating frame transforms.
//!
//! A positive ion crystal in `B = B z` rotates in the cyclotron sense
//! (clockwise seen from +z), so rotating coordinates are obtained by turning
//! lab coordinates through `+omega_r t`:
//!
//! ```text
//! x' = cos(wt) x - sin(wt) y
//! y' = sin(wt) x + cos(wt) y
//! ```
//!
//! The rigid-rotation velocity at rotating-frame point `r'` is
//! `omega_r (y', -x', 0)`; it is removed from rotating-frame velocities so a
//! crystal in steady rotation has zero velocity there.

use alloc::vec::Vec;

use crate::math;
use crate::state::{Coords, CrystalState};

/// Rotation by `angle` about z applied to `(x, y)`.
#[inline(always)]
pub fn rotate(cos: f64, sin: f64, x: f64, y: f64) -> (f64, f64) {
    (cos * x - sin * y, sin * x + cos * y)
}

/// Rotating-frame positions (m) and velocities (m/s).
#[derive(Debug, Clone, PartialEq)]
pub struct RotatingState {
    pub time: f64,
    pub positions: Vec<[f64; 3]>,
    pub velocities: Vec<[f64; 3]>,
}

pub fn to_rotating_frame(state: &CrystalState, omega_r: f64) -> RotatingState {
    let (s, c) = math::sin_cos(omega_r * state.time);
    let mut positions = Vec::with_capacity(state.n_ions());
    let mut velocities = Vec::with_capacity(state.n_ions());
    for (p, v) in state.positions.iter().zip(&state.velocities) {
        let (xr, yr) = rotate(c, s, p[0], p[1]);
        let (vxr, vyr) = rotate(c, s, v[0], v[1]);
        positions.push([xr, yr, p[2]]);
        velocities.push([vxr - omega_r * yr, vyr + omega_r * xr, v[2]]);
    }
    RotatingState {
        time: state.time,
        positions,
        velocities,
    }
}

pub fn from_rotating_frame(rot: &RotatingState, omega_r: f64) -> CrystalState {
    let (s, c) = math::sin_cos(omega_r * rot.time);
    let mut positions = Vec::with_capacity(rot.positions.len());
    let mut velocities = Vec::with_capacity(rot.positions.len());
    for (p, v) in rot.positions.iter().zip(&rot.velocities) {
        let (x, y) = rotate(c, -s, p[0], p[1]);
        let (vx, vy) = rotate(c, -s, v[0] + omega_r * p[1], v[1] - omega_r * p[0]);
        positions.push([x, y, p[2]]);
        velocities.push([vx, vy, v[2]]);
    }
    CrystalState {
        time: rot.time,
        positions,
        velocities,
    }
}

/// Dimensionless version writing rotating-frame coordinates into `pos_out`
/// and `vel_out`. `omega_r` and `time` are in units of omega_z.
pub(crate) fn coords_to_rotating(
    pos: &Coords,
    vel: &Coords,
    omega_r: f64,
    time: f64,
    pos_out: &mut Coords,
    vel_out: &mut Coords,
) {
    let (s, c) = math::sin_cos(omega_r * time);
    for i in 0..pos.len() {
        let (xr, yr) = rotate(c, s, pos.x[i], pos.y[i]);
        let (vxr, vyr) = rotate(c, s, vel.x[i], vel.y[i]);
        pos_out.x[i] = xr;
        pos_out.y[i] = yr;
        pos_out.z[i] = pos.z[i];
        vel_out.x[i] = vxr - omega_r * yr;
        vel_out.y[i] = vyr + omega_r * xr;
        vel_out.z[i] = vel.z[i];
    }
}

/// Inverse of [`coords_to_rotating`].
pub(crate) fn coords_from_rotating(
    pos_rot: &Coords,
    vel_rot: &Coords,
    omega_r: f64,
    time: f64,
    pos_out: &mut Coords,
    vel_out: &mut Coords,
) {
    let (s, c) = math::sin_cos(omega_r * time);
    for i in 0..pos_rot.len() {
        let (xr, yr) = (pos_rot.x[i], pos_rot.y[i]);
        let (x, y) = rotate(c, -s, xr, yr);
        let (vx, vy) = rotate(c, -s, vel_rot.x[i] + omega_r * yr, vel_rot.y[i] - omega_r * xr);
        pos_out.x[i] = x;
        pos_out.y[i] = y;
        pos_out.z[i] = pos_rot.z[i];
        vel_out.x[i] = vx;
        vel_out.y[i] = vy;
        vel_out.z[i] = vel_rot.z[i];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    #[test]
    fn quarter_turn() {
        let wr = 2.0 * PI * 200e3;
        let t = (PI / 2.0) / wr;
        let st = CrystalState::at_rest(t, alloc::vec![[1e-6, 0.0, 0.0]]).unwrap();
        let rot = to_rotating_frame(&st, wr);
        assert!(rot.positions[0][0].abs() < 1e-18);
        assert!((rot.positions[0][1] - 1e-6).abs() < 1e-18);
    }

    #[test]
    fn rigid_rotation_is_at_rest() {
        let wr = 2.0 * PI * 204e3;
        let r = 30e-6;
        for t in [0.0, 1.3e-7, 4.1e-6] {
            // clockwise orbit: angle -wr t
            let (s, c) = (-wr * t).sin_cos();
            let pos = [r * c, r * s, 0.2e-6];
            let vel = [wr * r * s, -wr * r * c, 0.0];
            let st = CrystalState::new(t, alloc::vec![pos], alloc::vec![vel]).unwrap();
            let rot = to_rotating_frame(&st, wr);
            for k in 0..3 {
                assert!(rot.velocities[0][k].abs() < 1e-9, "{:?}", rot.velocities[0]);
            }
            assert!((rot.positions[0][0] - r).abs() < 1e-15);
        }
    }

    #[test]
    fn round_trip_and_invariants() {
        let wr = 2.0 * PI * 190e3;
        let st = CrystalState::new(
            3.3e-5,
            alloc::vec![[1e-5, -2e-5, 3e-7], [-4e-5, 1e-6, -1e-7]],
            alloc::vec![[3.0, -1.0, 0.5], [0.1, 7.0, -2.0]],
        )
        .unwrap();
        let rot = to_rotating_frame(&st, wr);
        let back = from_rotating_frame(&rot, wr);
        for (a, b) in st.positions.iter().zip(&back.positions) {
            for k in 0..3 {
                assert!((a[k] - b[k]).abs() <= 1e-12 * 1e-5);
            }
        }
        for (a, b) in st.velocities.iter().zip(&back.velocities) {
            for k in 0..3 {
                assert!((a[k] - b[k]).abs() <= 1e-12 * 10.0);
            }
        }
        for (a, b) in st.positions.iter().zip(&rot.positions) {
            assert_eq!(a[2], b[2]);
            let ra = (a[0] * a[0] + a[1] * a[1]).sqrt();
            let rb = (b[0] * b[0] + b[1] * b[1]).sqrt();
            assert!((ra - rb).abs() <= 1e-15 * ra);
        }
    }
}
