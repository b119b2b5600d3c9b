use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::params::UnitSystem;

/// Lab-frame positions (m) and velocities (m/s) of every ion at `time` (s).
#[derive(Debug, Clone, PartialEq)]
pub struct CrystalState {
    pub time: f64,
    pub positions: Vec<[f64; 3]>,
    pub velocities: Vec<[f64; 3]>,
}

impl CrystalState {
    pub fn new(time: f64, positions: Vec<[f64; 3]>, velocities: Vec<[f64; 3]>) -> Result<Self> {
        let s = Self {
            time,
            positions,
            velocities,
        };
        s.validate()?;
        Ok(s)
    }

    /// All ions at rest at the given positions.
    pub fn at_rest(time: f64, positions: Vec<[f64; 3]>) -> Result<Self> {
        let n = positions.len();
        Self::new(time, positions, alloc::vec![[0.0; 3]; n])
    }

    pub fn n_ions(&self) -> usize {
        self.positions.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.positions.is_empty() {
            return Err(Error::Shape("a crystal needs at least one ion".into()));
        }
        if self.positions.len() != self.velocities.len() {
            return Err(Error::Shape(alloc::format!(
                "{} positions but {} velocities",
                self.positions.len(),
                self.velocities.len()
            )));
        }
        for (i, (p, v)) in self.positions.iter().zip(&self.velocities).enumerate() {
            if !p.iter().chain(v).all(|c| c.is_finite()) {
                return Err(Error::NonFinite {
                    step: 0,
                    time: self.time,
                    ion: i,
                });
            }
        }
        Ok(())
    }
}

/// Structure-of-arrays coordinates, the layout used by the force kernels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Coords {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
}

impl Coords {
    pub fn zeros(n: usize) -> Self {
        Self {
            x: alloc::vec![0.0; n],
            y: alloc::vec![0.0; n],
            z: alloc::vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn from_rows(rows: &[[f64; 3]], scale: f64) -> Self {
        Self {
            x: rows.iter().map(|r| r[0] * scale).collect(),
            y: rows.iter().map(|r| r[1] * scale).collect(),
            z: rows.iter().map(|r| r[2] * scale).collect(),
        }
    }

    pub fn to_rows(&self, scale: f64) -> Vec<[f64; 3]> {
        (0..self.len())
            .map(|i| [self.x[i] * scale, self.y[i] * scale, self.z[i] * scale])
            .collect()
    }

    /// Flattened `[x0, y0, z0, x1, ...]`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(3 * self.len());
        for i in 0..self.len() {
            out.extend_from_slice(&[self.x[i], self.y[i], self.z[i]]);
        }
        out
    }

    pub fn from_flat(flat: &[f64]) -> Self {
        let n = flat.len() / 3;
        let mut c = Self::zeros(n);
        for i in 0..n {
            c.x[i] = flat[3 * i];
            c.y[i] = flat[3 * i + 1];
            c.z[i] = flat[3 * i + 2];
        }
        c
    }

    pub fn fill(&mut self, value: f64) {
        self.x.fill(value);
        self.y.fill(value);
        self.z.fill(value);
    }

    pub fn max_abs_z(&self) -> f64 {
        self.z.iter().fold(0.0_f64, |m, z| m.max(z.abs()))
    }
}

/// Dimensionless phase-space state used inside the integrator.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Phase {
    pub time: f64,
    pub pos: Coords,
    pub vel: Coords,
}

impl Phase {
    pub fn from_state(state: &CrystalState, units: &UnitSystem) -> Self {
        Self {
            time: units.time_from_si(state.time),
            pos: Coords::from_rows(&state.positions, 1.0 / units.length_scale),
            vel: Coords::from_rows(&state.velocities, 1.0 / units.velocity_scale()),
        }
    }

    pub fn to_state(&self, units: &UnitSystem) -> CrystalState {
        CrystalState {
            time: units.time_to_si(self.time),
            positions: self.pos.to_rows(units.length_scale),
            velocities: self.vel.to_rows(units.velocity_scale()),
        }
    }
}
