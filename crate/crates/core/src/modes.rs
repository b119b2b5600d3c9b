//! Normal modes of a planar crystal in the rotating frame.
//!
//! The axial (drumhead) problem is an ordinary symmetric eigenproblem. The
//! planar problem is gyroscopic: with `K` the planar Hessian and
//! `omega_v = omega_c - 2 omega_r`, the linear equations of motion read
//! `q'' = -K q + omega_v G q'` where `G` maps `(vx, vy)` to `(vy, -vx)`.
//! In the energy-weighted coordinates `w = (K^(1/2) q, v)` this becomes
//! `w' = S w` with `S` real antisymmetric, so `i S` is Hermitian. Its
//! positive eigenvalues are the mode frequencies and its eigenvectors are
//! orthonormal, which makes the energy partition exact:
//!
//! ```text
//! E = |w|^2 / 2 = sum_k |e_k^H w|^2
//! ```
//!
//! The axial modes are written in the same form, so one complex matrix of
//! `3N` phase-space eigenvectors covers every branch. All internal
//! quantities use the dimensionless [`UnitSystem`](crate::UnitSystem).

use alloc::vec::Vec;
use core::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::equilibrium::{EquilibriumConfig, SiteCheck};
use crate::error::{Error, Result};
use crate::frame::{coords_from_rotating, coords_to_rotating};
use crate::hessian::{total_hessian, HessianData};
use crate::math;
use crate::params::{SpeciesParams, TrapParams, BOLTZMANN};
use crate::state::{Coords, CrystalState};

type C64 = Complex<f64>;

/// Branch label of a normal mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    Drumhead,
    ExB,
    Cyclotron,
}

impl Branch {
    pub fn name(&self) -> &'static str {
        match self {
            Branch::Drumhead => "drumhead",
            Branch::ExB => "exb",
            Branch::Cyclotron => "cyclotron",
        }
    }
}

/// Mean mode energy per branch divided by `k_B` (K).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BranchTemperatures {
    pub t_drumhead: f64,
    pub t_exb: f64,
    pub t_cyclotron: f64,
}

impl BranchTemperatures {
    pub fn uniform(t: f64) -> Self {
        Self {
            t_drumhead: t,
            t_exb: t,
            t_cyclotron: t,
        }
    }

    pub fn get(&self, branch: Branch) -> f64 {
        match branch {
            Branch::Drumhead => self.t_drumhead,
            Branch::ExB => self.t_exb,
            Branch::Cyclotron => self.t_cyclotron,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, t) in [
            ("t_drumhead", self.t_drumhead),
            ("t_exb", self.t_exb),
            ("t_cyclotron", self.t_cyclotron),
        ] {
            if !(t.is_finite() && t >= 0.0) {
                return Err(crate::error::invalid(name, "must be finite and non-negative"));
            }
        }
        Ok(())
    }
}

/// Axial frequencies (rad/s, descending) and orthonormal eigenvectors
/// (columns) of the axial Hessian block.
pub fn drumhead_modes(h: &HessianData, species: &SpeciesParams) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let eig = SymmetricEigen::new(h.axial.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut freqs = Vec::with_capacity(order.len());
    for &k in &order {
        let l = eig.eigenvalues[k];
        if l <= 0.0 {
            return Err(Error::Unstable(alloc::format!(
                "axial Hessian eigenvalue {l:.3e} J/m^2 is not positive; the crystal is past planar stability"
            )));
        }
        freqs.push(math::sqrt(l / species.mass));
    }
    let vecs = DMatrix::from_fn(order.len(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((freqs, vecs))
}

/// Planar mode frequencies (rad/s, rotating frame) and eigenvectors.
///
/// Returns `2N` frequencies sorted ascending, the first `N` being the ExB
/// branch, and the matching `4N`-component eigenvectors in the coordinates
/// `(K^(1/2) q, v)` with planar entries ordered `[x0, y0, x1, ...]`.
pub fn planar_modes(
    h: &HessianData,
    trap: &TrapParams,
    species: &SpeciesParams,
) -> Result<(Vec<f64>, DMatrix<C64>)> {
    let stiff = species.mass * trap.omega_z * trap.omega_z;
    let k = &h.planar / stiff;
    let omega_v = (trap.omega_c(species) - 2.0 * trap.omega_r) / trap.omega_z;
    let omega_c = trap.omega_c(species) / trap.omega_z;
    let ps = PlanarSolve::new(&k, omega_v, omega_c)?;
    let freqs = ps.freqs.iter().map(|f| f * trap.omega_z).collect();
    Ok((freqs, ps.vecs))
}

struct PlanarSolve {
    sqrt_k: DMatrix<f64>,
    inv_sqrt_k: DMatrix<f64>,
    freqs: Vec<f64>,
    vecs: DMatrix<C64>,
}

impl PlanarSolve {
    fn new(k: &DMatrix<f64>, omega_v: f64, omega_c: f64) -> Result<Self> {
        let m = k.nrows();
        let n = m / 2;
        let eig = SymmetricEigen::new(k.clone());
        let lmax = eig.eigenvalues.amax();
        let lmin = eig.eigenvalues.min();
        if !(lmin > 1e-12 * lmax) {
            return Err(Error::Unstable(alloc::format!(
                "planar Hessian is not positive definite (smallest eigenvalue {lmin:.3e} in units of m omega_z^2)"
            )));
        }
        let v = &eig.eigenvectors;
        let d_half = DMatrix::from_diagonal(&eig.eigenvalues.map(math::sqrt));
        let d_inv_half = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / math::sqrt(l)));
        let sqrt_k = v * d_half * v.transpose();
        let inv_sqrt_k = v * d_inv_half * v.transpose();

        let mut herm = DMatrix::<C64>::zeros(2 * m, 2 * m);
        for r in 0..m {
            for c in 0..m {
                // i S with S = [[0, K^1/2], [-K^1/2, omega_v G]]
                herm[(r, m + c)] = C64::new(0.0, sqrt_k[(r, c)]);
                herm[(m + r, c)] = C64::new(0.0, -sqrt_k[(r, c)]);
            }
        }
        for i in 0..n {
            herm[(m + 2 * i, m + 2 * i + 1)] = C64::new(0.0, omega_v);
            herm[(m + 2 * i + 1, m + 2 * i)] = C64::new(0.0, -omega_v);
        }
        let eig = SymmetricEigen::new(herm);
        let mut pos: Vec<usize> = (0..2 * m).filter(|&j| eig.eigenvalues[j] > 0.0).collect();
        if pos.len() != m {
            return Err(Error::Unstable(alloc::format!(
                "expected {m} positive planar frequencies, found {}",
                pos.len()
            )));
        }
        pos.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let n_low = pos.iter().filter(|&&j| eig.eigenvalues[j] < 0.5 * omega_c).count();
        if n_low != n {
            return Err(Error::Unstable(alloc::format!(
                "{n_low} planar modes below omega_c/2, expected {n}; branches are not separated"
            )));
        }
        let freqs = pos.iter().map(|&j| eig.eigenvalues[j]).collect();
        let vecs = DMatrix::from_fn(2 * m, m, |r, c| eig.eigenvectors[(r, pos[c])]);
        Ok(Self {
            sqrt_k,
            inv_sqrt_k,
            freqs,
            vecs,
        })
    }
}

/// All `3N` normal modes of a planar equilibrium.
#[derive(Debug, Clone)]
pub struct ModeDecomposition {
    pub equilibrium: EquilibriumConfig,
    /// rad/s in the rotating frame. Drumhead first (descending), then ExB
    /// and cyclotron (each ascending).
    pub frequencies: Vec<f64>,
    pub branches: Vec<Branch>,
    /// `6N x 3N`. Column `k` is the normalized eigenvector of mode `k` in the
    /// energy-weighted phase-space coordinates `(K^(1/2) q, v)`, each half
    /// interleaved per ion as `[x0, y0, z0, x1, ...]`, with `q` and `v` the
    /// dimensionless rotating-frame displacement and velocity. A mode with
    /// complex amplitude `c` evolves as `2 Re(c e_k exp(-i w_k t))` and
    /// carries energy `|c|^2`.
    pub eigenvectors: DMatrix<C64>,
    sqrt_k: DMatrix<f64>,
    inv_sqrt_k: DMatrix<f64>,
}

impl ModeDecomposition {
    pub fn new(eq: &EquilibriumConfig) -> Result<Self> {
        let h = total_hessian(eq)?;
        Self::from_hessian(eq, &h)
    }

    pub fn from_hessian(eq: &EquilibriumConfig, h: &HessianData) -> Result<Self> {
        let n = eq.n_ions();
        let (trap, species) = (&eq.trap, &eq.species);
        let wz = trap.omega_z;

        let (dfreq, dvec) = drumhead_modes(h, species)?;
        let stiff = species.mass * wz * wz;
        let kp = &h.planar / stiff;
        let omega_v = (trap.omega_c(species) - 2.0 * trap.omega_r) / wz;
        let ps = PlanarSolve::new(&kp, omega_v, trap.omega_c(species) / wz)?;

        let mut frequencies = dfreq.clone();
        frequencies.extend(ps.freqs.iter().map(|f| f * wz));
        let mut branches = alloc::vec![Branch::Drumhead; n];
        branches.extend(core::iter::repeat(Branch::ExB).take(n));
        branches.extend(core::iter::repeat(Branch::Cyclotron).take(n));

        let mut eigenvectors = DMatrix::<C64>::zeros(6 * n, 3 * n);
        let s = FRAC_1_SQRT_2;
        for k in 0..n {
            for i in 0..n {
                let u = dvec[(i, k)];
                eigenvectors[(3 * i + 2, k)] = C64::new(u * s, 0.0);
                eigenvectors[(3 * n + 3 * i + 2, k)] = C64::new(0.0, -u * s);
            }
        }
        let m = 2 * n;
        for k in 0..m {
            for p in 0..m {
                let row = 3 * (p / 2) + p % 2;
                eigenvectors[(row, n + k)] = ps.vecs[(p, k)];
                eigenvectors[(3 * n + row, n + k)] = ps.vecs[(m + p, k)];
            }
        }

        // full 3N square roots, interleaved
        let ka = &h.axial / stiff;
        let eig = SymmetricEigen::new(ka);
        let mut sqrt_k = DMatrix::zeros(3 * n, 3 * n);
        let mut inv_sqrt_k = DMatrix::zeros(3 * n, 3 * n);
        let sa = &eig.eigenvectors * DMatrix::from_diagonal(&eig.eigenvalues.map(math::sqrt)) * eig.eigenvectors.transpose();
        let sai = &eig.eigenvectors
            * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / math::sqrt(l)))
            * eig.eigenvectors.transpose();
        for i in 0..n {
            for j in 0..n {
                sqrt_k[(3 * i + 2, 3 * j + 2)] = sa[(i, j)];
                inv_sqrt_k[(3 * i + 2, 3 * j + 2)] = sai[(i, j)];
            }
        }
        for p in 0..m {
            for q in 0..m {
                let (r, c) = (3 * (p / 2) + p % 2, 3 * (q / 2) + q % 2);
                sqrt_k[(r, c)] = ps.sqrt_k[(p, q)];
                inv_sqrt_k[(r, c)] = ps.inv_sqrt_k[(p, q)];
            }
        }

        Ok(Self {
            equilibrium: eq.clone(),
            frequencies,
            branches,
            eigenvectors,
            sqrt_k,
            inv_sqrt_k,
        })
    }

    pub fn n_ions(&self) -> usize {
        self.equilibrium.n_ions()
    }

    /// Index range of a branch within `frequencies`.
    pub fn branch_range(&self, branch: Branch) -> core::ops::Range<usize> {
        let n = self.n_ions();
        match branch {
            Branch::Drumhead => 0..n,
            Branch::ExB => n..2 * n,
            Branch::Cyclotron => 2 * n..3 * n,
        }
    }

    pub fn branch_frequencies(&self, branch: Branch) -> &[f64] {
        &self.frequencies[self.branch_range(branch)]
    }

    /// True when the lowest drumhead frequency lies at or below the highest
    /// ExB frequency, i.e. the two bands overlap.
    pub fn branch_overlap(&self) -> bool {
        let dmin = self.branch_frequencies(Branch::Drumhead).iter().cloned().fold(f64::INFINITY, f64::min);
        let emax = self.branch_frequencies(Branch::ExB).iter().cloned().fold(0.0, f64::max);
        dmin <= emax
    }

    /// Fast projector for repeated evaluation inside a time loop.
    pub(crate) fn projector(&self) -> Projector {
        let n = self.n_ions();
        let units = self.equilibrium.units();
        Projector {
            n,
            omega_r: self.equilibrium.trap.omega_r * units.time_scale,
            x_eq: self.equilibrium.scaled.clone(),
            sqrt_k: self.sqrt_k.clone(),
            er_t: self.eigenvectors.map(|c| c.re).transpose(),
            ei_t: self.eigenvectors.map(|c| c.im).transpose(),
            pos_rot: Coords::zeros(n),
            vel_rot: Coords::zeros(n),
            q: DVector::zeros(3 * n),
            w: DVector::zeros(6 * n),
            cr: DVector::zeros(3 * n),
            ci: DVector::zeros(3 * n),
        }
    }

    /// Rotating-frame phase-space vector (dimensionless `q` and `v`,
    /// interleaved) built from modal amplitudes `c_k`.
    fn synthesize_scaled(&self, amps: &[C64]) -> (DVector<f64>, DVector<f64>) {
        let n = self.n_ions();
        let mut w = DVector::<f64>::zeros(6 * n);
        for (k, a) in amps.iter().enumerate() {
            if *a == C64::new(0.0, 0.0) {
                continue;
            }
            for r in 0..6 * n {
                w[r] += 2.0 * (a * self.eigenvectors[(r, k)]).re;
            }
        }
        let q = &self.inv_sqrt_k * w.rows(0, 3 * n);
        let v = w.rows(3 * n, 3 * n).into_owned();
        (q, v)
    }

    /// Lab-frame state at `time` (s) with mode `k` holding energy
    /// `energies[k]` (J) at phase `phases[k]` (rad).
    pub fn synthesize(&self, energies: &[f64], phases: &[f64], time: f64) -> Result<CrystalState> {
        let m = self.frequencies.len();
        if energies.len() != m || phases.len() != m {
            return Err(Error::Shape(alloc::format!(
                "need {m} energies and phases, got {} and {}",
                energies.len(),
                phases.len()
            )));
        }
        let units = self.equilibrium.units();
        let amps: Vec<C64> = energies
            .iter()
            .zip(phases)
            .map(|(&e, &p)| {
                let (s, c) = math::sin_cos(p);
                C64::new(c, s) * math::sqrt(units.energy_from_si(e.max(0.0)))
            })
            .collect();
        let (q, v) = self.synthesize_scaled(&amps);
        let n = self.n_ions();
        let x = &self.equilibrium.scaled;
        let mut pos_rot = x.clone();
        let mut vel_rot = Coords::zeros(n);
        for i in 0..n {
            pos_rot.x[i] += q[3 * i];
            pos_rot.y[i] += q[3 * i + 1];
            pos_rot.z[i] += q[3 * i + 2];
            vel_rot.x[i] = v[3 * i];
            vel_rot.y[i] = v[3 * i + 1];
            vel_rot.z[i] = v[3 * i + 2];
        }
        let mut pos = Coords::zeros(n);
        let mut vel = Coords::zeros(n);
        let omega_r = self.equilibrium.trap.omega_r * units.time_scale;
        coords_from_rotating(&pos_rot, &vel_rot, omega_r, units.time_from_si(time), &mut pos, &mut vel);
        Ok(CrystalState {
            time,
            positions: pos.to_rows(units.length_scale),
            velocities: vel.to_rows(units.velocity_scale()),
        })
    }

    pub fn mode_energies(&self, state: &CrystalState) -> Result<ModeEnergies> {
        self.mode_energies_with_bound(state, BOLTZMANN)
    }

    /// Like [`Self::mode_energies`] with an explicit per-mode sanity bound (J).
    pub fn mode_energies_with_bound(&self, state: &CrystalState, bound: f64) -> Result<ModeEnergies> {
        state.validate()?;
        if state.n_ions() != self.n_ions() {
            return Err(Error::Shape(alloc::format!(
                "state has {} ions, decomposition has {}",
                state.n_ions(),
                self.n_ions()
            )));
        }
        let units = self.equilibrium.units();
        let pos = Coords::from_rows(&state.positions, 1.0 / units.length_scale);
        let vel = Coords::from_rows(&state.velocities, 1.0 / units.velocity_scale());
        let mut proj = self.projector();
        let scaled = proj.energies(&pos, &vel, units.time_from_si(state.time));
        let energies: Vec<f64> = scaled.iter().map(|&e| units.energy_to_si(e)).collect();
        let temperatures = self.branch_temperatures(&energies);
        let check = SiteCheck::new(&self.equilibrium.scaled);
        let reconfigured = energies.iter().any(|&e| e > bound)
            || check.exceeded(proj.rotating_positions(), &self.equilibrium.scaled);
        Ok(ModeEnergies {
            energies,
            temperatures,
            reconfigured,
        })
    }

    /// Mean energy per branch over `k_B`.
    pub fn branch_temperatures(&self, energies: &[f64]) -> BranchTemperatures {
        let mean = |b: Branch| {
            let r = self.branch_range(b);
            let len = r.len() as f64;
            energies[r].iter().sum::<f64>() / (len * BOLTZMANN)
        };
        BranchTemperatures {
            t_drumhead: mean(Branch::Drumhead),
            t_exb: mean(Branch::ExB),
            t_cyclotron: mean(Branch::Cyclotron),
        }
    }
}

/// Per-mode energies (J, ordered like [`ModeDecomposition::frequencies`]).
#[derive(Debug, Clone, PartialEq)]
pub struct ModeEnergies {
    pub energies: Vec<f64>,
    pub temperatures: BranchTemperatures,
    /// A mode exceeded the sanity bound or an ion sits closer to a
    /// neighbour's equilibrium site than its own; the linear analysis no
    /// longer applies.
    pub reconfigured: bool,
}

/// Decompose a planar equilibrium into its normal modes.
pub fn decompose(eq: &EquilibriumConfig) -> Result<ModeDecomposition> {
    ModeDecomposition::new(eq)
}

/// Project a lab-frame state onto the modes of `dec`.
pub fn mode_energies(state: &CrystalState, dec: &ModeDecomposition) -> Result<ModeEnergies> {
    dec.mode_energies(state)
}

/// Thermal state at `t = 0`: every mode gets energy `k_B T` of its branch
/// and a uniformly random phase.
pub fn synthesize_thermal_state(
    dec: &ModeDecomposition,
    temps: &BranchTemperatures,
    rng_seed: u64,
) -> Result<CrystalState> {
    temps.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let energies: Vec<f64> = dec.branches.iter().map(|b| BOLTZMANN * temps.get(*b)).collect();
    let phases: Vec<f64> = (0..energies.len()).map(|_| 2.0 * PI * rng.random::<f64>()).collect();
    dec.synthesize(&energies, &phases, 0.0)
}

/// Reusable buffers for projecting dimensionless lab states onto modes.
pub(crate) struct Projector {
    n: usize,
    omega_r: f64,
    x_eq: Coords,
    sqrt_k: DMatrix<f64>,
    er_t: DMatrix<f64>,
    ei_t: DMatrix<f64>,
    pos_rot: Coords,
    vel_rot: Coords,
    q: DVector<f64>,
    w: DVector<f64>,
    cr: DVector<f64>,
    ci: DVector<f64>,
}

impl Projector {
    /// Dimensionless mode energies of a dimensionless lab state.
    pub fn energies(&mut self, pos: &Coords, vel: &Coords, time: f64) -> Vec<f64> {
        let n = self.n;
        coords_to_rotating(pos, vel, self.omega_r, time, &mut self.pos_rot, &mut self.vel_rot);
        for i in 0..n {
            self.q[3 * i] = self.pos_rot.x[i] - self.x_eq.x[i];
            self.q[3 * i + 1] = self.pos_rot.y[i] - self.x_eq.y[i];
            self.q[3 * i + 2] = self.pos_rot.z[i] - self.x_eq.z[i];
            self.w[3 * n + 3 * i] = self.vel_rot.x[i];
            self.w[3 * n + 3 * i + 1] = self.vel_rot.y[i];
            self.w[3 * n + 3 * i + 2] = self.vel_rot.z[i];
        }
        let mut w1 = self.w.rows_mut(0, 3 * n);
        w1.gemv(1.0, &self.sqrt_k, &self.q, 0.0);
        self.cr.gemv(1.0, &self.er_t, &self.w, 0.0);
        self.ci.gemv(1.0, &self.ei_t, &self.w, 0.0);
        self.cr.iter().zip(self.ci.iter()).map(|(a, b)| a * a + b * b).collect()
    }

    /// Rotating-frame positions from the last call (l0).
    pub fn rotating_positions(&self) -> &Coords {
        &self.pos_rot
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::{find_equilibrium, EquilibriumOptions};
    use crate::params::default_nist_params;

    fn decomposition(n: usize) -> ModeDecomposition {
        let (s, t) = default_nist_params();
        let eq = find_equilibrium(n, &t, &s, &EquilibriumOptions::default()).unwrap();
        ModeDecomposition::new(&eq).unwrap()
    }

    #[test]
    fn branch_counts_and_com_mode() {
        let dec = decomposition(9);
        assert_eq!(dec.frequencies.len(), 27);
        for b in [Branch::Drumhead, Branch::ExB, Branch::Cyclotron] {
            assert_eq!(dec.branches.iter().filter(|x| **x == b).count(), 9);
        }
        let wz = dec.equilibrium.trap.omega_z;
        assert!(((dec.frequencies[0] - wz) / wz).abs() < 1e-10);
        assert!(dec.frequencies.iter().all(|f| *f > 0.0));
    }

    #[test]
    fn eigenvectors_are_orthonormal() {
        let dec = decomposition(6);
        let g = dec.eigenvectors.adjoint() * &dec.eigenvectors;
        let id = DMatrix::<C64>::identity(18, 18);
        assert!((g - id).camax() < 1e-10);
    }

    #[test]
    fn single_mode_round_trip() {
        let dec = decomposition(5);
        let m = dec.frequencies.len();
        for k in [0, 3, 5, 9, 14] {
            let mut e = alloc::vec![0.0; m];
            e[k] = 1e-25;
            let ph: Vec<f64> = (0..m).map(|j| 0.3 * j as f64).collect();
            let st = dec.synthesize(&e, &ph, 2.5e-6).unwrap();
            let me = dec.mode_energies(&st).unwrap();
            for j in 0..m {
                let expect = if j == k { 1e-25 } else { 0.0 };
                assert!((me.energies[j] - expect).abs() < 1e-10 * 1e-25, "mode {j}: {}", me.energies[j]);
            }
            assert!(!me.reconfigured);
        }
    }

    #[test]
    fn equilibrium_has_no_mode_energy() {
        let dec = decomposition(4);
        let st = synthesize_thermal_state(&dec, &BranchTemperatures::default(), 3).unwrap();
        let me = dec.mode_energies(&st).unwrap();
        assert!(me.energies.iter().all(|e| *e < 1e-20 * BOLTZMANN));
    }
}
