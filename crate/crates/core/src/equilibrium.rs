//! Rotating-frame equilibria and the planar -> 3D transition frequency.

use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coulomb;
use crate::error::{Error, Result};
use crate::forces::{rotating_energy, rotating_gradient, ScaledTrap};
use crate::hessian::total_hessian_scaled;
use crate::math;
use crate::minimize::{inf_norm, lbfgs, LbfgsOptions};
use crate::params::{SpeciesParams, TrapParams, UnitSystem};
use crate::state::Coords;

/// A converged rotating-frame equilibrium.
#[derive(Debug, Clone)]
pub struct EquilibriumConfig {
    /// Rotating-frame positions (m).
    pub positions_rot: Vec<[f64; 3]>,
    /// Rotating-frame potential energy (J).
    pub energy: f64,
    /// Infinity norm of the residual force (N).
    pub gradient_norm: f64,
    pub planar: bool,
    pub trap: TrapParams,
    pub species: SpeciesParams,
    pub(crate) scaled: Coords,
}

impl EquilibriumConfig {
    pub fn n_ions(&self) -> usize {
        self.positions_rot.len()
    }

    pub fn units(&self) -> UnitSystem {
        UnitSystem::new(&self.species, self.trap.omega_z)
    }

    /// Largest |z| (m).
    pub fn max_abs_z(&self) -> f64 {
        self.scaled.max_abs_z() * self.units().length_scale
    }

    /// Largest distance from the trap axis (m).
    pub fn radius(&self) -> f64 {
        self.positions_rot
            .iter()
            .map(|p| math::sqrt(p[0] * p[0] + p[1] * p[1]))
            .fold(0.0, f64::max)
    }

    /// Smallest inter-ion distance (m).
    pub fn min_distance(&self) -> f64 {
        coulomb::min_distance(&self.scaled) * self.units().length_scale
    }

    /// Smallest eigenvalue of the axial Hessian block (J/m^2). It tends to
    /// zero as the wall frequency approaches the planar stability limit.
    pub fn axial_stability_margin(&self) -> Result<f64> {
        let trap = ScaledTrap::new(&self.trap, &self.species)?;
        let h = total_hessian_scaled(&self.scaled, &trap);
        let (axial, _) = crate::hessian::split_blocks(&h);
        let eig = SymmetricEigen::new(axial);
        Ok(eig.eigenvalues.min() * self.units().stiffness_scale())
    }

    /// Rebuild an equilibrium record from rotating-frame positions (m),
    /// e.g. one loaded from disk. The residual is recomputed.
    pub fn from_positions(
        positions_rot: Vec<[f64; 3]>,
        trap: TrapParams,
        species: SpeciesParams,
        planarity_tol: f64,
    ) -> Result<Self> {
        let units = UnitSystem::new(&species, trap.omega_z);
        let scaled_trap = ScaledTrap::new(&trap, &species)?;
        let scaled = Coords::from_rows(&positions_rot, 1.0 / units.length_scale);
        build(scaled, &scaled_trap, trap, species, planarity_tol)
    }
}

fn build(
    scaled: Coords,
    scaled_trap: &ScaledTrap,
    trap: TrapParams,
    species: SpeciesParams,
    planarity_tol: f64,
) -> Result<EquilibriumConfig> {
    let units = UnitSystem::new(&species, trap.omega_z);
    let energy = rotating_energy(&scaled, scaled_trap)?;
    let mut grad = Coords::zeros(scaled.len());
    rotating_gradient(&scaled, scaled_trap, &mut grad);
    let gnorm = inf_norm(&grad.to_flat());
    let planar = scaled.max_abs_z() < planarity_tol;
    Ok(EquilibriumConfig {
        positions_rot: scaled.to_rows(units.length_scale),
        energy: units.energy_to_si(energy),
        gradient_norm: gnorm * units.force_scale(),
        planar,
        trap,
        species,
        scaled,
    })
}

/// Controls for [`find_equilibrium`].
#[derive(Debug, Clone)]
pub struct EquilibriumOptions {
    /// Number of generated starting configurations.
    pub seeds: usize,
    pub rng_seed: u64,
    pub max_iter: usize,
    /// Residual tolerance in units of `m omega_z^2 l0`.
    pub tol: f64,
    /// Planarity threshold on max |z|, in units of `l0`.
    pub planarity_tol: f64,
    /// Amplitude of the random axial offsets added to generated seeds (l0).
    pub z_jitter: f64,
    /// Extra rotating-frame starting points (m), tried before generated seeds.
    pub initial_guesses: Vec<Vec<[f64; 3]>>,
}

impl Default for EquilibriumOptions {
    fn default() -> Self {
        Self {
            seeds: 30,
            rng_seed: 0x5eed,
            max_iter: 20_000,
            tol: 1e-9,
            planarity_tol: 1e-6,
            z_jitter: 0.0,
            initial_guesses: Vec::new(),
        }
    }
}

/// Triangular lattice patch of `n` sites nearest the centre in the metric of
/// the planar confinement, rotated by `angle`.
fn hex_seed(n: usize, trap: &ScaledTrap, angle: f64, rng: &mut ChaCha8Rng, jitter: f64, z_jitter: f64) -> Coords {
    let beta = trap.beta.max(1e-3);
    let radius = math::cbrt(3.0 * PI * n as f64 / (4.0 * beta));
    let a = math::sqrt(2.0 * PI * radius * radius / (math::sqrt(3.0) * n as f64)).max(0.5);
    let m = math::ceil(radius / a) as i64 + 3;
    let (s, c) = math::sin_cos(angle);
    let [kx, ky, _] = trap.stiffness();
    let mut sites: Vec<(f64, f64, f64)> = Vec::new();
    for i in -m..=m {
        for j in -m..=m {
            let u = a * (i as f64 + 0.5 * j as f64);
            let v = a * (math::sqrt(3.0) / 2.0) * j as f64;
            let x = c * u - s * v;
            let y = s * u + c * v;
            sites.push((kx * x * x + ky * y * y, x, y));
        }
    }
    sites.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.total_cmp(&q.1)).then(p.2.total_cmp(&q.2)));
    let mut out = Coords::zeros(n);
    for (k, (_, x, y)) in sites.into_iter().take(n).enumerate() {
        out.x[k] = x + jitter * a * (rng.random::<f64>() - 0.5);
        out.y[k] = y + jitter * a * (rng.random::<f64>() - 0.5);
        out.z[k] = z_jitter * (2.0 * rng.random::<f64>() - 1.0);
    }
    out
}

/// Uniform random points in the confinement ellipse with a hard-core distance.
fn random_seed(n: usize, trap: &ScaledTrap, rng: &mut ChaCha8Rng, z_jitter: f64) -> Coords {
    let beta = trap.beta.max(1e-3);
    let radius = math::cbrt(3.0 * PI * n as f64 / (4.0 * beta));
    let a = math::sqrt(2.0 * PI * radius * radius / (math::sqrt(3.0) * n as f64)).max(0.5);
    let [kx, ky, _] = trap.stiffness();
    let (rx, ry) = (radius * math::sqrt(beta / kx), radius * math::sqrt(beta / ky));
    let mut out = Coords::zeros(n);
    let mut placed = 0;
    let mut core = 0.6 * a;
    let mut attempts = 0;
    while placed < n {
        let x = rx * (2.0 * rng.random::<f64>() - 1.0);
        let y = ry * (2.0 * rng.random::<f64>() - 1.0);
        attempts += 1;
        if attempts % 10_000 == 0 {
            core *= 0.8;
        }
        if (x / rx) * (x / rx) + (y / ry) * (y / ry) > 1.0 {
            continue;
        }
        let clear = (0..placed).all(|k| {
            let (dx, dy) = (out.x[k] - x, out.y[k] - y);
            dx * dx + dy * dy > core * core
        });
        if clear {
            out.x[placed] = x;
            out.y[placed] = y;
            out.z[placed] = z_jitter * (2.0 * rng.random::<f64>() - 1.0);
            placed += 1;
        }
    }
    out
}

struct LocalMin {
    pos: Coords,
    energy: f64,
    gnorm: f64,
}

fn energy_and_gradient(flat: &[f64], trap: &ScaledTrap, grad: &mut [f64]) -> f64 {
    let pos = Coords::from_flat(flat);
    let e = match rotating_energy(&pos, trap) {
        Ok(e) => e,
        Err(_) => return f64::INFINITY,
    };
    let mut g = Coords::zeros(pos.len());
    rotating_gradient(&pos, trap, &mut g);
    for i in 0..pos.len() {
        grad[3 * i] = g.x[i];
        grad[3 * i + 1] = g.y[i];
        grad[3 * i + 2] = g.z[i];
    }
    if grad.iter().all(|v| v.is_finite()) {
        e
    } else {
        f64::INFINITY
    }
}

/// Newton iterations with the analytic Hessian while it stays positive definite.
fn newton_polish(x: &mut Vec<f64>, trap: &ScaledTrap) -> f64 {
    let mut g = alloc::vec![0.0; x.len()];
    let mut f = energy_and_gradient(x, trap, &mut g);
    let mut gnorm = inf_norm(&g);
    for _ in 0..30 {
        if gnorm < 1e-13 {
            break;
        }
        let h = total_hessian_scaled(&Coords::from_flat(x), trap);
        let Some(chol) = h.cholesky() else { break };
        let dx = chol.solve(&DVector::from_column_slice(&g));
        let mut step = 1.0;
        let mut improved = false;
        for _ in 0..20 {
            let trial: Vec<f64> = x.iter().zip(dx.iter()).map(|(a, d)| a - step * d).collect();
            let mut gt = alloc::vec![0.0; x.len()];
            let ft = energy_and_gradient(&trial, trap, &mut gt);
            let gt_norm = inf_norm(&gt);
            if ft.is_finite() && (gt_norm < gnorm || ft < f) {
                *x = trial;
                g = gt;
                f = ft;
                gnorm = gt_norm;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    gnorm
}

fn local_minimum(start: Coords, trap: &ScaledTrap, opts: &EquilibriumOptions) -> Option<LocalMin> {
    let lb = LbfgsOptions {
        max_iter: opts.max_iter,
        gtol: (opts.tol * 1e3).min(1e-6),
        memory: 12,
        max_step: 0.3,
    };
    let mut x = start.to_flat();
    for _ in 0..6 {
        let m = lbfgs(x, |p, g| energy_and_gradient(p, trap, g), &lb);
        x = m.x;
        newton_polish(&mut x, trap);
        // escape saddles along the most negative curvature direction
        let h = total_hessian_scaled(&Coords::from_flat(&x), trap);
        let eig = SymmetricEigen::new(h);
        let (kmin, lmin) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (k, &l)| if l < acc.1 { (k, l) } else { acc });
        if lmin >= -1e-12 {
            break;
        }
        let v = eig.eigenvectors.column(kmin);
        let amp = 0.05 / v.amax();
        for (xi, vi) in x.iter_mut().zip(v.iter()) {
            *xi += amp * vi;
        }
    }
    let mut g = alloc::vec![0.0; x.len()];
    let energy = energy_and_gradient(&x, trap, &mut g);
    if !energy.is_finite() {
        return None;
    }
    Some(LocalMin {
        pos: Coords::from_flat(&x),
        energy,
        gnorm: inf_norm(&g),
    })
}

/// Lowest-energy local minimum of the rotating-frame potential over all seeds.
pub fn find_equilibrium(
    n_ions: usize,
    trap: &TrapParams,
    species: &SpeciesParams,
    opts: &EquilibriumOptions,
) -> Result<EquilibriumConfig> {
    if n_ions == 0 {
        return Err(crate::error::invalid("n_ions", "must be at least 1"));
    }
    let scaled_trap = ScaledTrap::new(trap, species)?;
    let units = UnitSystem::new(species, trap.omega_z);

    let mut starts: Vec<Coords> = Vec::new();
    for guess in &opts.initial_guesses {
        if guess.len() != n_ions {
            return Err(Error::Shape(alloc::format!(
                "initial guess has {} ions, expected {n_ions}",
                guess.len()
            )));
        }
        starts.push(Coords::from_rows(guess, 1.0 / units.length_scale));
    }
    if n_ions == 1 {
        starts.push(Coords::zeros(1));
    } else {
        for k in 0..opts.seeds.max(1) {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.rng_seed.wrapping_add(k as u64));
            let seed = match k % 3 {
                0 => hex_seed(n_ions, &scaled_trap, (k / 3) as f64 * PI / 7.0, &mut rng, 0.02, opts.z_jitter),
                1 => hex_seed(n_ions, &scaled_trap, PI / 2.0 + (k / 3) as f64 * 0.3, &mut rng, 0.2, opts.z_jitter),
                _ => random_seed(n_ions, &scaled_trap, &mut rng, opts.z_jitter),
            };
            starts.push(seed);
        }
    }

    let mut best: Option<LocalMin> = None;
    for start in starts {
        if let Some(m) = local_minimum(start, &scaled_trap, opts) {
            let better = match &best {
                None => true,
                Some(b) => {
                    let b_ok = b.gnorm <= opts.tol;
                    let m_ok = m.gnorm <= opts.tol;
                    (m_ok && !b_ok) || (m_ok == b_ok && m.energy < b.energy - 1e-12 * b.energy.abs())
                }
            };
            if better {
                best = Some(m);
            }
        }
    }
    let best = best.ok_or(Error::NotConverged {
        residual: f64::INFINITY,
    })?;
    if best.gnorm > opts.tol {
        return Err(Error::NotConverged {
            residual: best.gnorm,
        });
    }
    let mut pos = best.pos;
    if pos.max_abs_z() < opts.planarity_tol {
        // planar minima are exact with z = 0
        pos.z.fill(0.0);
    }
    build(pos, &scaled_trap, *trap, *species, opts.planarity_tol)
}

/// Largest wall frequency (rad/s) with a planar equilibrium, located by
/// bisection to 2 pi x 50 Hz. `delta` follows `delta_over_beta` at every
/// trial frequency.
pub fn critical_wall_frequency(
    n_ions: usize,
    trap_template: &TrapParams,
    species: &SpeciesParams,
    delta_over_beta: f64,
    bracket: (f64, f64),
    opts: &EquilibriumOptions,
) -> Result<f64> {
    let (mut lo, mut hi) = bracket;
    if !(lo < hi) {
        return Err(Error::InvalidBracket(alloc::format!(
            "lower end {lo} must be below upper end {hi}"
        )));
    }
    let trap_at = |w: f64| {
        TrapParams::with_delta_ratio(
            trap_template.b_field,
            trap_template.omega_z,
            w,
            delta_over_beta,
            species,
        )
    };
    let mut opts = opts.clone();
    let eq_lo = find_equilibrium(n_ions, &trap_at(lo)?, species, &opts)?;
    if !eq_lo.planar {
        return Err(Error::InvalidBracket(alloc::format!(
            "equilibrium at {:.3} kHz is not planar",
            lo / (2.0 * PI * 1e3)
        )));
    }
    let eq_hi = find_equilibrium(n_ions, &trap_at(hi)?, species, &opts)?;
    if eq_hi.planar {
        return Err(Error::InvalidBracket(alloc::format!(
            "equilibrium at {:.3} kHz is still planar",
            hi / (2.0 * PI * 1e3)
        )));
    }
    let mut last_planar = eq_lo.positions_rot.clone();
    let tol = 2.0 * PI * 50.0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        opts.initial_guesses = alloc::vec![last_planar.clone()];
        let eq = find_equilibrium(n_ions, &trap_at(mid)?, species, &opts)?;
        if eq.planar {
            lo = mid;
            last_planar = eq.positions_rot;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Tripwire for a crystal that has rearranged since equilibrium.
///
/// An ion counts as having left its lattice site when it is closer to the
/// equilibrium site of a neighbour than to its own. Thermal motion near
/// 10 mK routinely carries edge ions several microns from their sites (the
/// softest planar modes twist the whole crystal), so a plain displacement
/// threshold fires long before any structural change does.
#[derive(Debug, Clone)]
pub(crate) struct SiteCheck {
    /// Sites within 1.5 nearest-neighbour distances of each site.
    neighbours: Vec<Vec<usize>>,
}

impl SiteCheck {
    pub fn new(eq: &Coords) -> Self {
        let n = eq.len();
        let dist = |i: usize, j: usize| {
            let (dx, dy, dz) = (eq.x[i] - eq.x[j], eq.y[i] - eq.y[j], eq.z[i] - eq.z[j]);
            math::sqrt(dx * dx + dy * dy + dz * dz)
        };
        let neighbours = (0..n)
            .map(|i| {
                let nearest = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| dist(i, j))
                    .fold(f64::INFINITY, f64::min);
                (0..n)
                    .filter(|&j| j != i && dist(i, j) <= 1.5 * nearest)
                    .collect()
            })
            .collect();
        Self { neighbours }
    }

    /// True when some ion in `pos` (rotating frame) sits nearer a
    /// neighbouring site of `eq` than its own.
    pub fn exceeded(&self, pos: &Coords, eq: &Coords) -> bool {
        let d2 = |i: usize, j: usize| {
            let (dx, dy, dz) = (pos.x[i] - eq.x[j], pos.y[i] - eq.y[j], pos.z[i] - eq.z[j]);
            dx * dx + dy * dy + dz * dz
        };
        self.neighbours
            .iter()
            .enumerate()
            .any(|(i, nb)| {
                let own = d2(i, i);
                nb.iter().any(|&j| d2(i, j) < own)
            })
    }
}

/// Dense symmetric matrix helper for tests and diagnostics.
#[allow(dead_code)]
pub(crate) fn min_eigenvalue(m: DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m).eigenvalues.min()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::default_nist_params;

    #[test]
    fn single_ion_sits_at_origin() {
        let (s, t) = default_nist_params();
        let eq = find_equilibrium(1, &t, &s, &EquilibriumOptions::default()).unwrap();
        assert_eq!(eq.positions_rot, alloc::vec![[0.0, 0.0, 0.0]]);
        assert!(eq.planar);
        assert_eq!(eq.energy, 0.0);
    }

    #[test]
    fn two_ions_align_with_soft_axis() {
        let (s, t) = default_nist_params();
        let eq = find_equilibrium(2, &t, &s, &EquilibriumOptions::default()).unwrap();
        let units = eq.units();
        let k_soft = t.beta(&s).unwrap() - t.delta;
        // oracle: bisection on the 1D force balance k (d/2) = 1/d^2 (dimensionless)
        let (mut a, mut b) = (1e-3, 1e3);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if k_soft * m / 2.0 - 1.0 / (m * m) > 0.0 {
                b = m;
            } else {
                a = m;
            }
        }
        let d = 0.5 * (a + b) * units.length_scale;
        let p = &eq.positions_rot;
        let sep = ((p[0][0] - p[1][0]).powi(2) + (p[0][1] - p[1][1]).powi(2)).sqrt();
        assert!(((sep - d) / d).abs() < 1e-9, "sep {sep} vs {d}");
        assert!(p[0][0].abs() < 1e-9 * d && p[1][0].abs() < 1e-9 * d);
        assert!((p[0][1] + p[1][1]).abs() < 1e-9 * d);
        assert!(eq.planar);
    }

    #[test]
    fn bad_bracket_is_rejected() {
        let (s, t) = default_nist_params();
        let opts = EquilibriumOptions::default();
        let r = critical_wall_frequency(3, &t, &s, 0.25, (2e5, 1e5), &opts);
        assert!(matches!(r, Err(Error::InvalidBracket(_))));
        // both ends planar for a 3-ion crystal far below the transition
        let r = critical_wall_frequency(3, &t, &s, 0.25, (2.0 * PI * 180e3, 2.0 * PI * 185e3), &opts);
        assert!(matches!(r, Err(Error::InvalidBracket(_))));
    }
}
