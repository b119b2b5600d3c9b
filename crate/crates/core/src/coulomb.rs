//! Direct-summation Coulomb kernels in dimensionless units, where the pair
//! energy is `1/r` and the force on `i` from `j` is `(x_i - x_j)/r^3`.
//!
//! Summation order is fixed, so results are bit-reproducible.

use crate::error::{Error, Result};
use crate::math;
use crate::state::Coords;

const LANES: usize = 8;

/// `sum_{i<j} 1/|x_i - x_j|`.
pub fn pair_energy(pos: &Coords) -> Result<f64> {
    let n = pos.len();
    let mut total = 0.0;
    for i in 0..n {
        let mut acc = 0.0;
        for j in (i + 1)..n {
            let dx = pos.x[i] - pos.x[j];
            let dy = pos.y[i] - pos.y[j];
            let dz = pos.z[i] - pos.z[j];
            let r2 = dx * dx + dy * dy + dz * dz;
            if r2 == 0.0 {
                return Err(Error::CoincidentIons { i, j });
            }
            acc += 1.0 / math::sqrt(r2);
        }
        total += acc;
    }
    Ok(total)
}

/// First pair of coincident ions, if any.
pub fn find_coincident(pos: &Coords) -> Option<(usize, usize)> {
    let n = pos.len();
    for i in 0..n {
        for j in (i + 1)..n {
            if pos.x[i] == pos.x[j] && pos.y[i] == pos.y[j] && pos.z[i] == pos.z[j] {
                return Some((i, j));
            }
        }
    }
    None
}

/// Smallest pairwise distance (infinite for a single ion).
pub fn min_distance(pos: &Coords) -> f64 {
    let n = pos.len();
    let mut best = f64::INFINITY;
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = pos.x[i] - pos.x[j];
            let dy = pos.y[i] - pos.y[j];
            let dz = pos.z[i] - pos.z[j];
            best = best.min(dx * dx + dy * dy + dz * dz);
        }
    }
    math::sqrt(best)
}

/// Adds the Coulomb force on every ion to `out`.
///
/// Each pair is visited once. The `i` accumulator is split across `LANES`
/// partial sums so the inner loop vectorizes; coincident ions produce
/// non-finite output rather than an error (callers check finiteness).
pub fn accumulate_forces(pos: &Coords, out: &mut Coords) {
    // separate slice arguments let the compiler assume no aliasing
    pair_loop(&pos.x, &pos.y, &pos.z, &mut out.x, &mut out.y, &mut out.z);
}

fn pair_loop(xs: &[f64], ys: &[f64], zs: &[f64], fx: &mut [f64], fy: &mut [f64], fz: &mut [f64]) {
    let n = xs.len();
    let (ys, zs) = (&ys[..n], &zs[..n]);
    let (fx, fy, fz) = (&mut fx[..n], &mut fy[..n], &mut fz[..n]);

    for i in 0..n {
        let (xi, yi, zi) = (xs[i], ys[i], zs[i]);
        let mut ax = [0.0f64; LANES];
        let mut ay = [0.0f64; LANES];
        let mut az = [0.0f64; LANES];

        let start = i + 1;
        let chunks = (n - start) / LANES;
        for c in 0..chunks {
            let b = start + c * LANES;
            let xj: &[f64; LANES] = xs[b..b + LANES].try_into().unwrap();
            let yj: &[f64; LANES] = ys[b..b + LANES].try_into().unwrap();
            let zj: &[f64; LANES] = zs[b..b + LANES].try_into().unwrap();
            let fxj: &mut [f64; LANES] = (&mut fx[b..b + LANES]).try_into().unwrap();
            let fyj: &mut [f64; LANES] = (&mut fy[b..b + LANES]).try_into().unwrap();
            let fzj: &mut [f64; LANES] = (&mut fz[b..b + LANES]).try_into().unwrap();
            for l in 0..LANES {
                let dx = xi - xj[l];
                let dy = yi - yj[l];
                let dz = zi - zj[l];
                let r2 = dx * dx + dy * dy + dz * dz;
                let inv3 = 1.0 / (r2 * math::sqrt(r2));
                let gx = dx * inv3;
                let gy = dy * inv3;
                let gz = dz * inv3;
                ax[l] += gx;
                ay[l] += gy;
                az[l] += gz;
                fxj[l] -= gx;
                fyj[l] -= gy;
                fzj[l] -= gz;
            }
        }
        let mut sx = 0.0;
        let mut sy = 0.0;
        let mut sz = 0.0;
        for j in (start + chunks * LANES)..n {
            let dx = xi - xs[j];
            let dy = yi - ys[j];
            let dz = zi - zs[j];
            let r2 = dx * dx + dy * dy + dz * dz;
            let inv3 = 1.0 / (r2 * math::sqrt(r2));
            sx += dx * inv3;
            sy += dy * inv3;
            sz += dz * inv3;
            fx[j] -= dx * inv3;
            fy[j] -= dy * inv3;
            fz[j] -= dz * inv3;
        }
        for l in 0..LANES {
            sx += ax[l];
            sy += ay[l];
            sz += az[l];
        }
        fx[i] += sx;
        fy[i] += sy;
        fz[i] += sz;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    fn naive(pos: &Coords) -> Coords {
        let n = pos.len();
        let mut f = Coords::zeros(n);
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let d = [pos.x[i] - pos.x[j], pos.y[i] - pos.y[j], pos.z[i] - pos.z[j]];
                let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
                f.x[i] += d[0] / (r * r * r);
                f.y[i] += d[1] / (r * r * r);
                f.z[i] += d[2] / (r * r * r);
            }
        }
        f
    }

    fn scattered(n: usize) -> Coords {
        let mut c = Coords::zeros(n);
        for i in 0..n {
            let t = i as f64;
            c.x[i] = (t * 1.37).sin() * 7.0 + 0.01 * t;
            c.y[i] = (t * 0.71).cos() * 5.0 - 0.02 * t;
            c.z[i] = (t * 2.3).sin() * 0.5;
        }
        c
    }

    #[test]
    fn kernel_matches_naive_sum() {
        for n in [1, 2, 7, 8, 9, 17, 54] {
            let pos = scattered(n);
            let mut f = Coords::zeros(n);
            accumulate_forces(&pos, &mut f);
            let g = naive(&pos);
            for i in 0..n {
                for (a, b) in [(f.x[i], g.x[i]), (f.y[i], g.y[i]), (f.z[i], g.z[i])] {
                    assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()), "n={n} i={i} {a} {b}");
                }
            }
            let total: Vec<f64> = [&f.x, &f.y, &f.z].iter().map(|v| v.iter().sum()).collect();
            for t in total {
                assert!(t.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn energy_and_coincidence() {
        let mut c = Coords::zeros(2);
        c.x[1] = 2.0;
        assert_eq!(pair_energy(&c).unwrap(), 0.5);
        c.x[1] = 0.0;
        assert_eq!(pair_energy(&c), Err(Error::CoincidentIons { i: 0, j: 1 }));
        assert_eq!(find_coincident(&c), Some((0, 1)));
        assert_eq!(pair_energy(&Coords::zeros(1)).unwrap(), 0.0);
    }
}
