//! Named experiment recipes for the standard NIST scenarios.
//!
//! Branch temperatures of exactly zero are entered as 1e-9 mK: a planar
//! crystal with no axial motion at all stays planar forever by symmetry,
//! so a round-off sized seed is needed for energy to reach the drumhead
//! branch. Any floating-point simulation started from a numerical
//! equilibrium carries axial noise of this order anyway.

use crate::config::{Coulomb, ExperimentConfig, ScanSection};

/// Stand-in for a zero branch temperature (mK).
pub const ZERO_MK: f64 = 1e-9;

pub const NAMES: &[&str] = &[
    "fig2c", "fig2d", "fig3a", "fig3b", "fig3c", "fig3d", "fig4b", "fig4b-lin", "fig4c", "fig4b-ci",
    "fig4b-lin-ci", "fig4c-ci", "sm-long",
];

/// One-line description of each recipe.
pub fn describe(name: &str) -> Option<&'static str> {
    Some(match name {
        "fig2c" => "N=54 at 180 kHz, all modes 10 mK, lasers on, 10 ms, then drumhead spectrum",
        "fig2d" => "N=54 at 204 kHz, all modes 10 mK, lasers on, 10 ms, then drumhead spectrum",
        "fig3a" => "N=54 at 204 kHz, linearized, free, ExB 10 mK / cyclotron 1 mK, 10 ms",
        "fig3b" => "N=54 at 204 kHz, full Coulomb, free, ExB 10 mK / cyclotron 1 mK, 10 ms",
        "fig3c" => "N=54 at 204 kHz, linearized, lasers on, all modes 10 mK, 10 ms",
        "fig3d" => "N=54 at 204 kHz, full Coulomb, lasers on, all modes 10 mK, 10 ms",
        "fig4b" => "N=100 scan 180-194 kHz (15 points), free, ExB 10 mK, 10 ms",
        "fig4b-lin" => "linearized counterpart of fig4b",
        "fig4c" => "N=100 scan 180-194 kHz (15 points), lasers on, all modes 10 mK, 10 ms",
        "fig4b-ci" => "fig4b on 5 points",
        "fig4b-lin-ci" => "fig4b-lin on 5 points",
        "fig4c-ci" => "fig4c on 5 points",
        "sm-long" => "N=54 at 180 kHz, all modes 10 mK, lasers on, 200 ms",
        _ => return None,
    })
}

/// Wall frequencies (Hz) of the reduced scans: the 1 kHz grid of the full
/// scan, sampled more densely towards the planar limit.
pub const CI_SCAN_HZ: [f64; 5] = [180e3, 186e3, 190e3, 192e3, 193e3];

fn base(n: usize, wall_hz: f64, name: &str) -> ExperimentConfig {
    let mut c = ExperimentConfig {
        name: name.into(),
        ..Default::default()
    };
    c.crystal.n_ions = n;
    c.trap.wall_frequency_hz = wall_hz;
    c.run.duration_s = 10e-3;
    c.output.dir = format!("out/{name}").into();
    c
}

fn all_at(c: &mut ExperimentConfig, mk: f64) {
    c.initial.drumhead_mk = mk;
    c.initial.exb_mk = mk;
    c.initial.cyclotron_mk = mk;
}

fn scan(c: &mut ExperimentConfig, points: Option<Vec<f64>>) {
    c.trap.wall_frequency_hz = 180e3;
    c.scan = Some(ScanSection {
        wall_frequencies_hz: points,
        ..Default::default()
    });
}

pub fn recipe(name: &str) -> Option<ExperimentConfig> {
    let c = match name {
        "fig2c" | "fig2d" | "sm-long" => {
            let wall = if name == "fig2d" { 204e3 } else { 180e3 };
            let mut c = base(54, wall, name);
            all_at(&mut c, 10.0);
            c.cooling.enabled = true;
            if name == "sm-long" {
                c.run.duration_s = 200e-3;
                c.run.sample_interval_s = 10e-6;
            } else {
                c.spectrum.enabled = true;
            }
            c
        }
        "fig3a" | "fig3b" => {
            let mut c = base(54, 204e3, name);
            c.initial.drumhead_mk = ZERO_MK;
            c.initial.exb_mk = 10.0;
            c.initial.cyclotron_mk = 1.0;
            if name == "fig3a" {
                c.run.coulomb = Coulomb::Linearized;
            }
            c
        }
        "fig3c" | "fig3d" => {
            let mut c = base(54, 204e3, name);
            all_at(&mut c, 10.0);
            c.cooling.enabled = true;
            if name == "fig3c" {
                c.run.coulomb = Coulomb::Linearized;
            }
            c
        }
        "fig4b" | "fig4b-lin" | "fig4b-ci" | "fig4b-lin-ci" => {
            let mut c = base(100, 180e3, name);
            c.initial.drumhead_mk = ZERO_MK;
            c.initial.exb_mk = 10.0;
            c.initial.cyclotron_mk = ZERO_MK;
            if name.contains("lin") {
                c.run.coulomb = Coulomb::Linearized;
            }
            scan(&mut c, name.ends_with("-ci").then(|| CI_SCAN_HZ.to_vec()));
            c
        }
        "fig4c" | "fig4c-ci" => {
            let mut c = base(100, 180e3, name);
            all_at(&mut c, 10.0);
            c.cooling.enabled = true;
            scan(&mut c, name.ends_with("-ci").then(|| CI_SCAN_HZ.to_vec()));
            c
        }
        _ => return None,
    };
    Some(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_recipe_validates() {
        for name in NAMES {
            let c = recipe(name).unwrap();
            c.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
            assert!(describe(name).is_some());
            assert_eq!(c.name, *name);
        }
        assert!(recipe("fig9").is_none());
    }

    #[test]
    fn full_scans_use_the_standard_grid() {
        let c = recipe("fig4c").unwrap();
        let p = c.scan_points().unwrap();
        assert_eq!(p.len(), 15);
        assert_eq!(recipe("fig4b-ci").unwrap().scan_points().unwrap().len(), 5);
        // reduced points lie on the full grid
        for f in CI_SCAN_HZ {
            assert!(p.iter().any(|g| (g - f).abs() < 1e-6));
        }
    }
}
