//! Experiment drivers shared by the CLI and the tests: equilibria, mode
//! tables, evolutions with an optional spectrum acquisition, and scans.

use std::f64::consts::PI;
use std::path::Path;

use drumhead_core::run::{prepare, prepare_with_equilibrium, run_prepared, Prepared};
use drumhead_core::{
    find_equilibrium, Branch, CrystalState, DiagnosticsSeries, EquilibriumConfig, InitialState,
    ModeDecomposition, RunConfig, RunOutput,
};
use rayon::prelude::*;

use crate::config::{ConfigError, ExperimentConfig};
use crate::formats::{Trajectory, TrajectoryWriter};
use crate::spectrum::{drumhead_spectrum, match_peaks, PeakCriteria, PeakMatch, SpectrumError, SpectrumOptions, SpectrumResult};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Compute(#[from] drumhead_core::Error),
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("every scan point failed")]
    AllPointsFailed,
}

impl Error {
    /// Process exit code: 2 for configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub fn equilibrium(cfg: &ExperimentConfig) -> Result<EquilibriumConfig> {
    let trap = cfg.trap_params()?;
    Ok(find_equilibrium(cfg.crystal.n_ions, &trap, &cfg.species_params(), &cfg.equilibrium_options())?)
}

pub fn modes(cfg: &ExperimentConfig) -> Result<ModeDecomposition> {
    let eq = equilibrium(cfg)?;
    Ok(ModeDecomposition::new(&eq)?)
}

/// Spectrum of the free axial motion following a run.
#[derive(Debug, Clone)]
pub struct SpectrumReport {
    pub spectrum: SpectrumResult,
    /// Highest drumhead frequencies (Hz), descending.
    pub predicted_hz: Vec<f64>,
    pub peaks: Vec<PeakMatch>,
}

impl SpectrumReport {
    pub fn detected(&self) -> usize {
        self.peaks.iter().filter(|p| p.detected()).count()
    }
}

#[derive(Debug, Clone)]
pub struct EvolveOutput {
    pub run: RunOutput,
    pub spectrum: Option<SpectrumReport>,
}

/// Continue from `state` without (or with) lasers, sample z and analyse it.
pub fn acquire_spectrum(cfg: &ExperimentConfig, prep: &Prepared, base: &RunConfig, state: &CrystalState) -> Result<SpectrumReport> {
    let sp = &cfg.spectrum;
    let mut acq = base.clone();
    acq.duration = sp.acquisition_s;
    acq.sample_interval = (sp.acquisition_s / 10.0).max(base.dt);
    acq.initial_state = InitialState::Explicit(state.clone());
    if !sp.lasers {
        acq.cooling = None;
    }
    let prep = Prepared {
        equilibrium: prep.equilibrium.clone(),
        modes: prep.modes.clone(),
        initial: state.clone(),
    };
    let every = (sp.sample_dt_s / base.dt).round().max(1.0) as u64;
    let n = cfg.crystal.n_ions;
    let samples = (acq.n_steps() / every + 1) as usize;
    let mut z: Vec<Vec<f64>> = (0..n).map(|_| Vec::with_capacity(samples)).collect();
    run_prepared(&prep, &acq, every, |_, p, _| {
        for (zi, pi) in z.iter_mut().zip(p) {
            zi.push(pi[2]);
        }
    })?;
    let spectrum = drumhead_spectrum(
        &z,
        every as f64 * base.dt,
        &SpectrumOptions {
            segment_len: sp.segment_len,
            window: sp.window,
        },
    )?;
    let dec = prep.modes.as_ref().ok_or(drumhead_core::Error::NotPlanar {
        max_z: prep.equilibrium.max_abs_z(),
    })?;
    Ok(report(cfg, dec, spectrum))
}

fn report(cfg: &ExperimentConfig, dec: &ModeDecomposition, spectrum: SpectrumResult) -> SpectrumReport {
    let sp = &cfg.spectrum;
    let mut hz: Vec<f64> = dec.branch_frequencies(Branch::Drumhead).iter().map(|w| w / (2.0 * PI)).collect();
    hz.sort_by(|a, b| b.total_cmp(a));
    hz.truncate(sp.top_modes);
    let peaks = match_peaks(
        &spectrum,
        &hz,
        &PeakCriteria {
            window_hz: sp.peak_window_hz,
            threshold: sp.peak_threshold,
            floor_hz: sp.floor_window_hz,
        },
    );
    SpectrumReport {
        spectrum,
        predicted_hz: hz,
        peaks,
    }
}

/// Spectrum of a recorded trajectory, compared with the modes of `cfg`.
pub fn spectrum_of_trajectory(cfg: &ExperimentConfig, t: &Trajectory) -> Result<SpectrumReport> {
    let dec = modes(cfg)?;
    let spectrum = drumhead_spectrum(
        &t.z_series(),
        t.dt_sample,
        &SpectrumOptions {
            segment_len: cfg.spectrum.segment_len,
            window: cfg.spectrum.window,
        },
    )?;
    Ok(report(cfg, &dec, spectrum))
}

/// Run the configured evolution, optionally streaming a trajectory and
/// following it with a spectrum acquisition.
pub fn evolve(cfg: &ExperimentConfig, trajectory: Option<&Path>) -> Result<EvolveOutput> {
    let rc = cfg.run_config()?;
    let prep = prepare(&rc)?;
    evolve_prepared(cfg, &rc, &prep, trajectory)
}

pub fn evolve_prepared(cfg: &ExperimentConfig, rc: &RunConfig, prep: &Prepared, trajectory: Option<&Path>) -> Result<EvolveOutput> {
    let run = match trajectory {
        None => run_prepared(prep, rc, 0, |_, _, _| {})?,
        Some(path) => {
            let every = (cfg.output.trajectory_interval_s / rc.dt).round().max(1.0) as u64;
            let mut w = TrajectoryWriter::create(path, rc.n_ions, every as f64 * rc.dt)?;
            let mut io_err = None;
            let out = run_prepared(prep, rc, every, |t, p, v| {
                if io_err.is_none() {
                    io_err = w.push(t, p, v).err();
                }
            })?;
            if let Some(e) = io_err {
                return Err(e.into());
            }
            w.finish()?;
            out
        }
    };
    let spectrum = if cfg.spectrum.enabled {
        Some(acquire_spectrum(cfg, prep, rc, &run.final_state)?)
    } else {
        None
    };
    Ok(EvolveOutput { run, spectrum })
}

/// Last-millisecond averages of one scan point (mK).
#[derive(Debug, Clone)]
pub struct ScanSummary {
    pub planar: bool,
    pub ke_perp_mk: f64,
    pub ke_par_mk: f64,
    pub pe_mk: f64,
    pub reconfigured_at: Option<f64>,
    pub diagnostics: DiagnosticsSeries,
}

#[derive(Debug, Clone)]
pub struct ScanRow {
    pub wall_hz: f64,
    pub seed: u64,
    pub outcome: std::result::Result<ScanSummary, String>,
}

impl ScanRow {
    pub fn ok(&self) -> Option<&ScanSummary> {
        self.outcome.as_ref().ok()
    }
}

/// Averages over the final millisecond (or the whole run if shorter).
pub fn last_ms(d: &DiagnosticsSeries) -> (f64, f64, f64) {
    let t_end = d.times.last().copied().unwrap_or(0.0);
    let from = (t_end - 1e-3).max(d.times.first().copied().unwrap_or(0.0));
    let m = |s: &[f64]| DiagnosticsSeries::mean_after(s, &d.times, from) * 1e3;
    (m(&d.ke_perp), m(&d.ke_par), m(&d.pe))
}

/// Seed of scan point `index`: the master seed offset by the index.
pub fn point_seed(cfg: &ExperimentConfig, index: usize) -> u64 {
    cfg.seed.wrapping_add(index as u64)
}

/// One scan point: fresh equilibrium at `wall_hz`, thermal start, run.
pub fn scan_point(cfg: &ExperimentConfig, wall_hz: f64, seed: u64) -> std::result::Result<ScanSummary, String> {
    let rc = cfg.run_config_at(wall_hz, seed).map_err(|e| e.to_string())?;
    let eq = find_equilibrium(rc.n_ions, &rc.trap, &rc.species, &rc.equilibrium).map_err(|e| e.to_string())?;
    if !eq.planar {
        return Err(format!("equilibrium is not planar (max |z| = {:.3e} m)", eq.max_abs_z()));
    }
    let prep = prepare_with_equilibrium(&rc, eq).map_err(|e| e.to_string())?;
    let out = run_prepared(&prep, &rc, 0, |_, _, _| {}).map_err(|e| e.to_string())?;
    let (ke_perp_mk, ke_par_mk, pe_mk) = last_ms(&out.diagnostics);
    Ok(ScanSummary {
        planar: true,
        ke_perp_mk,
        ke_par_mk,
        pe_mk,
        reconfigured_at: out.diagnostics.reconfigured_at,
        diagnostics: out.diagnostics,
    })
}

/// Run every scan point on a pool of `jobs` threads (all cores if `None`).
/// Rows come back in scan order; failed points are kept as errors, see
/// [`all_failed`].
pub fn scan(cfg: &ExperimentConfig, jobs: Option<usize>) -> Result<Vec<ScanRow>> {
    let points = cfg
        .scan_points()
        .ok_or_else(|| ConfigError::Invalid("no [scan] section".into()))?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        pool = pool.num_threads(j.max(1));
    }
    let pool = pool.build().map_err(|e| ConfigError::Invalid(e.to_string()))?;
    let rows: Vec<ScanRow> = pool.install(|| {
        points
            .par_iter()
            .enumerate()
            .map(|(k, &hz)| {
                let seed = point_seed(cfg, k);
                ScanRow {
                    wall_hz: hz,
                    seed,
                    outcome: scan_point(cfg, hz, seed),
                }
            })
            .collect()
    });
    Ok(rows)
}

pub fn all_failed(rows: &[ScanRow]) -> bool {
    rows.iter().all(|r| r.outcome.is_err())
}
