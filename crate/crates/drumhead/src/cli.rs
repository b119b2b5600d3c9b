//! Command-line front end.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::{ConfigError, ConfigTree, ExperimentConfig};
use crate::experiment::{self, all_failed, Error, Result};
use crate::formats::{self, Header};
use crate::recipes;

#[derive(Debug, Parser)]
#[command(name = "drumhead", version, about = "Planar Penning-trap ion crystal experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML experiment file, layered over the recipe if both are given.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Built-in recipe used as the base configuration.
    #[arg(long, global = true)]
    pub recipe: Option<String>,
    /// Output directory (overrides output.dir).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Master seed (overrides `seed`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for scans; defaults to all cores.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Override a config key, e.g. `--set trap.wall_frequency_hz=2.04e5`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Find the planar equilibrium and write equilibrium.csv.
    Equilibrium,
    /// Normal modes: modes.csv and eigenvectors.bin.
    Modes,
    /// Time evolution: diagnostics.csv, optional trajectory and spectrum.
    Evolve,
    /// Wall-frequency scan: scan.csv with last-millisecond averages.
    Scan,
    /// Drumhead power spectrum, from a fresh run or a trajectory file.
    Spectrum {
        /// Analyse this trajectory instead of running the configuration.
        #[arg(long)]
        trajectory: Option<PathBuf>,
    },
    /// List the built-in recipes.
    Recipes,
    /// Print the fully resolved configuration.
    ShowConfig,
}

impl Cli {
    pub fn resolve(&self) -> std::result::Result<ExperimentConfig, ConfigError> {
        let mut tree = match &self.recipe {
            Some(name) => ConfigTree::from_config(
                &recipes::recipe(name).ok_or_else(|| ConfigError::UnknownRecipe(name.clone()))?,
            ),
            None => ConfigTree::from_config(&ExperimentConfig::default()),
        };
        if let Some(path) = &self.config {
            tree.merge(ConfigTree::from_file(path)?);
        }
        for s in &self.overrides {
            tree.set(s)?;
        }
        if let Some(seed) = self.seed {
            tree.set(&format!("seed={seed}"))?;
        }
        if let Some(out) = &self.out {
            tree.set(&format!("output.dir={}", toml::Value::String(out.display().to_string())))?;
        }
        tree.resolve()
    }
}

fn header(cfg: &ExperimentConfig) -> Header {
    Header::new(&cfg.to_toml_string()).with(format!("cooling_rng_seed = {}", cfg.cooling_seed()))
}

fn out_dir(cfg: &ExperimentConfig) -> Result<&Path> {
    std::fs::create_dir_all(&cfg.output.dir)?;
    Ok(&cfg.output.dir)
}

pub fn cmd_equilibrium(cfg: &ExperimentConfig) -> Result<()> {
    let eq = experiment::equilibrium(cfg)?;
    let dir = out_dir(cfg)?;
    let h = header(cfg)
        .with(format!("energy_J = {:.12e}", eq.energy))
        .with(format!("planar = {}", eq.planar))
        .with(format!("radius_um = {:.6}", eq.radius() * 1e6));
    formats::write_equilibrium_csv(&dir.join("equilibrium.csv"), &h, &eq)?;
    println!(
        "N={} wall={:.3} kHz energy={:.6e} J planar={} max|z|={:.3e} um radius={:.3} um residual={:.3e} N",
        eq.n_ions(),
        cfg.trap.wall_frequency_hz / 1e3,
        eq.energy,
        eq.planar,
        eq.max_abs_z() * 1e6,
        eq.radius() * 1e6,
        eq.gradient_norm
    );
    Ok(())
}

pub fn cmd_modes(cfg: &ExperimentConfig) -> Result<()> {
    let dec = experiment::modes(cfg)?;
    let dir = out_dir(cfg)?;
    let overlap = dec.branch_overlap();
    formats::write_modes_csv(&dir.join("modes.csv"), &header(cfg).with(format!("branch_overlap = {overlap}")), &dec)?;
    formats::write_eigenvectors(&dir.join("eigenvectors.bin"), &dec)?;
    println!("{} modes, drumhead/ExB overlap: {overlap}", dec.frequencies.len());
    Ok(())
}

fn write_spectrum(cfg: &ExperimentConfig, dir: &Path, rep: &experiment::SpectrumReport) -> Result<()> {
    let h = header(cfg);
    let top = rep.predicted_hz.first().copied().unwrap_or(0.0) + 50e3;
    formats::write_psd_csv(&dir.join("psd.csv"), &h, &rep.spectrum, top)?;
    formats::write_peaks_csv(&dir.join("peaks.csv"), &h, &rep.peaks)?;
    println!(
        "spectrum: {} of {} highest drumhead modes resolved",
        rep.detected(),
        rep.predicted_hz.len()
    );
    Ok(())
}

pub fn cmd_evolve(cfg: &ExperimentConfig) -> Result<()> {
    let dir = out_dir(cfg)?.to_path_buf();
    let traj = cfg.output.trajectory.then(|| dir.join("trajectory.bin"));
    let out = experiment::evolve(cfg, traj.as_deref())?;
    let d = &out.run.diagnostics;
    let mut h = header(cfg);
    if let Some(t) = d.reconfigured_at {
        h = h.with(format!("reconfigured_at_s = {t:.9e}"));
    }
    formats::write_diagnostics_csv(&dir.join("diagnostics.csv"), &h, d)?;
    let (kp, kz, pe) = experiment::last_ms(d);
    println!(
        "{} steps, {} scattering events; last ms: KE_perp {kp:.4} mK, KE_par {kz:.4} mK, PE {pe:.4} mK",
        out.run.steps, out.run.scatter_events
    );
    if let Some(t) = d.reconfigured_at {
        println!("warning: crystal reconfigured at {:.3} ms; branch temperatures omitted", t * 1e3);
    }
    if let Some(rep) = &out.spectrum {
        write_spectrum(cfg, &dir, rep)?;
    }
    Ok(())
}

pub fn cmd_spectrum(cfg: &ExperimentConfig, trajectory: Option<&Path>) -> Result<()> {
    let dir = out_dir(cfg)?.to_path_buf();
    let rep = match trajectory {
        None => {
            let mut cfg = cfg.clone();
            cfg.spectrum.enabled = true;
            cfg.validate()?;
            experiment::evolve(&cfg, None)?
                .spectrum
                .expect("spectrum enabled")
        }
        Some(path) => {
            let t = formats::read_trajectory(path)?;
            experiment::spectrum_of_trajectory(cfg, &t)?
        }
    };
    write_spectrum(cfg, &dir, &rep)
}

pub fn cmd_scan(cfg: &ExperimentConfig, jobs: Option<usize>) -> Result<()> {
    let dir = out_dir(cfg)?.to_path_buf();
    let rows = experiment::scan(cfg, jobs)?;
    let cols = [
        "wall_hz", "seed", "status", "KE_perp_mK", "KE_par_mK", "PE_mK", "reconfigured_at_s",
    ];
    let mut table = Vec::new();
    for r in &rows {
        let mut row = vec![format!("{:.3}", r.wall_hz), r.seed.to_string()];
        match &r.outcome {
            Ok(s) => {
                row.push("ok".into());
                row.push(format!("{:.9e}", s.ke_perp_mk));
                row.push(format!("{:.9e}", s.ke_par_mk));
                row.push(format!("{:.9e}", s.pe_mk));
                row.push(s.reconfigured_at.map(|t| format!("{t:.9e}")).unwrap_or_default());
                if cfg.scan.as_ref().is_some_and(|s| s.save_diagnostics) {
                    let name = format!("diagnostics_{:.0}Hz.csv", r.wall_hz);
                    let h = header(cfg).with(format!("wall_hz = {}", r.wall_hz)).with(format!("point_seed = {}", r.seed));
                    formats::write_diagnostics_csv(&dir.join(name), &h, &s.diagnostics)?;
                }
                println!(
                    "{:8.3} kHz  KE_perp {:.4}  KE_par {:.4}  PE {:.4} mK",
                    r.wall_hz / 1e3,
                    s.ke_perp_mk,
                    s.ke_par_mk,
                    s.pe_mk
                );
            }
            Err(e) => {
                row.push(format!("failed: {e}"));
                row.extend(std::iter::repeat_n(String::new(), 4));
                println!("{:8.3} kHz  failed: {e}", r.wall_hz / 1e3);
            }
        }
        table.push(row);
    }
    formats::write_table_csv(&dir.join("scan.csv"), &header(cfg), &cols, &table)?;
    if all_failed(&rows) {
        return Err(Error::AllPointsFailed);
    }
    Ok(())
}

/// Parse arguments, run, and return the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    if let Command::Recipes = cli.command {
        for name in recipes::NAMES {
            println!("{name:14} {}", recipes::describe(name).unwrap_or(""));
        }
        return 0;
    }
    let cfg = match cli.resolve() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let result = match &cli.command {
        Command::Equilibrium => cmd_equilibrium(&cfg),
        Command::Modes => cmd_modes(&cfg),
        Command::Evolve => cmd_evolve(&cfg),
        Command::Scan => cmd_scan(&cfg, cli.jobs),
        Command::Spectrum { trajectory } => cmd_spectrum(&cfg, trajectory.as_deref()),
        Command::ShowConfig => {
            print!("{}", cfg.to_toml_string());
            Ok(())
        }
        Command::Recipes => unreachable!(),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
