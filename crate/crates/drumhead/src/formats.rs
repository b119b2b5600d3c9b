//! Output files.
//!
//! CSV files start with a block of `#` comment lines holding the resolved
//! configuration (as TOML) and the seeds, then a header row and data.
//!
//! Binary files are little-endian. Every field is 8 bytes wide.
//!
//! Eigenvectors (`eigenvectors.bin`):
//!
//! ```text
//! magic    b"DRMHEIG1"
//! n_ions   u64
//! count    u64   number of modes, 3N
//! rows     u64   6N
//! layout   u64   1: column-major complex, rows (K^1/2 q, v) with each half
//!                interleaved per ion as x0 y0 z0 x1 ..., dimensionless
//! freq     count x f64   rotating-frame frequency (Hz)
//! branch   count x u64   0 drumhead, 1 ExB, 2 cyclotron
//! data     count x rows x (re f64, im f64)
//! ```
//!
//! Trajectories (`trajectory.bin`):
//!
//! ```text
//! magic      b"DRMHTRJ1"
//! n_ions     u64
//! dt_sample  f64  (s)
//! count      u64  number of samples
//! samples    count x (t, x0 y0 z0 ..., vx0 vy0 vz0 ...)  lab frame, SI
//! ```

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::Path;

use drumhead_core::{Branch, DiagnosticsSeries, EquilibriumConfig, ModeDecomposition};

use crate::spectrum::{PeakMatch, SpectrumResult};

pub const EIGEN_MAGIC: &[u8; 8] = b"DRMHEIG1";
pub const TRAJ_MAGIC: &[u8; 8] = b"DRMHTRJ1";

/// Comment block written at the top of every CSV file.
#[derive(Debug, Clone, Default)]
pub struct Header {
    pub lines: Vec<String>,
}

impl Header {
    pub fn new(config_toml: &str) -> Self {
        let mut lines = vec![format!("drumhead {}", env!("CARGO_PKG_VERSION"))];
        lines.extend(config_toml.lines().map(str::to_string));
        Self { lines }
    }

    pub fn with(mut self, line: impl Into<String>) -> Self {
        self.lines.push(line.into());
        self
    }

    fn write(&self, w: &mut impl Write) -> io::Result<()> {
        for l in &self.lines {
            writeln!(w, "# {l}")?;
        }
        Ok(())
    }
}

fn csv_file(path: &Path, header: &Header) -> io::Result<csv::Writer<BufWriter<File>>> {
    let mut f = BufWriter::new(File::create(path)?);
    header.write(&mut f)?;
    Ok(csv::Writer::from_writer(f))
}

fn finish(mut w: csv::Writer<BufWriter<File>>) -> io::Result<()> {
    w.flush()?;
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.9e}")).unwrap_or_default()
}

/// `ion, x_um, y_um, z_um` in the rotating frame.
pub fn write_equilibrium_csv(path: &Path, header: &Header, eq: &EquilibriumConfig) -> io::Result<()> {
    let mut w = csv_file(path, header)?;
    w.write_record(["ion", "x_um", "y_um", "z_um"])?;
    for (i, p) in eq.positions_rot.iter().enumerate() {
        w.write_record([
            i.to_string(),
            format!("{:.12e}", p[0] * 1e6),
            format!("{:.12e}", p[1] * 1e6),
            format!("{:.12e}", p[2] * 1e6),
        ])?;
    }
    finish(w)
}

/// `index, branch, frequency_hz` (rotating frame).
pub fn write_modes_csv(path: &Path, header: &Header, dec: &ModeDecomposition) -> io::Result<()> {
    let mut w = csv_file(path, header)?;
    w.write_record(["index", "branch", "frequency_hz"])?;
    for (k, (f, b)) in dec.frequencies.iter().zip(&dec.branches).enumerate() {
        w.write_record([
            k.to_string(),
            b.name().to_string(),
            format!("{:.12e}", f / (2.0 * std::f64::consts::PI)),
        ])?;
    }
    finish(w)
}

/// Diagnostics in mK; branch temperature cells are empty when unavailable.
pub fn write_diagnostics_csv(path: &Path, header: &Header, d: &DiagnosticsSeries) -> io::Result<()> {
    let mut w = csv_file(path, header)?;
    w.write_record(["t_s", "KE_perp_mK", "KE_par_mK", "PE_mK", "T_drum_mK", "T_exb_mK", "T_cyc_mK"])?;
    for k in 0..d.len() {
        let bt = d.branch_temps[k];
        w.write_record([
            format!("{:.9e}", d.times[k]),
            format!("{:.9e}", d.ke_perp[k] * 1e3),
            format!("{:.9e}", d.ke_par[k] * 1e3),
            format!("{:.9e}", d.pe[k] * 1e3),
            opt(bt.map(|b| b.t_drumhead * 1e3)),
            opt(bt.map(|b| b.t_exb * 1e3)),
            opt(bt.map(|b| b.t_cyclotron * 1e3)),
        ])?;
    }
    finish(w)
}

/// `freq_Hz, power_norm` up to `max_hz`.
pub fn write_psd_csv(path: &Path, header: &Header, s: &SpectrumResult, max_hz: f64) -> io::Result<()> {
    let header = header.clone().with(format!(
        "welch: segment_len {} sample_rate {} Hz segments {} window {:?}",
        s.segment_len, s.sample_rate, s.segments, s.window
    ));
    let mut w = csv_file(path, &header)?;
    w.write_record(["freq_Hz", "power_norm"])?;
    for (f, p) in s.frequencies.iter().zip(&s.power) {
        if *f > max_hz {
            break;
        }
        w.write_record([format!("{f:.6}"), format!("{p:.9e}")])?;
    }
    finish(w)
}

/// `predicted_hz, detected, peak_hz`.
pub fn write_peaks_csv(path: &Path, header: &Header, peaks: &[PeakMatch]) -> io::Result<()> {
    let mut w = csv_file(path, header)?;
    w.write_record(["predicted_hz", "detected", "peak_hz"])?;
    for p in peaks {
        w.write_record([
            format!("{:.3}", p.predicted_hz),
            p.detected().to_string(),
            p.peak_hz.map(|f| format!("{f:.3}")).unwrap_or_default(),
        ])?;
    }
    finish(w)
}

/// Generic writer for tables built elsewhere (scan summaries).
pub fn write_table_csv(path: &Path, header: &Header, columns: &[&str], rows: &[Vec<String>]) -> io::Result<()> {
    let mut w = csv_file(path, header)?;
    w.write_record(columns)?;
    for r in rows {
        w.write_record(r)?;
    }
    finish(w)
}

/// Data rows of a CSV file written by this module.
pub fn read_csv_rows(path: &Path) -> io::Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    let head = r.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(rec?.iter().map(str::to_string).collect());
    }
    Ok((head, rows))
}

fn put_u64(w: &mut impl Write, v: u64) -> io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn put_f64(w: &mut impl Write, v: f64) -> io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn get_u64(r: &mut impl Read) -> io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn get_f64(r: &mut impl Read) -> io::Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn check_magic(r: &mut impl Read, magic: &[u8; 8]) -> io::Result<()> {
    let mut m = [0u8; 8];
    r.read_exact(&mut m)?;
    if &m != magic {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "bad magic"));
    }
    Ok(())
}

fn branch_code(b: Branch) -> u64 {
    match b {
        Branch::Drumhead => 0,
        Branch::ExB => 1,
        Branch::Cyclotron => 2,
    }
}

pub fn write_eigenvectors(path: &Path, dec: &ModeDecomposition) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let v = &dec.eigenvectors;
    w.write_all(EIGEN_MAGIC)?;
    put_u64(&mut w, dec.n_ions() as u64)?;
    put_u64(&mut w, v.ncols() as u64)?;
    put_u64(&mut w, v.nrows() as u64)?;
    put_u64(&mut w, 1)?;
    for f in &dec.frequencies {
        put_f64(&mut w, f / (2.0 * std::f64::consts::PI))?;
    }
    for b in &dec.branches {
        put_u64(&mut w, branch_code(*b))?;
    }
    for c in 0..v.ncols() {
        for r in 0..v.nrows() {
            put_f64(&mut w, v[(r, c)].re)?;
            put_f64(&mut w, v[(r, c)].im)?;
        }
    }
    w.flush()
}

/// Contents of an eigenvector file.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenFile {
    pub n_ions: usize,
    pub frequencies_hz: Vec<f64>,
    pub branches: Vec<u64>,
    /// Column-major `(re, im)` pairs, `rows` per mode.
    pub rows: usize,
    pub data: Vec<(f64, f64)>,
}

pub fn read_eigenvectors(path: &Path) -> io::Result<EigenFile> {
    let mut r = BufReader::new(File::open(path)?);
    check_magic(&mut r, EIGEN_MAGIC)?;
    let n = get_u64(&mut r)? as usize;
    let count = get_u64(&mut r)? as usize;
    let rows = get_u64(&mut r)? as usize;
    let layout = get_u64(&mut r)?;
    if layout != 1 {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "unknown layout"));
    }
    let frequencies_hz = (0..count).map(|_| get_f64(&mut r)).collect::<io::Result<_>>()?;
    let branches = (0..count).map(|_| get_u64(&mut r)).collect::<io::Result<_>>()?;
    let data = (0..count * rows)
        .map(|_| Ok((get_f64(&mut r)?, get_f64(&mut r)?)))
        .collect::<io::Result<_>>()?;
    Ok(EigenFile {
        n_ions: n,
        frequencies_hz,
        branches,
        rows,
        data,
    })
}

/// Streams lab-frame samples to disk; the sample count is patched in on
/// [`TrajectoryWriter::finish`].
pub struct TrajectoryWriter {
    w: BufWriter<File>,
    n: usize,
    count: u64,
}

impl TrajectoryWriter {
    pub fn create(path: &Path, n_ions: usize, dt_sample: f64) -> io::Result<Self> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(TRAJ_MAGIC)?;
        put_u64(&mut w, n_ions as u64)?;
        put_f64(&mut w, dt_sample)?;
        put_u64(&mut w, 0)?;
        Ok(Self { w, n: n_ions, count: 0 })
    }

    pub fn push(&mut self, t: f64, pos: &[[f64; 3]], vel: &[[f64; 3]]) -> io::Result<()> {
        if pos.len() != self.n || vel.len() != self.n {
            return Err(io::Error::new(io::ErrorKind::InvalidInput, "ion count mismatch"));
        }
        put_f64(&mut self.w, t)?;
        for p in pos {
            for c in p {
                put_f64(&mut self.w, *c)?;
            }
        }
        for v in vel {
            for c in v {
                put_f64(&mut self.w, *c)?;
            }
        }
        self.count += 1;
        Ok(())
    }

    pub fn finish(mut self) -> io::Result<u64> {
        self.w.flush()?;
        let mut f = self.w.into_inner().map_err(|e| e.into_error())?;
        f.seek(SeekFrom::Start(8 + 8 + 8))?;
        f.write_all(&self.count.to_le_bytes())?;
        f.flush()?;
        Ok(self.count)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub n_ions: usize,
    pub dt_sample: f64,
    pub times: Vec<f64>,
    pub positions: Vec<Vec<[f64; 3]>>,
    pub velocities: Vec<Vec<[f64; 3]>>,
}

impl Trajectory {
    /// Axial coordinate series per ion.
    pub fn z_series(&self) -> Vec<Vec<f64>> {
        (0..self.n_ions)
            .map(|i| self.positions.iter().map(|p| p[i][2]).collect())
            .collect()
    }
}

pub fn read_trajectory(path: &Path) -> io::Result<Trajectory> {
    let mut r = BufReader::new(File::open(path)?);
    check_magic(&mut r, TRAJ_MAGIC)?;
    let n = get_u64(&mut r)? as usize;
    let dt_sample = get_f64(&mut r)?;
    let count = get_u64(&mut r)? as usize;
    let mut t = Trajectory {
        n_ions: n,
        dt_sample,
        times: Vec::with_capacity(count),
        positions: Vec::with_capacity(count),
        velocities: Vec::with_capacity(count),
    };
    let triple = |r: &mut BufReader<File>| -> io::Result<[f64; 3]> { Ok([get_f64(r)?, get_f64(r)?, get_f64(r)?]) };
    for _ in 0..count {
        t.times.push(get_f64(&mut r)?);
        t.positions.push((0..n).map(|_| triple(&mut r)).collect::<io::Result<_>>()?);
        t.velocities.push((0..n).map(|_| triple(&mut r)).collect::<io::Result<_>>()?);
    }
    Ok(t)
}
