//! Energy CSV and snapshot writers.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nlpf_core::{snapshot, DiagnosticsRow, Error, Observer, SchemeState, StepOutcome};

pub const ENERGY_HEADER: &str =
    "k,t,mass_deviation,energy,pseudo_energy,grad_w_norm_sq,newton_iters,final_residual,law_energy,l4_norm,krylov_iters,tolerance";

/// Fixed 17-significant-digit scientific notation.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn energy_line(r: &DiagnosticsRow) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{}",
        r.k,
        fmt17(r.t),
        fmt17(r.mass_deviation),
        fmt17(r.energy),
        fmt17(r.pseudo_energy),
        fmt17(r.dissipation_norm_sq),
        r.newton_iters,
        fmt17(r.residual),
        fmt17(r.law_energy),
        fmt17(r.l4_norm),
        r.krylov_iters,
        fmt17(r.tolerance),
    )
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Domain(format!("writing {}: {e}", path.display()))
}

/// Streams one CSV line per diagnostics row, flushing as it goes so a failed
/// run still leaves the rows computed so far.
pub struct EnergyCsv {
    path: PathBuf,
    out: BufWriter<File>,
}

impl EnergyCsv {
    pub fn create(path: &Path) -> std::io::Result<Self> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{ENERGY_HEADER}")?;
        Ok(Self {
            path: path.to_path_buf(),
            out,
        })
    }
}

impl Observer for EnergyCsv {
    fn observe(
        &mut self,
        _: &SchemeState,
        row: &DiagnosticsRow,
        _: Option<&StepOutcome>,
    ) -> nlpf_core::Result<()> {
        writeln!(self.out, "{}", energy_line(row))
            .and_then(|_| self.out.flush())
            .map_err(|e| io_err(&self.path, e))
    }
}

/// Writes `snap_<k>.nlpf` every `every` steps, including the initial data.
pub struct Snapshots {
    dir: PathBuf,
    every: usize,
    pub written: Vec<PathBuf>,
}

impl Snapshots {
    pub fn new(dir: &Path, every: usize) -> std::io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            every,
            written: Vec::new(),
        })
    }

    pub fn path_for(&self, k: usize) -> PathBuf {
        self.dir.join(format!("snap_{k:06}.nlpf"))
    }
}

impl Observer for Snapshots {
    fn observe(
        &mut self,
        state: &SchemeState,
        row: &DiagnosticsRow,
        _: Option<&StepOutcome>,
    ) -> nlpf_core::Result<()> {
        if !row.k.is_multiple_of(self.every) {
            return Ok(());
        }
        let path = self.path_for(row.k);
        snapshot::write_file(&path, &state.phi_curr, state.t)
            .map_err(|e| Error::Domain(format!("writing {}: {e}", path.display())))?;
        self.written.push(path);
        Ok(())
    }
}
