//! The `run`, `converge`, `energy-test`, and `selftest` subcommands.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use nlpf_core::harness::{convergence_study_with, presets, RefinementStudy};
use nlpf_core::trajectory::{step_count, InvariantReport};
use nlpf_core::{
    conv_apply, inner_product, laplacian, norm_inf, run, snapshot, Backend, DiagnosticsSeries,
    Equation, Field, GridSpec, KernelGrid, ModelParams, Observer, SchemeState, VertexField,
};

use crate::config::{InitialSpec, RunConfig, StudyConfig};
use crate::output::{EnergyCsv, Snapshots};

/// Flags shared by all subcommands.
#[derive(Debug, Clone)]
pub struct Options {
    /// Overrides the configured convolution backend.
    pub backend: Option<Backend>,
    /// Relative output paths are resolved against this directory.
    pub out: PathBuf,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            backend: None,
            out: PathBuf::from("."),
        }
    }
}

impl Options {
    fn resolve(&self, path: &Path) -> PathBuf {
        self.out.join(path)
    }
}

/// Reads and parses a run configuration; relative input paths in it are
/// taken relative to the file.
pub fn load_run(path: &Path) -> Result<RunConfig> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    RunConfig::parse(&text, path.parent().unwrap_or(Path::new(".")))
        .with_context(|| format!("in config {}", path.display()))
}

pub fn load_study(path: &Path) -> Result<StudyConfig> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    StudyConfig::parse(&text, path.parent().unwrap_or(Path::new(".")))
        .with_context(|| format!("in config {}", path.display()))
}

/// Everything a run needs, validated.
pub struct Prepared {
    pub grid: GridSpec,
    pub kernel: KernelGrid,
    pub params: ModelParams,
    pub phi0: Field,
    pub steps: usize,
}

/// Builds grid, kernel, parameters, and initial data, rejecting
/// inconsistent configurations before any time stepping.
pub fn prepare(cfg: &RunConfig, opts: &Options) -> Result<Prepared> {
    let steps = step_count(cfg.t_final, cfg.step_size)?;
    let grid = cfg.grid()?;
    let backend = opts.backend.unwrap_or(cfg.model.backend);
    let kernel = cfg
        .model
        .kernel
        .build_with_images(grid, cfg.model.kernel_images)?
        .with_backend(backend);
    let model = &cfg.model;
    let params = ModelParams::new(
        model.equation,
        model.mobility,
        model.gamma_c,
        model.gamma_e,
        &kernel,
    )?;
    let phi0 = match &model.initial {
        InitialSpec::Builtin(data) => data.build(grid)?,
        InitialSpec::File(path) => {
            let snap = snapshot::read_file(path)
                .with_context(|| format!("reading initial data {}", path.display()))?;
            if !snap.field.grid().same_as(&grid) {
                bail!(
                    "initial data {} is on {}, but the config asks for {}",
                    path.display(),
                    snap.field.grid(),
                    grid
                );
            }
            snap.field
        }
    };
    Ok(Prepared {
        grid,
        kernel,
        params,
        phi0,
        steps,
    })
}

/// Outcome of a completed run.
pub struct RunOutput {
    pub state: SchemeState,
    pub series: DiagnosticsSeries,
    pub energy_csv: Option<PathBuf>,
    pub snapshots: Vec<PathBuf>,
}

/// Runs the configuration, streaming the energy CSV and snapshots. Does not
/// check invariants.
pub fn execute(cfg: &RunConfig, opts: &Options) -> Result<RunOutput> {
    let p = prepare(cfg, opts)?;
    let csv_path = cfg.energy_csv.as_deref().map(|p| opts.resolve(p));
    let mut csv = csv_path
        .as_deref()
        .map(EnergyCsv::create)
        .transpose()
        .context("creating energy CSV")?;
    let mut snaps = if cfg.snapshot_every > 0 {
        Some(
            Snapshots::new(&opts.resolve(&cfg.snapshot_dir), cfg.snapshot_every)
                .context("creating snapshot directory")?,
        )
    } else {
        None
    };
    let mut observers: Vec<&mut dyn Observer> = Vec::new();
    if let Some(c) = csv.as_mut() {
        observers.push(c);
    }
    if let Some(s) = snaps.as_mut() {
        observers.push(s);
    }
    let (state, series) = run(
        &p.phi0,
        cfg.t_final,
        cfg.step_size,
        &p.kernel,
        &p.params,
        &cfg.model.solver,
        &mut observers,
    )?;
    drop(observers);
    let mut snapshots = snaps.map(|s| s.written).unwrap_or_default();
    if cfg.snapshot_every > 0 && p.steps % cfg.snapshot_every != 0 {
        // always keep the final state
        let path = opts
            .resolve(&cfg.snapshot_dir)
            .join(format!("snap_{:06}.nlpf", p.steps));
        snapshot::write_file(&path, &state.phi_curr, state.t)?;
        snapshots.push(path);
    }
    Ok(RunOutput {
        state,
        series,
        energy_csv: csv_path,
        snapshots,
    })
}

/// `nlpf run`: errors on solver failure or a violated invariant.
pub fn cmd_run(cfg: &RunConfig, opts: &Options) -> Result<RunOutput> {
    let out = execute(cfg, opts)?;
    let report = out.series.check_invariants(cfg.invariant_slack)?;
    let last = out.series.rows.last().expect("series has the initial row");
    println!(
        "{} steps to t = {}: F = {:.16e}, pseudo energy = {:.16e}, max |mass deviation| = {:.3e}",
        out.series.steps(),
        last.t,
        last.energy,
        last.pseudo_energy,
        report.max_mass_deviation
    );
    if let Some(p) = &out.energy_csv {
        println!("energy series: {}", p.display());
    }
    if !out.snapshots.is_empty() {
        println!(
            "{} snapshots in {}",
            out.snapshots.len(),
            opts.resolve(&cfg.snapshot_dir).display()
        );
    }
    Ok(out)
}

/// One line per invariant with its worst margin.
pub fn invariant_lines(rep: &InvariantReport) -> Vec<(bool, String)> {
    vec![
        (
            rep.energy_law_excess <= 0.0,
            format!(
                "discrete energy law, worst excess {:.3e}",
                rep.energy_law_excess
            ),
        ),
        (
            rep.pseudo_energy_increase <= 0.0,
            format!(
                "pseudo energy non-increasing, worst step increase {:.3e}",
                rep.pseudo_energy_increase
            ),
        ),
        (
            rep.energy_above_initial <= 0.0,
            format!(
                "F(phi^k) <= F(phi^0), worst excess {:.3e}",
                rep.energy_above_initial
            ),
        ),
        (
            rep.l4_excess <= 0.0,
            format!("l4 a priori bound, worst excess {:.3e}", rep.l4_excess),
        ),
    ]
}

/// `nlpf energy-test`: runs the configuration and reports every energy
/// invariant separately. Errors if any fails.
pub fn cmd_energy_test(cfg: &RunConfig, opts: &Options) -> Result<InvariantReport> {
    let out = execute(cfg, opts)?;
    let rep = out.series.audit(cfg.invariant_slack);
    let (first, last) = (
        out.series.rows[0],
        *out.series.rows.last().expect("non-empty series"),
    );
    println!(
        "{} steps of s = {} to t = {}",
        out.series.steps(),
        cfg.step_size,
        last.t
    );
    println!("F: {:.16e} -> {:.16e}", first.energy, last.energy);
    println!("max |mass deviation|: {:.3e}", rep.max_mass_deviation);
    let mut failed = 0;
    for (ok, line) in invariant_lines(&rep) {
        println!("{} {line}", if ok { "PASS" } else { "FAIL" });
        failed += usize::from(!ok);
    }
    if failed > 0 {
        bail!(
            "{failed} energy invariant(s) violated, first at step {}",
            rep.first_violation.map_or("?".into(), |k| k.to_string())
        );
    }
    Ok(rep)
}

/// `nlpf converge`: runs the study and writes the rate table.
pub fn cmd_converge(cfg: &StudyConfig, opts: &Options) -> Result<RefinementStudy> {
    let spec = cfg.model.model_spec()?;
    let mut study = RefinementStudy::new(
        cfg.levels.clone(),
        cfg.refinement_constant,
        cfg.t_final,
        spec,
    )
    .with_backend(opts.backend.unwrap_or(cfg.model.backend))
    .with_solver(cfg.model.solver);
    study.invariant_slack = cfg.invariant_slack;
    if cfg.model.kernel_images != 0 {
        bail!("kernel.images is not supported for refinement studies");
    }
    convergence_study_with(&mut study, |lvl, row| {
        let err = row
            .map(|r| format!(", e_A = {:.15}", r.error))
            .unwrap_or_default();
        eprintln!(
            "level m = {}: {} steps of s = {:.6e} in {:.1}s{err}",
            lvl.m, lvl.steps, lvl.step_size, lvl.seconds
        );
    })?;

    let mut csv = study.to_csv();
    let mut text = study.to_text();
    if study.rows.is_empty() {
        eprintln!("warning: a single level gives no Cauchy differences; the error column is empty");
        let h = study.model.length / cfg.levels[0] as f64;
        csv.push_str(&format!("{h:.16e},,,\n"));
        text.push_str("# single level: no errors to report\n");
    }
    print!("{text}");
    for (path, body) in [(&cfg.csv, &csv), (&cfg.text, &text)] {
        if let Some(p) = path {
            let p = opts.resolve(p);
            if let Some(dir) = p.parent() {
                fs::create_dir_all(dir)?;
            }
            fs::write(&p, body).with_context(|| format!("writing {}", p.display()))?;
        }
    }
    let broken: Vec<String> = study
        .summaries
        .iter()
        .filter(|s| !s.invariants.energy_stable() || s.invariants.l4_excess > 0.0)
        .map(|s| format!("m = {}", s.m))
        .collect();
    if !broken.is_empty() {
        bail!(
            "energy invariants violated at level(s) {}",
            broken.join(", ")
        );
    }
    Ok(study)
}

/// Result of one self-test check.
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn check(name: &'static str, pass: bool, detail: String) -> Check {
    Check { name, pass, detail }
}

fn random(grid: GridSpec, seed: u64) -> Result<Field> {
    Ok(nlpf_core::initial_random(grid, 0.0, 1.0, seed)?)
}

/// `nlpf selftest`: fast property checks on small grids.
pub fn cmd_selftest() -> Result<Vec<Check>> {
    let mut checks = Vec::new();

    // backends against each other on a rectangle
    let grid = GridSpec::new(0.0, 0.0, 1.5, 1.0, 24, 16)?;
    let f = VertexField::from_vec(grid, random(grid, 1)?.into_vec())?;
    let phi = random(grid, 2)?;
    let gap =
        norm_inf(&(&conv_apply(&f, &phi, Backend::Fft)? - &conv_apply(&f, &phi, Backend::Direct)?));
    checks.push(check(
        "fft and direct convolution agree",
        gap <= 1e-12,
        format!("max gap {gap:.2e}"),
    ));

    let psi = random(grid, 3)?;
    let (a, b) = (
        inner_product(&phi, &laplacian(&psi))?,
        inner_product(&laplacian(&phi), &psi)?,
    );
    let sym = (a - b).abs() / a.abs().max(1.0);
    let dir = -inner_product(&phi, &laplacian(&phi))?;
    checks.push(check(
        "laplacian symmetric and negative",
        sym <= 1e-12 && dir >= 0.0,
        format!("asymmetry {sym:.2e}, -<phi, lap phi> = {dir:.3e}"),
    ));

    let bytes = snapshot::encode(&phi, 0.25);
    let back = snapshot::decode(&bytes)?;
    let exact = back.field == phi && back.t == 0.25;
    let truncated = snapshot::decode(&bytes[..snapshot::HEADER_LEN]).is_err();
    checks.push(check(
        "snapshot round trip",
        exact && truncated,
        format!("bit-exact {exact}, truncated file rejected {truncated}"),
    ));

    for (name, study) in [
        (
            "short nCH run is energy stable",
            presets::nch_gamma_e_2(vec![32]),
        ),
        (
            "short nAC run is energy stable",
            presets::nac_gamma_e_2(vec![32]),
        ),
    ] {
        let (_, kernel, params, phi0) = study.model.build(32, Backend::Auto)?;
        let (_, series) = nlpf_core::trajectory::run_steps(
            &phi0,
            8,
            1e-3,
            &kernel,
            &params,
            &study.solver,
            &mut [],
        )?;
        let rep = series.audit(10.0);
        // only Cahn-Hilliard conserves mass
        let mass_ok = params.equation == Equation::AllenCahn || rep.max_mass_deviation <= 1e-12;
        let ok = invariant_lines(&rep).iter().all(|(ok, _)| *ok) && mass_ok;
        checks.push(check(
            name,
            ok,
            format!(
                "law excess {:.2e}, mass {:.2e}",
                rep.energy_law_excess, rep.max_mass_deviation
            ),
        ));
    }
    Ok(checks)
}
