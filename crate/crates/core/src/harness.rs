//! Convergence studies along a linear refinement path and the canonical
//! experiments.
//!
//! No exact solutions are available for these kernels, so accuracy is
//! measured by the Cauchy difference between a coarse run and the
//! 2x2-averaged next-finer run at the same final time.

use std::fmt::Write as _;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::convolution::{Backend, KernelGrid, KernelSpec};
use crate::energy::{Equation, ModelParams};
use crate::error::{Error, Result};
use crate::grid::{norm2, Field, GridSpec};
use crate::stepper::SolverConfig;
use crate::trajectory::{run, step_count, DiagnosticsSeries, InvariantReport};

/// Name of the restriction used for Cauchy errors, recorded with results.
pub const RESTRICTION: &str = "2x2 cell average";

/// `0.5 sin(2 pi x) cos(2 pi y)` at cell centers.
pub fn initial_sinusoid(grid: GridSpec) -> Field {
    let tau = 2.0 * std::f64::consts::PI;
    Field::from_fn(grid, |x, y| 0.5 * (tau * x).sin() * (tau * y).cos())
}

/// `mean + amplitude * U(-1, 1)` per cell, deterministic in `seed`, then
/// shifted so the discrete average is exactly `mean` up to round-off.
pub fn initial_random(grid: GridSpec, mean: f64, amplitude: f64, seed: u64) -> Result<Field> {
    if !(amplitude > 0.0 && amplitude.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "random amplitude must be positive, got {amplitude}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut phi = Field::from_index_fn(grid, |_, _| amplitude * rng.gen_range(-1.0..1.0));
    let shift = phi.mean();
    phi.add_scalar(mean - shift);
    Ok(phi)
}

/// 2x2 average of a field onto the grid with half the resolution.
pub fn restrict(fine: &Field) -> Result<Field> {
    let fg = *fine.grid();
    let cg = fg.coarsened()?;
    Ok(Field::from_index_fn(cg, |i, j| {
        0.25 * (fine.get(2 * i, 2 * j)
            + fine.get(2 * i + 1, 2 * j)
            + fine.get(2 * i, 2 * j + 1)
            + fine.get(2 * i + 1, 2 * j + 1))
    }))
}

/// Piecewise-constant injection onto the grid with twice the resolution.
pub fn prolongate(coarse: &Field) -> Result<Field> {
    let fg = coarse.grid().refined()?;
    Ok(Field::from_index_fn(fg, |i, j| coarse.get(i / 2, j / 2)))
}

/// `||coarse - restrict(fine)||_2` with the coarse-grid weight.
pub fn cauchy_error(coarse_final: &Field, fine_final: &Field) -> Result<f64> {
    let fg = fine_final.grid();
    let cg = coarse_final.grid();
    if fg.m() != 2 * cg.m() || fg.n() != 2 * cg.n() {
        return Err(Error::GridMismatch {
            left: cg.to_string(),
            right: fg.to_string(),
        });
    }
    let r = restrict(fine_final)?;
    cg.check_same(r.grid())?;
    Ok(norm2(&(coarse_final - &r)))
}

/// Initial data recipes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialData {
    Sinusoid,
    Random {
        mean: f64,
        amplitude: f64,
        seed: u64,
    },
    Constant(f64),
}

impl InitialData {
    pub fn build(&self, grid: GridSpec) -> Result<Field> {
        match *self {
            InitialData::Sinusoid => Ok(initial_sinusoid(grid)),
            InitialData::Random {
                mean,
                amplitude,
                seed,
            } => initial_random(grid, mean, amplitude, seed),
            InitialData::Constant(c) => Ok(Field::constant(grid, c)),
        }
    }
}

/// Everything needed to set up a run except the resolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec {
    pub equation: Equation,
    pub mobility: f64,
    pub gamma_c: f64,
    pub gamma_e: f64,
    pub kernel: KernelSpec,
    /// Lower-left corner of the square domain.
    pub origin: f64,
    /// Side length of the square domain.
    pub length: f64,
    pub initial: InitialData,
}

impl ModelSpec {
    pub fn grid(&self, m: usize) -> Result<GridSpec> {
        GridSpec::square(self.origin, self.length, m)
    }

    pub fn build(
        &self,
        m: usize,
        backend: Backend,
    ) -> Result<(GridSpec, KernelGrid, ModelParams, Field)> {
        let grid = self.grid(m)?;
        let kernel = self.kernel.build(grid)?.with_backend(backend);
        let params = ModelParams::new(
            self.equation,
            self.mobility,
            self.gamma_c,
            self.gamma_e,
            &kernel,
        )?;
        let phi0 = self.initial.build(grid)?;
        Ok((grid, kernel, params, phi0))
    }
}

/// One row of a rate table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudyRow {
    pub coarse_m: usize,
    pub fine_m: usize,
    pub coarse_h: f64,
    pub fine_h: f64,
    pub error: f64,
    pub rate: Option<f64>,
}

/// Summary of one level's run.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSummary {
    pub m: usize,
    pub steps: usize,
    pub step_size: f64,
    pub invariants: InvariantReport,
    pub l4_bound: f64,
    pub newton_iters: usize,
    pub krylov_iters: usize,
    pub seconds: f64,
}

/// A convergence study along `s = C h`.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinementStudy {
    pub levels: Vec<usize>,
    pub refinement_constant: f64,
    pub t_final: f64,
    pub model: ModelSpec,
    pub backend: Backend,
    pub solver: SolverConfig,
    /// Slack factor (times the step tolerance) for the invariant audit.
    pub invariant_slack: f64,
    pub rows: Vec<StudyRow>,
    pub summaries: Vec<LevelSummary>,
}

impl RefinementStudy {
    pub fn new(
        levels: Vec<usize>,
        refinement_constant: f64,
        t_final: f64,
        model: ModelSpec,
    ) -> Self {
        Self {
            levels,
            refinement_constant,
            t_final,
            model,
            backend: Backend::Auto,
            solver: SolverConfig::default(),
            invariant_slack: 10.0,
            rows: Vec::new(),
            summaries: Vec::new(),
        }
    }

    pub fn with_backend(mut self, backend: Backend) -> Self {
        self.backend = backend;
        self
    }

    pub fn with_solver(mut self, solver: SolverConfig) -> Self {
        self.solver = solver;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels.is_empty() {
            return Err(Error::InvalidParams(
                "a study needs at least one level".into(),
            ));
        }
        for w in self.levels.windows(2) {
            if w[1] != 2 * w[0] {
                return Err(Error::InvalidParams(format!(
                    "levels must double: {} is followed by {}",
                    w[0], w[1]
                )));
            }
        }
        if !(self.refinement_constant > 0.0) {
            return Err(Error::InvalidParams(
                "refinement constant must be positive".into(),
            ));
        }
        for &m in &self.levels {
            let h = self.model.grid(m)?.h();
            step_count(self.t_final, self.refinement_constant * h)?;
        }
        Ok(())
    }

    /// Errors column, in row order.
    pub fn errors(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.error).collect()
    }

    /// Rates column, `None` for the first row.
    pub fn rates(&self) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r.rate).collect()
    }

    /// CSV with columns `coarse_h,fine_h,error_l2,rate`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("coarse_h,fine_h,error_l2,rate\n");
        for r in &self.rows {
            let rate = r.rate.map(|v| format!("{v:.16e}")).unwrap_or_default();
            let _ = writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{}",
                r.coarse_h, r.fine_h, r.error, rate
            );
        }
        out
    }

    /// Aligned plain-text table with 15 decimals.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:>10} {:>10} {:>20} {:>20}",
            "coarse h", "fine h", "||e_A||_2", "rate"
        );
        let side = |m: usize| {
            let n = m as f64 / self.model.length;
            if n.fract() == 0.0 {
                format!("1/{}", n as u64)
            } else {
                format!("{:.6e}", self.model.length / m as f64)
            }
        };
        for r in &self.rows {
            let rate = r
                .rate
                .map(|v| format!("{v:.15}"))
                .unwrap_or_else(|| "-".into());
            let _ = writeln!(
                out,
                "{:>10} {:>10} {:>20.15} {:>20}",
                side(r.coarse_m),
                side(r.fine_m),
                r.error,
                rate
            );
        }
        let _ = writeln!(
            out,
            "# restriction: {RESTRICTION}; s = {} h; T = {}",
            self.refinement_constant, self.t_final
        );
        out
    }
}

/// Runs one level of a study, returning its final field and summary.
pub fn run_level(
    study: &RefinementStudy,
    m: usize,
) -> Result<(Field, LevelSummary, DiagnosticsSeries)> {
    let started = Instant::now();
    let (grid, kernel, params, phi0) = study.model.build(m, study.backend)?;
    let s = study.refinement_constant * grid.h();
    let (state, series) = run(
        &phi0,
        study.t_final,
        s,
        &kernel,
        &params,
        &study.solver,
        &mut [],
    )?;
    let summary = LevelSummary {
        m,
        steps: series.steps(),
        step_size: s,
        invariants: series.audit(study.invariant_slack),
        l4_bound: series.l4_bound,
        newton_iters: series.rows.iter().map(|r| r.newton_iters).sum(),
        krylov_iters: series.rows.iter().map(|r| r.krylov_iters).sum(),
        seconds: started.elapsed().as_secs_f64(),
    };
    Ok((state.phi_curr, summary, series))
}

/// Runs every level with `s = C h` to time `T` and fills in the Cauchy
/// errors and `log2` rates.
pub fn convergence_study(mut study: RefinementStudy) -> Result<RefinementStudy> {
    convergence_study_with(&mut study, |_, _| {})?;
    Ok(study)
}

/// Like [`convergence_study`], reporting each finished level to `progress`.
pub fn convergence_study_with(
    study: &mut RefinementStudy,
    mut progress: impl FnMut(&LevelSummary, Option<&StudyRow>),
) -> Result<()> {
    study.validate()?;
    study.rows.clear();
    study.summaries.clear();
    let mut previous: Option<Field> = None;
    for &m in &study.levels.clone() {
        let (fine, summary, _) = run_level(study, m).map_err(|e| Error::AtLevel {
            level: m,
            source: Box::new(e),
        })?;
        let mut new_row = None;
        if let Some(coarse) = previous.take() {
            let error = cauchy_error(&coarse, &fine)?;
            let rate = study
                .rows
                .last()
                .map(|r: &StudyRow| (r.error / error).log2());
            let row = StudyRow {
                coarse_m: coarse.grid().m(),
                fine_m: m,
                coarse_h: coarse.grid().h(),
                fine_h: fine.grid().h(),
                error,
                rate,
            };
            study.rows.push(row);
            new_row = Some(row);
        }
        progress(&summary, new_row.as_ref());
        study.summaries.push(summary);
        previous = Some(fine);
    }
    Ok(())
}

/// Allen-Cahn phase separation from a random perturbation of a constant.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSeparationConfig {
    pub model: ModelSpec,
    pub m: usize,
    pub step_size: f64,
    pub t_final: f64,
    pub backend: Backend,
    pub solver: SolverConfig,
    pub slack_factor: f64,
}

/// Runs the configuration and requires the pseudo energy to be non-increasing
/// (within the slack) at every step.
pub fn energy_decay_experiment(config: &PhaseSeparationConfig) -> Result<DiagnosticsSeries> {
    let (_, kernel, params, phi0) = config.model.build(config.m, config.backend)?;
    let (_, series) = run(
        &phi0,
        config.t_final,
        config.step_size,
        &kernel,
        &params,
        &config.solver,
        &mut [],
    )?;
    series.check_invariants(config.slack_factor)?;
    Ok(series)
}

/// Canonical experiment setups.
pub mod presets {
    use super::*;

    fn sinusoid_model(equation: Equation, gamma_e: f64) -> ModelSpec {
        let sigma = 0.05;
        ModelSpec {
            equation,
            mobility: 1.0,
            gamma_c: 0.0,
            gamma_e,
            kernel: KernelSpec::Gaussian {
                alpha: 1.0 / (sigma * sigma),
                sigma,
            },
            origin: -0.5,
            length: 1.0,
            initial: InitialData::Sinusoid,
        }
    }

    /// Final time of the rate studies.
    pub const T_RATE: f64 = 0.015625;
    /// `s = C h` along the refinement path.
    pub const C_RATE: f64 = 0.1;

    /// Cahn-Hilliard, `gamma_e = 1` (`alpha_0 = pi - 3 > 0`).
    pub fn nch_gamma_e_1(levels: Vec<usize>) -> RefinementStudy {
        RefinementStudy::new(
            levels,
            C_RATE,
            T_RATE,
            sinusoid_model(Equation::CahnHilliard, 1.0),
        )
    }

    /// Cahn-Hilliard, `gamma_e = 2` (`alpha_0 = pi - 6 < 0`).
    pub fn nch_gamma_e_2(levels: Vec<usize>) -> RefinementStudy {
        RefinementStudy::new(
            levels,
            C_RATE,
            T_RATE,
            sinusoid_model(Equation::CahnHilliard, 2.0),
        )
    }

    /// Allen-Cahn, `gamma_e = 2`, `M = 1`.
    pub fn nac_gamma_e_2(levels: Vec<usize>) -> RefinementStudy {
        RefinementStudy::new(
            levels,
            C_RATE,
            T_RATE,
            sinusoid_model(Equation::AllenCahn, 2.0),
        )
    }

    /// Difference-of-Gaussians phase separation on `(-10, 10)^2`.
    pub fn phase_separation(m: usize, t_final: f64, seed: u64) -> PhaseSeparationConfig {
        let (s1, s2) = (0.16, 0.4);
        PhaseSeparationConfig {
            model: ModelSpec {
                equation: Equation::AllenCahn,
                mobility: 1.0,
                gamma_c: 0.0,
                gamma_e: 0.0,
                kernel: KernelSpec::DifferenceOfGaussians {
                    alpha: 0.1 / (s1 * s1),
                    sigma1: s1,
                    beta: 0.08 / (s2 * s2),
                    sigma2: s2,
                },
                origin: -10.0,
                length: 20.0,
                initial: InitialData::Random {
                    mean: 0.0,
                    amplitude: 0.05,
                    seed,
                },
            },
            m,
            step_size: 0.01,
            t_final,
            backend: Backend::Auto,
            solver: SolverConfig::default(),
            slack_factor: 10.0,
        }
    }
}
