//! Driving the scheme from `t = 0` to `T` and recording diagnostics.

use crate::convolution::KernelGrid;
use crate::energy::{energy_with_conv, l4_bound_from_energy, Equation, ModelParams};
use crate::error::{Error, Result};
use crate::grid::{dot, grad_norm_sq, norm4, Field};
use crate::stepper::{step, SchemeState, SolverConfig, StepOutcome};

/// One row of the diagnostics series. Row `k = 0` describes the initial
/// data, with zero iterations and residual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRow {
    pub k: usize,
    pub t: f64,
    /// `h^2 <phi^k - phi^0, 1>`.
    pub mass_deviation: f64,
    pub energy: f64,
    pub pseudo_energy: f64,
    /// `F + B_e/4 ||d||^2 + h^2/4 <J*d, d>` with `d = phi^k - phi^{k-1}`:
    /// the quantity for which the energy law holds with a non-negative
    /// remainder. Differs from `pseudo_energy` by `B_c/4 ||d||^2`.
    pub law_energy: f64,
    /// `||grad_h w||_2^2` for Cahn-Hilliard, `||w||_2^2` for Allen-Cahn.
    pub dissipation_norm_sq: f64,
    pub newton_iters: usize,
    pub krylov_iters: usize,
    pub residual: f64,
    /// Tolerance the step's residual was held to.
    pub tolerance: f64,
    pub l4_norm: f64,
}

/// Per-step record of a run together with the run-level constants needed to
/// audit it.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsSeries {
    pub equation: Equation,
    pub step_size: f64,
    pub mobility: f64,
    pub l4_bound: f64,
    pub rows: Vec<DiagnosticsRow>,
}

/// Largest violation of each invariant over a series; non-positive means
/// satisfied.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct InvariantReport {
    /// `max_k [L_k + weight * dissipation_k - L_{k-1}] - slack_k` with `L`
    /// the law energy.
    pub energy_law_excess: f64,
    /// `max_k [pseudo_E_k - pseudo_E_{k-1}] - slack_k`.
    pub pseudo_energy_increase: f64,
    /// `max_k [F_k - F_0] - slack_k`.
    pub energy_above_initial: f64,
    pub max_mass_deviation: f64,
    /// `max_k ||phi^k||_4 - bound`.
    pub l4_excess: f64,
    /// First step where any energy invariant fails.
    pub first_violation: Option<usize>,
}

impl InvariantReport {
    pub fn energy_stable(&self) -> bool {
        self.energy_law_excess <= 0.0
            && self.pseudo_energy_increase <= 0.0
            && self.energy_above_initial <= 0.0
    }
}

impl DiagnosticsSeries {
    pub fn steps(&self) -> usize {
        self.rows.len().saturating_sub(1)
    }

    /// Checks the discrete energy law, monotone pseudo energy, the bound by
    /// the initial energy, and the `l4` a priori bound, each with a slack of
    /// `slack_factor` times the step tolerance.
    pub fn audit(&self, slack_factor: f64) -> InvariantReport {
        let mut rep = InvariantReport {
            energy_law_excess: f64::NEG_INFINITY,
            pseudo_energy_increase: f64::NEG_INFINITY,
            energy_above_initial: f64::NEG_INFINITY,
            max_mass_deviation: 0.0,
            l4_excess: f64::NEG_INFINITY,
            first_violation: None,
        };
        let Some(first) = self.rows.first() else {
            return rep;
        };
        let weight = match self.equation {
            Equation::AllenCahn => self.mobility * self.step_size,
            Equation::CahnHilliard => self.step_size,
        };
        rep.l4_excess = first.l4_norm - self.l4_bound;
        for pair in self.rows.windows(2) {
            let (prev, cur) = (&pair[0], &pair[1]);
            let slack = slack_factor * cur.tolerance;
            let law = cur.law_energy + weight * cur.dissipation_norm_sq - prev.law_energy - slack;
            let mono = cur.pseudo_energy - prev.pseudo_energy - slack;
            let above = cur.energy - first.energy - slack;
            if (law > 0.0 || mono > 0.0 || above > 0.0) && rep.first_violation.is_none() {
                rep.first_violation = Some(cur.k);
            }
            rep.energy_law_excess = rep.energy_law_excess.max(law);
            rep.pseudo_energy_increase = rep.pseudo_energy_increase.max(mono);
            rep.energy_above_initial = rep.energy_above_initial.max(above);
            rep.max_mass_deviation = rep.max_mass_deviation.max(cur.mass_deviation.abs());
            rep.l4_excess = rep.l4_excess.max(cur.l4_norm - self.l4_bound);
        }
        rep
    }

    /// Errors at the first step breaking the energy law, or the `l4` bound.
    pub fn check_invariants(&self, slack_factor: f64) -> Result<InvariantReport> {
        let rep = self.audit(slack_factor);
        if let Some(step) = rep.first_violation {
            return Err(Error::Invariant {
                step,
                detail: format!(
                    "energy stability lost (energy-law excess {:.3e}, pseudo-energy increase {:.3e}, F above F(phi0) by {:.3e})",
                    rep.energy_law_excess, rep.pseudo_energy_increase, rep.energy_above_initial
                ),
            });
        }
        if rep.l4_excess > 0.0 {
            let step = self
                .rows
                .iter()
                .find(|r| r.l4_norm > self.l4_bound)
                .map_or(0, |r| r.k);
            return Err(Error::Invariant {
                step,
                detail: format!(
                    "||phi||_4 exceeds the a priori bound {:.6e} by {:.3e}",
                    self.l4_bound, rep.l4_excess
                ),
            });
        }
        Ok(rep)
    }
}

/// Callback invoked after every accepted step (and once for the initial data
/// with `outcome = None`).
pub trait Observer {
    fn observe(
        &mut self,
        state: &SchemeState,
        row: &DiagnosticsRow,
        outcome: Option<&StepOutcome>,
    ) -> Result<()>;
}

impl<F> Observer for F
where
    F: FnMut(&SchemeState, &DiagnosticsRow, Option<&StepOutcome>) -> Result<()>,
{
    fn observe(
        &mut self,
        state: &SchemeState,
        row: &DiagnosticsRow,
        outcome: Option<&StepOutcome>,
    ) -> Result<()> {
        self(state, row, outcome)
    }
}

/// Number of steps of size `s` covering `[0, T]`, requiring `T` to be an
/// integer multiple of `s` to within `1e-12` relative.
pub fn step_count(t_final: f64, s: f64) -> Result<usize> {
    if !(t_final > 0.0 && t_final.is_finite()) || !(s > 0.0 && s.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "need T > 0 and s > 0 (T = {t_final}, s = {s})"
        )));
    }
    let steps = (t_final / s).round();
    if steps < 1.0 || (t_final - steps * s).abs() > 1e-12 * t_final {
        return Err(Error::InvalidParams(format!(
            "final time T = {t_final} is not an integer multiple of the time step s = {s}"
        )));
    }
    Ok(steps as usize)
}

/// Advances `initial` to time `T` with step `s`, returning the final state and
/// the diagnostics series (one row per step plus the initial row).
pub fn run(
    initial: &Field,
    t_final: f64,
    s: f64,
    kernel: &KernelGrid,
    params: &ModelParams,
    cfg: &SolverConfig,
    observers: &mut [&mut dyn Observer],
) -> Result<(SchemeState, DiagnosticsSeries)> {
    let steps = step_count(t_final, s)?;
    run_steps(initial, steps, s, kernel, params, cfg, observers)
}

/// Like [`run`] with an explicit step count.
pub fn run_steps(
    initial: &Field,
    steps: usize,
    s: f64,
    kernel: &KernelGrid,
    params: &ModelParams,
    cfg: &SolverConfig,
    observers: &mut [&mut dyn Observer],
) -> Result<(SchemeState, DiagnosticsSeries)> {
    kernel.grid().check_same(initial.grid())?;
    if !initial.is_finite() {
        return Err(Error::InvalidParams(
            "initial data contains non-finite values".into(),
        ));
    }
    let grid = *initial.grid();
    let h2 = grid.h() * grid.h();
    let mut j_curr = kernel.apply_combined(initial)?;
    let f0 = energy_with_conv(initial, &j_curr, kernel, params);
    let l4_bound = l4_bound_from_energy(f0, grid.area(), params);
    let mut state = SchemeState::initial(initial.clone());
    let row0 = DiagnosticsRow {
        k: 0,
        t: 0.0,
        mass_deviation: 0.0,
        energy: f0,
        pseudo_energy: f0,
        law_energy: f0,
        dissipation_norm_sq: 0.0,
        newton_iters: 0,
        krylov_iters: 0,
        residual: 0.0,
        tolerance: cfg.tolerance_for(initial),
        l4_norm: norm4(initial),
    };
    for obs in observers.iter_mut() {
        obs.observe(&state, &row0, None)?;
    }
    let mut rows = Vec::with_capacity(steps + 1);
    rows.push(row0);
    let (b_c, b_e) = (params.b_c(), params.b_e());

    for k in 0..steps {
        let outcome = step(&state, s, kernel, params, cfg).map_err(|e| Error::AtStep {
            step: k + 1,
            source: Box::new(e),
        })?;
        let next = &outcome.state.phi_curr;
        let j_next = kernel.apply_combined(next)?;
        let energy = energy_with_conv(next, &j_next, kernel, params);
        let d = next - &state.phi_curr;
        let jd = &j_next - &j_curr;
        let d_sq = h2 * dot(d.values(), d.values());
        let law_remainder = 0.25 * b_e * d_sq + 0.25 * h2 * dot(jd.values(), d.values());
        let dissipation_norm_sq = match params.equation {
            Equation::CahnHilliard => grad_norm_sq(&outcome.potential),
            Equation::AllenCahn => h2 * dot(outcome.potential.values(), outcome.potential.values()),
        };
        let diff0 = next - initial;
        let row = DiagnosticsRow {
            k: k + 1,
            t: (k + 1) as f64 * s,
            mass_deviation: h2 * diff0.sum(),
            energy,
            pseudo_energy: energy + law_remainder + 0.25 * b_c * d_sq,
            law_energy: energy + law_remainder,
            dissipation_norm_sq,
            newton_iters: outcome.newton_iters,
            krylov_iters: outcome.krylov_iters,
            residual: outcome.residual,
            tolerance: outcome.tolerance,
            l4_norm: norm4(next),
        };
        state = outcome.state.clone();
        state.t = row.t;
        for obs in observers.iter_mut() {
            obs.observe(&state, &row, Some(&outcome))?;
        }
        rows.push(row);
        j_curr = j_next;
    }
    let series = DiagnosticsSeries {
        equation: params.equation,
        step_size: s,
        mobility: params.mobility,
        l4_bound,
        rows,
    };
    Ok((state, series))
}
