//! Second-order convex-splitting time steps.
//!
//! With `phi_half = (phi_k + phi_{k+1}) / 2` and the extrapolation
//! `phi_hat = 3/2 phi_k - 1/2 phi_{k-1}`, each step solves
//!
//! ```text
//! phi_{k+1} - phi_k = -M s w      (Allen-Cahn)
//! phi_{k+1} - phi_k =  s Lap_h w  (Cahn-Hilliard)
//! w = eta(phi_k, phi_{k+1}) + B_c phi_half - B_e phi_hat - [J * phi_hat]
//! ```
//!
//! Allen-Cahn decouples into one strictly increasing scalar equation per
//! cell. Cahn-Hilliard is solved by damped Newton with right-preconditioned
//! GMRES for the Jacobian, preconditioned by `I - s kappa Lap_h` inverted in
//! Fourier space.

use std::str::FromStr;
use std::sync::Arc;

use crate::convolution::KernelGrid;
use crate::energy::{
    eta_scalar, explicit_potential, extrapolate, halfstep_from_explicit, Equation, ModelParams,
};
use crate::error::{Error, Result};
use crate::fft::{Fft2d, C64};
use crate::grid::{laplacian_into, norm2, Field, GridSpec};
use crate::krylov::{gmres, GmresOptions};

/// Globalization of the Newton iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Damping {
    None,
    /// Halve the step until the residual norm decreases.
    #[default]
    LineSearchHalving,
}

impl FromStr for Damping {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Damping::None),
            "line-search-halving" | "halving" => Ok(Damping::LineSearchHalving),
            other => Err(Error::InvalidParams(format!("unknown damping '{other}'"))),
        }
    }
}

/// Starting point of the nonlinear iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitialGuess {
    /// `phi_k`.
    Current,
    /// `3/2 phi_k - 1/2 phi_{k-1}`.
    Extrapolated,
    /// `2 phi_k - phi_{k-1}`.
    #[default]
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Nonlinear residual tolerance in the weighted `l2` norm, multiplied by
    /// `max(1, ||phi_k||_2)` at every step.
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// Inner linear tolerance relative to the current nonlinear residual.
    pub krylov_tol: f64,
    pub krylov_max_iter: usize,
    pub krylov_restart: usize,
    pub damping: Damping,
    pub initial_guess: InitialGuess,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            newton_tol: 1e-11,
            newton_max_iter: 50,
            krylov_tol: 1e-4,
            krylov_max_iter: 200,
            krylov_restart: 40,
            damping: Damping::LineSearchHalving,
            initial_guess: InitialGuess::Linear,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.newton_tol > 0.0) || !(self.krylov_tol > 0.0) {
            return Err(Error::InvalidParams(
                "solver tolerances must be positive".into(),
            ));
        }
        if self.newton_max_iter == 0 || self.krylov_max_iter == 0 || self.krylov_restart == 0 {
            return Err(Error::InvalidParams(
                "solver iteration limits must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Effective nonlinear tolerance for a step starting from `phi_k`.
    pub fn tolerance_for(&self, phi_k: &Field) -> f64 {
        self.newton_tol * norm2(phi_k).max(1.0)
    }
}

/// Two-level history needed by the extrapolation.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeState {
    pub phi_prev: Field,
    pub phi_curr: Field,
    pub t: f64,
    pub k: usize,
}

impl SchemeState {
    /// Start of a run, with `phi_{-1} = phi_0`.
    pub fn initial(phi0: Field) -> Self {
        Self {
            phi_prev: phi0.clone(),
            phi_curr: phi0,
            t: 0.0,
            k: 0,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        self.phi_curr.grid()
    }
}

/// Result of one time step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: SchemeState,
    /// Chemical potential `w^{k+1/2}` at the accepted solution.
    pub potential: Field,
    pub newton_iters: usize,
    pub krylov_iters: usize,
    /// Weighted `l2` norm of the nonlinear residual.
    pub residual: f64,
    /// Tolerance the residual was held to.
    pub tolerance: f64,
}

fn check_step(state: &SchemeState, s: f64, kernel: &KernelGrid, cfg: &SolverConfig) -> Result<()> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "time step must be positive, got {s}"
        )));
    }
    cfg.validate()?;
    kernel.grid().check_same(state.phi_curr.grid())?;
    state.phi_curr.grid().check_same(state.phi_prev.grid())
}

fn advance(state: &SchemeState, next: Field, s: f64) -> SchemeState {
    SchemeState {
        phi_prev: state.phi_curr.clone(),
        phi_curr: next,
        t: state.t + s,
        k: state.k + 1,
    }
}

/// One step of the equation selected by `params`.
pub fn step(
    state: &SchemeState,
    s: f64,
    kernel: &KernelGrid,
    params: &ModelParams,
    cfg: &SolverConfig,
) -> Result<StepOutcome> {
    match params.equation {
        Equation::AllenCahn => step_nac(state, s, kernel, params, cfg),
        Equation::CahnHilliard => step_nch(state, s, kernel, params, cfg),
    }
}

/// Allen-Cahn step. Each cell solves
/// `x + M s (eta(phi_k, x) + B_c/2 x) = r` by safeguarded Newton.
pub fn step_nac(
    state: &SchemeState,
    s: f64,
    kernel: &KernelGrid,
    params: &ModelParams,
    cfg: &SolverConfig,
) -> Result<StepOutcome> {
    check_step(state, s, kernel, cfg)?;
    let phi_k = &state.phi_curr;
    let hat = extrapolate(&state.phi_prev, phi_k)?;
    let explicit = explicit_potential(&hat, kernel, params)?;
    let ms = params.mobility * s;
    let half_bc = 0.5 * params.b_c();
    let tol = cfg.tolerance_for(phi_k);
    // pointwise target so the weighted norm of the residual stays below tol
    let point_tol = tol / phi_k.grid().area().sqrt();

    let mut next = phi_k.clone();
    let mut worst = 0.0_f64;
    let mut max_iters = 0;
    let mut residual_sq = 0.0;
    for ((x, &pk), &e) in next
        .values_mut()
        .iter_mut()
        .zip(phi_k.values())
        .zip(explicit.values())
    {
        let r = pk - ms * (half_bc * pk + e);
        let (root, res, iters) =
            solve_scalar_nac(pk, r, ms, half_bc, point_tol, cfg.newton_max_iter);
        *x = root;
        worst = worst.max(res.abs());
        residual_sq += res * res;
        max_iters = max_iters.max(iters);
    }
    let h2 = phi_k.grid().h().powi(2);
    let residual = (h2 * residual_sq).sqrt();
    if !next.is_finite() || residual > tol {
        return Err(Error::SolverFailed {
            iterations: max_iters,
            residual,
            detail: format!("pointwise Allen-Cahn solve stalled; worst cell residual {worst:.3e}"),
            history: vec![residual],
        });
    }
    let potential = halfstep_from_explicit(phi_k, &next, &explicit, params.b_c());
    Ok(StepOutcome {
        state: advance(state, next, s),
        potential,
        newton_iters: max_iters,
        krylov_iters: 0,
        residual,
        tolerance: tol,
    })
}

#[inline]
fn nac_map(x: f64, pk: f64, ms: f64, half_bc: f64) -> (f64, f64) {
    let f = x + ms * (eta_scalar(pk, x) + half_bc * x);
    let df = 1.0 + ms * (0.25 * (3.0 * x * x + 2.0 * x * pk + pk * pk) + half_bc);
    (f, df)
}

/// Returns `(root, residual, iterations)` for the strictly increasing scalar
/// map. Since its slope is at least one, the root lies within `|f(x0) - r|`
/// of any `x0`, which seeds the bisection bracket.
fn solve_scalar_nac(
    pk: f64,
    r: f64,
    ms: f64,
    half_bc: f64,
    tol: f64,
    max_iter: usize,
) -> (f64, f64, usize) {
    let mut x = pk;
    let (f0, _) = nac_map(x, pk, ms, half_bc);
    let mut res = f0 - r;
    if res == 0.0 {
        return (x, 0.0, 0);
    }
    let (mut lo, mut hi) = if res > 0.0 {
        (x - res, x)
    } else {
        (x, x - res)
    };
    let mut iters = 0;
    // Newton may need a few bisection rescues, but the bracket halves each time
    let cap = max_iter.max(1) + 200;
    while iters < cap {
        iters += 1;
        let (f, df) = nac_map(x, pk, ms, half_bc);
        res = f - r;
        if res.abs() <= tol {
            break;
        }
        if res > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let mut next = x - res / df;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if next == x || hi - lo <= 4.0 * f64::EPSILON * x.abs().max(1.0) {
            x = next;
            res = nac_map(x, pk, ms, half_bc).0 - r;
            break;
        }
        x = next;
    }
    (x, res, iters)
}

/// Constant-coefficient preconditioner `P = I - s kappa Lap_h`, inverted
/// exactly through the FFT.
struct SpectralPreconditioner {
    plan: Arc<Fft2d>,
    symbol: Vec<f64>,
}

impl SpectralPreconditioner {
    fn new(plan: Arc<Fft2d>, grid: &GridSpec, s: f64, kappa: f64) -> Self {
        let (m, n, h) = (grid.m(), grid.n(), grid.h());
        let norm = 1.0 / (m * n) as f64;
        let pi = std::f64::consts::PI;
        let symbol = plan
            .bins()
            .map(|(k, l)| {
                let sx = (pi * k as f64 / m as f64).sin();
                let sy = (pi * l as f64 / n as f64).sin();
                let lambda = 4.0 / (h * h) * (sx * sx + sy * sy);
                norm / (1.0 + s * kappa * lambda)
            })
            .collect();
        Self { plan, symbol }
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut spec: Vec<C64> = self.plan.forward(v);
        for (c, w) in spec.iter_mut().zip(&self.symbol) {
            *c *= *w;
        }
        self.plan.inverse(spec)
    }
}

/// Residual `R(x) = x - phi_k - s Lap_h(eta(phi_k, x) + B_c/2 x + g)` of the
/// Cahn-Hilliard step, where `g` collects the explicit terms.
struct ChResidual<'a> {
    grid: GridSpec,
    phi_k: &'a [f64],
    g: Vec<f64>,
    s: f64,
    half_bc: f64,
}

impl ChResidual<'_> {
    fn eval(&self, x: &[f64], out: &mut [f64], work: &mut [f64]) {
        for (((w, &xi), &pk), &gi) in work.iter_mut().zip(x).zip(self.phi_k).zip(&self.g) {
            *w = eta_scalar(pk, xi) + self.half_bc * xi + gi;
        }
        laplacian_into(work, out, &self.grid, -self.s);
        for ((o, &xi), &pk) in out.iter_mut().zip(x).zip(self.phi_k) {
            *o += xi - pk;
        }
    }

    /// Pointwise coefficient of the linearized chemical potential.
    fn coefficient(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.phi_k)
            .map(|(&xi, &pk)| 0.25 * (3.0 * xi * xi + 2.0 * xi * pk + pk * pk) + self.half_bc)
            .collect()
    }

    fn weighted_norm(&self, v: &[f64]) -> f64 {
        let h = self.grid.h();
        (h * h * crate::grid::dot(v, v)).sqrt()
    }
}

/// Cahn-Hilliard step by damped Newton-GMRES.
pub fn step_nch(
    state: &SchemeState,
    s: f64,
    kernel: &KernelGrid,
    params: &ModelParams,
    cfg: &SolverConfig,
) -> Result<StepOutcome> {
    let guess = match cfg.initial_guess {
        InitialGuess::Current => state.phi_curr.clone(),
        InitialGuess::Extrapolated => extrapolate(&state.phi_prev, &state.phi_curr)?,
        InitialGuess::Linear => state
            .phi_curr
            .zip_map(&state.phi_prev, |c, p| 2.0 * c - p)?,
    };
    step_nch_from(state, s, kernel, params, cfg, guess)
}

/// Cahn-Hilliard step started from an explicit initial iterate.
pub fn step_nch_from(
    state: &SchemeState,
    s: f64,
    kernel: &KernelGrid,
    params: &ModelParams,
    cfg: &SolverConfig,
    guess: Field,
) -> Result<StepOutcome> {
    check_step(state, s, kernel, cfg)?;
    let grid = *state.grid();
    guess.grid().check_same(&grid)?;
    let phi_k = &state.phi_curr;
    let hat = extrapolate(&state.phi_prev, phi_k)?;
    let explicit = explicit_potential(&hat, kernel, params)?;
    let half_bc = 0.5 * params.b_c();
    let g: Vec<f64> = explicit
        .values()
        .iter()
        .zip(phi_k.values())
        .map(|(e, p)| e + half_bc * p)
        .collect();
    let problem = ChResidual {
        grid,
        phi_k: phi_k.values(),
        g,
        s,
        half_bc,
    };

    let tol = cfg.tolerance_for(phi_k);
    let kmax = phi_k.max_abs();
    let kappa = half_bc + 0.75 * kmax * kmax;
    let precond = SpectralPreconditioner::new(kernel.plan(), &grid, s, kappa);

    let len = grid.len();
    let mut x = guess.into_vec();
    let mut r = vec![0.0; len];
    let mut work = vec![0.0; len];
    problem.eval(&x, &mut r, &mut work);
    let mut rnorm = problem.weighted_norm(&r);
    let mut history = vec![rnorm];
    let mut newton_iters = 0;
    let mut krylov_iters = 0;
    let mut trial = vec![0.0; len];
    let mut trial_r = vec![0.0; len];

    while rnorm > tol {
        if newton_iters >= cfg.newton_max_iter {
            return Err(Error::SolverFailed {
                iterations: newton_iters,
                residual: rnorm,
                detail: format!("Newton did not reach tolerance {tol:.3e}"),
                history,
            });
        }
        newton_iters += 1;
        let coef = problem.coefficient(&x);
        let neg_r: Vec<f64> = r.iter().map(|v| -v).collect();
        let mut jac_work = vec![0.0; len];
        let apply = |v: &[f64], out: &mut [f64]| {
            for ((w, &vi), &ci) in jac_work.iter_mut().zip(v).zip(&coef) {
                *w = ci * vi;
            }
            laplacian_into(&jac_work, out, &grid, -s);
            for (o, &vi) in out.iter_mut().zip(v) {
                *o += vi;
            }
        };
        let lin = gmres(
            &neg_r,
            apply,
            |v| precond.apply(v),
            GmresOptions {
                rel_tol: cfg.krylov_tol,
                max_iter: cfg.krylov_max_iter,
                restart: cfg.krylov_restart,
            },
        );
        krylov_iters += lin.iterations;
        let delta = lin.x;

        // an inexact direction is still accepted if it reduces the residual
        let mut lambda = 1.0;
        let mut accepted = false;
        let max_halvings = match cfg.damping {
            Damping::None => 0,
            Damping::LineSearchHalving => {
                if lin.converged {
                    12
                } else {
                    20
                }
            }
        };
        for _ in 0..=max_halvings {
            for ((t, &xi), &di) in trial.iter_mut().zip(&x).zip(&delta) {
                *t = xi + lambda * di;
            }
            problem.eval(&trial, &mut trial_r, &mut work);
            let tn = problem.weighted_norm(&trial_r);
            if tn.is_finite()
                && (tn < rnorm * (1.0 - 1e-4 * lambda) || tn <= tol || cfg.damping == Damping::None)
            {
                std::mem::swap(&mut x, &mut trial);
                std::mem::swap(&mut r, &mut trial_r);
                rnorm = tn;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        history.push(rnorm);
        if !accepted {
            return Err(Error::SolverFailed {
                iterations: newton_iters,
                residual: rnorm,
                detail: format!(
                    "line search failed (GMRES {} after {} iterations, relative residual {:.3e})",
                    if lin.converged {
                        "converged"
                    } else {
                        "stalled"
                    },
                    lin.iterations,
                    lin.rel_residual
                ),
                history,
            });
        }
    }

    let next = Field::from_vec(grid, x)?;
    if !next.is_finite() {
        return Err(Error::SolverFailed {
            iterations: newton_iters,
            residual: rnorm,
            detail: "non-finite iterate".into(),
            history,
        });
    }
    let potential = halfstep_from_explicit(phi_k, &next, &explicit, params.b_c());
    Ok(StepOutcome {
        state: advance(state, next, s),
        potential,
        newton_iters,
        krylov_iters,
        residual: rnorm,
        tolerance: tol,
    })
}

/// Residual of the scheme evaluated independently of the solver:
/// `phi_{k+1} - phi_k + M s w` (Allen-Cahn) or `phi_{k+1} - phi_k - s Lap_h w`
/// (Cahn-Hilliard), with `w` rebuilt from scratch.
pub fn scheme_residual(
    phi_km1: &Field,
    phi_k: &Field,
    phi_kp1: &Field,
    s: f64,
    kernel: &KernelGrid,
    params: &ModelParams,
) -> Result<Field> {
    let w = crate::energy::chemical_potential_halfstep(phi_km1, phi_k, phi_kp1, kernel, params)?;
    let mut out = phi_kp1 - phi_k;
    match params.equation {
        Equation::AllenCahn => out.axpy(params.mobility * s, &w)?,
        Equation::CahnHilliard => out.axpy(-s, &crate::grid::laplacian(&w))?,
    }
    Ok(out)
}
