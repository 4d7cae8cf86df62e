//! Second-order convex-splitting schemes for the periodic nonlocal
//! Allen-Cahn and Cahn-Hilliard equations on cell-centered grids.
//!
//! The building blocks are layered bottom-up:
//!
//! * [`grid`]: periodic grid functions, the five-point Laplacian, norms;
//! * [`convolution`]: vertex-centered kernels and the discrete convolution;
//! * [`energy`]: discrete energy, convex splitting, chemical potential;
//! * [`stepper`]: one implicit time step per equation;
//! * [`trajectory`]: time integration with diagnostics;
//! * [`harness`]: refinement studies and canonical experiments;
//! * [`snapshot`]: binary field snapshots.

// `!(x > 0.0)` deliberately rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod convolution;
pub mod energy;
pub mod error;
pub mod fft;
pub mod grid;
pub mod harness;
pub mod krylov;
pub mod snapshot;
pub mod stepper;
pub mod trajectory;

pub use convolution::{
    conv_apply, conv_one, kernel_difference_of_gaussians, kernel_gaussian, Backend, KernelGrid,
    KernelPart, KernelSpec, VertexField,
};
pub use energy::{
    chemical_potential_halfstep, energy, energy_concave, energy_convex, eta, l4_apriori_bound,
    pseudo_energy, Equation, ModelParams,
};
pub use error::{Error, Result};
pub use grid::{
    grad_norm_sq, inner_product, laplacian, norm2, norm4, norm_inf, norm_p, Field, GridSpec,
};
pub use harness::{
    cauchy_error, convergence_study, energy_decay_experiment, initial_random, initial_sinusoid,
    restrict, RefinementStudy,
};
pub use stepper::{step, step_nac, step_nch, SchemeState, SolverConfig, StepOutcome};
pub use trajectory::{run, DiagnosticsRow, DiagnosticsSeries, Observer};
