//! Shared fixtures for the benchmarks.

use nlpf_core::harness::presets;
use nlpf_core::{Backend, Field, KernelGrid, ModelParams, SchemeState};

/// Kernel, parameters, and a two-level state of the `gamma_e = 2` sinusoid
/// setup on an `m x m` grid, one small step into the run.
pub fn fixture(
    equation: nlpf_core::Equation,
    m: usize,
    backend: Backend,
) -> (KernelGrid, ModelParams, SchemeState) {
    let mut study = presets::nch_gamma_e_2(vec![m]);
    study.model.equation = equation;
    let (_, kernel, params, phi0) = study.model.build(m, backend).expect("valid preset");
    let phi1 = phi0.map(|v| 0.999 * v);
    (
        kernel,
        params,
        SchemeState {
            phi_prev: phi0,
            phi_curr: phi1,
            t: 1e-3,
            k: 1,
        },
    )
}

/// Deterministic non-trivial field for operator benchmarks.
pub fn field(m: usize) -> Field {
    let grid = nlpf_core::GridSpec::square(-0.5, 1.0, m).expect("valid grid");
    nlpf_core::initial_random(grid, 0.0, 1.0, 42).expect("valid amplitude")
}
