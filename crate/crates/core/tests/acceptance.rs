//! Acceptance suite: checks the reference rate tables and checks the
//! structural guarantees of the scheme. Prints one PASS/FAIL line per
//! criterion and exits non-zero if any criterion fails.
//!
//! Run alone with `cargo test -p nlpf-core --test acceptance`.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use nlpf_core::harness::{
    convergence_study_with, energy_decay_experiment, presets, RefinementStudy,
};
use nlpf_core::stepper::step_nch_from;
use nlpf_core::trajectory::InvariantReport;
use nlpf_core::*;
use rand::Rng;

const SLACK: f64 = 10.0;

struct Verdict {
    id: u8,
    title: &'static str,
    pass: bool,
    detail: String,
}

fn within(got: f64, want: f64, rel_tol: f64) -> bool {
    ((got - want) / want).abs() <= rel_tol
}

fn describe(got: &[f64], want: &[f64]) -> String {
    got.iter()
        .zip(want)
        .map(|(g, w)| format!("{g:.4e} vs {w:.4e} ({:+.1}%)", 100.0 * (g - w) / w))
        .collect::<Vec<_>>()
        .join(", ")
}

fn study(mut s: RefinementStudy, label: &str) -> Result<RefinementStudy> {
    let t0 = Instant::now();
    convergence_study_with(&mut s, |lvl, row| {
        let err = row
            .map(|r| format!(" e_A = {:.6e}", r.error))
            .unwrap_or_default();
        eprintln!(
            "  [{label}] level {:>4}: {} steps, {:.1}s{err}",
            lvl.m,
            lvl.steps,
            t0.elapsed().as_secs_f64()
        );
    })?;
    Ok(s)
}

fn nch_ge1_rates(s: &RefinementStudy) -> Verdict {
    let want = [0.003642747274850, 0.000866930235764];
    let errors = s.errors();
    let rate = s.rates().get(1).copied().flatten().unwrap_or(f64::NAN);
    let errors_ok =
        errors.len() == 2 && errors.iter().zip(&want).all(|(g, w)| within(*g, *w, 0.05));
    let rate_ok = (rate - 2.003).abs() <= 0.1;
    Verdict {
        id: 1,
        title: "nCH gamma_e = 1 rate table",
        pass: errors_ok && rate_ok,
        detail: format!(
            "e_A {} (tol 5%); rate {rate:.4} (want 2.003 +- 0.1)",
            describe(&errors, &want)
        ),
    }
}

fn nch_ge2_rates(s: &RefinementStudy) -> Verdict {
    let want = [0.005355484518874, 0.000483125827443, 0.000139990250322];
    let errors = s.errors();
    let rate = s.rates().get(2).copied().flatten().unwrap_or(f64::NAN);
    let errors_ok =
        errors.len() == 3 && errors.iter().zip(&want).all(|(g, w)| within(*g, *w, 0.10));
    let rate_ok = (rate - 1.787).abs() <= 0.15;
    Verdict {
        id: 2,
        title: "nCH gamma_e = 2 rate table",
        pass: errors_ok && rate_ok,
        detail: format!(
            "e_A {} (tol 10%); second-pair rate {rate:.4} (want 1.787 +- 0.15)",
            describe(&errors, &want)
        ),
    }
}

fn nac_rates(s: &RefinementStudy) -> Verdict {
    let want = [3.783500401280967e-05, 9.458990514247017e-06];
    let errors = s.errors();
    let rates: Vec<f64> = s.rates().into_iter().flatten().collect();
    let errors_ok =
        errors.len() == 2 && errors.iter().zip(&want).all(|(g, w)| within(*g, *w, 0.05));
    let rates_ok = !rates.is_empty() && rates.iter().all(|r| (r - 2.0).abs() <= 0.05);
    Verdict {
        id: 3,
        title: "nAC rate table",
        pass: errors_ok && rates_ok,
        detail: format!(
            "e_A {} (tol 5%); rates {rates:.5?} (want 2.000 +- 0.05)",
            describe(&errors, &want)
        ),
    }
}

struct RunAudit {
    label: String,
    equation: Equation,
    report: InvariantReport,
}

fn audits(
    studies: &[(&str, &RefinementStudy)],
    phase: &trajectory::DiagnosticsSeries,
) -> Vec<RunAudit> {
    let mut out = Vec::new();
    for (label, s) in studies {
        for lvl in &s.summaries {
            out.push(RunAudit {
                label: format!("{label}/{}", lvl.m),
                equation: s.model.equation,
                report: lvl.invariants,
            });
        }
    }
    out.push(RunAudit {
        label: "phase-separation/128".into(),
        equation: phase.equation,
        report: phase.audit(SLACK),
    });
    out
}

fn energy_stability(runs: &[RunAudit]) -> Verdict {
    let bad: Vec<String> = runs
        .iter()
        .filter(|r| r.report.pseudo_energy_increase > 0.0 || r.report.energy_above_initial > 0.0)
        .map(|r| {
            format!(
                "{} (increase {:.2e}, above F0 {:.2e})",
                r.label, r.report.pseudo_energy_increase, r.report.energy_above_initial
            )
        })
        .collect();
    let worst_inc = runs
        .iter()
        .map(|r| r.report.pseudo_energy_increase)
        .fold(f64::NEG_INFINITY, f64::max);
    let worst_above = runs
        .iter()
        .map(|r| r.report.energy_above_initial)
        .fold(f64::NEG_INFINITY, f64::max);
    Verdict {
        id: 4,
        title: "pseudo-energy non-increasing, F bounded by F(phi0)",
        pass: bad.is_empty(),
        detail: if bad.is_empty() {
            format!("{} runs; max step increase minus slack {worst_inc:.3e}, max F - F0 minus slack {worst_above:.3e}", runs.len())
        } else {
            format!("violations: {}", bad.join("; "))
        },
    }
}

fn mass_conservation(runs: &[RunAudit]) -> Verdict {
    let nch: Vec<&RunAudit> = runs
        .iter()
        .filter(|r| r.equation == Equation::CahnHilliard)
        .collect();
    let worst = nch
        .iter()
        .map(|r| r.report.max_mass_deviation)
        .fold(0.0, f64::max);
    Verdict {
        id: 5,
        title: "nCH mass conservation",
        pass: !nch.is_empty() && worst <= 1e-9,
        detail: format!(
            "{} nCH runs; max |h^2 <phi^k - phi^0, 1>| = {worst:.3e} (tol 1e-9)",
            nch.len()
        ),
    }
}

fn l4_bound(runs: &[RunAudit]) -> Verdict {
    let worst = runs
        .iter()
        .map(|r| r.report.l4_excess)
        .fold(f64::NEG_INFINITY, f64::max);
    Verdict {
        id: 6,
        title: "l4 a priori bound",
        pass: worst <= 0.0,
        detail: format!(
            "{} runs; max (||phi^k||_4 - bound) = {worst:.3e}",
            runs.len()
        ),
    }
}

fn oracles() -> Verdict {
    let conv = common::convolution_defect(100, 7001);
    let en = common::energy_defect(10, 7002);
    let pseudo = common::pseudo_energy_defect(20, 7003);
    let nac = common::allen_cahn_step_defect(7004);
    let sbp = common::summation_by_parts_defect(100, 7005);
    let exch = common::exchange_defect(100, 7006);
    let pass = conv <= 1e-12
        && en <= 1e-12
        && pseudo <= 1e-12
        && nac <= 1e-10
        && sbp <= 1e-11
        && exch <= 1e-11;
    Verdict {
        id: 7,
        title: "oracle equivalences",
        pass,
        detail: format!(
            "fft/direct {conv:.1e} (1e-12), energy {en:.1e} (1e-12 rel), pseudo {pseudo:.1e} (1e-12 rel), \
             nAC vs bisection {nac:.1e} (1e-10), SBP {sbp:.1e} (1e-11 rel), exchange {exch:.1e} (1e-11 rel)"
        ),
    }
}

fn uniqueness() -> Result<Verdict> {
    let mut rng = common::rng(8008);
    let mut model = presets::nch_gamma_e_2(vec![32]).model;
    model.initial = harness::InitialData::Constant(0.0);
    let (grid, kernel, params, _) = model.build(32, Backend::Auto)?;
    let cfg = SolverConfig::default();
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let amp = rng.gen_range(0.1..1.0);
        let prev = common::random_field(grid, &mut rng, amp);
        let kick = common::random_field(grid, &mut rng, 0.1 * amp);
        let curr = &prev + &kick;
        let s = 10f64.powf(rng.gen_range(-4.0..-1.0));
        let state = SchemeState {
            phi_prev: prev.clone(),
            phi_curr: curr.clone(),
            t: 0.0,
            k: 1,
        };
        let a = step_nch_from(&state, s, &kernel, &params, &cfg, curr.clone())?;
        let b = step_nch_from(
            &state,
            s,
            &kernel,
            &params,
            &cfg,
            energy::extrapolate(&prev, &curr)?,
        )?;
        worst = worst.max(norm2(&(&a.state.phi_curr - &b.state.phi_curr)));
    }
    Ok(Verdict {
        id: 8,
        title: "unique solvability (two-start nCH)",
        pass: worst <= 1e-8,
        detail: format!("20 randomized steps; max ||phi_a - phi_b||_2 = {worst:.3e} (tol 1e-8)"),
    })
}

fn failed(id: u8, title: &'static str, e: &Error) -> Verdict {
    Verdict {
        id,
        title,
        pass: false,
        detail: format!("run failed: {e}"),
    }
}

fn main() -> ExitCode {
    let started = Instant::now();
    eprintln!("acceptance: running refinement studies and the phase-separation run");

    let t1 = study(presets::nch_gamma_e_1(vec![128, 256, 512]), "nch ge=1");
    let t2 = study(
        presets::nch_gamma_e_2(vec![128, 256, 512, 1024]),
        "nch ge=2",
    );
    let t3 = study(presets::nac_gamma_e_2(vec![128, 256, 512]), "nac");
    let phase =
        energy_decay_experiment(&presets::phase_separation(128, 10.0, 1)).or_else(|e| match e {
            // keep the series for reporting even if the invariant check rejects it
            Error::Invariant { .. } => {
                let cfg = presets::phase_separation(128, 10.0, 1);
                let (_, kernel, params, phi0) = cfg.model.build(cfg.m, cfg.backend)?;
                run(
                    &phi0,
                    cfg.t_final,
                    cfg.step_size,
                    &kernel,
                    &params,
                    &cfg.solver,
                    &mut [],
                )
                .map(|(_, s)| s)
            }
            other => Err(other),
        });

    let mut verdicts = vec![
        t1.as_ref()
            .map(nch_ge1_rates)
            .unwrap_or_else(|e| failed(1, "nCH gamma_e = 1 rate table", e)),
        t2.as_ref()
            .map(nch_ge2_rates)
            .unwrap_or_else(|e| failed(2, "nCH gamma_e = 2 rate table", e)),
        t3.as_ref()
            .map(nac_rates)
            .unwrap_or_else(|e| failed(3, "nAC rate table", e)),
    ];
    match (&t1, &t2, &t3, &phase) {
        (Ok(a), Ok(b), Ok(c), Ok(p)) => {
            let runs = audits(&[("nch-ge1", a), ("nch-ge2", b), ("nac", c)], p);
            verdicts.push(energy_stability(&runs));
            verdicts.push(mass_conservation(&runs));
            verdicts.push(l4_bound(&runs));
        }
        _ => {
            let e = Error::InvalidParams(
                "an acceptance run failed before its invariants could be audited".into(),
            );
            verdicts.push(failed(
                4,
                "pseudo-energy non-increasing, F bounded by F(phi0)",
                &e,
            ));
            verdicts.push(failed(5, "nCH mass conservation", &e));
            verdicts.push(failed(6, "l4 a priori bound", &e));
        }
    }
    verdicts.push(oracles());
    verdicts
        .push(uniqueness().unwrap_or_else(|e| failed(8, "unique solvability (two-start nCH)", &e)));

    println!();
    for v in &verdicts {
        println!(
            "criterion {}: {} - {}: {}",
            v.id,
            if v.pass { "PASS" } else { "FAIL" },
            v.title,
            v.detail
        );
    }
    let failures = verdicts.iter().filter(|v| !v.pass).count();
    println!(
        "acceptance: {} of {} criteria passed in {:.0}s",
        verdicts.len() - failures,
        verdicts.len(),
        started.elapsed().as_secs_f64()
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
