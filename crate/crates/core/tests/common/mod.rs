//! Brute-force evaluations written straight from the definitions, shared by
//! the oracle tests and the acceptance suite. Each `*_defect` function returns
//! the worst disagreement it found.

#![allow(dead_code)]

use nlpf_core::convolution::{conv_apply, conv_direct};
use nlpf_core::grid::{diff_x, diff_y, edge_diff, edge_inner_product, EdgeField, EdgeOrientation};
use nlpf_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_field(grid: GridSpec, rng: &mut ChaCha8Rng, amp: f64) -> Field {
    Field::from_index_fn(grid, |_, _| amp * rng.gen_range(-1.0..1.0))
}

pub fn random_vertex(grid: GridSpec, rng: &mut ChaCha8Rng) -> VertexField {
    VertexField::from_vec(
        grid,
        (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    )
    .unwrap()
}

pub fn unit16() -> GridSpec {
    GridSpec::square(-0.5, 1.0, 16).unwrap()
}

pub fn dog_kernel(grid: GridSpec) -> KernelGrid {
    kernel_difference_of_gaussians(30.0, 0.08, 8.0, 0.09, grid).unwrap()
}

pub fn gaussian_kernel(grid: GridSpec) -> KernelGrid {
    kernel_gaussian(156.25, 0.08, grid).unwrap()
}

/// `h^2 sum_{k,l} f_{k,l} phi_{i-k, j-l}` with explicit modular indices.
pub fn naive_conv(f: &VertexField, phi: &Field) -> Vec<f64> {
    let g = *phi.grid();
    let (m, n) = (g.m() as isize, g.n() as isize);
    let h2 = g.h() * g.h();
    let mut out = vec![0.0; g.len()];
    for j in 0..n {
        for i in 0..m {
            let mut acc = 0.0;
            for l in 0..n {
                for k in 0..m {
                    acc += f.values()[(k + m * l) as usize]
                        * phi.values()
                            [((i - k).rem_euclid(m) + m * (j - l).rem_euclid(n)) as usize];
                }
            }
            out[(i + m * j) as usize] = h2 * acc;
        }
    }
    out
}

/// Energy by loops over cells. The nonlocal pairing is the unweighted sum,
/// so the term reads `h^2/2 sum phi (J*phi)`.
pub fn naive_energy(phi: &Field, kernel: &KernelGrid, gamma_c: f64, gamma_e: f64) -> f64 {
    let g = *phi.grid();
    let h2 = g.h() * g.h();
    let j = kernel.part(KernelPart::Combined);
    let j_one: f64 = h2 * j.values().iter().sum::<f64>();
    let conv = naive_conv(&j, phi);
    let mut quartic = 0.0;
    let mut quad = 0.0;
    let mut nonlocal = 0.0;
    for (p, c) in phi.values().iter().zip(&conv) {
        quartic += p.powi(4);
        quad += p * p;
        nonlocal += p * c;
    }
    0.25 * h2 * quartic + 0.5 * (gamma_c - gamma_e + j_one) * h2 * quad - 0.5 * h2 * nonlocal
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// FFT and direct backends against the definition on random 16x16 data.
pub fn convolution_defect(cases: usize, seed: u64) -> f64 {
    let grid = unit16();
    let mut rng = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let f = random_vertex(grid, &mut rng);
        let phi = random_field(grid, &mut rng, 1.0);
        let oracle = naive_conv(&f, &phi);
        let fft = conv_apply(&f, &phi, Backend::Fft).unwrap();
        let direct = conv_direct(&f, &phi).unwrap();
        for ((a, b), o) in fft.values().iter().zip(direct.values()).zip(&oracle) {
            worst = worst.max((a - b).abs()).max((a - o).abs());
        }
    }
    worst
}

/// Relative disagreement of `energy` and `F_c - F_e` with the loop oracle.
pub fn energy_defect(cases: usize, seed: u64) -> f64 {
    let grid = unit16();
    let mut rng = rng(seed);
    let mut worst: f64 = 0.0;
    for kernel in [gaussian_kernel(grid), dog_kernel(grid)] {
        for _ in 0..cases {
            let (gc, ge) = (rng.gen_range(0.0..1.0), rng.gen_range(0.0..0.3));
            let params = ModelParams::new(Equation::CahnHilliard, 1.0, gc, ge, &kernel).unwrap();
            let phi = random_field(grid, &mut rng, 1.0);
            let oracle = naive_energy(&phi, &kernel, gc, ge);
            let lib = energy(&phi, &kernel, &params).unwrap();
            let split = energy_convex(&phi, &kernel, &params).unwrap()
                - energy_concave(&phi, &kernel, &params).unwrap();
            worst = worst.max(rel(lib, oracle)).max(rel(split, oracle));
        }
    }
    worst
}

/// Relative disagreement of `pseudo_energy` with the loop oracle.
pub fn pseudo_energy_defect(cases: usize, seed: u64) -> f64 {
    let grid = unit16();
    let mut rng = rng(seed);
    let kernel = dog_kernel(grid);
    let h2 = grid.h() * grid.h();
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let (gc, ge) = (rng.gen_range(0.0..1.0), rng.gen_range(0.0..0.3));
        let params = ModelParams::new(Equation::AllenCahn, 1.0, gc, ge, &kernel).unwrap();
        let a = random_field(grid, &mut rng, 1.0);
        let b = random_field(grid, &mut rng, 1.0);
        let d: Vec<f64> = b
            .values()
            .iter()
            .zip(a.values())
            .map(|(x, y)| x - y)
            .collect();
        let jd = naive_conv(
            &kernel.part(KernelPart::Combined),
            &Field::from_vec(grid, d.clone()).unwrap(),
        );
        let b_c = kernel.jc_one() + gc;
        let b_e = kernel.je_one() + ge;
        let (mut dd, mut djd) = (0.0, 0.0);
        for (x, y) in d.iter().zip(&jd) {
            dd += x * x;
            djd += x * y;
        }
        let oracle =
            naive_energy(&b, &kernel, gc, ge) + 0.25 * (b_c + b_e) * h2 * dd + 0.25 * h2 * djd;
        worst = worst.max(rel(
            pseudo_energy(&a, &b, &kernel, &params).unwrap(),
            oracle,
        ));
    }
    worst
}

/// Solves `x + M s (eta(pk, x) + B_c/2 x) = r` by plain bisection.
pub fn bisect(pk: f64, r: f64, ms: f64, half_bc: f64) -> f64 {
    let f = |x: f64| x + ms * (0.25 * (pk * pk + x * x) * (pk + x) + half_bc * x) - r;
    let (mut lo, mut hi) = (-10.0, 10.0);
    assert!(f(lo) < 0.0 && f(hi) > 0.0, "bisection bracket too small");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Max-norm gap between one Allen-Cahn step and cellwise bisection, over
/// time steps from `1e-3` to `10`.
pub fn allen_cahn_step_defect(seed: u64) -> f64 {
    let grid = unit16();
    let mut rng = rng(seed);
    let kernel = dog_kernel(grid);
    let (gc, ge) = (0.3, 0.1);
    let mut worst: f64 = 0.0;
    for s in [1e-3, 0.01, 0.1, 1.0, 10.0] {
        let mobility = rng.gen_range(0.5..2.0);
        let params = ModelParams::new(Equation::AllenCahn, mobility, gc, ge, &kernel).unwrap();
        let prev = random_field(grid, &mut rng, 0.8);
        let curr = random_field(grid, &mut rng, 0.8);
        let state = SchemeState {
            phi_prev: prev.clone(),
            phi_curr: curr.clone(),
            t: 0.0,
            k: 1,
        };
        let out = step_nac(&state, s, &kernel, &params, &SolverConfig::default()).unwrap();

        let b_c = kernel.jc_one() + gc;
        let b_e = kernel.je_one() + ge;
        let hat: Vec<f64> = curr
            .values()
            .iter()
            .zip(prev.values())
            .map(|(c, p)| 1.5 * c - 0.5 * p)
            .collect();
        let jhat = naive_conv(
            &kernel.part(KernelPart::Combined),
            &Field::from_vec(grid, hat.clone()).unwrap(),
        );
        let ms = mobility * s;
        for idx in 0..grid.len() {
            let pk = curr.values()[idx];
            let r = pk - ms * (0.5 * b_c * pk - b_e * hat[idx] - jhat[idx]);
            worst =
                worst.max((bisect(pk, r, ms, 0.5 * b_c) - out.state.phi_curr.values()[idx]).abs());
        }
    }
    worst
}

/// Worst relative defect of the edge/center duality, both Green identities,
/// and the gradient-norm identity on random fields of a rectangular grid.
///
/// The cross pairings of independent random fields nearly cancel, so each
/// bilinear identity is measured relative to its Cauchy-Schwarz scale
/// `||u|| ||v||` rather than to its own (possibly tiny) value.
pub fn summation_by_parts_defect(cases: usize, seed: u64) -> f64 {
    let mut rng = rng(seed);
    let grid = GridSpec::new(0.0, 0.0, 1.25, 1.0, 20, 16).unwrap();
    let h2 = grid.h() * grid.h();
    let norm = |v: &[f64]| (h2 * v.iter().map(|x| x * x).sum::<f64>()).sqrt();
    let mut worst: f64 = 0.0;
    let mut check = |lhs: f64, rhs: f64, scale: f64| worst = worst.max((lhs - rhs).abs() / scale);
    for _ in 0..cases {
        let phi = random_field(grid, &mut rng, 1.0);
        let psi = random_field(grid, &mut rng, 1.0);
        let fx = EdgeField::from_vec(
            grid,
            EdgeOrientation::EastWest,
            random_field(grid, &mut rng, 1.0).into_vec(),
        )
        .unwrap();
        let fy = EdgeField::from_vec(
            grid,
            EdgeOrientation::NorthSouth,
            random_field(grid, &mut rng, 1.0).into_vec(),
        )
        .unwrap();
        let (lap_phi, lap_psi) = (laplacian(&phi), laplacian(&psi));

        check(
            h2 * edge_inner_product(&diff_x(&phi), &fx).unwrap(),
            -h2 * inner_product(&phi, &edge_diff(&fx)).unwrap(),
            norm(diff_x(&phi).values()) * norm(fx.values()),
        );
        check(
            h2 * edge_inner_product(&diff_y(&phi), &fy).unwrap(),
            -h2 * inner_product(&phi, &edge_diff(&fy)).unwrap(),
            norm(diff_y(&phi).values()) * norm(fy.values()),
        );

        let grad = h2 * edge_inner_product(&diff_x(&phi), &diff_x(&psi)).unwrap()
            + h2 * edge_inner_product(&diff_y(&phi), &diff_y(&psi)).unwrap();
        check(
            grad,
            -h2 * inner_product(&phi, &lap_psi).unwrap(),
            (grad_norm_sq(&phi) * grad_norm_sq(&psi)).sqrt(),
        );
        check(
            h2 * inner_product(&phi, &lap_psi).unwrap(),
            h2 * inner_product(&lap_phi, &psi).unwrap(),
            (norm(phi.values()) * norm(lap_psi.values()))
                .max(norm(lap_phi.values()) * norm(psi.values())),
        );
        let g = grad_norm_sq(&phi);
        check(g, -h2 * inner_product(&phi, &lap_phi).unwrap(), g);
    }
    worst
}

/// Relative asymmetry of `<phi, f*psi>` for an even kernel; also asserts
/// the Young-type bound along the way.
pub fn exchange_defect(cases: usize, seed: u64) -> f64 {
    let mut rng = rng(seed);
    let grid = unit16();
    let kernel = gaussian_kernel(grid);
    let f_one = kernel.jc_one();
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let phi = random_field(grid, &mut rng, 1.0);
        let psi = random_field(grid, &mut rng, 1.0);
        let a = inner_product(&phi, &kernel.apply(KernelPart::Convex, &psi).unwrap()).unwrap();
        let b = inner_product(&psi, &kernel.apply(KernelPart::Convex, &phi).unwrap()).unwrap();
        worst = worst.max(rel(a, b));
        let alpha = rng.gen_range(0.1..10.0);
        let bound = f_one
            * (0.5 * alpha * inner_product(&phi, &phi).unwrap()
                + 0.5 / alpha * inner_product(&psi, &psi).unwrap());
        assert!(
            a.abs() <= bound * (1.0 + 1e-12),
            "Young bound violated: {a} > {bound}"
        );
    }
    worst
}
