//! Discrete energy, its convex splitting, the pseudo energy, and the
//! half-step chemical potential.

use std::fmt;
use std::str::FromStr;

use crate::convolution::KernelGrid;
use crate::error::{Error, Result};
use crate::grid::{dot, norm2, Field};

/// Which gradient flow is being solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Equation {
    /// Nonlocal Allen-Cahn, `phi_t = -M w`.
    AllenCahn,
    /// Nonlocal Cahn-Hilliard, `phi_t = Delta w`.
    CahnHilliard,
}

impl fmt::Display for Equation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Equation::AllenCahn => "nac",
            Equation::CahnHilliard => "nch",
        })
    }
}

impl FromStr for Equation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nac" | "allen-cahn" => Ok(Equation::AllenCahn),
            "nch" | "cahn-hilliard" => Ok(Equation::CahnHilliard),
            other => Err(Error::InvalidParams(format!(
                "unknown equation '{other}' (expected nac or nch)"
            ))),
        }
    }
}

/// Physical parameters together with the constants derived from the kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub equation: Equation,
    /// Allen-Cahn mobility; unused for Cahn-Hilliard.
    pub mobility: f64,
    pub gamma_c: f64,
    pub gamma_e: f64,
    jc_one: f64,
    je_one: f64,
}

impl ModelParams {
    /// Validates `gamma_c, gamma_e, M >= 0` and the positivity condition
    /// `gamma_0 = gamma_c - gamma_e + [J * 1] > 0`.
    pub fn new(
        equation: Equation,
        mobility: f64,
        gamma_c: f64,
        gamma_e: f64,
        kernel: &KernelGrid,
    ) -> Result<Self> {
        for (name, v) in [("M", mobility), ("gamma_c", gamma_c), ("gamma_e", gamma_e)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParams(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        let p = Self {
            equation,
            mobility,
            gamma_c,
            gamma_e,
            jc_one: kernel.jc_one(),
            je_one: kernel.je_one(),
        };
        if !(p.gamma_0() > 0.0) {
            return Err(Error::InvalidParams(format!(
                "positivity condition violated: gamma_0 = gamma_c - gamma_e + [J*1] = {} - {} + {} = {} must be > 0",
                gamma_c,
                gamma_e,
                kernel.j_one(),
                p.gamma_0()
            )));
        }
        Ok(p)
    }

    pub fn jc_one(&self) -> f64 {
        self.jc_one
    }

    pub fn je_one(&self) -> f64 {
        self.je_one
    }

    /// `B_c = [J_c * 1] + gamma_c`.
    pub fn b_c(&self) -> f64 {
        self.jc_one + self.gamma_c
    }

    /// `B_e = [J_e * 1] + gamma_e`.
    pub fn b_e(&self) -> f64 {
        self.je_one + self.gamma_e
    }

    /// `alpha_0 = B_c - 3 B_e`. Reported only; negative values are allowed.
    pub fn alpha_0(&self) -> f64 {
        self.b_c() - 3.0 * self.b_e()
    }

    /// `gamma_0 = gamma_c - gamma_e + [J * 1]`.
    pub fn gamma_0(&self) -> f64 {
        self.gamma_c - self.gamma_e + (self.jc_one - self.je_one)
    }

    fn check_kernel(&self, kernel: &KernelGrid) -> Result<()> {
        if self.jc_one != kernel.jc_one() || self.je_one != kernel.je_one() {
            return Err(Error::InvalidParams(
                "parameters were derived from a different kernel".into(),
            ));
        }
        Ok(())
    }
}

fn sum_sq(v: &[f64]) -> f64 {
    dot(v, v)
}

fn sum_4(v: &[f64]) -> f64 {
    v.iter().map(|x| (x * x) * (x * x)).sum()
}

/// `F(phi) = 1/4 ||phi||_4^4 + (gamma_c - gamma_e)/2 ||phi||_2^2
///  + [J*1]/2 ||phi||_2^2 - h^2/2 <phi, [J * phi]>`.
pub fn energy(phi: &Field, kernel: &KernelGrid, params: &ModelParams) -> Result<f64> {
    params.check_kernel(kernel)?;
    let jphi = kernel.apply_combined(phi)?;
    Ok(energy_with_conv(phi, &jphi, kernel, params))
}

pub(crate) fn energy_with_conv(
    phi: &Field,
    jphi: &Field,
    kernel: &KernelGrid,
    params: &ModelParams,
) -> f64 {
    let h2 = phi.grid().h().powi(2);
    let v = phi.values();
    let l2 = h2 * sum_sq(v);
    let l4 = h2 * sum_4(v);
    0.25 * l4 + 0.5 * (params.gamma_c - params.gamma_e + kernel.j_one()) * l2
        - 0.5 * h2 * dot(v, jphi.values())
}

/// Convex part `F_c = 1/4 ||phi||_4^4 + B_c/2 ||phi||_2^2`.
pub fn energy_convex(phi: &Field, kernel: &KernelGrid, params: &ModelParams) -> Result<f64> {
    params.check_kernel(kernel)?;
    let h2 = phi.grid().h().powi(2);
    let v = phi.values();
    Ok(0.25 * h2 * sum_4(v) + 0.5 * params.b_c() * h2 * sum_sq(v))
}

/// Concave part `F_e = B_e/2 ||phi||_2^2 + h^2/2 <phi, [J * phi]>`, so that
/// `F = F_c - F_e`.
pub fn energy_concave(phi: &Field, kernel: &KernelGrid, params: &ModelParams) -> Result<f64> {
    params.check_kernel(kernel)?;
    let jphi = kernel.apply_combined(phi)?;
    let h2 = phi.grid().h().powi(2);
    let v = phi.values();
    Ok(0.5 * params.b_e() * h2 * sum_sq(v) + 0.5 * h2 * dot(v, jphi.values()))
}

/// Pseudo energy `F(phi_kp1) + (B_c + B_e)/4 ||d||_2^2 + h^2/4 <[J * d], d>`
/// with `d = phi_kp1 - phi_k`.
pub fn pseudo_energy(
    phi_k: &Field,
    phi_kp1: &Field,
    kernel: &KernelGrid,
    params: &ModelParams,
) -> Result<f64> {
    phi_k.grid().check_same(phi_kp1.grid())?;
    let f = energy(phi_kp1, kernel, params)?;
    Ok(f + pseudo_remainder(phi_k, phi_kp1, kernel, params)?)
}

/// The non-negative increment term of the pseudo energy.
pub fn pseudo_remainder(
    phi_k: &Field,
    phi_kp1: &Field,
    kernel: &KernelGrid,
    params: &ModelParams,
) -> Result<f64> {
    let d = phi_kp1 - phi_k;
    if d.values().iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    let jd = kernel.apply_combined(&d)?;
    let h2 = d.grid().h().powi(2);
    Ok(
        0.25 * (params.b_c() + params.b_e()) * h2 * sum_sq(d.values())
            + 0.25 * h2 * dot(jd.values(), d.values()),
    )
}

/// `eta(a, b) = 1/4 (a^2 + b^2)(a + b)`, pointwise.
pub fn eta(phi_a: &Field, phi_b: &Field) -> Result<Field> {
    phi_a.zip_map(phi_b, eta_scalar)
}

#[inline]
pub fn eta_scalar(a: f64, b: f64) -> f64 {
    0.25 * (a * a + b * b) * (a + b)
}

/// `phi_hat = 3/2 phi_k - 1/2 phi_km1`.
pub fn extrapolate(phi_km1: &Field, phi_k: &Field) -> Result<Field> {
    phi_k.zip_map(phi_km1, |c, p| 1.5 * c - 0.5 * p)
}

/// Explicit part of the chemical potential, `-B_e phi_hat - [J * phi_hat]`.
pub(crate) fn explicit_potential(
    phi_hat: &Field,
    kernel: &KernelGrid,
    params: &ModelParams,
) -> Result<Field> {
    let jhat = kernel.apply_combined(phi_hat)?;
    let be = params.b_e();
    phi_hat.zip_map(&jhat, |p, j| -be * p - j)
}

/// `w^{k+1/2} = eta(phi_k, phi_kp1) + B_c (phi_k + phi_kp1)/2 - B_e phi_hat
///  - [J * phi_hat]`, with `phi_hat` extrapolated from `phi_km1, phi_k`.
pub fn chemical_potential_halfstep(
    phi_km1: &Field,
    phi_k: &Field,
    phi_kp1: &Field,
    kernel: &KernelGrid,
    params: &ModelParams,
) -> Result<Field> {
    params.check_kernel(kernel)?;
    phi_k.grid().check_same(phi_km1.grid())?;
    phi_k.grid().check_same(phi_kp1.grid())?;
    let hat = extrapolate(phi_km1, phi_k)?;
    let explicit = explicit_potential(&hat, kernel, params)?;
    Ok(halfstep_from_explicit(
        phi_k,
        phi_kp1,
        &explicit,
        params.b_c(),
    ))
}

pub(crate) fn halfstep_from_explicit(
    phi_k: &Field,
    phi_kp1: &Field,
    explicit: &Field,
    b_c: f64,
) -> Field {
    let mut w = explicit.clone();
    for ((w, &a), &b) in w
        .values_mut()
        .iter_mut()
        .zip(phi_k.values())
        .zip(phi_kp1.values())
    {
        *w += eta_scalar(a, b) + 0.5 * b_c * (a + b);
    }
    w
}

/// `(8 (F(phi0) + (gamma_c - gamma_e - 2[J_e*1])^2 / 2 |Omega|))^(1/4)`,
/// an upper bound on `||phi^k||_4` along any trajectory started at `phi0`.
pub fn l4_apriori_bound(phi0: &Field, kernel: &KernelGrid, params: &ModelParams) -> Result<f64> {
    let f0 = energy(phi0, kernel, params)?;
    Ok(l4_bound_from_energy(f0, phi0.grid().area(), params))
}

pub fn l4_bound_from_energy(f0: f64, area: f64, params: &ModelParams) -> f64 {
    let c = params.gamma_c - params.gamma_e - 2.0 * params.je_one();
    (8.0 * (f0 + 0.5 * c * c * area)).max(0.0).powf(0.25)
}

/// Weighted `||phi||_2^2`.
pub fn norm2_sq(phi: &Field) -> f64 {
    norm2(phi).powi(2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convolution::kernel_gaussian;
    use crate::grid::GridSpec;

    fn setup(gamma_c: f64, gamma_e: f64) -> (GridSpec, KernelGrid, ModelParams) {
        let g = GridSpec::square(-0.5, 1.0, 16).unwrap();
        let k = kernel_gaussian(100.0, 0.08, g).unwrap();
        let p = ModelParams::new(Equation::CahnHilliard, 1.0, gamma_c, gamma_e, &k).unwrap();
        (g, k, p)
    }

    #[test]
    fn derived_constants() {
        let (_, k, p) = setup(0.0, 1.0);
        assert_eq!(p.b_c(), k.jc_one());
        assert_eq!(p.b_e(), 1.0);
        assert!((p.alpha_0() - (k.jc_one() - 3.0)).abs() < 1e-15);
        assert!((p.gamma_0() - (k.jc_one() - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn positivity_condition_enforced() {
        let g = GridSpec::square(-0.5, 1.0, 16).unwrap();
        let k = kernel_gaussian(100.0, 0.08, g).unwrap();
        let err = ModelParams::new(Equation::AllenCahn, 1.0, 0.0, 10.0, &k).unwrap_err();
        assert!(err.to_string().contains("positivity"));
        assert!(ModelParams::new(Equation::AllenCahn, -1.0, 0.0, 0.0, &k).is_err());
    }

    #[test]
    fn energy_of_zero_and_constants() {
        let (g, k, p) = setup(0.5, 1.0);
        assert_eq!(energy(&Field::zeros(g), &k, &p).unwrap(), 0.0);
        let c = 0.7;
        let e = energy(&Field::constant(g, c), &k, &p).unwrap();
        let expect = 0.25 * c.powi(4) + 0.5 * (0.5 - 1.0) * c * c;
        assert!((e - expect).abs() < 1e-13);
    }

    #[test]
    fn eta_cases() {
        let g = GridSpec::square(0.0, 1.0, 4).unwrap();
        let phi = Field::from_index_fn(g, |i, j| i as f64 - 0.3 * j as f64);
        let e = eta(&phi, &phi).unwrap();
        for (x, y) in e.values().iter().zip(phi.values()) {
            assert!((x - y.powi(3)).abs() < 1e-14 * y.abs().powi(3).max(1.0));
        }
        let z = eta(&Field::zeros(g), &phi).unwrap();
        for (x, y) in z.values().iter().zip(phi.values()) {
            assert!((x - 0.25 * y.powi(3)).abs() < 1e-14 * y.abs().powi(3).max(1.0));
        }
        let v = eta(&Field::constant(g, 1.0), &Field::constant(g, -1.0)).unwrap();
        assert!(v.values().iter().all(|&x| x == 0.0));
        assert_eq!(eta_scalar(0.3, -1.7), eta_scalar(-1.7, 0.3));
    }

    #[test]
    fn chemical_potential_of_constants() {
        let (g, k, p) = setup(0.25, 1.0);
        let c = -0.6;
        let f = Field::constant(g, c);
        let w = chemical_potential_halfstep(&f, &f, &f, &k, &p).unwrap();
        let expect = c * c * c + (p.gamma_c - p.gamma_e) * c;
        for v in w.values() {
            assert!((v - expect).abs() < 1e-13);
        }
        let z = Field::zeros(g);
        assert!(chemical_potential_halfstep(&z, &z, &z, &k, &p)
            .unwrap()
            .values()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn pseudo_energy_closed_forms() {
        let (g, k, p) = setup(0.0, 1.0);
        let phi = Field::from_fn(g, |x, y| (6.0 * x).sin() * y);
        assert_eq!(
            pseudo_energy(&phi, &phi, &k, &p).unwrap(),
            energy(&phi, &k, &p).unwrap()
        );
        let c = 0.4;
        let cf = Field::constant(g, c);
        let got = pseudo_energy(&Field::zeros(g), &cf, &k, &p).unwrap();
        let area = g.area();
        let expect = energy(&cf, &k, &p).unwrap()
            + 0.25 * (p.b_c() + p.b_e()) * c * c * area
            + 0.25 * c * c * k.j_one() * area;
        assert!((got - expect).abs() < 1e-13);
    }

    #[test]
    fn l4_bound_cases() {
        let g = GridSpec::square(-0.5, 1.0, 16).unwrap();
        let k = kernel_gaussian(100.0, 0.08, g).unwrap();
        let p = ModelParams::new(Equation::CahnHilliard, 1.0, 0.0, 0.0, &k).unwrap();
        assert_eq!(l4_apriori_bound(&Field::zeros(g), &k, &p).unwrap(), 0.0);
        let phi = Field::from_fn(g, |x, y| 0.5 * (6.0 * x).sin() * (6.0 * y).cos());
        let b0 = l4_apriori_bound(&phi, &k, &p).unwrap();
        let f0 = energy(&phi, &k, &p).unwrap();
        let mut last = l4_bound_from_energy(f0, 1.0, &p);
        for gc in [0.5, 1.0, 2.0] {
            let wider = ModelParams::new(Equation::CahnHilliard, 1.0, gc, 0.0, &k).unwrap();
            let b = l4_bound_from_energy(f0, 1.0, &wider);
            assert!(b >= last);
            last = b;
        }
        assert!(crate::grid::norm4(&phi) <= b0);
    }
}
