//! Vertex-centered kernels and the discrete periodic convolution
//!
//! `[f * phi]_{i,j} = h^2 sum_{k,l} f_{k+1/2,l+1/2} phi_{i-k,j-l}`.
//!
//! A vertex function is stored as the cyclic sequence `g[k + m l] =
//! f_{k+1/2,l+1/2}`, i.e. indexed by the displacement `(k h, l h)` between
//! the cell centers it couples. The half-cell offset is already absorbed into
//! the sample positions, so the operator is an ordinary cyclic convolution
//! scaled by `h^2`.

use std::str::FromStr;
use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::fft::{Fft2d, C64};
use crate::grid::{Field, GridSpec};

/// Grids at or below this size per side use the direct sum under
/// [`Backend::Auto`].
pub const DIRECT_MAX_SIDE: usize = 32;

/// How [`conv_apply`] evaluates the convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Backend {
    /// `O(N^2)` double sum.
    Direct,
    /// Spectral product through 2D real FFTs.
    Fft,
    /// Direct for `min(m, n) <= 32`, FFT otherwise.
    #[default]
    Auto,
}

impl Backend {
    pub fn resolve(self, grid: &GridSpec) -> Backend {
        match self {
            Backend::Auto if grid.m().min(grid.n()) <= DIRECT_MAX_SIDE => Backend::Direct,
            Backend::Auto => Backend::Fft,
            b => b,
        }
    }
}

impl FromStr for Backend {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "direct" => Ok(Backend::Direct),
            "fft" => Ok(Backend::Fft),
            "auto" => Ok(Backend::Auto),
            other => Err(Error::Domain(format!(
                "unknown convolution backend '{other}' (expected direct, fft, auto)"
            ))),
        }
    }
}

/// A vertex-centered grid function, indexed by displacement.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexField {
    grid: GridSpec,
    data: Vec<f64>,
}

impl VertexField {
    pub fn from_vec(grid: GridSpec, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::InvalidKernel(format!(
                "expected {} samples, got {}",
                grid.len(),
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidKernel("kernel samples must be finite".into()));
        }
        Ok(Self { grid, data })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            data: vec![0.0; grid.len()],
        }
    }

    /// Unit spike at displacement index `(k0, l0)`.
    pub fn spike(grid: GridSpec, k0: usize, l0: usize) -> Self {
        let mut v = Self::zeros(grid);
        let idx = grid.idx(k0, l0);
        v.data[idx] = 1.0;
        v
    }

    /// Samples a radial-or-otherwise function of displacement `(x, y)`,
    /// with displacements wrapped into `(-L/2, L/2]`, summing `images`
    /// periodic copies in each direction.
    pub fn sample(grid: GridSpec, images: usize, f: impl Fn(f64, f64) -> f64) -> Self {
        let (m, n, h) = (grid.m(), grid.n(), grid.h());
        let r = images as isize;
        let mut data = Vec::with_capacity(grid.len());
        for l in 0..n {
            let y = wrapped_offset(l, n) * h;
            for k in 0..m {
                let x = wrapped_offset(k, m) * h;
                let mut v = 0.0;
                for q in -r..=r {
                    for p in -r..=r {
                        v += f(x + p as f64 * grid.l1(), y + q as f64 * grid.l2());
                    }
                }
                data.push(v);
            }
        }
        Self { grid, data }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    /// Sample at displacement index `(k, l)`, periodic.
    pub fn at(&self, k: isize, l: isize) -> f64 {
        self.data[self.grid.wrap(k, l)]
    }

    /// Largest deviation from even symmetry `f(k, l) = f(-k, -l)`.
    pub fn even_residual(&self) -> f64 {
        let (m, n) = (self.grid.m() as isize, self.grid.n() as isize);
        let mut worst: f64 = 0.0;
        for l in 0..n {
            for k in 0..m {
                worst = worst.max((self.at(k, l) - self.at(-k, -l)).abs());
            }
        }
        worst
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn difference(&self, other: &VertexField) -> VertexField {
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        VertexField {
            grid: self.grid,
            data,
        }
    }
}

/// Signed offset of cyclic index `k` in `(-len/2, len/2]`.
fn wrapped_offset(k: usize, len: usize) -> f64 {
    if 2 * k <= len {
        k as f64
    } else {
        k as f64 - len as f64
    }
}

/// `[f * 1] = h^2 sum f`.
pub fn conv_one(f: &VertexField) -> f64 {
    let h = f.grid.h();
    h * h * f.data.iter().sum::<f64>()
}

/// Direct evaluation of the double sum.
pub fn conv_direct(f: &VertexField, phi: &Field) -> Result<Field> {
    f.grid.check_same(phi.grid())?;
    let g = f.grid;
    let (m, n) = (g.m(), g.n());
    let h2 = g.h() * g.h();
    let p = phi.values();
    let mut out = vec![0.0; m * n];
    for j in 0..n {
        for i in 0..m {
            let mut acc = 0.0;
            for l in 0..n {
                let jj = (j + n - l) % n;
                let frow = &f.data[l * m..(l + 1) * m];
                let prow = &p[jj * m..(jj + 1) * m];
                for (k, fk) in frow.iter().enumerate() {
                    let ii = if k <= i { i - k } else { i + m - k };
                    acc += fk * prow[ii];
                }
            }
            out[i + m * j] = h2 * acc;
        }
    }
    Field::from_vec(g, out)
}

/// Precomputed spectrum of a vertex function for repeated FFT convolutions.
#[derive(Debug)]
pub struct SpectralKernel {
    grid: GridSpec,
    plan: Arc<Fft2d>,
    spectrum: Vec<C64>,
}

impl SpectralKernel {
    pub fn new(f: &VertexField, plan: Arc<Fft2d>) -> Self {
        let spectrum = plan.forward(&f.data);
        Self {
            grid: f.grid,
            plan,
            spectrum,
        }
    }

    pub fn apply(&self, phi: &Field) -> Result<Field> {
        self.grid.check_same(phi.grid())?;
        let g = self.grid;
        let scale = g.h() * g.h() / g.len() as f64;
        let mut s = self.plan.forward(phi.values());
        for (a, b) in s.iter_mut().zip(&self.spectrum) {
            *a *= b * scale;
        }
        Field::from_vec(g, self.plan.inverse(s))
    }
}

/// Convolution with an arbitrary vertex function.
pub fn conv_apply(f: &VertexField, phi: &Field, backend: Backend) -> Result<Field> {
    f.grid.check_same(phi.grid())?;
    match backend.resolve(&f.grid) {
        Backend::Direct => conv_direct(f, phi),
        _ => SpectralKernel::new(f, Arc::new(Fft2d::new(f.grid.m(), f.grid.n()))).apply(phi),
    }
}

/// Which part of the kernel `J = J_c - J_e` to convolve with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelPart {
    Convex,
    Concave,
    Combined,
}

/// Analytic kernel families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    /// `alpha exp(-|x|^2 / sigma^2)`.
    Gaussian { alpha: f64, sigma: f64 },
    /// `alpha exp(-|x|^2 / sigma1^2) - beta exp(-|x|^2 / sigma2^2)`, split as
    /// `J_c` = first term, `J_e` = second term.
    DifferenceOfGaussians {
        alpha: f64,
        sigma1: f64,
        beta: f64,
        sigma2: f64,
    },
}

impl KernelSpec {
    pub fn build(&self, grid: GridSpec) -> Result<KernelGrid> {
        self.build_with_images(grid, 0)
    }

    /// Builds the kernel, summing `images` periodic copies per direction.
    pub fn build_with_images(&self, grid: GridSpec, images: usize) -> Result<KernelGrid> {
        match *self {
            KernelSpec::Gaussian { alpha, sigma } => {
                let jc = gaussian_samples(alpha, sigma, grid, images)?;
                KernelGrid::new(jc, VertexField::zeros(grid))
            }
            KernelSpec::DifferenceOfGaussians {
                alpha,
                sigma1,
                beta,
                sigma2,
            } => {
                let jc = gaussian_samples(alpha, sigma1, grid, images)?;
                let je = if beta == 0.0 {
                    VertexField::zeros(grid)
                } else {
                    gaussian_samples(beta, sigma2, grid, images)?
                };
                KernelGrid::new(jc, je)
            }
        }
    }
}

/// Relative size the Gaussian may keep at the periodic seam when no images
/// are summed.
const SEAM_TOLERANCE: f64 = 1e-12;

fn gaussian_samples(alpha: f64, sigma: f64, grid: GridSpec, images: usize) -> Result<VertexField> {
    if !(alpha > 0.0 && alpha.is_finite()) || !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidKernel(format!(
            "Gaussian needs alpha > 0 and sigma > 0 (alpha = {alpha}, sigma = {sigma})"
        )));
    }
    if images == 0 {
        let half = 0.5 * grid.l1().min(grid.l2());
        let seam = (-(half * half) / (sigma * sigma)).exp();
        if seam > SEAM_TOLERANCE {
            return Err(Error::InvalidKernel(format!(
                "Gaussian with sigma = {sigma} is not periodic on {grid}: value at the seam is {seam:.3e} of the peak; \
                 enlarge the domain or sum periodic images"
            )));
        }
    }
    let s2 = sigma * sigma;
    Ok(VertexField::sample(grid, images, |x, y| {
        alpha * (-(x * x + y * y) / s2).exp()
    }))
}

/// `J = alpha exp(-|x|^2 / sigma^2)` with no concave part.
pub fn kernel_gaussian(alpha: f64, sigma: f64, grid: GridSpec) -> Result<KernelGrid> {
    KernelSpec::Gaussian { alpha, sigma }.build(grid)
}

/// Difference of two Gaussians, stored as separate convex and concave parts.
pub fn kernel_difference_of_gaussians(
    alpha: f64,
    sigma1: f64,
    beta: f64,
    sigma2: f64,
    grid: GridSpec,
) -> Result<KernelGrid> {
    if !(beta >= 0.0) {
        return Err(Error::InvalidKernel(format!(
            "beta must be non-negative, got {beta}"
        )));
    }
    KernelSpec::DifferenceOfGaussians {
        alpha,
        sigma1,
        beta,
        sigma2,
    }
    .build(grid)
}

/// Tolerance on the even-symmetry check at construction.
pub const EVEN_TOLERANCE: f64 = 1e-12;

/// Vertex samples of `J_c` and `J_e` with their masses and cached spectra.
#[derive(Debug)]
pub struct KernelGrid {
    grid: GridSpec,
    jc: VertexField,
    je: VertexField,
    jc_one: f64,
    je_one: f64,
    backend: Backend,
    plan: OnceLock<Arc<Fft2d>>,
    spectra: OnceLock<[SpectralKernel; 3]>,
}

impl KernelGrid {
    /// Validates non-negativity and even symmetry of both parts.
    pub fn new(jc: VertexField, je: VertexField) -> Result<Self> {
        jc.grid.check_same(&je.grid)?;
        for (name, f) in [("J_c", &jc), ("J_e", &je)] {
            if f.min() < 0.0 {
                return Err(Error::InvalidKernel(format!(
                    "{name} has a negative sample ({:e})",
                    f.min()
                )));
            }
            let r = f.even_residual();
            if r > EVEN_TOLERANCE {
                return Err(Error::InvalidKernel(format!(
                    "{name} is not even: residual {r:e}"
                )));
            }
        }
        let grid = jc.grid;
        Ok(Self {
            grid,
            jc_one: conv_one(&jc),
            je_one: conv_one(&je),
            jc,
            je,
            backend: Backend::Auto,
            plan: OnceLock::new(),
            spectra: OnceLock::new(),
        })
    }

    /// Kernel that vanishes identically.
    pub fn zero(grid: GridSpec) -> Self {
        Self::new(VertexField::zeros(grid), VertexField::zeros(grid)).expect("zero kernel is valid")
    }

    pub fn with_backend(mut self, backend: Backend) -> Self {
        self.backend = backend;
        self
    }

    pub fn backend(&self) -> Backend {
        self.backend.resolve(&self.grid)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn jc(&self) -> &VertexField {
        &self.jc
    }

    pub fn je(&self) -> &VertexField {
        &self.je
    }

    /// `[J_c * 1]`.
    pub fn jc_one(&self) -> f64 {
        self.jc_one
    }

    /// `[J_e * 1]`.
    pub fn je_one(&self) -> f64 {
        self.je_one
    }

    /// `[J * 1] = [J_c * 1] - [J_e * 1]`.
    pub fn j_one(&self) -> f64 {
        self.jc_one - self.je_one
    }

    /// Vertex samples of the requested part.
    pub fn part(&self, part: KernelPart) -> VertexField {
        match part {
            KernelPart::Convex => self.jc.clone(),
            KernelPart::Concave => self.je.clone(),
            KernelPart::Combined => self.jc.difference(&self.je),
        }
    }

    /// FFT plan shared by everything on this grid.
    pub fn plan(&self) -> Arc<Fft2d> {
        self.plan
            .get_or_init(|| Arc::new(Fft2d::new(self.grid.m(), self.grid.n())))
            .clone()
    }

    fn spectra(&self) -> &[SpectralKernel; 3] {
        self.spectra.get_or_init(|| {
            let plan = self.plan();
            [
                SpectralKernel::new(&self.jc, plan.clone()),
                SpectralKernel::new(&self.je, plan.clone()),
                SpectralKernel::new(&self.part(KernelPart::Combined), plan),
            ]
        })
    }

    /// `[f * phi]` for the chosen part, using the configured backend.
    pub fn apply(&self, part: KernelPart, phi: &Field) -> Result<Field> {
        self.apply_with(part, phi, self.backend)
    }

    pub fn apply_with(&self, part: KernelPart, phi: &Field, backend: Backend) -> Result<Field> {
        self.grid.check_same(phi.grid())?;
        match backend.resolve(&self.grid) {
            Backend::Direct => conv_direct(&self.part(part), phi),
            _ => {
                let idx = match part {
                    KernelPart::Convex => 0,
                    KernelPart::Concave => 1,
                    KernelPart::Combined => 2,
                };
                self.spectra()[idx].apply(phi)
            }
        }
    }

    /// `[J * phi]`.
    pub fn apply_combined(&self, phi: &Field) -> Result<Field> {
        self.apply(KernelPart::Combined, phi)
    }
}
