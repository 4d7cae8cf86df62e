//! Two-dimensional real FFTs on periodic grids.
//!
//! The forward transform stores the half spectrum "column major": for each of
//! the `m/2 + 1` x-wavenumbers a contiguous run of `n` y-wavenumbers. Callers
//! only multiply spectra pointwise, so the layout never leaks.

use std::sync::Arc;

use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

pub type C64 = Complex<f64>;

pub struct Fft2d {
    m: usize,
    n: usize,
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft2d {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Fft2d({}x{})", self.m, self.n)
    }
}

impl Fft2d {
    pub fn new(m: usize, n: usize) -> Self {
        let mut real = RealFftPlanner::<f64>::new();
        let mut cplx = FftPlanner::<f64>::new();
        Self {
            m,
            n,
            r2c: real.plan_fft_forward(m),
            c2r: real.plan_fft_inverse(m),
            fwd: cplx.plan_fft_forward(n),
            inv: cplx.plan_fft_inverse(n),
        }
    }

    /// Number of stored x-wavenumbers.
    pub fn mh(&self) -> usize {
        self.m / 2 + 1
    }

    pub fn spectrum_len(&self) -> usize {
        self.mh() * self.n
    }

    /// Unnormalized forward transform of `x.len() == m * n` values.
    pub fn forward(&self, x: &[f64]) -> Vec<C64> {
        let (m, n, mh) = (self.m, self.n, self.mh());
        debug_assert_eq!(x.len(), m * n);
        let mut rows = vec![C64::default(); mh * n];
        let mut input = self.r2c.make_input_vec();
        let mut scratch = self.r2c.make_scratch_vec();
        for j in 0..n {
            input.copy_from_slice(&x[j * m..(j + 1) * m]);
            self.r2c
                .process_with_scratch(&mut input, &mut rows[j * mh..(j + 1) * mh], &mut scratch)
                .expect("buffer sizes match the plan");
        }
        let mut spec = vec![C64::default(); mh * n];
        for j in 0..n {
            for k in 0..mh {
                spec[k * n + j] = rows[j * mh + k];
            }
        }
        let mut cscratch = vec![C64::default(); self.fwd.get_inplace_scratch_len()];
        self.fwd.process_with_scratch(&mut spec, &mut cscratch);
        spec
    }

    /// Unnormalized inverse transform; the result is `m * n` times the input
    /// field when applied to `forward(x)`. Consumes the spectrum buffer.
    pub fn inverse(&self, mut spec: Vec<C64>) -> Vec<f64> {
        let (m, n, mh) = (self.m, self.n, self.mh());
        debug_assert_eq!(spec.len(), mh * n);
        let mut cscratch = vec![C64::default(); self.inv.get_inplace_scratch_len()];
        self.inv.process_with_scratch(&mut spec, &mut cscratch);
        let mut out = vec![0.0; m * n];
        let mut row = self.c2r.make_input_vec();
        let mut scratch = self.c2r.make_scratch_vec();
        for j in 0..n {
            for k in 0..mh {
                row[k] = spec[k * n + j];
            }
            // imaginary parts of the self-conjugate bins are round-off only
            row[0].im = 0.0;
            if m % 2 == 0 {
                row[mh - 1].im = 0.0;
            }
            self.c2r
                .process_with_scratch(&mut row, &mut out[j * m..(j + 1) * m], &mut scratch)
                .expect("buffer sizes match the plan");
        }
        out
    }

    /// Wavenumber pair `(kx, ky)` for every stored spectral bin, in storage
    /// order. `ky` is the unsigned DFT index in `0..n`.
    pub fn bins(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.n;
        (0..self.mh()).flat_map(move |k| (0..n).map(move |l| (k, l)))
    }
}
