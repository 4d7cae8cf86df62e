//! Periodic cell-centered grids, grid functions, and the finite-difference
//! operators acting on them.
//!
//! A [`Field`] stores `m * n` values with the x-index fastest, so the value of
//! cell `(i, j)` lives at `i + m * j`. All index arithmetic is periodic.
//!
//! Norms carry the `h^2` quadrature weight; [`inner_product`] is the raw sum.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Sub, SubAssign};

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Geometry of a uniform periodic cell-centered grid on
/// `(x0, x0 + l1) x (y0, y0 + l2)` with square cells of side `h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    x0: f64,
    y0: f64,
    l1: f64,
    l2: f64,
    m: usize,
    n: usize,
    h: f64,
}

impl GridSpec {
    /// Builds a grid, rejecting non-square cells.
    pub fn new(x0: f64, y0: f64, l1: f64, l2: f64, m: usize, n: usize) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::InvalidGrid(format!(
                "cell counts must be positive (m = {m}, n = {n})"
            )));
        }
        if !(l1 > 0.0 && l2 > 0.0 && l1.is_finite() && l2.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "domain lengths must be positive (L1 = {l1}, L2 = {l2})"
            )));
        }
        if !(x0.is_finite() && y0.is_finite()) {
            return Err(Error::InvalidGrid("origin must be finite".into()));
        }
        let hx = l1 / m as f64;
        let hy = l2 / n as f64;
        if (hx - hy).abs() > 1e-14 * hx {
            return Err(Error::InvalidGrid(format!(
                "cells are not square: L1/m = {hx:e}, L2/n = {hy:e}"
            )));
        }
        Ok(Self {
            x0,
            y0,
            l1,
            l2,
            m,
            n,
            h: hx,
        })
    }

    /// Square domain `(x0, x0 + l)^2` with `m` cells per side.
    pub fn square(x0: f64, l: f64, m: usize) -> Result<Self> {
        Self::new(x0, x0, l, l, m, m)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn y0(&self) -> f64 {
        self.y0
    }

    pub fn l1(&self) -> f64 {
        self.l1
    }

    pub fn l2(&self) -> f64 {
        self.l2
    }

    /// Number of cells.
    pub fn len(&self) -> usize {
        self.m * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Area of the domain, `|Omega|`.
    pub fn area(&self) -> f64 {
        self.l1 * self.l2
    }

    /// x-coordinate of the center of cell column `i` (0-based).
    pub fn xc(&self, i: usize) -> f64 {
        self.x0 + (i as f64 + 0.5) * self.h
    }

    /// y-coordinate of the center of cell row `j` (0-based).
    pub fn yc(&self, j: usize) -> f64 {
        self.y0 + (j as f64 + 0.5) * self.h
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.m && j < self.n);
        i + self.m * j
    }

    /// Flat index of the periodic image of `(i, j)`.
    #[inline]
    pub fn wrap(&self, i: isize, j: isize) -> usize {
        let i = i.rem_euclid(self.m as isize) as usize;
        let j = j.rem_euclid(self.n as isize) as usize;
        i + self.m * j
    }

    /// Whether two grids describe the same lattice (bitwise equal geometry).
    pub fn same_as(&self, other: &GridSpec) -> bool {
        self == other
    }

    pub fn check_same(&self, other: &GridSpec) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                left: self.to_string(),
                right: other.to_string(),
            })
        }
    }

    /// Grid with half the cells in each direction on the same domain.
    pub fn coarsened(&self) -> Result<GridSpec> {
        if !self.m.is_multiple_of(2) || !self.n.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "{self} cannot be coarsened by 2"
            )));
        }
        GridSpec::new(self.x0, self.y0, self.l1, self.l2, self.m / 2, self.n / 2)
    }

    /// Grid with twice the cells in each direction on the same domain.
    pub fn refined(&self) -> Result<GridSpec> {
        GridSpec::new(self.x0, self.y0, self.l1, self.l2, 2 * self.m, 2 * self.n)
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}x{} grid on ({}, {}) x ({}, {}), h = {:e}",
            self.m,
            self.n,
            self.x0,
            self.x0 + self.l1,
            self.y0,
            self.y0 + self.l2,
            self.h
        )
    }
}

/// A real-valued cell-centered grid function with periodic indexing.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: GridSpec,
    data: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: GridSpec) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: GridSpec, c: f64) -> Self {
        Self {
            grid,
            data: vec![c; grid.len()],
        }
    }

    /// Wraps raw values stored x-index fastest.
    pub fn from_vec(grid: GridSpec, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} values for {grid}, got {}",
                grid.len(),
                data.len()
            )));
        }
        Ok(Self { grid, data })
    }

    /// Samples `f(x, y)` at the cell centers.
    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut data = Vec::with_capacity(grid.len());
        for j in 0..grid.n {
            let y = grid.yc(j);
            for i in 0..grid.m {
                data.push(f(grid.xc(i), y));
            }
        }
        Self { grid, data }
    }

    /// Builds a field from its `(i, j)` indices.
    pub fn from_index_fn(grid: GridSpec, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(grid.len());
        for j in 0..grid.n {
            for i in 0..grid.m {
                data.push(f(i, j));
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

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Value at the periodic image of `(i, j)`.
    #[inline]
    pub fn at(&self, i: isize, j: isize) -> f64 {
        self.data[self.grid.wrap(i, j)]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[self.grid.idx(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.grid.idx(i, j);
        self.data[k] = v;
    }

    /// Raw sum of all entries.
    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// `h^2 * sum`, the discrete integral over the domain.
    pub fn integral(&self) -> f64 {
        self.grid.h * self.grid.h * self.sum()
    }

    /// Average value over the domain.
    pub fn mean(&self) -> f64 {
        self.sum() / self.data.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        self.grid.check_same(&other.grid)?;
        Ok(Field {
            grid: self.grid,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// `self += a * x`.
    pub fn axpy(&mut self, a: f64, x: &Field) -> Result<()> {
        self.grid.check_same(&x.grid)?;
        for (s, &v) in self.data.iter_mut().zip(&x.data) {
            *s += a * v;
        }
        Ok(())
    }

    pub fn scale(&mut self, a: f64) {
        for v in &mut self.data {
            *v *= a;
        }
    }

    pub fn add_scalar(&mut self, c: f64) {
        for v in &mut self.data {
            *v += c;
        }
    }

    /// Periodic translation: `out(i, j) = self(i - di, j - dj)`.
    pub fn shifted(&self, di: isize, dj: isize) -> Field {
        let g = self.grid;
        Field::from_index_fn(g, |i, j| self.at(i as isize - di, j as isize - dj))
    }
}

impl Add for &Field {
    type Output = Field;
    fn add(self, rhs: &Field) -> Field {
        assert!(
            self.grid.same_as(&rhs.grid),
            "grid mismatch in Field addition"
        );
        Field {
            grid: self.grid,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &Field {
    type Output = Field;
    fn sub(self, rhs: &Field) -> Field {
        assert!(
            self.grid.same_as(&rhs.grid),
            "grid mismatch in Field subtraction"
        );
        Field {
            grid: self.grid,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl Mul<&Field> for f64 {
    type Output = Field;
    fn mul(self, rhs: &Field) -> Field {
        rhs.map(|v| self * v)
    }
}

impl AddAssign<&Field> for Field {
    fn add_assign(&mut self, rhs: &Field) {
        assert!(
            self.grid.same_as(&rhs.grid),
            "grid mismatch in Field addition"
        );
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

impl SubAssign<&Field> for Field {
    fn sub_assign(&mut self, rhs: &Field) {
        assert!(
            self.grid.same_as(&rhs.grid),
            "grid mismatch in Field subtraction"
        );
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a -= b;
        }
    }
}

/// Unweighted inner product `sum_{i,j} a_{ij} b_{ij}`, summed in storage order.
pub fn inner_product(a: &Field, b: &Field) -> Result<f64> {
    a.grid.check_same(&b.grid)?;
    Ok(dot(&a.data, &b.data))
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `||a||_p = (h^2 sum |a|^p)^(1/p)` for `p >= 1`.
pub fn norm_p(a: &Field, p: f64) -> Result<f64> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::Domain(format!(
            "norm exponent must satisfy p >= 1, got {p}"
        )));
    }
    let h2 = a.grid.h * a.grid.h;
    let s: f64 = if p == 2.0 {
        a.data.iter().map(|v| v * v).sum()
    } else if p == 4.0 {
        a.data.iter().map(|v| (v * v) * (v * v)).sum()
    } else if p == 1.0 {
        a.data.iter().map(|v| v.abs()).sum()
    } else {
        a.data.iter().map(|v| v.abs().powf(p)).sum()
    };
    Ok((h2 * s).powf(1.0 / p))
}

/// Weighted `l2` norm.
pub fn norm2(a: &Field) -> f64 {
    let h = a.grid.h;
    (h * h * dot(&a.data, &a.data)).sqrt()
}

/// Weighted `l4` norm.
pub fn norm4(a: &Field) -> f64 {
    norm_p(a, 4.0).expect("p = 4 is admissible")
}

pub fn norm_inf(a: &Field) -> f64 {
    a.max_abs()
}

/// Five-point periodic Laplacian.
pub fn laplacian(a: &Field) -> Field {
    let mut out = Field::zeros(a.grid);
    laplacian_into(a.values(), &mut out.data, &a.grid, 1.0);
    out
}

/// Writes `scale * Delta_h a` into `out`.
pub(crate) fn laplacian_into(a: &[f64], out: &mut [f64], g: &GridSpec, scale: f64) {
    let (m, n) = (g.m, g.n);
    let c = scale / (g.h * g.h);
    out.par_chunks_mut(m).enumerate().for_each(|(j, row)| {
        let jp = if j + 1 == n { 0 } else { j + 1 };
        let jm = if j == 0 { n - 1 } else { j - 1 };
        let cur = &a[j * m..(j + 1) * m];
        let up = &a[jp * m..(jp + 1) * m];
        let down = &a[jm * m..(jm + 1) * m];
        for i in 0..m {
            let ip = if i + 1 == m { 0 } else { i + 1 };
            let im = if i == 0 { m - 1 } else { i - 1 };
            row[i] = c * (cur[ip] + cur[im] + up[i] + down[i] - 4.0 * cur[i]);
        }
    });
}

/// Orientation of an edge-centered grid function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeOrientation {
    /// East-west edges at `(i + 1/2, j)`.
    EastWest,
    /// North-south edges at `(i, j + 1/2)`.
    NorthSouth,
}

/// Edge-centered grid function; entry `(i, j)` sits on the edge between
/// cell `(i, j)` and its east (or north) neighbor.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeField {
    grid: GridSpec,
    orientation: EdgeOrientation,
    data: Vec<f64>,
}

impl EdgeField {
    pub fn zeros(grid: GridSpec, orientation: EdgeOrientation) -> Self {
        Self {
            grid,
            orientation,
            data: vec![0.0; grid.len()],
        }
    }

    pub fn from_vec(grid: GridSpec, orientation: EdgeOrientation, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} edge values, got {}",
                grid.len(),
                data.len()
            )));
        }
        Ok(Self {
            grid,
            orientation,
            data,
        })
    }

    pub fn orientation(&self) -> EdgeOrientation {
        self.orientation
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }
}

/// Center-to-edge difference `(a_{i+1,j} - a_{i,j}) / h`.
pub fn diff_x(a: &Field) -> EdgeField {
    let g = a.grid;
    let data = Field::from_index_fn(g, |i, j| {
        (a.at(i as isize + 1, j as isize) - a.get(i, j)) / g.h
    })
    .data;
    EdgeField {
        grid: g,
        orientation: EdgeOrientation::EastWest,
        data,
    }
}

/// Center-to-edge difference `(a_{i,j+1} - a_{i,j}) / h`.
pub fn diff_y(a: &Field) -> EdgeField {
    let g = a.grid;
    let data = Field::from_index_fn(g, |i, j| {
        (a.at(i as isize, j as isize + 1) - a.get(i, j)) / g.h
    })
    .data;
    EdgeField {
        grid: g,
        orientation: EdgeOrientation::NorthSouth,
        data,
    }
}

/// Edge-to-center difference, the negative adjoint of [`diff_x`] / [`diff_y`]:
/// `(f_{i+1/2,j} - f_{i-1/2,j}) / h` for east-west edges.
pub fn edge_diff(f: &EdgeField) -> Field {
    let g = f.grid;
    let at = |i: isize, j: isize| f.data[g.wrap(i, j)];
    match f.orientation {
        EdgeOrientation::EastWest => Field::from_index_fn(g, |i, j| {
            (at(i as isize, j as isize) - at(i as isize - 1, j as isize)) / g.h
        }),
        EdgeOrientation::NorthSouth => Field::from_index_fn(g, |i, j| {
            (at(i as isize, j as isize) - at(i as isize, j as isize - 1)) / g.h
        }),
    }
}

/// Unweighted edge inner product.
pub fn edge_inner_product(a: &EdgeField, b: &EdgeField) -> Result<f64> {
    a.grid.check_same(&b.grid)?;
    if a.orientation != b.orientation {
        return Err(Error::Domain(
            "edge inner product of differently oriented edge fields".into(),
        ));
    }
    Ok(dot(&a.data, &b.data))
}

/// `||grad_h a||_2^2 = h^2 (sum (D_x a)^2 + sum (D_y a)^2)`.
pub fn grad_norm_sq(a: &Field) -> f64 {
    let g = a.grid;
    let (m, n) = (g.m, g.n);
    let mut s = 0.0;
    for j in 0..n {
        let jp = if j + 1 == n { 0 } else { j + 1 };
        for i in 0..m {
            let ip = if i + 1 == m { 0 } else { i + 1 };
            let c = a.data[i + m * j];
            let dx = a.data[ip + m * j] - c;
            let dy = a.data[i + m * jp] - c;
            s += dx * dx + dy * dy;
        }
    }
    // h^2 * (1/h^2) * sum of squared raw differences
    s
}
