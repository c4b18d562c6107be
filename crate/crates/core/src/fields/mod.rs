//! Periodic fields on the unit torus `Q = (0,1)^d`, their discrete Fourier
//! transform, microstructure rasterization and the unfolding operator.

mod fft;
pub mod io;
mod micro;
mod unfold;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

pub use fft::{dft, idft, FftEngine, Spectrum};
pub use micro::{rasterize_microdomain, MicroDomain, Microstructure, MicrostructureSpec};
pub use unfold::{two_scale_pair, unfold, TwoVariableField};

/// Uniform grid with `n` points per axis on the `d`-torus. Points are
/// stored row-major (last axis fastest) and sit at cell centres
/// `(j + 0.5)/n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Grid {
    dim: usize,
    n: usize,
}

impl Grid {
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ShapeMismatch("grid dimension must be positive".into()));
        }
        if !n.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(n));
        }
        Ok(Self { dim, n })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    /// Volume of one grid cell, the midpoint quadrature weight.
    pub fn cell_volume(&self) -> f64 {
        1.0 / self.len() as f64
    }

    pub fn coords(&self, mut idx: usize) -> Vec<usize> {
        let mut c = vec![0; self.dim];
        for a in (0..self.dim).rev() {
            c[a] = idx % self.n;
            idx /= self.n;
        }
        c
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        coords.iter().fold(0, |acc, &c| acc * self.n + c % self.n)
    }

    pub fn center(&self, idx: usize) -> Vec<f64> {
        self.coords(idx)
            .into_iter()
            .map(|c| (c as f64 + 0.5) / self.n as f64)
            .collect()
    }

    /// Integer frequency of a spectral index, in `{-n/2, …, n/2-1}`.
    pub fn frequency(&self, idx: usize) -> Vec<i64> {
        self.coords(idx)
            .into_iter()
            .map(|c| signed_frequency(c, self.n))
            .collect()
    }

    /// True if some component of the frequency is the unpaired `-n/2`.
    pub fn is_nyquist(&self, freq: &[i64]) -> bool {
        self.n > 1 && freq.iter().any(|&f| f == -(self.n as i64) / 2)
    }
}

pub(crate) fn signed_frequency(c: usize, n: usize) -> i64 {
    if c < n.div_ceil(2) || n == 1 {
        c as i64
    } else {
        c as i64 - n as i64
    }
}

/// `R^N`-valued samples on a [`Grid`], stored component-major.
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicField {
    grid: Grid,
    ncomp: usize,
    data: Vec<f64>,
}

impl PeriodicField {
    pub fn zeros(grid: Grid, ncomp: usize) -> Self {
        Self {
            grid,
            ncomp,
            data: vec![0.0; grid.len() * ncomp],
        }
    }

    pub fn from_data(grid: Grid, ncomp: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.len() * ncomp {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {} points x {} components",
                data.len(),
                grid.len(),
                ncomp
            )));
        }
        Ok(Self { grid, ncomp, data })
    }

    pub fn constant(grid: Grid, value: &[f64]) -> Self {
        let mut f = Self::zeros(grid, value.len());
        for (c, &v) in value.iter().enumerate() {
            f.component_mut(c).fill(v);
        }
        f
    }

    /// Samples `f` at the cell centres.
    pub fn from_fn(grid: Grid, ncomp: usize, f: impl Fn(&[f64]) -> Vec<f64>) -> Self {
        let mut out = Self::zeros(grid, ncomp);
        let npts = grid.len();
        for idx in 0..npts {
            let v = f(&grid.center(idx));
            debug_assert_eq!(v.len(), ncomp);
            for (c, x) in v.into_iter().enumerate() {
                out.data[c * npts + idx] = x;
            }
        }
        out
    }

    /// White Gaussian noise.
    pub fn random(grid: Grid, ncomp: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..grid.len() * ncomp)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        Self { grid, ncomp, data }
    }

    /// Gaussian noise with the spectrum cut to `|ξ|_∞ ≤ band`.
    pub fn random_band_limited(grid: Grid, ncomp: usize, band: usize, seed: u64) -> Self {
        let noise = Self::random(grid, ncomp, seed);
        let engine = FftEngine::new(grid);
        let mut spec = engine.forward(&noise);
        for idx in 0..grid.len() {
            let keep = grid
                .frequency(idx)
                .iter()
                .all(|f| f.unsigned_abs() as usize <= band);
            if !keep || grid.is_nyquist(&grid.frequency(idx)) {
                for c in 0..ncomp {
                    spec.set(c, idx, Default::default());
                }
            }
        }
        engine.inverse(&spec)
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }
    pub fn ncomp(&self) -> usize {
        self.ncomp
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn component(&self, c: usize) -> &[f64] {
        let n = self.grid.len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.grid.len();
        &mut self.data[c * n..(c + 1) * n]
    }

    /// Value vector at one grid point.
    pub fn at(&self, idx: usize) -> Vec<f64> {
        let n = self.grid.len();
        (0..self.ncomp).map(|c| self.data[c * n + idx]).collect()
    }

    pub fn set_at(&mut self, idx: usize, value: &[f64]) {
        let n = self.grid.len();
        for (c, &v) in value.iter().enumerate() {
            self.data[c * n + idx] = v;
        }
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.grid == other.grid && self.ncomp == other.ncomp
    }

    pub fn check_shape(&self, other: &Self) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!(
                "fields have shapes (d={}, n={}, N={}) and (d={}, n={}, N={})",
                self.grid.dim,
                self.grid.n,
                self.ncomp,
                other.grid.dim,
                other.grid.n,
                other.ncomp
            )))
        }
    }

    /// Cell average of each component.
    pub fn mean(&self) -> Vec<f64> {
        let n = self.grid.len() as f64;
        (0..self.ncomp)
            .map(|c| self.component(c).iter().sum::<f64>() / n)
            .collect()
    }

    /// Quadrature inner product `∫_Q u·v`.
    pub fn dot(&self, other: &Self) -> f64 {
        debug_assert!(self.same_shape(other));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * self.grid.cell_volume()
    }

    pub fn norm_l2(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// `(∫_Q |u|^p)^{1/p}` with the Euclidean norm on values.
    pub fn norm_p(&self, p: f64) -> f64 {
        if p == 2.0 {
            return self.norm_l2();
        }
        let npts = self.grid.len();
        let s: f64 = (0..npts)
            .map(|i| {
                let sq: f64 = (0..self.ncomp)
                    .map(|c| self.data[c * npts + i].powi(2))
                    .sum();
                sq.sqrt().powf(p)
            })
            .sum();
        (s * self.grid.cell_volume()).powf(1.0 / p)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// `self += a · x`.
    pub fn axpy(&mut self, a: f64, x: &Self) {
        debug_assert!(self.same_shape(x));
        for (s, v) in self.data.iter_mut().zip(&x.data) {
            *s += a * v;
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|x| *x *= a);
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    /// Subtracts the cell average of each component.
    pub fn remove_mean(&mut self) {
        let m = self.mean();
        for (c, mc) in m.into_iter().enumerate() {
            self.component_mut(c).iter_mut().for_each(|x| *x -= mc);
        }
    }
}
