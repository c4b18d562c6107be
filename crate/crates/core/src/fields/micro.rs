use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::Grid;
use crate::error::{Error, Result};

/// Indicator of the soft inclusion `D₀` on the unit cell, sampled at cell
/// centres. `D₁ = Q ∖ D₀` is the stiff matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Microstructure {
    grid: Grid,
    chi0: Vec<bool>,
    margin: usize,
}

impl Microstructure {
    /// Validates: guard band of `margin ≥ 1` stiff cells along the cell
    /// boundary, nonempty `D₁`, and face-connected `D₀`.
    pub fn from_mask(dim: usize, n: usize, chi0: Vec<bool>, margin: usize) -> Result<Self> {
        let grid = Grid::new(dim, n)?;
        if chi0.len() != grid.len() {
            return Err(Error::InvalidMicrostructure(format!(
                "mask has {} cells, expected {}",
                chi0.len(),
                grid.len()
            )));
        }
        let ms = Self { grid, chi0, margin };
        ms.validate()?;
        Ok(ms)
    }

    /// Cells whose centre lies in the open ball of `radius` about the cell
    /// centre.
    pub fn ball(dim: usize, n: usize, radius: f64, margin: usize) -> Result<Self> {
        let grid = Grid::new(dim, n)?;
        let chi0 = (0..grid.len())
            .map(|i| {
                grid.center(i)
                    .iter()
                    .map(|x| (x - 0.5).powi(2))
                    .sum::<f64>()
                    < radius * radius
            })
            .collect();
        Self::from_mask(dim, n, chi0, margin)
    }

    /// Cells whose centre lies in the centred cube `|x - ½|_∞ < half_width`.
    pub fn centered_box(dim: usize, n: usize, half_width: f64, margin: usize) -> Result<Self> {
        let grid = Grid::new(dim, n)?;
        let chi0 = (0..grid.len())
            .map(|i| grid.center(i).iter().all(|x| (x - 0.5).abs() < half_width))
            .collect();
        Self::from_mask(dim, n, chi0, margin)
    }

    /// No inclusion: the whole cell is stiff.
    pub fn empty(dim: usize, n: usize) -> Result<Self> {
        let grid = Grid::new(dim, n)?;
        Self::from_mask(dim, n, vec![false; grid.len()], 1)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidMicrostructure(m));
        if self.margin == 0 {
            return bad("margin must be at least one cell".into());
        }
        let n = self.grid.n();
        if 2 * self.margin >= n && self.chi0.iter().any(|&b| b) {
            return bad(format!("margin {} leaves no interior at n = {n}", self.margin));
        }
        if self.chi0.iter().all(|&b| b) {
            return bad("stiff region D1 is empty".into());
        }
        for (idx, &soft) in self.chi0.iter().enumerate() {
            if soft
                && self
                    .grid
                    .coords(idx)
                    .iter()
                    .any(|&c| c < self.margin || c >= n - self.margin)
            {
                return bad(format!(
                    "inclusion touches the guard band of width {} at cell {:?}",
                    self.margin,
                    self.grid.coords(idx)
                ));
            }
        }
        if !self.soft_is_connected() {
            return bad("inclusion D0 is not connected".into());
        }
        Ok(())
    }

    fn soft_is_connected(&self) -> bool {
        let Some(start) = self.chi0.iter().position(|&b| b) else {
            return true;
        };
        let n = self.grid.n();
        let mut seen = vec![false; self.chi0.len()];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        let mut count = 1;
        while let Some(idx) = queue.pop_front() {
            let c = self.grid.coords(idx);
            for a in 0..c.len() {
                for delta in [n - 1, 1] {
                    let mut nb = c.clone();
                    nb[a] = (nb[a] + delta) % n;
                    let j = self.grid.index(&nb);
                    if self.chi0[j] && !seen[j] {
                        seen[j] = true;
                        count += 1;
                        queue.push_back(j);
                    }
                }
            }
        }
        count == self.chi0.iter().filter(|&&b| b).count()
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }
    pub fn dim(&self) -> usize {
        self.grid.dim()
    }
    pub fn n(&self) -> usize {
        self.grid.n()
    }
    pub fn margin(&self) -> usize {
        self.margin
    }
    pub fn chi0(&self) -> &[bool] {
        &self.chi0
    }

    /// `|D₀|`.
    pub fn soft_fraction(&self) -> f64 {
        self.chi0.iter().filter(|&&b| b).count() as f64 / self.chi0.len() as f64
    }

    /// Periodic shift by whole micro-cells. The result describes the same
    /// periodic composite seen from a shifted reference cell, so the guard
    /// band is not re-checked.
    pub fn translated(&self, shift: &[i64]) -> Self {
        let n = self.grid.n() as i64;
        let mut chi0 = vec![false; self.chi0.len()];
        for (idx, &b) in self.chi0.iter().enumerate() {
            let c: Vec<usize> = self
                .grid
                .coords(idx)
                .iter()
                .zip(shift)
                .map(|(&c, &s)| (c as i64 + s).rem_euclid(n) as usize)
                .collect();
            chi0[self.grid.index(&c)] = b;
        }
        Self {
            grid: self.grid,
            chi0,
            margin: self.margin,
        }
    }

    /// Run-length encoding of the mask in storage order: first value, then
    /// alternating run lengths.
    pub fn to_spec(&self) -> MicrostructureSpec {
        let mut runs = Vec::new();
        let mut current = self.chi0[0];
        let mut len = 0;
        for &b in &self.chi0 {
            if b == current {
                len += 1;
            } else {
                runs.push(len);
                current = b;
                len = 1;
            }
        }
        runs.push(len);
        MicrostructureSpec::Rle {
            dim: self.dim(),
            n: self.n(),
            margin: self.margin,
            start: self.chi0[0],
            runs,
        }
    }
}

fn default_margin() -> usize {
    1
}

/// Serialized microstructure: a named primitive or an RLE mask.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MicrostructureSpec {
    Ball {
        dim: usize,
        n: usize,
        radius: f64,
        #[serde(default = "default_margin")]
        margin: usize,
    },
    Box {
        dim: usize,
        n: usize,
        half_width: f64,
        #[serde(default = "default_margin")]
        margin: usize,
    },
    Empty {
        dim: usize,
        n: usize,
    },
    Rle {
        dim: usize,
        n: usize,
        #[serde(default = "default_margin")]
        margin: usize,
        start: bool,
        runs: Vec<usize>,
    },
}

impl MicrostructureSpec {
    pub fn build(&self) -> Result<Microstructure> {
        match *self {
            Self::Ball {
                dim,
                n,
                radius,
                margin,
            } => Microstructure::ball(dim, n, radius, margin),
            Self::Box {
                dim,
                n,
                half_width,
                margin,
            } => Microstructure::centered_box(dim, n, half_width, margin),
            Self::Empty { dim, n } => Microstructure::empty(dim, n),
            Self::Rle {
                dim,
                n,
                margin,
                start,
                ref runs,
            } => {
                let mut mask = Vec::new();
                let mut value = start;
                for &r in runs {
                    mask.extend(std::iter::repeat_n(value, r));
                    value = !value;
                }
                Microstructure::from_mask(dim, n, mask, margin)
            }
        }
    }
}

/// The inclusion pattern repeated over the macroscopic torus at scale
/// `ε = 1/m`, sampled with `s` points per ε-cell per axis.
#[derive(Clone, Debug, PartialEq)]
pub struct MicroDomain {
    grid: Grid,
    m: usize,
    s: usize,
    chi0: Vec<bool>,
}

impl MicroDomain {
    pub fn grid(&self) -> Grid {
        self.grid
    }
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn s(&self) -> usize {
        self.s
    }
    pub fn epsilon(&self) -> f64 {
        1.0 / self.m as f64
    }
    pub fn chi0(&self) -> &[bool] {
        &self.chi0
    }
    pub fn is_soft(&self, idx: usize) -> bool {
        self.chi0[idx]
    }
    /// `|Ω_{0,ε}|`.
    pub fn soft_fraction(&self) -> f64 {
        self.chi0.iter().filter(|&&b| b).count() as f64 / self.chi0.len() as f64
    }

    /// Fast variable `y = {x/ε}` of a grid point, at micro-cell centres.
    pub fn micro_coord(&self, idx: usize) -> Vec<f64> {
        self.grid
            .coords(idx)
            .into_iter()
            .map(|c| ((c % self.s) as f64 + 0.5) / self.s as f64)
            .collect()
    }

    /// Lattice cell `z ∈ Z_ε` containing a grid point.
    pub fn cell(&self, idx: usize) -> Vec<usize> {
        self.grid
            .coords(idx)
            .into_iter()
            .map(|c| c / self.s)
            .collect()
    }
}

/// Builds `Ω_{0,ε} = ⋃_z ε(D₀ + z)` on the torus grid of resolution `m·s`.
pub fn rasterize_microdomain(ms: &Microstructure, m: usize, s: usize) -> Result<MicroDomain> {
    if m == 0 || s == 0 {
        return Err(Error::Divisibility("m and s must be positive".into()));
    }
    if !s.is_multiple_of(ms.n()) {
        return Err(Error::Divisibility(format!(
            "micro resolution s = {s} is not a multiple of the microstructure resolution {}",
            ms.n()
        )));
    }
    let grid = Grid::new(ms.dim(), m * s)?;
    let ratio = s / ms.n();
    let chi0 = (0..grid.len())
        .map(|idx| {
            let micro: Vec<usize> = grid
                .coords(idx)
                .into_iter()
                .map(|c| (c % s) / ratio)
                .collect();
            ms.chi0[ms.grid.index(&micro)]
        })
        .collect();
    Ok(MicroDomain { grid, m, s, chi0 })
}
