use super::{Grid, PeriodicField};
use crate::error::{Error, Result};

/// A function of `(x, y)` sampled as `(lattice cell) × (micro sample)`:
/// the image of a field under the unfolding operator
/// `S_ε u(x, y) = u(ε⌊x/ε⌋ + εy)`.
///
/// Layout: `values[(cell · s^d + micro) · N + component]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoVariableField {
    dim: usize,
    m: usize,
    s: usize,
    ncomp: usize,
    values: Vec<f64>,
}

impl TwoVariableField {
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn s(&self) -> usize {
        self.s
    }
    pub fn ncomp(&self) -> usize {
        self.ncomp
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn cells(&self) -> usize {
        self.m.pow(self.dim as u32)
    }
    fn micro(&self) -> usize {
        self.s.pow(self.dim as u32)
    }

    /// `(∫_Ω ∫_Q |S_ε u|^p dy dx)^{1/p}`.
    pub fn norm_p(&self, p: f64) -> f64 {
        let w = 1.0 / (self.cells() * self.micro()) as f64;
        let s: f64 = self
            .values
            .chunks_exact(self.ncomp)
            .map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt().powf(p))
            .sum();
        (s * w).powf(1.0 / p)
    }

    /// The `y ↦ S_ε u(x, y)` slice over one lattice cell, as a field on the
    /// micro grid.
    pub fn cell_slice(&self, cell: usize) -> Result<PeriodicField> {
        let grid = Grid::new(self.dim, self.s)?;
        let micro = self.micro();
        let mut out = PeriodicField::zeros(grid, self.ncomp);
        for k in 0..micro {
            let base = (cell * micro + k) * self.ncomp;
            out.set_at(k, &self.values[base..base + self.ncomp]);
        }
        Ok(out)
    }

    /// Inverse of [`unfold`].
    pub fn fold(&self) -> Result<PeriodicField> {
        let grid = Grid::new(self.dim, self.m * self.s)?;
        let cell_grid = Grid::new(self.dim, self.m)?;
        let micro_grid = Grid::new(self.dim, self.s)?;
        let mut out = PeriodicField::zeros(grid, self.ncomp);
        for cell in 0..cell_grid.len() {
            let z = cell_grid.coords(cell);
            for k in 0..micro_grid.len() {
                let y = micro_grid.coords(k);
                let c: Vec<usize> = z.iter().zip(&y).map(|(z, y)| z * self.s + y).collect();
                let base = (cell * micro_grid.len() + k) * self.ncomp;
                out.set_at(grid.index(&c), &self.values[base..base + self.ncomp]);
            }
        }
        Ok(out)
    }
}

/// Rearranges a field on the `m·s` torus grid into cell/micro layout. Pure
/// index permutation: exact and norm preserving.
pub fn unfold(u: &PeriodicField, m: usize) -> Result<TwoVariableField> {
    let grid = u.grid();
    if m == 0 || !grid.n().is_multiple_of(m) {
        return Err(Error::Divisibility(format!(
            "grid resolution {} is not divisible by m = {m}",
            grid.n()
        )));
    }
    let s = grid.n() / m;
    let dim = grid.dim();
    let ncomp = u.ncomp();
    let micro = s.pow(dim as u32);
    let mut values = vec![0.0; grid.len() * ncomp];
    for idx in 0..grid.len() {
        let c = grid.coords(idx);
        let (mut cell, mut k) = (0, 0);
        for &ci in &c {
            cell = cell * m + ci / s;
            k = k * s + ci % s;
        }
        let base = (cell * micro + k) * ncomp;
        for comp in 0..ncomp {
            values[base + comp] = u.component(comp)[idx];
        }
    }
    Ok(TwoVariableField {
        dim,
        m,
        s,
        ncomp,
        values,
    })
}

/// Midpoint quadrature of `∫_Ω u_ε(x) · v(x, x/ε) dx` with `ε = 1/m`; the
/// test function receives `(x, {x/ε})`.
pub fn two_scale_pair(
    u: &PeriodicField,
    v: impl Fn(&[f64], &[f64]) -> Vec<f64>,
    m: usize,
) -> f64 {
    let grid = u.grid();
    let mut sum = 0.0;
    for idx in 0..grid.len() {
        let x = grid.center(idx);
        let y: Vec<f64> = x.iter().map(|xi| (xi * m as f64).fract()).collect();
        let val = v(&x, &y);
        sum += u.at(idx).iter().zip(&val).map(|(a, b)| a * b).sum::<f64>();
    }
    sum * grid.cell_volume()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn unfold_fold_is_identity_and_isometric() {
        let g = Grid::new(2, 16).unwrap();
        let u = PeriodicField::random(g, 3, 4);
        let t = unfold(&u, 4).unwrap();
        assert_eq!(t.fold().unwrap(), u);
        assert_eq!(t.norm_p(2.0), u.norm_p(2.0));
        assert!((t.norm_p(3.0) - u.norm_p(3.0)).abs() <= 1e-14 * u.norm_p(3.0));
    }

    #[test]
    fn oscillating_field_unfolds_to_constant_in_x() {
        let m = 4;
        let g = Grid::new(2, 32).unwrap();
        let u = PeriodicField::from_fn(g, 1, |x| {
            vec![(2.0 * PI * m as f64 * x[0]).cos() + (2.0 * PI * m as f64 * x[1]).sin()]
        });
        let t = unfold(&u, m).unwrap();
        let first = t.cell_slice(0).unwrap();
        for cell in 1..m * m {
            let slice = t.cell_slice(cell).unwrap();
            assert!(slice.sub(&first).max_abs() < 1e-12);
        }
        // and the slice is g(y) = cos(2πy₁) + sin(2πy₂)
        let expect = PeriodicField::from_fn(first.grid(), 1, |y| {
            vec![(2.0 * PI * y[0]).cos() + (2.0 * PI * y[1]).sin()]
        });
        assert!(first.sub(&expect).max_abs() < 1e-12);
    }

    #[test]
    fn unfold_requires_divisibility() {
        let g = Grid::new(1, 8).unwrap();
        assert!(unfold(&PeriodicField::zeros(g, 1), 3).is_err());
    }

    #[test]
    fn pairing_with_unit_vector_is_mean() {
        let g = Grid::new(2, 16).unwrap();
        let u = PeriodicField::random(g, 2, 5);
        let p = two_scale_pair(&u, |_, _| vec![0.0, 1.0], 4);
        assert!((p - u.mean()[1]).abs() < 1e-14);
    }

    #[test]
    fn separable_pairing_matches_cell_integral() {
        // u_ε(x) = g(x/ε), v = h(y) with g = h = cos(2πy₁): ∫_Q g h = 1/2.
        for m in [2usize, 4] {
            let g = Grid::new(2, 16 * m).unwrap();
            let u = PeriodicField::from_fn(g, 1, |x| vec![(2.0 * PI * m as f64 * x[0]).cos()]);
            let p = two_scale_pair(&u, |_, y| vec![(2.0 * PI * y[0]).cos()], m);
            assert!((p - 0.5).abs() < 1e-12, "{p}");
        }
    }

    #[test]
    fn small_amplitude_pairing_vanishes() {
        let mut prev = f64::INFINITY;
        for m in [2usize, 4, 8, 16] {
            let g = Grid::new(1, 8 * m).unwrap();
            let eps = 1.0 / m as f64;
            let u = PeriodicField::from_fn(g, 1, |x| vec![eps * (1.0 + (2.0 * PI * x[0]).sin())]);
            let p = two_scale_pair(&u, |_, y| vec![1.0 + y[0]], m).abs();
            assert!(p < prev);
            prev = p;
        }
        assert!(prev < 0.1);
    }
}
