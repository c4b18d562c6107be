use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{Grid, PeriodicField};

/// Fourier coefficients of a field, same component-major layout as
/// [`PeriodicField`], indexed by the grid's signed frequencies.
///
/// Normalization: `û(ξ) = n^{-d} Σ_j u_j e^{-2πi ξ·j/n}`, so a constant field
/// `c` has `û(0) = c` and Parseval reads `∫|u|² = Σ|û|²`.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    grid: Grid,
    ncomp: usize,
    data: Vec<Complex64>,
}

impl Spectrum {
    pub fn zeros(grid: Grid, ncomp: usize) -> Self {
        Self {
            grid,
            ncomp,
            data: vec![Complex64::default(); grid.len() * ncomp],
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }
    pub fn ncomp(&self) -> usize {
        self.ncomp
    }
    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn get(&self, c: usize, idx: usize) -> Complex64 {
        self.data[c * self.grid.len() + idx]
    }

    pub fn set(&mut self, c: usize, idx: usize, v: Complex64) {
        let n = self.grid.len();
        self.data[c * n + idx] = v;
    }

    /// All components at one frequency.
    pub fn at(&self, idx: usize) -> Vec<Complex64> {
        let n = self.grid.len();
        (0..self.ncomp).map(|c| self.data[c * n + idx]).collect()
    }

    pub fn set_at(&mut self, idx: usize, v: &[Complex64]) {
        let n = self.grid.len();
        for (c, &x) in v.iter().enumerate() {
            self.data[c * n + idx] = x;
        }
    }

    pub fn component(&self, c: usize) -> &[Complex64] {
        let n = self.grid.len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [Complex64] {
        let n = self.grid.len();
        &mut self.data[c * n..(c + 1) * n]
    }

    /// `Σ_ξ |û(ξ)|²`.
    pub fn energy(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// Planned forward/inverse transforms for one grid size.
#[derive(Clone)]
pub struct FftEngine {
    grid: Grid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FftEngine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftEngine").field("grid", &self.grid).finish()
    }
}

impl FftEngine {
    pub fn new(grid: Grid) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            grid,
            forward: planner.plan_fft_forward(grid.n()),
            inverse: planner.plan_fft_inverse(grid.n()),
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// Unnormalized transform of one component along every axis.
    fn transform(&self, buf: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let n = self.grid.n();
        let d = self.grid.dim();
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        let mut line = vec![Complex64::default(); n];
        for axis in 0..d {
            let stride = n.pow((d - 1 - axis) as u32);
            if stride == 1 {
                for chunk in buf.chunks_exact_mut(n) {
                    fft.process_with_scratch(chunk, &mut scratch);
                }
                continue;
            }
            let block = n * stride;
            for base in (0..buf.len()).step_by(block) {
                for off in 0..stride {
                    for (t, l) in line.iter_mut().enumerate() {
                        *l = buf[base + off + t * stride];
                    }
                    fft.process_with_scratch(&mut line, &mut scratch);
                    for (t, l) in line.iter().enumerate() {
                        buf[base + off + t * stride] = *l;
                    }
                }
            }
        }
    }

    pub fn forward(&self, field: &PeriodicField) -> Spectrum {
        debug_assert_eq!(field.grid(), self.grid);
        let npts = self.grid.len();
        let scale = 1.0 / npts as f64;
        let mut out = Spectrum::zeros(self.grid, field.ncomp());
        out.data
            .par_chunks_mut(npts)
            .enumerate()
            .for_each(|(c, buf)| {
                for (z, &x) in buf.iter_mut().zip(field.component(c)) {
                    *z = Complex64::new(x * scale, 0.0);
                }
                self.transform(buf, &self.forward);
            });
        out
    }

    /// Inverse transform keeping the real part.
    pub fn inverse(&self, spec: &Spectrum) -> PeriodicField {
        debug_assert_eq!(spec.grid(), self.grid);
        let npts = self.grid.len();
        let mut out = PeriodicField::zeros(self.grid, spec.ncomp());
        out.data_mut()
            .par_chunks_mut(npts)
            .enumerate()
            .for_each(|(c, dst)| {
                let mut buf = spec.component(c).to_vec();
                self.transform(&mut buf, &self.inverse);
                for (x, z) in dst.iter_mut().zip(&buf) {
                    *x = z.re;
                }
            });
        out
    }

    /// Inverse transform keeping the full complex result.
    pub fn inverse_complex(&self, spec: &Spectrum) -> Vec<Vec<Complex64>> {
        (0..spec.ncomp())
            .into_par_iter()
            .map(|c| {
                let mut buf = spec.component(c).to_vec();
                self.transform(&mut buf, &self.inverse);
                buf
            })
            .collect()
    }
}

/// Forward transform of a field (plans on the fly).
pub fn dft(field: &PeriodicField) -> Spectrum {
    FftEngine::new(field.grid()).forward(field)
}

/// Inverse transform (real part).
pub fn idft(spec: &Spectrum) -> PeriodicField {
    FftEngine::new(spec.grid()).inverse(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn constant_field_has_only_zero_mode() {
        let g = Grid::new(2, 8).unwrap();
        let s = dft(&PeriodicField::constant(g, &[2.5]));
        assert!((s.get(0, 0) - Complex64::new(2.5, 0.0)).norm() < 1e-14);
        for idx in 1..g.len() {
            assert!(s.get(0, idx).norm() < 1e-14);
        }
    }

    #[test]
    fn sine_has_two_frequencies() {
        let g = Grid::new(3, 8).unwrap();
        let u = PeriodicField::from_fn(g, 3, |x| vec![(2.0 * PI * x[0]).sin(), 0.0, 0.0]);
        let s = dft(&u);
        let mut support = Vec::new();
        for c in 0..3 {
            for idx in 0..g.len() {
                if s.get(c, idx).norm() > 1e-12 {
                    support.push((c, g.frequency(idx)));
                }
            }
        }
        assert_eq!(support, vec![(0, vec![1, 0, 0]), (0, vec![-1, 0, 0])]);
    }

    #[test]
    fn roundtrip_and_parseval() {
        let g = Grid::new(3, 16).unwrap();
        let u = PeriodicField::random(g, 2, 9);
        let s = dft(&u);
        let back = idft(&s);
        let err = back.sub(&u).max_abs() / u.max_abs();
        assert!(err < 1e-12, "{err}");
        let parseval = (s.energy() - u.dot(&u)).abs() / u.dot(&u);
        assert!(parseval < 1e-12, "{parseval}");
    }

    #[test]
    fn one_dimensional_transform_matches_direct_sum() {
        let g = Grid::new(1, 8).unwrap();
        let u = PeriodicField::random(g, 1, 2);
        let s = dft(&u);
        for k in 0..8 {
            let direct: Complex64 = (0..8)
                .map(|j| {
                    u.component(0)[j] * Complex64::from_polar(1.0, -2.0 * PI * (j * k) as f64 / 8.0)
                })
                .sum::<Complex64>()
                / 8.0;
            assert!((direct - s.get(0, k)).norm() < 1e-13);
        }
    }
}
