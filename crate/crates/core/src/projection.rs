//! Spectral projection of periodic fields onto A-free fields, discrete
//! A-residuals, the Korn-type gap and potential recovery.
//!
//! Derivatives follow `∂_j ↔ 2πi ξ_j`. A frequency with some component at
//! the unpaired index `-n/2` stands for both `ξ` and its mirror `ξ̃` (that
//! component negated); there the projector maps onto
//! `ker 𝔸[ξ] ∩ ker 𝔸[ξ̃]`, which keeps projected fields real, idempotent and
//! self-adjoint without band-limiting the input.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{FftEngine, Grid, PeriodicField, Spectrum};
use crate::symbols::{
    check_potential_pair, kernel_projector, pseudoinverse, DifferentialOperator, PairStatus,
    DEFAULT_RANK_TOL,
};

/// Treatment of the `ξ = 0` mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroModePolicy {
    /// Project onto zero-mean A-free fields.
    ZeroMean,
    /// Constants are A-free for homogeneous operators; pass them through.
    KeepMean,
}

fn as_f64(xi: &[i64]) -> Vec<f64> {
    xi.iter().map(|&x| x as f64).collect()
}

fn unit(xi: &[f64]) -> Vec<f64> {
    let n = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
    xi.iter().map(|x| x / n).collect()
}

/// Mirror of a frequency across the unpaired index: components equal to
/// `-n/2` flip sign.
fn mirror(grid: Grid, xi: &[i64]) -> Vec<i64> {
    let half = grid.n() as i64 / 2;
    xi.iter().map(|&x| if x == -half { half } else { x }).collect()
}

/// Orthogonal projector onto the discrete kernel at one grid frequency.
fn frequency_projector(op: &DifferentialOperator, grid: Grid, xi: &[i64], tol: f64) -> DMatrix<f64> {
    let a = op.symbol_matrix(&unit(&as_f64(xi)));
    if grid.is_nyquist(xi) {
        let b = op.symbol_matrix(&unit(&as_f64(&mirror(grid, xi))));
        let mut stacked = DMatrix::zeros(2 * a.nrows(), a.ncols());
        stacked.rows_mut(0, a.nrows()).copy_from(&a);
        stacked.rows_mut(a.nrows(), b.nrows()).copy_from(&b);
        kernel_projector(&stacked, tol)
    } else {
        kernel_projector(&a, tol)
    }
}

fn apply_real(m: &DMatrix<f64>, v: &[Complex64]) -> Vec<Complex64> {
    (0..m.nrows())
        .map(|i| {
            v.iter()
                .enumerate()
                .map(|(j, z)| z * m[(i, j)])
                .sum::<Complex64>()
        })
        .collect()
}

/// `(2πi)^k`.
fn derivative_factor(order: usize) -> Complex64 {
    Complex64::new(0.0, 2.0 * std::f64::consts::PI).powi(order as i32)
}

fn check_field(op_dim: usize, op_in: usize, u: &PeriodicField) -> Result<()> {
    if u.grid().dim() != op_dim || u.ncomp() != op_in {
        return Err(Error::ShapeMismatch(format!(
            "field (d={}, N={}) does not match operator (d={op_dim}, N={op_in})",
            u.grid().dim(),
            u.ncomp()
        )));
    }
    Ok(())
}

/// Cached per-frequency kernel projectors `ℙ_A[ξ]` for one operator and
/// grid. Building the plan is the expensive step; applying it is two FFTs
/// per component and an `N×N` product per frequency.
#[derive(Clone, Debug)]
pub struct ProjectionPlan {
    op: DifferentialOperator,
    grid: Grid,
    policy: ZeroModePolicy,
    engine: FftEngine,
    /// Row-major `N×N` blocks, one per frequency index.
    projectors: Vec<f64>,
}

impl ProjectionPlan {
    pub fn new(op: &DifferentialOperator, grid: Grid, policy: ZeroModePolicy) -> Result<Self> {
        Self::with_tolerance(op, grid, policy, DEFAULT_RANK_TOL)
    }

    pub fn with_tolerance(
        op: &DifferentialOperator,
        grid: Grid,
        policy: ZeroModePolicy,
        tol: f64,
    ) -> Result<Self> {
        if grid.dim() != op.dim() {
            return Err(Error::DimensionMismatch(format!(
                "grid dimension {} vs operator dimension {}",
                grid.dim(),
                op.dim()
            )));
        }
        let n = op.in_dim();
        let projectors: Vec<f64> = (0..grid.len())
            .into_par_iter()
            .flat_map_iter(|idx| {
                let p = if idx == 0 {
                    match policy {
                        ZeroModePolicy::ZeroMean => DMatrix::zeros(n, n),
                        ZeroModePolicy::KeepMean => DMatrix::identity(n, n),
                    }
                } else {
                    frequency_projector(op, grid, &grid.frequency(idx), tol)
                };
                p.transpose().iter().copied().collect::<Vec<_>>()
            })
            .collect();
        Ok(Self {
            op: op.clone(),
            grid,
            policy,
            engine: FftEngine::new(grid),
            projectors,
        })
    }

    pub fn op(&self) -> &DifferentialOperator {
        &self.op
    }
    pub fn grid(&self) -> Grid {
        self.grid
    }
    pub fn policy(&self) -> ZeroModePolicy {
        self.policy
    }
    pub fn engine(&self) -> &FftEngine {
        &self.engine
    }

    /// The cached projector at a frequency index.
    pub fn projector(&self, idx: usize) -> DMatrix<f64> {
        let n = self.op.in_dim();
        DMatrix::from_row_slice(n, n, &self.projectors[idx * n * n..(idx + 1) * n * n])
    }

    pub fn check(&self, u: &PeriodicField) -> Result<()> {
        if u.grid() != self.grid || u.ncomp() != self.op.in_dim() {
            return Err(Error::ShapeMismatch(format!(
                "field (d={}, n={}, N={}) does not match plan (d={}, n={}, N={})",
                u.grid().dim(),
                u.grid().n(),
                u.ncomp(),
                self.grid.dim(),
                self.grid.n(),
                self.op.in_dim()
            )));
        }
        Ok(())
    }

    /// Applies the cached projectors to a spectrum in place.
    pub fn project_spectrum(&self, spec: &mut Spectrum) {
        let n = self.op.in_dim();
        let npts = self.grid.len();
        let mut v = vec![Complex64::default(); n];
        for idx in 0..npts {
            for (c, vc) in v.iter_mut().enumerate() {
                *vc = spec.get(c, idx);
            }
            let block = &self.projectors[idx * n * n..(idx + 1) * n * n];
            for i in 0..n {
                let row = &block[i * n..(i + 1) * n];
                let z: Complex64 = row.iter().zip(&v).map(|(p, z)| z * *p).sum();
                spec.set(i, idx, z);
            }
        }
    }

    /// `Π_A u`.
    pub fn project(&self, u: &PeriodicField) -> Result<PeriodicField> {
        self.check(u)?;
        let mut spec = self.engine.forward(u);
        self.project_spectrum(&mut spec);
        Ok(self.engine.inverse(&spec))
    }
}

/// `Π_A u` through a plan.
pub fn project_afree(plan: &ProjectionPlan, u: &PeriodicField) -> Result<PeriodicField> {
    plan.project(u)
}

/// Spectral residual `‖𝒜u‖ / ((πn)^k ‖u‖)`, with the sum over `ξ ≠ 0`.
/// Vanishes exactly on the range of the projection plan.
pub fn residual_a(op: &DifferentialOperator, u: &PeriodicField) -> Result<f64> {
    check_field(op.dim(), op.in_dim(), u)?;
    let grid = u.grid();
    let spec = FftEngine::new(grid).forward(u);
    let total = spec.energy();
    if total == 0.0 {
        return Ok(0.0);
    }
    let scale = (2.0 * std::f64::consts::PI).powi(op.order() as i32);
    let mut acc = 0.0;
    for idx in 1..grid.len() {
        let xi = grid.frequency(idx);
        let v = spec.at(idx);
        let r = |f: &[i64]| -> f64 {
            apply_real(&op.symbol_matrix(&as_f64(f)), &v)
                .iter()
                .map(|z| z.norm_sqr())
                .sum::<f64>()
        };
        acc += if grid.is_nyquist(&xi) {
            0.5 * (r(&xi) + r(&mirror(grid, &xi)))
        } else {
            r(&xi)
        };
    }
    let norm = (std::f64::consts::PI * grid.n() as f64).powi(op.order() as i32);
    Ok(scale * acc.sqrt() / (norm * total.sqrt()))
}

/// Applies a constant-coefficient operator spectrally; frequencies touching
/// the unpaired index are dropped so the result stays real.
fn apply_symbol(
    op: &DifferentialOperator,
    u: &PeriodicField,
    transpose: bool,
) -> Result<PeriodicField> {
    let (input, output) = if transpose {
        (op.out_dim(), op.in_dim())
    } else {
        (op.in_dim(), op.out_dim())
    };
    check_field(op.dim(), input, u)?;
    let grid = u.grid();
    let engine = FftEngine::new(grid);
    let spec = engine.forward(u);
    let mut out = Spectrum::zeros(grid, output);
    // 𝒜* = (-1)^k Σ A^αᵀ ∂^α  ↔  (-2πi)^k 𝔸[ξ]ᵀ
    let factor = if transpose {
        derivative_factor(op.order()).conj()
    } else {
        derivative_factor(op.order())
    };
    for idx in 1..grid.len() {
        let xi = grid.frequency(idx);
        if grid.is_nyquist(&xi) {
            continue;
        }
        let mut a = op.symbol_matrix(&as_f64(&xi));
        if transpose {
            a = a.transpose();
        }
        let w: Vec<Complex64> = apply_real(&a, &spec.at(idx))
            .into_iter()
            .map(|z| z * factor)
            .collect();
        out.set_at(idx, &w);
    }
    Ok(engine.inverse(&out))
}

/// `𝒜u`, computed spectrally.
pub fn apply_operator(op: &DifferentialOperator, u: &PeriodicField) -> Result<PeriodicField> {
    apply_symbol(op, u, false)
}

/// The formal adjoint `𝒜*ψ = (-1)^k Σ A^αᵀ ∂^α ψ`, computed spectrally.
pub fn apply_adjoint(op: &DifferentialOperator, psi: &PeriodicField) -> Result<PeriodicField> {
    apply_symbol(op, psi, true)
}

/// Both sides of the Korn-type inequality
/// `‖∇^k(u − Π_A u)‖₂ ≤ c ‖𝒜u‖₂`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KornGap {
    pub lhs: f64,
    pub rhs: f64,
}

impl KornGap {
    /// `lhs / rhs`, or 0 when both vanish.
    pub fn ratio(&self) -> f64 {
        if self.lhs == 0.0 && self.rhs == 0.0 {
            0.0
        } else {
            self.lhs / self.rhs
        }
    }
}

/// Spectral evaluation of the Korn gap. Inputs are expected to be
/// band-limited (`|ξ|_∞ ≤ n/4`) so that no derivative aliases.
pub fn korn_gap(op: &DifferentialOperator, u: &PeriodicField) -> Result<KornGap> {
    check_field(op.dim(), op.in_dim(), u)?;
    let grid = u.grid();
    let spec = FftEngine::new(grid).forward(u);
    let two_pi = 2.0 * std::f64::consts::PI;
    let k = op.order() as i32;
    let (mut lhs, mut rhs) = (0.0, 0.0);
    for idx in 1..grid.len() {
        let xi = grid.frequency(idx);
        let v = spec.at(idx);
        let p = frequency_projector(op, grid, &xi, DEFAULT_RANK_TOL);
        let pv = apply_real(&p, &v);
        let diff: f64 = v.iter().zip(&pv).map(|(a, b)| (a - b).norm_sqr()).sum();
        let xi_f = as_f64(&xi);
        let mag2: f64 = xi_f.iter().map(|x| (two_pi * x).powi(2)).sum();
        lhs += mag2.powi(k) * diff;
        let av = apply_real(&op.symbol_matrix(&xi_f), &v);
        rhs += two_pi.powi(2 * k) * av.iter().map(|z| z.norm_sqr()).sum::<f64>();
    }
    Ok(KornGap {
        lhs: lhs.sqrt(),
        rhs: rhs.sqrt(),
    })
}

/// Recovers a potential `w` with `𝔹w = u` for a zero-mean A-free field `u`,
/// frequency by frequency: `ŵ(ξ) = (2πi)^{-k} 𝔹[ξ]† û(ξ)`, `ŵ(0) = 0`.
///
/// Fails if `(op_a, op_b)` is not a potential pair, if `residual_a(op_a, u)`
/// exceeds `tol`, or if the reconstruction misses `u` by more than `10·tol`.
pub fn recover_potential(
    op_a: &DifferentialOperator,
    op_b: &DifferentialOperator,
    u: &PeriodicField,
    tol: f64,
) -> Result<PeriodicField> {
    match check_potential_pair(op_a, op_b, 64, 1e-8, 0)? {
        PairStatus::Compatible => {}
        PairStatus::Incompatible { omega } => return Err(Error::IncompatiblePair(omega)),
    }
    let residual = residual_a(op_a, u)?;
    if residual > tol {
        return Err(Error::ResidualTooLarge { residual, tol });
    }
    let grid = u.grid();
    let engine = FftEngine::new(grid);
    let spec = engine.forward(u);
    let mut w_hat = Spectrum::zeros(grid, op_b.in_dim());
    let inv_factor = derivative_factor(op_b.order()).inv();
    for idx in 1..grid.len() {
        let xi = grid.frequency(idx);
        if grid.is_nyquist(&xi) {
            continue;
        }
        let xi_f = as_f64(&xi);
        let len = xi_f.iter().map(|x| x * x).sum::<f64>().sqrt();
        let b_inv = pseudoinverse(&op_b.symbol_matrix(&unit(&xi_f)), DEFAULT_RANK_TOL)
            / len.powi(op_b.order() as i32);
        let w: Vec<Complex64> = apply_real(&b_inv, &spec.at(idx))
            .into_iter()
            .map(|z| z * inv_factor)
            .collect();
        w_hat.set_at(idx, &w);
    }
    let w = engine.inverse(&w_hat);
    let norm = u.norm_l2();
    if norm > 0.0 {
        let miss = apply_operator(op_b, &w)?.sub(u).norm_l2() / norm;
        if miss > 10.0 * tol {
            return Err(Error::InexactPotential(miss));
        }
    }
    Ok(w)
}

/// Convenience: `ℙ_A` at an integer grid frequency, as cached by plans.
pub fn grid_projector(op: &DifferentialOperator, grid: Grid, xi: &[i64]) -> DMatrix<f64> {
    frequency_projector(op, grid, xi, DEFAULT_RANK_TOL)
}

/// Symbol applied to a real vector (test and diagnostic helper).
pub fn symbol_times(op: &DifferentialOperator, xi: &[f64], v: &[f64]) -> Vec<f64> {
    (op.symbol_matrix(xi) * DVector::from_column_slice(v))
        .iter()
        .copied()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbols::catalog;
    use std::f64::consts::PI;

    fn plan(name: &str, n: usize, policy: ZeroModePolicy) -> ProjectionPlan {
        let op = catalog::lookup(name).unwrap().op;
        ProjectionPlan::new(&op, Grid::new(op.dim(), n).unwrap(), policy).unwrap()
    }

    #[test]
    fn cached_projectors_are_orthogonal_projections() {
        let p = plan("curlcurl:sym", 8, ZeroModePolicy::ZeroMean);
        for idx in 0..p.grid().len() {
            let m = p.projector(idx);
            assert!((&m * &m - &m).amax() < 1e-12);
            assert!((&m - m.transpose()).amax() < 1e-14);
        }
    }

    #[test]
    fn gradient_is_removed_by_div_projection() {
        let p = plan("div:2", 16, ZeroModePolicy::ZeroMean);
        // u = ∇φ, φ = sin(2πx₁) sin(2πx₂)
        let u = PeriodicField::from_fn(p.grid(), 2, |x| {
            let (s1, c1) = (2.0 * PI * x[0]).sin_cos();
            let (s2, c2) = (2.0 * PI * x[1]).sin_cos();
            vec![2.0 * PI * c1 * s2, 2.0 * PI * s1 * c2]
        });
        let out = p.project(&u).unwrap();
        assert!(out.max_abs() < 1e-12, "{}", out.max_abs());
    }

    #[test]
    fn constants_follow_zero_mode_policy() {
        let keep = plan("div:3", 8, ZeroModePolicy::KeepMean);
        let c = PeriodicField::constant(keep.grid(), &[1.0, -2.0, 0.5]);
        assert!(keep.project(&c).unwrap().sub(&c).max_abs() < 1e-14);
        let zero = plan("div:3", 8, ZeroModePolicy::ZeroMean);
        assert!(zero.project(&c).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn projection_is_idempotent_and_kills_residual() {
        let p = plan("curl", 8, ZeroModePolicy::ZeroMean);
        let u = PeriodicField::random(p.grid(), 3, 3);
        assert!(residual_a(p.op(), &u).unwrap() > 1e-2);
        let once = p.project(&u).unwrap();
        let twice = p.project(&once).unwrap();
        assert!(twice.sub(&once).max_abs() < 1e-12);
        assert!(residual_a(p.op(), &once).unwrap() < 1e-12);
    }

    #[test]
    fn gradients_are_curl_free() {
        let g = Grid::new(3, 16).unwrap();
        let phi = PeriodicField::random_band_limited(g, 1, 4, 8);
        let u = apply_operator(&catalog::gradient(3, 1), &phi).unwrap();
        assert!(residual_a(&catalog::curl(), &u).unwrap() < 1e-12);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let p = plan("div:2", 8, ZeroModePolicy::ZeroMean);
        let wrong = PeriodicField::zeros(Grid::new(2, 16).unwrap(), 2);
        assert!(matches!(p.project(&wrong), Err(Error::ShapeMismatch(_))));
        let wrong_n = PeriodicField::zeros(Grid::new(2, 8).unwrap(), 3);
        assert!(p.project(&wrong_n).is_err());
    }

    #[test]
    fn korn_gap_of_afree_field_is_zero() {
        let p = plan("div:2", 16, ZeroModePolicy::KeepMean);
        let u = p
            .project(&PeriodicField::random_band_limited(p.grid(), 2, 4, 1))
            .unwrap();
        let gap = korn_gap(p.op(), &u).unwrap();
        assert!(gap.lhs < 1e-10 && gap.rhs < 1e-10);
        assert_eq!(KornGap { lhs: 0.0, rhs: 0.0 }.ratio(), 0.0);
    }

    #[test]
    fn korn_gap_single_frequency_closed_form() {
        // u = a cos(2π ξ·x) with a ∥ ξ for div: u − Πu = u, ∇u has norm
        // 2π|ξ||a|/√2, div u has norm 2π|ξ·a|/√2, so the ratio is 1.
        let g = Grid::new(2, 16).unwrap();
        let xi = [2.0, 1.0];
        let u = PeriodicField::from_fn(g, 2, |x| {
            let c = (2.0 * PI * (xi[0] * x[0] + xi[1] * x[1])).cos();
            vec![xi[0] * c, xi[1] * c]
        });
        let gap = korn_gap(&catalog::divergence(2), &u).unwrap();
        assert!((gap.ratio() - 1.0).abs() < 1e-12, "{}", gap.ratio());
    }

    #[test]
    fn potential_of_cosine_gradient() {
        let g = Grid::new(3, 8).unwrap();
        let w0 = PeriodicField::from_fn(g, 1, |x| vec![(2.0 * PI * x[1]).cos()]);
        let u = apply_operator(&catalog::gradient(3, 1), &w0).unwrap();
        let w = recover_potential(&catalog::curl(), &catalog::gradient(3, 1), &u, 1e-10).unwrap();
        assert!(w.sub(&w0).max_abs() < 1e-10);
    }

    #[test]
    fn potential_of_zero_is_zero() {
        let g = Grid::new(2, 8).unwrap();
        let u = PeriodicField::zeros(g, 2);
        let w =
            recover_potential(&catalog::divergence(2), &catalog::div_antisym(2), &u, 1e-10).unwrap();
        assert_eq!(w.max_abs(), 0.0);
    }

    #[test]
    fn potential_errors() {
        let g = Grid::new(3, 8).unwrap();
        let u = PeriodicField::random(g, 3, 2);
        assert!(matches!(
            recover_potential(&catalog::curl(), &catalog::gradient(3, 1), &u, 1e-10),
            Err(Error::ResidualTooLarge { .. })
        ));
        assert!(matches!(
            recover_potential(&catalog::divergence(3), &catalog::gradient(3, 1), &u, 1e-10),
            Err(Error::IncompatiblePair(_))
        ));
    }

    #[test]
    fn adjoint_matches_inner_product() {
        let op = catalog::divergence(2);
        let g = Grid::new(2, 16).unwrap();
        let u = PeriodicField::random_band_limited(g, 2, 4, 1);
        let psi = PeriodicField::random_band_limited(g, 1, 4, 2);
        let lhs = apply_operator(&op, &u).unwrap().dot(&psi);
        let rhs = u.dot(&apply_adjoint(&op, &psi).unwrap());
        assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0));
    }
}
