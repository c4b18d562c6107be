//! Cell problems: the A-quasiconvex envelope, the perforated homogenized
//! density, the soft-inclusion constant and the `−det` counterexample.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{rasterize_microdomain, Grid, Microstructure, PeriodicField};
use crate::integrand::IntegrandSpec;
use crate::optim::{
    multi_start, random_starts, Residuals, SolveOptions, SolveReport, SupportedAfree,
};
use crate::projection::{residual_a, ProjectionPlan, ZeroModePolicy};
use crate::symbols::{catalog, DifferentialOperator};

/// `Σ_idx point(idx, u(idx), ∇) · h^d`, writing the pointwise gradients.
pub(crate) fn assemble(
    u: &PeriodicField,
    grad: &mut PeriodicField,
    mut point: impl FnMut(usize, &[f64], &mut [f64]) -> f64,
) -> f64 {
    let n = u.ncomp();
    let mut xi = vec![0.0; n];
    let mut gi = vec![0.0; n];
    let mut sum = 0.0;
    for idx in 0..u.grid().len() {
        for (c, x) in xi.iter_mut().enumerate() {
            *x = u.component(c)[idx];
        }
        gi.iter_mut().for_each(|g| *g = 0.0);
        sum += point(idx, &xi, &mut gi);
        for (c, g) in gi.iter().enumerate() {
            grad.component_mut(c)[idx] = *g;
        }
    }
    sum * u.grid().cell_volume()
}

pub(crate) fn check_integrand(op: &DifferentialOperator, f: &IntegrandSpec) -> Result<()> {
    f.validate(Some(op.in_dim()))
}

pub(crate) fn check_xi(op: &DifferentialOperator, xi: &[f64]) -> Result<()> {
    if xi.len() != op.in_dim() {
        return Err(Error::DimensionMismatch(format!(
            "ξ has {} entries, operator acts on ℝ^{}",
            xi.len(),
            op.in_dim()
        )));
    }
    Ok(())
}

fn require_y_independent(f: &IntegrandSpec) -> Result<()> {
    if f.is_y_independent() {
        Ok(())
    } else {
        Err(Error::InvalidIntegrand(
            "this solver needs a y-independent density".into(),
        ))
    }
}

/// Laminates between the two wells of a double-well density with average
/// near `ξ`, one per axis and rounding, made feasible by projection.
fn laminate_starts(f: &IntegrandSpec, xi: &[f64], plan: &ProjectionPlan) -> Vec<PeriodicField> {
    let IntegrandSpec::DoubleWell { w1, w2, .. } = f else {
        return Vec::new();
    };
    let jump: Vec<f64> = w1.iter().zip(w2).map(|(a, b)| a - b).collect();
    let jj: f64 = jump.iter().map(|v| v * v).sum();
    if jj == 0.0 {
        return Vec::new();
    }
    let theta = (xi
        .iter()
        .zip(w2)
        .zip(&jump)
        .map(|((x, b), j)| (x - b) * j)
        .sum::<f64>()
        / jj)
        .clamp(0.0, 1.0);
    let grid = plan.grid();
    let n = grid.n();
    let x0 = PeriodicField::constant(grid, xi);
    let mut counts = vec![(theta * n as f64).floor() as usize, (theta * n as f64).ceil() as usize];
    counts.dedup();
    let mut out = Vec::new();
    for axis in 0..grid.dim() {
        for &k in &counts {
            let mut lam = PeriodicField::zeros(grid, xi.len());
            for idx in 0..grid.len() {
                let v = if grid.coords(idx)[axis] < k { w1 } else { w2 };
                lam.set_at(idx, v);
            }
            let mut start = x0.clone();
            start.axpy(1.0, &plan.project(&lam).expect("shape"));
            out.push(start);
        }
    }
    out
}

fn starts_for(
    f: &IntegrandSpec,
    xi: &[f64],
    plan: &ProjectionPlan,
    opts: &SolveOptions,
) -> Vec<PeriodicField> {
    let x0 = PeriodicField::constant(plan.grid(), xi);
    let scale = 1.0 + xi.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut starts = vec![x0.clone()];
    starts.extend(laminate_starts(f, xi, plan));
    starts.extend(random_starts(&x0, plan, opts.restarts, scale, opts.seed));
    starts
}

fn zero_mean_report(
    op: &DifferentialOperator,
    xi: &[f64],
    descent: crate::optim::Descent,
) -> Result<SolveReport> {
    let x0 = PeriodicField::constant(descent.x.grid(), xi);
    let v = descent.x.sub(&x0);
    let mean = v.mean().iter().map(|m| m.abs()).fold(0.0, f64::max);
    Ok(SolveReport {
        value: descent.value,
        iterations: descent.iterations,
        grad_norm: descent.grad_norm,
        residuals: Residuals {
            a: residual_a(op, &v)?,
            support: 0.0,
            mean,
        },
        converged: descent.converged,
        dykstra_rate: None,
        argmin: descent.x,
    })
}

/// `Q_A f(ξ) = min { ⨍ f(ξ + v) : v zero-mean, A-free }` on the `n`-grid.
/// For nonconvex `f` the value is the best local minimum found, an upper
/// bound on the discrete envelope.
pub fn qa_envelope(
    op: &DifferentialOperator,
    f: &IntegrandSpec,
    xi: &[f64],
    n: usize,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    opts.validate()?;
    check_integrand(op, f)?;
    require_y_independent(f)?;
    check_xi(op, xi)?;
    let grid = Grid::new(op.dim(), n)?;
    let plan = ProjectionPlan::new(op, grid, ZeroModePolicy::ZeroMean)?;
    let objective = |u: &PeriodicField, g: &mut PeriodicField| {
        assemble(u, g, |_, x, gi| {
            f.gradient(&[], x, gi);
            f.value(&[], x)
        })
    };
    let starts = starts_for(f, xi, &plan, opts);
    let best = multi_start(&objective, &plan, None, starts, opts)?;
    zero_mean_report(op, xi, best)
}

/// One term of the `f_hom` sequence: the perforated cell problem at scale
/// `1/k` on the `n`-grid,
/// `min { ∫ χ_stiff^{(k)}(y) f₁(ky, ξ + v(y)) dy : v zero-mean, A-free }`.
#[allow(clippy::too_many_arguments)]
pub fn fhom(
    op: &DifferentialOperator,
    f1: &IntegrandSpec,
    ms: &Microstructure,
    xi: &[f64],
    k: usize,
    n: usize,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    opts.validate()?;
    check_integrand(op, f1)?;
    check_xi(op, xi)?;
    if ms.dim() != op.dim() {
        return Err(Error::DimensionMismatch(format!(
            "microstructure dimension {} vs operator dimension {}",
            ms.dim(),
            op.dim()
        )));
    }
    if k == 0 || !n.is_multiple_of(k * ms.n()) {
        return Err(Error::Divisibility(format!(
            "n = {n} must be divisible by k·n_micro = {k}·{}",
            ms.n()
        )));
    }
    let md = rasterize_microdomain(ms, k, n / k)?;
    let grid = md.grid();
    let plan = ProjectionPlan::new(op, grid, ZeroModePolicy::ZeroMean)?;
    let ys: Vec<Vec<f64>> = if f1.is_y_independent() {
        Vec::new()
    } else {
        (0..grid.len()).map(|i| md.micro_coord(i)).collect()
    };
    let chi0 = md.chi0();
    let objective = |u: &PeriodicField, g: &mut PeriodicField| {
        assemble(u, g, |idx, x, gi| {
            if chi0[idx] {
                return 0.0;
            }
            let y: &[f64] = ys.get(idx).map_or(&[], |v| v);
            f1.gradient(y, x, gi);
            f1.value(y, x)
        })
    };
    let starts = starts_for(f1, xi, &plan, opts);
    let best = multi_start(&objective, &plan, None, starts, opts)?;
    zero_mean_report(op, xi, best)
}

#[derive(Clone, Debug, Serialize)]
pub struct FhomRow {
    pub k: usize,
    pub report: SolveReport,
}

#[derive(Clone, Debug, Serialize)]
pub struct FhomTable {
    pub rows: Vec<FhomRow>,
    /// Minimum over the last half of the table.
    pub liminf: f64,
}

/// Runs [`fhom`] for each `k` and estimates the `liminf` as the tail
/// minimum. No monotonicity in `k` is assumed.
#[allow(clippy::too_many_arguments)]
pub fn fhom_limit(
    op: &DifferentialOperator,
    f1: &IntegrandSpec,
    ms: &Microstructure,
    xi: &[f64],
    k_list: &[usize],
    n: usize,
    opts: &SolveOptions,
) -> Result<FhomTable> {
    if k_list.is_empty() {
        return Err(Error::Empty("k_list"));
    }
    if k_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidOptions("k_list must be strictly ascending".into()));
    }
    let rows = k_list
        .par_iter()
        .map(|&k| fhom(op, f1, ms, xi, k, n, opts).map(|report| FhomRow { k, report }))
        .collect::<Result<Vec<_>>>()?;
    let tail = rows.len() / 2;
    let liminf = rows[tail..]
        .iter()
        .map(|r| r.report.value)
        .fold(f64::INFINITY, f64::min);
    Ok(FhomTable { rows, liminf })
}

/// `α₀ = min { ∫_{D₀} f₀(v) : v A-free on the torus, v = 0 on D₁ }` on the
/// `n`-grid. The feasible set is reached by alternating projections;
/// `residuals.mean` carries the mean of the minimizer as a diagnostic.
pub fn alpha0_cell(
    op: &DifferentialOperator,
    f0: &IntegrandSpec,
    ms: &Microstructure,
    n: usize,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    opts.validate()?;
    check_integrand(op, f0)?;
    require_y_independent(f0)?;
    if ms.dim() != op.dim() {
        return Err(Error::DimensionMismatch(format!(
            "microstructure dimension {} vs operator dimension {}",
            ms.dim(),
            op.dim()
        )));
    }
    let md = rasterize_microdomain(ms, 1, n)?;
    let grid = md.grid();
    let plan = ProjectionPlan::new(op, grid, ZeroModePolicy::KeepMean)?;
    let chi0 = md.chi0();
    let space = SupportedAfree::new(&plan, chi0, opts.dykstra_iters, opts.dykstra_tol);
    let objective = |u: &PeriodicField, g: &mut PeriodicField| {
        assemble(u, g, |idx, x, gi| {
            if !chi0[idx] {
                return 0.0;
            }
            f0.gradient(&[], x, gi);
            f0.value(&[], x)
        })
    };
    let x0 = PeriodicField::zeros(grid, op.in_dim());
    let mut starts = vec![x0.clone()];
    starts.extend(random_starts(&x0, &space, opts.restarts, 1.0, opts.seed));
    let best = multi_start(&objective, &space, None, starts, opts)?;
    let stats = space.stats();
    let v = &best.x;
    let mut support: f64 = 0.0;
    for c in 0..v.ncomp() {
        for (x, &soft) in v.component(c).iter().zip(chi0) {
            if !soft {
                support = support.max(x.abs());
            }
        }
    }
    let mean = v.mean().iter().map(|m| m * m).sum::<f64>().sqrt();
    Ok(SolveReport {
        value: best.value,
        iterations: best.iterations,
        grad_norm: best.grad_norm,
        residuals: Residuals {
            a: residual_a(op, v)?,
            support,
            mean,
        },
        converged: best.converged && stats.max_residual <= opts.dykstra_tol,
        dykstra_rate: stats.rate,
        argmin: best.x,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CounterexampleRow {
    pub epsilon: f64,
    /// Quadrature of `∫_{Ω'} ∫_D −det(w_ε)`.
    pub value: f64,
    /// `−(1 + ε²)`.
    pub closed_form: f64,
}

/// Integrates `−det(a_ε(x) + εI)` with `a_ε` the `±I` checkerboard of
/// period `ε` on `Ω' = D = (0,1)²`. Each `ε` must be `1/m` for an even `m`.
pub fn counterexample_gap(eps_list: &[f64]) -> Result<Vec<CounterexampleRow>> {
    if eps_list.is_empty() {
        return Err(Error::Empty("eps_list"));
    }
    eps_list
        .iter()
        .map(|&eps| {
            let m = (1.0 / eps).round() as usize;
            if !(eps > 0.0) || m == 0 || !m.is_multiple_of(2) || ((1.0 / m as f64) - eps).abs() > 1e-12 {
                return Err(Error::InvalidOptions(format!(
                    "ε = {eps} must be 1/m for an even integer m"
                )));
            }
            // two samples per checkerboard cell and axis; the integrand is
            // independent of y, so the D-integral is the factor |D| = 1
            let r = 2 * m;
            let mut sum = 0.0;
            for i in 0..r {
                for j in 0..r {
                    let s = if (i / 2 + j / 2) % 2 == 0 { 1.0 } else { -1.0 };
                    let w = [s + eps, 0.0, 0.0, s + eps];
                    sum += IntegrandSpec::NegDet.value(&[], &w);
                }
            }
            Ok(CounterexampleRow {
                epsilon: eps,
                value: sum / (r * r) as f64,
                closed_form: -(1.0 + eps * eps),
            })
        })
        .collect()
}

/// `Q_A f₀(0)` for `f₀ = −det` under the row-wise curl on 2×2 matrix
/// fields, starting from `v = 0`.
pub fn counterexample_reference(n: usize, opts: &SolveOptions) -> Result<SolveReport> {
    let op = catalog::row_curl(2, 2);
    let fresh = SolveOptions {
        restarts: 0,
        ..opts.clone()
    };
    qa_envelope(&op, &IntegrandSpec::NegDet, &[0.0; 4], n, &fresh)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> SolveOptions {
        SolveOptions::default()
    }

    #[test]
    fn convex_envelope_is_identity() {
        let op = catalog::divergence(2);
        let f = IntegrandSpec::squared_norm(2);
        let r = qa_envelope(&op, &f, &[1.0, 2.0], 8, &opts()).unwrap();
        assert!((r.value - 5.0).abs() < 1e-12);
        assert!(r.converged);
        assert!(r.argmin.sub(&PeriodicField::constant(r.argmin.grid(), &[1.0, 2.0])).max_abs() < 1e-12);
    }

    #[test]
    fn neg_det_reference_is_zero() {
        let r = counterexample_reference(8, &opts()).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.converged);
    }

    #[test]
    fn double_well_laminate_reaches_zero() {
        let op = catalog::row_curl(1, 1);
        let f = IntegrandSpec::DoubleWell {
            w1: vec![-1.0],
            w2: vec![1.0],
            stiffness: 1.0,
        };
        let r = qa_envelope(&op, &f, &[0.0], 64, &opts()).unwrap();
        assert!(r.value < 1e-10, "{}", r.value);
        assert!(r.residuals.mean < 1e-12);
    }

    #[test]
    fn envelope_rejects_bad_inputs() {
        let op = catalog::divergence(2);
        let f = IntegrandSpec::squared_norm(2);
        assert!(qa_envelope(&op, &f, &[1.0], 8, &opts()).is_err());
        assert!(qa_envelope(&op, &IntegrandSpec::squared_norm(3), &[1.0, 0.0], 8, &opts()).is_err());
        let osc = IntegrandSpec::OscillatoryQuadratic {
            mean: 2.0,
            amplitude: 1.0,
            b: vec![0.0, 0.0],
        };
        assert!(qa_envelope(&op, &osc, &[1.0, 0.0], 8, &opts()).is_err());
    }

    #[test]
    fn unperforated_fhom_is_jensen() {
        let op = catalog::curl();
        let ms = Microstructure::empty(3, 4).unwrap();
        let f = IntegrandSpec::squared_norm(3);
        let r = fhom(&op, &f, &ms, &[1.0, -1.0, 0.5], 1, 8, &opts()).unwrap();
        assert!((r.value - 2.25).abs() < 1e-12);
    }

    #[test]
    fn fhom_divisibility_and_empty_k_list() {
        let op = catalog::divergence(2);
        let ms = Microstructure::centered_box(2, 8, 0.25, 1).unwrap();
        let f = IntegrandSpec::squared_norm(2);
        assert!(matches!(
            fhom(&op, &f, &ms, &[1.0, 0.0], 2, 8, &opts()),
            Err(Error::Divisibility(_))
        ));
        assert!(fhom_limit(&op, &f, &ms, &[1.0, 0.0], &[], 8, &opts()).is_err());
        assert!(fhom_limit(&op, &f, &ms, &[1.0, 0.0], &[2, 1], 16, &opts()).is_err());
    }

    #[test]
    fn perforation_lowers_energy() {
        let op = catalog::divergence(2);
        let ms = Microstructure::centered_box(2, 8, 0.25, 1).unwrap();
        let f = IntegrandSpec::squared_norm(2);
        let r = fhom(&op, &f, &ms, &[1.0, 0.0], 1, 16, &opts()).unwrap();
        assert!(r.value < 0.75 + 1e-12 && r.value > 0.0, "{}", r.value);
        assert!(r.residuals.a < 1e-8);
        assert!(r.residuals.mean < 1e-10);
    }

    #[test]
    fn alpha0_vanishes_for_nonnegative_f0() {
        let op = catalog::divergence(2);
        let ms = Microstructure::centered_box(2, 8, 0.25, 1).unwrap();
        let r = alpha0_cell(&op, &IntegrandSpec::squared_norm(2), &ms, 8, &opts()).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.converged);
    }

    #[test]
    fn alpha0_gradient_constraint_is_rigid() {
        // curl-free fields vanishing on D₁ are zero, so α₀ = f₀(0)|D₀|
        let op = catalog::curl();
        let ms = Microstructure::centered_box(3, 8, 0.25, 1).unwrap();
        let f0 = IntegrandSpec::shifted_square(vec![1.0, 0.0, 0.0]);
        let r = alpha0_cell(&op, &f0, &ms, 8, &opts()).unwrap();
        assert!((r.value - ms.soft_fraction()).abs() < 1e-8, "{}", r.value);
    }

    #[test]
    fn counterexample_closed_form() {
        let rows = counterexample_gap(&[0.5, 0.25, 0.125]).unwrap();
        for r in &rows {
            assert!((r.value - r.closed_form).abs() < 1e-12);
        }
        assert_eq!(rows[0].value, -1.25);
        assert!(counterexample_gap(&[0.3]).is_err());
        assert!(counterexample_gap(&[]).is_err());
    }
}
