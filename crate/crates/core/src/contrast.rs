//! High-contrast energies `F_ε` on the micro-structured torus, the limit
//! functional `α₀ + ∫ f_hom(u)` over constant fields, and the sweep
//! comparing `min F_ε` against the predicted limit.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::cell::{alpha0_cell, assemble, check_integrand, fhom_limit};
use crate::error::{Error, Result};
use crate::fields::{rasterize_microdomain, two_scale_pair, MicroDomain, Microstructure, PeriodicField};
use crate::integrand::{IntegrandSpec, SoftFamily};
use crate::optim::{multi_start, random_starts, Residuals, SolveOptions, SolveReport};
use crate::projection::{residual_a, ProjectionPlan, ZeroModePolicy};
use crate::symbols::DifferentialOperator;

#[derive(Clone, Debug)]
pub struct HighContrastProblem {
    pub op: DifferentialOperator,
    pub f0: SoftFamily,
    pub f1: IntegrandSpec,
    pub ms: Microstructure,
    /// `ε = 1/m`.
    pub m: usize,
    /// Samples per ε-cell and axis.
    pub s: usize,
    pub opts: SolveOptions,
}

impl HighContrastProblem {
    pub fn new(
        op: DifferentialOperator,
        f0: SoftFamily,
        f1: IntegrandSpec,
        ms: Microstructure,
        m: usize,
        s: usize,
        opts: SolveOptions,
    ) -> Result<Self> {
        let prob = Self {
            op,
            f0,
            f1,
            ms,
            m,
            s,
            opts,
        };
        prob.validate()?;
        Ok(prob)
    }

    pub fn validate(&self) -> Result<()> {
        self.opts.validate()?;
        self.f0.validate(self.op.in_dim())?;
        check_integrand(&self.op, &self.f1)?;
        if self.ms.dim() != self.op.dim() {
            return Err(Error::DimensionMismatch(format!(
                "microstructure dimension {} vs operator dimension {}",
                self.ms.dim(),
                self.op.dim()
            )));
        }
        self.domain().map(|_| ())
    }

    pub fn epsilon(&self) -> f64 {
        1.0 / self.m as f64
    }

    pub fn domain(&self) -> Result<MicroDomain> {
        rasterize_microdomain(&self.ms, self.m, self.s)
    }

    /// The same problem at another scale.
    pub fn with_m(&self, m: usize) -> Self {
        Self { m, ..self.clone() }
    }
}

/// Soft and stiff contributions to `F_ε(u)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnergyParts {
    pub soft: f64,
    pub stiff: f64,
}

impl EnergyParts {
    pub fn total(&self) -> f64 {
        self.soft + self.stiff
    }
}

struct Evaluator<'a> {
    prob: &'a HighContrastProblem,
    md: MicroDomain,
    ys: Vec<Vec<f64>>,
    eps: f64,
}

impl<'a> Evaluator<'a> {
    fn new(prob: &'a HighContrastProblem) -> Result<Self> {
        prob.validate()?;
        let md = prob.domain()?;
        let ys = if prob.f1.is_y_independent() {
            Vec::new()
        } else {
            (0..md.grid().len()).map(|i| md.micro_coord(i)).collect()
        };
        Ok(Self {
            prob,
            eps: md.epsilon(),
            md,
            ys,
        })
    }

    fn check(&self, u: &PeriodicField) -> Result<()> {
        if u.grid() != self.md.grid() || u.ncomp() != self.prob.op.in_dim() {
            return Err(Error::ShapeMismatch(format!(
                "field (d={}, n={}, N={}) does not match the ε-grid (d={}, n={}, N={})",
                u.grid().dim(),
                u.grid().n(),
                u.ncomp(),
                self.md.grid().dim(),
                self.md.grid().n(),
                self.prob.op.in_dim()
            )));
        }
        Ok(())
    }

    fn parts(&self, u: &PeriodicField, grad: &mut PeriodicField) -> EnergyParts {
        let eps = self.eps;
        let mut soft = 0.0;
        let mut scaled = vec![0.0; u.ncomp()];
        let total = assemble(u, grad, |idx, x, gi| {
            if self.md.is_soft(idx) {
                scaled.iter_mut().zip(x).for_each(|(s, x)| *s = eps * x);
                self.prob.f0.gradient(eps, &scaled, gi);
                gi.iter_mut().for_each(|g| *g *= eps);
                let v = self.prob.f0.value(eps, &scaled);
                soft += v;
                v
            } else {
                let y: &[f64] = self.ys.get(idx).map_or(&[], |v| v);
                self.prob.f1.gradient(y, x, gi);
                self.prob.f1.value(y, x)
            }
        });
        let soft = soft * u.grid().cell_volume();
        EnergyParts {
            soft,
            stiff: total - soft,
        }
    }
}

/// Midpoint quadrature of `∫ χ_{0,ε} f_{0,ε}(εu) + χ_{1,ε} f₁(x/ε, u)`.
pub fn energy_feps(prob: &HighContrastProblem, u: &PeriodicField) -> Result<f64> {
    energy_parts(prob, u).map(|p| p.total())
}

pub fn energy_parts(prob: &HighContrastProblem, u: &PeriodicField) -> Result<EnergyParts> {
    let ev = Evaluator::new(prob)?;
    ev.check(u)?;
    let mut g = PeriodicField::zeros(u.grid(), u.ncomp());
    Ok(ev.parts(u, &mut g))
}

/// Minimizes `F_ε` over discretely A-free fields on the ε-grid, constants
/// included. Starts from the stiff-region constant `ξ*` (zero on the soft
/// region, then projected) and from the constant field `ξ*`.
pub fn minimize_feps(prob: &HighContrastProblem, xi_star: Option<&[f64]>) -> Result<SolveReport> {
    let ev = Evaluator::new(prob)?;
    let grid = ev.md.grid();
    let n = prob.op.in_dim();
    let xi = xi_star.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    if xi.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "ξ* has {} entries, expected {n}",
            xi.len()
        )));
    }
    let plan = ProjectionPlan::new(&prob.op, grid, ZeroModePolicy::KeepMean)?;
    let p = prob.f0.p();
    let inv: Vec<f64> = (0..grid.len())
        .map(|i| {
            if ev.md.is_soft(i) {
                ev.eps.powf(-p)
            } else {
                1.0
            }
        })
        .collect();
    let constant = PeriodicField::constant(grid, &xi);
    let mut stiff_only = constant.clone();
    for c in 0..n {
        for (v, &soft) in stiff_only.component_mut(c).iter_mut().zip(ev.md.chi0()) {
            if soft {
                *v = 0.0;
            }
        }
    }
    let mut starts = vec![plan.project(&stiff_only)?, constant.clone()];
    let scale = 1.0 + xi.iter().map(|v| v * v).sum::<f64>().sqrt();
    starts.extend(random_starts(
        &constant,
        &plan,
        prob.opts.restarts,
        scale,
        prob.opts.seed,
    ));
    let objective = |u: &PeriodicField, g: &mut PeriodicField| ev.parts(u, g).total();
    let best = multi_start(&objective, &plan, Some(&inv), starts, &prob.opts)?;
    Ok(SolveReport {
        value: best.value,
        iterations: best.iterations,
        grad_norm: best.grad_norm,
        residuals: Residuals {
            a: residual_a(&prob.op, &best.x)?,
            support: 0.0,
            mean: 0.0,
        },
        converged: best.converged,
        dykstra_rate: None,
        argmin: best.x,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct GridValue {
    pub xi: Vec<f64>,
    pub fhom: f64,
}

/// Minimum of the limit functional over constant fields `u ≡ ξ`.
#[derive(Clone, Debug, Serialize)]
pub struct LimitReport {
    pub restriction: &'static str,
    pub xi_star: Vec<f64>,
    pub fhom: f64,
    pub alpha0: f64,
    /// `α₀ + f_hom(ξ*)`.
    pub value: f64,
    /// True when `f₁` is nonconvex, so the constant restriction only bounds
    /// the limit minimum from above.
    pub constant_competitor_bound: bool,
    pub alpha0_converged: bool,
    pub table: Vec<GridValue>,
    pub refinement_evaluations: usize,
}

/// Node spacing of a grid along one axis, 0 if the axis is not sampled.
fn spacing(grid: &[Vec<f64>], axis: usize) -> f64 {
    let mut vals: Vec<f64> = grid.iter().map(|x| x[axis]).collect();
    vals.sort_by(f64::total_cmp);
    vals.windows(2)
        .map(|w| w[1] - w[0])
        .filter(|d| *d > 0.0)
        .fold(0.0, |acc: f64, d| if acc == 0.0 { d } else { acc.min(d) })
}

/// Golden-section minimization of `φ` on `[a, b]`; returns `(t, φ(t), evals)`.
fn golden(mut a: f64, mut b: f64, tol: f64, phi: impl Fn(f64) -> Result<f64>) -> Result<(f64, f64, usize)> {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (phi(c)?, phi(d)?);
    let mut evals = 2;
    while b - a > tol && evals < 80 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = phi(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = phi(d)?;
        }
        evals += 1;
    }
    Ok(if fc <= fd { (c, fc, evals) } else { (d, fd, evals) })
}

/// Evaluates `f_hom` on `xi_grid` (tail minimum over `k_list` on the
/// `n`-grid), refines around the best node by golden section along each
/// axis, and adds `α₀`.
#[allow(clippy::too_many_arguments)]
pub fn minimize_limit(
    op: &DifferentialOperator,
    f1: &IntegrandSpec,
    f0: &IntegrandSpec,
    ms: &Microstructure,
    xi_grid: &[Vec<f64>],
    k_list: &[usize],
    n: usize,
    opts: &SolveOptions,
) -> Result<LimitReport> {
    if xi_grid.is_empty() {
        return Err(Error::Empty("xi_grid"));
    }
    let eval = |xi: &[f64]| fhom_limit(op, f1, ms, xi, k_list, n, opts).map(|t| t.liminf);
    let table = xi_grid
        .par_iter()
        .map(|xi| {
            eval(xi).map(|fhom| GridValue {
                xi: xi.clone(),
                fhom,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let best = table
        .iter()
        .min_by(|a, b| a.fhom.total_cmp(&b.fhom))
        .expect("nonempty");
    let mut xi_star = best.xi.clone();
    let mut fbest = best.fhom;
    let mut evaluations = 0;
    for axis in 0..xi_star.len() {
        let h = spacing(xi_grid, axis);
        if h == 0.0 {
            continue;
        }
        let centre = xi_star[axis];
        let (t, ft, ev) = golden(centre - h, centre + h, 1e-7 * h.max(1.0), |t| {
            let mut x = xi_star.clone();
            x[axis] = t;
            eval(&x)
        })?;
        evaluations += ev;
        if ft < fbest {
            fbest = ft;
            xi_star[axis] = t;
        }
    }
    let alpha = alpha0_cell(op, f0, ms, n, opts)?;
    Ok(LimitReport {
        restriction: "constant fields",
        value: alpha.value + fbest,
        xi_star,
        fhom: fbest,
        alpha0: alpha.value,
        constant_competitor_bound: matches!(
            f1,
            IntegrandSpec::DoubleWell { .. } | IntegrandSpec::NegDet
        ),
        alpha0_converged: alpha.converged,
        table,
        refinement_evaluations: evaluations,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub m: usize,
    pub epsilon: f64,
    pub min_feps: f64,
    pub predicted: f64,
    pub gap: f64,
    /// `gap / max(|predicted|, 1)`.
    pub relative_gap: f64,
    pub iterations: usize,
    pub residual_a: f64,
    pub converged: bool,
    /// `ε |mean u_ε|`.
    pub eps_mean: f64,
    /// `∫ u_ε(x) · v(x, x/ε) dx` for a fixed smooth test function `v`.
    pub pairing: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GammaSweepReport {
    /// Sorted by decreasing ε.
    pub rows: Vec<SweepRow>,
    pub limit: LimitReport,
    pub predicted: f64,
    /// `(4 F(ε/2) − F(ε)) / 3` from the last two rows when they differ by a
    /// factor two in `m`.
    pub richardson: Option<f64>,
    /// Whether each gap is at most 110% of the previous one; `None` for a
    /// single row.
    pub gaps_non_increasing: Option<bool>,
}

/// Test function `v(x, y)_c = cos(2πx₁) cos(2πy_{c mod d})` of the
/// high-contrast diagnostics.
pub fn pairing_test_function(ncomp: usize) -> impl Fn(&[f64], &[f64]) -> Vec<f64> {
    move |x: &[f64], y: &[f64]| {
        (0..ncomp)
            .map(|c| (2.0 * PI * x[0]).cos() * (2.0 * PI * y[c % y.len()]).cos())
            .collect()
    }
}

/// Runs [`minimize_feps`] for each `m` and [`minimize_limit`] once, with the
/// cell problems solved on the `s·max(k_list)` grid.
pub fn gamma_sweep(
    template: &HighContrastProblem,
    m_list: &[usize],
    xi_grid: &[Vec<f64>],
    k_list: &[usize],
) -> Result<GammaSweepReport> {
    if m_list.is_empty() {
        return Err(Error::Empty("m_list"));
    }
    if m_list.windows(2).any(|w| w[0] >= w[1]) || m_list[0] == 0 {
        return Err(Error::InvalidOptions("m_list must be positive and strictly ascending".into()));
    }
    template.validate()?;
    let kmax = k_list.iter().copied().max().ok_or(Error::Empty("k_list"))?;
    let limit = minimize_limit(
        &template.op,
        &template.f1,
        &template.f0.base,
        &template.ms,
        xi_grid,
        k_list,
        template.s * kmax,
        &template.opts,
    )?;
    let predicted = limit.value;
    let rows = m_list
        .par_iter()
        .map(|&m| {
            let prob = template.with_m(m);
            let rep = minimize_feps(&prob, Some(&limit.xi_star))?;
            let eps = prob.epsilon();
            let mean = rep.argmin.mean();
            let gap = (rep.value - predicted).abs();
            Ok(SweepRow {
                m,
                epsilon: eps,
                min_feps: rep.value,
                predicted,
                gap,
                relative_gap: gap / predicted.abs().max(1.0),
                iterations: rep.iterations,
                residual_a: rep.residuals.a,
                converged: rep.converged,
                eps_mean: eps * mean.iter().map(|v| v * v).sum::<f64>().sqrt(),
                pairing: two_scale_pair(&rep.argmin, pairing_test_function(rep.argmin.ncomp()), m),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let richardson = match rows.as_slice() {
        [.., a, b] if b.m == 2 * a.m => Some((4.0 * b.min_feps - a.min_feps) / 3.0),
        _ => None,
    };
    let gaps_non_increasing = (rows.len() > 1)
        .then(|| rows.windows(2).all(|w| w[1].gap <= 1.1 * w[0].gap + 1e-14));
    Ok(GammaSweepReport {
        rows,
        limit,
        predicted,
        richardson,
        gaps_non_increasing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbols::catalog;

    fn problem(f0: IntegrandSpec, f1: IntegrandSpec, m: usize) -> HighContrastProblem {
        HighContrastProblem::new(
            catalog::divergence(2),
            f0.into(),
            f1,
            Microstructure::centered_box(2, 8, 0.25, 1).unwrap(),
            m,
            8,
            SolveOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn energy_of_zero_and_constants() {
        let sq = IntegrandSpec::squared_norm(2);
        let prob = problem(sq.clone(), sq, 2);
        let grid = prob.domain().unwrap().grid();
        assert_eq!(energy_feps(&prob, &PeriodicField::zeros(grid, 2)).unwrap(), 0.0);
        let c = [1.0, -2.0];
        let e = energy_feps(&prob, &PeriodicField::constant(grid, &c)).unwrap();
        let expect = 0.25 * 0.25 * 5.0 + 0.75 * 5.0;
        assert!((e - expect).abs() < 1e-12);

        let shifted = problem(IntegrandSpec::squared_norm(2), IntegrandSpec::shifted_square(vec![1.0, 0.0]), 4);
        let grid = shifted.domain().unwrap().grid();
        let e0 = energy_feps(&shifted, &PeriodicField::zeros(grid, 2)).unwrap();
        assert!((e0 - 0.75).abs() < 1e-12);
    }

    #[test]
    fn soft_term_scales_with_eps_to_the_p() {
        let f0 = IntegrandSpec::PPower {
            p: 3.0,
            weight: 1.0,
            weight_amplitude: 0.0,
        };
        let mut prob = problem(f0, IntegrandSpec::squared_norm(2), 4);
        let grid = prob.domain().unwrap().grid();
        let u = PeriodicField::random(grid, 2, 3);
        let soft = energy_parts(&prob, &u).unwrap().soft;
        // same samples with ε = 1: compare against the direct sum
        let md = prob.domain().unwrap();
        let direct: f64 = (0..grid.len())
            .filter(|&i| md.is_soft(i))
            .map(|i| prob.f0.value(1.0, &u.at(i)))
            .sum::<f64>()
            * grid.cell_volume();
        assert!((soft - 0.25f64.powi(3) * direct).abs() < 1e-12 * direct);
        prob.m = 0;
        assert!(energy_feps(&prob, &u).is_err());
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let sq = IntegrandSpec::squared_norm(2);
        let prob = problem(sq.clone(), sq, 2);
        let wrong = PeriodicField::zeros(crate::fields::Grid::new(2, 8).unwrap(), 2);
        assert!(matches!(energy_feps(&prob, &wrong), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn shifted_benchmark_beats_constant_competitor() {
        let b = vec![1.0, 0.0];
        let prob = problem(IntegrandSpec::squared_norm(2), IntegrandSpec::shifted_square(b.clone()), 2);
        let grid = prob.domain().unwrap().grid();
        let rep = minimize_feps(&prob, Some(&b)).unwrap();
        let competitor = energy_feps(&prob, &PeriodicField::constant(grid, &b)).unwrap();
        assert!(rep.value <= competitor);
        assert!(rep.residuals.a < 1e-8);
    }

    #[test]
    fn zero_integrands_give_zero() {
        let zero = IntegrandSpec::PPower {
            p: 2.0,
            weight: 1.0,
            weight_amplitude: 0.0,
        };
        let prob = problem(zero.clone(), zero, 2);
        let rep = minimize_feps(&prob, None).unwrap();
        assert_eq!(rep.value, 0.0);
    }

    #[test]
    fn limit_and_sweep_inputs_are_checked() {
        let sq = IntegrandSpec::squared_norm(2);
        let prob = problem(sq.clone(), sq.clone(), 2);
        let r = minimize_limit(&prob.op, &sq, &sq, &prob.ms, &[], &[1], 8, &prob.opts);
        assert!(r.is_err());
        assert!(gamma_sweep(&prob, &[], &[vec![0.0, 0.0]], &[1]).is_err());
        assert!(gamma_sweep(&prob, &[4, 2], &[vec![0.0, 0.0]], &[1]).is_err());
    }

    #[test]
    fn single_row_sweep_has_no_trend() {
        let sq = IntegrandSpec::squared_norm(2);
        let prob = problem(sq.clone(), sq, 2);
        let rep = gamma_sweep(&prob, &[2], &[vec![0.0, 0.0], vec![0.5, 0.0]], &[1]).unwrap();
        assert_eq!(rep.rows.len(), 1);
        assert!(rep.gaps_non_increasing.is_none());
        assert!(rep.limit.xi_star.iter().all(|x| x.abs() < 1e-6));
        assert!(rep.predicted.abs() < 1e-10);
    }

    #[test]
    fn golden_section_finds_parabola_vertex() {
        let (t, f, _) = golden(-1.0, 2.0, 1e-9, |t| Ok((t - 0.3) * (t - 0.3))).unwrap();
        assert!((t - 0.3).abs() < 1e-8 && f < 1e-15);
        assert_eq!(spacing(&[vec![0.0, 1.0], vec![0.5, 1.0], vec![1.5, 1.0]], 0), 0.5);
        assert_eq!(spacing(&[vec![0.0, 1.0], vec![0.5, 1.0]], 1), 0.0);
    }
}
