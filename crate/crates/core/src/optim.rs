//! Projected gradient descent over affine subspaces `x₀ + V` with an exact
//! projector onto `V`, plus alternating projections onto intersections.

use std::collections::VecDeque;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::PeriodicField;
use crate::projection::ProjectionPlan;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum StepRule {
    /// Constant trial step, shortened by backtracking when needed.
    Fixed { step: f64 },
    /// Limited-memory secant directions scaled by the two-point
    /// (Barzilai–Borwein) step, with a nonmonotone line search.
    AdaptiveSecant,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveOptions {
    pub max_iters: usize,
    /// Stop when the projected gradient norm falls below
    /// `grad_tol · max(1, initial norm)`.
    pub grad_tol: f64,
    pub step_rule: StepRule,
    /// Extra seeded random starts.
    pub restarts: usize,
    pub seed: u64,
    pub dykstra_iters: usize,
    pub dykstra_tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_iters: 5000,
            grad_tol: 1e-9,
            step_rule: StepRule::AdaptiveSecant,
            restarts: 0,
            seed: 0,
            dykstra_iters: 500,
            dykstra_tol: 1e-10,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidOptions(format!("{name} must be positive, got {v}")))
            }
        };
        pos("grad_tol", self.grad_tol)?;
        pos("dykstra_tol", self.dykstra_tol)?;
        if let StepRule::Fixed { step } = self.step_rule {
            pos("step", step)?;
        }
        if self.max_iters == 0 || self.dykstra_iters == 0 {
            return Err(Error::InvalidOptions("iteration caps must be positive".into()));
        }
        Ok(())
    }
}

/// Feasibility measures of a returned minimizer.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// Spectral A-residual of the free part.
    pub a: f64,
    /// `max |v|` on the region where `v` must vanish.
    pub support: f64,
    /// Distance of the mean from its prescribed value.
    pub mean: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    pub value: f64,
    #[serde(skip)]
    pub argmin: PeriodicField,
    pub iterations: usize,
    pub grad_norm: f64,
    pub residuals: Residuals,
    pub converged: bool,
    /// Observed linear rate of the alternating projections, when used.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dykstra_rate: Option<f64>,
}

/// A linear subspace with an orthogonal projector.
pub trait Subspace: Sync {
    fn project(&self, v: &PeriodicField) -> PeriodicField;

    /// Relative accuracy of [`Subspace::project`]; projected gradients below
    /// this level are indistinguishable from zero.
    fn accuracy(&self) -> f64 {
        1e-14
    }
}

impl Subspace for ProjectionPlan {
    fn project(&self, v: &PeriodicField) -> PeriodicField {
        self.project(v).expect("field shape matches plan")
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct AlternatingStats {
    pub max_iterations: usize,
    pub max_residual: f64,
    pub rate: Option<f64>,
}

/// `{v A-free : v = 0 where mask is false}`. With `E` the extension by zero
/// from the kept cells and `Q = I − Π_A`, the projection of `w` is
/// `E(z − T†Tz)` for `z = Eᵀw` and `T = EᵀQE`; `T†Tz` is obtained by
/// conjugate gradients from zero, which accelerates the plain alternating
/// iteration `(P_S Π_A)^j` between the two subspaces.
pub struct SupportedAfree<'a> {
    plan: &'a ProjectionPlan,
    keep: &'a [bool],
    iters: usize,
    tol: f64,
    stats: Mutex<AlternatingStats>,
}

impl<'a> SupportedAfree<'a> {
    pub fn new(plan: &'a ProjectionPlan, keep: &'a [bool], iters: usize, tol: f64) -> Self {
        Self {
            plan,
            keep,
            iters,
            tol,
            stats: Mutex::new(AlternatingStats::default()),
        }
    }

    pub fn restrict(&self, v: &mut PeriodicField) {
        for c in 0..v.ncomp() {
            for (x, &k) in v.component_mut(c).iter_mut().zip(self.keep) {
                if !k {
                    *x = 0.0;
                }
            }
        }
    }

    pub fn stats(&self) -> AlternatingStats {
        *self.stats.lock().expect("stats lock")
    }

    /// `v ↦ Eᵀ(v − Π_A v)` for `v` supported on the kept cells.
    fn normal(&self, v: &PeriodicField) -> PeriodicField {
        let mut out = v.sub(&self.plan.project(v).expect("field shape matches plan"));
        self.restrict(&mut out);
        out
    }

    /// Relative A-residual `‖x − Π_A x‖ / scale`.
    fn infeasibility(&self, x: &PeriodicField, scale: f64) -> f64 {
        x.sub(&self.plan.project(x).expect("field shape matches plan"))
            .norm_l2()
            / scale
    }

    /// Returns the projection, iterations used, final relative A-residual
    /// and the mean contraction factor per iteration.
    pub fn project_counted(&self, w: &PeriodicField) -> (PeriodicField, usize, f64, Option<f64>) {
        let scale = w.norm_l2();
        let mut z = w.clone();
        self.restrict(&mut z);
        if scale == 0.0 {
            return (z, 0, 0.0, None);
        }
        let initial = self.infeasibility(&z, scale);
        if initial <= self.tol {
            return (z, 0, initial, None);
        }
        let mut y = PeriodicField::zeros(z.grid(), z.ncomp());
        let mut r = self.normal(&z);
        let mut p = r.clone();
        let mut rs = r.dot(&r);
        let mut residual = initial;
        let mut it = 0;
        while it < self.iters {
            it += 1;
            let tp = self.normal(&p);
            let ptp = p.dot(&tp);
            if ptp <= 0.0 {
                break;
            }
            let alpha = rs / ptp;
            y.axpy(alpha, &p);
            r.axpy(-alpha, &tp);
            residual = self.infeasibility(&z.sub(&y), scale);
            if residual <= self.tol {
                break;
            }
            let rs_new = r.dot(&r);
            let beta = rs_new / rs;
            rs = rs_new;
            let mut next = r.clone();
            next.axpy(beta, &p);
            p = next;
        }
        let rate = (residual / initial).powf(1.0 / it.max(1) as f64);
        (z.sub(&y), it, residual, Some(rate))
    }
}

impl Subspace for SupportedAfree<'_> {
    fn accuracy(&self) -> f64 {
        self.tol
    }

    fn project(&self, v: &PeriodicField) -> PeriodicField {
        let (x, it, residual, rate) = self.project_counted(v);
        let mut s = self.stats.lock().expect("stats lock");
        s.max_iterations = s.max_iterations.max(it);
        s.max_residual = s.max_residual.max(residual);
        if rate.is_some() {
            s.rate = rate;
        }
        x
    }
}

/// Objective evaluating `J(x)` and writing `∇J(x)` (in the quadrature inner
/// product) into the second argument.
pub type Objective<'a> = dyn Fn(&PeriodicField, &mut PeriodicField) -> f64 + Sync + 'a;

pub struct Descent {
    pub x: PeriodicField,
    pub value: f64,
    pub iterations: usize,
    pub grad_norm: f64,
    pub converged: bool,
}

fn scale_pointwise(v: &PeriodicField, w: Option<&[f64]>) -> PeriodicField {
    match w {
        None => v.clone(),
        Some(w) => {
            let mut out = v.clone();
            for c in 0..out.ncomp() {
                out.component_mut(c)
                    .iter_mut()
                    .zip(w)
                    .for_each(|(x, w)| *x *= w);
            }
            out
        }
    }
}

const MEMORY: usize = 10;

/// Minimizes `J` over `x₀ + V`. `inv_precond` holds pointwise weights `D⁻¹`;
/// the base direction is `−P D⁻¹ P g`, a descent direction for any positive
/// weights, and the secant rule adds limited-memory quasi-Newton corrections
/// built from iterate and gradient differences inside `V`.
pub fn projected_gradient(
    objective: &Objective,
    space: &dyn Subspace,
    inv_precond: Option<&[f64]>,
    x0: PeriodicField,
    opts: &SolveOptions,
) -> Descent {
    // M = P D⁻¹ P restricted to V
    let metric = |v: &PeriodicField| match inv_precond {
        None => v.clone(),
        Some(_) => space.project(&scale_pointwise(v, inv_precond)),
    };
    // inexact projectors let infeasibility build up along the iterates, so
    // those are pulled back onto x₀ + V after every step
    let inexact = space.accuracy() > 1e-12;
    let anchor = x0.clone();
    let mut x = x0;
    let mut g = PeriodicField::zeros(x.grid(), x.ncomp());
    let mut f = objective(&x, &mut g);
    let mut pg = space.project(&g);
    let mut mg = metric(&pg);
    let mut gnorm = pg.dot(&mg).max(0.0).sqrt();
    let target = opts.grad_tol * gnorm.max(1.0);
    let noise = |pg: &PeriodicField, g: &PeriodicField| pg.norm_l2() <= 10.0 * space.accuracy() * g.norm_l2();
    let mut at_noise = noise(&pg, &g);
    let mut history: VecDeque<f64> = VecDeque::from([f]);
    let mut pairs: VecDeque<(PeriodicField, PeriodicField, f64)> = VecDeque::new();
    let mut gamma = match opts.step_rule {
        StepRule::Fixed { step } => step,
        StepRule::AdaptiveSecant => {
            let n = mg.norm_l2();
            if n > 0.0 {
                (1.0 / n).min(1.0)
            } else {
                1.0
            }
        }
    };
    let mut iters = 0;
    let mut stalled = false;
    let mut g_new = g.clone();
    while iters < opts.max_iters {
        if gnorm <= target || at_noise || !f.is_finite() {
            break;
        }
        iters += 1;
        let mut d = match opts.step_rule {
            StepRule::Fixed { .. } => mg.scaled(-gamma),
            StepRule::AdaptiveSecant => two_loop(&pg, &pairs, gamma, &metric).scaled(-1.0),
        };
        let mut slope = g.dot(&d);
        if slope >= 0.0 && !pairs.is_empty() {
            pairs.clear();
            d = mg.scaled(-gamma);
            slope = g.dot(&d);
        }
        if slope >= 0.0 {
            stalled = below_roundoff(gnorm, gamma, f);
            break;
        }
        let fmax = history.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let slack = 4.0 * f64::EPSILON * f.abs();
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let mut trial = x.clone();
            trial.axpy(t, &d);
            let ft = objective(&trial, &mut g_new);
            if ft.is_finite() && ft <= fmax + 1e-4 * t * slope + slack {
                accepted = Some((trial, ft));
                break;
            }
            t *= 0.5;
        }
        let Some((mut x_new, mut f_new)) = accepted else {
            // no representable decrease left along d
            stalled = below_roundoff(gnorm, gamma, f);
            break;
        };
        // quadratic interpolation of φ(t) = J(x + t d); exact for quadratics
        let curv = f_new - f - t * slope;
        if curv > 0.0 {
            let tq = -slope * t * t / (2.0 * curv);
            if tq.is_finite() && (tq - t).abs() > 1e-3 * t {
                let mut trial = x.clone();
                trial.axpy(tq, &d);
                let mut gq = PeriodicField::zeros(x.grid(), x.ncomp());
                let fq = objective(&trial, &mut gq);
                if fq < f_new {
                    x_new = trial;
                    f_new = fq;
                    g_new = gq;
                    t = tq;
                }
            }
        }
        if inexact {
            x_new = anchor.add(&space.project(&x_new.sub(&anchor)));
            f_new = objective(&x_new, &mut g_new);
        }
        let pg_new = space.project(&g_new);
        let y = pg_new.sub(&pg);
        let s = x_new.sub(&x);
        let sy = s.dot(&y);
        if let StepRule::AdaptiveSecant = opts.step_rule {
            if sy > 1e-14 * s.norm_l2() * y.norm_l2() {
                let my = metric(&y);
                gamma = (sy / y.dot(&my)).clamp(1e-14, 1e14);
                pairs.push_back((s, y, 1.0 / sy));
                if pairs.len() > MEMORY {
                    pairs.pop_front();
                }
            } else {
                pairs.clear();
                gamma = (2.0 * t * gamma).clamp(1e-14, 1e14);
            }
        }
        x = x_new;
        f = f_new;
        std::mem::swap(&mut g, &mut g_new);
        pg = pg_new;
        mg = metric(&pg);
        gnorm = pg.dot(&mg).max(0.0).sqrt();
        at_noise = noise(&pg, &g);
        history.push_back(f);
        if history.len() > MEMORY {
            history.pop_front();
        }
    }
    if iters > 0 && !inexact {
        // rounding drift accumulated over the steps
        x = anchor.add(&space.project(&x.sub(&anchor)));
        f = objective(&x, &mut g);
    }
    Descent {
        x,
        value: f,
        iterations: iters,
        grad_norm: gnorm,
        converged: gnorm <= target || at_noise || stalled,
    }
}

/// Whether the decrease a step of scale `γ` could achieve is lost in the
/// rounding of `f`.
fn below_roundoff(gnorm: f64, gamma: f64, f: f64) -> bool {
    0.5 * gnorm * gnorm * gamma.max(1.0) <= 64.0 * f64::EPSILON * f.abs().max(1.0)
}

/// Limited-memory inverse-Hessian product `H q` with `H₀ = γ M`.
fn two_loop(
    q: &PeriodicField,
    pairs: &VecDeque<(PeriodicField, PeriodicField, f64)>,
    gamma: f64,
    metric: &dyn Fn(&PeriodicField) -> PeriodicField,
) -> PeriodicField {
    let mut q = q.clone();
    let mut a = Vec::with_capacity(pairs.len());
    for (s, y, rho) in pairs.iter().rev() {
        let ai = rho * s.dot(&q);
        q.axpy(-ai, y);
        a.push(ai);
    }
    let mut r = metric(&q).scaled(gamma);
    for ((s, y, rho), ai) in pairs.iter().zip(a.into_iter().rev()) {
        let b = rho * y.dot(&r);
        r.axpy(ai - b, s);
    }
    r
}

/// Runs [`projected_gradient`] from each start and keeps the lowest value
/// (first on ties). Starts run in parallel; the result does not depend on
/// scheduling.
pub fn multi_start(
    objective: &Objective,
    space: &dyn Subspace,
    inv_precond: Option<&[f64]>,
    starts: Vec<PeriodicField>,
    opts: &SolveOptions,
) -> Result<Descent> {
    if starts.is_empty() {
        return Err(Error::Empty("starting points"));
    }
    let runs: Vec<Descent> = starts
        .into_par_iter()
        .map(|x0| projected_gradient(objective, space, inv_precond, x0, opts))
        .collect();
    let mut best: Option<Descent> = None;
    for r in runs {
        if best.as_ref().is_none_or(|b| r.value < b.value) {
            best = Some(r);
        }
    }
    Ok(best.expect("nonempty"))
}

/// Seeded random feasible perturbations of `x0`: `x0 + scale·P(r)` with `r`
/// band-limited Gaussian noise.
pub fn random_starts(
    x0: &PeriodicField,
    space: &dyn Subspace,
    count: usize,
    scale: f64,
    seed: u64,
) -> Vec<PeriodicField> {
    let band = (x0.grid().n() / 4).max(1);
    (0..count)
        .map(|i| {
            let r = PeriodicField::random_band_limited(x0.grid(), x0.ncomp(), band, seed + i as u64);
            let p = space.project(&r);
            let norm = p.norm_l2();
            let mut x = x0.clone();
            if norm > 0.0 {
                x.axpy(scale / norm, &p);
            }
            x
        })
        .collect()
}
