//! Reference computations that share no code with the library's spectral
//! projection or descent solvers: explicit DFT constraint matrices, dense
//! null spaces and least squares.

#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

/// Rows of a real first-order symbol in two dimensions, up to the common
/// factor `2πi`.
pub type Symbol2 = fn(f64, f64) -> Vec<Vec<f64>>;

/// `v ↦ ∂₁v₁ + ∂₂v₂`.
pub fn div2(a: f64, b: f64) -> Vec<Vec<f64>> {
    vec![vec![a, b]]
}

/// `v ↦ ∂₁v₂ − ∂₂v₁`.
pub fn curl2(a: f64, b: f64) -> Vec<Vec<f64>> {
    vec![vec![-b, a]]
}

fn signed(c: usize, n: usize) -> i64 {
    if c < n / 2 {
        c as i64
    } else {
        c as i64 - n as i64
    }
}

/// Orthonormal basis (columns, length `ncomp·n²`, component-major, row-major
/// grid) of real fields supported on `cells` whose DFT satisfies
/// `A[ξ] û(ξ) = 0` at every nonzero frequency. A `-n/2` component has no
/// partner, so the constraint is imposed for both signs there. With
/// `zero_mean` the mean is constrained as well.
pub fn afree_basis(n: usize, ncomp: usize, symbol: Symbol2, cells: &[usize], zero_mean: bool) -> DMatrix<f64> {
    let nn = n * n;
    let unknowns = ncomp * cells.len();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for k1 in 0..n {
        for k2 in 0..n {
            let (a, b) = (signed(k1, n), signed(k2, n));
            if a == 0 && b == 0 {
                continue;
            }
            let half = -(n as i64) / 2;
            let mut freqs = vec![(a as f64, b as f64)];
            if a == half || b == half {
                let flip = |x: i64| if x == half { -x } else { x };
                freqs.push((flip(a) as f64, flip(b) as f64));
            }
            for (fa, fb) in freqs {
                for r in symbol(fa, fb) {
                    let mut re = vec![0.0; unknowns];
                    let mut im = vec![0.0; unknowns];
                    for c in 0..ncomp {
                        for (p, &cell) in cells.iter().enumerate() {
                            let (i, j) = (cell / n, cell % n);
                            let th = 2.0 * PI * (a as f64 * i as f64 + b as f64 * j as f64) / n as f64;
                            re[c * cells.len() + p] = r[c] * th.cos();
                            im[c * cells.len() + p] = -r[c] * th.sin();
                        }
                    }
                    rows.push(re);
                    rows.push(im);
                }
            }
        }
    }
    if zero_mean {
        for c in 0..ncomp {
            let mut row = vec![0.0; unknowns];
            row[c * cells.len()..(c + 1) * cells.len()].fill(1.0);
            rows.push(row);
        }
    }
    while rows.len() < unknowns {
        rows.push(vec![0.0; unknowns]);
    }
    let cmat = DMatrix::from_fn(rows.len(), unknowns, |i, j| rows[i][j]);
    let svd = cmat.clone().svd(false, true);
    let vt = svd.v_t.expect("right singular vectors");
    let smax = svd.singular_values.max().max(1.0);
    let null: Vec<usize> = (0..unknowns)
        .filter(|&i| svd.singular_values[i] <= 1e-10 * smax)
        .collect();
    for &i in &null {
        let resid = (&cmat * vt.row(i).transpose()).amax();
        assert!(resid <= 1e-8 * smax, "null vector violates constraints by {resid}");
    }
    let mut basis = DMatrix::zeros(ncomp * nn, null.len());
    for (col, &i) in null.iter().enumerate() {
        for c in 0..ncomp {
            for (p, &cell) in cells.iter().enumerate() {
                basis[(c * nn + cell, col)] = vt[(i, c * cells.len() + p)];
            }
        }
    }
    basis
}

/// Cells of the `k`-fold replicated centred box `|{k x} − ½|_∞ < hw` on the
/// `n×n` grid, by cell centre.
pub fn box_mask(n: usize, k: usize, hw: f64) -> Vec<bool> {
    (0..n * n)
        .map(|cell| {
            [cell / n, cell % n].iter().all(|&i| {
                let y = ((i as f64 + 0.5) / n as f64 * k as f64).fract();
                (y - 0.5).abs() < hw
            })
        })
        .collect()
}

/// `min ∫ (1−χ_soft) |ξ + v|²` over zero-mean discretely A-free `v`, by dense
/// least squares.
pub fn quadratic_fhom(n: usize, symbol: Symbol2, soft: &[bool], xi: &[f64]) -> f64 {
    let ncomp = xi.len();
    let nn = n * n;
    let all: Vec<usize> = (0..nn).collect();
    let basis = afree_basis(n, ncomp, symbol, &all, true);
    let h = (1.0 / nn as f64).sqrt();
    let stiff: Vec<usize> = (0..ncomp * nn).filter(|&r| !soft[r % nn]).collect();
    let a = DMatrix::from_fn(stiff.len(), basis.ncols(), |i, j| h * basis[(stiff[i], j)]);
    let rhs = DVector::from_fn(stiff.len(), |i, _| -h * xi[stiff[i] / nn]);
    let svd = a.clone().svd(true, true);
    let tol = 1e-10 * svd.singular_values.max();
    let c = svd.solve(&rhs, tol).expect("svd solve");
    let r = &a * c - &rhs;
    let normal = (a.transpose() * &r).amax();
    assert!(normal <= 1e-8 * (1.0 + rhs.norm()), "normal equations off by {normal}");
    r.norm_squared()
}

/// `min ∫_{soft} |v − b|²` over discretely A-free `v` vanishing off the soft
/// cells, means allowed.
pub fn quadratic_alpha0(n: usize, symbol: Symbol2, soft: &[bool], b: &[f64]) -> f64 {
    let ncomp = b.len();
    let nn = n * n;
    let cells: Vec<usize> = (0..nn).filter(|&c| soft[c]).collect();
    let basis = afree_basis(n, ncomp, symbol, &cells, false);
    let target = DVector::from_fn(ncomp * nn, |r, _| if soft[r % nn] { b[r / nn] } else { 0.0 });
    let coeff = basis.transpose() * &target;
    (target.norm_squared() - coeff.norm_squared()) / nn as f64
}

/// Lower convex envelope of `f` sampled at `samples` points on `[lo, hi]`,
/// evaluated at `x` by linear interpolation along the hull.
pub fn convex_envelope_1d(f: impl Fn(f64) -> f64, lo: f64, hi: f64, samples: usize, x: f64) -> f64 {
    let pts: Vec<(f64, f64)> = (0..samples)
        .map(|i| {
            let t = lo + (hi - lo) * i as f64 / (samples - 1) as f64;
            (t, f(t))
        })
        .collect();
    let mut hull: Vec<(f64, f64)> = Vec::new();
    for p in pts {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    let w = hull.windows(2).find(|w| w[0].0 <= x && x <= w[1].0).expect("x inside range");
    let t = (x - w[0].0) / (w[1].0 - w[0].0);
    w[0].1 + t * (w[1].1 - w[0].1)
}
