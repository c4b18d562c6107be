//! Energy densities `f(y, ξ)` with analytic gradients in `ξ` and the growth
//! constants `p, a, λ, Λ, μ` of the coercivity/Lipschitz hypotheses.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn one() -> f64 {
    1.0
}

/// A density `f(y, ξ)`, `y ∈ Q` the fast variable, `ξ ∈ ℝ^N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IntegrandSpec {
    /// `(ξ − b)ᵀ Q (ξ − b) + c`; `Q` defaults to the identity.
    Quadratic {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        q: Option<Vec<Vec<f64>>>,
        b: Vec<f64>,
        #[serde(default)]
        c: f64,
    },
    /// `w(y)|ξ|^p` with `w(y) = weight + weight_amplitude·cos(2πy₁)`.
    PPower {
        p: f64,
        #[serde(default = "one")]
        weight: f64,
        #[serde(default)]
        weight_amplitude: f64,
    },
    /// `stiffness·|ξ − w1|²|ξ − w2|²`.
    DoubleWell {
        w1: Vec<f64>,
        w2: Vec<f64>,
        #[serde(default = "one")]
        stiffness: f64,
    },
    /// `−det ξ` for 2×2 matrices stored row-major as 4-vectors. Not coercive.
    NegDet,
    /// `a(y)|ξ − b|²` with `a(y) = mean + amplitude·cos(2πy₁)`.
    OscillatoryQuadratic {
        mean: f64,
        amplitude: f64,
        b: Vec<f64>,
    },
}

/// Growth constants: `λ(−a + |ξ|^p) ≤ f ≤ Λ(1 + |ξ|^p)` and
/// `|f(ξ) − f(η)| ≤ μ(1 + |ξ|^{p−1} + |η|^{p−1})|ξ − η|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Growth {
    pub p: f64,
    pub a: f64,
    pub lambda: f64,
    pub cap_lambda: f64,
    pub mu: f64,
    /// False when no `λ > 0` exists; the lower bound is then not checked.
    pub coercive: bool,
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn dist2(x: &[f64], b: &[f64]) -> f64 {
    x.iter().zip(b).map(|(x, b)| (x - b).powi(2)).sum()
}

fn osc(mean: f64, amplitude: f64, y: &[f64]) -> f64 {
    mean + amplitude * (2.0 * PI * y.first().copied().unwrap_or(0.0)).cos()
}

impl IntegrandSpec {
    /// `|ξ|²`.
    pub fn squared_norm(ncomp: usize) -> Self {
        Self::Quadratic {
            q: None,
            b: vec![0.0; ncomp],
            c: 0.0,
        }
    }

    /// `|ξ − b|²`.
    pub fn shifted_square(b: Vec<f64>) -> Self {
        Self::Quadratic { q: None, b, c: 0.0 }
    }

    /// Number of components, if fixed by the parameters.
    pub fn ncomp(&self) -> Option<usize> {
        match self {
            Self::Quadratic { b, .. } | Self::OscillatoryQuadratic { b, .. } => Some(b.len()),
            Self::DoubleWell { w1, .. } => Some(w1.len()),
            Self::NegDet => Some(4),
            Self::PPower { .. } => None,
        }
    }

    pub fn is_y_independent(&self) -> bool {
        match self {
            Self::PPower {
                weight_amplitude, ..
            } => *weight_amplitude == 0.0,
            Self::OscillatoryQuadratic { amplitude, .. } => *amplitude == 0.0,
            _ => true,
        }
    }

    /// Checks parameters and, when given, the component count.
    pub fn validate(&self, ncomp: Option<usize>) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidIntegrand(m));
        if let (Some(want), Some(have)) = (ncomp, self.ncomp()) {
            if want != have {
                return bad(format!("integrand has {have} components, expected {want}"));
            }
        }
        match self {
            Self::Quadratic { q: Some(q), b, .. } => {
                if q.len() != b.len() || q.iter().any(|r| r.len() != b.len()) {
                    return bad("Q must be N×N with N = len(b)".into());
                }
                let m = self.q_matrix().expect("quadratic");
                if (&m - m.transpose()).amax() > 1e-12 * m.amax().max(1.0) {
                    return bad("Q must be symmetric".into());
                }
                if SymmetricEigen::new(m).eigenvalues.min() < -1e-12 {
                    return bad("Q must be positive semidefinite".into());
                }
            }
            Self::Quadratic { b, .. } if b.is_empty() => return bad("empty b".into()),
            Self::PPower {
                p,
                weight,
                weight_amplitude,
            } => {
                if !(*p >= 1.0) {
                    return bad(format!("p = {p} must be at least 1"));
                }
                if weight - weight_amplitude.abs() <= 0.0 {
                    return bad("weight must stay positive".into());
                }
            }
            Self::DoubleWell { w1, w2, stiffness } => {
                if w1.len() != w2.len() || w1.is_empty() {
                    return bad("wells must have equal, nonzero length".into());
                }
                if *stiffness <= 0.0 {
                    return bad("stiffness must be positive".into());
                }
            }
            Self::OscillatoryQuadratic { mean, amplitude, b } => {
                if mean - amplitude.abs() <= 0.0 {
                    return bad("coefficient mean − |amplitude| must be positive".into());
                }
                if b.is_empty() {
                    return bad("empty b".into());
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn q_matrix(&self) -> Option<DMatrix<f64>> {
        match self {
            Self::Quadratic { q, b, .. } => Some(match q {
                Some(rows) => DMatrix::from_fn(b.len(), b.len(), |i, j| rows[i][j]),
                None => DMatrix::identity(b.len(), b.len()),
            }),
            _ => None,
        }
    }

    pub fn value(&self, y: &[f64], xi: &[f64]) -> f64 {
        match self {
            Self::Quadratic { q, b, c } => {
                let d: Vec<f64> = xi.iter().zip(b).map(|(x, b)| x - b).collect();
                let quad = match q {
                    None => d.iter().map(|v| v * v).sum::<f64>(),
                    Some(rows) => rows
                        .iter()
                        .zip(&d)
                        .map(|(row, di)| di * row.iter().zip(&d).map(|(q, dj)| q * dj).sum::<f64>())
                        .sum(),
                };
                quad + c
            }
            Self::PPower {
                p,
                weight,
                weight_amplitude,
            } => osc(*weight, *weight_amplitude, y) * norm(xi).powf(*p),
            Self::DoubleWell { w1, w2, stiffness } => {
                stiffness * dist2(xi, w1) * dist2(xi, w2)
            }
            Self::NegDet => -(xi[0] * xi[3] - xi[1] * xi[2]),
            Self::OscillatoryQuadratic { mean, amplitude, b } => {
                osc(*mean, *amplitude, y) * dist2(xi, b)
            }
        }
    }

    /// Writes `∇_ξ f(y, ξ)` into `out`.
    pub fn gradient(&self, y: &[f64], xi: &[f64], out: &mut [f64]) {
        match self {
            Self::Quadratic { q, b, .. } => {
                let d: Vec<f64> = xi.iter().zip(b).map(|(x, b)| x - b).collect();
                match q {
                    None => out.iter_mut().zip(&d).for_each(|(o, d)| *o = 2.0 * d),
                    Some(rows) => {
                        for (o, row) in out.iter_mut().zip(rows) {
                            *o = 2.0 * row.iter().zip(&d).map(|(q, d)| q * d).sum::<f64>();
                        }
                    }
                }
            }
            Self::PPower {
                p,
                weight,
                weight_amplitude,
            } => {
                let r = norm(xi);
                let w = osc(*weight, *weight_amplitude, y);
                let s = if r == 0.0 { 0.0 } else { w * p * r.powf(p - 2.0) };
                out.iter_mut().zip(xi).for_each(|(o, x)| *o = s * x);
            }
            Self::DoubleWell { w1, w2, stiffness } => {
                let (d1, d2) = (dist2(xi, w1), dist2(xi, w2));
                for (k, o) in out.iter_mut().enumerate() {
                    *o = 2.0 * stiffness * ((xi[k] - w1[k]) * d2 + (xi[k] - w2[k]) * d1);
                }
            }
            Self::NegDet => {
                out[0] = -xi[3];
                out[1] = xi[2];
                out[2] = xi[1];
                out[3] = -xi[0];
            }
            Self::OscillatoryQuadratic { mean, amplitude, b } => {
                let a = osc(*mean, *amplitude, y);
                for ((o, x), b) in out.iter_mut().zip(xi).zip(b) {
                    *o = 2.0 * a * (x - b);
                }
            }
        }
    }

    /// Growth constants valid for all `y`.
    pub fn growth(&self) -> Growth {
        match self {
            Self::Quadratic { b, c, .. } => {
                let eig = SymmetricEigen::new(self.q_matrix().expect("quadratic")).eigenvalues;
                quadratic_growth(eig.min().max(0.0), eig.max(), norm(b), *c)
            }
            Self::OscillatoryQuadratic { mean, amplitude, b } => {
                quadratic_growth(mean - amplitude.abs(), mean + amplitude.abs(), norm(b), 0.0)
            }
            Self::PPower {
                p,
                weight,
                weight_amplitude,
            } => {
                let (lo, hi) = (weight - weight_amplitude.abs(), weight + weight_amplitude.abs());
                Growth {
                    p: *p,
                    a: 1.0,
                    lambda: lo,
                    cap_lambda: hi,
                    mu: p * hi,
                    coercive: lo > 0.0,
                }
            }
            Self::DoubleWell { w1, w2, stiffness } => {
                let r = norm(w1).max(norm(w2));
                Growth {
                    p: 4.0,
                    a: 16.0 * r.powi(4) + 1.0,
                    lambda: stiffness / 16.0,
                    cap_lambda: 8.0 * stiffness * r.powi(4).max(1.0),
                    mu: 16.0 * stiffness * r.powi(3).max(1.0),
                    coercive: true,
                }
            }
            Self::NegDet => Growth {
                p: 2.0,
                a: 0.0,
                lambda: 0.0,
                cap_lambda: 0.5,
                mu: 1.0,
                coercive: false,
            },
        }
    }

    /// Samples the growth bounds at random `(y, ξ, η)` over several scales.
    pub fn check_growth(&self, ncomp: usize, samples: usize, seed: u64) -> Result<()> {
        self.validate(Some(ncomp))?;
        let g = self.growth();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rel = 1e-10;
        for s in 0..samples {
            let scale = 10f64.powf(-2.0 + 5.0 * (s % 6) as f64 / 5.0);
            let y: Vec<f64> = (0..3).map(|_| rng.gen::<f64>()).collect();
            let xi: Vec<f64> = (0..ncomp).map(|_| scale * rng.gen_range(-1.0..1.0)).collect();
            let eta: Vec<f64> = (0..ncomp).map(|_| scale * rng.gen_range(-1.0..1.0)).collect();
            let f = self.value(&y, &xi);
            let r = norm(&xi).powf(g.p);
            let slack = rel * (1.0 + f.abs() + r);
            if g.coercive && g.lambda * (r - g.a) > f + slack {
                return Err(Error::InvalidIntegrand(format!(
                    "lower growth bound fails at ξ = {xi:?}"
                )));
            }
            if f > g.cap_lambda * (1.0 + r) + slack {
                return Err(Error::InvalidIntegrand(format!(
                    "upper growth bound fails at ξ = {xi:?}"
                )));
            }
            let q = g.p - 1.0;
            let lip = g.mu
                * (1.0 + norm(&xi).powf(q) + norm(&eta).powf(q))
                * norm(&xi.iter().zip(&eta).map(|(a, b)| a - b).collect::<Vec<_>>());
            let df = (f - self.value(&y, &eta)).abs();
            if df > lip + rel * (1.0 + df) {
                return Err(Error::InvalidIntegrand(format!(
                    "Lipschitz bound fails at ξ = {xi:?}, η = {eta:?}"
                )));
            }
        }
        Ok(())
    }
}

fn quadratic_growth(lmin: f64, lmax: f64, nb: f64, c: f64) -> Growth {
    let (a, lambda) = if lmin > 0.0 {
        ((2.0 * nb * nb - 2.0 * c / lmin).max(0.0) + 1.0, lmin / 2.0)
    } else {
        (0.0, 0.0)
    };
    Growth {
        p: 2.0,
        a,
        lambda,
        cap_lambda: (2.0 * lmax).max(2.0 * lmax * nb * nb + c.abs()).max(f64::MIN_POSITIVE),
        mu: 2.0 * lmax * (1.0 + nb),
        coercive: lmin > 0.0,
    }
}

/// The soft family `f_{0,ε} = f₀ + ε·g`; without `g` the family is constant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoftFamily {
    pub base: IntegrandSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<IntegrandSpec>,
}

impl From<IntegrandSpec> for SoftFamily {
    fn from(base: IntegrandSpec) -> Self {
        Self {
            base,
            perturbation: None,
        }
    }
}

impl SoftFamily {
    pub fn validate(&self, ncomp: usize) -> Result<()> {
        if !self.base.is_y_independent() {
            return Err(Error::InvalidIntegrand(
                "soft density must not depend on y".into(),
            ));
        }
        self.base.validate(Some(ncomp))?;
        if let Some(g) = &self.perturbation {
            g.validate(Some(ncomp))?;
        }
        Ok(())
    }

    pub fn value(&self, eps: f64, xi: &[f64]) -> f64 {
        let v = self.base.value(&[], xi);
        match &self.perturbation {
            Some(g) => v + eps * g.value(&[], xi),
            None => v,
        }
    }

    pub fn gradient(&self, eps: f64, xi: &[f64], out: &mut [f64]) {
        self.base.gradient(&[], xi, out);
        if let Some(g) = &self.perturbation {
            let mut extra = vec![0.0; out.len()];
            g.gradient(&[], xi, &mut extra);
            out.iter_mut().zip(&extra).for_each(|(o, e)| *o += eps * e);
        }
    }

    /// Growth exponent of the base density.
    pub fn p(&self) -> f64 {
        self.base.growth().p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn catalog() -> Vec<(IntegrandSpec, usize)> {
        vec![
            (IntegrandSpec::squared_norm(3), 3),
            (
                IntegrandSpec::Quadratic {
                    q: Some(vec![vec![2.0, 0.5], vec![0.5, 1.0]]),
                    b: vec![1.0, -2.0],
                    c: 0.3,
                },
                2,
            ),
            (
                IntegrandSpec::PPower {
                    p: 3.0,
                    weight: 2.0,
                    weight_amplitude: 0.5,
                },
                2,
            ),
            (
                IntegrandSpec::DoubleWell {
                    w1: vec![-1.0],
                    w2: vec![1.0],
                    stiffness: 1.0,
                },
                1,
            ),
            (
                IntegrandSpec::DoubleWell {
                    w1: vec![0.0, 2.0],
                    w2: vec![1.0, -1.0],
                    stiffness: 0.5,
                },
                2,
            ),
            (IntegrandSpec::NegDet, 4),
            (
                IntegrandSpec::OscillatoryQuadratic {
                    mean: 2.0,
                    amplitude: 1.0,
                    b: vec![0.5, 0.0],
                },
                2,
            ),
        ]
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (f, n) in catalog() {
            for _ in 0..20 {
                let y = [rng.gen::<f64>(), rng.gen::<f64>()];
                let xi: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let mut g = vec![0.0; n];
                f.gradient(&y, &xi, &mut g);
                for k in 0..n {
                    let h = 1e-6;
                    let (mut a, mut b) = (xi.clone(), xi.clone());
                    a[k] += h;
                    b[k] -= h;
                    let fd = (f.value(&y, &a) - f.value(&y, &b)) / (2.0 * h);
                    assert!((fd - g[k]).abs() <= 1e-6 * (1.0 + g[k].abs()), "{f:?}");
                }
            }
        }
    }

    #[test]
    fn growth_bounds_hold_on_samples() {
        for (f, n) in catalog() {
            f.check_growth(n, 600, 3).unwrap();
        }
    }

    #[test]
    fn neg_det_is_flagged() {
        assert!(!IntegrandSpec::NegDet.growth().coercive);
        let i = [1.0, 0.0, 0.0, 1.0];
        assert_eq!(IntegrandSpec::NegDet.value(&[], &i), -1.0);
    }

    #[test]
    fn double_well_values() {
        let f = IntegrandSpec::DoubleWell {
            w1: vec![-1.0],
            w2: vec![1.0],
            stiffness: 1.0,
        };
        assert_eq!(f.value(&[], &[0.0]), 1.0);
        assert_eq!(f.value(&[], &[1.0]), 0.0);
        assert_eq!(f.value(&[], &[2.0]), 9.0);
    }

    #[test]
    fn invalid_parameters_rejected() {
        let bad_q = IntegrandSpec::Quadratic {
            q: Some(vec![vec![1.0, 0.0], vec![0.0, -1.0]]),
            b: vec![0.0, 0.0],
            c: 0.0,
        };
        assert!(bad_q.validate(None).is_err());
        assert!(IntegrandSpec::squared_norm(2).validate(Some(3)).is_err());
        let bad_osc = IntegrandSpec::OscillatoryQuadratic {
            mean: 1.0,
            amplitude: 1.0,
            b: vec![0.0],
        };
        assert!(bad_osc.validate(None).is_err());
    }

    #[test]
    fn serde_roundtrip_and_defaults() {
        let f: IntegrandSpec = serde_json::from_str(r#"{"kind":"quadratic","b":[1,0]}"#).unwrap();
        assert_eq!(f, IntegrandSpec::shifted_square(vec![1.0, 0.0]));
        let w: IntegrandSpec = serde_json::from_str(r#"{"kind":"p_power","p":2.5}"#).unwrap();
        assert_eq!(w.value(&[0.3], &[3.0, 4.0]), 5f64.powf(2.5));
        let s = serde_json::to_string(&SoftFamily::from(IntegrandSpec::NegDet)).unwrap();
        assert_eq!(s, r#"{"base":{"kind":"neg_det"}}"#);
    }

    #[test]
    fn soft_family_perturbation() {
        let fam = SoftFamily {
            base: IntegrandSpec::squared_norm(1),
            perturbation: Some(IntegrandSpec::shifted_square(vec![1.0])),
        };
        assert_eq!(fam.value(0.0, &[2.0]), 4.0);
        assert_eq!(fam.value(0.5, &[2.0]), 4.5);
        let mut g = [0.0];
        fam.gradient(0.5, &[2.0], &mut g);
        assert_eq!(g[0], 5.0);
    }
}
