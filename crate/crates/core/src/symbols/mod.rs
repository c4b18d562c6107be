//! Constant-coefficient homogeneous differential operators and the linear
//! algebra of their symbols.
//!
//! An operator of order `k` acting on `R^N`-valued maps on `R^d` is stored as
//! a list of `(multi-index, M×N matrix)` pairs. Its symbol at a frequency `ω`
//! is the matrix polynomial `Σ_{|α|=k} ω^α A^α`. Everything downstream (kernel
//! projections, A-free fields, potentials) is built from these symbols.

pub mod catalog;
mod sampling;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use sampling::sphere_samples;

/// Default relative tolerance for rank decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Exponent vector of a monomial `ω^α`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    /// The monomial `ω^α = Π_j ω_j^{α_j}`.
    pub fn monomial(&self, omega: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(omega)
            .map(|(&e, &w)| w.powi(e as i32))
            .product()
    }

    /// `e_j`.
    pub fn unit(dim: usize, j: usize) -> Self {
        let mut e = vec![0; dim];
        e[j] = 1;
        MultiIndex(e)
    }

    /// `e_i + e_j`.
    pub fn pair(dim: usize, i: usize, j: usize) -> Self {
        let mut e = vec![0; dim];
        e[i] += 1;
        e[j] += 1;
        MultiIndex(e)
    }
}

/// A linear homogeneous differential operator with constant coefficients,
/// `𝒜u = Σ_{|α|=k} A^α ∂^α u`, mapping `R^N`-valued fields to `R^M`-valued
/// fields on `R^d`.
#[derive(Clone, Debug)]
pub struct DifferentialOperator {
    name: Option<String>,
    dim: usize,
    order: usize,
    in_dim: usize,
    out_dim: usize,
    /// Sorted in graded-lexicographic order; no duplicate multi-indices.
    terms: Vec<(MultiIndex, DMatrix<f64>)>,
    declared_rank: Option<usize>,
}

impl DifferentialOperator {
    /// Builds an operator, merging repeated multi-indices.
    ///
    /// Every multi-index must have degree `order` and at least one
    /// coefficient matrix must be nonzero.
    pub fn new(
        dim: usize,
        order: usize,
        in_dim: usize,
        out_dim: usize,
        terms: Vec<(MultiIndex, DMatrix<f64>)>,
        declared_rank: Option<usize>,
    ) -> Result<Self> {
        let op = Self::assemble(dim, order, in_dim, out_dim, terms, declared_rank)?;
        if op.terms.iter().all(|(_, a)| a.iter().all(|&x| x == 0.0)) {
            return Err(Error::InvalidOperator(
                "all coefficient matrices vanish".into(),
            ));
        }
        Ok(op)
    }

    /// The zero operator. Used where the differential constraint is vacuous,
    /// e.g. the curl of a one-dimensional gradient field.
    pub fn trivial(dim: usize, order: usize, in_dim: usize) -> Result<Self> {
        let mut alpha = vec![0; dim];
        alpha[0] = order as u32;
        Self::assemble(
            dim,
            order,
            in_dim,
            1,
            vec![(MultiIndex(alpha), DMatrix::zeros(1, in_dim))],
            Some(0),
        )
    }

    fn assemble(
        dim: usize,
        order: usize,
        in_dim: usize,
        out_dim: usize,
        terms: Vec<(MultiIndex, DMatrix<f64>)>,
        declared_rank: Option<usize>,
    ) -> Result<Self> {
        if dim == 0 || order == 0 || in_dim == 0 || out_dim == 0 {
            return Err(Error::InvalidOperator(
                "dim, order, in_dim and out_dim must be positive".into(),
            ));
        }
        if terms.is_empty() {
            return Err(Error::InvalidOperator("no coefficient terms".into()));
        }
        let mut merged: Vec<(MultiIndex, DMatrix<f64>)> = Vec::with_capacity(terms.len());
        for (alpha, a) in terms {
            if alpha.0.len() != dim {
                return Err(Error::InvalidOperator(format!(
                    "multi-index {:?} has length {} (dim {dim})",
                    alpha.0,
                    alpha.0.len()
                )));
            }
            if alpha.degree() as usize != order {
                return Err(Error::InvalidOperator(format!(
                    "multi-index {:?} has degree {} (order {order})",
                    alpha.0,
                    alpha.degree()
                )));
            }
            if a.nrows() != out_dim || a.ncols() != in_dim {
                return Err(Error::InvalidOperator(format!(
                    "coefficient for {:?} is {}x{} (expected {out_dim}x{in_dim})",
                    alpha.0,
                    a.nrows(),
                    a.ncols()
                )));
            }
            match merged.iter_mut().find(|(b, _)| *b == alpha) {
                Some((_, acc)) => *acc += a,
                None => merged.push((alpha, a)),
            }
        }
        // graded lex: all degrees equal, so lexicographic with x_1 > x_2 > ...
        merged.sort_by(|a, b| b.0.cmp(&a.0));
        Ok(Self {
            name: None,
            dim,
            order,
            in_dim,
            out_dim,
            terms: merged,
            declared_rank,
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn with_declared_rank(mut self, rank: Option<usize>) -> Self {
        self.declared_rank = rank;
        self
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn order(&self) -> usize {
        self.order
    }
    pub fn in_dim(&self) -> usize {
        self.in_dim
    }
    pub fn out_dim(&self) -> usize {
        self.out_dim
    }
    pub fn declared_rank(&self) -> Option<usize> {
        self.declared_rank
    }
    pub fn terms(&self) -> &[(MultiIndex, DMatrix<f64>)] {
        &self.terms
    }

    /// `𝔸[ω]` without the length check; `omega.len()` must equal `dim`.
    pub(crate) fn symbol_matrix(&self, omega: &[f64]) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.out_dim, self.in_dim);
        for (alpha, a) in &self.terms {
            let c = alpha.monomial(omega);
            if c != 0.0 {
                out += a * c;
            }
        }
        out
    }

    /// Transposed formal structure: the operator with coefficients `A^αᵀ`.
    /// The formal adjoint is `(-1)^k` times this operator.
    pub fn transpose(&self) -> Self {
        Self {
            name: self.name.as_ref().map(|n| format!("{n}^T")),
            dim: self.dim,
            order: self.order,
            in_dim: self.out_dim,
            out_dim: self.in_dim,
            terms: self
                .terms
                .iter()
                .map(|(a, m)| (a.clone(), m.transpose()))
                .collect(),
            declared_rank: self.declared_rank,
        }
    }

    fn check_frequency(&self, omega: &[f64]) -> Result<()> {
        if omega.len() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "frequency has {} entries, operator dimension is {}",
                omega.len(),
                self.dim
            )));
        }
        Ok(())
    }
}

/// The symbol of an operator evaluated at one frequency.
#[derive(Clone, Debug)]
pub struct SymbolMatrix {
    pub omega: Vec<f64>,
    pub matrix: DMatrix<f64>,
}

/// `𝔸[ω] = Σ_{|α|=k} ω^α A^α`.
pub fn eval_symbol(op: &DifferentialOperator, omega: &[f64]) -> Result<SymbolMatrix> {
    op.check_frequency(omega)?;
    Ok(SymbolMatrix {
        omega: omega.to_vec(),
        matrix: op.symbol_matrix(omega),
    })
}

fn unit_direction(omega: &[f64]) -> Result<Vec<f64>> {
    let norm = omega.iter().map(|w| w * w).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::ZeroFrequency);
    }
    Ok(omega.iter().map(|w| w / norm).collect())
}

/// Singular triplets of `m` with `σ > tol · σ_max`, by one-sided Jacobi
/// rotations on the columns. Symbol matrices are small, and Jacobi keeps
/// high relative accuracy on rank-deficient input and repeated singular
/// values, where nalgebra's bidiagonal SVD and symmetric eigensolver have
/// been seen to return inconsistent factors.
struct Triplets {
    sigma: Vec<f64>,
    u: DMatrix<f64>,
    v: DMatrix<f64>,
}

const JACOBI_SWEEPS: usize = 60;

fn dominant_triplets(m: &DMatrix<f64>, tol: f64) -> Triplets {
    let n = m.ncols();
    let mut w = m.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _ in 0..JACOBI_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = w.column(p).norm_squared();
                let beta = w.column(q).norm_squared();
                let gamma = w.column(p).dot(&w.column(q));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for mat in [&mut w, &mut v] {
                    for r in 0..mat.nrows() {
                        let (x, y) = (mat[(r, p)], mat[(r, q)]);
                        mat[(r, p)] = c * x - s * y;
                        mat[(r, q)] = s * x + c * y;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..n).map(|j| w.column(j).norm()).collect();
    let smax = norms.iter().copied().fold(0.0, f64::max);
    let keep: Vec<usize> = if smax <= f64::MIN_POSITIVE {
        Vec::new()
    } else {
        (0..n).filter(|&j| norms[j] > tol * smax).collect()
    };
    Triplets {
        sigma: keep.iter().map(|&j| norms[j]).collect(),
        u: DMatrix::from_fn(m.nrows(), keep.len(), |r, k| w[(r, keep[k])] / norms[keep[k]]),
        v: DMatrix::from_fn(n, keep.len(), |r, k| v[(r, keep[k])]),
    }
}

/// Numerical rank: number of singular values above `tol · σ_max`.
pub fn matrix_rank(m: &DMatrix<f64>, tol: f64) -> usize {
    dominant_triplets(m, tol).sigma.len()
}

/// Rank of `𝔸[ω/|ω|]`.
pub fn rank_at(op: &DifferentialOperator, omega: &[f64], tol: f64) -> Result<usize> {
    op.check_frequency(omega)?;
    let unit = unit_direction(omega)?;
    Ok(matrix_rank(&op.symbol_matrix(&unit), tol))
}

/// Moore–Penrose inverse. Singular values at or below `tol · σ_max` are
/// treated as zero.
pub fn pseudoinverse(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let t = dominant_triplets(m, tol);
    let mut out = DMatrix::zeros(m.ncols(), m.nrows());
    for (i, &s) in t.sigma.iter().enumerate() {
        out += t.v.column(i) * t.u.column(i).transpose() / s;
    }
    out
}

/// Orthogonal projection onto `ker m`, i.e. `I - m†m`, assembled from the
/// right singular vectors so that it is symmetric to rounding.
pub fn kernel_projector(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let n = m.ncols();
    let t = dominant_triplets(m, tol);
    if t.sigma.len() == n {
        return DMatrix::zeros(n, n);
    }
    DMatrix::identity(n, n) - &t.v * t.v.transpose()
}

/// `ℙ_A[ω] = I − 𝔸[ω]†𝔸[ω]`, the orthogonal projection onto `ker 𝔸[ω]`.
/// Zero-homogeneous in `ω`.
pub fn kernel_projection(
    op: &DifferentialOperator,
    omega: &[f64],
    tol: f64,
) -> Result<DMatrix<f64>> {
    op.check_frequency(omega)?;
    let unit = unit_direction(omega)?;
    Ok(kernel_projector(&op.symbol_matrix(&unit), tol))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RankStatus {
    ConstantRank {
        r: usize,
    },
    Violation {
        omega1: Vec<f64>,
        omega2: Vec<f64>,
        r1: usize,
        r2: usize,
    },
}

/// Result of a sampled constant-rank check. A `ConstantRank` outcome is
/// evidence over the sampled directions, not a proof.
#[derive(Clone, Debug, Serialize)]
pub struct RankCertificate {
    #[serde(flatten)]
    pub status: RankStatus,
    pub samples_used: usize,
    pub tolerance: f64,
}

impl RankCertificate {
    pub fn rank(&self) -> Option<usize> {
        match self.status {
            RankStatus::ConstantRank { r } => Some(r),
            RankStatus::Violation { .. } => None,
        }
    }
}

/// Unit test directions: the canonical axes, every `(1, ±1, …, ±1)`
/// diagonal, then `num_samples` seeded low-discrepancy points on the sphere.
pub fn test_directions(dim: usize, num_samples: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut dirs = Vec::new();
    for j in 0..dim {
        let mut e = vec![0.0; dim];
        e[j] = 1.0;
        dirs.push(e);
    }
    if dim > 1 && dim <= 12 {
        let scale = 1.0 / (dim as f64).sqrt();
        for mask in 0..(1usize << (dim - 1)) {
            let mut v = vec![scale; dim];
            for (j, vj) in v.iter_mut().enumerate().skip(1) {
                if mask >> (j - 1) & 1 == 1 {
                    *vj = -scale;
                }
            }
            dirs.push(v);
        }
    }
    dirs.extend(sphere_samples(dim, num_samples, seed));
    dirs
}

/// Sampled check of the constant-rank condition.
pub fn verify_constant_rank(
    op: &DifferentialOperator,
    num_samples: usize,
    tol: f64,
    seed: u64,
) -> RankCertificate {
    let dirs = test_directions(op.dim, num_samples, seed);
    let ranks: Vec<usize> = dirs
        .par_iter()
        .map(|w| matrix_rank(&op.symbol_matrix(w), tol))
        .collect();
    let status = match ranks.iter().position(|&r| r != ranks[0]) {
        None => RankStatus::ConstantRank { r: ranks[0] },
        Some(i) => RankStatus::Violation {
            omega1: dirs[0].clone(),
            omega2: dirs[i].clone(),
            r1: ranks[0],
            r2: ranks[i],
        },
    };
    RankCertificate {
        status,
        samples_used: dirs.len(),
        tolerance: tol,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum PairStatus {
    Compatible,
    Incompatible { omega: Vec<f64> },
}

/// Checks `ker 𝔸[ω] = im 𝔹[ω]` on sampled unit frequencies: `𝔸[ω]𝔹[ω]`
/// must vanish (relative to `‖𝔸‖‖𝔹‖`) and `rank 𝔹[ω] = N − rank 𝔸[ω]`.
pub fn check_potential_pair(
    op_a: &DifferentialOperator,
    op_b: &DifferentialOperator,
    num_samples: usize,
    tol: f64,
    seed: u64,
) -> Result<PairStatus> {
    if op_a.dim != op_b.dim || op_b.out_dim != op_a.in_dim {
        return Err(Error::DimensionMismatch(format!(
            "potential B: R^{} -> R^{} (d={}) does not chain into A: R^{} -> R^{} (d={})",
            op_b.in_dim, op_b.out_dim, op_b.dim, op_a.in_dim, op_a.out_dim, op_a.dim
        )));
    }
    let dirs = test_directions(op_a.dim, num_samples, seed);
    let ok: Vec<bool> = dirs
        .par_iter()
        .map(|w| {
            let a = op_a.symbol_matrix(w);
            let b = op_b.symbol_matrix(w);
            let scale = a.norm() * b.norm();
            let prod = (&a * &b).norm();
            let annihilates = prod <= tol * scale.max(f64::MIN_POSITIVE);
            let ranks_match = matrix_rank(&b, tol) + matrix_rank(&a, tol) == op_a.in_dim;
            annihilates && ranks_match
        })
        .collect();
    Ok(match ok.iter().position(|&b| !b) {
        None => PairStatus::Compatible,
        Some(i) => PairStatus::Incompatible {
            omega: dirs[i].clone(),
        },
    })
}

/// On-disk form of an operator.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OperatorDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub dim: usize,
    pub order: usize,
    pub in_dim: usize,
    pub out_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub declared_rank: Option<usize>,
    pub terms: Vec<TermDoc>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TermDoc {
    pub multi_index: Vec<u32>,
    /// Row-major `out_dim × in_dim`.
    pub matrix: Vec<f64>,
}

impl OperatorDoc {
    pub fn from_operator(op: &DifferentialOperator) -> Self {
        Self {
            name: op.name.clone(),
            dim: op.dim,
            order: op.order,
            in_dim: op.in_dim,
            out_dim: op.out_dim,
            declared_rank: op.declared_rank,
            terms: op
                .terms
                .iter()
                .map(|(alpha, a)| TermDoc {
                    multi_index: alpha.0.clone(),
                    matrix: a.transpose().iter().copied().collect(),
                })
                .collect(),
        }
    }

    pub fn into_operator(self) -> Result<DifferentialOperator> {
        let mut terms = Vec::with_capacity(self.terms.len());
        for t in self.terms {
            if t.matrix.len() != self.out_dim * self.in_dim {
                return Err(Error::InvalidOperator(format!(
                    "matrix for {:?} has {} entries (expected {})",
                    t.multi_index,
                    t.matrix.len(),
                    self.out_dim * self.in_dim
                )));
            }
            terms.push((
                MultiIndex(t.multi_index),
                DMatrix::from_row_slice(self.out_dim, self.in_dim, &t.matrix),
            ));
        }
        let op = DifferentialOperator::new(
            self.dim,
            self.order,
            self.in_dim,
            self.out_dim,
            terms,
            self.declared_rank,
        )?;
        Ok(match self.name {
            Some(n) => op.with_name(n),
            None => op,
        })
    }
}

impl DifferentialOperator {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&OperatorDoc::from_operator(self))
            .expect("operator document serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: OperatorDoc =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        doc.into_operator()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbols::catalog;

    fn close(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> bool {
        a.shape() == b.shape() && (a - b).amax() <= tol
    }

    #[test]
    fn curl_symbol_at_first_axis_is_first_coefficient() {
        let s = eval_symbol(&catalog::curl(), &[1.0, 0.0, 0.0]).unwrap();
        let expected =
            DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0]);
        assert!(close(&s.matrix, &expected, 0.0));
    }

    #[test]
    fn symbol_at_zero_is_zero() {
        for name in catalog::standard_names() {
            let op = catalog::lookup(name).unwrap().op;
            let s = eval_symbol(&op, &vec![0.0; op.dim()]).unwrap();
            assert_eq!(s.matrix.amax(), 0.0, "{name}");
        }
    }

    #[test]
    fn div_symbol_is_frequency_row() {
        let s = eval_symbol(&catalog::divergence(3), &[1.0, 2.0, 3.0]).unwrap();
        assert!(close(
            &s.matrix,
            &DMatrix::from_row_slice(1, 3, &[1.0, 2.0, 3.0]),
            0.0
        ));
    }

    #[test]
    fn eval_symbol_rejects_wrong_length() {
        assert!(matches!(
            eval_symbol(&catalog::curl(), &[1.0, 0.0]),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn catalog_ranks_at_single_frequencies() {
        let s = 0.5f64.sqrt();
        assert_eq!(rank_at(&catalog::curl(), &[0.0, 0.0, 1.0], 1e-10).unwrap(), 2);
        assert_eq!(rank_at(&catalog::curl_curl(), &[s, s, 0.0], 1e-10).unwrap(), 2);
        assert_eq!(
            rank_at(&catalog::divergence(3), &[0.0, 1.0, 0.0], 1e-10).unwrap(),
            1
        );
        assert!(matches!(
            rank_at(&catalog::curl(), &[0.0; 3], 1e-10),
            Err(Error::ZeroFrequency)
        ));
    }

    #[test]
    fn rank_is_scale_free() {
        let op = catalog::curl_curl();
        assert_eq!(rank_at(&op, &[1e-9, 2e-9, -3e-9], 1e-10).unwrap(), 2);
        assert_eq!(rank_at(&op, &[1e9, 2e9, -3e9], 1e-10).unwrap(), 2);
    }

    #[test]
    fn degenerate_operator_reports_violation() {
        let op = DifferentialOperator::new(
            2,
            1,
            2,
            1,
            vec![
                (MultiIndex(vec![1, 0]), DMatrix::from_row_slice(1, 2, &[1.0, 0.0])),
                (MultiIndex(vec![0, 1]), DMatrix::from_row_slice(1, 2, &[0.0, 0.0])),
            ],
            None,
        )
        .unwrap();
        let cert = verify_constant_rank(&op, 16, 1e-10, 7);
        assert_eq!(
            cert.status,
            RankStatus::Violation {
                omega1: vec![1.0, 0.0],
                omega2: vec![0.0, 1.0],
                r1: 1,
                r2: 0
            }
        );
    }

    #[test]
    fn pseudoinverse_small_cases() {
        let i3 = DMatrix::<f64>::identity(3, 3);
        assert!(close(&pseudoinverse(&i3, 1e-12), &i3, 1e-14));
        let d = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0]);
        assert!(close(
            &pseudoinverse(&d, 1e-12),
            &DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.0]),
            1e-14
        ));
        let row = DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]);
        assert!(close(
            &pseudoinverse(&row, 1e-12),
            &DMatrix::from_row_slice(3, 1, &[1.0, 0.0, 0.0]),
            1e-14
        ));
        let z = DMatrix::<f64>::zeros(2, 3);
        assert_eq!(pseudoinverse(&z, 1e-12), DMatrix::zeros(3, 2));
    }

    #[test]
    fn div_kernel_projection_on_axis() {
        let p = kernel_projection(&catalog::divergence(3), &[1.0, 0.0, 0.0], 1e-10).unwrap();
        let expected = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.0, 1.0, 1.0]));
        assert!(close(&p, &expected, 1e-14));
    }

    #[test]
    fn curl_kernel_projection_is_rank_one_along_frequency() {
        for w in test_directions(3, 20, 3) {
            let p = kernel_projection(&catalog::curl(), &w, 1e-10).unwrap();
            let v = nalgebra::DVector::from_vec(w.clone());
            assert!(close(&p, &(&v * v.transpose()), 1e-12));
        }
    }

    #[test]
    fn kernel_projection_rejects_zero() {
        assert!(matches!(
            kernel_projection(&catalog::curl(), &[0.0; 3], 1e-10),
            Err(Error::ZeroFrequency)
        ));
    }

    #[test]
    fn catalog_potential_pairs_are_compatible() {
        for name in ["curl", "curlcurl", "curlcurl:sym", "div:2", "div:3", "divantisym:3"] {
            let entry = catalog::lookup(name).unwrap();
            let b = entry.potential.expect("has potential");
            assert_eq!(
                check_potential_pair(&entry.op, &b, 64, 1e-10, 1).unwrap(),
                PairStatus::Compatible,
                "{name}"
            );
        }
    }

    #[test]
    fn mismatched_potential_is_rejected() {
        // grad on R^3 is not a potential for div: ker div[ω] has dimension 2.
        let st = check_potential_pair(
            &catalog::divergence(3),
            &catalog::gradient(3, 1),
            16,
            1e-10,
            1,
        )
        .unwrap();
        assert!(matches!(st, PairStatus::Incompatible { .. }));
        assert!(check_potential_pair(&catalog::curl(), &catalog::gradient(2, 1), 4, 1e-10, 1)
            .is_err());
    }

    #[test]
    fn invalid_operators_are_rejected() {
        let bad_degree = DifferentialOperator::new(
            2,
            1,
            1,
            1,
            vec![(MultiIndex(vec![1, 1]), DMatrix::from_element(1, 1, 1.0))],
            None,
        );
        assert!(bad_degree.is_err());
        let all_zero = DifferentialOperator::new(
            2,
            1,
            1,
            1,
            vec![(MultiIndex(vec![1, 0]), DMatrix::zeros(1, 1))],
            None,
        );
        assert!(all_zero.is_err());
    }

    #[test]
    fn duplicate_terms_merge_and_sort() {
        let op = DifferentialOperator::new(
            2,
            1,
            1,
            1,
            vec![
                (MultiIndex(vec![0, 1]), DMatrix::from_element(1, 1, 1.0)),
                (MultiIndex(vec![1, 0]), DMatrix::from_element(1, 1, 2.0)),
                (MultiIndex(vec![0, 1]), DMatrix::from_element(1, 1, 3.0)),
            ],
            None,
        )
        .unwrap();
        assert_eq!(op.terms().len(), 2);
        assert_eq!(op.terms()[0].0, MultiIndex(vec![1, 0]));
        assert_eq!(op.terms()[1].1[(0, 0)], 4.0);
    }

    #[test]
    fn operator_document_roundtrip() {
        let op = catalog::lookup("curlcurl:sym").unwrap().op;
        let back = DifferentialOperator::from_json(&op.to_json()).unwrap();
        assert_eq!(back.terms(), op.terms());
        assert_eq!(back.declared_rank(), Some(3));
        assert!(DifferentialOperator::from_json("{\"dim\": 2}").is_err());
    }
}
