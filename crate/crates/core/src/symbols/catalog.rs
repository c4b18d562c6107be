//! Built-in operators.
//!
//! Names accepted by [`lookup`]:
//!
//! | name                  | operator                                    | rank     |
//! |-----------------------|---------------------------------------------|----------|
//! | `grad[:d[:q]]`        | gradient of `R^q`-valued maps (d=3, q=1)    | `q`      |
//! | `gradk:<k>[:d]`       | `∇^k` of scalars (d=3)                      | 1        |
//! | `curl`                | curl on `R^3`                               | 2        |
//! | `div:<d>`             | divergence on `R^d`                         | 1        |
//! | `curlcurl`            | curl curl on `R^3`-valued maps              | 2        |
//! | `curlcurl:sym`        | curl curlᵀ on symmetric 3×3 matrices        | 3        |
//! | `symgrad[:d]`         | symmetric gradient (d=3)                    | `d`      |
//! | `divantisym:<d>`      | row divergence of antisymmetric matrices    | `d-1`    |
//! | `rowcurl:<d>:<q>`     | curl of each row of `q×d` matrix fields     | `q(d-1)` |
//!
//! Symmetric and antisymmetric matrices are stored in orthonormal
//! coordinates: diagonal entries first, then `√2·S_ij` for `i<j`
//! (antisymmetric: `√2·W_ij`, `i<j`).

use nalgebra::DMatrix;

use super::{DifferentialOperator, MultiIndex};
use crate::error::{Error, Result};

/// An operator together with a potential `𝔹` satisfying
/// `ker 𝔸[ω] = im 𝔹[ω]`, when one is known.
#[derive(Clone, Debug)]
pub struct CatalogEntry {
    pub op: DifferentialOperator,
    pub potential: Option<DifferentialOperator>,
}

/// Representative names covering every constructor, in two and three
/// dimensions where the operator allows it.
pub fn standard_names() -> &'static [&'static str] {
    &[
        "grad:2",
        "grad",
        "gradk:2:2",
        "gradk:2",
        "curl",
        "div:2",
        "div:3",
        "curlcurl",
        "curlcurl:sym",
        "symgrad:2",
        "symgrad",
        "divantisym:2",
        "divantisym:3",
        "rowcurl:2:2",
        "rowcurl:3:1",
        "rowcurl:1:1",
    ]
}

struct Builder {
    dim: usize,
    order: usize,
    in_dim: usize,
    out_dim: usize,
    terms: Vec<(MultiIndex, DMatrix<f64>)>,
}

impl Builder {
    fn new(dim: usize, order: usize, in_dim: usize, out_dim: usize) -> Self {
        Self {
            dim,
            order,
            in_dim,
            out_dim,
            terms: Vec::new(),
        }
    }

    fn add(&mut self, alpha: MultiIndex, row: usize, col: usize, value: f64) {
        if value == 0.0 {
            return;
        }
        let idx = match self.terms.iter().position(|(a, _)| *a == alpha) {
            Some(i) => i,
            None => {
                self.terms
                    .push((alpha, DMatrix::zeros(self.out_dim, self.in_dim)));
                self.terms.len() - 1
            }
        };
        self.terms[idx].1[(row, col)] += value;
    }

    fn finish(self, name: String, rank: usize) -> DifferentialOperator {
        DifferentialOperator::new(
            self.dim,
            self.order,
            self.in_dim,
            self.out_dim,
            self.terms,
            Some(rank),
        )
        .expect("catalog operator is well formed")
        .with_name(name)
    }
}

fn sym_pairs(d: usize) -> Vec<(usize, usize)> {
    let mut p: Vec<(usize, usize)> = (0..d).map(|i| (i, i)).collect();
    for i in 0..d {
        for j in i + 1..d {
            p.push((i, j));
        }
    }
    p
}

fn antisym_pairs(d: usize) -> Vec<(usize, usize)> {
    let mut p = Vec::new();
    for i in 0..d {
        for j in i + 1..d {
            p.push((i, j));
        }
    }
    p
}

/// Orthonormal basis of symmetric `d×d` matrices.
pub fn sym_basis(d: usize) -> Vec<DMatrix<f64>> {
    sym_pairs(d)
        .into_iter()
        .map(|(i, j)| {
            let mut b = DMatrix::zeros(d, d);
            if i == j {
                b[(i, i)] = 1.0;
            } else {
                b[(i, j)] = std::f64::consts::FRAC_1_SQRT_2;
                b[(j, i)] = std::f64::consts::FRAC_1_SQRT_2;
            }
            b
        })
        .collect()
}

/// Orthonormal basis of antisymmetric `d×d` matrices.
pub fn antisym_basis(d: usize) -> Vec<DMatrix<f64>> {
    antisym_pairs(d)
        .into_iter()
        .map(|(i, j)| {
            let mut b = DMatrix::zeros(d, d);
            b[(i, j)] = std::f64::consts::FRAC_1_SQRT_2;
            b[(j, i)] = -std::f64::consts::FRAC_1_SQRT_2;
            b
        })
        .collect()
}

fn levi_civita(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

/// Gradient of `R^q`-valued maps on `R^d`; output index `r·d + j` holds
/// `∂_j u_r`.
pub fn gradient(d: usize, q: usize) -> DifferentialOperator {
    let mut b = Builder::new(d, 1, q, q * d);
    for r in 0..q {
        for j in 0..d {
            b.add(MultiIndex::unit(d, j), r * d + j, r, 1.0);
        }
    }
    b.finish(format!("grad:{d}:{q}"), q)
}

/// `∇^k` of scalar fields, with all `d^k` ordered derivative tuples as
/// output components.
pub fn gradient_k(d: usize, k: usize) -> DifferentialOperator {
    let count = d.pow(k as u32);
    let mut b = Builder::new(d, k, 1, count);
    for t in 0..count {
        let mut alpha = vec![0u32; d];
        let mut rest = t;
        for _ in 0..k {
            alpha[rest % d] += 1;
            rest /= d;
        }
        b.add(MultiIndex(alpha), t, 0, 1.0);
    }
    b.finish(format!("gradk:{k}:{d}"), 1)
}

/// Curl on `R^3`.
pub fn curl() -> DifferentialOperator {
    let mut b = Builder::new(3, 1, 3, 3);
    // (curl u)_i = ε_ijk ∂_j u_k
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                b.add(MultiIndex::unit(3, j), i, k, levi_civita(i, j, k));
            }
        }
    }
    b.finish("curl".into(), 2)
}

pub fn divergence(d: usize) -> DifferentialOperator {
    let mut b = Builder::new(d, 1, d, 1);
    for i in 0..d {
        b.add(MultiIndex::unit(d, i), 0, i, 1.0);
    }
    b.finish(format!("div:{d}"), 1)
}

/// Second-order curl curl on `R^3`-valued fields, with symbol
/// `ωωᵀ − |ω|² I`.
pub fn curl_curl() -> DifferentialOperator {
    let mut b = Builder::new(3, 2, 3, 3);
    for i in 0..3 {
        let alpha = MultiIndex::pair(3, i, i);
        b.add(alpha.clone(), (i + 1) % 3, (i + 1) % 3, -1.0);
        b.add(alpha, (i + 2) % 3, (i + 2) % 3, -1.0);
        for j in 0..3 {
            if j != i {
                b.add(MultiIndex::pair(3, i, j), i, j, 1.0);
            }
        }
    }
    b.finish("curlcurl".into(), 2)
}

/// Saint-Venant compatibility operator `(inc e)_ij = ε_ikl ε_jmn ∂_k ∂_m e_ln`
/// on symmetric 3×3 fields. Its kernel is exactly the symmetric gradients.
pub fn incompatibility() -> DifferentialOperator {
    let basis = sym_basis(3);
    let mut b = Builder::new(3, 2, 6, 6);
    for (col, e) in basis.iter().enumerate() {
        for k in 0..3 {
            for m in 0..3 {
                let mut out = DMatrix::<f64>::zeros(3, 3);
                for i in 0..3 {
                    for j in 0..3 {
                        let mut s = 0.0;
                        for l in 0..3 {
                            for n in 0..3 {
                                s += levi_civita(i, k, l) * levi_civita(j, m, n) * e[(l, n)];
                            }
                        }
                        out[(i, j)] = s;
                    }
                }
                for (row, ba) in basis.iter().enumerate() {
                    b.add(MultiIndex::pair(3, k, m), row, col, out.dot(ba));
                }
            }
        }
    }
    b.finish("curlcurl:sym".into(), 3)
}

/// `w ↦ (∇w + ∇wᵀ)/2` in orthonormal symmetric coordinates.
pub fn symmetric_gradient(d: usize) -> DifferentialOperator {
    let basis = sym_basis(d);
    let mut b = Builder::new(d, 1, d, basis.len());
    for i in 0..d {
        for j in 0..d {
            // ∂_j w_i contributes to entries (i,j) and (j,i) with weight 1/2.
            let mut g = DMatrix::<f64>::zeros(d, d);
            g[(i, j)] += 0.5;
            g[(j, i)] += 0.5;
            for (row, ba) in basis.iter().enumerate() {
                b.add(MultiIndex::unit(d, j), row, i, g.dot(ba));
            }
        }
    }
    b.finish(format!("symgrad:{d}"), d)
}

/// `(Div w)_j = Σ_i ∂_i w_ij` on antisymmetric `d×d` fields (`d ≥ 2`).
pub fn div_antisym(d: usize) -> DifferentialOperator {
    let basis = antisym_basis(d);
    let mut b = Builder::new(d, 1, basis.len(), d);
    for (col, w) in basis.iter().enumerate() {
        for i in 0..d {
            for j in 0..d {
                b.add(MultiIndex::unit(d, i), j, col, w[(i, j)]);
            }
        }
    }
    b.finish(format!("divantisym:{d}"), d - 1)
}

/// `φ ↦ (ε_ijk ∂_k φ)_ij`, the antisymmetric potential of `Div` in 3-D.
pub fn antisym_gradient3() -> DifferentialOperator {
    let basis = antisym_basis(3);
    let mut b = Builder::new(3, 1, 1, 3);
    for (row, w) in basis.iter().enumerate() {
        for k in 0..3 {
            let mut s = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    s += levi_civita(i, j, k) * w[(i, j)];
                }
            }
            b.add(MultiIndex::unit(3, k), row, 0, s);
        }
    }
    b.finish("antisymgrad".into(), 1)
}

/// Curl of each row of a `q×d` matrix field stored row-major. Its A-free
/// fields are gradients of `R^q`-valued maps. For `d = 1` the constraint is
/// vacuous and the zero operator is returned.
pub fn row_curl(d: usize, q: usize) -> DifferentialOperator {
    let name = format!("rowcurl:{d}:{q}");
    if d == 1 {
        return DifferentialOperator::trivial(1, 1, q)
            .expect("trivial operator")
            .with_name(name);
    }
    let pairs = antisym_pairs(d);
    let mut b = Builder::new(d, 1, q * d, q * pairs.len());
    for r in 0..q {
        for (p, &(a, c)) in pairs.iter().enumerate() {
            let row = r * pairs.len() + p;
            b.add(MultiIndex::unit(d, a), row, r * d + c, 1.0);
            b.add(MultiIndex::unit(d, c), row, r * d + a, -1.0);
        }
    }
    b.finish(name, q * (d - 1))
}

fn parse_usize(s: &str, name: &str) -> Result<usize> {
    s.parse::<usize>()
        .ok()
        .filter(|&v| v > 0)
        .ok_or_else(|| Error::UnknownOperator(name.to_string()))
}

/// Resolves a catalog name (see module docs).
pub fn lookup(name: &str) -> Result<CatalogEntry> {
    let parts: Vec<&str> = name.trim().split(':').collect();
    let arg = |i: usize, default: usize| -> Result<usize> {
        parts
            .get(i)
            .map(|s| parse_usize(s, name))
            .unwrap_or(Ok(default))
    };
    let unknown = || Error::UnknownOperator(name.to_string());
    let entry = match parts[0] {
        "grad" if parts.len() <= 3 => CatalogEntry {
            op: gradient(arg(1, 3)?, arg(2, 1)?),
            potential: None,
        },
        "gradk" if (2..=3).contains(&parts.len()) => CatalogEntry {
            op: gradient_k(arg(2, 3)?, arg(1, 1)?),
            potential: None,
        },
        "curl" if parts.len() == 1 => CatalogEntry {
            op: curl(),
            potential: Some(gradient(3, 1)),
        },
        "div" if parts.len() == 2 => {
            let d = arg(1, 3)?;
            CatalogEntry {
                op: divergence(d),
                potential: (d >= 2).then(|| div_antisym(d)),
            }
        }
        "curlcurl" if parts.len() == 1 => CatalogEntry {
            op: curl_curl(),
            potential: Some(gradient(3, 1)),
        },
        "curlcurl" if parts.len() == 2 && parts[1] == "sym" => CatalogEntry {
            op: incompatibility(),
            potential: Some(symmetric_gradient(3)),
        },
        "symgrad" if parts.len() <= 2 => CatalogEntry {
            op: symmetric_gradient(arg(1, 3)?),
            potential: None,
        },
        "divantisym" if parts.len() == 2 => {
            let d = arg(1, 3)?;
            if d < 2 {
                return Err(unknown());
            }
            CatalogEntry {
                op: div_antisym(d),
                potential: (d == 3).then(antisym_gradient3),
            }
        }
        "rowcurl" if parts.len() == 3 => {
            let (d, q) = (arg(1, 2)?, arg(2, 1)?);
            CatalogEntry {
                op: row_curl(d, q),
                potential: Some(gradient(d, q)),
            }
        }
        _ => return Err(unknown()),
    };
    Ok(entry)
}
