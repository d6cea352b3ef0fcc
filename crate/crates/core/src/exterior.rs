//! Dense exterior algebra over `ℝⁿ`, `n ≤ 8`, with the flat metric and standard orientation.
//!
//! Basis monomials `e^I` are stored as bitmasks; coefficient vectors follow the
//! lexicographic order of the index tuples `i₁ < … < i_k`.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::pointwise::TwoFormPoint;

pub const MAX_DIM: usize = 8;

struct BasisTable {
    /// `masks[n][k]` lists the degree-`k` monomials in lexicographic order.
    masks: Vec<Vec<Vec<u16>>>,
    /// `position[n][mask]` is the index of `mask` inside `masks[n][popcount]`.
    position: Vec<Vec<usize>>,
}

fn table() -> &'static BasisTable {
    static TABLE: OnceLock<BasisTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut masks = Vec::with_capacity(MAX_DIM + 1);
        let mut position = Vec::with_capacity(MAX_DIM + 1);
        for n in 0..=MAX_DIM {
            let mut by_degree: Vec<Vec<u16>> = vec![Vec::new(); n + 1];
            let mut current = Vec::new();
            for k in 0..=n {
                lex_combinations(n, k, 0, &mut current, &mut by_degree[k]);
            }
            let mut pos = vec![usize::MAX; 1 << n];
            for list in &by_degree {
                for (p, &m) in list.iter().enumerate() {
                    pos[m as usize] = p;
                }
            }
            masks.push(by_degree);
            position.push(pos);
        }
        BasisTable { masks, position }
    })
}

fn lex_combinations(n: usize, k: usize, start: usize, current: &mut Vec<usize>, out: &mut Vec<u16>) {
    if current.len() == k {
        out.push(current.iter().fold(0u16, |m, &i| m | (1 << i)));
        return;
    }
    for i in start..n {
        current.push(i);
        lex_combinations(n, k, i + 1, current, out);
        current.pop();
    }
}

/// Monomials of degree `k` in dimension `n`, lexicographic.
pub fn basis_masks(n: usize, k: usize) -> &'static [u16] {
    &table().masks[n][k]
}

/// Position of a monomial in its degree's coefficient vector.
pub fn mask_position(n: usize, mask: u16) -> usize {
    table().position[n][mask as usize]
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// Zero-based indices of a monomial, ascending.
pub fn mask_indices(mask: u16) -> Vec<usize> {
    (0..16).filter(|&i| mask & (1 << i) != 0).collect()
}

/// Parity of the shuffle taking `e^I ∧ e^J` to `e^{I ∪ J}` (disjoint masks).
pub(crate) fn merge_sign(left: u16, right: u16) -> f64 {
    let mut inversions = 0u32;
    let mut r = right;
    while r != 0 {
        let j = r.trailing_zeros();
        inversions += (left >> (j + 1)).count_ones();
        r &= r - 1;
    }
    if inversions % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// A `k`-form at a point of `ℝⁿ`.
#[derive(Clone, Debug, PartialEq)]
pub struct KForm {
    dim: usize,
    degree: usize,
    coeffs: Vec<f64>,
}

impl KForm {
    pub fn zero(dim: usize, degree: usize) -> Result<Self> {
        check(dim, degree, "zero")?;
        Ok(Self {
            dim,
            degree,
            coeffs: vec![0.0; binomial(dim, degree)],
        })
    }

    pub fn from_coeffs(dim: usize, degree: usize, coeffs: Vec<f64>) -> Result<Self> {
        check(dim, degree, "from_coeffs")?;
        let expect = binomial(dim, degree);
        if coeffs.len() != expect {
            return Err(Error::DimensionMismatch {
                left: expect,
                right: coeffs.len(),
            });
        }
        Ok(Self { dim, degree, coeffs })
    }

    pub fn scalar(dim: usize, value: f64) -> Result<Self> {
        Self::from_coeffs(dim, 0, vec![value])
    }

    /// `e^{1…n}`.
    pub fn volume(dim: usize) -> Result<Self> {
        Self::from_coeffs(dim, dim, vec![1.0])
    }

    /// A single monomial `c · e^{i₁} ∧ … ∧ e^{i_k}` from zero-based indices in any order.
    pub fn monomial(dim: usize, indices: &[usize], c: f64) -> Result<Self> {
        let mut form = Self::zero(dim, indices.len())?;
        form.add_term(indices, c)?;
        Ok(form)
    }

    /// Adds `c · e^{i₁} ∧ … ∧ e^{i_k}`; the indices are sorted with the permutation sign.
    pub fn add_term(&mut self, indices: &[usize], c: f64) -> Result<()> {
        if indices.len() != self.degree {
            return Err(Error::Degree {
                op: "add_term",
                degree: indices.len(),
                dim: self.dim,
            });
        }
        let mut sign = 1.0;
        let mut mask = 0u16;
        for &i in indices {
            if i >= self.dim {
                return Err(Error::InvalidArgument(format!(
                    "index {i} out of range for dimension {}",
                    self.dim
                )));
            }
            if mask & (1 << i) != 0 {
                return Ok(());
            }
            sign *= merge_sign(mask, 1 << i);
            mask |= 1 << i;
        }
        let p = mask_position(self.dim, mask);
        self.coeffs[p] += sign * c;
        Ok(())
    }

    /// 1-form with the given components.
    pub fn one_form(v: &DVector<f64>) -> Result<Self> {
        Self::from_coeffs(v.len(), 1, v.iter().copied().collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    /// Coefficient of `e^I` for ascending zero-based indices.
    pub fn coeff(&self, indices: &[usize]) -> f64 {
        let mask = indices.iter().fold(0u16, |m, &i| m | (1 << i));
        if mask.count_ones() as usize != self.degree || indices.iter().any(|&i| i >= self.dim) {
            return 0.0;
        }
        self.coeffs[mask_position(self.dim, mask)]
    }

    pub fn coeff_mask(&self, mask: u16) -> f64 {
        self.coeffs[mask_position(self.dim, mask)]
    }

    /// Nonzero terms as `(ascending indices, coefficient)`.
    pub fn terms(&self) -> Vec<(Vec<usize>, f64)> {
        basis_masks(self.dim, self.degree)
            .iter()
            .zip(&self.coeffs)
            .filter(|(_, &c)| c != 0.0)
            .map(|(&m, &c)| (mask_indices(m), c))
            .collect()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            dim: self.dim,
            degree: self.degree,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_shape(other)?;
        Ok(Self {
            dim: self.dim,
            degree: self.degree,
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(-1.0))
    }

    fn same_shape(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim,
                right: other.dim,
            });
        }
        if self.degree != other.degree {
            return Err(Error::DimensionMismatch {
                left: self.degree,
                right: other.degree,
            });
        }
        Ok(())
    }

    /// `⟨a, b⟩` with `⟨e^I, e^J⟩ = δ_IJ`.
    pub fn inner(&self, other: &Self) -> Result<f64> {
        self.same_shape(other)?;
        Ok(self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a * b).sum())
    }

    pub fn norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    pub fn to_two_form_point(&self) -> Result<TwoFormPoint> {
        if self.degree != 2 {
            return Err(Error::Degree {
                op: "to_two_form_point",
                degree: self.degree,
                dim: self.dim,
            });
        }
        let n = self.dim;
        let mut b = DMatrix::zeros(n, n);
        for (&m, &c) in basis_masks(n, 2).iter().zip(&self.coeffs) {
            let idx = mask_indices(m);
            b[(idx[0], idx[1])] = c;
            b[(idx[1], idx[0])] = -c;
        }
        TwoFormPoint::new(b)
    }

    pub fn from_two_form_point(beta: &TwoFormPoint) -> Self {
        let n = beta.dim();
        let coeffs = basis_masks(n, 2)
            .iter()
            .map(|&m| {
                let idx = mask_indices(m);
                beta.get(idx[0], idx[1])
            })
            .collect();
        Self {
            dim: n,
            degree: 2,
            coeffs,
        }
    }
}

fn check(dim: usize, degree: usize, op: &'static str) -> Result<()> {
    if dim == 0 || dim > MAX_DIM {
        return Err(Error::Dimension {
            dim,
            min: 1,
            max: MAX_DIM,
        });
    }
    if degree > dim {
        return Err(Error::Degree { op, degree, dim });
    }
    Ok(())
}

/// `a ∧ b`. Degrees summing past `n` are rejected (there is no such form).
pub fn wedge(a: &KForm, b: &KForm) -> Result<KForm> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch {
            left: a.dim,
            right: b.dim,
        });
    }
    let n = a.dim;
    let k = a.degree + b.degree;
    if k > n {
        return Err(Error::Degree { op: "wedge", degree: k, dim: n });
    }
    let mut out = vec![0.0; binomial(n, k)];
    let ma = basis_masks(n, a.degree);
    let mb = basis_masks(n, b.degree);
    for (&i, &ca) in ma.iter().zip(&a.coeffs) {
        if ca == 0.0 {
            continue;
        }
        for (&j, &cb) in mb.iter().zip(&b.coeffs) {
            if cb == 0.0 || i & j != 0 {
                continue;
            }
            out[mask_position(n, i | j)] += merge_sign(i, j) * ca * cb;
        }
    }
    Ok(KForm { dim: n, degree: k, coeffs: out })
}

/// `*e^I = sign(I, Iᶜ) e^{Iᶜ}`.
pub fn hodge_star(a: &KForm) -> KForm {
    let n = a.dim;
    let full: u16 = ((1u32 << n) - 1) as u16;
    let mut out = vec![0.0; binomial(n, n - a.degree)];
    for (&i, &c) in basis_masks(n, a.degree).iter().zip(&a.coeffs) {
        let comp = full & !i;
        out[mask_position(n, comp)] = merge_sign(i, comp) * c;
    }
    KForm {
        dim: n,
        degree: n - a.degree,
        coeffs: out,
    }
}

/// Interior product `i(v)a`.
pub fn interior(v: &DVector<f64>, a: &KForm) -> Result<KForm> {
    if v.len() != a.dim {
        return Err(Error::DimensionMismatch {
            left: a.dim,
            right: v.len(),
        });
    }
    if a.degree == 0 {
        return Err(Error::Degree {
            op: "interior",
            degree: 0,
            dim: a.dim,
        });
    }
    let n = a.dim;
    let mut out = vec![0.0; binomial(n, a.degree - 1)];
    for (&m, &c) in basis_masks(n, a.degree).iter().zip(&a.coeffs) {
        if c == 0.0 {
            continue;
        }
        for (pos, j) in mask_indices(m).into_iter().enumerate() {
            let sign = if pos % 2 == 0 { 1.0 } else { -1.0 };
            out[mask_position(n, m & !(1 << j))] += sign * v[j] * c;
        }
    }
    Ok(KForm {
        dim: n,
        degree: a.degree - 1,
        coeffs: out,
    })
}

/// `β^k / k!` for `k = 0, …, ⌊n/2⌋`.
pub fn exp_terms(beta: &KForm) -> Result<Vec<KForm>> {
    if beta.degree != 2 {
        return Err(Error::Degree {
            op: "exp_terms",
            degree: beta.degree,
            dim: beta.dim,
        });
    }
    let mut terms = vec![KForm::scalar(beta.dim, 1.0)?];
    for k in 1..=beta.dim / 2 {
        let next = wedge(terms.last().expect("nonempty"), beta)?.scale(1.0 / k as f64);
        terms.push(next);
    }
    Ok(terms)
}

/// `v − 1` without cancellation: `(Σ_{k≥1} |β^k/k!|²) / (v + 1)`.
pub fn volume_excess(beta: &KForm) -> Result<f64> {
    let terms = exp_terms(beta)?;
    let tail: f64 = terms.iter().skip(1).map(KForm::norm_sq).sum();
    Ok(tail / ((1.0 + tail).sqrt() + 1.0))
}
