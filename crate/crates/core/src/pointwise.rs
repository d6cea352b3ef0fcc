//! Pointwise algebra of a 2-form at a single point.
//!
//! A 2-form `β` is stored by its skew coefficient matrix `B[i][j] = β(e_i, e_j)`
//! in an orthonormal frame. The endomorphism `β♯` defined by
//! `g(β♯ u, w) = β(u, w)` then acts on column vectors as `Bᵀ = −B`; everything
//! built from `β♯ ∘ β♯` (the correction `G_β = id − β♯∘β♯`, the volume density,
//! traces, `Ξ`, the stress-energy tensor) is insensitive to that sign, but the
//! lattice operators that contract `G_β⁻¹ ∘ β♯` with vectors use [`TwoFormPoint::sharp`].

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub const MIN_DIM: usize = 2;
pub const MAX_DIM: usize = 8;

/// Default absolute tolerance for algebraic identities at `n ≤ 8`, `|B| ≤ 10`.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Skew coefficient matrix of a 2-form at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoFormPoint {
    coeffs: DMatrix<f64>,
}

impl TwoFormPoint {
    /// Wraps a coefficient matrix, rejecting anything that is not exactly skew.
    pub fn new(coeffs: DMatrix<f64>) -> Result<Self> {
        let n = coeffs.nrows();
        if coeffs.ncols() != n {
            return Err(Error::DimensionMismatch {
                left: n,
                right: coeffs.ncols(),
            });
        }
        check_dim(n)?;
        if coeffs.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("2-form coefficients"));
        }
        for i in 0..n {
            for j in i..n {
                if coeffs[(i, j)] != -coeffs[(j, i)] {
                    return Err(Error::NotSkew { row: i, col: j });
                }
            }
        }
        Ok(Self { coeffs })
    }

    pub fn zero(n: usize) -> Result<Self> {
        check_dim(n)?;
        Ok(Self {
            coeffs: DMatrix::zeros(n, n),
        })
    }

    /// Builds `Σ c · e^i ∧ e^j` from zero-based `(i, j, c)` triples.
    pub fn from_terms(n: usize, terms: &[(usize, usize, f64)]) -> Result<Self> {
        let mut b = DMatrix::zeros(n, n);
        check_dim(n)?;
        for &(i, j, c) in terms {
            if i >= n || j >= n {
                return Err(Error::InvalidArgument(format!(
                    "index ({i}, {j}) out of range for dimension {n}"
                )));
            }
            b[(i, j)] += c;
            b[(j, i)] -= c;
        }
        Self::new(b)
    }

    /// Canonical form `Σ λ_j e^{2j−1} ∧ e^{2j}`.
    pub fn from_blocks(n: usize, lambdas: &[f64]) -> Result<Self> {
        if 2 * lambdas.len() > n {
            return Err(Error::InvalidArgument(format!(
                "{} blocks do not fit in dimension {n}",
                lambdas.len()
            )));
        }
        let terms: Vec<_> = lambdas
            .iter()
            .enumerate()
            .map(|(j, &l)| (2 * j, 2 * j + 1, l))
            .collect();
        Self::from_terms(n, &terms)
    }

    /// Skew-symmetrizes an arbitrary square matrix: `(A − Aᵀ)/2`.
    pub fn from_antisymmetric_part(a: &DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        let mut b = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n.min(a.ncols()) {
                let c = 0.5 * (a[(i, j)] - a[(j, i)]);
                b[(i, j)] = c;
                b[(j, i)] = -c;
            }
        }
        Self::new(b)
    }

    pub fn dim(&self) -> usize {
        self.coeffs.nrows()
    }

    pub fn coeffs(&self) -> &DMatrix<f64> {
        &self.coeffs
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.coeffs[(i, j)]
    }

    /// Matrix of `β♯` acting on column vectors.
    pub fn sharp(&self) -> DMatrix<f64> {
        -&self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&x| x == 0.0)
    }

    /// Largest absolute coefficient.
    pub fn max_abs(&self) -> f64 {
        self.coeffs.amax()
    }
}

fn check_dim(n: usize) -> Result<()> {
    if (MIN_DIM..=MAX_DIM).contains(&n) {
        Ok(())
    } else {
        Err(Error::Dimension {
            dim: n,
            min: MIN_DIM,
            max: MAX_DIM,
        })
    }
}

/// `G_β = id − β♯∘β♯ = I − B²`.
pub fn g_correction(beta: &TwoFormPoint) -> DMatrix<f64> {
    let b = beta.coeffs();
    let n = beta.dim();
    let mut g = DMatrix::identity(n, n) - b * b;
    symmetrize(&mut g);
    g
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let s = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = s;
            m[(j, i)] = s;
        }
    }
}

/// Everything the lattice operators need at one site, from a single factorization.
#[derive(Clone, Debug)]
pub struct PointData {
    pub g_inv: DMatrix<f64>,
    pub volume: f64,
}

impl PointData {
    pub fn of(beta: &TwoFormPoint) -> Self {
        let g = g_correction(beta);
        let n = g.nrows();
        match Cholesky::new(g.clone()) {
            Some(chol) => {
                let l = chol.l_dirty();
                // det G = Π L_ii², v = (det G)^{1/4} = Π √L_ii
                let volume = (0..n).map(|i| l[(i, i)].sqrt()).product();
                let mut g_inv = chol.inverse();
                symmetrize(&mut g_inv);
                Self { g_inv, volume }
            }
            None => {
                // only reachable through overflow in I − B²
                let det = g.clone().determinant();
                let g_inv = g.try_inverse().unwrap_or_else(|| DMatrix::from_element(n, n, f64::NAN));
                Self {
                    g_inv,
                    volume: det.sqrt().sqrt(),
                }
            }
        }
    }

    pub fn trace_g_inverse(&self) -> f64 {
        self.g_inv.trace()
    }
}

/// `v(β) = (det G_β)^{1/4}`, via a Cholesky factor of `G_β`.
pub fn volume_density(beta: &TwoFormPoint) -> f64 {
    PointData::of(beta).volume
}

pub fn g_inverse(beta: &TwoFormPoint) -> DMatrix<f64> {
    PointData::of(beta).g_inv
}

pub fn trace_g_inverse(beta: &TwoFormPoint) -> f64 {
    PointData::of(beta).trace_g_inverse()
}

/// `Ξ(β, v) = tr(G⁻¹) − g(G⁻¹ v, v)` for a unit vector `v`.
pub fn xi(beta: &TwoFormPoint, v: &DVector<f64>) -> Result<f64> {
    if v.len() != beta.dim() {
        return Err(Error::DimensionMismatch {
            left: beta.dim(),
            right: v.len(),
        });
    }
    let norm = v.norm();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::NonUnitVector { norm });
    }
    let g_inv = g_inverse(beta);
    Ok(g_inv.trace() - v.dot(&(&g_inv * v)))
}

/// Symmetric stress-energy tensor `S = −g + v·(G⁻¹)♭` at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct StressTensorPoint {
    pub matrix: DMatrix<f64>,
}

impl StressTensorPoint {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

pub fn stress_energy(beta: &TwoFormPoint) -> StressTensorPoint {
    let data = PointData::of(beta);
    let n = beta.dim();
    let matrix = data.g_inv * data.volume - DMatrix::<f64>::identity(n, n);
    StressTensorPoint { matrix }
}

/// Block decomposition `β = Σ λ_j f^{2j−1} ∧ f^{2j}` in an orthonormal frame.
#[derive(Clone, Debug)]
pub struct SkewSpectrum {
    pub dim: usize,
    /// Nonincreasing, nonnegative.
    pub lambdas: Vec<f64>,
    /// `μ_j = 1 + λ_j²`.
    pub mus: Vec<f64>,
    /// Columns are the frame vectors `f_1, …, f_n`.
    pub frame: DMatrix<f64>,
}

impl SkewSpectrum {
    /// Spectrum of the canonical form itself (identity frame).
    pub fn from_lambdas(dim: usize, lambdas: &[f64]) -> Result<Self> {
        check_dim(dim)?;
        let m = dim / 2;
        if lambdas.len() != m {
            return Err(Error::InvalidArgument(format!(
                "expected {m} block rates for dimension {dim}, got {}",
                lambdas.len()
            )));
        }
        let mut lambdas: Vec<f64> = lambdas.iter().map(|l| l.abs()).collect();
        lambdas.sort_by(|a, b| b.total_cmp(a));
        let mus = lambdas.iter().map(|l| 1.0 + l * l).collect();
        Ok(Self {
            dim,
            lambdas,
            mus,
            frame: DMatrix::identity(dim, dim),
        })
    }

    /// Spectrum with prescribed `μ_j ≥ 1` (identity frame).
    pub fn from_mus(dim: usize, mus: &[f64]) -> Result<Self> {
        if mus.iter().any(|&mu| !(mu >= 1.0)) {
            return Err(Error::InvalidArgument("every μ_j must be ≥ 1".into()));
        }
        let lambdas: Vec<f64> = mus.iter().map(|mu| (mu - 1.0).sqrt()).collect();
        let mut s = Self::from_lambdas(dim, &lambdas)?;
        // keep the caller's μ values bit-exact
        let mut mus = mus.to_vec();
        mus.sort_by(|a, b| b.total_cmp(a));
        s.mus = mus;
        Ok(s)
    }

    pub fn block_count(&self) -> usize {
        self.lambdas.len()
    }

    /// `Π √μ_j`.
    pub fn volume(&self) -> f64 {
        self.mus.iter().map(|mu| mu.sqrt()).product()
    }

    /// `(n − 2m) + Σ 2/μ_j`.
    pub fn trace_g_inverse(&self) -> f64 {
        (self.dim - 2 * self.block_count()) as f64 + self.mus.iter().map(|mu| 2.0 / mu).sum::<f64>()
    }

    /// Block-diagonal canonical matrix with blocks `[[0, λ], [−λ, 0]]`.
    pub fn block_matrix(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.dim, self.dim);
        for (j, &l) in self.lambdas.iter().enumerate() {
            d[(2 * j, 2 * j + 1)] = l;
            d[(2 * j + 1, 2 * j)] = -l;
        }
        d
    }

    /// `F · D · Fᵀ`, which should reproduce `B`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.frame * self.block_matrix() * self.frame.transpose()
    }
}

/// Orthonormal block decomposition of `B` from eigenvectors of `BᵀB`.
///
/// Works by deflation: the top eigenvector `u` of `BᵀB` restricted to the
/// complement of the frame built so far is paired with `−Bu/|Bu|`; the span
/// of each accepted pair is `B`-invariant, so the complement stays invariant.
pub fn skew_canonical(beta: &TwoFormPoint) -> Result<SkewSpectrum> {
    let n = beta.dim();
    let m = n / 2;
    let b = beta.coeffs();
    let btb = b.transpose() * b;
    let scale = b.amax().max(1.0);
    let mut cols: Vec<DVector<f64>> = Vec::with_capacity(n);

    for _ in 0..m {
        let p = complement_projector(n, &cols);
        let mut a = &p * &btb * &p;
        symmetrize(&mut a);
        let eig = SymmetricEigen::try_new(a, f64::EPSILON, 10_000)
            .ok_or_else(|| Error::EigenSolver(format!("BᵀB eigendecomposition, n = {n}")))?;
        let top = (0..n)
            .max_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]))
            .expect("n ≥ 2");
        if eig.eigenvalues[top] <= (1e-28 * scale * scale) {
            break;
        }
        let mut u = &p * eig.eigenvectors.column(top);
        let un = u.norm();
        if un < 0.5 {
            return Err(Error::EigenSolver("top eigenvector left the invariant complement".into()));
        }
        u /= un;
        let mut w = -(b * &u);
        orthogonalize(&mut w, &cols);
        w -= u.dot(&w) * &u;
        let wn = w.norm();
        if wn <= 1e-300 {
            break;
        }
        cols.push(u);
        cols.push(w / wn);
    }

    // Remaining directions (zero blocks and the odd leftover): complete the basis.
    complete_basis(n, &mut cols);
    let mut frame = DMatrix::zeros(n, n);
    for (j, c) in cols.iter().enumerate() {
        frame.set_column(j, c);
    }

    let d = frame.transpose() * b * &frame;
    let mut blocks: Vec<(f64, usize)> = (0..m).map(|j| (d[(2 * j, 2 * j + 1)], j)).collect();
    for (l, j) in blocks.iter_mut() {
        if *l < 0.0 {
            frame.swap_columns(2 * *j, 2 * *j + 1);
            *l = -*l;
        }
    }
    blocks.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut sorted = DMatrix::zeros(n, n);
    for (k, &(_, j)) in blocks.iter().enumerate() {
        sorted.set_column(2 * k, &frame.column(2 * j));
        sorted.set_column(2 * k + 1, &frame.column(2 * j + 1));
    }
    if n % 2 == 1 {
        sorted.set_column(n - 1, &frame.column(n - 1));
    }
    let lambdas: Vec<f64> = blocks.iter().map(|b| b.0).collect();
    let mus = lambdas.iter().map(|l| 1.0 + l * l).collect();
    Ok(SkewSpectrum {
        dim: n,
        lambdas,
        mus,
        frame: sorted,
    })
}

fn complement_projector(n: usize, cols: &[DVector<f64>]) -> DMatrix<f64> {
    let mut p = DMatrix::identity(n, n);
    for c in cols {
        p -= c * c.transpose();
    }
    p
}

fn orthogonalize(v: &mut DVector<f64>, cols: &[DVector<f64>]) {
    for _ in 0..2 {
        for c in cols {
            let d = c.dot(v);
            *v -= d * c;
        }
    }
}

fn complete_basis(n: usize, cols: &mut Vec<DVector<f64>>) {
    let mut k = 0;
    while cols.len() < n && k < n {
        let mut v = DVector::zeros(n);
        v[k] = 1.0;
        orthogonalize(&mut v, cols);
        let vn = v.norm();
        if vn > 1e-6 {
            cols.push(v / vn);
        }
        k += 1;
    }
}

/// Result of evaluating `tr(G⁻¹) ≥ 1 + 2m/v` in odd dimension `n = 2m + 1`.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct OddBoundAudit {
    pub m: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Evaluates the odd-dimensional trace bound; reports, never asserts.
///
/// The bound is only valid for `m ≥ 2`: with a single block it reads
/// `1 + 2/μ ≥ 1 + 2/√μ`, which fails for every `μ > 1`.
pub fn odd_bound_audit(spectrum: &SkewSpectrum) -> Result<OddBoundAudit> {
    if spectrum.dim % 2 == 0 {
        return Err(Error::EvenDimension(spectrum.dim));
    }
    let m = spectrum.block_count();
    let lhs = spectrum.trace_g_inverse();
    let rhs = 1.0 + 2.0 * m as f64 / spectrum.volume();
    Ok(OddBoundAudit {
        m,
        lhs,
        rhs,
        holds: lhs >= rhs - 1e-12,
    })
}

/// Which of the two lower bounds on `tr(G⁻¹)·v` hold at a given `β`.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct ProductBoundAudit {
    pub n: usize,
    pub m: usize,
    pub product: f64,
    pub holds_2m: bool,
    pub holds_n: bool,
}

pub fn product_bound_audit(beta: &TwoFormPoint) -> ProductBoundAudit {
    let data = PointData::of(beta);
    let n = beta.dim();
    let product = data.trace_g_inverse() * data.volume;
    ProductBoundAudit {
        n,
        m: n / 2,
        product,
        holds_2m: product >= (2 * (n / 2)) as f64 - 1e-12,
        holds_n: product >= n as f64 - 1e-12,
    }
}

/// `tr(G⁻¹)·v ≥ n`. Holds for all `β` once `n ≥ 4`; fails for large `β` when `n ∈ {2, 3}`.
pub fn even_bound_check(beta: &TwoFormPoint) -> bool {
    product_bound_audit(beta).holds_n
}
