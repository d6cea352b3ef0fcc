//! Graphs `x ↦ (x, f(x))` over a box with torus fiber and their transformed connections.
//!
//! Coordinates on `X = B × T^q` are `x¹…x^p` (indices `0..p`) followed by `y¹…y^q` (indices `p..p+q`).

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exterior::{interior, wedge, KForm};
use crate::pointwise::{PointData, MAX_DIM};

pub const ANALYTIC_TOL: f64 = 1e-9;
pub const EQUIVALENCE_CONSTANT: f64 = 5.0;
/// Nodes kept clear of the box boundary in grid mode.
pub const GRID_MARGIN: usize = 4;
const FD_STEP: f64 = 1e-3;

/// Value and first two derivatives of `f` at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    /// `f^a`, length `q`.
    pub value: DVector<f64>,
    /// `f^a_i`, `q × p`.
    pub first: DMatrix<f64>,
    /// `f^a_{ij}`, one symmetric `p × p` matrix per `a`.
    pub second: Vec<DMatrix<f64>>,
}

pub type JetFn = Arc<dyn Fn(&[f64]) -> Jet + Send + Sync>;

#[derive(Clone)]
enum GraphSource {
    Analytic(JetFn),
    /// Node values over the closed box, first axis slowest, `q` values per node.
    Sampled { sizes: Vec<usize>, values: Vec<f64> },
}

#[derive(Clone)]
pub struct GraphMap {
    name: String,
    p: usize,
    q: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    source: GraphSource,
}

impl std::fmt::Debug for GraphMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GraphMap")
            .field("name", &self.name)
            .field("p", &self.p)
            .field("q", &self.q)
            .field("lower", &self.lower)
            .field("upper", &self.upper)
            .finish_non_exhaustive()
    }
}

fn check_box(p: usize, q: usize, lower: &[f64], upper: &[f64]) -> Result<()> {
    if p == 0 || q == 0 || p + q > MAX_DIM {
        return Err(Error::Dimension {
            dim: p + q,
            min: 2,
            max: MAX_DIM,
        });
    }
    if lower.len() != p || upper.len() != p {
        return Err(Error::DimensionMismatch {
            left: p,
            right: lower.len().min(upper.len()),
        });
    }
    if lower.iter().zip(upper).any(|(l, u)| !(l < u && l.is_finite() && u.is_finite())) {
        return Err(Error::InvalidArgument("box needs finite lower < upper on every axis".into()));
    }
    Ok(())
}

impl GraphMap {
    pub fn analytic<F>(name: &str, p: usize, q: usize, lower: Vec<f64>, upper: Vec<f64>, jet: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> Jet + Send + Sync + 'static,
    {
        check_box(p, q, &lower, &upper)?;
        Ok(Self {
            name: name.into(),
            p,
            q,
            lower,
            upper,
            source: GraphSource::Analytic(Arc::new(jet)),
        })
    }

    /// `f^a(x) = c_a + b_a·x + ½ xᵀA_a x`.
    pub fn polynomial(
        name: &str,
        constant: DVector<f64>,
        linear: DMatrix<f64>,
        quadratic: Vec<DMatrix<f64>>,
        half_width: f64,
    ) -> Result<Self> {
        let q = constant.len();
        let p = linear.ncols();
        if linear.nrows() != q || quadratic.len() != q {
            return Err(Error::DimensionMismatch {
                left: q,
                right: linear.nrows(),
            });
        }
        for a in &quadratic {
            if a.nrows() != p || a.ncols() != p {
                return Err(Error::DimensionMismatch { left: p, right: a.nrows() });
            }
            if (a - a.transpose()).amax() > 0.0 {
                return Err(Error::InvalidArgument("quadratic coefficients must be symmetric".into()));
            }
        }
        Self::analytic(name, p, q, vec![-half_width; p], vec![half_width; p], move |x| {
            let xv = DVector::from_column_slice(x);
            let value = DVector::from_fn(q, |a, _| {
                constant[a] + linear.row(a).dot(&xv.transpose()) + 0.5 * xv.dot(&(&quadratic[a] * &xv))
            });
            let first = DMatrix::from_fn(q, p, |a, i| linear[(a, i)] + quadratic[a].row(i).dot(&xv.transpose()));
            Jet {
                value,
                first,
                second: quadratic.clone(),
            }
        })
    }

    pub fn linear(coeffs: DMatrix<f64>) -> Result<Self> {
        let (q, p) = coeffs.shape();
        Self::polynomial("linear", DVector::zeros(q), coeffs, vec![DMatrix::zeros(p, p); q], 1.0)
    }

    /// `f = x²/2` with `p = q = 1`.
    pub fn quadratic() -> Result<Self> {
        Self::polynomial(
            "quadratic",
            DVector::zeros(1),
            DMatrix::zeros(1, 1),
            vec![DMatrix::from_element(1, 1, 1.0)],
            2.0,
        )
    }

    /// Scherk's surface `f = log(cos x¹ / cos x²)` on `|x^i| < 0.45π`.
    pub fn scherk() -> Result<Self> {
        let h = 0.45 * std::f64::consts::PI;
        Self::analytic("scherk", 2, 1, vec![-h; 2], vec![h; 2], |x| {
            let (t1, t2) = (x[0].tan(), x[1].tan());
            Jet {
                value: DVector::from_element(1, (x[0].cos() / x[1].cos()).ln()),
                first: DMatrix::from_row_slice(1, 2, &[-t1, t2]),
                second: vec![DMatrix::from_row_slice(2, 2, &[-(1.0 + t1 * t1), 0.0, 0.0, 1.0 + t2 * t2])],
            }
        })
    }

    /// Per fiber direction `[c, b_1…b_p, A_11, A_12, …, A_1p, A_22, …, A_pp]`.
    pub fn custom(p: usize, q: usize, coeffs: &[f64], half_width: f64) -> Result<Self> {
        let per = 1 + p + p * (p + 1) / 2;
        if coeffs.len() != q * per {
            return Err(Error::InvalidArgument(format!(
                "custom graph with p={p}, q={q} needs {} coefficients, got {}",
                q * per,
                coeffs.len()
            )));
        }
        let mut constant = DVector::zeros(q);
        let mut linear = DMatrix::zeros(q, p);
        let mut quadratic = vec![DMatrix::zeros(p, p); q];
        for a in 0..q {
            let c = &coeffs[a * per..(a + 1) * per];
            constant[a] = c[0];
            for i in 0..p {
                linear[(a, i)] = c[1 + i];
            }
            let mut k = 1 + p;
            for i in 0..p {
                for j in i..p {
                    quadratic[a][(i, j)] = c[k];
                    quadratic[a][(j, i)] = c[k];
                    k += 1;
                }
            }
        }
        Self::polynomial("custom", constant, linear, quadratic, half_width)
    }

    /// Node values on a regular grid over the closed box; jets by fourth-order differences.
    pub fn sampled(
        name: &str,
        q: usize,
        lower: Vec<f64>,
        upper: Vec<f64>,
        sizes: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let p = sizes.len();
        check_box(p, q, &lower, &upper)?;
        if sizes.iter().any(|&n| n < 2 * GRID_MARGIN + 1) {
            return Err(Error::Grid(format!(
                "every axis needs at least {} nodes",
                2 * GRID_MARGIN + 1
            )));
        }
        let expected = sizes.iter().product::<usize>() * q;
        if values.len() != expected || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Grid(format!("expected {expected} finite values, got {}", values.len())));
        }
        Ok(Self {
            name: name.into(),
            p,
            q,
            lower,
            upper,
            source: GraphSource::Sampled { sizes, values },
        })
    }

    /// Samples an analytic graph on the node grid of the given sizes.
    pub fn sample_on_grid(&self, sizes: Vec<usize>) -> Result<Self> {
        let p = self.p;
        if sizes.len() != p {
            return Err(Error::DimensionMismatch {
                left: p,
                right: sizes.len(),
            });
        }
        let count: usize = sizes.iter().product();
        let mut values = Vec::with_capacity(count * self.q);
        let mut idx = vec![0usize; p];
        for site in 0..count {
            let mut rest = site;
            for d in (0..p).rev() {
                idx[d] = rest % sizes[d];
                rest /= sizes[d];
            }
            let x: Vec<f64> = (0..p)
                .map(|d| self.lower[d] + idx[d] as f64 * (self.upper[d] - self.lower[d]) / (sizes[d] - 1) as f64)
                .collect();
            values.extend(self.jet_unchecked(&x)?.value.iter());
        }
        Self::sampled(&format!("{}-sampled", self.name), self.q, self.lower.clone(), self.upper.clone(), sizes, values)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn base_dim(&self) -> usize {
        self.p
    }

    pub fn fiber_dim(&self) -> usize {
        self.q
    }

    pub fn total_dim(&self) -> usize {
        self.p + self.q
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn is_sampled(&self) -> bool {
        matches!(self.source, GraphSource::Sampled { .. })
    }

    fn check_inside(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.p {
            return Err(Error::DimensionMismatch {
                left: self.p,
                right: x.len(),
            });
        }
        if x.iter().zip(&self.lower).zip(&self.upper).any(|((v, l), u)| !(v > l && v < u)) {
            return Err(Error::OutOfDomain(format!("{x:?} outside the open box")));
        }
        Ok(())
    }

    fn analytic_jet(&self, x: &[f64]) -> Result<Jet> {
        self.check_inside(x)?;
        self.jet_unchecked(x)
    }

    fn jet_unchecked(&self, x: &[f64]) -> Result<Jet> {
        match &self.source {
            GraphSource::Analytic(f) => {
                let j = f(x);
                if j.value.len() != self.q || j.first.shape() != (self.q, self.p) || j.second.len() != self.q {
                    return Err(Error::DimensionMismatch {
                        left: self.q,
                        right: j.value.len(),
                    });
                }
                Ok(j)
            }
            GraphSource::Sampled { .. } => Err(Error::InvalidArgument("graph has no analytic jet".into())),
        }
    }

    pub fn spacing(&self) -> Option<Vec<f64>> {
        match &self.source {
            GraphSource::Sampled { sizes, .. } => Some(
                (0..self.p)
                    .map(|d| (self.upper[d] - self.lower[d]) / (sizes[d] - 1) as f64)
                    .collect(),
            ),
            GraphSource::Analytic(_) => None,
        }
    }

    /// Interior node nearest to `x`, rejected unless `x` is a node at least the margin inside.
    fn node_of(&self, x: &[f64], sizes: &[usize]) -> Result<Vec<usize>> {
        self.check_inside(x)?;
        let h = self.spacing().expect("sampled");
        let mut idx = Vec::with_capacity(self.p);
        for d in 0..self.p {
            let t = (x[d] - self.lower[d]) / h[d];
            let i = t.round();
            if (t - i).abs() > 1e-9 {
                return Err(Error::OutOfDomain(format!("{x:?} is not a grid node")));
            }
            let i = i as usize;
            if i < GRID_MARGIN || i + GRID_MARGIN >= sizes[d] {
                return Err(Error::OutOfDomain(format!("{x:?} closer than {GRID_MARGIN} nodes to the boundary")));
            }
            idx.push(i);
        }
        Ok(idx)
    }

    /// `f`, `f_i`, `f_{ij}` at `x`.
    pub fn jet(&self, x: &[f64]) -> Result<Jet> {
        let GraphSource::Sampled { sizes, values } = &self.source else {
            return self.analytic_jet(x);
        };
        let idx = self.node_of(x, sizes)?;
        let (p, q) = (self.p, self.q);
        let h = self.spacing().expect("sampled");
        let site = |offs: &[(usize, isize)]| {
            let mut s = 0usize;
            for d in 0..p {
                let mut i = idx[d] as isize;
                for &(axis, o) in offs {
                    if axis == d {
                        i += o;
                    }
                }
                s = s * sizes[d] + i as usize;
            }
            s
        };
        let val = |offs: &[(usize, isize)], a: usize| values[site(offs) * q + a];
        const W: [(isize, f64); 4] = [(-2, 1.0 / 12.0), (-1, -8.0 / 12.0), (1, 8.0 / 12.0), (2, -1.0 / 12.0)];
        const W2: [(isize, f64); 5] = [
            (-2, -1.0 / 12.0),
            (-1, 16.0 / 12.0),
            (0, -30.0 / 12.0),
            (1, 16.0 / 12.0),
            (2, -1.0 / 12.0),
        ];
        let value = DVector::from_fn(q, |a, _| val(&[], a));
        let first = DMatrix::from_fn(q, p, |a, i| W.iter().map(|&(o, w)| w * val(&[(i, o)], a)).sum::<f64>() / h[i]);
        let second = (0..q)
            .map(|a| {
                DMatrix::from_fn(p, p, |i, j| {
                    if i == j {
                        W2.iter().map(|&(o, w)| w * val(&[(i, o)], a)).sum::<f64>() / (h[i] * h[i])
                    } else {
                        let mut s = 0.0;
                        for &(oi, wi) in &W {
                            for &(oj, wj) in &W {
                                s += wi * wj * val(&[(i, oi), (j, oj)], a);
                            }
                        }
                        s / (h[i] * h[j])
                    }
                })
            })
            .collect();
        Ok(Jet { value, first, second })
    }
}

/// `g_{ij} = δ_{ij} + f^a_i f^a_j`.
pub fn induced_metric(g: &GraphMap, x: &[f64]) -> Result<DMatrix<f64>> {
    let j = g.jet(x)?;
    Ok(metric_of(&j))
}

fn metric_of(j: &Jet) -> DMatrix<f64> {
    let p = j.first.ncols();
    DMatrix::identity(p, p) + j.first.transpose() * &j.first
}

fn inverse_spd(m: DMatrix<f64>) -> Result<DMatrix<f64>> {
    m.cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::EigenSolver("induced metric is not positive definite".into()))
}

/// `Γ^k_{ij} = g^{kℓ} f^a_{ij} f^a_ℓ`, indexed `[k][(i, j)]`.
pub fn christoffel(g: &GraphMap, x: &[f64]) -> Result<Vec<DMatrix<f64>>> {
    let j = g.jet(x)?;
    let ginv = inverse_spd(metric_of(&j))?;
    Ok(christoffel_of(&j, &ginv))
}

fn christoffel_of(j: &Jet, ginv: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
    let (q, p) = j.first.shape();
    // w_ℓ^{ij} = f^a_{ij} f^a_ℓ
    (0..p)
        .map(|k| {
            DMatrix::from_fn(p, p, |a_i, a_j| {
                (0..p)
                    .map(|l| ginv[(k, l)] * (0..q).map(|a| j.second[a][(a_i, a_j)] * j.first[(a, l)]).sum::<f64>())
                    .sum()
            })
        })
        .collect()
}

/// `½ g^{kℓ}(∂_i g_{jℓ} + ∂_j g_{iℓ} − ∂_ℓ g_{ij})` with metric derivatives from
/// Richardson-extrapolated central differences of the induced metric.
pub fn christoffel_from_metric(g: &GraphMap, x: &[f64]) -> Result<Vec<DMatrix<f64>>> {
    let p = g.p;
    let h = match g.spacing() {
        Some(hs) => hs,
        None => vec![FD_STEP; p],
    };
    let ginv = inverse_spd(induced_metric(g, x)?)?;
    let mut dg = Vec::with_capacity(p);
    for k in 0..p {
        let at = |s: f64| {
            let mut y = x.to_vec();
            y[k] += s * h[k];
            induced_metric(g, &y)
        };
        let (m2, m1, p1, p2) = (at(-2.0)?, at(-1.0)?, at(1.0)?, at(2.0)?);
        dg.push((m2 - m1 * 8.0 + p1 * 8.0 - p2) / (12.0 * h[k]));
    }
    Ok((0..p)
        .map(|k| {
            DMatrix::from_fn(p, p, |i, j| {
                0.5 * (0..p)
                    .map(|l| ginv[(k, l)] * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]))
                    .sum::<f64>()
            })
        })
        .collect())
}

/// `(g^{ij} f^a_{ij})_a`.
pub fn graph_minimality_residual(g: &GraphMap, x: &[f64]) -> Result<DVector<f64>> {
    let j = g.jet(x)?;
    let ginv = inverse_spd(metric_of(&j))?;
    Ok(DVector::from_fn(g.q, |a, _| ginv.component_mul(&j.second[a]).sum()))
}

fn curvature_of(p: usize, first: &DMatrix<f64>) -> Result<KForm> {
    let q = first.nrows();
    let mut e = KForm::zero(p + q, 2)?;
    for a in 0..q {
        for i in 0..p {
            e.add_term(&[i, p + a], first[(a, i)])?;
        }
    }
    Ok(e)
}

/// `E = f^a_i dx^i ∧ dy^a` on `B × T^q` at `x`.
pub fn fm_connection(g: &GraphMap, x: &[f64]) -> Result<KForm> {
    curvature_of(g.p, &g.jet(x)?.first)
}

/// `max |dE|` with `dE = Σ_k dx^k ∧ ∂_k E`, the derivatives by differencing `E`.
pub fn fm_closedness(g: &GraphMap, x: &[f64]) -> Result<f64> {
    let p = g.p;
    let n = g.total_dim();
    if n < 3 {
        g.jet(x)?;
        return Ok(0.0);
    }
    let h = g.spacing().unwrap_or_else(|| vec![FD_STEP; p]);
    let mut de = KForm::zero(n, 3)?;
    for k in 0..p {
        let at = |s: f64| {
            let mut y = x.to_vec();
            y[k] += s * h[k];
            fm_connection(g, &y)
        };
        let deriv = at(-2.0)?
            .sub(&at(-1.0)?.scale(8.0))?
            .add(&at(1.0)?.scale(8.0))?
            .sub(&at(2.0)?)?
            .scale(1.0 / (12.0 * h[k]));
        de = de.add(&wedge(&KForm::monomial(n, &[k], 1.0)?, &deriv)?)?;
    }
    Ok(de.max_abs())
}

/// `−Σ_μ i(G⁻¹ e_μ) D_μ α` from the jet `D_μ α`.
fn delta_from_jet(g_inv: &DMatrix<f64>, derivs: &[KForm]) -> Result<KForm> {
    let n = g_inv.nrows();
    let k = derivs[0].degree();
    let mut out = KForm::zero(n, k - 1)?;
    for (mu, d) in derivs.iter().enumerate() {
        out = out.sub(&interior(&g_inv.column(mu).into_owned(), d)?)?;
    }
    Ok(out)
}

struct Local {
    jet: Jet,
    e: KForm,
    g_inv_total: DMatrix<f64>,
    delta_e: KForm,
}

fn local(g: &GraphMap, x: &[f64]) -> Result<Local> {
    let (p, q) = (g.p, g.q);
    let jet = g.jet(x)?;
    let e = curvature_of(p, &jet.first)?;
    let g_inv_total = PointData::of(&e.to_two_form_point()?).g_inv;
    // D_{∂_i}E = f^a_{ij} dx^j ∧ dy^a; y-derivatives vanish
    let mut derivs = Vec::with_capacity(p + q);
    for i in 0..p {
        let col = DMatrix::from_fn(q, p, |a, j| jet.second[a][(i, j)]);
        derivs.push(curvature_of(p, &col)?);
    }
    for _ in 0..q {
        derivs.push(KForm::zero(p + q, 2)?);
    }
    let delta_e = delta_from_jet(&g_inv_total, &derivs)?;
    Ok(Local {
        jet,
        e,
        g_inv_total,
        delta_e,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DeltaCheck {
    /// `dy^a` components of `δ_∇E_∇` from the product-space definition.
    pub generic: Vec<f64>,
    /// `−g^{ij} f^a_{ij}`.
    pub closed_form: Vec<f64>,
    pub residual: f64,
    /// Largest `dx^i` component of the generic result.
    pub base_leak: f64,
}

pub fn fm_delta_check(g: &GraphMap, x: &[f64]) -> Result<DeltaCheck> {
    let loc = local(g, x)?;
    let p = g.p;
    let ginv = inverse_spd(metric_of(&loc.jet))?;
    let generic: Vec<f64> = (0..g.q).map(|a| loc.delta_e.coeff(&[p + a])).collect();
    let closed_form: Vec<f64> = (0..g.q).map(|a| -ginv.component_mul(&loc.jet.second[a]).sum()).collect();
    let residual = generic
        .iter()
        .zip(&closed_form)
        .map(|(u, v)| (u - v).abs())
        .fold(0.0, f64::max);
    let base_leak = (0..p).map(|i| loc.delta_e.coeff(&[i]).abs()).fold(0.0, f64::max);
    Ok(DeltaCheck {
        generic,
        closed_form,
        residual,
        base_leak,
    })
}

/// A 1-form on the base with its first derivatives, `value[i] = α_i`, `deriv[(i, j)] = ∂_j α_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct OneFormJet {
    pub value: DVector<f64>,
    pub deriv: DMatrix<f64>,
}

impl OneFormJet {
    /// `α_i = c_i + M_{ij} x^j`.
    pub fn affine(c: DVector<f64>, m: DMatrix<f64>, x: &[f64]) -> Self {
        let value = &c + &m * DVector::from_column_slice(x);
        Self { value, deriv: m }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CodiffCorrespondence {
    /// `d^{*g}α` in the induced metric.
    pub lhs: f64,
    /// `δ_∇α + i((G⁻¹∘E♯)((δ_∇E)♯))α`.
    pub rhs: f64,
    pub delta: f64,
    pub correction: f64,
    pub residual: f64,
}

pub fn codiff_correspondence(g: &GraphMap, alpha: &OneFormJet, x: &[f64]) -> Result<CodiffCorrespondence> {
    let (p, q) = (g.p, g.q);
    let n = p + q;
    if alpha.value.len() != p || alpha.deriv.shape() != (p, p) {
        return Err(Error::DimensionMismatch {
            left: p,
            right: alpha.value.len(),
        });
    }
    let loc = local(g, x)?;
    let ginv = inverse_spd(metric_of(&loc.jet))?;
    let gamma = christoffel_of(&loc.jet, &ginv);
    let mut lhs = 0.0;
    for i in 0..p {
        for j in 0..p {
            let cov = alpha.deriv[(i, j)] - (0..p).map(|k| gamma[k][(j, i)] * alpha.value[k]).sum::<f64>();
            lhs -= ginv[(i, j)] * cov;
        }
    }
    let lift = |v: &dyn Fn(usize) -> f64| -> Result<KForm> {
        KForm::from_coeffs(n, 1, (0..n).map(|mu| if mu < p { v(mu) } else { 0.0 }).collect())
    };
    let mut derivs = Vec::with_capacity(n);
    for j in 0..p {
        derivs.push(lift(&|i| alpha.deriv[(i, j)])?);
    }
    for _ in 0..q {
        derivs.push(KForm::zero(n, 1)?);
    }
    let delta = delta_from_jet(&loc.g_inv_total, &derivs)?.coeffs()[0];
    let w = DVector::from_column_slice(loc.delta_e.coeffs());
    let sharp = loc.e.to_two_form_point()?.sharp();
    let u = &loc.g_inv_total * (sharp * w);
    let correction: f64 = (0..p).map(|i| alpha.value[i] * u[i]).sum();
    let rhs = delta + correction;
    Ok(CodiffCorrespondence {
        lhs,
        rhs,
        delta,
        correction,
        residual: (lhs - rhs).abs(),
    })
}

/// `max |f − f_analytic|`-style consistency of a sampled graph's jets against an analytic graph at a node.
pub fn derivative_consistency(sampled: &GraphMap, analytic: &GraphMap, x: &[f64]) -> Result<f64> {
    let a = analytic.jet(x)?;
    let s = sampled.jet(x)?;
    let mut worst = (&a.first - &s.first).amax();
    for (u, v) in a.second.iter().zip(&s.second) {
        worst = worst.max((u - v).amax());
    }
    Ok(worst)
}

/// Points of the box shrunk by `shrink` on every side, uniform from a fixed seed.
pub fn sample_points(g: &GraphMap, count: usize, seed: u64, shrink: f64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            (0..g.p)
                .map(|d| {
                    let (l, u) = (g.lower[d], g.upper[d]);
                    let m = shrink * (u - l);
                    rng.random_range(l + m..u - m)
                })
                .collect()
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[allow(non_snake_case)]
pub struct FmReport {
    pub graph: String,
    pub points: usize,
    pub seed: u64,
    pub max_residual_A4: f64,
    pub max_residual_A3: f64,
    pub minimality_max: f64,
    /// Relative to `1 + max|Γ|`.
    pub christoffel_max: f64,
    pub closedness_max: f64,
    pub max_correction: f64,
    /// Minimality and `δ_∇E_∇` bounded by each other with constant 5 at every point.
    pub equivalence_holds: bool,
    pub tolerance: f64,
    pub pass: bool,
}

struct PointResult {
    a4: f64,
    a3: f64,
    minimality: f64,
    christoffel: f64,
    closed: f64,
    correction: f64,
    equivalent: bool,
}

/// All correspondence identities at `points` seeded sample points, with random affine `α`.
pub fn fm_report(g: &GraphMap, points: usize, seed: u64, tol: f64) -> Result<FmReport> {
    if g.is_sampled() {
        return Err(Error::InvalidArgument("fm_report needs an analytic graph; use node checks for grids".into()));
    }
    let xs = sample_points(g, points, seed, 0.05);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let p = g.p;
    let alphas: Vec<(DVector<f64>, DMatrix<f64>)> = (0..points)
        .map(|_| {
            let c = DVector::from_fn(p, |_, _| rng.random_range(-1.0..1.0));
            let m = DMatrix::from_fn(p, p, |_, _| rng.random_range(-1.0..1.0));
            (c, m)
        })
        .collect();
    let results = xs
        .par_iter()
        .zip(alphas.par_iter())
        .map(|(x, (c, m))| -> Result<PointResult> {
            let d = fm_delta_check(g, x)?;
            let minimality = graph_minimality_residual(g, x)?.amax();
            let delta_norm = d.generic.iter().fold(0.0f64, |s, v| s.max(v.abs()));
            let c5 = EQUIVALENCE_CONSTANT;
            let floor = tol;
            let equivalent = minimality <= c5 * delta_norm + floor && delta_norm <= c5 * minimality + floor;
            let ga = christoffel(g, x)?;
            let gb = christoffel_from_metric(g, x)?;
            let scale = 1.0 + ga.iter().map(DMatrix::amax).fold(0.0, f64::max);
            let christoffel = ga.iter().zip(&gb).map(|(u, v)| (u - v).amax()).fold(0.0, f64::max) / scale;
            let cc = codiff_correspondence(g, &OneFormJet::affine(c.clone(), m.clone(), x), x)?;
            Ok(PointResult {
                a4: d.residual.max(d.base_leak),
                a3: cc.residual,
                minimality,
                christoffel,
                closed: fm_closedness(g, x)?,
                correction: cc.correction.abs(),
                equivalent,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max = |f: fn(&PointResult) -> f64| results.iter().map(f).fold(0.0, f64::max);
    let max_residual_a4 = max(|r| r.a4);
    let max_residual_a3 = max(|r| r.a3);
    let christoffel_max = max(|r| r.christoffel);
    let closedness_max = max(|r| r.closed);
    let equivalence_holds = results.iter().all(|r| r.equivalent);
    Ok(FmReport {
        graph: g.name.clone(),
        points,
        seed,
        max_residual_A4: max_residual_a4,
        max_residual_A3: max_residual_a3,
        minimality_max: max(|r| r.minimality),
        christoffel_max,
        closedness_max,
        max_correction: max(|r| r.correction),
        equivalence_holds,
        tolerance: tol,
        pass: max_residual_a4 <= tol
            && max_residual_a3 <= tol
            && christoffel_max <= tol
            && closedness_max <= tol
            && equivalence_holds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn quad() -> GraphMap {
        GraphMap::quadratic().unwrap()
    }

    #[test]
    fn induced_metric_examples() {
        let lin = GraphMap::linear(DMatrix::from_row_slice(1, 2, &[0.0, 0.0])).unwrap();
        let cst = GraphMap::custom(2, 1, &[3.0, 0.0, 0.0, 0.0, 0.0, 0.0], 1.0).unwrap();
        assert_eq!(induced_metric(&cst, &[0.2, 0.1]).unwrap(), DMatrix::identity(2, 2));
        assert_eq!(induced_metric(&lin, &[0.2, 0.1]).unwrap(), DMatrix::identity(2, 2));
        assert_relative_eq!(induced_metric(&quad(), &[0.7]).unwrap()[(0, 0)], 1.49, max_relative = 1e-15);
        let s = GraphMap::scherk().unwrap();
        let x = [0.3, -0.6];
        let m = induced_metric(&s, &x).unwrap();
        let (t1, t2) = (x[0].tan(), x[1].tan());
        assert_relative_eq!(m[(0, 0)], 1.0 + t1 * t1, max_relative = 1e-14);
        assert_relative_eq!(m[(1, 1)], 1.0 + t2 * t2, max_relative = 1e-14);
        assert_relative_eq!(m[(0, 1)], -t1 * t2, max_relative = 1e-14);
        assert!(m.determinant() >= 1.0);
        assert!(matches!(induced_metric(&s, &[1.5, 0.0]), Err(Error::OutOfDomain(_))));
    }

    #[test]
    fn christoffel_examples() {
        let lin = GraphMap::linear(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, -0.5, 0.3])).unwrap();
        assert!(christoffel(&lin, &[0.1, 0.2]).unwrap().iter().all(|m| m.amax() == 0.0));
        let x = 0.8;
        assert_relative_eq!(
            christoffel(&quad(), &[x]).unwrap()[0][(0, 0)],
            x / (1.0 + x * x),
            max_relative = 1e-15
        );
        let s = GraphMap::scherk().unwrap();
        let a = christoffel(&s, &[0.3, 0.1]).unwrap();
        let b = christoffel_from_metric(&s, &[0.3, 0.1]).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).amax() < 1e-8);
            assert!((u - u.transpose()).amax() == 0.0);
        }
    }

    #[test]
    fn minimality_examples() {
        let lin = GraphMap::linear(DMatrix::from_row_slice(1, 2, &[1.0, 2.0])).unwrap();
        assert_eq!(graph_minimality_residual(&lin, &[0.1, 0.2]).unwrap()[0], 0.0);
        let x = 1.3;
        assert_relative_eq!(
            graph_minimality_residual(&quad(), &[x]).unwrap()[0],
            1.0 / (1.0 + x * x),
            max_relative = 1e-15
        );
        let s = GraphMap::scherk().unwrap();
        for x in sample_points(&s, 200, 1, 0.01) {
            let r = graph_minimality_residual(&s, &x).unwrap()[0];
            let j = s.jet(&x).unwrap();
            let (f1, f2) = (j.first[(0, 0)], j.first[(0, 1)]);
            let s2 = &j.second[0];
            let classical = (1.0 + f2 * f2) * s2[(0, 0)] - 2.0 * f1 * f2 * s2[(0, 1)] + (1.0 + f1 * f1) * s2[(1, 1)];
            assert!(r.abs() <= 1e-9, "{r} at {x:?}");
            assert!((classical - metric_of(&j).determinant() * r).abs() <= 1e-9 * (1.0 + classical.abs()));
        }
    }

    #[test]
    fn connection_examples() {
        let cst = GraphMap::custom(1, 1, &[2.0, 0.0, 0.0], 1.0).unwrap();
        assert!(fm_connection(&cst, &[0.4]).unwrap().is_zero());
        let e = fm_connection(&quad(), &[0.6]).unwrap();
        assert_eq!(e.coeff(&[0, 1]), 0.6);
        let s = GraphMap::scherk().unwrap();
        let x = [0.2, -0.4];
        let e = fm_connection(&s, &x).unwrap();
        assert_relative_eq!(e.coeff(&[0, 2]), -(0.2f64.tan()), max_relative = 1e-15);
        assert_relative_eq!(e.coeff(&[1, 2]), (-0.4f64).tan(), max_relative = 1e-15);
        assert_eq!(e.coeff(&[0, 1]), 0.0);
        assert!(fm_closedness(&s, &x).unwrap() < 1e-9);
    }

    #[test]
    fn delta_examples() {
        let lin = GraphMap::linear(DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 0.1, -1.0, 0.2, 0.0])).unwrap();
        let d = fm_delta_check(&lin, &[0.1, -0.2, 0.3]).unwrap();
        assert!(d.generic.iter().chain(&d.closed_form).all(|v| v.abs() < 1e-15));
        let x = 0.9;
        let d = fm_delta_check(&quad(), &[x]).unwrap();
        assert_relative_eq!(d.closed_form[0], -1.0 / (1.0 + x * x), max_relative = 1e-15);
        assert!(d.residual < 1e-14 && d.base_leak < 1e-15);
        let s = GraphMap::scherk().unwrap();
        for x in sample_points(&s, 100, 4, 0.02) {
            let d = fm_delta_check(&s, &x).unwrap();
            assert!(d.generic[0].abs() < 1e-8 && d.closed_form[0].abs() < 1e-8, "{d:?}");
        }
    }

    #[test]
    fn codifferential_examples() {
        let flat = GraphMap::linear(DMatrix::zeros(1, 2)).unwrap();
        let x = [0.3, 0.4];
        // α = x¹dx¹
        let alpha = OneFormJet::affine(DVector::zeros(2), DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]), &x);
        let c = codiff_correspondence(&flat, &alpha, &x).unwrap();
        assert_relative_eq!(c.lhs, -1.0, max_relative = 1e-15);
        assert_relative_eq!(c.rhs, -1.0, max_relative = 1e-15);

        let alpha = OneFormJet::affine(DVector::from_element(1, 1.0), DMatrix::zeros(1, 1), &[0.5]);
        let c = codiff_correspondence(&quad(), &alpha, &[0.5]).unwrap();
        assert!(c.correction.abs() > 0.1 && c.residual < 1e-14, "{c:?}");

        let s = GraphMap::scherk().unwrap();
        let alpha = OneFormJet::affine(
            DVector::from_row_slice(&[0.3, -1.1]),
            DMatrix::from_row_slice(2, 2, &[0.2, 0.7, -0.4, 1.3]),
            &[0.1, 0.5],
        );
        let c = codiff_correspondence(&s, &alpha, &[0.1, 0.5]).unwrap();
        assert!(c.correction.abs() < 1e-8 && (c.lhs - c.delta).abs() < 1e-8, "{c:?}");
    }

    #[test]
    fn reports_pass_for_the_standard_families() {
        for g in [
            GraphMap::linear(DMatrix::from_row_slice(1, 2, &[0.5, -1.0])).unwrap(),
            quad(),
            GraphMap::scherk().unwrap(),
            GraphMap::custom(2, 2, &[0.0, 1.0, 0.0, 0.5, 0.1, -0.3, 1.0, 0.2, 0.4, 0.0, 0.7, 0.0], 1.0).unwrap(),
        ] {
            let r = fm_report(&g, 100, 7, 1e-8).unwrap();
            assert!(r.pass, "{r:?}");
        }
    }

    #[test]
    fn sampled_graphs_match_analytic_jets() {
        let s = GraphMap::scherk().unwrap();
        let mut errs = Vec::new();
        let mut hs = Vec::new();
        for n in [41usize, 81, 161] {
            let g = s.sample_on_grid(vec![n, n]).unwrap();
            let h = g.spacing().unwrap()[0];
            let c = (n - 1) / 2;
            // node (c + 2, c − 3)
            let x = [s.lower()[0] + (c + 2) as f64 * h, s.lower()[1] + (c - 3) as f64 * h];
            errs.push(derivative_consistency(&g, &s, &x).unwrap());
            hs.push(h);
            assert!(g.jet(&[x[0] + 0.3 * h, x[1]]).is_err());
            assert!(g.jet(&[s.lower()[0] + h, x[1]]).is_err());
            let r = graph_minimality_residual(&g, &x).unwrap()[0];
            assert!(r.abs() < 200.0 * h.powi(4), "{r}");
        }
        let order = crate::field::fit_order(&hs, &errs);
        assert!(order > 3.5, "{order} {errs:?}");
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(GraphMap::custom(2, 1, &[1.0, 2.0], 1.0).is_err());
        assert!(GraphMap::polynomial(
            "bad",
            DVector::zeros(1),
            DMatrix::zeros(1, 2),
            vec![DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0])],
            1.0
        )
        .is_err());
        assert!(GraphMap::sampled("s", 1, vec![0.0], vec![1.0], vec![5], vec![0.0; 5]).is_err());
        assert!(GraphMap::linear(DMatrix::zeros(4, 5)).is_err());
    }
}
