//! Centered finite-difference exterior calculus on periodic lattices.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::form_field::FormField;
use super::grid::TorusGrid;
use crate::error::{Error, Result};
use crate::exterior::{basis_masks, binomial, mask_indices, mask_position, merge_sign, volume_excess};
use crate::pointwise::PointData;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StencilOrder {
    Second,
    Fourth,
}

impl StencilOrder {
    pub fn from_int(order: u32) -> Result<Self> {
        match order {
            2 => Ok(Self::Second),
            4 => Ok(Self::Fourth),
            _ => Err(Error::InvalidArgument(format!("stencil order must be 2 or 4, got {order}"))),
        }
    }

    pub fn as_int(self) -> u32 {
        match self {
            Self::Second => 2,
            Self::Fourth => 4,
        }
    }

    /// `(offset, weight)` pairs of the first-derivative stencil in units of `1/h`.
    fn taps(self) -> &'static [(isize, f64)] {
        match self {
            Self::Second => &[(1, 0.5), (-1, -0.5)],
            Self::Fourth => &[(1, 2.0 / 3.0), (-1, -2.0 / 3.0), (2, -1.0 / 12.0), (-2, 1.0 / 12.0)],
        }
    }
}

/// Differencing scheme shared by every operator in a run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scheme {
    pub order: StencilOrder,
}

impl Scheme {
    pub fn new(order: StencilOrder) -> Self {
        Self { order }
    }

    pub fn second() -> Self {
        Self::new(StencilOrder::Second)
    }

    pub fn fourth() -> Self {
        Self::new(StencilOrder::Fourth)
    }

    /// `∂/∂x^axis` of `nc` interleaved components per site.
    pub fn derivative_raw(&self, grid: &TorusGrid, data: &[f64], nc: usize, axis: usize) -> Vec<f64> {
        let h = grid.spacing(axis);
        let taps = self.order.taps();
        let mut out = vec![0.0; data.len()];
        out.par_chunks_mut(nc.max(1)).enumerate().for_each(|(site, o)| {
            for &(off, w) in taps {
                let nb = grid.shift(site, axis, off);
                let src = &data[nb * nc..(nb + 1) * nc];
                for (x, s) in o.iter_mut().zip(src) {
                    *x += w * s;
                }
            }
            for x in o.iter_mut() {
                *x /= h;
            }
        });
        out
    }

    /// Componentwise partial derivative `D_axis α`.
    pub fn derivative(&self, f: &FormField, axis: usize) -> FormField {
        let data = self.derivative_raw(f.grid(), f.data(), f.ncomp(), axis);
        FormField::from_data(f.grid(), f.degree(), data).expect("shape preserved")
    }

    /// All first partials `D_1 α, …, D_n α`.
    pub fn gradient(&self, f: &FormField) -> Vec<FormField> {
        (0..f.dim()).map(|i| self.derivative(f, i)).collect()
    }

    /// `dα = Σ_l e^l ∧ D_l α`.
    pub fn ext_d(&self, f: &FormField) -> Result<FormField> {
        let n = f.dim();
        let k = f.degree();
        if k >= n {
            return Err(Error::Degree { op: "ext_d", degree: k, dim: n });
        }
        let derivs = self.gradient(f);
        let mut out = FormField::zeros(f.grid(), k + 1)?;
        let nc_out = out.ncomp();
        let nc_in = f.ncomp();
        let masks = basis_masks(n, k);
        out.data_mut().par_chunks_mut(nc_out).enumerate().for_each(|(site, o)| {
            for (l, dl) in derivs.iter().enumerate() {
                let src = &dl.data()[site * nc_in..(site + 1) * nc_in];
                for (&m, &c) in masks.iter().zip(src) {
                    if m & (1 << l) != 0 {
                        continue;
                    }
                    o[mask_position(n, m | (1 << l))] += merge_sign(1 << l, m) * c;
                }
            }
        });
        Ok(out)
    }

    /// Flat codifferential `d* = −Σ_i i(e_i) D_i`.
    pub fn codifferential(&self, f: &FormField) -> Result<FormField> {
        self.delta_beta(&MetricField::flat(f.grid()), f)
    }

    /// `δ_β α = −Σ_i i(G⁻¹ e_i) D_i α`.
    pub fn delta_beta(&self, metric: &MetricField, alpha: &FormField) -> Result<FormField> {
        metric.grid().check_same(alpha.grid())?;
        let n = alpha.dim();
        let k = alpha.degree();
        if k == 0 {
            return Err(Error::Degree { op: "delta_beta", degree: 0, dim: n });
        }
        let derivs = self.gradient(alpha);
        let mut out = FormField::zeros(alpha.grid(), k - 1)?;
        let nc_out = out.ncomp();
        let nc_in = alpha.ncomp();
        out.data_mut().par_chunks_mut(nc_out.max(1)).enumerate().for_each(|(site, o)| {
            let g_inv = metric.g_inv_at(site);
            for (i, di) in derivs.iter().enumerate() {
                let src = &di.data()[site * nc_in..(site + 1) * nc_in];
                // column i of G⁻¹
                let v: Vec<f64> = (0..n).map(|r| g_inv[r * n + i]).collect();
                interior_acc(n, k, &v, src, o, -1.0);
            }
        });
        Ok(out)
    }

    /// `Δ_β = dδ_β + δ_β d` (only `δ_β d` on functions, only `dδ_β` on top forms).
    pub fn laplace_beta(&self, metric: &MetricField, f: &FormField) -> Result<FormField> {
        let n = f.dim();
        let k = f.degree();
        let mut out = FormField::zeros(f.grid(), k)?;
        if k < n {
            out = out.add(&self.delta_beta(metric, &self.ext_d(f)?)?)?;
        }
        if k > 0 {
            out = out.add(&self.ext_d(&self.delta_beta(metric, f)?)?)?;
        }
        Ok(out)
    }
}

/// `out += s · i(v) α` for raw coefficient slices of degree `k ≥ 1`.
pub fn interior_acc(n: usize, k: usize, v: &[f64], alpha: &[f64], out: &mut [f64], s: f64) {
    for (&m, &c) in basis_masks(n, k).iter().zip(alpha) {
        if c == 0.0 {
            continue;
        }
        for (pos, j) in mask_indices(m).into_iter().enumerate() {
            let sign = if pos % 2 == 0 { s } else { -s };
            out[mask_position(n, m & !(1 << j))] += sign * v[j] * c;
        }
    }
}

/// Pointwise `G⁻¹` and `v` of a 2-form field (optionally rescaled by `s`).
#[derive(Clone, Debug)]
pub struct MetricField {
    grid: TorusGrid,
    /// Row-major `n×n` block per site.
    g_inv: Vec<f64>,
    volume: Vec<f64>,
    /// `v − 1`, computed without cancellation.
    excess: Vec<f64>,
}

impl MetricField {
    pub fn flat(grid: &TorusGrid) -> Self {
        let n = grid.dim();
        let mut block = vec![0.0; n * n];
        for i in 0..n {
            block[i * n + i] = 1.0;
        }
        Self {
            grid: grid.clone(),
            g_inv: block.repeat(grid.site_count()),
            volume: vec![1.0; grid.site_count()],
            excess: vec![0.0; grid.site_count()],
        }
    }

    pub fn of(beta: &FormField) -> Result<Self> {
        Self::of_scaled(beta, 1.0)
    }

    /// Metric data of `s·β` at every site.
    pub fn of_scaled(beta: &FormField, s: f64) -> Result<Self> {
        if beta.degree() != 2 {
            return Err(Error::Degree {
                op: "MetricField::of",
                degree: beta.degree(),
                dim: beta.dim(),
            });
        }
        let n = beta.dim();
        let sites = beta.grid().site_count();
        let per_site: Vec<(Vec<f64>, f64, f64)> = (0..sites)
            .into_par_iter()
            .map(|site| {
                let d = PointData::of(&beta.two_form_scaled(site, s));
                let mut block = Vec::with_capacity(n * n);
                for r in 0..n {
                    for c in 0..n {
                        block.push(d.g_inv[(r, c)]);
                    }
                }
                let scaled = beta.form_at(site).scale(s);
                let excess = volume_excess(&scaled).expect("degree 2");
                (block, d.volume, excess)
            })
            .collect();
        let mut g_inv = Vec::with_capacity(sites * n * n);
        let mut volume = Vec::with_capacity(sites);
        let mut excess = Vec::with_capacity(sites);
        for (b, v, e) in per_site {
            g_inv.extend(b);
            volume.push(v);
            excess.push(e);
        }
        Ok(Self {
            grid: beta.grid().clone(),
            g_inv,
            volume,
            excess,
        })
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn g_inv_at(&self, site: usize) -> &[f64] {
        let n = self.grid.dim();
        &self.g_inv[site * n * n..(site + 1) * n * n]
    }

    pub fn g_inv_raw(&self) -> &[f64] {
        &self.g_inv
    }

    pub fn volume(&self) -> &[f64] {
        &self.volume
    }

    pub fn excess(&self) -> &[f64] {
        &self.excess
    }
}

/// Number of components of a `k`-form in dimension `n`.
pub fn ncomp(n: usize, k: usize) -> usize {
    binomial(n, k)
}
