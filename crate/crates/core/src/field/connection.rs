//! Connections on a trivial line bundle over a flat torus, their mean curvature
//! and volume functionals.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use super::form_field::{pairwise_sum, FormField};
use super::grid::TorusGrid;
use super::ops::{MetricField, Scheme};
use super::stress::coupling_form;
use crate::error::{Error, Result};
use crate::exterior::{basis_masks, mask_indices, KForm};

/// `∇ = ∇₀ + √−1 a`, with curvature `E = E₀ + da`.
#[derive(Clone, Debug, PartialEq)]
pub struct LineConnection {
    base: KForm,
    potential: FormField,
}

impl LineConnection {
    pub fn new(base: KForm, potential: FormField) -> Result<Self> {
        if base.degree() != 2 || potential.degree() != 1 {
            return Err(Error::InvalidArgument(
                "a connection needs a constant 2-form and a 1-form potential".into(),
            ));
        }
        if base.dim() != potential.dim() {
            return Err(Error::DimensionMismatch {
                left: base.dim(),
                right: potential.dim(),
            });
        }
        Ok(Self { base, potential })
    }

    /// `E₀ = 0`, `a = 0`.
    pub fn trivial(grid: &TorusGrid) -> Result<Self> {
        Self::new(KForm::zero(grid.dim(), 2)?, FormField::zeros(grid, 1)?)
    }

    /// Rejects a base curvature whose flux through some coordinate 2-torus is not in `2πℤ`.
    pub fn with_integral_base(base: KForm, potential: FormField) -> Result<Self> {
        let c = Self::new(base, potential)?;
        if !c.base_is_integral(1e-9) {
            return Err(Error::InvalidArgument(
                "base curvature fluxes are not integer multiples of 2π".into(),
            ));
        }
        Ok(c)
    }

    pub fn base_is_integral(&self, tol: f64) -> bool {
        let l = self.potential.grid().lengths();
        basis_masks(self.base.dim(), 2)
            .iter()
            .zip(self.base.coeffs())
            .all(|(&m, &c)| {
                let idx = mask_indices(m);
                let flux = c * l[idx[0]] * l[idx[1]] / (2.0 * PI);
                (flux - flux.round()).abs() <= tol
            })
    }

    pub fn grid(&self) -> &TorusGrid {
        self.potential.grid()
    }

    pub fn base(&self) -> &KForm {
        &self.base
    }

    pub fn potential(&self) -> &FormField {
        &self.potential
    }

    pub fn with_potential(&self, potential: FormField) -> Result<Self> {
        self.potential.grid().check_same(potential.grid())?;
        Self::new(self.base.clone(), potential)
    }

    pub fn curvature(&self, scheme: &Scheme) -> Result<FormField> {
        scheme.ext_d(&self.potential)?.add_constant(&self.base)
    }
}

/// `H = v·(G⁻¹)*(i(G⁻¹e_i) D_i E) = −v G⁻¹(δ_E E)`, assembled pointwise.
pub fn mean_curvature_pointwise(scheme: &Scheme, curvature: &FormField) -> Result<FormField> {
    let metric = MetricField::of(curvature)?;
    let delta = scheme.delta_beta(&metric, curvature)?;
    let n = curvature.dim();
    let mut out = FormField::zeros(curvature.grid(), 1)?;
    out.data_mut().par_chunks_mut(n).enumerate().for_each(|(site, o)| {
        let gi = metric.g_inv_at(site);
        let v = metric.volume()[site];
        let d = delta.at(site);
        for (j, oj) in o.iter_mut().enumerate() {
            *oj = -v * (0..n).map(|k| gi[j * n + k] * d[k]).sum::<f64>();
        }
    });
    Ok(out)
}

/// `H = −d*(v (G⁻¹∘E♯)^♭)`.
pub fn mean_curvature_divergence(scheme: &Scheme, curvature: &FormField) -> Result<FormField> {
    mean_curvature_scaled(scheme, curvature, 1.0)
}

/// `−d*(v(sE) (G_{sE}⁻¹∘E♯)^♭)`, the gradient of `s⁻²∫(v(sE) − 1)`.
///
/// With `s = r⁻²` this is the mean curvature for the rescaled metric `r²g`,
/// normalized so that it tends to `−d*E` as `r → ∞`.
pub fn mean_curvature_scaled(scheme: &Scheme, curvature: &FormField, s: f64) -> Result<FormField> {
    let metric = MetricField::of_scaled(curvature, s)?;
    let coupling = coupling_form(&metric, curvature, true)?;
    Ok(scheme.codifferential(&coupling)?.scale(-1.0))
}

/// Both assemblies of the mean curvature.
#[derive(Clone, Debug)]
pub struct MeanCurvature {
    pub pointwise: FormField,
    pub divergence: FormField,
    pub max_discrepancy: f64,
}

pub fn mean_curvature(scheme: &Scheme, conn: &LineConnection) -> Result<MeanCurvature> {
    let e = conn.curvature(scheme)?;
    let pointwise = mean_curvature_pointwise(scheme, &e)?;
    let divergence = mean_curvature_divergence(scheme, &e)?;
    let max_discrepancy = pointwise.sub(&divergence)?.max_abs();
    Ok(MeanCurvature {
        pointwise,
        divergence,
        max_discrepancy,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Volumes {
    /// `∫ v vol`.
    pub volume: f64,
    /// `∫ (v − 1) vol`.
    pub normalized: f64,
}

/// Cell sums of `v(sE)` and `v(sE) − 1`.
pub fn volumes_of_curvature(curvature: &FormField, s: f64) -> Result<Volumes> {
    let metric = MetricField::of_scaled(curvature, s)?;
    let cell = curvature.grid().cell_volume();
    Ok(Volumes {
        volume: pairwise_sum(metric.volume()) * cell,
        normalized: pairwise_sum(metric.excess()) * cell,
    })
}

pub fn volume_functionals(scheme: &Scheme, conn: &LineConnection) -> Result<Volumes> {
    volumes_of_curvature(&conn.curvature(scheme)?, 1.0)
}
