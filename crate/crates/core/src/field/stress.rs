//! Stress-energy field of a 2-form and its divergence.

use rayon::prelude::*;

use super::form_field::FormField;
use super::ops::{interior_acc, MetricField, Scheme};
use crate::error::{Error, Result};
use crate::exterior::{basis_masks, mask_indices};

fn check_two_form(beta: &FormField, op: &'static str) -> Result<()> {
    if beta.degree() != 2 {
        return Err(Error::Degree {
            op,
            degree: beta.degree(),
            dim: beta.dim(),
        });
    }
    Ok(())
}

/// Row-major `B` of a 2-form coefficient slice.
pub(crate) fn skew_matrix(n: usize, coeffs: &[f64]) -> Vec<f64> {
    let mut b = vec![0.0; n * n];
    for (&m, &c) in basis_masks(n, 2).iter().zip(coeffs) {
        let idx = mask_indices(m);
        b[idx[0] * n + idx[1]] = c;
        b[idx[1] * n + idx[0]] = -c;
    }
    b
}

/// `w · G⁻¹B` read off as a 2-form, per site, with `w` the volume density when `weighted`.
///
/// `G⁻¹B` is the coefficient matrix of `(G⁻¹∘β♯)^♭`.
pub fn coupling_form(metric: &MetricField, beta: &FormField, weighted: bool) -> Result<FormField> {
    check_two_form(beta, "coupling_form")?;
    metric.grid().check_same(beta.grid())?;
    let n = beta.dim();
    let masks = basis_masks(n, 2);
    let mut out = FormField::zeros(beta.grid(), 2)?;
    let nc = out.ncomp();
    out.data_mut().par_chunks_mut(nc).enumerate().for_each(|(site, o)| {
        let b = skew_matrix(n, beta.at(site));
        let gi = metric.g_inv_at(site);
        let w = if weighted { metric.volume()[site] } else { 1.0 };
        for (slot, &m) in o.iter_mut().zip(masks) {
            let idx = mask_indices(m);
            let (a, c) = (idx[0], idx[1]);
            *slot = w * (0..n).map(|k| gi[a * n + k] * b[k * n + c]).sum::<f64>();
        }
    });
    Ok(out)
}

/// `S = −I + v G⁻¹`, row-major `n×n` per site.
pub fn stress_field(metric: &MetricField) -> Vec<f64> {
    let n = metric.grid().dim();
    let mut s = metric.g_inv_raw().to_vec();
    for (site, block) in s.chunks_mut(n * n).enumerate() {
        let v = metric.volume()[site];
        for (i, x) in block.iter_mut().enumerate() {
            *x *= v;
            if i / n == i % n {
                *x -= 1.0;
            }
        }
    }
    s
}

/// `(div S)_j = Σ_i D_i S_ij`, differencing the assembled stress field.
pub fn div_stress_direct(scheme: &Scheme, beta: &FormField) -> Result<FormField> {
    check_two_form(beta, "div_stress_direct")?;
    let metric = MetricField::of(beta)?;
    let n = beta.dim();
    let grid = beta.grid();
    let s = stress_field(&metric);
    let mut out = vec![0.0; grid.site_count() * n];
    for i in 0..n {
        let d = scheme.derivative_raw(grid, &s, n * n, i);
        for (o, blk) in out.chunks_mut(n).zip(d.chunks(n * n)) {
            for j in 0..n {
                o[j] += blk[i * n + j];
            }
        }
    }
    FormField::from_data(grid, 1, out)
}

/// `div S = v{Σ_k ⟨i(e_k)dβ, (G⁻¹∘β♯)^♭⟩ G⁻¹e_k − (G⁻¹∘β♯)((δ_β β)♯)}^♭`.
pub fn div_stress(scheme: &Scheme, beta: &FormField) -> Result<FormField> {
    check_two_form(beta, "div_stress")?;
    let metric = MetricField::of(beta)?;
    let n = beta.dim();
    let grid = beta.grid();
    let d_beta = if n > 2 { Some(scheme.ext_d(beta)?) } else { None };
    let delta = scheme.delta_beta(&metric, beta)?;
    let coupling = coupling_form(&metric, beta, false)?;
    let mut out = FormField::zeros(grid, 1)?;
    out.data_mut().par_chunks_mut(n).enumerate().for_each(|(site, o)| {
        let gi = metric.g_inv_at(site);
        let c_site = coupling.at(site);
        let mut c = vec![0.0; n];
        if let Some(db) = &d_beta {
            let mut e_k = vec![0.0; n];
            for (k, ck) in c.iter_mut().enumerate() {
                e_k.iter_mut().for_each(|x| *x = 0.0);
                e_k[k] = 1.0;
                let mut contracted = vec![0.0; c_site.len()];
                interior_acc(n, 3, &e_k, db.at(site), &mut contracted, 1.0);
                *ck = contracted.iter().zip(c_site).map(|(a, b)| a * b).sum();
            }
        }
        let b = skew_matrix(n, beta.at(site));
        let gamma = delta.at(site);
        // G⁻¹B γ
        let b_gamma: Vec<f64> = (0..n).map(|r| (0..n).map(|k| b[r * n + k] * gamma[k]).sum()).collect();
        let v = metric.volume()[site];
        for (j, oj) in o.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in 0..n {
                acc += gi[j * n + k] * (c[k] + b_gamma[k]);
            }
            *oj = v * acc;
        }
    });
    Ok(out)
}

/// Maximum discrepancy between the two assemblies of `div S`.
pub fn div_stress_discrepancy(scheme: &Scheme, beta: &FormField) -> Result<f64> {
    let a = div_stress(scheme, beta)?;
    let b = div_stress_direct(scheme, beta)?;
    Ok(a.sub(&b)?.max_abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exterior::KForm;
    use crate::field::grid::TorusGrid;
    use std::f64::consts::PI;

    #[test]
    fn constant_beta_is_conserved() {
        let g = TorusGrid::cube(3, 16, 2.0 * PI).unwrap();
        let mut k = KForm::zero(3, 2).unwrap();
        k.add_term(&[0, 1], 1.2).unwrap();
        k.add_term(&[1, 2], -0.4).unwrap();
        let beta = FormField::constant(&g, &k).unwrap();
        let s = Scheme::fourth();
        assert!(div_stress(&s, &beta).unwrap().max_abs() <= 1e-12);
        assert!(div_stress_direct(&s, &beta).unwrap().max_abs() <= 1e-12);
    }

    #[test]
    fn two_assemblies_agree_in_two_and_three_dimensions() {
        let s = Scheme::fourth();
        let g = TorusGrid::cube(2, 64, 2.0 * PI).unwrap();
        let beta = FormField::from_fn(&g, 2, |x| vec![0.8 * x[0].sin() + 0.3 * (x[1] * 2.0).cos()]).unwrap();
        let err = div_stress_discrepancy(&s, &beta).unwrap();
        assert!(err < 1e-4, "{err}");
        assert!(div_stress(&s, &beta).unwrap().max_abs() > 0.1);

        let g = TorusGrid::cube(3, 32, 2.0 * PI).unwrap();
        let beta = FormField::from_fn(&g, 2, |x| {
            vec![x[2].sin(), 0.5 * (x[0] + x[1]).cos(), 0.7 * x[1].sin() * x[0].cos()]
        })
        .unwrap();
        let err = div_stress_discrepancy(&s, &beta).unwrap();
        assert!(err < 3e-3, "{err}");
    }
}
