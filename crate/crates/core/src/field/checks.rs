//! Discrete residuals of the integral identities, the Weitzenböck formula and the first variation.

use rayon::prelude::*;
use serde::Serialize;

use super::connection::{mean_curvature_divergence, volumes_of_curvature, LineConnection};
use super::form_field::{pairwise_sum, FormField};
use super::ops::{MetricField, Scheme};
use super::stress::{div_stress_direct, skew_matrix};
use super::tolerance::{fit_order, ToleranceModel};
use crate::error::{Error, Result};

fn check_degree(f: &FormField, degree: usize, op: &'static str) -> Result<()> {
    if f.degree() != degree {
        return Err(Error::Degree {
            op,
            degree: f.degree(),
            dim: f.dim(),
        });
    }
    Ok(())
}

/// `∫ f₁ f₂ w vol` for 0-forms and a site weight.
fn weighted_integral(f1: &FormField, f2: &FormField, w: &[f64]) -> f64 {
    let terms: Vec<f64> = f1
        .data()
        .iter()
        .zip(f2.data())
        .zip(w)
        .map(|((a, b), c)| a * b * c)
        .collect();
    pairwise_sum(&terms) * f1.grid().cell_volume()
}

/// `∫ ⟨df₁, (G⁻¹)* df₂⟩ v vol`.
fn energy_pairing(scheme: &Scheme, metric: &MetricField, f1: &FormField, f2: &FormField) -> Result<f64> {
    let n = f1.dim();
    let d1 = scheme.ext_d(f1)?;
    let d2 = scheme.ext_d(f2)?;
    let terms: Vec<f64> = (0..f1.grid().site_count())
        .map(|site| {
            let gi = metric.g_inv_at(site);
            let (a, b) = (d1.at(site), d2.at(site));
            let mut acc = 0.0;
            for i in 0..n {
                for j in 0..n {
                    acc += a[i] * gi[i * n + j] * b[j];
                }
            }
            acc * metric.volume()[site]
        })
        .collect();
    Ok(pairwise_sum(&terms) * f1.grid().cell_volume())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IbpReport {
    /// `∫ (L f₁) f₂ v vol` for the operator under test.
    pub lhs: f64,
    /// `∫ ⟨df₁, (G⁻¹)* df₂⟩ v vol`.
    pub middle: f64,
    /// `∫ (L f₂) f₁ v vol`.
    pub swapped: f64,
    pub residual_middle: f64,
    pub residual_swap: f64,
    pub scale: f64,
    pub tolerance: f64,
    /// `‖div S‖_∞` of the background form.
    pub conservation_residual: f64,
    pub pass: bool,
}

impl IbpReport {
    pub fn worst_relative(&self) -> f64 {
        self.residual_middle.max(self.residual_swap) / self.scale
    }
}

fn ibp_report(
    lhs: f64,
    middle: f64,
    swapped: f64,
    tolerance: f64,
    conservation_residual: f64,
) -> IbpReport {
    let scale = lhs.abs().max(middle.abs()).max(swapped.abs()).max(1.0);
    let residual_middle = (lhs - middle).abs();
    let residual_swap = (lhs - swapped).abs();
    IbpReport {
        lhs,
        middle,
        swapped,
        residual_middle,
        residual_swap,
        scale,
        tolerance,
        conservation_residual,
        pass: residual_middle.max(residual_swap) <= tolerance * scale,
    }
}

/// Weighted Green identity for `Δ_β` on functions.
pub fn ibp_check(
    scheme: &Scheme,
    tol: &ToleranceModel,
    beta: &FormField,
    f1: &FormField,
    f2: &FormField,
) -> Result<IbpReport> {
    check_degree(f1, 0, "ibp_check")?;
    check_degree(f2, 0, "ibp_check")?;
    let metric = MetricField::of(beta)?;
    let l1 = scheme.laplace_beta(&metric, f1)?;
    let l2 = scheme.laplace_beta(&metric, f2)?;
    let lhs = weighted_integral(&l1, f2, metric.volume());
    let swapped = weighted_integral(&l2, f1, metric.volume());
    let middle = energy_pairing(scheme, &metric, f1, f2)?;
    let conservation = div_stress_direct(scheme, beta)?.max_abs();
    Ok(ibp_report(lhs, middle, swapped, tol.for_grid(beta.grid()), conservation))
}

/// `δ′_β α = δ_β α − v⁻¹ α((div S)♯)` on 1-forms.
pub fn delta_prime(scheme: &Scheme, beta: &FormField, alpha: &FormField) -> Result<FormField> {
    check_degree(alpha, 1, "delta_prime")?;
    let metric = MetricField::of(beta)?;
    delta_prime_with(scheme, &metric, &div_stress_direct(scheme, beta)?, alpha)
}

fn delta_prime_with(
    scheme: &Scheme,
    metric: &MetricField,
    div_s: &FormField,
    alpha: &FormField,
) -> Result<FormField> {
    let mut out = scheme.delta_beta(metric, alpha)?;
    let n = alpha.dim();
    for (site, o) in out.data_mut().iter_mut().enumerate() {
        let a = &alpha.data()[site * n..(site + 1) * n];
        let d = &div_s.data()[site * n..(site + 1) * n];
        let pairing: f64 = a.iter().zip(d).map(|(x, y)| x * y).sum();
        *o -= pairing / metric.volume()[site];
    }
    Ok(out)
}

/// Weighted Green identity for `Δ′_β = δ′_β d`, valid for any `β`.
pub fn ibp_prime_check(
    scheme: &Scheme,
    tol: &ToleranceModel,
    beta: &FormField,
    f1: &FormField,
    f2: &FormField,
) -> Result<IbpReport> {
    check_degree(f1, 0, "ibp_prime_check")?;
    check_degree(f2, 0, "ibp_prime_check")?;
    let metric = MetricField::of(beta)?;
    let div_s = div_stress_direct(scheme, beta)?;
    let l1 = delta_prime_with(scheme, &metric, &div_s, &scheme.ext_d(f1)?)?;
    let l2 = delta_prime_with(scheme, &metric, &div_s, &scheme.ext_d(f2)?)?;
    let lhs = weighted_integral(&l1, f2, metric.volume());
    let swapped = weighted_integral(&l2, f1, metric.volume());
    let middle = energy_pairing(scheme, &metric, f1, f2)?;
    Ok(ibp_report(lhs, middle, swapped, tol.for_grid(beta.grid()), div_s.max_abs()))
}

/// Worst relative residual of [`ibp_prime_check`].
pub fn ibp_prime_residual(scheme: &Scheme, beta: &FormField, f1: &FormField, f2: &FormField) -> Result<f64> {
    let tol = ToleranceModel::calibrated(scheme);
    Ok(ibp_prime_check(scheme, &tol, beta, f1, f2)?.worst_relative())
}

/// `∫ (δ_β α) v vol`, which vanishes for conserved `β`.
pub fn weighted_divergence_integral(scheme: &Scheme, beta: &FormField, alpha: &FormField) -> Result<f64> {
    let metric = MetricField::of(beta)?;
    let d = scheme.delta_beta(&metric, alpha)?;
    Ok(pairwise_sum(
        &d.data()
            .iter()
            .zip(metric.volume())
            .map(|(a, v)| a * v)
            .collect::<Vec<_>>(),
    ) * beta.grid().cell_volume())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeitzenbockReport {
    /// `‖Δ_β α − δ_β Dα + e^i∧i((D_iG⁻¹)(e_j))D_jα‖_∞`.
    pub residual: f64,
    /// The same without the first-order term.
    pub residual_without_first_order: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Flat-base Weitzenböck identity on 1-forms.
pub fn weitzenbock_check(
    scheme: &Scheme,
    tol: &ToleranceModel,
    beta: &FormField,
    alpha: &FormField,
) -> Result<WeitzenbockReport> {
    check_degree(alpha, 1, "weitzenbock_check")?;
    let metric = MetricField::of(beta)?;
    let n = alpha.dim();
    let lap = scheme.laplace_beta(&metric, alpha)?;
    let first = scheme.gradient(alpha);
    let second: Vec<Vec<FormField>> = first.iter().map(|f| scheme.gradient(f)).collect();
    let d_beta = scheme.gradient(beta);
    let sites = alpha.grid().site_count();

    let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..sites)
        .into_par_iter()
        .map(|site| {
            let gi = metric.g_inv_at(site);
            let b = skew_matrix(n, beta.at(site));
            // δ_β Dα: −Σ_{i,l} G⁻¹_{li} D_i D_l α
            let mut rough = vec![0.0; n];
            for i in 0..n {
                for l in 0..n {
                    let dd = second[l][i].at(site);
                    for m in 0..n {
                        rough[m] -= gi[l * n + i] * dd[m];
                    }
                }
            }
            // first-order term T_m = Σ_{k,j} (D_m G⁻¹)_{kj} D_j α_k
            let mut t = vec![0.0; n];
            for (m, tm) in t.iter_mut().enumerate() {
                let db = skew_matrix(n, d_beta[m].at(site));
                let inner = mat_add(&mat_mul(n, &db, &b), &mat_mul(n, &b, &db));
                let dg = mat_mul(n, &mat_mul(n, gi, &inner), gi);
                for k in 0..n {
                    for j in 0..n {
                        *tm += dg[k * n + j] * first[j].at(site)[k];
                    }
                }
            }
            (rough, t)
        })
        .collect();

    let mut with: f64 = 0.0;
    let mut without: f64 = 0.0;
    for (site, (rough, t)) in rows.iter().enumerate() {
        let l = lap.at(site);
        for m in 0..n {
            with = with.max((l[m] - rough[m] + t[m]).abs());
            without = without.max((l[m] - rough[m]).abs());
        }
    }
    let tolerance = tol.for_grid(alpha.grid());
    Ok(WeitzenbockReport {
        residual: with,
        residual_without_first_order: without,
        tolerance,
        pass: with <= tolerance,
    })
}

fn mat_mul(n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            for j in 0..n {
                c[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    c
}

fn mat_add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VariationRow {
    pub t: f64,
    pub quotient: f64,
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FirstVariationReport {
    /// `−⟨b, H⟩_{L²}`.
    pub predicted: f64,
    pub rows: Vec<VariationRow>,
    /// `None` when every error is at roundoff.
    pub fitted_order: Option<f64>,
    pub pass: bool,
}

/// Central differences of `V⁰` along `a ± t·b` against `−⟨b, H⟩`.
pub fn first_variation_check(
    scheme: &Scheme,
    conn: &LineConnection,
    b: &FormField,
    t_list: &[f64],
) -> Result<FirstVariationReport> {
    check_degree(b, 1, "first_variation_check")?;
    if t_list.is_empty() || t_list.iter().any(|t| !(*t > 0.0)) || t_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidArgument("t_list must be positive and decreasing".into()));
    }
    let e = conn.curvature(scheme)?;
    let h = mean_curvature_divergence(scheme, &e)?;
    let predicted = -b.l2_inner(&h)?;
    let db = scheme.ext_d(b)?;
    let mut rows = Vec::with_capacity(t_list.len());
    for &t in t_list {
        let plus = volumes_of_curvature(&e.axpy(t, &db)?, 1.0)?.normalized;
        let minus = volumes_of_curvature(&e.axpy(-t, &db)?, 1.0)?.normalized;
        let quotient = (plus - minus) / (2.0 * t);
        rows.push(VariationRow {
            t,
            quotient,
            error: (quotient - predicted).abs(),
        });
    }
    let scale = predicted.abs().max(b.l2_norm()).max(1e-300);
    let floor = 1e-11 * scale.max(1.0);
    let significant: Vec<&VariationRow> = rows.iter().filter(|r| r.error > floor).collect();
    let fitted_order = (significant.len() >= 2).then(|| {
        let ts: Vec<f64> = significant.iter().map(|r| r.t).collect();
        let es: Vec<f64> = significant.iter().map(|r| r.error).collect();
        fit_order(&ts, &es)
    });
    let pass = match fitted_order {
        Some(p) => (1.8..=2.2).contains(&p),
        None => rows.iter().all(|r| r.error <= floor),
    };
    Ok(FirstVariationReport {
        predicted,
        rows,
        fitted_order,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exterior::KForm;
    use crate::field::grid::TorusGrid;
    use std::f64::consts::PI;

    fn grid(pts: usize) -> TorusGrid {
        TorusGrid::cube(2, pts, 2.0 * PI).unwrap()
    }

    #[test]
    fn green_identity_is_exact_for_constant_beta() {
        let s = Scheme::fourth();
        let tol = ToleranceModel::calibrated(&s);
        let g = grid(32);
        let beta = FormField::constant(&g, &KForm::monomial(2, &[0, 1], 1.3).unwrap()).unwrap();
        let f1 = FormField::scalar_fn(&g, |x| (x[0] + 2.0 * x[1]).sin() + x[1].cos()).unwrap();
        let f2 = FormField::scalar_fn(&g, |x| (2.0 * x[0]).cos() * x[1].sin() + 0.5).unwrap();
        let r = ibp_check(&s, &tol, &beta, &f1, &f2).unwrap();
        assert!(r.pass);
        assert!(r.worst_relative() < 1e-12, "{r:?}");
        assert!(r.conservation_residual < 1e-12);
        let p = ibp_prime_check(&s, &tol, &beta, &f1, &f2).unwrap();
        assert!(p.worst_relative() < 1e-12, "{p:?}");
    }

    #[test]
    fn weighted_divergence_vanishes_for_constant_beta() {
        let s = Scheme::second();
        let g = grid(16);
        let beta = FormField::constant(&g, &KForm::monomial(2, &[0, 1], -0.6).unwrap()).unwrap();
        let alpha = FormField::from_fn(&g, 1, |x| vec![x[1].sin(), (x[0] - x[1]).cos()]).unwrap();
        assert!(weighted_divergence_integral(&s, &beta, &alpha).unwrap().abs() < 1e-12);
    }

    #[test]
    fn weitzenbock_constant_and_varying_beta() {
        let s = Scheme::fourth();
        let tol = ToleranceModel::calibrated(&s);
        let g = grid(64);
        let alpha = FormField::from_fn(&g, 1, |x| vec![x[1].sin() + 0.5 * x[0].cos(), (x[0] + x[1]).cos()]).unwrap();
        let constant = FormField::constant(&g, &KForm::monomial(2, &[0, 1], 0.9).unwrap()).unwrap();
        let r = weitzenbock_check(&s, &tol, &constant, &alpha).unwrap();
        assert!(r.pass, "{r:?}");
        assert!((r.residual - r.residual_without_first_order).abs() < 1e-12);
        let varying = FormField::from_fn(&g, 2, |x| vec![0.8 * x[0].sin() + 0.4 * x[1].cos()]).unwrap();
        let r = weitzenbock_check(&s, &tol, &varying, &alpha).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(r.residual_without_first_order >= 10.0 * r.tolerance, "{r:?}");
    }

    #[test]
    fn first_variation_trivial_direction() {
        let g = grid(16);
        let s = Scheme::fourth();
        let a = FormField::from_fn(&g, 1, |x| vec![0.0, 0.3 * x[0].sin()]).unwrap();
        let c = LineConnection::new(KForm::zero(2, 2).unwrap(), a).unwrap();
        let r = first_variation_check(&s, &c, &FormField::zeros(&g, 1).unwrap(), &[0.1, 0.05]).unwrap();
        assert_eq!(r.predicted, 0.0);
        assert!(r.pass && r.fitted_order.is_none());
        assert!(first_variation_check(&s, &c, &FormField::zeros(&g, 1).unwrap(), &[0.05, 0.1]).is_err());
    }

    #[test]
    fn first_variation_converges_at_second_order() {
        let g = grid(32);
        let s = Scheme::fourth();
        let a = FormField::from_fn(&g, 1, |x| vec![0.4 * x[1].cos(), 0.7 * x[0].sin() + 0.2 * (x[0] + x[1]).sin()])
            .unwrap();
        let c = LineConnection::new(KForm::monomial(2, &[0, 1], 0.5).unwrap(), a).unwrap();
        let b = FormField::from_fn(&g, 1, |x| vec![(2.0 * x[1]).sin(), x[0].cos() * x[1].sin()]).unwrap();
        let r = first_variation_check(&s, &c, &b, &[0.1, 0.05, 0.025, 0.0125]).unwrap();
        assert!(r.pass, "{r:?}");
    }
}
