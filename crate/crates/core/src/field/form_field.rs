use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::grid::TorusGrid;
use crate::error::{Error, Result};
use crate::exterior::{basis_masks, binomial, mask_indices, KForm};
use crate::pointwise::TwoFormPoint;

/// A `k`-form on a torus lattice: `C(n, k)` components per site, site-major.
#[derive(Clone, Debug, PartialEq)]
pub struct FormField {
    grid: TorusGrid,
    degree: usize,
    data: Vec<f64>,
}

impl FormField {
    pub fn zeros(grid: &TorusGrid, degree: usize) -> Result<Self> {
        let n = grid.dim();
        if degree > n {
            return Err(Error::Degree {
                op: "FormField::zeros",
                degree,
                dim: n,
            });
        }
        Ok(Self {
            grid: grid.clone(),
            degree,
            data: vec![0.0; grid.site_count() * binomial(n, degree)],
        })
    }

    pub fn from_data(grid: &TorusGrid, degree: usize, data: Vec<f64>) -> Result<Self> {
        let mut f = Self::zeros(grid, degree)?;
        if data.len() != f.data.len() {
            return Err(Error::DimensionMismatch {
                left: f.data.len(),
                right: data.len(),
            });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("field components"));
        }
        f.data = data;
        Ok(f)
    }

    /// Samples `f(x)` (one value per basis monomial) at every site.
    pub fn from_fn<F>(grid: &TorusGrid, degree: usize, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> Vec<f64> + Sync,
    {
        let mut field = Self::zeros(grid, degree)?;
        let nc = field.ncomp();
        field.data.par_chunks_mut(nc).enumerate().for_each(|(site, out)| {
            let values = f(&grid.position(site));
            out.copy_from_slice(&values[..nc]);
        });
        if field.data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("sampled field"));
        }
        Ok(field)
    }

    pub fn scalar_fn<F>(grid: &TorusGrid, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        Self::from_fn(grid, 0, |x| vec![f(x)])
    }

    /// Random trigonometric polynomial with wavenumbers `|k_i| ≤ max_mode` per axis,
    /// each component bounded by `amplitude`.
    pub fn band_limited(grid: &TorusGrid, degree: usize, max_mode: usize, amplitude: f64, seed: u64) -> Result<Self> {
        let n = grid.dim();
        let nc = Self::zeros(grid, degree)?.ncomp();
        let side = 2 * max_mode + 1;
        let modes: Vec<Vec<f64>> = (0..side.pow(n as u32))
            .map(|mut idx| {
                (0..n)
                    .map(|axis| {
                        let k = (idx % side) as f64 - max_mode as f64;
                        idx /= side;
                        k * 2.0 * std::f64::consts::PI / grid.lengths()[axis]
                    })
                    .collect()
            })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weight = amplitude / (2 * modes.len()) as f64;
        let coeffs: Vec<Vec<(f64, f64)>> = (0..nc)
            .map(|_| {
                (0..modes.len())
                    .map(|_| (weight * rng.random_range(-1.0..=1.0), weight * rng.random_range(-1.0..=1.0)))
                    .collect()
            })
            .collect();
        Self::from_fn(grid, degree, |x| {
            coeffs
                .iter()
                .map(|cs| {
                    cs.iter()
                        .zip(&modes)
                        .map(|((a, b), k)| {
                            let phase: f64 = k.iter().zip(x).map(|(k, x)| k * x).sum();
                            a * phase.cos() + b * phase.sin()
                        })
                        .sum()
                })
                .collect()
        })
    }

    pub fn constant(grid: &TorusGrid, form: &KForm) -> Result<Self> {
        if form.dim() != grid.dim() {
            return Err(Error::DimensionMismatch {
                left: grid.dim(),
                right: form.dim(),
            });
        }
        let c = form.coeffs().to_vec();
        Self::from_fn(grid, form.degree(), move |_| c.clone())
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn ncomp(&self) -> usize {
        binomial(self.grid.dim(), self.degree)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn at(&self, site: usize) -> &[f64] {
        let nc = self.ncomp();
        &self.data[site * nc..(site + 1) * nc]
    }

    pub fn at_mut(&mut self, site: usize) -> &mut [f64] {
        let nc = self.ncomp();
        &mut self.data[site * nc..(site + 1) * nc]
    }

    /// Component of `e^I` at a site, `I` ascending zero-based.
    pub fn component(&self, site: usize, indices: &[usize]) -> f64 {
        let masks = basis_masks(self.dim(), self.degree);
        let mask = indices.iter().fold(0u16, |m, &i| m | (1 << i));
        masks
            .iter()
            .position(|&m| m == mask)
            .map_or(0.0, |c| self.at(site)[c])
    }

    pub fn form_at(&self, site: usize) -> KForm {
        KForm::from_coeffs(self.dim(), self.degree, self.at(site).to_vec()).expect("shape")
    }

    /// Skew coefficient matrix of a 2-form at one site.
    pub fn two_form_at(&self, site: usize) -> TwoFormPoint {
        debug_assert_eq!(self.degree, 2);
        self.two_form_scaled(site, 1.0)
    }

    pub fn two_form_scaled(&self, site: usize, s: f64) -> TwoFormPoint {
        let n = self.dim();
        let mut b = nalgebra::DMatrix::zeros(n, n);
        for (&m, &c) in basis_masks(n, 2).iter().zip(self.at(site)) {
            let idx = mask_indices(m);
            b[(idx[0], idx[1])] = s * c;
            b[(idx[1], idx[0])] = -s * c;
        }
        TwoFormPoint::new(b).expect("finite skew coefficients")
    }

    fn check_shape(&self, other: &Self) -> Result<()> {
        self.grid.check_same(&other.grid)?;
        if self.degree != other.degree {
            return Err(Error::DimensionMismatch {
                left: self.degree,
                right: other.degree,
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.axpy(-1.0, other)
    }

    /// `self + s·other`.
    pub fn axpy(&self, s: f64, other: &Self) -> Result<Self> {
        self.check_shape(other)?;
        let mut out = self.clone();
        out.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a += s * b);
        Ok(out)
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|a| *a *= s);
        out
    }

    /// Adds the same form at every site.
    pub fn add_constant(&self, form: &KForm) -> Result<Self> {
        if form.dim() != self.dim() || form.degree() != self.degree {
            return Err(Error::DimensionMismatch {
                left: self.degree,
                right: form.degree(),
            });
        }
        let mut out = self.clone();
        let nc = self.ncomp();
        for chunk in out.data.chunks_mut(nc) {
            chunk.iter_mut().zip(form.coeffs()).for_each(|(a, b)| *a += b);
        }
        Ok(out)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Largest pointwise norm `|α(x)|`.
    pub fn max_norm(&self) -> f64 {
        self.data
            .chunks(self.ncomp().max(1))
            .map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// `⟨α, γ⟩_{L²}` as a cell sum in site order.
    pub fn l2_inner(&self, other: &Self) -> Result<f64> {
        self.check_shape(other)?;
        Ok(pairwise_sum(
            &self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a * b)
                .collect::<Vec<_>>(),
        ) * self.grid.cell_volume())
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_inner(self).expect("same shape").sqrt()
    }

    /// `∫ f vol` for a 0-form.
    pub fn integral(&self) -> f64 {
        debug_assert_eq!(self.degree, 0);
        pairwise_sum(&self.data) * self.grid.cell_volume()
    }

    /// Mean of each component over the torus.
    pub fn component_means(&self) -> Vec<f64> {
        let nc = self.ncomp();
        let sites = self.grid.site_count() as f64;
        (0..nc)
            .map(|c| {
                let col: Vec<f64> = self.data.iter().skip(c).step_by(nc).copied().collect();
                pairwise_sum(&col) / sites
            })
            .collect()
    }

    /// Largest deviation of any component from its torus mean.
    pub fn max_deviation_from_mean(&self) -> f64 {
        let means = self.component_means();
        let nc = self.ncomp();
        self.data
            .iter()
            .enumerate()
            .fold(0.0, |m, (i, x)| m.max((x - means[i % nc]).abs()))
    }

    /// Pointwise product with a scalar field.
    pub fn mul_scalar_field(&self, f: &[f64]) -> Self {
        let nc = self.ncomp();
        let mut out = self.clone();
        for (chunk, s) in out.data.chunks_mut(nc).zip(f) {
            chunk.iter_mut().for_each(|x| *x *= s);
        }
        out
    }
}

/// Fixed-shape pairwise summation; the result does not depend on thread count.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 32 {
        values.iter().sum()
    } else {
        let mid = values.len() / 2;
        pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn band_limited_is_seeded_and_bounded() {
        let g = TorusGrid::cube(2, 16, 2.0 * PI).unwrap();
        let a = FormField::band_limited(&g, 1, 2, 1.5, 4).unwrap();
        assert_eq!(a, FormField::band_limited(&g, 1, 2, 1.5, 4).unwrap());
        assert_ne!(a, FormField::band_limited(&g, 1, 2, 1.5, 5).unwrap());
        assert!(a.max_abs() <= 1.5 && a.max_abs() > 0.0);
        // modes above the band vanish under the spectral projection onto sin(3x)
        let probe = FormField::from_fn(&g, 1, |x| vec![(3.0 * x[0]).sin(), 0.0]).unwrap();
        assert!(a.l2_inner(&probe).unwrap().abs() < 1e-12);
    }

    #[test]
    fn sampling_and_integrals() {
        let g = TorusGrid::cube(2, 16, 2.0 * PI).unwrap();
        let f = FormField::scalar_fn(&g, |x| x[0].sin().powi(2)).unwrap();
        assert!((f.integral() - 2.0 * PI * PI).abs() < 1e-12);
        let one = FormField::scalar_fn(&g, |_| 1.0).unwrap();
        assert!((one.integral() - 4.0 * PI * PI).abs() < 1e-12);
        let a = FormField::from_fn(&g, 1, |x| vec![x[1].cos(), 1.0]).unwrap();
        assert_eq!(a.ncomp(), 2);
        assert!((a.component_means()[0]).abs() < 1e-15);
        assert!((a.max_deviation_from_mean() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn two_form_extraction() {
        let g = TorusGrid::cube(3, 8, 1.0).unwrap();
        let b = FormField::from_fn(&g, 2, |_| vec![1.0, 2.0, 3.0]).unwrap();
        let p = b.two_form_at(5);
        assert_eq!(p.get(0, 1), 1.0);
        assert_eq!(p.get(0, 2), 2.0);
        assert_eq!(p.get(2, 1), -3.0);
        assert_eq!(b.component(5, &[1, 2]), 3.0);
    }

    #[test]
    fn rejects_non_finite() {
        let g = TorusGrid::cube(2, 8, 1.0).unwrap();
        assert!(FormField::scalar_fn(&g, |_| f64::NAN).is_err());
        assert!(FormField::from_data(&g, 0, vec![0.0; 3]).is_err());
    }
}
