use serde::Serialize;

use crate::error::{Error, Result};

pub const MAX_GRID_DIM: usize = 4;
pub const MIN_POINTS: usize = 8;

/// Uniform periodic lattice on the flat torus `Π [0, L_i)`.
///
/// Sites are ordered lexicographically with the first axis slowest.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TorusGrid {
    sizes: Vec<usize>,
    lengths: Vec<f64>,
    strides: Vec<usize>,
}

impl TorusGrid {
    pub fn new(sizes: Vec<usize>, lengths: Vec<f64>) -> Result<Self> {
        let n = sizes.len();
        if !(2..=MAX_GRID_DIM).contains(&n) {
            return Err(Error::Dimension {
                dim: n,
                min: 2,
                max: MAX_GRID_DIM,
            });
        }
        if lengths.len() != n {
            return Err(Error::DimensionMismatch {
                left: n,
                right: lengths.len(),
            });
        }
        for (axis, &s) in sizes.iter().enumerate() {
            if s < MIN_POINTS || s % 2 != 0 {
                return Err(Error::Grid(format!(
                    "axis {axis} has {s} points; need an even count of at least {MIN_POINTS}"
                )));
            }
        }
        if let Some(l) = lengths.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::Grid(format!("length {l} must be positive and finite")));
        }
        let mut strides = vec![1; n];
        for axis in (0..n - 1).rev() {
            strides[axis] = strides[axis + 1] * sizes[axis + 1];
        }
        Ok(Self {
            sizes,
            lengths,
            strides,
        })
    }

    /// `N` points per axis on `[0, L)ⁿ`.
    pub fn cube(n: usize, points: usize, length: f64) -> Result<Self> {
        Self::new(vec![points; n], vec![length; n])
    }

    pub fn dim(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.lengths[axis] / self.sizes[axis] as f64
    }

    pub fn max_spacing(&self) -> f64 {
        (0..self.dim()).map(|a| self.spacing(a)).fold(0.0, f64::max)
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.spacing(a)).product()
    }

    pub fn volume(&self) -> f64 {
        self.lengths.iter().product()
    }

    pub fn site_count(&self) -> usize {
        self.sizes.iter().product()
    }

    pub fn index_along(&self, site: usize, axis: usize) -> usize {
        (site / self.strides[axis]) % self.sizes[axis]
    }

    pub fn position(&self, site: usize) -> Vec<f64> {
        (0..self.dim())
            .map(|a| self.index_along(site, a) as f64 * self.spacing(a))
            .collect()
    }

    /// Site of a multi-index, each entry taken modulo its axis size.
    pub fn site_of(&self, index: &[usize]) -> usize {
        index.iter().zip(&self.sizes).zip(&self.strides).map(|((&i, &n), &s)| (i % n) * s).sum()
    }

    /// Neighbor `offset` steps along `axis`, wrapping periodically.
    pub fn shift(&self, site: usize, axis: usize, offset: isize) -> usize {
        let n = self.sizes[axis] as isize;
        let j = self.index_along(site, axis) as isize;
        let moved = (j + offset).rem_euclid(n);
        (site as isize + (moved - j) * self.strides[axis] as isize) as usize
    }

    /// Same lattice with every axis scaled by `factor` in point count.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        Self::new(
            self.sizes.iter().map(|s| s * factor).collect(),
            self.lengths.clone(),
        )
    }

    pub fn with_points(&self, points: usize) -> Result<Self> {
        Self::new(vec![points; self.dim()], self.lengths.clone())
    }

    pub fn check_same(&self, other: &Self) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}
