//! `tol(h) = C·h^p` error model for the lattice operators, calibrated on resolved modes.

use std::f64::consts::PI;

use serde::Serialize;

use super::form_field::FormField;
use super::grid::TorusGrid;
use super::ops::{MetricField, Scheme, StencilOrder};
use crate::error::Result;

pub const DEFAULT_MAX_MODE: usize = 3;
pub const DEFAULT_SAFETY: f64 = 4.0;
pub const CALIBRATION_POINTS: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ToleranceModel {
    pub order: u32,
    pub constant: f64,
}

impl ToleranceModel {
    pub fn new(order: StencilOrder, constant: f64) -> Self {
        Self {
            order: order.as_int(),
            constant,
        }
    }

    pub fn tol(&self, h: f64) -> f64 {
        self.constant * h.powi(self.order as i32)
    }

    pub fn for_grid(&self, grid: &TorusGrid) -> f64 {
        self.tol(grid.max_spacing())
    }

    /// Calibration with the default band and safety factor.
    pub fn calibrated(scheme: &Scheme) -> Self {
        calibrate(scheme, DEFAULT_MAX_MODE, DEFAULT_SAFETY)
            .expect("fixed calibration grid is valid")
            .model
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CalibrationReport {
    pub order: u32,
    pub grid_points: usize,
    pub max_mode: usize,
    pub safety: f64,
    /// `max_k |D sin(kx) − k cos(kx)| / h^p`.
    pub first_derivative_constant: f64,
    /// `max_k |Δ sin(kx) − k² sin(kx)| / h^p`.
    pub second_derivative_constant: f64,
    pub model: ToleranceModel,
    /// `2/λ_max` of the linearized flow operator `d*d` on 1-forms over a `2π`-periodic square.
    pub flow_tau_limit: f64,
}

/// Measures the truncation constants on `sin(kx)`, `k ≤ max_mode`, on a `2π` torus.
pub fn calibrate(scheme: &Scheme, max_mode: usize, safety: f64) -> Result<CalibrationReport> {
    let grid = TorusGrid::cube(2, CALIBRATION_POINTS, 2.0 * PI)?;
    let h = grid.max_spacing();
    let p = scheme.order.as_int() as i32;
    let flat = MetricField::flat(&grid);
    let mut c1: f64 = 0.0;
    let mut c2: f64 = 0.0;
    for k in 1..=max_mode.max(1) {
        let kf = k as f64;
        let f = FormField::scalar_fn(&grid, |x| (kf * x[0]).sin())?;
        let df = scheme.ext_d(&f)?;
        let lap = scheme.laplace_beta(&flat, &f)?;
        for site in 0..grid.site_count() {
            let x = grid.position(site)[0];
            c1 = c1.max((df.at(site)[0] - kf * (kf * x).cos()).abs());
            c2 = c2.max((lap.at(site)[0] - kf * kf * (kf * x).sin()).abs());
        }
    }
    c1 /= h.powi(p);
    c2 /= h.powi(p);
    // largest modified wavenumber times h for the centered stencil
    let kh_max: f64 = match scheme.order {
        StencilOrder::Second => 1.0,
        StencilOrder::Fourth => (0..=1000)
            .map(|i| {
                let t = PI * i as f64 / 1000.0;
                (8.0 * t.sin() - (2.0 * t).sin()) / 6.0
            })
            .fold(0.0, f64::max),
    };
    let lambda_max = 2.0 * (kh_max / h).powi(2);
    Ok(CalibrationReport {
        order: scheme.order.as_int(),
        grid_points: CALIBRATION_POINTS,
        max_mode,
        safety,
        first_derivative_constant: c1,
        second_derivative_constant: c2,
        model: ToleranceModel::new(scheme.order, safety * c1.max(c2)),
        flow_tau_limit: 2.0 / lambda_max,
    })
}

/// Least-squares slope of `log e` against `log h`.
pub fn fit_order(hs: &[f64], errs: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = hs
        .iter()
        .zip(errs)
        .filter(|(_, &e)| e > 0.0)
        .map(|(&h, &e)| (h.ln(), e.ln()))
        .collect();
    let m = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}
