//! The G₂ 3-form on `ℝ⁷`, the pointwise deformed Donaldson–Thomas equation,
//! and the trace/volume bounds on its normal-form solutions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exterior::{exp_terms, wedge, KForm};
use crate::pointwise::PointData;

/// Lower bound on `tr(G⁻¹)` over normal-form solutions.
pub const TRACE_BOUND: f64 = 2.5;
/// Lower bound on `(tr(G⁻¹)·v − 7)/(v − 1)` over normal-form solutions with `v > 1`.
pub const RATIO_BOUND: f64 = 13.0 / 7.0;

/// One signed monomial: one-based indices as printed in the usual tables.
pub type SignedMonomial = (i8, [usize; 4]);

pub const PHI_TABLE: [(i8, [usize; 3]); 7] = [
    (1, [1, 2, 3]),
    (1, [1, 4, 5]),
    (1, [1, 6, 7]),
    (1, [2, 4, 6]),
    (-1, [2, 5, 7]),
    (-1, [3, 4, 7]),
    (-1, [3, 5, 6]),
];

pub const STAR_PHI_TABLE: [SignedMonomial; 7] = [
    (1, [4, 5, 6, 7]),
    (1, [2, 3, 6, 7]),
    (1, [2, 3, 4, 5]),
    (1, [1, 3, 5, 7]),
    (-1, [1, 3, 4, 6]),
    (-1, [1, 2, 5, 6]),
    (-1, [1, 2, 4, 7]),
];

pub fn g2_phi() -> KForm {
    let mut phi = KForm::zero(7, 3).expect("valid shape");
    for (s, idx) in PHI_TABLE {
        let zero_based: Vec<usize> = idx.iter().map(|i| i - 1).collect();
        phi.add_term(&zero_based, s as f64).expect("valid indices");
    }
    phi
}

/// `*φ` assembled from a monomial table; the default table is [`STAR_PHI_TABLE`].
pub fn star_phi_from_table(table: &[SignedMonomial]) -> KForm {
    let mut form = KForm::zero(7, 4).expect("valid shape");
    for &(s, idx) in table {
        let zero_based: Vec<usize> = idx.iter().map(|i| i - 1).collect();
        form.add_term(&zero_based, s as f64).expect("valid indices");
    }
    form
}

pub fn g2_star_phi() -> KForm {
    star_phi_from_table(&STAR_PHI_TABLE)
}

fn check_seven_two(beta: &KForm, op: &'static str) -> Result<()> {
    if beta.dim() != 7 {
        return Err(Error::DimensionMismatch {
            left: 7,
            right: beta.dim(),
        });
    }
    if beta.degree() != 2 {
        return Err(Error::Degree {
            op,
            degree: beta.degree(),
            dim: 7,
        });
    }
    Ok(())
}

/// `−β³/6 + β ∧ *φ`; vanishes exactly on pointwise dDT solutions.
pub fn ddt_residual(beta: &KForm) -> Result<KForm> {
    ddt_residual_with(beta, &g2_star_phi())
}

pub fn ddt_residual_with(beta: &KForm, star_phi: &KForm) -> Result<KForm> {
    check_seven_two(beta, "ddt_residual")?;
    let cube = wedge(&wedge(beta, beta)?, beta)?;
    wedge(beta, star_phi)?.sub(&cube.scale(1.0 / 6.0))
}

/// `|e^β| = √(Σ_k |β^k/k!|²)`.
pub fn volume_from_series(beta: &KForm) -> Result<f64> {
    Ok(exp_terms(beta)?.iter().map(KForm::norm_sq).sum::<f64>().sqrt())
}

/// Coefficients of a normal-form solution `c₁e²³ + c₂e⁴⁵ + c₃e⁶⁷`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct G2Solution {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl G2Solution {
    /// Accepts the triple if `c₁ + c₂ + c₃ = c₁c₂c₃` to `1e−10` relative to the cubic scale.
    pub fn new(c1: f64, c2: f64, c3: f64) -> Result<Self> {
        let s = Self { c1, c2, c3 };
        let scale = 1.0 + (c1 * c2 * c3).abs() + c1.abs() + c2.abs() + c3.abs();
        if s.constraint_residual().abs() > 1e-10 * scale {
            return Err(Error::InvalidArgument(format!(
                "({c1}, {c2}, {c3}) violates c1 + c2 + c3 = c1 c2 c3"
            )));
        }
        Ok(s)
    }

    pub fn constraint_residual(&self) -> f64 {
        self.c1 + self.c2 + self.c3 - self.c1 * self.c2 * self.c3
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.c1, self.c2, self.c3]
    }
}

/// The third coefficient `(c₁ + c₂)/(c₁c₂ − 1)`.
pub fn solve_c3(c1: f64, c2: f64) -> Result<G2Solution> {
    let denom = c1 * c2 - 1.0;
    if !(denom.abs() > 1e-12) {
        return Err(Error::SingularConstraint(denom));
    }
    Ok(G2Solution {
        c1,
        c2,
        c3: (c1 + c2) / denom,
    })
}

pub fn normal_form_beta(s: &G2Solution) -> KForm {
    let mut beta = KForm::zero(7, 2).expect("valid shape");
    beta.add_term(&[1, 2], s.c1).expect("valid");
    beta.add_term(&[3, 4], s.c2).expect("valid");
    beta.add_term(&[5, 6], s.c3).expect("valid");
    beta
}

/// Trace, volume and ratio at a normal-form solution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct G2Metrics {
    pub trace: f64,
    pub volume: f64,
    /// `None` when `v ≤ 1 + 1e−9`, where the ratio is `0/0`.
    pub ratio: Option<f64>,
}

pub fn g2_metrics(s: &G2Solution) -> G2Metrics {
    let beta = normal_form_beta(s).to_two_form_point().expect("degree 2");
    let data = PointData::of(&beta);
    let trace = data.trace_g_inverse();
    let volume = data.volume;
    let ratio = (volume > 1.0 + 1e-9).then(|| (trace * volume - 7.0) / (volume - 1.0));
    G2Metrics { trace, volume, ratio }
}

/// Bounds scan over `(c₁, c₂)` uniform in `[−range, range]²`, `c₃` from the constraint.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct G2ScanReport {
    pub samples: usize,
    pub range: f64,
    pub seed: u64,
    pub min_trace: f64,
    pub min_ratio: f64,
    /// Minimizer of the ratio.
    pub argmin_c: [f64; 3],
    pub argmin_trace_c: [f64; 3],
    pub ratio_samples: usize,
    /// Largest `‖−β³/6 + β∧*φ‖ / (1 + ‖β‖³)` over the samples.
    pub max_residual_scaled: f64,
    pub bound_trace: f64,
    pub bound_ratio: f64,
    pub pass: bool,
}

struct SampleEval {
    sol: G2Solution,
    metrics: G2Metrics,
    residual_scaled: f64,
}

fn evaluate(sol: G2Solution, star_phi: &KForm) -> SampleEval {
    let beta = normal_form_beta(&sol);
    let residual = ddt_residual_with(&beta, star_phi).expect("shape checked").norm();
    let bn = beta.norm();
    SampleEval {
        sol,
        metrics: g2_metrics(&sol),
        residual_scaled: residual / (1.0 + bn * bn * bn),
    }
}

/// Draws `(c₁, c₂)` pairs sequentially from one seeded stream, skipping the singular set.
pub fn sample_solutions(sample_count: usize, range: f64, seed: u64) -> Vec<G2Solution> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(sample_count);
    while out.len() < sample_count {
        let c1 = rng.random_range(-range..=range);
        let c2 = rng.random_range(-range..=range);
        if let Ok(s) = solve_c3(c1, c2) {
            out.push(s);
        }
    }
    out
}

pub fn g2_bounds_scan(sample_count: usize, range: f64, seed: u64) -> Result<G2ScanReport> {
    if sample_count == 0 {
        return Err(Error::InvalidArgument("sample_count must be at least 1".into()));
    }
    if !(range > 0.0 && range.is_finite()) {
        return Err(Error::InvalidArgument(format!("range must be positive, got {range}")));
    }
    let sols = sample_solutions(sample_count, range, seed);
    Ok(scan_solutions(&sols, range, seed))
}

/// Scan over an explicit list of solutions.
pub fn scan_solutions(sols: &[G2Solution], range: f64, seed: u64) -> G2ScanReport {
    let star_phi = g2_star_phi();
    let evals: Vec<SampleEval> = sols.par_iter().map(|&s| evaluate(s, &star_phi)).collect();

    let mut min_trace = f64::INFINITY;
    let mut argmin_trace_c = [f64::NAN; 3];
    let mut min_ratio = f64::INFINITY;
    let mut argmin_c = [f64::NAN; 3];
    let mut ratio_samples = 0;
    let mut max_residual_scaled: f64 = 0.0;
    for e in &evals {
        if e.metrics.trace < min_trace {
            min_trace = e.metrics.trace;
            argmin_trace_c = e.sol.as_array();
        }
        if let Some(r) = e.metrics.ratio {
            ratio_samples += 1;
            if r < min_ratio {
                min_ratio = r;
                argmin_c = e.sol.as_array();
            }
        }
        max_residual_scaled = max_residual_scaled.max(e.residual_scaled);
    }
    let pass = min_trace >= TRACE_BOUND - 1e-9
        && (ratio_samples == 0 || min_ratio >= RATIO_BOUND - 1e-9)
        && max_residual_scaled <= 1e-10;
    G2ScanReport {
        samples: sols.len(),
        range,
        seed,
        min_trace,
        min_ratio,
        argmin_c,
        argmin_trace_c,
        ratio_samples,
        max_residual_scaled,
        bound_trace: TRACE_BOUND,
        bound_ratio: RATIO_BOUND,
        pass,
    }
}
