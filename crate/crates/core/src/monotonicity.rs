//! Ball integrals of volume densities on flat ℝⁿ, radius-normalized profiles and their audits.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::exterior::{volume_excess, KForm};
use crate::field::{div_stress, fit_order, pairwise_sum, FormField, MetricField, Scheme, ToleranceModel};
use crate::g2::ddt_residual;
use crate::pointwise::{odd_bound_audit, volume_density, PointData, SkewSpectrum, TwoFormPoint};

/// `2^{1/4}`.
pub const DEFAULT_LADDER_RATIO: f64 = 1.189_207_115_002_721;
pub const DEFAULT_RUNGS: usize = 16;
pub const DDT_TOL: f64 = 1e-8;
pub const PROFILE_HEADER: &str = "rho,raw,normalized,theta_term,error_estimate";
const HALTON_BASES: [u8; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

/// Volume of the unit ball in ℝⁿ.
pub fn omega(n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * PI / n as f64 * omega(n - 2),
    }
}

/// `start, start·ratio, …` with `rungs` entries.
pub fn geometric_ladder(start: f64, ratio: f64, rungs: usize) -> Result<Vec<f64>> {
    if !(start > 0.0 && start.is_finite() && ratio > 1.0 && ratio.is_finite()) || rungs == 0 {
        return Err(Error::InvalidArgument(format!(
            "ladder needs start > 0, ratio > 1, rungs ≥ 1 (got {start}, {ratio}, {rungs})"
        )));
    }
    Ok((0..rungs).map(|i| start * ratio.powi(i as i32)).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Symmetry {
    Constant,
    /// The integrand depends only on the distance to the center.
    Radial,
    General,
}

pub type PointFn = Arc<dyn Fn(&[f64]) -> Result<TwoFormPoint> + Send + Sync>;

#[derive(Clone)]
enum Source {
    Constant(TwoFormPoint),
    Analytic(PointFn),
    /// Periodic multilinear interpolation of a lattice 2-form.
    Sampled(FormField),
}

#[derive(Clone)]
pub struct FieldOnBall {
    dim: usize,
    source: Source,
    center: Vec<f64>,
    max_radius: f64,
    symmetry: Symmetry,
}

impl std::fmt::Debug for FieldOnBall {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FieldOnBall")
            .field("dim", &self.dim)
            .field("center", &self.center)
            .field("max_radius", &self.max_radius)
            .field("symmetry", &self.symmetry)
            .finish_non_exhaustive()
    }
}

impl FieldOnBall {
    /// Constant field centered at the origin, unbounded radius.
    pub fn constant(beta: TwoFormPoint) -> Self {
        let dim = beta.dim();
        Self {
            dim,
            source: Source::Constant(beta),
            center: vec![0.0; dim],
            max_radius: f64::INFINITY,
            symmetry: Symmetry::Constant,
        }
    }

    pub fn analytic<F>(dim: usize, center: Vec<f64>, max_radius: f64, symmetry: Symmetry, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> Result<TwoFormPoint> + Send + Sync + 'static,
    {
        if center.len() != dim {
            return Err(Error::DimensionMismatch {
                left: dim,
                right: center.len(),
            });
        }
        check_radius(max_radius)?;
        Ok(Self {
            dim,
            source: Source::Analytic(Arc::new(f)),
            center,
            max_radius,
            symmetry,
        })
    }

    /// Lattice 2-form extended periodically to all of ℝⁿ.
    pub fn sampled(field: FormField, center: Vec<f64>, max_radius: f64) -> Result<Self> {
        if field.degree() != 2 {
            return Err(Error::Degree {
                op: "FieldOnBall::sampled",
                degree: field.degree(),
                dim: field.dim(),
            });
        }
        let dim = field.dim();
        if center.len() != dim {
            return Err(Error::DimensionMismatch {
                left: dim,
                right: center.len(),
            });
        }
        check_radius(max_radius)?;
        Ok(Self {
            dim,
            source: Source::Sampled(field),
            center,
            max_radius,
            symmetry: Symmetry::General,
        })
    }

    pub fn with_center(mut self, center: Vec<f64>) -> Result<Self> {
        if center.len() != self.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim,
                right: center.len(),
            });
        }
        self.center = center;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn max_radius(&self) -> f64 {
        self.max_radius
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    /// The 2-form at an absolute position `x`.
    pub fn eval(&self, x: &[f64]) -> Result<TwoFormPoint> {
        match &self.source {
            Source::Constant(b) => Ok(b.clone()),
            Source::Analytic(f) => f(x),
            Source::Sampled(field) => interpolate(field, x),
        }
    }
}

fn check_radius(r: f64) -> Result<()> {
    if r > 0.0 && !r.is_nan() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("max radius must be positive, got {r}")))
    }
}

fn interpolate(field: &FormField, x: &[f64]) -> Result<TwoFormPoint> {
    let grid = field.grid();
    let n = grid.dim();
    let nc = field.ncomp();
    let mut base = vec![0usize; n];
    let mut frac = vec![0.0; n];
    for a in 0..n {
        let t = x[a] / grid.spacing(a);
        let i0 = t.floor();
        frac[a] = t - i0;
        base[a] = (i0 as i64).rem_euclid(grid.sizes()[a] as i64) as usize;
    }
    let mut comps = vec![0.0; nc];
    let mut idx = vec![0usize; n];
    for corner in 0..(1usize << n) {
        let mut w = 1.0;
        for a in 0..n {
            let up = (corner >> a) & 1 == 1;
            idx[a] = base[a] + up as usize;
            w *= if up { frac[a] } else { 1.0 - frac[a] };
        }
        if w == 0.0 {
            continue;
        }
        let site = grid.site_of(&idx);
        for (c, v) in comps.iter_mut().zip(field.at(site)) {
            *c += w * v;
        }
    }
    KForm::from_coeffs(n, 2, comps)?.to_two_form_point()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightKind {
    /// `tr(G⁻¹)·v`
    Modified,
    /// `v`
    Volume,
    /// `v − 1`
    Normalized,
}

impl WeightKind {
    pub fn density(self, beta: &TwoFormPoint) -> Result<f64> {
        match self {
            WeightKind::Modified => {
                let p = PointData::of(beta);
                Ok(p.trace_g_inverse() * p.volume)
            }
            WeightKind::Volume => Ok(volume_density(beta)),
            WeightKind::Normalized => volume_excess(&KForm::from_two_form_point(beta)),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            WeightKind::Modified => "modified",
            WeightKind::Volume => "volume",
            WeightKind::Normalized => "normalized",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        match s {
            "modified" => Ok(WeightKind::Modified),
            "volume" => Ok(WeightKind::Volume),
            "normalized" => Ok(WeightKind::Normalized),
            _ => Err(Error::InvalidArgument(format!("unknown weight {s:?}"))),
        }
    }
}

/// Function of the offset from the center.
pub type Multiplier = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct Weight {
    pub kind: WeightKind,
    multiplier: Option<(Multiplier, bool)>,
}

impl std::fmt::Debug for Weight {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Weight")
            .field("kind", &self.kind)
            .field("multiplier", &self.multiplier.is_some())
            .finish()
    }
}

impl From<WeightKind> for Weight {
    fn from(kind: WeightKind) -> Self {
        Self::new(kind)
    }
}

impl Weight {
    pub fn new(kind: WeightKind) -> Self {
        Self { kind, multiplier: None }
    }

    /// `radial` declares that `f` depends only on `|y|`.
    pub fn with_multiplier<F>(mut self, f: F, radial: bool) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        self.multiplier = Some((Arc::new(f), radial));
        self
    }

    fn symmetry(&self) -> Symmetry {
        match &self.multiplier {
            None => Symmetry::Constant,
            Some((_, true)) => Symmetry::Radial,
            Some((_, false)) => Symmetry::General,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QuadConfig {
    pub rel_tol: f64,
    /// Accepted points for volume sampling.
    pub samples: usize,
    /// Leading Halton indices skipped.
    pub seed: u64,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            samples: 1 << 14,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BallIntegral {
    pub value: f64,
    pub error_estimate: f64,
    pub evaluations: usize,
    pub budget_exhausted: bool,
}

fn integrand(field: &FieldOnBall, weight: &Weight, offset: &[f64]) -> Result<f64> {
    let x: Vec<f64> = field.center.iter().zip(offset).map(|(c, y)| c + y).collect();
    let beta = field.eval(&x)?;
    if beta.dim() != field.dim {
        return Err(Error::DimensionMismatch {
            left: field.dim,
            right: beta.dim(),
        });
    }
    let d = weight.kind.density(&beta)?;
    let f = match &weight.multiplier {
        None => 1.0,
        Some((m, _)) => {
            let f = m(offset);
            if !(f >= 0.0 && f.is_finite()) {
                return Err(Error::OutOfDomain(format!("multiplier {f} at offset {offset:?}")));
            }
            f
        }
    };
    Ok(f * d)
}

/// `∫_{B_ρ(p)} w vol` on flat ℝⁿ.
pub fn ball_integral(field: &FieldOnBall, weight: &Weight, rho: f64, quad: &QuadConfig) -> Result<BallIntegral> {
    if !(rho > 0.0 && rho <= field.max_radius) {
        return Err(Error::OutOfDomain(format!(
            "radius {rho} outside (0, {}]",
            field.max_radius
        )));
    }
    let n = field.dim;
    let vol = omega(n) * rho.powi(n as i32);
    match field.symmetry.max(weight.symmetry()) {
        Symmetry::Constant => {
            let w = integrand(field, weight, &vec![0.0; n])?;
            Ok(BallIntegral {
                value: w * vol,
                error_estimate: 0.0,
                evaluations: 1,
                budget_exhausted: false,
            })
        }
        Symmetry::Radial => shell_integral(field, weight, rho, quad),
        Symmetry::General => sampled_integral(field, weight, rho, quad),
    }
}

fn axis_point(n: usize, r: f64) -> Vec<f64> {
    let mut y = vec![0.0; n];
    y[0] = r;
    y
}

fn shell_integral(field: &FieldOnBall, weight: &Weight, rho: f64, quad: &QuadConfig) -> Result<BallIntegral> {
    let n = field.dim;
    let area = n as f64 * omega(n);
    let scale = integrand(field, weight, &vec![0.0; n])?.abs() + integrand(field, weight, &axis_point(n, rho))?.abs();
    let target = (quad.rel_tol * scale * omega(n) * rho.powi(n as i32)).max(f64::MIN_POSITIVE);
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let out = quadrature::double_exponential::integrate(
        |r| match integrand(field, weight, &axis_point(n, r)) {
            Ok(w) => w * area * r.powi(n as i32 - 1),
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                0.0
            }
        },
        0.0,
        rho,
        target,
    );
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(BallIntegral {
        value: out.integral,
        error_estimate: out.error_estimate,
        evaluations: out.num_function_evaluations as usize + 2,
        budget_exhausted: out.error_estimate > target,
    })
}

/// Halton points of the unit ball by rejection from `[−1, 1]ⁿ`.
pub fn halton_ball_points(n: usize, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if n == 0 || n > HALTON_BASES.len() {
        return Err(Error::Dimension {
            dim: n,
            min: 1,
            max: HALTON_BASES.len(),
        });
    }
    let mut pts = Vec::with_capacity(count);
    let mut index = seed as usize + 1;
    while pts.len() < count {
        let u: Vec<f64> = HALTON_BASES[..n]
            .iter()
            .map(|&b| 2.0 * halton::number(b, index) - 1.0)
            .collect();
        index += 1;
        if u.iter().map(|x| x * x).sum::<f64>() <= 1.0 {
            pts.push(u);
        }
    }
    Ok(pts)
}

fn sampled_integral(field: &FieldOnBall, weight: &Weight, rho: f64, quad: &QuadConfig) -> Result<BallIntegral> {
    let n = field.dim;
    let count = quad.samples.max(2);
    let pts = halton_ball_points(n, count, quad.seed)?;
    let values = pts
        .par_iter()
        .map(|u| {
            let y: Vec<f64> = u.iter().map(|c| c * rho).collect();
            integrand(field, weight, &y)
        })
        .collect::<Result<Vec<f64>>>()?;
    let vol = omega(n) * rho.powi(n as i32);
    let half = count / 2;
    let mean = pairwise_sum(&values) / count as f64;
    let m1 = pairwise_sum(&values[..half]) / half as f64;
    let m2 = pairwise_sum(&values[half..]) / (count - half) as f64;
    Ok(BallIntegral {
        value: vol * mean,
        error_estimate: vol * (m1 - m2).abs() / 2.0,
        evaluations: count,
        budget_exhausted: false,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RadialProfile {
    pub dim: usize,
    pub weight: WeightKind,
    pub kappa: f64,
    pub a: f64,
    pub radii: Vec<f64>,
    pub raw: Vec<f64>,
    pub normalized: Vec<f64>,
    pub theta_term: Vec<f64>,
    /// Error estimate of `normalized`.
    pub error_estimate: Vec<f64>,
    pub budget_exhausted: bool,
}

fn check_radii(radii: &[f64]) -> Result<()> {
    if radii.is_empty() {
        return Err(Error::InvalidArgument("empty radius list".into()));
    }
    if !radii.iter().all(|r| *r > 0.0 && r.is_finite()) || radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("radii must be positive and strictly increasing".into()));
    }
    Ok(())
}

/// `M(ρ) = e^{aρ²}ρ^{−κ} ∫_{B_ρ} w vol`, plus `2aΘ(ρ)` for the normalized weight.
pub fn profile(
    field: &FieldOnBall,
    weight: &Weight,
    kappa: f64,
    a: f64,
    radii: &[f64],
    quad: &QuadConfig,
) -> Result<RadialProfile> {
    check_radii(radii)?;
    if !kappa.is_finite() {
        return Err(Error::NonFinite("kappa"));
    }
    if !(a >= 0.0 && a.is_finite()) {
        return Err(Error::InvalidArgument(format!("a must be nonnegative, got {a}")));
    }
    let ints = radii
        .par_iter()
        .map(|&r| ball_integral(field, weight, r, quad))
        .collect::<Result<Vec<_>>>()?;
    if ints.iter().any(|i| !i.value.is_finite()) {
        return Err(Error::NonFinite("ball integral"));
    }
    let n = field.dim;
    let mut normalized = Vec::with_capacity(radii.len());
    let mut theta_term = Vec::with_capacity(radii.len());
    let mut error_estimate = Vec::with_capacity(radii.len());
    for (&r, i) in radii.iter().zip(&ints) {
        let factor = (a * r * r).exp() * r.powf(-kappa);
        let t = if weight.kind == WeightKind::Normalized && a > 0.0 {
            2.0 * a * theta_kappa(a, n, kappa, r)?
        } else {
            0.0
        };
        normalized.push(factor * i.value + t);
        theta_term.push(t);
        error_estimate.push(factor * i.error_estimate);
    }
    Ok(RadialProfile {
        dim: n,
        weight: weight.kind,
        kappa,
        a,
        radii: radii.to_vec(),
        raw: ints.iter().map(|i| i.value).collect(),
        normalized,
        theta_term,
        error_estimate,
        budget_exhausted: ints.iter().any(|i| i.budget_exhausted),
    })
}

pub fn write_profile_csv<W: Write>(p: &RadialProfile, mut w: W) -> std::io::Result<()> {
    writeln!(w, "{PROFILE_HEADER}")?;
    for i in 0..p.radii.len() {
        writeln!(
            w,
            "{:e},{:e},{:e},{:e},{:e}",
            p.radii[i], p.raw[i], p.normalized[i], p.theta_term[i], p.error_estimate[i]
        )?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonotoneReport {
    pub check: String,
    pub params: serde_json::Value,
    pub pass: bool,
    /// Largest `M(ρ_i) − M(ρ_{i+1})`, zero when nothing decreases.
    pub worst_drop: f64,
    /// Index `i` of the worst drop, or of the first violation when failing.
    pub location: Option<usize>,
    pub tolerance: f64,
}

/// Passes iff `M_{i+1} − M_i ≥ −tol·(1 + |M_i|) − e_i − e_{i+1}`.
pub fn check_sequence(values: &[f64], errors: &[f64], tol: f64) -> Result<MonotoneReport> {
    if values.len() < 2 {
        return Err(Error::InvalidArgument("monotonicity needs at least two values".into()));
    }
    if errors.len() != values.len() {
        return Err(Error::DimensionMismatch {
            left: values.len(),
            right: errors.len(),
        });
    }
    let mut worst_drop = 0.0;
    let mut drop_at = None;
    let mut first_violation = None;
    for i in 0..values.len() - 1 {
        let drop = values[i] - values[i + 1];
        let allowed = tol * (1.0 + values[i].abs()) + errors[i] + errors[i + 1];
        if drop > worst_drop {
            worst_drop = drop;
            drop_at = Some(i);
        }
        if !(drop <= allowed) && first_violation.is_none() {
            first_violation = Some(i);
        }
    }
    Ok(MonotoneReport {
        check: "monotone".into(),
        params: serde_json::Value::Null,
        pass: first_violation.is_none(),
        worst_drop,
        location: first_violation.or(drop_at),
        tolerance: tol,
    })
}

pub fn check_monotone(p: &RadialProfile, tol: f64) -> Result<MonotoneReport> {
    let mut r = check_sequence(&p.normalized, &p.error_estimate, tol)?;
    r.params = json!({
        "dim": p.dim,
        "weight": p.weight.name(),
        "kappa": p.kappa,
        "a": p.a,
        "rho_min": p.radii.first(),
        "rho_max": p.radii.last(),
        "rungs": p.radii.len(),
    });
    Ok(r)
}

fn check_theta_args(a: f64, tau: f64) -> Result<()> {
    if !(a >= 0.0 && a.is_finite()) {
        return Err(Error::InvalidArgument(format!("a must be nonnegative, got {a}")));
    }
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::InvalidArgument(format!("tau must be nonnegative, got {tau}")));
    }
    Ok(())
}

/// `∫₀^τ e^{aζ²} θ(ζ) ζ^{1−κ} dζ` for an arbitrary `θ`.
pub fn theta_with<F: Fn(f64) -> f64>(a: f64, kappa: f64, tau: f64, theta: F) -> Result<f64> {
    check_theta_args(a, tau)?;
    if tau == 0.0 {
        return Ok(0.0);
    }
    let f = |z: f64| (a * z * z).exp() * theta(z) * z.powf(1.0 - kappa);
    let scale = (f(tau) * tau).abs().max(f64::MIN_POSITIVE);
    let out = quadrature::double_exponential::integrate(f, 0.0, tau, 1e-15 * scale);
    if !out.integral.is_finite() {
        return Err(Error::NonFinite("theta"));
    }
    Ok(out.integral)
}

/// `ω_n ∫₀^τ e^{aζ²} ζ^{n+1−κ} dζ`.
pub fn theta_kappa(a: f64, n: usize, kappa: f64, tau: f64) -> Result<f64> {
    let w = omega(n);
    theta_with(a, kappa, tau, |z| w * z.powi(n as i32))
}

/// `Θ(τ) = ω_n ∫₀^τ e^{aζ²} ζⁿ dζ`.
pub fn theta(a: f64, n: usize, tau: f64) -> Result<f64> {
    theta_kappa(a, n, 1.0, tau)
}

/// Closed form of `theta` for odd `n ≤ 7`.
pub fn theta_closed(a: f64, n: usize, tau: f64) -> Result<f64> {
    check_theta_args(a, tau)?;
    if !matches!(n, 1 | 3 | 5 | 7) {
        return Err(Error::InvalidArgument(format!("closed-form theta needs n in {{1,3,5,7}}, got {n}")));
    }
    let m = (n - 1) / 2;
    let w = omega(n);
    if a == 0.0 {
        return Ok(w * tau.powi(n as i32 + 1) / (n + 1) as f64);
    }
    let x = a * tau * tau;
    let factorial = |k: usize| (1..=k).map(|i| i as f64).product::<f64>();
    // 1 − e^x Σ_{k≤m} (−x)^k/k! = e^x Σ_{k>m} (−x)^k/k!
    let bracket = if x <= 2.0 {
        let mut term = (-x).powi(m as i32 + 1) / factorial(m + 1);
        let mut sum: f64 = 0.0;
        let mut k = m + 1;
        while term.abs() > 1e-18 * sum.abs() && k < m + 80 {
            sum += term;
            k += 1;
            term *= -x / k as f64;
        }
        x.exp() * sum
    } else {
        let partial: f64 = (0..=m).map(|k| (-x).powi(k as i32) / factorial(k)).sum();
        1.0 - x.exp() * partial
    };
    Ok(w * factorial(m) / (2.0 * (-a).powi(m as i32 + 1)) * bracket)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FlatBallReport {
    pub dim: usize,
    pub tau: f64,
    /// `|∫_{B_τ} vol − ω_n τⁿ| / ω_n τⁿ`
    pub volume_residual: f64,
    /// `|n ∫_{B_τ} vol − τ ∂_τ ∫_{B_τ} vol| / n ∫_{B_τ} vol`
    pub scaling_residual: f64,
}

/// The flat-space ball identities `∫_{B_τ} vol = ω_n τⁿ` and `n∫ = τ∂_τ∫`, by shell quadrature.
pub fn flat_ball_identities(n: usize, tau: f64, quad: &QuadConfig) -> Result<FlatBallReport> {
    let field = FieldOnBall::analytic(n, vec![0.0; n], f64::INFINITY, Symmetry::Radial, move |_| {
        TwoFormPoint::zero(n)
    })?;
    let weight = Weight::new(WeightKind::Volume);
    let i = ball_integral(&field, &weight, tau, quad)?.value;
    let exact = omega(n) * tau.powi(n as i32);
    // ∂_τ ∫_{B_τ} vol is the area of the bounding sphere
    let boundary = n as f64 * omega(n) * tau.powi(n as i32 - 1) * integrand(&field, &weight, &axis_point(n, tau))?;
    Ok(FlatBallReport {
        dim: n,
        tau,
        volume_residual: (i - exact).abs() / exact,
        scaling_residual: (n as f64 * i - tau * boundary).abs() / (n as f64 * i),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum G2Variant {
    Volume,
    Normalized,
}

impl G2Variant {
    pub fn kappa(self) -> f64 {
        match self {
            G2Variant::Volume => 2.5,
            G2Variant::Normalized => 13.0 / 7.0,
        }
    }

    pub fn weight(self) -> WeightKind {
        match self {
            G2Variant::Volume => WeightKind::Volume,
            G2Variant::Normalized => WeightKind::Normalized,
        }
    }
}

/// Largest `|ddt_residual|` over the center, the axis points at the outer radius and a Halton sample.
pub fn ddt_residual_on_ball(field: &FieldOnBall, rho: f64) -> Result<f64> {
    let n = field.dim;
    let mut offsets = vec![vec![0.0; n]];
    if field.symmetry != Symmetry::Constant {
        for i in 0..n {
            for s in [-1.0, 1.0] {
                let mut y = vec![0.0; n];
                y[i] = s * rho;
                offsets.push(y);
            }
        }
        offsets.extend(
            halton_ball_points(n, 64, 0)?
                .into_iter()
                .map(|u| u.into_iter().map(|c| c * rho).collect()),
        );
    }
    let mut worst: f64 = 0.0;
    for y in offsets {
        let x: Vec<f64> = field.center.iter().zip(&y).map(|(c, d)| c + d).collect();
        let beta = KForm::from_two_form_point(&field.eval(&x)?);
        worst = worst.max(ddt_residual(&beta)?.max_abs());
    }
    Ok(worst)
}

/// Flat-case profile with exponent `5/2` (volume) or `13/7` (normalized) for a dDT field on ℝ⁷.
pub fn g2_profile(field: &FieldOnBall, variant: G2Variant, radii: &[f64], quad: &QuadConfig) -> Result<RadialProfile> {
    if field.dim != 7 {
        return Err(Error::Dimension {
            dim: field.dim,
            min: 7,
            max: 7,
        });
    }
    check_radii(radii)?;
    let residual = ddt_residual_on_ball(field, *radii.last().expect("nonempty"))?;
    if residual > DDT_TOL {
        return Err(Error::NotDdt { residual });
    }
    profile(field, &Weight::new(variant.weight()), variant.kappa(), 0.0, radii, quad)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VanishingReport {
    pub check: String,
    pub dim: usize,
    /// Growth exponent below which the hypothesis `∫(v − 1) = o(r^e)` is taken to hold.
    pub threshold: f64,
    pub radii: Vec<f64>,
    pub integrals: Vec<f64>,
    /// Fitted slope of `log I` against `log r`; absent when `I ≡ 0`.
    pub exponent: Option<f64>,
    pub field_is_zero: bool,
    pub hypothesis_could_hold: bool,
    /// Hypothesis holding implies the field vanishes.
    pub consistent: bool,
    pub pass: bool,
}

/// Growth of `∫_{B_r}(v − 1) vol` over a radius ladder against the vanishing threshold.
pub fn vanishing_audit(field: &FieldOnBall, threshold: f64, radii: &[f64], quad: &QuadConfig) -> Result<VanishingReport> {
    check_radii(radii)?;
    let weight = Weight::new(WeightKind::Normalized);
    let integrals = radii
        .par_iter()
        .map(|&r| ball_integral(field, &weight, r, quad).map(|i| i.value))
        .collect::<Result<Vec<f64>>>()?;
    let field_is_zero = integrals.iter().all(|&i| i == 0.0);
    let exponent = if field_is_zero || radii.len() < 2 {
        None
    } else {
        Some(fit_order(radii, &integrals))
    };
    let hypothesis_could_hold = field_is_zero || exponent.is_some_and(|e| e < threshold);
    let consistent = !hypothesis_could_hold || field_is_zero;
    Ok(VanishingReport {
        check: "vanishing".into(),
        dim: field.dim,
        threshold,
        radii: radii.to_vec(),
        integrals,
        exponent,
        field_is_zero,
        hypothesis_could_hold,
        consistent,
        pass: consistent,
    })
}

pub const PARALLEL_CONSTANT: f64 = 10.0;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Dim2Report {
    pub check: String,
    pub grid_points: Vec<usize>,
    pub delta_beta_beta: f64,
    pub d_beta: f64,
    pub div_s: f64,
    /// `‖δ_ββ‖ / ‖Dβ‖`
    pub ratio: Option<f64>,
    pub tolerance: f64,
    pub constant: f64,
    pub parallel_by_delta: bool,
    pub parallel_by_d: bool,
    pub pass: bool,
}

/// Sup norms of `δ_ββ`, `Dβ` and `div S` for a 2-form on a 2-torus, and whether they vanish together.
pub fn dim2_parallel_check(scheme: &Scheme, beta: &FormField, model: &ToleranceModel) -> Result<Dim2Report> {
    if beta.dim() != 2 || beta.degree() != 2 {
        return Err(Error::Degree {
            op: "dim2_parallel_check",
            degree: beta.degree(),
            dim: beta.dim(),
        });
    }
    let metric = MetricField::of(beta)?;
    let delta = scheme.delta_beta(&metric, beta)?.max_abs();
    let d = scheme.gradient(beta).iter().map(FormField::max_abs).fold(0.0, f64::max);
    let div_s = div_stress(scheme, beta)?.max_abs();
    let tol = model.for_grid(beta.grid()) * beta.max_abs().max(1.0);
    let c = PARALLEL_CONSTANT;
    let parallel_by_delta = delta <= tol;
    let parallel_by_d = d <= c * tol;
    let ratio = (d > 0.0).then(|| delta / d);
    let in_band = parallel_by_d || ratio.is_some_and(|r| (1.0 / c..=c).contains(&r));
    Ok(Dim2Report {
        check: "dim2_parallel".into(),
        grid_points: beta.grid().sizes().to_vec(),
        delta_beta_beta: delta,
        d_beta: d,
        div_s,
        ratio,
        tolerance: tol,
        constant: c,
        parallel_by_delta,
        parallel_by_d,
        pass: parallel_by_delta == parallel_by_d && in_band,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OddBoundRegion {
    pub check: String,
    pub m: usize,
    pub samples: usize,
    pub seed: u64,
    pub mu_max: f64,
    pub failures: usize,
    /// Smallest `tr(G⁻¹) − (1 + 2m/v)` seen.
    pub min_margin: f64,
    pub worst_mus: Vec<f64>,
    /// Range of the largest `μ_j` over failing samples.
    pub failure_mu_range: Option<(f64, f64)>,
    /// The bound is asserted only for `m ≥ 2`.
    pub asserted: bool,
    pub pass: bool,
}

/// Samples `μ_j` uniformly in `(1, mu_max]` and tallies the odd-dimensional trace bound.
pub fn odd_bound_regions(m: usize, samples: usize, seed: u64, mu_max: f64) -> Result<OddBoundRegion> {
    let n = 2 * m + 1;
    if m == 0 || n > crate::pointwise::MAX_DIM {
        return Err(Error::Dimension {
            dim: n,
            min: 3,
            max: crate::pointwise::MAX_DIM,
        });
    }
    if !(mu_max > 1.0 && mu_max.is_finite()) {
        return Err(Error::InvalidArgument(format!("mu_max must exceed 1, got {mu_max}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<Vec<f64>> = (0..samples)
        .map(|_| {
            (0..m)
                .map(|_| mu_max - (mu_max - 1.0) * rng.random::<f64>())
                .collect()
        })
        .collect();
    let audits = draws
        .par_iter()
        .map(|mus| odd_bound_audit(&SkewSpectrum::from_mus(n, mus)?))
        .collect::<Result<Vec<_>>>()?;
    let mut failures = 0;
    let mut min_margin = f64::INFINITY;
    let mut worst_mus = Vec::new();
    let mut range: Option<(f64, f64)> = None;
    for (mus, a) in draws.iter().zip(&audits) {
        let margin = a.lhs - a.rhs;
        if margin < min_margin {
            min_margin = margin;
            worst_mus = mus.clone();
        }
        if !a.holds {
            failures += 1;
            let top = mus.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            range = Some(match range {
                None => (top, top),
                Some((lo, hi)) => (lo.min(top), hi.max(top)),
            });
        }
    }
    let asserted = m >= 2;
    Ok(OddBoundRegion {
        check: "odd_trace_bound".into(),
        m,
        samples,
        seed,
        mu_max,
        failures,
        min_margin,
        worst_mus,
        failure_mu_range: range,
        asserted,
        pass: !asserted || failures == 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::TorusGrid;
    use crate::g2::{normal_form_beta, G2Solution};
    use approx::assert_relative_eq;

    fn e12(n: usize) -> TwoFormPoint {
        TwoFormPoint::from_terms(n, &[(0, 1, 1.0)]).unwrap()
    }

    fn q() -> QuadConfig {
        QuadConfig::default()
    }

    #[test]
    fn unit_ball_volumes() {
        assert_relative_eq!(omega(1), 2.0);
        assert_relative_eq!(omega(2), PI);
        assert_relative_eq!(omega(3), 4.0 * PI / 3.0);
        assert_relative_eq!(omega(7), 16.0 * PI.powi(3) / 105.0, max_relative = 1e-15);
        let one = FieldOnBall::constant(TwoFormPoint::zero(3).unwrap());
        let i = ball_integral(&one, &WeightKind::Volume.into(), 1.0, &q()).unwrap();
        assert_relative_eq!(i.value, 4.0 * PI / 3.0, max_relative = 1e-15);
    }

    #[test]
    fn constant_field_integrals() {
        let f = FieldOnBall::constant(e12(3));
        let rho: f64 = 1.7;
        let ball = 4.0 * PI / 3.0 * rho.powi(3);
        let v = ball_integral(&f, &WeightKind::Volume.into(), rho, &q()).unwrap().value;
        assert_relative_eq!(v, 2f64.sqrt() * ball, max_relative = 1e-14);
        let m = ball_integral(&f, &WeightKind::Modified.into(), rho, &q()).unwrap().value;
        assert_relative_eq!(m, 2.0 * 2f64.sqrt() * ball, max_relative = 1e-14);
    }

    #[test]
    fn three_quadrature_routes_agree_on_a_constant_field() {
        let beta = e12(3);
        let b2 = beta.clone();
        let radial = FieldOnBall::analytic(3, vec![0.0; 3], 10.0, Symmetry::Radial, move |_| Ok(b2.clone())).unwrap();
        let b3 = beta.clone();
        let general = FieldOnBall::analytic(3, vec![0.0; 3], 10.0, Symmetry::General, move |_| Ok(b3.clone())).unwrap();
        let w = Weight::new(WeightKind::Volume);
        let exact = 2f64.sqrt() * 4.0 * PI / 3.0 * 8.0;
        let r = ball_integral(&radial, &w, 2.0, &q()).unwrap();
        assert_relative_eq!(r.value, exact, max_relative = 1e-12);
        assert!(!r.budget_exhausted);
        let g = ball_integral(&general, &w, 2.0, &q()).unwrap();
        assert_relative_eq!(g.value, exact, max_relative = 1e-12);
    }

    #[test]
    fn halton_estimate_of_a_non_radial_integrand() {
        let zero = FieldOnBall::constant(TwoFormPoint::zero(2).unwrap());
        // ∫_{B_1} (1 + y₁) = π
        let w = Weight::new(WeightKind::Volume).with_multiplier(|y| 1.0 + y[0], false);
        let i = ball_integral(&zero, &w, 1.0, &q()).unwrap();
        assert!((i.value - PI).abs() < 1e-3, "{i:?}");
        assert!((i.value - PI).abs() < 10.0 * i.error_estimate.max(1e-4));
        let bad = Weight::new(WeightKind::Volume).with_multiplier(|y| y[0], false);
        assert!(matches!(ball_integral(&zero, &bad, 1.0, &q()), Err(Error::OutOfDomain(_))));
    }

    #[test]
    fn radial_multiplier_uses_shells() {
        let zero = FieldOnBall::constant(TwoFormPoint::zero(3).unwrap());
        // ∫_{B_1} |y|² = 4π/5
        let w = Weight::new(WeightKind::Volume).with_multiplier(|y| y.iter().map(|c| c * c).sum(), true);
        let i = ball_integral(&zero, &w, 1.0, &q()).unwrap();
        assert_relative_eq!(i.value, 4.0 * PI / 5.0, max_relative = 1e-12);
    }

    #[test]
    fn radius_out_of_range_is_rejected() {
        let f = FieldOnBall::analytic(2, vec![0.0; 2], 1.0, Symmetry::General, |_| TwoFormPoint::zero(2)).unwrap();
        let w = Weight::new(WeightKind::Volume);
        assert!(ball_integral(&f, &w, 1.5, &q()).is_err());
        assert!(ball_integral(&f, &w, 0.0, &q()).is_err());
    }

    #[test]
    fn profile_examples() {
        let radii = geometric_ladder(0.5, DEFAULT_LADDER_RATIO, 20).unwrap();
        let one = FieldOnBall::constant(TwoFormPoint::zero(3).unwrap());
        let p = profile(&one, &WeightKind::Volume.into(), 1.0, 0.0, &radii, &q()).unwrap();
        for (r, m) in radii.iter().zip(&p.normalized) {
            assert_relative_eq!(*m, 4.0 * PI / 3.0 * r * r, max_relative = 1e-14);
        }
        assert!(check_monotone(&p, 1e-9).unwrap().pass);

        let f = FieldOnBall::constant(e12(3));
        let p = profile(&f, &WeightKind::Volume.into(), 1.0, 0.0, &radii, &q()).unwrap();
        assert_relative_eq!(p.normalized[3], 2f64.sqrt() * 4.0 * PI / 3.0 * radii[3].powi(2), max_relative = 1e-14);
        let flat = profile(&f, &WeightKind::Volume.into(), 3.0, 0.0, &radii, &q()).unwrap();
        let first = flat.normalized[0];
        assert!(flat.normalized.iter().all(|m| (m - first).abs() <= 1e-12 * first));
        assert!(check_monotone(&flat, 1e-9).unwrap().pass);
    }

    #[test]
    fn constant_fields_are_monotone_for_every_weight() {
        let radii = geometric_ladder(0.1, DEFAULT_LADDER_RATIO, DEFAULT_RUNGS).unwrap();
        for n in [3usize, 5, 7] {
            let beta = TwoFormPoint::from_blocks(n, &[0.7, 2.0, 0.3][..n / 2]).unwrap();
            let f = FieldOnBall::constant(beta);
            for kind in [WeightKind::Modified, WeightKind::Volume, WeightKind::Normalized] {
                let p = profile(&f, &kind.into(), 1.0, 0.0, &radii, &q()).unwrap();
                assert!(check_monotone(&p, 1e-9).unwrap().pass, "n={n} {kind:?}");
            }
        }
    }

    #[test]
    fn decreasing_sequence_fails_at_its_location() {
        let vals = [1.0f64, 2.0, 3.0, 2.5, 4.0];
        let r = check_sequence(&vals, &[0.0; 5], 1e-9).unwrap();
        assert!(!r.pass);
        assert_eq!(r.location, Some(2));
        assert_relative_eq!(r.worst_drop, 0.5);
        // a drop inside the error bars is tolerated
        let r = check_sequence(&vals, &[0.3; 5], 1e-9).unwrap();
        assert!(r.pass);
        assert!(check_sequence(&[1.0], &[0.0], 1e-9).is_err());
    }

    #[test]
    fn theta_examples() {
        assert_relative_eq!(theta(0.0, 3, 1.0).unwrap(), PI / 3.0, max_relative = 1e-13);
        assert_relative_eq!(theta_closed(0.0, 3, 1.0).unwrap(), PI / 3.0, max_relative = 1e-15);
        assert_relative_eq!(theta_closed(1.0, 3, 1.0).unwrap(), 2.0 * PI / 3.0, max_relative = 1e-14);
        assert_relative_eq!(theta(1.0, 3, 1.0).unwrap(), 2.0 * PI / 3.0, max_relative = 1e-12);
        let e = std::f64::consts::E;
        let seven = 8.0 * PI.powi(3) / 105.0 * (6.0 - 2.0 * e);
        assert_relative_eq!(theta_closed(1.0, 7, 1.0).unwrap(), seven, max_relative = 1e-13);
        assert_relative_eq!(theta(1.0, 7, 1.0).unwrap(), seven, max_relative = 1e-11);
        assert!(theta_closed(1.0, 4, 1.0).is_err());
        assert!(theta(-1.0, 3, 1.0).is_err());
    }

    #[test]
    fn theta_closed_forms_match_quadrature() {
        for n in [1usize, 3, 5, 7] {
            for &a in &[1e-9, 1e-3, 0.2, 1.0, 3.0] {
                for &tau in &[0.1, 0.5, 1.0, 2.0, 2.58] {
                    if a * tau * tau > 20.0 {
                        continue;
                    }
                    let c = theta_closed(a, n, tau).unwrap();
                    let qv = theta(a, n, tau).unwrap();
                    assert!((c - qv).abs() <= 1e-10 * qv.abs(), "n={n} a={a} tau={tau}: {c} vs {qv}");
                }
            }
            let t = 1.3f64;
            assert_relative_eq!(
                theta_closed(1e-12, n, t).unwrap(),
                omega(n) * t.powi(n as i32 + 1) / (n + 1) as f64,
                max_relative = 1e-10
            );
        }
    }

    #[test]
    fn theta_with_generic_function() {
        // θ = 1, κ = 1, a = 0 gives τ
        assert_relative_eq!(theta_with(0.0, 1.0, 2.5, |_| 1.0).unwrap(), 2.5, max_relative = 1e-12);
        assert_relative_eq!(
            theta_kappa(0.0, 7, 13.0 / 7.0, 1.0).unwrap(),
            omega(7) * 7.0 / 50.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn flat_ball_identities_hold() {
        for n in 2..=7 {
            let r = flat_ball_identities(n, 1.7, &q()).unwrap();
            assert!(r.volume_residual < 1e-9 && r.scaling_residual < 1e-9, "{r:?}");
        }
    }

    #[test]
    fn g2_profiles() {
        let beta = normal_form_beta(&G2Solution::new(1.0, 2.0, 3.0).unwrap());
        let b = beta.to_two_form_point().unwrap();
        assert_relative_eq!(volume_density(&b), 10.0, max_relative = 1e-12);
        let f = FieldOnBall::constant(b);
        let radii = geometric_ladder(0.5, DEFAULT_LADDER_RATIO, DEFAULT_RUNGS).unwrap();
        let p = g2_profile(&f, G2Variant::Volume, &radii, &q()).unwrap();
        for (r, m) in radii.iter().zip(&p.normalized) {
            assert_relative_eq!(*m, 10.0 * omega(7) * r.powf(4.5), max_relative = 1e-12);
        }
        assert!(check_monotone(&p, 1e-9).unwrap().pass);
        let p = g2_profile(&f, G2Variant::Normalized, &radii, &q()).unwrap();
        assert_relative_eq!(p.normalized[5] / p.normalized[0], (radii[5] / radii[0]).powf(36.0 / 7.0), max_relative = 1e-12);
        assert!(check_monotone(&p, 1e-9).unwrap().pass);

        let zero = FieldOnBall::constant(TwoFormPoint::zero(7).unwrap());
        let p = g2_profile(&zero, G2Variant::Normalized, &radii, &q()).unwrap();
        assert!(p.normalized.iter().all(|m| *m == 0.0));

        let not_ddt = FieldOnBall::constant(TwoFormPoint::from_blocks(7, &[1.0, 1.0, 1.0]).unwrap());
        assert!(matches!(g2_profile(&not_ddt, G2Variant::Volume, &radii, &q()), Err(Error::NotDdt { .. })));
        assert!(g2_profile(&FieldOnBall::constant(e12(3)), G2Variant::Volume, &radii, &q()).is_err());
    }

    #[test]
    fn vanishing_audits() {
        let radii = geometric_ladder(1.0, 2.0, 11).unwrap();
        let r = vanishing_audit(&FieldOnBall::constant(e12(3)), 1.0, &radii, &q()).unwrap();
        assert!((r.exponent.unwrap() - 3.0).abs() < 1e-9);
        assert!(!r.hypothesis_could_hold && r.consistent);
        let r = vanishing_audit(&FieldOnBall::constant(TwoFormPoint::zero(3).unwrap()), 1.0, &radii, &q()).unwrap();
        assert!(r.field_is_zero && r.hypothesis_could_hold && r.consistent);
        let beta = normal_form_beta(&G2Solution::new(1.0, 2.0, 3.0).unwrap()).to_two_form_point().unwrap();
        let r = vanishing_audit(&FieldOnBall::constant(beta), 13.0 / 7.0, &radii, &q()).unwrap();
        assert!((r.exponent.unwrap() - 7.0).abs() < 1e-9 && r.consistent);
    }

    #[test]
    fn sampled_fields_interpolate_periodically() {
        let g = TorusGrid::cube(2, 16, 2.0 * PI).unwrap();
        let field = FormField::from_fn(&g, 2, |x| vec![0.4 + 0.1 * x[0].sin()]).unwrap();
        let s = FieldOnBall::sampled(field, vec![0.0; 2], 100.0).unwrap();
        let at = |x: f64, y: f64| s.eval(&[x, y]).unwrap().get(0, 1);
        assert_relative_eq!(at(0.0, 0.0), 0.4, max_relative = 1e-15);
        assert_relative_eq!(at(2.0 * PI + 0.3, 0.1), at(0.3, 0.1), max_relative = 1e-12);
        assert_relative_eq!(at(-0.2, 5.0), at(2.0 * PI - 0.2, 5.0), max_relative = 1e-12);
        assert!((at(1.0, 0.0) - (0.4 + 0.1 * 1f64.sin())).abs() < 2e-3);
        let p = profile(
            &s,
            &WeightKind::Modified.into(),
            1.0,
            0.0,
            &geometric_ladder(0.5, DEFAULT_LADDER_RATIO, 8).unwrap(),
            &QuadConfig {
                samples: 4096,
                ..q()
            },
        )
        .unwrap();
        assert!(check_monotone(&p, 1e-9).unwrap().pass);
    }

    #[test]
    fn dim2_examples() {
        let scheme = Scheme::fourth();
        let model = ToleranceModel::calibrated(&scheme);
        let g = TorusGrid::cube(2, 64, 2.0 * PI).unwrap();
        let c = FormField::from_fn(&g, 2, |_| vec![1.3]).unwrap();
        let r = dim2_parallel_check(&scheme, &c, &model).unwrap();
        assert!(r.pass && r.parallel_by_delta && r.parallel_by_d, "{r:?}");
        assert!(r.div_s < 1e-12);
        for lambda in [0.5, 1.0, 3.0] {
            let s = FormField::from_fn(&g, 2, move |x| vec![lambda * x[0].sin()]).unwrap();
            let r = dim2_parallel_check(&scheme, &s, &model).unwrap();
            assert!(r.pass && !r.parallel_by_delta && !r.parallel_by_d, "{r:?}");
            assert!(r.d_beta > 0.1 && r.delta_beta_beta > 0.01);
        }
    }

    #[test]
    fn odd_bound_region_reports() {
        let r = odd_bound_regions(1, 2000, 3, 100.0).unwrap();
        assert!(!r.asserted && r.pass);
        assert_eq!(r.failures, 2000);
        let (lo, hi) = r.failure_mu_range.unwrap();
        assert!(lo > 1.0 && hi <= 100.0);
        for m in [2, 3] {
            let r = odd_bound_regions(m, 5000, 11, 100.0).unwrap();
            assert!(r.asserted && r.pass && r.failures == 0, "{r:?}");
        }
        assert!(odd_bound_regions(4, 10, 0, 100.0).is_err());
    }
}
