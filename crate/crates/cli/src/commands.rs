use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use mincon::exterior::{binomial, KForm};
use mincon::field::flow::{check_trajectory_csv, write_trajectory_csv};
use mincon::field::snapshot::{read_snapshot, write_snapshot};
use mincon::field::{
    calibrate, first_variation_check, gradient_flow, FlowParams, FlowStatus, FormField, LineConnection, Scheme,
    StencilOrder, TorusGrid,
};
use mincon::fourier_mukai::{fm_report, GraphMap};
use mincon::g2::{
    ddt_residual, g2_bounds_scan, g2_metrics, normal_form_beta, solve_c3, star_phi_from_table, G2Solution,
    RATIO_BOUND, STAR_PHI_TABLE, TRACE_BOUND,
};
use mincon::monotonicity::{
    check_monotone, g2_profile, geometric_ladder, profile, vanishing_audit, write_profile_csv, FieldOnBall, G2Variant,
    QuadConfig, RadialProfile, WeightKind, DEFAULT_LADDER_RATIO, DEFAULT_RUNGS,
};
use mincon::pointwise::TwoFormPoint;
use mincon::verify::{verify_algebra, SuiteConfig};
use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::json;

use crate::config::{ConfigError, Params};

/// Any error that is not an asserted failure; maps to exit code 2.
#[derive(Debug)]
pub struct Failure(pub String);

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure(e.0)
    }
}

impl From<mincon::Error> for Failure {
    fn from(e: mincon::Error) -> Self {
        Failure(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure(format!("io: {e}"))
    }
}

/// `Ok(pass)` on a completed run.
pub type Verdict = Result<bool, Failure>;

pub struct Output {
    dir: Option<PathBuf>,
}

impl Output {
    pub fn new(dir: Option<PathBuf>) -> Result<Self, Failure> {
        if let Some(d) = &dir {
            std::fs::create_dir_all(d).map_err(|e| Failure(format!("cannot create {}: {e}", d.display())))?;
        }
        Ok(Self { dir })
    }

    /// Prints the report as one line on stdout and mirrors it to `<out>/<name>`.
    fn report<T: Serialize>(&self, name: &str, value: &T) -> Result<(), Failure> {
        let line = serde_json::to_string(value).map_err(|e| Failure(e.to_string()))?;
        println!("{line}");
        self.file(name, |w| writeln!(w, "{line}"))?;
        Ok(())
    }

    /// Writes `<out>/<name>` when an output directory is set; returns the file name.
    fn file<F>(&self, name: &str, write: F) -> Result<Option<String>, Failure>
    where
        F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    {
        let Some(dir) = &self.dir else { return Ok(None) };
        let mut w = BufWriter::new(File::create(dir.join(name))?);
        write(&mut w)?;
        w.flush()?;
        Ok(Some(name.to_string()))
    }
}

fn positive(key: &str, v: f64) -> Result<f64, Failure> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Failure(format!("{key} must be positive, got {v}")))
    }
}

fn at_least(key: &str, v: usize, min: usize) -> Result<usize, Failure> {
    if v >= min {
        Ok(v)
    } else {
        Err(Failure(format!("{key} must be at least {min}, got {v}")))
    }
}

pub const VERIFY_KEYS: &[&str] = &[
    "seed",
    "samples_per_dim",
    "entry_range",
    "unit_vectors",
    "g2_solutions",
    "g2_range",
    "form_samples",
    "star_phi_flip",
];

pub fn verify(p: &Params, out: &Output) -> Verdict {
    let d = SuiteConfig::default();
    let mut star_phi = d.star_phi.clone();
    if let Some(i) = p.opt::<usize>("star_phi_flip")? {
        if i >= STAR_PHI_TABLE.len() {
            return Err(Failure(format!("star_phi_flip must be below {}", STAR_PHI_TABLE.len())));
        }
        let mut table = STAR_PHI_TABLE;
        table[i].0 = -table[i].0;
        star_phi = star_phi_from_table(&table);
    }
    let cfg = SuiteConfig {
        seed: p.get("seed", d.seed)?,
        samples_per_dim: at_least("samples_per_dim", p.get("samples_per_dim", d.samples_per_dim)?, 1)?,
        entry_range: positive("entry_range", p.get("entry_range", d.entry_range)?)?,
        unit_vectors: at_least("unit_vectors", p.get("unit_vectors", d.unit_vectors)?, 1)?,
        g2_solutions: at_least("g2_solutions", p.get("g2_solutions", d.g2_solutions)?, 1)?,
        g2_range: positive("g2_range", p.get("g2_range", d.g2_range)?)?,
        form_samples: at_least("form_samples", p.get("form_samples", d.form_samples)?, 1)?,
        star_phi,
    };
    let report = verify_algebra(&cfg)?;
    out.report("verify_algebra.json", &report)?;
    Ok(report.pass)
}

pub const G2_KEYS: &[&str] = &["seed", "samples", "range", "c1", "c2"];

pub fn g2(p: &Params, out: &Output) -> Verdict {
    match (p.opt::<f64>("c1")?, p.opt::<f64>("c2")?) {
        (Some(c1), Some(c2)) => {
            let s = solve_c3(c1, c2)?;
            let m = g2_metrics(&s);
            let beta = normal_form_beta(&s);
            let residual = ddt_residual(&beta)?.norm() / (1.0 + beta.norm().powi(3));
            let pass = m.trace >= TRACE_BOUND - 1e-9
                && m.ratio.is_none_or(|r| r >= RATIO_BOUND - 1e-9)
                && residual <= 1e-10;
            out.report(
                "g2_point.json",
                &json!({
                    "check": "g2_point",
                    "c": s.as_array(),
                    "trace": m.trace,
                    "volume": m.volume,
                    "ratio": m.ratio,
                    "ddt_residual_scaled": residual,
                    "bound_trace": TRACE_BOUND,
                    "bound_ratio": RATIO_BOUND,
                    "pass": pass,
                }),
            )?;
            Ok(pass)
        }
        (None, None) => {
            let r = g2_bounds_scan(p.get("samples", 100_000)?, p.get("range", 10.0)?, p.get("seed", 0)?)?;
            out.report("g2_scan.json", &r)?;
            Ok(r.pass)
        }
        _ => Err(Failure("c1 and c2 must be given together".into())),
    }
}

pub const FLOW_KEYS: &[&str] = &[
    "seed",
    "dim",
    "points",
    "length",
    "order",
    "tau",
    "radius",
    "max_steps",
    "stop_tol",
    "min_tau",
    "base",
    "integral_base",
    "start",
    "perturbation",
    "modes",
    "snapshot",
    "variation",
];

fn scheme_of(p: &Params) -> Result<Scheme, Failure> {
    Ok(Scheme::new(StencilOrder::from_int(p.get("order", 4)?)?))
}

/// Single coefficient means `c·e¹²`; otherwise all `C(n, 2)` coefficients in lexicographic order.
fn base_form(p: &Params, n: usize) -> Result<KForm, Failure> {
    let coeffs: Vec<f64> = p.list("base")?.unwrap_or_else(|| vec![0.0]);
    if coeffs.len() == 1 {
        return Ok(KForm::monomial(n, &[0, 1], coeffs[0])?);
    }
    if coeffs.len() != binomial(n, 2) {
        return Err(Failure(format!("base needs 1 or {} coefficients", binomial(n, 2))));
    }
    Ok(KForm::from_coeffs(n, 2, coeffs)?)
}

fn read_field(path: &Path) -> Result<FormField, Failure> {
    let f = File::open(path).map_err(|e| Failure(format!("cannot open {}: {e}", path.display())))?;
    Ok(read_snapshot(BufReader::new(f))?)
}

pub fn flow(p: &Params, out: &Output) -> Verdict {
    let scheme = scheme_of(p)?;
    let seed: u64 = p.get("seed", 0)?;
    let modes: usize = p.get("modes", 1)?;
    let start: String = p.get("start", "perturbed".to_string())?;
    let potential = match start.as_str() {
        "snapshot" => {
            let path: PathBuf = p.opt("snapshot")?.ok_or_else(|| Failure("start = snapshot needs snapshot".into()))?;
            let f = read_field(&path)?;
            if f.degree() != 1 {
                return Err(Failure(format!("snapshot must hold a 1-form, found degree {}", f.degree())));
            }
            f
        }
        "perturbed" | "constant" => {
            let n: usize = p.get("dim", 2)?;
            let grid = TorusGrid::cube(n, p.get("points", 32)?, p.get("length", 2.0 * std::f64::consts::PI)?)?;
            if start == "constant" {
                FormField::zeros(&grid, 1)?
            } else {
                FormField::band_limited(&grid, 1, modes, p.get("perturbation", 0.1)?, seed)?
            }
        }
        other => return Err(Failure(format!("unknown start {other:?}; expected perturbed, constant or snapshot"))),
    };
    let grid = potential.grid().clone();
    let base = base_form(p, grid.dim())?;
    let conn = if p.bool("integral_base", false)? {
        LineConnection::with_integral_base(base, potential)?
    } else {
        LineConnection::new(base, potential)?
    };
    let d = FlowParams::default();
    let params = FlowParams {
        tau: p.get("tau", d.tau)?,
        max_steps: p.get("max_steps", d.max_steps)?,
        radius: p.get("radius", d.radius)?,
        stop_tol: p.get("stop_tol", d.stop_tol)?,
        min_tau: p.get("min_tau", d.min_tau)?,
    };
    params.validate()?;

    let variation = if p.bool("variation", true)? {
        let b = FormField::band_limited(&grid, 1, modes.max(1), 1.0, seed.wrapping_add(1))?;
        Some(first_variation_check(&scheme, &conn, &b, &[0.1, 0.05, 0.025, 0.0125])?)
    } else {
        None
    };

    let r = gradient_flow(&scheme, &conn, &params)?;
    let mut csv = Vec::new();
    write_trajectory_csv(&r.rows, &mut csv)?;
    let csv_monotone = check_trajectory_csv(std::str::from_utf8(&csv).expect("ascii"))?;
    let trajectory = out.file("trajectory.csv", |w| w.write_all(&csv))?;
    let connection = out.file("connection.txt", |w| {
        write_snapshot(r.final_connection.potential(), w).map_err(std::io::Error::other)
    })?;
    let curvature = out.file("curvature.txt", |w| {
        write_snapshot(&r.final_curvature, w).map_err(std::io::Error::other)
    })?;

    let files: Vec<String> = [trajectory, connection, curvature].into_iter().flatten().collect();
    let first = r.rows.first().expect("initial row");
    let last = r.final_row();
    let pass = r.is_monotone()
        && csv_monotone
        && r.status == FlowStatus::Converged
        && variation.as_ref().is_none_or(|v| v.pass);
    out.report(
        "flow.json",
        &json!({
            "check": "flow",
            "params": params,
            "grid": {"sizes": grid.sizes(), "lengths": grid.lengths()},
            "order": scheme.order.as_int(),
            "status": r.status,
            "accepted_steps": r.accepted_steps,
            "rows": r.rows.len(),
            "v0_initial": first.v0,
            "v0_final": last.v0,
            "v0_raw_final": last.v0_raw,
            "hmax_initial": first.hmax,
            "hmax_final": last.hmax,
            "deviation_ratio": r.deviation_ratio(),
            "monotone": r.is_monotone(),
            "csv_monotone": csv_monotone,
            "first_variation": variation,
            "files": files,
            "pass": pass,
        }),
    )?;
    Ok(pass)
}

pub const MONOTONICITY_KEYS: &[&str] = &[
    "seed",
    "mode",
    "field",
    "dim",
    "beta",
    "blocks",
    "c1",
    "c2",
    "variant",
    "weight",
    "kappa",
    "kappa_sweep",
    "a",
    "rho_min",
    "ratio",
    "rungs",
    "tol",
    "samples",
    "rel_tol",
    "snapshot",
    "center",
    "threshold",
];

struct BallSetup {
    field: FieldOnBall,
    ddt: bool,
}

fn ball_field(p: &Params, rho_max: f64) -> Result<BallSetup, Failure> {
    let kind: String = p.get("field", "constant".to_string())?;
    let field = match kind.as_str() {
        "constant" => {
            let n: usize = p.get("dim", 3)?;
            let beta = if let Some(coeffs) = p.list::<f64>("beta")? {
                if coeffs.len() != binomial(n, 2) {
                    return Err(Failure(format!("beta needs {} coefficients for dim {n}", binomial(n, 2))));
                }
                KForm::from_coeffs(n, 2, coeffs)?.to_two_form_point()?
            } else {
                let mut lambdas = p.list::<f64>("blocks")?.unwrap_or_else(|| vec![0.8; n / 2]);
                if lambdas.len() > n / 2 {
                    return Err(Failure(format!("at most {} blocks in dim {n}", n / 2)));
                }
                lambdas.resize(n / 2, 0.0);
                TwoFormPoint::from_blocks(n, &lambdas)?
            };
            FieldOnBall::constant(beta)
        }
        "ddt" => {
            if p.has("dim") && p.get("dim", 7usize)? != 7 {
                return Err(Failure("ddt fields live on dim 7".into()));
            }
            let s: G2Solution = solve_c3(p.get("c1", 1.0)?, p.get("c2", 2.0)?)?;
            FieldOnBall::constant(normal_form_beta(&s).to_two_form_point()?)
        }
        "snapshot" => {
            let path: PathBuf = p.opt("snapshot")?.ok_or_else(|| Failure("field = snapshot needs snapshot".into()))?;
            let f = read_field(&path)?;
            let center = p.list::<f64>("center")?.unwrap_or_else(|| vec![0.0; f.dim()]);
            FieldOnBall::sampled(f, center, rho_max)?
        }
        other => return Err(Failure(format!("unknown field {other:?}; expected constant, ddt or snapshot"))),
    };
    Ok(BallSetup {
        field,
        ddt: kind == "ddt",
    })
}

pub fn monotonicity(p: &Params, out: &Output) -> Verdict {
    let rungs = at_least("rungs", p.get("rungs", DEFAULT_RUNGS)?, 2)?;
    let radii = geometric_ladder(p.get("rho_min", 0.1)?, p.get("ratio", DEFAULT_LADDER_RATIO)?, rungs)?;
    let rho_max = *radii.last().expect("nonempty ladder");
    let setup = ball_field(p, rho_max)?;
    let d = QuadConfig::default();
    let quad = QuadConfig {
        rel_tol: positive("rel_tol", p.get("rel_tol", d.rel_tol)?)?,
        samples: at_least("samples", p.get("samples", d.samples)?, 2)?,
        seed: p.get("seed", d.seed)?,
    };
    let tol = positive("tol", p.get("tol", 1e-9)?)?;
    let weight = WeightKind::from_name(&p.get("weight", "modified".to_string())?)?;
    let a: f64 = p.get("a", 0.0)?;
    let csv = |name: &str, prof: &RadialProfile| out.file(name, |w| write_profile_csv(prof, w));
    let mode: String = p.get("mode", "profile".to_string())?;
    match mode.as_str() {
        "profile" => {
            let prof = if setup.ddt && p.has("variant") {
                if p.has("kappa") || p.has("weight") {
                    return Err(Failure("variant fixes kappa and weight".into()));
                }
                let variant = match p.get("variant", String::new())?.as_str() {
                    "volume" => G2Variant::Volume,
                    "normalized" => G2Variant::Normalized,
                    other => return Err(Failure(format!("unknown variant {other:?}; expected volume or normalized"))),
                };
                g2_profile(&setup.field, variant, &radii, &quad)?
            } else {
                profile(&setup.field, &weight.into(), p.get("kappa", 1.0)?, a, &radii, &quad)?
            };
            csv("profile.csv", &prof)?;
            let r = check_monotone(&prof, tol)?;
            out.report("monotonicity.json", &r)?;
            Ok(r.pass)
        }
        "sweep" => {
            let n = setup.field.dim();
            let kappas = p.list::<f64>("kappa_sweep")?.unwrap_or_else(|| (1..=n).map(|k| k as f64).collect());
            let mut reports = Vec::with_capacity(kappas.len());
            for (i, &kappa) in kappas.iter().enumerate() {
                let prof = profile(&setup.field, &weight.into(), kappa, a, &radii, &quad)?;
                csv(&format!("profile_{i}.csv"), &prof)?;
                reports.push(check_monotone(&prof, tol)?);
            }
            out.report(
                "monotonicity.json",
                &json!({"check": "kappa_sweep", "asserted": false, "kappas": kappas, "reports": reports}),
            )?;
            Ok(true)
        }
        "vanishing" => {
            let default = if setup.ddt { 13.0 / 7.0 } else { 1.0 };
            let r = vanishing_audit(&setup.field, p.get("threshold", default)?, &radii, &quad)?;
            out.report("vanishing.json", &r)?;
            Ok(r.pass)
        }
        other => Err(Failure(format!("unknown mode {other:?}; expected profile, sweep or vanishing"))),
    }
}

pub const FM_KEYS: &[&str] = &["seed", "graph", "points", "tol", "p", "q", "coeffs", "half_width"];

pub fn fm(p: &Params, out: &Output) -> Verdict {
    let name: String = p.get("graph", "scherk".to_string())?;
    let graph = match name.as_str() {
        "scherk" => GraphMap::scherk()?,
        "quadratic" => GraphMap::quadratic()?,
        "linear" => {
            let (pp, q) = (p.get("p", 1usize)?, p.get("q", 1usize)?);
            let coeffs = p.list::<f64>("coeffs")?.unwrap_or_else(|| vec![1.0; pp * q]);
            if coeffs.len() != pp * q {
                return Err(Failure(format!("linear graph needs {} coefficients (q x p, row-major)", pp * q)));
            }
            GraphMap::linear(DMatrix::from_row_slice(q, pp, &coeffs))?
        }
        "custom" => {
            let coeffs = p.list::<f64>("coeffs")?.ok_or_else(|| Failure("custom graph needs coeffs".into()))?;
            GraphMap::custom(p.get("p", 1)?, p.get("q", 1)?, &coeffs, positive("half_width", p.get("half_width", 1.0)?)?)?
        }
        other => return Err(Failure(format!("unknown graph {other:?}; expected linear, quadratic, scherk or custom"))),
    };
    let points = at_least("points", p.get("points", 100)?, 1)?;
    let r = fm_report(&graph, points, p.get("seed", 0)?, positive("tol", p.get("tol", 1e-8)?)?)?;
    out.report("fm.json", &r)?;
    Ok(r.pass)
}

pub const CALIBRATE_KEYS: &[&str] = &["order", "max_mode", "safety"];

pub fn calibrate_cmd(p: &Params, out: &Output) -> Verdict {
    let scheme = scheme_of(p)?;
    let r = calibrate(
        &scheme,
        at_least("max_mode", p.get("max_mode", 3)?, 1)?,
        positive("safety", p.get("safety", 4.0)?)?,
    )?;
    out.report("calibration.json", &r)?;
    Ok(true)
}
