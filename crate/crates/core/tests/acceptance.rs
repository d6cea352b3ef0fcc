//! Acceptance suite: one PASS/FAIL line per criterion, with the measured values and runtime.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use mincon::exterior::{volume_excess, KForm};
use mincon::field::stress::div_stress_discrepancy;
use mincon::field::*;
use mincon::fourier_mukai::{fm_delta_check, fm_report, sample_points, GraphMap};
use mincon::g2::{g2_bounds_scan, g2_metrics, volume_from_series, G2Solution, RATIO_BOUND, TRACE_BOUND};
use mincon::monotonicity::*;
use mincon::pointwise::{volume_density, TwoFormPoint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(bool, String), mincon::Error>;

struct Criterion {
    id: usize,
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

fn torus(pts: usize) -> TorusGrid {
    TorusGrid::cube(2, pts, 2.0 * PI).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn g2_equality_point() -> Outcome {
    let r3 = 3f64.sqrt();
    let m = g2_metrics(&G2Solution::new(r3, r3, r3)?);
    let ratio = m.ratio.unwrap_or(f64::NAN);
    let errs = [rel(m.trace, 2.5), rel(m.volume, 8.0), rel(ratio, 13.0 / 7.0)];
    let worst = errs.iter().cloned().fold(0.0, f64::max);
    Ok((
        worst <= 1e-12,
        format!("tr={:.15} v={:.15} ratio={:.15} worst_rel={worst:.2e}", m.trace, m.volume, ratio),
    ))
}

fn g2_bounds() -> Outcome {
    let r = g2_bounds_scan(100_000, 10.0, 7)?;
    let pass = r.min_trace >= TRACE_BOUND - 1e-9 && r.min_ratio >= RATIO_BOUND - 1e-9 && r.max_residual_scaled <= 1e-10;
    Ok((
        pass,
        format!(
            "min_tr={:.12} min_ratio={:.12} max_ddt_residual={:.2e}",
            r.min_trace, r.min_ratio, r.max_residual_scaled
        ),
    ))
}

fn volume_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for n in 2..=8 {
        for _ in 0..1000 {
            let mut k = KForm::zero(n, 2)?;
            k.coeffs_mut().iter_mut().for_each(|c| *c = rng.random_range(-2.0..=2.0));
            let det = volume_density(&k.to_two_form_point()?);
            let series = volume_from_series(&k)?;
            worst = worst.max((det - series).abs() / series);
            // the excess path must agree with the same relative accuracy
            worst = worst.max(((det - 1.0) - volume_excess(&k)?).abs() / series);
        }
    }
    Ok((worst <= 1e-10, format!("worst_rel={worst:.2e} over 7000 forms")))
}

fn stress_conservation() -> Outcome {
    let s = Scheme::fourth();
    let tol = ToleranceModel::calibrated(&s);
    let mut hs = vec![];
    let mut errs = vec![];
    let mut at64 = (0.0, 0.0);
    for pts in [32, 64, 128] {
        let g = torus(pts);
        let beta = FormField::band_limited(&g, 2, 2, 1.5, 11)?;
        let e = div_stress_discrepancy(&s, &beta)?;
        if pts == 64 {
            at64 = (e, tol.for_grid(&g));
        }
        hs.push(g.max_spacing());
        errs.push(e);
    }
    let order = fit_order(&hs, &errs);
    let g = torus(64);
    let constant = FormField::constant(&g, &KForm::monomial(2, &[0, 1], 1.7)?)?;
    let c = div_stress(&s, &constant)?.max_abs().max(div_stress_direct(&s, &constant)?.max_abs());
    Ok((
        at64.0 <= at64.1 && order >= 3.7 && c <= 1e-12,
        format!("err64={:.2e} tol64={:.2e} order={order:.3} constant={c:.1e}", at64.0, at64.1),
    ))
}

fn integration_by_parts() -> Outcome {
    let s = Scheme::fourth();
    let tol = ToleranceModel::calibrated(&s);
    let mut pass = true;
    let mut worst_c: f64 = 0.0;
    let mut worst_p = vec![];
    for pts in [16, 32, 64] {
        let g = torus(pts);
        let f1 = FormField::scalar_fn(&g, |x| (x[0] + 2.0 * x[1]).sin() + x[1].cos())?;
        let f2 = FormField::scalar_fn(&g, |x| (2.0 * x[0]).cos() * x[1].sin() + 0.5)?;
        let constant = FormField::constant(&g, &KForm::monomial(2, &[0, 1], 1.3)?)?;
        let r = ibp_check(&s, &tol, &constant, &f1, &f2)?;
        pass &= r.pass;
        worst_c = worst_c.max(r.worst_relative());
        let beta = FormField::band_limited(&g, 2, 2, 1.5, 5)?;
        let r = ibp_prime_check(&s, &tol, &beta, &f1, &f2)?;
        pass &= r.pass;
        worst_p.push(format!("{pts}:{:.1e}/{:.1e}", r.worst_relative(), r.tolerance));
    }
    Ok((pass, format!("constant_worst={worst_c:.1e} delta_prime[{}]", worst_p.join(" "))))
}

fn first_variation() -> Outcome {
    let g = torus(32);
    let s = Scheme::fourth();
    let a = FormField::band_limited(&g, 1, 2, 1.0, 21)?;
    let c = LineConnection::new(KForm::monomial(2, &[0, 1], 0.5)?, a)?;
    let b = FormField::band_limited(&g, 1, 2, 1.0, 22)?;
    let r = first_variation_check(&s, &c, &b, &[0.1, 0.05, 0.025, 0.0125])?;
    let order = r.fitted_order.unwrap_or(f64::NAN);
    Ok((
        r.fitted_order.is_some_and(|p| (1.8..=2.2).contains(&p)),
        format!("predicted={:.6e} order={order:.4}", r.predicted),
    ))
}

fn weitzenbock() -> Outcome {
    let s = Scheme::fourth();
    let tol = ToleranceModel::calibrated(&s);
    let g = torus(64);
    let alpha = FormField::band_limited(&g, 1, 2, 3.0, 31)?;
    let constant = FormField::constant(&g, &KForm::monomial(2, &[0, 1], 0.9)?)?;
    let rc = weitzenbock_check(&s, &tol, &constant, &alpha)?;
    let beta = FormField::band_limited(&g, 2, 2, 4.0, 32)?;
    let r = weitzenbock_check(&s, &tol, &beta, &alpha)?;
    let factor = r.residual_without_first_order / r.tolerance;
    Ok((
        rc.pass && r.pass && factor >= 10.0,
        format!(
            "residual={:.2e} tol={:.2e} without_first_order={:.2e} ({factor:.0}x tol)",
            r.residual, r.tolerance, r.residual_without_first_order
        ),
    ))
}

fn mean_curvature_closed_form() -> Outcome {
    let s = Scheme::fourth();
    let tol = ToleranceModel::calibrated(&s);
    let g = torus(64);
    let a = FormField::from_fn(&g, 1, |x| vec![0.0, x[0].sin()])?;
    let conn = LineConnection::new(KForm::zero(2, 2)?, a)?;
    let h = mean_curvature(&s, &conn)?;
    let mut worst: f64 = 0.0;
    for site in 0..g.site_count() {
        let x = g.position(site)[0];
        let expect = -x.sin() * (1.0 + x.cos().powi(2)).powf(-1.5);
        for field in [&h.pointwise, &h.divergence] {
            worst = worst.max((field.at(site)[1] - expect).abs()).max(field.at(site)[0].abs());
        }
    }
    let t = tol.for_grid(&g);
    Ok((worst <= t, format!("worst={worst:.2e} tol={t:.2e}")))
}

fn flow_descent() -> Outcome {
    let g = torus(32);
    let a = FormField::from_fn(&g, 1, |x| vec![0.0, 0.1 * x[0].sin()])?;
    let c = LineConnection::new(KForm::zero(2, 2)?, a)?;
    let r = gradient_flow(&Scheme::fourth(), &c, &FlowParams::default())?;
    let pass = r.is_monotone() && r.status == FlowStatus::Converged && r.deviation_ratio() <= 1e-4;
    Ok((
        pass,
        format!(
            "status={:?} steps={} hmax={:.2e} deviation_ratio={:.2e} monotone={}",
            r.status,
            r.accepted_steps,
            r.final_row().hmax,
            r.deviation_ratio(),
            r.is_monotone()
        ),
    ))
}

fn monotonicity_profiles() -> Outcome {
    let quad = QuadConfig::default();
    let radii = geometric_ladder(0.1, DEFAULT_LADDER_RATIO, DEFAULT_RUNGS)?;
    let mut pass = true;
    let mut worst: f64 = 0.0;
    let constant = FieldOnBall::constant(TwoFormPoint::from_blocks(3, &[0.8])?);
    for kind in [WeightKind::Modified, WeightKind::Volume, WeightKind::Normalized] {
        let r = check_monotone(&profile(&constant, &kind.into(), 1.0, 0.0, &radii, &quad)?, 1e-9)?;
        pass &= r.pass;
        worst = worst.max(r.worst_drop);
    }
    let ddt = FieldOnBall::constant(
        mincon::g2::normal_form_beta(&G2Solution::new(1.0, 2.0, 3.0)?).to_two_form_point()?,
    );
    for variant in [G2Variant::Volume, G2Variant::Normalized] {
        let r = check_monotone(&g2_profile(&ddt, variant, &radii, &quad)?, 1e-9)?;
        pass &= r.pass;
        worst = worst.max(r.worst_drop);
    }
    Ok((pass, format!("5 profiles x {} rungs, worst_drop={worst:.1e}", radii.len())))
}

fn theta_closed_forms() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut worst_limit: f64 = 0.0;
    for n in [1usize, 3, 5, 7] {
        for a in [1e-6, 0.01, 0.3, 1.0, 5.0, 20.0] {
            for tau in [0.1, 0.5, 1.0, 1.5, 2.0, 4.0] {
                if a * tau * tau > 20.0 {
                    continue;
                }
                worst = worst.max(rel(theta_closed(a, n, tau)?, theta(a, n, tau)?));
            }
        }
        for tau in [0.5f64, 1.0, 2.0] {
            let limit = omega(n) * tau.powi(n as i32 + 1) / (n + 1) as f64;
            worst_limit = worst_limit.max(rel(theta_closed(0.0, n, tau)?, limit));
        }
    }
    Ok((
        worst <= 1e-10 && worst_limit <= 1e-12,
        format!("worst_rel={worst:.2e} a0_limit_rel={worst_limit:.2e}"),
    ))
}

fn fourier_mukai() -> Outcome {
    let scherk = GraphMap::scherk()?;
    let r = fm_report(&scherk, 100, 5, 1e-8)?;
    let quadratic = GraphMap::quadratic()?;
    let mut worst: f64 = 0.0;
    for x in sample_points(&quadratic, 50, 9, 0.05) {
        let d = fm_delta_check(&quadratic, &x)?;
        let expect = -1.0 / (1.0 + x[0] * x[0]);
        worst = worst.max((d.generic[0] - expect).abs()).max(d.base_leak);
    }
    let pass = r.minimality_max <= 1e-9 && r.max_residual_A4 <= 1e-8 && r.max_residual_A3 <= 1e-8 && worst <= 1e-10;
    Ok((
        pass,
        format!(
            "scherk minimality={:.1e} delta={:.1e} codiff={:.1e}; quadratic worst={worst:.1e}",
            r.minimality_max, r.max_residual_A4, r.max_residual_A3
        ),
    ))
}

fn odd_bound_audit() -> Outcome {
    let mut parts = vec![];
    let mut pass = true;
    for m in [2, 3] {
        let r = odd_bound_regions(m, 100_000, 13, 100.0)?;
        pass &= r.failures == 0;
        parts.push(format!("m={m} violations={} min_margin={:.2e}", r.failures, r.min_margin));
    }
    let r = odd_bound_regions(1, 100_000, 13, 100.0)?;
    let region = r
        .failure_mu_range
        .map_or("none".to_string(), |(lo, hi)| format!("mu in [{lo:.4}, {hi:.2}]"));
    pass &= !r.asserted && r.failure_mu_range.is_some_and(|(lo, _)| lo > 1.0);
    parts.push(format!("m=1 finding: {} violations, {region}", r.failures));
    Ok((pass, parts.join("; ")))
}

fn main() -> ExitCode {
    let ms = Duration::from_millis;
    let s = Duration::from_secs;
    let criteria = [
        Criterion { id: 1, name: "g2 equality point", budget: ms(1), run: g2_equality_point },
        Criterion { id: 2, name: "g2 bounds scan", budget: s(10), run: g2_bounds },
        Criterion { id: 3, name: "volume density paths", budget: s(5), run: volume_equivalence },
        Criterion { id: 4, name: "stress-energy conservation", budget: s(30), run: stress_conservation },
        Criterion { id: 5, name: "integration by parts", budget: s(60), run: integration_by_parts },
        Criterion { id: 6, name: "first variation", budget: s(30), run: first_variation },
        Criterion { id: 7, name: "weitzenbock", budget: s(30), run: weitzenbock },
        Criterion { id: 8, name: "mean curvature closed form", budget: s(5), run: mean_curvature_closed_form },
        Criterion { id: 9, name: "flow descent", budget: s(120), run: flow_descent },
        Criterion { id: 10, name: "monotonicity profiles", budget: s(60), run: monotonicity_profiles },
        Criterion { id: 11, name: "theta closed forms", budget: s(5), run: theta_closed_forms },
        Criterion { id: 12, name: "fourier-mukai", budget: s(5), run: fourier_mukai },
        Criterion { id: 13, name: "odd trace bound audit", budget: s(10), run: odd_bound_audit },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let in_time = elapsed <= c.budget;
        let (ok, detail) = match outcome {
            Ok((ok, detail)) => (ok && in_time, detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "{} {:>2} {:<28} {detail} [{:.3?} / {:?}{}]",
            if ok { "PASS" } else { "FAIL" },
            c.id,
            c.name,
            elapsed,
            c.budget,
            if in_time { "" } else { " over budget" }
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
