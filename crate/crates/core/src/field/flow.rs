//! Descent-guarded explicit Euler flow of the potential along the mean curvature.

use std::io::Write;

use serde::Serialize;

use super::connection::{mean_curvature_scaled, volumes_of_curvature, LineConnection};
use super::form_field::FormField;
use super::ops::Scheme;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FlowParams {
    pub tau: f64,
    pub max_steps: usize,
    /// Radius `r` of the rescaled metric `r²g`.
    pub radius: f64,
    pub stop_tol: f64,
    /// Halving stops below this step.
    pub min_tau: f64,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self {
            tau: 0.02,
            max_steps: 10_000,
            radius: 4.0,
            stop_tol: 1e-6,
            min_tau: 1e-12,
        }
    }
}

impl FlowParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidArgument(format!("tau must be positive, got {}", self.tau)));
        }
        if !(self.radius >= 1.0 && self.radius.is_finite()) {
            return Err(Error::InvalidArgument(format!("radius must be at least 1, got {}", self.radius)));
        }
        if !(self.stop_tol > 0.0) {
            return Err(Error::InvalidArgument("stop_tol must be positive".into()));
        }
        if !(self.min_tau > 0.0 && self.min_tau <= self.tau) {
            return Err(Error::InvalidArgument("min_tau must lie in (0, tau]".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FlowRow {
    pub step: usize,
    pub tau: f64,
    /// `r⁴ ∫(v(E/r²) − 1) vol_g`, the functional whose gradient drives the flow.
    pub v0: f64,
    /// `rⁿ ∫(v(E/r²) − 1) vol_g`, the normalized volume in the metric `r²g`.
    pub v0_raw: f64,
    pub hmax: f64,
    pub accepted: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum FlowStatus {
    Converged,
    MaxSteps,
    Stalled,
}

#[derive(Clone, Debug)]
pub struct FlowResult {
    pub rows: Vec<FlowRow>,
    pub status: FlowStatus,
    pub accepted_steps: usize,
    pub final_connection: LineConnection,
    pub final_curvature: FormField,
    pub initial_deviation: f64,
    pub final_deviation: f64,
}

impl FlowResult {
    pub fn final_row(&self) -> &FlowRow {
        self.rows.last().expect("initial row always present")
    }

    /// Whether accepted rows never increase `V⁰`.
    pub fn is_monotone(&self) -> bool {
        let accepted: Vec<f64> = self.rows.iter().filter(|r| r.accepted).map(|r| r.v0).collect();
        accepted.windows(2).all(|w| w[1] <= w[0])
    }

    /// `final_deviation / initial_deviation` of the curvature from its mean.
    pub fn deviation_ratio(&self) -> f64 {
        if self.initial_deviation == 0.0 {
            0.0
        } else {
            self.final_deviation / self.initial_deviation
        }
    }
}

struct State {
    conn: LineConnection,
    curvature: FormField,
    h: FormField,
    hmax: f64,
    v0: f64,
    v0_raw: f64,
}

fn evaluate(scheme: &Scheme, conn: LineConnection, params: &FlowParams) -> Result<State> {
    let s = params.radius.powi(-2);
    let curvature = conn.curvature(scheme)?;
    let excess = volumes_of_curvature(&curvature, s)?.normalized;
    let n = curvature.dim() as i32;
    let v0 = excess * params.radius.powi(4);
    let v0_raw = excess * params.radius.powi(n);
    let h = mean_curvature_scaled(scheme, &curvature, s)?;
    let hmax = h.max_abs();
    Ok(State {
        conn,
        curvature,
        h,
        hmax,
        v0,
        v0_raw,
    })
}

/// Runs `a ← a + τ H_r` with step halving whenever `V⁰` would increase.
pub fn gradient_flow(scheme: &Scheme, start: &LineConnection, params: &FlowParams) -> Result<FlowResult> {
    params.validate()?;
    let mut state = evaluate(scheme, start.clone(), params)?;
    let initial_deviation = state.curvature.max_deviation_from_mean();
    let mut tau = params.tau;
    let mut rows = vec![FlowRow {
        step: 0,
        tau: 0.0,
        v0: state.v0,
        v0_raw: state.v0_raw,
        hmax: state.hmax,
        accepted: true,
    }];
    let mut accepted_steps = 0;
    let mut status = FlowStatus::MaxSteps;
    'outer: while accepted_steps < params.max_steps {
        if state.hmax < params.stop_tol {
            status = FlowStatus::Converged;
            break;
        }
        loop {
            let trial_potential = state.conn.potential().axpy(tau, &state.h)?;
            let trial = evaluate(scheme, state.conn.with_potential(trial_potential)?, params)?;
            let step = accepted_steps + 1;
            if trial.v0 <= state.v0 {
                rows.push(FlowRow {
                    step,
                    tau,
                    v0: trial.v0,
                    v0_raw: trial.v0_raw,
                    hmax: trial.hmax,
                    accepted: true,
                });
                state = trial;
                accepted_steps = step;
                break;
            }
            rows.push(FlowRow {
                step,
                tau,
                v0: trial.v0,
                v0_raw: trial.v0_raw,
                hmax: trial.hmax,
                accepted: false,
            });
            tau *= 0.5;
            if tau < params.min_tau {
                status = FlowStatus::Stalled;
                break 'outer;
            }
        }
    }
    if status == FlowStatus::MaxSteps && state.hmax < params.stop_tol {
        status = FlowStatus::Converged;
    }
    let final_deviation = state.curvature.max_deviation_from_mean();
    Ok(FlowResult {
        rows,
        status,
        accepted_steps,
        final_connection: state.conn,
        final_curvature: state.curvature,
        initial_deviation,
        final_deviation,
    })
}

pub const TRAJECTORY_HEADER: &str = "step,tau,V0,Hmax,accepted";

pub fn write_trajectory_csv<W: Write>(rows: &[FlowRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{TRAJECTORY_HEADER}")?;
    for r in rows {
        writeln!(w, "{},{:e},{:e},{:e},{}", r.step, r.tau, r.v0, r.hmax, r.accepted as u8)?;
    }
    Ok(())
}

/// Parses a trajectory CSV and reports whether `V0` never increases across accepted rows.
pub fn check_trajectory_csv(text: &str) -> Result<bool> {
    let mut lines = text.lines();
    if lines.next() != Some(TRAJECTORY_HEADER) {
        return Err(Error::Parse {
            line: 1,
            msg: "unexpected trajectory header".into(),
        });
    }
    let mut last = f64::INFINITY;
    for (i, line) in lines.enumerate() {
        let cols: Vec<&str> = line.split(',').collect();
        let parse_err = |msg: &str| Error::Parse {
            line: i + 2,
            msg: msg.into(),
        };
        if cols.len() != 5 {
            return Err(parse_err("expected 5 columns"));
        }
        let v0: f64 = cols[2].parse().map_err(|_| parse_err("bad V0"))?;
        if cols[4] == "1" {
            if v0 > last {
                return Ok(false);
            }
            last = v0;
        }
    }
    Ok(true)
}
