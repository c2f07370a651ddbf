//! Hamiltonian flows of any [`PoissonSpace`], integrated with fixed-step RK4, with
//! conserved quantities monitored at every step.

use crate::poisson::{PoissonError, PoissonSpace, ScalarField};
use crate::report::fmt_f64;
use nalgebra::DVector;
use serde::Serialize;
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error(transparent)]
    Poisson(#[from] PoissonError),
    #[error("integration diverged at step {step} (t = {time}): {reason}")]
    Diverged { step: usize, time: f64, reason: String },
    #[error("step size must be positive and finite")]
    InvalidStep,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl DynamicsError {
    /// Last step index that produced a valid state, for divergence.
    pub fn last_valid_step(&self) -> Option<usize> {
        match self {
            DynamicsError::Diverged { step, .. } => Some(step.saturating_sub(1)),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub monitors: Vec<(String, Vec<f64>)>,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Drift {
    pub name: String,
    pub initial: f64,
    pub max_drift: f64,
}

/// `v_i = {x_i, H}`.
pub fn ham_vector_field(space: &PoissonSpace, h: &ScalarField, x: &DVector<f64>) -> Result<DVector<f64>, PoissonError> {
    space.vector_field(h, x)
}

fn rk4_step(space: &PoissonSpace, h: &ScalarField, x: &DVector<f64>, dt: f64) -> Result<DVector<f64>, PoissonError> {
    let k1 = ham_vector_field(space, h, x)?;
    let k2 = ham_vector_field(space, h, &(x + &k1 * (dt / 2.0)))?;
    let k3 = ham_vector_field(space, h, &(x + &k2 * (dt / 2.0)))?;
    let k4 = ham_vector_field(space, h, &(x + &k3 * dt))?;
    Ok(x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0))
}

/// `n_steps` RK4 steps of size `dt` from `x0`, evaluating `monitors` at every state.
pub fn integrate(
    space: &PoissonSpace,
    h: &ScalarField,
    x0: &DVector<f64>,
    dt: f64,
    n_steps: usize,
    monitors: &[(String, ScalarField)],
) -> Result<Trajectory, DynamicsError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(DynamicsError::InvalidStep);
    }
    space.check_point(x0)?;
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut states = Vec::with_capacity(n_steps + 1);
    let mut series: Vec<(String, Vec<f64>)> = monitors.iter().map(|(n, _)| (n.clone(), Vec::with_capacity(n_steps + 1))).collect();
    let mut x = x0.clone();
    for step in 0..=n_steps {
        let t = step as f64 * dt;
        if step > 0 {
            let diverged = |reason: String| DynamicsError::Diverged { step, time: t, reason };
            x = match rk4_step(space, h, &x, dt) {
                Ok(y) => y,
                Err(PoissonError::OutOfChart(r)) => return Err(diverged(r)),
                Err(e) => return Err(e.into()),
            };
            if !x.iter().all(|v| v.is_finite()) {
                return Err(diverged("non-finite state".into()));
            }
        }
        for ((_, f), (_, s)) in monitors.iter().zip(series.iter_mut()) {
            s.push(f.eval(&x));
        }
        times.push(t);
        states.push(x.clone());
    }
    Ok(Trajectory {
        times,
        states,
        monitors: series,
    })
}

/// Per monitor, `max |Q(t) - Q(0)|`.
pub fn monitor(traj: &Trajectory) -> Vec<Drift> {
    traj.monitors
        .iter()
        .map(|(name, s)| {
            let q0 = s.first().copied().unwrap_or(0.0);
            Drift {
                name: name.clone(),
                initial: q0,
                max_drift: s.iter().fold(0.0_f64, |m, q| m.max((q - q0).abs())),
            }
        })
        .collect()
}

/// Empirical order: endpoint errors at `dt` and `dt/2` against a run at `dt/16`.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Convergence {
    pub dt: f64,
    pub t_end: f64,
    pub error_coarse: f64,
    pub error_fine: f64,
    pub ratio: f64,
}

pub fn convergence_ratio(space: &PoissonSpace, h: &ScalarField, x0: &DVector<f64>, dt: f64, n_steps: usize) -> Result<Convergence, DynamicsError> {
    let end = |k: usize| -> Result<DVector<f64>, DynamicsError> {
        let t = integrate(space, h, x0, dt / k as f64, n_steps * k, &[])?;
        Ok(t.states.last().expect("at least one state").clone())
    };
    let reference = end(16)?;
    let e1 = (end(1)? - &reference).amax();
    let e2 = (end(2)? - &reference).amax();
    Ok(Convergence {
        dt,
        t_end: dt * n_steps as f64,
        error_coarse: e1,
        error_fine: e2,
        ratio: e1 / e2,
    })
}

/// CSV with header `time,x1..xn,<monitors>`.
pub fn write_csv(traj: &Trajectory, out: impl Write) -> Result<(), DynamicsError> {
    let mut w = csv::Writer::from_writer(out);
    let n = traj.states.first().map_or(0, |s| s.len());
    let mut header = vec!["time".to_string()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    header.extend(traj.monitors.iter().map(|(name, _)| name.clone()));
    w.write_record(&header)?;
    for (i, (t, x)) in traj.times.iter().zip(&traj.states).enumerate() {
        let mut row = vec![fmt_f64(*t)];
        row.extend(x.iter().map(|v| fmt_f64(*v)));
        row.extend(traj.monitors.iter().map(|(_, s)| fmt_f64(s[i])));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
