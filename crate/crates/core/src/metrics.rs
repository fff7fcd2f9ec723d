//! Trajectory error metrics and thermodynamic diagnostics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::Trajectory;
use crate::rom::RomModel;
use crate::system::{MetriplecticSystem, State};

/// `rel = sqrt(Σ‖x_i - x̃_i‖² / Σ‖x_i‖²)` as a fraction, `max = max_i ‖x_i - x̃_i‖`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorMetrics {
    pub rel: f64,
    pub max: f64,
}

fn check_grids(a: &Trajectory, b: &Trajectory) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::GridMismatch(format!(
            "{} samples against {}",
            a.len(),
            b.len()
        )));
    }
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    for (i, (s, t)) in a.times.iter().zip(&b.times).enumerate() {
        if (s - t).abs() > 1e-12 * s.abs().max(1.0) {
            return Err(Error::GridMismatch(format!("sample {i}: t = {s} against {t}")));
        }
    }
    Ok(())
}

/// Both trajectories must hold full states on the same grid; lift ROM output
/// with [`lift_trajectory`] first.
pub fn error_metrics(reference: &Trajectory, approx: &Trajectory) -> Result<ErrorMetrics> {
    check_grids(reference, approx)?;
    let mut num = 0.0;
    let mut den = 0.0;
    let mut max = 0.0f64;
    for (x, y) in reference.states.iter().zip(&approx.states) {
        let d = (x - y).norm_squared();
        num += d;
        den += x.norm_squared();
        max = max.max(d.sqrt());
    }
    let rel = if den > 0.0 {
        (num / den).sqrt()
    } else if num == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(ErrorMetrics { rel, max })
}

/// [`error_metrics`] against a reduced trajectory, lifting one sample at a
/// time instead of materialising the lifted trajectory.
pub fn rom_error_metrics(
    reference: &Trajectory,
    model: &RomModel,
    reduced: &Trajectory,
) -> Result<ErrorMetrics> {
    if reference.len() != reduced.len() {
        return Err(Error::GridMismatch(format!(
            "{} samples against {}",
            reference.len(),
            reduced.len()
        )));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    let mut max = 0.0f64;
    for ((t, x), (s, xhat)) in reference
        .times
        .iter()
        .zip(&reference.states)
        .zip(reduced.times.iter().zip(&reduced.states))
    {
        if (t - s).abs() > 1e-12 * t.abs().max(1.0) {
            return Err(Error::GridMismatch(format!("t = {t} against {s}")));
        }
        let d = (x - model.lift(xhat)?).norm_squared();
        num += d;
        den += x.norm_squared();
        max = max.max(d.sqrt());
    }
    let rel = if den > 0.0 { (num / den).sqrt() } else { 0.0 };
    Ok(ErrorMetrics { rel, max })
}

/// Map reduced states to `x0 + U x̂`.
pub fn lift_trajectory(model: &RomModel, reduced: &Trajectory) -> Result<Trajectory> {
    let states = reduced
        .states
        .iter()
        .map(|s| model.lift(s))
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectory {
        times: reduced.times.clone(),
        x0: model.lift(&reduced.x0)?,
        states,
        wall_time: reduced.wall_time,
    })
}

fn lifted(model: Option<&RomModel>, s: &State) -> Result<State> {
    match model {
        Some(m) => m.lift(s),
        None => Ok(s.clone()),
    }
}

/// `|E(x(T)) - E(x(0))|`, lifting through `model` when given.
pub fn energy_drift(
    system: &dyn MetriplecticSystem,
    trajectory: &Trajectory,
    model: Option<&RomModel>,
) -> Result<f64> {
    let first = trajectory
        .states
        .first()
        .ok_or_else(|| Error::Invalid("empty trajectory".into()))?;
    let e0 = system.energy(&lifted(model, first)?)?;
    let e1 = system.energy(&lifted(model, trajectory.last())?)?;
    Ok((e1 - e0).abs())
}

pub fn energy_series(
    system: &dyn MetriplecticSystem,
    trajectory: &Trajectory,
    model: Option<&RomModel>,
) -> Result<Vec<f64>> {
    trajectory
        .states
        .iter()
        .map(|s| system.energy(&lifted(model, s)?))
        .collect()
}

pub fn entropy_series(
    system: &dyn MetriplecticSystem,
    trajectory: &Trajectory,
    model: Option<&RomModel>,
) -> Result<Vec<f64>> {
    trajectory
        .states
        .iter()
        .map(|s| system.entropy(&lifted(model, s)?))
        .collect()
}

/// Smallest increment between consecutive samples; negative means a decrease.
pub fn min_increment(series: &[f64]) -> f64 {
    series
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min)
}
