//! Adaptive Dormand–Prince 5(4) integration with PI step control.
//!
//! Steps are clipped so the solver lands exactly on every requested output
//! time; there is no interpolation.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::system::{check_finite, State};

/// Time-stamped states produced by [`integrate`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<State>,
    pub x0: State,
    pub wall_time: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> &State {
        self.states.last().expect("trajectory is never empty")
    }

    pub fn dim(&self) -> usize {
        self.x0.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rtol: 1e-12,
            atol: 1e-12,
        }
    }
}

pub const MAX_STEPS: usize = 10_000_000;

/// Uniform grid `0, dt, 2dt, …, horizon` including both endpoints.
pub fn uniform_grid(horizon: f64, dt: f64) -> Result<Vec<f64>> {
    if !(horizon > 0.0 && dt > 0.0) {
        return Err(Error::Invalid(format!(
            "grid needs positive horizon and spacing, got {horizon} and {dt}"
        )));
    }
    let steps = (horizon / dt).round();
    if ((steps * dt) - horizon).abs() > 1e-9 * horizon.max(1.0) {
        return Err(Error::Invalid(format!(
            "spacing {dt} does not divide horizon {horizon}"
        )));
    }
    let steps = steps as usize;
    let mut grid: Vec<f64> = (0..=steps).map(|i| i as f64 * dt).collect();
    grid[steps] = horizon;
    Ok(grid)
}

// Dormand–Prince 5(4) tableau. The systems are autonomous, so the nodes c_i
// never appear.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
// Difference between the fifth- and fourth-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const BETA: f64 = 0.04;
const EXPO: f64 = 0.2 - BETA * 0.75;

fn axpy(y: &State, h: f64, terms: &[(f64, &State)]) -> State {
    let mut out = y.clone();
    for (c, k) in terms {
        out.axpy(h * c, k, 1.0);
    }
    out
}

fn error_norm(err: &State, y: &State, y_new: &State, tol: Tolerances) -> f64 {
    let n = err.len().max(1) as f64;
    let sum: f64 = err
        .iter()
        .zip(y.iter().zip(y_new.iter()))
        .map(|(e, (a, b))| {
            let sc = tol.atol + tol.rtol * a.abs().max(b.abs());
            (e / sc).powi(2)
        })
        .sum();
    (sum / n).sqrt()
}

fn initial_step<F>(rhs: &F, y0: &State, f0: &State, tol: Tolerances, span: f64) -> f64
where
    F: Fn(&State) -> Result<State>,
{
    let scale = |v: &State| {
        let n = v.len().max(1) as f64;
        (v.iter()
            .zip(y0.iter())
            .map(|(a, y)| (a / (tol.atol + tol.rtol * y.abs())).powi(2))
            .sum::<f64>()
            / n)
            .sqrt()
    };
    let d0 = scale(y0);
    let d1 = scale(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let h0 = h0.min(span);
    let y1 = axpy(y0, h0, &[(1.0, f0)]);
    let d2 = match rhs(&y1) {
        Ok(f1) => scale(&(f1 - f0)) / h0,
        Err(_) => return h0 * 1e-3,
    };
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(span)
}

/// Integrate `dy/dt = rhs(y)` from `y0` and record the state at every time in
/// `grid` (strictly increasing, starting at 0).
///
/// A right-hand side error inside a trial step rejects that step and shrinks
/// `h`; the run fails only when `h` underflows or the step budget runs out.
pub fn integrate<F>(rhs: F, y0: &State, grid: &[f64], tol: Tolerances) -> Result<Trajectory>
where
    F: Fn(&State) -> Result<State>,
{
    validate(grid, tol)?;
    check_finite(y0, "initial state")?;
    let started = Instant::now();
    let mut times = Vec::with_capacity(grid.len());
    let mut states = Vec::with_capacity(grid.len());
    times.push(grid[0]);
    states.push(y0.clone());

    let t_end = *grid.last().unwrap();
    let mut t = grid[0];
    let mut y = y0.clone();
    let mut k1 = rhs(&y).map_err(|e| Error::SolverFailure {
        last_time: t,
        reason: format!("initial right-hand side: {e}"),
    })?;
    check_finite(&k1, "rhs").map_err(|e| Error::SolverFailure {
        last_time: t,
        reason: e.to_string(),
    })?;
    let mut h = initial_step(&rhs, &y, &k1, tol, t_end - t);
    let mut err_old: f64 = 1e-4;
    let mut next = 1;
    let mut steps = 0usize;
    let mut reject_streak = false;

    while next < grid.len() {
        if steps >= MAX_STEPS {
            return Err(Error::SolverFailure {
                last_time: t,
                reason: format!("step budget of {MAX_STEPS} exhausted"),
            });
        }
        steps += 1;
        let target = grid[next];
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(Error::SolverFailure {
                last_time: t,
                reason: format!("step size underflow (h = {h:e})"),
            });
        }
        let mut hs = h;
        let mut lands = false;
        if t + hs >= target - 1e-14 * target.abs().max(1.0) {
            hs = target - t;
            lands = true;
        }

        let stage = (|| -> Result<(State, State, State)> {
            let k2 = rhs(&axpy(&y, hs, &[(A21, &k1)]))?;
            let k3 = rhs(&axpy(&y, hs, &[(A31, &k1), (A32, &k2)]))?;
            let k4 = rhs(&axpy(&y, hs, &[(A41, &k1), (A42, &k2), (A43, &k3)]))?;
            let k5 = rhs(&axpy(
                &y,
                hs,
                &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)],
            ))?;
            let k6 = rhs(&axpy(
                &y,
                hs,
                &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
            ))?;
            let y_new = axpy(
                &y,
                hs,
                &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
            );
            let k7 = rhs(&y_new)?;
            check_finite(&y_new, "state")?;
            check_finite(&k7, "rhs")?;
            let mut err = k1.clone() * E1;
            err.axpy(E3, &k3, 1.0);
            err.axpy(E4, &k4, 1.0);
            err.axpy(E5, &k5, 1.0);
            err.axpy(E6, &k6, 1.0);
            err.axpy(E7, &k7, 1.0);
            err *= hs;
            Ok((y_new, k7, err))
        })();

        let (y_new, k7, err) = match stage {
            Ok(v) => v,
            Err(_) => {
                h = hs * 0.25;
                reject_streak = true;
                continue;
            }
        };
        let en = error_norm(&err, &y, &y_new, tol);
        if !en.is_finite() {
            h = hs * 0.25;
            reject_streak = true;
            continue;
        }
        if en <= 1.0 {
            let en = en.max(1e-10);
            let mut fac = en.powf(-EXPO) * err_old.powf(BETA) * SAFETY;
            fac = fac.clamp(FAC_MIN, FAC_MAX);
            if reject_streak {
                fac = fac.min(1.0);
            }
            err_old = en;
            reject_streak = false;
            t = if lands { target } else { t + hs };
            y = y_new;
            k1 = k7;
            let proposed = hs * fac;
            // a step shortened to hit a grid point should not shrink the next one
            h = if lands { proposed.max(h) } else { proposed };
            if lands {
                times.push(t);
                states.push(y.clone());
                next += 1;
            }
        } else {
            let fac = (SAFETY * en.powf(-EXPO)).clamp(FAC_MIN, 1.0);
            h = hs * fac;
            reject_streak = true;
        }
    }

    Ok(Trajectory {
        times,
        states,
        x0: y0.clone(),
        wall_time: started.elapsed().as_secs_f64(),
    })
}

fn validate(grid: &[f64], tol: Tolerances) -> Result<()> {
    if grid.len() < 2 {
        return Err(Error::Invalid("time grid needs at least two points".into()));
    }
    if grid[0] != 0.0 {
        return Err(Error::Invalid("time grid must start at 0".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0] || !w[1].is_finite()) {
        return Err(Error::Invalid("time grid must be strictly increasing".into()));
    }
    for v in [tol.rtol, tol.atol] {
        if !(v > 0.0 && v <= 1e-3) {
            return Err(Error::Invalid(format!(
                "tolerance {v} outside (0, 1e-3]"
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oscillator(y: &State) -> Result<State> {
        Ok(State::from_vec(vec![y[1], -y[0]]))
    }

    #[test]
    fn harmonic_oscillator_full_period() {
        let grid = uniform_grid(2.0 * std::f64::consts::PI, 2.0 * std::f64::consts::PI / 100.0)
            .unwrap();
        let traj = integrate(
            oscillator,
            &State::from_vec(vec![1.0, 0.0]),
            &grid,
            Tolerances::default(),
        )
        .unwrap();
        let end = traj.last();
        assert!((end[0] - 1.0).abs() < 1e-9 && end[1].abs() < 1e-9, "{end}");
        assert_eq!(traj.len(), grid.len());
        assert_eq!(traj.times, grid);
    }

    #[test]
    fn exponential_decay() {
        let traj = integrate(
            |y: &State| Ok(-y),
            &State::from_vec(vec![1.0]),
            &[0.0, 1.0],
            Tolerances::default(),
        )
        .unwrap();
        assert!((traj.last()[0] - (-1.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn tighter_tolerance_reduces_error() {
        let grid = [0.0, 20.0];
        let y0 = State::from_vec(vec![1.0, 0.0]);
        let err = |tol: f64| {
            let traj = integrate(oscillator, &y0, &grid, Tolerances { rtol: tol, atol: tol }).unwrap();
            let end = traj.last();
            ((end[0] - 20f64.cos()).powi(2) + (end[1] + 20f64.sin()).powi(2)).sqrt()
        };
        let coarse = err(1e-6);
        let fine = err(1e-6 / 16.0);
        assert!(coarse >= 4.0 * fine, "coarse {coarse:e} fine {fine:e}");
    }

    #[test]
    fn deterministic() {
        let grid = uniform_grid(3.0, 0.5).unwrap();
        let y0 = State::from_vec(vec![0.3, -0.2]);
        let a = integrate(oscillator, &y0, &grid, Tolerances::default()).unwrap();
        let b = integrate(oscillator, &y0, &grid, Tolerances::default()).unwrap();
        assert_eq!(a.states, b.states);
    }

    #[test]
    fn blow_up_is_a_solver_failure() {
        // y' = y² reaches infinity at t = 1
        let err = integrate(
            |y: &State| Ok(y.map(|v| v * v)),
            &State::from_vec(vec![1.0]),
            &[0.0, 2.0],
            Tolerances::default(),
        )
        .unwrap_err();
        match err {
            Error::SolverFailure { last_time, .. } => assert!(last_time < 1.0 && last_time > 0.9),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn rhs_errors_reject_steps_until_failure() {
        let err = integrate(
            |y: &State| {
                if y[0] > 1.5 {
                    Err(Error::Domain("out".into()))
                } else {
                    Ok(State::from_vec(vec![1.0]))
                }
            },
            &State::from_vec(vec![1.0]),
            &[0.0, 1.0],
            Tolerances::default(),
        )
        .unwrap_err();
        assert!(err.is_solver_failure());
    }

    #[test]
    fn grid_validation() {
        let y0 = State::from_vec(vec![1.0]);
        let tol = Tolerances::default();
        assert!(integrate(|y: &State| Ok(-y), &y0, &[0.5, 1.0], tol).is_err());
        assert!(integrate(|y: &State| Ok(-y), &y0, &[0.0, 1.0, 1.0], tol).is_err());
        let loose = Tolerances { rtol: 0.1, atol: 1e-6 };
        assert!(integrate(|y: &State| Ok(-y), &y0, &[0.0, 1.0], loose).is_err());
    }

    #[test]
    fn uniform_grid_counts_endpoints() {
        let g = uniform_grid(8.0, 0.02).unwrap();
        assert_eq!(g.len(), 401);
        assert_eq!(g[400], 8.0);
        assert!(uniform_grid(1.0, 0.3).is_err());
    }
}
