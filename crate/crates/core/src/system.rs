//! Full-order metriplectic systems `dx/dt = L(x)∇E(x) + M(x)∇S(x)` and their
//! thermodynamic diagnostics.
//!
//! The metric operator is only ever exposed through its factors: a system
//! returns an `N × r` matrix whose columns `m^α` satisfy `M = Σ_α m^α ⊗ m^α`
//! (eigenvalue scaling already absorbed into the columns).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::rom::ReducedFactorMap;

pub type State = DVector<f64>;

/// Default lower bound on `|E^{k0}|` and `|S^{k1}|`.
pub const INDEX_FLOOR: f64 = 1e-10;

/// A full-order metriplectic system described by pure evaluators.
///
/// Implementations must be re-entrant; nothing here takes `&mut self`.
/// Component indices (`energy_index`, `entropy_index`) are zero-based.
pub trait MetriplecticSystem: Send + Sync {
    /// Short identifier used in persisted models and reports.
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    fn energy(&self, x: &State) -> Result<f64>;

    fn entropy(&self, x: &State) -> Result<f64>;

    fn grad_energy(&self, x: &State) -> Result<State>;

    fn grad_entropy(&self, x: &State) -> Result<State>;

    /// Dense Poisson matrix `L(x)`, skew-symmetric.
    fn poisson_matrix(&self, x: &State) -> Result<DMatrix<f64>>;

    /// Metric factors as the columns of an `N × r` matrix.
    fn metric_factors(&self, x: &State) -> Result<DMatrix<f64>>;

    /// Index `k0` with `E^{k0}(x) != 0` along trajectories.
    fn energy_index(&self) -> usize;

    /// Index `k1` with `S^{k1}(x) != 0` along trajectories.
    fn entropy_index(&self) -> usize;

    fn poisson_is_constant(&self) -> bool {
        false
    }

    fn entropy_gradient_is_constant(&self) -> bool {
        false
    }

    /// `L(x) v`. Override when `L` has exploitable structure.
    fn apply_poisson(&self, x: &State, v: &State) -> Result<State> {
        Ok(self.poisson_matrix(x)? * v)
    }

    /// `M(x) v = Σ_α (m^α · v) m^α`.
    fn apply_metric(&self, x: &State, v: &State) -> Result<State> {
        let c = self.metric_factors(x)?;
        Ok(&c * (c.tr_mul(v)))
    }

    /// `Uᵀ C(x)`: reduced metric factors for a basis `U` (`N × n`).
    fn project_factors(&self, x: &State, basis: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(basis.tr_mul(&self.metric_factors(x)?))
    }

    /// Optional map `x̂ ↦ Uᵀ C(x0 + U x̂)` that avoids lifting to full dimension.
    fn reduced_factor_map(
        &self,
        _basis: &DMatrix<f64>,
        _x0: &State,
    ) -> Option<Box<dyn ReducedFactorMap>> {
        None
    }
}

pub(crate) fn check_len(x: &State, n: usize) -> Result<()> {
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: x.len(),
        });
    }
    Ok(())
}

pub(crate) fn check_finite(v: &State, what: &'static str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// Build a state vector, rejecting NaN and infinities.
pub fn state(entries: &[f64]) -> Result<State> {
    let v = State::from_column_slice(entries);
    check_finite(&v, "state")?;
    Ok(v)
}

/// Full-order right-hand side `L∇E + Σ_α (m^α·∇S) m^α`.
pub fn fom_rhs(system: &dyn MetriplecticSystem, x: &State) -> Result<State> {
    check_len(x, system.dim())?;
    let ge = system.grad_energy(x)?;
    let gs = system.grad_entropy(x)?;
    let out = system.apply_poisson(x, &ge)? + system.apply_metric(x, &gs)?;
    check_finite(&out, "fom_rhs")?;
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DegeneracyReport {
    /// `‖L∇S‖_∞`
    pub lnorm: f64,
    /// `‖M∇E‖_∞`
    pub mnorm: f64,
    /// `‖L + Lᵀ‖_∞` (max entry)
    pub skew_defect: f64,
    pub pass: bool,
}

pub fn check_degeneracy(
    system: &dyn MetriplecticSystem,
    x: &State,
    tol: f64,
) -> Result<DegeneracyReport> {
    check_len(x, system.dim())?;
    let l = system.poisson_matrix(x)?;
    let ge = system.grad_energy(x)?;
    let gs = system.grad_entropy(x)?;
    let lnorm = (&l * &gs).amax();
    let mnorm = system.apply_metric(x, &ge)?.amax();
    let skew_defect = (&l + l.transpose()).amax();
    Ok(DegeneracyReport {
        lnorm,
        mnorm,
        skew_defect,
        pass: lnorm <= tol && mnorm <= tol && skew_defect <= tol,
    })
}

/// `(dE/dt, dS/dt)` at `x`. The entropy rate is returned in the Gram form
/// `Σ_α (m^α·∇S)²`, which is nonnegative by construction.
pub fn thermo_rates(system: &dyn MetriplecticSystem, x: &State) -> Result<(f64, f64)> {
    let f = fom_rhs(system, x)?;
    let ge = system.grad_energy(x)?;
    let gs = system.grad_entropy(x)?;
    let de = ge.dot(&f);
    // ∇S·L∇E vanishes when L∇S = 0; keep it so a broken system shows up here.
    let reversible = gs.dot(&system.apply_poisson(x, &ge)?);
    let c = system.metric_factors(x)?;
    let ds = reversible + c.tr_mul(&gs).norm_squared();
    Ok((de, ds))
}

/// Confirm that `|E^{k0}(x)|` and `|S^{k1}(x)|` clear `floor`.
pub fn validate_indices(system: &dyn MetriplecticSystem, x: &State, floor: f64) -> Result<()> {
    let k0 = system.energy_index();
    let k1 = system.entropy_index();
    let e = system.grad_energy(x)?[k0];
    if e.abs() <= floor {
        return Err(Error::DegenerateIndex {
            index: k0,
            value: e,
            floor,
        });
    }
    let s = system.grad_entropy(x)?[k1];
    if s.abs() <= floor {
        return Err(Error::DegenerateIndex {
            index: k1,
            value: s,
            floor,
        });
    }
    Ok(())
}

/// Dense `M = C Cᵀ` assembled from the factor list. Test and oracle use only.
pub fn dense_metric(factors: &DMatrix<f64>) -> DMatrix<f64> {
    factors * factors.transpose()
}
