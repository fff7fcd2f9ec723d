//! Reduced-order models on a POD basis `x ≈ x̃ = x0 + U x̂`.
//!
//! Three closures are provided:
//!
//! * **G-ROM**: plain Galerkin projection `Uᵀ[L∇E + M∇S](x̃)`.
//! * **EH-ROM**: `L̄∇Ê + M̄∇Ŝ` with `L̄ = UᵀLU` and `M̄ = (UᵀC)(UᵀC)ᵀ`; skew and
//!   PSD but without the degeneracy conditions.
//! * **SP-ROM**: reduced tensors `ξ̂ = L̄ ∧ ŝ_{k1}` and
//!   `Â^α = â^α_{k0} ∧ U^{k0}`, evaluated without forming any tensor. Energy
//!   is conserved and entropy produced for every `U`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pod::PodBasis;
use crate::system::{check_len, fom_rhs, MetriplecticSystem, State, INDEX_FLOOR};

/// Map `x̂ ↦ UᵀC(x0 + Ux̂)` registered by a system with exploitable structure.
pub trait ReducedFactorMap: Send + Sync {
    fn reduced_factors(&self, xhat: &State) -> Result<DMatrix<f64>>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RomVariant {
    #[serde(rename = "G")]
    Galerkin,
    #[serde(rename = "EH")]
    Symmetric,
    #[serde(rename = "SP")]
    StructurePreserving,
}

impl RomVariant {
    pub const ALL: [RomVariant; 3] = [
        RomVariant::StructurePreserving,
        RomVariant::Symmetric,
        RomVariant::Galerkin,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            RomVariant::Galerkin => "G",
            RomVariant::Symmetric => "EH",
            RomVariant::StructurePreserving => "SP",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            RomVariant::Galerkin => "G-ROM",
            RomVariant::Symmetric => "EH-ROM",
            RomVariant::StructurePreserving => "SP-ROM",
        }
    }
}

impl fmt::Display for RomVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for RomVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "G" | "G-ROM" => Ok(RomVariant::Galerkin),
            "EH" | "EH-ROM" => Ok(RomVariant::Symmetric),
            "SP" | "SP-ROM" => Ok(RomVariant::StructurePreserving),
            other => Err(Error::Invalid(format!("unknown ROM variant {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct RomOptions {
    /// Use the system's reduced factor map when it provides one.
    pub use_factor_hook: bool,
    pub index_floor: f64,
}

impl Default for RomOptions {
    fn default() -> Self {
        RomOptions {
            use_factor_hook: true,
            index_floor: INDEX_FLOOR,
        }
    }
}

pub struct RomModel {
    variant: RomVariant,
    basis: PodBasis,
    x0: State,
    system: Arc<dyn MetriplecticSystem>,
    lbar: Option<DMatrix<f64>>,
    row_k0: DVector<f64>,
    row_k1: DVector<f64>,
    grad_entropy_hat: Option<DVector<f64>>,
    factor_map: Option<Box<dyn ReducedFactorMap>>,
    floor: f64,
}

impl fmt::Debug for RomModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RomModel")
            .field("variant", &self.variant)
            .field("system", &self.system.name())
            .field("n", &self.basis.n())
            .field("factor_hook", &self.factor_map.is_some())
            .finish()
    }
}

fn build(
    variant: RomVariant,
    system: Arc<dyn MetriplecticSystem>,
    basis: PodBasis,
    x0: State,
    opts: RomOptions,
) -> Result<RomModel> {
    check_len(&x0, system.dim())?;
    if basis.dim() != system.dim() {
        return Err(Error::DimensionMismatch {
            expected: system.dim(),
            found: basis.dim(),
        });
    }
    let u = &basis.u;
    let lbar = if system.poisson_is_constant() {
        let l = system.poisson_matrix(&x0)?;
        Some(u.tr_mul(&(l * u)))
    } else {
        None
    };
    let grad_entropy_hat = if system.entropy_gradient_is_constant() {
        Some(u.tr_mul(&system.grad_entropy(&x0)?))
    } else {
        None
    };
    let factor_map = if opts.use_factor_hook {
        system.reduced_factor_map(u, &x0)
    } else {
        None
    };
    let row_k0 = u.row(system.energy_index()).transpose();
    let row_k1 = u.row(system.entropy_index()).transpose();
    Ok(RomModel {
        variant,
        basis,
        x0,
        system,
        lbar,
        row_k0,
        row_k1,
        grad_entropy_hat,
        factor_map,
        floor: opts.index_floor,
    })
}

/// Naive Galerkin ROM.
pub fn build_grom(
    system: Arc<dyn MetriplecticSystem>,
    basis: PodBasis,
    x0: State,
) -> Result<RomModel> {
    build(RomVariant::Galerkin, system, basis, x0, RomOptions::default())
}

/// Symmetry-informed ROM with `L̄ = UᵀLU`, `M̄ = UᵀMU`.
pub fn build_ehrom(
    system: Arc<dyn MetriplecticSystem>,
    basis: PodBasis,
    x0: State,
) -> Result<RomModel> {
    build(RomVariant::Symmetric, system, basis, x0, RomOptions::default())
}

/// Structure-preserving metriplectic ROM.
pub fn build_sprom(
    system: Arc<dyn MetriplecticSystem>,
    basis: PodBasis,
    x0: State,
) -> Result<RomModel> {
    build_rom(
        RomVariant::StructurePreserving,
        system,
        basis,
        x0,
        RomOptions::default(),
    )
}

pub fn build_rom(
    variant: RomVariant,
    system: Arc<dyn MetriplecticSystem>,
    basis: PodBasis,
    x0: State,
    opts: RomOptions,
) -> Result<RomModel> {
    let model = build(variant, system, basis, x0, opts)?;
    if variant == RomVariant::StructurePreserving {
        model.index_components(&model.x0)?;
    }
    Ok(model)
}

impl RomModel {
    pub fn variant(&self) -> RomVariant {
        self.variant
    }

    pub fn basis(&self) -> &PodBasis {
        &self.basis
    }

    pub fn u(&self) -> &DMatrix<f64> {
        &self.basis.u
    }

    pub fn n(&self) -> usize {
        self.basis.n()
    }

    pub fn x0(&self) -> &State {
        &self.x0
    }

    pub fn system(&self) -> &dyn MetriplecticSystem {
        self.system.as_ref()
    }

    pub fn has_factor_hook(&self) -> bool {
        self.factor_map.is_some()
    }

    /// Reduced initial condition; always the origin.
    pub fn initial_state(&self) -> State {
        DVector::zeros(self.n())
    }

    /// `x̃ = x0 + U x̂`.
    pub fn lift(&self, xhat: &State) -> Result<State> {
        check_len(xhat, self.n())?;
        let mut x = self.x0.clone();
        x.gemv(1.0, &self.basis.u, xhat, 1.0);
        Ok(x)
    }

    /// `Uᵀ (x - x0)`.
    pub fn project(&self, x: &State) -> Result<State> {
        check_len(x, self.x0.len())?;
        Ok(self.basis.u.tr_mul(&(x - &self.x0)))
    }

    /// `L̄ = UᵀL(x̃)U`.
    pub fn reduced_poisson_bar(&self, x: &State) -> Result<DMatrix<f64>> {
        match &self.lbar {
            Some(l) => Ok(l.clone()),
            None => {
                let u = &self.basis.u;
                Ok(u.tr_mul(&(self.system.poisson_matrix(x)? * u)))
            }
        }
    }

    fn with_lbar<T>(&self, x: &State, f: impl FnOnce(&DMatrix<f64>) -> T) -> Result<T> {
        match &self.lbar {
            Some(l) => Ok(f(l)),
            None => Ok(f(&self.reduced_poisson_bar(x)?)),
        }
    }

    /// Reduced gradients `(∇Ê, ∇Ŝ) = (Uᵀ∇E(x̃), Uᵀ∇S(x̃))`.
    pub fn reduced_gradients(&self, x: &State) -> Result<(State, State)> {
        let ge = self.basis.u.tr_mul(&self.system.grad_energy(x)?);
        let gs = match &self.grad_entropy_hat {
            Some(g) => g.clone(),
            None => self.basis.u.tr_mul(&self.system.grad_entropy(x)?),
        };
        Ok((ge, gs))
    }

    /// Reduced metric factors `UᵀC(x̃)` (`n × r`), through the registered hook
    /// when there is one.
    pub fn reduced_factors(&self, xhat: &State) -> Result<DMatrix<f64>> {
        match &self.factor_map {
            Some(map) => map.reduced_factors(xhat),
            None => {
                let x = self.lift(xhat)?;
                self.system.project_factors(&x, &self.basis.u)
            }
        }
    }

    fn factors_at(&self, xhat: &State, x: &State) -> Result<DMatrix<f64>> {
        match &self.factor_map {
            Some(map) => map.reduced_factors(xhat),
            None => self.system.project_factors(x, &self.basis.u),
        }
    }

    /// `(E^{k0}(x̃), S^{k1}(x̃))`, checked against the floor.
    fn index_components(&self, x: &State) -> Result<(f64, f64)> {
        let k0 = self.system.energy_index();
        let k1 = self.system.entropy_index();
        let e = self.system.grad_energy(x)?[k0];
        let s = self.system.grad_entropy(x)?[k1];
        if e.abs() <= self.floor {
            return Err(Error::DegenerateIndex {
                index: k0,
                value: e,
                floor: self.floor,
            });
        }
        if s.abs() <= self.floor {
            return Err(Error::DegenerateIndex {
                index: k1,
                value: s,
                floor: self.floor,
            });
        }
        Ok((e, s))
    }

    /// Reduced right-hand side for this model's variant.
    pub fn rhs(&self, xhat: &State) -> Result<State> {
        match self.variant {
            RomVariant::Galerkin => self.grom_rhs(xhat),
            RomVariant::Symmetric => self.ehrom_rhs(xhat),
            RomVariant::StructurePreserving => self.sp_rhs(xhat),
        }
    }

    fn grom_rhs(&self, xhat: &State) -> Result<State> {
        let x = self.lift(xhat)?;
        Ok(self.basis.u.tr_mul(&fom_rhs(self.system.as_ref(), &x)?))
    }

    fn ehrom_rhs(&self, xhat: &State) -> Result<State> {
        let x = self.lift(xhat)?;
        let (ge, gs) = self.reduced_gradients(&x)?;
        let f = self.factors_at(xhat, &x)?;
        let mut out = &f * f.tr_mul(&gs);
        self.with_lbar(&x, |l| out.gemv(1.0, l, &ge, 1.0))?;
        Ok(out)
    }

    fn sp_rhs(&self, xhat: &State) -> Result<State> {
        let x = self.lift(xhat)?;
        let (ge, gs) = self.reduced_gradients(&x)?;
        let (e_k0, s_k1) = self.index_components(&x)?;
        let s_hat = &self.row_k1 / s_k1;

        // reversible part: ξ̂(∇Ŝ)∇Ê with ξ̂ = L̄ ∧ ŝ_{k1}
        let mut out = self.with_lbar(&x, |l| {
            let l_gs = l * &gs;
            let l_ge = l * &ge;
            let mut r = &s_hat * ge.dot(&l_gs);
            r.axpy(-s_hat.dot(&ge), &l_gs, 1.0);
            r.axpy(s_hat.dot(&gs), &l_ge, 1.0);
            r
        })?;

        // irreversible part: Σ_α (Â^α∇Ê·∇Ŝ) Â^α∇Ê with Â^α = â^α ∧ U^{k0}
        let a = self.factors_at(xhat, &x)? / e_k0;
        let g0 = ge.dot(&self.row_k0);
        let d = a.tr_mul(&ge);
        let mut v = a * g0;
        v.ger(-1.0, &self.row_k0, &d, 1.0);
        let coeff = v.tr_mul(&gs);
        out.gemv(1.0, &v, &coeff, 1.0);
        Ok(out)
    }

    /// SP-ROM Poisson matrix `L̂ = ξ̂(∇Ŝ)` at `x̂`.
    pub fn sp_poisson(&self, xhat: &State) -> Result<DMatrix<f64>> {
        let x = self.lift(xhat)?;
        let (_, gs) = self.reduced_gradients(&x)?;
        let (_, s_k1) = self.index_components(&x)?;
        let s_hat = &self.row_k1 / s_k1;
        self.with_lbar(&x, |l| {
            let l_gs = l * &gs;
            let mut out = l * s_hat.dot(&gs);
            out.ger(1.0, &s_hat, &l_gs, 1.0);
            out.ger(-1.0, &l_gs, &s_hat, 1.0);
            out
        })
    }

    /// SP-ROM metric matrix `M̂ = ζ̂(∇Ê, ∇Ê) = Σ_α (Â^α∇Ê)(Â^α∇Ê)ᵀ` at `x̂`.
    pub fn sp_metric(&self, xhat: &State) -> Result<DMatrix<f64>> {
        let x = self.lift(xhat)?;
        let (ge, _) = self.reduced_gradients(&x)?;
        let (e_k0, _) = self.index_components(&x)?;
        let a = self.factors_at(xhat, &x)? / e_k0;
        let g0 = ge.dot(&self.row_k0);
        let d = a.tr_mul(&ge);
        let mut v = a * g0;
        v.ger(-1.0, &self.row_k0, &d, 1.0);
        Ok(&v * v.transpose())
    }

    /// Reduced wedge factors `â^α_{k0}` (columns) and the row `U^{k0}`.
    pub fn sp_wedge_factors(&self, xhat: &State) -> Result<(DMatrix<f64>, DVector<f64>)> {
        let x = self.lift(xhat)?;
        let (e_k0, _) = self.index_components(&x)?;
        Ok((self.factors_at(xhat, &x)? / e_k0, self.row_k0.clone()))
    }

    /// `ŝ_{k1} = U^{k1} / S^{k1}(x̃)`.
    pub fn sp_entropy_direction(&self, xhat: &State) -> Result<DVector<f64>> {
        let x = self.lift(xhat)?;
        let (_, s_k1) = self.index_components(&x)?;
        Ok(&self.row_k1 / s_k1)
    }

    /// EH-ROM metric `M̄ = (UᵀC)(UᵀC)ᵀ` at `x̂`.
    pub fn eh_metric(&self, xhat: &State) -> Result<DMatrix<f64>> {
        let f = self.reduced_factors(xhat)?;
        Ok(&f * f.transpose())
    }
}

/// SP-ROM right-hand side; rejects models of any other variant.
pub fn sprom_rhs(model: &RomModel, xhat: &State) -> Result<State> {
    if model.variant != RomVariant::StructurePreserving {
        return Err(Error::Invalid(format!(
            "sprom_rhs called on a {} model",
            model.variant.label()
        )));
    }
    model.sp_rhs(xhat)
}

pub fn lift(model: &RomModel, xhat: &State) -> Result<State> {
    model.lift(xhat)
}
