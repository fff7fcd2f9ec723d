//! Gradient-augmented snapshot assembly and proper orthogonal decomposition.

use nalgebra::{DMatrix, DVector, SVD};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::Trajectory;
use crate::system::MetriplecticSystem;

/// Relative singular-value threshold below which a direction is treated as
/// numerically absent.
pub const RANK_TOL: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ColumnKind {
    StateShift,
    EnergyGradient,
    EntropyGradient,
}

/// Snapshot columns `w(t_i) = x(t_i) - x0`, `μ∇E(x(t_i))` and `ν∇S(x(t_i))`.
#[derive(Clone, Debug)]
pub struct SnapshotMatrix {
    pub columns: DMatrix<f64>,
    pub mu: f64,
    pub nu: f64,
    pub kinds: Vec<ColumnKind>,
}

impl SnapshotMatrix {
    pub fn nrows(&self) -> usize {
        self.columns.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.columns.ncols()
    }

    pub fn count(&self, kind: ColumnKind) -> usize {
        self.kinds.iter().filter(|k| **k == kind).count()
    }
}

/// Build the snapshot matrix from training trajectories.
///
/// Each trajectory contributes its block of shifted states followed by its
/// block of scaled energy gradients. With `dedupe_constant_grad_entropy` set
/// and a state-independent `∇S`, a single `ν∇S` column is appended at the
/// very end; otherwise each trajectory also contributes a `ν∇S` block.
pub fn assemble_snapshots(
    trajectories: &[Trajectory],
    system: &dyn MetriplecticSystem,
    mu: f64,
    nu: f64,
    dedupe_constant_grad_entropy: bool,
) -> Result<SnapshotMatrix> {
    let first = trajectories
        .first()
        .ok_or_else(|| Error::Invalid("no training trajectories".into()))?;
    let dim = system.dim();
    for t in trajectories {
        if t.dim() != dim || t.states.iter().any(|s| s.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: t.dim(),
            });
        }
    }
    let dedupe = dedupe_constant_grad_entropy && system.entropy_gradient_is_constant();

    let blocks: Vec<(Vec<DVector<f64>>, Vec<ColumnKind>)> = trajectories
        .par_iter()
        .map(|traj| -> Result<_> {
            let k = traj.len();
            let mut cols = Vec::with_capacity(3 * k);
            let mut kinds = Vec::with_capacity(3 * k);
            for s in &traj.states {
                cols.push(s - &traj.x0);
                kinds.push(ColumnKind::StateShift);
            }
            for s in &traj.states {
                cols.push(system.grad_energy(s)? * mu);
                kinds.push(ColumnKind::EnergyGradient);
            }
            if !dedupe {
                for s in &traj.states {
                    cols.push(system.grad_entropy(s)? * nu);
                    kinds.push(ColumnKind::EntropyGradient);
                }
            }
            Ok((cols, kinds))
        })
        .collect::<Result<_>>()?;

    let mut cols: Vec<DVector<f64>> = Vec::new();
    let mut kinds = Vec::new();
    for (c, k) in blocks {
        cols.extend(c);
        kinds.extend(k);
    }
    if dedupe {
        cols.push(system.grad_entropy(&first.x0)? * nu);
        kinds.push(ColumnKind::EntropyGradient);
    }
    Ok(SnapshotMatrix {
        columns: DMatrix::from_columns(&cols),
        mu,
        nu,
        kinds,
    })
}

/// Orthonormal POD basis together with the full singular spectrum of the
/// snapshot matrix it was computed from.
#[derive(Clone, Debug, PartialEq)]
pub struct PodBasis {
    pub u: DMatrix<f64>,
    pub singular_values: Vec<f64>,
}

impl PodBasis {
    pub fn n(&self) -> usize {
        self.u.ncols()
    }

    pub fn dim(&self) -> usize {
        self.u.nrows()
    }

    /// Numerical rank of the source snapshot matrix.
    pub fn rank(&self) -> usize {
        numerical_rank(&self.singular_values)
    }

    /// Keep the leading `n` columns.
    pub fn truncate(&self, n: usize) -> Result<PodBasis> {
        if n == 0 || n > self.n() {
            return Err(Error::Invalid(format!(
                "cannot truncate a rank-{} basis to {n}",
                self.n()
            )));
        }
        Ok(PodBasis {
            u: self.u.columns(0, n).into_owned(),
            singular_values: self.singular_values.clone(),
        })
    }

    /// `max |UᵀU - I|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let g = self.u.tr_mul(&self.u) - DMatrix::identity(self.n(), self.n());
        g.amax()
    }

    /// `Σ_{j>n} σ_j²` for the retained rank `n`.
    pub fn tail_energy(&self) -> f64 {
        self.singular_values.iter().skip(self.n()).map(|s| s * s).sum()
    }
}

fn numerical_rank(sigma: &[f64]) -> usize {
    match sigma.first() {
        Some(&s1) if s1 > 0.0 => sigma.iter().filter(|s| **s / s1 >= RANK_TOL).count(),
        _ => 0,
    }
}

/// Left singular vectors and singular values of `y`, sorted descending.
///
/// Wide matrices are first reduced by a QR factorization of `yᵀ`; the left
/// singular vectors of `y = Rᵀ Qᵀ` are those of the square factor `Rᵀ`.
pub fn left_singular(y: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let square = if y.ncols() > y.nrows() {
        let r = y.transpose().qr().r();
        r.transpose()
    } else {
        y.clone()
    };
    let svd = SVD::new(square, true, false);
    let u = svd.u.expect("left singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|a, b| svd.singular_values[*b].total_cmp(&svd.singular_values[*a]));
    let sigma = order.iter().map(|&i| svd.singular_values[i]).collect();
    let cols: Vec<_> = order.iter().map(|&i| u.column(i).into_owned()).collect();
    (DMatrix::from_columns(&cols), sigma)
}

/// Flip each column so its entry of largest magnitude is nonnegative
/// (ties go to the lowest row index).
pub fn fix_signs(u: &mut DMatrix<f64>) {
    for mut col in u.column_iter_mut() {
        let mut best = 0;
        for i in 1..col.len() {
            if col[i].abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < 0.0 {
            col.neg_mut();
        }
    }
}

/// POD basis of rank `n` from the thin SVD of the snapshot matrix.
pub fn compute_basis(y: &SnapshotMatrix, n: usize) -> Result<PodBasis> {
    compute_basis_from_matrix(&y.columns, n)
}

pub fn compute_basis_from_matrix(y: &DMatrix<f64>, n: usize) -> Result<PodBasis> {
    if n == 0 {
        return Err(Error::Invalid("basis rank must be at least 1".into()));
    }
    let (full, sigma) = left_singular(y);
    let rank = numerical_rank(&sigma);
    if n > rank {
        return Err(Error::RankDeficient { requested: n, rank });
    }
    let mut u = full.columns(0, n).into_owned();
    fix_signs(&mut u);
    let singular_values = sigma.into_iter().filter(|s| *s > 0.0).collect();
    Ok(PodBasis { u, singular_values })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProjectionResidual {
    pub residual_sq: f64,
    pub tail_sq: f64,
    pub rel_gap: f64,
}

/// Compare the snapshot projection residual `Σ_cols ‖(I - UUᵀ) col‖²` with the
/// singular-value tail `Σ_{j>n} σ_j²`; the two agree for a POD basis.
pub fn projection_residual(basis: &PodBasis, y: &SnapshotMatrix) -> Result<ProjectionResidual> {
    if basis.dim() != y.nrows() {
        return Err(Error::DimensionMismatch {
            expected: y.nrows(),
            found: basis.dim(),
        });
    }
    let coeffs = basis.u.tr_mul(&y.columns);
    let residual = &y.columns - &basis.u * coeffs;
    let residual_sq = residual.norm_squared();
    let tail_sq = basis.tail_energy();
    let floor = f64::EPSILON * y.columns.norm_squared();
    Ok(ProjectionResidual {
        residual_sq,
        tail_sq,
        rel_gap: (residual_sq - tail_sq).abs() / tail_sq.max(floor),
    })
}

/// Sine of the largest principal angle between the column spans of two
/// orthonormal matrices with the same number of columns.
pub fn subspace_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let residual = b - a * a.tr_mul(b);
    residual.singular_values().max()
}

/// Orthonormal basis for the column span of `m` (thin QR).
pub fn orthonormalize(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.clone().qr().q()
}
