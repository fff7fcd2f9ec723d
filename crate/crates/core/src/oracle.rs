//! Brute-force dense tensors for small systems.
//!
//! `ξ` (rank 3, totally antisymmetric) and the factors `A^α` of `ζ` are built
//! entry by entry, reduced with explicit index contractions, and used as the
//! reference the wedge-form SP-ROM is checked against. Nothing here is meant
//! for production sizes.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::system::{check_len, MetriplecticSystem, State, INDEX_FLOOR};

/// Largest dimension the dense constructions accept.
pub const MAX_DENSE_DIM: usize = 64;

/// Default bound on `‖L∇S‖_∞` and `|m^α·∇E|` before construction is refused.
pub const COMPAT_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug)]
pub struct OracleOptions {
    pub compat_tol: f64,
    pub index_floor: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            compat_tol: COMPAT_TOL,
            index_floor: INDEX_FLOOR,
        }
    }
}

/// Dense rank-3 array `ξ_{ijk}`, stored with `k` fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseXi {
    dim: usize,
    entries: Vec<f64>,
}

impl DenseXi {
    pub fn zeros(dim: usize) -> Self {
        DenseXi {
            dim,
            entries: vec![0.0; dim * dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dim + j) * self.dim + k
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.entries[self.idx(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let id = self.idx(i, j, k);
        self.entries[id] = v;
    }

    /// `ξ(v)_{ij} = ξ_{ijk} v_k`.
    pub fn contract(&self, v: &DVector<f64>) -> Result<DMatrix<f64>> {
        check_len(v, self.dim)?;
        let n = self.dim;
        Ok(DMatrix::from_fn(n, n, |i, j| {
            (0..n).map(|k| self.get(i, j, k) * v[k]).sum()
        }))
    }

    /// Largest deviation from total antisymmetry over all index triples.
    pub fn antisymmetry_defect(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let v = self.get(i, j, k);
                    worst = worst
                        .max((v + self.get(j, i, k)).abs())
                        .max((v + self.get(i, k, j)).abs())
                        .max((v + self.get(k, j, i)).abs());
                }
            }
        }
        worst
    }

    /// `ξ̂_{abc} = U_{ia} ξ_{ijk} U_{jb} U_{kc}`, one mode at a time.
    pub fn reduce(&self, u: &DMatrix<f64>) -> Result<DenseXi> {
        if u.nrows() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: u.nrows(),
            });
        }
        let big = self.dim;
        let n = u.ncols();
        // contract k
        let mut t1 = vec![0.0; big * big * n];
        for i in 0..big {
            for j in 0..big {
                for c in 0..n {
                    let mut s = 0.0;
                    for k in 0..big {
                        s += self.get(i, j, k) * u[(k, c)];
                    }
                    t1[(i * big + j) * n + c] = s;
                }
            }
        }
        // contract j
        let mut t2 = vec![0.0; big * n * n];
        for i in 0..big {
            for b in 0..n {
                for c in 0..n {
                    let mut s = 0.0;
                    for j in 0..big {
                        s += t1[(i * big + j) * n + c] * u[(j, b)];
                    }
                    t2[(i * n + b) * n + c] = s;
                }
            }
        }
        // contract i
        let mut out = DenseXi::zeros(n);
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    let mut s = 0.0;
                    for i in 0..big {
                        s += u[(i, a)] * t2[(i * n + b) * n + c];
                    }
                    out.set(a, b, c, s);
                }
            }
        }
        Ok(out)
    }
}

/// `ζ = Σ_α A^α ⊗ A^α` kept as its skew factors.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseZetaFactors {
    pub factors: Vec<DMatrix<f64>>,
}

impl DenseZetaFactors {
    pub fn dim(&self) -> Option<usize> {
        self.factors.first().map(|a| a.nrows())
    }

    /// `ζ_{ikjl} = Σ_α A^α_{ik} A^α_{jl}`.
    pub fn entry(&self, i: usize, k: usize, j: usize, l: usize) -> f64 {
        self.factors.iter().map(|a| a[(i, k)] * a[(j, l)]).sum()
    }

    /// `ζ(v, v)_{ij} = ζ_{ikjl} v_k v_l = Σ_α (A^α v)_i (A^α v)_j`.
    pub fn contract(&self, v: &DVector<f64>) -> Result<DMatrix<f64>> {
        let n = v.len();
        let mut out = DMatrix::zeros(n, n);
        for a in &self.factors {
            if a.nrows() != n {
                return Err(Error::DimensionMismatch {
                    expected: a.nrows(),
                    found: n,
                });
            }
            let av = a * v;
            out.ger(1.0, &av, &av, 1.0);
        }
        Ok(out)
    }

    pub fn skew_defect(&self) -> f64 {
        self.factors
            .iter()
            .map(|a| (a + a.transpose()).amax())
            .fold(0.0, f64::max)
    }

    /// `Â^α = Uᵀ A^α U` per factor.
    pub fn reduce(&self, u: &DMatrix<f64>) -> Result<DenseZetaFactors> {
        let factors = self
            .factors
            .iter()
            .map(|a| {
                if a.nrows() != u.nrows() {
                    return Err(Error::DimensionMismatch {
                        expected: a.nrows(),
                        found: u.nrows(),
                    });
                }
                Ok(u.tr_mul(&(a * u)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DenseZetaFactors { factors })
    }
}

/// Dense tensors that admit a Galerkin reduction.
pub trait DenseReduce: Sized {
    fn reduce_with(&self, u: &DMatrix<f64>) -> Result<Self>;
}

impl DenseReduce for DenseXi {
    fn reduce_with(&self, u: &DMatrix<f64>) -> Result<Self> {
        self.reduce(u)
    }
}

impl DenseReduce for DenseZetaFactors {
    fn reduce_with(&self, u: &DMatrix<f64>) -> Result<Self> {
        self.reduce(u)
    }
}

pub fn reduce_dense<T: DenseReduce>(tensor: &T, u: &DMatrix<f64>) -> Result<T> {
    tensor.reduce_with(u)
}

fn guard_dim(n: usize) -> Result<()> {
    if n > MAX_DENSE_DIM {
        Err(Error::TooLarge(n))
    } else {
        Ok(())
    }
}

fn guard_index(v: &DVector<f64>, k: usize, floor: f64) -> Result<f64> {
    if k >= v.len() {
        return Err(Error::Invalid(format!(
            "index {k} out of range for dimension {}",
            v.len()
        )));
    }
    if v[k].abs() <= floor {
        return Err(Error::DegenerateIndex {
            index: k,
            value: v[k],
            floor,
        });
    }
    Ok(v[k])
}

pub fn build_xi_dense(l: &DMatrix<f64>, grad_s: &DVector<f64>, k1: usize) -> Result<DenseXi> {
    build_xi_dense_with(l, grad_s, k1, OracleOptions::default())
}

/// `ξ_{ijk} = ½(C_{ijk}+C_{jki}+C_{kij}-C_{jik}-C_{kji}-C_{ikj})` with
/// `C_{ijk1} = L_ij / S^{k1}` and zero elsewhere.
pub fn build_xi_dense_with(
    l: &DMatrix<f64>,
    grad_s: &DVector<f64>,
    k1: usize,
    opts: OracleOptions,
) -> Result<DenseXi> {
    let n = grad_s.len();
    guard_dim(n)?;
    if l.nrows() != n || l.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: l.nrows(),
        });
    }
    let s_k1 = guard_index(grad_s, k1, opts.index_floor)?;
    let residual = (l * grad_s).amax();
    if residual > opts.compat_tol {
        return Err(Error::CompatibilityViolation {
            residual,
            tol: opts.compat_tol,
        });
    }
    let c = |i: usize, j: usize, k: usize| {
        if k == k1 {
            l[(i, j)] / s_k1
        } else {
            0.0
        }
    };
    let mut xi = DenseXi::zeros(n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let v = 0.5
                    * (c(i, j, k) + c(j, k, i) + c(k, i, j)
                        - c(j, i, k)
                        - c(k, j, i)
                        - c(i, k, j));
                xi.set(i, j, k, v);
            }
        }
    }
    Ok(xi)
}

pub fn build_zeta_factors(
    m_factors: &DMatrix<f64>,
    grad_e: &DVector<f64>,
    k0: usize,
) -> Result<DenseZetaFactors> {
    build_zeta_factors_with(m_factors, grad_e, k0, OracleOptions::default())
}

/// `A^α = B^α - (B^α)ᵀ` with `B^α_{i k0} = m^α_i / E^{k0}` and zero elsewhere.
pub fn build_zeta_factors_with(
    m_factors: &DMatrix<f64>,
    grad_e: &DVector<f64>,
    k0: usize,
    opts: OracleOptions,
) -> Result<DenseZetaFactors> {
    let n = grad_e.len();
    guard_dim(n)?;
    if m_factors.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: m_factors.nrows(),
        });
    }
    let e_k0 = guard_index(grad_e, k0, opts.index_floor)?;
    let mut factors = Vec::with_capacity(m_factors.ncols());
    for m in m_factors.column_iter() {
        let residual = m.dot(grad_e).abs();
        if residual > opts.compat_tol {
            return Err(Error::CompatibilityViolation {
                residual,
                tol: opts.compat_tol,
            });
        }
        let mut b = DMatrix::zeros(n, n);
        for i in 0..n {
            b[(i, k0)] = m[i] / e_k0;
        }
        factors.push(&b - b.transpose());
    }
    Ok(DenseZetaFactors { factors })
}

/// `ξ(∇S)∇E + ζ(∇E,∇E)∇S` for dense tensors of any (matching) dimension.
pub fn dense_rhs(
    xi: &DenseXi,
    zeta: &DenseZetaFactors,
    grad_e: &DVector<f64>,
    grad_s: &DVector<f64>,
) -> Result<DVector<f64>> {
    let mut out = xi.contract(grad_s)? * grad_e;
    for a in &zeta.factors {
        let ae = a * grad_e;
        out.axpy(ae.dot(grad_s), &ae, 1.0);
    }
    Ok(out)
}

/// Dense tensors of `system` at `x`.
pub fn dense_tensors(
    system: &dyn MetriplecticSystem,
    x: &State,
) -> Result<(DenseXi, DenseZetaFactors)> {
    let xi = build_xi_dense(
        &system.poisson_matrix(x)?,
        &system.grad_entropy(x)?,
        system.entropy_index(),
    )?;
    let zeta = build_zeta_factors(
        &system.metric_factors(x)?,
        &system.grad_energy(x)?,
        system.energy_index(),
    )?;
    Ok((xi, zeta))
}

/// Reference SP-ROM right-hand side: build the dense tensors at the lifted
/// state, reduce them with `U`, and contract with the reduced gradients.
pub fn dense_sprom_rhs(
    system: &dyn MetriplecticSystem,
    u: &DMatrix<f64>,
    x0: &State,
    xhat: &State,
) -> Result<DVector<f64>> {
    check_len(xhat, u.ncols())?;
    let x = x0 + u * xhat;
    let (xi, zeta) = dense_tensors(system, &x)?;
    let xi_hat = reduce_dense(&xi, u)?;
    let zeta_hat = reduce_dense(&zeta, u)?;
    let ge = u.tr_mul(&system.grad_energy(&x)?);
    let gs = u.tr_mul(&system.grad_entropy(&x)?);
    dense_rhs(&xi_hat, &zeta_hat, &ge, &gs)
}

/// Default finite-difference step for [`jacobi_residual`].
pub fn default_jacobi_step(xhat: &State) -> f64 {
    1e-5 * (1.0 + xhat.amax())
}

/// Largest cyclic sum `L_il ∂_l L_jk + L_jl ∂_l L_ki + L_kl ∂_l L_ij` over
/// `i < j < k`, derivatives by central differences with step `h`.
pub fn jacobi_residual<F>(poisson: F, xhat: &State, h: f64) -> Result<f64>
where
    F: Fn(&State) -> Result<DMatrix<f64>>,
{
    if !(h > 0.0) {
        return Err(Error::Invalid(format!("step must be positive, got {h}")));
    }
    let n = xhat.len();
    let l = poisson(xhat)?;
    let mut derivs = Vec::with_capacity(n);
    for dir in 0..n {
        let mut plus = xhat.clone();
        let mut minus = xhat.clone();
        plus[dir] += h;
        minus[dir] -= h;
        derivs.push((poisson(&plus)? - poisson(&minus)?) / (2.0 * h));
    }
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            for k in (j + 1)..n {
                let mut s = 0.0;
                for (m, d) in derivs.iter().enumerate() {
                    s += l[(i, m)] * d[(j, k)] + l[(j, m)] * d[(k, i)] + l[(k, m)] * d[(i, j)];
                }
                worst = worst.max(s.abs());
            }
        }
    }
    Ok(worst)
}
