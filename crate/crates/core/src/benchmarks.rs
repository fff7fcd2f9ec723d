//! The two benchmark systems: a pair of gas containers exchanging heat and
//! volume, and a damped thermoelastic rod semi-discretized on a uniform grid.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rom::ReducedFactorMap;
use crate::system::{check_len, MetriplecticSystem, State};

/// Gas experiment parameters. Units are normalized so that the wall mass,
/// `N k_B` and the entropy constant are all 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GasParams {
    pub gamma: f64,
}

impl Default for GasParams {
    fn default() -> Self {
        GasParams { gamma: 8.0 }
    }
}

/// Initial-condition box for gas training runs: `q, p, S1, S2`.
pub const GAS_IC_BOX: [(f64, f64); 4] = [(0.08, 1.8), (-1.0, 1.0), (1.0, 3.0), (1.0, 3.0)];

/// Held-out gas test state.
pub const GAS_TEST_IC: [f64; 4] = [0.9, -0.4, 2.4, 2.0];

/// State `(q, p, S1, S2)`; wall position `q ∈ (0, 2)`.
#[derive(Clone, Debug)]
pub struct GasSystem {
    params: GasParams,
}

pub fn gas_system(params: GasParams) -> Result<GasSystem> {
    if !(params.gamma > 0.0) {
        return Err(Error::Invalid(format!(
            "gas heat-transfer rate must be positive, got {}",
            params.gamma
        )));
    }
    Ok(GasSystem { params })
}

impl GasSystem {
    pub fn params(&self) -> GasParams {
        self.params
    }

    /// Internal energies `(E1, E2)` of the two containers.
    pub fn container_energies(&self, x: &State) -> Result<(f64, f64)> {
        check_len(x, 4)?;
        let q = x[0];
        if !(q > 0.0 && q < 2.0) {
            return Err(Error::Domain(format!("wall position q = {q} outside (0, 2)")));
        }
        let e1 = (2.0 * x[2] / 3.0).exp() * q.powf(-2.0 / 3.0);
        let e2 = (2.0 * x[3] / 3.0).exp() * (2.0 - q).powf(-2.0 / 3.0);
        if !(e1.is_finite() && e2.is_finite()) {
            return Err(Error::NonFinite("gas container energy"));
        }
        Ok((e1, e2))
    }

    /// Temperatures `T_i = (2/3) E_i`.
    pub fn temperatures(&self, x: &State) -> Result<(f64, f64)> {
        let (e1, e2) = self.container_energies(x)?;
        Ok((2.0 * e1 / 3.0, 2.0 * e2 / 3.0))
    }
}

impl MetriplecticSystem for GasSystem {
    fn name(&self) -> &str {
        "gas"
    }

    fn dim(&self) -> usize {
        4
    }

    fn energy(&self, x: &State) -> Result<f64> {
        let (e1, e2) = self.container_energies(x)?;
        Ok(0.5 * x[1] * x[1] + e1 + e2)
    }

    fn entropy(&self, x: &State) -> Result<f64> {
        check_len(x, 4)?;
        Ok(x[2] + x[3])
    }

    fn grad_energy(&self, x: &State) -> Result<State> {
        let (e1, e2) = self.container_energies(x)?;
        let q = x[0];
        Ok(DVector::from_vec(vec![
            2.0 / 3.0 * (e2 / (2.0 - q) - e1 / q),
            x[1],
            2.0 * e1 / 3.0,
            2.0 * e2 / 3.0,
        ]))
    }

    fn grad_entropy(&self, x: &State) -> Result<State> {
        check_len(x, 4)?;
        Ok(DVector::from_vec(vec![0.0, 0.0, 1.0, 1.0]))
    }

    fn poisson_matrix(&self, x: &State) -> Result<DMatrix<f64>> {
        check_len(x, 4)?;
        let mut l = DMatrix::zeros(4, 4);
        l[(0, 1)] = 1.0;
        l[(1, 0)] = -1.0;
        Ok(l)
    }

    fn metric_factors(&self, x: &State) -> Result<DMatrix<f64>> {
        let (t1, t2) = self.temperatures(x)?;
        let g = self.params.gamma.sqrt();
        Ok(DMatrix::from_column_slice(4, 1, &[0.0, 0.0, g / t1, -g / t2]))
    }

    fn energy_index(&self) -> usize {
        2
    }

    fn entropy_index(&self) -> usize {
        2
    }

    fn poisson_is_constant(&self) -> bool {
        true
    }

    fn entropy_gradient_is_constant(&self) -> bool {
        true
    }
}

/// Draw `count` gas initial states uniformly from [`GAS_IC_BOX`].
pub fn gas_sample_ics(seed: u64, count: usize) -> Vec<State> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            DVector::from_iterator(
                4,
                GAS_IC_BOX.iter().map(|&(lo, hi)| rng.random_range(lo..hi)),
            )
        })
        .collect()
}

/// Thermoelastic rod parameters. The potential is fixed to `V(q) = cos q`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RodParams {
    /// Grid points along the rod.
    pub n: usize,
    pub gamma: f64,
    pub ell: f64,
    pub mass_density: f64,
}

impl Default for RodParams {
    fn default() -> Self {
        RodParams {
            n: 250,
            gamma: 8.0,
            ell: 1.0,
            mass_density: 1.0,
        }
    }
}

/// Parameter box for `(μ1, μ2, S0)`.
pub const ROD_PARAM_BOX: [(f64, f64); 3] = [(-0.2, 5.2), (-1.0, 1.0), (1.0, 3.0)];

/// Held-out rod test parameters `(μ1, μ2, S0)`.
pub const ROD_TEST_PARAMS: [f64; 3] = [0.65, -0.1, 1.9];

/// State `(q_1..q_N, p_1..p_N, S)` of dimension `2N + 1`.
///
/// The discrete energy is the plain sum `Σ_i (p_i²/2m + cos q_i) + S` with
/// unit quadrature weights, so that `∇E = (-sin q, p/m, 1)`.
#[derive(Clone, Debug)]
pub struct RodSystem {
    params: RodParams,
}

pub fn rod_system(params: RodParams) -> Result<RodSystem> {
    if params.n < 2 {
        return Err(Error::Invalid(format!(
            "rod needs at least two grid points, got {}",
            params.n
        )));
    }
    if !(params.gamma > 0.0 && params.ell > 0.0 && params.mass_density > 0.0) {
        return Err(Error::Invalid(
            "rod gamma, length and mass density must be positive".into(),
        ));
    }
    Ok(RodSystem { params })
}

impl RodSystem {
    pub fn params(&self) -> RodParams {
        self.params
    }

    fn entropy_slot(&self) -> usize {
        2 * self.params.n
    }
}

impl MetriplecticSystem for RodSystem {
    fn name(&self) -> &str {
        "rod"
    }

    fn dim(&self) -> usize {
        2 * self.params.n + 1
    }

    fn energy(&self, x: &State) -> Result<f64> {
        check_len(x, self.dim())?;
        let n = self.params.n;
        let m = self.params.mass_density;
        let kinetic: f64 = x.rows(n, n).iter().map(|p| p * p / (2.0 * m)).sum();
        let potential: f64 = x.rows(0, n).iter().map(|q| q.cos()).sum();
        Ok(kinetic + potential + x[2 * n])
    }

    fn entropy(&self, x: &State) -> Result<f64> {
        check_len(x, self.dim())?;
        Ok(x[self.entropy_slot()])
    }

    fn grad_energy(&self, x: &State) -> Result<State> {
        check_len(x, self.dim())?;
        let n = self.params.n;
        let m = self.params.mass_density;
        let mut g = DVector::zeros(self.dim());
        for i in 0..n {
            g[i] = -x[i].sin();
            g[n + i] = x[n + i] / m;
        }
        g[2 * n] = 1.0;
        Ok(g)
    }

    fn grad_entropy(&self, x: &State) -> Result<State> {
        check_len(x, self.dim())?;
        let mut g = DVector::zeros(self.dim());
        g[self.entropy_slot()] = 1.0;
        Ok(g)
    }

    fn poisson_matrix(&self, x: &State) -> Result<DMatrix<f64>> {
        check_len(x, self.dim())?;
        let n = self.params.n;
        let mut l = DMatrix::zeros(self.dim(), self.dim());
        for i in 0..n {
            l[(i, n + i)] = 1.0;
            l[(n + i, i)] = -1.0;
        }
        Ok(l)
    }

    fn metric_factors(&self, x: &State) -> Result<DMatrix<f64>> {
        check_len(x, self.dim())?;
        let n = self.params.n;
        let g = self.params.gamma.sqrt();
        let m = self.params.mass_density;
        let mut c = DMatrix::zeros(self.dim(), n);
        for a in 0..n {
            c[(n + a, a)] = g;
            c[(2 * n, a)] = -g * x[n + a] / m;
        }
        Ok(c)
    }

    fn energy_index(&self) -> usize {
        self.entropy_slot()
    }

    fn entropy_index(&self) -> usize {
        self.entropy_slot()
    }

    fn poisson_is_constant(&self) -> bool {
        true
    }

    fn entropy_gradient_is_constant(&self) -> bool {
        true
    }

    fn apply_poisson(&self, x: &State, v: &State) -> Result<State> {
        check_len(x, self.dim())?;
        check_len(v, self.dim())?;
        let n = self.params.n;
        let mut out = DVector::zeros(self.dim());
        for i in 0..n {
            out[i] = v[n + i];
            out[n + i] = -v[i];
        }
        Ok(out)
    }

    fn apply_metric(&self, x: &State, v: &State) -> Result<State> {
        check_len(x, self.dim())?;
        check_len(v, self.dim())?;
        let n = self.params.n;
        let gamma = self.params.gamma;
        let m = self.params.mass_density;
        let vs = v[2 * n];
        let mut out = DVector::zeros(self.dim());
        let mut last = 0.0;
        for a in 0..n {
            let pm = x[n + a] / m;
            // (m^α·v) m^α with m^α = √γ (e_α, -p_α/m)
            let c = gamma * (v[n + a] - pm * vs);
            out[n + a] = c;
            last -= pm * c;
        }
        out[2 * n] = last;
        Ok(out)
    }

    fn project_factors(&self, x: &State, basis: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_len(x, self.dim())?;
        let n = self.params.n;
        let g = self.params.gamma.sqrt();
        let m = self.params.mass_density;
        let last = basis.row(2 * n);
        let mut out = DMatrix::zeros(basis.ncols(), n);
        for a in 0..n {
            let pm = x[n + a] / m;
            let row = basis.row(n + a);
            for k in 0..basis.ncols() {
                out[(k, a)] = g * (row[k] - pm * last[k]);
            }
        }
        Ok(out)
    }

    fn reduced_factor_map(
        &self,
        basis: &DMatrix<f64>,
        x0: &State,
    ) -> Option<Box<dyn ReducedFactorMap>> {
        RodFactorMap::new(self, basis, x0)
            .ok()
            .map(|m| Box::new(m) as Box<dyn ReducedFactorMap>)
    }
}

/// Affine map `x̂ ↦ UᵀC(x0 + Ux̂) = UᵀC₀ − (√γ/m) U^{2N+1} ⊗ (U^{N:2N} x̂)`.
///
/// Online cost is `O(nN)` with no lift to the full state.
#[derive(Clone, Debug)]
pub struct RodFactorMap {
    base: DMatrix<f64>,
    entropy_row: DVector<f64>,
    momentum_rows: DMatrix<f64>,
    scale: f64,
}

impl RodFactorMap {
    pub fn new(rod: &RodSystem, basis: &DMatrix<f64>, x0: &State) -> Result<Self> {
        check_len(x0, rod.dim())?;
        if basis.nrows() != rod.dim() {
            return Err(Error::DimensionMismatch {
                expected: rod.dim(),
                found: basis.nrows(),
            });
        }
        let n = rod.params.n;
        Ok(RodFactorMap {
            base: rod.project_factors(x0, basis)?,
            entropy_row: basis.row(2 * n).transpose(),
            momentum_rows: basis.rows(n, n).into_owned(),
            scale: rod.params.gamma.sqrt() / rod.params.mass_density,
        })
    }
}

impl ReducedFactorMap for RodFactorMap {
    fn reduced_factors(&self, xhat: &State) -> Result<DMatrix<f64>> {
        check_len(xhat, self.entropy_row.len())?;
        let dp = &self.momentum_rows * xhat;
        let mut out = self.base.clone();
        out.ger(-self.scale, &self.entropy_row, &dp, 1.0);
        Ok(out)
    }
}

/// Uniform grid of `N` points on `[0, ℓ]`.
pub fn rod_grid(params: &RodParams) -> Vec<f64> {
    let n = params.n;
    (0..n)
        .map(|i| params.ell * i as f64 / (n - 1) as f64)
        .collect()
}

/// Initial state `q0(s) = exp(μ1 s)`, `p0(s) = 1/(1 + μ2 s²)`, `S = S0`.
///
/// Parameters outside the training box are accepted; only a vanishing
/// momentum denominator is rejected.
pub fn rod_initial_condition(mu1: f64, mu2: f64, s0: f64, params: &RodParams) -> Result<State> {
    let n = params.n;
    let s = rod_grid(params);
    let mut x = DVector::zeros(2 * n + 1);
    for (i, &si) in s.iter().enumerate() {
        let denom = 1.0 + mu2 * si * si;
        if denom.abs() < 1e-8 {
            return Err(Error::Domain(format!(
                "momentum profile singular at s = {si} for mu2 = {mu2}"
            )));
        }
        x[i] = (mu1 * si).exp();
        x[n + i] = 1.0 / denom;
    }
    x[2 * n] = s0;
    Ok(x)
}

/// True when `(μ1, μ2, S0)` lies inside [`ROD_PARAM_BOX`].
pub fn rod_params_in_box(p: [f64; 3]) -> bool {
    p.iter()
        .zip(ROD_PARAM_BOX.iter())
        .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
}

/// Draw `count` parameter triples `(μ1, μ2, S0)` uniformly from the box.
pub fn rod_sample_params(seed: u64, count: usize) -> Vec<[f64; 3]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut p = [0.0; 3];
            for (v, (lo, hi)) in p.iter_mut().zip(ROD_PARAM_BOX.iter()) {
                *v = rng.random_range(*lo..*hi);
            }
            p
        })
        .collect()
}

/// `rod_reduced_factors` evaluated through a model's registered factor hook.
pub fn rod_reduced_factors(model: &crate::rom::RomModel, xhat: &State) -> Result<DMatrix<f64>> {
    model.reduced_factors(xhat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{check_degeneracy, dense_metric, fom_rhs, thermo_rates};

    fn gas() -> GasSystem {
        gas_system(GasParams::default()).unwrap()
    }

    /// Component formulas written out by hand, independent of `L∇E + M∇S`.
    fn gas_rhs_by_hand(x: &[f64], gamma: f64) -> [f64; 4] {
        let (q, p, s1, s2) = (x[0], x[1], x[2], x[3]);
        let e1 = (s1.exp() / q).powf(2.0 / 3.0);
        let e2 = (s2.exp() / (2.0 - q)).powf(2.0 / 3.0);
        let (t1, t2) = (2.0 * e1 / 3.0, 2.0 * e2 / 3.0);
        let d = 1.0 / t1 - 1.0 / t2;
        [
            p,
            2.0 / 3.0 * (e1 / q - e2 / (2.0 - q)),
            gamma / t1 * d,
            -gamma / t2 * d,
        ]
    }

    #[test]
    fn gas_rhs_equilibrium_and_symmetric_states() {
        let sys = gas();
        let f = fom_rhs(&sys, &DVector::from_vec(vec![1.0, 0.0, 2.0, 2.0])).unwrap();
        assert!(f.amax() < 1e-15, "{f}");
        let f = fom_rhs(&sys, &DVector::from_vec(vec![1.0, 1.0, 2.0, 2.0])).unwrap();
        assert!((f - DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0])).amax() < 1e-15);
    }

    #[test]
    fn gas_rhs_matches_component_formulas() {
        let sys = gas();
        for x in std::iter::once(GAS_TEST_IC.to_vec())
            .chain(gas_sample_ics(3, 50).into_iter().map(|v| v.as_slice().to_vec()))
        {
            let f = fom_rhs(&sys, &DVector::from_vec(x.clone())).unwrap();
            let hand = gas_rhs_by_hand(&x, 8.0);
            for i in 0..4 {
                assert!((f[i] - hand[i]).abs() <= 1e-12 * (1.0 + hand[i].abs()));
            }
        }
    }

    #[test]
    fn gas_energy_at_symmetric_state() {
        let sys = gas();
        let x = DVector::from_vec(vec![1.0, 0.0, 2.0, 2.0]);
        let e = sys.energy(&x).unwrap();
        assert!((e - 2.0 * (4.0f64 / 3.0).exp()).abs() < 1e-13);
        let (t1, t2) = sys.temperatures(&x).unwrap();
        assert_eq!(t1, t2);
        assert!(sys.grad_energy(&x).unwrap()[0].abs() < 1e-15);
    }

    #[test]
    fn gas_metric_matches_displayed_block() {
        let sys = gas();
        for x in gas_sample_ics(11, 20) {
            let m = dense_metric(&sys.metric_factors(&x).unwrap());
            let (t1, t2) = sys.temperatures(&x).unwrap();
            let mut expect = DMatrix::zeros(4, 4);
            expect[(2, 2)] = 8.0 / (t1 * t1);
            expect[(2, 3)] = -8.0 / (t1 * t2);
            expect[(3, 2)] = -8.0 / (t1 * t2);
            expect[(3, 3)] = 8.0 / (t2 * t2);
            assert!((m - expect).amax() <= 1e-12);
        }
    }

    #[test]
    fn gas_thermo_rates() {
        let sys = gas();
        let (de, ds) = thermo_rates(&sys, &DVector::from_vec(vec![1.0, 0.0, 2.0, 2.0])).unwrap();
        assert!(de.abs() < 1e-15 && ds.abs() < 1e-15);
        let x = DVector::from_vec(GAS_TEST_IC.to_vec());
        let (de, ds) = thermo_rates(&sys, &x).unwrap();
        let e1 = (2.4f64.exp() / 0.9).powf(2.0 / 3.0);
        let e2 = (2.0f64.exp() / 1.1).powf(2.0 / 3.0);
        let expect = 8.0 * (1.5 / e1 - 1.5 / e2).powi(2);
        assert!(de.abs() <= 1e-12);
        assert!((ds - expect).abs() <= 1e-12 * expect);
    }

    #[test]
    fn gas_domain_guard() {
        let sys = gas();
        let bad = DVector::from_vec(vec![2.1, 0.0, 2.0, 2.0]);
        assert!(matches!(sys.energy(&bad), Err(Error::Domain(_))));
        assert!(fom_rhs(&sys, &DVector::from_vec(vec![0.0, 0.0, 1.0, 1.0])).is_err());
    }

    #[test]
    fn gas_samples_are_seeded_and_inside_box() {
        let a = gas_sample_ics(42, 25);
        assert_eq!(a, gas_sample_ics(42, 25));
        assert_ne!(a, gas_sample_ics(43, 25));
        for x in &a {
            for (v, (lo, hi)) in x.iter().zip(GAS_IC_BOX.iter()) {
                assert!(v >= lo && v < hi);
            }
        }
        for i in 0..a.len() {
            for j in 0..i {
                assert_ne!(a[i], a[j]);
            }
        }
    }

    fn small_rod() -> RodSystem {
        rod_system(RodParams {
            n: 12,
            ..RodParams::default()
        })
        .unwrap()
    }

    #[test]
    fn rod_structure_and_degeneracy() {
        let rod = small_rod();
        let x = rod_initial_condition(1.3, 0.4, 2.0, &rod.params()).unwrap();
        let rep = check_degeneracy(&rod, &x, 1e-12).unwrap();
        assert!(rep.pass, "{rep:?}");
        let (de, ds) = thermo_rates(&rod, &x).unwrap();
        let p2 = x.rows(12, 12).norm_squared();
        assert!(de.abs() < 1e-12);
        assert!((ds - 8.0 * p2).abs() < 1e-12 * ds);
    }

    #[test]
    fn rod_structured_operators_match_dense() {
        let rod = small_rod();
        let x = rod_initial_condition(0.7, -0.5, 1.5, &rod.params()).unwrap();
        let v = DVector::from_fn(rod.dim(), |i, _| (i as f64 * 0.37).sin());
        let l = rod.poisson_matrix(&x).unwrap();
        assert!((rod.apply_poisson(&x, &v).unwrap() - &l * &v).amax() < 1e-14);
        let c = rod.metric_factors(&x).unwrap();
        let dense = &c * c.transpose() * &v;
        assert!((rod.apply_metric(&x, &v).unwrap() - dense).amax() < 1e-12);
        let u = DMatrix::from_fn(rod.dim(), 3, |i, j| ((i * 3 + j) as f64).cos());
        assert!((rod.project_factors(&x, &u).unwrap() - u.tr_mul(&c)).amax() < 1e-12);
    }

    #[test]
    fn rod_momentum_equation_sign() {
        let rod = small_rod();
        let x = rod_initial_condition(2.0, 0.3, 1.0, &rod.params()).unwrap();
        let f = fom_rhs(&rod, &x).unwrap();
        for i in 0..12 {
            let expect = x[i].sin() - 8.0 * x[12 + i];
            assert!((f[12 + i] - expect).abs() < 1e-12);
            assert!((f[i] - x[12 + i]).abs() < 1e-15);
        }
    }

    #[test]
    fn rod_initial_conditions() {
        let p = RodParams {
            n: 5,
            ..RodParams::default()
        };
        let x = rod_initial_condition(0.0, 0.0, 1.0, &p).unwrap();
        assert!(x.rows(0, 10).iter().all(|v| *v == 1.0));
        assert_eq!(x[10], 1.0);
        assert!(rod_initial_condition(0.0, -1.0, 1.0, &p).is_err());
        let x = rod_initial_condition(0.65, -0.1, 1.9, &p).unwrap();
        assert!((x[4] - 0.65f64.exp()).abs() < 1e-15);
        assert!((x[9] - 1.0 / 0.9).abs() < 1e-15);
        assert!(rod_params_in_box(ROD_TEST_PARAMS));
        assert!(!rod_params_in_box([6.0, 0.0, 2.0]));
    }

    #[test]
    fn rod_factor_map_matches_naive_projection() {
        let rod = small_rod();
        let x0 = rod_initial_condition(1.0, 0.2, 1.5, &rod.params()).unwrap();
        let u = crate::pod::orthonormalize(&DMatrix::from_fn(rod.dim(), 10, |i, j| {
            ((i + 1) as f64 * (j + 2) as f64 * 0.13).sin()
        }));
        let map = RodFactorMap::new(&rod, &u, &x0).unwrap();
        let zero = DVector::zeros(10);
        assert!((map.reduced_factors(&zero).unwrap() - rod.project_factors(&x0, &u).unwrap()).amax() < 1e-14);
        let a = DVector::from_fn(10, |i, _| 0.1 * (i as f64 - 4.0));
        let b = DVector::from_fn(10, |i, _| (i as f64).cos());
        let naive = rod.project_factors(&(&x0 + &u * &a), &u).unwrap();
        assert!((map.reduced_factors(&a).unwrap() - naive).amax() <= 1e-12);
        let base = map.reduced_factors(&zero).unwrap();
        let lin = |v: &State| map.reduced_factors(v).unwrap() - &base;
        assert!((lin(&(&a + &b)) - lin(&a) - lin(&b)).amax() <= 1e-12);
    }
}
