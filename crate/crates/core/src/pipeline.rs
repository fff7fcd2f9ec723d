//! Experiment configuration and the train / compare / verify / simulate
//! pipelines driven by the command-line tool.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::benchmarks::{
    gas_sample_ics, gas_system, rod_initial_condition, rod_sample_params, rod_system, GasParams,
    RodParams, GAS_TEST_IC, ROD_TEST_PARAMS,
};
use crate::error::{Error, Result};
use crate::integrator::{integrate, uniform_grid, Tolerances, Trajectory};
use crate::matrix_io::{read_matrix, write_matrix, write_matrix_csv};
use crate::metrics::{energy_drift, entropy_series, min_increment, rom_error_metrics};
use crate::oracle::{default_jacobi_step, dense_sprom_rhs, jacobi_residual};
use crate::plot::{emit_plots, plot_singular_values, LabeledTrajectory, Quantity};
use crate::pod::{
    assemble_snapshots, compute_basis, orthonormalize, projection_residual, PodBasis,
    SnapshotMatrix,
};
use crate::report::{emit_report, Method, ReportFormat, ReportRow};
use crate::rom::{build_rom, sprom_rhs, RomModel, RomOptions, RomVariant};
use crate::system::{check_degeneracy, fom_rhs, MetriplecticSystem, State};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Benchmark {
    Gas,
    Rod,
}

impl std::str::FromStr for Benchmark {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gas" => Ok(Benchmark::Gas),
            "rod" => Ok(Benchmark::Rod),
            other => Err(Error::Invalid(format!("unknown benchmark {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub num_trajectories: usize,
    pub horizon: f64,
    pub sample_dt: f64,
    pub mu: f64,
    pub nu: f64,
    pub dedupe_constant_grad_entropy: bool,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            num_trajectories: 25,
            horizon: 8.0,
            sample_dt: 0.02,
            mu: 1.0,
            nu: 1.0,
            dedupe_constant_grad_entropy: true,
        }
    }
}

/// Unset fields fall back to the benchmark's standard protocol.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluationConfig {
    pub test_ic: Option<Vec<f64>>,
    pub test_params: Option<[f64; 3]>,
    pub horizons: Option<Vec<f64>>,
    pub n: Option<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub benchmark: Benchmark,
    pub gas: GasParams,
    pub rod: RodParams,
    pub seed: u64,
    pub training: TrainingConfig,
    pub evaluation: EvaluationConfig,
    pub integrator: Tolerances,
    pub methods: Vec<RomVariant>,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig::for_benchmark(Benchmark::Gas)
    }
}

impl ExperimentConfig {
    pub fn for_benchmark(benchmark: Benchmark) -> Self {
        ExperimentConfig {
            benchmark,
            gas: GasParams::default(),
            rod: RodParams::default(),
            seed: 1,
            training: TrainingConfig::default(),
            evaluation: EvaluationConfig::default(),
            integrator: Tolerances::default(),
            methods: RomVariant::ALL.to_vec(),
            output_dir: PathBuf::from("out"),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn horizons(&self) -> Vec<f64> {
        self.evaluation.horizons.clone().unwrap_or_else(|| match self.benchmark {
            Benchmark::Gas => vec![8.0, 32.0],
            Benchmark::Rod => vec![8.0, 16.0, 48.0, 96.0],
        })
    }

    pub fn reduced_dims(&self) -> Vec<usize> {
        self.evaluation.n.clone().unwrap_or_else(|| match self.benchmark {
            Benchmark::Gas => vec![2, 3, 4],
            Benchmark::Rod => vec![10, 20, 40],
        })
    }

    pub fn max_dim(&self) -> usize {
        self.reduced_dims().into_iter().max().unwrap_or(1)
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.training;
        if t.num_trajectories == 0 {
            return Err(Error::Invalid("num_trajectories must be positive".into()));
        }
        uniform_grid(t.horizon, t.sample_dt)?;
        for h in self.horizons() {
            if !(h > 0.0) {
                return Err(Error::Invalid(format!("horizon {h} must be positive")));
            }
            uniform_grid(h, t.sample_dt)?;
        }
        let dims = self.reduced_dims();
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::Invalid("reduced dimensions must be at least 1".into()));
        }
        if self.horizons().is_empty() {
            return Err(Error::Invalid("at least one horizon is required".into()));
        }
        if let Some(ic) = &self.evaluation.test_ic {
            if ic.len() != self.system()?.dim() {
                return Err(Error::DimensionMismatch {
                    expected: self.system()?.dim(),
                    found: ic.len(),
                });
            }
        }
        Ok(())
    }

    pub fn system(&self) -> Result<Arc<dyn MetriplecticSystem>> {
        Ok(match self.benchmark {
            Benchmark::Gas => Arc::new(gas_system(self.gas)?),
            Benchmark::Rod => Arc::new(rod_system(self.rod)?),
        })
    }

    /// Held-out initial state used for evaluation.
    pub fn test_state(&self) -> Result<State> {
        if let Some(ic) = &self.evaluation.test_ic {
            return Ok(DVector::from_column_slice(ic));
        }
        match self.benchmark {
            Benchmark::Gas => Ok(DVector::from_column_slice(&GAS_TEST_IC)),
            Benchmark::Rod => {
                let [a, b, c] = self.evaluation.test_params.unwrap_or(ROD_TEST_PARAMS);
                rod_initial_condition(a, b, c, &self.rod)
            }
        }
    }

    pub fn training_states(&self) -> Result<Vec<State>> {
        let count = self.training.num_trajectories;
        match self.benchmark {
            Benchmark::Gas => Ok(gas_sample_ics(self.seed, count)),
            Benchmark::Rod => rod_sample_params(self.seed, count)
                .into_iter()
                .map(|[a, b, c]| rod_initial_condition(a, b, c, &self.rod))
                .collect(),
        }
    }
}

/// Integrate the full-order model from `x0` on a uniform grid.
pub fn run_fom(
    system: &dyn MetriplecticSystem,
    x0: &State,
    horizon: f64,
    dt: f64,
    tol: Tolerances,
) -> Result<Trajectory> {
    let grid = uniform_grid(horizon, dt)?;
    integrate(|x| fom_rhs(system, x), x0, &grid, tol)
}

/// Integrate a ROM from `x̂ = 0` on a uniform grid; states stay reduced.
pub fn run_rom(model: &RomModel, horizon: f64, dt: f64, tol: Tolerances) -> Result<Trajectory> {
    let grid = uniform_grid(horizon, dt)?;
    integrate(|z| model.rhs(z), &model.initial_state(), &grid, tol)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RankCheck {
    pub n: usize,
    pub residual_sq: f64,
    pub tail_sq: f64,
    pub rel_gap: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub benchmark: Benchmark,
    pub seed: u64,
    pub dim: usize,
    pub snapshot_columns: usize,
    pub retained: usize,
    pub rank_checks: Vec<RankCheck>,
    pub fom_seconds: f64,
}

pub struct TrainingOutcome {
    pub basis: PodBasis,
    pub snapshots: SnapshotMatrix,
    pub summary: TrainingSummary,
}

pub const BASIS_FILE: &str = "basis.mplx";
pub const SIGMA_FILE: &str = "singular_values.mplx";
pub const SUMMARY_FILE: &str = "training.json";

/// Simulate the training set, assemble snapshots and compute the basis at the
/// largest requested dimension.
pub fn train(cfg: &ExperimentConfig) -> Result<TrainingOutcome> {
    cfg.validate()?;
    let system = cfg.system()?;
    let t = &cfg.training;
    let ics = cfg.training_states()?;
    let trajectories: Vec<Trajectory> = ics
        .par_iter()
        .map(|x0| run_fom(system.as_ref(), x0, t.horizon, t.sample_dt, cfg.integrator))
        .collect::<Result<_>>()?;
    let fom_seconds = trajectories.iter().map(|tr| tr.wall_time).sum();
    let snapshots = assemble_snapshots(
        &trajectories,
        system.as_ref(),
        t.mu,
        t.nu,
        t.dedupe_constant_grad_entropy,
    )?;
    drop(trajectories);
    let retained = cfg.max_dim();
    let basis = compute_basis(&snapshots, retained)?;
    let mut dims = cfg.reduced_dims();
    dims.sort_unstable();
    dims.dedup();
    let rank_checks = dims
        .iter()
        .map(|&n| {
            let r = projection_residual(&basis.truncate(n)?, &snapshots)?;
            Ok(RankCheck {
                n,
                residual_sq: r.residual_sq,
                tail_sq: r.tail_sq,
                rel_gap: r.rel_gap,
            })
        })
        .collect::<Result<_>>()?;
    let summary = TrainingSummary {
        benchmark: cfg.benchmark,
        seed: cfg.seed,
        dim: system.dim(),
        snapshot_columns: snapshots.ncols(),
        retained,
        rank_checks,
        fom_seconds,
    };
    Ok(TrainingOutcome {
        basis,
        snapshots,
        summary,
    })
}

pub fn save_training(dir: &Path, outcome: &TrainingOutcome) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_matrix(&dir.join(BASIS_FILE), &outcome.basis.u)?;
    let sigma = DMatrix::from_column_slice(
        outcome.basis.singular_values.len(),
        1,
        &outcome.basis.singular_values,
    );
    write_matrix(&dir.join(SIGMA_FILE), &sigma)?;
    write_matrix_csv(&dir.join("singular_values.csv"), &sigma)?;
    fs::write(
        dir.join(SUMMARY_FILE),
        serde_json::to_string_pretty(&outcome.summary)? + "\n",
    )?;
    Ok(())
}

pub fn load_basis(dir: &Path) -> Result<PodBasis> {
    let basis_path = dir.join(BASIS_FILE);
    if !basis_path.exists() {
        return Err(Error::Invalid(format!(
            "no trained basis at {}",
            basis_path.display()
        )));
    }
    let u = read_matrix(&basis_path)?;
    let sigma = read_matrix(&dir.join(SIGMA_FILE))?;
    Ok(PodBasis {
        u,
        singular_values: sigma.iter().copied().collect(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CompareOptions {
    /// Keep decimated lifted trajectories for plotting.
    pub keep_trajectories: bool,
    /// Upper bound on stored samples per kept trajectory.
    pub plot_samples: usize,
}

impl Default for CompareOptions {
    fn default() -> Self {
        CompareOptions {
            keep_trajectories: true,
            plot_samples: 1500,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PlotGroup {
    pub horizon: f64,
    pub n: usize,
    pub series: Vec<LabeledTrajectory>,
}

pub struct CompareOutcome {
    pub rows: Vec<ReportRow>,
    pub groups: Vec<PlotGroup>,
}

fn decimate(t: &Trajectory, max_samples: usize, model: Option<&RomModel>) -> Result<Trajectory> {
    let stride = t.len().div_ceil(max_samples.max(2)).max(1);
    let mut times = Vec::new();
    let mut states = Vec::new();
    for (i, (time, s)) in t.times.iter().zip(&t.states).enumerate() {
        if i % stride == 0 || i + 1 == t.len() {
            times.push(*time);
            states.push(match model {
                Some(m) => m.lift(s)?,
                None => s.clone(),
            });
        }
    }
    Ok(Trajectory {
        times,
        x0: states[0].clone(),
        states,
        wall_time: t.wall_time,
    })
}

struct Cell {
    row: ReportRow,
    kept: Option<Trajectory>,
}

fn run_cell(
    system: &Arc<dyn MetriplecticSystem>,
    basis: &PodBasis,
    x0: &State,
    reference: &Trajectory,
    variant: RomVariant,
    n: usize,
    horizon: f64,
    cfg: &ExperimentConfig,
    opts: CompareOptions,
) -> Result<Cell> {
    let method = Method::Rom(variant);
    let model = build_rom(
        variant,
        system.clone(),
        basis.truncate(n)?,
        x0.clone(),
        RomOptions::default(),
    )?;
    match run_rom(&model, horizon, cfg.training.sample_dt, cfg.integrator) {
        Ok(traj) => {
            let m = rom_error_metrics(reference, &model, &traj)?;
            let drift = energy_drift(system.as_ref(), &traj, Some(&model))?;
            let kept = if opts.keep_trajectories {
                Some(decimate(&traj, opts.plot_samples, Some(&model))?)
            } else {
                None
            };
            Ok(Cell {
                row: ReportRow {
                    method,
                    n: Some(n),
                    horizon,
                    rel_err_pct: Some(100.0 * m.rel),
                    max_err: Some(m.max),
                    energy_drift: Some(drift),
                    wall_seconds: traj.wall_time,
                    converged: true,
                    last_time: None,
                },
                kept,
            })
        }
        Err(Error::SolverFailure { last_time, .. }) => Ok(Cell {
            row: ReportRow::failed(method, Some(n), horizon, last_time, 0.0),
            kept: None,
        }),
        Err(e) => Err(e),
    }
}

/// Evaluate every `(method, n, T)` cell against a fresh full-order reference.
///
/// A full-order failure is returned as an error; ROM solver failures become
/// non-converged rows.
pub fn compare(cfg: &ExperimentConfig, basis: &PodBasis, opts: CompareOptions) -> Result<CompareOutcome> {
    cfg.validate()?;
    let system = cfg.system()?;
    let x0 = cfg.test_state()?;
    let dims = cfg.reduced_dims();
    let mut rows = Vec::new();
    let mut groups = Vec::new();
    for horizon in cfg.horizons() {
        let reference = run_fom(system.as_ref(), &x0, horizon, cfg.training.sample_dt, cfg.integrator)?;
        let fom_drift = energy_drift(system.as_ref(), &reference, None)?;
        rows.push(ReportRow {
            method: Method::Fom,
            n: None,
            horizon,
            rel_err_pct: None,
            max_err: None,
            energy_drift: Some(fom_drift),
            wall_seconds: reference.wall_time,
            converged: true,
            last_time: None,
        });
        let jobs: Vec<(usize, RomVariant)> = dims
            .iter()
            .flat_map(|&n| cfg.methods.iter().map(move |&v| (n, v)))
            .collect();
        let cells: Vec<Cell> = jobs
            .par_iter()
            .map(|&(n, v)| run_cell(&system, basis, &x0, &reference, v, n, horizon, cfg, opts))
            .collect::<Result<_>>()?;
        let fom_kept = if opts.keep_trajectories {
            Some(decimate(&reference, opts.plot_samples, None)?)
        } else {
            None
        };
        for (chunk, &n) in cells.chunks(cfg.methods.len().max(1)).zip(&dims) {
            let mut series = Vec::new();
            if let Some(f) = &fom_kept {
                series.push(LabeledTrajectory {
                    label: "FOM".into(),
                    method: Method::Fom,
                    trajectory: f.clone(),
                });
            }
            for cell in chunk {
                rows.push(cell.row.clone());
                if let Some(t) = &cell.kept {
                    series.push(LabeledTrajectory {
                        label: cell.row.method.label().into(),
                        method: cell.row.method,
                        trajectory: t.clone(),
                    });
                }
            }
            if opts.keep_trajectories {
                groups.push(PlotGroup { horizon, n, series });
            }
        }
    }
    Ok(CompareOutcome { rows, groups })
}

pub fn default_quantities(benchmark: Benchmark) -> Vec<Quantity> {
    match benchmark {
        Benchmark::Gas => vec![
            Quantity::StateComponent(0),
            Quantity::Entropy,
            Quantity::EnergyDeviation,
            Quantity::PhasePortrait(0, 1),
        ],
        Benchmark::Rod => vec![
            Quantity::StateComponent(0),
            Quantity::Entropy,
            Quantity::EnergyDeviation,
        ],
    }
}

/// Write `report.csv`, `report.txt` and one set of SVGs per `(T, n)` group.
pub fn write_compare_artifacts(
    cfg: &ExperimentConfig,
    outcome: &CompareOutcome,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let csv = dir.join("report.csv");
    fs::write(&csv, emit_report(&outcome.rows, ReportFormat::Csv)?)?;
    written.push(csv);
    let txt = dir.join("report.txt");
    fs::write(&txt, emit_report(&outcome.rows, ReportFormat::Table)?)?;
    written.push(txt);
    written.extend(write_plot_groups(cfg, &outcome.groups, dir)?);
    Ok(written)
}

pub fn write_plot_groups(
    cfg: &ExperimentConfig,
    groups: &[PlotGroup],
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    let system = cfg.system()?;
    let quantities = default_quantities(cfg.benchmark);
    let mut written = Vec::new();
    for g in groups {
        let prefix = format!("T{}_n{}", g.horizon, g.n);
        written.extend(emit_plots(&g.series, system.as_ref(), &quantities, dir, &prefix)?);
    }
    Ok(written)
}

pub fn write_singular_value_plot(basis: &PodBasis, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join("singular_values.svg");
    plot_singular_values(&basis.singular_values, basis.singular_values.len(), &path)?;
    Ok(path)
}

/// Write a full-order trajectory as CSV with columns `t, x0.., E, S`.
pub fn write_trajectory_csv(
    system: &dyn MetriplecticSystem,
    traj: &Trajectory,
    path: &Path,
) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?;
    let mut header = vec!["t".to_string()];
    header.extend((0..traj.dim()).map(|i| format!("x{i}")));
    header.push("E".into());
    header.push("S".into());
    w.write_record(&header)?;
    for (t, x) in traj.times.iter().zip(&traj.states) {
        let mut rec = vec![t.to_string()];
        rec.extend(x.iter().map(|v| v.to_string()));
        rec.push(system.energy(x)?.to_string());
        rec.push(system.entropy(x)?.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Full-order reference run from the test state, one per configured horizon.
pub fn simulate_fom(cfg: &ExperimentConfig) -> Result<Vec<(f64, Trajectory)>> {
    cfg.validate()?;
    let system = cfg.system()?;
    let x0 = cfg.test_state()?;
    cfg.horizons()
        .into_iter()
        .map(|h| {
            run_fom(system.as_ref(), &x0, h, cfg.training.sample_dt, cfg.integrator).map(|t| (h, t))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        CheckResult {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

/// Sample states near the benchmark's trajectories for structural checks.
fn probe_states(cfg: &ExperimentConfig, count: usize, seed: u64) -> Result<Vec<State>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match cfg.benchmark {
        Benchmark::Gas => Ok(gas_sample_ics(seed, count)),
        Benchmark::Rod => rod_sample_params(seed, count)
            .into_iter()
            .map(|[a, b, c]| {
                let mut x = rod_initial_condition(a, b, c, &cfg.rod)?;
                for v in x.iter_mut() {
                    *v += rng.random_range(-0.5..0.5);
                }
                Ok(x)
            })
            .collect(),
    }
}

pub const DEGENERACY_TOL: f64 = 1e-12;

/// Structural checks on the system, the given basis and the SP-ROM.
///
/// `basis` is checked for orthonormality and used for the reduced checks; the
/// snapshot identity uses `training`, which carries its own basis.
pub fn verify(
    cfg: &ExperimentConfig,
    basis: &PodBasis,
    training: Option<&TrainingOutcome>,
) -> Result<Vec<CheckResult>> {
    let system = cfg.system()?;
    let x0 = cfg.test_state()?;
    let mut out = Vec::new();

    let states = probe_states(cfg, 1000, cfg.seed.wrapping_add(101))?;
    let worst = states
        .par_iter()
        .map(|x| check_degeneracy(system.as_ref(), x, DEGENERACY_TOL))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold((0.0f64, 0.0f64, 0.0f64), |acc, r| {
            (acc.0.max(r.lnorm), acc.1.max(r.mnorm), acc.2.max(r.skew_defect))
        });
    out.push(CheckResult::new(
        "degeneracy",
        worst.0 <= DEGENERACY_TOL && worst.1 <= DEGENERACY_TOL && worst.2 <= DEGENERACY_TOL,
        format!(
            "1000 states: max |L gradS| = {:.3e}, max |M gradE| = {:.3e}, max |L + L^T| = {:.3e}",
            worst.0, worst.1, worst.2
        ),
    ));

    let defect = basis.orthonormality_defect();
    out.push(CheckResult::new(
        "basis orthonormality",
        defect <= 1e-12,
        format!("max |U^T U - I| = {defect:.3e}"),
    ));

    if let Some(t) = training {
        let worst = t
            .summary
            .rank_checks
            .iter()
            .map(|c| c.rel_gap)
            .fold(0.0, f64::max);
        out.push(CheckResult::new(
            "snapshot tail identity",
            worst <= 1e-8,
            format!("max rel_gap over n = {worst:.3e}"),
        ));
    }

    if system.dim() <= crate::oracle::MAX_DENSE_DIM {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(202));
        let mut worst = 0.0f64;
        for n in [2usize, 3].into_iter().filter(|&n| n <= system.dim()) {
            let m = DMatrix::from_fn(system.dim(), n, |_, _| rng.random_range(-1.0..1.0));
            let b = PodBasis {
                u: orthonormalize(&m),
                singular_values: vec![1.0; n],
            };
            let model = build_rom(
                RomVariant::StructurePreserving,
                system.clone(),
                b.clone(),
                x0.clone(),
                RomOptions::default(),
            )?;
            for _ in 0..100 {
                let z = DVector::from_fn(n, |_, _| rng.random_range(-0.2..0.2));
                let (Ok(a), Ok(d)) = (
                    sprom_rhs(&model, &z),
                    dense_sprom_rhs(system.as_ref(), &b.u, &x0, &z),
                ) else {
                    continue;
                };
                worst = worst.max((&a - &d).amax() / (1.0 + d.amax()));
            }
        }
        out.push(CheckResult::new(
            "dense tensor equivalence",
            worst <= 1e-12,
            format!("max scaled |wedge - dense| = {worst:.3e}"),
        ));
    }

    let mut reduced_ok = true;
    let mut detail = Vec::new();
    let mut jacobi_worst = 0.0f64;
    let mut hook_worst = 0.0f64;
    for n in cfg.reduced_dims() {
        if n > basis.n() {
            reduced_ok = false;
            detail.push(format!("n = {n} exceeds stored basis"));
            continue;
        }
        let model = build_rom(
            RomVariant::StructurePreserving,
            system.clone(),
            basis.truncate(n)?,
            x0.clone(),
            RomOptions::default(),
        )?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(303 + n as u64));
        let (mut energy, mut production, mut evaluated) = (0.0f64, 0.0f64, 0usize);
        for x in &states {
            let mut z = model.project(x)?;
            for v in z.iter_mut() {
                *v += rng.random_range(-0.05..0.05);
            }
            let Ok(f) = sprom_rhs(&model, &z) else {
                continue;
            };
            let xt = model.lift(&z)?;
            let (ge, gs) = model.reduced_gradients(&xt)?;
            energy = energy.max(ge.dot(&f).abs() / (1.0 + ge.norm() * f.norm()));
            let m = model.sp_metric(&z)?;
            production = production.min(gs.dot(&(&m * &gs)));
            evaluated += 1;
            if evaluated <= 20 {
                let r = jacobi_residual(|y| model.sp_poisson(y), &z, default_jacobi_step(&z))?;
                let scale = 1.0 + model.sp_poisson(&z)?.amax().powi(2);
                jacobi_worst = jacobi_worst.max(r / scale);
                if model.has_factor_hook() {
                    let fast = model.reduced_factors(&z)?;
                    let slow = system.project_factors(&xt, model.u())?;
                    hook_worst = hook_worst.max((&fast - &slow).amax() / (1.0 + slow.amax()));
                }
            }
        }
        let ok = evaluated * 2 >= states.len() && energy <= 1e-11 && production >= -1e-12;
        reduced_ok &= ok;
        detail.push(format!(
            "n = {n}: {evaluated} states, max scaled |gradE.f| = {energy:.2e}, min production = {production:.2e}"
        ));
    }
    out.push(CheckResult::new(
        "reduced conservation and production",
        reduced_ok,
        detail.join("; "),
    ));
    let constant = system.poisson_is_constant() && system.entropy_gradient_is_constant();
    out.push(CheckResult::new(
        "reduced Jacobi residual",
        !constant || jacobi_worst <= 1e-8,
        format!("max scaled residual = {jacobi_worst:.3e}"),
    ));
    if hook_worst > 0.0 || cfg.benchmark == Benchmark::Rod {
        out.push(CheckResult::new(
            "reduced factor map",
            hook_worst <= 1e-12,
            format!("max scaled |hook - lifted| = {hook_worst:.3e}"),
        ));
    }

    let traj = run_fom(system.as_ref(), &x0, cfg.training.horizon, cfg.training.sample_dt, cfg.integrator)?;
    let drift = energy_drift(system.as_ref(), &traj, None)?;
    let ds = min_increment(&entropy_series(system.as_ref(), &traj, None)?);
    out.push(CheckResult::new(
        "full-order thermodynamics",
        drift <= 1e-8 && ds >= -1e-8,
        format!("energy drift = {drift:.3e}, min entropy increment = {ds:.3e}"),
    ));
    Ok(out)
}
