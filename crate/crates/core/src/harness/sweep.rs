//! Parameter sweeps: one minimization per point and initialization.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::axisym::{
    self, field_from_packed, init_dipole, init_hemispheres, init_layer, locate_ring, ray_lower_bound, AxiField,
    AxiGrid, ConvergenceRecord, RingLocation, SolverOptions,
};
use crate::error::{Error, Result};
use crate::harness::config::{GridSection, InitKind, SweepSpec};
use crate::profile::{hemisphere_integral_d_lambda, ProfileGrid};
use crate::qtensor::ModelParams;
use crate::trial::{build_saturn_trial_on, SaturnOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    /// Iteration budget exhausted; energies are those of the best iterate.
    NotConverged,
    Failed,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::Ok => "ok",
            RunStatus::NotConverged => "not_converged",
            RunStatus::Failed => "failed",
        }
    }
}

/// Energy split of one field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergySummary {
    pub total: f64,
    pub elastic: f64,
    pub radial: f64,
    pub polar: f64,
    pub azimuthal: f64,
    /// Nematic potential term.
    pub f: f64,
    /// Field potential term.
    pub g: f64,
    pub upper_hemi: f64,
    pub lower_hemi: f64,
}

impl EnergySummary {
    pub fn of(b: &axisym::EnergyBreakdown) -> Self {
        EnergySummary {
            total: b.total,
            elastic: b.elastic,
            radial: b.parts.radial,
            polar: b.parts.polar,
            azimuthal: b.parts.azimuthal,
            f: b.nematic,
            g: b.field,
            upper_hemi: b.upper,
            lower_hemi: b.lower,
        }
    }
}

/// Energy of the cells with `theta_lo <= theta < theta_hi`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandEnergy {
    pub theta_lo: f64,
    pub theta_hi: f64,
    pub energy: f64,
}

/// Outcome of one minimization (or one trial evaluation).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub point: usize,
    pub init: String,
    pub xi: f64,
    pub eta: f64,
    pub lambda: f64,
    pub status: RunStatus,
    pub reason: Option<String>,
    /// Lowest energy among the usable records of its point.
    pub minimizer: bool,
    pub nr: usize,
    pub ntheta: usize,
    pub energies: Option<EnergySummary>,
    pub eta_energy: Option<f64>,
    pub bands: Vec<BandEnergy>,
    pub sym_ratio: Option<f64>,
    pub ring: Option<RingLocation>,
    /// Sphere integral of the layer energy along each ray.
    pub ray_lower_bound: Option<f64>,
    /// `int_{S^2} D_lambda(Q_b) dH^2` by quadrature.
    pub d_lambda_reference: Option<f64>,
    /// `(theta, D_lambda)` at the quadrature nodes of the upper hemisphere.
    pub d_lambda_samples: Vec<(f64, f64)>,
    pub convergence: Option<ConvergenceRecord>,
    pub wall_time_s: f64,
}

impl RunRecord {
    fn failed(point: usize, init: &str, params: (f64, f64), reason: String) -> Self {
        RunRecord {
            point,
            init: init.to_string(),
            xi: params.0,
            eta: params.1,
            lambda: params.1 / params.0,
            status: RunStatus::Failed,
            reason: Some(reason),
            minimizer: false,
            nr: 0,
            ntheta: 0,
            energies: None,
            eta_energy: None,
            bands: Vec::new(),
            sym_ratio: None,
            ring: None,
            ray_lower_bound: None,
            d_lambda_reference: None,
            d_lambda_samples: Vec::new(),
            convergence: None,
            wall_time_s: 0.0,
        }
    }

    /// Record for `field` with all derived quantities filled in.
    pub fn from_field(
        point: usize,
        init: &str,
        field: &AxiField,
        params: &ModelParams,
        status: RunStatus,
        convergence: Option<ConvergenceRecord>,
    ) -> Self {
        let g = &*field.grid;
        let b = axisym::energy(field, params);
        let quarter = PI / 4.0;
        let bands = (0..4)
            .map(|k| {
                let (lo, hi) = (k as f64 * quarter, (k + 1) as f64 * quarter);
                BandEnergy {
                    theta_lo: lo,
                    theta_hi: hi,
                    energy: b.band(g, lo, hi),
                }
            })
            .collect();
        RunRecord {
            point,
            init: init.to_string(),
            xi: params.xi,
            eta: params.eta,
            lambda: params.lambda(),
            status,
            reason: None,
            minimizer: false,
            nr: g.nr(),
            ntheta: g.ntheta(),
            energies: Some(EnergySummary::of(&b)),
            eta_energy: Some(params.eta * b.total),
            bands,
            sym_ratio: Some(b.symmetry_ratio()),
            ring: locate_ring(field),
            ray_lower_bound: Some(ray_lower_bound(field, params)),
            d_lambda_reference: None,
            d_lambda_samples: Vec::new(),
            convergence,
            wall_time_s: 0.0,
        }
    }

    pub fn usable(&self) -> bool {
        self.status != RunStatus::Failed && self.energies.is_some()
    }
}

/// Records of one sweep and the directory they were written to.
#[derive(Clone, Debug)]
pub struct SweepOutcome {
    pub run_dir: Option<PathBuf>,
    pub records: Vec<RunRecord>,
}

impl SweepOutcome {
    /// Every requested point produced at least one converged record.
    pub fn all_points_ok(&self) -> bool {
        let mut by_point: BTreeMap<usize, bool> = BTreeMap::new();
        for r in &self.records {
            *by_point.entry(r.point).or_default() |= r.status == RunStatus::Ok;
        }
        by_point.values().all(|&ok| ok)
    }

    /// Every record has status `ok`.
    pub fn all_records_ok(&self) -> bool {
        self.records.iter().all(|r| r.status == RunStatus::Ok)
    }
}

/// Claims the next free `run-NNNN` directory under `root`.
pub fn next_run_dir(root: &Path) -> Result<PathBuf> {
    fs::create_dir_all(root)?;
    let mut next = 1 + fs::read_dir(root)?
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().to_str()?.strip_prefix("run-")?.parse::<usize>().ok())
        .max()
        .unwrap_or(0);
    loop {
        let dir = root.join(format!("run-{next:04}"));
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => next += 1,
            Err(e) => return Err(e.into()),
        }
    }
}

/// Seed of the noise stream for one (point, init) pair.
fn stream_seed(seed: u64, point: usize, init: usize) -> u64 {
    let mut z = seed ^ ((point as u64) << 20) ^ (init as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Adds uniform noise in `[-amp, amp]` to every interior coefficient.
pub fn add_noise(field: &mut AxiField, amp: f64, seed: u64) {
    if amp == 0.0 {
        return;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nt = field.grid.ntheta();
    let n = field.values.len();
    for q in &mut field.values[nt..n - nt] {
        for c in q.0.iter_mut() {
            *c += rng.gen_range(-amp..=amp);
        }
    }
}

/// Initial field of the given kind.
pub fn build_init(kind: InitKind, grid: Arc<AxiGrid>, params: &ModelParams) -> Result<AxiField> {
    Ok(match kind {
        InitKind::Trial => build_saturn_trial_on(grid, params, &SaturnOptions::default())?.field,
        InitKind::Layer => init_layer(grid, params),
        InitKind::Dipole => init_dipole(grid, params),
        InitKind::Hemispheres => init_hemispheres(grid, params),
    })
}

/// Minimizes from `field0` and records the result; the best iterate is kept
/// when the iteration budget runs out.
pub fn minimize_record(
    point: usize,
    label: &str,
    field0: &AxiField,
    params: &ModelParams,
    solver: &SolverOptions,
) -> (RunRecord, Option<AxiField>) {
    match axisym::minimize(field0, params, solver, label) {
        Ok(m) => {
            let rec = RunRecord::from_field(point, label, &m.field, params, RunStatus::Ok, Some(m.record));
            (rec, Some(m.field))
        }
        Err(Error::NotConverged { iterations, residual, best, .. }) => match field_from_packed(field0, &best, solver.planar) {
            Ok(field) => {
                let conv = ConvergenceRecord {
                    label: label.to_string(),
                    initial_energy: axisym::energy(field0, params).total,
                    final_energy: axisym::energy(&field, params).total,
                    grad_inf: residual,
                    iterations,
                    evaluations: 0,
                    converged: false,
                    history: Vec::new(),
                };
                let mut rec = RunRecord::from_field(point, label, &field, params, RunStatus::NotConverged, Some(conv));
                rec.reason = Some(format!("not converged after {iterations} iterations (residual {residual:.3e})"));
                (rec, Some(field))
            }
            Err(e) => (RunRecord::failed(point, label, (params.xi, params.eta), e.to_string()), None),
        },
        Err(e) => (RunRecord::failed(point, label, (params.xi, params.eta), e.to_string()), None),
    }
}

/// Hemisphere quadrature of `D_lambda`, doubled, with its node table.
pub fn d_lambda_reference(lambda: f64, nodes: usize, grid: &ProfileGrid) -> Result<(f64, Vec<(f64, f64)>)> {
    let (hemi, table) = hemisphere_integral_d_lambda(lambda, nodes, grid)?;
    Ok((2.0 * hemi, table))
}

/// Marks the lowest-energy usable record of each point.
pub fn mark_minimizers(records: &mut [RunRecord]) {
    let mut best: BTreeMap<usize, (usize, f64)> = BTreeMap::new();
    for (k, r) in records.iter().enumerate() {
        let Some(e) = r.energies.map(|e| e.total) else { continue };
        if !r.usable() {
            continue;
        }
        let entry = best.entry(r.point).or_insert((k, e));
        if e < entry.1 {
            *entry = (k, e);
        }
    }
    for r in records.iter_mut() {
        r.minimizer = false;
    }
    for (k, _) in best.values() {
        records[*k].minimizer = true;
    }
}

fn grid_for(section: &GridSection, params: &ModelParams) -> Result<Arc<AxiGrid>> {
    Ok(Arc::new(AxiGrid::new(&section.spec_for(params))?))
}

/// Runs every (point, init) pair in the rayon pool and writes `records.json`,
/// `config.json` and the requested snapshots into a fresh run directory.
/// Failures are recorded, not propagated; only I/O on the run directory is fatal.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepOutcome> {
    if spec.points.is_empty() {
        return Ok(SweepOutcome {
            run_dir: None,
            records: Vec::new(),
        });
    }
    let run_dir = next_run_dir(&spec.out_dir)?;
    fs::write(run_dir.join("config.json"), spec.config.to_json() + "\n")?;

    // D_lambda references, one per distinct lambda
    let mut lambdas: Vec<f64> = spec.points.iter().map(|&(xi, eta)| eta / xi).collect();
    lambdas.sort_by(f64::total_cmp);
    lambdas.dedup();
    let nodes = spec.grid.preset.quadrature_nodes();
    let refs: Vec<(f64, Option<(f64, Vec<(f64, f64)>)>)> = lambdas
        .par_iter()
        .map(|&l| (l, d_lambda_reference(l, nodes, &spec.profile_grid).ok()))
        .collect();

    let jobs: Vec<(usize, usize)> = (0..spec.points.len())
        .flat_map(|p| (0..spec.inits.len()).map(move |k| (p, k)))
        .collect();
    let grids: Vec<Result<(ModelParams, Arc<AxiGrid>)>> = spec
        .points
        .par_iter()
        .map(|&(xi, eta)| {
            let params = ModelParams::with_reg(xi, eta, spec.reg_delta)?;
            Ok((params, grid_for(&spec.grid, &params)?))
        })
        .collect();

    let results: Vec<(RunRecord, Option<AxiField>)> = jobs
        .par_iter()
        .map(|&(p, k)| {
            let start = Instant::now();
            let kind = spec.inits[k];
            let (xi, eta) = spec.points[p];
            let (mut rec, field) = match &grids[p] {
                Err(e) => (RunRecord::failed(p, kind.label(), (xi, eta), e.to_string()), None),
                Ok((params, grid)) => match build_init(kind, grid.clone(), params) {
                    Err(e) => (RunRecord::failed(p, kind.label(), (xi, eta), e.to_string()), None),
                    Ok(mut f0) => {
                        add_noise(&mut f0, spec.noise, stream_seed(spec.seed, p, k));
                        minimize_record(p, kind.label(), &f0, params, &spec.solver)
                    }
                },
            };
            if let Some((_, Some((total, table)))) = refs.iter().find(|(l, _)| *l == eta / xi) {
                rec.d_lambda_reference = Some(*total);
                rec.d_lambda_samples = table.clone();
            }
            rec.wall_time_s = start.elapsed().as_secs_f64();
            (rec, field)
        })
        .collect();

    let mut records: Vec<RunRecord> = results.iter().map(|(r, _)| r.clone()).collect();
    mark_minimizers(&mut records);
    if spec.snapshots {
        for ((_, field), rec) in results.iter().zip(&records) {
            if let (true, Some(field), Ok((params, _))) = (rec.minimizer, field, &grids[rec.point]) {
                let stem = format!("point-{:03}-{}", rec.point, rec.init);
                axisym::write_snapshot(&run_dir, &stem, field, params, rec.convergence.as_ref())?;
            }
        }
    }
    write_records(&run_dir.join("records.json"), &records)?;
    Ok(SweepOutcome {
        run_dir: Some(run_dir),
        records,
    })
}

/// Init label of finite-lambda trial records.
pub const FINITE_TRIAL_LABEL: &str = "finite-lambda-trial";

/// Partition width and mollifier width of the finite-lambda trial.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteTrialSettings {
    pub h: f64,
    pub eps_mollify: f64,
}

/// Builds and evaluates the Saturn trial (and optionally the finite-lambda
/// trial) at every point without minimizing. Writes `records.json` and, when
/// requested, the trial fields into a fresh run directory.
pub fn run_trials(spec: &SweepSpec, finite: Option<FiniteTrialSettings>) -> Result<SweepOutcome> {
    if spec.points.is_empty() {
        return Ok(SweepOutcome {
            run_dir: None,
            records: Vec::new(),
        });
    }
    let run_dir = next_run_dir(&spec.out_dir)?;
    fs::write(run_dir.join("config.json"), spec.config.to_json() + "\n")?;
    let nodes = spec.grid.preset.quadrature_nodes();
    let mut records = Vec::new();
    for (p, &(xi, eta)) in spec.points.iter().enumerate() {
        let start = Instant::now();
        let setup = ModelParams::with_reg(xi, eta, spec.reg_delta).and_then(|params| Ok((params, grid_for(&spec.grid, &params)?)));
        let (params, grid) = match setup {
            Ok(v) => v,
            Err(e) => {
                records.push(RunRecord::failed(p, crate::harness::fit::TRIAL_LABEL, (xi, eta), e.to_string()));
                continue;
            }
        };
        let reference = d_lambda_reference(params.lambda(), nodes, &spec.profile_grid).ok();
        let mut attach = |mut rec: RunRecord, start: Instant| {
            if let Some((total, table)) = &reference {
                rec.d_lambda_reference = Some(*total);
                rec.d_lambda_samples = table.clone();
            }
            rec.wall_time_s = start.elapsed().as_secs_f64();
            records.push(rec);
        };
        let label = crate::harness::fit::TRIAL_LABEL;
        match build_saturn_trial_on(grid.clone(), &params, &SaturnOptions::default()) {
            Ok(t) => {
                if spec.snapshots {
                    axisym::write_snapshot(&run_dir, &format!("point-{p:03}-{label}"), &t.field, &params, None)?;
                }
                attach(RunRecord::from_field(p, label, &t.field, &params, RunStatus::Ok, None), start);
            }
            Err(e) => attach(RunRecord::failed(p, label, (xi, eta), e.to_string()), start),
        }
        if let Some(set) = finite {
            let start = Instant::now();
            let tspec = crate::trial::TrialSpec {
                mode: crate::trial::TrialMode::FiniteLambda,
                h: set.h,
                eps_mollify: set.eps_mollify,
                params,
            };
            match crate::trial::build_finite_lambda_trial(&tspec, grid.clone(), &spec.profile_grid) {
                Ok(t) => {
                    if spec.snapshots {
                        let stem = format!("point-{p:03}-{FINITE_TRIAL_LABEL}");
                        axisym::write_snapshot(&run_dir, &stem, &t.field, &params, None)?;
                        let mut f = fs::File::create(run_dir.join(format!("{stem}-budget.json")))?;
                        serde_json::to_writer_pretty(&mut f, &t.report)?;
                        f.write_all(b"\n")?;
                    }
                    attach(RunRecord::from_field(p, FINITE_TRIAL_LABEL, &t.field, &params, RunStatus::Ok, None), start);
                }
                Err(e) => attach(RunRecord::failed(p, FINITE_TRIAL_LABEL, (xi, eta), e.to_string()), start),
            }
        }
    }
    write_records(&run_dir.join("records.json"), &records)?;
    Ok(SweepOutcome {
        run_dir: Some(run_dir),
        records,
    })
}

pub fn write_records(path: &Path, records: &[RunRecord]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, records)?;
    f.write_all(b"\n")?;
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<RunRecord>> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::{Config, Preset};

    fn tiny_config(dir: &Path) -> Config {
        let mut c = Config::default();
        c.grid.preset = Preset::Fast;
        c.grid.r_out_etas = 10.0;
        c.sweep.points = vec![crate::harness::config::Point { xi: 0.1, eta: 0.4 }];
        c.sweep.inits = vec![InitKind::Layer, InitKind::Dipole];
        c.solver.tol = 1e-4;
        c.output.dir = dir.to_path_buf();
        c
    }

    #[test]
    fn empty_spec_gives_no_records() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = Config::default();
        c.output.dir = dir.path().to_path_buf();
        let out = run_sweep(&SweepSpec::from_config(&c).unwrap()).unwrap();
        assert!(out.records.is_empty());
        assert!(out.all_points_ok());
    }

    #[test]
    fn two_inits_two_records_and_new_run_dirs() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SweepSpec::from_config(&tiny_config(dir.path())).unwrap();
        let a = run_sweep(&spec).unwrap();
        assert_eq!(a.records.len(), 2);
        let mins: Vec<_> = a.records.iter().filter(|r| r.minimizer).collect();
        assert_eq!(mins.len(), 1);
        let lowest = a.records.iter().map(|r| r.energies.unwrap().total).fold(f64::INFINITY, f64::min);
        assert_eq!(mins[0].energies.unwrap().total, lowest);
        for r in &a.records {
            assert!(r.eta_energy.unwrap() > 0.0);
            assert!(r.d_lambda_reference.unwrap() > 0.0);
        }
        let b = run_sweep(&spec).unwrap();
        assert_ne!(a.run_dir, b.run_dir);
        assert!(b.run_dir.as_ref().unwrap().ends_with("run-0002"));
        assert_eq!(read_records(&a.run_dir.unwrap().join("records.json")).unwrap().len(), 2);
    }

    #[test]
    fn unresolvable_trial_grid_is_recorded_not_fatal() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = tiny_config(dir.path());
        c.grid.n_theta = Some(16);
        c.sweep.inits = vec![InitKind::Trial, InitKind::Layer];
        let out = run_sweep(&SweepSpec::from_config(&c).unwrap()).unwrap();
        assert_eq!(out.records.len(), 2);
        assert_eq!(out.records[0].status, RunStatus::Failed);
        assert!(out.records[0].reason.as_ref().unwrap().contains("rejected grid"));
        assert_eq!(out.records[1].status, RunStatus::Ok);
        assert!(out.records[1].minimizer);
    }

    #[test]
    fn trial_records_per_point() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = tiny_config(dir.path());
        c.sweep.points.push(crate::harness::config::Point { xi: 0.05, eta: 0.05 });
        let set = FiniteTrialSettings { h: PI / 8.0, eps_mollify: 0.05 };
        let out = run_trials(&SweepSpec::from_config(&c).unwrap(), Some(set)).unwrap();
        assert_eq!(out.records.len(), 4);
        let status: Vec<RunStatus> = out.records.iter().map(|r| r.status).collect();
        // lambda = 1 is outside the Saturn trial's range
        assert_eq!(status, [RunStatus::Ok, RunStatus::Ok, RunStatus::Failed, RunStatus::Ok]);
        assert!(out.records[2].reason.as_ref().unwrap().contains("xi/eta"));
        assert_eq!(out.records[0].init, crate::harness::fit::TRIAL_LABEL);
        assert_eq!(out.records[1].init, FINITE_TRIAL_LABEL);
        assert!(out.records[0].ring.is_some());
        assert!((out.records[0].sym_ratio.unwrap() - 1.0).abs() < 1e-12);
        assert!(out.records.iter().all(|r| !r.minimizer));
    }

    #[test]
    fn noise_is_seeded() {
        let p = ModelParams::new(0.1, 0.4).unwrap();
        let g = grid_for(&GridSection { preset: Preset::Fast, ..Default::default() }, &p).unwrap();
        let mut a = init_layer(g.clone(), &p);
        let mut b = a.clone();
        add_noise(&mut a, 1e-3, stream_seed(7, 0, 1));
        add_noise(&mut b, 1e-3, stream_seed(7, 0, 1));
        assert_eq!(a.values, b.values);
        assert!(a.boundary_ok());
        let mut c = init_layer(g, &p);
        add_noise(&mut c, 1e-3, stream_seed(8, 0, 1));
        assert_ne!(a.values, c.values);
    }
}
