//! Acceptance criteria 1 to 10. Each test prints one `criterion N: PASS|FAIL` line.
//! Run with `cargo test --release --test acceptance -- --nocapture`.

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use nematic_colloid::axisym::{energy, energy_gradient, AxiField, AxiGrid};
use nematic_colloid::harness::config::Point;
use nematic_colloid::harness::fit::{line_fit, oriented_quadrature, two_pi_kappa};
use nematic_colloid::harness::{run_sweep, run_trials, Config, InitKind, RunRecord, SweepSpec, TRIAL_LABEL};
use nematic_colloid::profile::{
    d_infinity, d_lambda_curve, d_lipschitz_probe, field_potential_director, minimize_profile, profile_energy,
    GeodesicPath, ProfileGrid,
};
use nematic_colloid::qtensor::{boundary_tensor, field_potential, nematic_potential, random_unit, DEFAULT_REG_DELTA};
use nematic_colloid::trial::{build_saturn_trial_on, gl_core_minimize, saturn_fine_grid_spec, SaturnOptions, SquarePatch};
use nematic_colloid::{kappa, ModelParams, QTensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn verdict(n: usize, ok: bool, detail: &str) {
    println!("criterion {n}: {} {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {n} failed: {detail}");
}

fn layer_grid() -> ProfileGrid {
    ProfileGrid::new(20.0 / kappa(), 2000).unwrap()
}

#[test]
fn criterion_01_geodesic_closed_form() {
    let grid = layer_grid();
    let mut worst: f64 = 0.0;
    let mut rows = Vec::new();
    for theta in [PI / 6.0, PI / 3.0, PI / 2.0] {
        let d = minimize_profile(&boundary_tensor(theta, 0.0), 1e3, &grid).unwrap().d_lambda;
        let rel = (d - d_infinity(theta)).abs() / d_infinity(theta);
        worst = worst.max(rel);
        rows.push(format!("theta {theta:.4}: D {d:.5} vs {:.5}", d_infinity(theta)));
    }
    verdict(1, worst <= 0.02, &format!("max rel error {worst:.2e} <= 2e-2 ({})", rows.join("; ")));
}

#[test]
fn criterion_02_equipartition() {
    let mut worst: f64 = 0.0;
    for theta in [0.1, PI / 6.0, PI / 3.0, PI / 2.0, 2.0 * PI / 3.0, 3.0] {
        let path = GeodesicPath::optimal(theta);
        for k in 0..1000 {
            let t = 10.0 * k as f64 / 999.0;
            let v = path.velocity(t);
            let speed2 = v.iter().map(|c| c * c).sum::<f64>();
            worst = worst.max((speed2 - field_potential_director(&path.at(t))).abs());
        }
    }
    verdict(2, worst < 1e-8, &format!("max ||n'|^2 - g(n)| = {worst:.2e} < 1e-8"));
}

/// Minimizations and trial maps along `eta = 5 xi`, shared by criteria 3, 6, 7, 8.
struct Schedule {
    sweep: Vec<RunRecord>,
    trials: Vec<RunRecord>,
    xis: Vec<f64>,
}

impl Schedule {
    fn minimizer(&self, point: usize) -> &RunRecord {
        self.sweep.iter().find(|r| r.point == point && r.minimizer).expect("minimizer record")
    }

    fn by_init(&self, point: usize, init: &str) -> &RunRecord {
        self.sweep.iter().find(|r| r.point == point && r.init == init).expect("record")
    }

    fn finest(&self) -> usize {
        self.xis.len() - 1
    }
}

fn schedule() -> &'static Schedule {
    static CELL: OnceLock<Schedule> = OnceLock::new();
    CELL.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let xis = vec![0.04, 0.02, 0.01];
        let mut cfg = Config::default();
        cfg.output.dir = dir.path().to_path_buf();
        cfg.sweep.points = xis.iter().map(|&xi| Point { xi, eta: 5.0 * xi }).collect();
        cfg.sweep.inits = vec![InitKind::Trial, InitKind::Layer, InitKind::Dipole];
        let spec = SweepSpec::from_config(&cfg).unwrap();
        let sweep = run_sweep(&spec).unwrap().records;
        let trials = run_trials(&spec, None).unwrap().records;
        Schedule { sweep, trials, xis }
    })
}

#[test]
fn criterion_03_limit_energy() {
    let s = schedule();
    let target = two_pi_kappa();
    let trial: Vec<f64> = (0..s.xis.len())
        .map(|p| {
            let r = s.trials.iter().find(|r| r.point == p && r.init == TRIAL_LABEL).expect("trial record");
            r.eta_energy.expect("trial energy")
        })
        .collect();
    let minim: Vec<f64> = (0..s.xis.len()).map(|p| s.minimizer(p).eta_energy.unwrap()).collect();
    let grids_ok = s.sweep.iter().all(|r| r.nr <= 256 && r.ntheta <= 768);
    let decreasing = trial.windows(2).all(|w| w[1] < w[0]);
    let rel = (trial[s.finest()] - target).abs() / target;
    let below = minim.iter().zip(&trial).all(|(m, t)| m <= t);
    verdict(
        3,
        grids_ok && decreasing && rel <= 0.25 && below,
        &format!(
            "trial eta E {trial:.4?} decreasing {decreasing}, finest {:+.1}% of 2 pi kappa = {target:.4} (<= 25%); minimizer eta E {minim:.4?} <= trial {below}; grids within 768x256 {grids_ok}",
            100.0 * (trial[s.finest()] - target) / target
        ),
    );
}

#[test]
fn criterion_04_log_law_remainder() {
    let eta = 0.1;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for eps in [0.1, 0.05, 0.025] {
        let p = ModelParams::new(eps * eta, eta).unwrap();
        let grid = Arc::new(AxiGrid::new(&saturn_fine_grid_spec(&p)).unwrap());
        let trial = build_saturn_trial_on(grid, &p, &SaturnOptions::default()).unwrap();
        let e = energy(&trial.field, &p).total;
        xs.push(eps.ln().abs());
        ys.push(e - two_pi_kappa() / eta);
    }
    let fit = line_fit(&xs, &ys).unwrap();
    let predicted = 2.0 * PI * PI / 3.0;
    let rel = (fit.slope - predicted) / predicted;
    verdict(
        4,
        rel.abs() <= 0.2,
        &format!(
            "excess slope {:.4} vs 2 pi^2/3 = {predicted:.4} ({:+.1}%, tolerance 20%); excess {ys:.3?} at |ln eps| {xs:.4?}",
            fit.slope,
            100.0 * rel
        ),
    );
}

#[test]
fn criterion_05_gl_core() {
    let mut energies = Vec::new();
    for eps in [0.1, 0.05, 0.025] {
        let patch = SquarePatch::canonical(SquarePatch::nodes_for(0.5, eps, 6.0), eps).unwrap();
        energies.push(gl_core_minimize(&patch).unwrap().energy);
    }
    let target = PI / 3.0 * 2f64.ln();
    let incs: Vec<f64> = energies.windows(2).map(|w| w[1] - w[0]).collect();
    let ok = incs.iter().all(|d| (d - target).abs() <= 0.15 * target);
    verdict(5, ok, &format!("energies {energies:.6?}, increments {incs:.4?} vs (pi/3) ln 2 = {target:.4} (15%)"));
}

#[test]
fn criterion_06_symmetry() {
    let s = schedule();
    let (fine, coarse) = (s.minimizer(s.finest()), s.minimizer(0));
    let rf = fine.sym_ratio.unwrap();
    let rc = coarse.sym_ratio.unwrap();
    let in_range = (0.8..=1.25).contains(&rf);
    // both ratios sit at 1 to rounding, so "closer" allows a rounding-level tie
    let closer = (rf - 1.0).abs() <= (rc - 1.0).abs() + 1e-12;
    let mut dipole_ok = true;
    let mut rows = Vec::new();
    for p in 0..s.xis.len() {
        let d = s.by_init(p, "dipole");
        let m = s.minimizer(p);
        let (ed, em) = (d.energies.unwrap().total, m.energies.unwrap().total);
        let rd = d.sym_ratio.unwrap();
        let relaxed = (rd - 1.0).abs() <= 1e-3 && (ed - em).abs() <= 1e-6 * em;
        let higher = ed > em * (1.0 + 1e-9);
        dipole_ok &= d.usable() && (relaxed || higher);
        rows.push(format!("xi {}: dipole ratio {rd:.6} E {ed:.6} vs {em:.6}", s.xis[p]));
    }
    verdict(
        6,
        in_range && closer && dipole_ok,
        &format!("finest ratio {rf:.15}, coarsest {rc:.15}; {}", rows.join("; ")),
    );
}

#[test]
fn criterion_07_cone_asymptotics() {
    let s = schedule();
    let m = s.minimizer(s.finest());
    let e = m.energies.unwrap();
    let sum: f64 = m.bands.iter().map(|b| b.energy).sum();
    let sum_ok = (sum - e.total).abs() <= 1e-10 * e.total.abs();
    let half = PI / 2.0;
    let band = |lo: f64, hi: f64| -> f64 {
        m.bands.iter().filter(|b| b.theta_lo >= lo - 1e-12 && b.theta_hi <= hi + 1e-12).map(|b| b.energy).sum()
    };
    // hemisphere quadrature of 2 pi int D_lambda sin; the lower band equals the upper by symmetry of D
    let hemi = 0.5 * m.d_lambda_reference.unwrap();
    let mut rows = Vec::new();
    let mut ok = sum_ok;
    for (lo, hi) in [(0.0, half), (half, PI)] {
        let eta_e = m.eta * band(lo, hi);
        let rel = (eta_e - hemi) / hemi;
        ok &= rel.abs() <= 0.25;
        rows.push(format!("[{lo:.4}, {hi:.4}]: eta E {eta_e:.4} vs {hemi:.4} ({:+.1}%)", 100.0 * rel));
    }
    verdict(7, ok, &format!("{}; band sum rel gap {:.1e}", rows.join("; "), (sum - e.total).abs() / e.total));
}

#[test]
fn criterion_08_orientable_gap() {
    let s = schedule();
    let m = s.minimizer(s.finest());
    let params = ModelParams::new(m.xi, m.eta).unwrap();
    let grid = Arc::new(AxiGrid::new(&nematic_colloid::axisym::AxiGridSpec::for_params(&params)).unwrap());
    let dipole = params.eta * energy(&nematic_colloid::axisym::init_dipole(grid, &params), &params).total;
    let me = m.eta_energy.unwrap();
    let ratio = dipole / me;
    verdict(
        8,
        ratio >= 1.5,
        &format!(
            "oriented ansatz eta E {dipole:.4} / minimizer {me:.4} = {ratio:.3} (>= 1.5); stated 8 pi kappa = {:.4}, quadrature int kappa(1 - cos) = {:.4}",
            8.0 * PI * kappa(),
            oriented_quadrature(64)
        ),
    );
}

/// `||fd - grad||_inf / ||grad||_inf` for central differences of step `h`.
fn fd_mismatch(x: &[f64], grad: &[f64], free: &[usize], h: f64, f: impl Fn(&[f64]) -> f64) -> f64 {
    let mut y = x.to_vec();
    let mut err: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for &k in free {
        y[k] = x[k] + h;
        let ep = f(&y);
        y[k] = x[k] - h;
        let em = f(&y);
        y[k] = x[k];
        err = err.max(((ep - em) / (2.0 * h) - grad[k]).abs());
        scale = scale.max(grad[k].abs());
    }
    err / scale
}

fn random_tensor(rng: &mut ChaCha8Rng) -> QTensor {
    random_unit(rng) * rng.gen_range(0.1..1.5)
}

fn flat(v: &[QTensor]) -> Vec<f64> {
    v.iter().flat_map(|q| q.0).collect()
}

fn unflat(x: &[f64]) -> Vec<QTensor> {
    x.chunks(5).map(|c| QTensor([c[0], c[1], c[2], c[3], c[4]])).collect()
}

#[test]
fn criterion_09_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let all5: Vec<usize> = (0..5).collect();
    let (mut w_f, mut w_g, mut w_1d, mut w_2d) = (0f64, 0f64, 0f64, 0f64);

    for _ in 0..100 {
        let q = random_tensor(&mut rng);
        let (_, g) = nematic_potential(&q);
        w_f = w_f.max(fd_mismatch(&q.0, &g.0, &all5, 1e-5, |x| nematic_potential(&unflat(x)[0]).0));
        let (_, g) = field_potential(&q, DEFAULT_REG_DELTA);
        w_g = w_g.max(fd_mismatch(&q.0, &g.0, &all5, 1e-5, |x| field_potential(&unflat(x)[0], DEFAULT_REG_DELTA).0));
    }

    for _ in 0..100 {
        let vals: Vec<QTensor> = (0..40).map(|_| random_tensor(&mut rng)).collect();
        let lambda = rng.gen_range(1.0..30.0);
        let x = flat(&vals);
        let (_, g) = profile_energy(&vals, 0.05, lambda, DEFAULT_REG_DELTA);
        let free: Vec<usize> = (0..x.len()).collect();
        w_1d = w_1d.max(fd_mismatch(&x, &flat(&g), &free, 1e-6, |y| profile_energy(&unflat(y), 0.05, lambda, DEFAULT_REG_DELTA).0));
    }

    let r: Vec<f64> = (0..8).map(|i| 1.0 + 0.15 * i as f64 * (1.0 + 0.1 * i as f64)).collect();
    let grid = Arc::new(AxiGrid::from_nodes(r, 8));
    let nt = grid.ntheta();
    let free: Vec<usize> = (5 * nt..5 * (grid.len() - nt)).collect();
    let params = ModelParams::new(0.2, 0.5).unwrap();
    for _ in 0..100 {
        let mut field = AxiField::from_fn(grid.clone(), |_, _| QTensor::ZERO);
        for v in field.values.iter_mut() {
            *v = random_tensor(&mut rng);
        }
        field.enforce_boundary();
        let (_, g) = energy_gradient(&field, &params);
        let x = flat(&field.values);
        let eval = |y: &[f64]| {
            let f = AxiField {
                grid: grid.clone(),
                values: unflat(y),
            };
            energy(&f, &params).total
        };
        w_2d = w_2d.max(fd_mismatch(&x, &flat(&g), &free, 1e-6, eval));
    }

    let worst = w_f.max(w_g).max(w_1d).max(w_2d);
    verdict(
        9,
        worst <= 1e-6,
        &format!("relative mismatch f {w_f:.1e}, g {w_g:.1e}, 1D {w_1d:.1e}, 2D {w_2d:.1e} (<= 1e-6, 100 states each)"),
    );
}

#[test]
fn criterion_10_monotone_and_lipschitz() {
    let grid = layer_grid();
    let q0 = boundary_tensor(PI / 2.0, 0.0);
    let curve = d_lambda_curve(&q0, &[1.0, 3.0, 10.0, 30.0, 100.0], &grid).unwrap();
    let ds: Vec<f64> = curve.iter().map(|c| c.1).collect();
    let monotone = ds.windows(2).all(|w| w[1] >= w[0]);
    let capped = ds.iter().all(|&d| d <= kappa() + 1e-3);
    let mut probes = Vec::new();
    let mut below = true;
    for (lambda, dt) in [(3.0, 0.05), (30.0, 0.02)] {
        let p = d_lipschitz_probe(&q0, &boundary_tensor(PI / 2.0 - dt, 0.0), lambda, &grid).unwrap();
        below &= p.ratio <= p.bound;
        probes.push(format!("lambda {lambda}: ratio {:.4} vs bound {:.4}", p.ratio, p.bound));
    }
    verdict(
        10,
        monotone && capped && below,
        &format!("D {ds:.5?} nondecreasing {monotone}, <= kappa + 1e-3 {capped}; {}", probes.join("; ")),
    );
}
