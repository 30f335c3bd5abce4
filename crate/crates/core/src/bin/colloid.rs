//! Command-line front end over `nematic_colloid::harness`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nematic_colloid::harness::{
    self, config::Point, fit_scaling, orientable_comparison, read_records, run_profiles, run_sweep, run_trials, Config,
    FiniteTrialSettings, Preset, SweepOutcome, SweepSpec,
};
use nematic_colloid::{ModelParams, Result};

#[derive(Parser)]
#[command(name = "colloid", version, about = "Nematic colloid in a strong field: layer profiles, minimizers and trial maps")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON config with sections model, grid, solver, sweep, output.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root directory for run directories (overrides output.dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for the initial-noise streams (overrides sweep.seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; COLLOID_THREADS is used when the flag is absent.
    #[arg(long, global = true, env = "COLLOID_THREADS")]
    threads: Option<usize>,
    /// Grid resolution preset (overrides grid.preset).
    #[arg(long, global = true, value_enum)]
    preset: Option<Preset>,
}

#[derive(Subcommand)]
enum Command {
    /// Layer profiles and D_lambda(theta) curves.
    Profile,
    /// Minimize at a single (xi, eta).
    Minimize {
        #[arg(long)]
        xi: Option<f64>,
        #[arg(long)]
        eta: Option<f64>,
    },
    /// Build and evaluate the trial constructions at every point.
    Trial {
        /// Also build the finite-lambda trial with this partition width.
        #[arg(long)]
        finite_h: Option<f64>,
        /// Mollifier width of the finite-lambda trial (default h/4).
        #[arg(long)]
        mollify: Option<f64>,
        /// Compare the oriented dipole ansatz with the minimizer at the first point.
        #[arg(long)]
        orientable: bool,
    },
    /// Minimize at every point from every initialization.
    Sweep,
    /// Re-emit outputs from a run directory's records.json.
    Report {
        run_dir: PathBuf,
        /// Output formats (default: output.formats).
        #[arg(long = "format")]
        formats: Vec<String>,
    },
}

fn load_config(c: &Common) -> Result<Config> {
    let mut cfg = match &c.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(o) = &c.out {
        cfg.output.dir = o.clone();
    }
    if let Some(s) = c.seed {
        cfg.sweep.seed = s;
    }
    if let Some(p) = c.preset {
        cfg.grid.preset = p;
    }
    Ok(cfg)
}

fn emit(dir: &Path, outcome: &SweepOutcome, formats: &[String]) -> Result<()> {
    for f in formats {
        for p in harness::report(&outcome.records, f, dir)? {
            println!("wrote {}", p.display());
        }
    }
    if let Ok(fit) = fit_scaling(&outcome.records) {
        std::fs::write(dir.join("fit.json"), serde_json::to_string_pretty(&fit)? + "\n")?;
        if let Some(l) = &fit.limit {
            println!(
                "eta E -> {:.6} (linear in eta, {} points); reference {:.6} [{}]; gap {:+.3}%",
                l.fit.intercept,
                l.points,
                l.reference,
                l.reference_kind,
                100.0 * l.rel_gap
            );
        }
        if let Some(s) = &fit.trial_slope {
            println!(
                "trial excess slope in |ln eps| at eta = {}: {:.4} (2 pi^2/3 = {:.4}, {:+.1}%)",
                s.eta,
                s.fit.slope,
                s.predicted,
                100.0 * s.rel_error
            );
        }
    }
    Ok(())
}

fn summarize(outcome: &SweepOutcome) {
    for r in &outcome.records {
        let e = r.eta_energy.map_or("-".to_string(), |v| format!("{v:.6}"));
        let tag = if r.minimizer { " *" } else { "" };
        let why = r.reason.as_deref().map(|s| format!(" ({s})")).unwrap_or_default();
        println!(
            "point {:>3} xi {:<8} eta {:<8} {:<20} {:<13} eta E {e}{tag}{why}",
            r.point,
            r.xi,
            r.eta,
            r.init,
            r.status.as_str()
        );
    }
}

fn run(cli: Cli) -> Result<bool> {
    if let Some(n) = cli.common.threads {
        // a second initialization only fails if a pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let mut cfg = load_config(&cli.common)?;
    match cli.command {
        Command::Profile => {
            let out = run_profiles(&cfg)?;
            for c in &out.summary.curves {
                println!(
                    "lambda {:<8} int D_lambda = {:.6}  (2 pi kappa = {:.6})",
                    c.lambda, c.sphere_integral, out.summary.limit
                );
            }
            for (t, l, e) in &out.summary.failures {
                eprintln!("theta {t} lambda {l}: {e}");
            }
            println!("run directory {}", out.run_dir.display());
            Ok(out.all_ok())
        }
        Command::Minimize { xi, eta } => {
            if let (Some(xi), Some(eta)) = (xi, eta) {
                cfg.sweep.points = vec![Point { xi, eta }];
                cfg.sweep.schedule = None;
            } else if xi.is_some() || eta.is_some() {
                return Err(nematic_colloid::Error::InvalidInput("give both --xi and --eta".into()));
            }
            let pts = cfg.points();
            let Some(&(xi, eta)) = pts.first() else {
                return Err(nematic_colloid::Error::InvalidInput("no point given (--xi/--eta or sweep.points)".into()));
            };
            cfg.sweep.points = vec![Point { xi, eta }];
            cfg.sweep.schedule = None;
            cfg.output.snapshots = true;
            let out = run_sweep(&SweepSpec::from_config(&cfg)?)?;
            summarize(&out);
            if let Some(d) = &out.run_dir {
                emit(d, &out, &cfg.output.formats)?;
                println!("run directory {}", d.display());
            }
            Ok(out.all_points_ok())
        }
        Command::Trial {
            finite_h,
            mollify,
            orientable,
        } => {
            let finite = finite_h.map(|h| FiniteTrialSettings {
                h,
                eps_mollify: mollify.unwrap_or(h / 4.0),
            });
            let spec = SweepSpec::from_config(&cfg)?;
            let out = run_trials(&spec, finite)?;
            summarize(&out);
            let mut ok = out.all_records_ok();
            if let Some(d) = &out.run_dir {
                emit(d, &out, &cfg.output.formats)?;
                if orientable {
                    let (xi, eta) = spec.points[0];
                    let params = ModelParams::with_reg(xi, eta, cfg.model.reg_delta)?;
                    let rep = orientable_comparison(&params, &cfg.grid, &cfg.solver)?;
                    println!(
                        "oriented ansatz eta E {:.4}; minimizer eta E {}; ratio {}",
                        rep.dipole_eta_energy,
                        rep.minimizer_eta_energy.map_or("-".into(), |v| format!("{v:.4}")),
                        rep.ratio.map_or("-".into(), |v| format!("{v:.3}"))
                    );
                    println!(
                        "quadrature int kappa(1 - cos) = {:.4}; stated constant 8 pi kappa = {:.4}; limit 2 pi kappa = {:.4}",
                        rep.quadrature, rep.stated_constant, rep.limit
                    );
                    std::fs::write(d.join("orientable.json"), serde_json::to_string_pretty(&rep)? + "\n")?;
                    ok &= rep.separated == Some(true);
                }
                println!("run directory {}", d.display());
            }
            Ok(ok)
        }
        Command::Sweep => {
            let out = run_sweep(&SweepSpec::from_config(&cfg)?)?;
            summarize(&out);
            if let Some(d) = &out.run_dir {
                emit(d, &out, &cfg.output.formats)?;
                println!("run directory {}", d.display());
            }
            Ok(out.all_points_ok())
        }
        Command::Report { run_dir, formats } => {
            let records = read_records(&run_dir.join("records.json"))?;
            let formats = if formats.is_empty() { cfg.output.formats.clone() } else { formats };
            let dir = cli.common.out.clone().unwrap_or(run_dir);
            let out = SweepOutcome {
                run_dir: Some(dir.clone()),
                records,
            };
            emit(&dir, &out, &formats)?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("some requested points did not succeed");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
