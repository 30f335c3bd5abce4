//! A small sweep along eta = 5 xi, the scaling fit and the report files.
use nematic_colloid::harness::{fit_scaling, report, run_sweep, Config, SweepSpec, FORMATS};

fn main() -> nematic_colloid::Result<()> {
    let out = std::env::temp_dir().join("nematic-colloid-example");
    let mut config = Config::from_json(
        r#"{
            "grid":   {"preset": "fast"},
            "sweep":  {"schedule": {"kind": "linear", "ratio": 5, "xi": [0.08, 0.04, 0.02]},
                       "inits": ["trial", "layer"]},
            "solver": {"tol": 1e-6}
        }"#,
    )?;
    config.output.dir = out;
    let outcome = run_sweep(&SweepSpec::from_config(&config)?)?;
    for r in outcome.records.iter().filter(|r| r.minimizer) {
        println!(
            "xi {:<5} eta {:<5} eta E {:.5}  int D_lambda {:.5}  ({})",
            r.xi,
            r.eta,
            r.eta_energy.unwrap(),
            r.d_lambda_reference.unwrap_or(f64::NAN),
            r.init
        );
    }
    let fit = fit_scaling(&outcome.records)?;
    if let Some(l) = fit.limit {
        println!("extrapolated eta E -> {:.5}, reference {:.5} ({:+.2}%)", l.fit.intercept, l.reference, 100.0 * l.rel_gap);
    }
    let dir = outcome.run_dir.expect("non-empty sweep");
    for f in FORMATS {
        for p in report(&outcome.records, f, &dir)? {
            println!("wrote {}", p.display());
        }
    }
    Ok(())
}
