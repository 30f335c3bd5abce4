//! The mollified piecewise construction for finite lambda and its error budget.
use std::f64::consts::PI;
use std::sync::Arc;

use nematic_colloid::axisym::AxiGrid;
use nematic_colloid::profile::{sphere_integral_d_lambda, ProfileGrid};
use nematic_colloid::trial::{build_finite_lambda_trial, TrialMode, TrialSpec};
use nematic_colloid::ModelParams;

fn main() -> nematic_colloid::Result<()> {
    let params = ModelParams::new(0.02, 0.1)?;
    let grid = Arc::new(AxiGrid::for_params(&params)?);
    let profile_grid = ProfileGrid::new(ProfileGrid::default().length, 800)?;
    let (reference, _) = sphere_integral_d_lambda(params.lambda(), 16, &profile_grid)?;
    for h in [PI / 6.0, PI / 12.0, PI / 24.0] {
        let spec = TrialSpec {
            mode: TrialMode::FiniteLambda,
            h,
            eps_mollify: h / 4.0,
            params,
        };
        let t = build_finite_lambda_trial(&spec, grid.clone(), &profile_grid)?;
        let r = &t.report;
        println!(
            "h = pi/{:<3} eta E = {:.4}  relaxed {:.4}  Riemann sum {:.4}  budget {:.4}  (int D_lambda = {:.4})",
            (PI / h).round(),
            r.eta_energy,
            r.relaxed_eta_energy,
            r.riemann_sum,
            r.sigma_budget,
            reference
        );
    }
    Ok(())
}
