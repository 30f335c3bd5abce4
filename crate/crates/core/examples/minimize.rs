//! Axisymmetric minimization from several starts at one parameter point.
use std::f64::consts::PI;

use nematic_colloid::axisym::{init_dipole, init_layer, locate_ring, minimize_multi, SolverOptions};
use nematic_colloid::profile::{sphere_integral_d_lambda, ProfileGrid};
use nematic_colloid::trial::build_saturn_trial;
use nematic_colloid::ModelParams;

fn main() -> nematic_colloid::Result<()> {
    let params = ModelParams::new(0.04, 0.2)?;
    let trial = build_saturn_trial(&params)?;
    let grid = trial.field.grid.clone();
    println!("grid {} x {}", grid.nr(), grid.ntheta());
    let inits = vec![
        ("trial".to_string(), trial.field.clone()),
        ("layer".to_string(), init_layer(grid.clone(), &params)),
        ("dipole".to_string(), init_dipole(grid.clone(), &params)),
    ];
    let (best, records) = minimize_multi(inits, &params, &SolverOptions::default())?;
    for r in records.into_iter().flatten() {
        println!("{:<7} eta E {:.6}  iterations {}", r.label, params.eta * r.final_energy, r.iterations);
    }
    let b = &best.breakdown;
    println!("minimizer ({}): eta E = {:.6}, symmetry ratio {:.8}", best.record.label, params.eta * b.total, b.symmetry_ratio());
    if let Some(ring) = locate_ring(&best.field) {
        println!("ring at r = {:.4}, theta = {:.4} (pi/2 = {:.4}), beta = {:.3}", ring.r, ring.theta, PI / 2.0, ring.beta_max);
    }
    let (reference, _) = sphere_integral_d_lambda(params.lambda(), 16, &ProfileGrid::default())?;
    println!("int_S2 D_lambda = {reference:.6}");
    Ok(())
}
