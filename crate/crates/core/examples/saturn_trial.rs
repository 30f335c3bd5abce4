//! The Saturn-ring competitor: region map, energy and ring position.
use std::f64::consts::PI;

use nematic_colloid::axisym::{energy, locate_ring};
use nematic_colloid::trial::{build_saturn_trial, classify};
use nematic_colloid::{kappa, ModelParams};

fn main() -> nematic_colloid::Result<()> {
    let eta = 0.1;
    for r in [1.0, 1.05, 1.15, 1.25] {
        let row: Vec<String> = [0.5, 1.45, 1.52, PI / 2.0 - 1e-4].iter().map(|&t| format!("{:?}", classify(r, t, eta))).collect();
        println!("r {r:<5} regions at theta 0.5, 1.45, 1.52, pi/2: {}", row.join(", "));
    }
    println!();
    for xi in [0.02, 0.01, 0.005] {
        let p = ModelParams::new(xi, eta)?;
        let trial = build_saturn_trial(&p)?;
        let b = energy(&trial.field, &p);
        let ring = locate_ring(&trial.field);
        println!(
            "xi {xi:<6} eta E = {:.5}  excess E - 2 pi kappa/eta = {:.4} at |ln eps| = {:.4}  symmetry ratio {:.12}  ring at r = {:.4}, theta - pi/2 = {:+.2e}",
            eta * b.total,
            b.total - 2.0 * PI * kappa() / eta,
            p.epsilon().ln().abs(),
            b.symmetry_ratio(),
            ring.map_or(f64::NAN, |g| g.r),
            ring.map_or(f64::NAN, |g| g.theta - PI / 2.0)
        );
    }
    Ok(())
}
