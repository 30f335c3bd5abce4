//! Finite-lambda layer profiles and the sphere integral of D_lambda.
use std::f64::consts::PI;

use nematic_colloid::kappa;
use nematic_colloid::profile::{d_infinity, d_lambda_curve, minimize_profile, sphere_integral_d_lambda, ProfileGrid};
use nematic_colloid::qtensor::boundary_tensor;

fn main() -> nematic_colloid::Result<()> {
    let grid = ProfileGrid::default();
    println!("grid: L = {:.4}, N = {}", grid.length, grid.nodes);
    for theta in [PI / 6.0, PI / 3.0, PI / 2.0] {
        let q0 = boundary_tensor(theta, 0.0);
        let curve = d_lambda_curve(&q0, &[1.0, 10.0, 100.0, 1000.0], &grid)?;
        let row: Vec<String> = curve.iter().map(|(l, d)| format!("D_{l} = {d:.6}")).collect();
        println!("theta {:.4}: {}  D_inf = {:.6}", theta, row.join("  "), d_infinity(theta));
    }
    let r = minimize_profile(&boundary_tensor(PI / 2.0, 0.0), 5.0, &grid)?;
    println!("\nequatorial profile at lambda = 5 (start {:?}): |Q| along t", r.init);
    for t in [0.0, 0.25, 0.5, 1.0, 2.0, 4.0] {
        println!("  t {t:.2}  |Q| = {:.6}", r.sample(t).norm());
    }
    println!();
    for lambda in [1.0, 5.0, 30.0] {
        let (total, _) = sphere_integral_d_lambda(lambda, 16, &grid)?;
        println!("int_S2 D_{lambda} = {total:.6}   (2 pi kappa = {:.6})", 2.0 * PI * kappa());
    }
    Ok(())
}
