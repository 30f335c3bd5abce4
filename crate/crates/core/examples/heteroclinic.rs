//! The lambda = inf layer: closed-form geodesic heteroclinic and its cost.
use std::f64::consts::PI;

use nematic_colloid::kappa;
use nematic_colloid::profile::{d_infinity, geodesic_heteroclinic, GeodesicPath};

fn main() -> nematic_colloid::Result<()> {
    println!("kappa = 24^(1/4) = {:.10}", kappa());
    for theta in [PI / 6.0, PI / 3.0, PI / 2.0, 2.0 * PI / 3.0] {
        let path = GeodesicPath::optimal(theta);
        println!(
            "theta {:.4}: D_inf = {:.8}  path energy = {:.8}  target {:?}",
            theta,
            d_infinity(theta),
            path.energy(),
            path.target
        );
    }
    println!("\nt, n3 and angle to e3 along the theta = 2.5 heteroclinic:");
    for k in 0..8 {
        let t = k as f64 * 0.5;
        let n = geodesic_heteroclinic(2.5, t)?;
        println!("  t {:.1}  n = [{:+.6}, {:+.6}, {:+.6}]  |n - e3|^2 = {:.3e}", t, n.0[0], n.0[1], n.0[2], (n.0[0]).powi(2) + (n.0[2] - 1.0).powi(2));
    }
    println!("theta = pi towards +e3: {:?}", geodesic_heteroclinic(PI, 1.0).err().map(|e| e.to_string()));
    Ok(())
}
