//! Ginzburg-Landau core on the canonical square: each halving of eps adds about (pi/3) ln 2.
use std::f64::consts::PI;

use nematic_colloid::trial::{gl_core_minimize, SquarePatch};

fn main() -> nematic_colloid::Result<()> {
    let mut prev: Option<f64> = None;
    for eps in [0.1, 0.05, 0.025] {
        let n = SquarePatch::nodes_for(0.5, eps, 6.0);
        let patch = SquarePatch::canonical(n, eps)?;
        let sol = gl_core_minimize(&patch)?;
        let diff = prev.map(|p| format!("  increment {:.4} ((pi/3) ln 2 = {:.4})", sol.energy - p, PI / 3.0 * 2f64.ln())).unwrap_or_default();
        println!(
            "eps {eps:<6} n {n:<4} E = {:.6}  degree {}  vortices {}{diff}",
            sol.energy,
            sol.patch.boundary_degree(),
            sol.patch.vortex_cells().len()
        );
        prev = Some(sol.energy);
    }
    Ok(())
}
