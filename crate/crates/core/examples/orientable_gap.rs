//! Oriented (dipole) fields cost far more than the Saturn-ring minimizer.
use nematic_colloid::axisym::SolverOptions;
use nematic_colloid::harness::config::GridSection;
use nematic_colloid::harness::orientable_comparison;
use nematic_colloid::ModelParams;

fn main() -> nematic_colloid::Result<()> {
    let params = ModelParams::new(0.04, 0.2)?;
    let rep = orientable_comparison(&params, &GridSection::default(), &SolverOptions::default())?;
    println!("oriented ansatz eta E          {:.4}", rep.dipole_eta_energy);
    println!("minimizer eta E                {:.4}", rep.minimizer_eta_energy.unwrap_or(f64::NAN));
    println!("ratio                          {:.3}", rep.ratio.unwrap_or(f64::NAN));
    println!("quadrature int kappa(1 - cos)  {:.4}", rep.quadrature);
    println!("stated constant 8 pi kappa     {:.4}", rep.stated_constant);
    println!("limit 2 pi kappa               {:.4}", rep.limit);
    Ok(())
}
