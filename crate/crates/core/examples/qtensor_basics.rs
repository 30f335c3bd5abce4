//! Q-tensor coordinates, the two bulk potentials and the equivariance action.
use std::f64::consts::PI;

use nematic_colloid::qtensor::{
    biaxiality, boundary_tensor, coercivity_ratio, field_potential, nematic_potential, rotate_z, xi_form,
};
use nematic_colloid::{Director, QTensor};

fn main() -> nematic_colloid::Result<()> {
    let qinf = QTensor::infinity();
    println!("Q_inf = {:?}  |Q_inf| = {:.12}", qinf.0, qinf.norm());
    println!("f(Q_inf) = {:.3e}  g(Q_inf) = {:.3e}", nematic_potential(&qinf).0, field_potential(&qinf, 1e-8).0);

    let qb = boundary_tensor(PI / 3.0, 0.0);
    println!("Q_b(pi/3, 0) = {:?}", qb.0);
    println!("f(Q_b) = {:.3e}  g(Q_b) = {:.6}", nematic_potential(&qb).0, field_potential(&qb, 1e-8).0);

    // rotation about e3 leaves Q_inf fixed and acts on Q_b by phi
    let rotated = rotate_z(&qb, 0.7);
    println!("|R Q_b R^t - Q_b(pi/3, 0.7)| = {:.3e}", (rotated - boundary_tensor(PI / 3.0, 0.7)).norm());
    println!("azimuthal form Xi(Q_b) = {:.6}", xi_form(&qb));

    let biaxial = Director::from_angles(0.3, 0.0).to_qtensor(0.6) + Director::from_angles(1.2, 1.0).to_qtensor(0.3);
    println!("biaxiality: uniaxial {:.2e}, mixed {:.4}", biaxiality(&qb, 1e-6).unwrap(), biaxiality(&biaxial, 1e-6).unwrap());

    let ratio = coercivity_ratio(0.5, 20_000, 0.5, 7)?;
    println!("sampled min (f + h^2 g)/dist^2 near the uniaxial manifold at h = 0.5: {ratio:.4}");
    Ok(())
}
